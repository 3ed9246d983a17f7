"""Integral test, hypothesis audit, recurrence/transience verdict.

Everything here is a heuristic at a finite horizon: verdicts carry the
horizon they were computed at and the reports say so.  Limit and boundedness
checks sample a geometric grid; improper integrals are compared across
dyadic windows.  The audit quantities are assembled in log space (see
_stable) because the hyperbolic families overflow doubles long before the
horizon is reached.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import _stable
from .errors import EvaluationError
from .geometry import TubeDomain, WarpedModel, s_grid
from .profiles import (
    const_profile,
    cosh_profile,
    exp_profile,
    linear_profile,
    power_profile,
    sinh_profile,
)

CONVERGENT = "Convergent"
DIVERGENT = "Divergent"
INCONCLUSIVE = "Inconclusive"

RECURRENT = "Recurrent"
TRANSIENT = "Transient"
INAPPLICABLE = "Inapplicable"

DEFAULT_S0 = 1.0
DEFAULT_HORIZON = float(2**20)

# log-magnitude beyond which a window leaves double range and is integrated
# by log-domain trapezoid instead of adaptive quadrature
_LOG_LINEAR_RANGE = 600.0


@dataclass(frozen=True)
class DyadicThresholds:
    convergent: float = 0.9
    divergent: float = 0.98
    windows: int = 4


@dataclass(frozen=True)
class ConvergenceVerdict:
    kind: str
    value_estimate: float | None
    window_ratios: tuple[float, ...]
    horizon: float
    log_windows: tuple[float, ...] = field(repr=False, default=())
    note: str = ""


def improper_integral_verdict(
    fn,
    s0: float,
    horizon: float,
    thresholds: DyadicThresholds = DyadicThresholds(),
    log_fn=None,
) -> ConvergenceVerdict:
    """Dyadic-window convergence heuristic for integral_{s0}^inf |fn|.

    fn is called with scalars (adaptive quadrature); log_fn, when supplied,
    is a vectorized log|fn| used for probing and for windows whose magnitude
    leaves double range.
    """
    if not s0 > 0.0:
        raise ValueError(f"s0 must be positive, got {s0}")
    if horizon < 16.0 * s0:
        raise ValueError(f"horizon {horizon:g} below 16*s0 = {16.0 * s0:g}")
    n_win = int(np.floor(np.log2(horizon / s0)))
    edges = s0 * 2.0 ** np.arange(n_win + 1)

    log_w = np.empty(n_win)
    for k in range(n_win):
        log_w[k] = _window_log_mass(fn, log_fn, edges[k], edges[k + 1])

    with np.errstate(over="ignore", invalid="ignore"):
        diffs = log_w[1:] - log_w[:-1]
        both_zero = np.isneginf(log_w[1:]) & np.isneginf(log_w[:-1])
        ratios = np.where(both_zero, 0.0, np.exp(diffs))

    w = thresholds.windows
    tail = ratios[-w:]
    actual_horizon = float(edges[-1])
    note = f"heuristic at horizon {actual_horizon:g}"
    if len(tail) >= w and np.all(tail <= thresholds.convergent):
        rho = float(np.max(tail))
        with np.errstate(over="ignore", under="ignore"):
            body = float(np.sum(np.exp(log_w)))
            last = float(np.exp(log_w[-1]))
        estimate = body + last * rho / (1.0 - rho)
        kind, value = CONVERGENT, estimate
    elif len(tail) >= w and np.all(tail >= thresholds.divergent):
        kind, value = DIVERGENT, None
    else:
        kind, value = INCONCLUSIVE, None
    return ConvergenceVerdict(
        kind=kind,
        value_estimate=value,
        window_ratios=tuple(float(x) for x in ratios),
        horizon=actual_horizon,
        log_windows=tuple(float(x) for x in log_w),
        note=note,
    )


def _window_log_mass(fn, log_fn, a: float, b: float) -> float:
    probe = np.geomspace(a, b, 33)
    if log_fn is not None:
        g = np.asarray(log_fn(probe), dtype=float)
    else:
        with np.errstate(divide="ignore"):
            g = np.log(np.abs(np.array([float(fn(x)) for x in probe])))
    if np.any(np.isnan(g)) or np.any(np.isposinf(g)):
        raise EvaluationError(f"non-finite integrand sample in window [{a:g}, {b:g}]")
    top = float(np.max(g))
    if -_LOG_LINEAR_RANGE < top < _LOG_LINEAR_RANGE:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out = quad(lambda x: abs(float(fn(x))), a, b, limit=200, full_output=1)
        val = out[0]
        ok = len(out) <= 3 and np.isfinite(val) and val >= 0.0
        if ok:
            with np.errstate(divide="ignore"):
                return float(np.log(val))
        # fall through to the log-domain route on quadrature trouble
    x = np.geomspace(a, b, 1025)
    if log_fn is not None:
        g = np.asarray(log_fn(x), dtype=float)
    else:
        with np.errstate(divide="ignore"):
            g = np.log(np.abs(np.array([float(fn(v)) for v in x])))
    if np.any(np.isnan(g)) or np.any(np.isposinf(g)):
        raise EvaluationError(f"non-finite integrand sample in window [{a:g}, {b:g}]")
    return _stable.log_trapezoid(g, x)


# ---------------------------------------------------------------------------
# the integral I


def _log_integrand_I(dom: TubeDomain):
    m = dom.model

    def log_fn(s):
        return (
            (1 - m.p) * m.theta.log_value(s)
            - m.q * m.phi.log_value(s)
            - m.q * m.xi.log_at_log(dom.f.log_value(s))
        )

    return log_fn


def integrand_I(dom: TubeDomain, s):
    """theta^{1-p} phi^{-q} xi(f)^{-q}, the density of the test integral."""
    log_fn = _log_integrand_I(dom)
    with np.errstate(over="ignore", under="ignore"):
        out = np.exp(log_fn(s))
    return float(out) if np.ndim(s) == 0 else out


# ---------------------------------------------------------------------------
# hypothesis audit


@dataclass(frozen=True)
class PointwiseCheck:
    label: str
    kind: str  # "limit", "bounded", "small_o"
    target: float | None
    samples_s: tuple[float, ...]
    samples: tuple[float, ...]
    passed: bool


@dataclass(frozen=True)
class IntegralCheck:
    label: str
    verdict: ConvergenceVerdict
    passed: bool


@dataclass(frozen=True)
class HypothesisAudit:
    pointwise: tuple[PointwiseCheck, ...]
    integral: tuple[IntegralCheck, ...]
    overall: str  # "Pass" / "Fail" / "Inconclusive"
    failures: tuple[str, ...]
    horizon: float


def _audit_quantities(dom: TubeDomain):
    """The six pointwise quantities as (label, kind, target, vectorized fn)."""
    m = dom.model
    ph, xi, f = m.phi, m.xi, dom.f

    def logxif(s):
        return xi.log_at_log(f.log_value(s))

    def f_lin(s):
        with np.errstate(under="ignore", over="ignore"):
            return np.exp(f.log_value(s))

    def p1(s):
        return _stable.signed_product(
            [2.0 * ph.log_value(s), logxif(s), f.log_value(s)], [f.d2_ratio(s)]
        )

    def p2(s):
        return _stable.signed_product([ph.log_value(s), f.log_value(s)], [f.d1_ratio(s)])

    def p3(s):
        return _stable.signed_product([ph.log_value(s), logxif(s)], [ph.d1_ratio(s)])

    def p4(s):
        return xi.d1(f_lin(s))

    def p5(s):
        return _stable.signed_product(
            [2.0 * ph.log_value(s), logxif(s), f.log_value(s)], [f.d1_ratio(s)]
        )

    def p6(s):
        return _stable.signed_product([2.0 * logxif(s)], [xi.d2_ratio(f_lin(s))])

    return [
        ("phi^2 xi(f) f'' -> 0", "limit", 0.0, p1),
        ("phi f' -> 0", "limit", 0.0, p2),
        ("phi' xi(f) = O(1)", "bounded", None, p3),
        ("xi'(f) -> 1", "limit", 1.0, p4),
        ("phi^2 xi(f) f' = o(s)", "small_o", None, p5),
        ("xi(f) xi''(f) = O(1)", "bounded", None, p6),
    ]


def _audit_integrands(dom: TubeDomain):
    """The five integral hypotheses as (label, scalar fn, vectorized log|fn|)."""
    m = dom.model
    th, ph, xi, f = m.theta, m.phi, m.xi, dom.f

    def logxif(s):
        return xi.log_at_log(f.log_value(s))

    def f_lin(s):
        with np.errstate(under="ignore", over="ignore"):
            return np.exp(f.log_value(s))

    def one_minus_xidot_sq(s):
        d = xi.d1(f_lin(s))
        return 1.0 - d * d

    specs = [
        (
            "integral phi^2 |f'|^3 / xi(f)",
            lambda s: [2.0 * ph.log_value(s) + 3.0 * f.log_value(s) - logxif(s)],
            lambda s: [f.d1_ratio(s) ** 3],
        ),
        (
            "integral phi^2 (theta'/theta + phi'/phi) f'^2",
            lambda s: [2.0 * ph.log_value(s) + 2.0 * f.log_value(s)],
            lambda s: [f.d1_ratio(s) ** 2, th.d1_ratio(s) + ph.d1_ratio(s)],
        ),
        (
            "integral xi(f) xi''(f)",
            lambda s: [2.0 * logxif(s)],
            lambda s: [xi.d2_ratio(f_lin(s))],
        ),
        (
            "integral (f'/xi(f)) (1 - xi'(f)^2)",
            lambda s: [f.log_value(s) - logxif(s)],
            lambda s: [f.d1_ratio(s), one_minus_xidot_sq(s)],
        ),
        (
            "integral phi' f'",
            lambda s: [ph.log_value(s) + f.log_value(s)],
            lambda s: [ph.d1_ratio(s), f.d1_ratio(s)],
        ),
    ]

    out = []
    for label, logs, lins in specs:
        def fn(s, logs=logs, lins=lins):
            return float(_stable.signed_product(logs(s), lins(s)))

        def log_fn(s, logs=logs, lins=lins):
            return _stable.log_abs_product(logs(s), lins(s))

        out.append((label, fn, log_fn))
    return out


def _check_limit(samples: np.ndarray, target: float) -> bool:
    if len(samples) < 12 or not np.all(np.isfinite(samples[-12:])):
        return False
    dev = np.abs(samples - target)
    if np.any(dev[-8:] > 0.05):
        return False
    # per-octave worst deviation must not grow over the last three octaves
    octs = [np.max(dev[-12:-8]), np.max(dev[-8:-4]), np.max(dev[-4:])]
    return octs[0] >= octs[1] >= octs[2]


def _check_bounded(samples: np.ndarray) -> bool:
    # boundedness is asymptotic: the tail must not outgrow the early scale
    # (a decaying quantity may legitimately peak in its first few samples)
    n = len(samples)
    if n < 4 or not np.all(np.isfinite(samples)):
        return False
    k = min(8, max(1, n // 3))
    head = np.abs(samples[:k])
    return bool(np.max(np.abs(samples[k:])) <= 10.0 * np.median(head) + 1e-8)


def _check_small_o(samples: np.ndarray, grid: np.ndarray) -> bool:
    w = np.abs(samples) / grid
    if len(w) < 8 or not np.all(np.isfinite(w[-8:])):
        return False
    tail = w[-8:]
    if np.any(tail >= 0.05):
        return False
    return bool(np.all(tail[1:] <= tail[:-1] * (1.0 + 1e-9) + 1e-12))


def hypothesis_audit(
    dom: TubeDomain,
    s0: float = DEFAULT_S0,
    horizon: float = DEFAULT_HORIZON,
    thresholds: DyadicThresholds = DyadicThresholds(),
) -> HypothesisAudit:
    """Audit the six pointwise and five integral hypotheses of the test."""
    grid = s_grid(s0, horizon)
    pointwise = []
    for label, kind, target, fn in _audit_quantities(dom):
        samples = np.asarray(fn(grid), dtype=float)
        if kind == "limit":
            ok = _check_limit(samples, target)
        elif kind == "bounded":
            ok = _check_bounded(samples)
        else:
            ok = _check_small_o(samples, grid)
        pointwise.append(
            PointwiseCheck(
                label=label,
                kind=kind,
                target=target,
                samples_s=tuple(float(x) for x in grid[-8:]),
                samples=tuple(float(x) for x in samples[-8:]),
                passed=bool(ok),
            )
        )

    integral = []
    for label, fn, log_fn in _audit_integrands(dom):
        v = improper_integral_verdict(fn, s0, horizon, thresholds, log_fn=log_fn)
        integral.append(IntegralCheck(label=label, verdict=v, passed=v.kind == CONVERGENT))

    failures = tuple(
        [c.label for c in pointwise if not c.passed]
        + [c.label for c in integral if c.verdict.kind == DIVERGENT]
    )
    if failures:
        overall = "Fail"
    elif any(c.verdict.kind == INCONCLUSIVE for c in integral):
        overall = "Inconclusive"
    else:
        overall = "Pass"
    return HypothesisAudit(
        pointwise=tuple(pointwise),
        integral=tuple(integral),
        overall=overall,
        failures=failures,
        horizon=float(horizon),
    )


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ClassificationReport:
    audit: HypothesisAudit
    I_verdict: ConvergenceVerdict
    verdict: str
    s0: float
    horizon: float


def classify(
    dom: TubeDomain,
    s0: float = DEFAULT_S0,
    horizon: float = DEFAULT_HORIZON,
    thresholds: DyadicThresholds = DyadicThresholds(),
) -> ClassificationReport:
    """Recurrent iff the audit passes and I diverges; Transient iff the audit
    passes and I converges; Inapplicable otherwise."""
    audit = hypothesis_audit(dom, s0, horizon, thresholds)
    log_fn = _log_integrand_I(dom)

    def fn(s):
        with np.errstate(over="ignore", under="ignore"):
            return float(np.exp(log_fn(np.asarray(s, dtype=float))))

    iv = improper_integral_verdict(fn, s0, horizon, thresholds, log_fn=log_fn)
    if audit.overall == "Pass" and iv.kind == DIVERGENT:
        verdict = RECURRENT
    elif audit.overall == "Pass" and iv.kind == CONVERGENT:
        verdict = TRANSIENT
    else:
        verdict = INAPPLICABLE
    return ClassificationReport(
        audit=audit, I_verdict=iv, verdict=verdict, s0=float(s0), horizon=float(horizon)
    )


# ---------------------------------------------------------------------------
# builtin parametrized families and threshold scan


def family_domain(family: str, p: int, q: int, alpha: float) -> TubeDomain:
    """Named one-parameter families used by the scans and acceptance tables."""
    if family == "flat":
        model = WarpedModel(
            p=p, q=q, theta=linear_profile(), phi=const_profile(1.0), xi=linear_profile()
        )
        return TubeDomain(model=model, f=power_profile(alpha))
    if family == "hyperbolic":
        model = WarpedModel(
            p=p, q=q, theta=sinh_profile(), phi=cosh_profile(), xi=sinh_profile()
        )
        return TubeDomain(model=model, f=exp_profile(alpha))
    if family == "model_space":
        model = WarpedModel(
            p=p, q=q, theta=power_profile(alpha), phi=const_profile(1.0), xi=linear_profile()
        )
        return TubeDomain(model=model, f=const_profile(1.0))
    raise ValueError(f"unknown family {family!r}")


@dataclass(frozen=True)
class ScanResult:
    family: str
    p: int
    q: int
    rows: tuple[tuple[float, str], ...]
    cutoff: float | None


def threshold_scan(
    family: str,
    p: int,
    q: int,
    alphas,
    s0: float = DEFAULT_S0,
    horizon: float = DEFAULT_HORIZON,
    thresholds: DyadicThresholds = DyadicThresholds(),
) -> ScanResult:
    """classify per alpha; cutoff = midpoint between the last Recurrent and
    the first Transient alpha (None when either side is absent)."""
    alphas = sorted(float(a) for a in alphas)
    rows = []
    for a in alphas:
        rep = classify(family_domain(family, p, q, a), s0, horizon, thresholds)
        rows.append((a, rep.verdict))
    rec = [a for a, v in rows if v == RECURRENT]
    tra = [a for a, v in rows if v == TRANSIENT]
    cutoff = None
    if rec and tra and max(rec) < min(tra):
        cutoff = 0.5 * (max(rec) + min(tra))
    return ScanResult(family=family, p=p, q=q, rows=tuple(rows), cutoff=cutoff)
