"""Scalar radial profiles with derivative access.

A ScalarProfile is a positive function of one radial variable exposing closed
forms up to `analytic_order` and a finite-difference fallback two orders
further.  Beyond plain values every builtin family also carries log/ratio
hooks (log value, d1/value, d2/value) so that downstream products of profiles
can be assembled in log space; see _stable.signed_product for why.

Builtin family identifiers (exact config strings):

    "power(a)"                s -> (1+s)^a
    "linear"                  s -> s
    "sinh", "cosh"
    "const(c)"
    "exp(a)"                  s -> e^{a s}
    "stretchexp(a,g)"         s -> e^{a s^g}
    "schwarzschild(m,eps,p):theta" / ":phi"
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _stable
from .errors import DomainError, RootNotFoundError, UnsupportedOrderError

_FD_H = float(np.cbrt(np.finfo(float).eps))  # ~6.06e-6


def _as_array(s):
    a = np.asarray(s, dtype=float)
    return a, (a.ndim == 0)


@dataclass(frozen=True)
class ScalarProfile:
    """A positive scalar function of one radial variable.

    `derivs` holds the closed forms for orders 0..analytic_order, each
    vectorized over numpy arrays.  Orders analytic_order+1 and +2 come from
    central differences of the highest closed form; beyond that is an error.
    The optional hooks keep large-argument evaluation in log space:

      log_value(s)        log of value(s)
      d1_ratio(s)         value'(s) / value(s)
      d2_ratio(s)         value''(s) / value(s)
      log_at_log(u)       log of value(e^u), stable when e^u underflows
                          (used for profiles evaluated at another profile's
                          output, e.g. xi at f(s))
    """

    label: str
    domain_start: float
    analytic_order: int
    derivs: tuple[Callable, ...]
    domain_end: float | None = None
    _log_value: Callable | None = None
    _d1_ratio: Callable | None = None
    _d2_ratio: Callable | None = None
    _log_at_log: Callable | None = None

    def _check_domain(self, a):
        if np.any(a < self.domain_start - 1e-12):
            raise DomainError(
                f"{self.label}: argument below domain start {self.domain_start:g}"
            )
        if self.domain_end is not None and np.any(a > self.domain_end + 1e-12):
            raise DomainError(
                f"{self.label}: argument beyond tabulated range {self.domain_end:g}"
            )

    def eval(self, s, order: int = 0):
        a, scalar = _as_array(s)
        self._check_domain(a)
        if order < 0:
            raise UnsupportedOrderError(f"negative derivative order {order}")
        if order <= self.analytic_order:
            out = np.asarray(self.derivs[order](a), dtype=float)
        elif order <= self.analytic_order + 2:
            top = self.derivs[self.analytic_order]
            h = _FD_H * np.maximum(1.0, np.abs(a))
            lo, hi = a - h, a + h
            self._check_domain(lo)
            self._check_domain(hi)
            if order == self.analytic_order + 1:
                out = (top(hi) - top(lo)) / (2.0 * h)
            else:
                out = (top(hi) - 2.0 * top(a) + top(lo)) / (h * h)
            out = np.asarray(out, dtype=float)
        else:
            raise UnsupportedOrderError(
                f"{self.label}: order {order} exceeds analytic order "
                f"{self.analytic_order} + 2"
            )
        return float(out) if scalar else out

    def value(self, s):
        return self.eval(s, 0)

    def d1(self, s):
        return self.eval(s, 1)

    def d2(self, s):
        return self.eval(s, 2)

    def log_value(self, s):
        a, scalar = _as_array(s)
        self._check_domain(a)
        if self._log_value is not None:
            out = np.asarray(self._log_value(a), dtype=float)
        else:
            with np.errstate(divide="ignore"):
                out = np.log(self.derivs[0](a))
        return float(out) if scalar else out

    def d1_ratio(self, s):
        a, scalar = _as_array(s)
        self._check_domain(a)
        if self._d1_ratio is not None:
            out = np.asarray(self._d1_ratio(a), dtype=float)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.asarray(self.derivs[1](a) / self.derivs[0](a), dtype=float)
        return float(out) if scalar else out

    def d2_ratio(self, s):
        a, scalar = _as_array(s)
        self._check_domain(a)
        if self._d2_ratio is not None:
            out = np.asarray(self._d2_ratio(a), dtype=float)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.asarray(self.derivs[2](a) / self.derivs[0](a), dtype=float)
        return float(out) if scalar else out

    def log_at_log(self, logarg):
        """log(value(e^u)); falls back to plain evaluation of e^u."""
        a, scalar = _as_array(logarg)
        if self._log_at_log is not None:
            out = np.asarray(self._log_at_log(a), dtype=float)
        else:
            with np.errstate(divide="ignore", under="ignore"):
                out = np.log(self.derivs[0](np.exp(a)))
        return float(out) if scalar else out


# ---------------------------------------------------------------------------
# builtin families


def power_profile(a: float) -> ScalarProfile:
    """(1+s)^a on s >= 0."""
    return ScalarProfile(
        label=f"power({a:g})",
        domain_start=0.0,
        analytic_order=2,
        derivs=(
            lambda s: (1.0 + s) ** a,
            lambda s: a * (1.0 + s) ** (a - 1.0),
            lambda s: a * (a - 1.0) * (1.0 + s) ** (a - 2.0),
        ),
        _log_value=lambda s: a * np.log1p(s),
        _d1_ratio=lambda s: a / (1.0 + s),
        _d2_ratio=lambda s: a * (a - 1.0) / (1.0 + s) ** 2,
    )


def linear_profile() -> ScalarProfile:
    def _log(s):
        with np.errstate(divide="ignore"):
            return np.log(s)

    return ScalarProfile(
        label="linear",
        domain_start=0.0,
        analytic_order=2,
        derivs=(lambda s: s + 0.0, lambda s: np.ones_like(s), lambda s: np.zeros_like(s)),
        _log_value=_log,
        _d1_ratio=lambda s: 1.0 / s,
        _d2_ratio=lambda s: np.zeros_like(s),
        _log_at_log=lambda u: u + 0.0,
    )


def sinh_profile() -> ScalarProfile:
    def _d1r(s):
        with np.errstate(divide="ignore"):
            return 1.0 / np.tanh(s)

    return ScalarProfile(
        label="sinh",
        domain_start=0.0,
        analytic_order=2,
        derivs=(np.sinh, np.cosh, np.sinh),
        _log_value=_stable.log_sinh,
        _d1_ratio=_d1r,
        _d2_ratio=lambda s: np.ones_like(s),
        _log_at_log=_stable.log_sinh_from_log,
    )


def cosh_profile() -> ScalarProfile:
    return ScalarProfile(
        label="cosh",
        domain_start=0.0,
        analytic_order=2,
        derivs=(np.cosh, np.sinh, np.cosh),
        _log_value=_stable.log_cosh,
        _d1_ratio=np.tanh,
        _d2_ratio=lambda s: np.ones_like(s),
    )


def const_profile(c: float) -> ScalarProfile:
    if not c > 0.0:
        raise ValueError(f"const profile requires a positive constant, got {c!r}")
    logc = math.log(c)
    return ScalarProfile(
        label=f"const({c:g})",
        domain_start=0.0,
        analytic_order=2,
        derivs=(
            lambda s: np.full_like(s, c),
            lambda s: np.zeros_like(s),
            lambda s: np.zeros_like(s),
        ),
        _log_value=lambda s: np.full_like(s, logc),
        _d1_ratio=lambda s: np.zeros_like(s),
        _d2_ratio=lambda s: np.zeros_like(s),
        _log_at_log=lambda u: np.full_like(u, logc),
    )


def exp_profile(a: float) -> ScalarProfile:
    return ScalarProfile(
        label=f"exp({a:g})",
        domain_start=0.0,
        analytic_order=2,
        derivs=(
            lambda s: np.exp(a * s),
            lambda s: a * np.exp(a * s),
            lambda s: a * a * np.exp(a * s),
        ),
        _log_value=lambda s: a * s,
        _d1_ratio=lambda s: np.full_like(s, a),
        _d2_ratio=lambda s: np.full_like(s, a * a),
    )


def stretchexp_profile(a: float, g: float) -> ScalarProfile:
    """e^{a s^g}; derivative ratios are a*g*s^{g-1} and its square plus curvature."""

    def _d1r(s):
        with np.errstate(divide="ignore"):
            return a * g * s ** (g - 1.0)

    def _d2r(s):
        with np.errstate(divide="ignore"):
            t = a * g * s ** (g - 1.0)
            return t * t + a * g * (g - 1.0) * s ** (g - 2.0)

    def _v(s):
        with np.errstate(over="ignore"):
            return np.exp(a * s**g)

    return ScalarProfile(
        label=f"stretchexp({a:g},{g:g})",
        domain_start=0.0,
        analytic_order=2,
        derivs=(
            _v,
            lambda s: _d1r(s) * _v(s),
            lambda s: _d2r(s) * _v(s),
        ),
        _log_value=lambda s: a * s**g,
        _d1_ratio=_d1r,
        _d2_ratio=_d2r,
    )


# ---------------------------------------------------------------------------
# Schwarzschild-type profile pair


@dataclass(frozen=True)
class SchwarzschildProfilePair:
    """theta = radius(s) and phi = sqrt(zeta(radius(s))) for the metric
    1/zeta dr^2 + r^2 dOmega_p, zeta(r) = 1 - eps r^2 - 2m r^{2-p}.

    s is arclength from the horizon (the unique positive zero of zeta), so
    phi(0) = 0 and theta(0) = horizon_radius.
    """

    m: float
    eps: int
    p: int
    horizon_radius: float
    theta: ScalarProfile
    phi: ScalarProfile
    s_max_built: float


def _zeta_funcs(m: float, eps: int, p: int):
    e = float(eps)

    def zeta(r):
        return 1.0 - e * r * r - 2.0 * m * r ** (2.0 - p)

    def dzeta(r):
        return -2.0 * e * r + 2.0 * m * (p - 2.0) * r ** (1.0 - p)

    def ddzeta(r):
        return -2.0 * e - 2.0 * m * (p - 2.0) * (p - 1.0) * r ** (-float(p))

    return zeta, dzeta, ddzeta


def _horizon_root(m: float, eps: int, p: int) -> float:
    zeta, dzeta, _ = _zeta_funcs(m, eps, p)
    lo = 1e-9
    hi = max(1.0, (4.0 * m) ** (1.0 / (p - 2.0)))
    for _i in range(200):
        if zeta(hi) > 0.0:
            break
        hi *= 2.0
    if not (zeta(lo) < 0.0 < zeta(hi)):
        raise RootNotFoundError(
            f"zeta(m={m:g}, eps={eps}, p={p}) has no sign change on [{lo:g}, {hi:g}]"
        )
    for _i in range(80):
        mid = 0.5 * (lo + hi)
        if zeta(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    for _i in range(6):
        step = zeta(r) / dzeta(r)
        r_new = r - step
        if not (lo * 0.5 < r_new < hi * 2.0):
            break
        r = r_new
        if abs(step) < 1e-15 * r:
            break
    return r


_R_CAP = 1e150  # keeps zeta ~ r^2 inside double range for eps = -1


def schwarzschild_build(
    m: float, eps: int, p: int, s_max: float | None = None
) -> SchwarzschildProfilePair:
    """Tabulate radius(s) from dr/ds = sqrt(zeta(r)), r(0) = horizon root.

    The square root has a simple zero at s = 0, so integration starts from
    the series r ~ r0 + zeta'(r0) s^2/4 at s_h = 1e-3 r0 and proceeds by RK4
    with steps growing to 0.4% of s.  The table is interpolated with a cubic
    Hermite spline whose node slopes are the exact ODE right-hand side.
    """
    if not (m > 0.0):
        raise ValueError(f"mass must be positive, got {m!r}")
    if eps not in (0, -1):
        raise ValueError(f"eps must be 0 or -1, got {eps!r}")
    if p < 3:
        raise ValueError(f"p must be at least 3, got {p!r}")
    if s_max is None:
        s_max = 2.0**21 if eps == 0 else 700.0

    zeta, dzeta, ddzeta = _zeta_funcs(m, eps, p)
    r0 = _horizon_root(m, eps, p)

    def rhs(r):
        return math.sqrt(max(zeta(r), 0.0))

    s_h = 1e-3 * r0
    s_nodes = [0.0, s_h]
    r_nodes = [r0, r0 + 0.25 * dzeta(r0) * s_h * s_h]

    s, r = s_h, r_nodes[1]
    while s < s_max and r < _R_CAP:
        # step stays a fixed fraction of s: the launch region r - r0 ~ s^2
        # needs resolution relative to s, not to r0
        h = min(0.004 * s, s_max - s if s_max - s > 0 else 0.004 * s)
        if h < 1e-12 * max(1.0, s):
            break
        k1 = rhs(r)
        k2 = rhs(r + 0.5 * h * k1)
        k3 = rhs(r + 0.5 * h * k2)
        k4 = rhs(r + h * k3)
        r = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s = s + h
        s_nodes.append(s)
        r_nodes.append(r)

    s_arr = np.asarray(s_nodes)
    r_arr = np.asarray(r_nodes)
    with np.errstate(over="ignore"):
        slopes = np.sqrt(np.maximum(zeta(r_arr), 0.0))
    radius = CubicHermiteSpline(s_arr, r_arr, slopes)
    s_built = float(s_arr[-1])

    def rad(sv):
        return radius(np.minimum(np.asarray(sv, dtype=float), s_built))

    theta = ScalarProfile(
        label=f"schwarzschild({m:g},{eps},{p}):theta",
        domain_start=0.0,
        analytic_order=2,
        domain_end=s_built,
        derivs=(
            lambda sv: rad(sv) + 0.0,
            lambda sv: np.sqrt(np.maximum(zeta(rad(sv)), 0.0)),
            lambda sv: 0.5 * dzeta(rad(sv)),
        ),
    )

    # phi' = zeta'(r)/2 exactly: d/ds sqrt(zeta(r(s))) = zeta' r'/(2 sqrt(zeta))
    # and r' = sqrt(zeta), so the singular factors cancel at the horizon.
    phi = ScalarProfile(
        label=f"schwarzschild({m:g},{eps},{p}):phi",
        domain_start=0.0,
        analytic_order=2,
        domain_end=s_built,
        derivs=(
            lambda sv: np.sqrt(np.maximum(zeta(rad(sv)), 0.0)),
            lambda sv: 0.5 * dzeta(rad(sv)),
            lambda sv: 0.5 * ddzeta(rad(sv)) * np.sqrt(np.maximum(zeta(rad(sv)), 0.0)),
        ),
    )

    return SchwarzschildProfilePair(
        m=m, eps=eps, p=p, horizon_radius=r0, theta=theta, phi=phi, s_max_built=s_built
    )


@functools.lru_cache(maxsize=16)
def _schwarzschild_cached(m: float, eps: int, p: int) -> SchwarzschildProfilePair:
    return schwarzschild_build(m, eps, p)


# ---------------------------------------------------------------------------
# convexity audit


@dataclass(frozen=True)
class ConvexityReport:
    min_ddot: float
    min_dot: float
    passed: bool


def convexity_audit(xi: ScalarProfile, grid) -> ConvexityReport:
    """Fiber-warping admissibility: xi'' >= 0 and xi' >= 1 on the grid."""
    g = np.asarray(grid, dtype=float)
    ddot = np.min(xi.eval(g, 2))
    dot = np.min(xi.eval(g, 1))
    return ConvexityReport(
        min_ddot=float(ddot),
        min_dot=float(dot),
        passed=bool(ddot >= -1e-10 and dot >= 1.0 - 1e-10),
    )


# ---------------------------------------------------------------------------
# family-id parser

_ARGS_RE = re.compile(r"^([a-z]+)\(([^()]*)\)$")


def profile_from_id(text: str) -> ScalarProfile:
    """Build a profile from its exact config identifier string."""
    t = text.strip()
    if t == "linear":
        return linear_profile()
    if t == "sinh":
        return sinh_profile()
    if t == "cosh":
        return cosh_profile()
    if ":" in t:
        head, _sep, part = t.partition(":")
        mo = _ARGS_RE.match(head.strip())
        if mo is None or mo.group(1) != "schwarzschild":
            raise ValueError(f"unknown profile id {text!r}")
        if part not in ("theta", "phi"):
            raise ValueError(
                f"schwarzschild profile selector must be :theta or :phi, got {text!r}"
            )
        args = _parse_args(mo.group(2), text, 3)
        m, eps, p = args[0], int(args[1]), int(args[2])
        pair = _schwarzschild_cached(m, eps, p)
        return pair.theta if part == "theta" else pair.phi
    mo = _ARGS_RE.match(t)
    if mo is None:
        raise ValueError(f"unknown profile id {text!r}")
    name, raw = mo.group(1), mo.group(2)
    if name == "power":
        return power_profile(*_parse_args(raw, text, 1))
    if name == "const":
        return const_profile(*_parse_args(raw, text, 1))
    if name == "exp":
        return exp_profile(*_parse_args(raw, text, 1))
    if name == "stretchexp":
        return stretchexp_profile(*_parse_args(raw, text, 2))
    raise ValueError(f"unknown profile id {text!r}")


def _parse_args(raw: str, full: str, n: int) -> list[float]:
    parts = [x.strip() for x in raw.split(",")] if raw.strip() else []
    if len(parts) != n:
        raise ValueError(f"profile id {full!r} expects {n} argument(s)")
    try:
        return [float(x) for x in parts]
    except ValueError as exc:
        raise ValueError(f"profile id {full!r}: {exc}") from None
