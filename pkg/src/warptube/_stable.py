"""Overflow-proof building blocks.

Quantities in this package are products of factors that individually overflow
or underflow double precision long before the product does (cosh(s)^2 against
e^{-3s}, say, already at s ~ 360 while the product decays).  Everything that
has to survive the full working range is therefore assembled as

    sign * exp(sum of log-magnitudes) * (bounded ratio factors)

with exact zeros short-circuited before they can poison the exponent sum.
"""

from __future__ import annotations

import numpy as np

_LN2 = float(np.log(2.0))


def signed_product(log_factors=(), linear_factors=()):
    """prod(linear_factors) * exp(sum(log_factors)), elementwise.

    An exact zero among the linear factors yields exactly 0 even when the
    log factors sum to +inf; this is the identity `0 * anything-finite-in-
    log-space = 0` that naive evaluation turns into nan.
    """
    arrays = [np.asarray(a, dtype=float) for a in log_factors]
    lins = [np.asarray(a, dtype=float) for a in linear_factors]
    shape = np.broadcast_shapes(*(a.shape for a in arrays), *(a.shape for a in lins))
    logmag = np.zeros(shape)
    for a in arrays:
        logmag = logmag + a
    sign = np.ones(shape)
    zero = np.zeros(shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for a in lins:
            zero |= a == 0.0
            sign = sign * np.sign(a)
            logmag = logmag + np.log(np.abs(np.where(a == 0.0, 1.0, a)))
    with np.errstate(over="ignore", under="ignore"):
        out = sign * np.exp(logmag)
    return np.where(zero, 0.0, out)


def log_abs_product(log_factors=(), linear_factors=()):
    """log |signed_product(...)|; -inf where a linear factor is exactly zero."""
    arrays = [np.asarray(a, dtype=float) for a in log_factors]
    lins = [np.asarray(a, dtype=float) for a in linear_factors]
    shape = np.broadcast_shapes(*(a.shape for a in arrays), *(a.shape for a in lins))
    logmag = np.zeros(shape)
    for a in arrays:
        logmag = logmag + a
    zero = np.zeros(shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        for a in lins:
            zero |= a == 0.0
            logmag = logmag + np.log(np.abs(np.where(a == 0.0, 1.0, a)))
    return np.where(zero, -np.inf, logmag)


def log_sinh(x):
    """log(sinh x) for x > 0, exact through the whole double range."""
    x = np.asarray(x, dtype=float)
    tiny = x < 1e-4   # below the series truncation floor of double precision
    big = x > 20.0    # above this sinh(x) = e^x/2 to full precision of log1p
    mid = ~(tiny | big)
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.log(np.where(mid | big, 1.0, x)) + x * x / 6.0
        md = np.log(np.sinh(np.where(mid, x, 1.0)))
        hi = np.where(big, x, 1.0) - _LN2 + np.log1p(-np.exp(-2.0 * np.where(big, x, 1.0)))
    return np.where(tiny, lo, np.where(mid, md, hi))


def log_cosh(x):
    x = np.asarray(x, dtype=float)
    return x - _LN2 + np.log1p(np.exp(-2.0 * x))


def log_sinh_from_log(logx):
    """log(sinh(e^u)) given u = log x; safe when x itself underflows."""
    logx = np.asarray(logx, dtype=float)
    with np.errstate(over="ignore", under="ignore"):
        x = np.exp(logx)
    small = x < 1e-4
    return np.where(small, logx + x * x / 6.0, log_sinh(np.where(small, 1.0, x)))


def log_trapezoid(log_y, x):
    """log of trapezoid(exp(log_y), x) without leaving log space."""
    log_y = np.asarray(log_y, dtype=float)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        seg = np.logaddexp(log_y[..., 1:], log_y[..., :-1]) + np.log(np.diff(x)) - _LN2
    m = np.max(seg, axis=-1)
    if not np.isfinite(m):
        return float(m)  # all segments -inf (identically zero integrand) or a nan
    with np.errstate(under="ignore"):
        return float(m + np.log(np.sum(np.exp(seg - m), axis=-1)))
