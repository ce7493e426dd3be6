"""Principal branch of the Lambert W function and the derived functions R and A.

Everything here accepts either a Python float or a numpy array.  Scalars come
back as floats, arrays as arrays of the same shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError

# 1/e split into a double and its rounding error, so a + 1/e keeps its low bits
# near the branch point.
_INV_E_HI = 0.36787944117144233
_INV_E_LO = -1.2428753672788363e-17
BRANCH_POINT = -_INV_E_HI

# Arguments up to this far below -1/e are treated as round-off and clamped.
BRANCH_TOL = 1e-12


@dataclass(frozen=True)
class LambertConfig:
    abs_tol: float = 1e-12
    max_iter: int = 64

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


DEFAULT_CONFIG = LambertConfig()


def _unwrap(x, scalar):
    return float(x.reshape(-1)[0]) if scalar else x


def _seed(a, d):
    """Starting point for Halley: branch series, log1p, or the asymptotic form."""
    w = np.empty_like(a)

    near = a < -0.25
    p = np.sqrt(2.0 * math.e * d[near])
    w[near] = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0 + p * 769.0 / 17280.0))))

    mid = ~near & (a < 3.0)
    w[mid] = np.log1p(a[mid]) * (1.0 - 0.2 * np.log1p(a[mid]) / (1.0 + np.log1p(a[mid])))

    far = a >= 3.0
    l1 = np.log(a[far])
    l2 = np.log(l1)
    w[far] = l1 - l2 + l2 / l1
    return w


def lambert_w0(a, config: LambertConfig = DEFAULT_CONFIG):
    """Principal-branch Lambert W, the inverse of w*exp(w) restricted to w >= -1.

    Arguments in ``[-1/e - BRANCH_TOL, -1/e]`` map to exactly -1; anything lower
    raises :class:`DomainError`.
    """
    scalar = np.ndim(a) == 0
    a = np.array(a, dtype=float, ndmin=1)
    if np.any(np.isnan(a)):
        raise DomainError("lambert_w0 of NaN")
    if np.any(a < BRANCH_POINT - BRANCH_TOL):
        bad = a[a < BRANCH_POINT - BRANCH_TOL]
        raise DomainError(f"lambert_w0 argument below -1/e: {bad[0]!r}")

    out = np.empty_like(a)
    at_branch = a <= BRANCH_POINT
    out[at_branch] = -1.0
    zero = a == 0.0
    out[zero] = 0.0
    inf = np.isposinf(a)
    out[inf] = np.inf

    todo = ~(at_branch | zero | inf)
    if np.any(todo):
        x = a[todo]
        d = (x + _INV_E_HI) + _INV_E_LO
        w = _seed(x, d)
        done = np.zeros(x.shape, dtype=bool)
        for _ in range(config.max_iter):
            act = ~done
            wa = w[act]
            ew = np.exp(wa)
            f = wa * ew - x[act]
            wp1 = wa + 1.0
            step = f / (ew * wp1 - (wa + 2.0) * f / (2.0 * wp1))
            step = np.where(np.isfinite(step), step, 0.0)
            wn = np.maximum(wa - step, -1.0)
            w[act] = wn
            done[act] = np.abs(step) <= 4.0 * np.finfo(float).eps * (1.0 + np.abs(wn))
            if done.all():
                break
        resid = np.abs(w * np.exp(w) - x)
        ok = resid <= config.abs_tol * np.maximum(1.0, np.abs(x))
        if not ok.all():
            i = int(np.argmin(ok))
            raise ConvergenceError(
                "lambert_w0 did not converge",
                argument=float(x[i]), estimate=float(w[i]), residual=float(resid[i]),
            )
        out[todo] = w
    return _unwrap(out, scalar)


def lambert_w0_derivative(a, config: LambertConfig = DEFAULT_CONFIG):
    """W'(a) = W(a) / (a (W(a) + 1)), with the limit 1 at a = 0."""
    scalar = np.ndim(a) == 0
    a = np.array(a, dtype=float, ndmin=1)
    if np.any(a <= BRANCH_POINT):
        raise DomainError("W' is unbounded at -1/e and undefined below it")
    w = lambert_w0(a, config)
    with np.errstate(invalid="ignore", divide="ignore"):
        # W(a)/a = exp(-W(a)) avoids the 0/0 at the origin.
        out = np.exp(-w) / (w + 1.0)
    return _unwrap(out, scalar)


_NEAR_ONE = 0.5


def _log_gap(t):
    """t - log1p(t), accurate for small t."""
    out = t - np.log1p(t)
    small = t < 1e-3
    ts = t[small]
    out[small] = ts * ts * (0.5 + ts * (-1.0 / 3 + ts * (0.25 + ts * (-0.2 + ts * (1.0 / 6 + ts * (-1.0 / 7 + ts / 8))))))
    return out


def _neg_log_gap(s):
    """-s - log1p(-s), accurate for small s."""
    out = -s - np.log1p(-s)
    small = s < 1e-3
    ss = s[small]
    out[small] = ss * ss * (0.5 + ss * (1.0 / 3 + ss * (0.25 + ss * (0.2 + ss * (1.0 / 6 + ss * (1.0 / 7 + ss / 8))))))
    return out


def _r_near_one(t):
    """R(1 + t) for small t > 0 without going through the rounded W argument.

    Writing R = -1 + s and taking logs of w e^w = -a e^{-a} gives
    -s - log1p(-s) = t - log1p(t), which stays well conditioned as t -> 0.
    """
    target = _log_gap(t)
    # Below ~1e-150 the squares underflow; there s = t to working precision.
    s = np.where(target > 0, np.sqrt(2.0 * target), t)
    live = target > 0
    for _ in range(60):
        sl = s[live]
        step = (_neg_log_gap(sl) - target[live]) * (1.0 - sl) / sl
        s[live] = sl - step
        if np.all(np.abs(step) <= 4.0 * np.finfo(float).eps * sl):
            break
    return -1.0 + s


def r_func(a, config: LambertConfig = DEFAULT_CONFIG):
    """R(a) = W(-a exp(-a)).

    For a <= 1 this is exactly -a.  For a > 1 it is the conjugate point on the
    principal branch, negative and increasing in a.
    """
    scalar = np.ndim(a) == 0
    a = np.array(a, dtype=float, ndmin=1)
    out = -a.copy()
    near = (a > 1.0) & (a < 1.0 + _NEAR_ONE)
    if np.any(near):
        out[near] = _r_near_one(a[near] - 1.0)
    far = a >= 1.0 + _NEAR_ONE
    if np.any(far):
        out[far] = lambert_w0(-a[far] * np.exp(-a[far]), config)
    return _unwrap(out, scalar)


def r_func_derivative(a, config: LambertConfig = DEFAULT_CONFIG):
    """R'(a) = -R/(R+1) * (a-1)/a for a > 1 (and -1 for a < 1)."""
    scalar = np.ndim(a) == 0
    a = np.array(a, dtype=float, ndmin=1)
    r = r_func(a, config)
    out = np.full_like(a, -1.0)
    big = a > 1.0
    out[big] = -r[big] / (r[big] + 1.0) * (a[big] - 1.0) / a[big]
    return _unwrap(out, scalar)


def a_func(a, k, config: LambertConfig = DEFAULT_CONFIG):
    """A(a) = -(a + k) exp(-a + k R(a) / a), defined for a > 0."""
    scalar = np.ndim(a) == 0 and np.ndim(k) == 0
    a, k = np.broadcast_arrays(np.array(a, dtype=float, ndmin=1), np.array(k, dtype=float, ndmin=1))
    if np.any(a <= 0):
        raise DomainError("A(a) requires a > 0")
    if np.any(k < 0):
        raise DomainError("A(a) requires k >= 0")
    out = -(a + k) * np.exp(-a + k * r_func(a, config) / a)
    return _unwrap(out, scalar)
