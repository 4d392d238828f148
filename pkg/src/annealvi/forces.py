"""Entropic and cross-entropic forces, their asymptotics, and scalar specials.

The two forces are 1-D standard-normal expectations of logistic-type
integrands,

    f(s, sigma) = E_x[ w1 expit(a x + b + C)^2 + w2 expit(a x + b - C)^2 ],
        a = (R/sigma) sqrt(2(1-s)),  b = -(R/sigma)^2 (1-s),  C = log(w2/w1)
    g(m, sigma) = E_x[ 1 - 2 expit(2 sigma R x + 2 R^2 (m + eps)) ],

with eps = log(w*/(1-w*)) / (2 R^2).  For small logistic slope ``a`` the
integrand is smooth on the Gaussian scale and Gauss-Hermite quadrature
converges spectrally.  For large ``a`` it degenerates into a step, which
Gauss-Hermite cannot resolve; there the step part is integrated exactly
(an erf) and the exponentially-decaying logistic remainder is handled by
Gauss-Laguerre on each half-line.  Each evaluation is re-done at doubled
node count and a discrepancy above 1e-8 raises :class:`AccuracyError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

__all__ = [
    "AccuracyError",
    "ForceParams",
    "epsilon_bias",
    "force_f",
    "force_g",
    "force_g_prime",
    "f_low_temp",
    "g_low_temp",
    "f_high_temp",
    "g_high_temp",
    "erf",
    "lambert_w0",
    "lambert_wm1",
]

# Logistic slope above which quadrature switches from Gauss-Hermite in x to
# the erf + Gauss-Laguerre split in the logistic variable.  Both rules hold
# ~1e-12 accuracy across the crossover (see tests).
_SLOPE_SWITCH = 2.0
# f switches to its closed-form low-temperature tail once r^2 (1-s) > 200:
# the integrand is numerically a spike and the tail is O(exp(-50)).
_F_SPIKE_SWITCH = 200.0

_GH_NODES = 129
_LAG_NODES = 64  # laggauss weights overflow to nan past ~150 nodes
_DOUBLING_TOL = 1e-8

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class AccuracyError(RuntimeError):
    """Quadrature failed its node-doubling consistency check."""


@dataclass(frozen=True)
class ForceParams:
    """Shared parameters of the force functions; w2 = 1 - w1 throughout."""

    R: float
    w1: float
    w_star: float

    def __post_init__(self) -> None:
        if self.R <= 0:
            raise ValueError("R must be positive")
        if not 0.0 < self.w1 < 1.0:
            raise ValueError("w1 must lie in (0, 1)")
        if not 0.0 < self.w_star < 1.0:
            raise ValueError("w_star must lie in (0, 1)")

    @property
    def w2(self) -> float:
        return 1.0 - self.w1

    @property
    def epsilon(self) -> float:
        return epsilon_bias(self.R, self.w_star)


def epsilon_bias(R: float, w_star: float) -> float:
    """Basin-boundary bias: log(w*/(1-w*)) / (2 R^2)."""
    if R <= 0:
        raise ValueError("R must be positive")
    if not 0.0 < w_star < 1.0:
        raise ValueError("w_star must lie in (0, 1)")
    return (math.log(w_star) - math.log1p(-w_star)) / (2.0 * R**2)


@lru_cache(maxsize=8)
def _hermite_nodes(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Probabilists' Gauss-Hermite nodes and E[.]-normalized weights."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / _SQRT_2PI


@lru_cache(maxsize=8)
def _laguerre_nodes(n: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.laguerre.laggauss(n)
    return x, w


@lru_cache(maxsize=8)
def _laguerre_logistic(n: int):
    """Per-node logistic factors of the Laguerre remainders (a, b free)."""
    wn, ww = _laguerre_nodes(n)
    s = 1.0 / (1.0 + np.exp(-wn))  # wn >= 0, no stabilization needed
    return wn, ww, s, s * (1.0 - s), s * (1.0 + s), s * s


def _expit(v: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    return 0.5 + 0.5 * np.tanh(0.5 * np.asarray(v, dtype=float))


_ERF_UFUNC = np.frompyfunc(math.erf, 1, 1)


def _erf_vec(u: np.ndarray) -> np.ndarray:
    return _ERF_UFUNC(u).astype(float)


def _gauss_pdf(v: np.ndarray, b: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Density of N(b, a^2) at v (broadcasting)."""
    return np.exp(-0.5 * ((v - b) / a) ** 2) / (a * _SQRT_2PI)


# ---------------------------------------------------------------------------
# logistic-Gaussian expectations, vectorized over the offset b
# ---------------------------------------------------------------------------


def _with_doubling(f, n: int, where: str):
    """Evaluate at n and 2n+1 nodes; complain if the rule has not converged."""
    coarse = f(n)
    fine = f(2 * n + 1)
    err = np.max(np.abs(np.asarray(fine) - np.asarray(coarse)))
    if err > _DOUBLING_TOL:
        raise AccuracyError(
            f"{where}: node doubling changed the result by {err:.3e} "
            f"(> {_DOUBLING_TOL:.0e})"
        )
    return fine


def _expit_moment_gh(a: np.ndarray, b: np.ndarray, kind: str, n: int) -> np.ndarray:
    """E[phi(a X + b)] by Gauss-Hermite; phi per ``kind``. Shapes broadcast."""
    x, w = _hermite_nodes(n)
    v = np.multiply.outer(a, x) + b[..., None]
    e = _expit(v)
    if kind == "expit":
        vals = e
    elif kind == "expit_sq":
        vals = e * e
    elif kind == "expit_prime":
        vals = e * (1.0 - e)
    else:  # pragma: no cover
        raise ValueError(kind)
    return vals @ w


def _expit_moment_lag(a: np.ndarray, b: np.ndarray, kind: str, n: int) -> np.ndarray:
    """E[phi(a X + b)] for steep slopes.

    Splits phi into its step limit (exact Gaussian integral) plus a
    remainder decaying like exp(-|v|) in the logistic variable v, which a
    Gauss-Laguerre rule on each half-line integrates to machine accuracy:

      E[expit(aX+b)]   = Phi(b/a) + sum_w e^-w expit(w) [G(-w) - G(w)]
      E[expit(aX+b)^2] = Phi(b/a) + sum_w e^-w [s'(w) G(-w) - s(w)(1+s(w)) G(w)]
      E[s'(aX+b)]      = sum_w e^-w s(w)^2 [G(w) + G(-w)]

    with s = expit, s' its derivative, and G the N(b, a^2) density.
    """
    wn, ww, s, s_prime, s_one_plus, s_sq = _laguerre_logistic(n)
    a_col = a[..., None]
    b_col = b[..., None]
    g_pos = _gauss_pdf(wn, b_col, a_col)
    g_neg = _gauss_pdf(-wn, b_col, a_col)
    if kind == "expit":
        rem = (s * (g_neg - g_pos)) @ ww
        step = 0.5 * (1.0 + _erf_vec((b / a) / math.sqrt(2.0)))
        return step + rem
    if kind == "expit_sq":
        rem = (s_prime * g_neg - s_one_plus * g_pos) @ ww
        step = 0.5 * (1.0 + _erf_vec((b / a) / math.sqrt(2.0)))
        return step + rem
    if kind == "expit_prime":
        return (s_sq * (g_pos + g_neg)) @ ww
    raise ValueError(kind)  # pragma: no cover


def _expit_moment(a: np.ndarray, b: np.ndarray, kind: str, where: str) -> np.ndarray:
    """Dispatch on logistic slope; both branches carry a doubling check."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape)
    gentle = a <= _SLOPE_SWITCH
    if np.any(gentle):
        out[gentle] = _with_doubling(
            lambda n: _expit_moment_gh(a[gentle], b[gentle], kind, n),
            _GH_NODES,
            where,
        )
    if np.any(~gentle):
        out[~gentle] = _with_doubling(
            lambda n: _expit_moment_lag(a[~gentle], b[~gentle], kind, n),
            _LAG_NODES,
            where,
        )
    return out


# ---------------------------------------------------------------------------
# forces
# ---------------------------------------------------------------------------


def force_f_many(s, sigma: float, params: ForceParams) -> np.ndarray:
    """Entropic force, vectorized over the overlap s."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    s_flat = np.atleast_1d(np.minimum(np.asarray(s, dtype=float), 1.0))
    r = params.R / sigma
    oms = np.maximum(1.0 - s_flat, 0.0)
    out = np.empty(s_flat.shape)
    spike = r**2 * oms > _F_SPIKE_SWITCH
    if np.any(spike):
        out[spike] = f_low_temp(s_flat[spike], sigma, params)
    if np.any(~spike):
        a = r * np.sqrt(2.0 * oms[~spike])
        base = -(r**2) * oms[~spike]
        c = math.log(params.w2) - math.log(params.w1)
        if c == 0.0:  # symmetric student: both moments coincide
            out[~spike] = _expit_moment(a, base, "expit_sq", "force_f")
        else:
            e1 = _expit_moment(a, base + c, "expit_sq", "force_f")
            e2 = _expit_moment(a, base - c, "expit_sq", "force_f")
            out[~spike] = params.w1 * e1 + params.w2 * e2
    return out


def force_f(s: float, sigma: float, params: ForceParams) -> float:
    """Repulsive force from the student entropy; lies in (0, 1)."""
    return float(force_f_many(np.asarray([s]), sigma, params)[0])


def _g_offsets(m, sigma: float, params: ForceParams):
    a = 2.0 * sigma * params.R
    b = 2.0 * params.R**2 * np.asarray(m, dtype=float) + 2.0 * params.R**2 * params.epsilon
    return a, b


def force_g_many(m, sigma: float, params: ForceParams) -> np.ndarray:
    """Cross-entropic force, vectorized over the alignment m."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    a, b = _g_offsets(np.atleast_1d(m), sigma, params)
    return 1.0 - 2.0 * _expit_moment(np.full_like(b, a), b, "expit", "force_g")


def force_g(m: float, sigma: float, params: ForceParams) -> float:
    """Attractive force toward the target modes; lies in (-1, 1)."""
    return float(force_g_many(np.asarray([m]), sigma, params)[0])


def force_g_prime_many(m, sigma: float, params: ForceParams) -> np.ndarray:
    """d(force_g)/dm, vectorized over m; strictly negative."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    a, b = _g_offsets(np.atleast_1d(m), sigma, params)
    moment = _expit_moment(np.full_like(b, a), b, "expit_prime", "force_g_prime")
    return -4.0 * params.R**2 * moment


def force_g_prime(m: float, sigma: float, params: ForceParams) -> float:
    return float(force_g_prime_many(np.asarray([m]), sigma, params)[0])


# ---------------------------------------------------------------------------
# closed-form asymptotics
# ---------------------------------------------------------------------------


def f_low_temp(s, sigma: float, params: ForceParams):
    """Low-temperature tail of f (r = R/sigma >> 1)."""
    one_minus_s = np.maximum(1.0 - np.asarray(s, dtype=float), 1e-12)
    r = params.R / sigma
    val = (
        (math.sqrt(math.pi) / 2.0)
        * math.sqrt(params.w1 * params.w2)
        / (r * np.sqrt(one_minus_s))
        * np.exp(-(r**2) * one_minus_s / 4.0)
    )
    return val


def g_low_temp(m, params: ForceParams):
    """Low-temperature limit of g: 1 - 2 expit(2 R^2 (m + eps)) = -tanh(R^2 (m+eps))."""
    arg = 2.0 * params.R**2 * (np.asarray(m, dtype=float) + params.epsilon)
    return 1.0 - 2.0 * _expit(arg)


def f_high_temp(params: ForceParams) -> float:
    """High-temperature limit of f: w1 w2."""
    return params.w1 * params.w2


def g_high_temp(m, sigma: float, params: ForceParams):
    """High-temperature (sigma >> R) linearization of g."""
    return (
        -math.sqrt(2.0 / math.pi)
        * (params.R / sigma)
        * (np.asarray(m, dtype=float) + params.epsilon)
    )


# ---------------------------------------------------------------------------
# scalar special functions
# ---------------------------------------------------------------------------


def erf(x: float) -> float:
    """Error function (C library implementation, abs error <= 1e-15)."""
    return math.erf(x)


_BRANCH_POINT = -1.0 / math.e


def _halley_lambert(w: float, x: float, max_iter: int = 100) -> float:
    """Halley iteration for w e^w = x from starting guess w."""
    for _ in range(max_iter):
        ew = math.exp(w)
        res = w * ew - x
        if res == 0.0:
            return w
        w1 = w + 1.0
        denom = ew * w1 - (w + 2.0) * res / (2.0 * w1)
        dw = res / denom
        w -= dw
        if abs(dw) < 1e-16 * (1.0 + abs(w)):
            return w
    return w


def _check_residual(w: float, x: float, branch: str) -> float:
    res = abs(w * math.exp(w) - x)
    if res > 1e-14 * max(1.0, abs(x)):
        raise AccuracyError(f"lambert_{branch} failed to converge at x={x!r}")
    return w


def lambert_w0(x: float) -> float:
    """Principal Lambert branch on [-1/e, inf): W e^W = x with W >= -1."""
    if x < _BRANCH_POINT:
        raise ValueError("lambert_w0 requires x >= -1/e")
    if x == 0.0:
        return 0.0
    p_sq = 2.0 * (math.e * x + 1.0)
    if p_sq <= 0.0:
        return -1.0
    if p_sq < 1e-4:
        # branch-point series, accurate where Halley's denominator degenerates
        p = math.sqrt(p_sq)
        return -1.0 + p - p_sq / 6.0 + 11.0 / 72.0 * p * p_sq
    if x < 1.0:
        p = math.sqrt(p_sq)
        w = -1.0 + p - p_sq / 6.0 + 11.0 / 72.0 * p * p_sq
    else:
        lx = math.log(x)
        w = lx - math.log(lx) if lx > 1.0 else lx
    return _check_residual(_halley_lambert(w, x), x, "w0")


def lambert_wm1(x: float) -> float:
    """Lower Lambert branch on [-1/e, 0): W e^W = x with W <= -1."""
    if not _BRANCH_POINT <= x < 0.0:
        raise ValueError("lambert_wm1 requires x in [-1/e, 0)")
    p_sq = 2.0 * (math.e * x + 1.0)
    if p_sq <= 0.0:
        return -1.0
    if p_sq < 1e-4:
        p = math.sqrt(p_sq)
        return -1.0 - p - p_sq / 6.0 - 11.0 / 72.0 * p * p_sq
    if x > -0.25:
        # asymptotic form near 0^-: w ~ log(-x) - log(-log(-x))
        l1 = math.log(-x)
        w = l1 - math.log(-l1)
    else:
        p = math.sqrt(p_sq)
        w = -1.0 - p - p_sq / 6.0 - 11.0 / 72.0 * p * p_sq
    return _check_residual(_halley_lambert(w, x), x, "wm1")
