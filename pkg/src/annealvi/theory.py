"""Closed-form mode-collapse probability and its schedule functionals.

The high-temperature phase ends at the transition time t1 where
beta(t1) = alpha / R^2.  The exposure integral

    I = int_0^{t1} sqrt(R^2 beta(s) / (2 pi)) ds

is the accumulated log-amplification of the difference m1 - m2 along the
saddle's unstable direction, and the collapse probability of a random
initialization is

    p = erf( sqrt(d) * eps * exp(-I) ),    eps = log(w*/(1-w*)) / (2 R^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .forces import epsilon_bias, lambert_w0, lambert_wm1
from .schedule import AnnealSchedule

__all__ = [
    "TheoryParams",
    "ExposureResult",
    "exposure_integral",
    "closed_form_I",
    "collapse_probability",
    "iso_probability_beta",
    "optimal_beta_i",
    "lambert_candidates",
    "rate_asymptote_I",
    "NoSolutionError",
]

DEFAULT_ALPHA = 0.608


class NoSolutionError(RuntimeError):
    """The requested iso-probability level is unattainable."""


@dataclass(frozen=True)
class TheoryParams:
    d: int
    R: float
    w_star: float
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.R <= 0:
            raise ValueError("R must be positive")
        if not 0.0 < self.w_star < 1.0:
            raise ValueError("w_star must lie in (0, 1)")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @property
    def epsilon(self) -> float:
        return epsilon_bias(self.R, self.w_star)

    @property
    def beta_transition(self) -> float:
        """Inverse temperature alpha / R^2 ending the high-temperature phase."""
        return self.alpha / self.R**2


class ExposureResult(NamedTuple):
    value: float
    t1: float
    regime_never_exited: bool

    def __float__(self) -> float:  # pragma: no cover - convenience
        return self.value


def _adaptive_simpson(f, a: float, b: float, tol: float) -> float:
    """Adaptive Simpson quadrature with interval bisection."""

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, tol, depth):
        xm_l = 0.5 * (x0 + 0.5 * (x0 + x2))
        xm_r = 0.5 * (0.5 * (x0 + x2) + x2)
        fl = f(xm_l)
        fr = f(xm_r)
        x1 = 0.5 * (x0 + x2)
        left = simpson(x0, x1, f0, fl, f1)
        right = simpson(x1, x2, f1, fr, f2)
        if depth <= 0 or abs(left + right - whole) < 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return recurse(x0, x1, f0, fl, f1, left, tol / 2.0, depth - 1) + recurse(
            x1, x2, f1, fr, f2, right, tol / 2.0, depth - 1
        )

    if b <= a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 48)


def _find_transition_time(
    schedule: AnnealSchedule, target: float, t_hi: float
) -> Optional[float]:
    """Smallest t with beta(t) >= target, by bisection on a monotone schedule."""
    if schedule(0.0) >= target:
        return 0.0
    if schedule(t_hi) < target:
        return None
    lo, hi = 0.0, t_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if schedule(mid) >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break
    return hi


def exposure_integral(
    schedule: AnnealSchedule,
    theory: TheoryParams,
    t_horizon: Optional[float] = None,
) -> ExposureResult:
    """Numeric exposure integral for an arbitrary non-decreasing schedule.

    When the schedule never reaches alpha/R^2 (constant high-temperature
    schedules, or alpha/R^2 > 1 against the clamp at 1) the integral runs
    to ``t_horizon`` (default: the schedule's t0) and the result is
    flagged ``regime_never_exited``.
    """
    target = theory.beta_transition
    horizon = t_horizon if t_horizon is not None else schedule.t0
    rate = math.sqrt(theory.R**2 / (2.0 * math.pi))

    def integrand(t: float) -> float:
        return rate * math.sqrt(schedule(t))

    if schedule.kind == "constant":
        t1 = None if schedule.beta_i < target else 0.0
    else:
        t1 = _find_transition_time(schedule, target, horizon)
    if t1 is None:
        value = _adaptive_simpson(integrand, 0.0, horizon, 1e-12)
        return ExposureResult(value=value, t1=horizon, regime_never_exited=True)
    if t1 == 0.0:
        return ExposureResult(value=0.0, t1=0.0, regime_never_exited=False)
    value = _adaptive_simpson(integrand, 0.0, t1, 1e-12)
    return ExposureResult(value=value, t1=t1, regime_never_exited=False)


def closed_form_I(beta_i: float, t0: float, theory: TheoryParams) -> float:
    """Exposure of the exponential schedule beta(t) = min(beta_i^(1-t/t0), 1).

    sqrt(2/pi) * t0 / log(1/beta_i) * (sqrt(alpha) - sqrt(R^2 beta_i)),
    clamped at 0 once beta_i >= alpha/R^2 (no high-temperature phase).
    """
    if not 0.0 < beta_i < 1.0:
        raise ValueError("beta_i must lie in (0, 1); beta_i = 1 has no log rate")
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    if beta_i >= theory.beta_transition:
        return 0.0
    return (
        math.sqrt(2.0 / math.pi)
        * (t0 / math.log(1.0 / beta_i))
        * (math.sqrt(theory.alpha) - math.sqrt(theory.R**2 * beta_i))
    )


def collapse_probability(I: float, theory: TheoryParams) -> float:
    """Mode-collapse probability erf(sqrt(d) eps e^{-I}); 0 when w* = 1/2."""
    if I < 0:
        raise ValueError("exposure must be non-negative")
    eps = theory.epsilon
    if eps == 0.0:
        return 0.0
    return math.erf(math.sqrt(theory.d) * abs(eps) * math.exp(-I))


def optimal_beta_i(theory: TheoryParams) -> float:
    """Initial inverse temperature maximizing the exponential-schedule exposure.

    Golden-section search on (0, alpha/R^2]; t0 only scales I so the
    optimizer is t0-free.  The result is verified against the stationarity
    condition u (1 - ln u) = sqrt(alpha)/R with u = sqrt(beta_i).
    """
    hi = theory.beta_transition
    if hi >= 1.0:
        raise ValueError("requires alpha / R^2 < 1")
    lo = 1e-300

    def neg_I(log_b: float) -> float:
        return -closed_form_I(math.exp(log_b), 1.0, theory)

    # golden section on log beta_i for scale-free bracketing
    a, b = math.log(lo), math.log(hi * (1.0 - 1e-12))
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d_ = a + invphi * (b - a)
    fc, fd = neg_I(c), neg_I(d_)
    while b - a > 1e-13:
        if fc < fd:
            b, d_, fd = d_, c, fc
            c = b - invphi * (b - a)
            fc = neg_I(c)
        else:
            a, c, fc = c, d_, fd
            d_ = a + invphi * (b - a)
            fd = neg_I(d_)
    beta_star = math.exp(0.5 * (a + b))

    I_star = closed_form_I(beta_star, 1.0, theory)
    h = 1e-6 * beta_star
    deriv = (
        closed_form_I(beta_star + h, 1.0, theory)
        - closed_form_I(beta_star - h, 1.0, theory)
    ) / (2.0 * h)
    if abs(deriv) * beta_star > 1e-6 * I_star:
        raise RuntimeError("optimal_beta_i failed its stationarity check")
    return beta_star


def lambert_candidates(theory: TheoryParams) -> dict:
    """Both Lambert-form closed candidates for the optimal beta_i, for audit.

    "printed": e^2 W0(-sqrt(alpha)/(e R))^2 as printed in the source
    derivation; "corrected": (e e^{W-1(-sqrt(alpha)/(e R))})^2, the form
    that actually satisfies the stationarity condition
    u (1 - ln u) = sqrt(alpha)/R with u = sqrt(beta_i).
    """
    x = -math.sqrt(theory.alpha) / (math.e * theory.R)
    printed = (math.e * lambert_w0(x)) ** 2
    corrected = (math.e * math.exp(lambert_wm1(x))) ** 2
    return {"printed": printed, "corrected": corrected}


def rate_asymptote_I(beta_i: float, t0: float, theory: TheoryParams) -> float:
    """beta_i -> 0 asymptote of the exposure: depends only on the annealing rate.

    sqrt(2/pi) * t0 * sqrt(alpha) / log(1/beta_i); a function of
    beta_i^{1/t0} alone.
    """
    if not 0.0 < beta_i < 1.0:
        raise ValueError("beta_i must lie in (0, 1)")
    return (
        math.sqrt(2.0 / math.pi)
        * t0
        * math.sqrt(theory.alpha)
        / math.log(1.0 / beta_i)
    )


def iso_probability_beta(t0: float, level: float, theory: TheoryParams) -> float:
    """beta_i at which the theoretical collapse probability equals ``level``.

    p(beta_i) is increasing on [beta_i*, alpha/R^2] (exposure falls from
    its maximum to 0), so bisection there returns the larger of the two
    roots: the boundary of the success region approached from high beta_i.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    p_at_zero_I = collapse_probability(0.0, theory)
    if abs(level - p_at_zero_I) < 1e-12:
        return theory.beta_transition
    if p_at_zero_I < level:
        raise NoSolutionError(
            f"level {level} is not attainable: p(I=0) = {p_at_zero_I:.6f}"
        )
    beta_star = optimal_beta_i(theory)
    hi = theory.beta_transition * (1.0 - 1e-15)

    def p_of(beta_i: float) -> float:
        return collapse_probability(closed_form_I(beta_i, t0, theory), theory)

    if p_of(beta_star) > level:
        raise NoSolutionError(
            f"level {level} is not attainable at t0={t0}: minimum p is "
            f"{p_of(beta_star):.6f}"
        )
    lo = beta_star
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if p_of(mid) > level:
            hi = mid
        else:
            lo = mid
        if (hi - lo) / hi < 1e-7:
            break
    return 0.5 * (lo + hi)
