"""Low-dimensional dynamics of the summary statistics (m1, m2, s).

The flow is

    dm1 = -beta [ (m2 - m1 s) f + w1 (1 - m1^2) g(m1) ]
    dm2 = -beta [ (m1 - m2 s) f + w2 (1 - m2^2) g(m2) ]
    ds  = -beta [ 2 (1 - s^2) f + w1 (m2 - m1 s) g(m1) + w2 (m1 - m2 s) g(m2) ]

with the forces evaluated at sigma = beta^{-1/2} (variances track the
temperature).  Since beta multiplies every component, rescaling time by
1/beta removes it; ``reparameterized=True`` (the default, and the mode
every theory formula and the learning-rate-adapted trainer live in)
integrates that rescaled system, with the schedule read directly on the
integration clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .forces import ForceParams, force_f_many, force_g_many, force_g_prime_many
from .mixture import SummaryStats
from .schedule import AnnealSchedule

__all__ = [
    "OdeConfig",
    "OdeTrace",
    "ode_rhs",
    "integrate",
    "integrate_batch",
    "sample_initial_stats",
    "linearized_solution",
    "InstabilityError",
]


class InstabilityError(RuntimeError):
    """Integration left the physical region; dt is too large."""


@dataclass(frozen=True)
class OdeConfig:
    params: ForceParams
    schedule: AnnealSchedule
    t_end: float
    dt: float = 0.01
    reparameterized: bool = True
    record_every: int = 1

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least dt")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class OdeTrace:
    t: np.ndarray
    beta: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    s: np.ndarray

    def final(self) -> SummaryStats:
        return SummaryStats(float(self.m1[-1]), float(self.m2[-1]), float(self.s[-1]))


def _rhs_batch(state: np.ndarray, beta: float, params: ForceParams) -> np.ndarray:
    """Right-hand side for a (k, 3) batch of (m1, m2, s) rows."""
    m1 = state[:, 0]
    m2 = state[:, 1]
    s = state[:, 2]
    sigma = beta ** -0.5
    f = force_f_many(s, sigma, params)
    g12 = force_g_many(np.concatenate([m1, m2]), sigma, params)
    g1 = g12[: len(m1)]
    g2 = g12[len(m1):]
    w1, w2 = params.w1, params.w2
    c1 = m2 - m1 * s
    c2 = m1 - m2 * s
    out = np.empty_like(state)
    out[:, 0] = -beta * (c1 * f + w1 * (1.0 - m1**2) * g1)
    out[:, 1] = -beta * (c2 * f + w2 * (1.0 - m2**2) * g2)
    out[:, 2] = -beta * (2.0 * (1.0 - s**2) * f + w1 * c1 * g1 + w2 * c2 * g2)
    return out


def ode_rhs(
    stats: SummaryStats, beta: float, params: ForceParams
) -> Tuple[float, float, float]:
    """Time derivative of (m1, m2, s) at inverse temperature beta."""
    if not 0.0 < beta <= 1.0:
        raise ValueError("beta must lie in (0, 1]")
    d = _rhs_batch(np.array([[stats.m1, stats.m2, stats.s]]), beta, params)[0]
    return float(d[0]), float(d[1]), float(d[2])


def integrate_batch(inits: np.ndarray, config: OdeConfig) -> OdeTrace:
    """Classical RK4 with fixed step over a (k, 3) batch of initial stats.

    In reparameterized mode the integrated field is rhs/beta, i.e. the
    common beta prefactor is absorbed into the clock the schedule is read
    on.  Recorded stats staying within [-1 - 1e-6, 1 + 1e-6] is asserted;
    beyond 1.01 an InstabilityError signals that dt is too large.
    """
    state = np.array(inits, dtype=float)
    if state.ndim != 2 or state.shape[1] != 3:
        raise ValueError("inits must have shape (k, 3)")
    if np.any(np.abs(state) > 1.0 + 1e-9):
        raise ValueError("initial stats must lie in [-1, 1]")

    n_steps = int(round(config.t_end / config.dt))
    sched = config.schedule
    params = config.params

    def field(t: float, y: np.ndarray) -> np.ndarray:
        beta = sched(t)
        rhs = _rhs_batch(y, beta, params)
        return rhs / beta if config.reparameterized else rhs

    ts = [0.0]
    recs = [state.copy()]
    betas = [sched(0.0)]
    t = 0.0
    h = config.dt
    for k in range(n_steps):
        k1 = field(t, state)
        k2 = field(t + 0.5 * h, state + 0.5 * h * k1)
        k3 = field(t + 0.5 * h, state + 0.5 * h * k2)
        k4 = field(t + h, state + h * k3)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (k + 1) * h
        worst = np.max(np.abs(state))
        if worst > 1.01:
            raise InstabilityError(
                f"summary stats reached magnitude {worst:.4f} at t={t:.4f}; reduce dt"
            )
        if (k + 1) % config.record_every == 0 or k + 1 == n_steps:
            ts.append(t)
            recs.append(np.clip(state, -1.0 - 1e-6, 1.0 + 1e-6).copy())
            betas.append(sched(t))
    arr = np.stack(recs, axis=0)  # (n_rec, k, 3)
    return OdeTrace(
        t=np.asarray(ts),
        beta=np.asarray(betas),
        m1=arr[:, :, 0],
        m2=arr[:, :, 1],
        s=arr[:, :, 2],
    )


def integrate(init: SummaryStats, config: OdeConfig) -> OdeTrace:
    """Integrate a single trajectory; columns come back 1-D."""
    tr = integrate_batch(np.array([[init.m1, init.m2, init.s]]), config)
    return OdeTrace(tr.t, tr.beta, tr.m1[:, 0], tr.m2[:, 0], tr.s[:, 0])


def sample_initial_stats(
    d: int, R: float, rng: np.random.Generator
) -> SummaryStats:
    """Overlaps of two uniform sphere points with a fixed axis.

    Sampling actual vectors (rather than three independent Gaussians)
    keeps the Gram matrix of (mu*, mu1, mu2) positive semidefinite by
    construction and matches the trainer's initialization in law.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    axis = np.zeros(d)
    axis[0] = 1.0
    v1 = rng.standard_normal(d)
    v2 = rng.standard_normal(d)
    v1 /= np.linalg.norm(v1)
    v2 /= np.linalg.norm(v2)
    # radius R cancels in the normalized overlaps
    return SummaryStats(m1=float(v1[0]), m2=float(v2[0]), s=float(v1 @ v2))


def linearized_solution(
    init_sum: float,
    init_diff: float,
    schedule: AnnealSchedule,
    t_end: float,
    params: ForceParams,
    n_grid: int = 2000,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form solution of the saddle linearization around (0, 0, -1).

    Returns (t, m1 + m2, m1 - m2) on a uniform grid, where

      sum(t)  = sum(0) e^{-int_0^t a} - int_0^t b(s) e^{-int_s^t a} ds
      diff(t) = diff(0) e^{-int_0^t g'(0)/2}

    with a = 2 f(-1, .) + g'(0, .)/2 and b = g(0, .), both read along the
    schedule.  The trapezoid accumulation below keeps the inhomogeneous
    term stable even when int a changes sign.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    ts = np.linspace(0.0, t_end, n_grid + 1)
    betas = np.asarray(schedule(ts))
    sigmas = betas ** -0.5
    a = np.empty_like(ts)
    b = np.empty_like(ts)
    half_gp = np.empty_like(ts)
    for i, sig in enumerate(sigmas):
        f = force_f_many(np.array([-1.0]), sig, params)[0]
        gp = force_g_prime_many(np.array([0.0]), sig, params)[0]
        g0 = force_g_many(np.array([0.0]), sig, params)[0]
        half_gp[i] = 0.5 * gp
        a[i] = 2.0 * f + 0.5 * gp
        b[i] = g0
    h = ts[1] - ts[0]
    # diff: pure exponential of the accumulated instability rate
    int_half_gp = np.concatenate(
        [[0.0], np.cumsum(0.5 * (half_gp[1:] + half_gp[:-1]) * h)]
    )
    diff = init_diff * np.exp(-int_half_gp)
    # sum: stable one-step recurrence; the source enters at the midpoint
    summ = np.empty_like(ts)
    summ[0] = init_sum
    for k in range(n_grid):
        a_mid = 0.5 * (a[k] + a[k + 1])
        b_mid = 0.5 * (b[k] + b[k + 1])
        summ[k + 1] = summ[k] * math.exp(-a_mid * h) - b_mid * h * math.exp(
            -0.5 * a_mid * h
        )
    return ts, summ, diff
