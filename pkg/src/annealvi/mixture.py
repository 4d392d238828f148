"""Bimodal Gaussian target, two-component student, and their estimators.

The target is ``w* N(mu*, I) + (1-w*) N(-mu*, I)`` with ``||mu*|| = R``;
the student is ``w1 N(mu1, sigma1^2 I) + (1-w1) N(mu2, sigma2^2 I)`` with
both means constrained to the radius-R sphere.  All log-densities go
through log-sum-exp so that beta * R^2 products of order 10^2 cannot
overflow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "TargetMixture",
    "StudentState",
    "SummaryStats",
    "log_target_density",
    "log_student_density",
    "sample_student",
    "tempered_loss_estimate",
    "summary_stats",
]

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class TargetMixture:
    """Fixed bimodal target: w* N(mu*, I_d) + (1 - w*) N(-mu*, I_d)."""

    d: int
    R: float
    w_star: float
    mu_star: np.ndarray

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.R <= 0:
            raise ValueError("R must be positive")
        if not 0.0 < self.w_star < 1.0:
            raise ValueError("w_star must lie in (0, 1)")
        mu = np.asarray(self.mu_star, dtype=float)
        if mu.shape != (self.d,):
            raise ValueError(f"mu_star must have shape ({self.d},)")
        if abs(np.linalg.norm(mu) - self.R) > 1e-12 * self.R:
            raise ValueError("||mu_star|| must equal R")
        object.__setattr__(self, "mu_star", mu)

    @classmethod
    def along_axis(cls, d: int, R: float, w_star: float) -> "TargetMixture":
        """Target with mu* = R e_1, the conventional orientation."""
        if d < 1:
            raise ValueError("d must be >= 1")
        mu = np.zeros(d)
        mu[0] = R
        return cls(d=d, R=R, w_star=w_star, mu_star=mu)

    @property
    def log_odds(self) -> float:
        return float(np.log(self.w_star) - np.log1p(-self.w_star))


@dataclass
class StudentState:
    """Trainable variational parameters; means live on the radius-R sphere."""

    mu1: np.ndarray
    mu2: np.ndarray
    sigma1: float
    sigma2: float
    w1: float = 0.5

    def __post_init__(self) -> None:
        self.mu1 = np.asarray(self.mu1, dtype=float)
        self.mu2 = np.asarray(self.mu2, dtype=float)
        if self.mu1.shape != self.mu2.shape or self.mu1.ndim != 1:
            raise ValueError("mu1 and mu2 must be 1-D vectors of equal length")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("sigmas must be positive")
        if not 0.0 < self.w1 < 1.0:
            raise ValueError("w1 must lie in (0, 1)")
        r1 = np.linalg.norm(self.mu1)
        r2 = np.linalg.norm(self.mu2)
        if abs(r1 - r2) > 1e-10 * max(r1, r2):
            raise ValueError("student means must share a radius")

    @property
    def d(self) -> int:
        return self.mu1.shape[0]

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.mu1))

    def check_on_sphere(self, R: float, tol: float = 1e-10) -> None:
        for mu in (self.mu1, self.mu2):
            if abs(np.linalg.norm(mu) - R) > tol * R:
                raise ValueError("student mean off the radius-R sphere")

    def copy(self) -> "StudentState":
        return StudentState(
            mu1=self.mu1.copy(),
            mu2=self.mu2.copy(),
            sigma1=self.sigma1,
            sigma2=self.sigma2,
            w1=self.w1,
        )


class SummaryStats(NamedTuple):
    """Normalized overlaps (order parameters) of the student/target means."""

    m1: float
    m2: float
    s: float


def _check_dim(x: np.ndarray, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise ValueError(f"point has shape {x.shape}, expected ({d},)")
    return x


def _log_gauss_sq(sq_norm, d: int, sigma_sq: float):
    """log N(x | mu, sigma^2 I) given ||x - mu||^2."""
    return -0.5 * sq_norm / sigma_sq - 0.5 * d * (_LOG_2PI + np.log(sigma_sq))


def log_target_rows(X: np.ndarray, target: TargetMixture) -> np.ndarray:
    """log pi for each row of X, shape (n, d) -> (n,)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != target.d:
        raise ValueError(f"points have dimension {X.shape[1]}, expected {target.d}")
    t = X @ target.mu_star  # x . mu*
    sq = np.einsum("ij,ij->i", X, X)
    base = -0.5 * (sq + target.R**2) - 0.5 * target.d * _LOG_2PI
    # ||x -+ mu*||^2 = ||x||^2 -+ 2 t + R^2
    lw = np.log(target.w_star)
    lv = np.log1p(-target.w_star)
    return base + np.logaddexp(lw + t, lv - t)


def log_student_rows(X: np.ndarray, state: StudentState) -> np.ndarray:
    """log q for each row of X, shape (n, d) -> (n,)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != state.d:
        raise ValueError(f"points have dimension {X.shape[1]}, expected {state.d}")
    d1 = X - state.mu1
    d2 = X - state.mu2
    sq1 = np.einsum("ij,ij->i", d1, d1)
    sq2 = np.einsum("ij,ij->i", d2, d2)
    l1 = np.log(state.w1) + _log_gauss_sq(sq1, state.d, state.sigma1**2)
    l2 = np.log1p(-state.w1) + _log_gauss_sq(sq2, state.d, state.sigma2**2)
    return np.logaddexp(l1, l2)


def log_target_density(x: np.ndarray, target: TargetMixture) -> float:
    """Stable log-density of the bimodal target at a single point."""
    x = _check_dim(x, target.d)
    return float(log_target_rows(x[None, :], target)[0])


def log_student_density(x: np.ndarray, state: StudentState) -> float:
    """Stable log-density of the student mixture at a single point."""
    x = _check_dim(x, state.d)
    return float(log_student_rows(x[None, :], state)[0])


def sample_student(
    state: StudentState, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw n reparameterized samples: component c ~ Bern(w1), x = mu_c + sigma_c z."""
    if n < 1:
        raise ValueError("n must be >= 1")
    comp1 = rng.random(n) < state.w1
    z = rng.standard_normal((n, state.d))
    mus = np.where(comp1[:, None], state.mu1[None, :], state.mu2[None, :])
    sig = np.where(comp1, state.sigma1, state.sigma2)
    return mus + sig[:, None] * z


def tempered_loss_estimate(
    state: StudentState,
    target: TargetMixture,
    beta: float,
    n_samples: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo estimate of E_q[log q] - beta E_q[log pi].

    This is the tempered reverse-KL objective with the theta-independent
    log Z_beta dropped; values are only comparable at a fixed beta.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    X = sample_student(state, n_samples, rng)
    return float(np.mean(log_student_rows(X, state) - beta * log_target_rows(X, target)))


def summary_stats(state: StudentState, target: TargetMixture) -> SummaryStats:
    """Project the state onto the order parameters (m1, m2, s)."""
    R2 = target.R**2
    return SummaryStats(
        m1=float(state.mu1 @ target.mu_star / R2),
        m2=float(state.mu2 @ target.mu_star / R2),
        s=float(state.mu1 @ state.mu2 / R2),
    )
