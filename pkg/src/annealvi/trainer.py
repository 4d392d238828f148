"""Annealed stochastic gradient descent with JKO updates on the sphere.

Step-to-schedule clock: optimizer step k sits at annealing time
``tau = k * eta``.  With the learning rate adapted to ``eta / beta(tau)``
(the default) the realized summary-statistics dynamics follow the
reparameterized flow of :mod:`annealvi.ode` on the same clock, which is
what makes one trainer comparable against both the ODE and the collapse
theory.  A schedule with ``t0 = 500`` therefore spans ``t0 / eta``
optimizer steps.

The gradient of the tempered objective is estimated pathwise.  Every
per-sample quantity depends on the noise vector z only through its
projections onto span{mu*, mu1, mu2}, its squared norm, and two weighted
batch averages of z, so for large d the trainer draws that reduced
representation directly instead of n*d Gaussians (the weighted-average
residuals in the orthogonal complement are taken jointly Gaussian, exact
up to O(1/d); the dense estimator below is the reference and is used
whenever d < 32).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Optional, Tuple

import numpy as np

from .mixture import StudentState, SummaryStats, TargetMixture
from .schedule import AnnealSchedule

__all__ = [
    "TrainConfig",
    "GradientRecord",
    "RunTrace",
    "StepSizeError",
    "DegenerateStateError",
    "reparam_gradient",
    "jko_step",
    "run_annealed_sgd",
    "classify_collapse",
    "TRACE_HEADER",
]

TRACE_HEADER = "step,beta,m1,m2,s,sigma1,sigma2,loss"

_DENSE_DIM_CUTOFF = 32


class StepSizeError(RuntimeError):
    """The JKO variance multiplier went non-positive; eta is too large."""


class DegenerateStateError(RuntimeError):
    """A mean update produced a zero vector; retraction is undefined."""


@dataclass(frozen=True)
class TrainConfig:
    d: int = 512
    R: float = 3.0
    w_star: float = 0.8
    w1: float = 0.5
    eta: float = 0.05
    batch_size: int = 512
    steps: int = 10_000
    post_steps: int = 500
    schedule: AnnealSchedule = field(
        default_factory=lambda: AnnealSchedule("exponential", beta_i=1.0 / 90.0, t0=500.0)
    )
    sigma_init: Optional[float] = None  # None resolves per the schedule kind
    freeze_sigma: bool = False
    freeze_mu: bool = False
    adapt_lr: bool = True
    seed: int = 0
    record_every: int = 1
    m_threshold: float = 0.9

    def __post_init__(self) -> None:
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.steps < 0 or self.post_steps < 0:
            raise ValueError("step counts must be non-negative")
        if self.sigma_init is not None and self.sigma_init <= 0:
            raise ValueError("sigma_init must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.schedule.kind == "exponential" and self.schedule.beta_i < 1.0:
            # steps == 0 is the degenerate no-op run used by tooling
            if self.steps > 0 and self.steps * self.eta < self.schedule.t0 * (
                1.0 - 1e-12
            ):
                raise ValueError(
                    "steps * eta must reach t0 so the run ends at beta = 1 "
                    f"(steps*eta = {self.steps * self.eta}, t0 = {self.schedule.t0})"
                )

    def resolve_sigma_init(self) -> float:
        if self.sigma_init is not None:
            return self.sigma_init
        if self.schedule.kind == "constant":
            return 1.0
        return float(self.schedule(0.0)) ** -0.5

    def target(self) -> TargetMixture:
        return TargetMixture.along_axis(self.d, self.R, self.w_star)


@dataclass
class GradientRecord:
    d_mu1: np.ndarray
    d_mu2: np.ndarray
    d_sigma1_sq: float
    d_sigma2_sq: float


@dataclass
class RunTrace:
    step: np.ndarray
    beta: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    s: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray
    loss: np.ndarray
    final_state: StudentState
    collapsed: str = "unconverged"

    def final_stats(self) -> SummaryStats:
        return SummaryStats(float(self.m1[-1]), float(self.m2[-1]), float(self.s[-1]))

    def write_csv(self, fh: IO[str]) -> None:
        fh.write(TRACE_HEADER + "\n")
        for i in range(len(self.step)):
            cols = [f"{int(self.step[i])}"] + [
                f"{float(v[i]):.17g}"
                for v in (self.beta, self.m1, self.m2, self.s, self.sigma1, self.sigma2, self.loss)
            ]
            fh.write(",".join(cols) + "\n")


# ---------------------------------------------------------------------------
# dense reference estimator
# ---------------------------------------------------------------------------


def _draw_batch(state: StudentState, n: int, rng: np.random.Generator):
    """Component picks and reparameterized noise, in sample_student's order."""
    comp1 = rng.random(n) < state.w1
    z = rng.standard_normal((n, state.d))
    sig = np.where(comp1, state.sigma1, state.sigma2)
    mus = np.where(comp1[:, None], state.mu1[None, :], state.mu2[None, :])
    x = mus + sig[:, None] * z
    return comp1, z, x


def _dense_gradient(
    state: StudentState,
    target: TargetMixture,
    beta: float,
    batch_size: int,
    rng: np.random.Generator,
) -> Tuple[GradientRecord, float]:
    """Pathwise gradient of the Monte Carlo objective; also returns the loss."""
    n = batch_size
    comp1, z, x = _draw_batch(state, n, rng)
    s1sq, s2sq = state.sigma1**2, state.sigma2**2
    d = state.d

    d1 = x - state.mu1
    d2 = x - state.mu2
    sq1 = np.einsum("ij,ij->i", d1, d1)
    sq2 = np.einsum("ij,ij->i", d2, d2)
    l1 = (
        math.log(state.w1)
        - 0.5 * sq1 / s1sq
        - 0.5 * d * math.log(2.0 * math.pi * s1sq)
    )
    l2 = (
        math.log1p(-state.w1)
        - 0.5 * sq2 / s2sq
        - 0.5 * d * math.log(2.0 * math.pi * s2sq)
    )
    lq = np.logaddexp(l1, l2)
    r1 = np.exp(l1 - lq)
    r2 = np.exp(l2 - lq)

    t = x @ target.mu_star
    sqx = np.einsum("ij,ij->i", x, x)
    lpi = (
        -0.5 * (sqx + target.R**2)
        - 0.5 * d * math.log(2.0 * math.pi)
        + np.logaddexp(math.log(target.w_star) + t, math.log1p(-target.w_star) - t)
    )
    loss = float(np.mean(lq - beta * lpi))

    # rho = responsibility of the +mu* target mode
    rho = 1.0 / (1.0 + np.exp(-np.clip(2.0 * t + target.log_odds, -700, 700)))
    grad_x_logq = (r1 / s1sq)[:, None] * (-d1) + (r2 / s2sq)[:, None] * (-d2)
    grad_x_logpi = (2.0 * rho - 1.0)[:, None] * target.mu_star[None, :] - x
    v = grad_x_logq - beta * grad_x_logpi

    c1 = comp1
    c2 = ~comp1
    g_mu1 = (v * c1[:, None]).sum(axis=0) / n + (r1[:, None] * d1).sum(axis=0) / (
        n * s1sq
    )
    g_mu2 = (v * c2[:, None]).sum(axis=0) / n + (r2[:, None] * d2).sum(axis=0) / (
        n * s2sq
    )

    vz = np.einsum("ij,ij->i", v, z)
    score_s1 = r1 * (sq1 / (2.0 * s1sq**2) - d / (2.0 * s1sq))
    score_s2 = r2 * (sq2 / (2.0 * s2sq**2) - d / (2.0 * s2sq))
    g_s1 = float((vz[c1].sum() / (2.0 * state.sigma1) + score_s1.sum()) / n)
    g_s2 = float((vz[c2].sum() / (2.0 * state.sigma2) + score_s2.sum()) / n)

    return GradientRecord(g_mu1, g_mu2, g_s1, g_s2), loss


def reparam_gradient(
    state: StudentState,
    target: TargetMixture,
    beta: float,
    batch_size: int,
    rng: np.random.Generator,
) -> GradientRecord:
    """Unbiased pathwise gradient of the tempered objective.

    Exact gradient of the Monte Carlo functional behind
    :func:`annealvi.mixture.tempered_loss_estimate` at a fixed noise tape,
    so central finite differences of that estimator under common random
    numbers reproduce it.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    grad, _ = _dense_gradient(state, target, beta, batch_size, rng)
    return grad


# ---------------------------------------------------------------------------
# reduced-noise estimator (large d)
# ---------------------------------------------------------------------------


def _span_basis(vs: Tuple[np.ndarray, ...], scale: float) -> np.ndarray:
    """Orthonormal basis of span(vs) with rank detection (columns)."""
    basis = []
    for v in vs:
        u = v.astype(float, copy=True)
        for q in basis:
            u -= (q @ u) * q
        nrm = np.linalg.norm(u)
        if nrm > 1e-9 * scale:
            basis.append(u / nrm)
    return np.stack(basis, axis=1) if basis else np.zeros((vs[0].shape[0], 0))


def _lowrank_gradient(
    state: StudentState,
    target: TargetMixture,
    beta: float,
    batch_size: int,
    rng: np.random.Generator,
) -> Tuple[GradientRecord, float]:
    """Same estimator as :func:`_dense_gradient`, reduced noise representation.

    Draws, per sample, the noise projections onto span{mu*, mu1, mu2} plus
    the squared norm of the orthogonal remainder; the two weighted batch
    averages of z that feed the mean gradients are reconstructed from their
    span part plus a jointly Gaussian complement draw.
    """
    n = batch_size
    d = state.d
    R = target.R
    s1, s2 = state.sigma1, state.sigma2
    s1sq, s2sq = s1 * s1, s2 * s2

    Q = _span_basis((target.mu_star, state.mu1, state.mu2), scale=R)
    r = Q.shape[1]
    coords = Q.T @ np.stack([target.mu_star, state.mu1, state.mu2], axis=1)  # (r, 3)

    comp1 = rng.random(n) < state.w1
    xi = rng.standard_normal((n, r))
    znorm_sq = np.einsum("ij,ij->i", xi, xi) + rng.chisquare(d - r, size=n)

    proj = xi @ coords  # (n, 3): z . mu*, z . mu1, z . mu2
    a_star, a1, a2 = proj[:, 0], proj[:, 1], proj[:, 2]

    m1s = float(state.mu1 @ target.mu_star)
    m2s = float(state.mu2 @ target.mu_star)
    m12 = float(state.mu1 @ state.mu2)
    R2 = R * R

    sig = np.where(comp1, s1, s2)
    a_own = np.where(comp1, a1, a2)
    a_oth = np.where(comp1, a2, a1)
    mu_own_star = np.where(comp1, m1s, m2s)
    # ||x - mu_own||^2 and ||x - mu_other||^2 from scalars only
    sq_own = sig**2 * znorm_sq
    cross = np.where(comp1, m12, m12)
    sq_oth = (
        2.0 * R2
        - 2.0 * cross
        + sig**2 * znorm_sq
        + 2.0 * sig * (a_own - a_oth)
    )
    sq1 = np.where(comp1, sq_own, sq_oth)
    sq2 = np.where(comp1, sq_oth, sq_own)

    l1 = (
        math.log(state.w1)
        - 0.5 * sq1 / s1sq
        - 0.5 * d * math.log(2.0 * math.pi * s1sq)
    )
    l2 = (
        math.log1p(-state.w1)
        - 0.5 * sq2 / s2sq
        - 0.5 * d * math.log(2.0 * math.pi * s2sq)
    )
    lq = np.logaddexp(l1, l2)
    r1 = np.exp(l1 - lq)
    r2 = np.exp(l2 - lq)

    t = mu_own_star + sig * a_star  # x . mu*
    sqx = R2 + sig**2 * znorm_sq + 2.0 * sig * a_own
    lpi = (
        -0.5 * (sqx + R2)
        - 0.5 * d * math.log(2.0 * math.pi)
        + np.logaddexp(math.log(target.w_star) + t, math.log1p(-target.w_star) - t)
    )
    loss = float(np.mean(lq - beta * lpi))

    rho = 1.0 / (1.0 + np.exp(-np.clip(2.0 * t + target.log_odds, -700, 700)))
    two_rho = 2.0 * rho - 1.0
    mix_rate = r1 / s1sq + r2 / s2sq
    p = sig * (beta - mix_rate)  # z-coefficient of v

    c1 = comp1
    c2 = ~comp1
    # span coefficients of the averaged mean gradients (on mu1, mu2, mu*)
    A_mu1 = (np.where(c1, beta - r2 / s2sq, -r1 / s1sq)).mean()
    A_mu2 = (np.where(c1, r2 / s2sq, r1 / s1sq)).mean()
    A_str = (np.where(c1, -beta * two_rho, 0.0)).mean()
    B_mu2 = (np.where(c2, beta - r1 / s1sq, -r2 / s2sq)).mean()
    B_mu1 = (np.where(c2, r1 / s1sq, r2 / s2sq)).mean()
    B_str = (np.where(c2, -beta * two_rho, 0.0)).mean()

    # z-mix weights for each mean gradient
    t1 = np.where(c1, p + r1 / s1, r1 * s2 / s1sq)
    t2 = np.where(c2, p + r2 / s2, r2 * s1 / s2sq)

    span_mix = Q @ (xi.T @ np.stack([t1, t2], axis=1)) / n  # (d, 2)
    cov = np.array(
        [[t1 @ t1, t1 @ t2], [t1 @ t2, t2 @ t2]]
    ) / (n * n)
    l11 = math.sqrt(max(cov[0, 0], 0.0))
    l21 = cov[0, 1] / l11 if l11 > 0 else 0.0
    l22 = math.sqrt(max(cov[1, 1] - l21 * l21, 0.0))
    g_raw = rng.standard_normal((d, 2))
    g_perp = g_raw - Q @ (Q.T @ g_raw)
    perp_mix = np.stack(
        [l11 * g_perp[:, 0], l21 * g_perp[:, 0] + l22 * g_perp[:, 1]], axis=1
    )

    g_mu1 = (
        A_mu1 * state.mu1
        + A_mu2 * state.mu2
        + A_str * target.mu_star
        + span_mix[:, 0]
        + perp_mix[:, 0]
    )
    g_mu2 = (
        B_mu1 * state.mu1
        + B_mu2 * state.mu2
        + B_str * target.mu_star
        + span_mix[:, 1]
        + perp_mix[:, 1]
    )

    # v . z per sample, from scalars
    vz1 = p * znorm_sq + (beta - r2 / s2sq) * a1 + (r2 / s2sq) * a2 - beta * two_rho * a_star
    vz2 = p * znorm_sq + (r1 / s1sq) * a1 + (beta - r1 / s1sq) * a2 - beta * two_rho * a_star
    vz = np.where(c1, vz1, vz2)
    score_s1 = r1 * (sq1 / (2.0 * s1sq**2) - d / (2.0 * s1sq))
    score_s2 = r2 * (sq2 / (2.0 * s2sq**2) - d / (2.0 * s2sq))
    g_s1 = float((vz[c1].sum() / (2.0 * s1) + score_s1.sum()) / n)
    g_s2 = float((vz[c2].sum() / (2.0 * s2) + score_s2.sum()) / n)

    return GradientRecord(g_mu1, g_mu2, g_s1, g_s2), loss


# ---------------------------------------------------------------------------
# JKO update and training loop
# ---------------------------------------------------------------------------


def jko_step(
    state: StudentState,
    grads: GradientRecord,
    eta: float,
    d: int,
    freeze_sigma: bool = False,
    freeze_mu: bool = False,
) -> StudentState:
    """One JKO update: Euclidean mean step + retraction, squared variance factor.

    mu_c   <- R * (mu_c - eta * g_mu_c) / ||.||
    sigma^2 <- (1 - (2 eta / d) * g_sigma^2)^2 * sigma^2
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    R = state.radius
    mu1, mu2 = state.mu1, state.mu2
    if not freeze_mu:
        mu1 = mu1 - eta * grads.d_mu1
        mu2 = mu2 - eta * grads.d_mu2
        n1 = np.linalg.norm(mu1)
        n2 = np.linalg.norm(mu2)
        if n1 == 0.0 or n2 == 0.0:
            raise DegenerateStateError("mean update produced a zero vector")
        mu1 = (R / n1) * mu1
        mu2 = (R / n2) * mu2
    sigma1, sigma2 = state.sigma1, state.sigma2
    if not freeze_sigma:
        f1 = 1.0 - (2.0 * eta / d) * grads.d_sigma1_sq
        f2 = 1.0 - (2.0 * eta / d) * grads.d_sigma2_sq
        if f1 <= 0.0 or f2 <= 0.0:
            raise StepSizeError(
                f"variance multiplier non-positive ({f1:.3g}, {f2:.3g}); reduce eta"
            )
        sigma1 = math.sqrt(f1 * f1 * sigma1**2)
        sigma2 = math.sqrt(f2 * f2 * sigma2**2)
    return StudentState(mu1=mu1, mu2=mu2, sigma1=sigma1, sigma2=sigma2, w1=state.w1)


def classify_collapse(
    trace: RunTrace, eps: float = 0.0, m_threshold: float = 0.9
) -> str:
    """Endpoint classifier on the final (m1, m2) of a completed run."""
    if len(trace.step) == 0:
        raise ValueError("empty trace")
    if abs(trace.beta[-1] - 1.0) > 1e-12:
        raise ValueError("classification requires the run to end at beta = 1")
    m1 = float(trace.m1[-1])
    m2 = float(trace.m2[-1])
    if abs(m1) >= m_threshold and abs(m2) >= m_threshold:
        same_side = (m1 > eps and m2 > eps) or (m1 < -eps and m2 < -eps)
        return "collapsed" if same_side else "separated"
    return "unconverged"


def _uniform_sphere(d: int, R: float, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d)
    return (R / np.linalg.norm(v)) * v


def run_annealed_sgd(
    config: TrainConfig, rng: Optional[np.random.Generator] = None
) -> RunTrace:
    """Train from a uniform spherical initialization and classify the endpoint.

    Records (step, beta, m1, m2, s, sigma1, sigma2, loss) every
    ``record_every`` steps; row k holds the state before update k and the
    loss of update k's batch, and a final row holds the end state with a
    dedicated loss batch.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    target = config.target()
    sched = config.schedule
    sigma0 = config.resolve_sigma_init()
    state = StudentState(
        mu1=_uniform_sphere(config.d, config.R, rng),
        mu2=_uniform_sphere(config.d, config.R, rng),
        sigma1=sigma0,
        sigma2=sigma0,
        w1=config.w1,
    )
    gradient = _dense_gradient if config.d < _DENSE_DIM_CUTOFF else _lowrank_gradient

    total = config.steps + config.post_steps
    R2 = config.R**2
    rows = []

    def stats_row(step: int, beta: float, loss: float) -> tuple:
        return (
            step,
            beta,
            state.mu1 @ target.mu_star / R2,
            state.mu2 @ target.mu_star / R2,
            state.mu1 @ state.mu2 / R2,
            state.sigma1,
            state.sigma2,
            loss,
        )

    for k in range(total):
        beta = float(sched(k * config.eta))
        grads, loss = gradient(state, target, beta, config.batch_size, rng)
        if k % config.record_every == 0:
            rows.append(stats_row(k, beta, loss))
        eta_eff = config.eta / beta if config.adapt_lr else config.eta
        state = jko_step(
            state,
            grads,
            eta_eff,
            config.d,
            freeze_sigma=config.freeze_sigma,
            freeze_mu=config.freeze_mu,
        )

    beta_end = float(sched(total * config.eta))
    _, loss_end = gradient(state, target, beta_end, config.batch_size, rng)
    rows.append(stats_row(total, beta_end, loss_end))

    arr = np.array(rows, dtype=float)
    trace = RunTrace(
        step=arr[:, 0].astype(int),
        beta=arr[:, 1],
        m1=arr[:, 2],
        m2=arr[:, 3],
        s=arr[:, 4],
        sigma1=arr[:, 5],
        sigma2=arr[:, 6],
        loss=arr[:, 7],
        final_state=state,
    )
    if abs(trace.beta[-1] - 1.0) <= 1e-12:
        trace.collapsed = classify_collapse(trace, m_threshold=config.m_threshold)
    return trace
