"""Inverse-temperature schedules beta(t).

Time is measured in annealing-time units: the unit in which ``t0`` is
quoted.  The SGD trainer advances this clock by ``eta`` per optimizer
step (see :mod:`annealvi.trainer`); the summary ODE integrates on it
directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

__all__ = ["AnnealSchedule", "schedule_beta"]


@dataclass(frozen=True)
class AnnealSchedule:
    """Description of beta(t).

    kind:
        "exponential": beta(t) = min(beta_i ** (1 - t/t0), 1).  Rises
        monotonically from beta_i at t=0 and clamps at 1 for t >= t0.
        "constant": beta(t) = beta_i for all t.
        "tabulated": piecewise-linear interpolation of ``table``.
    """

    kind: str
    beta_i: float = 1.0
    t0: float = 1.0
    table: Optional[Sequence[Tuple[float, float]]] = field(default=None)

    def __post_init__(self) -> None:
        if self.kind not in ("exponential", "constant", "tabulated"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "tabulated":
            if not self.table:
                raise ValueError("tabulated schedule requires a table")
            ts = np.asarray([p[0] for p in self.table], dtype=float)
            bs = np.asarray([p[1] for p in self.table], dtype=float)
            if np.any(np.diff(ts) <= 0):
                raise ValueError("tabulated times must be strictly increasing")
            if np.any(np.diff(bs) < 0):
                raise ValueError("tabulated betas must be non-decreasing")
            if np.any(bs <= 0) or np.any(bs > 1):
                raise ValueError("tabulated betas must lie in (0, 1]")
        else:
            if not 0.0 < self.beta_i <= 1.0:
                raise ValueError("beta_i must lie in (0, 1]")
            if self.t0 <= 0:
                raise ValueError("t0 must be positive")

    def __call__(self, t):
        """Evaluate beta(t); t may be a scalar or an ndarray."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise ValueError("schedule time must be >= 0")
        if self.kind == "constant":
            out = np.full_like(t_arr, self.beta_i)
        elif self.kind == "exponential":
            if self.beta_i == 1.0:
                out = np.ones_like(t_arr)
            else:
                # beta_i^(1-t/t0), clamped at 1: the exponent hits 0 at t=t0
                expo = 1.0 - np.minimum(t_arr / self.t0, 1.0)
                out = np.exp(expo * np.log(self.beta_i))
        else:
            ts = np.asarray([p[0] for p in self.table], dtype=float)
            bs = np.asarray([p[1] for p in self.table], dtype=float)
            if np.any(t_arr < ts[0]) or np.any(t_arr > ts[-1]):
                raise ValueError("tabulated schedule queried outside its domain")
            out = np.interp(t_arr, ts, bs)
        return float(out) if np.isscalar(t) or t_arr.ndim == 0 else out


def schedule_beta(schedule: AnnealSchedule, t: float) -> float:
    """Evaluate the schedule at time ``t`` (exact; exponential clamps at 1)."""
    return schedule(t)
