"""Deterministic figure renderers for the annealvi CSV outputs.

Four figure kinds over the documented CSV schemas:

  heatmap       sweep CSV -> (beta_i, t0) collapse-probability map with an
                optional dashed iso-line overlay
  trace_panels  trace CSV -> marginal densities along the target axis at four
                training stages plus the variance track
  ode_overlay   compare CSV -> SGD summary statistics vs the ODE solution
  rate_curves   sweep CSV -> probability vs annealing rate beta_i^(-1/t0),
                with the high-initial-temperature asymptote

Rendering is a pure function of the input bytes and job fields: figures use
a fixed size, a fixed [0, 1] color scale for probabilities, no timestamps,
and PNG encoding goes through a bare Pillow writer so two runs produce
identical files.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "annealvi-plots"

import matplotlib.pyplot as plt
import numpy as np
from PIL import Image

__all__ = [
    "PlotJob",
    "render",
    "student_marginal",
    "target_marginal",
    "annealing_rate",
    "rate_asymptote_probability",
    "main",
]

FIGSIZE = (8.0, 5.0)
DPI = 110
PROB_CMAP = "viridis"


class SchemaError(ValueError):
    """An input CSV is missing required columns."""


class NoDataError(ValueError):
    """An input CSV carries no rows."""


@dataclass(frozen=True)
class PlotJob:
    kind: str
    inputs: Sequence[str]
    out_image: str
    iso_csv: Optional[str] = None
    format: str = "png"
    # model constants used by analytic overlays; the CSVs do not carry them
    R: float = 3.0
    w_star: float = 0.8
    d: int = 512
    alpha: float = 0.608
    w1: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("heatmap", "trace_panels", "ode_overlay", "rate_curves"):
            raise ValueError(f"unknown plot kind {self.kind!r}")
        if self.format not in ("png", "svg"):
            raise ValueError("format must be png or svg")
        if not self.out_image.endswith("." + self.format):
            raise ValueError("out_image extension must match format")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def _read_csv(path: str, required: Sequence[str]) -> Dict[str, np.ndarray]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        missing = [c for c in required if c not in names]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing} (have {names})")
        rows = list(reader)
    if not rows:
        raise NoDataError(f"{path}: no data rows")
    return {
        name: np.array([float(r[name]) for r in rows]) for name in names
    }


# ---------------------------------------------------------------------------
# analytic curve data (kept separate so tests can integrate them)
# ---------------------------------------------------------------------------


def student_marginal(
    xs: np.ndarray,
    m1: float,
    m2: float,
    sigma1: float,
    sigma2: float,
    w1: float,
    R: float,
) -> np.ndarray:
    """Density of x . mu_hat under the student: two 1-D Gaussians.

    The projection of component c onto the unit target axis is
    N(R m_c, sigma_c^2); no sampling is involved.
    """
    out = np.zeros_like(xs, dtype=float)
    for w, mc, sc in ((w1, m1, sigma1), (1.0 - w1, m2, sigma2)):
        out += (
            w
            * np.exp(-0.5 * ((xs - R * mc) / sc) ** 2)
            / (sc * math.sqrt(2.0 * math.pi))
        )
    return out


def target_marginal(xs: np.ndarray, R: float, w_star: float) -> np.ndarray:
    """Density of x . mu_hat under the bimodal target (unit mode variance)."""
    out = w_star * np.exp(-0.5 * (xs - R) ** 2)
    out += (1.0 - w_star) * np.exp(-0.5 * (xs + R) ** 2)
    return out / math.sqrt(2.0 * math.pi)


def annealing_rate(beta_i: np.ndarray, t0: np.ndarray) -> np.ndarray:
    """The controlling quantity beta_i^(-1/t0)."""
    return np.exp(np.log(1.0 / beta_i) / t0)


def rate_asymptote_probability(
    rates: np.ndarray, d: int, R: float, w_star: float, alpha: float
) -> np.ndarray:
    """beta_i -> 0 collapse probability as a function of the annealing rate."""
    eps = math.log(w_star / (1.0 - w_star)) / (2.0 * R**2)
    I = math.sqrt(2.0 / math.pi) * math.sqrt(alpha) / np.log(rates)
    return np.array([math.erf(math.sqrt(d) * abs(eps) * math.exp(-i)) for i in I])


# ---------------------------------------------------------------------------
# figure builders
# ---------------------------------------------------------------------------


def _fig():
    return plt.figure(figsize=FIGSIZE, dpi=DPI)


def _render_heatmap(job: PlotJob):
    data = _read_csv(
        job.inputs[0],
        ["beta_i", "t0", "p_empirical", "p_theory"],
    )
    betas = np.unique(data["beta_i"])
    t0s = np.unique(data["t0"])
    grid = np.full((len(betas), len(t0s)), np.nan)
    for b, t, p in zip(data["beta_i"], data["t0"], data["p_empirical"]):
        grid[np.searchsorted(betas, b), np.searchsorted(t0s, t)] = p
    fig = _fig()
    ax = fig.add_subplot(111)
    mesh = ax.pcolormesh(
        t0s,
        betas,
        grid,
        shading="nearest",
        cmap=PROB_CMAP,
        vmin=0.0,
        vmax=1.0,
    )
    ax.set_yscale("log")
    ax.set_xlabel("annealing time t0")
    ax.set_ylabel("initial inverse temperature beta_i")
    fig.colorbar(mesh, ax=ax, label="collapse probability")
    if job.iso_csv:
        iso = _read_csv(job.iso_csv, ["t0", "beta_i_iso", "level"])
        order = np.argsort(iso["t0"])
        ax.plot(
            iso["t0"][order],
            iso["beta_i_iso"][order],
            "k--",
            linewidth=1.8,
            label=f"theory p = {iso['level'][0]:g}",
        )
        ax.legend(loc="lower right")
    ax.set_title("mode-collapse probability")
    return fig


def _render_trace_panels(job: PlotJob):
    data = _read_csv(
        job.inputs[0],
        ["step", "beta", "m1", "m2", "s", "sigma1", "sigma2"],
    )
    n = len(data["step"])
    stages = [0, n // 3, (2 * n) // 3, n - 1]
    span = job.R + 4.0 * max(1.0, float(np.max(data["sigma1"])))
    xs = np.linspace(-span, span, 801)
    fig = _fig()
    for i, idx in enumerate(stages):
        ax = fig.add_subplot(1, 5, i + 1)
        ax.plot(xs, target_marginal(xs, job.R, job.w_star), "k-", linewidth=1.0)
        ax.plot(
            xs,
            student_marginal(
                xs,
                float(data["m1"][idx]),
                float(data["m2"][idx]),
                float(data["sigma1"][idx]),
                float(data["sigma2"][idx]),
                job.w1,
                job.R,
            ),
            "-",
            color="tab:orange",
            linewidth=1.2,
        )
        ax.set_title(f"step {int(data['step'][idx])}", fontsize=8)
        ax.set_xlim(-span, span)
        ax.tick_params(labelsize=6)
    ax = fig.add_subplot(1, 5, 5)
    ax.plot(data["step"], data["sigma1"] ** 2, label="sigma1^2", linewidth=1.0)
    ax.plot(data["step"], data["sigma2"] ** 2, label="sigma2^2", linewidth=1.0)
    ax.plot(
        data["step"],
        1.0 / data["beta"],
        "k--",
        linewidth=0.9,
        label="1/beta",
    )
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.legend(fontsize=6)
    ax.tick_params(labelsize=6)
    fig.tight_layout()
    return fig


def _render_ode_overlay(job: PlotJob):
    data = _read_csv(
        job.inputs[0],
        ["tau", "m1_sgd", "m2_sgd", "s_sgd", "m1_ode", "m2_ode", "s_ode"],
    )
    fig = _fig()
    ax = fig.add_subplot(111)
    tau = data["tau"]
    for key, color, label in (
        ("m1", "tab:blue", "m1"),
        ("m2", "tab:orange", "m2"),
        ("s", "tab:green", "s"),
    ):
        ax.plot(tau, data[f"{key}_sgd"], color=color, linewidth=1.0, label=f"{label} (SGD)")
        ax.plot(tau, data[f"{key}_ode"], "k-", linewidth=0.8)
    ax.set_xlabel("annealing time")
    ax.set_ylabel("summary statistics")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(fontsize=8)
    ax.set_title("SGD trajectories vs summary ODE (black)")
    return fig


def _render_rate_curves(job: PlotJob):
    fig = _fig()
    ax = fig.add_subplot(111)
    rate_lo, rate_hi = np.inf, 0.0
    for path in job.inputs:
        data = _read_csv(path, ["beta_i", "t0", "p_empirical"])
        for b in np.unique(data["beta_i"]):
            sel = data["beta_i"] == b
            rates = annealing_rate(data["beta_i"][sel], data["t0"][sel])
            order = np.argsort(rates)
            ax.plot(
                rates[order],
                data["p_empirical"][sel][order],
                "o-",
                markersize=3,
                linewidth=1.0,
                label=f"beta_i={b:g}",
            )
            rate_lo = min(rate_lo, float(rates.min()))
            rate_hi = max(rate_hi, float(rates.max()))
    rs = np.exp(np.linspace(np.log(max(rate_lo * 0.98, 1.0 + 1e-9)), np.log(rate_hi * 1.02), 400))
    ax.plot(
        rs,
        rate_asymptote_probability(rs, job.d, job.R, job.w_star, job.alpha),
        "k--",
        linewidth=1.5,
        label="beta_i -> 0 asymptote",
    )
    ax.set_xscale("log")
    ax.set_xlabel("annealing rate beta_i^(-1/t0)")
    ax.set_ylabel("collapse probability")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=7)
    return fig


_BUILDERS = {
    "heatmap": _render_heatmap,
    "trace_panels": _render_trace_panels,
    "ode_overlay": _render_ode_overlay,
    "rate_curves": _render_rate_curves,
}


def render(job: PlotJob) -> str:
    """Render the job to its output image; returns the output path.

    PNG bytes are produced by rasterizing the Agg canvas and encoding with
    Pillow (no metadata chunks), so identical inputs give identical files.
    """
    fig = _BUILDERS[job.kind](job)
    try:
        if job.format == "png":
            fig.canvas.draw()
            buf = np.asarray(fig.canvas.buffer_rgba())
            img = Image.fromarray(buf, mode="RGBA")
            img.save(job.out_image, format="PNG", optimize=False)
        else:
            fig.savefig(job.out_image, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    return job.out_image


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render annealvi CSV outputs as figures."
    )
    parser.add_argument("kind", choices=sorted(_BUILDERS))
    parser.add_argument("--in", dest="inputs", action="append", required=True)
    parser.add_argument("--iso", dest="iso_csv", default=None)
    parser.add_argument("--out", dest="out_image", required=True)
    parser.add_argument("--format", choices=("png", "svg"), default=None)
    parser.add_argument("--R", type=float, default=3.0)
    parser.add_argument("--w-star", type=float, default=0.8)
    parser.add_argument("--w1", type=float, default=0.5)
    parser.add_argument("--d", type=int, default=512)
    parser.add_argument("--alpha", type=float, default=0.608)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    fmt = args.format or ("svg" if args.out_image.endswith(".svg") else "png")
    try:
        job = PlotJob(
            kind=args.kind,
            inputs=args.inputs,
            iso_csv=args.iso_csv,
            out_image=args.out_image,
            format=fmt,
            R=args.R,
            w_star=args.w_star,
            w1=args.w1,
            d=args.d,
            alpha=args.alpha,
        )
        render(job)
    except (SchemaError, NoDataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def entrypoint() -> None:  # pragma: no cover
    sys.exit(main())
