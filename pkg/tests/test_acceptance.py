"""Acceptance suite: one test per criterion, at the stated tolerances.

Each test prints a PASS/FAIL line for its criterion before asserting, so a
single run of this module yields the full scoreboard.  Criteria 1, 3, and
the (a)/(c) clauses of 4 assert levels that the model's own dynamics do not
attain (see the decisions ledger for the measured values and mechanisms);
they are implemented exactly as stated and left red rather than loosened.
"""

import math
import time
from multiprocessing import get_context

import numpy as np
import pytest

from annealvi.forces import ForceParams, force_f, force_g, force_g_prime
from annealvi.harness import (
    SweepConfig,
    _scenario_seed_runner,
    compare_ode_sgd,
    run_sweep,
    scenario_suite,
)
from annealvi.mixture import SummaryStats
from annealvi.ode import OdeConfig, integrate, linearized_solution, ode_rhs
from annealvi.schedule import AnnealSchedule
from annealvi.theory import (
    TheoryParams,
    closed_form_I,
    collapse_probability,
    exposure_integral,
    iso_probability_beta,
    optimal_beta_i,
)
from annealvi.trainer import TrainConfig

TH = TheoryParams(d=512, R=3.0, w_star=0.8)
P = ForceParams(R=3.0, w1=0.5, w_star=0.8)
N_SEEDS = 100
WORKERS = 2


def _report(criterion: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")


def _run_scenario_over_seeds(name: str) -> dict:
    ctx = get_context("fork")
    with ctx.Pool(WORKERS) as pool:
        labels = pool.map(_scenario_seed_runner, [(name, s) for s in range(N_SEEDS)])
    out = {"collapsed": 0, "separated": 0, "unconverged": 0}
    for lab in labels:
        out[lab] += 1
    return out


def test_criterion_1_vanilla_collapse():
    t0 = time.time()
    counts = _run_scenario_over_seeds("fig1_row1")
    classified = N_SEEDS - counts["unconverged"]
    p_emp = counts["collapsed"] / classified
    p_th = collapse_probability(0.0, TH)
    ok = (
        p_emp >= 0.95
        and abs(p_th - math.erf(math.sqrt(512) * math.log(4) / 18)) < 1e-12
        and abs(p_emp - p_th) <= 0.05
    )
    _report(
        "1 vanilla collapse",
        ok,
        f"p_emp={p_emp:.3f} (need >= 0.95), p_theory={p_th:.4f}, "
        f"|diff|={abs(p_emp - p_th):.4f} (need <= 0.05), {time.time()-t0:.0f}s",
    )
    assert p_th == pytest.approx(0.986, abs=1e-3)
    assert abs(p_emp - p_th) <= 0.05
    assert p_emp >= 0.95  # measured ~0.94: vanilla VI never symmetrizes (ledger)


def test_criterion_2_annealing_rescue():
    t0 = time.time()
    counts = _run_scenario_over_seeds("fig1_row3")
    classified = N_SEEDS - counts["unconverged"]
    p_emp = counts["collapsed"] / classified
    I = closed_form_I(1.0 / 90.0, 500.0, TH)
    p_th = collapse_probability(I, TH)
    ok = p_emp <= 0.05 and abs(I - 41.1) < 0.05 and p_th < 1e-15
    _report(
        "2 annealing rescue",
        ok,
        f"p_emp={p_emp:.3f} (need <= 0.05), I={I:.3f}, p_theory={p_th:.2e}, "
        f"{time.time()-t0:.0f}s",
    )
    assert I == pytest.approx(41.1, abs=0.05)
    assert p_th < 1e-15
    assert p_emp <= 0.05


def test_criterion_3_ode_sgd_agreement():
    t0 = time.time()
    cfg = TrainConfig(
        d=512,
        R=3.0,
        w_star=0.8,
        w1=0.5,
        eta=0.05,
        batch_size=512,
        steps=10_000,
        post_steps=500,
        schedule=AnnealSchedule("exponential", beta_i=1.0 / 90.0, t0=500.0),
        seed=1,
    )
    rep = compare_ode_sgd(cfg)
    worst = max(rep["sup_m1"], rep["sup_m2"], rep["sup_s"])
    ok = worst <= 0.05
    _report(
        "3 ODE-SGD agreement",
        ok,
        f"sup_m1={rep['sup_m1']:.3f} sup_m2={rep['sup_m2']:.3f} "
        f"sup_s={rep['sup_s']:.3f} (need <= 0.05), {time.time()-t0:.0f}s",
    )
    # measured ~0.29 at batch 512: finite-batch noise decorrelates the means
    # (s-plateau) and jitters the commitment front; deviation falls to 0.018
    # at batch 8192 (ledger).  Asserted at the stated batch and tolerance.
    assert worst <= 0.05


def test_criterion_4_phase_diagram():
    t0 = time.time()
    grid = list(np.exp(np.linspace(np.log(1e-4), np.log(TH.beta_transition), 5)))
    t0s = [50.0, 150.0, 500.0, 1500.0]
    sweep = SweepConfig(
        base=TrainConfig(),
        beta_i_grid=grid,
        t0_grid=t0s,
        n_replicates=50,
        engine="ode",
        theory=TH,
        base_seed=2024,
        workers=WORKERS,
    )
    res = run_sweep(sweep)
    by_cell = {(round(r.beta_i, 10), r.t0): r for r in res.rows}

    # (a) top-beta_i column collapses
    top = grid[-1]
    top_ps = [by_cell[(round(top, 10), t)].p_empirical for t in t0s]
    ok_a = all(p >= 0.9 for p in top_ps)

    # (b) optimal beta_i at the longest schedule separates
    bstar = optimal_beta_i(TH)
    sweep_b = SweepConfig(
        base=TrainConfig(),
        beta_i_grid=[bstar],
        t0_grid=[t0s[-1]],
        n_replicates=50,
        engine="ode",
        theory=TH,
        base_seed=2024,
        workers=1,
    )
    p_bstar = run_sweep(sweep_b).rows[0].p_empirical
    ok_b = p_bstar <= 0.1

    # (c) theoretical 0.5-iso inside the empirical bracketing cells
    hits = 0
    iso_detail = []
    for t in t0s:
        ps = [by_cell[(round(b, 10), t)].p_empirical for b in grid]
        iso = iso_probability_beta(t, 0.5, TH)
        hit = False
        for j in range(len(grid) - 1):
            lo, hi = sorted((ps[j], ps[j + 1]))
            if lo < 0.5 <= hi and grid[j] <= iso <= grid[j + 1]:
                hit = True
        hits += hit
        iso_detail.append(f"t0={t:g}: iso={iso:.4f} ps={[round(p,2) for p in ps]}")
    ok_c = hits >= 3

    _report(
        "4 phase diagram",
        ok_a and ok_b and ok_c,
        f"(a) top-column p={[round(p,2) for p in top_ps]} (need all >= 0.9) | "
        f"(b) p(beta*={bstar:.4g}, t0=1500)={p_bstar:.3f} (need <= 0.1) | "
        f"(c) iso bracketed in {hits}/4 rows (need >= 3), {time.time()-t0:.0f}s",
    )
    for line in iso_detail:
        print("    " + line)
    assert ok_b
    # (a), (c) measured unattainable: the true transition sits above
    # alpha/R^2 (saddle amplification persists through beta R^2 in [0.6, 2]),
    # see ledger; asserted as stated.
    assert ok_a
    assert ok_c


def test_criterion_5_annealing_rate_universality():
    t0 = time.time()
    target_I = 1.30
    ps = []
    for b in (1e-4, 1e-6, 1e-8):
        L = math.log(1.0 / b)
        t0v = target_I * L / (
            math.sqrt(2.0 / math.pi)
            * (math.sqrt(TH.alpha) - math.sqrt(TH.R**2 * b))
        )
        sweep = SweepConfig(
            base=TrainConfig(),
            beta_i_grid=[b],
            t0_grid=[t0v],
            n_replicates=50,
            engine="ode",
            theory=TH,
            base_seed=77,
            workers=1,
        )
        ps.append(run_sweep(sweep).rows[0].p_empirical)
    gaps = [abs(a - b) for i, a in enumerate(ps) for b in ps[i + 1 :]]
    ok = max(gaps) <= 0.15
    _report(
        "5 rate universality",
        ok,
        f"p={[round(p,3) for p in ps]} max pairwise gap={max(gaps):.3f} "
        f"(need <= 0.15), {time.time()-t0:.0f}s",
    )
    assert max(gaps) <= 0.15


def test_criterion_6_force_correctness():
    t0 = time.time()
    rng = np.random.default_rng(606)
    n = 10_000_000
    worst_z = 0.0
    for _ in range(25):
        params = ForceParams(
            R=rng.uniform(1.0, 5.0),
            w1=rng.uniform(0.2, 0.8),
            w_star=rng.uniform(0.2, 0.8),
        )
        sigma = float(np.exp(rng.uniform(np.log(0.3), np.log(30.0))))
        r_ratio = params.R / sigma
        s = rng.uniform(max(-1.0, 1.0 - 9.0 / r_ratio**2), 0.99)
        m = rng.uniform(-1.0, 1.0)
        x = rng.standard_normal(n)
        a = r_ratio * math.sqrt(2.0 * (1.0 - s))
        b = -(r_ratio**2) * (1.0 - s)
        c = math.log(params.w2 / params.w1)
        with np.errstate(over="ignore"):
            e1 = 1.0 / (1.0 + np.exp(-(a * x + b + c)))
            e2 = 1.0 / (1.0 + np.exp(-(a * x + b - c)))
            fv = params.w1 * e1**2 + params.w2 * e2**2
            gv = 1.0 - 2.0 / (
                1.0
                + np.exp(
                    -(
                        2.0 * sigma * params.R * x
                        + 2.0 * params.R**2 * m
                        + math.log(params.w_star / (1.0 - params.w_star))
                    )
                )
            )
        # the 1e-12 floor absorbs float64 saturation (values pinned at +-1
        # make the sample SE degenerate at ~1e-17)
        z_f = abs(force_f(s, sigma, params) - fv.mean()) / (
            fv.std() / math.sqrt(n) + 1e-12
        )
        z_g = abs(force_g(m, sigma, params) - gv.mean()) / (
            gv.std() / math.sqrt(n) + 1e-12
        )
        worst_z = max(worst_z, z_f, z_g)
        del x, e1, e2, fv, gv

    id_f = abs(force_f(1.0, 1.7, P) - P.w1 * P.w2)
    id_g = abs(force_g(-P.epsilon, 0.9, P))

    # stated asymptotic regimes, 5%
    from annealvi.forces import f_high_temp, f_low_temp, g_high_temp

    rel_f_lo = abs(force_f(0.0, 0.1, P) - float(f_low_temp(0.0, 0.1, P))) / float(
        f_low_temp(0.0, 0.1, P)
    )
    rel_f_hi = abs(force_f(0.3, 100.0 * P.R, P) - f_high_temp(P)) / f_high_temp(P)
    g_hi = float(g_high_temp(0.05, 100.0 * P.R, P))
    rel_g_hi = abs(force_g(0.05, 100.0 * P.R, P) - g_hi) / abs(g_hi)
    gp_hi = -math.sqrt(2.0 / math.pi) * (P.R / (100.0 * P.R))
    rel_gp_hi = abs(force_g_prime(0.0, 100.0 * P.R, P) - gp_hi) / abs(gp_hi)

    ok = (
        worst_z < 3.0
        and id_f < 1e-10
        and id_g < 1e-10
        and max(rel_f_lo, rel_f_hi, rel_g_hi, rel_gp_hi) < 0.05
    )
    _report(
        "6 force correctness",
        ok,
        f"worst MC z={worst_z:.2f} (need < 3), identities=({id_f:.1e},{id_g:.1e}) "
        f"(need < 1e-10), asymptotics rel=({rel_f_lo:.3f},{rel_f_hi:.1e},"
        f"{rel_g_hi:.1e},{rel_gp_hi:.1e}) (need < 0.05), {time.time()-t0:.0f}s",
    )
    assert worst_z < 3.0
    assert id_f < 1e-10 and id_g < 1e-10
    assert max(rel_f_lo, rel_f_hi, rel_g_hi, rel_gp_hi) < 0.05


def test_criterion_7_theory_consistency():
    t0 = time.time()
    worst = 0.0
    for beta_i in np.exp(np.linspace(np.log(1e-4), np.log(0.06), 10)):
        for t0v in np.linspace(50.0, 1500.0, 10):
            sch = AnnealSchedule("exponential", beta_i=float(beta_i), t0=float(t0v))
            worst = max(
                worst,
                abs(
                    exposure_integral(sch, TH).value
                    - closed_form_I(float(beta_i), float(t0v), TH)
                ),
            )
    # erf closed form vs numeric quadrature
    worst_p = 0.0
    for d in (64, 512):
        for w_star in (0.6, 0.8):
            for I in (0.0, 1.0, 3.0):
                th = TheoryParams(d=d, R=3.0, w_star=w_star)
                lim = 2.0 * th.epsilon * math.exp(-I)
                xs = np.linspace(-lim, lim, 200_001)
                quad = np.trapezoid(
                    math.sqrt(d / (4.0 * math.pi)) * np.exp(-d * xs**2 / 4.0), xs
                )
                worst_p = max(worst_p, abs(collapse_probability(I, th) - quad))
    # optimal beta_i stationarity and bound
    ok_beta = True
    worst_resid = 0.0
    for R in (3.0, 5.0, 10.0):
        th = TheoryParams(d=512, R=R, w_star=0.8)
        b = optimal_beta_i(th)
        u = math.sqrt(b)
        worst_resid = max(
            worst_resid, abs(u * (1.0 - math.log(u)) - math.sqrt(th.alpha) / R)
        )
        ok_beta = ok_beta and (b < th.beta_transition)
    ok = worst < 1e-8 and worst_p < 1e-10 and worst_resid < 1e-8 and ok_beta
    _report(
        "7 theory consistency",
        ok,
        f"|I_num - I_closed|={worst:.1e} (<1e-8), |erf-quad|={worst_p:.1e} "
        f"(<1e-10), stationarity resid={worst_resid:.1e} (<1e-8), "
        f"beta*<alpha/R^2={ok_beta}, {time.time()-t0:.0f}s",
    )
    assert worst < 1e-8
    assert worst_p < 1e-10
    assert worst_resid < 1e-8
    assert ok_beta


def test_criterion_8_dynamics_invariants():
    t0 = time.time()
    # fixed points stationary under integration
    drift = 0.0
    for fp in (SummaryStats(1.0, -1.0, -1.0), SummaryStats(1.0, 1.0, 1.0)):
        cfg = OdeConfig(
            params=P,
            schedule=AnnealSchedule("constant", beta_i=0.4),
            t_end=100.0,
            dt=0.05,
        )
        tr = integrate(fp, cfg)
        drift = max(
            drift,
            float(
                np.max(
                    np.abs(
                        np.stack([tr.m1 - fp.m1, tr.m2 - fp.m2, tr.s - fp.s])
                    )
                )
            ),
        )
    # saddle structure at (0, 0, -1)
    beta = 1e-4 / P.R**2
    h = 1e-6
    J = np.empty((3, 3))
    x0 = np.array([0.0, 0.0, -1.0])
    for j in range(3):
        xp, xm = x0.copy(), x0.copy()
        if j == 2:
            # s = -1 is the domain edge: one-sided difference upward
            xp[j] += h
            dp = np.array(ode_rhs(SummaryStats(*xp), beta, P))
            dm = np.array(ode_rhs(SummaryStats(*x0), beta, P))
            J[:, j] = (dp - dm) / h
        else:
            xp[j] += h
            xm[j] -= h
            dp = np.array(ode_rhs(SummaryStats(*xp), beta, P))
            dm = np.array(ode_rhs(SummaryStats(*xm), beta, P))
            J[:, j] = (dp - dm) / (2 * h)
    vals, vecs = np.linalg.eig(J)
    vals = np.real(vals)
    n_pos = int((vals > 0).sum())
    v = np.real(vecs[:, int(np.argmax(vals))])
    v /= np.linalg.norm(v)
    angle = math.acos(
        min(1.0, abs(float(v @ (np.array([1.0, -1.0, 0.0]) / math.sqrt(2)))))
    )
    # linearized growth factor
    sched = AnnealSchedule("constant", beta_i=beta)
    _, _, diff = linearized_solution(0.0, 1e-4, sched, 10.0, P)
    growth = float(diff[-1] / diff[0])
    want = math.exp(10.0 * math.sqrt(beta * P.R**2 / (2.0 * math.pi)))
    rel = abs(growth - want) / want
    ok = drift < 1e-10 and n_pos == 1 and angle < 1e-3 and rel < 0.02
    _report(
        "8 dynamics invariants",
        ok,
        f"fixed-point drift={drift:.1e} (<1e-10), unstable dirs={n_pos} (=1), "
        f"angle={angle:.2e} rad (<1e-3), growth rel err={rel:.4f} (<0.02), "
        f"{time.time()-t0:.0f}s",
    )
    assert drift < 1e-10
    assert n_pos == 1
    assert angle < 1e-3
    assert rel < 0.02


def test_criterion_9_ablations():
    t0 = time.time()
    frozen_sigma = scenario_suite("appB_frozen_sigma", seed=1)
    frozen_mu = scenario_suite("appB_frozen_mu", seed=1)
    sig_final = (float(frozen_mu.sigma1[-1]), float(frozen_mu.sigma2[-1]))
    ok = (
        frozen_sigma.collapsed == "collapsed"
        and abs(sig_final[0] - 1.0) < 0.1
        and abs(sig_final[1] - 1.0) < 0.1
    )
    _report(
        "9 ablations",
        ok,
        f"frozen-sigma -> {frozen_sigma.collapsed} (need collapsed); "
        f"frozen-mu sigma=({sig_final[0]:.3f},{sig_final[1]:.3f}) "
        f"(need within 0.1 of 1), {time.time()-t0:.0f}s",
    )
    assert frozen_sigma.collapsed == "collapsed"
    assert abs(sig_final[0] - 1.0) < 0.1
    assert abs(sig_final[1] - 1.0) < 0.1
