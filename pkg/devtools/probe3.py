import numpy as np, time, sys, collections
sys.path.insert(0, "/root/pkg/src")
from multiprocessing import Pool
from annealvi.harness import SweepConfig, run_sweep, scenario_suite, _scenario_config
from annealvi.trainer import TrainConfig, run_annealed_sgd
from annealvi.schedule import AnnealSchedule
from annealvi.theory import TheoryParams, optimal_beta_i, iso_probability_beta, closed_form_I, collapse_probability

def crit1_seed(seed):
    return scenario_suite("fig1_row1", seed=seed).collapsed

def crit2_seed(seed):
    return scenario_suite("fig1_row3", seed=seed).collapsed

if __name__ == "__main__":
    th = TheoryParams(d=512, R=3.0, w_star=0.8)

    # criterion 4: default grid, ODE engine, 50 reps
    grid = list(np.exp(np.linspace(np.log(1e-4), np.log(th.beta_transition), 5)))
    t0s = [50.0, 150.0, 500.0, 1500.0]
    sw = SweepConfig(base=TrainConfig(), beta_i_grid=grid, t0_grid=t0s, n_replicates=50,
                     engine="ode", base_seed=2024, workers=2)
    t0 = time.time()
    res = run_sweep(sw)
    print(f"[crit4] sweep took {time.time()-t0:.0f}s", flush=True)
    for r in res.rows:
        print(f"  b={r.beta_i:.5g} t0={r.t0:>6} p={r.p_empirical:.3f} (th={r.p_theory:.3f}) unc={r.n_unconverged}", flush=True)
    bstar = optimal_beta_i(th)
    print("[crit4] beta* =", bstar, flush=True)
    for t in t0s:
        print("[crit4] iso", t, iso_probability_beta(t, 0.5, th), flush=True)

    # criterion 5: three equal-rate families, ODE engine, 50 reps
    # rate chosen so p_theory ~ 0.45
    # I = sqrt(2/pi)*t0*sqrt(alpha)/L ~ target; choose I ~ 1.3
    import math
    target_I = 1.30
    fams = []
    for b in (1e-4, 1e-6, 1e-8):
        L = math.log(1/b)
        t0v = target_I * L / (math.sqrt(2/math.pi) * (math.sqrt(th.alpha) - math.sqrt(9*b)))
        fams.append((b, t0v))
    print("[crit5] families:", fams, flush=True)
    sw5 = SweepConfig(base=TrainConfig(), beta_i_grid=[f[0] for f in fams],
                      t0_grid=[1.0], n_replicates=50, engine="ode", base_seed=77, workers=2)
    # families have different t0 per beta_i -> run três sweeps of 1 cell
    for b, t0v in fams:
        sw1 = SweepConfig(base=TrainConfig(), beta_i_grid=[b], t0_grid=[t0v],
                          n_replicates=50, engine="ode", base_seed=77, workers=1)
        t0 = time.time()
        r = run_sweep(sw1).rows[0]
        print(f"[crit5] b={b:g} t0={t0v:.2f} rate={b**(-1/t0v):.4f} p={r.p_empirical:.3f} th={r.p_theory:.3f} ({time.time()-t0:.0f}s)", flush=True)

    # criterion 1: fig1_row1 over seeds 0..99
    t0 = time.time()
    with Pool(2) as p:
        res1 = p.map(crit1_seed, range(100))
    c = collections.Counter(res1)
    n_cls = 100 - c.get("unconverged", 0)
    print(f"[crit1] fig1_row1 seeds0-99: {dict(c)} p_emp={c.get('collapsed',0)/n_cls:.4f} ({time.time()-t0:.0f}s)", flush=True)

    # criterion 2: fig1_row3 over seeds 0..99
    t0 = time.time()
    with Pool(2) as p:
        res2 = p.map(crit2_seed, range(100))
    c2 = collections.Counter(res2)
    n_cls = 100 - c2.get("unconverged", 0)
    print(f"[crit2] fig1_row3 seeds0-99: {dict(c2)} p_emp={c2.get('collapsed',0)/n_cls:.4f} ({time.time()-t0:.0f}s)", flush=True)
