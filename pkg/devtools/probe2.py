import numpy as np, time, sys
sys.path.insert(0, "/root/pkg/src")
from annealvi.harness import SweepConfig, run_sweep, compare_ode_sgd
from annealvi.trainer import TrainConfig
import annealvi.trainer as trainer_mod
from annealvi.schedule import AnnealSchedule
from annealvi.theory import TheoryParams, optimal_beta_i, iso_probability_beta

if __name__ == "__main__":
    # (b) dense vs lowrank s-trace, one seed, short run to compare plateaus
    cfg_s = TrainConfig(d=512, schedule=AnnealSchedule("exponential", beta_i=1/90, t0=500.0),
                        steps=10000, post_steps=0, seed=3, record_every=50)
    tr_lr = trainer_mod.run_annealed_sgd(cfg_s)
    trainer_mod._DENSE_DIM_CUTOFF = 10000  # force dense
    t0 = time.time()
    tr_d = trainer_mod.run_annealed_sgd(cfg_s)
    trainer_mod._DENSE_DIM_CUTOFF = 32
    i_mid = len(tr_lr.s)//3
    print(f"s-plateau at tau~170: lowrank={tr_lr.s[i_mid]:.3f} dense={tr_d.s[i_mid]:.3f} (dense took {time.time()-t0:.0f}s)", flush=True)
    print("min s: lowrank", tr_lr.s.min(), "dense", tr_d.s.min(), flush=True)

    # (c) batch scaling of criterion-3 sup norms
    for batch in [2048, 8192]:
        cfg = TrainConfig(d=512, schedule=AnnealSchedule("exponential", beta_i=1/90, t0=500.0),
                          steps=10000, post_steps=500, seed=1, batch_size=batch)
        t0 = time.time()
        r = compare_ode_sgd(cfg)
        print(f"batch {batch}: sup_m1={r['sup_m1']:.3f} sup_m2={r['sup_m2']:.3f} sup_s={r['sup_s']:.3f} ({time.time()-t0:.0f}s)", flush=True)

    # (a) criterion-4 default sweep
    th = TheoryParams(d=512, R=3.0, w_star=0.8)
    grid = list(np.exp(np.linspace(np.log(1e-4), np.log(th.beta_transition), 5)))
    t0s = [50.0, 150.0, 500.0, 1500.0]
    sw = SweepConfig(base=TrainConfig(), beta_i_grid=grid, t0_grid=t0s, n_replicates=50,
                     engine="ode", base_seed=2024, workers=2)
    t0 = time.time()
    res = run_sweep(sw)
    print(f"sweep took {time.time()-t0:.0f}s", flush=True)
    for r in res.rows:
        print(f"  b={r.beta_i:.5g} t0={r.t0:>6} p={r.p_empirical:.3f} (th={r.p_theory:.3f}) unc={r.n_unconverged}", flush=True)
    print("beta* =", optimal_beta_i(th), flush=True)
    for t in t0s:
        print("iso", t, iso_probability_beta(t, 0.5, th), flush=True)
