"""Annealed variational inference on bimodal Gaussian mixtures.

A numerical laboratory pairing a stochastic trainer (annealed SGD with
JKO updates on the sphere) with its exact low-dimensional theory: the
summary-statistics ODE, temperature-regime asymptotics, and the
closed-form mode-collapse probability, plus a sweep harness that maps
the (initial temperature, annealing time) phase diagram.
"""

from .forces import (
    AccuracyError,
    ForceParams,
    epsilon_bias,
    erf,
    f_high_temp,
    f_low_temp,
    force_f,
    force_g,
    force_g_prime,
    g_high_temp,
    g_low_temp,
    lambert_w0,
    lambert_wm1,
)
from .harness import (
    SweepConfig,
    SweepResult,
    SweepRow,
    compare_ode_sgd,
    run_sweep,
    scenario_suite,
)
from .mixture import (
    StudentState,
    SummaryStats,
    TargetMixture,
    log_student_density,
    log_target_density,
    sample_student,
    summary_stats,
    tempered_loss_estimate,
)
from .ode import (
    InstabilityError,
    OdeConfig,
    OdeTrace,
    integrate,
    linearized_solution,
    ode_rhs,
    sample_initial_stats,
)
from .schedule import AnnealSchedule, schedule_beta
from .theory import (
    ExposureResult,
    NoSolutionError,
    TheoryParams,
    closed_form_I,
    collapse_probability,
    exposure_integral,
    iso_probability_beta,
    lambert_candidates,
    optimal_beta_i,
    rate_asymptote_I,
)
from .trainer import (
    DegenerateStateError,
    GradientRecord,
    RunTrace,
    StepSizeError,
    TrainConfig,
    classify_collapse,
    jko_step,
    reparam_gradient,
    run_annealed_sgd,
)

__version__ = "0.1.0"
