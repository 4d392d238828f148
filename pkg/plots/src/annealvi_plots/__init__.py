"""Figure renderers for the annealvi CSV outputs."""

from .render import (
    NoDataError,
    PlotJob,
    SchemaError,
    annealing_rate,
    main,
    rate_asymptote_probability,
    render,
    student_marginal,
    target_marginal,
)

__version__ = "0.1.0"
