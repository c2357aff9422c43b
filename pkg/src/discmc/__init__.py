"""Low-rank matrix completion with a discrete-alphabet regularizer.

Proximal-gradient solvers (Soft-Impute, accelerated Soft-Impute, a
discrete-aware accelerated variant, and log-sum-penalty variants with a
non-monotone safeguard), the operators they are built from, MovieLens
ingestion and a small benchmark harness.
"""
from .data import (
    RatingsDataset,
    SplitSpec,
    SyntheticSpec,
    export_udata,
    load_movielens,
    split,
    synth_discrete_lowrank,
)
from .errors import (
    ConvergenceError,
    DataError,
    DimensionError,
    DiscMCError,
    ParameterError,
    ParseError,
    SolverError,
)
from .kernels import BACKEND
from .linalg import (
    IndexSet,
    ObservedMatrix,
    SparsePlusLowRank,
    SvdFactors,
    grad_f,
    mask,
    masked_residual_sq,
    truncated_svd,
    vect,
    vect_inv,
)
from .metrics import ExperimentGrid, ResultRow, export_trace, nmse, read_trace, run_grid
from .regularizers import (
    Alphabet,
    RegularizerSpec,
    discrete_penalty,
    lsp_value,
    nuclear_norm,
    prox_discrete,
    prox_lsp_sv,
    prox_shifted_l1,
    svt,
)
from .solvers import (
    ALGORITHMS,
    ConvergenceTrace,
    IterateState,
    SolverConfig,
    apg_step,
    discrete_apg_step,
    momentum_beta,
    niapg_step,
    objective,
    run,
    soft_impute_step,
)

__version__ = "0.1.0"
