"""Block-diagonal structure detection and per-block graphical lasso for GGMs."""

__version__ = "0.1.0"

from .covariance import CovMatrix, DataMatrix, read_csv, sample_covariance, standardize
from .errors import (
    BlockGGMError,
    ConstantColumn,
    DegeneratePath,
    EmptyCandidateSet,
    InputError,
    InsufficientComplexModels,
    NotConverged,
    SingularBlock,
    SingularInput,
)
from .glasso import PrecisionEstimate, bic_net, cgl_rho, graphical_lasso, select_rho
from .partition import Partition, ThresholdStep, adjusted_rand_index, components_at, threshold_path
from .selection import (
    ModelPoint,
    SelectionDiagnostics,
    block_loglik,
    criterion,
    pen_full,
    score_path,
    select_shdj,
    select_shrr,
    selection_step_function,
)
