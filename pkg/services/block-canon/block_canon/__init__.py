"""Block Canon: fast block-matrix algebra and Gaussian estimation via B = Q D Q'."""

from .block_core import (
    BlockMatrix,
    BlockPartition,
    CanonicalForm,
    PaddedBlockMatrix,
    Rotation,
    canonicalize,
    compress,
    decanonicalize,
    expand,
    infer_partition,
    pad_rectangular,
    rotate,
    rotate_back,
)
from .errors import (
    BlockCanonError,
    Degenerate,
    DimensionMismatch,
    InputError,
    InvalidPartition,
    NotRealLoggable,
    NotSPD,
    Singular,
    StructureViolation,
    UnequalBlocks,
    UnmappedAsset,
    ZeroVariance,
)
from .gaussian_mle import (
    BlockCovariance,
    CorrelationEstimate,
    CovarianceEstimate,
    RotatedSample,
    ScoreVector,
    mle_block_correlation,
    mle_block_covariance,
    neg2_loglik,
    neg2_loglik_correlation,
    rotate_sample,
    sample_score,
    score,
)
from .matrix_functions import (
    BlockCorrelation,
    CorrelationParam,
    Validity,
    ValidityReport,
    determinant,
    from_param,
    inverse,
    is_valid_correlation,
    kron_expand,
    kron_fast_path,
    log_determinant,
    mexp,
    mlog,
    param_unique_elements,
    power,
    to_param,
)
