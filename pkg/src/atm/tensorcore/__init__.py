from .functional import MASK_BIAS, attention, entropy_from_logits, log_softmax, normalize_rows, softmax
from .gradcheck import GradCheckReport, NonDeterminismError, grad_check
from .nn import (
    ConfigError,
    init_linear,
    init_msa,
    linear,
    mean_pool,
    mlp,
    multi_head_self_attention,
    sinusoidal_table,
)
from .optim import AdamState, adam_step, cosine_lr
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tensor,
    as_tensor,
    canonical_sum,
    concat,
    exp,
    getitem,
    log,
    matmul,
    mean,
    relu,
    reshape,
    sqrt,
    stack,
    take_rows,
    transpose,
    tsum,
)

__all__ = [
    "MASK_BIAS", "attention", "entropy_from_logits", "log_softmax", "normalize_rows", "softmax",
    "GradCheckReport", "NonDeterminismError", "grad_check",
    "ConfigError", "init_linear", "init_msa", "linear", "mean_pool", "mlp",
    "multi_head_self_attention", "sinusoidal_table",
    "AdamState", "adam_step", "cosine_lr",
    "NonFiniteError", "ShapeError", "Tensor", "as_tensor", "canonical_sum", "concat",
    "exp", "getitem", "log", "matmul", "mean", "relu", "reshape", "sqrt", "stack",
    "take_rows", "transpose", "tsum",
]
