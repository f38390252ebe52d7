"""Hyperbolic neural-network layers built on horocycle level sets.

Two coordinate charts of the same constant-curvature space (an open ball
and a hyperboloid sheet), a small reverse-mode autodiff engine, horocycle
based classification and feature layers together with the standard
baselines, and a training loop with deterministic metrics.
"""

from .autodiff import Tensor, finite_diff_check
from .busemann import (
    Direction,
    Horosphere,
    busemann,
    busemann_lorentz,
    busemann_poincare,
    busemann_ray_oracle,
    horosphere_sample,
    point_to_horosphere,
)
from .errors import NumericError, UsageError
from .gyrovector import gyro_add, gyro_inverse, gyro_scalar, gyration
from .layers import (
    BfcParams,
    BmlrParams,
    baseline_fc,
    baseline_mlr_logits,
    bfc_forward,
    bmlr_logits,
)
from .manifold import (
    LorentzModel,
    LorentzPoint,
    PoincareBall,
    PoincarePoint,
    distance,
    exp_map,
    log_map,
    make_space,
    parallel_transport,
    to_lorentz,
    to_poincare,
)
from .trainer import (
    EmbedConfig,
    OptimConfig,
    TrainResult,
    embed,
    evaluate,
    make_head,
    train,
)

__all__ = [
    "BfcParams",
    "BmlrParams",
    "Direction",
    "EmbedConfig",
    "Horosphere",
    "LorentzModel",
    "LorentzPoint",
    "NumericError",
    "OptimConfig",
    "PoincareBall",
    "PoincarePoint",
    "Tensor",
    "TrainResult",
    "UsageError",
    "baseline_fc",
    "baseline_mlr_logits",
    "bfc_forward",
    "bmlr_logits",
    "busemann",
    "busemann_lorentz",
    "busemann_poincare",
    "busemann_ray_oracle",
    "distance",
    "embed",
    "evaluate",
    "exp_map",
    "finite_diff_check",
    "gyration",
    "gyro_add",
    "gyro_inverse",
    "gyro_scalar",
    "horosphere_sample",
    "log_map",
    "make_head",
    "make_space",
    "parallel_transport",
    "point_to_horosphere",
    "to_lorentz",
    "to_poincare",
    "train",
]
