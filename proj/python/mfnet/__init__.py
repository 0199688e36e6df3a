"""Mean-field analysis of deep and residual networks at desk scale."""

from ._mfnet import (
    Error,
    InvalidArgument,
    InverseUnstable,
    NonFiniteLoss,
    ShapeMismatch,
    activation,
    default_config,
    dnn_forward,
    eps1_dnn,
    gram_chain,
    init_dnn,
    init_resnet,
    resnet_forward,
    run_study,
    synthetic_dataset,
    train_dnn,
    train_resnet,
)

__all__ = [
    "Error",
    "InvalidArgument",
    "InverseUnstable",
    "NonFiniteLoss",
    "ShapeMismatch",
    "activation",
    "default_config",
    "dnn_forward",
    "eps1_dnn",
    "gram_chain",
    "init_dnn",
    "init_resnet",
    "resnet_forward",
    "run_study",
    "synthetic_dataset",
    "train_dnn",
    "train_resnet",
]
