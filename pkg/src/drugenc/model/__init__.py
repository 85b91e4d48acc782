"""Bidirectional recurrent pair classifier: parameters, math, and training."""

from . import kernels
from .network import (
    batch_log_probs,
    batch_loss,
    classify_pair,
    encode_batch,
    encode_sequence,
    gradients,
    log_softmax,
    nll_loss,
    pair_features,
)
from .params import (
    EncoderConfig,
    EncoderModel,
    GATE_ORDER,
    LstmDirectionParams,
    LstmLayerParams,
    copy_model,
    expected_shapes,
    init_model,
    load_checkpoint,
    named_parameters,
    param_count,
    save_checkpoint,
)
from .training import (
    Adam,
    ColumnDataset,
    GridEntry,
    GridSpec,
    TrainHistory,
    build_column_dataset,
    evaluate_accuracy,
    export_encodings,
    grid_search,
    predict_labels,
    train,
)

__all__ = [
    "Adam",
    "ColumnDataset",
    "EncoderConfig",
    "EncoderModel",
    "GATE_ORDER",
    "GridEntry",
    "GridSpec",
    "LstmDirectionParams",
    "LstmLayerParams",
    "TrainHistory",
    "batch_log_probs",
    "batch_loss",
    "build_column_dataset",
    "classify_pair",
    "copy_model",
    "encode_batch",
    "encode_sequence",
    "evaluate_accuracy",
    "expected_shapes",
    "export_encodings",
    "gradients",
    "grid_search",
    "init_model",
    "kernels",
    "load_checkpoint",
    "log_softmax",
    "named_parameters",
    "nll_loss",
    "pair_features",
    "param_count",
    "predict_labels",
    "save_checkpoint",
    "train",
]
