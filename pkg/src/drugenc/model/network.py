"""Forward and backward passes of the bidirectional sequence classifier.

A sequence runs through stacked bidirectional recurrent layers; its encoding
is the top layer's last forward hidden state concatenated with the backward
direction's state after consuming the whole sequence in reverse. A drug pair
is scored from ``|e1 - e2| ++ (e1 * e2)`` through a single linear layer and
log-softmax. Gradients are exact backpropagation through all of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatchError, IndexOutOfVocabError
from . import kernels
from .params import EncoderModel, LstmDirectionParams


@dataclass
class _DirectionTrace:
    x: np.ndarray        # (T, B, I) inputs this direction consumed
    h: np.ndarray        # (T, B, H)
    c: np.ndarray
    tanh_c: np.ndarray
    gates: np.ndarray    # (T, B, 4H) post-activation


@dataclass
class _LayerTrace:
    fwd: _DirectionTrace
    bwd: _DirectionTrace  # runs on the time-reversed input


def _run_direction(x: np.ndarray, params: LstmDirectionParams) -> _DirectionTrace:
    steps, batch, input_dim = x.shape
    x_proj = x.reshape(steps * batch, input_dim) @ params.w_ih.T
    x_proj += params.b_ih + params.b_hh
    width = params.w_ih.shape[0]
    h, c, tanh_c, gates = kernels.seq_forward(
        np.ascontiguousarray(x_proj.reshape(steps, batch, width)), params.w_hh
    )
    return _DirectionTrace(x=x, h=h, c=c, tanh_c=tanh_c, gates=gates)


def _direction_backward(
    trace: _DirectionTrace,
    params: LstmDirectionParams,
    grad_h_out: np.ndarray,
):
    """Returns (grad_x, grad_w_ih, grad_w_hh, grad_bias)."""
    steps, batch, input_dim = trace.x.shape
    hidden = trace.h.shape[2]
    grad_pre = kernels.seq_backward(
        params.w_hh, trace.gates, trace.c, trace.tanh_c, grad_h_out
    )
    flat = grad_pre.reshape(steps * batch, 4 * hidden)
    grad_w_ih = flat.T @ trace.x.reshape(steps * batch, input_dim)
    h_prev = np.concatenate([np.zeros((1, batch, hidden)), trace.h[:-1]], axis=0)
    grad_w_hh = flat.T @ h_prev.reshape(steps * batch, hidden)
    grad_bias = flat.sum(axis=0)
    grad_x = (flat @ params.w_ih).reshape(steps, batch, input_dim)
    return grad_x, grad_w_ih, grad_w_hh, grad_bias


def encode_batch(model: EncoderModel, indices: np.ndarray, keep_traces: bool = False):
    """Encode a batch of index sequences.

    indices: (B, T) int array. Returns (encodings (B, 2H), traces), traces
    being None unless requested for a backward pass.
    """
    x = model.embedding[indices]                      # (B, T, d)
    x = np.ascontiguousarray(x.transpose(1, 0, 2))    # (T, B, d)
    traces: list[_LayerTrace] = []
    fwd = bwd = None
    for layer in model.layers:
        fwd = _run_direction(x, layer.forward)
        bwd = _run_direction(np.ascontiguousarray(x[::-1]), layer.backward)
        if keep_traces:
            traces.append(_LayerTrace(fwd=fwd, bwd=bwd))
        x = np.ascontiguousarray(np.concatenate([fwd.h, bwd.h[::-1]], axis=2))
    encodings = np.concatenate([fwd.h[-1], bwd.h[-1]], axis=1)
    return encodings, (traces if keep_traces else None)


def encode_sequence(indices: np.ndarray, model: EncoderModel) -> np.ndarray:
    """Encode one index sequence into its 2H-dimensional vector."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 1:
        raise ValueError(f"expected a 1-d index sequence, got shape {indices.shape}")
    if indices.size and (indices.min() < 0 or indices.max() >= model.config.vocab_size):
        raise IndexOutOfVocabError(
            f"indices must lie in [0, {model.config.vocab_size}), got "
            f"[{indices.min()}, {indices.max()}]"
        )
    encodings, _ = encode_batch(model, indices[None, :])
    return encodings[0]


def pair_features(e_i: np.ndarray, e_j: np.ndarray) -> np.ndarray:
    """Order-symmetric pair representation ``|e_i - e_j| ++ (e_i * e_j)``."""
    e_i = np.asarray(e_i, dtype=np.float64)
    e_j = np.asarray(e_j, dtype=np.float64)
    if e_i.shape != e_j.shape:
        raise DimensionMismatchError(
            f"encodings differ in shape: {e_i.shape} vs {e_j.shape}"
        )
    return np.concatenate([np.abs(e_i - e_j), e_i * e_j], axis=-1)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def classify_pair(features: np.ndarray, head_weight: np.ndarray, head_bias: np.ndarray) -> np.ndarray:
    """Log-probabilities over interaction labels for pair features."""
    if features.shape[-1] != head_weight.shape[1]:
        raise DimensionMismatchError(
            f"features have dim {features.shape[-1]}, head expects {head_weight.shape[1]}"
        )
    logits = features @ head_weight.T + head_bias
    return log_softmax(logits)


def nll_loss(log_probs: np.ndarray, labels: int | np.ndarray) -> float:
    """Negative log-likelihood; the mean over the batch for 2-d input."""
    if log_probs.ndim == 1:
        return float(-log_probs[int(labels)])
    labels = np.asarray(labels)
    return float(-log_probs[np.arange(len(labels)), labels].mean())


def _check_batch(model: EncoderModel, indices: np.ndarray) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= model.config.vocab_size):
        raise IndexOutOfVocabError("batch contains out-of-vocabulary indices")
    return indices


def batch_log_probs(model: EncoderModel, idx1: np.ndarray, idx2: np.ndarray) -> np.ndarray:
    """Forward-only label log-probabilities for a batch of pairs."""
    idx1 = _check_batch(model, idx1)
    idx2 = _check_batch(model, idx2)
    encodings, _ = encode_batch(model, np.concatenate([idx1, idx2], axis=0))
    n = len(idx1)
    feats = pair_features(encodings[:n], encodings[n:])
    return classify_pair(feats, model.head_weight, model.head_bias)


def batch_loss(model: EncoderModel, idx1: np.ndarray, idx2: np.ndarray, labels: np.ndarray) -> float:
    return nll_loss(batch_log_probs(model, idx1, idx2), labels)


def gradients(
    batch: tuple[np.ndarray, np.ndarray, np.ndarray],
    model: EncoderModel,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean loss and its exact gradient for a batch of labeled pairs.

    ``batch`` is (idx1, idx2, labels) with idx arrays of shape (B, T). The
    gradient dict mirrors the named-parameter layout of the model.
    """
    idx1, idx2, labels = batch
    idx1 = _check_batch(model, idx1)
    idx2 = _check_batch(model, idx2)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if n == 0:
        raise ValueError("empty batch")

    idx_all = np.concatenate([idx1, idx2], axis=0)
    encodings, traces = encode_batch(model, idx_all, keep_traces=True)
    e1, e2 = encodings[:n], encodings[n:]
    feats = pair_features(e1, e2)
    log_probs = classify_pair(feats, model.head_weight, model.head_bias)
    loss = nll_loss(log_probs, labels)

    grads: dict[str, np.ndarray] = {
        "embedding": np.zeros_like(model.embedding),
        "head.weight": np.zeros_like(model.head_weight),
        "head.bias": np.zeros_like(model.head_bias),
    }
    for i, layer in enumerate(model.layers):
        for direction in ("forward", "backward"):
            params: LstmDirectionParams = getattr(layer, direction)
            for name in ("w_ih", "w_hh", "b_ih", "b_hh"):
                grads[f"layers.{i}.{direction}.{name}"] = np.zeros_like(
                    getattr(params, name)
                )

    grad_logits = np.exp(log_probs)
    grad_logits[np.arange(n), labels] -= 1.0
    grad_logits /= n
    grads["head.weight"] += grad_logits.T @ feats
    grads["head.bias"] += grad_logits.sum(axis=0)
    grad_feats = grad_logits @ model.head_weight

    hidden2 = model.config.encoding_dim
    diff_sign = np.sign(e1 - e2)
    grad_abs = grad_feats[:, :hidden2]
    grad_mul = grad_feats[:, hidden2:]
    grad_e1 = grad_abs * diff_sign + grad_mul * e2
    grad_e2 = -grad_abs * diff_sign + grad_mul * e1
    grad_enc = np.concatenate([grad_e1, grad_e2], axis=0)   # (2B, 2H)

    hidden = model.config.hidden_size
    steps = idx_all.shape[1]
    batch_rows = idx_all.shape[0]
    grad_h_fwd = np.zeros((steps, batch_rows, hidden))
    grad_h_fwd[-1] = grad_enc[:, :hidden]
    grad_h_bwd = np.zeros((steps, batch_rows, hidden))
    grad_h_bwd[-1] = grad_enc[:, hidden:]

    for layer_idx in range(model.config.num_layers - 1, -1, -1):
        layer = model.layers[layer_idx]
        trace = traces[layer_idx]
        dx_f, dw_ih_f, dw_hh_f, db_f = _direction_backward(
            trace.fwd, layer.forward, grad_h_fwd
        )
        dx_b, dw_ih_b, dw_hh_b, db_b = _direction_backward(
            trace.bwd, layer.backward, grad_h_bwd
        )
        prefix = f"layers.{layer_idx}"
        grads[f"{prefix}.forward.w_ih"] += dw_ih_f
        grads[f"{prefix}.forward.w_hh"] += dw_hh_f
        grads[f"{prefix}.forward.b_ih"] += db_f
        grads[f"{prefix}.forward.b_hh"] += db_f
        grads[f"{prefix}.backward.w_ih"] += dw_ih_b
        grads[f"{prefix}.backward.w_hh"] += dw_hh_b
        grads[f"{prefix}.backward.b_ih"] += db_b
        grads[f"{prefix}.backward.b_hh"] += db_b

        grad_x = dx_f + dx_b[::-1]
        if layer_idx > 0:
            grad_h_fwd = np.ascontiguousarray(grad_x[:, :, :hidden])
            grad_h_bwd = np.ascontiguousarray(grad_x[::-1, :, hidden:])
        else:
            np.add.at(grads["embedding"], idx_all.T, grad_x)
    return loss, grads
