"""Pure-NumPy sequence kernels. Fallback when the compiled extension is absent.

Both kernels walk the time axis of one recurrence direction. Gate blocks are
packed along the last axis in the order input, forget, cell, output.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def seq_forward(x_proj: np.ndarray, w_hh: np.ndarray):
    """Run one direction over a batch.

    x_proj: (T, B, 4H) input projections with both bias vectors already added.
    w_hh:   (4H, H) recurrent weights.
    Returns (h, c, tanh_c, gates): hidden states, cell states, tanh of cell
    states, and post-activation gate values, each (T, B, H) or (T, B, 4H).
    """
    steps, batch, width = x_proj.shape
    hidden = width // 4
    h = np.zeros((steps, batch, hidden))
    c = np.zeros((steps, batch, hidden))
    tanh_c = np.zeros((steps, batch, hidden))
    gates = np.zeros((steps, batch, width))

    h_prev = np.zeros((batch, hidden))
    c_prev = np.zeros((batch, hidden))
    for t in range(steps):
        pre = x_proj[t] + h_prev @ w_hh.T
        gi = _sigmoid(pre[:, :hidden])
        gf = _sigmoid(pre[:, hidden:2 * hidden])
        gg = np.tanh(pre[:, 2 * hidden:3 * hidden])
        go = _sigmoid(pre[:, 3 * hidden:])
        c_t = gf * c_prev + gi * gg
        tc_t = np.tanh(c_t)
        gates[t, :, :hidden] = gi
        gates[t, :, hidden:2 * hidden] = gf
        gates[t, :, 2 * hidden:3 * hidden] = gg
        gates[t, :, 3 * hidden:] = go
        c[t] = c_t
        tanh_c[t] = tc_t
        h[t] = go * tc_t
        h_prev = h[t]
        c_prev = c_t
    return h, c, tanh_c, gates


def seq_backward(
    w_hh: np.ndarray,
    gates: np.ndarray,
    c: np.ndarray,
    tanh_c: np.ndarray,
    grad_h_out: np.ndarray,
) -> np.ndarray:
    """Backpropagate through one direction.

    grad_h_out: (T, B, H) gradient arriving at every hidden state (upper
    layers plus any final-state contribution already summed in).
    Returns the gradient of the loss w.r.t. the pre-activation gate values,
    shape (T, B, 4H).
    """
    steps, batch, width = gates.shape
    hidden = width // 4
    grad_pre = np.zeros((steps, batch, width))
    dh = np.zeros((batch, hidden))
    dc = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        gi = gates[t, :, :hidden]
        gf = gates[t, :, hidden:2 * hidden]
        gg = gates[t, :, 2 * hidden:3 * hidden]
        go = gates[t, :, 3 * hidden:]
        tc_t = tanh_c[t]
        dht = grad_h_out[t] + dh
        dct = dc + dht * go * (1.0 - tc_t * tc_t)
        c_prev = c[t - 1] if t > 0 else 0.0
        grad_pre[t, :, :hidden] = dct * gg * gi * (1.0 - gi)
        grad_pre[t, :, hidden:2 * hidden] = dct * c_prev * gf * (1.0 - gf)
        grad_pre[t, :, 2 * hidden:3 * hidden] = dct * gi * (1.0 - gg * gg)
        grad_pre[t, :, 3 * hidden:] = dht * tc_t * go * (1.0 - go)
        dc = dct * gf
        dh = grad_pre[t] @ w_hh
    return grad_pre
