"""Sequence-kernel backend selection.

The compiled Cython kernel is preferred when importable; otherwise the
pure-NumPy reference implementation is used. Selection happens once at
import, can be forced with the ``DRUGENC_KERNEL`` environment variable
(``cython`` or ``python``), and can be changed programmatically with
:func:`set_backend` (used by the parity tests and the benchmark).

Both backends implement the same contract and agree to floating-point
round-off; artifacts are bit-reproducible for a fixed backend.
"""

from __future__ import annotations

import os

import numpy as np

from . import _reference

try:
    from . import _seq_lstm
except ImportError:  # pragma: no cover - depends on build environment
    _seq_lstm = None

AVAILABLE_BACKENDS: tuple[str, ...] = (
    ("python", "cython") if _seq_lstm is not None else ("python",)
)


def _resolve(name: str):
    if name == "python":
        return _reference.seq_forward, _reference.seq_backward
    if name == "cython":
        if _seq_lstm is None:
            raise RuntimeError("compiled kernel is not available")
        return _seq_lstm.forward, _seq_lstm.backward
    raise ValueError(f"unknown kernel backend {name!r}")


_requested = os.environ.get("DRUGENC_KERNEL")
if _requested:
    _backend = _requested
else:
    _backend = "cython" if _seq_lstm is not None else "python"
_forward, _backward = _resolve(_backend)


def backend_name() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend, _forward, _backward
    _forward, _backward = _resolve(name)
    _backend = name


def seq_forward(x_proj: np.ndarray, w_hh: np.ndarray):
    """One recurrence direction over a batch; see the reference kernel."""
    return _forward(np.ascontiguousarray(x_proj), np.ascontiguousarray(w_hh))


def seq_backward(w_hh, gates, c, tanh_c, grad_h_out) -> np.ndarray:
    return _backward(
        np.ascontiguousarray(w_hh),
        np.ascontiguousarray(gates),
        np.ascontiguousarray(c),
        np.ascontiguousarray(tanh_c),
        np.ascontiguousarray(grad_h_out),
    )
