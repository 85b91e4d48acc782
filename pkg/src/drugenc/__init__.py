"""Supervised fixed-dimension encodings for multi-token text columns of a
drug table, learned from ordered pairwise interaction labels, plus an
analogy query engine and simulation harness over the resulting vectors."""

import os

# The recurrent kernels issue many tiny BLAS calls; multi-threaded BLAS
# spin-waits on them and is ~15x slower here. Respect an explicit setting,
# and note the knob only takes effect if numpy is not yet imported.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

__version__ = "0.1.0"
