"""Comparison classifiers: frequency-sampling random labels and bag-of-words
nearest neighbours.

Bag-of-words vectors are plain count maps; they are intentionally a separate
type from encoding vectors and never enter the analogy engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import DdiTriple, TokenSequence, Vocabulary
from .errors import EmptyIndexError, EmptyInputError
from .metrics import MetricsReport, confusion, mean_reports, report

#: sparse token-index -> count map
BowVector = dict[int, int]


@dataclass(frozen=True)
class LabelDistribution:
    """Empirical label frequencies over a training split."""

    frequencies: np.ndarray  # (L,), sums to 1
    cumulative: np.ndarray   # (L,)


def fit_label_distribution(
    triples: Sequence[DdiTriple], label_count: int
) -> LabelDistribution:
    if not triples:
        raise EmptyInputError("no training triples to fit a distribution on")
    counts = np.bincount([t.label for t in triples], minlength=label_count)
    frequencies = counts / counts.sum()
    return LabelDistribution(frequencies=frequencies, cumulative=np.cumsum(frequencies))


def sample_labels(dist: LabelDistribution, size: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling; zero-frequency labels are never drawn."""
    return np.searchsorted(dist.cumulative, rng.random(size), side="right").astype(np.int64)


def random_predict(
    dist: LabelDistribution,
    eval_triples: Sequence[DdiTriple],
    seed: int,
    num_simulations: int = 20,
) -> MetricsReport:
    """Mean metrics of the frequency-sampling classifier over simulations.

    The classifier ignores all drug text, so one report covers every column.
    """
    if num_simulations < 1:
        raise ValueError("num_simulations must be >= 1")
    golds = np.array([t.label for t in eval_triples], dtype=np.int64)
    label_count = len(dist.frequencies)
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(num_simulations):
        preds = sample_labels(dist, len(golds), rng)
        reports.append(report(confusion(preds, golds, label_count)))
    return mean_reports(reports)


# ---------------------------------------------------------------------------
# bag-of-words nearest neighbours
# ---------------------------------------------------------------------------


def bow_vector(seq: TokenSequence, vocab: Vocabulary) -> BowVector:
    """Token counts over the vocabulary; out-of-vocabulary counts fold into
    the unknown index."""
    counts: BowVector = {}
    for token in seq.tokens:
        idx = vocab.index(token)
        counts[idx] = counts.get(idx, 0) + 1
    return counts


def bow_pair_vector(seq1: TokenSequence, seq2: TokenSequence, vocab: Vocabulary) -> BowVector:
    """Element-wise sum of the two drugs' count vectors."""
    combined = dict(bow_vector(seq1, vocab))
    for idx, count in bow_vector(seq2, vocab).items():
        combined[idx] = combined.get(idx, 0) + count
    return combined


@dataclass
class KnnIndex:
    vectors: np.ndarray     # (N, vocab_size) float64, integer-valued
    sq_norms: np.ndarray    # (N,)
    labels: np.ndarray      # (N,)
    k: int
    vocab_size: int
    label_count: int


def _densify(vectors: Sequence[BowVector], vocab_size: int) -> np.ndarray:
    dense = np.zeros((len(vectors), vocab_size))
    for row, vec in enumerate(vectors):
        for idx, count in vec.items():
            dense[row, idx] = count
    return dense


def knn_fit(
    vectors: Sequence[BowVector],
    labels: Sequence[int],
    k: int,
    vocab_size: int,
) -> KnnIndex:
    if not vectors:
        raise EmptyIndexError("cannot fit a nearest-neighbour index on nothing")
    if len(vectors) != len(labels):
        raise ValueError("vectors and labels differ in length")
    if not 1 <= k <= len(vectors):
        raise ValueError(f"k must be in [1, {len(vectors)}], got {k}")
    dense = _densify(vectors, vocab_size)
    labels_arr = np.asarray(labels, dtype=np.int64)
    return KnnIndex(
        vectors=dense,
        sq_norms=(dense * dense).sum(axis=1),
        labels=labels_arr,
        k=k,
        vocab_size=vocab_size,
        label_count=int(labels_arr.max()) + 1,
    )


def _vote(index: KnnIndex, sq_dist: np.ndarray) -> int:
    # squared distances between integer count vectors are exact in float64,
    # so ties are exact; break them by insertion order, votes by label index
    order = np.lexsort((np.arange(len(sq_dist)), sq_dist))[: index.k]
    votes = np.bincount(index.labels[order], minlength=index.label_count)
    return int(votes.argmax())


def knn_predict(index: KnnIndex, query: BowVector) -> int:
    """Majority label among the k nearest training vectors (Euclidean)."""
    q = _densify([query], index.vocab_size)[0]
    sq_dist = index.sq_norms + (q * q).sum() - 2.0 * (index.vectors @ q)
    return _vote(index, sq_dist)


def knn_predict_many(
    index: KnnIndex, queries: Sequence[BowVector], chunk: int = 256
) -> np.ndarray:
    """Vectorized knn_predict over many queries (same results)."""
    preds = np.empty(len(queries), dtype=np.int64)
    for start in range(0, len(queries), chunk):
        block = _densify(queries[start:start + chunk], index.vocab_size)
        sq_dist = (
            index.sq_norms[None, :]
            + (block * block).sum(axis=1)[:, None]
            - 2.0 * block @ index.vectors.T
        )
        for row in range(block.shape[0]):
            preds[start + row] = _vote(index, sq_dist[row])
    return preds
