"""Synthetic drug corpora with a planted, learnable interaction rule.

Each drug carries exactly one signature token in the rule column (plus noise
tokens everywhere). Signatures are paired into directed edges
``sig_{2i} -> sig_{2i+1}``; every edge defines a family of drug pairs, and
the pair label is a pure function of the unordered signature pair: edges are
ranked by a salted hash of their two signature tokens and the label is the
rank modulo ``num_labels``. The edge count is a multiple of ``num_labels``
and every edge emits the same number of pairs, so label frequencies come out
exactly uniform; emitted pairs keep the edge orientation, so the first-drug
position carries consistent retrieval structure.

Keeping one edge per signature (and, with the default sizing, one edge per
label) matters: if several signature pairs shared a label, an encoder could
collapse their clusters into one region without any classification penalty,
which silently destroys nearest-neighbour structure even at perfect accuracy.

The rule is re-derivable from the emitted records alone (find the signature
token of each drug, recompute the edge ranking), which is what the tests use
as an oracle.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .corpus import ColumnId, DdiTriple, DrugRecord, ALL_COLUMNS

SIGNATURE_PREFIX = "sig"
NOISE_PREFIX = "nz"


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the planted-rule generator."""

    num_drugs: int = 1024
    num_labels: int = 8
    tokens_per_column: int = 9
    seed: int = 7
    rule_column: ColumnId = ColumnId.CATEGORIES
    num_signatures: int = 16
    noise_pool: int = 200
    pair_fraction: float = 1.0

    def __post_init__(self) -> None:
        if self.num_labels < 2:
            raise ValueError(f"num_labels must be >= 2, got {self.num_labels}")
        if self.num_drugs < 2 * self.num_labels:
            raise ValueError(
                f"num_drugs must be >= 2 * num_labels, got {self.num_drugs}"
            )
        if self.num_signatures % 2 != 0:
            raise ValueError("num_signatures must be even (signatures are paired)")
        if (self.num_signatures // 2) % self.num_labels != 0:
            raise ValueError(
                "num_signatures must be 2 * num_labels * k for balanced labels"
            )
        if self.num_signatures > self.num_drugs:
            raise ValueError("num_signatures must not exceed num_drugs")
        if self.tokens_per_column < 1:
            raise ValueError("tokens_per_column must be positive")
        if not 0.0 < self.pair_fraction <= 1.0:
            raise ValueError("pair_fraction must be in (0, 1]")
        if self.noise_pool < 1:
            raise ValueError("noise_pool must be positive")


def signature_token(index: int) -> str:
    return f"{SIGNATURE_PREFIX}{index:03d}"


def noise_token(index: int) -> str:
    return f"{NOISE_PREFIX}{index:03d}"


def signature_edges(spec: SyntheticSpec) -> list[tuple[int, int]]:
    """Directed signature edges ``2i -> 2i+1``; each signature sits on one edge."""
    return [(2 * i, 2 * i + 1) for i in range(spec.num_signatures // 2)]


def _edge_digest(spec: SyntheticSpec, sig_a: str, sig_b: str) -> bytes:
    lo, hi = sorted((sig_a, sig_b))
    payload = f"{spec.seed}|{lo}|{hi}".encode()
    return hashlib.blake2b(payload, digest_size=16).digest()


def planted_edge_labels(spec: SyntheticSpec) -> dict[frozenset[int], int]:
    """Label of every (unordered) signature edge.

    Edges are sorted by the salted digest of their signature tokens and
    labels assigned round-robin over that ranking, which makes the per-label
    edge counts exactly equal.
    """
    edges = signature_edges(spec)
    keyed = sorted(
        edges,
        key=lambda e: _edge_digest(spec, signature_token(e[0]), signature_token(e[1])),
    )
    return {
        frozenset(edge): rank % spec.num_labels for rank, edge in enumerate(keyed)
    }


def planted_label(spec: SyntheticSpec, sig_a: str, sig_b: str) -> int:
    """Recompute the planted label for two signature tokens."""
    labels = planted_edge_labels(spec)
    pair = frozenset(
        int(s[len(SIGNATURE_PREFIX):]) for s in (sig_a, sig_b)
    )
    if pair not in labels:
        raise KeyError(f"signature pair ({sig_a}, {sig_b}) is not a planted edge")
    return labels[pair]


def drug_signature(record: DrugRecord, rule_column: ColumnId) -> str:
    """Extract the unique signature token from a record's rule column."""
    matches = [
        t
        for t in record.column(rule_column).split()
        if t.startswith(SIGNATURE_PREFIX)
    ]
    if len(matches) != 1:
        raise ValueError(
            f"{record.drug_id}: expected exactly one signature token, found {matches}"
        )
    return matches[0]


def generate_synthetic(spec: SyntheticSpec) -> tuple[list[DrugRecord], list[DdiTriple]]:
    """Build a deterministic corpus realizing the planted rule.

    Returns drug records and interaction triples; every triple's label equals
    ``planted_label`` applied to the two drugs' signature tokens, and every
    label class occurs.
    """
    rng = np.random.default_rng(spec.seed)
    s = spec.num_signatures

    signature_of = np.arange(spec.num_drugs) % s
    records = []
    for i in range(spec.num_drugs):
        columns: dict[str, str] = {}
        for column in ALL_COLUMNS:
            noise = [
                noise_token(j)
                for j in rng.integers(spec.noise_pool, size=spec.tokens_per_column)
            ]
            if column is spec.rule_column:
                slot = int(rng.integers(spec.tokens_per_column))
                noise[slot] = signature_token(int(signature_of[i]))
            columns[column.value] = " ".join(noise)
        records.append(DrugRecord(drug_id=f"SYN{i:05d}", **columns))

    members: list[np.ndarray] = [
        np.flatnonzero(signature_of == j) for j in range(s)
    ]
    edge_labels = planted_edge_labels(spec)

    triples: list[DdiTriple] = []
    for src, dst in signature_edges(spec):
        label = edge_labels[frozenset((src, dst))]
        src_ids, dst_ids = members[src], members[dst]
        total = len(src_ids) * len(dst_ids)
        keep = max(1, int(spec.pair_fraction * total))
        chosen = rng.permutation(total)[:keep]
        for flat in np.sort(chosen):
            a = src_ids[flat // len(dst_ids)]
            b = dst_ids[flat % len(dst_ids)]
            triples.append(
                DdiTriple(drug1=f"SYN{a:05d}", drug2=f"SYN{b:05d}", label=label)
            )

    order = rng.permutation(len(triples))
    triples = [triples[i] for i in order]
    emitted = {t.label for t in triples}
    if emitted != set(range(spec.num_labels)):
        raise RuntimeError(f"planted corpus is missing labels: {sorted(emitted)}")
    return records, triples
