"""Persisted encoding tables, the interaction store, and analogy retrieval.

Retrieval ranks candidate drugs D for a query ``A : B :: C : ?`` by the
multiplicative objective ``C(V_D, V_C) * C(V_D, V_B) / (C(V_D, V_A) + eps)``
over shifted cosine similarities ``C(u, v) = (cosine(u, v) + 1) / 2``, keeps
scores above a threshold, and returns the top k with ties broken by drug id.
The simulation harness replays labeled pairs as ``D1 : D2 :: D1 : ?`` queries
and scores the answers against the ordered interaction store.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import ColumnId, DdiTriple
from .errors import (
    DimMismatchError,
    QueryDrugMissingError,
    TableFormatError,
    ZeroVectorError,
)

#: denominator guard of the multiplicative objective
EPSILON = 0.001

DEFAULT_MIN_SCORE = 0.25
DEFAULT_TOP_K = 10
DEFAULT_KS: tuple[int, ...] = (1, 2, 3, 5, 10)


class EncodingTable:
    """Immutable drug-id -> encoding map for one column, ids kept sorted."""

    def __init__(self, column: ColumnId, entries: Mapping[str, np.ndarray]):
        if not entries:
            raise ValueError("encoding table needs at least one entry")
        self.column = column
        self.ids: tuple[str, ...] = tuple(sorted(entries))
        vectors = np.stack([np.asarray(entries[i], dtype=np.float64) for i in self.ids])
        if vectors.ndim != 2:
            raise DimMismatchError("entries must share one vector dimension")
        if not np.isfinite(vectors).all():
            raise ValueError("encoding vectors must be finite")
        self.vectors = vectors
        self.index_of = {drug_id: row for row, drug_id in enumerate(self.ids)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, drug_id: str) -> bool:
        return drug_id in self.index_of

    def vector(self, drug_id: str) -> np.ndarray:
        if drug_id not in self.index_of:
            raise QueryDrugMissingError(f"drug {drug_id!r} is not in the table")
        return self.vectors[self.index_of[drug_id]]


def save_table(table: EncodingTable, path: str | Path) -> None:
    """One header line, then ``drug_id<TAB>c1,c2,...`` rows sorted by id.

    Coordinates print as 17-significant-digit scientific notation, which
    round-trips every float64 exactly.
    """
    lines = [f"#column={table.column.value}\tdim={table.dim}\tcount={len(table)}"]
    for row, drug_id in enumerate(table.ids):
        coords = ",".join(f"{v:.16e}" for v in table.vectors[row])
        lines.append(f"{drug_id}\t{coords}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_table(path: str | Path) -> EncodingTable:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#"):
        raise TableFormatError(f"{path}: missing header line")
    header = dict(
        part.split("=", 1) for part in lines[0][1:].split("\t") if "=" in part
    )
    try:
        column = ColumnId(header["column"])
        dim = int(header["dim"])
        count = int(header["count"])
    except (KeyError, ValueError) as exc:
        raise TableFormatError(f"{path}: bad header: {exc}") from exc

    entries: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise TableFormatError(f"{path}:{lineno}: expected drug_id<TAB>coords")
        coords = np.array([float(x) for x in parts[1].split(",")])
        if coords.shape != (dim,):
            raise DimMismatchError(
                f"{path}:{lineno}: vector has {coords.shape[0]} coordinates, expected {dim}"
            )
        entries[parts[0]] = coords
    if len(entries) != count:
        raise TableFormatError(
            f"{path}: header promises {count} rows, found {len(entries)}"
        )
    return EncodingTable(column=column, entries=entries)


def shuffle_table_ids(table: EncodingTable, seed: int) -> EncodingTable:
    """Random-retrieval baseline: permute which id owns which vector."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(table))
    return EncodingTable(
        column=table.column,
        entries={drug_id: table.vectors[perm[i]] for i, drug_id in enumerate(table.ids)},
    )


# ---------------------------------------------------------------------------
# similarity and retrieval
# ---------------------------------------------------------------------------


def c_sim(v1: np.ndarray, v2: np.ndarray) -> float:
    """Cosine similarity shifted into [0, 1]."""
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    n1 = np.linalg.norm(v1)
    n2 = np.linalg.norm(v2)
    if n1 == 0.0 or n2 == 0.0:
        raise ZeroVectorError("cosine of a zero vector is undefined")
    return float((v1 @ v2 / (n1 * n2) + 1.0) / 2.0)


@dataclass(frozen=True)
class AnalogyQuery:
    a: str
    b: str
    c: str
    k: int = DEFAULT_TOP_K
    min_score: float = DEFAULT_MIN_SCORE

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    @property
    def excluded(self) -> frozenset[str]:
        return frozenset({self.a, self.b, self.c})


@dataclass(frozen=True)
class AnalogyResult:
    entries: tuple[tuple[str, float], ...]  # (drug_id, score), best first

    def ids(self) -> tuple[str, ...]:
        return tuple(drug_id for drug_id, _ in self.entries)


def _shifted_cosines(table: EncodingTable, v: np.ndarray, norms: np.ndarray) -> np.ndarray:
    vn = np.linalg.norm(v)
    if vn == 0.0:
        raise ZeroVectorError("query drug has a zero encoding")
    with np.errstate(invalid="ignore"):
        cos = (table.vectors @ v) / (norms * vn)
    return (cos + 1.0) / 2.0


def three_cosmul(query: AnalogyQuery, table: EncodingTable) -> AnalogyResult:
    """Rank every candidate not in {a, b, c}; keep scores >= min_score,
    return the top k, ties broken by ascending drug id.

    Candidates whose stored vector is all-zero cannot be scored and are
    skipped.
    """
    for drug_id in (query.a, query.b, query.c):
        if drug_id not in table:
            raise QueryDrugMissingError(f"query drug {drug_id!r} is not in the table")

    norms = np.linalg.norm(table.vectors, axis=1)
    sim_a = _shifted_cosines(table, table.vector(query.a), norms)
    sim_b = _shifted_cosines(table, table.vector(query.b), norms)
    sim_c = _shifted_cosines(table, table.vector(query.c), norms)
    scores = sim_c * sim_b / (sim_a + EPSILON)

    keep = norms > 0.0
    for drug_id in query.excluded:
        keep[table.index_of[drug_id]] = False
    keep &= scores >= query.min_score

    candidates = np.flatnonzero(keep)
    # ids are stored sorted, so the row index doubles as the tie-break key
    order = candidates[np.lexsort((candidates, -scores[candidates]))][: query.k]
    return AnalogyResult(
        entries=tuple((table.ids[i], float(scores[i])) for i in order)
    )


# ---------------------------------------------------------------------------
# interaction store and simulation
# ---------------------------------------------------------------------------


class DdiStore:
    """Ordered-pair interaction lookup: (drug1, drug2) -> label, plus an index
    over (drug1, label). (a, b, L) never implies (b, a, L)."""

    def __init__(self, triples: Iterable[DdiTriple]):
        self._pair_label: dict[tuple[str, str], int] = {}
        self._partners: dict[tuple[str, int], set[str]] = {}
        for t in triples:
            key = (t.drug1, t.drug2)
            existing = self._pair_label.get(key)
            if existing is not None and existing != t.label:
                raise ValueError(
                    f"conflicting labels for ordered pair {key}: {existing} vs {t.label}"
                )
            self._pair_label[key] = t.label
            self._partners.setdefault((t.drug1, t.label), set()).add(t.drug2)

    def __len__(self) -> int:
        return len(self._pair_label)

    def contains(self, drug1: str, drug2: str, label: int) -> bool:
        return self._pair_label.get((drug1, drug2)) == label

    def label_of(self, drug1: str, drug2: str) -> int | None:
        return self._pair_label.get((drug1, drug2))

    def partners(self, drug1: str, label: int) -> frozenset[str]:
        return frozenset(self._partners.get((drug1, label), frozenset()))


def count_label_interactions(
    store: DdiStore, drug1: str, label: int, exclude_d2: str | None = None
) -> int:
    """How many drugs x (other than exclude_d2) have (drug1, x, label) stored."""
    partners = store.partners(drug1, label)
    if exclude_d2 is not None and exclude_d2 in partners:
        return len(partners) - 1
    return len(partners)


@dataclass(frozen=True)
class SimulationReport:
    ks: tuple[int, ...]
    mean_precision: dict[int, float]
    simulated: int
    skipped: int
    queries: tuple[tuple[str, str, int, int, int], ...] | None = None


def simulate_analogy(
    pairs: Sequence[DdiTriple],
    table: EncodingTable,
    store: DdiStore,
    ks: Sequence[int] = DEFAULT_KS,
    *,
    min_score: float = DEFAULT_MIN_SCORE,
    collect_queries: bool = False,
) -> SimulationReport:
    """Replay each labeled pair (D1, D2, L) as the query ``D1 : D2 :: D1 : ?``.

    Pairs where D1 has no other stored partner with label L are skipped.
    For the rest, Precision@K counts retrieved drugs d with (D1, d, L) in the
    store, divided by K; the report holds per-K means over simulated pairs.
    """
    ks = tuple(ks)
    if not ks or any(k < 1 for k in ks):
        raise ValueError(f"ks must be positive, got {ks}")
    k_max = max(ks)
    sums = {k: 0.0 for k in ks}
    simulated = 0
    skipped = 0
    log: list[tuple[str, str, int, int, int]] = []
    for t in pairs:
        if count_label_interactions(store, t.drug1, t.label, exclude_d2=t.drug2) == 0:
            skipped += 1
            continue
        result = three_cosmul(
            AnalogyQuery(a=t.drug1, b=t.drug2, c=t.drug1, k=k_max, min_score=min_score),
            table,
        )
        simulated += 1
        retrieved = result.ids()
        for k in ks:
            hits = sum(
                1 for d in retrieved[:k] if store.contains(t.drug1, d, t.label)
            )
            sums[k] += hits / k
            if collect_queries:
                log.append((t.drug1, t.drug2, t.label, k, hits))
    means = {k: (sums[k] / simulated if simulated else 0.0) for k in ks}
    return SimulationReport(
        ks=ks,
        mean_precision=means,
        simulated=simulated,
        skipped=skipped,
        queries=tuple(log) if collect_queries else None,
    )


def save_report(report: SimulationReport, path: str | Path, query_log: str | Path | None = None) -> None:
    lines = ["K\tmean_precision\tsimulated\tskipped"]
    for k in report.ks:
        lines.append(
            f"{k}\t{report.mean_precision[k]:.6f}\t{report.simulated}\t{report.skipped}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if query_log is not None:
        if report.queries is None:
            raise ValueError("report carries no per-query log")
        rows = ["drug1\tdrug2\tlabel\tK\tM"]
        rows.extend(f"{d1}\t{d2}\t{lab}\t{k}\t{m}" for d1, d2, lab, k, m in report.queries)
        Path(query_log).write_text("\n".join(rows) + "\n", encoding="utf-8")
