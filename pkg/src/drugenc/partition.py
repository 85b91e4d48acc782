"""Train/validation/test partitioning of interaction triples.

Two schemes: a per-label stratified split of the pairs, and a held-off split
that quarantines a percentage of drugs (and every pair touching them) into
the test set. Both are deterministic functions of their inputs and a seed.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import DdiTriple
from .errors import EmptyInputError, ManifestFormatError

logger = logging.getLogger(__name__)

DEFAULT_RATIOS: tuple[float, float, float] = (0.8, 0.1, 0.1)


class PartitionKind(enum.Enum):
    PAIRWISE = "pairwise"
    HELDOFF = "heldoff"


@dataclass(frozen=True)
class PartitionSet:
    kind: PartitionKind
    seed: int
    train: tuple[DdiTriple, ...]
    val: tuple[DdiTriple, ...]
    test: tuple[DdiTriple, ...]
    x_pct: float | None = None
    heldoff_drugs: frozenset[str] = frozenset()
    infeasible_labels: frozenset[int] = frozenset()

    @property
    def label_count(self) -> int:
        labels = [t.label for t in self.train + self.val + self.test]
        return max(labels) + 1 if labels else 0

    def split(self, name: str) -> tuple[DdiTriple, ...]:
        if name not in ("train", "val", "test"):
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)


def _largest_remainder(total: int, ratios: Sequence[float]) -> list[int]:
    """Integer allocation of ``total`` over ``ratios`` that conserves the sum.

    Floors each share, then hands leftover units to the largest fractional
    remainders (ties broken by position).
    """
    exact = [total * r for r in ratios]
    counts = [int(np.floor(x)) for x in exact]
    leftover = total - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def stratified_split(
    triples: Sequence[DdiTriple],
    ratios: tuple[float, float, float] = DEFAULT_RATIOS,
    seed: int = 0,
) -> PartitionSet:
    """Split pairs per label stratum with largest-remainder rounding."""
    if not triples:
        raise EmptyInputError("no triples to split")
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"need three non-negative ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")

    rng = np.random.default_rng(seed)
    strata: dict[int, list[DdiTriple]] = {}
    for t in triples:
        strata.setdefault(t.label, []).append(t)

    train: list[DdiTriple] = []
    val: list[DdiTriple] = []
    test: list[DdiTriple] = []
    for label in sorted(strata):
        group = strata[label]
        order = rng.permutation(len(group))
        n_train, n_val, _ = _largest_remainder(len(group), ratios)
        for rank, idx in enumerate(order):
            if rank < n_train:
                train.append(group[idx])
            elif rank < n_train + n_val:
                val.append(group[idx])
            else:
                test.append(group[idx])
    return PartitionSet(
        kind=PartitionKind.PAIRWISE,
        seed=seed,
        train=tuple(train),
        val=tuple(val),
        test=tuple(test),
    )


def heldoff_split(
    triples: Sequence[DdiTriple],
    drugs: Iterable[str],
    x_pct: float,
    seed: int = 0,
) -> PartitionSet:
    """Quarantine floor(x% of drugs); every pair touching them becomes test.

    Remaining pairs split 90/10 into train/val, then any label present in the
    remainder but absent from one side has a single instance moved over from
    the other side. Labels with fewer than two remaining pairs cannot cover
    both sides; they are reported in ``infeasible_labels`` and logged.
    """
    if not 0.0 < x_pct < 100.0:
        raise ValueError(f"x_pct must be in (0, 100), got {x_pct}")
    if not triples:
        raise EmptyInputError("no triples to split")

    rng = np.random.default_rng(seed)
    unique_drugs = sorted(set(drugs))
    count = int(np.floor(len(unique_drugs) * x_pct / 100.0))
    heldoff = frozenset(
        unique_drugs[i] for i in rng.choice(len(unique_drugs), size=count, replace=False)
    )

    test = [t for t in triples if t.drug1 in heldoff or t.drug2 in heldoff]
    remaining = [t for t in triples if t.drug1 not in heldoff and t.drug2 not in heldoff]

    order = rng.permutation(len(remaining))
    n_train, n_val = _largest_remainder(len(remaining), (0.9, 0.1))
    train = [remaining[i] for i in order[:n_train]]
    val = [remaining[i] for i in order[n_train:]]

    remaining_labels = {t.label for t in remaining}
    infeasible: set[int] = set()
    for label in sorted(remaining_labels):
        in_train = any(t.label == label for t in train)
        in_val = any(t.label == label for t in val)
        if in_train and in_val:
            continue
        source, sink = (train, val) if in_train else (val, train)
        if len([t for t in remaining if t.label == label]) < 2:
            infeasible.add(label)
            continue
        idx = next(i for i, t in enumerate(source) if t.label == label)
        sink.append(source.pop(idx))
    if infeasible:
        logger.warning(
            "label coverage infeasible for label(s) %s: fewer than 2 remaining pairs",
            sorted(infeasible),
        )

    return PartitionSet(
        kind=PartitionKind.HELDOFF,
        seed=seed,
        train=tuple(train),
        val=tuple(val),
        test=tuple(test),
        x_pct=x_pct,
        heldoff_drugs=heldoff,
        infeasible_labels=frozenset(infeasible),
    )


# ---------------------------------------------------------------------------
# manifest file
# ---------------------------------------------------------------------------


def save_partition(pset: PartitionSet, path: str | Path) -> None:
    """Write a partition manifest: header, then [train]/[val]/[test] sections."""
    header = [f"kind={pset.kind.value}", f"seed={pset.seed}"]
    if pset.x_pct is not None:
        header.append(f"x_pct={pset.x_pct:g}")
    lines = ["#" + "\t".join(header)]
    if pset.kind is PartitionKind.HELDOFF:
        lines.append("#heldoff=" + ",".join(sorted(pset.heldoff_drugs)))
    for name in ("train", "val", "test"):
        lines.append(f"[{name}]")
        for t in pset.split(name):
            lines.append(f"{t.drug1}\t{t.drug2}\t{t.label}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_partition(path: str | Path) -> PartitionSet:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ManifestFormatError(f"{path}: missing manifest header")
    fields = dict(
        part.split("=", 1) for part in lines[0][1:].split("\t") if "=" in part
    )
    try:
        kind = PartitionKind(fields["kind"])
        seed = int(fields["seed"])
    except (KeyError, ValueError) as exc:
        raise ManifestFormatError(f"{path}: bad header: {exc}") from exc
    x_pct = float(fields["x_pct"]) if "x_pct" in fields else None

    heldoff: frozenset[str] = frozenset()
    body_start = 1
    if len(lines) > 1 and lines[1].startswith("#heldoff="):
        ids = lines[1][len("#heldoff="):]
        heldoff = frozenset(ids.split(",")) if ids else frozenset()
        body_start = 2

    sections: dict[str, list[DdiTriple]] = {"train": [], "val": [], "test": []}
    current: list[DdiTriple] | None = None
    for lineno, line in enumerate(lines[body_start:], start=body_start + 1):
        if not line:
            continue
        if line.startswith("["):
            name = line.strip("[]")
            if name not in sections:
                raise ManifestFormatError(f"{path}:{lineno}: unknown section {line!r}")
            current = sections[name]
            continue
        if current is None:
            raise ManifestFormatError(f"{path}:{lineno}: row outside any section")
        parts = line.split("\t")
        if len(parts) != 3:
            raise ManifestFormatError(f"{path}:{lineno}: expected drug1<TAB>drug2<TAB>label")
        current.append(DdiTriple(drug1=parts[0], drug2=parts[1], label=int(parts[2])))

    return PartitionSet(
        kind=kind,
        seed=seed,
        train=tuple(sections["train"]),
        val=tuple(sections["val"]),
        test=tuple(sections["test"]),
        x_pct=x_pct,
        heldoff_drugs=heldoff,
    )
