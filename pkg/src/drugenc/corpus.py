"""Drug table and interaction-pair loading, tokenization, and vocabularies.

The drug table is a UTF-8 TSV with one opaque id column and six free-text
columns; multi-valued fields use ``#`` as the in-field separator. Interaction
triples are ordered ``(drug1, drug2, label)`` rows. Tokenization is a small
fixed pipeline (lowercase, per-column splitting, whitespace tokenization,
stopword removal, optional numeric-token folding) so that vocabularies are
fully reproducible from the raw files.
"""

from __future__ import annotations

import enum
import logging
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AtcLengthError,
    DuplicateDrugIdError,
    MalformedRowError,
    MissingColumnError,
    SelfPairError,
    UnknownDrugError,
    UnknownLabelError,
    VocabFormatError,
)
from .stopwords import STOPWORDS

logger = logging.getLogger(__name__)


class ColumnId(enum.Enum):
    """The six encodable text columns of the drug table."""

    ATC_CODES = "atc_codes"
    CATEGORIES = "categories"
    DESCRIPTION = "description"
    MERGED_CLASS = "merged_class"
    PROTEIN_BINDING = "protein_binding"
    TARGET_ACTION = "target_action"


ALL_COLUMNS: tuple[ColumnId, ...] = tuple(ColumnId)

#: Header of drugs.tsv, in order.
DRUG_FILE_FIELDS: tuple[str, ...] = ("drug_id",) + tuple(c.value for c in ALL_COLUMNS)

#: Header of ddi.tsv, in order.
DDI_FILE_FIELDS: tuple[str, ...] = ("drug1", "drug2", "label")

#: Replacement token for purely numeric tokens.
NUMTKN = "numtkn"

#: Columns where numeric tokens are folded into NUMTKN.
DEFAULT_NUMTKN_COLUMNS: frozenset[ColumnId] = frozenset(
    {ColumnId.DESCRIPTION, ColumnId.PROTEIN_BINDING}
)


@dataclass(frozen=True)
class DrugRecord:
    """One row of the drug table: id plus six raw text columns."""

    drug_id: str
    atc_codes: str = ""
    categories: str = ""
    description: str = ""
    merged_class: str = ""
    protein_binding: str = ""
    target_action: str = ""

    def column(self, column: ColumnId) -> str:
        return getattr(self, column.value)


@dataclass(frozen=True)
class DdiTriple:
    """Ordered labeled drug pair. Order is meaningful: (a, b) is not (b, a)."""

    drug1: str
    drug2: str
    label: int


@dataclass(frozen=True)
class TokenSequence:
    column: ColumnId
    tokens: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

_PAREN_TABLE = str.maketrans("", "", "()[]{}")
_COMMA_SLASH = re.compile(r"[,/]")
_NUMERIC = re.compile(r"^(?=.*[0-9])[0-9.,]+$")

ATC_CODE_LENGTH = 7


def _expand_atc(segment: str) -> list[str]:
    """Expand one 7-character code into its five level-prefixed tokens."""
    return [
        f"atcl1_{segment[0]}",
        f"atcl2_{segment[1:3]}",
        f"atcl3_{segment[3]}",
        f"atcl4_{segment[4]}",
        f"atcl5_{segment[5:7]}",
    ]


def preprocess_column(
    raw: str,
    column: ColumnId,
    numtkn_columns: frozenset[ColumnId] = DEFAULT_NUMTKN_COLUMNS,
) -> TokenSequence:
    """Tokenize one raw column value.

    The pipeline, in order: lowercase, column-specific ``#`` handling,
    whitespace tokenization, stopword removal, then numeric-token folding for
    columns listed in ``numtkn_columns``. The ATC column expands each
    7-character code into five level-prefixed tokens; the categories column
    drops parenthesis characters and additionally splits on comma and slash.

    Raises AtcLengthError if an ATC segment is not exactly 7 characters;
    callers that must not fail should use :func:`preprocess_records`.
    """
    text = raw.lower()
    if column is ColumnId.ATC_CODES:
        tokens: list[str] = []
        for segment in text.split("#"):
            segment = "".join(segment.split())
            if not segment:
                continue
            if len(segment) != ATC_CODE_LENGTH:
                raise AtcLengthError(
                    f"ATC segment {segment!r} has {len(segment)} characters, "
                    f"expected {ATC_CODE_LENGTH}"
                )
            tokens.extend(_expand_atc(segment))
    elif column is ColumnId.CATEGORIES:
        tokens = []
        for segment in text.split("#"):
            segment = segment.translate(_PAREN_TABLE)
            for part in _COMMA_SLASH.split(segment):
                tokens.extend(part.split())
    else:
        tokens = text.replace("#", " ").split()

    tokens = [t for t in tokens if t not in STOPWORDS]
    if column in numtkn_columns:
        tokens = [NUMTKN if _NUMERIC.match(t) else t for t in tokens]
    return TokenSequence(column=column, tokens=tuple(tokens))


def preprocess_records(
    records: Iterable[DrugRecord],
    column: ColumnId,
    numtkn_columns: frozenset[ColumnId] = DEFAULT_NUMTKN_COLUMNS,
) -> tuple[dict[str, TokenSequence], int]:
    """Tokenize one column for every record.

    Records whose column value fails validation (malformed ATC codes) are
    mapped to an empty sequence instead of failing; the second return value
    counts how many were skipped that way.
    """
    sequences: dict[str, TokenSequence] = {}
    skipped = 0
    for record in records:
        try:
            sequences[record.drug_id] = preprocess_column(
                record.column(column), column, numtkn_columns
            )
        except AtcLengthError:
            sequences[record.drug_id] = TokenSequence(column=column, tokens=())
            skipped += 1
    if skipped:
        logger.warning(
            "column %s: %d record(s) skipped due to malformed values",
            column.value,
            skipped,
        )
    return sequences, skipped


# ---------------------------------------------------------------------------
# vocabulary
# ---------------------------------------------------------------------------

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
EOS_TOKEN = "<eos>"
SPECIAL_TOKENS: tuple[str, str, str] = (PAD_TOKEN, UNK_TOKEN, EOS_TOKEN)

PAD_INDEX = 0
UNK_INDEX = 1
EOS_INDEX = 2


@dataclass(frozen=True)
class Vocabulary:
    """Token-to-index map for one column.

    Indices 0-2 are the fixed pad/unknown/end-of-sequence tokens; all other
    tokens occurred at least ``min_count`` times in the fitting corpus and sit
    at contiguous indices in lexicographic order. ``size`` counts the three
    fixed tokens.
    """

    column: ColumnId
    min_count: int
    index_of: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.index_of)

    def index(self, token: str) -> int:
        return self.index_of.get(token, UNK_INDEX)

    def __contains__(self, token: str) -> bool:
        return token in self.index_of


def build_vocab(sequences: Iterable[TokenSequence], min_count: int) -> Vocabulary:
    """Fit a vocabulary from tokenized sequences of a single column.

    The fitting corpus must come from training+validation drugs only; that is
    the caller's responsibility.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be positive, got {min_count}")
    sequences = list(sequences)
    columns = {seq.column for seq in sequences}
    if len(columns) > 1:
        raise ValueError(f"sequences span multiple columns: {sorted(c.value for c in columns)}")
    column = columns.pop() if columns else ColumnId.DESCRIPTION

    counts: Counter[str] = Counter()
    for seq in sequences:
        counts.update(seq.tokens)
    kept = sorted(t for t, c in counts.items() if c >= min_count)

    index_of = {tok: i for i, tok in enumerate(SPECIAL_TOKENS)}
    for offset, token in enumerate(kept, start=len(SPECIAL_TOKENS)):
        index_of[token] = offset
    return Vocabulary(column=column, min_count=min_count, index_of=index_of)


def encode_tokens(seq: TokenSequence, vocab: Vocabulary, max_len: int) -> np.ndarray:
    """Map a token sequence onto exactly ``max_len`` vocabulary indices.

    Out-of-vocabulary tokens map to the unknown index. Sequences of length
    >= max_len keep their first max_len-1 tokens followed by end-of-sequence;
    shorter ones are terminated with end-of-sequence and padded.
    """
    if max_len < 2:
        raise ValueError(f"max_len must be >= 2, got {max_len}")
    if seq.column is not vocab.column:
        raise ValueError(
            f"sequence column {seq.column.value} does not match vocabulary "
            f"column {vocab.column.value}"
        )
    indices = [vocab.index(t) for t in seq.tokens[: max_len - 1]]
    indices.append(EOS_INDEX)
    indices.extend([PAD_INDEX] * (max_len - len(indices)))
    return np.asarray(indices, dtype=np.int64)


def save_vocab(vocab: Vocabulary, path: str | Path) -> None:
    """Write a vocabulary file: one header line, then token/index rows."""
    lines = [f"#column={vocab.column.value}\tmin_count={vocab.min_count}\tsize={vocab.size}"]
    for token, idx in sorted(vocab.index_of.items(), key=lambda kv: kv[1]):
        lines.append(f"{token}\t{idx}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_vocab(path: str | Path) -> Vocabulary:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise VocabFormatError(f"{path}: missing vocabulary header")
    header = dict(
        field.split("=", 1) for field in lines[0][1:].split("\t") if "=" in field
    )
    try:
        column = ColumnId(header["column"])
        min_count = int(header["min_count"])
        size = int(header["size"])
    except (KeyError, ValueError) as exc:
        raise VocabFormatError(f"{path}: bad header: {exc}") from exc

    index_of: dict[str, int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise VocabFormatError(f"{path}:{lineno}: expected token<TAB>index")
        index_of[parts[0]] = int(parts[1])
    if len(index_of) != size or sorted(index_of.values()) != list(range(size)):
        raise VocabFormatError(f"{path}: indices are not a bijection onto 0..{size - 1}")
    for token, expected in zip(SPECIAL_TOKENS, range(3)):
        if index_of.get(token) != expected:
            raise VocabFormatError(f"{path}: special token {token!r} must have index {expected}")
    return Vocabulary(column=column, min_count=min_count, index_of=index_of)


# ---------------------------------------------------------------------------
# file loading
# ---------------------------------------------------------------------------


def _read_rows(path: str | Path, fields: Sequence[str]) -> tuple[list[list[str]], dict[str, int]]:
    """Read a TSV with a mandatory header; returns rows and a name->position map."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise MalformedRowError(f"{path}: empty file")
    header = lines[0].split("\t")
    missing = [name for name in fields if name not in header]
    if missing:
        raise MissingColumnError(f"{path}: missing column(s): {', '.join(missing)}")
    if len(header) != len(fields) or len(set(header)) != len(header):
        raise MalformedRowError(
            f"{path}:1: header must contain exactly the columns {', '.join(fields)}"
        )
    positions = {name: header.index(name) for name in fields}
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != len(fields):
            raise MalformedRowError(
                f"{path}:{lineno}: expected {len(fields)} fields, got {len(parts)}"
            )
        rows.append(parts)
    return rows, positions


def load_drugs(path: str | Path) -> list[DrugRecord]:
    """Load drugs.tsv. Duplicate ids and malformed rows are fatal."""
    rows, pos = _read_rows(path, DRUG_FILE_FIELDS)
    records: list[DrugRecord] = []
    seen: set[str] = set()
    for lineno, parts in enumerate(rows, start=2):
        drug_id = parts[pos["drug_id"]]
        if not drug_id:
            raise MalformedRowError(f"{path}:{lineno}: empty drug_id")
        if drug_id in seen:
            raise DuplicateDrugIdError(f"{path}:{lineno}: duplicate drug_id {drug_id!r}")
        seen.add(drug_id)
        records.append(
            DrugRecord(
                drug_id=drug_id,
                **{c.value: parts[pos[c.value]] for c in ALL_COLUMNS},
            )
        )
    return records


def load_ddi(
    path: str | Path,
    label_map: dict[str, int] | None = None,
    *,
    seed: int = 0,
    drug_ids: set[str] | None = None,
) -> tuple[list[DdiTriple], dict[str, int]]:
    """Load ddi.tsv into triples plus a label-string -> index map.

    When an ordered pair appears multiple times with differing labels, one of
    its distinct labels is kept, chosen uniformly at random under ``seed``.
    When no ``label_map`` is given, indices are assigned in first-appearance
    order over the retained triples.
    """
    rows, pos = _read_rows(path, DDI_FILE_FIELDS)
    rng = np.random.default_rng(seed)

    by_pair: dict[tuple[str, str], list[str]] = {}
    pair_order: list[tuple[str, str]] = []
    for lineno, parts in enumerate(rows, start=2):
        d1, d2, label = parts[pos["drug1"]], parts[pos["drug2"]], parts[pos["label"]]
        if d1 == d2:
            raise SelfPairError(f"{path}:{lineno}: pair ({d1!r}, {d2!r}) is a self pair")
        if drug_ids is not None:
            for d in (d1, d2):
                if d not in drug_ids:
                    raise UnknownDrugError(f"{path}:{lineno}: unknown drug {d!r}")
        key = (d1, d2)
        if key not in by_pair:
            by_pair[key] = []
            pair_order.append(key)
        by_pair[key].append(label)

    resolved = label_map is not None
    mapping: dict[str, int] = dict(label_map) if label_map else {}
    triples: list[DdiTriple] = []
    for key in pair_order:
        labels = by_pair[key]
        distinct = list(dict.fromkeys(labels))
        label = distinct[0] if len(distinct) == 1 else distinct[rng.integers(len(distinct))]
        if label not in mapping:
            if resolved:
                raise UnknownLabelError(f"{path}: label {label!r} not in supplied label map")
            mapping[label] = len(mapping)
        triples.append(DdiTriple(drug1=key[0], drug2=key[1], label=mapping[label]))
    return triples, mapping


def save_drugs(records: Iterable[DrugRecord], path: str | Path) -> None:
    lines = ["\t".join(DRUG_FILE_FIELDS)]
    for r in records:
        lines.append("\t".join([r.drug_id] + [r.column(c) for c in ALL_COLUMNS]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_ddi(
    triples: Iterable[DdiTriple],
    label_names: Sequence[str],
    path: str | Path,
) -> None:
    """Write ddi.tsv, mapping label indices back to their string names."""
    lines = ["\t".join(DDI_FILE_FIELDS)]
    for t in triples:
        lines.append(f"{t.drug1}\t{t.drug2}\t{label_names[t.label]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
