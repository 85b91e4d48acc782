"""Mini-batch training with best-validation checkpointing, plus grid search."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..analogy import EncodingTable
from ..corpus import (
    ColumnId,
    DdiTriple,
    DrugRecord,
    DEFAULT_NUMTKN_COLUMNS,
    Vocabulary,
    build_vocab,
    encode_tokens,
    preprocess_records,
)
from ..errors import DivergedLossError, EmptyInputError, UnknownDrugError
from ..partition import PartitionSet
from .network import batch_log_probs, encode_batch, gradients
from .params import (
    EncoderConfig,
    EncoderModel,
    copy_model,
    init_model,
    named_parameters,
    param_count,
)

logger = logging.getLogger(__name__)

#: Stream tag mixed into the seed for epoch shuffling, so that parameter
#: initialization and batch order come from independent deterministic streams.
_SHUFFLE_STREAM = 0xD5

EVAL_BATCH = 256


@dataclass
class ColumnDataset:
    """Encoded index sequences of one column for a fixed vocabulary and length."""

    column: ColumnId
    max_len: int
    ids: tuple[str, ...]
    matrix: np.ndarray              # (num_drugs, max_len) int64
    row_of: dict[str, int] = field(repr=False)

    def rows_for(self, triples: list[DdiTriple] | tuple[DdiTriple, ...]):
        """Triple list -> (row indices of drug1, of drug2, labels)."""
        try:
            rows1 = np.array([self.row_of[t.drug1] for t in triples], dtype=np.int64)
            rows2 = np.array([self.row_of[t.drug2] for t in triples], dtype=np.int64)
        except KeyError as exc:
            raise UnknownDrugError(f"drug {exc.args[0]!r} absent from dataset") from exc
        labels = np.array([t.label for t in triples], dtype=np.int64)
        return rows1, rows2, labels


def build_column_dataset(
    records: list[DrugRecord],
    column: ColumnId,
    vocab: Vocabulary,
    max_len: int,
    numtkn_columns: frozenset[ColumnId] = DEFAULT_NUMTKN_COLUMNS,
) -> ColumnDataset:
    sequences, _ = preprocess_records(records, column, numtkn_columns)
    ids = tuple(r.drug_id for r in records)
    matrix = np.stack([encode_tokens(sequences[i], vocab, max_len) for i in ids])
    return ColumnDataset(
        column=column,
        max_len=max_len,
        ids=ids,
        matrix=matrix,
        row_of={drug_id: row for row, drug_id in enumerate(ids)},
    )


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_accuracy: float = -1.0
    #: best validation accuracy recorded at each checkpoint update; never decreases
    checkpoint_values: list[float] = field(default_factory=list)


class Adam:
    """Adaptive-moment gradient descent over the named-parameter dict."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(
        self,
        params: list[tuple[str, np.ndarray]],
        grads: dict[str, np.ndarray],
        learning_rate: float,
    ) -> None:
        self.step_count += 1
        t = self.step_count
        for name, value in params:
            g = grads[name]
            m = self._m.setdefault(name, np.zeros_like(value))
            v = self._v.setdefault(name, np.zeros_like(value))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1 ** t)
            v_hat = v / (1.0 - self.beta2 ** t)
            value -= learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def predict_labels(
    model: EncoderModel,
    dataset: ColumnDataset,
    triples,
    batch_size: int = EVAL_BATCH,
) -> np.ndarray:
    rows1, rows2, _ = dataset.rows_for(triples)
    preds = np.empty(len(rows1), dtype=np.int64)
    for start in range(0, len(rows1), batch_size):
        stop = start + batch_size
        log_probs = batch_log_probs(
            model, dataset.matrix[rows1[start:stop]], dataset.matrix[rows2[start:stop]]
        )
        preds[start:stop] = log_probs.argmax(axis=1)
    return preds


def evaluate_accuracy(model: EncoderModel, dataset: ColumnDataset, triples) -> float:
    if not triples:
        raise EmptyInputError("cannot evaluate on an empty split")
    labels = np.array([t.label for t in triples], dtype=np.int64)
    return float((predict_labels(model, dataset, triples) == labels).mean())


def train(
    config: EncoderConfig,
    dataset: ColumnDataset,
    partition: PartitionSet,
    initial_model: EncoderModel | None = None,
) -> tuple[EncoderModel, TrainHistory]:
    """Mini-batch training; returns the checkpoint with the best validation
    accuracy (earlier epoch on ties) and the per-epoch history.

    Fully deterministic: parameters come from ``config.seed`` and batch order
    from an independent stream of the same seed.
    """
    if not partition.train:
        raise EmptyInputError("training split is empty")
    model = copy_model(initial_model) if initial_model is not None else init_model(config)
    rows1, rows2, labels = dataset.rows_for(partition.train)
    optimizer = Adam()
    shuffle_rng = np.random.default_rng([config.seed, _SHUFFLE_STREAM])

    history = TrainHistory()
    best: EncoderModel | None = None
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(rows1))
        losses = []
        for start in range(0, len(order), config.batch_size):
            sel = order[start:start + config.batch_size]
            loss, grads = gradients(
                (dataset.matrix[rows1[sel]], dataset.matrix[rows2[sel]], labels[sel]),
                model,
            )
            if not math.isfinite(loss):
                raise DivergedLossError(
                    f"non-finite loss at epoch {epoch}", history=history
                )
            optimizer.step(named_parameters(model), grads, config.learning_rate)
            losses.append(loss)
        history.train_loss.append(float(np.mean(losses)))
        val_accuracy = evaluate_accuracy(model, dataset, partition.val)
        history.val_accuracy.append(val_accuracy)
        if val_accuracy > history.best_val_accuracy:
            history.best_val_accuracy = val_accuracy
            history.best_epoch = epoch
            history.checkpoint_values.append(val_accuracy)
            best = copy_model(model)
        logger.debug(
            "epoch %d: train_loss=%.6f val_accuracy=%.4f", epoch,
            history.train_loss[-1], val_accuracy,
        )
    assert best is not None
    return best, history


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    embed_dims: tuple[int, ...]
    hidden_sizes: tuple[int, ...]
    layer_counts: tuple[int, ...]
    max_lens: tuple[int, ...]
    min_counts: tuple[int, ...]

    def __post_init__(self) -> None:
        for name in ("embed_dims", "hidden_sizes", "layer_counts", "max_lens", "min_counts"):
            if not getattr(self, name):
                raise ValueError(f"grid axis {name} is empty")


@dataclass(frozen=True)
class GridEntry:
    config: EncoderConfig
    min_count: int
    val_accuracy: float
    parameters: int


def grid_search(
    grid: GridSpec,
    records: list[DrugRecord],
    column: ColumnId,
    partition: PartitionSet,
    *,
    label_count: int,
    learning_rate: float = 1e-3,
    batch_size: int = 64,
    epochs: int = 50,
    seed: int = 0,
    numtkn_columns: frozenset[ColumnId] = DEFAULT_NUMTKN_COLUMNS,
) -> tuple[GridEntry, list[GridEntry]]:
    """Train one model per grid point; best validation accuracy wins.

    Ties go to the smaller parameter count, then to the earlier point in the
    enumeration order (embed_dim, hidden_size, num_layers, max_len, min_count),
    each axis ascending. Vocabularies are fit per min_count on the drugs that
    appear in the train and validation splits.
    """
    fitting_ids = {
        d for t in partition.train + partition.val for d in (t.drug1, t.drug2)
    }
    fitting_records = [r for r in records if r.drug_id in fitting_ids]
    sequences, _ = preprocess_records(fitting_records, column, numtkn_columns)

    vocabs = {
        mc: build_vocab(sequences.values(), mc) for mc in sorted(set(grid.min_counts))
    }

    table: list[GridEntry] = []
    points = itertools.product(
        sorted(set(grid.embed_dims)),
        sorted(set(grid.hidden_sizes)),
        sorted(set(grid.layer_counts)),
        sorted(set(grid.max_lens)),
        sorted(set(grid.min_counts)),
    )
    best: GridEntry | None = None
    for embed_dim, hidden_size, num_layers, max_len, min_count in points:
        vocab = vocabs[min_count]
        config = EncoderConfig(
            vocab_size=vocab.size,
            label_count=label_count,
            embed_dim=embed_dim,
            hidden_size=hidden_size,
            num_layers=num_layers,
            max_len=max_len,
            learning_rate=learning_rate,
            batch_size=batch_size,
            epochs=epochs,
            seed=seed,
        )
        dataset = build_column_dataset(records, column, vocab, max_len, numtkn_columns)
        model, history = train(config, dataset, partition)
        entry = GridEntry(
            config=config,
            min_count=min_count,
            val_accuracy=history.best_val_accuracy,
            parameters=param_count(model),
        )
        table.append(entry)
        if (
            best is None
            or entry.val_accuracy > best.val_accuracy
            or (entry.val_accuracy == best.val_accuracy and entry.parameters < best.parameters)
        ):
            best = entry
        logger.info(
            "grid point d=%d h=%d layers=%d n=%d min_count=%d: val_accuracy=%.4f",
            embed_dim, hidden_size, num_layers, max_len, min_count, entry.val_accuracy,
        )
    assert best is not None
    return best, table


def export_encodings(
    model: EncoderModel,
    records: list[DrugRecord],
    column: ColumnId,
    vocab: Vocabulary,
    max_len: int,
    numtkn_columns: frozenset[ColumnId] = DEFAULT_NUMTKN_COLUMNS,
    batch_size: int = EVAL_BATCH,
) -> EncodingTable:
    """Encode every drug's column into the persisted table format."""
    dataset = build_column_dataset(records, column, vocab, max_len, numtkn_columns)
    vectors = np.empty((len(dataset.ids), model.config.encoding_dim))
    for start in range(0, len(dataset.ids), batch_size):
        stop = start + batch_size
        vectors[start:stop], _ = encode_batch(model, dataset.matrix[start:stop])
    return EncodingTable(
        column=column,
        entries={drug_id: vectors[i] for i, drug_id in enumerate(dataset.ids)},
    )
