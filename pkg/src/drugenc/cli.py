"""Command-line pipeline.

Subcommands cover the full workflow: ``synth`` writes a synthetic corpus,
``partition`` splits its interaction pairs, ``train``/``grid`` fit column
encoders, ``encode`` exports per-drug encoding tables, ``query`` answers one
analogy, ``simulate`` replays labeled pairs through the analogy engine, and
``eval`` scores the trained encoder against the random and nearest-neighbour
baselines.

Every command draws its randomness from one ``--seed`` flag; per-purpose
sub-seeds are the base seed plus a fixed offset (see SEED_OFFSETS). A JSON
config file may supply any long-option value; explicit flags win and unknown
keys are rejected. Output files are written atomically: on failure no partial
artifact is left behind.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analogy, baselines, metrics, partition as partition_mod
from .corpus import (
    ColumnId,
    build_vocab,
    load_ddi,
    load_drugs,
    load_vocab,
    preprocess_records,
    save_ddi,
    save_drugs,
    save_vocab,
)
from .errors import DrugencError
from .model import (
    EncoderConfig,
    GridSpec,
    build_column_dataset,
    export_encodings,
    grid_search,
    load_checkpoint,
    predict_labels,
    save_checkpoint,
    train,
)
from .synth import SyntheticSpec, generate_synthetic

logger = logging.getLogger(__name__)

#: fixed per-purpose offsets added to the base --seed
SEED_OFFSETS = {
    "synth": 101,
    "dedup": 202,
    "partition": 303,
    "train": 404,
    "random-eval": 505,
    "shuffle-baseline": 606,
}


def derive_seed(base: int, purpose: str) -> int:
    return base + SEED_OFFSETS[purpose]


class _Artifacts:
    """Stage outputs under temporary names; commit renames them into place."""

    def __init__(self) -> None:
        self._staged: list[tuple[Path, Path]] = []

    def stage(self, final: str | Path) -> Path:
        final = Path(final)
        final.parent.mkdir(parents=True, exist_ok=True)
        tmp = final.parent / (final.name + ".part")
        self._staged.append((tmp, final))
        return tmp

    def commit(self) -> None:
        for tmp, final in self._staged:
            tmp.replace(final)

    def abort(self) -> None:
        for tmp, _ in self._staged:
            tmp.unlink(missing_ok=True)


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(","))


def _column(name: str) -> ColumnId:
    try:
        return ColumnId(name)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown column {name!r}; choose from "
            + ", ".join(c.value for c in ColumnId)
        ) from None


def _label_count(pset: partition_mod.PartitionSet) -> int:
    n = pset.label_count
    if n == 0:
        raise DrugencError("partition manifest contains no triples")
    return n


def _fit_vocab(records, column: ColumnId, pset, min_count: int):
    fitting_ids = {d for t in pset.train + pset.val for d in (t.drug1, t.drug2)}
    fitting = [r for r in records if r.drug_id in fitting_ids]
    sequences, _ = preprocess_records(fitting, column)
    return build_vocab(sequences.values(), min_count)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(args, artifacts: _Artifacts) -> int:
    spec = SyntheticSpec(
        num_drugs=args.num_drugs,
        num_labels=args.num_labels,
        tokens_per_column=args.tokens_per_column,
        seed=derive_seed(args.seed, "synth"),
        rule_column=args.rule_column,
        num_signatures=args.num_signatures,
        noise_pool=args.noise_pool,
        pair_fraction=args.pair_fraction,
    )
    records, triples = generate_synthetic(spec)
    label_names = [f"type{i:03d}" for i in range(spec.num_labels)]
    out = Path(args.out_dir)
    save_drugs(records, artifacts.stage(out / "drugs.tsv"))
    save_ddi(triples, label_names, artifacts.stage(out / "ddi.tsv"))
    print(f"synth: wrote {len(records)} drugs and {len(triples)} pairs to {out}")
    return 0


def cmd_partition(args, artifacts: _Artifacts) -> int:
    records = load_drugs(args.drugs)
    ids = {r.drug_id for r in records}
    triples, _ = load_ddi(args.ddi, seed=derive_seed(args.seed, "dedup"), drug_ids=ids)
    seed = derive_seed(args.seed, "partition")
    if args.scheme == "pairwise":
        pset = partition_mod.stratified_split(triples, seed=seed)
    else:
        pset = partition_mod.heldoff_split(triples, sorted(ids), args.x_pct, seed=seed)
    partition_mod.save_partition(pset, artifacts.stage(args.out))
    print(
        f"partition: {args.scheme} train={len(pset.train)} val={len(pset.val)} "
        f"test={len(pset.test)} heldoff_drugs={len(pset.heldoff_drugs)}"
    )
    return 0


def _write_history(history, path: Path) -> None:
    lines = [f"#best_epoch={history.best_epoch}", "epoch\ttrain_loss\tval_accuracy"]
    for epoch, (loss, acc) in enumerate(zip(history.train_loss, history.val_accuracy)):
        lines.append(f"{epoch}\t{loss:.12g}\t{acc:.12g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_train(args, artifacts: _Artifacts) -> int:
    records = load_drugs(args.drugs)
    pset = partition_mod.load_partition(args.partition)
    vocab = _fit_vocab(records, args.column, pset, args.min_count)
    config = EncoderConfig(
        vocab_size=vocab.size,
        label_count=_label_count(pset),
        embed_dim=args.embed_dim,
        hidden_size=args.hidden_size,
        num_layers=args.num_layers,
        max_len=args.max_len,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=derive_seed(args.seed, "train"),
    )
    dataset = build_column_dataset(records, args.column, vocab, args.max_len)
    model, history = train(config, dataset, pset)
    out = Path(args.out_dir)
    save_checkpoint(model, artifacts.stage(out / "model.ckpt"))
    save_vocab(vocab, artifacts.stage(out / "vocab.tsv"))
    _write_history(history, artifacts.stage(out / "history.tsv"))
    print(
        f"train: column={args.column.value} best_epoch={history.best_epoch} "
        f"val_accuracy={history.best_val_accuracy:.4f}"
    )
    return 0


def cmd_grid(args, artifacts: _Artifacts) -> int:
    records = load_drugs(args.drugs)
    pset = partition_mod.load_partition(args.partition)
    grid = GridSpec(
        embed_dims=args.embed_dims,
        hidden_sizes=args.hidden_sizes,
        layer_counts=args.layer_counts,
        max_lens=args.max_lens,
        min_counts=args.min_counts,
    )
    best, table = grid_search(
        grid,
        records,
        args.column,
        pset,
        label_count=_label_count(pset),
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=derive_seed(args.seed, "train"),
    )
    out = Path(args.out_dir)
    lines = ["embed_dim\thidden_size\tnum_layers\tmax_len\tmin_count\tval_accuracy\tparameters\tbest"]
    for entry in table:
        c = entry.config
        flag = "*" if entry == best else ""
        lines.append(
            f"{c.embed_dim}\t{c.hidden_size}\t{c.num_layers}\t{c.max_len}"
            f"\t{entry.min_count}\t{entry.val_accuracy:.6f}\t{entry.parameters}\t{flag}"
        )
    artifacts.stage(out / "grid.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    # retrain the winning point (deterministic) to persist its artifacts
    vocab = _fit_vocab(records, args.column, pset, best.min_count)
    dataset = build_column_dataset(records, args.column, vocab, best.config.max_len)
    model, history = train(best.config, dataset, pset)
    save_checkpoint(model, artifacts.stage(out / "model.ckpt"))
    save_vocab(vocab, artifacts.stage(out / "vocab.tsv"))
    _write_history(history, artifacts.stage(out / "history.tsv"))
    print(
        f"grid: {len(table)} points, best val_accuracy={best.val_accuracy:.4f} "
        f"(d={best.config.embed_dim} h={best.config.hidden_size} "
        f"layers={best.config.num_layers} n={best.config.max_len} "
        f"min_count={best.min_count})"
    )
    return 0


def cmd_encode(args, artifacts: _Artifacts) -> int:
    model = load_checkpoint(args.checkpoint)
    vocab = load_vocab(args.vocab)
    if vocab.size != model.config.vocab_size:
        raise DrugencError(
            f"vocabulary size {vocab.size} does not match checkpoint "
            f"({model.config.vocab_size})"
        )
    records = load_drugs(args.drugs)
    table = export_encodings(model, records, vocab.column, vocab, model.config.max_len)
    analogy.save_table(table, artifacts.stage(args.out))
    print(f"encode: wrote {len(table)} vectors of dim {table.dim} for {vocab.column.value}")
    return 0


def cmd_query(args, artifacts: _Artifacts) -> int:
    table = analogy.load_table(args.table)
    query = analogy.AnalogyQuery(
        a=args.a, b=args.b, c=args.a, k=args.k, min_score=args.min_score
    )
    result = analogy.three_cosmul(query, table)
    if not result.entries:
        print("no results above the score threshold")
        return 0
    for rank, (drug_id, score) in enumerate(result.entries, start=1):
        print(f"{rank}\t{drug_id}\t{score:.6f}")
    return 0


def cmd_simulate(args, artifacts: _Artifacts) -> int:
    table = analogy.load_table(args.table)
    pset = partition_mod.load_partition(args.partition)
    store = analogy.DdiStore(pset.train + pset.val + pset.test)
    pairs = pset.split(args.split)
    report = analogy.simulate_analogy(
        pairs,
        table,
        store,
        ks=args.ks,
        min_score=args.min_score,
        collect_queries=args.query_log is not None,
    )
    query_log = artifacts.stage(args.query_log) if args.query_log else None
    analogy.save_report(report, artifacts.stage(args.out), query_log)
    summary = " ".join(f"P@{k}={report.mean_precision[k]:.3f}" for k in report.ks)
    print(f"simulate: {report.simulated} simulated, {report.skipped} skipped, {summary}")
    return 0


def cmd_eval(args, artifacts: _Artifacts) -> int:
    pset = partition_mod.load_partition(args.partition)
    eval_triples = pset.split(args.split)
    if not eval_triples:
        raise DrugencError(f"split {args.split!r} is empty")
    label_count = _label_count(pset)
    golds = np.array([t.label for t in eval_triples], dtype=np.int64)

    if args.model == "random":
        dist = baselines.fit_label_distribution(pset.train, label_count)
        rep = baselines.random_predict(
            dist,
            eval_triples,
            seed=derive_seed(args.seed, "random-eval"),
            num_simulations=args.num_simulations,
        )
    elif args.model == "knn":
        records = load_drugs(args.drugs)
        vocab = load_vocab(args.vocab)
        sequences, _ = preprocess_records(records, vocab.column)
        def pair_vec(t):
            return baselines.bow_pair_vector(
                sequences[t.drug1], sequences[t.drug2], vocab
            )
        index = baselines.knn_fit(
            [pair_vec(t) for t in pset.train],
            [t.label for t in pset.train],
            k=args.k,
            vocab_size=vocab.size,
        )
        preds = baselines.knn_predict_many(index, [pair_vec(t) for t in eval_triples])
        rep = metrics.report(metrics.confusion(preds, golds, label_count))
    else:
        model = load_checkpoint(args.checkpoint)
        vocab = load_vocab(args.vocab)
        records = load_drugs(args.drugs)
        dataset = build_column_dataset(
            records, vocab.column, vocab, model.config.max_len
        )
        preds = predict_labels(model, dataset, eval_triples)
        rep = metrics.report(
            metrics.confusion(preds, golds, max(label_count, model.config.label_count))
        )
    text = metrics.format_report(rep)
    if args.out:
        artifacts.stage(args.out).write_text(text, encoding="utf-8")
    print(f"eval {args.model} on {args.split}: accuracy={rep.accuracy:.4f} "
          f"macro_f1={rep.macro_f1:.4f} weighted_f1={rep.weighted_f1:.4f}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="drugenc",
        description="Supervised drug column encodings and analogy retrieval.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    by_name: dict[str, argparse.ArgumentParser] = {}

    def sub(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = subs.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="JSON file of defaults; flags override")
        p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
        by_name[name] = p
        return p

    p = sub("synth", cmd_synth, "generate a synthetic corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--num-drugs", type=int, default=1024)
    p.add_argument("--num-labels", type=int, default=8)
    p.add_argument("--tokens-per-column", type=int, default=9)
    p.add_argument("--rule-column", type=_column, default=ColumnId.CATEGORIES)
    p.add_argument("--num-signatures", type=int, default=32)
    p.add_argument("--noise-pool", type=int, default=200)
    p.add_argument("--pair-fraction", type=float, default=1.0)

    p = sub("partition", cmd_partition, "split interaction pairs")
    p.add_argument("scheme", choices=("pairwise", "heldoff"))
    p.add_argument("--drugs", required=True)
    p.add_argument("--ddi", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--x-pct", type=float, default=2.0, help="heldoff drug percentage")

    p = sub("train", cmd_train, "train one column encoder")
    p.add_argument("--drugs", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--column", type=_column, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--hidden-size", type=int, default=32)
    p.add_argument("--num-layers", type=int, default=1)
    p.add_argument("--max-len", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=50)

    p = sub("grid", cmd_grid, "hyper-parameter grid search")
    p.add_argument("--drugs", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--column", type=_column, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--embed-dims", type=_parse_ints, default=(16,))
    p.add_argument("--hidden-sizes", type=_parse_ints, default=(32,))
    p.add_argument("--layer-counts", type=_parse_ints, default=(1,))
    p.add_argument("--max-lens", type=_parse_ints, default=(16,))
    p.add_argument("--min-counts", type=_parse_ints, default=(1, 2))
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=50)

    p = sub("encode", cmd_encode, "export an encoding table")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--drugs", required=True)
    p.add_argument("--out", required=True)

    p = sub("query", cmd_query, "answer one A : B :: A : ? analogy")
    p.add_argument("--table", required=True)
    p.add_argument("--a", required=True, help="query drug A (and C)")
    p.add_argument("--b", required=True, help="query drug B")
    p.add_argument("--k", type=int, default=analogy.DEFAULT_TOP_K)
    p.add_argument("--min-score", type=float, default=analogy.DEFAULT_MIN_SCORE)

    p = sub("simulate", cmd_simulate, "replay labeled pairs as analogy queries")
    p.add_argument("--table", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="val")
    p.add_argument("--ks", type=_parse_ints, default=analogy.DEFAULT_KS)
    p.add_argument("--min-score", type=float, default=analogy.DEFAULT_MIN_SCORE)
    p.add_argument("--out", required=True)
    p.add_argument("--query-log")

    p = sub("eval", cmd_eval, "score a classifier on a split")
    p.add_argument("model", choices=("dnn", "random", "knn"))
    p.add_argument("--partition", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="val")
    p.add_argument("--out")
    p.add_argument("--checkpoint", help="dnn: model checkpoint")
    p.add_argument("--vocab", help="dnn/knn: vocabulary file")
    p.add_argument("--drugs", help="dnn/knn: drug table")
    p.add_argument("--num-simulations", type=int, default=20, help="random baseline")
    p.add_argument("--k", type=int, default=5, help="knn neighbour count")

    return parser, by_name


def _apply_config(parser, by_name, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DrugencError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise DrugencError(f"config {args.config} must hold a JSON object")
    sub = by_name[args.command]
    valid = {a.dest for a in sub._actions if a.dest != "help"}
    unknown = set(cfg) - valid
    if unknown:
        raise DrugencError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    converted = {}
    for key, value in cfg.items():
        if key == "column" or key == "rule_column":
            converted[key] = _column(value)
        elif key in ("embed_dims", "hidden_sizes", "layer_counts", "max_lens",
                     "min_counts", "ks") and isinstance(value, str):
            converted[key] = _parse_ints(value)
        elif key in ("embed_dims", "hidden_sizes", "layer_counts", "max_lens",
                     "min_counts", "ks") and isinstance(value, list):
            converted[key] = tuple(int(v) for v in value)
        else:
            converted[key] = value
    sub.set_defaults(**converted)
    return parser.parse_args(argv)


def _validate(args) -> None:
    if args.command == "query" and args.a == args.b:
        raise DrugencError("query drugs a and b must differ")


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser, by_name = build_parser()
    artifacts = _Artifacts()
    try:
        args = _apply_config(parser, by_name, argv)
        _validate(args)
        code = args.func(args, artifacts)
        artifacts.commit()
        return code
    except (DrugencError, ValueError, OSError) as exc:
        artifacts.abort()
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
