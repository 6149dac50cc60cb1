"""Experiment driver: preprocess, train, evaluate, ablate.

Every artifact embeds the config hash and seed that produced it; identical
config + seed reproduce artifacts byte for byte. Failures exit non-zero
with a one-line JSON error record on stderr.
"""

import argparse
import json
import os
import sys

from . import artifacts, dataio, metrics
from .config import load_config_file, validate_config
from .errors import BdhhError, MissingFile
from .hypergraph import build_hypergraph
from .objective import apply_variant, build_variant, variant_by_name
from .training import train


def _resolve_config(args):
    config = load_config_file(args.config) if args.config else validate_config({})
    overrides = {}
    for key in (
        "transactions", "products", "format", "tag", "grouping", "n_levels",
        "min_item_support", "min_basket_size", "max_baskets_per_user", "user_sample",
        "d", "learning_rate", "l2", "heads", "batch_size", "epochs", "seed",
        "max_seq_len", "encoder_layers", "price_pool", "patience", "output_dir",
    ):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "without_augmentation", False):
        overrides["without_augmentation"] = True
    if getattr(args, "without_price", False):
        overrides["without_price"] = True
    if overrides:
        merged = config.canonical_dict()
        merged.update(overrides)
        config = validate_config(merged)
    return config


def _out_path(config, name, explicit=None):
    if explicit:
        return explicit
    root = config.resolved_output_dir()
    return os.path.join(root, name)


def _graph_baskets(dataset):
    return dataio.training_baskets(dataset.sequences)


def cmd_preprocess(args):
    config = _resolve_config(args)
    if not config.transactions:
        raise MissingFile("no transactions path given (config key 'transactions' or --transactions)")
    schema = dataio.resolve_schema(config.format)
    if schema.get("product_item") and not config.products:
        print(
            "warning: no product table given; categories default to "
            f"'{dataio.UNKNOWN_CATEGORY}' and price levels are binned globally",
            file=sys.stderr,
        )
    records = dataio.load_transactions(
        config.transactions, fmt=config.format, products_path=config.products
    )
    chash = artifacts.config_hash(config.hash_dict())
    dataset = dataio.preprocess(
        records,
        tag=config.tag or config.format,
        grouping=config.grouping or schema["grouping"],
        n_levels=config.n_levels,
        min_item_support=(
            config.min_item_support if config.min_item_support is not None else schema["min_item_support"]
        ),
        min_basket_size=(
            config.min_basket_size if config.min_basket_size is not None else schema["min_basket_size"]
        ),
        max_baskets_per_user=(
            config.max_baskets_per_user
            if config.max_baskets_per_user is not None
            else schema["max_baskets_per_user"]
        ),
        user_sample=config.user_sample if config.user_sample is not None else schema["user_sample"],
        seed=config.seed,
        config_hash=chash,
    )
    out = _out_path(config, "dataset.jsonl", args.out)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    dataio.save_dataset(dataset, out)
    split = dataset.split()
    print(
        f"wrote {out}: users={len(dataset.sequences)} items={dataset.vocab.m_d} "
        f"categories={dataset.vocab.m_c} price_levels={dataset.vocab.m_p} "
        f"baskets={sum(len(s.baskets) for s in dataset.sequences)} "
        f"train/val/test={len(split.train_samples)}/{len(split.val_samples)}/{len(split.test_samples)}"
    )
    return 0


def _load_dataset(args, config):
    path = args.data or _out_path(config, "dataset.jsonl")
    return dataio.load_dataset(path)


def cmd_train(args):
    config = _resolve_config(args)
    dataset = _load_dataset(args, config)
    hp = config.hyperparams()
    split = dataset.split()
    graph = build_hypergraph(_graph_baskets(dataset), dataset.vocab)
    chash = artifacts.config_hash(config.hash_dict())
    result = train(split, graph, hp, dataset.vocab, log=lambda rec: print(json.dumps(rec)))
    out = _out_path(config, "checkpoint.bdhh", args.out)
    artifacts.save_checkpoint(out, result.state, extra_meta={"config_hash": chash, "dataset_tag": dataset.tag})
    log_path = _out_path(config, "train_log.json", args.log)
    artifacts.save_training_log(
        log_path,
        result.history,
        {"config_hash": chash, "seed": hp.seed, "best_epoch": result.best_epoch},
    )
    print(f"wrote {out} (best epoch {result.best_epoch}, val ndcg@10 {result.best_val_ndcg:.4f})")
    return 0


def cmd_evaluate(args):
    config = _resolve_config(args)
    dataset = _load_dataset(args, config)
    state, meta = artifacts.load_checkpoint(args.checkpoint or _out_path(config, "checkpoint.bdhh"))
    graph = build_hypergraph(_graph_baskets(dataset), dataset.vocab)
    split = dataset.split()
    values = metrics.evaluate_model(
        state.params, graph, split.test_samples, state.hp, dataset.vocab.item_level, ks=config.ks
    )
    report = metrics.build_report(
        dataset=dataset.tag,
        variant=build_variant(state.hp).name,
        values=values,
        n_users=len(split.test_samples),
        seed=state.hp.seed,
        checkpoint_id=artifacts.file_sha256(args.checkpoint or _out_path(config, "checkpoint.bdhh")),
        ks=config.ks,
        config_hash=meta.get("extra", {}).get("config_hash", ""),
    )
    json_path = _out_path(config, "report.json", args.report)
    tsv_path = os.path.splitext(json_path)[0] + ".tsv"
    artifacts.save_report(report, json_path, tsv_path)
    print(f"wrote {json_path}")
    for k in config.ks:
        print(f"  ndcg@{k}={values[f'ndcg@{k}']:.4f} hit@{k}={values[f'hit@{k}']:.4f}")
    return 0


def cmd_ablate(args):
    config = _resolve_config(args)
    dataset = _load_dataset(args, config)
    split = dataset.split()
    graph = build_hypergraph(_graph_baskets(dataset), dataset.vocab)
    chash = artifacts.config_hash(config.hash_dict())
    reports = []
    for name in ("bdhh", "no_augmentation", "no_price"):
        hp = apply_variant(config.hyperparams(), variant_by_name(name))
        result = train(split, graph, hp, dataset.vocab)
        ckpt_path = _out_path(config, f"checkpoint_{name}.bdhh")
        artifacts.save_checkpoint(
            ckpt_path, result.state, extra_meta={"config_hash": chash, "dataset_tag": dataset.tag}
        )
        values = metrics.evaluate_model(
            result.state.params, graph, split.test_samples, hp, dataset.vocab.item_level, ks=config.ks
        )
        reports.append(
            metrics.build_report(
                dataset=dataset.tag,
                variant=name,
                values=values,
                n_users=len(split.test_samples),
                seed=hp.seed,
                checkpoint_id=artifacts.file_sha256(ckpt_path),
                ks=config.ks,
                config_hash=chash,
            )
        )
        print(f"{name}: " + " ".join(f"ndcg@{k}={values[f'ndcg@{k}']:.4f}" for k in config.ks))
    json_path = _out_path(config, "ablation.json", args.report)
    tsv_path = os.path.splitext(json_path)[0] + ".tsv"
    artifacts.save_report(reports, json_path, tsv_path)
    print(f"wrote {json_path}")
    return 0


def cmd_graph_summary(args):
    config = _resolve_config(args)
    dataset = _load_dataset(args, config)
    graph = build_hypergraph(_graph_baskets(dataset), dataset.vocab)
    print(graph.summary())
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--output-dir", dest="output_dir", help="artifact directory (default $BDHH_OUTPUT_ROOT or ./runs)")
    sub.add_argument("--seed", type=int)


def _add_hyper(sub):
    sub.add_argument("--d", type=int)
    sub.add_argument("--learning-rate", dest="learning_rate", type=float)
    sub.add_argument("--l2", type=float)
    sub.add_argument("--heads", type=int)
    sub.add_argument("--batch-size", dest="batch_size", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--max-seq-len", dest="max_seq_len", type=int)
    sub.add_argument("--encoder-layers", dest="encoder_layers", type=int)
    sub.add_argument("--price-pool", dest="price_pool", choices=["last", "mean"])
    sub.add_argument("--patience", type=int)
    sub.add_argument("--without-augmentation", dest="without_augmentation", action="store_true")
    sub.add_argument("--without-price", dest="without_price", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="bdhh", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("preprocess", help="transaction logs -> dataset file")
    _add_common(p)
    p.add_argument("--transactions")
    p.add_argument("--products")
    p.add_argument("--format", choices=["generic", "dunnhumby", "valuedshopper"])
    p.add_argument("--tag")
    p.add_argument("--grouping", choices=["day", "basket"])
    p.add_argument("--n-levels", dest="n_levels", type=int)
    p.add_argument("--min-item-support", dest="min_item_support", type=int)
    p.add_argument("--min-basket-size", dest="min_basket_size", type=int)
    p.add_argument("--max-baskets-per-user", dest="max_baskets_per_user", type=int)
    p.add_argument("--user-sample", dest="user_sample", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_preprocess)

    p = commands.add_parser("train", help="dataset file -> checkpoint")
    _add_common(p)
    _add_hyper(p)
    p.add_argument("--data")
    p.add_argument("--out")
    p.add_argument("--log")
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("evaluate", help="checkpoint -> metrics report")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--report")
    p.set_defaults(func=cmd_evaluate)

    p = commands.add_parser("ablate", help="train/evaluate full model and both ablations")
    _add_common(p)
    _add_hyper(p)
    p.add_argument("--data")
    p.add_argument("--report")
    p.set_defaults(func=cmd_ablate)

    p = commands.add_parser("graph-summary", help="print hypergraph statistics")
    _add_common(p)
    p.add_argument("--data")
    p.set_defaults(func=cmd_graph_summary)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BdhhError as exc:
        record = {"error": exc.code, "message": str(exc), "command": args.command}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
