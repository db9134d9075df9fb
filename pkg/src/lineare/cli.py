"""Command-line entry point: ``lineare {stats,train,eval,analyze,countries,synth}``.

Every command writes its outputs under ``--out``. Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import difflib
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__, analysis, evaluator, kgdata, model, trainer
from .kgdata import SPLITS, DataError

log = logging.getLogger("lineare")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
CHECKPOINT_NAME = "checkpoint.bin"
MANIFEST_NAME = "manifest.json"
LOG_NAME = "train_log.jsonl"
KINDS = ("symmetry", "inversion", "composition", "mapping", "scatter")
KIND_ARITY = {"symmetry": 1, "inversion": 2, "composition": 3, "mapping": 1, "scatter": 1}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def dataset_fingerprint(directory) -> dict:
    """Size and sha256 of each split file."""
    out = {}
    for s in SPLITS:
        path = Path(directory) / f"{s}.txt"
        if not path.is_file():
            raise DataError(f"missing split file {path}")
        data = path.read_bytes()
        out[s] = {"bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()}
    return out


def build_manifest(dataset: Path, cfg: trainer.TrainConfig, checkpoint: Path) -> dict:
    return {
        "version": __version__,
        "dataset": str(dataset),
        "fingerprint": dataset_fingerprint(dataset),
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "checkpoint": str(checkpoint),
    }


def resolve_relation(vocab: kgdata.Vocab, name: str) -> int:
    if name in vocab.relation_ids:
        return vocab.relation_ids[name]
    near = difflib.get_close_matches(name, vocab.relations, n=5, cutoff=0.4)
    hint = f"; nearest: {', '.join(near)}" if near else ""
    raise UsageError(f"unknown relation {name!r}{hint}")


def _overrides(args) -> dict:
    values = {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    for flag, key in (("seed", "seed"), ("dim", "dim"), ("steps", "max_steps"), ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = value
    return values


def _config(args, base: trainer.TrainConfig | None = None) -> trainer.TrainConfig:
    try:
        return trainer.load_config(args.config, _overrides(args), base)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_stats(args) -> int:
    kg = kgdata.load_dataset(args.dataset)
    report = kgdata.dataset_report(kg, args.max_path_len)
    text = _dump_json(report)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "stats.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _run_training(dataset: Path, cfg: trainer.TrainConfig, out: Path) -> int:
    kg = kgdata.load_dataset(dataset)
    for msg in cfg.grid_warnings():
        log.warning(msg)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint = out / CHECKPOINT_NAME
    manifest = build_manifest(dataset, cfg, checkpoint)
    (out / MANIFEST_NAME).write_text(_dump_json(manifest), encoding="utf-8")
    with open(out / LOG_NAME, "w", encoding="utf-8") as fh:
        write = lambda rec: fh.write(json.dumps(rec, sort_keys=True) + "\n")
        try:
            result = trainer.train(kg, cfg, on_record=write)
        except trainer.TrainingDiverged as exc:
            model.save_checkpoint(out / "last_good.bin", exc.store, kg.vocab)
            log.error("training diverged: %s (last good parameters in %s)", exc, out / "last_good.bin")
            return EXIT_NUMERIC
    model.save_checkpoint(checkpoint, result.store, kg.vocab)
    summary = {"best_step": result.best_step, "best_valid_mrr": result.best_valid_mrr, "checkpoint": str(checkpoint)}
    sys.stdout.write(_dump_json(summary))
    return EXIT_OK


def cmd_train(args) -> int:
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        dataset = Path(args.dataset or manifest["dataset"])
        if dataset_fingerprint(dataset) != manifest["fingerprint"]:
            raise DataError(f"dataset at {dataset} does not match the manifest fingerprint")
        try:
            cfg = trainer.config_from_mapping(manifest["config"])
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    else:
        if not args.dataset:
            raise UsageError("train needs --dataset or --manifest")
        dataset, cfg = Path(args.dataset), _config(args)
    return _run_training(dataset, cfg, args.out)


def cmd_eval(args) -> int:
    store, vocab = model.load_checkpoint(args.checkpoint)
    kg = kgdata.load_dataset(args.dataset)
    if vocab != kg.vocab:
        raise DataError("checkpoint vocabulary does not match the dataset")
    report = evaluator.evaluate(store, kg, args.split, workers=args.workers or 1)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / f"metrics_{args.split}.json").write_text(evaluator.report_json(report), encoding="utf-8")
    (args.out / f"metrics_{args.split}.csv").write_text(evaluator.report_csv(report), encoding="utf-8")
    if args.ranks:
        (args.out / f"ranks_{args.split}.csv").write_text(evaluator.ranks_csv(report.records, kg), encoding="utf-8")
    sys.stdout.write(_dump_json(report.summary()))
    return EXIT_OK


def cmd_analyze(args) -> int:
    store, vocab = model.load_checkpoint(args.checkpoint)
    need = KIND_ARITY[args.kind]
    if len(args.relations) != need:
        raise UsageError(f"{args.kind} takes {need} relation name(s), got {len(args.relations)}")
    ids = [resolve_relation(vocab, name) for name in args.relations]
    label = "~".join(args.relations)
    args.out.mkdir(parents=True, exist_ok=True)
    if args.kind == "scatter":
        dims = args.dims or list(range(min(4, store.dim)))
        r = ids[0]
        pairs = [(h, t) for h, rr, t in _train_pairs(args, vocab) if rr == r]
        text = analysis.scatter_export(store, r, dims, pairs, vocab.entities)
        path = args.out / f"scatter_{label}.csv"
        path.write_text(text, encoding="utf-8")
        sys.stdout.write(f"{path}\n")
        return EXIT_OK
    if args.kind == "symmetry":
        hist = analysis.symmetry_diagnostic(store, ids[0], label, args.bin_width)
    elif args.kind == "inversion":
        hist = analysis.inversion_diagnostic(store, ids[0], ids[1], label, args.bin_width)
    elif args.kind == "composition":
        hist = analysis.composition_diagnostic(store, ids[0], ids[1], ids[2], label, args.bin_width)
    else:
        hist = analysis.mapping_diagnostic(store, ids[0], label, bin_width=args.bin_width)
    path = args.out / f"{args.kind}_{label}.csv"
    path.write_text(hist.to_csv(), encoding="utf-8")
    summary = {"kind": args.kind, "relations": args.relations, "degenerate": hist.degenerate, **hist.extra}
    sys.stdout.write(_dump_json(summary))
    return EXIT_OK


def _train_pairs(args, vocab):
    if not args.dataset:
        return []
    kg = kgdata.load_dataset(args.dataset)
    if kg.vocab != vocab:
        raise DataError("checkpoint vocabulary does not match the dataset")
    return kg.train.tolist()


def cmd_countries(args) -> int:
    from .countries import COUNTRIES_CONFIG, run_countries

    cfg = _config(args, COUNTRIES_CONFIG)
    seeds = list(range(cfg.seed, cfg.seed + args.repeats))
    result = run_countries(args.data, args.task, cfg, seeds)
    args.out.mkdir(parents=True, exist_ok=True)
    text = _dump_json(result.to_json())
    (args.out / f"countries_{args.task}.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import GENERATORS

    pk = GENERATORS[args.pattern](seed=args.seed or 0)
    kgdata.save_dataset(pk.kg, args.out)
    (args.out / "roles.json").write_text(_dump_json(pk.roles), encoding="utf-8")
    sys.stdout.write(_dump_json({"dataset": str(args.out), "roles": pk.roles}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lineare", description="Train, evaluate and inspect line-based relation embeddings.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, dataset=True, out=True):
        if dataset:
            sp.add_argument("--dataset", type=Path)
        if out:
            sp.add_argument("--out", type=Path, required=True)
        sp.add_argument("--workers", type=int)

    def training(sp):
        sp.add_argument("--config", type=Path)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--dim", type=int)
        sp.add_argument("--steps", type=int)
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")

    sp = sub.add_parser("stats", help="dataset counts, mapping and pattern census")
    sp.add_argument("--dataset", type=Path, required=True)
    sp.add_argument("--out", type=Path)
    sp.add_argument("--max-path-len", type=int, default=3)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("train", help="train and write checkpoint, manifest and log")
    common(sp)
    training(sp)
    sp.add_argument("--manifest", type=Path, help="replay a previous run's manifest")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="filtered link-prediction metrics")
    common(sp)
    sp.add_argument("--checkpoint", type=Path, required=True)
    sp.add_argument("--split", choices=("valid", "test"), default="test")
    sp.add_argument("--ranks", action="store_true", help="also dump per-triple ranks")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("analyze", help="line-angle diagnostics for named relations")
    common(sp)
    sp.add_argument("--checkpoint", type=Path, required=True)
    sp.add_argument("--kind", choices=KINDS, required=True)
    sp.add_argument("--bin-width", type=float, default=analysis.DEFAULT_BIN_WIDTH)
    sp.add_argument("--dims", type=int, nargs="+")
    sp.add_argument("relations", nargs="+")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("countries", help="AUC-PR on a Countries task over several seeds")
    common(sp, dataset=False)
    training(sp)
    sp.add_argument("--task", choices=("S1", "S2", "S3"), required=True)
    sp.add_argument("--data", type=Path, default=Path("data/countries"))
    sp.add_argument("--repeats", type=int, default=5)
    sp.set_defaults(func=cmd_countries)

    sp = sub.add_parser("synth", help="write a synthetic pattern knowledge graph")
    sp.add_argument("--pattern", choices=("symmetry", "antisymmetry", "inversion", "composition", "one_to_many"), required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", type=Path, required=True)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lineare: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"lineare: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (model.NumericalError, FloatingPointError) as exc:
        print(f"lineare: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
