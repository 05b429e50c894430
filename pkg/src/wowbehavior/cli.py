"""Command-line entry point: ``wowbehavior <subcommand> ...``."""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from pathlib import Path

from .evaluation import compare_attribute_sets, confusion_text, cross_validate, emit_table1
from .features import FEATURE_NAMES, profiles_dataset
from .ingest import ColumnMap, filter_window, parse_session_log, write_session_log, year_window
from .labels import SeedThresholds, read_labels, seed_dataset, write_labels
from .pipeline import (PipelineConfig, StageError, config_from_mapping, load_config,
                       run_pipeline)
from .profiles import build_profiles, read_profiles, write_profiles
from .selftrain import SelfTrainParams, self_train
from .synth import PopulationSpec, generate_population, mixed_population_spec
from .tree import TrainParams, dump_text, dumps_json
from .zones import default_catalog, load_zone_catalog

log = logging.getLogger("wowbehavior")


def _open_out(path: str | None):
    if path is None or path == "-":
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", newline="", encoding="utf-8")


def _ingest(args):
    column_map = ColumnMap.identity()
    if args.column_map:
        with open(args.column_map, encoding="utf-8") as fh:
            column_map = ColumnMap.read(fh)
    try:
        with open(args.log, encoding="utf-8", newline="") as fh:
            records, stats = parse_session_log(
                fh, column_map, delimiter=args.delimiter, has_header=args.header,
                time_format=args.time_format)
    except (OSError, UnicodeDecodeError) as exc:
        raise StageError("ingest", f"cannot read {args.log}: {exc}") from exc
    if getattr(args, "year", None) is not None:
        records = filter_window(records, year_window(args.year))
    return records, stats


def _catalog(path):
    if path is None:
        return default_catalog()
    with open(path, encoding="utf-8") as fh:
        return load_zone_catalog(fh)


def _tree_params(args) -> TrainParams:
    return TrainParams(min_leaf=args.min_leaf, min_gain=args.min_gain, max_depth=args.max_depth,
                       confidence=args.confidence)


def _thresholds(path) -> SeedThresholds:
    if path is None:
        return SeedThresholds()
    with open(path, encoding="utf-8") as fh:
        return SeedThresholds.read(fh)


# -- subcommands -----------------------------------------------------------


def cmd_ingest(args) -> int:
    records, stats = _ingest(args)
    if args.canonical:
        with _open_out(args.canonical) as fh:
            write_session_log(records, fh)
    print(json.dumps(stats.as_dict(), indent=1, sort_keys=True))
    return 0


def cmd_zones_validate(args) -> int:
    cat = _catalog(args.catalog)
    rep = cat.report
    print(f"entries: {len(cat)}")
    print(f"rows read: {rep.rows_read}")
    print(f"duplicates: {rep.duplicates}")
    print(f"rejected: {len(rep.rejected)}")
    for lineno, reason in rep.rejected:
        print(f"  line {lineno}: {reason}")
    return 1 if rep.rejected else 0


def cmd_featurize(args) -> int:
    records, _ = _ingest(args)
    cat = _catalog(args.zones)
    profiles = build_profiles(records, cat, args.interval)
    with _open_out(args.out) as fh:
        write_profiles(profiles, fh)
    if cat.unknown_hits:
        log.warning("%d snapshots in %d zones missing from the catalog",
                    cat.unknown_hits, len(cat.unknown_names))
    return 0


def cmd_label(args) -> int:
    with open(args.profiles, encoding="utf-8") as fh:
        profiles = read_profiles(fh)
    seeds = seed_dataset(profiles, _thresholds(args.thresholds))
    with _open_out(args.out) as fh:
        write_labels(seeds.assignments, fh)
    print(f"coverage {seeds.coverage:.4f} ({seeds.labeled}/{len(profiles)}), "
          f"conflicts {seeds.conflicts}", file=sys.stderr)
    return 0


def _load_profiles_labels(args):
    with open(args.profiles, encoding="utf-8") as fh:
        profiles = read_profiles(fh)
    with open(args.labels, encoding="utf-8") as fh:
        labels = read_labels(fh)
    return profiles, labels


def cmd_train(args) -> int:
    profiles, labels = _load_profiles_labels(args)
    labeled = [p for p in profiles if labels.get(p.player_id) is not None]
    unlabeled = [p for p in profiles if labels.get(p.player_id) is None]
    params = SelfTrainParams(args.threshold, args.max_iterations, _tree_params(args))
    res = self_train(profiles_dataset(labeled, labels), profiles_dataset(unlabeled), params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tree.txt").write_text(dump_text(res.model), encoding="utf-8")
    (out / "tree.json").write_text(dumps_json(res.model) + "\n", encoding="utf-8")
    with open(out / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        write_labels(res.final_labels, fh, extra={k: [v] for k, v in res.origin.items()},
                     extra_header=["origin"])
    for rec in res.progress:
        print(f"iteration {rec['iteration']}: adopted {rec['adopted']}, "
              f"remaining {rec['remaining']}")
    return 0


def cmd_evaluate(args) -> int:
    profiles, labels = _load_profiles_labels(args)
    profiles = [p for p in profiles if labels.get(p.player_id) is not None]
    rep = cross_validate(profiles_dataset(profiles, labels), args.folds, _tree_params(args),
                         args.seed)
    print(emit_table1({args.title: rep}), end="")
    print()
    print(confusion_text(rep), end="")
    if args.json:
        Path(args.json).write_text(json.dumps(rep.to_dict(), indent=1, sort_keys=True) + "\n",
                                   encoding="utf-8")
    return 0


def cmd_compare(args) -> int:
    profiles, labels = _load_profiles_labels(args)
    profiles = [p for p in profiles if labels.get(p.player_id) is not None]
    data = profiles_dataset(profiles, labels)
    with_attrs = args.features.split(",") if args.features else list(FEATURE_NAMES)
    without = [f for f in with_attrs if f not in set(args.drop.split(","))]
    rep = compare_attribute_sets(data, with_attrs, without, _tree_params(args), args.seed,
                                 args.folds)
    for name, v in zip(("with", "without"), rep.variants):
        print(f"{name:8s} nodes={v.node_count:4d} depth={v.depth:3d} "
              f"accuracy={v.accuracy_mean:.2f} ± {v.accuracy_std:.2f}  [{','.join(v.features)}]")
    return 0


def cmd_synth(args) -> int:
    if args.counts:
        counts = {}
        for part in args.counts.split(","):
            k, v = part.split("=")
            counts[k.strip()] = int(v)
        spec = PopulationSpec(counts, interval_minutes=args.interval, rng_seed=args.seed,
                              margin_fraction=args.margin)
    else:
        spec = mixed_population_spec(args.players, args.seed, args.margin, args.interval)
    records, truth = generate_population(spec, _catalog(args.zones))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sessions.csv", "w", newline="", encoding="utf-8") as fh:
        write_session_log(records, fh)
    with open(out / "ground_truth.csv", "w", newline="", encoding="utf-8") as fh:
        truth.write(fh)
    print(f"{len(truth)} players, {len(records)} snapshots -> {out}", file=sys.stderr)
    return 0


def cmd_run(args) -> int:
    if args.config:
        cfg = load_config(Path(args.config))
    else:
        cfg = PipelineConfig()
    overrides = {}
    for key in ("log", "zones", "column_map", "thresholds", "interval", "folds", "year",
                "seed", "out"):
        v = getattr(args, key)
        if v is not None:
            overrides[key] = str(v)
    if args.per_year:
        overrides["per_year"] = "true"
    cfg = config_from_mapping(overrides, config=cfg)
    outputs = run_pipeline(cfg)
    print((Path(cfg.out_dir) / "table1.txt").read_text(encoding="utf-8"), end="")
    print(f"outputs written to {cfg.out_dir} ({len(outputs)} entries)", file=sys.stderr)
    return 0


# -- parser ----------------------------------------------------------------


def _add_ingest_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("log", help="session snapshot log")
    p.add_argument("--column-map", help="key = column index file")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--header", action="store_true", help="first line is a header")
    p.add_argument("--time-format", default="%Y-%m-%d %H:%M")


def _add_tree_opts(p: argparse.ArgumentParser) -> None:
    d = TrainParams()
    p.add_argument("--min-leaf", type=int, default=d.min_leaf)
    p.add_argument("--min-gain", type=float, default=d.min_gain)
    p.add_argument("--max-depth", type=int, default=d.max_depth)
    p.add_argument("--confidence", type=float, default=d.confidence)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wowbehavior", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and validate a log, print stats")
    _add_ingest_opts(p)
    p.add_argument("--year", type=int)
    p.add_argument("--canonical", help="write accepted records as a 7-column log")
    p.set_defaults(func=cmd_ingest)

    z = sub.add_parser("zones", help="zone catalog tools")
    zsub = z.add_subparsers(dest="zones_command", required=True)
    p = zsub.add_parser("validate", help="report entries, duplicates and rejected rows")
    p.add_argument("catalog", nargs="?", help="catalog file (default: bundled)")
    p.set_defaults(func=cmd_zones_validate)

    p = sub.add_parser("featurize", help="build per-player profiles")
    _add_ingest_opts(p)
    p.add_argument("--year", type=int)
    p.add_argument("--zones")
    p.add_argument("--interval", type=int, default=10, help="minutes between snapshots")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("label", help="apply the seed rules to a profile file")
    p.add_argument("profiles")
    p.add_argument("--thresholds")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("train", help="self-train from seed labels")
    p.add_argument("profiles")
    p.add_argument("labels")
    p.add_argument("--threshold", type=float, default=0.95)
    p.add_argument("--max-iterations", type=int, default=20)
    p.add_argument("--out", required=True)
    _add_tree_opts(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="stratified k-fold cross-validation")
    p.add_argument("profiles")
    p.add_argument("labels")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--title", default="all")
    p.add_argument("--json")
    _add_tree_opts(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare-attrs", help="tree size with and without attributes")
    p.add_argument("profiles")
    p.add_argument("labels")
    p.add_argument("--features", help="comma list (default: all profile features)")
    p.add_argument("--drop", default="level_speed")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    _add_tree_opts(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="generate a synthetic population")
    p.add_argument("--players", type=int, default=1000)
    p.add_argument("--counts", help="e.g. Killer=100,Explorer=20 (overrides --players)")
    p.add_argument("--margin", type=float, default=0.7)
    p.add_argument("--interval", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zones")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="full pipeline")
    p.add_argument("--config")
    p.add_argument("--log")
    p.add_argument("--zones")
    p.add_argument("--column-map")
    p.add_argument("--thresholds")
    p.add_argument("--interval", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--year", type=int)
    p.add_argument("--per-year", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        stage = args.command if args.command != "zones" else "zones validate"
        print(f"error [{stage}] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
