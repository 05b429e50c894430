"""End-to-end run: ingest, window, profile, seed, self-train, evaluate, report."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import shutil
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Mapping

from .evaluation import EvaluationReport, confusion_text, cross_validate, emit_table1
from .features import profiles_dataset
from .ingest import (DEFAULT_TIME_FORMAT, ColumnMap, IngestStats, SessionRecord,
                     filter_window, parse_session_log, read_key_values, year_window)
from .labels import LABELS, SeedLabeling, SeedThresholds, seed_dataset, write_labels
from .profiles import (DEFAULT_INTERVAL_MINUTES, PlayerProfile, build_profiles, detect_gm,
                       window_days, write_profiles)
from .selftrain import SelfTrainParams, SelfTrainResult, self_train
from .tree import TrainParams, dump_text, dumps_json, train_tree
from .zones import ZoneCatalog, default_catalog, load_zone_catalog

log = logging.getLogger(__name__)

COMBINED = "all"


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class PipelineConfig:
    log_path: Path | None = None
    out_dir: Path = Path("out")
    zones_path: Path | None = None
    column_map_path: Path | None = None
    thresholds_path: Path | None = None
    delimiter: str = ","
    has_header: bool = False
    time_format: str = DEFAULT_TIME_FORMAT
    interval_minutes: int = DEFAULT_INTERVAL_MINUTES
    year: int | None = None
    per_year: bool = False
    window_start: datetime | None = None
    window_end: datetime | None = None
    folds: int = 5
    rng_seed: int = 0
    evaluate_on: str = "propagated"  # or "seed"
    tree_params: TrainParams = field(default_factory=TrainParams)
    self_train_params: SelfTrainParams = field(default_factory=SelfTrainParams)

    def validate(self) -> None:
        if self.log_path is None:
            raise StageError("config", "no input log given")
        for name in ("log_path", "zones_path", "column_map_path", "thresholds_path"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise StageError("config", f"{name} {p} does not exist")
        if self.evaluate_on not in ("propagated", "seed"):
            raise StageError("config", "evaluate_on must be 'propagated' or 'seed'")
        if self.folds < 2:
            raise StageError("config", "folds must be >= 2")
        if self.interval_minutes <= 0:
            raise StageError("config", "interval_minutes must be positive")
        if (self.window_start is None) != (self.window_end is None):
            raise StageError("config", "window needs both start and end")

    def echo(self) -> dict[str, Any]:
        """JSON-ready view; paths are reported by file name only."""
        out: dict[str, Any] = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name == "out_dir":
                continue
            if isinstance(v, Path):
                v = v.name
            elif isinstance(v, datetime):
                v = v.strftime(DEFAULT_TIME_FORMAT)
            elif dataclasses.is_dataclass(v):
                v = json.loads(json.dumps(dataclasses.asdict(v), default=str))
            out[f.name] = v
        return out

    def config_hash(self, extra: Mapping[str, Any] | None = None) -> str:
        payload = {"config": self.echo(), **(extra or {})}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_INT_KEYS = {"interval_minutes", "year", "folds", "rng_seed"}
_PATH_KEYS = {"log_path", "out_dir", "zones_path", "column_map_path", "thresholds_path"}
_TREE_KEYS = {"min_leaf": int, "min_gain": float, "max_depth": int, "confidence": float}
_ST_KEYS = {"confidence_threshold": float, "max_iterations": int}
_ALIASES = {"log": "log_path", "out": "out_dir", "zones": "zones_path",
            "column_map": "column_map_path", "thresholds": "thresholds_path",
            "seed": "rng_seed", "interval": "interval_minutes", "header": "has_header"}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def config_from_mapping(values: Mapping[str, str], base_dir: Path | None = None,
                        config: PipelineConfig | None = None) -> PipelineConfig:
    """Apply ``key = value`` settings; relative paths resolve against ``base_dir``."""
    cfg = config or PipelineConfig()
    tree_kw = dataclasses.asdict(cfg.tree_params)
    st_kw = {"confidence_threshold": cfg.self_train_params.confidence_threshold,
             "max_iterations": cfg.self_train_params.max_iterations}
    for raw_key, raw in values.items():
        key = _ALIASES.get(raw_key, raw_key)
        if key in _PATH_KEYS:
            p = Path(raw)
            if base_dir is not None and not p.is_absolute():
                p = base_dir / p
            setattr(cfg, key, p)
        elif key in _INT_KEYS:
            setattr(cfg, key, int(raw))
        elif key in ("per_year", "has_header"):
            setattr(cfg, key, _parse_bool(raw))
        elif key in ("window_start", "window_end"):
            setattr(cfg, key, datetime.strptime(raw.strip(), DEFAULT_TIME_FORMAT))
        elif key in ("delimiter", "time_format", "evaluate_on"):
            setattr(cfg, key, "\t" if raw == "\\t" else raw)
        elif key in _TREE_KEYS:
            tree_kw[key] = _TREE_KEYS[key](raw)
        elif key == "prune":
            tree_kw["prune"] = _parse_bool(raw)
        elif key in _ST_KEYS:
            st_kw[key] = _ST_KEYS[key](raw)
        else:
            raise StageError("config", f"unknown config key {raw_key!r}")
    cfg.tree_params = TrainParams(**tree_kw)
    cfg.self_train_params = SelfTrainParams(tree_params=cfg.tree_params, **st_kw)
    return cfg


def load_config(path: Path) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        values = read_key_values(fh)
    return config_from_mapping(values, base_dir=Path(path).parent)


# --------------------------------------------------------------------------
# per-window analysis


@dataclass
class WindowResult:
    name: str
    records: int
    days: int
    profiles: list[PlayerProfile]
    gms: list[str]
    seeds: SeedLabeling
    training: SelfTrainResult
    report: EvaluationReport
    tree_text: str
    tree_json: str

    def summary(self) -> dict[str, Any]:
        return {
            "records": self.records,
            "days": self.days,
            "players": len(self.profiles),
            "gms": len(self.gms),
            "seed_coverage": self.seeds.coverage,
            "seed_conflicts": self.seeds.conflicts,
            "seed_counts": self.seeds.counts(),
            "self_train_iterations": self.training.iterations,
            "residual_unlabeled": self.training.residual_unlabeled,
            "degenerate": self.training.degenerate,
            "accuracy_mean": self.report.accuracy_mean,
            "accuracy_std": self.report.accuracy_std,
        }


def analyse_window(name: str, records: list[SessionRecord], catalog: ZoneCatalog,
                   cfg: PipelineConfig, thresholds: SeedThresholds) -> WindowResult:
    if not records:
        raise StageError("window", f"window {name!r} holds no records")
    profiles = build_profiles(records, catalog, cfg.interval_minutes)
    days = window_days(records)
    gms = [p.player_id for p in profiles if detect_gm(p, days)]
    gm_set = set(gms)
    players = [p for p in profiles if p.player_id not in gm_set]

    seeds = seed_dataset(players, thresholds)
    labeled = [p for p in players if seeds.assignments[p.player_id] is not None]
    unlabeled = [p for p in players if seeds.assignments[p.player_id] is None]
    if not labeled:
        raise StageError("label", f"window {name!r}: no player matched any seed rule")
    try:
        training = self_train(profiles_dataset(labeled, seeds.assignments),
                              profiles_dataset(unlabeled), cfg.self_train_params)
    except ValueError as exc:
        raise StageError("self_train", f"window {name!r}: {exc}") from exc

    if cfg.evaluate_on == "seed":
        eval_players, eval_labels = labeled, seeds.assignments
    else:
        eval_players, eval_labels = players, training.final_labels
    data = profiles_dataset(eval_players, eval_labels)
    if data.n < cfg.folds:
        raise StageError("evaluate", f"window {name!r}: {data.n} examples for {cfg.folds} folds")
    report = cross_validate(data, cfg.folds, cfg.tree_params, cfg.rng_seed)
    model = train_tree(data, cfg.tree_params)
    return WindowResult(name, len(records), days, profiles, gms, seeds, training, report,
                        dump_text(model), dumps_json(model))


# --------------------------------------------------------------------------
# output files


def _csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _behavior_of(res: WindowResult) -> dict[str, str]:
    gm = set(res.gms)
    out = {}
    for p in res.profiles:
        out[p.player_id] = "GM" if p.player_id in gm else str(res.training.final_labels[p.player_id])
    return out


def write_window(res: WindowResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "profiles.csv", "w", newline="", encoding="utf-8") as fh:
        write_profiles(res.profiles, fh)
    with open(out / "seed_labels.csv", "w", newline="", encoding="utf-8") as fh:
        write_labels(res.seeds.assignments, fh)
    with open(out / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        write_labels(res.training.final_labels, fh,
                     extra={pid: [o] for pid, o in res.training.origin.items()},
                     extra_header=["origin"])
    _csv(out / "self_training.csv", ["iteration", "adopted", "remaining"],
         ([r["iteration"], r["adopted"], r["remaining"]] for r in res.training.progress))
    by_id = {p.player_id: p for p in res.profiles}
    _csv(out / "gms.csv", ["player_id", "final_level", "playtime_hours", "hours_per_day"],
         ([g, by_id[g].final_level, f"{by_id[g].playtime_hours:.2f}",
           f"{by_id[g].playtime_hours / res.days:.2f}"] for g in res.gms))

    behavior = _behavior_of(res)
    scatter = {
        "scatter_final_level.csv": ("final_level", "evolution"),
        "scatter_evolution.csv": ("evolution", "evolution"),
        "scatter_zones_visited.csv": ("zones_visited", "final_level"),
    }
    for fname, (value, colour) in scatter.items():
        _csv(out / fname, ["player_id", "behavior", value, f"colour_{colour}"],
             ([p.player_id, behavior[p.player_id], getattr(p, value), getattr(p, colour)]
              for p in res.profiles))

    behaviors = [str(lab) for lab in LABELS] + ["GM"]
    for attr, fname in (("race", "distribution_race.csv"),
                        ("player_class", "distribution_class.csv")):
        counts = Counter((getattr(p, attr), behavior[p.player_id]) for p in res.profiles)
        keys = sorted({k for k, _ in counts})
        _csv(out / fname, [attr.replace("player_", ""), *behaviors, "total"],
             ([k, *(counts[(k, b)] for b in behaviors), sum(counts[(k, b)] for b in behaviors)]
              for k in keys))
    totals = Counter(behavior.values())
    _csv(out / "distribution_behavior.csv", ["behavior", "players"],
         ([b, totals.get(b, 0)] for b in behaviors))

    (out / "confusion.txt").write_text(confusion_text(res.report), encoding="utf-8")
    (out / "evaluation.json").write_text(
        json.dumps(res.report.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (out / "tree.txt").write_text(res.tree_text, encoding="utf-8")
    (out / "tree.json").write_text(res.tree_json + "\n", encoding="utf-8")
    (out / "table1.txt").write_text(emit_table1({res.name: res.report}), encoding="utf-8")


def _windows(records: list[SessionRecord], cfg: PipelineConfig) -> list[tuple[str, list]]:
    if cfg.year is not None:
        return [(str(cfg.year), filter_window(records, year_window(cfg.year)))]
    if cfg.window_start is not None:
        return [(COMBINED, filter_window(records, (cfg.window_start, cfg.window_end)))]
    if cfg.per_year:
        years = sorted({r.timestamp.year for r in records})
        out = [(str(y), filter_window(records, year_window(y))) for y in years]
        if len(years) > 1:
            out.append((COMBINED, records))
        return out
    return [(COMBINED, records)]


def _column_title(name: str, records: list[SessionRecord]) -> str:
    if name != COMBINED or not records:
        return name
    lo = min(r.timestamp for r in records).year
    hi = max(r.timestamp for r in records).year
    return str(lo) if lo == hi else f"{lo}-{hi}"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(cfg: PipelineConfig) -> dict[str, Path]:
    """Run every stage and write the report directory atomically.

    Results go to a sibling ``.partial`` directory that replaces
    ``cfg.out_dir`` only after every stage succeeded; on failure it is
    removed.
    """
    cfg.validate()
    out = Path(cfg.out_dir)
    if out.exists() and any(out.iterdir()) and not (out / "manifest.json").exists():
        raise StageError("config", f"{out} exists and is not a previous run directory")
    partial = out.with_name(out.name + ".partial")
    if partial.exists():
        shutil.rmtree(partial)
    partial.mkdir(parents=True)
    try:
        outputs = _run(cfg, partial)
    except StageError:
        shutil.rmtree(partial, ignore_errors=True)
        raise
    except Exception as exc:
        shutil.rmtree(partial, ignore_errors=True)
        raise StageError("pipeline", f"{type(exc).__name__}: {exc}") from exc
    if out.exists():
        shutil.rmtree(out)
    partial.rename(out)
    return {k: out / v.relative_to(partial) for k, v in outputs.items()}


def _run(cfg: PipelineConfig, out: Path) -> dict[str, Path]:
    try:
        catalog = _load_catalog(cfg.zones_path)
        thresholds = SeedThresholds()
        if cfg.thresholds_path is not None:
            with open(cfg.thresholds_path, encoding="utf-8") as fh:
                thresholds = SeedThresholds.read(fh)
        column_map = ColumnMap.identity()
        if cfg.column_map_path is not None:
            with open(cfg.column_map_path, encoding="utf-8") as fh:
                column_map = ColumnMap.read(fh)
    except (OSError, ValueError) as exc:
        raise StageError("config", str(exc)) from exc

    try:
        with open(cfg.log_path, encoding="utf-8", newline="") as fh:
            records, stats = parse_session_log(fh, column_map, delimiter=cfg.delimiter,
                                               has_header=cfg.has_header,
                                               time_format=cfg.time_format)
    except (OSError, UnicodeDecodeError) as exc:
        raise StageError("ingest", f"cannot read {cfg.log_path}: {exc}") from exc
    if not records:
        raise StageError("ingest", f"no valid records in {cfg.log_path}")

    outputs: dict[str, Path] = {}
    reports: dict[str, EvaluationReport] = {}
    summaries: dict[str, Any] = {}
    for name, recs in _windows(records, cfg):
        catalog.reset_counters()
        res = analyse_window(name, recs, catalog, cfg, thresholds)
        write_window(res, out / name)
        outputs[f"{name}/"] = out / name
        reports[_column_title(name, recs)] = res.report
        summary = res.summary()
        summary["unknown_zone_hits"] = catalog.unknown_hits
        summaries[name] = summary

    (out / "table1.txt").write_text(emit_table1(reports), encoding="utf-8")
    (out / "ingest.json").write_text(json.dumps(_ingest_dict(stats), indent=1, sort_keys=True)
                                     + "\n", encoding="utf-8")
    outputs["table1"] = out / "table1.txt"
    outputs["ingest"] = out / "ingest.json"

    files = sorted(p for p in out.rglob("*") if p.is_file())
    manifest = {
        "rng_seed": cfg.rng_seed,
        "config": cfg.echo(),
        "config_hash": cfg.config_hash({"thresholds": thresholds.as_dict(),
                                        "zones": len(catalog)}),
        "thresholds": thresholds.as_dict(),
        "zone_catalog_entries": len(catalog),
        "windows": summaries,
        "files": {str(p.relative_to(out)): _sha256(p) for p in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                       encoding="utf-8")
    outputs["manifest"] = out / "manifest.json"
    return outputs


def _ingest_dict(stats: IngestStats) -> dict[str, Any]:
    d = stats.as_dict()
    d["rejected_lines"] = [[n, r] for n, r in stats.rejected_lines[:1000]]
    return d


def _load_catalog(path: Path | None) -> ZoneCatalog:
    if path is None:
        return default_catalog()
    with open(path, encoding="utf-8") as fh:
        return load_zone_catalog(fh)
