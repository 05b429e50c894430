"""Stratified k-fold evaluation and per-behavior precision/recall tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

import numpy as np

from .tree import Dataset, TrainParams, train_tree

NA = "–"  # rendered in place of an undefined precision or recall


@dataclass
class EvaluationReport:
    classes: tuple[Hashable, ...]
    confusion: np.ndarray  # rows = true class, columns = predicted
    fold_accuracies: list[float]
    node_counts: list[int] = field(default_factory=list)

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def accuracy_std(self) -> float:
        # population deviation over folds
        return float(np.std(self.fold_accuracies))

    @property
    def pooled_accuracy(self) -> float:
        return 100.0 * float(np.trace(self.confusion)) / self.n

    def precision(self, cls: Hashable) -> float | None:
        i = self.classes.index(cls)
        col = self.confusion[:, i].sum()
        return None if col == 0 else 100.0 * self.confusion[i, i] / col

    def recall(self, cls: Hashable) -> float | None:
        i = self.classes.index(cls)
        row = self.confusion[i].sum()
        return None if row == 0 else 100.0 * self.confusion[i, i] / row

    @property
    def per_class(self) -> dict[Hashable, tuple[float | None, float | None]]:
        return {c: (self.precision(c), self.recall(c)) for c in self.classes}

    def to_dict(self) -> dict:
        return {
            "classes": [str(c) for c in self.classes],
            "per_class": {str(c): {"precision": p, "recall": r}
                          for c, (p, r) in self.per_class.items()},
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "fold_accuracies": list(self.fold_accuracies),
            "confusion": self.confusion.astype(int).tolist(),
            "fold_node_counts": list(self.node_counts),
        }


def kfold_split(data: Dataset, k: int, rng_seed: int) -> list[np.ndarray]:
    """Stratified folds as arrays of row positions into ``data``.

    Examples are ordered by class and then by a seeded shuffle of their
    sorted ids, and dealt to folds round-robin. Fold membership therefore
    depends on ids and labels only, never on row order.
    """
    if data.y is None:
        raise ValueError("stratified folds need labels")
    if not 2 <= k <= data.n:
        raise ValueError(f"k must be in [2, {data.n}], got {k}")
    rng = np.random.default_rng(rng_seed)
    pos_of = {pid: i for i, pid in enumerate(data.ids)}
    if len(pos_of) != data.n:
        raise ValueError("example ids must be unique")
    sequence: list[int] = []
    for c in range(len(data.classes)):
        members = sorted(data.ids[i] for i in np.nonzero(data.y == c)[0])
        order = rng.permutation(len(members))
        sequence.extend(pos_of[members[j]] for j in order)
    folds: list[list[int]] = [[] for _ in range(k)]
    for j, pos in enumerate(sequence):
        folds[j % k].append(pos)
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def cross_validate(data: Dataset, k: int = 5, tree_params: TrainParams = TrainParams(),
                   rng_seed: int = 0) -> EvaluationReport:
    """Train on k-1 folds, test on the held-out fold, pool the confusion matrix."""
    folds = kfold_split(data, k, rng_seed)
    n_classes = len(data.classes)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    accs: list[float] = []
    nodes: list[int] = []
    everything = np.arange(data.n)
    for test_idx in folds:
        train_mask = np.ones(data.n, dtype=bool)
        train_mask[test_idx] = False
        model = train_tree(data.subset(everything[train_mask]), tree_params)
        test = data.subset(test_idx)
        pred, _ = model.predict_dataset(test)
        np.add.at(confusion, (test.y, pred), 1)
        accs.append(100.0 * float(np.mean(pred == test.y)))
        nodes.append(model.node_count())
    return EvaluationReport(data.classes, confusion, accs, nodes)


@dataclass
class VariantResult:
    features: tuple[str, ...]
    node_count: int
    depth: int
    accuracy_mean: float
    accuracy_std: float


@dataclass
class ComparisonReport:
    variants: list[VariantResult]

    def to_dict(self) -> dict:
        return {"variants": [v.__dict__ | {"features": list(v.features)} for v in self.variants]}


def compare_attribute_sets(data: Dataset, with_attrs: Iterable[str], without_attrs: Iterable[str],
                           tree_params: TrainParams = TrainParams(), rng_seed: int = 0,
                           k: int = 5) -> ComparisonReport:
    """Tree size and cross-validated accuracy for two feature subsets.

    The first variant is ``with_attrs``, the second ``without_attrs``.
    """
    variants = []
    for attrs in (tuple(with_attrs), tuple(without_attrs)):
        if not attrs:
            raise ValueError("feature sets must be non-empty")
        sub = data.select_features(attrs)
        model = train_tree(sub, tree_params)
        rep = cross_validate(sub, k, tree_params, rng_seed)
        variants.append(VariantResult(tuple(f.name for f in sub.features), model.node_count(),
                                      model.depth(), rep.accuracy_mean, rep.accuracy_std))
    return ComparisonReport(variants)


# --------------------------------------------------------------------------
# precision/recall table rendering


def format_metric(value: float | None) -> str:
    """Two decimals, with whole numbers printed bare (``100``, ``97.62``)."""
    if value is None:
        return NA
    text = f"{value:.2f}"
    return text[:-3] if text.endswith(".00") else text


def format_cell(precision: float | None, recall: float | None) -> str:
    return f"{format_metric(precision)} / {format_metric(recall)}"


def format_accuracy(mean: float, std: float) -> str:
    return f"{mean:.2f} ± {std:.2f}"


def _row_name(cls: Hashable) -> str:
    return f"{cls}s"


def emit_table1(reports: Mapping[str, EvaluationReport]) -> str:
    """Behaviors as rows, one column per analysis window, accuracy last."""
    if not reports:
        raise ValueError("at least one report is needed")
    columns = list(reports)
    classes = next(iter(reports.values())).classes
    rows: list[list[str]] = [[""] + columns]
    for cls in classes:
        rows.append([_row_name(cls)] + [format_cell(*reports[c].per_class[cls]) for c in columns])
    rows.append(["Accuracy"] + [format_accuracy(reports[c].accuracy_mean, reports[c].accuracy_std)
                                for c in columns])
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    out = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [r[i].center(widths[i]) for i in range(1, len(r))]
        out.append(" | ".join(cells).rstrip())
    return "\n".join(out) + "\n"


def confusion_text(report: EvaluationReport) -> str:
    names = [str(c) for c in report.classes]
    width = max(len(n) for n in names + ["true\\pred"])
    cw = max(width, max(len(str(int(v))) for v in report.confusion.ravel()))
    lines = ["true\\pred".ljust(width) + " " + " ".join(n.rjust(cw) for n in names)]
    for name, row in zip(names, report.confusion):
        lines.append(name.ljust(width) + " " + " ".join(str(int(v)).rjust(cw) for v in row))
    return "\n".join(lines) + "\n"
