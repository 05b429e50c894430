"""Decision-tree learner: information-gain splits and pessimistic pruning.

Numeric attributes split in two at midpoints between consecutive distinct
values (``x <= threshold`` goes left); nominal attributes split one branch
per observed value and are tested at most once on any path. Every choice
is tie-broken deterministically so that training on a permuted copy of a
dataset gives the same tree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np

NUMERIC = "numeric"
NOMINAL = "nominal"

# Gains closer than this count as ties; ties go to the smaller attribute
# name, then the smaller threshold.
GAIN_TIE_EPS = 1e-9


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str = NUMERIC

    def __post_init__(self) -> None:
        if self.kind not in (NUMERIC, NOMINAL):
            raise ValueError(f"feature kind must be numeric or nominal, got {self.kind!r}")


@dataclass(frozen=True)
class TrainParams:
    min_leaf: int = 2
    min_gain: float = 0.1
    max_depth: int = 20
    confidence: float = 0.01
    prune: bool = True
    criterion: str = "information_gain"

    def __post_init__(self) -> None:
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0 < self.confidence <= 0.5:
            raise ValueError("confidence must be in (0, 0.5]")
        if self.criterion != "information_gain":
            raise ValueError("only the information_gain criterion is supported")


# --------------------------------------------------------------------------
# entropy and gain


def _xlog2x(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    out = np.zeros_like(c)
    pos = c > 0
    out[pos] = c[pos] * np.log2(c[pos])
    return out


def entropy(class_counts: Sequence[float]) -> float:
    """Shannon entropy in bits of a class-count vector."""
    counts = np.asarray(class_counts, dtype=float)
    if np.any(counts < 0):
        raise ValueError("class counts must be non-negative")
    n = counts.sum()
    if n <= 0:
        raise ValueError("entropy of an empty count vector is undefined")
    p = counts[counts > 0] / n
    return float(max(0.0, -(p * np.log2(p)).sum()))


def information_gain(parent: Sequence[float], children: Iterable[Sequence[float]]) -> float:
    parent_arr = np.asarray(parent, dtype=float)
    kids = [np.asarray(c, dtype=float) for c in children]
    if not kids or any(k.shape != parent_arr.shape for k in kids):
        raise ValueError("children must be count vectors shaped like the parent")
    if not np.allclose(np.sum(kids, axis=0), parent_arr, rtol=0, atol=1e-9):
        raise ValueError("children do not partition the parent")
    n = parent_arr.sum()
    h = entropy(parent_arr)
    rest = sum(k.sum() / n * entropy(k) for k in kids if k.sum() > 0)
    return float(min(h, max(0.0, h - rest)))


# --------------------------------------------------------------------------
# datasets


class Dataset:
    """Column-oriented examples sharing one feature schema.

    ``y`` holds indices into ``classes`` (or is None for unlabeled data);
    ``ids`` are stable example identifiers used for fold assignment.
    """

    def __init__(self, features: Sequence[Feature], columns: Mapping[str, np.ndarray],
                 y: np.ndarray | None, classes: Sequence[Hashable],
                 ids: Sequence[str] | None = None) -> None:
        self.features = tuple(features)
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("duplicate feature names")
        self.classes = tuple(classes)
        self.columns = {}
        n = None
        for f in self.features:
            col = np.asarray(columns[f.name], dtype=float if f.kind == NUMERIC else object)
            if n is None:
                n = len(col)
            elif len(col) != n:
                raise ValueError("columns differ in length")
            self.columns[f.name] = col
        if n is None:
            n = 0 if y is None else len(y)
        self.n = n
        self.y = None if y is None else np.asarray(y, dtype=np.int64)
        if self.y is not None and len(self.y) != n:
            raise ValueError("labels and columns differ in length")
        self.ids = tuple(ids) if ids is not None else tuple(str(i) for i in range(n))
        if len(self.ids) != n:
            raise ValueError("ids and columns differ in length")

    @classmethod
    def from_rows(cls, rows: Sequence[Mapping[str, Any]], features: Sequence[Feature],
                  labels: Sequence[Hashable] | None = None,
                  classes: Sequence[Hashable] | None = None,
                  ids: Sequence[str] | None = None) -> "Dataset":
        features = tuple(features)
        names = {f.name for f in features}
        for r in rows:
            if set(r) != names:
                raise ValueError(f"row schema {sorted(r)} does not match {sorted(names)}")
        cols = {f.name: [r[f.name] for r in rows] for f in features}
        if classes is None:
            if labels is None:
                raise ValueError("classes are required for unlabeled data")
            classes = sorted(set(labels), key=str)
        y = None
        if labels is not None:
            index = {c: i for i, c in enumerate(classes)}
            y = np.array([index[lab] for lab in labels], dtype=np.int64)
        return cls(features, cols, y, classes, ids)

    def __len__(self) -> int:
        return self.n

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def labels(self) -> list[Hashable]:
        if self.y is None:
            raise ValueError("dataset is unlabeled")
        return [self.classes[i] for i in self.y]

    def row(self, i: int) -> dict[str, Any]:
        return {f.name: (float(self.columns[f.name][i]) if f.kind == NUMERIC
                         else self.columns[f.name][i]) for f in self.features}

    def subset(self, idx: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features, {k: v[idx] for k, v in self.columns.items()},
                       None if self.y is None else self.y[idx], self.classes,
                       [self.ids[i] for i in idx])

    def select_features(self, names: Iterable[str]) -> "Dataset":
        names = set(names)
        unknown = names - set(self.feature_names)
        if unknown:
            raise ValueError(f"unknown features: {sorted(unknown)}")
        feats = [f for f in self.features if f.name in names]
        return Dataset(feats, {f.name: self.columns[f.name] for f in feats}, self.y,
                       self.classes, self.ids)

    def with_labels(self, y: Sequence[int] | np.ndarray) -> "Dataset":
        return Dataset(self.features, self.columns, np.asarray(y, dtype=np.int64),
                       self.classes, self.ids)

    def class_counts(self, idx: np.ndarray | None = None) -> np.ndarray:
        y = self.y if idx is None else self.y[idx]
        return np.bincount(y, minlength=len(self.classes)).astype(np.int64)


def concat(a: Dataset, b: Dataset) -> Dataset:
    if a.features != b.features or a.classes != b.classes:
        raise ValueError("datasets have different schemas")
    if (a.y is None) != (b.y is None):
        raise ValueError("cannot mix labeled and unlabeled data")
    cols = {k: np.concatenate([a.columns[k], b.columns[k]]) for k in a.columns}
    y = None if a.y is None else np.concatenate([a.y, b.y])
    return Dataset(a.features, cols, y, a.classes, a.ids + b.ids)


# --------------------------------------------------------------------------
# split search


@dataclass(frozen=True)
class SplitDecision:
    attribute: str
    kind: str
    gain: float
    threshold: float | None = None
    # nominal branch values, sorted
    values: tuple[Any, ...] = ()


def _weighted_child_entropy_sum(counts: np.ndarray) -> np.ndarray:
    """n_child * H(child) per row of a (m, C) count matrix."""
    n = counts.sum(axis=1)
    return _xlog2x(n) - _xlog2x(counts).sum(axis=1)


def _numeric_candidates(col: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int,
                        parent_h: float) -> tuple[np.ndarray, np.ndarray]:
    """(thresholds, gains) of every admissible binary split of one column."""
    n = len(col)
    order = np.argsort(col, kind="stable")
    sv = col[order]
    onehot = np.zeros((n, n_classes), dtype=float)
    onehot[np.arange(n), y[order]] = 1.0
    cum = np.cumsum(onehot, axis=0)
    pos = np.nonzero(sv[:-1] != sv[1:])[0]  # split after sorted position pos
    n_left = pos + 1
    ok = (n_left >= min_leaf) & (n - n_left >= min_leaf)
    pos = pos[ok]
    if len(pos) == 0:
        return np.empty(0), np.empty(0)
    left = cum[pos]
    right = cum[-1] - left
    child = _weighted_child_entropy_sum(left) + _weighted_child_entropy_sum(right)
    gains = parent_h - child / n
    lo, hi = sv[pos], sv[pos + 1]
    thr = (lo + hi) / 2.0
    # a midpoint that rounds onto the upper value would route it left
    thr = np.where(thr >= hi, lo, thr)
    return thr, gains


def _nominal_candidate(col: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int,
                       parent_h: float) -> tuple[float, tuple] | None:
    values, inverse = np.unique(col, return_inverse=True)
    if len(values) < 2:
        return None
    counts = np.zeros((len(values), n_classes), dtype=float)
    np.add.at(counts, (inverse.ravel(), y), 1.0)
    if counts.sum(axis=1).min() < min_leaf:
        return None
    gain = parent_h - _weighted_child_entropy_sum(counts).sum() / len(col)
    return float(gain), tuple(values.tolist())


def best_split(data: Dataset, params: TrainParams, indices: np.ndarray | None = None,
               used_nominal: Iterable[str] = ()) -> SplitDecision | None:
    """Highest-gain admissible split of the selected examples, or None.

    A split is admissible when each child holds at least ``min_leaf``
    examples; the best one is returned only if its gain reaches
    ``min_gain``.
    """
    idx = np.arange(data.n) if indices is None else np.asarray(indices)
    if len(idx) < 2:
        return None
    y = data.y[idx]
    n_classes = len(data.classes)
    parent_counts = np.bincount(y, minlength=n_classes).astype(float)
    parent_h = float(np.log2(len(idx)) - _xlog2x(parent_counts).sum() / len(idx))
    used = set(used_nominal)

    candidates: list[tuple[float, str, float, SplitDecision]] = []
    for feat in sorted(data.features, key=lambda f: f.name):
        col = data.columns[feat.name][idx]
        if feat.kind == NUMERIC:
            thr, gains = _numeric_candidates(col, y, n_classes, params.min_leaf, parent_h)
            if len(gains) == 0:
                continue
            g = gains.max()
            # smallest threshold among this column's near-ties
            j = int(np.nonzero(gains >= g - GAIN_TIE_EPS)[0][0])
            candidates.append((float(gains[j]), feat.name, float(thr[j]),
                               SplitDecision(feat.name, NUMERIC, float(gains[j]), float(thr[j]))))
        elif feat.name not in used:
            res = _nominal_candidate(col, y, n_classes, params.min_leaf, parent_h)
            if res is not None:
                candidates.append((res[0], feat.name, -math.inf,
                                   SplitDecision(feat.name, NOMINAL, res[0], values=res[1])))
    if not candidates:
        return None
    top = max(c[0] for c in candidates)
    best = min((c for c in candidates if c[0] >= top - GAIN_TIE_EPS), key=lambda c: (c[1], c[2]))
    if best[0] < params.min_gain:
        return None
    return best[3]


# --------------------------------------------------------------------------
# tree structure


@dataclass
class TreeNode:
    counts: np.ndarray
    attribute: str | None = None
    kind: str | None = None
    threshold: float | None = None
    gain: float | None = None
    # numeric: {"le": node, "gt": node}; nominal: {value: node}
    children: dict[Any, "TreeNode"] = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return self.attribute is None

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def majority(self) -> int:
        # argmax returns the first maximum: ties go to the earliest class
        return int(np.argmax(self.counts))

    @property
    def purity(self) -> float:
        return float(self.counts.max() / self.counts.sum())

    def iter_nodes(self):
        yield self
        for child in self.children.values():
            yield from child.iter_nodes()

    def leaves(self):
        return [n for n in self.iter_nodes() if n.is_leaf]

    def node_count(self) -> int:
        return sum(1 for _ in self.iter_nodes())

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(c.depth() for c in self.children.values())

    def make_leaf(self) -> "TreeNode":
        return TreeNode(self.counts.copy())


@dataclass
class TreeModel:
    root: TreeNode
    features: tuple[Feature, ...]
    classes: tuple[Hashable, ...]
    params: TrainParams = field(default_factory=TrainParams)

    def node_count(self) -> int:
        return self.root.node_count()

    def depth(self) -> int:
        return self.root.depth()

    def predict(self, x: Mapping[str, Any]) -> tuple[Hashable, float]:
        return predict(self, x)

    def predict_dataset(self, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
        return predict_dataset(self, data)


def grow_tree(data: Dataset, params: TrainParams = TrainParams()) -> TreeModel:
    """Grow an unpruned tree greedily from the root."""
    if data.n == 0:
        raise ValueError("cannot grow a tree from an empty training set")
    if data.y is None:
        raise ValueError("training data must be labeled")
    root = _grow(data, np.arange(data.n), params, 0, frozenset())
    return TreeModel(root, data.features, data.classes, params)


def _grow(data: Dataset, idx: np.ndarray, params: TrainParams, depth: int,
          used_nominal: frozenset[str]) -> TreeNode:
    node = TreeNode(data.class_counts(idx))
    if (np.count_nonzero(node.counts) <= 1 or depth >= params.max_depth
            or len(idx) < 2 * params.min_leaf):
        return node
    split = best_split(data, params, idx, used_nominal)
    if split is None:
        return node
    col = data.columns[split.attribute][idx]
    node.attribute, node.kind, node.gain = split.attribute, split.kind, split.gain
    if split.kind == NUMERIC:
        node.threshold = split.threshold
        mask = col <= split.threshold
        node.children = {
            "le": _grow(data, idx[mask], params, depth + 1, used_nominal),
            "gt": _grow(data, idx[~mask], params, depth + 1, used_nominal),
        }
    else:
        used = used_nominal | {split.attribute}
        node.children = {v: _grow(data, idx[col == v], params, depth + 1, used)
                         for v in split.values}
    return node


# --------------------------------------------------------------------------
# pruning


def pessimistic_error_rate(n: float, errors: float, confidence: float) -> float:
    """Upper confidence bound on a binomial error rate (normal approximation).

    ``confidence`` is the one-sided tail probability; smaller values give a
    larger bound and thus heavier pruning.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    z = NormalDist().inv_cdf(1.0 - confidence)
    f = errors / n
    z2 = z * z
    num = f + z2 / (2 * n) + z * math.sqrt(max(0.0, f / n - f * f / n + z2 / (4 * n * n)))
    return num / (1 + z2 / n)


def pessimistic_errors(counts: np.ndarray, confidence: float) -> float:
    n = float(counts.sum())
    return n * pessimistic_error_rate(n, n - float(counts.max()), confidence)


def pessimistic_prune(tree: TreeModel | TreeNode, confidence: float | None = None):
    """Bottom-up subtree replacement; returns a new tree of the same type.

    A subtree becomes a leaf when every leaf under it predicts the node's
    own majority class, or when the leaf's pessimistic error count does not
    exceed the summed pessimistic errors of the subtree's leaves.
    """
    if isinstance(tree, TreeModel):
        conf = tree.params.confidence if confidence is None else confidence
        return TreeModel(_prune(tree.root, conf), tree.features, tree.classes, tree.params)
    if confidence is None:
        raise ValueError("confidence is required when pruning a bare node")
    return _prune(tree, confidence)


def _prune(node: TreeNode, confidence: float) -> TreeNode:
    if node.is_leaf:
        return node.make_leaf()
    kids = {k: _prune(c, confidence) for k, c in node.children.items()}
    pruned = TreeNode(node.counts.copy(), node.attribute, node.kind, node.threshold,
                      node.gain, kids)
    leaves = pruned.leaves()
    if all(leaf.majority == node.majority for leaf in leaves):
        return node.make_leaf()
    subtree_err = sum(pessimistic_errors(leaf.counts, confidence) for leaf in leaves)
    if pessimistic_errors(node.counts, confidence) <= subtree_err:
        return node.make_leaf()
    return pruned


def train_tree(data: Dataset, params: TrainParams = TrainParams()) -> TreeModel:
    """Grow, then prune unless ``params.prune`` is off."""
    model = grow_tree(data, params)
    return pessimistic_prune(model) if params.prune else model


# --------------------------------------------------------------------------
# prediction


def _route(node: TreeNode, x: Mapping[str, Any]) -> TreeNode:
    while not node.is_leaf:
        v = x[node.attribute]
        if node.kind == NUMERIC:
            node = node.children["le" if float(v) <= node.threshold else "gt"]
        else:
            child = node.children.get(v)
            if child is None:
                return node
            node = child
    return node


def predict(model: TreeModel, x: Mapping[str, Any]) -> tuple[Hashable, float]:
    """Majority label of the reached node and its purity.

    A nominal value never seen at a node stops routing there and answers
    with that node's own majority and purity.
    """
    names = {f.name for f in model.features}
    if set(x) != names:
        raise ValueError(f"feature vector keys {sorted(x)} do not match schema {sorted(names)}")
    node = _route(model.root, x)
    return model.classes[node.majority], node.purity


def predict_dataset(model: TreeModel, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`predict`: (class indices, confidences)."""
    if {f.name for f in data.features} != {f.name for f in model.features}:
        raise ValueError("dataset schema does not match the model")
    labels = np.empty(data.n, dtype=np.int64)
    conf = np.empty(data.n, dtype=float)

    def walk(node: TreeNode, idx: np.ndarray) -> None:
        if len(idx) == 0:
            return
        if node.is_leaf:
            labels[idx] = node.majority
            conf[idx] = node.purity
            return
        col = data.columns[node.attribute][idx]
        if node.kind == NUMERIC:
            mask = col <= node.threshold
            walk(node.children["le"], idx[mask])
            walk(node.children["gt"], idx[~mask])
            return
        seen = np.zeros(len(idx), dtype=bool)
        for v, child in node.children.items():
            m = col == v
            seen |= m
            walk(child, idx[m])
        labels[idx[~seen]] = node.majority
        conf[idx[~seen]] = node.purity

    walk(model.root, np.arange(data.n))
    return labels, conf


# --------------------------------------------------------------------------
# serialisation


def _fmt_counts(node: TreeNode, classes: Sequence[Hashable]) -> str:
    return ", ".join(f"{c}={int(k)}" for c, k in zip(classes, node.counts))


def dump_text(model: TreeModel) -> str:
    """Indented rendering, one test per line, leaves with class counts."""
    lines: list[str] = []
    classes = model.classes

    def leaf_text(node: TreeNode) -> str:
        return f"{classes[node.majority]} {{{_fmt_counts(node, classes)}}}"

    def walk(node: TreeNode, depth: int) -> None:
        pad = "|   " * depth
        if node.is_leaf:
            if depth == 0:
                lines.append(leaf_text(node))
            return
        if node.kind == NUMERIC:
            branches = [(f"{node.attribute} > {node.threshold:.3f}", node.children["gt"]),
                        (f"{node.attribute} <= {node.threshold:.3f}", node.children["le"])]
        else:
            branches = [(f"{node.attribute} = {v}", c) for v, c in node.children.items()]
        for test, child in branches:
            if child.is_leaf:
                lines.append(f"{pad}{test}: {leaf_text(child)}")
            else:
                lines.append(f"{pad}{test}")
                walk(child, depth + 1)

    walk(model.root, 0)
    return "\n".join(lines) + "\n"


def _node_to_dict(node: TreeNode) -> dict:
    d: dict[str, Any] = {"counts": [int(c) for c in node.counts]}
    if not node.is_leaf:
        d.update(attribute=node.attribute, kind=node.kind, gain=node.gain)
        if node.kind == NUMERIC:
            d["threshold"] = node.threshold
            d["le"] = _node_to_dict(node.children["le"])
            d["gt"] = _node_to_dict(node.children["gt"])
        else:
            d["branches"] = [[v, _node_to_dict(c)] for v, c in node.children.items()]
    return d


def _node_from_dict(d: Mapping[str, Any]) -> TreeNode:
    node = TreeNode(np.asarray(d["counts"], dtype=np.int64))
    if "attribute" in d:
        node.attribute, node.kind, node.gain = d["attribute"], d["kind"], d.get("gain")
        if node.kind == NUMERIC:
            node.threshold = float(d["threshold"])
            node.children = {"le": _node_from_dict(d["le"]), "gt": _node_from_dict(d["gt"])}
        else:
            node.children = {v: _node_from_dict(c) for v, c in d["branches"]}
    return node


def model_to_dict(model: TreeModel) -> dict:
    p = model.params
    return {
        "features": [[f.name, f.kind] for f in model.features],
        "classes": [str(c) for c in model.classes],
        "params": {"min_leaf": p.min_leaf, "min_gain": p.min_gain, "max_depth": p.max_depth,
                   "confidence": p.confidence, "prune": p.prune, "criterion": p.criterion},
        "node_count": model.node_count(),
        "depth": model.depth(),
        "root": _node_to_dict(model.root),
    }


def model_from_dict(d: Mapping[str, Any], classes: Sequence[Hashable] | None = None) -> TreeModel:
    """Rebuild a model; ``classes`` restores non-string class objects."""
    stored = tuple(d["classes"])
    if classes is not None:
        if tuple(str(c) for c in classes) != stored:
            raise ValueError("class list does not match the serialised model")
        stored = tuple(classes)
    return TreeModel(_node_from_dict(d["root"]),
                     tuple(Feature(n, k) for n, k in d["features"]),
                     stored, TrainParams(**d["params"]))


def dumps_json(model: TreeModel) -> str:
    return json.dumps(model_to_dict(model), indent=1, sort_keys=True)
