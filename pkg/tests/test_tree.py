from __future__ import annotations

import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wowbehavior.tree import (
    NOMINAL, NUMERIC, Dataset, Feature, TrainParams, TreeNode, best_split, dump_text,
    dumps_json, entropy, grow_tree, information_gain, model_from_dict, pessimistic_prune,
    predict, train_tree,
)
from tree_oracle import oracle_best, oracle_grow, shannon, structure, upper_error_bound

# Phi^-1(0.99) and Phi^-1(0.75), from standard normal tables
Z_001 = 2.3263478740408408
Z_025 = 0.6744897501960817


def dataset(rows, labels, kinds, classes=None):
    feats = [Feature(n, k) for n, k in kinds.items()]
    return Dataset.from_rows(rows, feats, labels, classes=classes)


@pytest.mark.parametrize("counts,h", [([10, 0, 0, 0], 0.0), ([5, 5], 1.0), ([8, 4, 2, 2], 1.75)])
def test_entropy_examples(counts, h):
    assert entropy(counts) == pytest.approx(h, abs=1e-12)


def test_entropy_rejects_empty_counts():
    with pytest.raises(ValueError):
        entropy([0, 0])
    with pytest.raises(ValueError):
        entropy([3, -1])


def test_gain_examples():
    assert information_gain([5, 5], [[5, 0], [0, 5]]) == pytest.approx(1.0)
    assert information_gain([6, 3], [[4, 2], [2, 1]]) == pytest.approx(0.0, abs=1e-12)
    assert information_gain([8, 4], [[6, 0], [2, 4]]) == pytest.approx(0.4591, abs=1e-4)


def test_gain_rejects_non_partition():
    with pytest.raises(ValueError):
        information_gain([5, 5], [[5, 0], [0, 4]])


@given(st.lists(st.integers(0, 30), min_size=2, max_size=5).filter(lambda c: sum(c) > 0),
       st.randoms(use_true_random=False))
def test_gain_matches_shannon(parent, rnd):
    children = [[0] * len(parent) for _ in range(rnd.randint(1, 4))]
    for cls, count in enumerate(parent):
        for _ in range(count):
            children[rnd.randrange(len(children))][cls] += 1
    children = [c for c in children if sum(c)]
    n = sum(parent)
    expected = shannon(parent) - sum(sum(c) / n * shannon(c) for c in children)
    g = information_gain(parent, children)
    assert g == pytest.approx(expected, abs=1e-9)
    assert -1e-12 <= g <= entropy(parent) + 1e-12


def test_pure_examples_do_not_split():
    d = dataset([{"x": float(i)} for i in range(6)], ["a"] * 6, {"x": NUMERIC}, ["a", "b"])
    assert best_split(d, TrainParams()) is None


def test_perfect_binary_attribute():
    rows = [{"x": 0.0, "noise": 1.0}, {"x": 0.0, "noise": 2.0},
            {"x": 1.0, "noise": 1.0}, {"x": 1.0, "noise": 2.0}]
    s = best_split(dataset(rows, ["a", "a", "b", "b"], {"x": NUMERIC, "noise": NUMERIC}),
                   TrainParams())
    assert (s.attribute, s.threshold) == ("x", 0.5)
    assert s.gain == pytest.approx(1.0)


def test_ties_go_to_smaller_name_then_threshold():
    rows = [{"b": float(i), "a": float(i)} for i in range(6)]
    labels = ["x", "x", "y", "y", "x", "x"]
    s = best_split(dataset(rows, labels, {"b": NUMERIC, "a": NUMERIC}), TrainParams(min_gain=0))
    assert s.attribute == "a" and s.threshold == 1.5


def _random_case(rng, n_max=6):
    n = rng.randint(2, n_max)
    kinds = {}
    for name in rng.sample(["a", "b", "c", "d"], 3):
        kinds[name] = rng.choice([NUMERIC, NUMERIC, NOMINAL])
    rows = []
    for _ in range(n):
        rows.append({k: (float(rng.randint(0, 3)) if kind == NUMERIC else rng.choice("pqr"))
                     for k, kind in kinds.items()})
    labels = [rng.choice("xyz") for _ in range(n)]
    return rows, labels, kinds


@settings(max_examples=150)
@given(st.randoms(use_true_random=False), st.sampled_from([1, 2]), st.sampled_from([0.0, 0.1]))
def test_best_split_matches_enumeration(rnd, min_leaf, min_gain):
    rows, labels, kinds = _random_case(rnd)
    got = best_split(dataset(rows, labels, kinds, list("xyz")),
                     TrainParams(min_leaf=min_leaf, min_gain=min_gain))
    want = oracle_best(rows, labels, kinds, min_leaf, min_gain)
    if want is None:
        assert got is None
    else:
        assert (got.attribute, got.threshold) == (want[1], want[2])
        assert got.gain == pytest.approx(want[0], abs=1e-12)


@settings(max_examples=150)
@given(st.randoms(use_true_random=False))
def test_growth_matches_reference(rnd):
    rows, labels, kinds = _random_case(rnd, n_max=8)
    model = grow_tree(dataset(rows, labels, kinds, list("xyz")), TrainParams(min_leaf=1, min_gain=0))
    assert structure(model.root) == oracle_grow(rows, labels, kinds, list("xyz"), 1, 0.0)
    model = grow_tree(dataset(rows, labels, kinds, list("xyz")))
    assert structure(model.root) == oracle_grow(rows, labels, kinds, list("xyz"))


def test_single_label_gives_single_leaf():
    model = train_tree(dataset([{"x": float(i)} for i in range(5)], ["a"] * 5, {"x": NUMERIC}))
    assert model.node_count() == 1


def _peeling_data(n_pairs=22):
    # pair i has its own class and the only non-zero value of attribute f{i};
    # every split can detach just one pair, so growth needs n_pairs - 1 levels
    names = [f"f{i:02d}" for i in range(n_pairs)]
    rows, labels = [], []
    for i in range(n_pairs):
        for _ in range(2):
            rows.append({n: float(n == names[i]) for n in names})
            labels.append(f"c{i:02d}")
    return dataset(rows, labels, {n: NUMERIC for n in names},
                   [f"c{i:02d}" for i in range(n_pairs)])


def test_depth_limit_truncates():
    data = _peeling_data()
    assert grow_tree(data, TrainParams(max_depth=21)).depth() == 21
    model = grow_tree(data)
    assert model.depth() == 20
    deepest = [n for n in model.root.iter_nodes() if n.is_leaf and n.total == 4]
    assert len(deepest) == 1
    # two classes tied 2:2, majority goes to the earlier class
    assert model.classes[deepest[0].majority] == "c20"


def test_nominal_attribute_used_once_per_path():
    rows = [{"k": k, "x": float(x)} for k in "pq" for x in range(4)]
    labels = ["a", "a", "b", "b", "b", "b", "a", "a"]
    model = grow_tree(dataset(rows, labels, {"k": NOMINAL, "x": NUMERIC}), TrainParams(min_leaf=1))
    for node in model.root.iter_nodes():
        if node.attribute == "k":
            assert all(n.attribute != "k" for c in node.children.values() for n in c.iter_nodes())


def test_leaf_is_unchanged_by_pruning():
    leaf = TreeNode(np.array([3, 1]))
    pruned = pessimistic_prune(leaf, 0.01)
    assert pruned.is_leaf and list(pruned.counts) == [3, 1]


def test_agreeing_children_collapse():
    node = TreeNode(np.array([7, 2]), "x", NUMERIC, 0.5, 0.2,
                    {"le": TreeNode(np.array([4, 0])), "gt": TreeNode(np.array([3, 2]))})
    assert pessimistic_prune(node, 0.5).is_leaf


@pytest.mark.parametrize("confidence,z", [(0.01, Z_001), (0.25, Z_025)])
def test_pruning_decision_matches_bound(confidence, z):
    node = TreeNode(np.array([5, 3]), "x", NUMERIC, 0.5, 0.2,
                    {"le": TreeNode(np.array([4, 1])), "gt": TreeNode(np.array([1, 2]))})
    as_leaf = 8 * upper_error_bound(8, 3, z)
    as_tree = 5 * upper_error_bound(5, 1, z) + 3 * upper_error_bound(3, 1, z)
    assert pessimistic_prune(node, confidence).is_leaf == (as_leaf <= as_tree)


def test_pruning_collapses_at_strict_confidence():
    # frozen from the bound: 5.8966 <= 5.9196 collapses, 3.9538 > 3.2993 keeps
    node = TreeNode(np.array([5, 3]), "x", NUMERIC, 0.5, 0.2,
                    {"le": TreeNode(np.array([4, 1])), "gt": TreeNode(np.array([1, 2]))})
    assert pessimistic_prune(node, 0.01).is_leaf
    assert not pessimistic_prune(node, 0.25).is_leaf


def _two_class_model():
    rows = [{"race": r, "x": float(x)} for r in ("Orc", "Troll") for x in range(10)]
    labels = ["a"] * 10 + ["b"] * 10
    return train_tree(dataset(rows, labels, {"race": NOMINAL, "x": NUMERIC}))


def test_single_leaf_prediction():
    model = train_tree(dataset([{"x": 1.0}, {"x": 2.0}, {"x": 3.0}], ["a", "a", "b"],
                               {"x": NUMERIC}))
    assert predict(model, {"x": 99.0}) == ("a", pytest.approx(2 / 3))


def test_pure_leaf_of_ten_is_certain():
    model = _two_class_model()
    assert predict(model, {"race": "Troll", "x": 4.0}) == ("b", 1.0)


def test_unseen_nominal_value_answers_root_majority():
    model = _two_class_model()
    assert model.root.attribute == "race"
    assert predict(model, {"race": "Tauren", "x": 1.0}) == ("a", 0.5)


def test_prediction_needs_matching_schema():
    with pytest.raises(ValueError):
        predict(_two_class_model(), {"x": 1.0})


def test_vectorised_prediction_agrees():
    rng = random.Random(5)
    rows, labels, kinds = _random_case(rng, n_max=8)
    for _ in range(30):
        rows, labels, kinds = _random_case(rng, n_max=8)
        data = dataset(rows, labels, kinds, list("xyz"))
        model = train_tree(data, TrainParams(min_leaf=1, min_gain=0))
        idx, conf = model.predict_dataset(data)
        for i, row in enumerate(rows):
            assert predict(model, row) == (model.classes[idx[i]], conf[i])


def test_json_round_trip_and_text():
    model = _two_class_model()
    back = model_from_dict(json.loads(dumps_json(model)))
    assert structure(back.root) == structure(model.root)
    assert dumps_json(back) == dumps_json(model)
    assert dump_text(model).splitlines()[0].startswith("race = Orc")


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_row_order_does_not_change_the_tree(rnd):
    rows, labels, kinds = _random_case(rnd, n_max=8)
    order = list(range(len(rows)))
    rnd.shuffle(order)
    a = train_tree(dataset(rows, labels, kinds, list("xyz")))
    b = train_tree(dataset([rows[i] for i in order], [labels[i] for i in order], kinds, list("xyz")))
    assert structure(a.root) == structure(b.root)


def test_params_validation():
    for bad in ({"min_leaf": 0}, {"max_depth": 0}, {"confidence": 0.0}, {"confidence": 0.6},
                {"criterion": "gain_ratio"}):
        with pytest.raises(ValueError):
            TrainParams(**bad)
    assert math.isclose(TrainParams().min_gain, 0.1)
