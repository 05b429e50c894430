"""Self-training: spread seed labels through confident tree predictions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

from .tree import Dataset, TrainParams, TreeModel, concat, train_tree

log = logging.getLogger(__name__)

SEED, PROPAGATED, RESIDUAL = "seed", "propagated", "residual"


@dataclass(frozen=True)
class SelfTrainParams:
    confidence_threshold: float = 0.95
    max_iterations: int = 20
    tree_params: TrainParams = field(default_factory=TrainParams)

    def __post_init__(self) -> None:
        if not 0 < self.confidence_threshold <= 1:
            raise ValueError("confidence_threshold must be in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class SelfTrainResult:
    model: TreeModel
    final_labels: dict[str, Hashable]
    origin: dict[str, str]
    iterations: int
    residual_unlabeled: int
    progress: list[dict[str, int]]
    degenerate: bool = False

    @property
    def low_confidence(self) -> set[str]:
        return {pid for pid, o in self.origin.items() if o == RESIDUAL}


def self_train(labeled: Dataset, unlabeled: Dataset,
               params: SelfTrainParams = SelfTrainParams()) -> SelfTrainResult:
    """Classic self-training with batch adoption above a confidence threshold.

    Each round trains on the current labeled pool, then moves every
    unlabeled example predicted with confidence >= threshold into the pool.
    Rounds stop when nothing moves, nothing is left, or ``max_iterations``
    is reached. Leftover examples get the final model's prediction and are
    marked ``residual``.
    """
    if labeled.n == 0 or labeled.y is None:
        raise ValueError("self-training needs a non-empty labeled set")
    if unlabeled.n and (unlabeled.features != labeled.features
                        or unlabeled.classes != labeled.classes):
        raise ValueError("labeled and unlabeled data have different schemas")

    classes = labeled.classes
    origin = {pid: SEED for pid in labeled.ids}
    final = {pid: classes[c] for pid, c in zip(labeled.ids, labeled.y)}
    overlap = set(final).intersection(unlabeled.ids)
    if overlap:
        raise ValueError(f"{len(overlap)} ids are both labeled and unlabeled")

    if len(np.unique(labeled.y)) == 1:
        only = int(labeled.y[0])
        model = train_tree(labeled, params.tree_params)
        for pid in unlabeled.ids:
            final[pid] = classes[only]
            origin[pid] = RESIDUAL
        log.warning("single-class seed set: every example labeled %s", classes[only])
        return SelfTrainResult(model, final, origin, 1, unlabeled.n,
                               [{"iteration": 1, "adopted": 0, "remaining": unlabeled.n}],
                               degenerate=True)

    pool = labeled
    rest = unlabeled
    progress: list[dict[str, int]] = []
    iterations = 0
    model = train_tree(pool, params.tree_params)
    stale = False  # model trained before the last adoption
    while True:
        iterations += 1
        if stale:
            model = train_tree(pool, params.tree_params)
            stale = False
        if rest.n == 0:
            progress.append({"iteration": iterations, "adopted": 0, "remaining": 0})
            break
        pred, conf = model.predict_dataset(rest)
        take = conf >= params.confidence_threshold
        adopted = int(take.sum())
        progress.append({"iteration": iterations, "adopted": adopted,
                         "remaining": rest.n - adopted})
        log.info("self-training round %d: adopted %d, %d remaining",
                 iterations, adopted, rest.n - adopted)
        if adopted == 0:
            break
        moved = rest.subset(np.nonzero(take)[0]).with_labels(pred[take])
        for pid, c in zip(moved.ids, moved.y):
            final[pid] = classes[c]
            origin[pid] = PROPAGATED
        pool = concat(pool, moved)
        rest = rest.subset(np.nonzero(~take)[0])
        stale = True
        if iterations >= params.max_iterations:
            break
    if stale:
        model = train_tree(pool, params.tree_params)

    if rest.n:
        pred, _ = model.predict_dataset(rest)
        for pid, c in zip(rest.ids, pred):
            final[pid] = classes[c]
            origin[pid] = RESIDUAL
    return SelfTrainResult(model, final, origin, iterations, rest.n, progress)
