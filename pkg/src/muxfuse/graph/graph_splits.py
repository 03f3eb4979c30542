from __future__ import annotations

import logging
import math

import numpy as np

from muxfuse.errors import SplitError
from muxfuse.graph.types import MultiplexGraph, Split

logger = logging.getLogger(__name__)

DEFAULT_RATIOS: tuple[float, float, float] = (0.1, 0.1, 0.8)
MIN_CLASS_SIZE = 3


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def make_splits(g: MultiplexGraph,
                ratios: tuple[float, float, float] = DEFAULT_RATIOS,
                seed: int = 0) -> Split:
    """Draws a class-stratified train/val/test split of the labeled nodes.

    Per class, the train and val counts are the rounded ratio shares (train
    at least one node); test takes the remainder.

    Args:
        g: Graph with labels.
        ratios: (train, val, test) fractions summing to 1.
        seed: Split seed.

    Returns:
        Split with sorted index arrays.
    """
    if g.labels is None:
        logger.error(f"Graph '{g.name}' has no labels to split")
        raise SplitError(f"Graph '{g.name}' has no labels")
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        logger.error(f"Invalid split ratios {ratios}")
        raise SplitError(f"Split ratios must be three non-negative fractions summing to 1, got {ratios}")

    rng = np.random.default_rng(seed)
    train: list[np.ndarray] = []
    val: list[np.ndarray] = []
    test: list[np.ndarray] = []
    classes, counts = np.unique(g.labels[g.labels >= 0], return_counts=True)
    for cls, count in zip(classes.tolist(), counts.tolist()):
        if count < MIN_CLASS_SIZE:
            logger.error(f"Class {cls} has {count} labeled nodes")
            raise SplitError(f"Class {cls} has only {count} labeled nodes; at least {MIN_CLASS_SIZE} are needed to stratify")
        members = rng.permutation(np.flatnonzero(g.labels == cls))
        n_train = max(1, _round_half_up(ratios[0] * count))
        n_val = min(_round_half_up(ratios[1] * count), count - n_train)
        train.append(members[:n_train])
        val.append(members[n_train:n_train + n_val])
        test.append(members[n_train + n_val:])

    split = Split(train=np.sort(np.concatenate(train)),
                  val=np.sort(np.concatenate(val)),
                  test=np.sort(np.concatenate(test)),
                  seed=seed)
    if split.val.size == 0 or split.test.size == 0:
        logger.error(f"Split ratios {ratios} leave val or test empty")
        raise SplitError("empty evaluation split")
    logger.debug(f"Split '{g.name}' seed={seed}: {split.train.size}/{split.val.size}/{split.test.size}")
    return split


def resolve_split(g: MultiplexGraph,
                  ratios: tuple[float, float, float] = DEFAULT_RATIOS,
                  seed: int = 0) -> Split:
    """Uses the dataset's explicit split when it ships one, otherwise draws one."""
    if g.splits is not None:
        logger.info(f"Using the explicit split shipped with '{g.name}'")
        return g.splits
    return make_splits(g, ratios, seed)
