from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from muxfuse.errors import DimensionError

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class VoteConfig:
    mode: Literal["soft", "hard"] = "soft"


def vote(cfg: VoteConfig, per_layer_probs: Sequence[np.ndarray]) -> np.ndarray:
    """Combines K classifiers' class probabilities into one label per row.

    soft: argmax of the mean probability matrix. hard: each classifier's
    argmax, then the most frequent label. Ties go to the lowest class id.
    """
    if not per_layer_probs:
        raise DimensionError("vote needs at least one probability matrix")
    probs = [np.asarray(p, dtype=np.float64) for p in per_layer_probs]
    shape = probs[0].shape
    if len(shape) != 2 or any(p.shape != shape for p in probs):
        logger.error(f"Inconsistent probability shapes: {[p.shape for p in probs]}")
        raise DimensionError(f"vote: probability matrices differ in shape {[p.shape for p in probs]}")
    for k, p in enumerate(probs):
        if np.abs(p.sum(axis=1) - 1.0).max(initial=0.0) > ROW_SUM_TOLERANCE:
            logger.error(f"Classifier {k} rows do not sum to 1")
            raise ValueError(f"vote: rows of classifier {k} do not sum to 1")

    if cfg.mode == "soft":
        return np.argmax(np.mean(np.stack(probs), axis=0), axis=1)
    if cfg.mode == "hard":
        n, c = shape
        counts = np.zeros((n, c), dtype=np.int64)
        rows = np.arange(n)
        for p in probs:
            counts[rows, np.argmax(p, axis=1)] += 1
        return np.argmax(counts, axis=1)
    raise ValueError(f"Unknown vote mode '{cfg.mode}'")
