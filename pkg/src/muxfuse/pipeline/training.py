from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from muxfuse.errors import NumericError, TrainingDivergedError
from muxfuse.ndauto import Adam, Tape, Tensor

logger = logging.getLogger(__name__)

# SeedSequence keys of the independent random streams of a run.
STREAM_INIT = 0
STREAM_CORRUPTION = 1
STREAM_NEGATIVES = 2
STREAM_POSITIVES = 3


def stream(seed: int, purpose: int, *keys: int) -> np.random.Generator:
    """Generator for one purpose of one run, independent from every other stream."""
    return np.random.default_rng(np.random.SeedSequence([seed, purpose, *keys]))


@dataclass
class TrainedRun:
    """Frozen outcome of a training pipeline."""
    layer_names: list[str]
    layer_embeddings: list[np.ndarray]
    fused: np.ndarray | None = None
    loss_curve: list[float] = field(default_factory=list)
    wall_time_s: float = 0.0
    config_hash: str = ""
    alpha: dict[str, float] | None = None
    beta: dict[str, float] | None = None
    layer_curves: dict[str, list[float]] = field(default_factory=dict)

    def __post_init__(self):
        self.layer_embeddings = [np.array(z, dtype=np.float64, copy=True) for z in self.layer_embeddings]
        for z in self.layer_embeddings:
            z.setflags(write=False)
        if self.fused is not None:
            self.fused = np.array(self.fused, dtype=np.float64, copy=True)
            self.fused.setflags(write=False)
        if not all(np.isfinite(v) for v in self.loss_curve):
            raise NumericError("Loss curve holds non-finite values")

    def embeddings(self) -> list[Tensor]:
        """Constant tensors over the frozen per-layer embeddings."""
        return [Tensor(z, name=name) for name, z in zip(self.layer_names, self.layer_embeddings)]


@dataclass
class FitResult:
    loss_curve: list[float]
    best_epoch: int
    best_loss: float
    epochs_run: int
    wall_time_s: float


def fit(params: Sequence[Tensor],
        loss_fn: Callable[[int], Tensor],
        epochs: int,
        lr: float,
        patience: int,
        label: str = "model",
        log_every: int = 50,
        weight_decay: float = 0.0) -> FitResult:
    """Full-batch Adam training with early stopping on the training loss.

    The parameters are restored to the values that produced the lowest loss.

    Args:
        params: Trainable tensors; all must be reached by the loss.
        loss_fn: Builds the scalar loss for an epoch (called inside a tape).
        epochs: Maximum number of epochs.
        lr: Adam learning rate.
        patience: Epochs without improvement before stopping.
        label: Name used in log and error messages.
        log_every: Epoch interval of DEBUG loss messages.
        weight_decay: Coupled L2 penalty passed to Adam.

    Raises:
        TrainingDivergedError: The loss or an intermediate value became non-finite.
    """
    params = list(params)
    optimizer = Adam(params, lr=lr, weight_decay=weight_decay)
    start = time.perf_counter()
    curve: list[float] = []
    best_loss = np.inf
    best_epoch = 0
    best_values = [p.values.copy() for p in params]
    waited = 0

    for epoch in range(epochs):
        try:
            with Tape() as tape:
                loss = loss_fn(epoch)
                tape.backward(loss)
        except TrainingDivergedError:
            raise
        except NumericError as e:
            logger.error(f"{label} diverged at epoch {epoch}: {e}")
            raise TrainingDivergedError(f"{label} diverged at epoch {epoch}: {e}", epoch) from e

        value = loss.item()
        curve.append(value)
        if value < best_loss:
            best_loss, best_epoch, waited = value, epoch, 0
            best_values = [p.values.copy() for p in params]
        else:
            waited += 1
        if epoch % log_every == 0:
            logger.debug(f"{label} epoch {epoch}: loss {value:.6f}")
        if waited >= patience:
            logger.debug(f"{label} early stop at epoch {epoch}; best loss {best_loss:.6f} at epoch {best_epoch}")
            break
        optimizer.step()

    for p, values in zip(params, best_values):
        p.values = values
        p.grad = None
    return FitResult(loss_curve=curve,
                     best_epoch=best_epoch,
                     best_loss=float(best_loss),
                     epochs_run=len(curve),
                     wall_time_s=time.perf_counter() - start)
