class MuxfuseError(Exception):
    """Root of every error raised by muxfuse."""


class DimensionError(MuxfuseError, ValueError):
    """Operand shapes do not conform."""


class NumericError(MuxfuseError, ArithmeticError):
    """A computation produced or would produce non-finite or invalid values."""


class TrainingDivergedError(NumericError):
    """The training loss became non-finite."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch

    def __reduce__(self):
        # survives the trip back from a grid worker process
        return type(self), (str(self), self.epoch)


class TapeError(MuxfuseError, RuntimeError):
    """Misuse of the autodiff tape."""


class OptimizerError(MuxfuseError, RuntimeError):
    """An optimizer step could not be applied."""


class DatasetError(MuxfuseError, ValueError):
    """A dataset directory is missing files or holds malformed content."""


class SplitError(MuxfuseError, ValueError):
    """A train/val/test split cannot be built or is unusable."""


class InductivityError(MuxfuseError, IndexError):
    """A transductive component was queried for nodes it was not trained on."""


class UnsupportedMethodError(MuxfuseError, ValueError):
    """The requested method id is unknown or out of scope."""
