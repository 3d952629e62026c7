"""Exception types shared across the package."""


class MineaErgoError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(MineaErgoError, ValueError):
    """A parameter lies outside its documented domain."""


class InvalidStateError(MineaErgoError, ValueError):
    """A state vector contains non-finite entries or has the wrong shape."""


class BlowUpError(MineaErgoError, RuntimeError):
    """The numerical state left the admissible region (non-finite or too large).

    ``time``, ``step`` and ``trajectory_index`` are filled in by the driver
    that detected the blow-up, so callers can report where it happened
    instead of propagating NaNs.
    """

    def __init__(self, message, *, time=None, step=None, trajectory_index=None):
        super().__init__(message)
        self.time = time
        self.step = step
        self.trajectory_index = trajectory_index

    def annotated(self, *, time=None, step=None, trajectory_index=None):
        """Copy of this error with location fields filled in."""
        err = BlowUpError(
            str(self),
            time=self.time if time is None else time,
            step=self.step if step is None else step,
            trajectory_index=(
                self.trajectory_index if trajectory_index is None else trajectory_index
            ),
        )
        return err


class ConfigError(MineaErgoError, ValueError):
    """Invalid or malformed experiment configuration."""
