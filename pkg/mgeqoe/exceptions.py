from typing import Optional


class MgeqoeError(Exception):
    pass


class InputError(MgeqoeError):
    """Bad configuration, argument or input file (CLI exit code 2)."""


class NumericalError(MgeqoeError):
    """Failure of a numerical procedure (CLI exit code 3)."""

    def __init__(self, message: str, *, epoch: Optional[float] = None) -> None:
        self.detail = message
        if epoch is not None:
            message = f"{message} (epoch {epoch:.17g})"
        super().__init__(message)
        self.epoch = epoch


class InvalidArgument(InputError, ValueError):
    pass


class ConfigurationError(InputError):
    pass


class UnknownBody(InputError):
    pass


class EphemerisOutOfRange(InputError):
    pass


class GridMismatch(InputError):
    pass


class DegenerateGeometry(NumericalError):
    pass


class NegativeEffectivePotential(NumericalError):
    pass


class SingularOrientation(NumericalError):
    pass


class HyperbolicBranch(NumericalError):
    pass


class InconsistentPotential(NumericalError):
    pass


class ProximityError(NumericalError):
    pass


class GeneralizedEccentricitySingularity(NumericalError):
    pass


class StepSizeError(NumericalError):
    pass


class DegenerateCovariance(NumericalError):
    pass


class InvalidMoments(NumericalError):
    pass


class SamplePropagationError(NumericalError):
    def __init__(
        self, message: str, *, sample_id: int, epoch: Optional[float] = None
    ) -> None:
        super().__init__(f"sample {sample_id}: {message}", epoch=epoch)
        self.sample_id = sample_id
