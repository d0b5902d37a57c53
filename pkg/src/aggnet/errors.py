"""Exception hierarchy shared by every module of the package."""


class AggNetError(Exception):
    """Base class for all errors raised by aggnet."""


class DimensionError(AggNetError, ValueError):
    pass


class NumericError(AggNetError, ArithmeticError):
    pass


class ConfigError(AggNetError, ValueError):
    pass


class FormatError(AggNetError, ValueError):
    """Malformed on-disk file. ``offset`` is the byte position of the fault."""

    def __init__(self, message, offset=None, path=None):
        self.offset = offset
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class SamplingError(AggNetError, ValueError):
    pass


class InitError(AggNetError, ValueError):
    pass


class LossError(AggNetError, ValueError):
    pass


class MetricError(AggNetError, ValueError):
    pass


class TrainingError(AggNetError, RuntimeError):
    pass


class ConflictError(AggNetError, KeyError):
    pass


class NotFoundError(AggNetError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "not found"


class CapabilityError(AggNetError, RuntimeError):
    pass
