"""Exception hierarchy.

Each class carries the process exit code the CLI maps it to.
"""


class GpoError(Exception):
    exit_code = 1


class ValidationError(GpoError, ValueError):
    """Bad shapes, parameters or configuration."""

    exit_code = 2


class ShapeError(ValidationError):
    def __init__(self, op, *shapes, detail=""):
        self.op = op
        self.shapes = shapes
        msg = f"{op}: incompatible shapes {', '.join(str(tuple(s)) for s in shapes)}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NumericalError(GpoError, ArithmeticError):
    """Non-finite values, failed factorizations, unstable iterations."""

    exit_code = 3


class CholeskyError(NumericalError):
    pass


class CflError(NumericalError):
    def __init__(self, msg, suggested_dt):
        self.suggested_dt = suggested_dt
        super().__init__(f"{msg}; try dt <= {suggested_dt:.3e}")


class ContainerError(GpoError, OSError):
    """Malformed or corrupted GPOT file."""

    exit_code = 4

    def __init__(self, msg, path=None, offset=None):
        self.path = path
        self.offset = offset
        parts = [msg]
        if path is not None:
            parts.append(f"file={path}")
        if offset is not None:
            parts.append(f"byte offset={offset}")
        super().__init__("; ".join(parts))


class StaleCacheError(ValidationError):
    pass
