"""Exception hierarchy shared by every module of the package."""


class GcrError(Exception):
    """Base class. ``category`` is the machine-parseable name used by the CLI."""

    exit_code = 3

    @property
    def category(self):
        return type(self).__name__

    def add_context(self, text):
        """Prefix ``text`` (e.g. "epoch 3 step 12") to the message; returns self."""
        self.context = [text] + getattr(self, "context", [])
        return self

    def __str__(self):
        return ": ".join(getattr(self, "context", []) + [super().__str__()])


class DimensionError(GcrError, ValueError):
    exit_code = 2


class RankDeficient(GcrError, ArithmeticError):
    pass


class ConvergenceError(GcrError, ArithmeticError):
    pass


class TangencyError(GcrError, ValueError):
    pass


class DegenerateFeature(GcrError, ArithmeticError):
    pass


class EmptyClass(GcrError, ValueError):
    exit_code = 2


class InvalidSpec(GcrError, ValueError):
    exit_code = 2


class CorruptContainer(GcrError, ValueError):
    exit_code = 2


class VersionMismatch(CorruptContainer):
    pass


class BlockError(GcrError):
    """Wraps a failure inside one class block of a product parameter."""

    def __init__(self, index, cause):
        super().__init__(f"class block {index}: {cause}")
        self.index = index
        self.cause = cause

    @property
    def category(self):
        return self.cause.category if isinstance(self.cause, GcrError) else "NumericError"
