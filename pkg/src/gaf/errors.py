"""Exception hierarchy shared by all gaf modules."""


class GafError(Exception):
    """Base class for every error raised by this package."""


class DegenerateGrid(GafError, ValueError):
    pass


class GridMismatch(GafError, ValueError):
    pass


class ParseError(GafError, ValueError):
    """Raised by the expression parser.

    ``offset`` is the byte offset of the offending token and ``expected`` the
    set of token kinds that would have been accepted there.
    """

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f"{message} at offset {offset}"
        if self.expected:
            detail += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(detail)


class DivisionByZero(GafError, ZeroDivisionError):
    def __init__(self, point):
        self.point = point
        super().__init__(f"division by zero at z = {point!r}")


class UnboundParameter(GafError, KeyError):
    def __init__(self, name):
        self.name = name
        super().__init__(name)

    def __str__(self):
        return f"unbound parameter {self.name!r}"


class NotHolomorphic(GafError, ValueError):
    pass


class AllocationLimit(GafError, MemoryError):
    pass


class NonContraction(GafError, ArithmeticError):
    pass


class SeedNotHolomorphic(GafError, ValueError):
    pass


class NotExact(GafError, ValueError):
    pass


class NotASolution(GafError, ValueError):
    pass


class SingularKernel(GafError, ArithmeticError):
    pass


class CriticalPoint(GafError, ValueError):
    pass


class BranchConflict(GafError, ValueError):
    pass


class BranchMismatch(GafError, ValueError):
    pass


class OutOfDomain(GafError, ValueError):
    pass


class UnsupportedWeight(GafError, ValueError):
    pass


class ConfigError(GafError, ValueError):
    """Bad scenario configuration; ``path`` names the offending key."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class IoError(GafError, OSError):
    pass
