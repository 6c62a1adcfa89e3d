"""Exception types shared across the engines."""


class WicklabError(Exception):
    """Base class for all library errors."""


class ExprSyntaxError(WicklabError):
    """Malformed expression text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ArityError(ExprSyntaxError):
    pass


class NonFiniteValueError(WicklabError):
    """An expression produced inf/nan at a grid point."""

    def __init__(self, index: tuple[int, ...], value: float):
        self.index = index
        self.value = value
        super().__init__(f"non-finite value {value!r} at grid index {index}")


class GridMismatchError(WicklabError, ValueError):
    """Grid functions (or sign vectors) of incompatible sizes were combined."""


class CapacityError(WicklabError):
    """A configured enumeration or oracle cap would be exceeded."""
