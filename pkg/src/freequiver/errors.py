"""Exception types shared across the package."""


class FreeQuiverError(Exception):
    """Base class for errors raised by this package."""


class TypecheckError(FreeQuiverError):
    """An expression or map definition violates endpoint typing.

    Carries the offending node (rendered) so error messages can point at it.
    """

    def __init__(self, message: str, node=None):
        super().__init__(message)
        self.node = node


class RegularityError(FreeQuiverError):
    """An inverse node (or required matrix inverse) is not invertible at the
    evaluation point, i.e. the point lies outside the regularity domain.

    Attributes:
        node: rendered form of the offending inverse node, when known.
        entry: name of the map entry (target arc) being evaluated, when known.
    """

    def __init__(self, message: str, node: str | None = None, entry: str | None = None):
        super().__init__(message)
        self.node = node
        self.entry = entry


class BlockMismatchError(FreeQuiverError):
    """The diagonal (or lower-left) blocks of a block-triangular evaluation do
    not match their expected values. Signals a non-free evaluation rule or a bug.
    """


class ParseError(FreeQuiverError):
    """A definition file failed to parse or validate; message carries position
    or field context where available."""
