"""Exception types shared across the package."""


class HrgcError(Exception):
    """Base class for all library errors."""


class UnsupportedQ(HrgcError):
    """q is not a supported prime power (must be one of 2,3,4,5,7,8,9,11,13,16)."""


class DivisionByZero(HrgcError, ZeroDivisionError):
    pass


class InvalidM(HrgcError):
    """Code degree parameter m below the minimum q^2 - 1."""


class InvalidAlpha(HrgcError):
    pass


class InvalidK(HrgcError):
    pass


class InvalidParams(HrgcError):
    pass


class DeltaSearchFailed(HrgcError):
    """No coefficient diagonal passing the operational checks within the draw budget."""


class IndexOutOfRange(HrgcError, IndexError):
    pass


class LengthMismatch(HrgcError):
    pass


class NotEnoughHelpers(HrgcError):
    pass


class SingularSystem(HrgcError):
    """A linear system that the construction promises to be regular was singular."""


class LambdaCollision(HrgcError):
    """Two responding nodes carried the same diagonal coefficient."""


class AsymmetryDetected(HrgcError):
    """An extracted message matrix failed its symmetry check (corrupt input)."""


class DecodeFailure(HrgcError):
    """Errors-and-erasures decoding could not certify a unique codeword."""


class Underdetermined(HrgcError):
    """Too few usable positions to pin down the message."""


class Inconsistent(HrgcError):
    """Erasure solve succeeded but some positions disagree with the solution.

    ``positions`` carries the disagreeing indices.
    """

    def __init__(self, positions):
        super().__init__(f"inconsistent positions: {sorted(positions)}")
        self.positions = frozenset(positions)
