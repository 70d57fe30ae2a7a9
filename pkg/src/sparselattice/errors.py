"""Exception types raised across the package."""


class LatticeError(Exception):
    """Base class for all package errors."""


class DegeneratePath(LatticeError, ValueError):
    pass


class NoConvergence(LatticeError):
    pass


class CurvatureExceeded(LatticeError):
    pass


class EmptySet(LatticeError):
    pass


class HeadingMismatch(LatticeError, ValueError):
    pass


class TooShort(LatticeError, ValueError):
    pass


class NoPath(LatticeError):
    """No lattice path covers the dataset path within the given bound."""


class Stuck(LatticeError):
    pass


class Explosion(LatticeError):
    """Brute-force enumeration exceeded its node budget."""


class LengthMismatch(LatticeError, ValueError):
    pass


class MissingStraight(LatticeError):
    pass


class EmptyGoal(LatticeError):
    pass


class NoPlan(LatticeError):
    def __init__(self, msg: str, expansions: int = 0, wall_time: float = 0.0):
        super().__init__(msg)
        self.expansions = expansions
        self.wall_time = wall_time


class SchemaError(LatticeError, ValueError):
    """Input file does not follow the expected schema."""
