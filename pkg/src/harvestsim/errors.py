"""Exception types shared across the simulation modules."""


class HarvestSimError(Exception):
    """Base class for all domain errors raised by this package."""


class InfeasibleConfiguration(HarvestSimError):
    """Linkage cannot be assembled at the requested crank angle."""


class DegenerateDiagonal(HarvestSimError):
    """Frame diagonal collapsed to (numerically) zero length."""


class NoConsistentBranch(HarvestSimError):
    """No solution branch satisfies the loop-closure residual tolerance."""


class NoOscillationFound(HarvestSimError):
    """Proportional-gain sweep exhausted without sustained oscillation."""


class Unreachable(HarvestSimError):
    """Goal pose lies beyond the arm's bounding reach."""


class VelocityInfeasible(HarvestSimError):
    """Requested trajectory duration violates joint velocity caps."""


class PlacementFailed(HarvestSimError):
    """Scene generator could not place objects without overlap."""


class NoMatches(HarvestSimError):
    """No matched detection/ground-truth pairs to compute errors over."""


class ConfigInvalid(HarvestSimError):
    """Configuration failed validation; message carries section/key path."""
