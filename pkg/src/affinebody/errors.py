"""Exception types shared across the package."""


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class SingularConfiguration(SimulationError):
    """Internal configuration is (numerically) singular: |det phi| below threshold."""


class SingularInertia(SimulationError):
    """Inertia tensor is not invertible."""


class NonInvertibleLegendre(SimulationError):
    """Kinetic-model coefficients make the Legendre map degenerate."""


class ConstraintViolation(SimulationError):
    """Initial state does not satisfy the requested constraint."""


class UnknownGenerator(SimulationError):
    """Unknown generator name passed to the Poisson-bracket table."""


class DegenerateReduction(SimulationError):
    """Two-polar reduction attempted at (nearly) coincident stretchings."""


class CoincidentInvariants(SimulationError):
    """Guarded lattice denominator underflow: deformation invariants coincide."""


class DimensionMismatch(SimulationError):
    """Operation only defined for a specific dimension."""


class ConfigError(SimulationError):
    """Run configuration failed validation."""
