"""Dynamics of affinely rigid (homogeneously deformable) bodies."""

from .errors import (CoincidentInvariants, ConfigError, ConstraintViolation,
                     DegenerateReduction, DimensionMismatch,
                     NonInvertibleLegendre, SimulationError,
                     SingularConfiguration, SingularInertia, UnknownGenerator)
from .tensors import (Configuration, DeformationBundle, InternalConfig,
                      Metric, PolarFactors, TwoPolarFactors,
                      deformation_bundle, matrix_exponential, polar,
                      two_polar)
from .kinematics import (AffineVelocity, BodyState, affine_velocity,
                         body_state, cauchy_rate, green_rate, split_velocity)
from .inertia import (CanonicalMomenta, Inertia, KinematicalMomenta,
                      canonical_from_kinematical, euler_inertia,
                      kinematical_momenta)
from .forces import (ConstantBodyForce, ExternalFriction, HookeAnisotropic,
                     HookeGreenShifted, HookeIsotropic, HyperelasticInvariant,
                     IsotropicExpansion, LinearAnisotropicFriction, Pressure,
                     Sum, TorqueModel, ViscousContinuum, ViscousDiscrete,
                     potential_torque_from_gradient, power, torque)
from .engine import (ConstraintKind, EquationSystem, comoving_rhs,
                     constrained_rhs, unconstrained_rhs)
from .hamilton import (DAlembert, DoublyAffine, GeneralEightParam,
                       KineticModel, MaterialAffine, PhaseFunction,
                       PhaseState, SpatialAffine, canonical_bracket, casimir,
                       kinetic_hamiltonian, legendre, legendre_inverse,
                       phase_state, poisson_bracket_generators)
from .twopolar import (DAlembertIsotropic, HyperbolicCasimir, LatticeModel,
                       SutherlandCompact, ThresholdClass, TwoDimClosed,
                       TwoPolarState, exponential_geodesic,
                       is_stationary_generator, lattice_hamiltonian,
                       lattice_rhs, reconstruct, reduce, threshold_classify)

__version__ = "0.1.0"
