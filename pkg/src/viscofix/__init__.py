"""Viscosity approximation of common fixed points of nonexpansive semigroups."""

__version__ = "0.1.0"

from .errors import ConstructionError, NumericalError, UnsupportedOperation, UsageError
from .limit import (
    FamilyEntry,
    FamilyResult,
    LimitCertificate,
    Tolerances,
    anchor,
    certify,
    retraction,
    run_family,
)
from .means import Cesaro, GrowthRule, IntegralMean, averaged_apply, cesaro_left_regularity_defect
from .scheme import EpsilonRule, Schedule, eps_fixed_membership, inner_solve, run_scheme
from .semigroup import (
    ContinuousFlow,
    Contraction,
    DiscretePower,
    ProjectionMap,
    Rotation,
    apply,
    apply_contraction,
    fixed_set,
)
from .space import AffineSlab, AffineSubspace, Ball, Box, inner, project
