"""Exact finite-dimensional checks for Koopman representations of Higman-Thompson
groups and of automorphism groups of rooted trees."""

from .scalars import QSqrtN
from .nadic import GroupParams, PLMap, compose, evaluate, identity, invert, membership, rn_sqrt_at, support
from .constructions import (
    AdmissibleSet,
    LambdaSegment,
    NAdicInterval,
    approximate_by_admissible,
    make_affine_onto,
    make_gm,
    make_gmA,
    make_gmI,
    transporter,
)
from .koopman import (
    StepFunction,
    check_measure_contracting,
    convergence_table,
    inner_product,
    koopman_apply,
    koopman_inner,
    koopman_matrix,
    levelset_measure,
    project_complement,
)

__version__ = "0.1.0"
