"""Numerical evaluation and verification of the fractional p-Laplacian."""

from .errors import (
    CertificationFailed,
    ConfigError,
    DecayUncertified,
    DomainViolation,
    MissingCertificate,
    NonlocalError,
    SearchRadiusExceeded,
    SingularityUnresolved,
    SupportViolation,
    TouchViolation,
)
from .fields import (
    CATALOG_KINDS,
    AffineField,
    ConstantField,
    CosineBump,
    CutoffField,
    Field,
    Grid,
    KernelSpec,
    LinearCombination,
    OperatorParams,
    PiecewiseField,
    PowerBump,
    PowerField,
    QuadraticField,
    SampledField,
    SmoothBump,
    TailModel,
    decay_norm,
    kernel_bounds_audit,
    make_field,
)
from .harness import (
    ConstructedSolution,
    bump_family,
    caccioppoli_audit,
    ds_perturbation_audit,
    envelope_audit,
    eps_convergence_study,
    moreau_quadratic_audit,
    pointwise_eps_study,
    pointwise_supersolution_audit,
    viscosity_touch_audit,
    weak_supersolution_audit,
    weak_to_visc_perturbation,
)
from .quadrature import PvValue, QuadratureScheme, eval_ds, eval_pairing, eval_plap, gagliardo, weak_form, weak_pairing
from .regularization import (
    InfConvolutionField,
    RegularizationParams,
    choose_q,
    critical_point_audit,
    envelope_search,
    f_eps,
    inf_convolution,
    mollify,
    r_eps,
    semiconcavity_audit,
    sup_convolution,
)
from .report import TOOL_VERSION, AuditReport
from .scalar import C2BetaCertificate, L_map, RhsSpec, c2beta_certify, chord_bound, chord_identity_check, chord_integral, growth_audit, rhs_from_terms

__version__ = TOOL_VERSION
