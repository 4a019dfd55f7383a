"""Boundary Gaussian fields on flat annuli and half-annuli.

Numerical library for the computable core of boundary conformal field
theory on flat (half-)annuli: random Fourier boundary fields,
Dirichlet-to-Neumann operators and Green functions on cylinders, exact
free-field amplitudes with Gaussian gluing, zeta-regularized determinant
factorizations, Gaussian multiplicative chaos potentials on the half
circle, and Feynman-Kac Monte Carlo for the associated semigroups.
"""

__version__ = "0.1.0"

from .boundary_fields import (
    CircleField,
    HalfCircleField,
    FieldMeasure,
    RngStream,
    covariance_circle,
    covariance_circle_series,
    covariance_half,
    covariance_half_series,
    pairing_2,
    rotate,
    sample,
    sobolev_norm,
)
from .harmonic_dn import (
    CylinderGeometry,
    DnOperator,
    GreenKernel,
    dn_annulus,
    dn_jump,
    dn_model,
    dn_one_sided,
    green_cylinder,
    harmonic_extension_half_annulus,
    markov_decomposition_check,
)
from .determinants import (
    SpectralDeterminant,
    FredholmRatio,
    det_annulus_dirichlet,
    det_half_annulus_dirichlet,
    det_half_annulus_mixed,
    fredholm_cut_ratio,
    verify_bfk,
    zeta_constants,
)
from .free_amplitudes import (
    GaussianKernel,
    GluingDivergenceError,
    InsertionSet,
    LiouvilleParams,
    amplitude_annulus_free,
    amplitude_free_from_dn,
    amplitude_half_annulus_free,
    amplitude_kernel,
    conformal_weight,
    gauss_bonnet_flat,
    glue_gaussian,
    gluing_constant,
    seiberg_check,
    z_normalization,
)
from .gmc import (
    GmcParams,
    McEstimate,
    cameron_martin_check,
    martingale_check,
    moment_estimate,
    p2_threshold,
    r_k,
    l_k,
    v_alpha_k,
    w_sharp_k,
)
from .semigroup import (
    FockIndex,
    Observable,
    RectangleField,
    SemigroupQuery,
    compose_check,
    fk_apply,
    fk_apply_bulk,
    free_apply_annulus,
    free_apply_half,
    free_kernel_annulus,
    free_kernel_half,
    hermite_psi,
    p_plus_apply,
    potential_matrix_on_Ek,
    sample_rectangle_gff,
)
