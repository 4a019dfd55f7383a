"""Exact free-field amplitudes of flat (half-)annuli and Gaussian gluing.

The free amplitude of a cylinder with boundary traces (phi1, phi2) is

    A0 = exp(-1/2 (phi~, (D_Sigma - D) phi~)_2),

where D_Sigma is the two-boundary DN map of the cylinder, D the reference
DN map of caps (multiplier |n|, zero on constants), and (.,.)_2 the mode
pairing of ``boundary_fields.pairing_2``.  On the half-annulus this reduces
to the closed form

    A0+ = exp(-(c1-c2)^2/(4t)
              - sum_n [(x_{2,n} - q^n x_{1,n})^2 / (2(1-q^{2n})) - x_{2,n}^2/2]).

Amplitudes are carried around symbolically as ``GaussianKernel`` quadratic
forms in the standard boundary coordinates (c, x_n, y_n), so that gluing —
integrating a shared boundary against the Gaussian measure of the modes and
Lebesgue measure of the zero mode — is exact linear algebra and the gluing
constants can be tested to machine precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .boundary_fields import CircleField, HalfCircleField, pairing_2
from .determinants import det_annulus_dirichlet, det_half_annulus_mixed
from .harmonic_dn import CylinderGeometry, dn_annulus

__all__ = [
    "GaussianKernel",
    "GluingDivergenceError",
    "InsertionSet",
    "LiouvilleParams",
    "amplitude_annulus_free",
    "amplitude_free_from_dn",
    "amplitude_half_annulus_free",
    "amplitude_kernel",
    "conformal_weight",
    "gauss_bonnet_flat",
    "glue_gaussian",
    "gluing_constant",
    "seiberg_check",
    "z_normalization",
]


class GluingDivergenceError(ValueError):
    """The Gaussian integral over the shared boundary does not converge."""


@dataclass(frozen=True)
class LiouvilleParams:
    """Coupling gamma in (0,2) with derived background charge and couplings."""

    gamma: float
    mu: float = 0.0
    mu_l: float = 0.0
    mu_r: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 2.0:
            raise ValueError(f"gamma must lie in (0, 2), got {self.gamma}")
        if min(self.mu, self.mu_l, self.mu_r) < 0:
            raise ValueError("cosmological constants must be nonnegative")

    @property
    def Q(self) -> float:
        return self.gamma / 2.0 + 2.0 / self.gamma

    @property
    def central_charge(self) -> float:
        return 1.0 + 6.0 * self.Q**2

    @property
    def quadratic_form_valid(self) -> bool:
        """Interacting quadratic-form bounds need gamma < sqrt(2) (or mu = 0)."""
        return self.gamma < math.sqrt(2.0) or self.mu == 0.0


@dataclass(frozen=True)
class InsertionSet:
    """Bulk/boundary insertion weights plus surface topology (chi, n_dirichlet_half)."""

    bulk: tuple = ()
    boundary: tuple = ()
    topology: tuple = (0, 0)  # (euler characteristic, # Dirichlet half-circle arcs)

    def __post_init__(self):
        object.__setattr__(self, "bulk", tuple(float(a) for a in self.bulk))
        object.__setattr__(self, "boundary", tuple(float(b) for b in self.boundary))


def conformal_weight(alpha: float, params: LiouvilleParams) -> float:
    """Delta_alpha = (alpha/2)(Q - alpha/2)."""
    return (alpha / 2.0) * (params.Q - alpha / 2.0)


def gauss_bonnet_flat(n_dirichlet_half: int, chi: int) -> float:
    """Total curvature chi - (number of Dirichlet half-circle arcs)/2.

    For the flat model surfaces (geodesic boundary, right-angle corners)
    this must vanish; callers assert 0.
    """
    return chi - n_dirichlet_half / 2.0


def seiberg_check(ins: InsertionSet, params: LiouvilleParams):
    """(bounds hold?, margin of the total-weight bound).

    First bound: sum alpha_i + sum beta_j/2 > Q*chi; second: every weight < Q.
    """
    chi = ins.topology[0]
    total = sum(ins.bulk) + sum(ins.boundary) / 2.0
    margin = total - params.Q * chi
    first = margin > 0
    second = all(a < params.Q for a in ins.bulk) and all(b < params.Q for b in ins.boundary)
    return first and second, margin


# ---------------------------------------------------------------------------
# free amplitudes


def amplitude_half_annulus_free(geom: CylinderGeometry, phi1: HalfCircleField,
                                phi2: HalfCircleField) -> float:
    """Closed-form free amplitude of the half-annulus (Neumann sides)."""
    if not geom.half:
        raise ValueError("amplitude_half_annulus_free needs geom.half = True")
    if phi1.n_cut != phi2.n_cut:
        raise ValueError("cutoff mismatch between boundary traces")
    t, q = geom.t, geom.q
    n = np.arange(1, phi1.n_cut + 1, dtype=float)
    qn = q**n
    mode_sum = np.sum((phi2.x - qn * phi1.x) ** 2 / (2.0 * (1.0 - qn**2)) - phi2.x**2 / 2.0)
    return math.exp(-((phi1.c - phi2.c) ** 2) / (4.0 * t) - float(mode_sum))


def amplitude_free_from_dn(geom: CylinderGeometry, phi1, phi2) -> float:
    """A0 assembled literally as exp(-1/2 (phi~, (D_Sigma - D) phi~)_2).

    Route through the DN blocks and the mode pairing; serves as the
    independent cross-check of the closed forms.
    """
    if phi1.n_cut != phi2.n_cut:
        raise ValueError("cutoff mismatch between boundary traces")
    n_cut = phi1.n_cut
    dn = dn_annulus(geom, n_cut)
    n = np.arange(1, n_cut + 1, dtype=float)
    # (D_Sigma - D): subtract the cap DN multiplier |n| on each boundary
    diff = dn.blocks - n[:, None, None] * np.eye(2)
    zero = dn.zero_block  # cap zero-mode DN is 0

    cs = np.array([phi1.c, phi2.c])
    out_c = zero @ cs
    xs = np.stack([phi1.x, phi2.x])  # (2, n_cut)
    # the block acts on the per-mode coefficient 2-vector; the scalar mode
    # normalization cancels between coordinates and pairing
    out_x = np.einsum("nij,jn->in", diff, xs)
    if geom.half:
        psi1 = HalfCircleField(c=out_c[0], x=out_x[0])
        psi2 = HalfCircleField(c=out_c[1], x=out_x[1])
    else:
        ys = np.stack([phi1.y, phi2.y])
        out_y = np.einsum("nij,jn->in", diff, ys)
        psi1 = CircleField(c=out_c[0], x=out_x[0], y=out_y[0])
        psi2 = CircleField(c=out_c[1], x=out_x[1], y=out_y[1])
    return math.exp(-0.5 * pairing_2((phi1, phi2), (psi1, psi2)))


def amplitude_annulus_free(geom: CylinderGeometry, phi1: CircleField,
                           phi2: CircleField) -> float:
    """Free amplitude of the full annulus, via the DN quadratic form."""
    if geom.half:
        raise ValueError("amplitude_annulus_free needs a full annulus geometry")
    return amplitude_free_from_dn(geom, phi1, phi2)


def z_normalization(geom: CylinderGeometry) -> float:
    """det(Laplacian)^{-1/2}; the geodesic-boundary curvature term is 1."""
    det = det_half_annulus_mixed(geom.q) if geom.half else det_annulus_dirichlet(geom.q)
    return math.exp(-0.5 * det.log_value)


def gluing_constant(n_loops: int, n_half: int, dirichlet_remains: bool) -> float:
    """Constant relating a glued amplitude to the Gaussian gluing integral.

    Gluing n_loops pairs of circles and n_half pairs of half-circles:
    C = 2^{-(n_loops/2 + 3 n_half/4)} pi^{-(n_loops + 3 n_half/4)} when the
    glued surface keeps some Dirichlet boundary, and an extra factor 2pi
    when it does not.
    """
    if n_loops < 0 or n_half < 0 or n_loops + n_half == 0:
        raise ValueError("need nonnegative counts, at least one gluing")
    a = n_loops / 2.0 + 3.0 * n_half / 4.0
    b = n_loops + 3.0 * n_half / 4.0
    if not dirichlet_remains:
        a -= 1.0
        b -= 1.0
    return 2.0 ** (-a) * math.pi ** (-b)


# ---------------------------------------------------------------------------
# Gaussian kernels and exact gluing


def _mode_sort_key(label: str):
    if label == "c":
        return (0, 0)
    return ({"x": 1, "y": 2}[label[0]], int(label[1:]))


def _field_coords(field):
    """(label, value) pairs of a boundary field in standard coordinates."""
    pairs = [("c", float(field.c))]
    pairs += [(f"x{i+1}", float(v)) for i, v in enumerate(field.x)]
    if isinstance(field, CircleField):
        pairs += [(f"y{i+1}", float(v)) for i, v in enumerate(field.y)]
    return pairs


@dataclass(frozen=True)
class GaussianKernel:
    """exp(-1/2 u^T quadratic u + linear . u + log_const) over named coordinates.

    ``variables`` is an ordered tuple of (boundary_id, mode_label) with mode
    labels "c", "x1", ..., "y1", ...; the matrix is kept symmetric.
    """

    variables: tuple
    quadratic: np.ndarray
    linear: np.ndarray
    log_const: float = 0.0

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.quadratic, dtype=float))
        object.__setattr__(self, "variables", tuple((b, str(m)) for b, m in self.variables))
        object.__setattr__(self, "quadratic", 0.5 * (q + q.T))
        object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float))
        m = len(self.variables)
        if self.quadratic.shape != (m, m) or self.linear.shape != (m,):
            raise ValueError("kernel dimensions do not match the variable list")

    @property
    def boundary_ids(self):
        seen = []
        for b, _ in self.variables:
            if b not in seen:
                seen.append(b)
        return tuple(seen)

    def scaled(self, log_factor: float) -> "GaussianKernel":
        return GaussianKernel(self.variables, self.quadratic, self.linear,
                              self.log_const + log_factor)

    def canonical(self) -> "GaussianKernel":
        """Variables sorted (by boundary id, then mode) for comparisons."""
        order = sorted(range(len(self.variables)),
                       key=lambda i: (str(self.variables[i][0]),
                                      _mode_sort_key(self.variables[i][1])))
        idx = np.array(order, dtype=int)
        return GaussianKernel(tuple(self.variables[i] for i in order),
                              self.quadratic[np.ix_(idx, idx)], self.linear[idx],
                              self.log_const)

    def value_at(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return math.exp(-0.5 * float(u @ self.quadratic @ u)
                        + float(self.linear @ u) + self.log_const)

    def value(self, fields: dict) -> float:
        """Evaluate on boundary fields, given as {boundary_id: field}."""
        coords = {}
        for bid, f in fields.items():
            for label, v in _field_coords(f):
                coords[(bid, label)] = v
        try:
            u = np.array([coords[v] for v in self.variables])
        except KeyError as e:  # missing boundary or too-small cutoff
            raise ValueError(f"missing coordinate {e.args[0]}") from None
        return self.value_at(u)

    def to_json(self) -> str:
        return json.dumps({
            "variables": [[b, m] for b, m in self.variables],
            "quadratic": self.quadratic.tolist(),
            "linear": self.linear.tolist(),
            "log_const": self.log_const,
        })


def amplitude_kernel(geom: CylinderGeometry, n_cut: int, ids=("1", "2"),
                     with_z: bool = False) -> GaussianKernel:
    """The free amplitude A0 (optionally Z*A0) as a Gaussian kernel.

    Variables are the standard coordinates of the two boundary traces;
    quadratic blocks per mode n are B_n/2 with
    B_n = [[coth nt - 1, -1/sinh nt], [-1/sinh nt, coth nt - 1]].
    """
    b1, b2 = ids
    t = geom.t
    labels = ["c"] + [f"x{n}" for n in range(1, n_cut + 1)]
    if not geom.half:
        labels += [f"y{n}" for n in range(1, n_cut + 1)]
    variables = [(b1, m) for m in labels] + [(b2, m) for m in labels]
    m = len(labels)
    quad = np.zeros((2 * m, 2 * m))

    zero_w = 1.0 / (2.0 * t) if geom.half else 1.0 / t
    quad[0, 0] = quad[m, m] = zero_w
    quad[0, m] = quad[m, 0] = -zero_w
    n = np.arange(1, n_cut + 1, dtype=float)
    diag_w = 0.5 * (1.0 / np.tanh(n * t) - 1.0)
    off_w = -0.5 / np.sinh(n * t)
    reps = 1 if geom.half else 2
    for rep in range(reps):
        sl = 1 + rep * n_cut + np.arange(n_cut)
        quad[sl, sl] = diag_w
        quad[m + sl, m + sl] = diag_w
        quad[sl, m + sl] = off_w
        quad[m + sl, sl] = off_w
    log_const = -0.5 * (det_half_annulus_mixed(geom.q).log_value if geom.half
                        else det_annulus_dirichlet(geom.q).log_value) if with_z else 0.0
    return GaussianKernel(tuple(variables), quad, np.zeros(2 * m), log_const)


def glue_gaussian(k1: GaussianKernel, k2: GaussianKernel, shared,
                  integrate_zero_mode: bool = True) -> GaussianKernel:
    """Integrate the shared boundary out of the product kernel k1*k2.

    Mode coordinates of the shared boundary are integrated against the
    standard normal weight, the zero mode against Lebesgue dc (when
    ``integrate_zero_mode``; otherwise c stays as a free variable of the
    result).  The integral is exact Gaussian linear algebra; a shared block
    that is not positive definite raises GluingDivergenceError.
    """
    shared1 = {m for b, m in k1.variables if b == shared}
    shared2 = {m for b, m in k2.variables if b == shared}
    if not shared1 or shared1 != shared2:
        raise ValueError("shared boundary must appear in both kernels with equal cutoff")

    # combined variable list: all of k1, then k2's non-shared variables
    variables = list(k1.variables)
    pos = {v: i for i, v in enumerate(variables)}
    idx2 = []
    for v in k2.variables:
        if v not in pos:
            pos[v] = len(variables)
            variables.append(v)
        idx2.append(pos[v])
    m = len(variables)
    quad = np.zeros((m, m))
    lin = np.zeros(m)
    i1 = np.arange(len(k1.variables))
    quad[np.ix_(i1, i1)] += k1.quadratic
    lin[i1] += k1.linear
    i2 = np.array(idx2)
    quad[np.ix_(i2, i2)] += k2.quadratic
    lin[i2] += k2.linear
    log_const = k1.log_const + k2.log_const

    integrate = []
    for i, (b, label) in enumerate(variables):
        if b != shared:
            continue
        if label == "c":
            if integrate_zero_mode:
                integrate.append(i)
        else:
            quad[i, i] += 1.0  # standard normal reference weight
            log_const -= 0.5 * math.log(2.0 * math.pi)
            integrate.append(i)
    s = np.array(sorted(integrate), dtype=int)
    keep = np.array([i for i in range(m) if i not in set(integrate)], dtype=int)

    a_ss = quad[np.ix_(s, s)]
    try:
        chol = np.linalg.cholesky(a_ss)
    except np.linalg.LinAlgError:
        raise GluingDivergenceError(
            "shared boundary block is not positive definite") from None
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    # solve A_ss Z = [A_sk | b_s] through the Cholesky factor
    rhs = np.concatenate([quad[np.ix_(s, keep)], lin[s][:, None]], axis=1)
    z = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    z_k, z_b = z[:, :-1], z[:, -1]

    new_quad = quad[np.ix_(keep, keep)] - quad[np.ix_(keep, s)] @ z_k
    new_lin = lin[keep] - quad[np.ix_(keep, s)] @ z_b
    new_const = (log_const + 0.5 * float(lin[s] @ z_b)
                 + 0.5 * (len(s) * math.log(2.0 * math.pi) - logdet))
    return GaussianKernel(tuple(variables[i] for i in keep), new_quad, new_lin, new_const)
