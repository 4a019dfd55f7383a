"""(Half-)annulus transfer operators: exact free kernels, the Hermite/Fock
basis of the free Hamiltonian, and Feynman-Kac Monte Carlo for the
interacting semigroups.

Free kernels factor over modes: a heat kernel in the zero mode (variance 2t
per unit time on the half-annulus, t on the annulus) times one Mehler kernel

    M(x, y; r) = (1-r^2)^{-1/2} exp[(2rxy - r^2(x^2+y^2)) / (2(1-r^2))]

per mode, r = e^{-nt}, density taken with respect to the standard Gaussian
in y.  The interacting semigroup at regularization level k is sampled by
Feynman-Kac: the boundary-trace process (c_s, x_s) is an explicit Gaussian
Markov process (Brownian zero mode, independent OU modes), and the weight
is the exponential of a time integral of the level-k potentials

    mu   e^{gamma c_s}     V_+^{(k)}(x_s)        (bulk)
    mu_L e^{gamma c_s / 2} L^{(k)}(x_s)          (theta = pi boundary ray)
    mu_R e^{gamma c_s / 2} R^{(k)}(x_s)          (theta = 0 boundary ray)

discretized by the trapezoid rule on a uniform grid.  At fixed (k, grid)
the sampler is an exact semigroup (the composition check aligns grids), and
first moments of every weight ingredient have closed forms used as oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite_e

from .boundary_fields import CircleField, HalfCircleField, RngStream, rotate
from .free_amplitudes import LiouvilleParams
from .gmc import McEstimate, _estimate, _quadrature

__all__ = [
    "FockIndex",
    "Observable",
    "RectangleField",
    "SemigroupQuery",
    "compose_check",
    "fk_apply",
    "fk_apply_bulk",
    "free_apply_annulus",
    "free_apply_half",
    "free_kernel_annulus",
    "free_kernel_half",
    "hermite_psi",
    "p_plus_apply",
    "potential_matrix_on_Ek",
    "sample_rectangle_gff",
]


# ---------------------------------------------------------------------------
# Fock basis


@dataclass(frozen=True)
class FockIndex:
    """Finitely supported occupation numbers (k_1, k_2, ...) of the modes."""

    k: tuple = ()

    def __post_init__(self):
        k = tuple(int(v) for v in self.k)
        if any(v < 0 for v in k):
            raise ValueError("occupation numbers must be nonnegative")
        while k and k[-1] == 0:
            k = k[:-1]
        object.__setattr__(self, "k", k)

    @property
    def support(self) -> int:
        """Largest mode index carrying a nonzero occupation."""
        return len(self.k)

    @property
    def weight(self) -> int:
        """Energy |k| = sum_n n k_n."""
        return sum((n + 1) * v for n, v in enumerate(self.k))


def p_plus_apply(k) -> int:
    """Eigenvalue of the mode-energy operator on psi_k: |k| = sum n k_n."""
    if not isinstance(k, FockIndex):
        k = FockIndex(tuple(k))
    return k.weight


def hermite_psi(k, x):
    """Normalized Hermite product psi_k(x) = prod He_{k_n}(x_n)/sqrt(k_n!).

    ``x`` has modes along the last axis; evaluation is vectorized over any
    leading axes.
    """
    if not isinstance(k, FockIndex):
        k = FockIndex(tuple(k))
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < k.support:
        raise ValueError(f"need at least {k.support} modes, got {x.shape[-1]}")
    out = np.ones(x.shape[:-1])
    for n, kn in enumerate(k.k):
        if kn == 0:
            continue
        coeffs = np.zeros(kn + 1)
        coeffs[kn] = 1.0
        out = out * hermite_e.hermeval(x[..., n], coeffs) / math.sqrt(math.factorial(kn))
    return out if out.shape else float(out)


def _fock_indices_up_to(k_level: int):
    """All FockIndex with weight <= k_level, graded then lexicographic."""
    found = []

    def gen(mode, budget, current):
        if mode > k_level:
            found.append(FockIndex(tuple(current)))
            return
        for occ in range(budget // mode + 1):
            gen(mode + 1, budget - mode * occ, current + [occ])

    gen(1, k_level, [])
    return sorted(set(found), key=lambda f: (f.weight, f.k))


# ---------------------------------------------------------------------------
# free kernels


def _mehler_log(x, y, r) -> float:
    """log of the OU transition density w.r.t. the standard normal in y."""
    r2 = r * r
    return (-0.5 * np.log1p(-r2)
            + (2.0 * r * x * y - r2 * (x * x + y * y)) / (2.0 * (1.0 - r2)))


def free_kernel_half(t: float, params: LiouvilleParams, phi1: HalfCircleField,
                     phi2: HalfCircleField) -> float:
    """Exact free half-annulus kernel between two boundary traces.

    e^{-tQ^2/4} (4 pi t)^{-1/2} e^{-(c1-c2)^2/(4t)} prod_n M(x1_n, x2_n; e^{-nt});
    the mode part is a density against the standard Gaussian of the inner
    trace, the zero mode against Lebesgue dc.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if phi1.n_cut != phi2.n_cut:
        raise ValueError("cutoff mismatch between boundary traces")
    n = np.arange(1, phi1.n_cut + 1, dtype=float)
    r = np.exp(-n * t)
    log_val = (-t * params.Q**2 / 4.0
               - 0.5 * math.log(4.0 * math.pi * t)
               - (phi1.c - phi2.c) ** 2 / (4.0 * t)
               + float(np.sum(_mehler_log(phi1.x, phi2.x, r))))
    return math.exp(log_val)


def free_kernel_annulus(t: float, twist: float, params: LiouvilleParams,
                        phi1: CircleField, phi2: CircleField) -> float:
    """Exact free annulus kernel with rotation angle ``twist``.

    e^{-tQ^2/2} (2 pi t)^{-1/2} e^{-(c1-c2)^2/(2t)} times Mehler kernels over
    both mode families, the inner trace rotated by the twist first.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    if phi1.n_cut != phi2.n_cut:
        raise ValueError("cutoff mismatch between boundary traces")
    p2 = rotate(phi2, twist) if twist != 0.0 else phi2
    n = np.arange(1, phi1.n_cut + 1, dtype=float)
    r = np.exp(-n * t)
    log_val = (-t * params.Q**2 / 2.0
               - 0.5 * math.log(2.0 * math.pi * t)
               - (phi1.c - p2.c) ** 2 / (2.0 * t)
               + float(np.sum(_mehler_log(phi1.x, p2.x, r)))
               + float(np.sum(_mehler_log(phi1.y, p2.y, r))))
    return math.exp(log_val)


# ---------------------------------------------------------------------------
# rectangle GFF (zero boundary data on the circles, Neumann sides)


@dataclass(frozen=True)
class RectangleField:
    """Mixed-boundary GFF on [0,t] x [0,pi] from i.i.d. coefficients.

    X = sqrt(2 pi) sum_{m,n} g_{mn} e_{mn} / sqrt(lambda_{mn}) with
    e_{mn} = sin(m pi s / t) cos(n theta) (L^2-normalized), Dirichlet on the
    half-circles s in {0, t}, Neumann on the sides.  Covariance equals the
    mixed Green kernel of ``harmonic_dn.green_cylinder``.
    """

    t: float
    g: np.ndarray  # (M, N+1), mode n = 0..N along the second axis

    def __post_init__(self):
        object.__setattr__(self, "g", np.atleast_2d(np.asarray(self.g, dtype=float)))

    @property
    def n_sine(self) -> int:
        return self.g.shape[0]

    @property
    def n_cos(self) -> int:
        return self.g.shape[1] - 1

    def evaluate(self, s, theta) -> np.ndarray:
        """Field values on the grid s x theta; shape (len(s), len(theta))."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        t = self.t
        m = np.arange(1, self.n_sine + 1, dtype=float)
        n = np.arange(0, self.n_cos + 1, dtype=float)
        lam = (m[:, None] * math.pi / t) ** 2 + n[None, :] ** 2
        norm = np.full(self.n_cos + 1, math.sqrt(4.0 / (t * math.pi)))
        norm[0] = math.sqrt(2.0 / (t * math.pi))
        w = math.sqrt(2.0 * math.pi) * self.g * norm[None, :] / np.sqrt(lam)
        sines = np.sin(np.outer(s, m * math.pi / t))  # (ns, M)
        coses = np.cos(np.outer(theta, n))  # (ntheta, N+1)
        return sines @ w @ coses.T

    def circle_average(self, s) -> np.ndarray:
        """(1/pi) integral of X(s, .) over the half circle — the n=0 part."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = self.t
        m = np.arange(1, self.n_sine + 1, dtype=float)
        lam = (m * math.pi / t) ** 2
        w = math.sqrt(2.0 * math.pi) * self.g[:, 0] * math.sqrt(2.0 / (t * math.pi)) / np.sqrt(lam)
        return np.sin(np.outer(s, m * math.pi / t)) @ w


def sample_rectangle_gff(t: float, n_sine: int, n_cos: int, rng) -> RectangleField:
    """Draw a mixed-boundary rectangle GFF with the given mode cutoffs."""
    if n_sine < 1 or n_cos < 0:
        raise ValueError("need at least one sine mode and a nonnegative cosine cutoff")
    if isinstance(rng, RngStream):
        rng = rng.generator()
    return RectangleField(t=t, g=rng.standard_normal((n_sine, n_cos + 1)))


# ---------------------------------------------------------------------------
# observables and queries


@dataclass(frozen=True)
class Observable:
    """Cylinder observable: Hermite product in the modes times c-factor.

    value = psi_fock(x) * psi_fock_y(y) * c^c_power * exp(-a c^2 + b c).
    ``a > 0`` gives the sub-Gaussian decay in c used by the L^2 pairings;
    a = b = 0 and empty Fock indices give the constant observable 1.
    """

    fock: FockIndex = FockIndex(())
    fock_y: FockIndex = FockIndex(())
    a: float = 0.0
    b: float = 0.0
    c_power: int = 0

    def __post_init__(self):
        if isinstance(self.fock, (tuple, list)):
            object.__setattr__(self, "fock", FockIndex(tuple(self.fock)))
        if isinstance(self.fock_y, (tuple, list)):
            object.__setattr__(self, "fock_y", FockIndex(tuple(self.fock_y)))
        if self.a < 0:
            raise ValueError("quadratic decay coefficient a must be >= 0")
        if self.c_power < 0:
            raise ValueError("c_power must be >= 0")

    @property
    def support(self) -> int:
        return max(self.fock.support, self.fock_y.support)

    def value(self, c, x, y=None):
        c = np.asarray(c, dtype=float)
        out = np.exp(-self.a * c**2 + self.b * c)
        if self.c_power:
            out = out * c**self.c_power
        if self.fock.k:
            out = out * hermite_psi(self.fock, x)
        if self.fock_y.k:
            if y is None:
                raise ValueError("observable involves sine modes but no y given")
            out = out * hermite_psi(self.fock_y, y)
        return out

    @property
    def sup_bound(self) -> float:
        """sup |value| when the observable is bounded (no polynomial part)."""
        if self.fock.k or self.fock_y.k or self.c_power:
            return math.inf
        if self.a == 0.0:
            return math.inf if self.b != 0.0 else 1.0
        return math.exp(self.b**2 / (4.0 * self.a))


@dataclass(frozen=True)
class SemigroupQuery:
    """One Feynman-Kac run: time, couplings, observable, cutoffs, budget."""

    t: float
    params: LiouvilleParams
    observable: Observable
    n_time: int = 64
    k_level: int = None
    n_samples: int = 10_000
    seed: int = 0
    check_grid: bool = False

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("t must be positive")
        if self.n_time < 1:
            raise ValueError("need at least one time step")
        if self.n_samples < 2:
            raise ValueError("need at least 2 samples")


# ---------------------------------------------------------------------------
# level-k potentials, vectorized over sample batches


class _PotentialEvaluator:
    """Precomputed quadrature/coefficients for the level-k potentials."""

    def __init__(self, params: LiouvilleParams, k: int, half: bool):
        self.gamma = params.gamma
        self.k = k
        self.half = half
        n = np.arange(1, k + 1, dtype=float)
        if half:
            alpha = params.gamma**2 / 2.0
            if params.mu > 0 and alpha >= 1.0:
                raise ValueError(
                    "bulk coupling on the half-annulus needs gamma < sqrt(2)")
            if params.mu > 0:
                theta, w = _quadrature(k, alpha, sharp=True)
                cosm = np.cos(np.outer(theta, n)) * np.sqrt(2.0 / n)
                var = np.sum(cosm**2, axis=1)
                self.cosm = cosm
                self.wexp = w * np.exp(-0.5 * self.gamma**2 * var)
            # boundary-ray coefficients at theta = 0 (R) and theta = pi (L)
            base = 0.5 * self.gamma * np.sqrt(2.0 / n)
            self.r_coeff = base
            self.l_coeff = base * (-1.0) ** n
            self.end_const = self.gamma**2 / 8.0 * float(np.sum(2.0 / n))
        else:
            if params.mu > 0:
                n_nodes = max(8 * k, 128)
                theta = 2.0 * math.pi * np.arange(n_nodes) / n_nodes
                self.cos_t = np.cos(np.outer(theta, n)) / np.sqrt(n)
                self.sin_t = np.sin(np.outer(theta, n)) / np.sqrt(n)
                self.w_node = 2.0 * math.pi / n_nodes
                self.var_const = self.gamma**2 / 2.0 * float(np.sum(1.0 / n))

    def bulk_half(self, xs: np.ndarray) -> np.ndarray:
        """V_+^{(k)} for a batch of mode vectors, shape (m, k)."""
        return np.exp(self.gamma * (xs @ self.cosm.T)) @ self.wexp

    def rays(self, xs: np.ndarray):
        r = np.exp(xs @ self.r_coeff - self.end_const)
        left = np.exp(xs @ self.l_coeff - self.end_const)
        return left, r

    def bulk_annulus(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Circle potential int e^{gamma phi(theta)} dtheta, normalized."""
        f = xs @ self.cos_t.T - ys @ self.sin_t.T
        return np.exp(self.gamma * f - self.var_const).sum(axis=1) * self.w_node


def _fk_half_paths(c0, x0, params, dt, n_steps, rng, ev: _PotentialEvaluator):
    """Advance the half-annulus trace process, accumulating the FK integral.

    Returns (c_end, x_end, integral) with the trapezoid rule on the grid.
    """
    gamma = params.gamma
    c, x = c0.copy(), x0.copy()
    n = np.arange(1, x.shape[1] + 1, dtype=float)
    decay = np.exp(-n * dt)
    kick = np.sqrt(1.0 - decay**2)

    def node_value(c, x):
        val = np.zeros_like(c)
        if params.mu > 0:
            val += params.mu * np.exp(gamma * c) * ev.bulk_half(x)
        if params.mu_l > 0 or params.mu_r > 0:
            left, right = ev.rays(x)
            half_exp = np.exp(0.5 * gamma * c)
            val += half_exp * (params.mu_l * left + params.mu_r * right)
        return val

    integral = 0.5 * dt * node_value(c, x)
    for j in range(n_steps):
        c = c + math.sqrt(2.0 * dt) * rng.standard_normal(c.shape)
        x = x * decay + kick * rng.standard_normal(x.shape)
        w = 1.0 if j < n_steps - 1 else 0.5
        integral += w * dt * node_value(c, x)
    return c, x, integral


def fk_apply(query: SemigroupQuery, phi: HalfCircleField) -> McEstimate:
    """Feynman-Kac estimate of the interacting half-annulus semigroup at phi.

    e^{-Q^2 t/4} E[F(phi_t) exp(-(FK integral))] over the exact trace
    process started at phi; see the module docstring for the weight.
    """
    params, obs = query.params, query.observable
    k = query.k_level if query.k_level is not None else phi.n_cut
    if k > phi.n_cut or obs.support > k:
        raise ValueError("mode cutoff must cover the observable and the trace field")
    if obs.fock_y.k:
        raise ValueError("half-annulus observables have cosine modes only")
    ev = _PotentialEvaluator(params, k, half=True)
    rng = RngStream(query.seed, 0).generator()
    dt = query.t / query.n_time
    pref = math.exp(-params.Q**2 * query.t / 4.0)

    def run(n_samples, n_steps, dt, rng):
        vals = np.empty(n_samples)
        block = 4096
        for lo in range(0, n_samples, block):
            m = min(block, n_samples - lo)
            c0 = np.full(m, phi.c)
            x0 = np.tile(phi.x[:k], (m, 1))
            c, x, integral = _fk_half_paths(c0, x0, params, dt, n_steps, rng, ev)
            vals[lo:lo + m] = obs.value(c, x) * np.exp(-integral)
        return vals

    vals = pref * run(query.n_samples, query.n_time, dt, rng)
    diag = {"validity": params.quadratic_form_valid, "n_time": query.n_time,
            "k_level": k}
    if query.check_grid:
        rng2 = RngStream(query.seed, 1).generator()
        n2 = max(2, query.n_samples // 4)
        vals2 = pref * run(n2, 2 * query.n_time, dt / 2.0, rng2)
        shift = float(np.mean(vals2) - np.mean(vals))
        se = math.hypot(float(np.std(vals, ddof=1)) / math.sqrt(len(vals)),
                        float(np.std(vals2, ddof=1)) / math.sqrt(n2))
        diag["grid_doubling_shift"] = shift
        diag["grid_doubling_tol"] = 3.0 * se
        diag["grid_doubling_flag"] = bool(abs(shift) > 3.0 * se)
    return _estimate(vals, query.seed, diagnostics=diag)


def fk_apply_bulk(t: float, params: LiouvilleParams, phi: CircleField,
                  observable: Observable, n_time: int = 64, k_level: int = None,
                  n_samples: int = 10_000, seed: int = 0) -> McEstimate:
    """Feynman-Kac estimate of the annulus semigroup (bulk coupling only).

    e^{-Q^2 t/2} E[F(phi_t) exp(-mu int_0^t e^{gamma c_s} V^{(k)}(x_s, y_s) ds)]
    over the circle trace process (zero-mode variance t per unit time).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    k = k_level if k_level is not None else phi.n_cut
    if k > phi.n_cut or observable.support > k:
        raise ValueError("mode cutoff must cover the observable and the trace field")
    ev = _PotentialEvaluator(params, k, half=False)
    rng = RngStream(seed, 0).generator()
    dt = t / n_time
    n = np.arange(1, k + 1, dtype=float)
    decay = np.exp(-n * dt)
    kick = np.sqrt(1.0 - decay**2)
    gamma = params.gamma
    pref = math.exp(-params.Q**2 * t / 2.0)

    vals = np.empty(n_samples)
    block = 2048
    for lo in range(0, n_samples, block):
        m = min(block, n_samples - lo)
        c = np.full(m, phi.c)
        x = np.tile(phi.x[:k], (m, 1))
        y = np.tile(phi.y[:k], (m, 1))

        def node_value(c, x, y):
            if params.mu == 0:
                return np.zeros_like(c)
            return params.mu * np.exp(gamma * c) * ev.bulk_annulus(x, y)

        integral = 0.5 * dt * node_value(c, x, y)
        for j in range(n_time):
            c = c + math.sqrt(dt) * rng.standard_normal(m)
            x = x * decay + kick * rng.standard_normal((m, k))
            y = y * decay + kick * rng.standard_normal((m, k))
            w = 1.0 if j < n_time - 1 else 0.5
            integral += w * dt * node_value(c, x, y)
        vals[lo:lo + m] = observable.value(c, x, y) * np.exp(-integral)
    diag = {"validity": True, "n_time": n_time, "k_level": k}
    return _estimate(pref * vals, seed, diagnostics=diag)


def compose_check(t: float, s: float, params: LiouvilleParams, obs: Observable,
                  phi: HalfCircleField, n_time: int = 48, n_samples: int = 20_000,
                  n_inner: int = 8, seed: int = 0) -> dict:
    """Semigroup-law Monte Carlo: S(t+s)F vs S(t)[S(s)F] at phi.

    Both estimators run over the same concatenated time grid (nodes of the
    combined run include the cut at t), so their expectations agree exactly
    at fixed regularization and the check is purely statistical:
    |lhs - rhs| against 3 combined standard errors.
    """
    k = phi.n_cut
    if obs.support > k:
        raise ValueError("observable support exceeds the trace cutoff")
    ev = _PotentialEvaluator(params, k, half=True)
    frac = t / (t + s)
    n_t = min(max(1, round(n_time * frac)), n_time - 1)
    n_s = n_time - n_t
    dt_t, dt_s = t / n_t, s / n_s
    pref = math.exp(-params.Q**2 * (t + s) / 4.0)
    block = 1024

    # lhs: one run over the concatenated grid
    rng_l = RngStream(seed, 3).generator()
    lvals = np.empty(n_samples)
    for lo in range(0, n_samples, block):
        m = min(block, n_samples - lo)
        c0 = np.full(m, phi.c)
        x0 = np.tile(phi.x[:k], (m, 1))
        c1, x1, int1 = _fk_half_paths(c0, x0, params, dt_t, n_t, rng_l, ev)
        c2, x2, int2 = _fk_half_paths(c1, x1, params, dt_s, n_s, rng_l, ev)
        lvals[lo:lo + m] = obs.value(c2, x2) * np.exp(-(int1 + int2))
    lhs_mean = float(np.mean(pref * lvals))
    lhs_se = float(np.std(pref * lvals, ddof=1)) / math.sqrt(n_samples)

    # rhs: outer run to t, inner resampling of the s-leg from the cut trace
    rng = RngStream(seed, 2).generator()
    vals = np.empty(n_samples)
    for lo in range(0, n_samples, block):
        m = min(block, n_samples - lo)
        c0 = np.full(m, phi.c)
        x0 = np.tile(phi.x[:k], (m, 1))
        c1, x1, int1 = _fk_half_paths(c0, x0, params, dt_t, n_t, rng, ev)
        c_in = np.repeat(c1, n_inner)
        x_in = np.repeat(x1, n_inner, axis=0)
        c2, x2, int2 = _fk_half_paths(c_in, x_in, params, dt_s, n_s, rng, ev)
        inner_vals = (obs.value(c2, x2) * np.exp(-int2)).reshape(m, n_inner)
        vals[lo:lo + m] = np.exp(-int1) * inner_vals.mean(axis=1)
    rhs_mean = float(np.mean(pref * vals))
    rhs_se = float(np.std(pref * vals, ddof=1)) / math.sqrt(n_samples)

    combined = math.hypot(lhs_se, rhs_se)
    return {
        "lhs": lhs_mean, "lhs_stderr": lhs_se,
        "rhs": rhs_mean, "rhs_stderr": rhs_se,
        "abs_err": abs(lhs_mean - rhs_mean),
        "tolerance": 3.0 * combined,
        "pass": abs(lhs_mean - rhs_mean) <= 3.0 * combined,
        "n_samples": n_samples, "seed": seed,
    }


# ---------------------------------------------------------------------------
# exact free actions (mu = 0 closed forms, used as oracles and CLI references)


def _gauss_c_expectation(mu_c: float, var: float, a: float, b: float) -> float:
    """E[exp(-a Y^2 + b Y)] for Y ~ N(mu_c, var)."""
    big_a = 1.0 / (2.0 * var) + a
    if big_a <= 0:
        raise ValueError("c-integral diverges: a too negative")
    big_b = mu_c / var + b
    return (math.exp(big_b**2 / (4.0 * big_a) - mu_c**2 / (2.0 * var))
            / math.sqrt(2.0 * var * big_a))


def free_apply_half(t: float, params: LiouvilleParams, phi: HalfCircleField,
                    obs: Observable) -> float:
    """Closed form of the free (mu = 0) half-annulus semigroup action."""
    if obs.c_power != 0:
        raise ValueError("closed form implemented for c_power = 0 only")
    if obs.fock_y.k:
        raise ValueError("half-annulus observables have cosine modes only")
    mode = 1.0
    if obs.fock.k:
        mode = math.exp(-obs.fock.weight * t) * hermite_psi(obs.fock, phi.x)
    czp = _gauss_c_expectation(phi.c, 2.0 * t, obs.a, obs.b)
    return math.exp(-params.Q**2 * t / 4.0) * mode * czp


def free_apply_annulus(t: float, params: LiouvilleParams, phi: CircleField,
                       obs: Observable) -> float:
    """Closed form of the free (mu = 0) annulus semigroup action."""
    if obs.c_power != 0:
        raise ValueError("closed form implemented for c_power = 0 only")
    mode = 1.0
    if obs.fock.k:
        mode *= math.exp(-obs.fock.weight * t) * hermite_psi(obs.fock, phi.x)
    if obs.fock_y.k:
        mode *= math.exp(-obs.fock_y.weight * t) * hermite_psi(obs.fock_y, phi.y)
    czp = _gauss_c_expectation(phi.c, t, obs.a, obs.b)
    return math.exp(-params.Q**2 * t / 2.0) * mode * czp


# ---------------------------------------------------------------------------
# potential Gram matrices on the finite-energy subspace


def potential_matrix_on_Ek(k_level: int, params: LiouvilleParams,
                           n_samples: int, seed: int = 0) -> dict:
    """MC Gram matrices of the potentials V_+, L, R on span{psi_k: |k| <= k_level}.

    Uses E[W^{(K)} psi_a psi_b] with K = k_level — exact for observables
    measurable in the first K modes — and reports the largest eigenvalue of
    V + L + R as the empirical bound constant.
    """
    if k_level < 0:
        raise ValueError("k_level must be >= 0")
    alpha = params.gamma**2 / 2.0
    if alpha >= 1.0:
        raise ValueError("sharp bulk potential needs gamma < sqrt(2)")
    indices = _fock_indices_up_to(k_level)
    kk = max(k_level, 1)
    rng = RngStream(seed, 0).generator()
    xs = rng.standard_normal((n_samples, kk))
    psi = np.stack([hermite_psi(f, xs) for f in indices], axis=1)  # (n, d)

    ev_params = LiouvilleParams(gamma=params.gamma, mu=1.0, mu_l=1.0, mu_r=1.0) \
        if params.gamma > 0 else None
    if params.gamma == 0:
        v_w = np.full(n_samples, math.pi)
        l_w = np.ones(n_samples)
        r_w = np.ones(n_samples)
    else:
        ev = _PotentialEvaluator(ev_params, kk, half=True)
        v_w = ev.bulk_half(xs)
        l_w, r_w = ev.rays(xs)

    def gram(w):
        mean = (psi * w[:, None]).T @ psi / n_samples
        second = (psi**2 * (w**2)[:, None]).T @ psi**2 / n_samples
        stderr = np.sqrt(np.maximum(second - mean**2, 0.0) / n_samples)
        return 0.5 * (mean + mean.T), stderr

    v_mat, v_err = gram(v_w)
    l_mat, l_err = gram(l_w)
    r_mat, r_err = gram(r_w)
    total = v_mat + l_mat + r_mat
    eigs = np.linalg.eigvalsh(0.5 * (total + total.T))
    return {
        "indices": indices,
        "v": v_mat, "v_stderr": v_err,
        "l": l_mat, "l_stderr": l_err,
        "r": r_mat, "r_stderr": r_err,
        "c_k": float(eigs[-1]),
        "min_eig": {"v": float(np.linalg.eigvalsh(v_mat)[0]),
                    "l": float(np.linalg.eigvalsh(l_mat)[0]),
                    "r": float(np.linalg.eigvalsh(r_mat)[0])},
        "n_samples": n_samples, "seed": seed,
    }
