"""Free energy, sharp-constant estimation and the dissipation threshold.

The driving functional for the flow is

    E_alpha[f] = ||f||_{2d/(d+2)}^2 - (alpha / C_HLS) * int f (-Delta)^{-1} f dx,

where C_HLS normalizes the interaction term so that alpha = 1 is critical:
with C_HLS = sup_f int f (-Delta)^{-1} f / ||f||^2 the functional is
nonnegative for alpha <= 1 and vanishes at the extremal profile
h = (1 + |x|^2)^{-(d+2)/2}.

Two conventions coexist for "the HLS constant".  `chls` estimates the
classical Riesz-kernel quotient

    C_riesz = sup_f (iint f(x) f(y) |x-y|^{2-d} dx dy) / ||f||_{2d/(d+2)}^2,

while the coupling above needs the Coulomb-form constant

    C_coulomb = C_riesz / ((d-2) sigma_{d-1}),

because (-Delta)^{-1} carries the Green-function factor 1/((d-2) sigma_{d-1}).
`coulomb_hls_constant` converts; everything downstream (kappa, K, alpha_0)
uses the Coulomb form.

The L^q dissipation machinery (q = 2d/(d+2)) rests on the identity, for
u = f^{(3d-2)/(2(d+2))},

    d/dt int f^q dx = I + II,
    I  = -c_I ||f||_{2d/(d+2)}^{4/(d+2)} int |grad u|^2 dx,   c_I = 16 d (d-2)^2 / ((d+2)(3d-2)^2),
    II = (q-1) kappa int f^{q+1} dx,

and on the interpolation inequality (sharp constant C_GNS)

    ||u||_a^{theta_a} ||grad u||_2^{theta_g} >= C_GNS^{-1} ||u||_b,
    a = 4d/(3d-2),  b = 2(3d+2)/(3d-2),  theta_a = 4/(3d+2),  theta_g = (3d-2)/(3d+2),

which combine into d/dt int f^q <= -K int f^{q+1} with

    K = ((d-2)/(d+2)) * (P / C_GNS^b - kappa),   P = 16 d (d-2) / (3d-2)^2,

so int f^q is strictly dissipated whenever kappa < P / C_GNS^b, i.e. for
alpha below  alpha_0 = P * C_HLS / C_GNS^b.

Note on c_I and P: a published variant of this derivation carries (d+1)
where the chain rule gives (d+2).  Differentiating int f^q along the flow
and integrating by parts yields q^2 (q-1) A int f^{2q-3} |grad f|^2 with
A = ((d-2)/d) ||f||^{4/(d+2)}, i.e. c_I = ((d-2)/d) q^2 (q-1) / s^2 with
s = q - 1/2; this simplifies to the (d+2) form used here.  The (d+2) form is
also what measured dissipation rates reproduce to discretization accuracy
(see tests), so it is the one used throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize

from .grid import RadialDensity, RadialGrid, lp_norm, sphere_surface_area
from .potential import coulomb_energy
from .tolerances import TOLERANCES


# ---------------------------------------------------------------------------
# exponent bookkeeping
# ---------------------------------------------------------------------------

def lq_exponent(d: int) -> float:
    """The monitored Lebesgue exponent q = 2d/(d+2) (also the diffusion power)."""
    if d < 3:
        raise ValueError(f"dimension must be >= 3, got {d}")
    return 2.0 * d / (d + 2)


def substitution_power(d: int) -> float:
    """Power s with u = f^s in the dissipation identity; s = (3d-2)/(2(d+2))."""
    return (3.0 * d - 2) / (2.0 * (d + 2))


def gns_exponents(q: float, d: int):
    """Exponents (a, b, theta_a, theta_grad) of the interpolation inequality.

    For general q > 1:  a = 4d/(q(d+2)+d-2),  b = 2(q+1)(d+2)/(q(d+2)+d-2),
    theta_a = 4/((q+1)(d+2)),  theta_grad = (q(d+2)+d-2)/((q+1)(d+2)).
    theta_a + theta_grad = 1 and the quotient ||u||_b / (||u||_a^theta_a
    ||grad u||_2^theta_grad) is invariant under u -> c u and u -> u(./lam).
    """
    if q <= 1:
        raise ValueError(f"q must be > 1, got {q}")
    den = q * (d + 2) + d - 2
    a = 4.0 * d / den
    b = 2.0 * (q + 1) * (d + 2) / den
    theta_a = 4.0 / ((q + 1) * (d + 2))
    theta_g = den / ((q + 1) * (d + 2))
    if min(a, b) <= 0:
        raise ValueError(f"inadmissible Lebesgue exponents for q={q}, d={d}")
    return a, b, theta_a, theta_g


def dissipation_prefactor(d: int) -> float:
    """P = 16 d (d-2) / (3d-2)^2, the coefficient of C_GNS^{-b} in the threshold."""
    if d < 3:
        raise ValueError(f"dimension must be >= 3, got {d}")
    return 16.0 * d * (d - 2) / (3.0 * d - 2) ** 2


def gradient_term_coefficient(d: int) -> float:
    """c_I = 16 d (d-2)^2 / ((d+2)(3d-2)^2), multiplying the |grad u|^2 integral in I."""
    return 16.0 * d * (d - 2) ** 2 / ((d + 2) * (3.0 * d - 2) ** 2)


def gns_power(d: int) -> float:
    """Exponent b = 2(3d+2)/(3d-2) with which C_GNS enters K and alpha_0."""
    return 2.0 * (3.0 * d + 2) / (3.0 * d - 2)


def coulomb_hls_constant(d: int, chls_riesz: float) -> float:
    """Convert the Riesz-kernel constant to the Coulomb-form constant."""
    return chls_riesz / ((d - 2) * sphere_surface_area(d))


# ---------------------------------------------------------------------------
# free energy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyBreakdown:
    """E_alpha[f] split into its two terms plus the equivalent convex split.

    total = norm_term - coulomb_term and alt_total = alpha*E_1 +
    (1-alpha)*norm_term agree identically; both are kept as a bookkeeping
    check.  `c_hls` is the Coulomb-form constant (kappa = alpha / c_hls).
    """

    norm_term: float
    coulomb_term: float
    total: float
    alt_total: float
    alpha: float
    kappa: float


def energy(f: RadialDensity, alpha: float, c_hls: float) -> EnergyBreakdown:
    """Evaluate E_alpha[f] = ||f||_{2d/(d+2)}^2 - (alpha/c_hls) int f(-Delta)^{-1}f.

    `c_hls` must be the Coulomb-form HLS constant, so that E_1 >= 0 with
    equality at the extremal profile.
    """
    if alpha < 0:
        raise ValueError("alpha must be positive")
    if c_hls <= 0:
        raise ValueError("c_hls must be positive")
    d = f.grid.d
    norm_term = lp_norm(f, lq_exponent(d)) ** 2
    interaction = coulomb_energy(f)
    coulomb_term = (alpha / c_hls) * interaction
    total = norm_term - coulomb_term
    e1 = norm_term - interaction / c_hls
    alt_total = alpha * e1 + (1.0 - alpha) * norm_term
    return EnergyBreakdown(norm_term, coulomb_term, total, alt_total,
                           alpha, alpha / c_hls)


# ---------------------------------------------------------------------------
# HLS constant by quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChlsEstimate:
    value: float           # Riesz-kernel quotient
    error: float           # empirical quadrature error bound
    coulomb: float         # value / ((d-2) sigma_{d-1})
    d: int
    tol: float


def chls(d: int, tol: float = 1e-10) -> ChlsEstimate:
    """Riesz-kernel HLS quotient at the extremal profile, by adaptive quadrature.

    Evaluates  [iint h(x) h(y) |x-y|^{2-d} dx dy] / ||h||_{2d/(d+2)}^2  with
    h = (1+|x|^2)^{-(d+2)/2}.  The angular average of |x-y|^{2-d} over a
    sphere is max(|x|,|y|)^{2-d}, so the double integral reduces to

        2 sigma^2 int_0^inf h(s) s [ int_0^s h(r) r^{d-1} dr ] ds,

    computed with nested adaptive (Gauss-Kronrod) quadrature; the outer
    integral is mapped to (0,1) via s = t/(1-t).  The reported error bound
    combines the quadrature estimates of all three integrals.
    """
    if d < 3:
        raise ValueError(f"dimension must be >= 3, got {d}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    sigma = sphere_surface_area(d)
    expo = (d + 2) / 2.0

    def h(r):
        return (1.0 + r * r) ** (-expo)

    inner_tol = tol / 10.0

    def inner(s):
        val, _ = quad(lambda r: h(r) * r ** (d - 1), 0.0, s,
                      epsabs=inner_tol, epsrel=inner_tol, limit=200)
        return val

    def outer(t):
        s = t / (1.0 - t)
        jac = 1.0 / (1.0 - t) ** 2
        return h(s) * s * inner(s) * jac

    num_raw, num_err = quad(outer, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    numerator = 2.0 * sigma ** 2 * num_raw

    p = lq_exponent(d)

    def norm_integrand(t):
        r = t / (1.0 - t)
        return (1.0 + r * r) ** (-d) * r ** (d - 1) / (1.0 - t) ** 2

    den_raw, den_err = quad(norm_integrand, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    denominator = (sigma * den_raw) ** (2.0 / p)

    value = numerator / denominator
    rel = (num_err / max(num_raw, tol) + inner_tol
           + (2.0 / p) * den_err / max(den_raw, tol))
    return ChlsEstimate(value=value, error=abs(value) * rel,
                        coulomb=coulomb_hls_constant(d, value), d=d, tol=tol)


# ---------------------------------------------------------------------------
# GNS constant by Rayleigh-quotient maximization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CgnsEstimate:
    value: float            # best quotient found (estimate of C_GNS)
    residual: float         # projected-gradient stationarity residual
    spread: float           # relative spread across optimizer starts
    start_values: np.ndarray
    q: float
    d: int
    n_cells: int
    r_max: float
    seed: int
    low_confidence: bool


def gns_quotient(u: np.ndarray, q: float, d: int, grid: RadialGrid) -> float:
    """Discrete quotient ||u||_b / (||u||_a^theta_a ||grad u||_2^theta_g)."""
    logq, _ = _gns_logq_grad(np.asarray(u, dtype=float), q, d, grid)
    return math.exp(logq)


def _gns_logq_grad(u, q, d, grid):
    """log of the quotient and its gradient with respect to cell values."""
    a, b, th_a, th_g = gns_exponents(q, d)
    vols = grid.volumes
    au = np.abs(u)
    sa = np.sum(au ** a * vols)
    sb = np.sum(au ** b * vols)
    dc = grid.center_spacing()
    re = grid.interior_edges()
    w = grid.sigma * re ** (d - 1) * dc
    du = np.diff(u) / dc
    g2 = np.sum(du ** 2 * w)
    if sa <= 0 or sb <= 0 or g2 <= 0:
        return -np.inf, np.zeros_like(u)
    logq = np.log(sb) / b - (th_a / a) * np.log(sa) - 0.5 * th_g * np.log(g2)
    sgn = np.sign(u)
    grad_sb = b * au ** (b - 1) * sgn * vols
    grad_sa = a * au ** (a - 1) * sgn * vols
    t = 2.0 * du * w / dc
    grad_g2 = np.zeros_like(u)
    grad_g2[1:] += t
    grad_g2[:-1] -= t
    grad = grad_sb / (b * sb) - th_a * grad_sa / (a * sa) - 0.5 * th_g * grad_g2 / g2
    return logq, grad


def _gns_starts(grid: RadialGrid, d: int, rng: np.random.Generator):
    """Trial profiles: compact parabolic powers, Gaussians, power-law tails, bumps."""
    r = grid.centers
    starts = []
    for R in (grid.r_max / 12, grid.r_max / 6, grid.r_max / 3):
        for p in (1.5, 2.5, 3.5, 5.0):
            starts.append(np.maximum(1.0 - (r / R) ** 2, 0.0) ** p)
    for w in (grid.r_max / 24, grid.r_max / 8):
        starts.append(np.exp(-r ** 2 / (2.0 * w ** 2)))
    for g in ((d + 2) / 2.0, float(d)):
        starts.append((1.0 + r ** 2) ** (-g))
    for _ in range(2):
        w = rng.uniform(grid.r_max / 20, grid.r_max / 8)
        pert = 1.0 + 0.3 * np.sin(rng.uniform(0, 2 * np.pi) + rng.uniform(0.5, 3.0) * r / w)
        starts.append(np.exp(-r ** 2 / (2.0 * w ** 2)) * np.abs(pert))
    return starts


def cgns(q: float, d: int, grid: RadialGrid | None = None, *,
         n_cells: int = 1200, r_max: float = 24.0, seed: int = 0,
         maxiter: int = 3000, spread_tol: float = 0.05) -> CgnsEstimate:
    """Estimate the sharp interpolation constant by projected ascent.

    Maximizes the discrete Rayleigh quotient over nonnegative radial grid
    functions from multiple starts (bound-constrained quasi-Newton on the
    log-quotient).  Every trial function certifies a lower bound, so the
    returned value is a lower estimate of the continuum constant up to the
    grid's gradient-discretization error.

    Parameters
    ----------
    q, d : inequality parameters; exponents from `gns_exponents`.
    grid : optimization grid (uniform default built from n_cells, r_max).
    seed : seed for the randomized starts; results are deterministic given it.
    spread_tol : relative inter-start spread above which the estimate is
        marked low confidence.
    """
    if grid is None:
        grid = RadialGrid.uniform(d, n_cells, r_max)
    rng = np.random.default_rng(seed)
    starts = _gns_starts(grid, d, rng)

    def neg(u):
        v, g = _gns_logq_grad(u, q, d, grid)
        return -v, -g

    best_val, best_u, values = -np.inf, None, []
    bounds = [(0.0, None)] * grid.n_cells
    for u0 in starts:
        res = minimize(neg, u0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options=dict(maxiter=maxiter, ftol=1e-16, gtol=1e-14))
        val = math.exp(-res.fun)
        values.append(val)
        if val > best_val:
            best_val, best_u = val, res.x
    values = np.array(values)
    # stationarity of the best point: projected gradient, scaled by the profile
    _, g = _gns_logq_grad(best_u, q, d, grid)
    g_proj = np.where((best_u <= 0) & (g < 0), 0.0, g)
    residual = float(np.linalg.norm(g_proj * best_u) / max(np.linalg.norm(best_u), 1e-300))
    spread = float((values.max() - values.min()) / values.max())
    return CgnsEstimate(value=best_val, residual=residual, spread=spread,
                        start_values=values, q=q, d=d, n_cells=grid.n_cells,
                        r_max=grid.r_max, seed=seed,
                        low_confidence=spread > spread_tol)


# ---------------------------------------------------------------------------
# threshold and dissipation coefficient
# ---------------------------------------------------------------------------

def alpha0(d: int, c_hls: float, c_gns: float) -> float:
    """Critical coupling alpha_0 = P(d) * c_hls / c_gns^{b(d)}.

    `c_hls` must be the Coulomb-form constant (the one defining kappa).
    Below alpha_0 the L^q mass is strictly dissipated.
    """
    if c_hls <= 0 or c_gns <= 0:
        raise ValueError("constants must be positive")
    return dissipation_prefactor(d) * c_hls / c_gns ** gns_power(d)


def k_coefficient(d: int, alpha: float, c_hls: float, c_gns: float,
                  drift_factor: float = 1.0) -> float:
    """Dissipation coefficient K in  d/dt int f^q <= -K int f^{q+1}.

    K = ((d-2)/(d+2)) (P / c_gns^b - kappa) with kappa = drift_factor *
    alpha / c_hls.  Affine and strictly decreasing in alpha; K > 0 iff
    alpha < alpha_0 / drift_factor, K(alpha_0) = 0 for drift_factor 1.
    """
    kappa = drift_factor * alpha / c_hls
    return ((d - 2) / (d + 2)) * (dissipation_prefactor(d) / c_gns ** gns_power(d) - kappa)


# ---------------------------------------------------------------------------
# consolidated report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantsReport:
    """All estimated constants for one dimension, with diagnostics.

    alpha0 is computed from the Coulomb-form HLS constant.  The advertised
    range is 0 < alpha0 < 1; `alpha0_in_unit_interval` records whether the
    estimate actually lands there (it need not), and downstream consumers
    clamp tested couplings to (0, min(alpha0, 1)).
    """

    d: int
    c_hls: float
    c_hls_err: float
    c_hls_coulomb: float
    c_gns: float
    c_gns_residual: float
    c_gns_spread: float
    alpha0: float
    prefactor: float
    exponent: float
    seed: int
    alpha0_in_unit_interval: bool = field(init=False)

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        object.__setattr__(self, "alpha0_in_unit_interval", 0.0 < self.alpha0 < 1.0)

    def kappa(self, alpha: float, drift_factor: float = 1.0) -> float:
        return drift_factor * alpha / self.c_hls_coulomb

    def k_of_alpha(self, alpha: float, drift_factor: float = 1.0) -> float:
        return k_coefficient(self.d, alpha, self.c_hls_coulomb, self.c_gns, drift_factor)

    def clamped_alpha0(self) -> float:
        return min(self.alpha0, 1.0)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "c_hls": self.c_hls,
            "c_hls_err": self.c_hls_err,
            "c_hls_coulomb": self.c_hls_coulomb,
            "c_gns": self.c_gns,
            "c_gns_residual": self.c_gns_residual,
            "c_gns_spread": self.c_gns_spread,
            "alpha0": self.alpha0,
            "alpha0_in_unit_interval": self.alpha0_in_unit_interval,
            "prefactor": self.prefactor,
            "exponent": self.exponent,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConstantsReport":
        keys = ("d", "c_hls", "c_hls_err", "c_hls_coulomb", "c_gns",
                "c_gns_residual", "c_gns_spread", "alpha0", "prefactor",
                "exponent", "seed")
        return cls(**{k: data[k] for k in keys})


def compute_constants(d: int, tol: float = 1e-10, seed: int = 0,
                      n_cells: int = 1200, r_max: float = 24.0) -> ConstantsReport:
    """Estimate C_HLS (quadrature) and C_GNS (optimization); assemble the report."""
    hls = chls(d, tol)
    q = lq_exponent(d)
    gns = cgns(q, d, n_cells=n_cells, r_max=r_max, seed=seed)
    a0 = alpha0(d, hls.coulomb, gns.value)
    return ConstantsReport(
        d=d, c_hls=hls.value, c_hls_err=hls.error, c_hls_coulomb=hls.coulomb,
        c_gns=gns.value, c_gns_residual=gns.residual, c_gns_spread=gns.spread,
        alpha0=a0, prefactor=dissipation_prefactor(d), exponent=gns_power(d),
        seed=seed)
