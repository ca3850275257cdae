"""Newtonian potential and drift field for radial densities.

For radial f the solution of -Delta u = f decaying at infinity depends only
on the cumulative mass M(r) = int_{|x|<r} f dx (Newton's theorem):

    u'(r) = -M(r) / (sigma_{d-1} r^{d-1}),
    u(r)  = u(R_max) + int_r^{R_max} M(s) / (sigma_{d-1} s^{d-1}) ds,

with the exact monopole tail u(r) = M_tot / ((d-2) sigma_{d-1} r^{d-2}) for
r >= R_max.  For a piecewise-constant density M(s) is a + b s^d on every
cell, so all integrals here are evaluated in closed form: the potential,
its cell averages and the interaction energy of the represented density are
exact up to roundoff.  Everything is O(N) via cumulative sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import RadialDensity, RadialGrid, lp_norm


def _mass_coefficients(f: RadialDensity):
    """Per-cell (a, b) with M(s) = a + b s^d inside each cell, plus edge masses."""
    grid = f.grid
    m_edge = np.concatenate(([0.0], np.cumsum(f.values * grid.volumes)))
    b = f.values * grid.sigma / grid.d
    a = m_edge[:-1] - b * grid.edges[:-1] ** grid.d
    a[0] = 0.0  # M ~ r^d at the origin, no constant part
    return a, b, m_edge


def _potential_cell_integrals(grid: RadialGrid, a, b, lo, hi):
    """Exact int_lo^hi M(s)/(sigma s^{d-1}) ds with M = a + b s^d per cell."""
    d, sigma = grid.d, grid.sigma
    with np.errstate(divide="ignore"):
        pow_hi = hi ** (2.0 - d)
        pow_lo = np.where(lo > 0, lo ** (2.0 - d), 0.0)
    t1 = np.where(a != 0.0, a * (pow_hi - pow_lo) / (2.0 - d), 0.0)
    t2 = 0.5 * b * (hi ** 2 - lo ** 2)
    return (t1 + t2) / sigma


@dataclass(frozen=True)
class PotentialField:
    """Potential u = (-Delta)^{-1} f of a radial density.

    Carries u at cell centers and at all edges, the radial derivative at
    edges (exactly -M/(sigma r^{d-1}) by construction) and the cumulative
    mass profile.  `evaluate` gives the exact potential of the piecewise
    constant density at arbitrary radii, including the monopole tail beyond
    R_max.
    """

    grid: RadialGrid
    u_centers: np.ndarray
    u_edges: np.ndarray
    du_edges: np.ndarray      # derivative at edges[0..N], du_edges[0] = 0
    m_edges: np.ndarray       # cumulative mass at edges
    _a: np.ndarray
    _b: np.ndarray

    @property
    def total_mass(self) -> float:
        return float(self.m_edges[-1])

    def evaluate(self, r):
        """Potential at arbitrary radii r >= 0 (scalar or array)."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        if np.any(r < 0):
            raise ValueError("radii must be nonnegative")
        grid = self.grid
        d, sigma = grid.d, grid.sigma
        out = np.empty_like(r)
        outside = r >= grid.r_max
        if np.any(outside):
            with np.errstate(divide="ignore"):
                out[outside] = self.total_mass / ((d - 2) * sigma * r[outside] ** (d - 2))
        inside = ~outside
        if np.any(inside):
            ri = r[inside]
            idx = np.clip(np.searchsorted(grid.edges, ri, side="right") - 1, 0, grid.n_cells - 1)
            part = _potential_cell_integrals(grid, self._a[idx], self._b[idx], ri, grid.edges[idx + 1])
            out[inside] = self.u_edges[idx + 1] + part
        return float(out[0]) if scalar else out


def newtonian_potential(f: RadialDensity) -> PotentialField:
    """Solve -Delta u = f for radial f, decaying at infinity.

    Exact (up to roundoff) for the piecewise-constant density, including the
    monopole tail beyond the grid.
    """
    grid = f.grid
    d, sigma = grid.d, grid.sigma
    a, b, m_edge = _mass_coefficients(f)
    tail = m_edge[-1] / ((d - 2) * sigma * grid.r_max ** (d - 2))
    cell_int = _potential_cell_integrals(grid, a, b, grid.edges[:-1], grid.edges[1:])
    u_edges = tail + np.concatenate((np.cumsum(cell_int[::-1])[::-1], [0.0]))
    part = _potential_cell_integrals(grid, a, b, grid.centers, grid.edges[1:])
    u_centers = u_edges[1:] + part
    with np.errstate(divide="ignore", invalid="ignore"):
        du = -m_edge / (sigma * grid.edges ** (d - 1))
    du[0] = 0.0
    return PotentialField(grid, u_centers, u_edges, du, m_edge, a, b)


def coulomb_energy(f: RadialDensity) -> float:
    """Interaction energy int f (-Delta)^{-1} f dx, exact for the cell density.

    Uses the cumulative-mass identity int f u dx = int_0^inf M(s)^2 /
    (sigma s^{d-1}) ds, whose integrand is piecewise polynomial here; the
    range beyond R_max contributes the monopole term M_tot^2 / ((d-2) sigma
    R_max^{d-2}).  Strictly positive for nonzero f.
    """
    grid = f.grid
    d, sigma = grid.d, grid.sigma
    a, b, m_edge = _mass_coefficients(f)
    lo, hi = grid.edges[:-1], grid.edges[1:]
    with np.errstate(divide="ignore"):
        pow_hi = hi ** (2.0 - d)
        pow_lo = np.where(lo > 0, lo ** (2.0 - d), 0.0)
    t1 = np.where(a != 0.0, a ** 2 * (pow_hi - pow_lo) / (2.0 - d), 0.0)
    t2 = a * b * (hi ** 2 - lo ** 2)
    t3 = b ** 2 * (hi ** (d + 2) - lo ** (d + 2)) / (d + 2)
    inner = np.sum(t1 + t2 + t3) / sigma
    tail = m_edge[-1] ** 2 / ((d - 2) * sigma * grid.r_max ** (d - 2))
    return float(inner + tail)


def drift_field(f: RadialDensity, kappa: float) -> np.ndarray:
    """Radial drift component at interior edges.

    Returns  d*kappa / ((d-2) ||f||_{2d/(d+2)}^{4/(d+2)}) * u'(r)  evaluated
    at edges r_1 .. r_{N-1}, with u'(r) = -M(r)/(sigma r^{d-1}).  The values
    are <= 0: the drift always points inward.
    """
    grid = f.grid
    d = grid.d
    norm = lp_norm(f, 2.0 * d / (d + 2))
    if norm == 0.0:
        raise ValueError("drift field undefined for zero density")
    _, _, m_edge = _mass_coefficients(f)
    re = grid.interior_edges()
    du = -m_edge[1:-1] / (grid.sigma * re ** (d - 1))
    return d * kappa / ((d - 2) * norm ** (4.0 / (d + 2))) * du
