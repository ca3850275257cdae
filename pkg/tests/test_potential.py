"""Newtonian potential, drift field and interaction energy.

Oracles: the uniform unit ball in d=3 has the classical interior potential
u(r) = (3 - r^2)/6 and exterior u(r) = M/(4 pi r); its self-interaction
energy sigma_2 int_0^1 u(s) s^2 ds evaluates to 8 pi / 15.  The generic
cross-check for `coulomb_energy` is an O(N^2) double sum over exact
cell-pair integrals of the max(r,s)^{2-d} kernel.
"""

import math

import numpy as np
import pytest

from radialflow import (RadialDensity, RadialGrid, TOLERANCES, coulomb_energy,
                        drift_field, lp_norm, mass, newtonian_potential,
                        sphere_surface_area)
from conftest import convergence_order, gaussian_density, random_density


def ball_density(grid, radius=1.0):
    vals = np.where(grid.edges[1:] <= radius + 1e-15, 1.0, 0.0)
    return RadialDensity(grid, vals)


# ---------------------------------------------------------------------------
# potential of the uniform ball (analytic oracle)
# ---------------------------------------------------------------------------

def test_zero_density_zero_potential():
    g = RadialGrid.uniform(3, 64, 2.0)
    u = newtonian_potential(RadialDensity(g, np.zeros(64)))
    assert np.all(u.u_centers == 0.0)
    assert np.all(u.u_edges == 0.0)


def test_uniform_ball_interior_and_exterior():
    g = RadialGrid.uniform(3, 1024, 2.0)
    u = newtonian_potential(ball_density(g))
    assert u.evaluate(0.0) == pytest.approx(0.5, rel=1e-12)
    for r in (0.25, 0.5, 0.9):
        assert u.evaluate(r) == pytest.approx((3 - r * r) / 6, rel=1e-12)
    m = 4 * math.pi / 3
    for r in (1.0, 1.5, 2.0, 3.7):
        assert u.evaluate(r) == pytest.approx(m / (4 * math.pi * r), rel=1e-12)
    # center values follow the same closed forms
    idx = np.searchsorted(g.centers, 0.5)
    rc = g.centers[idx]
    assert u.u_centers[idx] == pytest.approx((3 - rc * rc) / 6, rel=1e-12)


def test_newton_theorem_exterior_general():
    # compactly supported f: outside the support, u depends on mass alone
    g = RadialGrid.uniform(4, 512, 6.0)
    vals = np.exp(-np.maximum(g.centers - 1.0, 0) ** 2 / 0.1) * (g.centers < 2.0)
    f = RadialDensity(g, vals)
    u = newtonian_potential(f)
    m = mass(f)
    d, sigma = 4, sphere_surface_area(4)
    for r in (2.5, 4.0, 6.0):
        expect = m / ((d - 2) * sigma * r ** (d - 2))
        assert u.evaluate(r) == pytest.approx(expect, rel=TOLERANCES["newton_exterior_rel"])


def test_flux_identity_exact_by_construction():
    g = RadialGrid.uniform(3, 256, 4.0)
    f = gaussian_density(g)
    u = newtonian_potential(f)
    m_edges = np.concatenate(([0.0], np.cumsum(f.values * g.volumes)))
    expect = -m_edges[1:] / (g.sigma * g.edges[1:] ** 2)
    assert np.allclose(u.du_edges[1:], expect, rtol=1e-14, atol=0)
    assert u.du_edges[0] == 0.0
    # monotone cumulative mass, positive decreasing potential
    assert np.all(np.diff(u.m_edges) >= 0)
    assert np.all(u.u_centers > 0)


def test_discrete_laplacian_recovers_density():
    # FV Laplacian of the potential returns -f to second order on smooth data
    errs = []
    for n in (128, 256, 512, 1024):
        g = RadialGrid.uniform(3, n, 8.0)
        f = gaussian_density(g)
        u = newtonian_potential(f)
        dc = g.center_spacing()
        flux = g.sigma * g.interior_edges() ** 2 * np.diff(u.u_centers) / dc
        lap = np.diff(flux) / g.volumes[1:-1]
        errs.append(np.max(np.abs(lap + f.values[1:-1])))
    assert np.all(convergence_order(errs) > 1.8)


# ---------------------------------------------------------------------------
# interaction energy
# ---------------------------------------------------------------------------

def test_coulomb_energy_zero_and_positive():
    g = RadialGrid.uniform(3, 128, 2.0)
    assert coulomb_energy(RadialDensity(g, np.zeros(128))) == 0.0
    rng = np.random.default_rng(3)
    for _ in range(5):
        f = random_density(g, rng)
        if mass(f) > 0:
            assert coulomb_energy(f) > 0


def test_coulomb_energy_uniform_ball():
    # sigma_2 int_0^1 (3 - s^2)/6 s^2 ds = 8 pi / 15
    g = RadialGrid.uniform(3, 1024, 2.0)
    assert coulomb_energy(ball_density(g)) == pytest.approx(8 * math.pi / 15, rel=1e-12)


def pair_sum_oracle(f):
    """O(N^2) interaction energy: exact cell-pair integrals of the kernel.

    iint over cell_i x cell_j of c_d sigma^2 max(r,s)^{2-d} r^{d-1} s^{d-1}
    with c_d = 1/((d-2) sigma).  For i < j the kernel is s^{2-d}; the
    diagonal splits at r = s.
    """
    g = f.grid
    d, sigma = g.d, g.sigma
    c_d = 1.0 / ((d - 2) * sigma)
    lo, hi = g.edges[:-1], g.edges[1:]
    s_int = 0.5 * (hi ** 2 - lo ** 2)                 # int_cell s ds
    w_off = c_d * sigma * np.outer(g.volumes, s_int)  # W_ij for i < j (use upper triangle)
    diag = (2 * c_d * sigma ** 2 / d) * (
        (hi ** (d + 2) - lo ** (d + 2)) / (d + 2) - lo ** d * s_int)
    fv = f.values
    quad_form = np.outer(fv, fv) * w_off
    upper = np.triu(quad_form, k=1).sum()
    return 2 * upper + float(np.sum(fv ** 2 * diag))


@pytest.mark.parametrize("seed", [0, 1])
def test_coulomb_energy_matches_pair_sum(seed):
    g = RadialGrid.uniform(3, 256, 4.0)
    rng = np.random.default_rng(seed)
    f = random_density(g, rng, smooth=True)
    direct = coulomb_energy(f)
    oracle = pair_sum_oracle(f)
    assert direct == pytest.approx(oracle, rel=TOLERANCES["coulomb_pair_sum_rel"])


def test_coulomb_energy_matches_center_value_sum():
    # sum_i f_i u_i V_i with center values agrees at second order in dr
    errs = []
    for n in (512, 1024, 2048):
        g = RadialGrid.uniform(3, n, 8.0)
        f = gaussian_density(g)
        u = newtonian_potential(f)
        center_sum = float(np.sum(f.values * u.u_centers * g.volumes))
        errs.append(abs(center_sum - coulomb_energy(f)) / coulomb_energy(f))
    assert errs[-1] < 2e-6
    assert np.all(convergence_order(errs) > 1.9)


# ---------------------------------------------------------------------------
# drift field
# ---------------------------------------------------------------------------

def test_drift_field_ball_value_and_sign():
    g = RadialGrid.uniform(3, 1024, 4.0)
    f = ball_density(g)
    kappa = 1.0
    drift = drift_field(f, kappa)
    re = g.interior_edges()
    norm = lp_norm(f, 6 / 5)
    # at r = 2: u'(2) = -(4 pi / 3)/(4 pi * 4) = -1/12, scaled by 3 kappa / ||f||^{4/5}
    j = np.argmin(np.abs(re - 2.0))
    expect = 3 * kappa / norm ** 0.8 * (-1.0 / 12.0)
    assert drift[j] == pytest.approx(expect, rel=1e-12)
    assert np.all(drift <= 0)


def test_drift_field_vanishes_without_enclosed_mass():
    g = RadialGrid.uniform(3, 128, 4.0)
    vals = np.where(g.centers > 2.0, 1.0, 0.0)       # hollow shell
    drift = drift_field(RadialDensity(g, vals), 1.0)
    inner = g.interior_edges() <= 2.0
    assert np.all(drift[inner] == 0.0)
    assert np.all(drift[~inner] < 0.0)


def test_drift_field_linear_in_kappa():
    g = RadialGrid.uniform(3, 128, 4.0)
    f = gaussian_density(g)
    assert np.allclose(drift_field(f, 2.0), 2.0 * drift_field(f, 1.0), rtol=1e-14)


def test_drift_field_rejects_zero_density():
    g = RadialGrid.uniform(3, 32, 2.0)
    with pytest.raises(ValueError):
        drift_field(RadialDensity(g, np.zeros(32)), 1.0)
