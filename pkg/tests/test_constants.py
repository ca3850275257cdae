"""Sharp constants, free energy and threshold formulas.

Oracles: Lieb's closed-form sharp constant for the |x-y|^{2-d} kernel,

    C(d) = pi^{(d-2)/2} / Gamma((d+2)/2) * (Gamma(d)/Gamma(d/2))^{2/d},

an importance-sampled Monte Carlo estimate of the reduced double integral,
and hand-chained arithmetic for the threshold formulas.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from radialflow import (RadialDensity, RadialGrid, TOLERANCES, alpha0, cgns,
                        chls, coulomb_hls_constant, dissipation_prefactor,
                        energy, gns_exponents, gns_power, gns_quotient,
                        gradient_term_coefficient, k_coefficient, lq_exponent,
                        sphere_surface_area, substitution_power)
from conftest import gaussian_density, random_density


def lieb_constant(d):
    """Independent Gamma-expression oracle for the sharp Riesz-kernel quotient."""
    lam = d - 2
    return (math.pi ** (lam / 2) * math.gamma((d - lam) / 2) / math.gamma(d - lam / 2)
            * (math.gamma(d / 2) / math.gamma(d)) ** (-1 + lam / d))


# ---------------------------------------------------------------------------
# exponent bookkeeping
# ---------------------------------------------------------------------------

def test_lq_exponent_and_substitution_power():
    assert lq_exponent(3) == pytest.approx(6 / 5, abs=1e-15)
    assert lq_exponent(4) == pytest.approx(4 / 3, abs=1e-15)
    # s = q - 1/2, the power with f^{2s-2} |grad f|^2 = |grad f^s|^2 / s^2
    for d in (3, 4, 5, 7):
        assert substitution_power(d) == pytest.approx(lq_exponent(d) - 0.5, abs=1e-15)
    assert substitution_power(3) == pytest.approx(0.7, abs=1e-15)


def test_gns_exponents_d3():
    a, b, th_a, th_g = gns_exponents(6 / 5, 3)
    assert a == pytest.approx(12 / 7, abs=1e-14)
    assert b == pytest.approx(22 / 7, abs=1e-14)
    assert th_a == pytest.approx(4 / 11, abs=1e-14)
    assert th_g == pytest.approx(7 / 11, abs=1e-14)
    assert th_a + th_g == pytest.approx(1.0, abs=1e-14)
    # q(d+2)+d-2 evaluates to 7 at d=3, q=6/5
    assert 6 / 5 * 5 + 1 == pytest.approx(7.0)
    with pytest.raises(ValueError):
        gns_exponents(1.0, 3)


def test_gns_exponents_dimensional_balance():
    # the quotient must be invariant under dilation: d/b = th_a d/a + th_g (d/2 - 1)
    for d in (3, 4, 5, 6):
        q = lq_exponent(d)
        a, b, th_a, th_g = gns_exponents(q, d)
        lhs = d / b
        rhs = th_a * d / a + th_g * (d / 2 - 1)
        assert lhs == pytest.approx(rhs, abs=1e-13)


def test_dissipation_prefactor_derivation_chain():
    # independent route: P = c_I / (q-1) with c_I = ((d-2)/d) q^2 (q-1) / s^2
    for d in (3, 4, 5):
        q = lq_exponent(d)
        s = substitution_power(d)
        c_i = ((d - 2) / d) * q ** 2 * (q - 1) / s ** 2
        assert gradient_term_coefficient(d) == pytest.approx(c_i, rel=1e-14)
        assert dissipation_prefactor(d) == pytest.approx(c_i / (q - 1), rel=1e-14)
    assert dissipation_prefactor(3) == pytest.approx(48 / 49, rel=1e-14)
    assert gns_power(3) == pytest.approx(22 / 7, rel=1e-14)
    assert gns_power(4) == pytest.approx(2.8, rel=1e-14)


# ---------------------------------------------------------------------------
# HLS constant
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("d", [3, 4])
def test_chls_matches_closed_form(d):
    est = chls(d, tol=1e-10)
    assert est.value == pytest.approx(lieb_constant(d), rel=1e-8)
    assert est.error < 1e-6 * est.value
    assert est.coulomb == pytest.approx(
        est.value / ((d - 2) * sphere_surface_area(d)), rel=1e-14)


def test_chls_error_bound_honesty():
    loose = chls(3, tol=1e-6)
    tight = chls(3, tol=1e-8)
    assert abs(loose.value - tight.value) <= max(loose.error, tight.error)


def test_chls_monte_carlo_oracle():
    # importance-sampled 2-D Monte Carlo of the reduced double integral
    d = 3
    sigma = sphere_surface_area(d)
    rng = np.random.default_rng(42)
    n = 2 ** 21
    t = rng.uniform(size=(2, n))
    r = t / (1.0 - t)
    jac = (1.0 - t) ** -2
    h = (1.0 + r ** 2) ** (-(d + 2) / 2)
    vals = (sigma ** 2 * h[0] * h[1] * np.maximum(r[0], r[1]) ** (2 - d)
            * r[0] ** (d - 1) * r[1] ** (d - 1) * jac[0] * jac[1])
    num_mc = vals.mean()
    num_se = vals.std(ddof=1) / math.sqrt(n)
    den, _ = quad(lambda u: (1 + (u / (1 - u)) ** 2) ** (-d) * (u / (1 - u)) ** (d - 1)
                  / (1 - u) ** 2, 0, 1, epsabs=1e-12, epsrel=1e-12)
    p = lq_exponent(d)
    denominator = (sigma * den) ** (2 / p)
    c_mc = num_mc / denominator
    c_se = num_se / denominator
    est = chls(d)
    assert abs(est.value - c_mc) < 3 * c_se


def test_quotient_smaller_for_non_extremal_trial():
    # the HLS quotient of a Gaussian stays strictly below the sharp constant
    d = 3
    sigma = sphere_surface_area(d)

    def inner(s):
        v, _ = quad(lambda r: math.exp(-r * r) * r ** (d - 1), 0, s,
                    epsabs=1e-12, epsrel=1e-12)
        return v

    num, _ = quad(lambda t: math.exp(-(t / (1 - t)) ** 2) * (t / (1 - t))
                  * inner(t / (1 - t)) / (1 - t) ** 2, 0, 1,
                  epsabs=1e-11, epsrel=1e-11)
    num *= 2 * sigma ** 2
    den, _ = quad(lambda t: math.exp(-lq_exponent(d) * (t / (1 - t)) ** 2)
                  * (t / (1 - t)) ** (d - 1) / (1 - t) ** 2, 0, 1,
                  epsabs=1e-12, epsrel=1e-12)
    quotient = num / (sigma * den) ** (2 / lq_exponent(d))
    est = chls(d)
    assert quotient < est.value * (1 - 1e-3)


def test_discrete_hls_inequality_random_densities():
    # interaction <= C_coulomb ||f||^2 holds exactly for cell densities
    d = 3
    c_coul = chls(d).coulomb
    g = RadialGrid.uniform(d, 128, 6.0)
    rng = np.random.default_rng(11)
    from radialflow import coulomb_energy, lp_norm
    for _ in range(20):
        f = random_density(g, rng)
        if np.all(f.values == 0):
            continue
        lhs = coulomb_energy(f)
        rhs = c_coul * lp_norm(f, lq_exponent(d)) ** 2
        assert lhs <= rhs * (1 + TOLERANCES["hls_grid_rel"])


# ---------------------------------------------------------------------------
# free energy
# ---------------------------------------------------------------------------

def test_energy_zero_density():
    g = RadialGrid.uniform(3, 64, 2.0)
    e = energy(RadialDensity(g, np.zeros(64)), 1.0, 0.18)
    assert e.norm_term == e.coulomb_term == e.total == e.alt_total == 0.0


def test_energy_vanishes_at_extremal_profile():
    # E_1 at the discretized extremizer: zero up to discretization residual
    d = 3
    c_coul = chls(d).coulomb
    g = RadialGrid.uniform(d, 4096, 200.0)
    h = RadialDensity(g, (1 + g.centers ** 2) ** (-(d + 2) / 2))
    e = energy(h, 1.0, c_coul)
    assert abs(e.total) < 1e-2 * e.norm_term
    assert e.total >= -TOLERANCES["energy_nonneg_rel"] * e.norm_term


def test_energy_nonnegative_below_critical_coupling():
    d = 3
    c_coul = chls(d).coulomb
    g = RadialGrid.uniform(d, 256, 8.0)
    rng = np.random.default_rng(5)
    for _ in range(30):
        f = random_density(g, rng, smooth=rng.uniform() < 0.5)
        for alpha in (0.3, 1.0):
            e = energy(f, alpha, c_coul)
            assert e.total >= -TOLERANCES["energy_nonneg_rel"] * max(e.norm_term, 1e-300)


def test_energy_identity_two_expressions():
    # 200 random densities x random alpha: the two splits agree to 1e-10
    g = RadialGrid.uniform(3, 96, 5.0)
    rng = np.random.default_rng(17)
    c_coul = 0.18255157
    for _ in range(200):
        f = random_density(g, rng, smooth=rng.uniform() < 0.3)
        alpha = rng.uniform(0.0, 2.0)
        e = energy(f, alpha, c_coul)
        scale = max(abs(e.total), abs(e.norm_term), 1e-300)
        assert abs(e.total - e.alt_total) <= TOLERANCES["energy_identity_rel"] * scale


def test_energy_rejects_bad_arguments():
    g = RadialGrid.uniform(3, 16, 2.0)
    f = RadialDensity(g, np.ones(16))
    with pytest.raises(ValueError):
        energy(f, -1.0, 0.18)
    with pytest.raises(ValueError):
        energy(f, 1.0, 0.0)


# ---------------------------------------------------------------------------
# GNS constant
# ---------------------------------------------------------------------------

def test_gns_quotient_scale_and_dilation_invariance():
    d, q = 3, 6 / 5
    g = RadialGrid.uniform(d, 800, 20.0)
    u = np.exp(-g.centers ** 2 / 4.0)
    base = gns_quotient(u, q, d, g)
    rng = np.random.default_rng(2)
    for c in rng.uniform(0.1, 10.0, 4):
        assert gns_quotient(c * u, q, d, g) == pytest.approx(base, rel=1e-12)
    for lam in (0.8, 1.25):
        dilated = np.exp(-(g.centers / lam) ** 2 / 4.0)
        assert gns_quotient(dilated, q, d, g) == pytest.approx(base, rel=1e-3)


def test_cgns_dominates_every_trial_function():
    d, q = 3, 6 / 5
    est = cgns(q, d, n_cells=400, r_max=16.0, seed=0, maxiter=600)
    g = RadialGrid.uniform(d, 400, 16.0)
    rng = np.random.default_rng(9)
    for _ in range(10):
        u = np.abs(np.exp(-g.centers ** 2 / rng.uniform(0.5, 8.0))
                   * (1 + 0.3 * np.sin(rng.uniform(0, 6) + g.centers)))
        assert gns_quotient(u, q, d, g) <= est.value * (1 + 1e-9)
    assert est.residual < 1e-2       # the full-size estimate reaches ~1e-4
    assert not est.low_confidence


def test_discrete_gns_inequality_random_functions():
    # ||u||_b <= C ||u||_a^{th_a} ||grad u||_2^{th_g} with the estimated C
    d, q = 3, 6 / 5
    est = cgns(q, d, n_cells=400, r_max=16.0, seed=0, maxiter=600)
    a, b, th_a, th_g = gns_exponents(q, d)
    g = RadialGrid.uniform(d, 300, 12.0)
    rng = np.random.default_rng(23)
    from radialflow.diagnostics import gradient_square_integral
    for _ in range(10):
        u = np.exp(-(g.centers / rng.uniform(0.7, 3.0)) ** 2)
        nb = np.sum(u ** b * g.volumes) ** (1 / b)
        na = np.sum(u ** a * g.volumes) ** (1 / a)
        ng = gradient_square_integral(u, g) ** 0.5
        assert nb <= est.value * na ** th_a * ng ** th_g * (1 + TOLERANCES["gns_grid_rel"])


# ---------------------------------------------------------------------------
# threshold formulas
# ---------------------------------------------------------------------------

def test_alpha0_hand_chained_arithmetic():
    d = 3
    c_h, c_g = 0.1825515, 0.4724
    # hand chain: P = 48/49, b = 22/7, alpha0 = P c_h / c_g^b
    expect = (48 / 49) * c_h / c_g ** (22 / 7)
    assert alpha0(d, c_h, c_g) == pytest.approx(expect, rel=1e-13)
    with pytest.raises(ValueError):
        alpha0(d, -1.0, c_g)


def test_k_coefficient_threshold_and_affinity():
    d, c_h, c_g = 3, 0.18255, 0.4724
    a0 = alpha0(d, c_h, c_g)
    assert k_coefficient(d, a0, c_h, c_g) == pytest.approx(0.0, abs=1e-14)
    k0 = k_coefficient(d, 0.0, c_h, c_g)
    assert k0 > 0
    assert k0 == pytest.approx(
        (d - 2) / (d + 2) * dissipation_prefactor(d) / c_g ** gns_power(d), rel=1e-13)
    # affine, strictly decreasing, sign matches alpha0 - alpha
    alphas = np.linspace(0, 2 * a0, 9)
    ks = [k_coefficient(d, a, c_h, c_g) for a in alphas]
    assert np.allclose(np.diff(ks, 2), 0, atol=1e-14)
    assert all(np.sign(k) == np.sign(a0 - a) for k, a in zip(ks, alphas) if abs(a - a0) > 1e-12)
    # doubling the drift factor halves the threshold coupling
    assert k_coefficient(d, a0 / 2, c_h, c_g, drift_factor=2.0) == pytest.approx(0.0, abs=1e-14)
