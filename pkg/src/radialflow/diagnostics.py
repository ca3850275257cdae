"""Inequality audits along computed trajectories.

Everything here post-processes immutable data: either a single density
snapshot or an `EnergyTrace`.  Derivatives of traced quantities are taken by
central differences of the trace itself rather than by instrumenting the
integrator, so the checks are honest oracles for the scheme.  All slack
inequalities follow the shared rule slack >= -(abs_tol + rel_tol * scale)
with tolerances from the version-controlled table in `tolerances.py`.

Checked chain, with q = 2d/(d+2):

  1. dissipation identity   d/dt int f^q = I + II            (`dissipation_terms`)
  2. power substitution     I, II in f-form equal u-form     (`substitution_check`)
  3. L^q dissipation bound  d/dt int f^q <= -K int f^{q+1}   (`lq_decay_check`)
  4. averaging chain        time-average, norm-vs-energy and
                            the two-time iteration inequality (`averaging_chain_check`)
  5. decay bound            t^{(d-2)/d} E_alpha bounded       (`decay_fit`)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import (gns_exponents, gradient_term_coefficient, lq_exponent,
                        substitution_power)
from .grid import RadialDensity, lp_norm, power_integral
from .tolerances import TOLERANCES


def _slack_ok(slack: float, scale: float, rel_key: str, abs_key: str | None = None) -> bool:
    abs_tol = TOLERANCES[abs_key] if abs_key else 0.0
    return slack >= -(abs_tol + TOLERANCES[rel_key] * abs(scale))


def gradient_square_integral(u: np.ndarray, grid) -> float:
    """Discrete int |grad u|^2 dx: edge differences, sigma r^{d-1} weights."""
    dc = grid.center_spacing()
    re = grid.interior_edges()
    du = np.diff(u) / dc
    return float(np.sum(du ** 2 * grid.sigma * re ** (grid.d - 1) * dc))


# ---------------------------------------------------------------------------
# pointwise-in-time dissipation structure
# ---------------------------------------------------------------------------

def dissipation_terms(f: RadialDensity, alpha: float, c_hls: float,
                      drift_factor: float = 1.0) -> tuple[float, float]:
    """The two terms of d/dt int f^q = I + II for the current density.

    I  = -c_I ||f||_{2d/(d+2)}^{4/(d+2)} int |grad f^s|^2 dx  (<= 0),
    II = (q-1) kappa_eff int f^{q+1} dx                       (>= 0),

    with s = (3d-2)/(2(d+2)) and kappa_eff = drift_factor * alpha / c_hls.
    """
    d = f.grid.d
    q = lq_exponent(d)
    s = substitution_power(d)
    norm = lp_norm(f, q)
    grad2 = gradient_square_integral(f.values ** s, f.grid)
    term_i = -gradient_term_coefficient(d) * norm ** (4.0 / (d + 2)) * grad2
    kappa_eff = drift_factor * alpha / c_hls if alpha > 0 else 0.0
    term_ii = (q - 1.0) * kappa_eff * power_integral(f, q + 1.0)
    return term_i, term_ii


@dataclass(frozen=True)
class SubstitutionCheck:
    """Bookkeeping audit of the u = f^s rewrite of I and II.

    `bookkeeping_residual` compares the f-power route against the u-norm
    route for both terms; the exponent arithmetic makes the two algebraically
    identical, so this residual sits at roundoff.  `chain_rule_gap` compares
    the direct edge difference of f^s against the chain-rule discretization
    s f^{s-1} grad f (arithmetic-mean edge value); this one is a genuine
    O(dr^2) discretization quantity and vanishes at second order under
    refinement.
    """

    bookkeeping_residual: float
    chain_rule_gap: float
    i_f_route: float
    i_u_route: float
    ii_f_route: float
    ii_u_route: float


def substitution_check(f: RadialDensity) -> SubstitutionCheck:
    """Check the u = f^s substitution on one density (kappa scaling cancels)."""
    grid = f.grid
    d = grid.d
    q = lq_exponent(d)
    s = substitution_power(d)
    a, b, _, _ = gns_exponents(q, d)
    if power_integral(f, 1.0) == 0.0:
        return SubstitutionCheck(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    u = f.values ** s
    # f route, as the identity is first derived
    c_i = gradient_term_coefficient(d)
    norm_f = lp_norm(f, q) ** (4.0 / (d + 2))
    grad2_direct = gradient_square_integral(u, grid)
    i_f = -c_i * norm_f * grad2_direct
    ii_f = power_integral(f, q + 1.0)           # II / ((q-1) kappa)
    # u route, through the interpolation-inequality norms
    sa = float(np.sum(u ** a * grid.volumes))
    sb = float(np.sum(u ** b * grid.volumes))
    i_u = -c_i * sa ** (8.0 / ((3.0 * d - 2) * a)) * grad2_direct
    ii_u = sb
    book = max(abs(i_f - i_u) / max(abs(i_f), 1e-300),
               abs(ii_f - ii_u) / max(abs(ii_f), 1e-300))
    # chain-rule discretization of the same gradient integral
    fe = 0.5 * (f.values[1:] + f.values[:-1])
    df = np.diff(f.values) / grid.center_spacing()
    du_chain = np.where(fe > 0, s * fe ** (s - 1.0) * df, 0.0)
    re = grid.interior_edges()
    grad2_chain = float(np.sum(du_chain ** 2 * grid.sigma * re ** (d - 1)
                               * grid.center_spacing()))
    gap = abs(grad2_chain - grad2_direct) / max(grad2_direct, 1e-300)
    return SubstitutionCheck(book, gap, i_f, i_u, ii_f, ii_u)


# ---------------------------------------------------------------------------
# trace-level checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LqDecayCheck:
    """Central-difference audit of d/dt int f^q <= -K int f^{q+1}."""

    t: np.ndarray               # interior record times
    derivative: np.ndarray      # measured d/dt int f^q
    bound: np.ndarray           # -K int f^{q+1}
    slack: np.ndarray           # bound - derivative, >= -eps wanted
    k_used: float

    @property
    def min_slack(self) -> float:
        return float(self.slack.min())

    @property
    def min_relative_slack(self) -> float:
        return float((self.slack / np.abs(self.bound)).min())

    def passed(self) -> bool:
        tol = TOLERANCES["lemma_slack_abs"] + TOLERANCES["lemma_slack_rel"] * np.abs(self.bound)
        return bool(np.all(self.slack >= -tol))


def lq_decay_check(trace, k_coefficient_value: float) -> LqDecayCheck:
    """Evaluate the dissipation bound at every interior trace record."""
    t = trace.column("t")
    if len(t) < 3:
        raise ValueError("trace too short for central differences (need >= 3 records)")
    lq = trace.column("lq_mass")
    lq1 = trace.column("lq1_mass")
    deriv = (lq[2:] - lq[:-2]) / (t[2:] - t[:-2])
    bound = -k_coefficient_value * lq1[1:-1]
    return LqDecayCheck(t=t[1:-1], derivative=deriv, bound=bound,
                        slack=bound - deriv, k_used=k_coefficient_value)


@dataclass(frozen=True)
class ChainPairCheck:
    t0: float
    t1: float
    average_slack: float        # int_{t0}^{t1} lq1 <= lq(t0) / K
    norm_energy_slack: float    # lq(t0) <= (E(t0)/(1-alpha))^{d/(d+2)}
    iteration_slack: float      # two-time energy bound
    passed: bool


@dataclass(frozen=True)
class ChainCheckReport:
    pairs: list
    alpha: float
    k_used: float

    def all_passed(self) -> bool:
        return all(p.passed for p in self.pairs)

    def worst_slack(self) -> float:
        vals = [min(p.average_slack, p.norm_energy_slack, p.iteration_slack)
                for p in self.pairs]
        return float(min(vals)) if vals else np.inf


def averaging_chain_check(trace, alpha: float, k_value: float,
                          total_mass: float | None = None) -> ChainCheckReport:
    """Audit the averaging / interpolation / iteration chain on dyadic pairs.

    Pairs (t0, t1 = 2 t0) are sampled dyadically from the final time down
    (t, t/2), (t/2, t/4), ... while enough records cover [t0, t1].  For each
    pair three inequalities are checked with trapezoidal quadrature of the
    trace:

      (a) int_{t0}^{t1} lq1 dt <= lq(t0) / K,
      (b) lq(t0) <= (E(t0) / (1-alpha))^{d/(d+2)},
      (c) E(t1) <= (1/((t1-t0) K))^{(d^2-4)/(2d^2)} M^{(d+2)^2/(2d^2)}
                   (E(t0)/(1-alpha))^{(d-2)/(2d)}.

    Requires alpha < 1 and K > 0.  The mass exponent in (c) follows from the
    Hoelder step with beta = (d-2)/(2d) raised to (d+2)/d; for unit mass it
    coincides with the square-root form sometimes quoted.
    """
    if not 0 <= alpha < 1:
        raise ValueError("chain check needs alpha in [0, 1)")
    if k_value <= 0:
        raise ValueError("chain check needs K > 0")
    d = trace.d
    t = trace.column("t")
    lq = trace.column("lq_mass")
    lq1 = trace.column("lq1_mass")
    e_alpha = trace.column("E_alpha")
    if total_mass is None:
        total_mass = float(trace.column("mass")[0])
    t_end = t[-1]
    pairs = []
    t1 = t_end
    while True:
        t0 = t1 / 2.0
        i0, i1 = np.searchsorted(t, t0), np.searchsorted(t, t1 * (1 + 1e-12))
        if i0 == 0 or i1 - i0 < 4:
            break
        seg = slice(i0, i1)
        avg_lhs = float(np.trapezoid(lq1[seg], t[seg]))
        avg_rhs = lq[i0] / k_value
        nrg_rhs = (e_alpha[i0] / (1.0 - alpha)) ** (d / (d + 2.0))
        it_rhs = ((1.0 / ((t[i1 - 1] - t[i0]) * k_value)) ** ((d * d - 4.0) / (2.0 * d * d))
                  * total_mass ** ((d + 2.0) ** 2 / (2.0 * d * d))
                  * (e_alpha[i0] / (1.0 - alpha)) ** ((d - 2.0) / (2.0 * d)))
        sa = avg_rhs - avg_lhs
        sb = nrg_rhs - lq[i0]
        sc = it_rhs - e_alpha[i1 - 1]
        ok = all(_slack_ok(s, scale, "chain_slack_rel")
                 for s, scale in ((sa, avg_rhs), (sb, nrg_rhs), (sc, it_rhs)))
        pairs.append(ChainPairCheck(float(t[i0]), float(t[i1 - 1]), sa, sb, sc, ok))
        t1 = t0
    if not pairs:
        raise ValueError("trace does not cover any dyadic pair")
    return ChainCheckReport(pairs=pairs, alpha=alpha, k_used=k_value)


# ---------------------------------------------------------------------------
# decay fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    """Least-squares power-law fit and compensated-energy bound check."""

    exponent: float             # fitted p in E ~ C t^{-p}
    amplitude: float
    residual: float             # rms residual of the log-log fit
    window: tuple
    n_points: int
    theorem_exponent: float     # (d-2)/d
    sup_compensated: float      # sup over window of t^{(d-2)/d} E(t)
    sup_at_start: bool          # sup attained at the window start
    ripple: float               # max rise of the compensated series above its running min
    n_excluded: int             # nonpositive energies dropped from the fit

    def bounded_nonincreasing(self) -> bool:
        return self.ripple <= TOLERANCES["decay_ripple_rel"]


def decay_fit(trace, window: tuple | None = None) -> DecayFit:
    """Fit log E_alpha vs log t on a tail window and check the bound form.

    The theorem-style statement is an upper bound E <= C t^{-(d-2)/d}, not an
    asymptotic, so the audit quantity is the compensated energy
    c(t) = t^{(d-2)/d} E(t): it must stay bounded, with at most a small
    ripple above its running minimum.  The fitted exponent is reported for
    information.
    """
    t = trace.column("t")
    e = trace.column("E_alpha")
    if window is None:
        window = (t[-1] / 10.0, t[-1])
    lo, hi = window
    msk = (t >= lo) & (t <= hi) & (t > 0)
    n_excluded = int(np.count_nonzero(e[msk] <= 0))
    msk &= e > 0
    if np.count_nonzero(msk) < 20:
        raise ValueError("need >= 20 positive trace points in the fit window")
    tt, ee = t[msk], e[msk]
    p = np.polyfit(np.log(tt), np.log(ee), 1)
    resid = float(np.sqrt(np.mean((np.polyval(p, np.log(tt)) - np.log(ee)) ** 2)))
    d = trace.d
    theo = (d - 2.0) / d
    comp = tt ** theo * ee
    runmin = np.minimum.accumulate(comp)
    ripple = float(np.max(comp / runmin - 1.0))
    i_sup = int(np.argmax(comp))
    return DecayFit(exponent=-p[0], amplitude=float(np.exp(p[1])), residual=resid,
                    window=(float(lo), float(hi)), n_points=int(tt.size),
                    theorem_exponent=theo, sup_compensated=float(comp.max()),
                    sup_at_start=i_sup == 0, ripple=ripple, n_excluded=n_excluded)


# ---------------------------------------------------------------------------
# consolidated trace verification
# ---------------------------------------------------------------------------

def verify_trace(trace, k_value: float, alpha: float,
                 clamp_count: int | None = None) -> dict:
    """Run every applicable audit on a trace; returns per-check results.

    Checks: mass conservation, free-energy monotonicity (per record and
    cumulative), L^q monotonicity and the dissipation bound (when K > 0),
    the averaging chain (when additionally alpha < 1), the compensated decay
    bound, boundary confinement, and the positivity-clamp count when known.
    """
    checks = {}
    t = trace.column("t")
    m = trace.column("mass")
    drift = float(np.max(np.abs(m - m[0])) / m[0])
    checks["mass_conservation"] = {
        "passed": drift < TOLERANCES["mass_drift_rel"],
        "worst": drift, "tolerance": TOLERANCES["mass_drift_rel"]}

    e = trace.column("E_alpha")
    de = np.diff(e)
    e_scale = abs(e[0])
    step_tol = TOLERANCES["energy_monotone_step_rel"] * e_scale
    cum = float(de[de > 0].sum())
    checks["energy_monotone"] = {
        "passed": bool(np.all(de <= step_tol)
                       and cum < TOLERANCES["energy_monotone_cum_rel"] * e_scale),
        "worst": float(de.max()) if de.size else 0.0,
        "cumulative_violation": cum,
        "tolerance": step_tol}

    if k_value > 0:
        lq = trace.column("lq_mass")
        dlq = np.diff(lq)
        lq_tol = TOLERANCES["lq_monotone_rel"] * lq[0]
        checks["lq_monotone"] = {
            "passed": bool(np.all(dlq <= lq_tol)),
            "worst": float(dlq.max()) if dlq.size else 0.0, "tolerance": lq_tol}
        lemma = lq_decay_check(trace, k_value)
        checks["lq_dissipation_bound"] = {
            "passed": lemma.passed(), "worst": lemma.min_slack,
            "worst_relative": lemma.min_relative_slack,
            "tolerance": TOLERANCES["lemma_slack_rel"]}
        if 0 <= alpha < 1:
            chain = averaging_chain_check(trace, alpha, k_value)
            checks["averaging_chain"] = {
                "passed": chain.all_passed(), "worst": chain.worst_slack(),
                "n_pairs": len(chain.pairs),
                "tolerance": TOLERANCES["chain_slack_rel"]}

    fit = decay_fit(trace)
    checks["decay_bound"] = {
        "passed": fit.bounded_nonincreasing(), "worst": fit.ripple,
        "fitted_exponent": fit.exponent, "theorem_exponent": fit.theorem_exponent,
        "sup_compensated": fit.sup_compensated,
        "tolerance": TOLERANCES["decay_ripple_rel"]}

    # the peak of f is bounded below by lq1/lq, a trace-only proxy
    bmax = trace.column("boundary_max")
    peak_proxy = float(np.max(trace.column("lq1_mass") / trace.column("lq_mass")))
    checks["boundary_confinement"] = {
        "passed": bool(np.max(bmax) <= TOLERANCES["boundary_max_rel"] * peak_proxy),
        "worst": float(np.max(bmax)),
        "tolerance": TOLERANCES["boundary_max_rel"] * peak_proxy}

    if clamp_count is not None:
        checks["positivity_clamps"] = {
            "passed": clamp_count == 0, "worst": clamp_count, "tolerance": 0}
    return checks
