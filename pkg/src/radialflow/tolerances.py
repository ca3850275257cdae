"""Shared tolerance table for every inequality and identity check.

All slack-based checks use the rule  ``slack >= -(abs_tol + rel_tol * scale)``
with entries drawn from this table.  Keeping one version-controlled table
avoids per-test magic numbers.
"""

TOLERANCES = {
    # roundoff-level identities on exact piecewise-constant integrals
    "holder_gap_rel": 1e-12,
    "energy_identity_rel": 1e-10,
    "homogeneity_rel": 1e-13,
    "grid_volume_rel": 1e-12,
    "beta_identity_abs": 1e-14,
    # discrete potential and interaction energy (two exact routes)
    "newton_exterior_rel": 1e-10,
    "coulomb_pair_sum_rel": 1e-8,
    # inequality checks on grid functions built from continuum constants
    "hls_grid_rel": 1e-6,
    "gns_grid_rel": 2e-2,
    "energy_nonneg_rel": 1e-9,
    # trace-based dynamical checks
    "mass_drift_rel": 1e-8,
    "energy_monotone_cum_rel": 1e-3,
    "energy_monotone_step_rel": 1e-9,
    "lq_monotone_rel": 1e-12,
    "lemma_slack_rel": 1e-3,          # relative to |bound|
    "lemma_slack_abs": 1e-10,
    "chain_slack_rel": 1e-9,
    "decay_ripple_rel": 5e-2,
    "boundary_max_rel": 1e-6,
    # bookkeeping identities
    "substitution_rel": 1e-8,
}
