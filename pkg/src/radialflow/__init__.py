"""Radially symmetric aggregation-diffusion gradient flow: simulation and audit.

A numpy/scipy toolkit for the non-convex free energy

    E_alpha[f] = ||f||_{2d/(d+2)}^2 - (alpha / C_HLS) int f (-Delta)^{-1} f dx

on R^d, d >= 3, and its 2-Wasserstein-type evolution.  Modules:

- `grid`         radial grids, cell densities, norms, moments
- `potential`    Newtonian potential and drift via cumulative mass
- `constants`    free energy, sharp HLS/GNS constants, the threshold alpha_0
- `solver`       conservative finite-volume time integration
- `diagnostics`  dissipation, interpolation and decay audits along traces
- `cli`          batch front end (constants / run / verify / sweep)
"""

__version__ = "0.1.0"

from .grid import (RadialDensity, RadialGrid, beta_exponent,
                   holder_interpolation_gap, lp_norm, mass, power_integral,
                   second_moment, sphere_surface_area)
from .potential import (PotentialField, coulomb_energy, drift_field,
                        newtonian_potential)
from .constants import (ChlsEstimate, CgnsEstimate, ConstantsReport,
                        EnergyBreakdown, alpha0, cgns, chls, compute_constants,
                        coulomb_hls_constant, dissipation_prefactor, energy,
                        gns_exponents, gns_power, gns_quotient,
                        gradient_term_coefficient, k_coefficient, lq_exponent,
                        substitution_power)
from .solver import (EnergyTrace, FlowState, SolverAbort, SolverConfig,
                     dt_cfl, initial_profile, run, step)
from .diagnostics import (DecayFit, LqDecayCheck, SubstitutionCheck,
                          averaging_chain_check, decay_fit, dissipation_terms,
                          lq_decay_check, substitution_check, verify_trace)
from .tolerances import TOLERANCES
