import numpy as np
import pytest

from radialflow import RadialDensity, RadialGrid


@pytest.fixture
def grid3():
    return RadialGrid.uniform(3, 512, 8.0)


def gaussian_density(grid, peak=1.0, width=None):
    """exp(-r^2) sampled at cell centers (width scales the argument)."""
    r = grid.centers
    w = 1.0 if width is None else width
    return RadialDensity(grid, peak * np.exp(-((r / w) ** 2)))


def random_density(grid, rng, smooth=False):
    n = grid.n_cells
    if smooth:
        r = grid.centers
        w = rng.uniform(0.5, 2.0)
        bump = 1.0 + 0.5 * np.sin(rng.uniform(0, 2 * np.pi) + 3.0 * r / w)
        vals = np.exp(-((r / w) ** 2)) * np.abs(bump)
    else:
        vals = rng.uniform(0.0, 1.0, n)
        vals[rng.uniform(size=n) < 0.3] = 0.0
    return RadialDensity(grid, vals)


def convergence_order(errors, factor=2.0):
    """Observed order from consecutive errors under refinement by `factor`."""
    errors = np.asarray(errors, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(factor)
