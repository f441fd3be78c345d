import math

import numpy as np
import pytest

from shearquench import pde
from shearquench.model import InitialData, PhysParams, build_reaction
from shearquench.profiles import make_profile

# critical plateau length of the default reaction (theta0 = 0.25, kappa = M = 1),
# frozen from the time-map quadrature and cross-checked by the shooting oracle
ELL_TILDE = 6.6693
P_STAR = 0.5970


@pytest.fixture(scope="session")
def params():
    return PhysParams()


@pytest.fixture(scope="session")
def reaction():
    return build_reaction("quadratic-ignition", 0.25)


@pytest.fixture(scope="session")
def zero_reaction():
    return build_reaction("zero", 0.25)


@pytest.fixture(scope="session")
def sine():
    return make_profile("sine")


@pytest.fixture(scope="session")
def still():
    return make_profile("constant", {"c": 0.0})


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels(params, reaction, still):
    """Compile the jit kernels once so individual tests measure physics, not numba."""
    grid = pde.Grid2D(X=6.0, nx=32, ny=8, y_extent=2 * math.pi)
    pde.evolve_T(params, reaction, still, 1.0, InitialData(L=1.0), grid, 0.02,
                 numerics=pde.Numerics(dt=0.01))
    sg = pde.Grid2D(X=6.0, nx=32, ny=8, y_extent=2.0, bc_y="dirichlet")
    pde.solve_dirichlet_strip(2.0, 1.0, params, reaction, sg, 0.02,
                              numerics=pde.Numerics(dt=0.01))
    from shearquench import stochastic

    cfg = stochastic.PathEnsembleConfig(n_paths=128, dt=1e-2, seed=0)
    stochastic.estimate_psi_mc(0.05, 0.0, 0.0, 1.0, 1.0, still, params, cfg)
    stochastic.estimate_plateau_occupancy(0.0, (-1.0, 1.0), 0.05, cfg)
    sine_p = make_profile("sine")
    stochastic.sample_ito_residuals(0.0, 1.0, sine_p, cfg)
    stochastic.martingale_clt_sample(0.0, 8.0, sine_p, cfg)
