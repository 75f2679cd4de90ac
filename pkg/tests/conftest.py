"""Shared fixtures: spaces, collections, and kernels reused across modules.

Session-scoped fixtures carry the expensive geometry (dense distance
matrices, kernel sweeps) so each test module pays for it once.  The sizes
mirror the configurations the acceptance checks run at; ``line_small``
exists for fast structural tests where resolution does not matter.
"""

from __future__ import annotations

import numpy as np
import pytest

import fracpot as fp


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def line_small():
    return fp.build_line_space(10.0, 401)


@pytest.fixture(scope="session")
def line_main():
    return fp.build_line_space(10.0, 2001)


@pytest.fixture(scope="session")
def line_mid():
    return fp.build_line_space(10.0, 1001)


@pytest.fixture(scope="session")
def plane_small():
    return fp.build_plane_space(4.0, 41)


@pytest.fixture(scope="session")
def gasket_space():
    return fp.build_gasket_space(6, 3)


@pytest.fixture(scope="session")
def cantor_space():
    return fp.build_cantor_space(6, 3)


# ---------------------------------------------------------------------------
# collections and kernels
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def ai_small(line_small):
    return fp.build_ai_collection(line_small)


@pytest.fixture(scope="session")
def ai_main(line_main):
    return fp.build_ai_collection(line_main)


@pytest.fixture(scope="session")
def ai_mid12(line_mid):
    return fp.build_ai_collection(line_mid)


@pytest.fixture(scope="session")
def ai_mid24(line_mid):
    grid = fp.ScaleGrid.default_for(line_mid, per_decade=24)
    return fp.build_ai_collection(line_mid, scale_grid=grid)


@pytest.fixture(scope="session")
def kernels_main(ai_main):
    """Kernel sweep on the dense line: bessel and frac at several orders."""
    alphas = (0.05, 0.1, 0.2, 0.3, 0.4, 0.6)
    requests = [fp.KernelRequest("bessel", a) for a in alphas]
    requests += [fp.KernelRequest("frac_deriv", a) for a in alphas]
    requests.append(fp.KernelRequest("riesz", 0.3))
    built = fp.assemble_kernels(ai_main, requests)
    out = {}
    for req, ker in built.items():
        out[(req.kind, req.alpha)] = ker
    return out


@pytest.fixture(scope="session")
def bessel_small(ai_small):
    return fp.bessel_kernel(ai_small, 0.3)


@pytest.fixture(scope="session")
def frac_small(ai_small):
    return fp.frac_deriv_kernel(ai_small, 0.3)


@pytest.fixture(scope="session")
def riesz_small(ai_small):
    return fp.riesz_kernel(ai_small, 0.3)


# ---------------------------------------------------------------------------
# helpers shared by experiment tests
# ---------------------------------------------------------------------------


def rough_source(space) -> np.ndarray:
    """Bounded lacunary source with energy across several scales."""
    x0 = int(np.argmax(space.boundary_distance))
    r = space.dist[x0] / space.domain_radius
    out = np.zeros(space.n_points)
    for j in range(5):
        out += np.cos(4.0**j * np.pi * r + j)
    return out


@pytest.fixture(scope="session")
def line_rough(line_main):
    return rough_source(line_main)
