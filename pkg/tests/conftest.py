"""Shared fixtures: reference measures and the expensive Hessenberg builds."""

import math

import numpy as np
import pytest

from cloudsep import Disk, MeasureSpec, arnoldi_hessenberg, cloud_moments
from cloudsep.hessenberg import HessenbergMatrix
from cloudsep.quadrature import discretize_spec


def disk_hessenberg(n: int) -> HessenbergMatrix:
    """Closed-form truncation for the unit disk: h[k+1][k] = sqrt((k+1)/(k+2)).

    Derived independently of the package's build routes from the orthonormal
    basis p_k = sqrt((k+1)/pi) z^k.
    """
    H = np.zeros((n, n), dtype=complex)
    for k in range(n - 1):
        H[k + 1, k] = math.sqrt((k + 1.0) / (k + 2.0))
    return HessenbergMatrix(size=n, entries=H, source_degree=n, mass=math.pi)


def a1_spec() -> MeasureSpec:
    return MeasureSpec(
        shapes=[Disk(center=0.0, radius=1.0)],
        atoms=[(2.0 + 0.0j, 1.0), (-2.0 + 1.0j, 0.5), (3.0j, 2.0)],
    )


@pytest.fixture(scope="session")
def a1_hessenberg() -> HessenbergMatrix:
    # N = J + 2d + 2 + margin for d=6, J=200, margin=8
    spec = a1_spec()
    N = 200 + 2 * 6 + 2 + 8
    cloud = discretize_spec(spec, N)
    return arnoldi_hessenberg(cloud, N, allow_finite_rank=True)


@pytest.fixture(scope="session")
def a1_cloud(a1_hessenberg):
    return cloud_moments(a1_hessenberg, 6, 200)
