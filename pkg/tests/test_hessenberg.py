"""Hessenberg truncations of the multiplier: build routes and perturbations."""

import math

import numpy as np
import pytest

from cloudsep import (
    Disk,
    MeasureSpec,
    RankDeficient,
    arnoldi_hessenberg,
    build_hessenberg,
    moments_of_spec,
    orthonormalize,
    perturb,
)
from cloudsep.hessenberg import HessenbergMatrix
from cloudsep.measures import SampleCloud
from cloudsep.moments import moments_of_samples
from cloudsep.quadrature import discretize_spec

from conftest import disk_hessenberg


def test_disk_subdiagonal_moment_route():
    m = moments_of_spec(MeasureSpec(shapes=[Disk(center=0.0, radius=1.0)]), 12)
    basis = orthonormalize(m)
    H = build_hessenberg(m, basis, 10)
    for k in range(9):
        want = math.sqrt((k + 1.0) / (k + 2.0))
        assert abs(H.entries[k + 1, k] - want) < 1e-9
    # everything except the first subdiagonal vanishes for the centered disk
    mask = np.ones((10, 10), dtype=bool)
    mask[np.arange(1, 10), np.arange(9)] = False
    assert np.abs(H.entries[mask]).max() < 1e-9


def test_disk_subdiagonal_sample_route():
    spec = MeasureSpec(shapes=[Disk(center=0.0, radius=1.0)])
    cloud = discretize_spec(spec, 64)
    H = arnoldi_hessenberg(cloud, 30)
    ref = disk_hessenberg(30)
    assert np.abs(H.entries - ref.entries).max() < 1e-12
    assert abs(H.mass - math.pi) < 1e-12


def test_single_atom_matrix():
    a = 0.7 - 1.2j
    m = moments_of_spec(MeasureSpec(atoms=[(a, 2.0)]), 3)
    basis = orthonormalize(m)
    H = build_hessenberg(m, basis, 1)
    assert H.size == 1
    assert abs(H.entries[0, 0] - a) < 1e-12


def test_unit_circle_is_pure_shift():
    # uniform mass on the unit circle: p_k proportional to z^k, subdiagonal 1
    theta = 2 * np.pi * np.arange(512) / 512
    cloud = SampleCloud(np.exp(1j * theta), np.full(512, 2 * np.pi / 512))
    H = arnoldi_hessenberg(cloud, 32)
    want = np.zeros((32, 32), dtype=complex)
    want[np.arange(1, 32), np.arange(31)] = 1.0
    assert np.abs(H.entries - want).max() < 1e-12


def test_routes_agree_on_discrete_measure():
    rng = np.random.default_rng(17)
    pts = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    ws = rng.uniform(0.5, 1.5, 6)
    cloud = SampleCloud(pts, ws)
    m = moments_of_samples(cloud, 6)
    basis = orthonormalize(m)
    n = basis.rank  # 6
    Hm = build_hessenberg(m, basis, n)
    Hs = arnoldi_hessenberg(cloud, n + 1, allow_finite_rank=True)
    assert Hs.complete and Hs.size == n
    assert np.abs(Hm.entries - Hs.entries).max() < 1e-7


def test_structural_zeros():
    spec = MeasureSpec(
        shapes=[Disk(center=0.4j, radius=0.8)], atoms=[(2.0, 1.0)]
    )
    cloud = discretize_spec(spec, 40)
    H = arnoldi_hessenberg(cloud, 20)
    low = np.tril(H.entries, k=-2)
    assert np.abs(low).max() == 0.0


def test_subdiagonal_positive():
    spec = MeasureSpec(shapes=[Disk(center=0.0, radius=1.0)], atoms=[(1.5j, 0.5)])
    cloud = discretize_spec(spec, 40)
    H = arnoldi_hessenberg(cloud, 20)
    sub = np.diagonal(H.entries, offset=-1)
    assert np.all(sub.real > 0)
    assert np.abs(sub.imag).max() < 1e-14


def test_self_commutator_diagonal_nonnegative():
    # hyponormality at truncation: column sums minus row sums stay >= -tol
    spec = MeasureSpec(
        shapes=[Disk(center=0.5, radius=1.0), Disk(center=-1.0, radius=0.3)],
        atoms=[(2.5, 1.0)],
    )
    cloud = discretize_spec(spec, 80)
    H = arnoldi_hessenberg(cloud, 60)
    h = H.entries
    J = 40
    for j in range(J + 1):
        d = np.sum(np.abs(h[:, j]) ** 2) - np.sum(np.abs(h[j, :]) ** 2)
        assert d > -1e-10


def test_rank_deficient_raises():
    cloud = SampleCloud(np.array([1.0 + 0j, 2.0 + 0j]), np.array([1.0, 1.0]))
    with pytest.raises(RankDeficient):
        arnoldi_hessenberg(cloud, 5)
    H = arnoldi_hessenberg(cloud, 5, allow_finite_rank=True)
    assert H.complete and H.size == 2


def test_build_hessenberg_size_limit():
    # rank 2 measure: asking for more columns truncates to the complete
    # finite-rank operator
    m = moments_of_spec(MeasureSpec(atoms=[(1.0, 1.0), (2.0, 1.0)]), 4)
    basis = orthonormalize(m)
    H = build_hessenberg(m, basis, 3)
    assert H.complete and H.size == 2

    from cloudsep.errors import DegreeOutOfRange

    disk = moments_of_spec(MeasureSpec(shapes=[Disk(center=0.0, radius=1.0)]), 3)
    with pytest.raises(DegreeOutOfRange):
        # full-rank measure, moments stop at degree 3, size 4 needs s_{4,*}
        build_hessenberg(disk, orthonormalize(disk), 4)


def test_perturb_records_and_restores():
    H = disk_hessenberg(12)
    Hb = perturb(H, entries=[(0, 5, 1e-3 + 0j)])
    assert abs(Hb.entries[0, 5] - 1e-3) < 1e-18
    assert Hb.entries is not H.entries
    assert len(Hb.perturbations) == 1
    rec = Hb.perturbations[0]
    assert rec["kind"] == "finite_rank"

    Hr = perturb(H, eps=1e-4, seed=9)
    E = Hr.entries - H.entries
    assert abs(np.linalg.norm(E) - 1e-4) < 1e-12
    Hr2 = perturb(H, eps=1e-4, seed=9)
    assert np.array_equal(Hr.entries, Hr2.entries)


def test_json_roundtrip(tmp_path):
    H = perturb(disk_hessenberg(8), entries=[(2, 3, 0.5j)])
    path = tmp_path / "h.json"
    H.save(path)
    back = HessenbergMatrix.load(path)
    assert back.size == H.size
    assert np.array_equal(back.entries, H.entries)
    assert back.perturbations == H.perturbations
    assert back.mass == H.mass
