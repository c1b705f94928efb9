"""Christoffel-decay classification grids and atom-mass estimates."""

import math

import numpy as np
import pytest

from cloudsep import (
    Disk,
    MeasureSpec,
    NotAMomentMatrix,
    classify_grid,
    connected_components,
    estimate_atom_mass,
    moments_of_spec,
)
from cloudsep.errors import DegreeOutOfRange
from cloudsep.moments import ComplexMoments
from cloudsep.shape import LABEL_BAND, LABEL_EXTERIOR, LABEL_INTERIOR, LABEL_NAMES

PI = math.pi


def disk_moments(d: int) -> ComplexMoments:
    return moments_of_spec(MeasureSpec(shapes=[Disk(center=0.0, radius=1.0)]), d)


@pytest.fixture(scope="module")
def disk_grid():
    # diagonal disk moments keep double precision honest even at degree 33
    m = disk_moments(33)
    return classify_grid(m, (-1.5, 1.5, -1.5, 1.5), (25, 25))


def test_disk_center_interior(disk_grid):
    g = disk_grid
    i = j = 12  # grid center, z = 0
    assert abs(g.xs[i]) < 1e-12 and abs(g.ys[j]) < 1e-12
    # K_n(0,0) = 1/pi at every degree for the unit disk
    assert abs(g.lambda_low[i, j] - PI) < 1e-8
    assert abs(g.lambda_high[i, j] - PI) < 1e-8
    assert g.labels[i, j] == LABEL_INTERIOR


def test_disk_exterior(disk_grid):
    g = disk_grid
    i = np.argmin(np.abs(g.xs - 1.4))
    j = np.argmin(np.abs(g.ys))
    assert g.labels[i, j] == LABEL_EXTERIOR
    assert g.ratio[i, j] <= 0.1


def test_circle_ratio_oracle():
    # on |z| = 1: K_n = sum (j+1)/pi = (n+1)(n+2)/(2 pi), so the ratio of
    # Lambda at degrees (16, 32) is 17*18/(33*34) = 306/1122
    m = disk_moments(33)
    g = classify_grid(m, (1.0, 1.4, 0.0, 0.4), (2, 2))
    want = 306.0 / 1122.0
    assert abs(g.ratio[0, 0] - want) < 1e-6
    assert g.labels[0, 0] == LABEL_BAND


def test_labels_pure_function_of_ratio(disk_grid):
    g = disk_grid
    r = g.ratio
    assert np.all((g.labels == LABEL_INTERIOR) == (r >= 0.5))
    assert np.all((g.labels == LABEL_EXTERIOR) == (r <= 0.1))
    assert np.all(
        (g.labels == LABEL_BAND) == ((r > 0.1) & (r < 0.5))
    )


def test_interior_accuracy_standoff(disk_grid):
    # cells at distance >= 0.15 from the circle classify correctly
    g = disk_grid
    X, Y = np.meshgrid(g.xs, g.ys, indexing="ij")
    dist = np.abs(np.hypot(X, Y) - 1.0)
    far = dist >= 0.15
    want = np.where(np.hypot(X, Y) < 1.0, LABEL_INTERIOR, LABEL_EXTERIOR)
    acc = np.mean(g.labels[far] == want[far])
    assert acc >= 0.95


def test_determinism(disk_grid):
    m = disk_moments(33)
    again = classify_grid(m, (-1.5, 1.5, -1.5, 1.5), (25, 25))
    assert np.array_equal(again.labels, disk_grid.labels)
    assert np.array_equal(again.lambda_low, disk_grid.lambda_low)
    assert np.array_equal(again.lambda_high, disk_grid.lambda_high)


def test_components_counts(disk_grid):
    count, masks = connected_components(disk_grid)
    assert count == 1
    assert masks[0].sum() == disk_grid.interior_mask.sum()

    two = MeasureSpec(
        shapes=[Disk(center=-1.0, radius=0.5), Disk(center=1.0, radius=0.5)]
    )
    m = moments_of_spec(two, 33, dps=60)
    g = classify_grid(m, (-2.0, 2.0, -2.0, 2.0), (31, 31))
    count, masks = connected_components(g)
    assert count == 2
    # masks come in scan order: the component containing the smallest flat
    # index first
    first0 = np.flatnonzero(masks[0].ravel())[0]
    first1 = np.flatnonzero(masks[1].ravel())[0]
    assert first0 < first1

    far = classify_grid(disk_moments(33), (5.0, 6.0, 5.0, 6.0), (9, 9))
    count, masks = connected_components(far)
    assert count == 0 and masks == []


def test_grid_csv(tmp_path, disk_grid):
    path = tmp_path / "grid.csv"
    disk_grid.save_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,label,lambda_low,lambda_high"
    assert len(lines) == 1 + 25 * 25
    fields = lines[1].split(",")
    assert fields[2] in LABEL_NAMES


def test_degree_too_low():
    with pytest.raises(DegreeOutOfRange):
        classify_grid(disk_moments(20), (-1, 1, -1, 1), (5, 5))


def test_rank_too_low():
    # atoms only: rank 3 cannot reach degree 32
    m = moments_of_spec(
        MeasureSpec(atoms=[(0.5, 1.0), (-0.5, 1.0), (1j, 1.0)]), 33
    )
    with pytest.raises(DegreeOutOfRange):
        classify_grid(m, (-1, 1, -1, 1), (5, 5))


def test_not_a_moment_matrix():
    m = disk_moments(33)
    bad = ComplexMoments(degree=33, entries=m.entries.copy())
    bad.entries[3, 3] = -0.5
    with pytest.raises(NotAMomentMatrix):
        classify_grid(bad, (-1, 1, -1, 1), (5, 5))


def test_envelope_warning():
    from cloudsep.traces import CloudMoments

    m = disk_moments(33)
    a = CloudMoments(
        degree=33,
        entries=m.entries,
        envelopes=np.full((34, 34), 0.5),
        J=10,
        N=50,
        area=PI,
    )
    with pytest.warns(UserWarning):
        classify_grid(a, (-1, 1, -1, 1), (3, 3))


def test_atom_mass_single_atom():
    a, mass = 1.0 + 0.5j, 0.8
    m = moments_of_spec(MeasureSpec(atoms=[(a, mass)]), 5)
    est = estimate_atom_mass(m, a, 0)
    assert abs(est.value - mass) < 1e-12


def test_atom_mass_monotone_and_converging():
    spec = MeasureSpec(shapes=[Disk(center=0.0, radius=1.0)], atoms=[(2.0, 1.0)])
    m = moments_of_spec(spec, 16, dps=60)
    est = estimate_atom_mass(m, 2.0, 16, dps=60)
    assert np.all(np.diff(est.sequence) <= 1e-12)
    # converges toward the unit mass from above; well on its way by degree 16
    assert 1.0 - 1e-9 <= est.value <= 1.5


def test_atom_mass_no_atom_decays():
    m = moments_of_spec(
        MeasureSpec(shapes=[Disk(center=0.0, radius=1.0)]), 16, dps=60
    )
    est = estimate_atom_mass(m, 2.0, 16, dps=60)
    assert est.value <= 1e-3
    seq = est.sequence
    # geometric-rate decrease in the exterior
    assert seq[-1] / seq[4] < 1e-6


def test_atom_mass_degree_error():
    m = moments_of_spec(MeasureSpec(atoms=[(1.0, 1.0)]), 4)
    with pytest.raises(DegreeOutOfRange):
        estimate_atom_mass(m, 1.0, 1)
