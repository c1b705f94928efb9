"""Measure specs, sample clouds, and their file formats."""

import math

import numpy as np
import pytest

from cloudsep import Disk, Ellipse, EmptyMeasure, MeasureSpec, Polygon, SampleCloud
from cloudsep.measures import (
    load_samples,
    load_spec,
    sample_spec,
    save_samples,
    save_spec,
    spec_from_dict,
    spec_to_dict,
)


def test_disk_mass_and_radius():
    d = Disk(center=1 + 1j, radius=0.5, weight=2.0)
    d.validate()
    assert abs(d.mass - 2.0 * math.pi * 0.25) < 1e-15
    assert abs(d.outer_radius - (math.sqrt(2) + 0.5)) < 1e-15


def test_ellipse_mass():
    e = Ellipse(center=0.0, a=2.0, b=0.5, angle=0.3)
    e.validate()
    assert abs(e.mass - math.pi) < 1e-15


def test_polygon_square_mass_and_orientation():
    # clockwise input is normalized to counterclockwise storage
    sq = Polygon([0, 1j, 1 + 1j, 1])
    sq.validate()
    assert abs(sq.area - 1.0) < 1e-15
    verts = list(sq.vertices)
    s = sum(
        v0.real * v1.imag - v1.real * v0.imag
        for v0, v1 in zip(verts, verts[1:] + verts[:1])
    )
    assert s > 0


@pytest.mark.parametrize(
    "shape",
    [
        Disk(center=0.0, radius=0.0),
        Disk(center=0.0, radius=1.0, weight=-1.0),
        Ellipse(center=0.0, a=0.5, b=1.0),
        Polygon([0, 1]),
        Polygon([0, 2, 1 + 2j, 2 + 1j]),  # crossing edges
    ],
)
def test_invalid_shapes(shape):
    with pytest.raises(ValueError):
        shape.validate()


def test_bowtie_polygon_rejected():
    with pytest.raises(ValueError):
        Polygon([0, 1 + 1j, 1, 1j]).validate()


def test_empty_spec():
    with pytest.raises(EmptyMeasure):
        MeasureSpec().validate()


def test_negative_atom_mass():
    with pytest.raises(ValueError):
        MeasureSpec(atoms=[(1.0, -0.5)]).validate()


def test_spec_totals():
    spec = MeasureSpec(
        shapes=[Disk(center=0.0, radius=1.0)],
        atoms=[(2.0, 1.0), (3.0j, 2.0)],
    )
    spec.validate()
    assert abs(spec.total_mass - (math.pi + 3.0)) < 1e-12
    assert abs(spec.support_radius - 3.0) < 1e-15


def test_spec_json_roundtrip(tmp_path):
    spec = MeasureSpec(
        shapes=[
            Disk(center=1 - 1j, radius=0.25, weight=3.0),
            Ellipse(center=0.5j, a=1.0, b=0.5, angle=0.7),
            Polygon([0, 1, 1 + 1j]),
        ],
        atoms=[(2.0 + 0.5j, 0.125)],
    )
    path = tmp_path / "spec.json"
    save_spec(spec, path)
    back = load_spec(path)
    assert spec_to_dict(back) == spec_to_dict(spec)


def test_spec_from_dict_rejects_unknown_kind():
    with pytest.raises(ValueError):
        spec_from_dict({"shapes": [{"kind": "blob", "center": [0, 0]}]})


def test_samples_roundtrip(tmp_path):
    cloud = SampleCloud(
        points=np.array([1 + 2j, -0.5j, 3.0]),
        weights=np.array([0.1, 2.0, 0.7]),
    )
    path = tmp_path / "samples.csv"
    save_samples(cloud, path)
    back = load_samples(path)
    assert np.array_equal(back.points, cloud.points)
    assert np.array_equal(back.weights, cloud.weights)


def test_samples_default_weight(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("x,y\n1.0,2.0\n3.0,4.0\n")
    cloud = load_samples(path)
    assert np.array_equal(cloud.weights, [1.0, 1.0])


@pytest.mark.parametrize(
    "body",
    [
        "a,b\n1,2\n",  # wrong header
        "x,y\n1.0\n",  # short row
        "x,y\nfoo,2.0\n",  # non-numeric
        "x,y,weight\n1.0,2.0,-1.0\n",  # negative weight
        "x,y,weight\n1.0,2.0,nan\n",  # non-finite
        "",  # empty file
    ],
)
def test_malformed_sample_csv(tmp_path, body):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(ValueError):
        load_samples(path)


def test_sample_cloud_validation():
    with pytest.raises(EmptyMeasure):
        SampleCloud(np.array([]), np.array([])).validate()
    with pytest.raises(ValueError):
        SampleCloud(np.array([1.0 + 0j]), np.array([0.0])).validate()


def test_sample_spec_deterministic_and_mass_exact():
    spec = MeasureSpec(
        shapes=[Disk(center=0.0, radius=1.0), Disk(center=3.0, radius=0.5)],
        atoms=[(5.0j, 0.25)],
    )
    c1 = sample_spec(spec, 400, seed=11)
    c2 = sample_spec(spec, 400, seed=11)
    assert np.array_equal(c1.points, c2.points)
    assert np.array_equal(c1.weights, c2.weights)
    assert abs(c1.total_mass - spec.total_mass) < 1e-12
    # atom location appears verbatim with its exact mass
    hit = np.isclose(c1.points, 5.0j)
    assert hit.sum() == 1 and abs(c1.weights[hit][0] - 0.25) < 1e-15


def test_sample_spec_points_inside_support():
    spec = MeasureSpec(shapes=[Polygon([0, 2, 2 + 1j, 1j])])
    cloud = sample_spec(spec, 500, seed=3)
    assert np.all(cloud.points.real >= -1e-12)
    assert np.all(cloud.points.real <= 2 + 1e-12)
    assert np.all(cloud.points.imag >= -1e-12)
    assert np.all(cloud.points.imag <= 1 + 1e-12)
