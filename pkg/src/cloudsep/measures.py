"""Measure specifications: uniform-density shapes, atoms, and sample clouds.

A :class:`MeasureSpec` describes a finite positive measure in the plane as a
sum of uniform-weight shapes (disks, ellipses, simple polygons) and point
masses.  A :class:`SampleCloud` is the empirical counterpart, a weighted list
of sample locations.  Both are the only inputs the rest of the pipeline sees;
everything downstream works from their power moments.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyMeasure

__all__ = [
    "Disk",
    "Ellipse",
    "Polygon",
    "MeasureSpec",
    "SampleCloud",
    "load_spec",
    "save_spec",
    "load_samples",
    "save_samples",
    "sample_spec",
]


@dataclass(frozen=True)
class Disk:
    """Uniform measure ``weight * dA`` on a disk.

    Parameters
    ----------
    center : complex
    radius : float
        Strictly positive.
    weight : float, optional
        Constant density on the disk, strictly positive.
    """

    center: complex
    radius: float
    weight: float = 1.0

    def validate(self):
        if not (self.radius > 0):
            raise ValueError(f"disk radius must be positive, got {self.radius}")
        if not (self.weight > 0):
            raise ValueError(f"disk weight must be positive, got {self.weight}")

    @property
    def mass(self) -> float:
        return self.weight * math.pi * self.radius**2

    @property
    def outer_radius(self) -> float:
        return abs(self.center) + self.radius


@dataclass(frozen=True)
class Ellipse:
    """Uniform measure on an ellipse with semi-axes ``a >= b > 0``.

    The region is the image of the unit disk under
    ``zeta -> center + exp(i*angle) * (alpha*zeta + beta*conj(zeta))`` with
    ``alpha = (a+b)/2`` and ``beta = (a-b)/2``.
    """

    center: complex
    a: float
    b: float
    angle: float = 0.0
    weight: float = 1.0

    def validate(self):
        if not (self.a >= self.b > 0):
            raise ValueError(f"ellipse needs a >= b > 0, got a={self.a}, b={self.b}")
        if not (self.weight > 0):
            raise ValueError(f"ellipse weight must be positive, got {self.weight}")

    @property
    def mass(self) -> float:
        return self.weight * math.pi * self.a * self.b

    @property
    def outer_radius(self) -> float:
        return abs(self.center) + self.a


@dataclass(frozen=True)
class Polygon:
    """Uniform measure on a simple polygon given by its vertices.

    Vertices are complex numbers; the boundary is closed implicitly.  The
    stored orientation is normalized to counterclockwise.
    """

    vertices: tuple
    weight: float = 1.0

    def __init__(self, vertices, weight: float = 1.0):
        verts = tuple(complex(v) for v in vertices)
        if len(verts) >= 3 and _signed_area(verts) < 0:
            verts = verts[::-1]
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "weight", float(weight))

    def validate(self):
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        if not (self.weight > 0):
            raise ValueError(f"polygon weight must be positive, got {self.weight}")
        if abs(_signed_area(self.vertices)) < 1e-14 * max(
            1.0, max(abs(v) for v in self.vertices) ** 2
        ):
            raise ValueError("polygon is degenerate (zero area)")
        if not _is_simple(self.vertices):
            raise ValueError("polygon boundary is self-intersecting")

    @property
    def area(self) -> float:
        return abs(_signed_area(self.vertices))

    @property
    def mass(self) -> float:
        return self.weight * self.area

    @property
    def outer_radius(self) -> float:
        return max(abs(v) for v in self.vertices)


def _signed_area(verts) -> float:
    """Shoelace signed area; positive for counterclockwise vertex order."""
    s = 0.0
    n = len(verts)
    for i in range(n):
        z0, z1 = verts[i], verts[(i + 1) % n]
        s += z0.real * z1.imag - z1.real * z0.imag
    return 0.5 * s


def _is_simple(verts) -> bool:
    # shapely is only needed for this validity check; import lazily so the
    # numeric core stays importable without it.
    from shapely.geometry import Polygon as _ShPolygon

    return _ShPolygon([(v.real, v.imag) for v in verts]).is_valid


@dataclass
class MeasureSpec:
    """A planar measure: uniform shapes plus point masses.

    Parameters
    ----------
    shapes : list of Disk | Ellipse | Polygon
    atoms : list of (complex, float)
        Point masses as ``(location, mass)`` pairs, masses strictly positive.
    """

    shapes: list = field(default_factory=list)
    atoms: list = field(default_factory=list)

    def __post_init__(self):
        self.atoms = [(complex(z), float(m)) for z, m in self.atoms]

    def validate(self):
        """Check all component invariants; raise ValueError or EmptyMeasure."""
        for s in self.shapes:
            s.validate()
        for z, m in self.atoms:
            if not (m > 0):
                raise ValueError(f"atom mass must be positive, got {m} at {z}")
            if not (math.isfinite(z.real) and math.isfinite(z.imag)):
                raise ValueError(f"atom location must be finite, got {z}")
        if not self.shapes and not self.atoms:
            raise EmptyMeasure("measure spec has no components")

    @property
    def total_mass(self) -> float:
        return sum(s.mass for s in self.shapes) + sum(m for _, m in self.atoms)

    @property
    def support_radius(self) -> float:
        """Radius of a disk around the origin containing the support."""
        r = 0.0
        for s in self.shapes:
            r = max(r, s.outer_radius)
        for z, _ in self.atoms:
            r = max(r, abs(z))
        return r


@dataclass
class SampleCloud:
    """Weighted point samples of a measure."""

    points: np.ndarray  # complex locations
    weights: np.ndarray  # positive weights

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex).ravel()
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.points.shape != self.weights.shape:
            raise ValueError("points and weights must have equal length")

    def validate(self):
        if self.points.size == 0:
            raise EmptyMeasure("sample cloud is empty")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise ValueError("sample weights must be finite and positive")
        if not np.all(np.isfinite(self.points.real) & np.isfinite(self.points.imag)):
            raise ValueError("sample locations must be finite")

    def __len__(self):
        return self.points.size

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def support_radius(self) -> float:
        return float(np.abs(self.points).max()) if len(self) else 0.0


# ---------------------------------------------------------------------------
# serialization

def _cplx(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ValueError(f"expected [re, im] pair, got {v!r}")


def spec_to_dict(spec: MeasureSpec) -> dict:
    shapes = []
    for s in spec.shapes:
        if isinstance(s, Disk):
            shapes.append(
                {
                    "kind": "disk",
                    "center": [s.center.real, s.center.imag],
                    "radius": s.radius,
                    "weight": s.weight,
                }
            )
        elif isinstance(s, Ellipse):
            shapes.append(
                {
                    "kind": "ellipse",
                    "center": [s.center.real, s.center.imag],
                    "semi_axes": [s.a, s.b],
                    "angle": s.angle,
                    "weight": s.weight,
                }
            )
        elif isinstance(s, Polygon):
            shapes.append(
                {
                    "kind": "polygon",
                    "vertices": [[v.real, v.imag] for v in s.vertices],
                    "weight": s.weight,
                }
            )
        else:
            raise ValueError(f"unknown shape type {type(s).__name__}")
    return {
        "shapes": shapes,
        "atoms": [[z.real, z.imag, m] for z, m in spec.atoms],
    }


def spec_from_dict(data: dict) -> MeasureSpec:
    if not isinstance(data, dict):
        raise ValueError("measure spec must be a JSON object")
    shapes = []
    for item in data.get("shapes", []):
        kind = item.get("kind")
        if kind == "disk":
            shapes.append(
                Disk(
                    center=_cplx(item["center"]),
                    radius=float(item["radius"]),
                    weight=float(item.get("weight", 1.0)),
                )
            )
        elif kind == "ellipse":
            a, b = item["semi_axes"]
            shapes.append(
                Ellipse(
                    center=_cplx(item["center"]),
                    a=float(a),
                    b=float(b),
                    angle=float(item.get("angle", 0.0)),
                    weight=float(item.get("weight", 1.0)),
                )
            )
        elif kind == "polygon":
            shapes.append(
                Polygon(
                    vertices=[complex(float(x), float(y)) for x, y in item["vertices"]],
                    weight=float(item.get("weight", 1.0)),
                )
            )
        else:
            raise ValueError(f"unknown shape kind {kind!r}")
    atoms = []
    for entry in data.get("atoms", []):
        if len(entry) != 3:
            raise ValueError(f"atom entry must be [re, im, mass], got {entry!r}")
        re, im, m = entry
        atoms.append((complex(float(re), float(im)), float(m)))
    spec = MeasureSpec(shapes=shapes, atoms=atoms)
    spec.validate()
    return spec


def load_spec(path) -> MeasureSpec:
    """Read a measure spec from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from exc
    return spec_from_dict(data)


def save_spec(spec: MeasureSpec, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2)
        fh.write("\n")


def load_samples(path) -> SampleCloud:
    """Read a sample cloud from CSV with header ``x,y,weight`` (weight optional)."""
    points, weights = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty sample file") from None
        header = [h.strip().lower() for h in header]
        if header[:2] != ["x", "y"] or len(header) > 3 or (
            len(header) == 3 and header[2] != "weight"
        ):
            raise ValueError(f"{path}: expected header 'x,y[,weight]', got {header}")
        has_w = len(header) == 3
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                x, y = float(row[0]), float(row[1])
                w = float(row[2]) if has_w else 1.0
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field") from None
            if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(w)):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            if w <= 0:
                raise ValueError(f"{path}:{lineno}: weight must be positive")
            points.append(complex(x, y))
            weights.append(w)
    cloud = SampleCloud(np.array(points, dtype=complex), np.array(weights))
    cloud.validate()
    return cloud


def save_samples(cloud: SampleCloud, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "weight"])
        for z, w in zip(cloud.points, cloud.weights):
            writer.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(w))])


# ---------------------------------------------------------------------------
# random sampling (for the synth command and Monte-Carlo tests)

def _triangulate(verts):
    """Ear-clipping triangulation of a simple polygon (counterclockwise)."""
    idx = list(range(len(verts)))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(verts) ** 2:
            raise ValueError("triangulation failed; polygon may be invalid")
        n = len(idx)
        clipped = False
        for i in range(n):
            ia, ib, ic = idx[i - 1], idx[i], idx[(i + 1) % n]
            a, b, c = verts[ia], verts[ib], verts[ic]
            cross = (b - a).real * (c - a).imag - (b - a).imag * (c - a).real
            if cross <= 0:
                continue  # reflex corner, not an ear
            if any(
                _point_in_triangle(verts[j], a, b, c)
                for j in idx
                if j not in (ia, ib, ic)
            ):
                continue
            tris.append((a, b, c))
            idx.pop(i)
            clipped = True
            break
        if not clipped:
            raise ValueError("triangulation failed; polygon may be invalid")
    tris.append(tuple(verts[j] for j in idx))
    return tris


def _point_in_triangle(p, a, b, c) -> bool:
    def side(p, q, r):
        return (q - p).real * (r - p).imag - (q - p).imag * (r - p).real

    d1, d2, d3 = side(a, b, p), side(b, c, p), side(c, a, p)
    return min(d1, d2, d3) >= 0 or max(d1, d2, d3) <= 0


def _sample_shape(shape, n: int, rng) -> np.ndarray:
    u = rng.random(n)
    if isinstance(shape, Disk):
        theta = 2 * np.pi * rng.random(n)
        return shape.center + shape.radius * np.sqrt(u) * np.exp(1j * theta)
    if isinstance(shape, Ellipse):
        theta = 2 * np.pi * rng.random(n)
        zeta = np.sqrt(u) * np.exp(1j * theta)
        alpha, beta = (shape.a + shape.b) / 2, (shape.a - shape.b) / 2
        return shape.center + np.exp(1j * shape.angle) * (
            alpha * zeta + beta * np.conj(zeta)
        )
    if isinstance(shape, Polygon):
        tris = _triangulate(list(shape.vertices))
        areas = np.array(
            [abs(_signed_area(t)) for t in tris], dtype=float
        )
        pick = rng.choice(len(tris), size=n, p=areas / areas.sum())
        s = np.sqrt(rng.random(n))
        t = rng.random(n)
        out = np.empty(n, dtype=complex)
        for i, k in enumerate(pick):
            a, b, c = tris[k]
            out[i] = (1 - s[i]) * a + s[i] * ((1 - t[i]) * b + t[i] * c)
        return out
    raise ValueError(f"unknown shape type {type(shape).__name__}")


def sample_spec(spec: MeasureSpec, n: int, seed: int = 0) -> SampleCloud:
    """Draw a weighted sample cloud from a measure spec.

    Continuous shapes contribute ``n`` points in total, allocated
    proportionally to their masses, each point carrying an equal share of its
    shape's mass.  Atoms are appended verbatim as single weighted points, so
    the cloud's total mass equals the spec's exactly.

    Parameters
    ----------
    spec : MeasureSpec
    n : int
        Number of random points for the continuous part (ignored when there
        are no shapes).
    seed : int
        Seed for the random generator; fixed seed gives identical clouds.
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    points, weights = [], []
    masses = [s.mass for s in spec.shapes]
    total = sum(masses)
    if spec.shapes and n > 0:
        counts = [max(1, round(n * m / total)) for m in masses]
        for shape, cnt, m in zip(spec.shapes, counts, masses):
            pts = _sample_shape(shape, cnt, rng)
            points.append(pts)
            weights.append(np.full(cnt, m / cnt))
    for z, m in spec.atoms:
        points.append(np.array([z]))
        weights.append(np.array([m]))
    cloud = SampleCloud(np.concatenate(points), np.concatenate(weights))
    cloud.validate()
    return cloud
