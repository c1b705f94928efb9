"""Exact discretization of measure specs into weighted point clouds.

Each rule integrates z^a conj(z)^b exactly (to roundoff) for all a, b up to
the requested bidegree, which is what the sample-based orthogonalization
route needs: every inner product it forms is then identical to the continuous
one.  Node counts grow quadratically with the bidegree.
"""

from __future__ import annotations

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import QuadratureFailure
from .measures import Disk, Ellipse, MeasureSpec, Polygon, SampleCloud, _triangulate

__all__ = ["discretize_spec", "disk_rule", "ellipse_rule", "polygon_rule"]


def _radial_rule(m: int):
    # Gauss-Legendre on t in [0,1] for the squared-radius variable.
    t, w = roots_legendre(m)
    return 0.5 * (t + 1.0), 0.5 * w


def disk_rule(disk: Disk, bidegree: int):
    """Product rule on a disk, exact for z^a conj(z)^b with a, b <= bidegree."""
    ntheta = bidegree + 2
    m = bidegree // 2 + 1
    t, wt = _radial_rule(m)
    theta = 2 * np.pi * np.arange(ntheta) / ntheta
    radii = disk.radius * np.sqrt(t)
    pts = disk.center + np.outer(radii, np.exp(1j * theta)).ravel()
    w = disk.weight * np.pi * disk.radius**2 / ntheta
    weights = np.repeat(w * wt, ntheta)
    return pts, weights


def ellipse_rule(ell: Ellipse, bidegree: int):
    # The affine map mixes z and conj(z), so exactness must hold for total
    # degree 2*bidegree on the reference disk.
    ntheta = 2 * bidegree + 2
    m = bidegree + 1
    t, wt = _radial_rule(m)
    theta = 2 * np.pi * np.arange(ntheta) / ntheta
    zeta = np.outer(np.sqrt(t), np.exp(1j * theta)).ravel()
    alpha, beta = (ell.a + ell.b) / 2, (ell.a - ell.b) / 2
    pts = ell.center + np.exp(1j * ell.angle) * (alpha * zeta + beta * np.conj(zeta))
    w = ell.weight * np.pi * ell.a * ell.b / ntheta
    weights = np.repeat(w * wt, ntheta)
    return pts, weights


def polygon_rule(poly: Polygon, bidegree: int):
    """Triangulation plus collapsed tensor rules, exact for total degree 2*bidegree."""
    m = bidegree + 1
    xs, ws = roots_jacobi(m, 1.0, 0.0)  # weight (1-x) on [-1,1]
    s = 0.5 * (xs + 1.0)
    ws = 0.25 * ws  # absorbs the (1-s) Jacobian factor
    xt, wt = roots_legendre(m)
    tq = 0.5 * (xt + 1.0)
    wt = 0.5 * wt
    try:
        tris = _triangulate(list(poly.vertices))
    except ValueError as exc:
        raise QuadratureFailure(f"polygon triangulation failed: {exc}") from exc
    pts_all, w_all = [], []
    sw = np.outer(ws, wt).ravel()
    sg, tg = np.meshgrid(s, tq, indexing="ij")
    sg, tg = sg.ravel(), tg.ravel()
    for a, b, c in tris:
        area2 = abs(
            (b - a).real * (c - a).imag - (b - a).imag * (c - a).real
        )
        pts = a + sg * (b - a) + tg * (1 - sg) * (c - a)
        pts_all.append(pts)
        w_all.append(poly.weight * area2 * sw)
    return np.concatenate(pts_all), np.concatenate(w_all)


def discretize_spec(spec: MeasureSpec, bidegree: int) -> SampleCloud:
    """Replace every shape by an exactness-matched quadrature rule.

    Parameters
    ----------
    spec : MeasureSpec
    bidegree : int
        The resulting cloud reproduces all moments s_{ab} of the spec exactly
        for a, b <= bidegree.  Atoms pass through as single weighted points.
    """
    spec.validate()
    if bidegree < 0:
        raise ValueError("bidegree must be non-negative")
    pts_all, w_all = [], []
    for shape in spec.shapes:
        if isinstance(shape, Disk):
            pts, w = disk_rule(shape, bidegree)
        elif isinstance(shape, Ellipse):
            pts, w = ellipse_rule(shape, bidegree)
        elif isinstance(shape, Polygon):
            pts, w = polygon_rule(shape, bidegree)
        else:
            raise ValueError(f"unknown shape type {type(shape).__name__}")
        pts_all.append(pts)
        w_all.append(w)
    if spec.atoms:
        pts_all.append(np.array([z for z, _ in spec.atoms], dtype=complex))
        w_all.append(np.array([m for _, m in spec.atoms]))
    cloud = SampleCloud(np.concatenate(pts_all), np.concatenate(w_all))
    cloud.validate()
    return cloud
