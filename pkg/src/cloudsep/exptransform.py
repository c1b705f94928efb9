"""Exponential transform of the cloud and its rational (quadrature-domain) fit.

From cloud moments a_{kl} the transform's expansion at infinity is

    F(w, z) = exp(-L) = 1 + sum b_{mn} w^{-(m+1)} conj(z)^{-(n+1)},
    L = (1/pi) sum a_{kl} w^{-(k+1)} conj(z)^{-(l+1)},

computed by truncated formal-series arithmetic.  When the cloud is a
quadrature domain, F is rational: P(w) conj(P)(conj(z)) F(w, z) is a
polynomial Q up to the matching window, the roots of the monic P are the
quadrature nodes, and Q(z, conj(z)) = 0 cuts out the boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import DegreeOutOfRange, FitIllConditioned, OutsideDomainRequired

__all__ = [
    "ExpTransformSeries",
    "QuadratureDomainModel",
    "exp_series",
    "eval_exp_series",
    "eval_exp_disk",
    "pade_fit",
    "select_order",
    "boundary_points",
]


@dataclass
class ExpTransformSeries:
    """Expansion coefficients b[m][n] of the exponential transform at infinity."""

    window: int
    b: np.ndarray
    radius: float  # estimated support radius (series diverges inside)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=complex)
        n = self.window + 1
        if self.b.shape != (n, n):
            raise ValueError(f"b shape {self.b.shape} does not match window {self.window}")

    def hermitian_defect(self) -> float:
        return float(np.abs(self.b - self.b.conj().T).max())


@dataclass
class QuadratureDomainModel:
    """Rational model of the transform: nodes, numerator, boundary, residual."""

    order: int
    p: np.ndarray  # monic node polynomial, p[i] multiplies z^i, p[order] = 1
    q: np.ndarray  # numerator coefficients q[m][n] of w^m conj(z)^n
    nodes: np.ndarray
    boundary_xy: np.ndarray  # real coefficients of x^i y^j
    residual: float

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "P": [[v.real, v.imag] for v in self.p],
            "Q": [[[v.real, v.imag] for v in row] for row in self.q],
            "nodes": [[v.real, v.imag] for v in self.nodes],
            "boundary": {"coeffs": [[float(c) for c in row] for row in self.boundary_xy]},
            "residual": float(self.residual),
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def _entries_of(a) -> np.ndarray:
    entries = a.entries if hasattr(a, "entries") else a
    return np.asarray(entries, dtype=complex)


def _radius_estimate(entries: np.ndarray) -> float:
    """Support radius inferred from diagonal moment growth."""
    a00 = entries[0, 0].real
    if a00 <= 1e-300:
        return 0.0
    r = 0.0
    for k in range(1, entries.shape[0]):
        akk = abs(entries[k, k])
        if akk > 0:
            r = max(r, (akk * (k + 1) / a00) ** (1.0 / (2 * k)))
    return float(r)


def _conv2(A: np.ndarray, B: np.ndarray, n: int) -> np.ndarray:
    """Truncated 2D polynomial product, keeping exponents below n."""
    out = np.zeros((n, n), dtype=complex)
    ra, ca = A.shape
    for i in range(min(ra, n)):
        row = A[i]
        nz = np.nonzero(row[: min(ca, n)])[0]
        for j in nz:
            h = min(n - i, B.shape[0])
            w = min(n - j, B.shape[1])
            out[i : i + h, j : j + w] += row[j] * B[:h, :w]
    return out


def exp_series(a, d: int) -> ExpTransformSeries:
    """Coefficients of exp(-L) - 1 in the inverse variables, window d.

    Parameters
    ----------
    a : CloudMoments or array-like
        Hermitian cloud-moment matrix reaching degree >= d.
    d : int
        Window size; b[m][n] is produced for m, n <= d.

    Notes
    -----
    Exact formal-series arithmetic: the exponential is accumulated as
    term_m = term_{m-1} * (-L) / m, so no series division ever occurs.
    """
    entries = _entries_of(a)
    deg = entries.shape[0] - 1
    if d < 0:
        raise ValueError("window must be non-negative")
    if deg < d:
        raise DegreeOutOfRange(f"cloud moments reach degree {deg}, need {d}")
    n = d + 2
    L = np.zeros((n, n), dtype=complex)
    L[1 : d + 2, 1 : d + 2] = entries[: d + 1, : d + 1] / math.pi
    X = -L
    F = np.zeros((n, n), dtype=complex)
    F[0, 0] = 1.0
    term = F.copy()
    for m in range(1, d + 2):
        term = _conv2(term, X, n) / m
        F += term
    b = F[1:, 1:].copy()
    b = 0.5 * (b + b.conj().T)
    return ExpTransformSeries(window=d, b=b, radius=_radius_estimate(entries))


def eval_exp_series(series: ExpTransformSeries, w, z, radius: float | None = None):
    """Evaluate the transform from its series; valid outside the support."""
    R = series.radius if radius is None else radius
    w = np.asarray(w, dtype=complex)
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(w) <= R) or np.any(np.abs(z) <= R):
        raise OutsideDomainRequired(
            f"series evaluation needs |w|, |z| > support radius {R:.3g}"
        )
    iw = 1.0 / w
    izb = 1.0 / np.conj(z)
    n = series.window + 1
    # Horner in both inverse variables
    acc = np.zeros(np.broadcast(w, z).shape, dtype=complex)
    for m in range(n - 1, -1, -1):
        inner = np.zeros_like(acc)
        for k in range(n - 1, -1, -1):
            inner = inner * izb + series.b[m, k]
        acc = acc * iw + inner * izb
    out = 1.0 + acc * iw
    return complex(out) if out.shape == () else out


def eval_exp_disk(w, z, center: complex = 0.0, radius: float = 1.0):
    """Closed form for a disk: 1 - r^2 / ((w - c)(conj(z) - conj(c)))."""
    w = np.asarray(w, dtype=complex)
    z = np.asarray(z, dtype=complex)
    dw = w - center
    dz = np.conj(z) - np.conj(center)
    if np.any(np.abs(dw) <= radius) or np.any(np.abs(np.asarray(z) - center) <= radius):
        raise OutsideDomainRequired("disk closed form needs both points outside")
    out = 1.0 - radius**2 / (dw * dz)
    return complex(out) if out.shape == () else out


def _q_to_xy(q: np.ndarray) -> np.ndarray:
    """Rewrite sum q[m][n] z^m conj(z)^n as a real polynomial in x, y."""
    d = q.shape[0] - 1
    size = 2 * d + 1
    out = np.zeros((size, size), dtype=complex)
    # z^m = sum_s C(m,s) x^s (iy)^(m-s); conj(z)^n = sum_t C(n,t) x^t (-iy)^(n-t)
    for m in range(d + 1):
        for n in range(d + 1):
            c = q[m, n]
            if c == 0:
                continue
            for s in range(m + 1):
                for t in range(n + 1):
                    coef = (
                        c
                        * comb(m, s)
                        * comb(n, t)
                        * (1j) ** (m - s)
                        * (-1j) ** (n - t)
                    )
                    out[s + t, m - s + n - t] += coef
    scale = np.abs(out).max()
    if scale > 0 and np.abs(out.imag).max() > 1e-8 * scale:
        raise FitIllConditioned("boundary polynomial is not real after symmetrization")
    return out.real


def pade_fit(series: ExpTransformSeries, d: int) -> QuadratureDomainModel:
    """Fit a rational model of order d to the transform series.

    Solves, in least squares with column scaling, the linear system
    sum_{i<=d} p_i b[m+i][n] = 0 (p_d = 1) over all rows the window
    provides, then extracts the numerator Q as the polynomial part of
    P(w) conj(P)(conj(z)) F and reports the root-mean-square of the
    window coefficients that a true order-d quadrature domain would
    annihilate.

    Raises
    ------
    FitIllConditioned
        Zero series or numerically rank-deficient linear system.
    DegreeOutOfRange
        Window smaller than 2d.
    """
    if d < 1:
        raise ValueError("order must be at least 1")
    W = series.window
    if W < 2 * d:
        raise DegreeOutOfRange(f"series window {W} is below 2*order = {2 * d}")
    b = series.b
    bscale = float(np.abs(b).max())
    if bscale <= 1e-300:
        raise FitIllConditioned("transform series is identically zero; nothing to fit")
    rows_m = W - d + 1
    rows = []
    rhs = []
    for m in range(rows_m):
        for n in range(W + 1):
            rows.append([b[m + i, n] for i in range(d)])
            rhs.append(-b[m + d, n])
    M = np.array(rows, dtype=complex)
    r = np.array(rhs, dtype=complex)
    scales = np.linalg.norm(M, axis=0)
    scales[scales == 0] = 1.0
    Ms = M / scales
    y, _, rank, sv = np.linalg.lstsq(Ms, r, rcond=None)
    if rank < d or (sv.size and sv[-1] < 1e-12 * sv[0]):
        cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else float("inf")
        raise FitIllConditioned(
            f"node-polynomial system numerically rank deficient (cond ~ {cond:.2e})"
        )
    p = np.zeros(d + 1, dtype=complex)
    p[:d] = y / scales
    p[d] = 1.0
    nodes = np.roots(p[::-1]).astype(complex)
    dp = np.polyder(p[::-1])
    for i, nd in enumerate(nodes):
        deriv = np.polyval(dp, nd)
        if abs(deriv) > 1e-12:
            nodes[i] = nd - np.polyval(p[::-1], nd) / deriv
    nodes = nodes[np.lexsort((nodes.imag, nodes.real))]

    # numerator and residual from G = P(w) conj(P)(z-bar) F
    size = W + 2
    F = np.zeros((size, size), dtype=complex)
    F[0, 0] = 1.0
    F[1:, 1:] = b
    pu = p[::-1].copy()  # coefficient of u^j is p_{d-j}
    pv = pu.conj()
    PP = np.outer(pu, pv)
    G = _conv2(PP, F, size)
    q = np.empty((d + 1, d + 1), dtype=complex)
    for m in range(d + 1):
        for n in range(d + 1):
            q[m, n] = G[d - m, d - n]
    alpha = np.arange(size)[:, None]
    beta = np.arange(size)[None, :]
    in_q = (alpha <= d) & (beta <= d)
    in_tail = ((alpha >= 2 * d + 1) & (beta >= 2 * d)) | (
        (alpha >= 2 * d) & (beta >= 2 * d + 1)
    )
    must = ~(in_q | in_tail)
    residual = float(np.sqrt(np.mean(np.abs(G[must]) ** 2))) if must.any() else 0.0
    qh = 0.5 * (q + q.conj().T)
    return QuadratureDomainModel(
        order=d,
        p=p,
        q=q,
        nodes=nodes,
        boundary_xy=_q_to_xy(qh),
        residual=residual,
    )


def select_order(series: ExpTransformSeries, max_order: int, rel_tol: float = 0.05) -> int:
    """Numerical rank of the (-b) matrix, capped at max_order."""
    m = -0.5 * (series.b + series.b.conj().T)
    sv = np.linalg.svd(m, compute_uv=False)
    if sv.size == 0 or sv[0] <= 1e-10:
        return 0
    return int(min(int(np.sum(sv > rel_tol * sv[0])), max_order))


def eval_boundary(model: QuadratureDomainModel, x, y):
    """Evaluate the real boundary polynomial q(x, y) on arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = model.boundary_xy
    out = np.zeros(np.broadcast(x, y).shape, dtype=float)
    for i in range(c.shape[0] - 1, -1, -1):
        inner = np.zeros_like(out)
        for j in range(c.shape[1] - 1, -1, -1):
            inner = inner * y + c[i, j]
        out = out * x + inner
    return out


def boundary_points(
    model: QuadratureDomainModel, box, resolution: int = 201
) -> np.ndarray:
    """Sample the zero set of the boundary polynomial by sign-change scanning.

    Returns an (n, 2) array of (x, y) points where the polynomial changes
    sign along grid rows or columns, located by linear interpolation.
    """
    xmin, xmax, ymin, ymax = box
    xs = np.linspace(xmin, xmax, resolution)
    ys = np.linspace(ymin, ymax, resolution)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    V = eval_boundary(model, X, Y)
    pts = []
    sgn = np.sign(V)
    flips_x = sgn[:-1, :] * sgn[1:, :] < 0
    for i, j in zip(*np.nonzero(flips_x)):
        t = V[i, j] / (V[i, j] - V[i + 1, j])
        pts.append((xs[i] + t * (xs[i + 1] - xs[i]), ys[j]))
    flips_y = sgn[:, :-1] * sgn[:, 1:] < 0
    for i, j in zip(*np.nonzero(flips_y)):
        t = V[i, j] / (V[i, j] - V[i, j + 1])
        pts.append((xs[i], ys[j] + t * (ys[j + 1] - ys[j])))
    return np.array(sorted(pts)) if pts else np.zeros((0, 2))
