"""Point classification by Christoffel-function decay and atom mass estimates.

At a point inside the absolutely continuous part the Christoffel value
Lambda_n(z) decays like 1/n; outside the support it decays geometrically.
The ratio Lambda_{n2}(z) / Lambda_{n1}(z) at two degrees n1 < n2 therefore
separates interior from exterior, with a thin undecided band near the
boundary.  At an atom, Lambda_n(z0) converges to the atom's mass from above.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegreeOutOfRange, NotAMomentMatrix
from .hessenberg import build_hessenberg
from .moments import ComplexMoments
from .orthopoly import (
    basis_values,
    christoffel_sequence,
    orthonormalize,
    recurrence_values,
)

__all__ = [
    "LABEL_INTERIOR",
    "LABEL_EXTERIOR",
    "LABEL_BAND",
    "LABEL_NAMES",
    "ClassificationGrid",
    "AtomMassEstimate",
    "classify_grid",
    "connected_components",
    "estimate_atom_mass",
]

LABEL_INTERIOR = 0
LABEL_EXTERIOR = 1
LABEL_BAND = 2
LABEL_NAMES = ("interior", "exterior", "band")


@dataclass
class ClassificationGrid:
    """Labelled rectangular grid of Christoffel decay ratios."""

    box: tuple  # (xmin, xmax, ymin, ymax)
    resolution: tuple  # (nx, ny)
    labels: np.ndarray  # (nx, ny) ints, LABEL_* values
    lambda_low: np.ndarray  # Lambda at the lower degree
    lambda_high: np.ndarray  # Lambda at the higher degree
    degrees: tuple = (16, 32)
    thresholds: tuple = (0.5, 0.1)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.box[0], self.box[1], self.resolution[0])

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.box[2], self.box[3], self.resolution[1])

    @property
    def interior_mask(self) -> np.ndarray:
        return self.labels == LABEL_INTERIOR

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.lambda_high / self.lambda_low

    def save_csv(self, path):
        xs, ys = self.xs, self.ys
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("x,y,label,lambda_low,lambda_high\n")
            for j, yv in enumerate(ys):
                for i, xv in enumerate(xs):
                    fh.write(
                        f"{xv:.17g},{yv:.17g},{LABEL_NAMES[self.labels[i, j]]},"
                        f"{self.lambda_low[i, j]:.17g},{self.lambda_high[i, j]:.17g}\n"
                    )


@dataclass
class AtomMassEstimate:
    """Christoffel values at a candidate atom; they decrease toward the mass."""

    point: complex
    degree: int
    value: float
    sequence: np.ndarray = field(repr=False, default=None)


def _moments_from(a) -> ComplexMoments:
    if isinstance(a, ComplexMoments):
        return a
    entries = np.asarray(a.entries if hasattr(a, "entries") else a, dtype=complex)
    return ComplexMoments(degree=entries.shape[0] - 1, entries=entries)


def classify_grid(
    a,
    box,
    resolution=(41, 41),
    n1: int = 16,
    n2: int = 32,
    theta_in: float = 0.5,
    theta_out: float = 0.1,
    dps: int | None = None,
) -> ClassificationGrid:
    """Label grid points interior / exterior / band by Christoffel decay.

    Parameters
    ----------
    a : CloudMoments, ComplexMoments, or array
        Moment data reaching degree at least n2 + 1.
    box : tuple
        (xmin, xmax, ymin, ymax) of the grid.
    resolution : tuple
        Number of samples (nx, ny) along each axis.
    n1, n2 : int
        Lower and higher Christoffel degrees, n1 < n2.
    theta_in, theta_out : float
        Ratio thresholds: ratio >= theta_in labels interior,
        ratio <= theta_out labels exterior, anything between is band.

    Notes
    -----
    Data errors are absorbed by shifting any indefinite moment matrix to
    the positive cone before factoring; the classification is a ratio
    test, insensitive to that overall repair.
    """
    if not 0 < n1 < n2:
        raise ValueError("need 0 < n1 < n2")
    if not 0 <= theta_out < theta_in:
        raise ValueError("need 0 <= theta_out < theta_in")
    m = _moments_from(a)
    if m.degree < n2:
        raise DegreeOutOfRange(
            f"classification at degree {n2} needs moments to degree {n2}, "
            f"have {m.degree}"
        )
    env = getattr(a, "envelopes", None)
    allowed = 0.0
    if env is not None:
        env = np.asarray(env, dtype=float)
        ref = np.abs(np.asarray(m.entries))
        big = env > 0.01 * np.maximum(ref, ref.max() * 1e-6)
        if big.any():
            warnings.warn(
                f"{int(big.sum())} cloud-moment envelopes exceed 1% of the "
                "moment magnitude; classification near the boundary may shift",
                stacklevel=2,
            )
        # eigenvalue shift from within-envelope errors is at most the
        # Frobenius norm of the error matrix
        allowed = float(np.sqrt((env**2).sum()))
    scale = float(np.abs(m.entries).max())
    defect = -min(m.min_eigenvalue(), 0.0)
    if defect > allowed + 64 * np.finfo(float).eps * max(scale, 1.0):
        raise NotAMomentMatrix(
            f"moment matrix indefinite by {defect:.3g}, beyond the envelope "
            f"allowance {allowed:.3g}"
        )
    basis = orthonormalize(m, indef_action="shift", dps=dps)
    if basis.rank < n2 + 1 and dps is None:
        # double-precision pivots bottom out before degree n2; redo the
        # factorization with enough digits to resolve them
        basis = orthonormalize(
            m, indef_action="shift", dps=max(40, 20 + 3 * (n2 + 1))
        )
    if basis.rank < n2 + 1:
        raise DegreeOutOfRange(
            f"moment matrix rank {basis.rank} cannot support degree {n2} values"
        )

    nx, ny = resolution
    xs = np.linspace(box[0], box[1], nx)
    ys = np.linspace(box[2], box[3], ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    zs = (X + 1j * Y).ravel()
    P = None
    if m.degree >= n2 + 1 and basis.rank >= n2 + 2:
        # multiplication-matrix recurrence: the stable route when the data
        # supports it
        try:
            H = build_hessenberg(m, basis, n2 + 1)
            P = recurrence_values(H.entries, H.mass, zs, n2)
        except DegreeOutOfRange:
            P = None
    if P is None:
        P = basis_values(basis, zs, n2)
    mags = np.abs(P) ** 2
    K1 = mags[:, : n1 + 1].sum(axis=1)
    K2 = K1 + mags[:, n1 + 1 : n2 + 1].sum(axis=1)
    with np.errstate(divide="ignore"):
        lam1 = np.where(K1 > 0, 1.0 / K1, np.inf).reshape(nx, ny)
        lam2 = np.where(K2 > 0, 1.0 / K2, np.inf).reshape(nx, ny)
    ratio = lam2 / lam1
    labels = np.full((nx, ny), LABEL_BAND, dtype=np.int8)
    labels[ratio >= theta_in] = LABEL_INTERIOR
    labels[ratio <= theta_out] = LABEL_EXTERIOR
    return ClassificationGrid(
        box=tuple(box),
        resolution=(nx, ny),
        labels=labels,
        lambda_low=lam1,
        lambda_high=lam2,
        degrees=(n1, n2),
        thresholds=(theta_in, theta_out),
    )


def connected_components(grid: ClassificationGrid):
    """Connected interior components (4-connectivity).

    Returns
    -------
    count : int
    masks : list of ndarray
        Boolean masks in grid layout, ordered by first cell index in scan
        order (the order ndimage assigns labels).
    """
    from scipy import ndimage

    lab, count = ndimage.label(grid.interior_mask)
    return count, [lab == i for i in range(1, count + 1)]


def estimate_atom_mass(
    m: ComplexMoments, z0: complex, n: int, dps: int | None = None
) -> AtomMassEstimate:
    """Christoffel value at z0; an upper bound that decreases to the atom mass.

    Parameters
    ----------
    m : ComplexMoments
    z0 : complex
        Candidate atom location.
    n : int
        Degree of the estimate.
    dps : int, optional
        Extended precision for the factorization.  Beyond degree 12 or so
        the default double path loses the small pivots that drive the
        estimate; pass the precision the data merits.
    """
    basis = orthonormalize(m, dps=dps, indef_action="shift")
    if n >= basis.rank:
        raise DegreeOutOfRange(
            f"degree {n} needs rank > {n}, moment matrix has rank {basis.rank}"
        )
    seq = christoffel_sequence(basis, z0, n)
    return AtomMassEstimate(point=complex(z0), degree=n, value=float(seq[-1]), sequence=seq)
