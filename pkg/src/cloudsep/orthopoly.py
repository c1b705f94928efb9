"""Orthonormal polynomials, Christoffel-Darboux kernels, Christoffel functions.

The basis comes from a pivot-free Cholesky factorization of the moment
matrix.  The matrix is equilibrated by its diagonal first (the monomial
scales vary over many orders of magnitude), and an optional diagonal shift
repairs slight indefiniteness in recovered (noisy) moment data.  For exact
moment data beyond degree ~16 the factorization can run in mpmath extended
precision; the resulting coefficients are kept at full precision for
downstream point evaluation.

Conventions: row n of ``coeffs`` holds c_{n0..nn} with p_n(z) = sum_i c_{ni}
z^i and leading coefficient gamma_n = c_{nn} real and positive.  The matrix
factored is S with S[k][l] = s_{kl}, so that C S C^H = I expresses
orthonormality of the p_n in L^2 of the measure.  (The monomial Gram matrix
G[j][k] = s[k][j] is the transpose; for measures with real moments the two
coincide.)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from mpmath import mp
from scipy.linalg import solve_triangular

from .errors import (
    DegreeOutOfRange,
    EmptyMeasure,
    InfiniteChristoffel,
    NotAMomentMatrix,
)
from .moments import ComplexMoments

__all__ = [
    "OrthonormalBasis",
    "ChristoffelValue",
    "orthonormalize",
    "basis_values",
    "cd_kernel",
    "christoffel",
    "christoffel_sequence",
    "recurrence_values",
]


@dataclass
class OrthonormalBasis:
    """Orthonormal polynomial basis of a moment matrix.

    Attributes
    ----------
    rank : int
        Number of basis polynomials (numerical rank of the moment matrix).
    degree : int
        Degree of the source moment data.
    coeffs : ndarray
        (rank, degree+1) lower-triangular-in-support rows; p_n(z) = sum_i
        coeffs[n, i] z^i.
    mass : float
        Total mass s_00.
    condition_diagnostics : list of float
        Per-degree pivot growth ratios (largest pivot so far / current).
    shift : float
        Diagonal regularization added to the equilibrated moment matrix
        (0.0 when none was needed).
    """

    rank: int
    degree: int
    coeffs: np.ndarray
    mass: float
    condition_diagnostics: list = field(default_factory=list)
    shift: float = 0.0
    dps: int | None = None
    mp_coeffs: list | None = None  # rows of mpc coefficients when dps is set

    @property
    def gammas(self) -> np.ndarray:
        return np.array([self.coeffs[n, n].real for n in range(self.rank)])


@dataclass(frozen=True)
class ChristoffelValue:
    degree: int
    point: complex
    lam: float


def _chol_pivots(A, n, tol):
    """Pivot-free Cholesky with rank stop; returns (L, rank, pivots, bad).

    ``bad`` is the index of a pivot below -tol (indefinite signal) or None.
    """
    L = np.zeros((n, n), dtype=complex)
    pivots = []
    rank = n
    bad = None
    for k in range(n):
        p = A[k, k].real - np.sum(np.abs(L[k, :k]) ** 2)
        if p < -tol:
            bad = k
            rank = k
            break
        if p <= tol:
            rank = k
            break
        pivots.append(p)
        L[k, k] = np.sqrt(p)
        if k + 1 < n:
            L[k + 1 :, k] = (
                A[k + 1 :, k] - L[k + 1 :, :k] @ L[k, :k].conj()
            ) / L[k, k]
    return L, rank, pivots, bad


def _orthonormalize_double(S, rank_tol, indef_action):
    n = S.shape[0]
    diag = S.diagonal().real.copy()
    if diag[0] <= 0:
        raise EmptyMeasure("total mass is not positive")
    scale = np.sqrt(np.maximum(diag, 0.0))
    scale[scale == 0] = 1.0
    A = S / np.outer(scale, scale)
    A = 0.5 * (A + A.conj().T)
    tol = rank_tol if rank_tol is not None else np.sqrt(np.finfo(float).eps) * n
    shift = 0.0
    L, rank, pivots, bad = _chol_pivots(A, n, tol)
    if bad is not None:
        lam_min = float(np.linalg.eigvalsh(A)[0])
        if indef_action == "raise" and lam_min < -tol:
            raise NotAMomentMatrix(
                f"equilibrated moment matrix has eigenvalue {lam_min:.3e} below -{tol:.1e}"
            )
        shift = max(0.0, -lam_min) + 10 * tol
        A = A + shift * np.eye(n)
        L, rank, pivots, bad = _chol_pivots(A, n, tol)
        if bad is not None:
            raise NotAMomentMatrix("moment matrix remains indefinite after repair")
    if rank == 0:
        raise EmptyMeasure("moment matrix has numerical rank 0")
    Lr = L[:rank, :rank]
    C = solve_triangular(Lr, np.eye(rank), lower=True)
    C = C / scale[None, :rank]
    pmax = np.maximum.accumulate(np.array(pivots))
    diagnostics = list(pmax / np.array(pivots))
    return C, rank, diagnostics, shift


def _mp_chol(A, n, tol):
    L = [[mp.mpc(0)] * n for _ in range(n)]
    pivots = []
    rank = n
    for k in range(n):
        p = mp.re(A[k][k]) - mp.fsum(abs(L[k][j]) ** 2 for j in range(k))
        if p < -tol:
            return L, rank, pivots, k
        if p <= tol:
            rank = k
            break
        pivots.append(p)
        L[k][k] = mp.sqrt(p)
        for i in range(k + 1, n):
            acc = A[i][k]
            for j in range(k):
                acc -= L[i][j] * L[k][j].conjugate()
            L[i][k] = acc / L[k][k]
    return L, rank, pivots, None


def _orthonormalize_mp(m: ComplexMoments, rank_tol, dps, indef_action):
    n = m.degree + 1
    with mp.workdps(dps):
        if m.mp_entries is not None:
            S = [[mp.mpc(m.mp_entries[i][j]) for j in range(n)] for i in range(n)]
        else:
            S = [[mp.mpc(m.entries[i, j]) for j in range(n)] for i in range(n)]
        if mp.re(S[0][0]) <= 0:
            raise EmptyMeasure("total mass is not positive")
        scale = [mp.sqrt(mp.re(S[k][k])) if mp.re(S[k][k]) > 0 else mp.mpf(1) for k in range(n)]
        A = [[S[i][j] / (scale[i] * scale[j]) for j in range(n)] for i in range(n)]
        tol = mp.mpf(rank_tol) if rank_tol is not None else mp.mpf(10) ** (-dps // 2) * n
        L, rank, pivots, bad = _mp_chol(A, n, tol)
        if bad is not None:
            if indef_action == "raise":
                raise NotAMomentMatrix(
                    f"moment matrix indefinite at pivot {bad}"
                )
            # double-precision eigenvalue locates the shift; grow it until
            # the factorization completes
            ent = np.array([[complex(S[i][j]) for j in range(n)] for i in range(n)])
            sc = np.array([float(s) for s in scale])
            Ad = ent / np.outer(sc, sc)
            lam = float(np.linalg.eigvalsh(0.5 * (Ad + Ad.conj().T))[0])
            shift = mp.mpf(max(0.0, -lam)) + 10 * tol
            for _ in range(60):
                As = [
                    [A[i][j] + (shift if i == j else 0) for j in range(n)]
                    for i in range(n)
                ]
                L, rank, pivots, bad = _mp_chol(As, n, tol)
                if bad is None:
                    break
                shift *= 2
            if bad is not None:
                raise NotAMomentMatrix("moment matrix remains indefinite after repair")
        if rank == 0:
            raise EmptyMeasure("moment matrix has numerical rank 0")
        # forward-substitute for C = L^{-1} row by row
        C = [[mp.mpc(0)] * rank for _ in range(rank)]
        for i in range(rank):
            for j in range(i + 1):
                rhs = mp.mpc(1) if i == j else mp.mpc(0)
                for t in range(j, i):
                    rhs -= L[i][t] * C[t][j]
                C[i][j] = rhs / L[i][i]
        mp_rows = [
            [C[i][j] / scale[j] for j in range(i + 1)] for i in range(rank)
        ]
        pmax = []
        best = pivots[0]
        for p in pivots:
            best = max(best, p)
            pmax.append(float(best / p))
    coeffs = np.zeros((rank, n), dtype=complex)
    for i in range(rank):
        for j in range(i + 1):
            coeffs[i, j] = complex(mp_rows[i][j])
    return coeffs, rank, pmax, mp_rows


def orthonormalize(
    m: ComplexMoments,
    rank_tol: float | None = None,
    indef_action: str = "raise",
    dps: int | None = None,
) -> OrthonormalBasis:
    """Build the orthonormal polynomial basis of a moment matrix.

    Parameters
    ----------
    m : ComplexMoments
    rank_tol : float, optional
        Pivot threshold on the equilibrated (unit-diagonal) matrix; defaults
        to sqrt(machine epsilon) times the matrix size.
    indef_action : {"raise", "shift"}
        What to do when a pivot goes negative beyond tolerance: raise
        NotAMomentMatrix, or repair with a diagonal shift sized by the most
        negative eigenvalue (for recovered moment data with known error
        envelopes).
    dps : int, optional
        Run the factorization in mpmath extended precision with this many
        decimal digits.  Required in practice for exact moment data beyond
        degree ~16.

    Returns
    -------
    OrthonormalBasis
    """
    if m.degree < 0:
        raise ValueError("degree must be non-negative")
    if indef_action not in ("raise", "shift"):
        raise ValueError(f"unknown indef_action {indef_action!r}")
    if dps is not None:
        effective = max(dps, m.dps or 0)
        coeffs, rank, diagnostics, mp_rows = _orthonormalize_mp(
            m, rank_tol, effective, indef_action
        )
        return OrthonormalBasis(
            rank=rank,
            degree=m.degree,
            coeffs=coeffs,
            mass=m.total_mass,
            condition_diagnostics=diagnostics,
            dps=effective,
            mp_coeffs=mp_rows,
        )
    C, rank, diagnostics, shift = _orthonormalize_double(
        np.asarray(m.entries, dtype=complex), rank_tol, indef_action
    )
    coeffs = np.zeros((rank, m.degree + 1), dtype=complex)
    coeffs[:, :rank] = C
    return OrthonormalBasis(
        rank=rank,
        degree=m.degree,
        coeffs=coeffs,
        mass=m.total_mass,
        condition_diagnostics=diagnostics,
        shift=shift,
    )


# ---------------------------------------------------------------------------
# evaluation

def basis_values(basis: OrthonormalBasis, zs, nmax: int | None = None) -> np.ndarray:
    """Values p_j(z) for j <= nmax at the given points, shape (npts, nmax+1).

    Direct coefficient evaluation; adequate for moderate degrees.  For
    recovered (noisy) bases at high degree prefer ``recurrence_values``.
    """
    if nmax is None:
        nmax = basis.rank - 1
    if nmax >= basis.rank:
        raise DegreeOutOfRange(f"degree {nmax} >= basis rank {basis.rank}")
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    if basis.mp_coeffs is not None:
        with mp.workdps(basis.dps):
            out = np.empty((zs.size, nmax + 1), dtype=complex)
            for i, z in enumerate(zs):
                zmp = mp.mpc(z)
                powers = [mp.mpc(1)]
                for _ in range(nmax):
                    powers.append(powers[-1] * zmp)
                for j in range(nmax + 1):
                    row = basis.mp_coeffs[j]
                    out[i, j] = complex(
                        mp.fsum(row[t] * powers[t] for t in range(len(row)))
                    )
        return out
    V = np.vander(zs, nmax + 1, increasing=True)
    return V @ basis.coeffs[: nmax + 1, : nmax + 1].T


def cd_kernel(basis: OrthonormalBasis, n: int, w, z):
    """Christoffel-Darboux kernel K_n(w, z) = sum_{j<=n} p_j(w) conj(p_j(z))."""
    if n >= basis.rank:
        raise DegreeOutOfRange(f"degree {n} >= basis rank {basis.rank}")
    pw = basis_values(basis, w, n)
    pz = basis_values(basis, z, n)
    out = np.sum(pw * pz.conj(), axis=1)
    return complex(out[0]) if out.size == 1 else out


def christoffel(basis: OrthonormalBasis, n: int, z) -> ChristoffelValue:
    """Christoffel function Lambda_n(z) = 1 / K_n(z, z).

    Equals the minimum of ||p||^2 over polynomials of degree <= n with
    p(z) = 1; non-increasing in n.
    """
    z = complex(z)
    k = cd_kernel(basis, n, z, z).real
    if k <= 0:
        raise InfiniteChristoffel(f"kernel vanished at {z}")
    return ChristoffelValue(degree=n, point=z, lam=1.0 / k)


def christoffel_sequence(basis: OrthonormalBasis, z, nmax: int) -> np.ndarray:
    """Lambda_n(z) for n = 0..nmax (non-increasing sequence)."""
    if nmax >= basis.rank:
        raise DegreeOutOfRange(f"degree {nmax} >= basis rank {basis.rank}")
    vals = basis_values(basis, z, nmax)[0]
    ks = np.cumsum(np.abs(vals) ** 2)
    if np.any(ks <= 0):
        raise InfiniteChristoffel(f"kernel vanished at {z}")
    return 1.0 / ks


def recurrence_values(H: np.ndarray, mass: float, zs, nmax: int) -> np.ndarray:
    """Evaluate p_0..p_nmax via the multiplication-matrix recurrence.

    Uses z*p_k = sum_{n<=k+1} H[n,k] p_n, which is numerically stable where
    coefficient evaluation is not; needs H of size at least nmax+1 and the
    total mass for p_0 = 1/sqrt(mass).
    """
    H = np.asarray(H)
    if H.shape[0] < nmax + 1 or H.shape[1] < nmax:
        raise DegreeOutOfRange(
            f"matrix of size {H.shape[0]} cannot reach degree {nmax}"
        )
    zs = np.atleast_1d(np.asarray(zs, dtype=complex)).ravel()
    P = np.empty((zs.size, nmax + 1), dtype=complex)
    P[:, 0] = 1.0 / np.sqrt(mass)
    for k in range(nmax):
        sub = H[k + 1, k].real
        if sub <= 0:
            raise DegreeOutOfRange(f"subdiagonal entry {k + 1},{k} is not positive")
        acc = zs * P[:, k]
        acc -= P[:, : k + 1] @ H[: k + 1, k]
        P[:, k + 1] = acc / sub
    return P
