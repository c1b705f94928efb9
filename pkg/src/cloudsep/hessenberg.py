"""Hessenberg matrix of the shift operator in the orthonormal basis.

Two construction routes: from moments and a precomputed basis (exact but
ill-conditioned at high degree), or directly from a weighted sample cloud by
an orthogonalization recurrence with one re-orthogonalization pass (stable,
used for large truncation sizes on exactly discretized shapes).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from mpmath import mp

from .errors import DegreeOutOfRange, RankDeficient
from .measures import SampleCloud
from .moments import ComplexMoments
from .orthopoly import OrthonormalBasis

__all__ = ["HessenbergMatrix", "build_hessenberg", "arnoldi_hessenberg", "perturb"]


@dataclass
class HessenbergMatrix:
    """Square truncation of the shift operator's matrix.

    Attributes
    ----------
    size : int
        Truncation size N; entries index 0..N-1.
    entries : ndarray
        h[n][k] = inner product of z*p_k with p_n; upper Hessenberg with a
        positive subdiagonal for unperturbed matrices.
    source_degree : int
        Degree of the moment data (or recurrence depth) that produced it.
    mass : float
        Total mass of the underlying measure; needed to evaluate p_0.
    complete : bool
        True when the matrix is the whole operator (finite-rank measure), so
        there is no truncation tail at all.
    perturbations : list
        Records of perturbations applied via :func:`perturb`, for replay.
    """

    size: int
    entries: np.ndarray
    source_degree: int
    mass: float
    complete: bool = False
    perturbations: list = field(default_factory=list)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        if self.entries.shape != (self.size, self.size):
            raise ValueError(
                f"entries shape {self.entries.shape} does not match size {self.size}"
            )

    def structural_defect(self) -> float:
        """Largest |h[n][k]| over the structurally zero region n > k+1."""
        mask = np.tril(np.ones((self.size, self.size), dtype=bool), k=-2)
        return float(np.abs(self.entries[mask]).max()) if mask.any() else 0.0

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "source_degree": self.source_degree,
            "mass": self.mass,
            "complete": self.complete,
            "entries": [
                [v.real, v.imag] for v in self.entries.ravel()
            ],
            "perturbations": self.perturbations,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HessenbergMatrix":
        size = int(data["size"])
        flat = np.array(
            [complex(float(re), float(im)) for re, im in data["entries"]],
            dtype=complex,
        )
        if flat.size != size * size:
            raise ValueError("entry count does not match size")
        return cls(
            size=size,
            entries=flat.reshape(size, size),
            source_degree=int(data.get("source_degree", size)),
            mass=float(data.get("mass", 1.0)),
            complete=bool(data.get("complete", False)),
            perturbations=list(data.get("perturbations", [])),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "HessenbergMatrix":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def build_hessenberg(
    m: ComplexMoments, basis: OrthonormalBasis, N: int
) -> HessenbergMatrix:
    """Moment-route Hessenberg matrix h[n][k] = <z p_k, p_n>.

    Parameters
    ----------
    m : ComplexMoments
        Must reach degree >= N (entries s_{i+1,j} with i, j < N are used).
    basis : OrthonormalBasis
        From :func:`orthonormalize` on the same moments.
    N : int
        Truncation size.  When the basis rank r is below N the measure is
        finite rank; the full r x r operator is returned with
        ``complete=True``.

    Notes
    -----
    With C the coefficient matrix and S+ the up-shifted moment block
    S+[i][j] = s_{i+1,j}, the matrix is (C S+ C^H)^T.  Structural zeros are
    enforced exactly on the output; the subdiagonal is checked positive.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    complete = False
    if basis.rank < N + 1:
        N = basis.rank
        complete = True
    if m.degree < N:
        raise DegreeOutOfRange(
            f"moments reach degree {m.degree}, need {N} for size-{N} matrix"
        )
    if basis.mp_coeffs is not None:
        H = _build_mp(m, basis, N)
    else:
        C = basis.coeffs[:N, :N]
        Sup = m.entries[1 : N + 1, :N]  # Sup[i][j] = s_{i+1, j}
        H = (C @ Sup @ C.conj().T).T
    H = np.asarray(H, dtype=complex)
    # structural zeros below the first subdiagonal are exact
    for k in range(N):
        H[k + 2 :, k] = 0.0
    for k in range(N - 1):
        sub = H[k + 1, k]
        if sub.real <= 0 or abs(sub.imag) > 1e-8 * max(1.0, abs(sub)):
            raise DegreeOutOfRange(
                f"subdiagonal entry {k + 1},{k} not positive; basis rank too small"
            )
        H[k + 1, k] = sub.real
    return HessenbergMatrix(
        size=N,
        entries=H,
        source_degree=m.degree,
        mass=m.total_mass,
        complete=complete,
    )


def _build_mp(m: ComplexMoments, basis: OrthonormalBasis, N: int) -> np.ndarray:
    with mp.workdps(basis.dps):
        if m.mp_entries is not None:
            S = m.mp_entries
        else:
            S = [
                [mp.mpc(m.entries[i, j]) for j in range(m.degree + 1)]
                for i in range(m.degree + 1)
            ]
        C = basis.mp_coeffs
        H = np.zeros((N, N), dtype=complex)
        for k in range(N):
            for n in range(min(k + 1, N - 1) + 1):
                acc = mp.mpc(0)
                for i in range(k + 1):
                    ci = C[k][i]
                    row = S[i + 1]
                    for j in range(n + 1):
                        acc += ci * row[j] * C[n][j].conjugate()
                H[n, k] = complex(acc)
    return H


def arnoldi_hessenberg(
    cloud: SampleCloud,
    n: int,
    rank_tol: float = 1e-8,
    allow_finite_rank: bool = False,
) -> HessenbergMatrix:
    """Hessenberg matrix from weighted samples by iterative orthogonalization.

    Classical Gram-Schmidt with one re-orthogonalization pass on the vectors
    sqrt(w_i) p(z_i); all inner products equal the measure's own, so on an
    exactness-matched quadrature cloud this reproduces the continuous
    operator's truncation at machine precision while avoiding the moment
    matrix's conditioning entirely.

    Parameters
    ----------
    cloud : SampleCloud
    n : int
        Truncation size; needs more than n distinct sample locations unless
        ``allow_finite_rank`` is set.
    rank_tol : float
        Relative residual threshold declaring the next basis vector
        numerically dependent.
    allow_finite_rank : bool
        When True, a rank stop returns the full finite operator
        (``complete=True``) instead of raising :class:`RankDeficient`.
    """
    cloud.validate()
    if n < 1:
        raise ValueError("n must be at least 1")
    z = cloud.points
    sw = np.sqrt(cloud.weights)
    mass = float(cloud.weights.sum())
    M = z.size
    Q = np.zeros((M, n), dtype=complex, order="F")
    H = np.zeros((n, n), dtype=complex)
    Q[:, 0] = sw / np.sqrt(mass)
    size = n
    complete = False
    for k in range(n):
        v = z * Q[:, k]
        nrm0 = np.linalg.norm(v)
        c1 = Q[:, : k + 1].conj().T @ v
        v = v - Q[:, : k + 1] @ c1
        c2 = Q[:, : k + 1].conj().T @ v
        v = v - Q[:, : k + 1] @ c2
        H[: k + 1, k] = c1 + c2
        r = np.linalg.norm(v)
        if r <= rank_tol * max(nrm0, 1e-300):
            size = k + 1
            complete = True
            break
        if k + 1 < n:
            H[k + 1, k] = r
            Q[:, k + 1] = v / r
    if complete and not allow_finite_rank:
        raise RankDeficient(size, f"sample cloud supports only rank {size}")
    H = H[:size, :size]
    return HessenbergMatrix(
        size=size,
        entries=H,
        source_degree=n,
        mass=mass,
        complete=complete,
    )


def perturb(
    H: HessenbergMatrix,
    entries: list | None = None,
    eps: float | None = None,
    seed: int = 0,
) -> HessenbergMatrix:
    """Additive perturbation H + E, recorded for replay.

    Exactly one of the two modes applies:

    - ``entries``: finite-rank bump given as (row, col, delta) triples.
    - ``eps``: dense random E, complex Gaussian, rescaled so its Frobenius
      norm equals eps exactly; ``seed`` fixes the draw.

    The structural-zero pattern is intentionally not enforced on the result;
    perturbed matrices may be full.
    """
    if (entries is None) == (eps is None):
        raise ValueError("specify exactly one of entries or eps")
    new = H.entries.copy()
    if entries is not None:
        record = {"kind": "finite_rank", "entries": []}
        for row, col, delta in entries:
            if not (0 <= row < H.size and 0 <= col < H.size):
                raise ValueError(f"bump position ({row},{col}) outside matrix")
            delta = complex(delta)
            new[row, col] += delta
            record["entries"].append([int(row), int(col), [delta.real, delta.imag]])
    else:
        rng = np.random.default_rng(seed)
        E = rng.standard_normal((H.size, H.size)) + 1j * rng.standard_normal(
            (H.size, H.size)
        )
        E *= eps / np.linalg.norm(E)
        new = new + E
        record = {"kind": "scaled_random", "eps": float(eps), "seed": int(seed)}
    return HessenbergMatrix(
        size=H.size,
        entries=new,
        source_degree=H.source_degree,
        mass=H.mass,
        complete=H.complete,
        perturbations=H.perturbations + [record],
    )
