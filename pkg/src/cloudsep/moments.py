"""Power moments s_{kl} = integral of z^k conj(z)^l against a measure.

Closed forms for disks, ellipses and atoms; a Stokes boundary reduction for
polygons.  All routines can run in double precision or, for the severely
ill-conditioned higher-degree moment matrices, in software extended precision
via mpmath (pass ``dps``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from math import comb

import numpy as np
from mpmath import mp

from .errors import EmptyMeasure
from .measures import Disk, Ellipse, MeasureSpec, Polygon, SampleCloud

__all__ = ["ComplexMoments", "moments_of_spec", "moments_of_samples"]


@dataclass
class ComplexMoments:
    """Hermitian matrix of power moments of a planar measure.

    Attributes
    ----------
    degree : int
        Maximal exponent; entries index 0..degree in each variable.
    entries : ndarray
        Complex matrix with ``entries[k, l] = s_{kl}``.
    mp_entries : list of list of mpmath.mpc, optional
        The same values at extended precision, kept when the moments were
        computed with ``dps`` set.
    dps : int, optional
        Decimal precision used for ``mp_entries``.
    """

    degree: int
    entries: np.ndarray
    mp_entries: list | None = None
    dps: int | None = None

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        n = self.degree + 1
        if self.entries.shape != (n, n):
            raise ValueError(
                f"entries shape {self.entries.shape} does not match degree {self.degree}"
            )

    @property
    def total_mass(self) -> float:
        return float(self.entries[0, 0].real)

    @property
    def gram(self) -> np.ndarray:
        """Monomial Gram matrix G with G[j][k] = s[k][j]."""
        return self.entries.T.copy()

    def hermitian_defect(self) -> float:
        return float(np.abs(self.entries - self.entries.conj().T).max())

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the (Hermitian part of the) Gram matrix."""
        g = self.gram
        return float(np.linalg.eigvalsh(0.5 * (g + g.conj().T))[0])

    def truncated(self, degree: int) -> "ComplexMoments":
        if degree > self.degree:
            raise ValueError(f"cannot extend degree {self.degree} to {degree}")
        n = degree + 1
        mp_part = None
        if self.mp_entries is not None:
            mp_part = [row[:n] for row in self.mp_entries[:n]]
        return ComplexMoments(degree, self.entries[:n, :n].copy(), mp_part, self.dps)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "entries": [
                [[v.real, v.imag] for v in row] for row in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ComplexMoments":
        try:
            d = int(data["degree"])
            rows = data["entries"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed moments data: {exc}") from exc
        entries = np.array(
            [[complex(float(v[0]), float(v[1])) for v in row] for row in rows],
            dtype=complex,
        )
        return cls(degree=d, entries=entries)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ComplexMoments":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# closed forms
#
# The per-shape routines below run on plain Python loops so that the same code
# serves double precision (complex/float operands) and extended precision
# (mpmath operands).  Degrees are capped well below the point where the loops
# would matter.

def _disk_add(rows, c, r, w, d, pi):
    # s_kl = w * sum_i C(k,i) C(l,i) c^(k-i) conj(c)^(l-i) * pi r^(2i+2)/(i+1)
    cb = (c.conjugate() if hasattr(c, "conjugate") else c.conj())
    cpow = [1 + 0 * c]
    cbpow = [1 + 0 * cb]
    for _ in range(d):
        cpow.append(cpow[-1] * c)
        cbpow.append(cbpow[-1] * cb)
    r2 = r * r
    radial = []
    acc = pi * r2
    for i in range(d + 1):
        radial.append(acc / (i + 1))
        acc = acc * r2
    for k in range(d + 1):
        for l in range(k, d + 1):
            s = 0
            for i in range(min(k, l) + 1):
                s += comb(k, i) * comb(l, i) * cpow[k - i] * cbpow[l - i] * radial[i]
            rows[k][l] += w * s


def _ellipse_disk_table(alpha, beta, d, pi):
    """I[i][j] = integral over the unit disk of (a*z + b*conj(z))^i (a*conj(z) + b*z)^j dA."""
    apow = [alpha * 0 + 1]
    bpow = [beta * 0 + 1]
    for _ in range(2 * d + 1):
        apow.append(apow[-1] * alpha)
        bpow.append(bpow[-1] * beta)
    table = [[0] * (d + 1) for _ in range(d + 1)]
    for i in range(d + 1):
        for j in range(i % 2, d + 1, 2):  # nonzero only when i-j is even
            delta = (i - j) // 2
            mdeg = (i + j) // 2
            s = 0
            for q in range(max(0, -delta), min(j, i - delta) + 1):
                p = q + delta
                s += comb(i, p) * comb(j, q) * apow[p + q] * bpow[i + j - p - q]
            table[i][j] = pi * s / (mdeg + 1)
    return table


def _ellipse_add(rows, shape: Ellipse, d, pi, num):
    c = num(shape.center)
    alpha = (shape.a + shape.b) / 2
    beta = (shape.a - shape.b) / 2
    jac = shape.a * shape.b  # area Jacobian of the affine disk map
    phase = num(complex(math.cos(shape.angle), math.sin(shape.angle)))
    if pi is not math.pi:
        phase = mp.expjpi(mp.mpf(shape.angle) / mp.pi)
    table = _ellipse_disk_table(num(alpha), num(beta), d, pi)
    cb = c.conjugate()
    cpow = [1 + 0 * c]
    cbpow = [1 + 0 * cb]
    php = [1 + 0 * phase]
    phm = [1 + 0 * phase]
    for t in range(d):
        cpow.append(cpow[-1] * c)
        cbpow.append(cbpow[-1] * cb)
        php.append(php[-1] * phase)
        phm.append(phm[-1] * phase.conjugate())
    for k in range(d + 1):
        for l in range(k, d + 1):
            s = 0
            for i in range(k + 1):
                for j in range(l + 1):
                    if table[i][j] == 0:
                        continue
                    ph = php[i - j] if i >= j else phm[j - i]
                    s += (
                        comb(k, i)
                        * comb(l, j)
                        * cpow[k - i]
                        * cbpow[l - j]
                        * ph
                        * table[i][j]
                    )
            rows[k][l] += shape.weight * jac * s


def _polygon_add_double(rows, shape: Polygon, d):
    # Stokes: s_kl = (1/(2i(l+1))) * contour integral of z^k conj(z)^(l+1) dz,
    # Gauss-Legendre per edge, exact for the polynomial integrand.
    from scipy.special import roots_legendre

    t, wq = roots_legendre(d + 2)
    t = 0.5 * (t + 1.0)
    wq = 0.5 * wq
    verts = list(shape.vertices)
    n = len(verts)
    acc = np.zeros((d + 1, d + 1), dtype=complex)
    for i in range(n):
        z0, z1 = verts[i], verts[(i + 1) % n]
        dz = z1 - z0
        zt = z0 + t * dz
        zp = np.vander(zt, d + 1, increasing=True).T  # zp[k] = zt^k
        zbp = np.vander(np.conj(zt), d + 2, increasing=True).T
        acc += np.einsum("q,kq,lq->kl", wq * dz, zp, zbp[1:])
    for l in range(d + 1):
        acc[:, l] /= 2j * (l + 1)
    for k in range(d + 1):
        for l in range(k, d + 1):
            rows[k][l] += shape.weight * acc[k, l]


def _polygon_add_mp(rows, shape: Polygon, d):
    # Same Stokes reduction with the line integrals expanded in binomials:
    # int_0^1 (z0+t dz)^k (conj)^(l+1) dt, exact in extended precision.
    verts = [mp.mpc(v) for v in shape.vertices]
    n = len(verts)
    w = mp.mpf(shape.weight)
    for i in range(n):
        z0, z1 = verts[i], verts[(i + 1) % n]
        dz = z1 - z0
        z0b, dzb = z0.conjugate(), dz.conjugate()
        z0p = [mp.mpc(1)]
        dzp = [mp.mpc(1)]
        z0bp = [mp.mpc(1)]
        dzbp = [mp.mpc(1)]
        for _ in range(d + 1):
            z0p.append(z0p[-1] * z0)
            dzp.append(dzp[-1] * dz)
            z0bp.append(z0bp[-1] * z0b)
            dzbp.append(dzbp[-1] * dzb)
        for k in range(d + 1):
            for l in range(d + 1):
                if l < k:
                    continue
                s = mp.mpc(0)
                for p in range(k + 1):
                    cp = comb(k, p) * z0p[k - p] * dzp[p]
                    for q in range(l + 2):
                        s += (
                            cp
                            * comb(l + 1, q)
                            * z0bp[l + 1 - q]
                            * dzbp[q]
                            / (p + q + 1)
                        )
                rows[k][l] += w * dz * s / (2j * (l + 1))


def _atom_add(rows, z, m, d):
    zb = z.conjugate()
    zp = [1 + 0 * z]
    zbp = [1 + 0 * zb]
    for _ in range(d):
        zp.append(zp[-1] * z)
        zbp.append(zbp[-1] * zb)
    for k in range(d + 1):
        for l in range(k, d + 1):
            rows[k][l] += m * zp[k] * zbp[l]


def moments_of_spec(
    spec: MeasureSpec, degree: int, dps: int | None = None
) -> ComplexMoments:
    """Exact power moments of a measure spec up to a given degree.

    Parameters
    ----------
    spec : MeasureSpec
    degree : int
        Largest exponent; the result holds s_{kl} for k, l <= degree.
    dps : int, optional
        When set, compute at this many decimal digits (mpmath) and keep the
        extended-precision entries alongside the double-precision cast.

    Returns
    -------
    ComplexMoments
        Entries are additive over components and exactly Hermitian.
    """
    if degree < 0:
        raise ValueError(f"degree must be non-negative, got {degree}")
    spec.validate()
    if dps is not None:
        with mp.workdps(dps):
            rows = [[mp.mpc(0)] * (degree + 1) for _ in range(degree + 1)]
            for shape in spec.shapes:
                if isinstance(shape, Disk):
                    _disk_add(
                        rows,
                        mp.mpc(shape.center),
                        mp.mpf(shape.radius),
                        mp.mpf(shape.weight),
                        degree,
                        mp.pi,
                    )
                elif isinstance(shape, Ellipse):
                    _ellipse_add(rows, shape, degree, mp.pi, mp.mpc)
                elif isinstance(shape, Polygon):
                    _polygon_add_mp(rows, shape, degree)
            for z, m in spec.atoms:
                _atom_add(rows, mp.mpc(z), mp.mpf(m), degree)
            for k in range(degree + 1):
                for l in range(k):
                    rows[k][l] = rows[l][k].conjugate()
            entries = np.array(
                [[complex(v) for v in row] for row in rows], dtype=complex
            )
            return ComplexMoments(degree, entries, mp_entries=rows, dps=dps)
    rows = [[0j] * (degree + 1) for _ in range(degree + 1)]
    for shape in spec.shapes:
        if isinstance(shape, Disk):
            _disk_add(
                rows, complex(shape.center), shape.radius, shape.weight, degree, math.pi
            )
        elif isinstance(shape, Ellipse):
            _ellipse_add(rows, shape, degree, math.pi, complex)
        elif isinstance(shape, Polygon):
            _polygon_add_double(rows, shape, degree)
    for z, m in spec.atoms:
        _atom_add(rows, complex(z), m, degree)
    for k in range(degree + 1):
        for l in range(k):
            rows[k][l] = rows[l][k].conjugate()
    return ComplexMoments(degree, np.array(rows, dtype=complex))


def moments_of_samples(cloud: SampleCloud, degree: int) -> ComplexMoments:
    """Empirical power moments s_{kl} = sum_i w_i z_i^k conj(z_i)^l."""
    if degree < 0:
        raise ValueError(f"degree must be non-negative, got {degree}")
    cloud.validate()
    if len(cloud) == 0:
        raise EmptyMeasure("sample cloud is empty")
    V = np.vander(cloud.points, degree + 1, increasing=True)
    entries = (V * cloud.weights[:, None]).T @ V.conj()
    entries = 0.5 * (entries + entries.conj().T)  # exact Hermitian symmetry
    return ComplexMoments(degree, entries)
