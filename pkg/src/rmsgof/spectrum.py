"""Variances of the limiting Gaussian restricted to the two constraint hyperplanes.

The pipeline is: constraint matrix ``H`` (ones and the score direction),
an orthonormal basis ``Q`` of its column space from a pivoted Householder
QR, the projected matrix ``B = (I - QQ^T) D (I - QQ^T)`` with
``D = diag(1/p)``, and the eigenvalues of ``B`` by cyclic Jacobi rotations.
The nonzero eigenvalues of ``B`` are the reciprocal variances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProbability, RankDeficientConstraints, SpectrumAnomaly
from .models import AnyModel, InfiniteModel, dlog_probabilities, probabilities, truncate_support

EPS = np.finfo(float).eps
ZERO_THRESHOLD = 1e-8
JACOBI_TOL = 1e-14

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None


@dataclass(frozen=True)
class ConstraintMatrix:
    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class VarianceSpectrum:
    variances: np.ndarray
    zero_count: int
    condition_diag: float
    eigenvalues: np.ndarray  # descending, all n of them
    sweeps: int = 0

    def to_dict(self) -> dict:
        return {
            "variances": [float(v) for v in self.variances],
            "zero_count": int(self.zero_count),
            "condition_diag": float(self.condition_diag),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "sweeps": int(self.sweeps),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VarianceSpectrum":
        return cls(
            variances=np.asarray(d["variances"], dtype=float),
            zero_count=int(d["zero_count"]),
            condition_diag=float(d["condition_diag"]),
            eigenvalues=np.asarray(d["eigenvalues"], dtype=float),
            sweeps=int(d.get("sweeps", 0)),
        )


def build_constraints(model: AnyModel, theta_hat: float) -> ConstraintMatrix:
    d = dlog_probabilities(model, theta_hat)
    h = np.column_stack([np.ones_like(d), d])
    return ConstraintMatrix(h)


def householder_qr(a: np.ndarray):
    """Householder QR with column pivoting: ``a[:, perm] = q @ r``.

    Returns the thin factor ``q`` (m x k), upper-triangular ``r`` (k x k)
    and the column permutation ``perm``.
    """
    a = np.array(a, dtype=float)
    m, k = a.shape
    r = a.copy()
    perm = np.arange(k)
    vs = []
    for j in range(min(m, k)):
        norms = np.einsum("ij,ij->j", r[j:, j:], r[j:, j:])
        piv = j + int(np.argmax(norms))
        if piv != j:
            r[:, [j, piv]] = r[:, [piv, j]]
            perm[[j, piv]] = perm[[piv, j]]
        x = r[j:, j]
        alpha = np.linalg.norm(x)
        v = x.copy()
        if alpha == 0.0:
            vs.append(None)
            continue
        # reflect x onto -sign(x0) * alpha * e1 to avoid cancellation
        v[0] += math.copysign(alpha, x[0]) if x[0] != 0 else alpha
        v /= np.linalg.norm(v)
        r[j:, j:] -= 2.0 * np.outer(v, v @ r[j:, j:])
        r[j + 1 :, j] = 0.0
        vs.append(v)

    q = np.eye(m, k)
    for j in reversed(range(len(vs))):
        v = vs[j]
        if v is not None:
            q[j:, :] -= 2.0 * np.outer(v, v @ q[j:, :])
    return q, np.triu(r[:k, :]), perm


def orthonormal_basis(h: ConstraintMatrix) -> np.ndarray:
    """Orthonormal basis (n x 2) for the column space of the constraint matrix.

    Raises :class:`RankDeficientConstraints` when the second pivot of the
    QR factorization is negligible, i.e. the score direction is parallel
    to the all-ones vector.
    """
    a = h.entries
    n = a.shape[0]
    q, r, _ = householder_qr(a)
    scale = float(np.max(np.linalg.norm(a, axis=0)))
    tol = n * EPS * scale
    if n < 2 or abs(r[1, 1]) <= tol:
        raise RankDeficientConstraints(
            f"constraint matrix has rank < 2 (|R22|={abs(r[1, 1]) if n >= 2 else 0.0:.3g}, "
            f"tol={tol:.3g}); the score vector is constant across bins"
        )
    return q


def build_B(model: AnyModel, theta_hat: float, q: np.ndarray) -> np.ndarray:
    p = probabilities(model, theta_hat)
    if np.any(p <= 0):
        raise DegenerateProbability("zero bin probability makes D infinite")
    d = 1.0 / p
    proj = np.eye(p.size) - q @ q.T
    b = (proj * d[None, :]) @ proj
    return 0.5 * (b + b.T)


def _jacobi_sweeps(a, tol, max_sweeps):
    """Cyclic Jacobi on a symmetric matrix, in place. Returns the sweep count."""
    n = a.shape[0]
    frob = 0.0
    for i in range(n):
        for j in range(n):
            frob += a[i, j] * a[i, j]
    frob = math.sqrt(frob)
    target = tol * frob
    for sweep in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        if math.sqrt(off) <= target:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e153:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
    return -1


if njit is not None:
    _jacobi_sweeps = njit(cache=True, nogil=True)(_jacobi_sweeps)


def jacobi_eigenvalues(b: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = 100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Iterates until the off-diagonal Frobenius norm is at most
    ``tol * ||b||_F``. Returns ``(eigenvalues, sweeps)`` with eigenvalues
    in the diagonal order the rotations leave them.
    """
    a = np.array(b, dtype=np.float64, order="C", copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    sweeps = _jacobi_sweeps(a, float(tol), int(max_sweeps))
    if sweeps < 0:
        raise SpectrumAnomaly(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return np.diag(a).copy(), int(sweeps)


def variance_spectrum(b: np.ndarray) -> VarianceSpectrum:
    """Classify the two null eigenvalues of ``b`` and invert the rest.

    The two eigenvalues smallest in magnitude are the nulls and must lie
    below ``ZERO_THRESHOLD * max|lambda|``. Any further eigenvalue within
    the roundoff floor ``100 * n * eps * max|lambda|`` means the null space
    is larger than two, which is reported as :class:`SpectrumAnomaly`.
    """
    lam, sweeps = jacobi_eigenvalues(b)
    n = lam.size
    top = float(np.max(np.abs(lam))) if n else 0.0
    if n < 3 or top == 0.0:
        raise SpectrumAnomaly(f"B ({n}x{n}, max |lambda| = {top:.3g}) has no positive eigenvalues to invert")
    order = np.argsort(np.abs(lam), kind="stable")
    nulls, rest = lam[order[:2]], lam[order[2:]]
    floor = 100.0 * n * EPS * top
    zero_count = int(np.count_nonzero(np.abs(lam) <= floor))
    if np.any(np.abs(nulls) > ZERO_THRESHOLD * top):
        raise SpectrumAnomaly(
            f"B has fewer than 2 null eigenvalues: smallest |lambda| are "
            f"{abs(nulls[0]):.3g}, {abs(nulls[1]):.3g} against max {top:.3g}"
        )
    if abs(rest[0]) <= floor:
        raise SpectrumAnomaly(
            f"B has more than 2 null eigenvalues ({zero_count} of {n} below {floor:.3g})"
        )
    if np.any(rest <= 0):
        raise SpectrumAnomaly(f"B has a negative eigenvalue {rest.min():.3g}")
    variances = np.sort(1.0 / rest)
    return VarianceSpectrum(
        variances=variances,
        zero_count=2,
        condition_diag=float(rest.max() / rest.min()),
        eigenvalues=np.sort(lam)[::-1].copy(),
        sweeps=sweeps,
    )


def model_spectrum(model: AnyModel, theta_hat: float) -> VarianceSpectrum:
    """Run the whole chain for a model at an estimated parameter value."""
    if isinstance(model, InfiniteModel):
        model = truncate_support(model, theta_hat)
    h = build_constraints(model, theta_hat)
    q = orthonormal_basis(h)
    b = build_B(model, theta_hat, q)
    return variance_spectrum(b)
