"""Eigenvalue perturbation calculus for the largest eigenvalue of a real Hessian.

Everything here works in chart coordinates with the flat metric, so raising
an index is the identity and endomorphisms coincide with symmetric matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEigenvalueError

TIE_TOL = 1e-10
GAP_TOL = 1e-8
JACOBI_TOL = 1e-12
_MAX_SWEEPS = 60


class SymMatrix:
    """Real symmetric matrix of size 2, 3 or 4, stored as its upper triangle."""

    __slots__ = ("n", "_upper")

    def __init__(self, n: int, upper):
        if n not in (2, 3, 4):
            raise ValueError(f"unsupported dimension {n}")
        upper = np.asarray(upper, dtype=np.float64)
        if upper.shape != (n * (n + 1) // 2,):
            raise ValueError("upper triangle has the wrong length")
        if not np.all(np.isfinite(upper)):
            raise ValueError("non-finite matrix entry")
        self.n = n
        self._upper = upper

    @classmethod
    def from_array(cls, a) -> "SymMatrix":
        """Build from a square array, reading only the upper triangle."""
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        return cls(a.shape[0], a[np.triu_indices(a.shape[0])])

    @property
    def array(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n)
        out[iu] = self._upper
        out.T[iu] = self._upper
        return out

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
        return SymMatrix(self.n, self._upper - other._upper)

    def __repr__(self):
        return f"SymMatrix({self.array.tolist()})"


def _as_array(S) -> np.ndarray:
    return S.array if isinstance(S, SymMatrix) else np.asarray(S, dtype=np.float64)


@dataclass(frozen=True)
class EigenSystem:
    lambdas: np.ndarray   # descending
    vectors: np.ndarray   # columns, orthonormal

    @property
    def n(self) -> int:
        return len(self.lambdas)

    @property
    def gap(self) -> float:
        return float(self.lambdas[0] - self.lambdas[1])

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.lambdas) @ self.vectors.T


# ---------------------------------------------------------------------------
# batched solvers


def _eigh2(A):
    a, b, d = A[..., 0, 0], A[..., 0, 1], A[..., 1, 1]
    mean = 0.5 * (a + d)
    r = np.hypot(0.5 * (a - d), b)
    theta = 0.5 * np.arctan2(2.0 * b, a - d)
    c, s = np.cos(theta), np.sin(theta)
    lam = np.stack([mean + r, mean - r], axis=-1)
    V = np.empty(A.shape)
    V[..., 0, 0], V[..., 1, 0] = c, s
    V[..., 0, 1], V[..., 1, 1] = -s, c
    return lam, V


def jacobi_eigh(A, tol: float = JACOBI_TOL):
    """Cyclic Jacobi eigensolver for a stack of symmetric matrices ``(..., n, n)``.

    Returns unsorted eigenvalues ``(..., n)`` and eigenvector columns.  Sweeps
    stop once every off-diagonal entry is below ``tol * max(1, |A|_F)``.
    """
    A = np.array(A, dtype=np.float64, copy=True)
    n = A.shape[-1]
    V = np.broadcast_to(np.eye(n), A.shape).copy()
    scale = np.maximum(1.0, np.sqrt(np.sum(A * A, axis=(-2, -1))))
    pairs = [(p, q) for p in range(n - 1) for q in range(p + 1, n)]
    iu = np.triu_indices(n, 1)
    for _ in range(_MAX_SWEEPS):
        off = np.abs(A[..., iu[0], iu[1]]).max(axis=-1) if A.ndim > 2 else np.abs(A[iu]).max()
        if np.all(off <= tol * scale):
            break
        for p, q in pairs:
            apq = A[..., p, q]
            active = np.abs(apq) > 1e-300
            safe = np.where(active, apq, 1.0)
            theta = (A[..., q, q] - A[..., p, p]) / (2.0 * safe)
            with np.errstate(over="ignore", divide="ignore"):
                t = np.where(np.abs(theta) > 1e150, 0.5 / theta,
                             np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0)))
            t = np.where(theta == 0.0, 1.0, t)
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            c_, s_ = c[..., None], s[..., None]
            colp, colq = A[..., :, p].copy(), A[..., :, q].copy()
            A[..., :, p] = c_ * colp - s_ * colq
            A[..., :, q] = s_ * colp + c_ * colq
            rowp, rowq = A[..., p, :].copy(), A[..., q, :].copy()
            A[..., p, :] = c_ * rowp - s_ * rowq
            A[..., q, :] = s_ * rowp + c_ * rowq
            A[..., p, q] = 0.0
            A[..., q, p] = 0.0
            vp, vq = V[..., :, p].copy(), V[..., :, q].copy()
            V[..., :, p] = c_ * vp - s_ * vq
            V[..., :, q] = s_ * vp + c_ * vq
    return np.diagonal(A, axis1=-2, axis2=-1).copy(), V


def eigvalsh_desc(A) -> np.ndarray:
    """Eigenvalues of a stack of symmetric matrices, sorted descending."""
    A = np.asarray(A, dtype=np.float64)
    lam = _eigh2(A)[0] if A.shape[-1] == 2 else jacobi_eigh(A)[0]
    return -np.sort(-lam, axis=-1)


# ---------------------------------------------------------------------------
# single-matrix API


def _canonical_order(lam, V):
    order = np.argsort(-lam, kind="stable")
    lam, V = lam[order], V[:, order]
    for col in range(V.shape[1]):
        v = V[:, col]
        nz = np.flatnonzero(np.abs(v) > 1e-14)
        if nz.size and v[nz[0]] < 0:
            V[:, col] = -v
    # reorder within clusters of (numerically) equal eigenvalues
    start = 0
    n = len(lam)
    while start < n:
        stop = start + 1
        while stop < n and lam[stop - 1] - lam[stop] <= TIE_TOL:
            stop += 1
        if stop - start > 1:
            idx = list(range(start, stop))
            idx.sort(key=lambda c: tuple(-np.abs(V[:, c])))
            # eigenvalues stay sorted; they differ by at most TIE_TOL inside a cluster
            V[:, start:stop] = V[:, idx]
        start = stop
    return lam, V


def eigen_decompose(S) -> EigenSystem:
    """Sorted orthonormal eigensystem of a symmetric matrix (n <= 4).

    Closed form for n = 2, Jacobi rotations otherwise.  Eigenvectors within a
    cluster of eigenvalues closer than 1e-10 are ordered by their absolute
    components (lexicographically largest first), and every eigenvector is
    signed so that its first nonzero component is positive.
    """
    A = _as_array(S)
    if A.shape[0] > 4:
        raise ValueError("eigen_decompose supports n <= 4")
    if not np.all(np.isfinite(A)):
        raise ValueError("non-finite matrix entry")
    A = 0.5 * (A + A.T)
    lam, V = _eigh2(A) if A.shape[0] == 2 else jacobi_eigh(A)
    lam, V = _canonical_order(np.array(lam), np.array(V))
    return EigenSystem(lam, V)


def perturbation_B(v1) -> SymMatrix:
    """``B = I - v1 v1^T``, positive semidefinite with kernel spanned by ``v1``."""
    v1 = np.asarray(v1, dtype=np.float64)
    norm = np.linalg.norm(v1)
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"v1 must be a unit vector (|v1| = {norm!r})")
    return SymMatrix.from_array(np.eye(len(v1)) - np.outer(v1, v1))


def phi_endomorphism(H, B) -> SymMatrix:
    """The perturbed endomorphism ``H - B`` (flat metric, so no index raising)."""
    H = H if isinstance(H, SymMatrix) else SymMatrix.from_array(H)
    B = B if isinstance(B, SymMatrix) else SymMatrix.from_array(B)
    return H - B


def _require_gap(E: EigenSystem):
    if E.n < 2 or E.gap <= GAP_TOL:
        raise DegenerateEigenvalueError(
            f"largest eigenvalue is not simple (gap {E.gap if E.n > 1 else 0:.3e} <= {GAP_TOL})")


def d_lambda1(E: EigenSystem) -> np.ndarray:
    """First derivative of the top eigenvalue w.r.t. the matrix entries: ``V1 V1^T``."""
    _require_gap(E)
    v1 = E.vectors[:, 0]
    return np.outer(v1, v1)


def d2_lambda1(E: EigenSystem, P, Q) -> float:
    """Second derivative of the top eigenvalue contracted with directions ``P`` and ``Q``.

    Implements the sum over mu > 1 of
    ``(v1.P.vmu)(vmu.Q.v1) + (vmu.P.v1)(v1.Q.vmu)`` divided by ``lam1 - lam_mu``.
    """
    _require_gap(E)
    P, Q = _as_array(P), _as_array(Q)
    V = E.vectors
    v1 = V[:, 0]
    total = 0.0
    for mu in range(1, E.n):
        vm = V[:, mu]
        num = (v1 @ P @ vm) * (vm @ Q @ v1) + (vm @ P @ v1) * (v1 @ Q @ vm)
        total += num / (E.lambdas[0] - E.lambdas[mu])
    return float(total)


# ---------------------------------------------------------------------------
# the gradient weight h


@dataclass(frozen=True)
class HFunState:
    s: float
    s_max: float


def h_eval(st: HFunState) -> tuple[float, float, float]:
    """``h(s) = -log(1 + s_max - s) / 2`` with its first two derivatives."""
    if st.s > st.s_max:
        raise ValueError(f"s = {st.s} exceeds s_max = {st.s_max}")
    if st.s < 0:
        raise ValueError(f"s must be nonnegative, got {st.s}")
    u = 1.0 + st.s_max - st.s
    hp = 1.0 / (2.0 * u)
    return -0.5 * np.log(u), hp, 2.0 * hp * hp


def h_values(s: np.ndarray, s_max: float) -> np.ndarray:
    """Vectorized ``h`` for a field of gradient norms."""
    return -0.5 * np.log1p(s_max - np.asarray(s))


# ---------------------------------------------------------------------------
# complex-structure frame around the top eigenvector


def complex_structure(n: int) -> np.ndarray:
    """Matrix of J on real coordinates ordered (x1, y1, x2, y2, ...)."""
    if n % 2:
        raise ValueError("complex structure needs an even dimension")
    J = np.zeros((n, n))
    for q in range(n // 2):
        J[2 * q + 1, 2 * q] = 1.0
        J[2 * q, 2 * q + 1] = -1.0
    return J


@dataclass(frozen=True)
class TopFrame:
    jv1: np.ndarray   # J V1
    nu: np.ndarray    # complex coefficients of W1 = (V1 - i J V1)/sqrt(2) on d/dz^q
    mu: np.ndarray    # J V1 = sum_{alpha > 1} mu_alpha V_alpha


def top_frame(E: EigenSystem) -> TopFrame:
    """Decompose ``J V1`` in the remaining eigenvectors and ``W1`` in ``d/dz^q``.

    Components are Euclidean-normalized, so ``sum(mu**2) == 1`` and
    ``sum(|nu|**2) == 1`` for a unit ``V1``.
    """
    J = complex_structure(E.n)
    v1 = E.vectors[:, 0]
    jv1 = J @ v1
    mu = E.vectors[:, 1:].T @ jv1
    nu = v1[0::2] + 1j * v1[1::2]
    return TopFrame(jv1, nu, mu)


def complex_hessian_from_real(H) -> np.ndarray:
    """``phi_{q rbar}`` from a real Hessian in (x1, y1, x2, y2, ...) coordinates."""
    H = _as_array(H)
    xx = H[0::2, 0::2]
    yy = H[1::2, 1::2]
    xy = H[0::2, 1::2]
    return 0.25 * (xx + yy + 1j * (xy - xy.T))
