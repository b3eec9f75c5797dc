"""Dense complex linear algebra on operator spaces.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Vectorisation is
row-major throughout, so ``vec(A @ X @ B) == kron(A, B.T) @ vec(X)`` and the
Hilbert-Schmidt inner product is ``vdot(vec(X), vec(Y))``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptySpan, NotSelfAdjointSpace

__all__ = [
    "Tolerance",
    "DEFAULT_TOL",
    "resolve_tol",
    "as_matrix",
    "tensor",
    "direct_sum",
    "partial_trace",
    "OperatorSubspace",
    "orthonormalize",
    "subspace_contains",
    "subspace_equal",
    "subspace_subset",
    "subspace_intersect",
    "nullspace",
    "orthonormal_columns",
    "complement_columns",
    "random_hermitian_in",
    "random_unitary",
    "random_isometry",
    "matrix_units",
]


@dataclass(frozen=True)
class Tolerance:
    """Thresholds for every numerical rank and equality decision.

    ``absolute`` bounds residuals, scaled by ``max(1, norm)`` of the object
    being tested. ``relative_rank`` cuts singular values below
    ``relative_rank * sigma_max``.
    """

    absolute: float = 1e-10
    relative_rank: float = 1e-9

    def __post_init__(self):
        if not (self.absolute > 0 and self.relative_rank > 0):
            raise ValueError("tolerances must be positive")

    def close(self, residual: float, scale: float = 1.0) -> bool:
        return residual <= self.absolute * max(1.0, scale)

    def cutoff(self, sigma_max: float) -> float:
        # Floor at ``absolute`` so an all-zero operator has full nullspace.
        return max(self.relative_rank * sigma_max, self.absolute)

    @classmethod
    def from_env(cls, var: str = "VNSPLIT_TOL") -> "Tolerance":
        raw = os.environ.get(var)
        if not raw:
            return cls()
        return cls(absolute=float(raw))


DEFAULT_TOL = Tolerance()


def resolve_tol(tol: Tolerance | None) -> Tolerance:
    return DEFAULT_TOL if tol is None else tol


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {a.shape}")
    return a


def tensor(a, b) -> np.ndarray:
    """Kronecker product with entry ``(i*b.rows + k, j*b.cols + l) = a[i,j] b[k,l]``."""
    return np.kron(as_matrix(a), as_matrix(b))


def direct_sum(*blocks) -> np.ndarray:
    mats = [as_matrix(b) for b in blocks]
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    out = np.zeros((rows, cols), dtype=complex)
    r = c = 0
    for m in mats:
        out[r : r + m.shape[0], c : c + m.shape[1]] = m
        r += m.shape[0]
        c += m.shape[1]
    return out


def partial_trace(m, d_left: int, d_right: int, side: str) -> np.ndarray:
    """Trace out one tensor factor of an operator on ``C^d_left (x) C^d_right``.

    ``side`` names the factor that is removed.
    """
    m = as_matrix(m)
    n = d_left * d_right
    if m.shape != (n, n):
        raise DimensionMismatch(f"operator of shape {m.shape} is not on {d_left}x{d_right}")
    t = m.reshape(d_left, d_right, d_left, d_right)
    side = str(getattr(side, "value", side))
    if side == "right":
        return np.einsum("arbr->ab", t)
    if side == "left":
        return np.einsum("lalb->ab", t)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def _svd_rank(s: np.ndarray, tol: Tolerance) -> int:
    if s.size == 0:
        return 0
    return int(np.sum(s > tol.cutoff(s[0])))


class OperatorSubspace:
    """A linear subspace of ``L(C^n)`` with a Hilbert-Schmidt orthonormal basis.

    ``basis`` has shape ``(k, n, n)``. Construct through :func:`orthonormalize`
    unless the basis is already known to be orthonormal.
    """

    __slots__ = ("dim_space", "basis")

    def __init__(self, dim_space: int, basis):
        basis = np.asarray(basis, dtype=complex).reshape(-1, dim_space, dim_space)
        self.dim_space = int(dim_space)
        self.basis = basis

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"OperatorSubspace(dim_space={self.dim_space}, dim={self.dim})"

    @property
    def frame(self) -> np.ndarray:
        """Basis as columns of an ``(n*n, k)`` matrix."""
        return self.basis.reshape(self.dim, -1).T

    def coordinates(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=complex).reshape(-1)
        return self.frame.conj().T @ v

    def project(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        return (self.frame @ self.coordinates(v)).reshape(self.dim_space, self.dim_space)

    def residual(self, v) -> float:
        v = np.asarray(v, dtype=complex)
        return float(np.linalg.norm(v - self.project(v)))

    def contains(self, v, tol: Tolerance | None = None) -> bool:
        return subspace_contains(self, v, tol)

    def is_self_adjoint(self, tol: Tolerance | None = None) -> bool:
        return all(self.contains(b.conj().T, tol) for b in self.basis)

    def random_element(self, rng) -> np.ndarray:
        c = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        return np.tensordot(c, self.basis, axes=1)


def _stack(vectors, dim_space: int) -> np.ndarray:
    mats = [np.asarray(v, dtype=complex) for v in vectors]
    for m in mats:
        if m.shape != (dim_space, dim_space):
            raise DimensionMismatch(f"expected {dim_space}x{dim_space}, got {m.shape}")
    if not mats:
        return np.zeros((dim_space * dim_space, 0), dtype=complex)
    return np.stack([m.reshape(-1) for m in mats], axis=1)


def orthonormalize(vectors, dim_space: int, tol: Tolerance | None = None) -> OperatorSubspace:
    """Orthonormal basis of the span of ``vectors`` via a rank-truncated SVD.

    Raises :class:`EmptySpan` when the numerical span is ``{0}``.
    """
    tol = resolve_tol(tol)
    cols = _stack(vectors, dim_space)
    if cols.shape[1] == 0:
        raise EmptySpan("no vectors given")
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    r = _svd_rank(s, tol)
    if r == 0:
        raise EmptySpan("all vectors are numerically zero")
    return OperatorSubspace(dim_space, u[:, :r].T.reshape(r, dim_space, dim_space))


def subspace_contains(s: OperatorSubspace, v, tol: Tolerance | None = None) -> bool:
    tol = resolve_tol(tol)
    v = np.asarray(v, dtype=complex)
    return tol.close(s.residual(v), float(np.linalg.norm(v)))


def subspace_subset(s1: OperatorSubspace, s2: OperatorSubspace, tol: Tolerance | None = None) -> bool:
    if s1.dim_space != s2.dim_space:
        raise DimensionMismatch("subspaces live in different operator spaces")
    return all(subspace_contains(s2, b, tol) for b in s1.basis)


def subspace_equal(s1: OperatorSubspace, s2: OperatorSubspace, tol: Tolerance | None = None) -> bool:
    return s1.dim == s2.dim and subspace_subset(s1, s2, tol) and subspace_subset(s2, s1, tol)


def nullspace(m, tol: Tolerance | None = None) -> np.ndarray:
    """Orthonormal columns spanning the numerical kernel of ``m``."""
    tol = resolve_tol(tol)
    m = np.asarray(m, dtype=complex)
    n = m.shape[1]
    if m.shape[0] == 0:
        return np.eye(n, dtype=complex)
    if m.shape[0] > n:
        # same row space, far cheaper SVD for tall inputs
        m = np.linalg.qr(m, mode="r")
    _, s, vh = np.linalg.svd(m, full_matrices=True)
    r = int(np.sum(s > tol.cutoff(s[0]))) if s.size else 0
    return vh[r:].conj().T


def subspace_intersect(s1: OperatorSubspace, s2: OperatorSubspace, tol: Tolerance | None = None) -> OperatorSubspace:
    """Intersection, computed as the kernel of ``(1 - P2)`` restricted to ``s1``.

    May return a zero-dimensional subspace.
    """
    if s1.dim_space != s2.dim_space:
        raise DimensionMismatch("subspaces live in different operator spaces")
    f1, f2 = s1.frame, s2.frame
    leak = f1 - f2 @ (f2.conj().T @ f1)
    coords = nullspace(leak, tol)
    vecs = f1 @ coords
    # Re-orthonormalise to wash out the component outside s2.
    if vecs.shape[1]:
        q, _ = np.linalg.qr(vecs)
        vecs = q
    return OperatorSubspace(s1.dim_space, vecs.T.reshape(-1, s1.dim_space, s1.dim_space))


def orthonormal_columns(m, tol: Tolerance | None = None) -> np.ndarray:
    """Orthonormal basis of the column space of ``m``."""
    tol = resolve_tol(tol)
    m = np.asarray(m, dtype=complex)
    if m.shape[1] == 0:
        return m.copy()
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    return u[:, : _svd_rank(s, tol)]


def complement_columns(q, dim: int | None = None, tol: Tolerance | None = None) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the columns of ``q``."""
    q = np.asarray(q, dtype=complex)
    if dim is None:
        dim = q.shape[0]
    if q.shape[1] == 0:
        return np.eye(dim, dtype=complex)
    return nullspace(q.conj().T, tol)


def random_hermitian_in(s: OperatorSubspace, seed=None, tol: Tolerance | None = None) -> np.ndarray:
    """Random self-adjoint element of an adjoint-closed subspace.

    Uses ``sum_k c_k (B_k + B_k^dag)/2 + d_k (i B_k - i B_k^dag)/2`` with
    standard normal ``c_k, d_k`` drawn from ``numpy.random.default_rng(seed)``.
    """
    if not s.is_self_adjoint(tol):
        raise NotSelfAdjointSpace("subspace is not closed under adjoint")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    c = rng.standard_normal(s.dim)
    d = rng.standard_normal(s.dim)
    b = s.basis
    bd = b.conj().transpose(0, 2, 1)
    herm = (b + bd) / 2
    anti = (1j * b - 1j * bd) / 2
    return np.tensordot(c, herm, axes=1) + np.tensordot(d, anti, axes=1)


def random_unitary(n: int, rng) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_isometry(rows: int, cols: int, rng) -> np.ndarray:
    if cols > rows:
        raise DimensionMismatch("an isometry cannot increase dimension")
    return random_unitary(rows, rng)[:, :cols]


def matrix_units(n: int, m: int | None = None):
    """Yield ``(i, j, |i><j|)`` over all matrix units of ``n x m`` matrices."""
    m = n if m is None else m
    for i in range(n):
        for j in range(m):
            e = np.zeros((n, m), dtype=complex)
            e[i, j] = 1.0
            yield i, j, e
