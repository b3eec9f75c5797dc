"""Finite-dimensional von Neumann algebras and their block structure.

An algebra is stored as an :class:`~vnsplit.linops.OperatorSubspace` that
contains the identity and is closed under products and adjoints. The
structure theorem is realised constructively: a maximal family of minimal
projectors is refined out of random self-adjoint elements, grouped into
equivalence classes, and the classes are glued by partial isometries into a
unitary ``U`` with ``U A U^dag = (+)_i L(C^{d_left_i}) (x) 1_{d_right_i}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    AlgebraMismatch,
    DegenerateSampling,
    DimensionMismatch,
    NoConnector,
    NotCommutative,
    NotHomomorphism,
    RefinementStall,
)
from .linops import (
    OperatorSubspace,
    Tolerance,
    as_matrix,
    direct_sum,
    nullspace,
    orthonormalize,
    partial_trace,
    random_hermitian_in,
    resolve_tol,
    subspace_contains,
    subspace_intersect,
)

__all__ = [
    "VnAlgebra",
    "AtomicProjectorFamily",
    "MinimalProjectorFamily",
    "AWBlock",
    "AWDecomposition",
    "generate_algebra",
    "full_algebra",
    "scalar_algebra",
    "commutant",
    "center",
    "atomic_projectors",
    "minimal_projector_family",
    "aw_decomposition",
    "trace_over_algebra",
    "homomorphism_support",
    "cluster_eigenvalues",
    "leading_index",
]

# Eigenvalues closer than this (relative to the spectral radius, floored at 1)
# are treated as one cluster.
CLUSTER_GAP = 1e-7
SAMPLING_RETRIES = 3


class VnAlgebra:
    """A unital *-subalgebra of ``L(C^n)`` given by an orthonormal basis."""

    __slots__ = ("space",)

    def __init__(self, space: OperatorSubspace):
        self.space = space

    @classmethod
    def from_basis(cls, basis, dim_space: int, tol: Tolerance | None = None) -> "VnAlgebra":
        return cls(orthonormalize(list(basis), dim_space, tol))

    @property
    def dim_space(self) -> int:
        return self.space.dim_space

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def basis(self) -> np.ndarray:
        return self.space.basis

    def __len__(self):
        return self.dim

    def __repr__(self):
        return f"VnAlgebra(dim_space={self.dim_space}, dim={self.dim})"

    def contains(self, x, tol: Tolerance | None = None) -> bool:
        return subspace_contains(self.space, x, tol)

    def is_closed(self, tol: Tolerance | None = None) -> bool:
        """Check unit, adjoint and product closure."""
        if not self.contains(np.eye(self.dim_space), tol):
            return False
        if not self.space.is_self_adjoint(tol):
            return False
        prods = np.einsum("iab,jbc->ijac", self.basis, self.basis)
        return all(self.contains(p, tol) for p in prods.reshape(-1, self.dim_space, self.dim_space))

    def compress(self, p, tol: Tolerance | None = None) -> OperatorSubspace:
        """The corner ``p A p`` for a projector ``p`` in the algebra."""
        return orthonormalize(list(p @ self.basis @ p), self.dim_space, tol)


@dataclass(frozen=True)
class AtomicProjectorFamily:
    """Minimal central projectors, ordered by leading index."""

    projectors: tuple

    def __len__(self):
        return len(self.projectors)

    def __iter__(self):
        return iter(self.projectors)

    def __getitem__(self, i):
        return self.projectors[i]


@dataclass(frozen=True)
class MinimalProjectorFamily:
    """A maximal family of mutually orthogonal minimal projectors.

    ``class_of[i]`` labels the equivalence class of ``projectors[i]``; two
    projectors share a class exactly when ``P_i A P_j`` is nonzero.
    """

    projectors: tuple
    class_of: tuple

    def __len__(self):
        return len(self.projectors)

    def classes(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for i, c in enumerate(self.class_of):
            out.setdefault(c, []).append(i)
        return [out[c] for c in sorted(out)]


@dataclass(frozen=True)
class AWBlock:
    """One block ``L(C^d_left) (x) 1_{d_right}``.

    ``projectors[0]`` is the reference projector, ``frame`` an orthonormal
    basis of its range, and ``connectors[p]`` a partial isometry in the algebra
    from the range of ``projectors[p]`` onto the range of the reference.
    """

    d_left: int
    d_right: int
    projectors: tuple = field(repr=False)
    frame: np.ndarray = field(repr=False)
    connectors: tuple = field(repr=False)

    @property
    def size(self) -> int:
        return self.d_left * self.d_right

    @property
    def atom(self) -> np.ndarray:
        return sum(self.projectors)


@dataclass(frozen=True)
class AWDecomposition:
    blocks: tuple
    unitary: np.ndarray = field(repr=False)
    atomic: AtomicProjectorFamily = field(repr=False)

    @property
    def shape(self) -> list[tuple[int, int]]:
        return [(b.d_left, b.d_right) for b in self.blocks]

    @property
    def offsets(self) -> list[int]:
        return list(np.cumsum([0] + [b.size for b in self.blocks])[:-1])

    @property
    def left_offsets(self) -> list[int]:
        return list(np.cumsum([0] + [b.d_left for b in self.blocks])[:-1])

    @property
    def right_offsets(self) -> list[int]:
        return list(np.cumsum([0] + [b.d_right for b in self.blocks])[:-1])

    @property
    def d_left(self) -> int:
        return sum(b.d_left for b in self.blocks)

    @property
    def d_right(self) -> int:
        return sum(b.d_right for b in self.blocks)

    def block_rows(self, i: int) -> slice:
        o = self.offsets[i]
        return slice(o, o + self.blocks[i].size)

    def embedding(self) -> np.ndarray:
        """Isometry ``(+)_i C^{l_i} (x) C^{r_i} -> (+C^{l_i}) (x) (+C^{r_i})``."""
        dl, dr = self.d_left, self.d_right
        e = np.zeros((dl * dr, sum(b.size for b in self.blocks)), dtype=complex)
        col = 0
        for b, lo, ro in zip(self.blocks, self.left_offsets, self.right_offsets):
            for l in range(b.d_left):
                for r in range(b.d_right):
                    e[(lo + l) * dr + ro + r, col] = 1.0
                    col += 1
        return e


def _check_square(m, n):
    m = as_matrix(m)
    if m.shape != (n, n):
        raise DimensionMismatch(f"expected {n}x{n}, got {m.shape}")
    return m


def generate_algebra(generators, dim: int, tol: Tolerance | None = None) -> VnAlgebra:
    """Smallest unital *-algebra containing ``generators``.

    The span of ``{1} U G U G^dag`` is multiplied by the generators until its
    dimension stops growing (at most ``dim**2`` passes).
    """
    tol = resolve_tol(tol)
    gens = [_check_square(g, dim) for g in generators]
    letters = gens + [g.conj().T for g in gens]
    span = orthonormalize([np.eye(dim)] + letters, dim, tol)
    if not letters:
        return VnAlgebra(span)
    stack = np.stack(letters)
    for _ in range(dim * dim):
        prods = np.einsum("kij,gjl->kgil", span.basis, stack).reshape(-1, dim, dim)
        grown = orthonormalize(list(span.basis) + list(prods), dim, tol)
        if grown.dim == span.dim:
            break
        span = grown
    return VnAlgebra(span)


def full_algebra(n: int) -> VnAlgebra:
    return VnAlgebra(OperatorSubspace(n, np.eye(n * n).reshape(n * n, n, n)))


def scalar_algebra(n: int) -> VnAlgebra:
    return VnAlgebra(OperatorSubspace(n, (np.eye(n) / np.sqrt(n))[None]))


def commutant(a: VnAlgebra, tol: Tolerance | None = None, chunk: int = 8) -> VnAlgebra:
    """All operators commuting with every basis element of ``a``.

    The kernel of ``X -> [B_k, X]`` is narrowed one chunk of basis elements
    at a time, which keeps every SVD small.
    """
    tol = resolve_tol(tol)
    n = a.dim_space
    eye = np.eye(n)
    q = np.eye(n * n, dtype=complex)
    for start in range(0, a.dim, chunk):
        ops = [np.kron(b, eye) - np.kron(eye, b.T) for b in a.basis[start : start + chunk]]
        q = q @ nullspace(np.vstack([op @ q for op in ops]), tol)
    return VnAlgebra(OperatorSubspace(n, q.T.reshape(-1, n, n)))


def center(a: VnAlgebra, tol: Tolerance | None = None) -> VnAlgebra:
    return VnAlgebra(subspace_intersect(a.space, commutant(a, tol).space, tol))


def cluster_eigenvalues(w) -> list[np.ndarray]:
    """Group ascending eigenvalues into index clusters separated by the gap."""
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        return []
    gap = CLUSTER_GAP * max(1.0, float(np.max(np.abs(w))))
    breaks = np.nonzero(np.diff(w) >= gap)[0] + 1
    return np.split(np.arange(w.size), breaks)


def leading_index(p, threshold: float = 1e-6) -> int:
    """First basis index on which the projector ``p`` has weight."""
    d = np.real(np.diag(p))
    hits = np.nonzero(d > threshold)[0]
    return int(hits[0]) if hits.size else len(d)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _is_commutative(space: OperatorSubspace, tol: Tolerance) -> bool:
    b = space.basis
    comm = np.einsum("iab,jbc->ijac", b, b) - np.einsum("jab,ibc->ijac", b, b)
    return tol.close(float(np.max(np.linalg.norm(comm, axis=(2, 3)), initial=0.0)))


def atomic_projectors(z: VnAlgebra, seed=0, tol: Tolerance | None = None) -> AtomicProjectorFamily:
    """Minimal projectors of a commutative algebra (typically a center).

    Spectral projectors of a random self-adjoint element; resampled up to
    three times if the clusters do not span ``z``.
    """
    tol = resolve_tol(tol)
    if not _is_commutative(z.space, tol):
        raise NotCommutative("atomic projectors need a commutative algebra")
    rng = _rng(seed)
    for _ in range(1 + SAMPLING_RETRIES):
        x = random_hermitian_in(z.space, rng, tol)
        w, v = np.linalg.eigh(x)
        projs = [v[:, c] @ v[:, c].conj().T for c in cluster_eigenvalues(w)]
        if len(projs) == z.dim and all(z.contains(p, tol) for p in projs):
            projs.sort(key=leading_index)
            return AtomicProjectorFamily(tuple(projs))
    raise DegenerateSampling("random element did not separate the atoms")


def _range_frame(p) -> np.ndarray:
    w, v = np.linalg.eigh(p)
    return v[:, w > 0.5]


def _split_projector(space: OperatorSubspace, p, rng, tol: Tolerance):
    """Split ``p`` into spectral projectors of a self-adjoint element of ``pAp``.

    Returns ``None`` when ``p`` is already minimal.
    """
    corner = orthonormalize(list(p @ space.basis @ p), space.dim_space, tol)
    if corner.dim == 1:
        return None
    frame = _range_frame(p)
    for _ in range(1 + SAMPLING_RETRIES):
        h = random_hermitian_in(corner, rng, tol)
        h = h - (np.trace(p @ h) / np.trace(p)) * p
        w, v = np.linalg.eigh(frame.conj().T @ h @ frame)
        clusters = cluster_eigenvalues(w)
        if len(clusters) < 2:
            continue
        parts = []
        for c in clusters:
            u = frame @ v[:, c]
            parts.append(u @ u.conj().T)
        if all(subspace_contains(space, q, tol) for q in parts):
            return parts
    raise RefinementStall("could not split a non-minimal projector")


def refine_projectors(space: OperatorSubspace, start, seed=0, tol: Tolerance | None = None) -> list:
    """Refine the projectors ``start`` into minimal projectors of the algebra."""
    tol = resolve_tol(tol)
    rng = _rng(seed)
    todo = [np.asarray(p, dtype=complex) for p in start]
    done = []
    while todo:
        p = todo.pop()
        parts = _split_projector(space, p, rng, tol)
        if parts is None:
            done.append(p)
        else:
            todo.extend(parts)
    done.sort(key=leading_index)
    return done


def classify_projectors(space: OperatorSubspace, projectors, tol: Tolerance | None = None) -> tuple:
    """Class labels under ``P_i A P_j != 0``, numbered by first appearance."""
    tol = resolve_tol(tol)
    n = len(projectors)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        left = projectors[i] @ space.basis
        for j in range(i + 1, n):
            if find(i) == find(j):
                continue
            if not tol.close(float(np.linalg.norm(left @ projectors[j]))):
                parent[find(j)] = find(i)
    labels: dict[int, int] = {}
    return tuple(labels.setdefault(find(i), len(labels)) for i in range(n))


def minimal_projector_family(a: VnAlgebra, seed=0, tol: Tolerance | None = None) -> MinimalProjectorFamily:
    tol = resolve_tol(tol)
    projs = refine_projectors(a.space, [np.eye(a.dim_space, dtype=complex)], seed, tol)
    return MinimalProjectorFamily(tuple(projs), classify_projectors(a.space, projs, tol))


def _rank(p) -> int:
    return int(round(float(np.real(np.trace(p)))))


def connector(space: OperatorSubspace, target, source, tol: Tolerance | None = None) -> np.ndarray:
    """Partial isometry in the algebra from ``Im source`` onto ``Im target``.

    Polar part of the largest compression ``target B source`` over the basis;
    the corner is one-dimensional, so any nonzero compression would do.
    """
    tol = resolve_tol(tol)
    comps = target @ space.basis @ source
    norms = np.linalg.norm(comps, axis=(1, 2))
    k = int(np.argmax(norms))
    if tol.close(float(norms[k])):
        raise NoConnector("projectors are not equivalent")
    u, s, vh = np.linalg.svd(comps[k])
    r = _rank(target)
    s_iso = u[:, :r] @ vh[:r]
    if not (
        tol.close(float(np.linalg.norm(s_iso @ s_iso.conj().T - target)), 1e2)
        and tol.close(float(np.linalg.norm(s_iso.conj().T @ s_iso - source)), 1e2)
    ):
        raise NoConnector("compression is not a multiple of a partial isometry")
    return s_iso


def pivoted_frame(p) -> np.ndarray:
    """Orthonormal basis of ``Im p`` from a column-pivoted QR."""
    q, _, _ = scipy.linalg.qr(p, pivoting=True)
    return q[:, : _rank(p)]


def assemble_aw(blocks, dim_space: int, tol: Tolerance | None = None) -> AWDecomposition:
    """Build the decomposition from blocks with frames and connectors set."""
    tol = resolve_tol(tol)
    rows = [blk.frame.conj().T @ s for blk in blocks for s in blk.connectors]
    if not rows:
        raise NoConnector("empty block list")
    u = np.vstack(rows)
    if u.shape != (dim_space, dim_space) or not tol.close(
        float(np.linalg.norm(u @ u.conj().T - np.eye(dim_space))), 1e2
    ):
        raise NoConnector("blocks do not assemble into a unitary")
    atoms = AtomicProjectorFamily(tuple(blk.atom for blk in blocks))
    return AWDecomposition(tuple(blocks), u, atoms)


def make_block(space: OperatorSubspace, members, tol: Tolerance | None = None) -> AWBlock:
    """Block for a class of minimal projectors; ``members[0]`` is the reference."""
    rep = members[0]
    conns = [rep] + [connector(space, rep, p, tol) for p in members[1:]]
    return AWBlock(len(members), _rank(rep), tuple(members), pivoted_frame(rep), tuple(conns))


def aw_decomposition(
    a: VnAlgebra, seed=0, tol: Tolerance | None = None, family: MinimalProjectorFamily | None = None
) -> AWDecomposition:
    """Block decomposition of ``a``.

    Blocks are ordered by the leading index of their reference projector,
    and projectors inside a block by their own leading index.
    """
    tol = resolve_tol(tol)
    fam = family if family is not None else minimal_projector_family(a, seed, tol)
    groups = []
    for idx in fam.classes():
        members = sorted((fam.projectors[i] for i in idx), key=leading_index)
        if len({_rank(p) for p in members}) != 1:
            raise NoConnector("projectors in one class have different ranks")
        groups.append(members)
    groups.sort(key=lambda ms: leading_index(ms[0]))
    return assemble_aw([make_block(a.space, ms, tol) for ms in groups], a.dim_space, tol)


def _commutant_form_residual(aw: AWDecomposition, x) -> float:
    """Distance of ``U x U^dag`` from ``(+)_i 1 (x) Y_i``."""
    y = aw.unitary @ x @ aw.unitary.conj().T
    target = np.zeros_like(y)
    for i, blk in enumerate(aw.blocks):
        sl = aw.block_rows(i)
        red = partial_trace(y[sl, sl], blk.d_left, blk.d_right, "left") / blk.d_left
        target[sl, sl] = np.kron(np.eye(blk.d_left), red)
    return float(np.linalg.norm(y - target))


def trace_over_algebra(m, b: VnAlgebra, aw_of_commutant: AWDecomposition, tol: Tolerance | None = None):
    """Trace out ``b``, keeping ``(+)_i L(H_left_i)``.

    ``aw_of_commutant`` must be a decomposition of the commutant of ``b``.
    """
    tol = resolve_tol(tol)
    aw = aw_of_commutant
    m = _check_square(m, aw.unitary.shape[0])
    if b.dim_space != m.shape[0]:
        raise DimensionMismatch("operator and algebra act on different spaces")
    if b.dim != sum(blk.d_right**2 for blk in aw.blocks) or any(
        not tol.close(_commutant_form_residual(aw, x)) for x in b.basis
    ):
        raise AlgebraMismatch("decomposition does not belong to the commutant of b")
    y = aw.unitary @ m @ aw.unitary.conj().T
    parts = []
    for i, blk in enumerate(aw.blocks):
        sl = aw.block_rows(i)
        parts.append(partial_trace(y[sl, sl], blk.d_left, blk.d_right, "right"))
    return direct_sum(*parts)


def homomorphism_support(a: VnAlgebra, images, seed=0, tol: Tolerance | None = None):
    """Support projector of a *-homomorphism given on the basis of ``a``.

    Returns ``(mu, 1 - mu)`` where ``mu`` sums the atoms not sent to zero.
    """
    tol = resolve_tol(tol)
    f = np.asarray(images, dtype=complex)
    if f.shape[0] != a.dim:
        raise DimensionMismatch("need one image per basis element")
    basis = a.basis
    prods = np.einsum("iab,jbc->ijac", basis, basis)
    coords = np.einsum("kab,ijab->ijk", basis.conj(), prods)
    via_linearity = np.einsum("ijk,kxy->ijxy", coords, f)
    direct = np.einsum("ixy,jyz->ijxz", f, f)
    scale = float(np.max(np.linalg.norm(f, axis=(1, 2)), initial=1.0)) ** 2
    if not tol.close(float(np.max(np.linalg.norm(via_linearity - direct, axis=(2, 3)))), scale):
        raise NotHomomorphism("images are not multiplicative")
    adj_coords = np.einsum("kab,iab->ik", basis.conj(), basis.conj().transpose(0, 2, 1))
    adj = np.einsum("ik,kxy->ixy", adj_coords, f)
    if not tol.close(float(np.max(np.linalg.norm(adj - f.conj().transpose(0, 2, 1), axis=(1, 2)))), scale):
        raise NotHomomorphism("images do not respect adjoints")
    atoms = atomic_projectors(center(a, tol), seed, tol)
    mu = np.zeros((a.dim_space, a.dim_space), dtype=complex)
    for p in atoms:
        fp = np.tensordot(a.space.coordinates(p), f, axes=1)
        if not tol.close(float(np.linalg.norm(fp))):
            mu = mu + p
    return mu, np.eye(a.dim_space) - mu
