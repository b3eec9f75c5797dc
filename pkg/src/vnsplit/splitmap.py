"""Splitting maps: isometries ``chi: H -> H_L (x) H_R``.

A splitting map induces, on each side, the consistent algebra (on-site
operators commuting with the image projector), the strictly local algebra
(their pull-backs to ``H``), and the comprehension preorder between maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, NotBalanced, NotFactor, NotIsometry, NotLean, NotNested
from .linops import (
    OperatorSubspace,
    Tolerance,
    as_matrix,
    nullspace,
    orthonormalize,
    resolve_tol,
    subspace_equal,
)
from .vnalg import (
    AWBlock,
    AWDecomposition,
    VnAlgebra,
    assemble_aw,
    aw_decomposition,
    center,
    classify_projectors,
    commutant,
    connector,
    leading_index,
    pivoted_frame,
    refine_projectors,
)

__all__ = [
    "Side",
    "SplittingMap",
    "ComprehensionWitness",
    "SplitComponent",
    "FactorShape",
    "BalancedBlock",
    "LeanDecomposition",
    "BalancedComprehension",
    "NestedComprehension",
    "make_splitting_map",
    "image_projector",
    "is_consistent",
    "consistent_algebra",
    "sigma",
    "local_operators",
    "local_representative",
    "strictly_local_representative",
    "strictly_local_algebra",
    "canonical_splitting_map",
    "is_balanced",
    "is_lean",
    "verify_comprehension",
    "comprehension_residual",
    "comprehension_nested_canonical",
    "comprehension_balanced_canonical",
    "split_by_atomic_projectors",
    "factor_shape",
    "balanced_decomposition",
    "reconstruct_balanced",
    "lean_decomposition",
    "complete_isometry",
]


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def other(self) -> "Side":
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


@dataclass(frozen=True)
class SplittingMap:
    """Isometry of shape ``(d_L * d_R, d_H)``; build with :func:`make_splitting_map`."""

    isometry: np.ndarray = field(repr=False)
    d_L: int
    d_R: int

    def __post_init__(self):
        if self.isometry.shape[0] != self.d_L * self.d_R:
            raise DimensionMismatch(
                f"isometry has {self.isometry.shape[0]} rows, expected {self.d_L}*{self.d_R}"
            )

    @property
    def d_H(self) -> int:
        return self.isometry.shape[1]

    def side_dim(self, side) -> int:
        return self.d_L if Side(side) is Side.LEFT else self.d_R

    def embed(self, b, side) -> np.ndarray:
        """``b (x) 1`` for the left side, ``1 (x) b`` for the right."""
        if Side(side) is Side.LEFT:
            return np.kron(b, np.eye(self.d_R))
        return np.kron(np.eye(self.d_L), b)

    @property
    def projector(self) -> np.ndarray:
        return self.isometry @ self.isometry.conj().T

    def dagger(self) -> np.ndarray:
        return self.isometry.conj().T


def make_splitting_map(v, d_L: int, d_R: int, tol: Tolerance | None = None) -> SplittingMap:
    tol = resolve_tol(tol)
    v = as_matrix(v)
    if v.shape[0] != d_L * d_R:
        raise DimensionMismatch(f"isometry has {v.shape[0]} rows, expected {d_L * d_R}")
    defect = np.linalg.norm(v.conj().T @ v - np.eye(v.shape[1]))
    if not tol.close(float(defect)):
        raise NotIsometry(f"V^dag V differs from the identity by {defect:.3e}")
    return SplittingMap(v, int(d_L), int(d_R))


def image_projector(chi: SplittingMap) -> np.ndarray:
    return chi.projector


def is_consistent(chi: SplittingMap, b, side, tol: Tolerance | None = None, method: str = "commutator") -> bool:
    """Whether the on-site operator ``b`` leaves the image of ``chi`` reducing.

    ``method="commutator"`` tests ``[pi, b (x) 1] = 0``; ``"invariance"`` tests
    that both ``b (x) 1`` and its adjoint map ``Im chi`` into itself.
    """
    tol = resolve_tol(tol)
    x = chi.embed(as_matrix(b), side)
    pi = chi.projector
    scale = float(np.linalg.norm(x))
    if method == "commutator":
        return tol.close(float(np.linalg.norm(pi @ x - x @ pi)), scale)
    if method == "invariance":
        out = np.eye(pi.shape[0]) - pi
        leak = max(np.linalg.norm(out @ x @ pi), np.linalg.norm(out @ x.conj().T @ pi))
        return tol.close(float(leak), scale)
    raise ValueError(f"unknown method {method!r}")


def _unit_images(chi: SplittingMap, side, fn) -> np.ndarray:
    """Columns ``vec(fn(E_ab))`` over the matrix units of one side."""
    d = chi.side_dim(side)
    cols = []
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = 1.0
            cols.append(fn(e).reshape(-1))
    return np.stack(cols, axis=1)


def consistent_algebra(chi: SplittingMap, side, tol: Tolerance | None = None) -> VnAlgebra:
    """On-site operators commuting with the image projector."""
    tol = resolve_tol(tol)
    pi = chi.projector
    d = chi.side_dim(side)

    def comm(e):
        x = chi.embed(e, side)
        return pi @ x - x @ pi

    ker = nullspace(_unit_images(chi, side, comm), tol)
    return VnAlgebra(OperatorSubspace(d, ker.T.reshape(-1, d, d)))


def sigma(chi: SplittingMap, b, side) -> np.ndarray:
    """Pull-back ``chi^dag (b (x) 1) chi``."""
    v = chi.isometry
    return v.conj().T @ chi.embed(as_matrix(b), side) @ v


def local_operators(chi: SplittingMap, side, tol: Tolerance | None = None) -> OperatorSubspace:
    """The image of all on-site operators under :func:`sigma`."""
    return orthonormalize([sigma(chi, e, side) for *_, e in _units(chi.side_dim(side))], chi.d_H, tol)


def _units(d):
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = 1.0
            yield a, b, e


def _operator_on_h(chi: SplittingMap, a) -> np.ndarray:
    a = as_matrix(a)
    if a.shape != (chi.d_H, chi.d_H):
        raise DimensionMismatch(f"operator of shape {a.shape} does not act on a {chi.d_H}-dimensional space")
    return a


def _solve(m, rhs, tol: Tolerance, scale: float):
    x, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    return x, tol.close(float(np.linalg.norm(m @ x - rhs)), scale)


def local_representative(chi: SplittingMap, a, side, tol: Tolerance | None = None):
    """Minimum-norm on-site ``b`` with ``sigma(b) = a``, or ``None``."""
    tol = resolve_tol(tol)
    a = _operator_on_h(chi, a)
    d = chi.side_dim(side)
    m = _unit_images(chi, side, lambda e: sigma(chi, e, side))
    x, ok = _solve(m, a.reshape(-1), tol, float(np.linalg.norm(a)))
    return x.reshape(d, d) if ok else None


def strictly_local_representative(chi: SplittingMap, a, side, tol: Tolerance | None = None):
    """On-site ``b`` intertwining ``a`` through ``chi`` and ``chi^dag``, or ``None``.

    Solves ``(b (x) 1) chi = chi a`` and ``chi^dag (b (x) 1) = a chi^dag``
    together; any solution is automatically consistent. The minimum-norm
    solution is returned.
    """
    tol = resolve_tol(tol)
    a = _operator_on_h(chi, a)
    v = chi.isometry
    vd = v.conj().T
    d = chi.side_dim(side)

    def both(e):
        x = chi.embed(e, side)
        return np.concatenate([(x @ v).reshape(-1), (vd @ x).reshape(-1)])

    m = _unit_images(chi, side, both)
    rhs = np.concatenate([(v @ a).reshape(-1), (a @ vd).reshape(-1)])
    x, ok = _solve(m, rhs, tol, float(np.linalg.norm(a)))
    return x.reshape(d, d) if ok else None


def strictly_local_algebra(chi: SplittingMap, side, tol: Tolerance | None = None) -> VnAlgebra:
    cons = consistent_algebra(chi, side, tol)
    return VnAlgebra(orthonormalize([sigma(chi, b, side) for b in cons.basis], chi.d_H, tol))


def canonical_splitting_map(
    a: VnAlgebra, seed=0, tol: Tolerance | None = None, aw: AWDecomposition | None = None
) -> SplittingMap:
    """Block unitary of ``a`` followed by the embedding into a tensor product.

    Pass ``aw`` to fix which decomposition of ``a`` is used.
    """
    aw = aw if aw is not None else aw_decomposition(a, seed, tol)
    return SplittingMap(aw.embedding() @ aw.unitary, aw.d_left, aw.d_right)


def is_balanced(chi: SplittingMap, tol: Tolerance | None = None) -> bool:
    left = strictly_local_algebra(chi, Side.LEFT, tol)
    right = strictly_local_algebra(chi, Side.RIGHT, tol)
    return subspace_equal(right.space, commutant(left, tol).space, tol)


def is_lean(chi: SplittingMap, tol: Tolerance | None = None) -> bool:
    if not is_balanced(chi, tol):
        return False
    for side in Side:
        cons = consistent_algebra(chi, side, tol)
        if not subspace_equal(commutant(cons, tol).space, center(cons, tol).space, tol):
            return False
    return True


@dataclass(frozen=True)
class ComprehensionWitness:
    """Isometries relating two splitting maps through a middle space ``C^d_M``.

    ``black`` maps the right space of the smaller map into ``M (x) H_R`` of
    the larger one; ``white`` maps the left space of the larger map into
    ``H_L (x) M`` of the smaller one.
    """

    black: np.ndarray = field(repr=False)
    white: np.ndarray = field(repr=False)
    d_M: int


def _isometry_defect(v) -> float:
    return float(np.linalg.norm(v.conj().T @ v - np.eye(v.shape[1])))


def comprehension_residual(zeta: SplittingMap, chi: SplittingMap, w: ComprehensionWitness) -> float:
    """``|| (1 (x) black) zeta - (white (x) 1) chi ||`` plus isometry defects."""
    if w.black.shape != (w.d_M * chi.d_R, zeta.d_R) or w.white.shape != (zeta.d_L * w.d_M, chi.d_L):
        raise DimensionMismatch("witness shapes do not match the splitting maps")
    if zeta.d_H != chi.d_H:
        raise DimensionMismatch("splitting maps act on different spaces")
    lhs = np.kron(np.eye(zeta.d_L), w.black) @ zeta.isometry
    rhs = np.kron(w.white, np.eye(chi.d_R)) @ chi.isometry
    return float(np.linalg.norm(lhs - rhs)) + _isometry_defect(w.black) + _isometry_defect(w.white)


def verify_comprehension(zeta: SplittingMap, chi: SplittingMap, w: ComprehensionWitness, tol: Tolerance | None = None) -> bool:
    """Check that ``w`` witnesses ``zeta`` being comprehended in ``chi``."""
    return resolve_tol(tol).close(comprehension_residual(zeta, chi, w))


def complete_isometry(partial, tol: Tolerance | None = None) -> np.ndarray:
    """Extend a partial isometry to an isometry on the whole domain.

    The orthocomplement of its support is sent onto part of the
    orthocomplement of its range.
    """
    partial = np.asarray(partial, dtype=complex)
    rows, cols = partial.shape
    u, s, vh = np.linalg.svd(partial)
    r = int(np.sum(s > 0.5))
    dom = vh[r:].conj().T
    rng_perp = u[:, r:]
    if rng_perp.shape[1] < dom.shape[1]:
        raise DimensionMismatch("target too small to complete the isometry")
    return partial + rng_perp[:, : dom.shape[1]] @ dom.conj().T


@dataclass(frozen=True)
class SplitComponent:
    """Restriction of a splitting map to the range of one atomic projector."""

    projector: np.ndarray = field(repr=False)
    embedding: np.ndarray = field(repr=False)
    chi: SplittingMap

    def __iter__(self):
        return iter((self.projector, self.chi))


def split_by_atomic_projectors(chi: SplittingMap, seed=0, tol: Tolerance | None = None) -> list[SplitComponent]:
    """Pieces ``chi|_{pi_i H}`` for the atoms of the left strictly local algebra."""
    stloc = strictly_local_algebra(chi, Side.LEFT, tol)
    aw = aw_decomposition(stloc, seed, tol)
    out = []
    for pi in aw.atomic:
        frame = pivoted_frame(pi)
        out.append(SplitComponent(pi, frame, SplittingMap(chi.isometry @ frame, chi.d_L, chi.d_R)))
    return out


@dataclass(frozen=True)
class FactorShape:
    """Schmidt form ``chi|l r> = sum_m lambdas[m] |l+m> (x) |r+m>`` of a factor block.

    ``basis[:, l*d_r + r]`` is ``|l r>`` in ``H``; ``left_frame[l, m]`` and
    ``right_frame[r, m]`` are the vectors ``|l+m>`` and ``|r+m>``.
    """

    basis: np.ndarray = field(repr=False)
    lambdas: np.ndarray
    left_frame: np.ndarray = field(repr=False)
    right_frame: np.ndarray = field(repr=False)

    @property
    def d_l(self) -> int:
        return self.left_frame.shape[0]

    @property
    def d_r(self) -> int:
        return self.right_frame.shape[0]

    @property
    def terms(self) -> int:
        return len(self.lambdas)


def _block_shape(chi: SplittingMap, aw: AWDecomposition, i: int, tol: Tolerance) -> FactorShape:
    blk = aw.blocks[i]
    dl, dr = blk.d_left, blk.d_right
    rows = aw.unitary[aw.block_rows(i)]
    basis = rows.conj().T
    y = (chi.isometry @ basis[:, 0]).reshape(chi.d_L, chi.d_R)
    u, s, vh = np.linalg.svd(y)
    k = int(np.sum(s > tol.cutoff(s[0])))
    lam, left0, right0 = s[:k], u[:, :k].copy(), vh[:k].T.copy()
    for m in range(k):
        col = left0[:, m]
        lead = col[np.nonzero(np.abs(col) > 1e-8)[0][0]]
        phase = lead / abs(lead)
        left0[:, m] /= phase
        right0[:, m] *= phase

    left = np.empty((dl, k, chi.d_L), dtype=complex)
    for l in range(dl):
        unit = np.zeros((dl, dl))
        unit[l, 0] = 1.0
        rep = strictly_local_representative(chi, basis @ np.kron(unit, np.eye(dr)) @ rows, Side.LEFT, tol)
        if rep is None:
            raise NotBalanced("left matrix unit has no strictly local representative")
        left[l] = (rep @ left0).T
    right = np.empty((dr, k, chi.d_R), dtype=complex)
    for r in range(dr):
        unit = np.zeros((dr, dr))
        unit[r, 0] = 1.0
        rep = strictly_local_representative(chi, basis @ np.kron(np.eye(dl), unit) @ rows, Side.RIGHT, tol)
        if rep is None:
            raise NotBalanced("right matrix unit has no strictly local representative")
        right[r] = (rep @ right0).T

    recon = np.einsum("m,lma,rmb->ablr", lam, left, right).reshape(chi.d_L * chi.d_R, dl * dr)
    if not tol.close(float(np.linalg.norm(recon - chi.isometry @ basis)), 1e3):
        raise NotBalanced("block does not have Schmidt form")
    return FactorShape(basis, lam, left, right)


def factor_shape(chi_component: SplittingMap, seed=0, tol: Tolerance | None = None) -> FactorShape:
    """Schmidt form of a balanced splitting map whose strictly local algebra is a factor."""
    tol = resolve_tol(tol)
    if not is_balanced(chi_component, tol):
        raise NotBalanced("component is not balanced")
    aw = aw_decomposition(strictly_local_algebra(chi_component, Side.LEFT, tol), seed, tol)
    if len(aw.blocks) != 1:
        raise NotFactor(f"strictly local algebra has {len(aw.blocks)} blocks")
    return _block_shape(chi_component, aw, 0, tol)


@dataclass(frozen=True)
class BalancedBlock:
    """One summand ``(U_L (x) U_R)(1 (x) phi (x) 1) zeta`` of a balanced map.

    ``zeta`` is the partial isometry ``H -> C^d_l (x) C^d_r`` supported on the
    range of ``projector``.
    """

    projector: np.ndarray = field(repr=False)
    zeta: np.ndarray = field(repr=False)
    phi: np.ndarray
    U_L: np.ndarray = field(repr=False)
    U_R: np.ndarray = field(repr=False)
    d_l: int
    d_r: int


def balanced_decomposition(chi: SplittingMap, seed=0, tol: Tolerance | None = None) -> list[BalancedBlock]:
    tol = resolve_tol(tol)
    if not is_balanced(chi, tol):
        raise NotBalanced("splitting map is not balanced")
    aw = aw_decomposition(strictly_local_algebra(chi, Side.LEFT, tol), seed, tol)
    out = []
    for i, blk in enumerate(aw.blocks):
        sh = _block_shape(chi, aw, i, tol)
        k = sh.terms
        phi = np.zeros(k * k, dtype=complex)
        phi[np.arange(k) * (k + 1)] = sh.lambdas
        u_l = sh.left_frame.reshape(sh.d_l * k, chi.d_L).T
        u_r = sh.right_frame.transpose(1, 0, 2).reshape(k * sh.d_r, chi.d_R).T
        out.append(BalancedBlock(blk.atom, aw.unitary[aw.block_rows(i)], phi, u_l, u_r, sh.d_l, sh.d_r))
    return out


def reconstruct_balanced(blocks, d_L: int, d_R: int) -> np.ndarray:
    """Sum the summands of :func:`balanced_decomposition` back into an isometry."""
    total = None
    for b in blocks:
        mid = np.kron(np.eye(b.d_l), np.kron(b.phi[:, None], np.eye(b.d_r)))
        term = np.kron(b.U_L, b.U_R) @ mid @ b.zeta
        total = term if total is None else total + term
    return total


@dataclass(frozen=True)
class LeanDecomposition:
    """``chi = (U_L (x) U_R) zeta`` with ``zeta`` canonical for the left algebra."""

    zeta: SplittingMap
    U_L: np.ndarray = field(repr=False)
    U_R: np.ndarray = field(repr=False)
    aw: AWDecomposition = field(repr=False)


def lean_decomposition(
    chi: SplittingMap, seed=0, tol: Tolerance | None = None, aw: AWDecomposition | None = None
) -> LeanDecomposition:
    """Factor a lean map through the canonical map of its left algebra.

    ``aw`` optionally fixes the decomposition of that algebra.
    """
    tol = resolve_tol(tol)
    if not is_lean(chi, tol):
        raise NotLean("splitting map is not lean")
    if aw is None:
        aw = aw_decomposition(strictly_local_algebra(chi, Side.LEFT, tol), seed, tol)
    u_l = np.zeros((chi.d_L, aw.d_left), dtype=complex)
    u_r = np.zeros((chi.d_R, aw.d_right), dtype=complex)
    for i, (lo, ro) in enumerate(zip(aw.left_offsets, aw.right_offsets)):
        sh = _block_shape(chi, aw, i, tol)
        if sh.terms != 1:
            raise NotLean("block carries entanglement between the legs")
        u_l[:, lo : lo + sh.d_l] = sh.left_frame[:, 0, :].T
        u_r[:, ro : ro + sh.d_r] = sh.right_frame[:, 0, :].T
    return LeanDecomposition(canonical_splitting_map(None, aw=aw), u_l, u_r, aw)


@dataclass(frozen=True)
class BalancedComprehension:
    """Canonical ``zeta`` with ``forward``: zeta in chi, ``backward``: chi in zeta."""

    zeta: SplittingMap
    forward: ComprehensionWitness
    backward: ComprehensionWitness


def _basis_vec(n, i):
    e = np.zeros(n, dtype=complex)
    e[i] = 1.0
    return e


def comprehension_balanced_canonical(chi: SplittingMap, seed=0, tol: Tolerance | None = None) -> BalancedComprehension:
    """Witnesses both ways between a balanced map and its canonical map."""
    tol = resolve_tol(tol)
    if not is_balanced(chi, tol):
        raise NotBalanced("splitting map is not balanced")
    aw = aw_decomposition(strictly_local_algebra(chi, Side.LEFT, tol), seed, tol)
    zeta = canonical_splitting_map(None, aw=aw)
    shapes = [_block_shape(chi, aw, i, tol) for i in range(len(aw.blocks))]
    k_max = max(sh.terms for sh in shapes)
    dlc, drc, dlz, drz = chi.d_L, chi.d_R, zeta.d_L, zeta.d_R
    offsets = list(zip(shapes, aw.left_offsets, aw.right_offsets))

    # zeta in chi: |l+m> -> |l>|m>,  |r> -> sum_m lambda_m |m>|r+m>
    dm = max(k_max, math.ceil(dlc / dlz))
    white = np.zeros((dlz * dm, dlc), dtype=complex)
    black = np.zeros((dm * drc, drz), dtype=complex)
    for sh, lo, ro in offsets:
        for l in range(sh.d_l):
            for m in range(sh.terms):
                white += np.outer(_basis_vec(dlz * dm, (lo + l) * dm + m), sh.left_frame[l, m].conj())
        for r in range(sh.d_r):
            black[:, ro + r] = sum(
                lam * np.kron(_basis_vec(dm, m), sh.right_frame[r, m]) for m, lam in enumerate(sh.lambdas)
            )
    forward = ComprehensionWitness(black, complete_isometry(white), dm)

    # chi in zeta: |r+m> -> |m>|r>,  |l> -> sum_m lambda_m |l+m>|m>
    dm = max(k_max, math.ceil(drc / drz))
    white = np.zeros((dlc * dm, dlz), dtype=complex)
    black = np.zeros((dm * drz, drc), dtype=complex)
    for sh, lo, ro in offsets:
        for l in range(sh.d_l):
            white[:, lo + l] = sum(
                lam * np.kron(sh.left_frame[l, m], _basis_vec(dm, m)) for m, lam in enumerate(sh.lambdas)
            )
        for r in range(sh.d_r):
            for m in range(sh.terms):
                black += np.outer(_basis_vec(dm * drz, m * drz + ro + r), sh.right_frame[r, m].conj())
    backward = ComprehensionWitness(complete_isometry(black), white, dm)
    return BalancedComprehension(zeta, forward, backward)


@dataclass(frozen=True)
class NestedComprehension:
    """Canonical maps of nested algebras with ``zeta`` comprehended in ``chi``."""

    zeta: SplittingMap
    chi: SplittingMap
    witness: ComprehensionWitness


def comprehension_nested_canonical(
    a_small: VnAlgebra, a_big: VnAlgebra, seed=0, tol: Tolerance | None = None
) -> NestedComprehension:
    """Canonical maps of ``a_small`` and ``a_big`` and a witness relating them.

    The minimal projectors of ``a_big`` are obtained by refining the
    reference projector of each block of ``a_small`` and transporting the
    refinement along that block's connectors, so both decompositions share
    their partial isometries. The middle space is labelled by
    ``(small block, refined index)``.
    """
    tol = resolve_tol(tol)
    if a_small.dim_space != a_big.dim_space:
        raise DimensionMismatch("algebras act on different spaces")
    if not all(a_big.contains(b, tol) for b in a_small.basis):
        raise NotNested("first algebra is not contained in the second")
    rng = np.random.default_rng(seed)
    aw_s = aw_decomposition(a_small, rng, tol)
    zeta = canonical_splitting_map(None, aw=aw_s)

    fine = [refine_projectors(a_big.space, [blk.projectors[0]], rng, tol) for blk in aw_s.blocks]
    entries = []  # (J, p, i, projector)
    for j, blk in enumerate(aw_s.blocks):
        for p, s in enumerate(blk.connectors):
            for i, q in enumerate(fine[j]):
                entries.append((j, p, i, s.conj().T @ q @ s))
    labels = classify_projectors(a_big.space, [e[3] for e in entries], tol)

    blocks, position = [], {}
    for label in sorted(set(labels)):
        members = sorted((e for e, lab in zip(entries, labels) if lab == label), key=lambda e: e[:3])
        ref = next(e for e in members if e[1] == 0)
        members.remove(ref)
        members.insert(0, ref)
        rep = ref[3]
        conns = []
        for j, p, i, proj in members:
            base = rep if (j, i) == (ref[0], ref[2]) else connector(a_big.space, rep, fine[j][i], tol)
            conns.append(base @ aw_s.blocks[j].connectors[p] @ proj)
        blocks.append((members, AWBlock(len(members), int(round(np.trace(rep).real)), tuple(m[3] for m in members), pivoted_frame(rep), tuple(conns))))
    blocks.sort(key=lambda mb: leading_index(mb[1].projectors[0]))
    aw_b = assemble_aw([b for _, b in blocks], a_big.dim_space, tol)
    chi = canonical_splitting_map(None, aw=aw_b)
    for k, ((members, _), lo) in enumerate(zip(blocks, aw_b.left_offsets)):
        for q, (j, p, i, _) in enumerate(members):
            position[(j, p, i)] = lo + q

    n_fine = [len(f) for f in fine]
    label_off = list(np.cumsum([0] + n_fine)[:-1])
    dm = sum(n_fine)
    white = np.zeros((zeta.d_L * dm, chi.d_L), dtype=complex)
    for (j, p, i), col in position.items():
        white[(aw_s.left_offsets[j] + p) * dm + label_off[j] + i, col] = 1.0
    black = np.zeros((dm * chi.d_R, zeta.d_R), dtype=complex)
    for j, blk in enumerate(aw_s.blocks):
        lo, ro = aw_s.left_offsets[j], aw_s.right_offsets[j]
        for z in range(blk.d_right):
            x = zeta.isometry.conj().T @ _basis_vec(zeta.d_L * zeta.d_R, lo * zeta.d_R + ro + z)
            y = (chi.isometry @ x).reshape(chi.d_L, chi.d_R)
            for i in range(n_fine[j]):
                lab = label_off[j] + i
                black[lab * chi.d_R : (lab + 1) * chi.d_R, ro + z] += y[position[(j, 0, i)]]
    return NestedComprehension(zeta, chi, ComprehensionWitness(black, white, dm))
