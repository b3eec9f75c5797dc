"""Quantum channels, Stinespring dilations, and semi-causality.

A channel is stored by Kraus operators of shape ``(k, d_out, d_in)``. The Choi
matrix is ``J = sum_ij |i><j| (x) E(|i><j|)``. A Stinespring isometry has shape
``(d_out * d_env, d_in)`` with the environment as the right tensor factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    AlgebraMismatch,
    DimensionMismatch,
    DimensionOrder,
    NotCompletelyPositive,
    NotLean,
    NotSameChannel,
    NotSemiCausal,
    NotTracePreserving,
    NotUnitary,
)
from .linops import Tolerance, as_matrix, complement_columns, partial_trace, resolve_tol, subspace_equal
from .splitmap import Side, SplittingMap, is_lean, lean_decomposition, strictly_local_algebra
from .vnalg import AWDecomposition, VnAlgebra, aw_decomposition, commutant, trace_over_algebra

__all__ = [
    "Channel",
    "StinespringDilation",
    "SemiLocalisation",
    "channel_from_kraus",
    "channel_from_choi",
    "compose",
    "stinespring",
    "relate_dilations",
    "chi_trace",
    "trace_equivalence_isometry",
    "trace_equivalence_residual",
    "trace_equivalence_gap",
    "recovery_channel",
    "heisenberg_semicausal",
    "schroedinger_semicausal",
    "semicausality_residual",
    "semi_localise",
    "semi_localisation_residuals",
    "verify_semi_localisation",
]

# Choi matrices with an eigenvalue below -PSD_SLACK * trace are rejected.
PSD_SLACK = 1e-9


@dataclass(frozen=True)
class Channel:
    kraus: np.ndarray = field(repr=False)
    d_in: int
    d_out: int

    @cached_property
    def choi(self) -> np.ndarray:
        k = self.kraus
        # J[(i,o),(j,p)] = sum_k K[o,i] conj(K[p,j])
        return np.einsum("koi,kpj->iojp", k, k.conj()).reshape(self.d_in * self.d_out, -1)

    def __call__(self, rho) -> np.ndarray:
        rho = as_matrix(rho)
        return np.einsum("koi,ij,kpj->op", self.kraus, rho, self.kraus.conj())

    @property
    def n_kraus(self) -> int:
        return self.kraus.shape[0]


def channel_from_kraus(kraus, d_in: int, d_out: int, tol: Tolerance | None = None) -> Channel:
    """Validate and wrap Kraus operators; raises on non trace-preserving input."""
    tol = resolve_tol(tol)
    k = np.asarray(kraus, dtype=complex)
    if k.ndim == 2:
        k = k[None]
    if k.ndim != 3 or k.shape[1:] != (d_out, d_in):
        raise DimensionMismatch(f"Kraus operators must be {d_out}x{d_in}, got {k.shape[1:]}")
    defect = np.linalg.norm(np.einsum("koi,koj->ij", k.conj(), k) - np.eye(d_in))
    if not tol.close(float(defect)):
        raise NotTracePreserving(f"sum K^dag K differs from identity by {defect:.3e}")
    return Channel(k, d_in, d_out)


def channel_from_choi(choi, d_in: int, d_out: int, tol: Tolerance | None = None) -> Channel:
    """Channel with the minimal number of Kraus operators for a Choi matrix."""
    tol = resolve_tol(tol)
    choi = as_matrix(choi)
    if choi.shape != (d_in * d_out, d_in * d_out):
        raise DimensionMismatch("Choi matrix has the wrong size")
    choi = (choi + choi.conj().T) / 2
    w, v = np.linalg.eigh(choi)
    trace = float(np.real(np.trace(choi)))
    if w[0] < -PSD_SLACK * max(trace, 1.0):
        raise NotCompletelyPositive(f"Choi matrix has eigenvalue {w[0]:.3e}")
    keep = w > tol.cutoff(float(w[-1]))
    vecs = v[:, keep] * np.sqrt(w[keep])
    kraus = vecs.T.reshape(-1, d_in, d_out).transpose(0, 2, 1)
    return channel_from_kraus(kraus, d_in, d_out, tol)


def compose(*channels: Channel, tol: Tolerance | None = None) -> Channel:
    """``channels[0]`` after ``channels[1]`` after ...; Kraus rank is reduced."""
    out = channels[-1]
    for c in reversed(channels[:-1]):
        if c.d_in != out.d_out:
            raise DimensionMismatch("channels cannot be composed")
        k = np.einsum("aoi,bij->aboj", c.kraus, out.kraus).reshape(-1, c.d_out, out.d_in)
        out = channel_from_choi(Channel(k, out.d_in, c.d_out).choi, out.d_in, c.d_out, tol)
    return out


@dataclass(frozen=True)
class StinespringDilation:
    """Isometry ``U: C^d_in -> C^d_out (x) C^d_env``."""

    isometry: np.ndarray = field(repr=False)
    d_in: int
    d_out: int
    d_env: int

    def channel(self) -> Channel:
        k = self.isometry.reshape(self.d_out, self.d_env, self.d_in).transpose(1, 0, 2)
        return Channel(k, self.d_in, self.d_out)


def stinespring(e: Channel, minimal: bool = True, d_env: int | None = None, tol: Tolerance | None = None) -> StinespringDilation:
    """Stinespring isometry of ``e``.

    With ``minimal`` the environment has dimension equal to the Choi rank.
    Otherwise the stored Kraus operators are used, zero-padded up to
    ``d_env`` environment states.
    """
    k = channel_from_choi(e.choi, e.d_in, e.d_out, tol).kraus if minimal else e.kraus
    n = k.shape[0]
    if d_env is not None:
        if d_env < n:
            raise DimensionOrder(f"environment of dimension {d_env} cannot hold {n} Kraus operators")
        k = np.concatenate([k, np.zeros((d_env - n,) + k.shape[1:], dtype=complex)])
    n = k.shape[0]
    u = k.transpose(1, 0, 2).reshape(e.d_out * n, e.d_in)
    return StinespringDilation(u, e.d_in, e.d_out, n)


def _as_dilation(u, d_in, d_out) -> StinespringDilation:
    if isinstance(u, StinespringDilation):
        return u
    u = as_matrix(u)
    if u.shape[1] != d_in or u.shape[0] % d_out:
        raise DimensionMismatch("isometry does not fit the stated dimensions")
    return StinespringDilation(u, d_in, d_out, u.shape[0] // d_out)


def relate_dilations(u: StinespringDilation, v: StinespringDilation, tol: Tolerance | None = None) -> np.ndarray:
    """Isometry ``W`` on the environment with ``v = (1 (x) W) u``.

    Requires ``u.d_env <= v.d_env``. ``W`` agrees with ``W_v W_u^dag`` on the
    range of ``W_u`` (where ``u = (1 (x) W_u) t`` for a minimal dilation
    ``t``) and sends the complement isometrically into the complement of the
    range of ``W_v``.
    """
    tol = resolve_tol(tol)
    if (u.d_in, u.d_out) != (v.d_in, v.d_out):
        raise DimensionMismatch("dilations have different input or output spaces")
    if u.d_env > v.d_env:
        raise DimensionOrder("first dilation must have the smaller environment")
    cu, cv = u.channel(), v.channel()
    if not tol.close(float(np.linalg.norm(cu.choi - cv.choi)), float(np.linalg.norm(cu.choi))):
        raise NotSameChannel("dilations belong to different channels")
    t = stinespring(cu, True, tol=tol)

    def env_map(x):
        # x = (1 (x) W) t  <=>  X_mat = W T_mat with env as the row index
        t_mat = t.isometry.reshape(t.d_out, t.d_env, t.d_in).transpose(1, 0, 2).reshape(t.d_env, -1)
        x_mat = x.isometry.reshape(x.d_out, x.d_env, x.d_in).transpose(1, 0, 2).reshape(x.d_env, -1)
        return x_mat @ np.linalg.pinv(t_mat)

    w_u, w_v = env_map(u), env_map(v)
    w = w_v @ w_u.conj().T
    perp_u = complement_columns(w_u, u.d_env, tol)
    perp_v = complement_columns(w_v, v.d_env, tol)
    w = w + perp_v[:, : perp_u.shape[1]] @ perp_u.conj().T
    return w


def chi_trace(chi: SplittingMap, rho) -> np.ndarray:
    """Left reduced operator ``Tr_R(chi rho chi^dag)``."""
    v = chi.isometry
    return partial_trace(v @ as_matrix(rho) @ v.conj().T, chi.d_L, chi.d_R, "right")


def trace_equivalence_isometry(
    chi: SplittingMap, b: VnAlgebra, aw: AWDecomposition | None = None, seed=0, tol: Tolerance | None = None
) -> np.ndarray:
    """Isometry ``U`` with ``chi_trace(chi, .) = U trace_over_algebra(., b) U^dag``.

    ``chi`` must be lean with right strictly local algebra ``b``. ``aw`` is the
    decomposition of the commutant of ``b`` that defines the algebra trace;
    the isometry is the left leg of the lean factorisation built from it.
    """
    tol = resolve_tol(tol)
    if not is_lean(chi, tol):
        raise NotLean("splitting map is not lean")
    if not subspace_equal(strictly_local_algebra(chi, Side.RIGHT, tol).space, b.space, tol):
        raise AlgebraMismatch("b is not the right strictly local algebra of chi")
    if aw is None:
        aw = aw_decomposition(commutant(b, tol), seed, tol)
    return lean_decomposition(chi, seed, tol, aw=aw).U_L


def _basis_states(n):
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1.0
            yield e


def trace_equivalence_residual(chi: SplittingMap, b: VnAlgebra, aw: AWDecomposition, u, tol: Tolerance | None = None) -> float:
    """Max over matrix units of ``|| chi_trace - U Tr_b U^dag ||``."""
    return max(
        float(np.linalg.norm(chi_trace(chi, e) - u @ trace_over_algebra(e, b, aw, tol) @ u.conj().T))
        for e in _basis_states(chi.d_H)
    )


def trace_equivalence_gap(chi: SplittingMap, b: VnAlgebra, aw: AWDecomposition, tol: Tolerance | None = None) -> float:
    """Lower bound, valid for every isometry ``U``, on the trace mismatch.

    For each basis state the distance between the spectra of the two reduced
    operators bounds ``|| chi_trace(rho) - U Tr_b(rho) U^dag ||`` from below.
    """
    gap = 0.0
    for i in range(chi.d_H):
        rho = np.zeros((chi.d_H, chi.d_H), dtype=complex)
        rho[i, i] = 1.0
        x = np.sort(np.linalg.eigvalsh(chi_trace(chi, rho)))[::-1]
        y = np.sort(np.linalg.eigvalsh(trace_over_algebra(rho, b, aw, tol)))[::-1]
        n = max(len(x), len(y))
        x = np.pad(x, (0, n - len(x)))
        y = np.pad(y, (0, n - len(y)))
        gap = max(gap, float(np.linalg.norm(x - y)))
    return gap


def recovery_channel(chi: SplittingMap, seed=0, tol: Tolerance | None = None) -> Channel:
    """Channel ``F`` from the left leg back to ``H`` with ``chi_trace o F`` fixing reduced states.

    On the support ``(+)_i H_L^i`` of reduced states ``F`` conjugates by
    ``V: psi -> chi^dag (psi (x) |0_R^i>)``; the rest of the left space is
    reset to the first basis vector of ``H``.
    """
    tol = resolve_tol(tol)
    lean = lean_decomposition(chi, seed, tol)
    v = np.zeros((chi.d_H, chi.d_L), dtype=complex)
    for lo, ro, blk in zip(lean.aw.left_offsets, lean.aw.right_offsets, lean.aw.blocks):
        frame = lean.U_L[:, lo : lo + blk.d_left]
        anchor = lean.U_R[:, ro][:, None]
        v += chi.isometry.conj().T @ np.kron(frame @ frame.conj().T, anchor)
    rest = complement_columns(lean.U_L, chi.d_L, tol)
    phi = np.zeros((chi.d_H, 1), dtype=complex)
    phi[0, 0] = 1.0
    kraus = [v] + [phi @ rest[:, [k]].conj().T for k in range(rest.shape[1])]
    return channel_from_kraus(kraus, chi.d_L, chi.d_H, tol)


def heisenberg_semicausal(u, a: VnAlgebra, b: VnAlgebra, tol: Tolerance | None = None) -> bool:
    """Whether ``U^dag B U`` commutes with ``a`` for every ``B`` in ``b``."""
    tol = resolve_tol(tol)
    u = as_matrix(u)
    n = u.shape[1]
    if u.shape[0] != u.shape[1] or not tol.close(float(np.linalg.norm(u.conj().T @ u - np.eye(n)))):
        raise NotUnitary("expected a unitary")
    if a.dim_space != n or b.dim_space != n:
        raise DimensionMismatch("algebras do not act on the unitary's space")
    evolved = u.conj().T @ b.basis @ u
    comm = np.einsum("iab,jbc->ijac", evolved, a.basis) - np.einsum("jab,ibc->ijac", a.basis, evolved)
    return tol.close(float(np.max(np.linalg.norm(comm, axis=(2, 3)))))


def _trace_channel(chi: SplittingMap) -> Channel:
    """``chi_trace`` as a channel ``L(H) -> L(H_L)``."""
    k = chi.isometry.reshape(chi.d_L, chi.d_R, chi.d_H).transpose(1, 0, 2)
    return Channel(k, chi.d_H, chi.d_L)


def semicausality_residual(e: Channel, chi_a_prime: SplittingMap, chi_b: SplittingMap, e_tilde: Channel) -> float:
    """Max over matrix units of ``|| Tr_chiB E(rho) - E~(Tr_chiA' rho) ||``."""
    out = _trace_channel(chi_b)
    inp = _trace_channel(chi_a_prime)
    return max(float(np.linalg.norm(out(e(r)) - e_tilde(inp(r)))) for r in _basis_states(e.d_in))


def schroedinger_semicausal(
    e: Channel, chi_a_prime: SplittingMap, chi_b: SplittingMap, seed=0, tol: Tolerance | None = None
) -> Channel | None:
    """Reduced channel ``E~`` with ``Tr_chiB o E = E~ o Tr_chiA'``, or ``None``.

    The candidate is ``Tr_chiB o E o F`` with ``F`` the recovery channel of
    ``chi_a_prime``; it is accepted when the identity holds on all matrix
    units.
    """
    tol = resolve_tol(tol)
    if chi_a_prime.d_H != e.d_in or chi_b.d_H != e.d_out:
        raise DimensionMismatch("splitting maps do not match the channel")
    f = recovery_channel(chi_a_prime, seed, tol)
    e_tilde = compose(_trace_channel(chi_b), e, f, tol=tol)
    if tol.close(semicausality_residual(e, chi_a_prime, chi_b, e_tilde)):
        return e_tilde
    return None


@dataclass(frozen=True)
class SemiLocalisation:
    """``E(rho) = zeta_B^dag Tr_U[G rho G^dag] zeta_B`` with ``G = (1 (x) T)(V (x) 1) chi_A'``.

    ``zeta_B`` pads the right leg of ``chi_B``; ``E1_isometry`` is ``V`` acting
    on the left leg, ``T`` bridges ``H_V (x) H_R`` to ``H_R^zeta (x) C^d_U``.
    """

    zeta_B: SplittingMap
    E1_isometry: np.ndarray = field(repr=False)
    T: np.ndarray = field(repr=False)
    d_U: int

    @property
    def d_V(self) -> int:
        return self.E1_isometry.shape[0] // self.zeta_B.d_L


def semi_localise(
    e: Channel, chi_a_prime: SplittingMap, chi_b: SplittingMap, seed=0, tol: Tolerance | None = None
) -> SemiLocalisation:
    """Split a semi-causal channel into a left step and a bridging step."""
    tol = resolve_tol(tol)
    e_tilde = schroedinger_semicausal(e, chi_a_prime, chi_b, seed, tol)
    if e_tilde is None:
        raise NotSemiCausal("channel signals into the target algebra")
    u = stinespring(e, True, tol=tol)
    v = stinespring(e_tilde, True, tol=tol)
    d_u, d_v = u.d_env, v.d_env
    d_ra = chi_a_prime.d_R
    pad = max(1, math.ceil(d_v * d_ra / (chi_b.d_R * d_u)))
    w = np.kron(np.eye(chi_b.d_R), np.eye(pad)[:, :1])
    zeta = SplittingMap(np.kron(np.eye(chi_b.d_L), w) @ chi_b.isometry, chi_b.d_L, chi_b.d_R * pad)

    # (V (x) 1) chi_A' : H -> H_LB (x) [H_V (x) H_RA']
    left = np.kron(v.isometry, np.eye(d_ra)) @ chi_a_prime.isometry
    # (zeta_B (x) 1) U : H -> H_LB (x) [H_Rzeta (x) C^d_U]
    right = np.kron(zeta.isometry, np.eye(d_u)) @ u.isometry
    t = relate_dilations(
        StinespringDilation(left, e.d_in, zeta.d_L, d_v * d_ra),
        StinespringDilation(right, e.d_in, zeta.d_L, zeta.d_R * d_u),
        tol,
    )
    return SemiLocalisation(zeta, v.isometry, t, d_u)


def _composite(s: SemiLocalisation, chi_a_prime: SplittingMap) -> np.ndarray:
    """``G = (1 (x) T)(V (x) 1) chi_A'`` into ``H_LB (x) H_Rzeta (x) C^d_U``."""
    left = np.kron(s.E1_isometry, np.eye(chi_a_prime.d_R)) @ chi_a_prime.isometry
    return np.kron(np.eye(s.zeta_B.d_L), s.T) @ left


def semi_localisation_residuals(e: Channel, s: SemiLocalisation, chi_a_prime: SplittingMap) -> dict:
    """Reconstruction error, image leakage, and isometry defects of a decomposition."""
    z = s.zeta_B
    n_out = z.d_L * z.d_R
    if s.T.shape[0] != z.d_R * s.d_U or z.d_H != e.d_out or chi_a_prime.d_H != e.d_in:
        raise DimensionMismatch("decomposition does not fit the channel")
    g = _composite(s, chi_a_prime)
    recon = 0.0
    for rho in _basis_states(e.d_in):
        big = partial_trace(g @ rho @ g.conj().T, n_out, s.d_U, "right")
        recon = max(recon, float(np.linalg.norm(z.isometry.conj().T @ big @ z.isometry - e(rho))))
    image = np.kron(z.projector, np.eye(s.d_U))
    defect = lambda m: float(np.linalg.norm(m.conj().T @ m - np.eye(m.shape[1])))
    return {
        "reconstruction": recon,
        "image": float(np.linalg.norm(image @ g - g)),
        "isometry": max(defect(s.T), defect(s.E1_isometry), defect(z.isometry)),
    }


def verify_semi_localisation(e: Channel, s: SemiLocalisation, chi_a_prime: SplittingMap, tol: Tolerance | None = None) -> bool:
    """Check that ``s`` reconstructs ``e`` and that the composite stays in the image of ``zeta_B``."""
    tol = resolve_tol(tol)
    return all(tol.close(r) for r in semi_localisation_residuals(e, s, chi_a_prime).values())
