import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import random_channel, random_lean_map
from vnsplit.channels import (
    SemiLocalisation,
    StinespringDilation,
    channel_from_choi,
    channel_from_kraus,
    chi_trace,
    compose,
    heisenberg_semicausal,
    recovery_channel,
    relate_dilations,
    schroedinger_semicausal,
    semi_localisation_residuals,
    semi_localise,
    stinespring,
    trace_equivalence_gap,
    trace_equivalence_isometry,
    trace_equivalence_residual,
    verify_semi_localisation,
)
from vnsplit.errors import (
    DimensionMismatch,
    DimensionOrder,
    NotCompletelyPositive,
    NotLean,
    NotSameChannel,
    NotSemiCausal,
    NotTracePreserving,
    NotUnitary,
)
from vnsplit.fixtures import (
    algebra_otimes,
    amplitude_damping,
    chi_oplus,
    chi_tensor,
    depolarizing,
    entangled_balanced,
    product_channel_kraus,
    swap,
    swap_unitary_kraus,
)
from vnsplit.linops import partial_trace, random_isometry
from vnsplit.splitmap import (
    Side,
    canonical_splitting_map,
    comprehension_nested_canonical,
    strictly_local_algebra,
    verify_comprehension,
)
from vnsplit.vnalg import aw_decomposition, commutant, generate_algebra, trace_over_algebra


def _choi_oracle(kraus, d_in):
    # sum_ij |i><j| (x) E(|i><j|), written out with loops
    d_out = kraus[0].shape[0]
    j = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for a in range(d_in):
        for b in range(d_in):
            e = np.zeros((d_in, d_in))
            e[a, b] = 1
            j[a * d_out : (a + 1) * d_out, b * d_out : (b + 1) * d_out] = sum(k @ e @ k.conj().T for k in kraus)
    return j


def test_choi_of_amplitude_damping():
    kraus = amplitude_damping(0.3)
    e = channel_from_kraus(kraus, 2, 2)
    assert np.allclose(e.choi, _choi_oracle(kraus, 2))
    # |00><00| + sqrt(0.7)(|00><11| + h.c.) + 0.3|10><10| + 0.7|11><11|
    expected = np.zeros((4, 4))
    expected[0, 0], expected[2, 2], expected[3, 3] = 1, 0.3, 0.7
    expected[0, 3] = expected[3, 0] = np.sqrt(0.7)
    assert np.allclose(e.choi, expected)


def test_depolarizing_action():
    e = channel_from_kraus(depolarizing(0.2), 2, 2)
    rho = np.array([[0.7, 0.2], [0.2, 0.3]])
    assert np.allclose(e(rho), 0.8 * rho + 0.2 * np.eye(2) / 2)


def test_channel_validation():
    with pytest.raises(NotTracePreserving):
        channel_from_kraus([np.eye(2), np.eye(2)], 2, 2)
    with pytest.raises(DimensionMismatch):
        channel_from_kraus([np.eye(3)], 2, 2)
    with pytest.raises(NotCompletelyPositive):
        # transpose map is positive but not completely positive
        channel_from_choi(swap(2), 2, 2)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_choi_round_trip(d_in, d_out, k, seed):
    e = random_channel(d_in, d_out, k, np.random.default_rng(seed))
    back = channel_from_choi(e.choi, d_in, d_out)
    assert back.n_kraus <= d_in * d_out
    assert np.allclose(back.choi, e.choi, atol=1e-10)


def test_compose_order():
    rng = np.random.default_rng(0)
    f, g = random_channel(2, 3, 2, rng), random_channel(3, 2, 2, rng)
    rho = np.diag([0.4, 0.6])
    assert np.allclose(compose(g, f)(rho), g(f(rho)))
    with pytest.raises(DimensionMismatch):
        compose(f, f)


def test_stinespring_reproduces_channel():
    e = channel_from_kraus(product_channel_kraus(), 4, 4)
    u = stinespring(e)
    assert u.d_env == e.n_kraus
    rng = np.random.default_rng(1)
    x = rng.standard_normal((4, 4))
    rho = x @ x.T / np.trace(x @ x.T)
    out = partial_trace(u.isometry @ rho @ u.isometry.conj().T, 4, u.d_env, "right")
    assert np.allclose(out, e(rho))
    with pytest.raises(DimensionOrder):
        stinespring(e, minimal=False, d_env=1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_relate_dilations(seed):
    rng = np.random.default_rng(seed)
    d_in, d_out = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    e = random_channel(d_in, d_out, int(rng.integers(1, 4)), rng)
    small = stinespring(e, minimal=False, d_env=e.n_kraus + int(rng.integers(0, 2)))
    big_env = small.d_env + int(rng.integers(0, 3))
    pad = random_isometry(big_env, small.d_env, rng)
    big = StinespringDilation(np.kron(np.eye(d_out), pad) @ small.isometry, d_in, d_out, big_env)
    # re-dilate the small side independently so W is not just `pad`
    first = stinespring(e, minimal=False, d_env=small.d_env)
    w = relate_dilations(first, big)
    assert np.linalg.norm(big.isometry - np.kron(np.eye(d_out), w) @ first.isometry) <= 1e-9
    assert np.allclose(w.conj().T @ w, np.eye(first.d_env), atol=1e-9)


def test_relate_dilations_errors():
    rng = np.random.default_rng(2)
    e, f = random_channel(2, 2, 2, rng), random_channel(2, 2, 2, rng)
    with pytest.raises(NotSameChannel):
        relate_dilations(stinespring(e), stinespring(f))
    with pytest.raises(DimensionOrder):
        relate_dilations(stinespring(e, False, 3), stinespring(e))


def test_recovery_channel_fixes_reduced_states():
    rng = np.random.default_rng(3)
    for chi in [chi_oplus(), canonical_splitting_map(algebra_otimes()), random_lean_map(rng)[0]]:
        f = recovery_channel(chi)
        for _ in range(3):
            x = rng.standard_normal((chi.d_H, chi.d_H)) + 1j * rng.standard_normal((chi.d_H, chi.d_H))
            reduced = chi_trace(chi, x)
            assert np.allclose(chi_trace(chi, f(reduced)), reduced, atol=1e-9)


def test_trace_equivalence_on_oplus_map():
    chi = chi_oplus()
    b = strictly_local_algebra(chi, Side.RIGHT)
    aw = aw_decomposition(commutant(b))
    u = trace_equivalence_isometry(chi, b, aw)
    assert trace_equivalence_residual(chi, b, aw, u) < 1e-9
    assert trace_equivalence_gap(chi, b, aw) < 1e-9


def test_trace_equivalence_fails_without_leanness():
    chi = entangled_balanced()
    b = strictly_local_algebra(chi, Side.RIGHT)
    aw = aw_decomposition(commutant(b))
    # reduced state of |0> is maximally mixed on the left leg but pure under the algebra trace
    assert np.isclose(trace_equivalence_gap(chi, b, aw), np.sqrt(0.5))
    with pytest.raises(NotLean):
        trace_equivalence_isometry(chi, b, aw)


def test_heisenberg_swap():
    left = algebra_otimes()
    right = commutant(left)
    assert heisenberg_semicausal(swap(), left, left)
    assert not heisenberg_semicausal(swap(), right, left)
    with pytest.raises(NotUnitary):
        heisenberg_semicausal(2 * np.eye(4), left, left)


def test_heisenberg_product_unitary():
    rng = np.random.default_rng(4)
    u = np.kron(*(np.linalg.qr(rng.standard_normal((2, 2)))[0] for _ in range(2)))
    left = algebra_otimes()
    assert heisenberg_semicausal(u, commutant(left), left)


def test_schroedinger_product_and_swap():
    chi = chi_tensor(2, 2)
    product = channel_from_kraus(product_channel_kraus(), 4, 4)
    e_tilde = schroedinger_semicausal(product, chi, chi)
    assert e_tilde is not None
    assert np.allclose(e_tilde.choi, channel_from_kraus(amplitude_damping(0.3), 2, 2).choi, atol=1e-9)
    assert schroedinger_semicausal(channel_from_kraus(swap_unitary_kraus(), 4, 4), chi, chi) is None


def _conditional_block_channel(rng):
    # block 1 of the direct sum goes anywhere, block 2 stays in block 2
    first = random_channel(2, 4, 3, rng).kraus
    second = random_channel(2, 2, 2, rng).kraus
    p1, p2 = np.eye(4)[:2], np.eye(4)[2:]
    kraus = [k @ p1 for k in first] + [p2.T @ k @ p2 for k in second]
    return channel_from_kraus(kraus, 4, 4)


@pytest.mark.parametrize("case", ["product", "conditional"])
def test_semi_localise_and_verify(case):
    rng = np.random.default_rng(5)
    if case == "product":
        e, chi = channel_from_kraus(product_channel_kraus(), 4, 4), chi_tensor(2, 2)
    else:
        e, chi = _conditional_block_channel(rng), chi_oplus()
    s = semi_localise(e, chi, chi)
    res = semi_localisation_residuals(e, s, chi)
    assert all(v < 1e-9 for v in res.values()), res
    assert verify_semi_localisation(e, s, chi)
    bad = SemiLocalisation(s.zeta_B, s.E1_isometry, s.T @ np.diag(np.exp(1j * rng.uniform(0, 6, s.T.shape[1]))), s.d_U)
    assert not verify_semi_localisation(e, bad, chi)


def test_semi_localise_rejects_signalling():
    chi = chi_tensor(2, 2)
    with pytest.raises(NotSemiCausal):
        semi_localise(channel_from_kraus(swap_unitary_kraus(), 4, 4), chi, chi)


def test_channel_rebuilt_from_decomposition_is_semicausal():
    rng = np.random.default_rng(6)
    chi = chi_oplus()
    s = semi_localise(_conditional_block_channel(rng), chi, chi)
    # Kraus operators (zeta^dag (x) <u|) G of the decomposed form
    g = np.kron(np.eye(s.zeta_B.d_L), s.T) @ np.kron(s.E1_isometry, np.eye(chi.d_R)) @ chi.isometry
    g = g.reshape(-1, s.d_U, chi.d_H)
    kraus = [s.zeta_B.isometry.conj().T @ g[:, u, :] for u in range(s.d_U)]
    rebuilt = channel_from_kraus(kraus, chi.d_H, s.zeta_B.d_H)
    assert schroedinger_semicausal(rebuilt, chi, chi) is not None


def test_identity_channel_semi_localises():
    chi = chi_oplus()
    e = channel_from_kraus([np.eye(4)], 4, 4)
    assert schroedinger_semicausal(e, chi, chi) is not None
    assert verify_semi_localisation(e, semi_localise(e, chi, chi), chi)


def test_identity_unitary_with_commuting_algebras():
    left = algebra_otimes()
    assert heisenberg_semicausal(np.eye(4), left, commutant(left))


def test_semicausality_survives_coarser_target():
    e = channel_from_kraus(product_channel_kraus(), 4, 4)
    chi_a = chi_tensor(2, 2)
    big = algebra_otimes()
    small = generate_algebra([np.kron(np.diag([1.0, -1.0]), np.eye(2))], 4)
    nc = comprehension_nested_canonical(small, big)
    assert verify_comprehension(nc.zeta, nc.chi, nc.witness)
    assert schroedinger_semicausal(e, chi_a, nc.chi) is not None
    assert schroedinger_semicausal(e, chi_a, nc.zeta) is not None


@pytest.mark.parametrize("case", ["product", "conditional"])
def test_algebraic_and_splitting_map_conditions_agree(case):
    rng = np.random.default_rng(8)
    if case == "product":
        e, chi = channel_from_kraus(product_channel_kraus(), 4, 4), chi_tensor(2, 2)
    else:
        e, chi = _conditional_block_channel(rng), chi_oplus()
    b = strictly_local_algebra(chi, Side.RIGHT)
    aw = aw_decomposition(commutant(b))
    u = trace_equivalence_isometry(chi, b, aw)
    e_tilde = schroedinger_semicausal(e, chi, chi)
    assert e_tilde is not None
    # algebra-trace form: Tr_b(E(rho)) = U^dag E~(U Tr_b(rho) U^dag) U
    for i in range(4):
        for j in range(4):
            rho = np.zeros((4, 4), dtype=complex)
            rho[i, j] = 1
            lhs = trace_over_algebra(e(rho), b, aw)
            rhs = u.conj().T @ e_tilde(u @ trace_over_algebra(rho, b, aw) @ u.conj().T) @ u
            assert np.allclose(lhs, rhs, atol=1e-9)
