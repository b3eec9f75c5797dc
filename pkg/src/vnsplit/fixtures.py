"""Small exact objects used in tests, examples and the ``fixture`` command."""

from __future__ import annotations

import numpy as np

from .errors import UnknownFixture
from .linops import direct_sum
from .splitmap import SplittingMap, make_splitting_map
from .vnalg import VnAlgebra, generate_algebra

__all__ = [
    "unit",
    "ket",
    "chi_tensor",
    "chi_oplus",
    "fg_counterexample",
    "unbalanced_00_10",
    "algebra_otimes",
    "algebra_oplus",
    "entangled_balanced",
    "swap",
    "swap_unitary_kraus",
    "product_channel_kraus",
    "FIXTURES",
    "fixture",
]


def ket(n: int, i: int) -> np.ndarray:
    v = np.zeros(n, dtype=complex)
    v[i] = 1.0
    return v


def unit(n: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((n, n), dtype=complex)
    e[i, j] = 1.0
    return e


def _from_images(images, d_L, d_R) -> SplittingMap:
    return make_splitting_map(np.stack(images, axis=1), d_L, d_R)


def chi_tensor(d_L: int = 2, d_R: int = 3) -> SplittingMap:
    """Identity on ``C^d_L (x) C^d_R`` viewed as a splitting map."""
    return make_splitting_map(np.eye(d_L * d_R), d_L, d_R)


def chi_oplus(d1: int = 2, d2: int = 2) -> SplittingMap:
    """``x1 (+) x2 -> x1 (x) |e1> + |e2> (x) x2`` into ``(C^d1 (+) C) (x) (C (+) C^d2)``."""
    d_L, d_R = d1 + 1, d2 + 1
    images = [np.kron(ket(d_L, i), ket(d_R, 0)) for i in range(d1)]
    images += [np.kron(ket(d_L, d1), ket(d_R, 1 + j)) for j in range(d2)]
    return _from_images(images, d_L, d_R)


def fg_counterexample() -> SplittingMap:
    """``C^2 -> C^4 (x) C^4`` with ``|0> -> (|00>+|11>)/sqrt2`` and ``|1> -> (|20>+|33>)/sqrt2``."""
    k = lambda a, b: np.kron(ket(4, a), ket(4, b))
    s = 1 / np.sqrt(2)
    return _from_images([s * (k(0, 0) + k(1, 1)), s * (k(2, 0) + k(3, 3))], 4, 4)


def unbalanced_00_10() -> SplittingMap:
    """``C^2 -> C^2 (x) C^2`` with ``|0> -> |00>`` and ``|1> -> |10>``."""
    return _from_images([np.kron(ket(2, 0), ket(2, 0)), np.kron(ket(2, 1), ket(2, 0))], 2, 2)


def entangled_balanced() -> SplittingMap:
    """``C^2 -> C^4 (x) C^2`` with ``|l> -> sum_m |l,m> (x) |m> / sqrt2``.

    Balanced but not lean: the left leg carries half of a Bell pair.
    """
    s = 1 / np.sqrt(2)
    images = [s * sum(np.kron(ket(4, 2 * l + m), ket(2, m)) for m in range(2)) for l in range(2)]
    return _from_images(images, 4, 2)


def algebra_otimes_generators(d1: int = 2, d2: int = 2) -> list[np.ndarray]:
    return [np.kron(unit(d1, i, j), np.eye(d2)) for i in range(d1) for j in range(d1)]


def algebra_oplus_generators(d1: int = 2, d2: int = 2) -> list[np.ndarray]:
    return [direct_sum(unit(d1, i, j), np.zeros((d2, d2))) for i in range(d1) for j in range(d1)]


def algebra_otimes(d1: int = 2, d2: int = 2) -> VnAlgebra:
    """``L(C^d1) (x) 1`` on ``C^d1 (x) C^d2``."""
    return generate_algebra(algebra_otimes_generators(d1, d2), d1 * d2)


def algebra_oplus(d1: int = 2, d2: int = 2) -> VnAlgebra:
    """``L(C^d1) (+) C 1`` on ``C^d1 (+) C^d2``."""
    return generate_algebra(algebra_oplus_generators(d1, d2), d1 + d2)


def swap(d: int = 2) -> np.ndarray:
    s = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            s[j * d + i, i * d + j] = 1.0
    return s


def swap_unitary_kraus(d: int = 2) -> list[np.ndarray]:
    return [swap(d)]


def amplitude_damping(gamma: float) -> list[np.ndarray]:
    return [
        np.array([[1, 0], [0, np.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def depolarizing(p: float) -> list[np.ndarray]:
    paulis = [
        np.eye(2),
        np.array([[0, 1], [1, 0]]),
        np.array([[0, -1j], [1j, 0]]),
        np.diag([1, -1]),
    ]
    weights = [1 - 3 * p / 4] + [p / 4] * 3
    return [np.sqrt(w) * np.asarray(s, dtype=complex) for w, s in zip(weights, paulis)]


def product_channel_kraus() -> list[np.ndarray]:
    """Amplitude damping (0.3) on the left qubit, depolarising (0.2) on the right."""
    return [np.kron(a, b) for a in amplitude_damping(0.3) for b in depolarizing(0.2)]


def _splitting_doc(chi: SplittingMap) -> dict:
    return {"kind": "splitting_map", "value": chi}


def _algebra_doc(gens, dim) -> dict:
    return {"kind": "algebra", "value": (dim, gens)}


def _channel_doc(kraus, d_in, d_out) -> dict:
    return {"kind": "channel", "value": (d_in, d_out, kraus)}


FIXTURES = {
    "chi-tensor": lambda: _splitting_doc(chi_tensor()),
    "chi-oplus": lambda: _splitting_doc(chi_oplus()),
    "fg-counterexample": lambda: _splitting_doc(fg_counterexample()),
    "unbalanced-00-10": lambda: _splitting_doc(unbalanced_00_10()),
    "entangled-balanced": lambda: _splitting_doc(entangled_balanced()),
    "algebra-otimes": lambda: _algebra_doc(algebra_otimes_generators(), 4),
    "algebra-oplus": lambda: _algebra_doc(algebra_oplus_generators(), 4),
    "swap-unitary": lambda: _channel_doc(swap_unitary_kraus(), 4, 4),
    "product-channel": lambda: _channel_doc(product_channel_kraus(), 4, 4),
}


def fixture(name: str) -> dict:
    """``{"kind": ..., "value": ...}`` for a named fixture."""
    try:
        return FIXTURES[name]()
    except KeyError:
        raise UnknownFixture(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
