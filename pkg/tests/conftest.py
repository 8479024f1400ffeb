"""Shared model fixtures and random-state helpers."""

import numpy as np
import pytest

from qlyap import ControlLaw, SystemModel


def random_state(rng, n):
    """A Haar-ish random unit vector in C^n."""
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_hermitian(rng, n, traceless=False):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = 0.5 * (a + a.conj().T)
    if traceless:
        h = h - (np.trace(h).real / n) * np.eye(n)
    return h


def qubit_model(k=1.0):
    return SystemModel(
        free_hamiltonian=np.diag([1.0, -1.0]).astype(complex),
        controls=(np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),),
        observable=np.diag([1.0, -1.0]).astype(complex),
        target=np.array([0.0, 1.0], dtype=complex),
        measurement_strength=k,
    )


def qutrit_model(k=1.0):
    h1 = np.array(
        [[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]], dtype=complex
    )
    h2 = np.array(
        [[0.0, -1.0j, 0.5j], [1.0j, 0.0, 0.0], [-0.5j, 0.0, 0.0]], dtype=complex
    )
    return SystemModel(
        free_hamiltonian=np.diag([2.0, -1.0, -1.0]).astype(complex),
        controls=(h1, h2),
        observable=np.diag([1.0, 0.0, -1.0]).astype(complex),
        target=np.array([1.0, 0.0, 0.0], dtype=complex),
        measurement_strength=k,
    )


def _coupling(n, i, j, value):
    h = np.zeros((n, n), dtype=complex)
    h[i, j] = value
    h[j, i] = np.conj(value)
    return h


def four_level_model():
    """n = 4 with three controls coupling the target to each orthogonal axis."""
    return SystemModel(
        free_hamiltonian=np.diag([3.0, -1.0, -1.0, -1.0]).astype(complex),
        controls=(
            _coupling(4, 0, 1, 1.0),
            _coupling(4, 0, 2, 1.0j),
            _coupling(4, 0, 3, 1.0),
        ),
        observable=np.diag([1.0, 0.0, 0.0, -1.0]).astype(complex),
        target=np.array([1.0, 0.0, 0.0, 0.0], dtype=complex),
        measurement_strength=1.0,
    )


def four_level_deficient_model():
    """Same system but the third control couples 2<->3 instead of 1<->4.

    The target then decouples from axis 4: the escape matrix drops to rank
    2, control 3 leaves the target fixed, and e_4 is a simultaneous
    eigenvector of every generator (a genuinely stuck orthogonal state).
    """
    return SystemModel(
        free_hamiltonian=np.diag([3.0, -1.0, -1.0, -1.0]).astype(complex),
        controls=(
            _coupling(4, 0, 1, 1.0),
            _coupling(4, 0, 2, 1.0j),
            _coupling(4, 1, 2, 1.0),
        ),
        observable=np.diag([1.0, 0.0, 0.0, -1.0]).astype(complex),
        target=np.array([1.0, 0.0, 0.0, 0.0], dtype=complex),
        measurement_strength=1.0,
    )


QUBIT_PSI0 = np.array([0.6, 0.8], dtype=complex)
QUTRIT_PSI0 = np.array([0.36 + 0.48j, 0.8, 0.0], dtype=complex)


@pytest.fixture
def qubit():
    return qubit_model(), ControlLaw(gains=(1.0,))


@pytest.fixture
def qutrit():
    return qutrit_model(), ControlLaw(gains=(1.0, 1.0))


@pytest.fixture
def four_level():
    return four_level_model(), ControlLaw(gains=(1.0, 1.0, 1.0))


@pytest.fixture
def four_level_deficient():
    return four_level_deficient_model(), ControlLaw(gains=(1.0, 1.0, 1.0))
