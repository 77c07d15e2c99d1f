import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from holojump import core
from holojump.errors import DomainError, ShapeError

from conftest import random_hermitian, random_matrix, random_unitary

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def complex_matrices(n):
    return st.tuples(arrays(float, (n, n), elements=finite),
                     arrays(float, (n, n), elements=finite)).map(lambda t: t[0] + 1j * t[1])


def test_paulis_algebra():
    s1, s2, s3 = (core.pauli(i) for i in (1, 2, 3))
    assert np.allclose(s1 @ s2, 1j * s3)
    assert np.allclose(s1 @ s1, np.eye(2))
    assert np.allclose(core.SIGMA_PLUS @ np.array([0, 1]), [1, 0])
    with pytest.raises(DomainError):
        core.pauli(4)


def test_pauli_returns_copy():
    p = core.pauli(1)
    p[0, 0] = 7
    assert core.SIGMA1[0, 0] == 0


@pytest.mark.parametrize("scale", [1e-6, 1e-2, 0.3, 1.0, 5.0])
def test_matexp_matches_scipy(rng, scale):
    for n in (1, 2, 3, 4, 8):
        a = random_matrix(rng, n, scale)
        ref = scipy.linalg.expm(a)
        assert np.allclose(core.matexp(a), ref, rtol=1e-11, atol=1e-11 * np.abs(ref).max())


@pytest.mark.parametrize("scale", [40.0, 300.0, 5000.0])
def test_matexp_large_antihermitian(rng, scale):
    for n in (2, 4, 8):
        a = -1j * random_hermitian(rng, n, scale)
        assert np.allclose(core.matexp(a), scipy.linalg.expm(a), atol=1e-9 * scale)


def test_matexp_batched(rng):
    stack = np.stack([random_matrix(rng, 3, s) for s in (0.01, 0.5, 3.0)])
    out = core.matexp(stack)
    for a, e in zip(stack, out):
        assert np.allclose(e, scipy.linalg.expm(a), atol=1e-11)


def test_matexp_zero_and_edge():
    assert np.allclose(core.matexp(np.zeros((3, 3))), np.eye(3))
    assert core.matexp(np.zeros((0, 0))).shape == (0, 0)
    with pytest.raises(ShapeError):
        core.matexp(np.zeros((2, 3)))
    with pytest.raises(DomainError):
        core.matexp(np.array([[np.inf, 0], [0, 0]]))


@settings(max_examples=60, deadline=None)
@given(complex_matrices(3))
def test_matexp_inverse_property(a):
    assert np.allclose(core.matexp(a) @ core.matexp(-a), np.eye(3), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(complex_matrices(4))
def test_matexp_of_antihermitian_is_unitary(a):
    h = (a + a.conj().T) / 2
    assert core.is_unitary(core.matexp(-1j * h), 1e-10)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 6, 8])
def test_eig_hermitian_matches_numpy(rng, n):
    for _ in range(5):
        h = random_hermitian(rng, n)
        w, v = core.eig_hermitian(h)
        assert np.allclose(w, np.linalg.eigvalsh(h), atol=1e-12)
        assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-12)
        assert np.allclose(h @ v, v * w, atol=1e-11)


@settings(max_examples=80, deadline=None)
@given(complex_matrices(4))
def test_eig_hermitian_reconstructs(a):
    h = (a + a.conj().T) / 2
    w, v = core.eig_hermitian(h)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(v @ np.diag(w) @ v.conj().T, h, atol=1e-10)


def test_eig_hermitian_degenerate_and_tiny():
    h = np.diag([1.0, 1.0, 2.0]).astype(complex)
    h[0, 1] = h[1, 0] = 1e-300
    w, v = core.eig_hermitian(h)
    assert np.allclose(w, [1, 1, 2])
    assert core.is_unitary(v)


def test_eig_hermitian_rejects_nonhermitian():
    with pytest.raises(DomainError):
        core.eig_hermitian(np.array([[0, 1], [0, 0]]))


def test_cluster_levels():
    assert core.cluster_levels([0.0, 1e-12, 1.0, 2.0, 2.0]) == [[0, 1], [2], [3, 4]]


def test_tensor_and_matmul_shapes():
    assert core.tensor(core.SIGMA1, np.eye(2), core.SIGMA3).shape == (8, 8)
    assert np.allclose(core.tensor(core.SIGMA1, core.SIGMA3), np.kron(core.SIGMA1, core.SIGMA3))
    with pytest.raises(ShapeError):
        core.matmul(np.eye(2), np.eye(3))
    with pytest.raises(ShapeError):
        core.tensor()


def test_trace_distance_against_scipy(rng):
    for n in (2, 4):
        a = random_hermitian(rng, n)
        b = random_hermitian(rng, n)
        ref = 0.5 * np.sum(np.abs(scipy.linalg.eigvalsh(a - b)))
        assert core.trace_distance(a, b) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ShapeError):
        core.trace_distance(np.eye(2), np.eye(3))


def test_trace_distance_orthogonal_pure_states():
    assert core.trace_distance(core.projector([1, 0]), core.projector([0, 1])) == pytest.approx(1.0)


def test_phase_aligned_distance_ignores_global_phase(rng):
    u = random_unitary(rng, 3)
    assert core.phase_aligned_distance(np.exp(0.4j) * u, u) < 1e-13
    assert core.phase_aligned_distance(u, -u) < 1e-13


def test_state_helpers():
    psi = np.array([3, 4j])
    assert core.norm(psi) == pytest.approx(5)
    assert core.norm(core.normalized(psi)) == pytest.approx(1)
    assert np.allclose(core.ket(1, 3), [0, 1, 0])
    with pytest.raises(DomainError):
        core.validate_density(np.array([[1, 1], [0, 0]]))
    with pytest.raises(ShapeError):
        core.as_matrix(np.ones(3))
