import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from g2calib import quat_oct as qo
from g2calib.spin_reps import su2


def complex_rep(q):
    return su2(q)


def test_unit_relations():
    I, J, K = qo.I, qo.J, qo.K
    assert np.allclose(qo.qmul(I, J), K)
    assert np.allclose(qo.qmul(J, K), I)
    assert np.allclose(qo.qmul(K, I), J)
    for u in (I, J, K):
        assert np.allclose(qo.qmul(u, u), -qo.ONE)


def test_qmul_matches_complex_matrices():
    # oracle: left multiplication as a 2x2 complex matrix is a homomorphism
    rng = np.random.default_rng(0)
    p, q = rng.standard_normal((2, 4))
    assert np.allclose(complex_rep(qo.qmul(p, q)), complex_rep(p) @ complex_rep(q))


def test_qmul_broadcasts():
    rng = np.random.default_rng(1)
    P, Q = rng.standard_normal((2, 5, 4))
    out = qo.qmul(P, Q)
    assert out.shape == (5, 4)
    assert np.allclose(out[3], qo.qmul(P[3], Q[3]))


def test_left_right_matrices_and_inverse():
    rng = np.random.default_rng(2)
    p, y = rng.standard_normal((2, 4))
    assert np.allclose(qo.left_matrix(p) @ y, qo.qmul(p, y))
    assert np.allclose(qo.right_matrix(p) @ y, qo.qmul(y, p))
    assert np.allclose(qo.qmul(p, qo.qinv(p)), qo.ONE)


def test_qexp():
    assert np.allclose(qo.qexp(np.zeros(4)), qo.ONE)
    x = qo.imag([0.0, 0.0, np.pi / 2])
    assert np.allclose(qo.qexp(x), qo.K)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_octonion_norm_and_alternativity(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((2, 8))
    ab = qo.omul(a, b)
    assert np.isclose(ab @ ab, (a @ a) * (b @ b))
    assert np.allclose(qo.omul(qo.omul(a, a), b), qo.omul(a, qo.omul(a, b)), atol=1e-10)
    assert np.allclose(qo.omul(qo.omul(a, b), b), qo.omul(a, qo.omul(b, b)), atol=1e-10)
    assert np.allclose(qo.oconj(ab), qo.omul(qo.oconj(b), qo.oconj(a)))


def test_octonions_not_associative():
    e = qo.basis_octonion
    lhs = qo.omul(qo.omul(e(1), e(2)), e(4))
    rhs = qo.omul(e(1), qo.omul(e(2), e(4)))
    assert not np.allclose(lhs, rhs)


def test_splitting_is_cayley_dickson():
    split = qo.build_splitting()
    assert split.signs[:3] == (1, 1, 1)
    assert qo.cayley_dickson_defect(split) == 0.0
    F = split.frame()
    assert np.allclose(F.T @ F, np.eye(7))


def test_wrong_splitting_detected():
    assert qo.cayley_dickson_defect(qo.Splitting((1,) * 7)) > 0.5


def test_pair_roundtrip():
    split = qo.build_splitting()
    x = np.random.default_rng(3).standard_normal(8)
    assert np.allclose(split.from_pair(split.to_pair(x)), x)


def test_random_unit_quaternions():
    q = qo.random_unit_quaternions(np.random.default_rng(4), 10)
    assert np.allclose(qo.qnorm(q), 1.0)
