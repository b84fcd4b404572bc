import warnings

import numpy as np
import pytest

from g2calib import calibration as cal
from g2calib import grassmann as gr
from g2calib.quat_oct import qconj


def test_plane_validation_and_serialization():
    with pytest.raises(ValueError):
        gr.OrientedPlane3(np.ones((7, 3)))
    L = gr.random_plane(0)
    assert np.allclose(gr.OrientedPlane3.from_list(L.to_list()).frame, L.frame)
    assert len(L.to_list()) == 21
    C = L.complement()
    assert np.allclose(np.hstack([L.frame, C]).T @ np.hstack([L.frame, C]), np.eye(7))


def test_standard_planes():
    L = gr.OrientedPlane3.span(1, 2, 3)
    assert np.isclose(gr.calibration_value(L), 1.0)
    assert gr.chi_defect(L) == 0.0
    assert np.isclose(gr.calibration_value(L.flipped()), -1.0)
    assert np.isclose(gr.chi_defect(gr.OrientedPlane3.span(1, 2, 4)), 2.0)


def test_flipped_plane_is_associative_for_chi():
    # chi vanishes on anti-calibrated planes too
    L = gr.OrientedPlane3.span(1, 2, 3).flipped()
    assert gr.chi_defect(L) < 1e-14


def test_associator_equality_on_planes():
    rng = np.random.default_rng(1)
    for _ in range(20):
        L = gr.random_plane(rng)
        assert np.isclose(gr.calibration_value(L) ** 2 + gr.chi_defect(L) ** 2 / 4, 1.0)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    F = gr.random_plane(rng).frame
    f, G = gr.chi_sq_gradient(F)
    Z = rng.standard_normal((7, 3))
    h = 1e-6
    fd = (gr.chi_sq_gradient(F + h * Z)[0] - gr.chi_sq_gradient(F - h * Z)[0]) / (2 * h)
    assert np.isclose(fd, np.sum(G * Z), rtol=1e-7)


def test_jacobian_matches_finite_differences():
    L = gr.OrientedPlane3.span(1, 2, 3)
    N = L.complement()
    J = gr.chi_jacobian(L)
    rng = np.random.default_rng(3)
    B = rng.standard_normal((3, 4))
    h = 1e-6
    F = L.frame
    Z = N @ B.T
    c = lambda M: N.T @ cal.chi(M[:, 0], M[:, 1], M[:, 2])
    fd = (c(F + h * Z) - c(F - h * Z)) / (2 * h)
    assert np.allclose(fd, J @ B.ravel(), atol=1e-8)


def test_projection_flow_converges():
    rng = np.random.default_rng(4)
    start = gr.plane_at_defect(gr.random_associative_plane(rng), 0.3, rng)
    assert np.isclose(gr.chi_defect(start), 0.3)
    plane, info = gr.project_to_associative(start, full_output=True)
    assert gr.chi_defect(plane) < 1e-8
    assert all(b <= a for a, b in zip(info["trace"], info["trace"][1:]))
    assert gr.dchi_rank(plane) == 4


def test_projection_flow_failure():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with pytest.raises(gr.ConvergenceError) as err:
            gr.project_to_associative(gr.OrientedPlane3.span(1, 2, 4), max_iter=20)
    assert err.value.iterations == 20
    assert np.isclose(err.value.defect, 2.0)


def test_basin_warning():
    with pytest.warns(RuntimeWarning, match="basin"):
        with pytest.raises(gr.ConvergenceError):
            gr.project_to_associative(gr.OrientedPlane3.span(1, 2, 4), max_iter=1)


def test_dchi_rank_requires_associative():
    with pytest.raises(ValueError):
        gr.dchi_rank(gr.OrientedPlane3.span(1, 2, 4))


def test_adapted_frame_is_g2():
    rng = np.random.default_rng(5)
    L = gr.random_associative_plane(rng)
    A = gr.adapted_frame(L)
    assert gr.is_g2_frame(A)
    with pytest.raises(ValueError):
        gr.adapted_frame(gr.random_plane(rng))


def test_beta_kernel_is_tangent_space_of_associatives():
    from scipy.linalg import null_space

    rng = np.random.default_rng(6)
    L = gr.random_associative_plane(rng)
    A = gr.adapted_frame(L)
    J = gr.chi_jacobian(L, A[:, 3:])
    kb = null_space(gr.beta_matrix())
    assert kb.shape[1] == 8
    assert gr.subspace_distance(null_space(J), kb) < 1e-10


def test_tangent_beta_validates():
    L = gr.OrientedPlane3.span(1, 2, 3)
    B = np.zeros((3, 4))
    B[0, 1] = 1.0
    assert np.allclose(gr.tangent_beta(L, B), gr.beta_matrix() @ B.ravel())
    with pytest.raises(ValueError):
        gr.tangent_beta(L, np.zeros((4, 3)))
    with pytest.raises(ValueError):
        gr.tangent_beta(L, B, frame=np.eye(7)[:, ::-1])


def test_pi_phi():
    P = gr.pi_phi_matrix()
    C = gr.clifford_matrix()
    assert np.allclose(P @ P, P)
    assert np.allclose(P, P.T)
    assert np.isclose(np.trace(P), 8.0)
    assert np.allclose(C @ P, 0)
    with pytest.raises(ValueError):
        gr.clifford_c(np.ones(3), np.ones(4), side="x")


def test_beta_to_clifford_is_conjugation():
    B = np.arange(12.0).reshape(3, 4)
    assert np.allclose(gr.beta_to_clifford(B), qconj(B))
