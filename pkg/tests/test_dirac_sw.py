import json

import numpy as np
import pytest

from g2calib import dirac_sw as ds
from g2calib.quat_oct import UNITS, left_matrix, right_matrix


@pytest.fixture
def rng():
    return np.random.default_rng(11)


# --- sections ---------------------------------------------------------------

def test_grid_roundtrip_and_parseval(rng):
    f = ds.FourierSection.random(3, (2,), rng)
    N = 11
    g = f.to_grid(N)
    assert np.allclose(ds.FourierSection.from_grid(g, 3).coeffs, f.coeffs)
    assert np.isclose(np.mean(np.sum(np.abs(g) ** 2, axis=-1)), f.norm() ** 2)


def test_real_sections(rng):
    f = ds.FourierSection.random(2, (3,), rng, real=True)
    assert f.symmetry_defect() < 1e-15
    assert np.isrealobj(f.to_grid(7))


def test_product_is_exact_galerkin(rng):
    # oracle: the full product on a fine grid, truncated afterwards
    f = ds.FourierSection.random(2, (), rng)
    g = ds.FourierSection.random(2, (), rng)
    fine = ds.FourierSection.from_grid(f.to_grid(16) * g.to_grid(16), 2)
    assert np.allclose(ds.product(f, g, np.multiply).coeffs, fine.coeffs, atol=1e-14)


def test_resize(rng):
    f = ds.FourierSection.random(1, (2,), rng)
    assert np.allclose(f.resize(3).resize(1).coeffs, f.coeffs)
    assert f.resize(3).band() == 1


def test_section_errors():
    with pytest.raises(ValueError):
        ds.FourierSection(2, np.zeros((4, 4, 4)))
    a, b = ds.FourierSection.zeros(1, (2,)), ds.FourierSection.zeros(2, (2,))
    with pytest.raises(ValueError, match="cutoff"):
        a + b
    with pytest.raises(ValueError):
        a.to_grid(2)


def test_vector_calculus_identities(rng):
    f = ds.FourierSection.random(2, (), rng, real=True)
    a = ds.FourierSection.random(2, (3,), rng, real=True)
    assert ds.curl(ds.gradient(f)).norm() < 1e-12
    assert ds.divergence(ds.curl(a)).norm() < 1e-12


# --- Dirac ------------------------------------------------------------------

@pytest.mark.parametrize("a0", [(0, 0, 0), (np.pi, 0, 0), (0.3, -1.2, 2.2)])
def test_flat_spectrum(a0):
    D = ds.build_dirac(2, ds.Connection.flat(2, a0))
    ev = np.sort(D.spectrum().ravel())
    assert np.allclose(ev, ds.flat_spectrum_oracle(2, a0), atol=1e-10)
    assert D.hermitian_defect() < 1e-12


def test_so4_flat_spectrum():
    a0 = (0.4, 0.1, -0.7)
    D = ds.build_dirac(1, ds.Connection.flat(1, a0, "so4"))
    assert np.allclose(np.sort(D.spectrum().ravel()), ds.flat_spectrum_oracle(1, a0, 2))


def test_mode_blocks_square_to_momentum():
    conn = ds.Connection.flat(1, (0.2, 0.3, 0.4))
    B = ds.mode_blocks(conn)
    p2 = np.sum(ds._momenta(1, conn.holonomy) ** 2, axis=-1)
    assert np.allclose(B @ B, p2[..., None, None] * np.eye(2))


def test_kernel_jumping():
    assert ds.kernel_dim(ds.Connection.flat(2)) == 2
    assert ds.kernel_dim(ds.Connection.flat(2, (1e-3, 0, 0))) == 0
    assert ds.kernel_dim(ds.Connection.flat(2, (np.pi, 0, 0))) == 0
    D = ds.build_dirac(2, ds.Connection.flat(2, (np.pi, 0, 0)))
    assert np.isclose(np.min(np.abs(D.spectrum())), np.pi)


def test_matrix_agrees_with_apply(rng):
    conn = ds.Connection(1, (0.3, 0.1, 0.2), ds.FourierSection.random(1, (3,), rng, 0.5, real=True, mean_zero=True))
    D = ds.DiracOperator(conn)
    v = ds.FourierSection.random(1, (2,), rng)
    assert np.allclose(D.matrix() @ v.coeffs.ravel(), D.apply(v).coeffs.ravel())
    assert D.hermitian_defect() < 1e-12  # real alpha keeps it Hermitian


def test_build_dirac_errors():
    with pytest.raises(ValueError):
        ds.build_dirac(0, ds.Connection.flat(0))
    with pytest.raises(ValueError, match="cutoff"):
        ds.build_dirac(2, ds.Connection.flat(3))
    with pytest.raises(ValueError):
        ds.Connection(1, (0, 0, 0), ds.FourierSection.constant(1, np.ones(3), real=True))


def test_perturbed_dirac(rng):
    K = 2
    A0 = ds.Connection.flat(K, (0.2, 0.1, 0.4))
    v = ds.FourierSection.random(K, (2,), rng)
    zero = ds.FourierSection.zeros(K, (3,), real=True)
    assert np.allclose(ds.perturbed_dirac(v, A0, zero).coeffs, ds.DiracOperator(A0).apply(v).coeffs)
    a1 = ds.FourierSection.random(K, (3,), rng, real=True)
    a2 = ds.FourierSection.random(K, (3,), rng, real=True)
    D0 = ds.DiracOperator(A0).apply(v)
    lhs = ds.perturbed_dirac(v, A0, a1 * 2.0 + a2) - D0
    rhs = (ds.perturbed_dirac(v, A0, a1) - D0) * 2.0 + (ds.perturbed_dirac(v, A0, a2) - D0)
    assert (lhs - rhs).norm() < 1e-12
    with pytest.raises(ValueError):
        ds.perturbed_dirac(v, A0, ds.FourierSection.zeros(K, (3, 2, 3)))


def test_perturbed_dirac_mode_zero_oracle(rng):
    K = 1
    v0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    ab = rng.standard_normal((3, 2, 3))
    out = ds.perturbed_dirac(ds.FourierSection.constant(K, v0), ds.Connection.flat(K, twist="so4"),
                             ds.FourierSection.constant(K, ab, real=True))
    expect = sum(
        left_matrix(UNITS[m]) @ (left_matrix(np.r_[0, ab[m, 0]]) - right_matrix(np.r_[0, ab[m, 1]])) @ v0
        for m in range(3)
    )
    assert np.allclose(out.coeffs[K, K, K], expect)
    assert out.with_mean_zero().norm() < 1e-14


# --- Seiberg-Witten -----------------------------------------------------------

def test_reducible_solution():
    rng = np.random.default_rng(1)
    K = 2
    delta = ds.Perturbation.random_coclosed(K, rng)
    # curl alpha = -delta is solvable for the mean-zero part of delta
    p = ds._momenta(K)
    p2 = np.sum(p**2, axis=-1)
    p2[K, K, K] = 1.0
    c = -delta.delta.coeffs
    alpha = ds.FourierSection(K, 1j * np.cross(p, c) / p2[..., None], True)  # curl curl = -lap on coclosed
    alpha = alpha.with_mean_zero()
    state = ds.SWState(ds.FourierSection.zeros(K, (2,)), ds.Connection(K, (0, 0, 0), alpha))
    res = ds.sw_residual(state, ds.Perturbation(delta.delta.with_mean_zero().realified()))
    assert res.norm() < 1e-12


def test_random_state_has_positive_residual(rng):
    assert ds.sw_residual(ds.SWState.random(2, rng)).norm() > 0


def test_perturbation_must_be_coclosed(rng):
    with pytest.raises(ValueError, match="coclosed"):
        ds.Perturbation(ds.FourierSection.random(2, (3,), rng, real=True))


def test_linearization_matches_finite_differences(rng):
    K, h = 2, 1e-4
    base = ds.SWState.random(K, rng, 0.5, holonomy=(0.1, 0.7, 0.3))
    delta = ds.Perturbation.random_coclosed(K, rng, 0.3)
    lin = ds.sw_linearization(base)
    vd = ds.FourierSection.random(K, (2,), rng)
    ad = ds.FourierSection.random(K, (3,), rng, real=True, mean_zero=True)
    dd = ds.Perturbation.random_coclosed(K, rng).delta
    plus = ds.sw_residual(base.with_fields(base.v + vd * h, base.alpha + ad * h), ds.Perturbation(delta.delta + dd * h))
    minus = ds.sw_residual(base.with_fields(base.v - vd * h, base.alpha - ad * h), ds.Perturbation(delta.delta - dd * h))
    L = lin.apply(vd, ad, dd)
    err = np.hypot(((plus.r1 - minus.r1) * (0.5 / h) - L.r1).norm(), ((plus.r2 - minus.r2) * (0.5 / h) - L.r2).norm())
    assert err / L.norm() < 1e-9


def test_linearization_at_zero_is_uncoupled(rng):
    K = 1
    lin = ds.sw_linearization(ds.SWState.zero(K))
    vd = ds.FourierSection.random(K, (2,), rng)
    out = lin.apply(vd, ds.FourierSection.zeros(K, (3,), real=True))
    assert out.r2.norm() == 0.0
    assert np.allclose(out.r1.coeffs, ds.DiracOperator(ds.Connection.flat(K)).apply(vd).coeffs)


def test_adjoint_identity(rng):
    K = 2
    lin = ds.sw_linearization(ds.SWState.random(K, rng, 0.4))
    vd = ds.FourierSection.random(K, (2,), rng)
    ad = ds.FourierSection.random(K, (3,), rng, real=True, mean_zero=True)
    R = ds.Residual(ds.FourierSection.random(K, (2,), rng), ds.FourierSection.random(K, (3,), rng, real=True))
    L = lin.apply(vd, ad)
    vb, ab = lin.adjoint(R)
    assert np.isclose(L.r1.inner(R.r1) + L.r2.inner(R.r2), vd.inner(vb) + ad.inner(ab), atol=1e-13)


def test_moment_map_is_bilinear_derivative(rng):
    v0 = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
    v1 = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
    from g2calib.spin_reps import mu

    q = lambda v: mu(ds._spinor_to_quat(v))
    h = 1e-5
    fd = (q(v0 + h * v1) - q(v0 - h * v1)) / (2 * h)
    assert np.allclose(fd, ds._bilinear_moment(v0, v1), atol=1e-9)


def test_gauge_action(rng):
    K = 6
    state = ds.SWState.random(1, rng, 0.3).resize(K)
    zero = ds.FourierSection.zeros(K, (), real=True)
    same = ds.gauge_act(zero, state)
    assert np.allclose(same.v.coeffs, state.v.coeffs) and np.allclose(same.alpha.coeffs, state.alpha.coeffs)
    const = ds.gauge_act(ds.FourierSection.constant(K, 0.7, real=True), state)
    assert np.allclose(const.v.coeffs, state.v.coeffs * np.exp(0.7j))
    assert np.allclose(const.alpha.coeffs, state.alpha.coeffs)
    f = ds.FourierSection.random(1, (), rng, 0.2, real=True).resize(K)
    r0 = ds.sw_residual(state).norm()
    assert abs(ds.sw_residual(ds.gauge_act(f, state)).norm() - r0) < 1e-10
    with pytest.raises(ValueError):
        ds.gauge_act(ds.FourierSection.zeros(K, (3,), real=True), state)


def test_gauge_sign_is_pinned(rng):
    K = 6
    state = ds.SWState.random(1, rng, 0.3).resize(K)
    f = ds.FourierSection.random(1, (), rng, 0.2, real=True).resize(K)
    good = ds.gauge_act(f, state)
    bad = good.with_fields(alpha=(good.alpha + ds.gradient(f) * 2.0).realified())
    r0 = ds.sw_residual(state).norm()
    assert abs(ds.sw_residual(bad).norm() - r0) > 1e-3


def test_descent(rng):
    init = ds.SWState.random(2, rng, 0.1, holonomy=(0.5, 0.3, 0.2))
    res = ds.sw_descent(init)
    assert res.converged
    assert all(b <= a for a, b in zip(res.energies, res.energies[1:]))
    assert len(res.trace_rows()) == len(res.energies)


def test_descent_at_reducible_is_stationary():
    state = ds.SWState.zero(2, (0.5, 0.3, 0.2))
    res = ds.sw_descent(state)
    assert res.energies == [0.0] and res.state is state


def test_state_json_roundtrip(rng):
    s = ds.SWState.random(1, rng, holonomy=(0.1, 0.2, 0.3))
    doc = json.loads(s.to_json())
    assert set(doc) == {"cutoff", "holonomy", "modes"}
    t = ds.SWState.from_json(s.to_json())
    assert np.allclose(t.v.coeffs, s.v.coeffs) and np.allclose(t.alpha.coeffs, s.alpha.coeffs)


# --- div-curl and integrability ---------------------------------------------

@pytest.mark.parametrize("K", [1, 2, 3])
def test_div_curl(K, rng):
    assert ds.kernel_cokernel(K) == (4, 4)
    M = ds.div_curl_op(K)
    assert M.shape[0] == M.shape[1]
    f = ds.FourierSection.random(K, (), rng, real=True)
    a = ds.FourierSection.random(K, (3,), rng, real=True)
    x = np.concatenate([f.coeffs[..., None], a.coeffs], axis=-1).ravel()
    y0, y1 = ds.apply_div_curl(f, a)
    assert np.allclose(M @ x, np.concatenate([y0.coeffs[..., None], y1.coeffs], axis=-1).ravel())
    c0, c1 = ds.apply_div_curl(ds.FourierSection.constant(K, 1.0, real=True), ds.FourierSection.zeros(K, (3,), real=True))
    assert c0.norm() == 0 and c1.norm() == 0


def test_integrability_defect():
    K = 1
    j = ds.FourierSection.constant(K, [0.0, 0.0, 1.0], real=True)
    assert ds.integrability_defect(j, ds.Connection.flat(K, twist="so4")) == 0.0
    twist = np.zeros((3, 2, 3))
    twist[1, 1] = [0.5, 0.0, 0.0]
    B = ds.Connection(K, (0, 0, 0), None, "so4", twist)
    assert np.isclose(ds.integrability_defect(j, B), np.linalg.norm(2 * np.cross([0.5, 0, 0], [0, 0, 1])))
    with pytest.raises(ValueError, match="unit"):
        ds.integrability_defect(j * 2.0, B)
    with pytest.raises(ValueError):
        ds.integrability_defect(j, ds.Connection.flat(K))


def test_integrability_equivariance(rng):
    from g2calib.quat_oct import qconj, qmul

    K, N = 3, 7
    u = np.array([0.0, 0.6, 0.8])
    b = rng.standard_normal((3, 3)) * 0.5
    j = rng.standard_normal(3)
    j /= np.linalg.norm(j)
    twist = np.zeros((3, 2, 3))
    twist[:, 1, :] = b
    d0 = ds.integrability_defect(ds.FourierSection.constant(K, j, real=True),
                                 ds.Connection(K, (0, 0, 0), None, "so4", twist))
    x1 = np.broadcast_to((np.arange(N) / N)[:, None, None], (N, N, N))
    lam = np.zeros((N, N, N, 4))
    lam[..., 0] = np.cos(2 * np.pi * x1)
    lam[..., 1:] = np.sin(2 * np.pi * x1)[..., None] * u
    conj = lambda x: qmul(qmul(lam, np.r_[0, x]), qconj(lam))[..., 1:]
    bp = np.zeros((N, N, N, 3, 2, 3))
    for m in range(3):
        bp[..., m, 1, :] = conj(b[m]) - (2 * np.pi * u if m == 0 else 0)
    jF = ds.FourierSection.from_grid(conj(j), K, real=True)
    d1 = ds.integrability_defect(jF, ds.Connection.so4(K, ds.FourierSection.from_grid(bp, K, real=True)))
    assert abs(d0 - d1) < 1e-10
