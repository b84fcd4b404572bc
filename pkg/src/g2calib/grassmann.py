"""Oriented 3-planes in R^7 and the associative locus.

Planes are orthonormal 7x3 frames; the orientation is the column order.
Tangent vectors to G(3,7) at a plane are 3x4 matrices B in an adapted frame:
row m is the velocity of the m-th frame vector, written in the complement basis.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import calibration as cal
from .calibration import G2Structure
from .quat_oct import UNITS, Splitting, build_splitting, qconj, qmul

ORTHO_TOL = 1e-10
BASIN = 0.5


class ConvergenceError(RuntimeError):
    """Projection flow did not reach tolerance; carries the best iterate."""

    def __init__(self, message, best, defect, iterations):
        super().__init__(message)
        self.best = best
        self.defect = defect
        self.iterations = iterations


def _orthonormal(frame: np.ndarray, tol: float = ORTHO_TOL) -> np.ndarray:
    frame = np.asarray(frame, dtype=float)
    if frame.shape != (7, 3):
        raise ValueError(f"frame must be 7x3, got {frame.shape}")
    err = np.max(np.abs(frame.T @ frame - np.eye(3)))
    if not err <= tol:
        raise ValueError(f"frame is not orthonormal (deviation {err:.3e})")
    return frame


@dataclass(frozen=True, eq=False)
class OrientedPlane3:
    frame: np.ndarray

    def __post_init__(self):
        frame = np.array(_orthonormal(self.frame))
        frame.setflags(write=False)
        object.__setattr__(self, "frame", frame)

    @classmethod
    def span(cls, *indices: int) -> "OrientedPlane3":
        """Coordinate plane span(e_i, e_j, e_k), 1-based."""
        return cls(np.eye(7)[:, [i - 1 for i in indices]])

    def flipped(self) -> "OrientedPlane3":
        return OrientedPlane3(self.frame[:, [1, 0, 2]])

    def projector(self) -> np.ndarray:
        return self.frame @ self.frame.T

    def complement(self) -> np.ndarray:
        """An orthonormal 7x4 basis of the orthogonal complement."""
        u, _, _ = np.linalg.svd(self.frame, full_matrices=True)
        return u[:, 3:]

    def to_list(self) -> list[float]:
        """21 reals, column-major."""
        return self.frame.T.ravel().tolist()

    @classmethod
    def from_list(cls, values) -> "OrientedPlane3":
        values = np.asarray(values, dtype=float)
        if values.shape != (21,):
            raise ValueError("a plane serializes to exactly 21 numbers")
        return cls(values.reshape(3, 7).T)


def _frame_of(L) -> np.ndarray:
    if isinstance(L, OrientedPlane3):
        return L.frame
    return _orthonormal(L)


def qr_retract(M: np.ndarray) -> np.ndarray:
    """Thin QR with a positive diagonal in R, so the orientation is kept."""
    Q, R = np.linalg.qr(M)
    return Q * np.sign(np.diag(R))


def calibration_value(L, s: G2Structure | None = None) -> float:
    F = _frame_of(L)
    return float(cal.phi_value(F[:, 0], F[:, 1], F[:, 2], s))


def chi_vector(L, s: G2Structure | None = None) -> np.ndarray:
    F = _frame_of(L)
    return cal.chi(F[:, 0], F[:, 1], F[:, 2], s)


def chi_defect(L, s: G2Structure | None = None) -> float:
    return float(np.linalg.norm(chi_vector(L, s)))


def random_plane(seed=None) -> OrientedPlane3:
    """O(7)-invariant random plane: Gaussian 7x3 matrix, then positive-diagonal QR."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return OrientedPlane3(qr_retract(rng.standard_normal((7, 3))))


def random_tangent(L, scale: float, rng) -> np.ndarray:
    """Horizontal tangent (7x3, orthogonal to the plane) with Frobenius norm ``scale``."""
    F = _frame_of(L)
    Z = rng.standard_normal((7, 3))
    Z -= F @ (F.T @ Z)
    return scale * Z / np.linalg.norm(Z)


def chi_sq_gradient(F: np.ndarray) -> tuple[float, np.ndarray]:
    """|chi(F)|^2 and its Euclidean gradient with respect to the 7x3 frame."""
    s = G2Structure.default()
    c = cal.chi(F[:, 0], F[:, 1], F[:, 2], s)
    T = cal.CHI_SCALE * s.star_tensor
    G = np.empty((7, 3))
    G[:, 0] = 2 * np.einsum("abcd,b,c,d->a", T, F[:, 1], F[:, 2], c)
    G[:, 1] = 2 * np.einsum("abcd,a,c,d->b", T, F[:, 0], F[:, 2], c)
    G[:, 2] = 2 * np.einsum("abcd,a,b,d->c", T, F[:, 0], F[:, 1], c)
    return float(c @ c), G


def riemannian_gradient(F: np.ndarray) -> tuple[float, np.ndarray]:
    f, G = chi_sq_gradient(F)
    return f, G - F @ (F.T @ G)


def project_to_associative(
    L0,
    step: float = 0.05,
    tol: float = 1e-8,
    max_iter: int = 500,
    basin: float = BASIN,
    armijo: float = 1e-4,
    full_output: bool = False,
):
    """Riemannian gradient descent of |chi|^2 on G(3,7) with backtracking.

    Every accepted step lowers |chi|^2 (Armijo condition). The trial step
    doubles after an acceptance and halves on rejection.

    Parameters
    ----------
    L0 : OrientedPlane3
        Starting plane, expected within ``basin`` of the associative locus.
    step : float
        Initial trial step length.
    tol : float
        Stop once ``chi_defect < tol``.
    max_iter : int
        Number of gradient steps before giving up.
    full_output : bool
        If True also return a dict with ``iterations`` and the defect ``trace``.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` steps; ``best`` holds the lowest-defect plane seen.
    """
    F = _frame_of(L0).copy()
    f, grad = riemannian_gradient(F)
    if np.sqrt(f) >= basin:
        warnings.warn(
            f"starting defect {np.sqrt(f):.3f} is outside the basin {basin}", RuntimeWarning
        )
    trace = [np.sqrt(f)]
    t = step
    it = 0
    while np.sqrt(f) >= tol:
        if it >= max_iter:
            raise ConvergenceError(
                f"no convergence after {max_iter} iterations (defect {np.sqrt(f):.3e})",
                OrientedPlane3(F),
                float(np.sqrt(f)),
                it,
            )
        it += 1
        gnorm2 = float(np.sum(grad * grad))
        while True:
            F_new = qr_retract(F - t * grad)
            f_new, grad_new = riemannian_gradient(F_new)
            if f_new <= f - armijo * t * gnorm2:
                break
            t *= 0.5
            if t < 1e-20:
                F_new, f_new, grad_new = F, f, grad
                break
        F, f, grad = F_new, f_new, grad_new
        trace.append(np.sqrt(f))
        t = min(2.0 * t, 1.0)
    plane = OrientedPlane3(F)
    if full_output:
        return plane, {"iterations": it, "trace": trace, "defect": float(np.sqrt(f))}
    return plane


def chi_jacobian(L, complement: np.ndarray | None = None) -> np.ndarray:
    """4x12 derivative of chi along tangent B (flattened row-major), in complement coordinates."""
    F = _frame_of(L)
    N = L.complement() if complement is None and isinstance(L, OrientedPlane3) else complement
    if N is None:
        N = OrientedPlane3(F).complement()
    cols = []
    for m in range(3):
        for a in range(4):
            total = np.zeros(7)
            args = [F[:, 0], F[:, 1], F[:, 2]]
            args[m] = N[:, a]
            total += cal.chi(*args)
            cols.append(N.T @ total)
    return np.array(cols).T


def dchi_rank(L, assoc_tol: float = 1e-8, sv_tol: float = 1e-8) -> int:
    """Numerical rank of the chi-section derivative at an associative plane."""
    d = chi_defect(L)
    if not d < assoc_tol:
        raise ValueError(f"plane is not associative (chi defect {d:.3e})")
    sv = np.linalg.svd(chi_jacobian(L), compute_uv=False)
    return int(np.sum(sv > sv_tol))


def adapted_frame(L, split: Splitting | None = None, tol: float = 1e-7) -> np.ndarray:
    """7x7 frame [f1 f2 f3 | n0 n1 n2 n3] that is the G2 image of the splitting frame.

    n0 is a unit normal and n_a = f_a x n0 mirrors (u_a, 0)(0, 1) = (0, u_a).
    Requires an associative plane with f3 = f1 x f2.
    """
    split = build_splitting() if split is None else split
    F = _frame_of(L)
    f1, f2, f3 = F.T
    if np.linalg.norm(cal.cross(f1, f2) - f3) > tol:
        raise ValueError("plane frame is not adapted: f3 != f1 x f2 (not associative)")
    P = np.eye(7) - F @ F.T
    # deterministic choice of the first normal: the best-resolved projected axis
    k = int(np.argmax(np.linalg.norm(P[:, 3:], axis=0))) + 3
    n0 = P[:, k] / np.linalg.norm(P[:, k])
    S = split.frame()
    # the splitting frame itself satisfies h_a = m_a x h0; copy that pattern
    signs = [float(S[:, 4 + a] @ cal.cross(S[:, a], S[:, 3])) for a in range(3)]
    cols = [f1, f2, f3, n0] + [signs[a] * cal.cross(F[:, a], n0) for a in range(3)]
    return np.column_stack(cols)


def is_g2_frame(A: np.ndarray, split: Splitting | None = None, tol: float = 1e-8) -> bool:
    """True if A = G S for some G in G2, S the splitting frame."""
    split = build_splitting() if split is None else split
    G = A @ split.frame().T
    if np.max(np.abs(G.T @ G - np.eye(7))) > tol:
        return False
    T = G2Structure.default().phi_tensor
    pulled = np.einsum("abc,ai,bj,ck->ijk", T, G, G, G)
    return bool(np.max(np.abs(pulled - T)) <= tol)


def tangent_vector(L, B, split: Splitting | None = None) -> np.ndarray:
    """7x3 frame velocity for the adapted tangent coordinates B (3x4)."""
    A = adapted_frame(L, split)
    return A[:, 3:] @ np.asarray(B, dtype=float).T


def tangent_beta(L, B, split: Splitting | None = None, frame: np.ndarray | None = None) -> np.ndarray:
    """beta_1 i + beta_2 j + beta_3 k, where beta_m is row m of B read as a quaternion."""
    split = build_splitting() if split is None else split
    if frame is None:
        adapted_frame(L, split)
    else:
        F = _frame_of(L)
        frame = np.asarray(frame, dtype=float)
        if not (np.allclose(frame[:, :3], F, atol=1e-10) and is_g2_frame(frame, split)):
            raise ValueError("supplied frame is not adapted to the plane and splitting")
    B = np.asarray(B, dtype=float)
    if B.shape != (3, 4):
        raise ValueError(f"tangent must be 3x4, got {B.shape}")
    return np.sum(qmul(B, UNITS), axis=0)


def beta_matrix() -> np.ndarray:
    """4x12 matrix of B -> beta_1 i + beta_2 j + beta_3 k (B flattened row-major)."""
    cols = []
    for m in range(3):
        for a in range(4):
            b = np.zeros(4)
            b[a] = 1.0
            cols.append(qmul(b, UNITS[m]))
    return np.array(cols).T


# Clifford multiplication Xi^* x V -> V and the projection onto its kernel.
# A covector a = (a1, a2, a3) is the imaginary quaternion a1 i + a2 j + a3 k.


def clifford_c(a, v, side: str = "+") -> np.ndarray:
    """-conj(a) v on V+, a v on V-; a is a 3-vector or a stack of them."""
    a = np.asarray(a, dtype=float)
    aq = np.concatenate([np.zeros(a.shape[:-1] + (1,)), a], axis=-1)
    if side == "+":
        return -qmul(qconj(aq), v)
    if side == "-":
        return qmul(aq, v)
    raise ValueError(f"side must be '+' or '-', got {side!r}")


def clifford_sum(elements, side: str = "+") -> np.ndarray:
    """c applied to sum_k a^k (x) v^k, given as a (3, 4) array of v_m = coefficient of e^m."""
    V = np.asarray(elements, dtype=float)
    return sum(clifford_c(np.eye(3)[m], V[m], side) for m in range(3))


def pi_phi(elements) -> np.ndarray:
    """pi(a (x) v) = a (x) v + (1/3) sum_j e^j (x) e^j.(a.v), extended linearly.

    ``elements`` is a (..., 3, 4) array: row m holds the H-coefficient of e^m.
    """
    V = np.asarray(elements, dtype=float)
    av = sum(clifford_c(np.eye(3)[m], V[..., m, :]) for m in range(3))
    out = V.copy()
    for j in range(3):
        out[..., j, :] += clifford_c(np.eye(3)[j], av) / 3.0
    return out


def clifford_matrix() -> np.ndarray:
    """4x12 matrix of c on Xi^* (x) V (flattened row-major)."""
    return np.array([clifford_sum(E.reshape(3, 4)) for E in np.eye(12)]).T


def pi_phi_matrix() -> np.ndarray:
    return np.array([pi_phi(E.reshape(3, 4)).ravel() for E in np.eye(12)]).T


def beta_to_clifford(B) -> np.ndarray:
    """Adapted identification of Grassmann tangents with Xi^* (x) V.

    V carries the coordinate y = conj(b), b the Cayley-Dickson coordinate;
    in it SO(4) acts by y -> q y lambda^{-1}.
    """
    return qconj(np.asarray(B, dtype=float))


def random_associative_plane(rng, scale: float = 3.0) -> OrientedPlane3:
    """G . span(e1, e2, e3) for G = exp of a random element of the g2 algebra."""
    from .spin_reps import random_g2

    G = random_g2(rng, scale)
    return OrientedPlane3(G[:, :3])


def plane_at_defect(L, defect: float, rng, max_scale: float = 3.0) -> OrientedPlane3:
    """Move from an associative plane along a random horizontal direction until chi_defect = defect."""
    from scipy.optimize import brentq

    F = _frame_of(L)
    Z = random_tangent(L, 1.0, rng)

    def gap(t):
        return chi_defect(qr_retract(F + t * Z)) - defect

    ts = np.linspace(0.0, max_scale, 61)
    vals = [gap(t) for t in ts]
    for a, b, fa, fb in zip(ts, ts[1:], vals, vals[1:]):
        if fa < 0 <= fb:
            return OrientedPlane3(qr_retract(F + brentq(gap, a, b, xtol=1e-14) * Z))
    raise ValueError(f"defect {defect} not reached along the sampled direction")


def subspace_distance(U, V) -> float:
    """Spectral norm of the difference of orthogonal projectors onto span(U), span(V)."""
    Qu = np.linalg.qr(np.asarray(U, dtype=float))[0]
    Qv = np.linalg.qr(np.asarray(V, dtype=float))[0]
    if Qu.shape[1] != Qv.shape[1]:
        return 1.0
    return float(np.linalg.norm(Qu @ Qu.T - Qv @ Qv.T, 2))
