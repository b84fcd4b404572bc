"""Quaternion arithmetic and the octonion product induced by phi0.

Quaternions are float arrays with last axis (w, x, y, z) = w + xi + yj + zk.
Octonions are arrays with last axis of length 8: the real part followed by
the seven imaginary coordinates on R^7.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .calibration import G2Structure, cross

ONE = np.array([1.0, 0.0, 0.0, 0.0])
I = np.array([0.0, 1.0, 0.0, 0.0])
J = np.array([0.0, 0.0, 1.0, 0.0])
K = np.array([0.0, 0.0, 0.0, 1.0])
UNITS = np.stack([I, J, K])


def quat(w=0.0, x=0.0, y=0.0, z=0.0) -> np.ndarray:
    return np.array([w, x, y, z], dtype=float)


def imag(v) -> np.ndarray:
    """Embed a 3-vector (or stack) as a pure imaginary quaternion."""
    v = np.asarray(v, dtype=float)
    return np.concatenate([np.zeros(v.shape[:-1] + (1,)), v], axis=-1)


def qmul(p, q) -> np.ndarray:
    """Hamilton product, broadcasting over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a1, b1, c1, d1 = np.moveaxis(p, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ],
        axis=-1,
    )


def qconj(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qnorm(q):
    return np.linalg.norm(q, axis=-1)


def qinv(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return qconj(q) / np.sum(q * q, axis=-1, keepdims=True)


def qim(q) -> np.ndarray:
    """Imaginary part, still as a quaternion."""
    q = np.array(q, dtype=float)
    q[..., 0] = 0.0
    return q


def qexp(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    v = q[..., 1:]
    theta = np.linalg.norm(v, axis=-1, keepdims=True)
    sinc = np.sinc(theta / np.pi)  # sin(theta)/theta, finite at 0
    return np.exp(q[..., :1]) * np.concatenate([np.cos(theta), sinc * v], axis=-1)


def left_matrix(q) -> np.ndarray:
    """Real 4x4 matrix of y -> q y."""
    return qmul(q, np.eye(4)).T


def right_matrix(q) -> np.ndarray:
    """Real 4x4 matrix of y -> y q."""
    return qmul(np.eye(4), q).T


def random_unit_quaternions(rng, size=None) -> np.ndarray:
    shape = (4,) if size is None else (size, 4)
    q = rng.standard_normal(shape)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def omul(a, b, s: G2Structure | None = None) -> np.ndarray:
    """(a0, u)(b0, v) = (a0 b0 - <u, v>, a0 v + b0 u + u x v), with x from phi."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, u = a[..., :1], a[..., 1:]
    b0, v = b[..., :1], b[..., 1:]
    g = np.eye(7) if s is None else s.metric
    inner = np.einsum("...a,ab,...b->...", u, g, v)[..., None]
    return np.concatenate([a0 * b0 - inner, a0 * v + b0 * u + cross(u, v, s)], axis=-1)


def oconj(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a[..., 1:] *= -1.0
    return a


def octonion(real=0.0, imag_part=None) -> np.ndarray:
    v = np.zeros(7) if imag_part is None else np.asarray(imag_part, dtype=float)
    return np.concatenate([[real], v])


def basis_octonion(i: int) -> np.ndarray:
    """e_i for i in 1..7 (imaginary unit), or 1 for i = 0."""
    out = np.zeros(8)
    out[i] = 1.0
    return out


def cayley_dickson(x, y) -> np.ndarray:
    """(a, b)(c, d) = (ac - conj(d) b, d a + b conj(c)) on pairs of quaternions."""
    a, b = x[..., :4], x[..., 4:]
    c, d = y[..., :4], y[..., 4:]
    return np.concatenate(
        [qmul(a, c) - qmul(qconj(d), b), qmul(d, a) + qmul(b, qconj(c))], axis=-1
    )


@dataclass(frozen=True)
class Splitting:
    """Identification R^7 = im(H) + H with a sign per basis vector.

    e_1, e_2, e_3 map to signs[0..2] * (i, j, k) in im(H); e_4..e_7 map to
    signs[3..6] * (1, i, j, k) in H.
    """

    signs: tuple[int, ...]
    assoc_basis: tuple[int, ...] = (1, 2, 3)
    quat_basis: tuple[int, ...] = (4, 5, 6, 7)

    def matrix(self) -> np.ndarray:
        """8x8 matrix taking octonion coordinates to Cayley-Dickson pairs (a, b)."""
        P = np.zeros((8, 8))
        P[0, 0] = 1.0
        for slot, idx in enumerate(self.assoc_basis):
            P[1 + slot, idx] = self.signs[slot]
        for slot, idx in enumerate(self.quat_basis):
            P[4 + slot, idx] = self.signs[3 + slot]
        return P

    def to_pair(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.matrix().T

    def from_pair(self, ab) -> np.ndarray:
        return np.asarray(ab, dtype=float) @ self.matrix()

    def im_block(self) -> np.ndarray:
        """7x3: columns are the R^7 vectors corresponding to i, j, k in im(H)."""
        return self.matrix()[1:4, 1:].T

    def quat_block(self) -> np.ndarray:
        """7x4: columns are the R^7 vectors corresponding to 1, i, j, k in H."""
        return self.matrix()[4:8, 1:].T

    def frame(self) -> np.ndarray:
        """7x7 orthogonal matrix [im block | quaternion block]."""
        return np.hstack([self.im_block(), self.quat_block()])


def cayley_dickson_defect(split: Splitting, s: G2Structure | None = None) -> float:
    """Max deviation between the phi-derived product and Cayley-Dickson on basis pairs."""
    P = split.matrix()
    basis = np.eye(8)
    worst = 0.0
    for x, y in itertools.product(basis, repeat=2):
        lhs = P @ omul(x, y, s)
        rhs = cayley_dickson(P @ x, P @ y)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def build_splitting(s: G2Structure | None = None, tol: float = 1e-12) -> Splitting:
    if s is None and tol == 1e-12:
        return _default_splitting()
    return _search_splitting(s, tol)


@lru_cache(maxsize=1)
def _default_splitting() -> Splitting:
    return _search_splitting(None, 1e-12)


def _search_splitting(s: G2Structure | None, tol: float) -> Splitting:
    """Search the 2^7 sign tables for one making the product Cayley-Dickson.

    Among valid tables the one with fewest flips (then lexicographically
    smallest) is returned, and it must fix i, j, k on e_1, e_2, e_3.
    """
    candidates = []
    for flips in itertools.product((1, -1), repeat=7):
        split = Splitting(tuple(flips))
        if cayley_dickson_defect(split, s) <= tol:
            candidates.append(split)
    if not candidates:
        raise ValueError("no sign table makes the phi-derived product Cayley-Dickson")
    candidates.sort(key=lambda sp: (sp.signs[:3] != (1, 1, 1), sp.signs.count(-1), [-x for x in sp.signs]))
    return candidates[0]
