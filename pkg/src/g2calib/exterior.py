"""Exterior algebra on R^n with coefficient tables over increasing multi-indices.

Index tuples are 1-based, so ``KForm(7, 3, {(1, 2, 3): 1.0})`` is e^{123}.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


def perm_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq``; 0 if an entry repeats."""
    if len(set(seq)) != len(seq):
        return 0
    inversions = sum(1 for a, b in itertools.combinations(seq, 2) if a > b)
    return -1 if inversions % 2 else 1


def multi_indices(n: int, k: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(1, n + 1), k))


@dataclass(frozen=True)
class KForm:
    """Constant-coefficient k-form on R^n."""

    n: int
    k: int
    coeffs: Mapping[tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"negative degree {self.k}")
        clean = {}
        for idx, c in self.coeffs.items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != self.k:
                raise ValueError(f"index {idx} does not have length {self.k}")
            if any(i < 1 or i > self.n for i in idx):
                raise ValueError(f"index {idx} out of range for n={self.n}")
            if any(a >= b for a, b in zip(idx, idx[1:])):
                raise ValueError(f"index {idx} is not strictly increasing")
            if c != 0:
                clean[idx] = float(c)
        object.__setattr__(self, "coeffs", clean)

    @classmethod
    def from_terms(cls, n: int, k: int, terms: Iterable[tuple[Sequence[int], float]]) -> "KForm":
        """Build from possibly unsorted indices, folding in permutation signs."""
        acc: dict[tuple[int, ...], float] = {}
        for idx, c in terms:
            s = perm_sign(idx)
            if s == 0:
                continue
            key = tuple(sorted(idx))
            acc[key] = acc.get(key, 0.0) + s * c
        return cls(n, k, acc)

    @classmethod
    def basis(cls, n: int, *idx: int) -> "KForm":
        return cls.from_terms(n, len(idx), [(idx, 1.0)])

    @classmethod
    def scalar(cls, n: int, value: float) -> "KForm":
        return cls(n, 0, {(): value})

    @classmethod
    def from_vector(cls, n: int, k: int, vec) -> "KForm":
        idx = multi_indices(n, k)
        return cls(n, k, dict(zip(idx, np.asarray(vec, dtype=float))))

    def to_vector(self) -> np.ndarray:
        """Coefficients in lexicographic order of the increasing multi-indices."""
        return np.array([self.coeffs.get(i, 0.0) for i in multi_indices(self.n, self.k)])

    def __getitem__(self, idx) -> float:
        if isinstance(idx, int):
            idx = (idx,)
        return self.coeffs.get(tuple(idx), 0.0)

    def __add__(self, other: "KForm") -> "KForm":
        _check_same(self, other)
        if self.k != other.k:
            raise ValueError(f"cannot add forms of degree {self.k} and {other.k}")
        acc = dict(self.coeffs)
        for idx, c in other.coeffs.items():
            acc[idx] = acc.get(idx, 0.0) + c
        return KForm(self.n, self.k, acc)

    def __neg__(self) -> "KForm":
        return KForm(self.n, self.k, {i: -c for i, c in self.coeffs.items()})

    def __sub__(self, other: "KForm") -> "KForm":
        return self + (-other)

    def __mul__(self, s: float) -> "KForm":
        return KForm(self.n, self.k, {i: s * c for i, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __xor__(self, other: "KForm") -> "KForm":
        return wedge(self, other)

    def norm_inf(self) -> float:
        return max((abs(c) for c in self.coeffs.values()), default=0.0)

    def allclose(self, other: "KForm", atol: float = 1e-12) -> bool:
        return self.n == other.n and self.k == other.k and (self - other).norm_inf() <= atol

    def tensor(self) -> np.ndarray:
        """Dense fully antisymmetric array T with T[a,b,...] = form(e_a, e_b, ...)."""
        T = np.zeros((self.n,) * self.k)
        for idx, c in self.coeffs.items():
            zero_based = [i - 1 for i in idx]
            for perm in itertools.permutations(range(self.k)):
                T[tuple(zero_based[p] for p in perm)] = c * perm_sign(perm)
        return T


def _check_same(a: KForm, b: KForm) -> None:
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")


def wedge(a: KForm, b: KForm) -> KForm:
    _check_same(a, b)
    k = a.k + b.k
    if k > a.n:
        return KForm(a.n, k)
    acc: dict[tuple[int, ...], float] = {}
    for I, ca in a.coeffs.items():
        for J, cb in b.coeffs.items():
            s = perm_sign(I + J)
            if s == 0:
                continue
            key = tuple(sorted(I + J))
            acc[key] = acc.get(key, 0.0) + s * ca * cb
    return KForm(a.n, k, acc)


def interior(u, a: KForm) -> KForm:
    """Contraction i_u a, inserting ``u`` into the first slot."""
    u = np.asarray(u, dtype=float)
    if u.shape != (a.n,):
        raise ValueError(f"vector of shape {u.shape} does not match dimension {a.n}")
    if a.k == 0:
        raise ValueError("interior product of a 0-form is undefined")
    acc: dict[tuple[int, ...], float] = {}
    for I, c in a.coeffs.items():
        for p, i in enumerate(I):
            if u[i - 1] == 0.0:
                continue
            rest = I[:p] + I[p + 1:]
            acc[rest] = acc.get(rest, 0.0) + (-1) ** p * u[i - 1] * c
    return KForm(a.n, a.k - 1, acc)


def evaluate(a: KForm, vectors) -> float:
    """Value of ``a`` on the given k vectors (sum of coefficient times minor)."""
    vectors = [np.asarray(v, dtype=float) for v in vectors]
    if len(vectors) != a.k:
        raise ValueError(f"{a.k}-form evaluated on {len(vectors)} vectors")
    if a.k == 0:
        return a.coeffs.get((), 0.0)
    V = np.column_stack(vectors)
    if V.shape[0] != a.n:
        raise ValueError(f"vectors have dimension {V.shape[0]}, expected {a.n}")
    total = 0.0
    for I, c in a.coeffs.items():
        total += c * np.linalg.det(V[[i - 1 for i in I], :])
    return float(total)


def evaluate_many(a: KForm, *vectors: np.ndarray) -> np.ndarray:
    """Vectorized evaluation: each argument is an (m, n) stack of vectors."""
    if len(vectors) != a.k:
        raise ValueError(f"{a.k}-form evaluated on {len(vectors)} vectors")
    V = np.stack([np.asarray(v, dtype=float) for v in vectors], axis=-1)  # (m, n, k)
    out = np.zeros(V.shape[0])
    for I, c in a.coeffs.items():
        out += c * np.linalg.det(V[:, [i - 1 for i in I], :])
    return out


def volume_form(n: int, orientation: int = 1) -> KForm:
    return KForm(n, n, {tuple(range(1, n + 1)): float(orientation)})


def _metric_inverse(metric, n):
    g = np.eye(n) if metric is None else np.asarray(metric, dtype=float)
    if g.shape != (n, n):
        raise ValueError(f"metric of shape {g.shape} for dimension {n}")
    if not np.allclose(g, g.T, atol=1e-12):
        raise ValueError("metric is not symmetric")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise ValueError("metric is not positive definite") from None
    return g, np.linalg.inv(g)


def hodge(a: KForm, metric=None, orientation: int = 1) -> KForm:
    """Hodge star defined by alpha ^ *beta = <alpha, beta> vol for every k-form alpha.

    The inner product on k-forms is the Gram determinant of the inverse
    metric; ``vol = orientation * sqrt(det g) e^{1..n}``.
    """
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    n, k = a.n, a.k
    g, ginv = _metric_inverse(metric, n)
    scale = orientation * np.sqrt(np.linalg.det(g))
    full = set(range(1, n + 1))
    acc: dict[tuple[int, ...], float] = {}
    rows = multi_indices(n, k)
    for I, c in a.coeffs.items():
        Ii = [i - 1 for i in I]
        for J in rows:
            gram = np.linalg.det(ginv[np.ix_([j - 1 for j in J], Ii)]) if k else 1.0
            if gram == 0.0:
                continue
            Jc = tuple(sorted(full - set(J)))
            acc[Jc] = acc.get(Jc, 0.0) + perm_sign(J + Jc) * gram * scale * c
    return KForm(n, n - k, acc)


def pullback(a: KForm, A) -> KForm:
    """(A^* a)(u, ...) = a(Au, ...)."""
    A = np.asarray(A, dtype=float)
    if A.shape != (a.n, a.n):
        raise ValueError(f"matrix of shape {A.shape} for dimension {a.n}")
    if a.k == 0:
        return a
    acc: dict[tuple[int, ...], float] = {}
    for I, c in a.coeffs.items():
        rows = A[[i - 1 for i in I], :]
        for J in multi_indices(a.n, a.k):
            m = np.linalg.det(rows[:, [j - 1 for j in J]])
            if m != 0.0:
                acc[J] = acc.get(J, 0.0) + c * m
    return KForm(a.n, a.k, acc)


def lie_action(A, a: KForm) -> KForm:
    """Infinitesimal pullback d/dt exp(tA)^* a at t=0."""
    A = np.asarray(A, dtype=float)
    acc: dict[tuple[int, ...], float] = {}
    for I, c in a.coeffs.items():
        for p, i in enumerate(I):
            # d/dt of e^{i}(exp(tA) x) replaces e^i with sum_j A[i, j] e^j
            for j in range(1, a.n + 1):
                if A[i - 1, j - 1] == 0.0:
                    continue
                idx = I[:p] + (j,) + I[p + 1:]
                s = perm_sign(idx)
                if s:
                    key = tuple(sorted(idx))
                    acc[key] = acc.get(key, 0.0) + s * A[i - 1, j - 1] * c
    return KForm(a.n, a.k, acc)
