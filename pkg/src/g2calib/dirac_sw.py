"""Spectral Dirac operators and the Seiberg-Witten system on the flat torus R^3/Z^3.

Fields are truncated Fourier series f(x) = sum_k c_k exp(2 pi i k.x) over
modes |k|_inf <= K, stored in a (2K+1)^3 array indexed by k + K. Fiber
conventions:

* W-spinors: C^2 = (z, w), the quaternion z + j w with complex structure
  given by right multiplication by i.
* nu-spinors: H (x) C, complex 4-vectors in the basis (1, i, j, k).
* the abelian connection is A = i(a0 + alpha) with a0 a constant 3-vector
  and alpha a real, mean-zero 1-form.
* the so4 twist carries (a_m, b_m) pairs of imaginary quaternions per
  direction m, acting on nu by y -> a y - y b.

Quadratic terms are evaluated on a zero-padded grid of 3K+2 points per axis,
which makes the truncated products exact (no aliasing into |k| <= K).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .quat_oct import UNITS, Splitting, build_splitting, left_matrix, qmul
from .spin_reps import mu, su2

TWISTS = ("abelian", "so4")
_AXES = (0, 1, 2)


def _side(K: int) -> int:
    return 2 * K + 1


def padded_size(K: int) -> int:
    return 3 * K + 2


def mode_grid(K: int) -> np.ndarray:
    """Integer modes, shape (2K+1, 2K+1, 2K+1, 3), C order over (kx, ky, kz)."""
    r = np.arange(-K, K + 1)
    return np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1)


@dataclass(frozen=True, eq=False)
class FourierSection:
    """Truncated Fourier coefficients with a fiber shape; ``real`` marks real-valued fields."""

    K: int
    coeffs: np.ndarray
    real: bool = False

    def __post_init__(self):
        if int(self.K) < 0:
            raise ValueError("cutoff must be non-negative")
        c = np.asarray(self.coeffs, dtype=complex)
        n = _side(self.K)
        if c.shape[:3] != (n, n, n):
            raise ValueError(f"coefficient array {c.shape} does not match cutoff {self.K}")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "K", int(self.K))

    # construction -------------------------------------------------------
    @classmethod
    def zeros(cls, K: int, fiber=(), real: bool = False) -> "FourierSection":
        n = _side(K)
        return cls(K, np.zeros((n, n, n) + tuple(fiber), dtype=complex), real)

    @classmethod
    def constant(cls, K: int, value, real: bool = False) -> "FourierSection":
        value = np.asarray(value)
        out = cls.zeros(K, value.shape, real)
        out.coeffs[K, K, K] = value
        return out

    @classmethod
    def random(cls, K: int, fiber, rng, scale: float = 1.0, band: int | None = None,
               real: bool = False, mean_zero: bool = False) -> "FourierSection":
        """Gaussian coefficients on |k|_inf <= band, scaled to unit expected norm times ``scale``."""
        band = K if band is None else min(band, K)
        n = _side(K)
        shape = (n, n, n) + tuple(fiber)
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        mask = np.all(np.abs(mode_grid(K)) <= band, axis=-1)
        if mean_zero:
            mask[K, K, K] = False
        c *= mask.reshape(mask.shape + (1,) * len(fiber))
        out = cls(K, c, real)
        if real:
            out = out.realified()
        nrm = out.norm()
        return out * (scale / nrm) if nrm > 0 else out

    # basic algebra --------------------------------------------------------
    @property
    def fiber(self) -> tuple[int, ...]:
        return self.coeffs.shape[3:]

    def _check(self, other: "FourierSection") -> None:
        if self.K != other.K:
            raise ValueError(f"cutoff mismatch: {self.K} vs {other.K}")
        if self.fiber != other.fiber:
            raise ValueError(f"fiber mismatch: {self.fiber} vs {other.fiber}")

    def __add__(self, other):
        self._check(other)
        return FourierSection(self.K, self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other):
        self._check(other)
        return FourierSection(self.K, self.coeffs - other.coeffs, self.real and other.real)

    def __neg__(self):
        return FourierSection(self.K, -self.coeffs, self.real)

    def __mul__(self, s):
        keep = self.real and np.isrealobj(s)
        return FourierSection(self.K, self.coeffs * s, keep)

    __rmul__ = __mul__

    def inner(self, other: "FourierSection") -> float:
        """Real L^2 inner product, Re sum conj(c) d."""
        self._check(other)
        return float(np.real(np.vdot(self.coeffs, other.coeffs)))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def mean(self) -> np.ndarray:
        K = self.K
        return self.coeffs[K, K, K]

    def with_mean_zero(self) -> "FourierSection":
        c = self.coeffs.copy()
        c[self.K, self.K, self.K] = 0
        return FourierSection(self.K, c, self.real)

    # reality --------------------------------------------------------------
    def reflected(self) -> np.ndarray:
        """Coefficients at -k, conjugated."""
        return np.conj(np.flip(self.coeffs, axis=_AXES))

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.coeffs - self.reflected()), initial=0.0))

    def realified(self) -> "FourierSection":
        return FourierSection(self.K, 0.5 * (self.coeffs + self.reflected()), True)

    # grids ----------------------------------------------------------------
    def to_grid(self, N: int | None = None) -> np.ndarray:
        N = _side(self.K) if N is None else N
        if N < _side(self.K):
            raise ValueError(f"grid of {N} points cannot hold cutoff {self.K}")
        idx = np.arange(-self.K, self.K + 1) % N
        arr = np.zeros((N, N, N) + self.fiber, dtype=complex)
        arr[np.ix_(idx, idx, idx)] = self.coeffs
        vals = np.fft.ifftn(arr, axes=_AXES) * N**3
        return vals.real if self.real else vals

    @classmethod
    def from_grid(cls, values, K: int, real: bool = False) -> "FourierSection":
        values = np.asarray(values)
        N = values.shape[0]
        if N < _side(K):
            raise ValueError(f"grid of {N} points cannot resolve cutoff {K}")
        if real:
            values = values.real
        c = np.fft.fftn(values, axes=_AXES) / N**3
        idx = np.arange(-K, K + 1) % N
        out = cls(K, c[np.ix_(idx, idx, idx)], real)
        return out.realified() if real else out

    def resize(self, K: int) -> "FourierSection":
        """Zero-pad or truncate to a new cutoff."""
        out = FourierSection.zeros(K, self.fiber, self.real)
        m = min(K, self.K)
        src = slice(self.K - m, self.K + m + 1)
        dst = slice(K - m, K + m + 1)
        out.coeffs[dst, dst, dst] = self.coeffs[src, src, src]
        return out

    def band(self, tol: float = 0.0) -> int:
        """Largest |k|_inf carrying a coefficient above ``tol``."""
        mag = np.abs(self.coeffs).reshape(self.coeffs.shape[:3] + (-1,)).max(axis=-1)
        live = np.abs(mode_grid(self.K))[mag > tol]
        return int(live.max()) if live.size else 0

    # serialization -----------------------------------------------------------
    def to_modes(self) -> list[dict]:
        modes = mode_grid(self.K).reshape(-1, 3)
        flat = self.coeffs.reshape(len(modes), -1)
        return [
            {"k": k.tolist(), "re": c.real.tolist(), "im": c.imag.tolist()}
            for k, c in zip(modes, flat)
            if np.any(c != 0)
        ]

    @classmethod
    def from_modes(cls, K: int, fiber, modes, real: bool = False) -> "FourierSection":
        out = cls.zeros(K, fiber, real)
        for m in modes:
            k = tuple(int(x) + K for x in m["k"])
            if any(i < 0 or i > 2 * K for i in k):
                raise ValueError(f"mode {m['k']} outside cutoff {K}")
            out.coeffs[k] = (np.array(m["re"]) + 1j * np.array(m["im"])).reshape(fiber)
        return out


def product(f: FourierSection, g: FourierSection, op, K_out: int | None = None,
            real: bool = False) -> FourierSection:
    """Galerkin projection of the pointwise op(f(x), g(x)) onto |k| <= K_out."""
    K_out = f.K if K_out is None else K_out
    N = max(padded_size(max(f.K, g.K)), f.K + g.K + K_out + 1)
    return FourierSection.from_grid(op(f.to_grid(N), g.to_grid(N)), K_out, real)


# --- connections and states ------------------------------------------------


def _fluct_fiber(twist: str) -> tuple[int, ...]:
    return (3,) if twist == "abelian" else (3, 2, 3)


@dataclass(frozen=True, eq=False)
class Connection:
    """Holonomy a0 (per 2 pi period) plus a mean-zero fluctuation.

    Abelian: fluctuation alpha is a real 1-form (fiber (3,)), A = i(a0 + alpha).
    so4: fluctuation holds (a_m, b_m) imaginary quaternions (fiber (3, 2, 3));
    ``flat_twist`` is its constant part, kept apart so the fluctuation stays
    mean-zero. a0 couples to the complexification as a scalar i a0.
    """

    K: int
    holonomy: np.ndarray = field(default_factory=lambda: np.zeros(3))
    fluctuation: FourierSection | None = None
    twist: str = "abelian"
    flat_twist: np.ndarray | None = None

    def __post_init__(self):
        if self.twist not in TWISTS:
            raise ValueError(f"unknown twist {self.twist!r}")
        h = np.asarray(self.holonomy, dtype=float)
        if h.shape != (3,):
            raise ValueError("holonomy must be three reals")
        object.__setattr__(self, "holonomy", h)
        fib = _fluct_fiber(self.twist)
        if self.fluctuation is None:
            object.__setattr__(self, "fluctuation", FourierSection.zeros(self.K, fib, real=True))
        fl = self.fluctuation
        if fl.K != self.K:
            raise ValueError(f"cutoff mismatch: connection {self.K}, fluctuation {fl.K}")
        if fl.fiber != fib:
            raise ValueError(f"fluctuation fiber {fl.fiber} does not match twist {self.twist}")
        if np.max(np.abs(fl.mean()), initial=0.0) > 1e-12:
            raise ValueError("fluctuation must have zero constant mode")
        if self.twist == "so4":
            ft = np.zeros((3, 2, 3)) if self.flat_twist is None else np.asarray(self.flat_twist, float)
            if ft.shape != (3, 2, 3):
                raise ValueError("flat_twist must have shape (3, 2, 3)")
            object.__setattr__(self, "flat_twist", ft)
        elif self.flat_twist is not None:
            raise ValueError("flat_twist only applies to the so4 twist")

    @classmethod
    def flat(cls, K: int, holonomy=(0.0, 0.0, 0.0), twist: str = "abelian") -> "Connection":
        return cls(K, np.asarray(holonomy, dtype=float), None, twist)

    @classmethod
    def so4(cls, K: int, total: FourierSection, holonomy=(0.0, 0.0, 0.0)) -> "Connection":
        """so4 connection from a real (3, 2, 3) field, splitting off its constant part."""
        total = total.resize(K)
        return cls(K, holonomy, total.with_mean_zero(), "so4", total.mean().real.copy())

    @property
    def is_flat(self) -> bool:
        return self.fluctuation.norm() == 0.0

    def gauge_part(self) -> FourierSection:
        return self.fluctuation


@dataclass(frozen=True, eq=False)
class SWState:
    v: FourierSection
    a: Connection

    def __post_init__(self):
        if self.v.K != self.a.K:
            raise ValueError(f"cutoff mismatch: spinor {self.v.K}, connection {self.a.K}")
        if self.v.fiber != (2,):
            raise ValueError("SW spinor must have fiber C^2")
        if self.a.twist != "abelian":
            raise ValueError("SW connection must be abelian")

    @property
    def K(self) -> int:
        return self.v.K

    @property
    def alpha(self) -> FourierSection:
        return self.a.fluctuation

    def with_fields(self, v=None, alpha=None) -> "SWState":
        v = self.v if v is None else v
        alpha = self.alpha if alpha is None else alpha
        return SWState(v, Connection(self.K, self.a.holonomy, alpha))

    def resize(self, K: int) -> "SWState":
        return SWState(self.v.resize(K), Connection(K, self.a.holonomy, self.alpha.resize(K)))

    @classmethod
    def zero(cls, K: int, holonomy=(0.0, 0.0, 0.0)) -> "SWState":
        return cls(FourierSection.zeros(K, (2,)), Connection.flat(K, holonomy))

    @classmethod
    def random(cls, K: int, rng, scale: float = 0.1, band: int | None = None,
               holonomy=(0.0, 0.0, 0.0)) -> "SWState":
        v = FourierSection.random(K, (2,), rng, scale, band)
        alpha = FourierSection.random(K, (3,), rng, scale, band, real=True, mean_zero=True)
        return cls(v, Connection(K, holonomy, alpha))

    def to_json(self) -> str:
        doc = {
            "cutoff": self.K,
            "holonomy": self.a.holonomy.tolist(),
            "modes": {"v": self.v.to_modes(), "alpha": self.alpha.to_modes()},
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "SWState":
        doc = json.loads(text)
        K = int(doc["cutoff"])
        v = FourierSection.from_modes(K, (2,), doc["modes"]["v"])
        alpha = FourierSection.from_modes(K, (3,), doc["modes"]["alpha"], real=True)
        return cls(v, Connection(K, doc["holonomy"], alpha))


@dataclass(frozen=True, eq=False)
class Perturbation:
    delta: FourierSection

    def __post_init__(self):
        if self.delta.fiber != (3,):
            raise ValueError("perturbation must be a 1-form")
        if self.delta.symmetry_defect() > 1e-12:
            raise ValueError("perturbation must be real")
        if coclosed_defect(self.delta) > 1e-12:
            raise ValueError("perturbation is not coclosed")

    @classmethod
    def zero(cls, K: int) -> "Perturbation":
        return cls(FourierSection.zeros(K, (3,), real=True))

    @classmethod
    def random_coclosed(cls, K: int, rng, scale: float = 1.0) -> "Perturbation":
        """Random real coclosed 1-form: the curl of a random field plus a constant."""
        b = FourierSection.random(K, (3,), rng, 1.0, real=True)
        d = curl(b) + FourierSection.constant(K, rng.standard_normal(3), real=True)
        return cls(d * (scale / d.norm()))


# --- spectral calculus ----------------------------------------------------


def _momenta(K: int, holonomy=None) -> np.ndarray:
    p = 2 * np.pi * mode_grid(K).astype(float)
    if holonomy is not None:
        p = p + np.asarray(holonomy, dtype=float)
    return p


def gradient(f: FourierSection) -> FourierSection:
    if f.fiber != ():
        raise ValueError("gradient expects a scalar section")
    p = _momenta(f.K)
    return FourierSection(f.K, 1j * p * f.coeffs[..., None], f.real)


def divergence(a: FourierSection) -> FourierSection:
    if a.fiber != (3,):
        raise ValueError("divergence expects a 1-form")
    p = _momenta(a.K)
    return FourierSection(a.K, 1j * np.sum(p * a.coeffs, axis=-1), a.real)


def curl(a: FourierSection) -> FourierSection:
    """*d on 1-forms of R^3."""
    if a.fiber != (3,):
        raise ValueError("curl expects a 1-form")
    p = _momenta(a.K)
    return FourierSection(a.K, 1j * np.cross(p, a.coeffs), a.real)


def coclosed_defect(a: FourierSection) -> float:
    return float(np.max(np.abs(divergence(a).coeffs), initial=0.0))


# --- Dirac operators -----------------------------------------------------


def clifford_units(split: Splitting | None = None) -> np.ndarray:
    split = build_splitting() if split is None else split
    return UNITS * np.asarray(split.signs[:3], dtype=float)[:, None]


def _generators(twist: str, split=None) -> np.ndarray:
    """Hermitian matrices G_m with D = sum p_m G_m on a single mode."""
    u = clifford_units(split)
    if twist == "abelian":
        return np.stack([1j * su2(um) for um in u])
    return np.stack([1j * left_matrix(um) for um in u]).astype(complex)


def _twist_matrices(ab) -> np.ndarray:
    """Real 4x4 matrices of y -> a_m y - y b_m for (a_m, b_m) of shape (..., 3, 2, 3)."""
    ab = np.asarray(ab, dtype=float)
    a = np.concatenate([np.zeros(ab.shape[:-2] + (1,)), ab[..., 0, :]], axis=-1)
    b = np.concatenate([np.zeros(ab.shape[:-2] + (1,)), ab[..., 1, :]], axis=-1)
    eye = np.eye(4)
    La = np.swapaxes(qmul(a[..., None, :], eye), -1, -2)
    Rb = np.swapaxes(qmul(eye, b[..., None, :]), -1, -2)
    return La - Rb


def _zeroth_order(twist: str, split=None) -> np.ndarray:
    """L(u_m) as (3, 4, 4) for the so4 twist."""
    return np.stack([left_matrix(um) for um in clifford_units(split)])


def mode_blocks(conn: Connection, split=None) -> np.ndarray:
    """Per-mode matrices of the flat part, shape (2K+1,)*3 + (d, d)."""
    G = _generators(conn.twist, split)
    p = _momenta(conn.K, conn.holonomy)
    blocks = np.einsum("...m,mab->...ab", p, G)
    if conn.twist == "so4" and np.any(conn.flat_twist):
        L = _zeroth_order("so4", split)
        T = _twist_matrices(conn.flat_twist)
        blocks = blocks + np.einsum("mab,mbc->ac", L, T)
    return blocks


def _pointwise_twist(conn: Connection, alpha_grid, v_grid, split=None):
    """Zeroth-order Clifford action of a fluctuation on a spinor, on grids."""
    if conn.twist == "abelian":
        G = _generators("abelian", split)
        return np.einsum("...m,mab,...b->...a", alpha_grid, G, v_grid)
    L = _zeroth_order("so4", split)
    T = _twist_matrices(alpha_grid)
    return np.einsum("mab,...mbc,...c->...a", L, T, v_grid)


def clifford_twist(alpha: FourierSection, v: FourierSection, twist: str = "abelian",
                   split=None) -> FourierSection:
    """Galerkin projection of alpha . v (sum over directions of c(e^m) alpha_m v)."""
    dummy = Connection.flat(v.K, twist=twist)
    return product(alpha, v, lambda a, x: _pointwise_twist(dummy, a.real, x, split), v.K)


@dataclass(frozen=True, eq=False)
class DiracOperator:
    """Truncated twisted Dirac operator sum_m c(e^m)(d_m + A_m)."""

    conn: Connection
    split: Splitting | None = None

    @property
    def K(self) -> int:
        return self.conn.K

    @property
    def fiber_dim(self) -> int:
        return 2 if self.conn.twist == "abelian" else 4

    @property
    def shape(self) -> tuple[int, int]:
        n = _side(self.K) ** 3 * self.fiber_dim
        return (n, n)

    def blocks(self) -> np.ndarray:
        return mode_blocks(self.conn, self.split)

    def apply(self, v: FourierSection) -> FourierSection:
        if v.K != self.K:
            raise ValueError(f"cutoff mismatch: operator {self.K}, section {v.K}")
        if v.fiber != (self.fiber_dim,):
            raise ValueError(f"section fiber {v.fiber} does not match operator")
        out = np.einsum("...ab,...b->...a", self.blocks(), v.coeffs)
        res = FourierSection(self.K, out)
        if not self.conn.is_flat:
            res = res + clifford_twist(self.conn.fluctuation, v, self.conn.twist, self.split)
        return res

    def matrix(self):
        """Sparse block-diagonal matrix for flat connections, dense otherwise."""
        if self.conn.is_flat:
            b = self.blocks().reshape((-1, self.fiber_dim, self.fiber_dim))
            return sp.block_diag(list(b), format="csr")
        n = self.shape[0]
        cols = np.empty((n, n), dtype=complex)
        basis = np.zeros(n, dtype=complex)
        for j in range(n):
            basis[j] = 1.0
            sec = FourierSection(self.K, basis.reshape(self.coeffs_shape()))
            cols[:, j] = self.apply(sec).coeffs.ravel()
            basis[j] = 0.0
        return cols

    def coeffs_shape(self) -> tuple[int, ...]:
        n = _side(self.K)
        return (n, n, n, self.fiber_dim)

    def hermitian_defect(self) -> float:
        M = self.matrix()
        D = M - M.conj().T
        if sp.issparse(D):
            return float(abs(D).max()) if D.nnz else 0.0
        return float(np.max(np.abs(D)))

    def singular_values(self) -> np.ndarray:
        if self.conn.is_flat:
            return np.sort(np.linalg.svd(self.blocks(), compute_uv=False).ravel())
        return np.sort(np.linalg.svd(self.matrix(), compute_uv=False))

    def spectrum(self) -> np.ndarray:
        """Eigenvalues in mode order (flat) or sorted (Hermitian dense)."""
        if self.conn.is_flat:
            return np.linalg.eigvalsh(self.blocks())
        M = self.matrix()
        if np.max(np.abs(M - M.conj().T)) > 1e-10:
            raise ValueError("spectrum requested for a non-Hermitian operator")
        return np.linalg.eigvalsh(M)

    def spectrum_rows(self) -> list[tuple[int, int, int, float]]:
        if not self.conn.is_flat:
            raise ValueError("mode-resolved spectrum needs a flat connection")
        ev = self.spectrum()
        modes = mode_grid(self.K)
        rows = []
        for idx in np.ndindex(ev.shape[:3]):
            k = tuple(int(x) for x in modes[idx])
            rows.extend((*k, float(e)) for e in ev[idx])
        return rows


def build_dirac(K: int, A: Connection, twist: str | None = None, split=None) -> DiracOperator:
    if K < 1:
        raise ValueError("cutoff must be at least 1")
    if A.K != K:
        raise ValueError(f"cutoff mismatch: requested {K}, connection {A.K}")
    if twist is not None and twist != A.twist:
        raise ValueError(f"connection carries twist {A.twist!r}, not {twist!r}")
    return DiracOperator(A, split)


def flat_spectrum_oracle(K: int, holonomy, multiplicity: int = 1) -> np.ndarray:
    """Sorted {+-|2 pi k + a0|} over the modes, each sign repeated ``multiplicity`` times."""
    r = np.linalg.norm(_momenta(K, holonomy), axis=-1).ravel()
    return np.sort(np.concatenate([r, -r] * multiplicity))


def kernel_dim(A: Connection, tol: float = 1e-9, split=None) -> int:
    return int(np.sum(DiracOperator(A, split).singular_values() < tol))


def perturbed_dirac(v: FourierSection, A0: Connection, alpha: FourierSection, split=None) -> FourierSection:
    """D_{A0} v + alpha . v; alpha may carry a constant part."""
    expect = (v.K,) + _fluct_fiber(A0.twist)
    if (alpha.K,) + alpha.fiber != expect:
        raise ValueError(f"twist field of shape {(alpha.K,) + alpha.fiber}, expected {expect}")
    return DiracOperator(A0, split).apply(v) + clifford_twist(alpha, v, A0.twist, split)


# --- Seiberg-Witten -------------------------------------------------------


def _spinor_to_quat(v):
    """(z, w) -> quaternion z + j w."""
    z, w = v[..., 0], v[..., 1]
    return np.stack([z.real, z.imag, w.real, -w.imag], axis=-1)


def _moment_forms() -> np.ndarray:
    """Real symmetric S_k (3, 4, 4) with mu_k(v) = xi^T S_k xi, xi = (Re z, Im z, Re w, Im w)."""
    E = np.eye(4)

    def q(xi):
        return mu(_spinor_to_quat(xi[..., [0, 2]] + 1j * xi[..., [1, 3]]))

    S = np.zeros((3, 4, 4))
    for a in range(4):
        for b in range(4):
            S[:, a, b] = (q(E[a] + E[b]) - q(E[a] - E[b])) / 4.0
    return S


_S = _moment_forms()


def _to_real(v):
    return np.stack([v[..., 0].real, v[..., 0].imag, v[..., 1].real, v[..., 1].imag], axis=-1)


def _from_real(xi):
    return np.stack([xi[..., 0] + 1j * xi[..., 1], xi[..., 2] + 1j * xi[..., 3]], axis=-1)


def moment_map(v: FourierSection, K_out: int | None = None) -> FourierSection:
    """Galerkin projection of the real 1-form mu(v, v)."""
    return product(v, v, lambda x, _: mu(_spinor_to_quat(x)), K_out, real=True)


def _bilinear_moment(v0_grid, v1_grid):
    """2 mu(v0, v1), the derivative of mu at v0 along v1."""
    return 2.0 * np.einsum("...a,kab,...b->...k", _to_real(v0_grid), _S, _to_real(v1_grid))


@dataclass(frozen=True)
class Residual:
    r1: FourierSection
    r2: FourierSection

    def norm(self) -> float:
        return float(np.hypot(self.r1.norm(), self.r2.norm()))

    def energy(self) -> float:
        return self.r1.norm() ** 2 + self.r2.norm() ** 2


def _check_delta(state: SWState, delta: Perturbation | None) -> FourierSection:
    if delta is None:
        return FourierSection.zeros(state.K, (3,), real=True)
    if delta.delta.K != state.K:
        raise ValueError(f"cutoff mismatch: state {state.K}, perturbation {delta.delta.K}")
    return delta.delta


def sw_residual(state: SWState, delta: Perturbation | None = None, split=None) -> Residual:
    """r1 = D_A v, r2 = curl(alpha) + delta - mu(v, v) (coefficients of i)."""
    d = _check_delta(state, delta)
    r1 = DiracOperator(state.a, split).apply(state.v)
    r2 = curl(state.alpha) + d - moment_map(state.v)
    return Residual(r1, r2)


def gauge_act(f: FourierSection, state: SWState, K_out: int | None = None) -> SWState:
    """(v, alpha) -> (v exp(i f), alpha - df) for a real function f.

    exp(i f) is not band-limited; the result is truncated at ``K_out``
    (default: the state's cutoff).
    """
    if f.fiber != () or not f.real:
        raise ValueError("gauge parameter must be a real function")
    K_out = state.K if K_out is None else K_out
    f_mean = complex(f.mean()).real
    f0 = f.with_mean_zero()
    N = max(padded_size(K_out), 4 * max(K_out, f.K, state.K) + 2)
    phase = np.exp(1j * (f0.to_grid(N) + f_mean))
    v = FourierSection.from_grid(state.v.to_grid(N) * phase[..., None], K_out)
    alpha = state.alpha.resize(K_out) - gradient(f0.resize(K_out))
    return SWState(v, Connection(K_out, state.a.holonomy, alpha.realified().with_mean_zero()))


@dataclass(frozen=True, eq=False)
class Linearization:
    """Derivative of the SW map at a base state, on (v, alpha, delta)."""

    base: SWState
    split: Splitting | None = None

    def _grids(self):
        N = padded_size(self.base.K)
        return N, self.base.v.to_grid(N)

    def apply(self, vdot: FourierSection, adot: FourierSection,
              ddot: FourierSection | None = None) -> Residual:
        K = self.base.K
        N, v0 = self._grids()
        dirac = DiracOperator(self.base.a, self.split)
        gens = _generators("abelian", self.split)
        coupling = np.einsum("...m,mab,...b->...a", adot.to_grid(N), gens, v0)
        r1 = dirac.apply(vdot) + FourierSection.from_grid(coupling, K)
        dmu = _bilinear_moment(v0, vdot.to_grid(N))
        r2 = curl(adot) - FourierSection.from_grid(dmu, K, real=True)
        if ddot is not None:
            r2 = r2 + ddot
        return Residual(r1, r2)

    def adjoint(self, res: Residual) -> tuple[FourierSection, FourierSection]:
        """Adjoint for the real L^2 pairing, restricted to (v, mean-zero real alpha)."""
        K = self.base.K
        N, v0 = self._grids()
        dirac = DiracOperator(self.base.a, self.split)
        gens = _generators("abelian", self.split)
        r1g = res.r1.to_grid(N)
        r2g = res.r2.to_grid(N)
        # d/dv of -<dmu(v), r2>
        sxi = 2.0 * np.einsum("...k,kab,...a->...b", r2g, _S, _to_real(v0))
        vbar = dirac.apply(res.r1) - FourierSection.from_grid(_from_real(sxi), K)
        gv0 = np.einsum("mab,...b->...ma", gens, v0)
        agrid = np.real(np.einsum("...ma,...a->...m", np.conj(gv0), r1g))
        abar = FourierSection.from_grid(agrid, K, real=True) + curl(res.r2)
        return vbar, abar.with_mean_zero()


def sw_linearization(state0: SWState, split=None) -> Linearization:
    return Linearization(state0, split)


def energy_gradient(state: SWState, delta: Perturbation | None = None, split=None):
    res = sw_residual(state, delta, split)
    gv, ga = Linearization(state, split).adjoint(res)
    return res, gv * 2.0, ga * 2.0


@dataclass
class DescentResult:
    state: SWState
    energies: list[float]
    steps: list[float]
    converged: bool

    def trace_rows(self) -> list[tuple[int, float, float]]:
        return [(i, e, s) for i, (e, s) in enumerate(zip(self.energies, self.steps))]


def sobolev_weights(K: int, holonomy=None) -> np.ndarray:
    """Mode weights 1 / (1 + |2 pi k + a0|^2) of the H^1 metric."""
    return 1.0 / (1.0 + np.sum(_momenta(K, holonomy) ** 2, axis=-1))


def sw_descent(init: SWState, delta: Perturbation | None = None, steps: int = 500,
               rate: float = 0.5, tol: float = 1e-10, armijo: float = 1e-4,
               max_halvings: int = 60, precondition: bool = True, split=None) -> DescentResult:
    """Backtracking gradient descent on E = |r1|^2 + |r2|^2.

    With ``precondition`` the gradient is taken in the H^1 metric (mode-wise
    weights from ``sobolev_weights``), which keeps the step size uniform
    across frequencies. Each iteration starts from ``rate`` and halves until
    the Armijo condition holds, so energies never increase.
    """
    if delta is not None:
        Perturbation(delta.delta)  # re-validates coclosedness
    K = init.K
    wv = sobolev_weights(K, init.a.holonomy)[..., None] if precondition else 1.0
    wa = sobolev_weights(K)[..., None] if precondition else 1.0

    def directions(gv, ga):
        dv = FourierSection(K, gv.coeffs * wv)
        da = FourierSection(K, ga.coeffs * wa, True)
        return dv, da, gv.inner(dv) + ga.inner(da)

    state = init
    res, gv, ga = energy_gradient(state, delta, split)
    E = res.energy()
    energies, taken = [E], [0.0]
    for _ in range(steps):
        if E < tol:
            break
        t = rate
        dv, da, slope = directions(gv, ga)
        if slope == 0.0:
            break
        for _ in range(max_halvings):
            trial = state.with_fields(state.v - dv * t, (state.alpha - da * t).realified())
            E_new = sw_residual(trial, delta, split).energy()
            if E_new <= E - armijo * t * slope:
                break
            t *= 0.5
        else:
            break
        state = trial
        res, gv, ga = energy_gradient(state, delta, split)
        E = res.energy()
        energies.append(E)
        taken.append(t)
    return DescentResult(state, energies, taken, E < tol)


# --- div-curl complex -----------------------------------------------------


def div_curl_blocks(K: int) -> np.ndarray:
    """Per-mode 4x4 blocks of (f, a) -> (d*a, df + *da), with d* = -div."""
    p = _momenta(K)
    n = _side(K)
    B = np.zeros((n, n, n, 4, 4), dtype=complex)
    B[..., 0, 1:] = -1j * p
    B[..., 1:, 0] = 1j * p
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    cross = np.zeros((n, n, n, 3, 3))
    cross[..., 0, 1], cross[..., 0, 2] = -z, y
    cross[..., 1, 0], cross[..., 1, 2] = z, -x
    cross[..., 2, 0], cross[..., 2, 1] = -y, x
    B[..., 1:, 1:] = 1j * cross
    return B


def div_curl_op(K: int):
    """Sparse block-diagonal matrix on mode coefficients of (f, a1, a2, a3)."""
    if K < 1:
        raise ValueError("cutoff must be at least 1")
    return sp.block_diag(list(div_curl_blocks(K).reshape(-1, 4, 4)), format="csr")


def apply_div_curl(f: FourierSection, a: FourierSection) -> tuple[FourierSection, FourierSection]:
    return -divergence(a), gradient(f) + curl(a)


def kernel_cokernel(K: int, tol: float = 1e-9) -> tuple[int, int]:
    B = div_curl_blocks(K)
    ker = int(np.sum(np.linalg.svd(B, compute_uv=False) < tol))
    coker = int(np.sum(np.linalg.svd(np.conj(np.swapaxes(B, -1, -2)), compute_uv=False) < tol))
    return ker, coker


# --- integrability of the complex structure ---------------------------------


def _bracket(b, j):
    """[b, j] = 2 b x j for imaginary quaternions stored as 3-vectors."""
    return 2.0 * np.cross(b, j)


def integrability_defect(j: FourierSection, B: Connection, unit_tol: float = 1e-8) -> float:
    """L^2 norm of d j + [b, j], b the second (conjugation) factor of the so4 twist."""
    if B.twist != "so4":
        raise ValueError("integrability defect needs an so4 connection")
    if j.fiber != (3,):
        raise ValueError("j must be an imaginary-quaternion field")
    if j.K != B.K:
        raise ValueError(f"cutoff mismatch: j {j.K}, connection {B.K}")
    N = 4 * j.K + 2
    jg = j.to_grid(N).real
    if np.max(np.abs(np.linalg.norm(jg, axis=-1) - 1.0)) > unit_tol:
        raise ValueError("j is not of unit length")
    dj = np.stack([FourierSection(j.K, 1j * _momenta(j.K)[..., m, None] * j.coeffs).to_grid(N).real
                   for m in range(3)], axis=-2)  # (..., m, 3)
    b = B.fluctuation.to_grid(N).real[..., 1, :] + B.flat_twist[:, 1, :]
    cov = dj + _bracket(b, jg[..., None, :])
    return float(np.sqrt(np.mean(np.sum(cov**2, axis=(-1, -2)))))
