"""The G2 three-form, its metric, cross product and the associator-valued chi form."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exterior import KForm, hodge, interior, volume_form, wedge

PHI0_TERMS = [
    ((1, 2, 3), 1.0),
    ((1, 4, 5), 1.0),
    ((1, 6, 7), 1.0),
    ((2, 4, 6), 1.0),
    ((2, 5, 7), -1.0),
    ((3, 4, 7), -1.0),
    ((3, 5, 6), -1.0),
]

# B(phi0) = 6 * identity, so c * |det B|^(-1/9) * 6 = 1 gives c = 6^(-2/9).
_METRIC_NORMALIZATION = 6.0 ** (-2.0 / 9.0)

# chi is scaled so that it equals the octonion associator (uv)w - u(vw);
# with this scale phi^2 + |chi|^2 / 4 = |u ^ v ^ w|^2.
CHI_SCALE = 2.0


def phi0() -> KForm:
    return KForm.from_terms(7, 3, PHI0_TERMS)


def bilinear_from_phi(phi: KForm, orientation: int = 1) -> np.ndarray:
    """B(u, v) = (i_u phi ^ i_v phi ^ phi) / mu with mu = orientation * e^{1..7}."""
    if phi.n != 7 or phi.k != 3:
        raise ValueError("expected a 3-form on R^7")
    e = np.eye(7)
    contractions = [interior(e[i], phi) for i in range(7)]
    top = tuple(range(1, 8))
    B = np.empty((7, 7))
    for i in range(7):
        for j in range(i, 7):
            val = wedge(wedge(contractions[i], contractions[j]), phi)[top] * orientation
            B[i, j] = B[j, i] = val
    return B


def metric_from_phi(phi: KForm, orientation: int = 1) -> np.ndarray:
    """Metric induced by a 3-form of G2 type, normalized so phi0 gives the identity.

    g = s * c * |det B|^(-1/9) * B, with s = +-1 chosen to make g positive definite.
    The |det B| power makes the rule equivariant: g_{A^*phi} = A^T g_phi A.
    """
    B = bilinear_from_phi(phi, orientation)
    eig = np.linalg.eigvalsh(B)
    scale = np.max(np.abs(eig))
    if scale == 0.0 or not (np.all(eig > 1e-12 * scale) or np.all(eig < -1e-12 * scale)):
        raise ValueError("phi not of G2 type: induced bilinear form is not definite")
    sign = 1.0 if eig[0] > 0 else -1.0
    det = abs(np.prod(eig))
    return sign * _METRIC_NORMALIZATION * det ** (-1.0 / 9.0) * B


@dataclass(frozen=True, eq=False)
class G2Structure:
    """A G2 three-form on R^7 together with the structures it determines."""

    phi: KForm
    metric: np.ndarray
    orientation: int = 1
    star_phi: KForm = field(init=False)
    volume: KForm = field(init=False)

    def __post_init__(self):
        metric = np.array(self.metric, dtype=float)
        metric.setflags(write=False)
        object.__setattr__(self, "metric", metric)
        object.__setattr__(self, "star_phi", hodge(self.phi, metric, self.orientation))
        vol = volume_form(7, self.orientation) * float(np.sqrt(np.linalg.det(metric)))
        object.__setattr__(self, "volume", vol)

    @classmethod
    def from_phi(cls, phi: KForm, orientation: int = 1) -> "G2Structure":
        return cls(phi, metric_from_phi(phi, orientation), orientation)

    @classmethod
    def default(cls) -> "G2Structure":
        return _DEFAULT

    @cached_property
    def phi_tensor(self) -> np.ndarray:
        return self.phi.tensor()

    @cached_property
    def star_tensor(self) -> np.ndarray:
        return self.star_phi.tensor()

    @cached_property
    def metric_inv(self) -> np.ndarray:
        return np.linalg.inv(self.metric)

    def to_json(self) -> str:
        doc = {
            "phi": [[list(idx), c] for idx, c in sorted(self.phi.coeffs.items())],
            "metric": self.metric.tolist(),
            "orientation": self.orientation,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "G2Structure":
        doc = json.loads(text)
        phi = KForm(7, 3, {tuple(idx): c for idx, c in doc["phi"]})
        return cls(phi, np.array(doc["metric"], dtype=float), int(doc["orientation"]))


_DEFAULT = G2Structure(phi0(), np.eye(7), 1)


def _s(s):
    return G2Structure.default() if s is None else s


def phi_value(u, v, w, s: G2Structure | None = None):
    """phi(u, v, w); accepts single vectors or (m, 7) stacks."""
    return np.einsum("abc,...a,...b,...c->...", _s(s).phi_tensor, u, v, w, optimize=True)


def cross(u, v, s: G2Structure | None = None) -> np.ndarray:
    """The vector u x v with phi(u, v, w) = g(u x v, w) for all w."""
    s = _s(s)
    lowered = np.einsum("abc,...a,...b->...c", s.phi_tensor, u, v, optimize=True)
    return lowered @ s.metric_inv.T


def chi(u, v, w, s: G2Structure | None = None) -> np.ndarray:
    """Vector-valued 3-form with <chi(u,v,w), z> = 2 *phi(u,v,w,z).

    One metric solve against *phi; equals the octonion associator.
    """
    s = _s(s)
    u, v, w = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (u, v, w)))
    vw = (v[..., :, None] * w[..., None, :]).reshape(v.shape[:-1] + (49,))
    # T[a, b, c, d] regrouped as (b c) x (a d) so the contraction is one matmul
    T = s.star_tensor.transpose(1, 2, 0, 3).reshape(49, 49)
    lowered = np.einsum("...ad,...a->...d", (vw @ T).reshape(vw.shape[:-1] + (7, 7)), u)
    return CHI_SCALE * lowered @ s.metric_inv.T


def gram_volume_sq(u, v, w, s: G2Structure | None = None):
    """|u ^ v ^ w|^2 in the metric of ``s``."""
    g = _s(s).metric
    M = np.stack([u, v, w], axis=-1)
    return np.linalg.det(np.swapaxes(M, -1, -2) @ g @ M)


def associator_defect(u, v, w, s: G2Structure | None = None):
    s = _s(s)
    c = chi(u, v, w, s)
    c_sq = np.einsum("...a,ab,...b->...", c, s.metric, c)
    return phi_value(u, v, w, s) ** 2 + c_sq / 4.0 - gram_volume_sq(u, v, w, s)
