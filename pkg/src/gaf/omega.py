"""The imaginary-valued potential ω_{ψ,ψ⁺}:

    ∂_z ω = ψψ⁺,    ∂_z̄ ω = −conj(ψψ⁺)

built by integrating the closed 1-form dω = P dz − conj(P) dz̄ (P = ψψ⁺) along
L-shaped grid paths from an anchor node, where ω(anchor) = iκ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotExact
from .grid import (
    DEFAULT_MARGIN,
    SCALAR,
    ComplexField,
    DiffScheme,
    GridDomain,
    check_same_grid,
    dbar_values,
    relative_l2,
)

HORIZONTAL_FIRST = "horizontal-first"
VERTICAL_FIRST = "vertical-first"
DEFAULT_EXACTNESS_THRESHOLD = 1e-2
_EPS = 1e-8


@dataclass(frozen=True)
class OmegaPotential:
    field: ComplexField
    anchor: tuple[int, int]
    kappa: float
    roles: tuple[str, str] = ("psi", "psi_plus")
    order: str = HORIZONTAL_FIRST

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def domain(self) -> GridDomain:
        return self.field.domain

    @property
    def max_real_part(self) -> float:
        return float(np.max(np.abs(self.field.values.real)))

    def sidecar(self) -> dict:
        return {"anchor": list(self.anchor), "kappa": self.kappa, "roles": list(self.roles)}


def cumulative_simpson(f: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    """Running integral from index 0 with composite Simpson (3/8 rule closing odd counts).

    Exact for cubics at every node.
    """
    f = np.moveaxis(np.asarray(f), axis, -1)
    n = f.shape[-1]
    out = np.zeros(f.shape, dtype=np.result_type(f, float))
    if n == 1:
        return np.moveaxis(out, -1, axis)
    if n == 2:
        out[..., 1] = 0.5 * h * (f[..., 0] + f[..., 1])
        return np.moveaxis(out, -1, axis)
    # even nodes: plain composite Simpson
    pairs = h / 3.0 * (f[..., 0:n - 2:2] + 4 * f[..., 1:n - 1:2] + f[..., 2:n:2])
    out[..., 2::2] = np.cumsum(pairs, axis=-1)
    # node 1: cubic-exact single-interval rule
    if n >= 4:
        out[..., 1] = h / 24.0 * (9 * f[..., 0] + 19 * f[..., 1] - 5 * f[..., 2] + f[..., 3])
    else:
        out[..., 1] = h / 12.0 * (5 * f[..., 0] + 8 * f[..., 1] - f[..., 2])
    # odd nodes m >= 3: Simpson up to m-3, then 3/8 over the last three intervals
    if n >= 4:
        m = np.arange(3, n, 2)
        tail = 3.0 * h / 8.0 * (f[..., m - 3] + 3 * f[..., m - 2] + 3 * f[..., m - 1] + f[..., m])
        out[..., m] = out[..., m - 3] + tail
    return np.moveaxis(out, -1, axis)


def _integrate_from(f: np.ndarray, h: float, start: int, axis: int) -> np.ndarray:
    """∫ from node ``start`` to every node along ``axis``."""
    f = np.moveaxis(f, axis, -1)
    out = np.zeros_like(f)
    out[..., start:] = cumulative_simpson(f[..., start:], h)
    out[..., :start + 1] = cumulative_simpson(f[..., start::-1], -h)[..., ::-1]
    return np.moveaxis(out, -1, axis)


def _form_coefficients(psi: ComplexField, psi_plus: ComplexField):
    p = psi.values * psi_plus.values
    # dω along x: P - conj(P);  along y: i(P + conj(P))
    return p - np.conj(p), 1j * (p + np.conj(p))


def integrate_form(p_x: np.ndarray, p_y: np.ndarray, domain: GridDomain,
                   anchor: tuple[int, int], order: str = HORIZONTAL_FIRST) -> np.ndarray:
    j0, k0 = anchor
    if order == HORIZONTAL_FIRST:
        row = _integrate_from(p_x[k0, :], domain.hx, j0, axis=0)
        cols = _integrate_from(p_y, domain.hy, k0, axis=0)
        return row[None, :] + cols
    if order == VERTICAL_FIRST:
        col = _integrate_from(p_y[:, j0], domain.hy, k0, axis=0)
        rows = _integrate_from(p_x, domain.hx, j0, axis=1)
        return col[:, None] + rows
    raise ValueError(f"unknown path order {order!r}")


def exactness_residual(psi: ComplexField, psi_plus: ComplexField,
                       scheme=DiffScheme.CENTERED4, margin: int = DEFAULT_MARGIN) -> float:
    """Closedness defect ||Re ∂_z̄(ψψ⁺)|| / ||ψψ⁺|| of the 1-form."""
    domain = check_same_grid(psi, psi_plus)
    p = psi.values * psi_plus.values
    d = dbar_values(p, domain, scheme)
    return relative_l2(d.real.astype(complex), p, domain, margin, _EPS)


def _check_anchor(domain: GridDomain, anchor) -> tuple[int, int]:
    j, k = int(anchor[0]), int(anchor[1])
    domain.node(j, k)
    return j, k


def omega_build(psi: ComplexField, psi_plus: ComplexField, anchor=(0, 0), kappa: float = 0.0, *,
                order: str = HORIZONTAL_FIRST, threshold: float = DEFAULT_EXACTNESS_THRESHOLD,
                scheme=DiffScheme.CENTERED4, margin: int = DEFAULT_MARGIN,
                roles: tuple[str, str] = ("psi", "psi_plus")) -> OmegaPotential:
    """ω_{ψ,ψ⁺} with ω(anchor) = iκ.

    The real part is whatever the quadrature produces; nothing is projected.
    """
    domain = check_same_grid(psi, psi_plus)
    anchor = _check_anchor(domain, anchor)
    defect = exactness_residual(psi, psi_plus, scheme, margin)
    if defect > threshold:
        raise NotExact(f"closedness defect {defect:.3g} exceeds {threshold:.3g}")
    p_x, p_y = _form_coefficients(psi, psi_plus)
    w = integrate_form(p_x, p_y, domain, anchor, order)
    w = w - w[anchor[1], anchor[0]] + 1j * float(kappa)
    return OmegaPotential(ComplexField(domain, w, SCALAR), anchor, float(kappa), tuple(roles), order)


def path_independence(psi: ComplexField, psi_plus: ComplexField, kappa: float = 0.0, anchor=(0, 0), *,
                      threshold: float = DEFAULT_EXACTNESS_THRESHOLD, scheme=DiffScheme.CENTERED4,
                      margin: int = DEFAULT_MARGIN) -> float:
    """sup |ω_horizontal-first − ω_vertical-first| from the same anchor."""
    a = omega_build(psi, psi_plus, anchor, kappa, order=HORIZONTAL_FIRST,
                    threshold=threshold, scheme=scheme, margin=margin)
    b = omega_build(psi, psi_plus, anchor, kappa, order=VERTICAL_FIRST,
                    threshold=threshold, scheme=scheme, margin=margin)
    return float(np.max(np.abs(a.values - b.values)))
