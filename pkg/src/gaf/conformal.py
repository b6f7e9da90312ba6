"""Holomorphic charts ζ ↦ z(ζ) and weight-aware pullback of fields.

A field of weight (p, q) pulls back as

    F_*(ζ) = F(z(ζ)) · s(ζ)^{2p} · conj(s(ζ))^{2q},   s(ζ)² = dz/dζ,

so scalars compose plainly, spinors pick up the continuous branch s of
√(dz/dζ) and densities pick up |dz/dζ|.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline

from . import exprlang
from .errors import BranchConflict, CriticalPoint, OutOfDomain, UnsupportedWeight
from .grid import DENSITY, SCALAR, SPINOR, ComplexField, FieldWeight, GridDomain
from .omega import OmegaPotential, omega_build
from .vekua import residual_pair

DERIVATIVE_FLOOR = 1e-10
INTERPOLATION_MARGIN = 2


@dataclass(frozen=True, eq=False)
class HolomorphicChart:
    z_of_zeta: exprlang.Expr
    dz_dzeta: exprlang.Expr
    params: Mapping[str, complex]
    grid_star: GridDomain
    z_nodes: np.ndarray
    derivative: np.ndarray
    sigma: np.ndarray
    branch_seed: tuple[int, int]

    @property
    def sqrt_derivative(self) -> np.ndarray:
        """The branch s = σ · principal √(dz/dζ) on the ζ-grid."""
        return self.sigma * np.sqrt(self.derivative)

    @property
    def chart_id(self) -> str:
        return f"z={exprlang.to_source(self.z_of_zeta)};seed={list(self.branch_seed)}"

    def z_at(self, zeta) -> np.ndarray:
        return exprlang.evaluate(self.z_of_zeta, zeta, self.params)

    def with_sigma(self, sigma: np.ndarray) -> "HolomorphicChart":
        """Copy with a replacement sign array; no continuity audit is performed."""
        sigma = np.asarray(sigma, dtype=np.int8).copy()
        sigma.setflags(write=False)
        return HolomorphicChart(self.z_of_zeta, self.dz_dzeta, self.params, self.grid_star,
                                self.z_nodes, self.derivative, sigma, self.branch_seed)

    def flipped(self) -> "HolomorphicChart":
        return self.with_sigma(-self.sigma)


@dataclass(frozen=True)
class PullbackResult:
    field: ComplexField
    weight: FieldWeight
    chart_id: str

    @property
    def values(self) -> np.ndarray:
        return self.field.values


def _winding_cells(d: np.ndarray) -> np.ndarray:
    """Cells around which arg(d) winds by ±2π, i.e. cells containing a zero of d."""
    corners = [d[:-1, :-1], d[:-1, 1:], d[1:, 1:], d[1:, :-1]]
    total = np.zeros(corners[0].shape)
    for a, b in zip(corners, corners[1:] + corners[:1]):
        total += np.angle(b / a)
    return np.abs(total) > np.pi


def _continuous(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # |a - b| < |a + b|  <=>  Re(a conj b) > 0
    return (a * np.conj(b)).real > 0


def continuity_defects(s: np.ndarray) -> int:
    """Number of 4-adjacent node pairs violating the discrete continuity test."""
    return int(np.count_nonzero(~_continuous(s[:, 1:], s[:, :-1]))
               + np.count_nonzero(~_continuous(s[1:, :], s[:-1, :])))


def _propagate_signs(r: np.ndarray, seed: tuple[int, int]) -> np.ndarray:
    """Spread σ = +1 from ``seed``: first along the seed column, then outward along each row."""
    j0, k0 = seed
    ny, nx = r.shape
    sigma = np.ones(r.shape, dtype=np.int8)

    def chain(vals, start):
        # sign of each entry relative to vals[start], flipping whenever adjacent values jump
        out = np.ones(vals.shape, dtype=np.int8)
        up = np.where(_continuous(vals[start + 1:], vals[start:-1]), 1, -1)
        out[start + 1:] = np.cumprod(up)
        if start > 0:
            down = np.where(_continuous(vals[:start][::-1], vals[1:start + 1][::-1]), 1, -1)
            out[:start] = np.cumprod(down)[::-1]
        return out

    col = chain(r[:, j0], k0)
    for k in range(ny):
        sigma[k] = col[k] * chain(r[k], j0)
    return sigma


def chart_build(z_of_zeta, grid_star: GridDomain, branch_seed=(0, 0),
                params: Optional[Mapping[str, complex]] = None,
                floor: float = DERIVATIVE_FLOOR) -> HolomorphicChart:
    """Build the chart, its derivative and a continuous branch of √(dz/dζ)."""
    if isinstance(z_of_zeta, str):
        z_of_zeta = exprlang.parse(z_of_zeta)
    params = dict(params or {})
    dz_dzeta = exprlang.derivative(z_of_zeta)
    zeta = grid_star.z
    z_nodes = exprlang.evaluate(z_of_zeta, zeta, params)
    d = exprlang.evaluate(dz_dzeta, zeta, params)
    if np.min(np.abs(d)) < floor or np.any(_winding_cells(d)):
        raise CriticalPoint("dz/dzeta vanishes on the zeta grid; the map is not locally bijective")
    seed = (int(branch_seed[0]), int(branch_seed[1]))
    grid_star.node(*seed)
    r = np.sqrt(d)
    sigma = _propagate_signs(r, seed)
    if continuity_defects(sigma * r):
        raise BranchConflict("no continuous branch of sqrt(dz/dzeta) exists on this grid")
    for a in (z_nodes, d, sigma):
        a.setflags(write=False)
    return HolomorphicChart(z_of_zeta, dz_dzeta, params, grid_star, z_nodes, d, sigma, seed)


def _node_indices(domain: GridDomain, points: np.ndarray, rtol: float = 1e-9):
    """Integer node indices if every point sits on a grid node, else None."""
    fj = (points.real - domain.x_min) / domain.hx
    fk = (points.imag - domain.y_min) / domain.hy
    j, k = np.rint(fj), np.rint(fk)
    if (np.max(np.abs(fj - j), initial=0) > rtol or np.max(np.abs(fk - k), initial=0) > rtol
            or j.min() < 0 or k.min() < 0 or j.max() >= domain.nx or k.max() >= domain.ny):
        return None
    return j.astype(np.intp), k.astype(np.intp)


def sample(field: ComplexField, points: np.ndarray, margin_cells: int = INTERPOLATION_MARGIN) -> np.ndarray:
    """Values of ``field`` at arbitrary points: exact via ``expr``, else bicubic spline."""
    points = np.asarray(points, dtype=np.complex128)
    if field.expr is not None:
        if not np.all(field.domain.contains(points)):
            raise OutOfDomain("pullback points leave the z-domain")
        return np.asarray(field.expr(points), dtype=np.complex128)
    d = field.domain
    aligned = _node_indices(d, points)
    if aligned is not None:
        return field.values[aligned[1], aligned[0]]
    if not np.all(d.contains(points, margin_cells)):
        raise OutOfDomain(f"pullback points come closer than {margin_cells} cells to the z-domain boundary")
    re = RectBivariateSpline(d.y, d.x, field.values.real, kx=3, ky=3)
    im = RectBivariateSpline(d.y, d.x, field.values.imag, kx=3, ky=3)
    yi, xi = points.imag.ravel(), points.real.ravel()
    return (re.ev(yi, xi) + 1j * im.ev(yi, xi)).reshape(points.shape)


def weight_factor(chart: HolomorphicChart, weight: FieldWeight) -> np.ndarray:
    if weight == SCALAR:
        return np.ones(chart.grid_star.shape)
    if weight == SPINOR:
        return chart.sqrt_derivative
    if weight == DENSITY:
        return np.abs(chart.derivative)
    raise UnsupportedWeight(f"no pullback rule for weight {weight}")


def pullback(field: ComplexField, chart: HolomorphicChart) -> PullbackResult:
    factor = weight_factor(chart, field.weight)
    values = sample(field, chart.z_nodes) * factor
    return PullbackResult(ComplexField(chart.grid_star, values, field.weight), field.weight, chart.chart_id)


def verify_transformed_pair(u_star: ComplexField, psi_star: ComplexField, psi_plus_star: ComplexField,
                            scheme="centered4", margin: int = 3) -> tuple[float, float]:
    """Relative residuals of the pulled-back pair on the ζ-grid."""
    return residual_pair(u_star, psi_star, psi_plus_star, scheme, margin)


def matched_kappa(omega_z: OmegaPotential, chart: HolomorphicChart, anchor_star) -> float:
    """Gauge making the ζ-plane ω agree with ω_z(z(ζ₀)) at the anchor ζ₀."""
    j, k = anchor_star
    value = sample(omega_z.field, np.array([[chart.z_nodes[k, j]]]))[0, 0]
    return float(value.imag)


def pulled_omega(omega_z: OmegaPotential, chart: HolomorphicChart) -> np.ndarray:
    """ω_z composed with the chart: the right-hand side of the invariance identity."""
    return sample(omega_z.field, chart.z_nodes)


def omega_invariance_check(omega_z: OmegaPotential, psi_star: ComplexField, psi_plus_star: ComplexField,
                           chart: HolomorphicChart, anchor_star=(0, 0), kappa: Optional[float] = None,
                           **omega_kwargs) -> float:
    """sup |ω_{ψ_*,ψ⁺_*}(ζ) − ω_{ψ,ψ⁺}(z(ζ))| with the ζ-plane gauge matched at ``anchor_star``."""
    if kappa is None:
        kappa = matched_kappa(omega_z, chart, anchor_star)
    w_star = omega_build(psi_star, psi_plus_star, anchor_star, kappa, **omega_kwargs)
    return float(np.max(np.abs(w_star.values - pulled_omega(omega_z, chart))))
