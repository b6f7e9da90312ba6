"""Simple Moutard-type transform M = M_{u,f,f⁺} for the conjugate pair.

    ũ  = u + f·conj(f⁺) / ω_{f,f⁺}
    ψ̃  = ψ  − (ω_{ψ,f⁺} / ω_{f,f⁺}) · f
    ψ̃⁺ = ψ⁺ − (ω_{f,ψ⁺} / ω_{f,f⁺}) · f⁺

All ω's share the kernel's anchor node; their gauges are explicit arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NotASolution, SingularKernel
from .grid import (
    DEFAULT_MARGIN,
    DENSITY,
    SPINOR,
    ComplexField,
    DiffScheme,
    check_same_grid,
    interior,
)
from .omega import DEFAULT_EXACTNESS_THRESHOLD, OmegaPotential, omega_build
from .vekua import RESIDUAL_EPS, residual_pair

DEFAULT_RESIDUAL_TOL = 1e-2
DEFAULT_FLOOR = 1e-6


@dataclass(frozen=True)
class MoutardKernel:
    u: ComplexField
    f: ComplexField
    f_plus: ComplexField
    omega_ff: OmegaPotential
    min_abs_omega: float
    scheme: DiffScheme = DiffScheme.CENTERED4
    margin: int = DEFAULT_MARGIN
    residual_tol: float = DEFAULT_RESIDUAL_TOL

    @property
    def anchor(self) -> tuple[int, int]:
        return self.omega_ff.anchor

    @property
    def kappa_f(self) -> float:
        return self.omega_ff.kappa


def _sign_change(im: np.ndarray) -> bool:
    s = np.sign(im)
    return bool(np.any(s[:, 1:] * s[:, :-1] < 0) or np.any(s[1:, :] * s[:-1, :] < 0))


def kernel_build(u: ComplexField, f: ComplexField, f_plus: ComplexField, anchor=(0, 0),
                 kappa_f: float = 0.0, *, residual_tol: float = DEFAULT_RESIDUAL_TOL,
                 floor: float = DEFAULT_FLOOR, scheme=DiffScheme.CENTERED4,
                 margin: int = DEFAULT_MARGIN) -> MoutardKernel:
    """Validate (u, f, f⁺) and cache ω_{f,f⁺}.

    ``floor`` is relative to max|ω_{f,f⁺}|.  A zero of ω between nodes is
    caught by a sign change of Im ω across a grid edge.
    """
    check_same_grid(u, f, f_plus)
    scheme = DiffScheme.parse(scheme)
    r1, r2 = residual_pair(u, f, f_plus, scheme, margin)
    if max(r1, r2) > residual_tol:
        raise NotASolution(f"f/f+ residuals ({r1:.3g}, {r2:.3g}) exceed {residual_tol:.3g}")
    omega = omega_build(f, f_plus, anchor, kappa_f, scheme=scheme, margin=margin, roles=("f", "f_plus"))
    mag = np.abs(omega.values)
    min_abs = float(mag.min())
    if min_abs < floor * float(mag.max()) or min_abs == 0.0 or _sign_change(omega.values.imag):
        raise SingularKernel(f"omega_ff vanishes on the grid (min |omega| = {min_abs:.3g}); "
                             "the transform would create a pole")
    return MoutardKernel(u, f, f_plus, omega, min_abs, scheme, margin, residual_tol)


def transform_potential(k: MoutardKernel) -> ComplexField:
    values = k.u.values + k.f.values * np.conj(k.f_plus.values) / k.omega_ff.values
    return ComplexField(k.u.domain, values, DENSITY)


def _require_solution(k: MoutardKernel, psi=None, psi_plus=None):
    if psi is not None:
        r, _ = residual_pair(k.u, psi, k.f_plus, k.scheme, k.margin)
        if r > k.residual_tol:
            raise NotASolution(f"psi residual {r:.3g} exceeds {k.residual_tol:.3g}")
    if psi_plus is not None:
        _, r = residual_pair(k.u, k.f, psi_plus, k.scheme, k.margin)
        if r > k.residual_tol:
            raise NotASolution(f"psi_plus residual {r:.3g} exceeds {k.residual_tol:.3g}")


def omega_psi_fplus(k: MoutardKernel, psi: ComplexField, kappa_pf: float) -> OmegaPotential:
    return omega_build(psi, k.f_plus, k.anchor, kappa_pf, scheme=k.scheme, margin=k.margin,
                       roles=("psi", "f_plus"))


def omega_f_psiplus(k: MoutardKernel, psi_plus: ComplexField, kappa_fp: float) -> OmegaPotential:
    return omega_build(k.f, psi_plus, k.anchor, kappa_fp, scheme=k.scheme, margin=k.margin,
                       roles=("f", "psi_plus"))


def apply_solution(k: MoutardKernel, psi: ComplexField, omega_pf: OmegaPotential) -> ComplexField:
    values = psi.values - omega_pf.values / k.omega_ff.values * k.f.values
    return ComplexField(psi.domain, values, SPINOR)


def apply_solution_plus(k: MoutardKernel, psi_plus: ComplexField, omega_fp: OmegaPotential) -> ComplexField:
    values = psi_plus.values - omega_fp.values / k.omega_ff.values * k.f_plus.values
    return ComplexField(psi_plus.domain, values, SPINOR)


def transform_solution(k: MoutardKernel, psi: ComplexField, kappa_pf: float = 0.0, *,
                       check: bool = True) -> ComplexField:
    check_same_grid(k.u, psi)
    if check:
        _require_solution(k, psi=psi)
    return apply_solution(k, psi, omega_psi_fplus(k, psi, kappa_pf))


def transform_solution_plus(k: MoutardKernel, psi_plus: ComplexField, kappa_fp: float = 0.0, *,
                            check: bool = True) -> ComplexField:
    check_same_grid(k.u, psi_plus)
    if check:
        _require_solution(k, psi_plus=psi_plus)
    return apply_solution_plus(k, psi_plus, omega_f_psiplus(k, psi_plus, kappa_fp))


def verify_transformed(k: MoutardKernel, u_tilde: ComplexField, psi_tilde: ComplexField,
                       psi_plus_tilde: ComplexField, scheme=None) -> tuple[float, float]:
    """Relative residuals of the transformed pair (ũ, ψ̃, ψ̃⁺)."""
    check_same_grid(k.u, u_tilde, psi_tilde, psi_plus_tilde)
    return residual_pair(u_tilde, psi_tilde, psi_plus_tilde, scheme or k.scheme, k.margin)


class Prop1Check(NamedTuple):
    max_dev: float
    c: complex

    @property
    def re_c(self) -> float:
        return abs(self.c.real)


@dataclass(frozen=True)
class Gauges:
    """Gauge constants for the ω's entering the transformed-potential identity."""

    kappa_pf: float = 0.0
    kappa_fp: float = 0.0
    kappa_psi: float = 0.0
    kappa_tilde: float = 0.0


def prop1_delta(k: MoutardKernel, psi: ComplexField, psi_plus: ComplexField, gauges: Gauges) -> np.ndarray:
    """Δ = ω_{ψ̃,ψ̃⁺} − (ω_{ψ,ψ⁺}ω_{f,f⁺} − ω_{ψ,f⁺}ω_{f,ψ⁺}) / ω_{f,f⁺} on every node."""
    check_same_grid(k.u, psi, psi_plus)
    w_pp = omega_build(psi, psi_plus, k.anchor, gauges.kappa_psi, scheme=k.scheme, margin=k.margin)
    w_pf = omega_psi_fplus(k, psi, gauges.kappa_pf)
    w_fp = omega_f_psiplus(k, psi_plus, gauges.kappa_fp)
    psi_t = apply_solution(k, psi, w_pf)
    psi_plus_t = apply_solution_plus(k, psi_plus, w_fp)
    w_tt = omega_build(psi_t, psi_plus_t, k.anchor, gauges.kappa_tilde, scheme=k.scheme, margin=k.margin,
                       threshold=max(DEFAULT_EXACTNESS_THRESHOLD, k.residual_tol),
                       roles=("psi_tilde", "psi_plus_tilde"))
    w_ff = k.omega_ff.values
    rhs = (w_pp.values * w_ff - w_pf.values * w_fp.values) / w_ff
    return w_tt.values - rhs


def verify_prop1(k: MoutardKernel, psi: ComplexField, psi_plus: ComplexField,
                 gauges: Gauges = Gauges(), margin: int = 0) -> Prop1Check:
    """Measure how far Δ is from an imaginary constant; returns ``(max|Δ − c|, c)`` with c = mean Δ."""
    delta = interior(prop1_delta(k, psi, psi_plus, gauges), margin)
    c = complex(np.mean(delta))
    return Prop1Check(float(np.max(np.abs(delta - c))), c)


__all__ = [
    "MoutardKernel", "kernel_build", "transform_potential", "transform_solution",
    "transform_solution_plus", "verify_transformed", "verify_prop1", "Prop1Check", "Gauges",
    "RESIDUAL_EPS",
]
