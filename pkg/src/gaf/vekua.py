"""Fixed-point solver for the conjugate pair

    ∂_z̄ ψ  =  u · conj(ψ)        (ψ-equation)
    ∂_z̄ ψ⁺ = −ū · conj(ψ⁺)       (ψ⁺-equation)

via ψ = φ + T(u · conj ψ) with a holomorphic seed φ and the Pompeiu operator T.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cauchy import PompeiuPlan, cached_plan, operator_norm_estimate
from .errors import NonContraction, SeedNotHolomorphic
from .grid import (
    DEFAULT_MARGIN,
    SPINOR,
    ComplexField,
    DiffScheme,
    check_same_grid,
    dbar_values,
    interior,
    relative_l2,
)

log = logging.getLogger(__name__)

#: Normalisation floor for relative residuals of (near-)vanishing fields.
RESIDUAL_EPS = 1e-8
_STALL_STEPS = 10


@dataclass(frozen=True)
class SolveOptions:
    max_iter: int = 200
    tol: float = 1e-12
    scheme: DiffScheme = DiffScheme.CENTERED4
    margin: int = DEFAULT_MARGIN

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        object.__setattr__(self, "scheme", DiffScheme.parse(self.scheme))


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_difference: float
    residual_l2: float
    residual_sup: float
    contraction: float


def _equation_residual(potential: np.ndarray, psi: ComplexField, scheme, margin):
    r = dbar_values(psi.values, psi.domain, scheme) - potential * np.conj(psi.values)
    rel = relative_l2(r, psi.values, psi.domain, margin, RESIDUAL_EPS)
    return rel, float(np.max(np.abs(interior(r, margin))))


def seed_residual(seed: ComplexField, scheme=DiffScheme.CENTERED4, margin: int = DEFAULT_MARGIN) -> float:
    d = dbar_values(seed.values, seed.domain, scheme)
    return relative_l2(d, seed.values, seed.domain, margin, RESIDUAL_EPS)


def _solve(potential: ComplexField, seed: ComplexField, opts: SolveOptions,
           initial: Optional[ComplexField], plan: Optional[PompeiuPlan]):
    domain = check_same_grid(potential, seed)
    if initial is not None:
        check_same_grid(potential, initial)
    plan = plan or cached_plan(domain)

    q = operator_norm_estimate(plan) * float(np.max(np.abs(potential.values)))
    if q >= 1.0:
        raise NonContraction(f"contraction estimate q = {q:.3g} >= 1")
    seed_res = seed_residual(seed, opts.scheme, opts.margin)
    if seed_res > 10 * opts.scheme.tolerance:
        raise SeedNotHolomorphic(f"seed dbar residual {seed_res:.3g} exceeds {10 * opts.scheme.tolerance:.1g}")

    u = potential.values
    phi = seed.values
    psi = (initial if initial is not None else seed).values
    history = []
    for it in range(1, opts.max_iter + 1):
        nxt = phi + plan.apply_values(u * np.conj(psi))
        diff = float(np.max(np.abs(nxt - psi)))
        psi = nxt
        history.append(diff)
        if diff <= opts.tol:
            break
        tail = history[-(_STALL_STEPS + 1):]
        if len(tail) == _STALL_STEPS + 1 and all(b >= a for a, b in zip(tail, tail[1:])):
            raise NonContraction(f"iterate difference stalled at {diff:.3g} after {it} steps")
    else:
        raise NonContraction(f"no convergence to {opts.tol:g} within {opts.max_iter} iterations "
                             f"(last difference {history[-1]:.3g})")

    out = ComplexField(domain, psi, SPINOR)
    rel, sup = _equation_residual(u, out, opts.scheme, opts.margin)
    log.debug("solve: %d iterations, q=%.3f, residual %.3g", it, q, rel)
    return out, SolveReport(it, history[-1], rel, sup, q)


def solve_psi(u: ComplexField, seed: ComplexField, opts: SolveOptions = SolveOptions(), *,
              initial: Optional[ComplexField] = None, plan: Optional[PompeiuPlan] = None):
    """Solve ∂_z̄ψ = u·conj(ψ) with holomorphic part ``seed``; returns ``(psi, report)``."""
    return _solve(u, seed, opts, initial, plan)


def solve_psi_plus(u: ComplexField, seed: ComplexField, opts: SolveOptions = SolveOptions(), *,
                   initial: Optional[ComplexField] = None, plan: Optional[PompeiuPlan] = None):
    """Solve ∂_z̄ψ⁺ = −ū·conj(ψ⁺): the ψ-equation for the potential −ū."""
    return _solve(conjugate_potential(u), seed, opts, initial, plan)


def conjugate_potential(u: ComplexField) -> ComplexField:
    return ComplexField(u.domain, -np.conj(u.values), u.weight)


def fixed_point_defect(u: ComplexField, seed: ComplexField, psi: ComplexField,
                       plan: Optional[PompeiuPlan] = None) -> float:
    """sup |ψ − φ − T(u conj ψ)|."""
    plan = plan or cached_plan(psi.domain)
    r = psi.values - seed.values - plan.apply_values(u.values * np.conj(psi.values))
    return float(np.max(np.abs(r)))


def residual_pair(u: ComplexField, psi: ComplexField, psi_plus: ComplexField,
                  scheme=DiffScheme.CENTERED4, margin: int = DEFAULT_MARGIN) -> tuple[float, float]:
    """Relative interior residuals of the ψ- and ψ⁺-equations."""
    check_same_grid(u, psi, psi_plus)
    scheme = DiffScheme.parse(scheme)
    r1, _ = _equation_residual(u.values, psi, scheme, margin)
    r2, _ = _equation_residual(-np.conj(u.values), psi_plus, scheme, margin)
    return r1, r2
