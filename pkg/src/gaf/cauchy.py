"""Solid Cauchy (Pompeiu) transform on a rectangular grid.

    (T g)(z) = -(1/π) ∬_D g(ζ) / (ζ - z) dA(ζ)

discretised by the midpoint rule on the grid cells and evaluated as a linear
(zero-padded) FFT convolution.  T is a right inverse of ∂/∂z̄.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import AllocationLimit, GridMismatch
from .grid import SCALAR, ComplexField, GridDomain

DEFAULT_MAX_ALLOC_BYTES = 2 * 1024**3
# kernel spectrum, padded input and product buffer, all complex128
_BUFFERS = 3


def max_alloc_bytes() -> int:
    raw = os.environ.get("GAF_MAX_ALLOC_BYTES")
    return int(raw) if raw else DEFAULT_MAX_ALLOC_BYTES


def _quadrant_integral_inv(a: float, b: float) -> complex:
    """∬ over [0,a]x[0,b] of 1/(x + iy) dA, from the logarithmic antiderivative."""
    r = np.hypot(a, b)
    re = a * np.arctan2(b, a) + b * np.log(r / b)
    im = b * np.arctan2(a, b) + a * np.log(r / a)
    return complex(re, -im)


def center_cell_average(hx: float, hy: float) -> complex:
    """Average of 1/(π w) over the hx×hy cell centred at w = 0."""
    q = _quadrant_integral_inv(hx / 2, hy / 2)
    # quadrants contribute q, -conj(q), -q, conj(q): the odd kernel averages to zero
    total = q - np.conj(q) - q + np.conj(q)
    return complex(total) / (np.pi * hx * hy)


def center_cell_average_abs(hx: float, hy: float) -> float:
    """Average of 1/(π |w|) over the hx×hy cell centred at w = 0."""
    a, b = hx / 2, hy / 2
    total = 4.0 * (a * np.arcsinh(b / a) + b * np.arcsinh(a / b))
    return float(total) / (np.pi * hx * hy)


@dataclass(frozen=True, eq=False)
class PompeiuPlan:
    domain: GridDomain
    padded_shape: tuple[int, int]
    kernel_hat: np.ndarray

    def apply_values(self, g: np.ndarray) -> np.ndarray:
        ny, nx = self.domain.shape
        buf = np.zeros(self.padded_shape, dtype=np.complex128)
        buf[:ny, :nx] = g
        spec = sfft.fft2(buf, overwrite_x=True)
        spec *= self.kernel_hat
        out = sfft.ifft2(spec, overwrite_x=True)
        return out[ny - 1:2 * ny - 1, nx - 1:2 * nx - 1] * (self.domain.hx * self.domain.hy)


def _offsets(domain: GridDomain) -> np.ndarray:
    dx = np.arange(-(domain.nx - 1), domain.nx) * domain.hx
    dy = np.arange(-(domain.ny - 1), domain.ny) * domain.hy
    return dx[None, :] + 1j * dy[:, None]


def padded_shape_for(domain: GridDomain) -> tuple[int, int]:
    return sfft.next_fast_len(2 * domain.ny - 1), sfft.next_fast_len(2 * domain.nx - 1)


def _check_budget(shape: tuple[int, int]) -> None:
    need = shape[0] * shape[1] * 16 * _BUFFERS
    cap = max_alloc_bytes()
    if need > cap:
        raise AllocationLimit(f"padded transform {shape[1]}x{shape[0]} needs {need} bytes, cap is {cap}")


def plan_build(grid: GridDomain) -> PompeiuPlan:
    """Precompute the padded kernel spectrum for ``grid``."""
    shape = padded_shape_for(grid)
    _check_budget(shape)
    d = _offsets(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = 1.0 / (np.pi * d)
    # (z - ζ) = d, so the kernel is -1/(π(ζ - z)) = 1/(π d); centre uses the cell average
    k[grid.ny - 1, grid.nx - 1] = center_cell_average(grid.hx, grid.hy)
    buf = np.zeros(shape, dtype=np.complex128)
    buf[:k.shape[0], :k.shape[1]] = k
    kernel_hat = sfft.fft2(buf, overwrite_x=True)
    kernel_hat.setflags(write=False)
    return PompeiuPlan(grid, shape, kernel_hat)


@lru_cache(maxsize=8)
def cached_plan(grid: GridDomain) -> PompeiuPlan:
    return plan_build(grid)


def pompeiu_apply(plan: PompeiuPlan, g: ComplexField) -> ComplexField:
    if g.domain != plan.domain:
        raise GridMismatch("field grid differs from the plan grid")
    return ComplexField(plan.domain, plan.apply_values(g.values), SCALAR)


def operator_norm_estimate(plan: PompeiuPlan) -> float:
    """max_z hx·hy·Σ_ζ 1/(π|ζ − z|), centre cell replaced by its exact average."""
    grid = plan.domain
    d = _offsets(grid)
    with np.errstate(divide="ignore"):
        k = 1.0 / (np.pi * np.abs(d))
    k[grid.ny - 1, grid.nx - 1] = center_cell_average_abs(grid.hx, grid.hy)
    shape = plan.padded_shape
    kb = np.zeros(shape)
    kb[:k.shape[0], :k.shape[1]] = k
    ones = np.zeros(shape)
    ones[:grid.ny, :grid.nx] = 1.0
    conv = sfft.irfft2(sfft.rfft2(kb) * sfft.rfft2(ones), s=shape)
    sums = conv[grid.ny - 1:2 * grid.ny - 1, grid.nx - 1:2 * grid.nx - 1]
    return float(sums.max() * grid.hx * grid.hy)
