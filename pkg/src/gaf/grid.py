"""Rectangular grids, weighted complex fields and discrete Wirtinger derivatives.

Fields are stored as ``(ny, nx)`` arrays, so ``values[k, j]`` is the sample at
``node(j, k) = (x_min + j*hx) + i*(y_min + k*hy)``.  This is row-major with y
outer and x inner, the same order used by the CSV and binary field files.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateGrid, GridMismatch, UnsupportedWeight

#: Boundary layers excluded from residual norms unless a caller says otherwise.
DEFAULT_MARGIN = 3


@dataclass(frozen=True)
class GridDomain:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise DegenerateGrid(f"node counts must be integers, got {self.nx}, {self.ny}")
        if self.nx < 2 or self.ny < 2:
            raise DegenerateGrid(f"need at least 2 nodes per axis, got {self.nx}x{self.ny}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise DegenerateGrid(
                f"bounds not ordered: [{self.x_min}, {self.x_max}] x [{self.y_min}, {self.y_max}]"
            )
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + np.arange(self.nx) * self.hx
        x.setflags(write=False)
        return x

    @cached_property
    def y(self) -> np.ndarray:
        y = self.y_min + np.arange(self.ny) * self.hy
        y.setflags(write=False)
        return y

    @cached_property
    def z(self) -> np.ndarray:
        """Complex node coordinates, shape ``(ny, nx)``."""
        z = self.x[None, :] + 1j * self.y[:, None]
        z.setflags(write=False)
        return z

    def node(self, j: int, k: int) -> complex:
        if not (0 <= j < self.nx and 0 <= k < self.ny):
            raise IndexError(f"node ({j}, {k}) outside {self.nx}x{self.ny} grid")
        return complex(self.x_min + j * self.hx, self.y_min + k * self.hy)

    def nearest_node(self, z: complex) -> tuple[int, int]:
        j = int(round((z.real - self.x_min) / self.hx))
        k = int(round((z.imag - self.y_min) / self.hy))
        return min(max(j, 0), self.nx - 1), min(max(k, 0), self.ny - 1)

    def contains(self, z, margin_cells: float = 0.0) -> np.ndarray:
        """Pointwise test that ``z`` lies inside the rectangle shrunk by ``margin_cells`` cells."""
        z = np.asarray(z)
        mx, my = margin_cells * self.hx, margin_cells * self.hy
        # Relative slack so nodes mapped exactly onto the boundary are not rejected by round-off.
        ex = 1e-12 * max(abs(self.x_min), abs(self.x_max), 1.0)
        ey = 1e-12 * max(abs(self.y_min), abs(self.y_max), 1.0)
        return (
            (z.real >= self.x_min + mx - ex)
            & (z.real <= self.x_max - mx + ex)
            & (z.imag >= self.y_min + my - ey)
            & (z.imag <= self.y_max - my + ey)
        )

    def scaled(self, s: float) -> "GridDomain":
        return GridDomain(self.x_min * s, self.x_max * s, self.y_min * s, self.y_max * s, self.nx, self.ny)


def make_grid(x_min: float, x_max: float, y_min: float, y_max: float, nx: int, ny: int) -> GridDomain:
    return GridDomain(float(x_min), float(x_max), float(y_min), float(y_max), nx, ny)


@dataclass(frozen=True)
class FieldWeight:
    """Transformation exponents (p, q): the field behaves like ``f(z) dz^p dz̄^q``."""

    p: Fraction
    q: Fraction

    def __post_init__(self):
        p, q = Fraction(self.p), Fraction(self.q)
        if (p, q) not in _ALLOWED_WEIGHTS:
            raise UnsupportedWeight(f"weight ({p}, {q}) is not one of (0,0), (1/2,0), (1/2,1/2)")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    def as_list(self) -> list[float]:
        return [float(self.p), float(self.q)]

    @classmethod
    def from_pair(cls, pair) -> "FieldWeight":
        p, q = pair
        return cls(Fraction(p).limit_denominator(2), Fraction(q).limit_denominator(2))

    def __str__(self):
        return f"({self.p},{self.q})"


_HALF = Fraction(1, 2)
_ALLOWED_WEIGHTS = {(Fraction(0), Fraction(0)), (_HALF, Fraction(0)), (_HALF, _HALF)}

SCALAR = FieldWeight(Fraction(0), Fraction(0))
SPINOR = FieldWeight(_HALF, Fraction(0))
DENSITY = FieldWeight(_HALF, _HALF)


class DiffScheme(enum.Enum):
    SPECTRAL = "spectral"
    CENTERED4 = "centered4"

    @classmethod
    def parse(cls, name) -> "DiffScheme":
        if isinstance(name, cls):
            return name
        return cls(str(name).lower())

    @property
    def tolerance(self) -> float:
        """Relative residual attainable on smooth closed-form data at desk resolutions."""
        return SCHEME_TOLERANCE[self]


SCHEME_TOLERANCE = {DiffScheme.SPECTRAL: 1e-6, DiffScheme.CENTERED4: 1e-6}


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex samples on a grid, tagged with a transformation weight.

    ``expr`` optionally maps complex points to exact values (vectorised over
    numpy arrays); pullbacks use it instead of interpolating.
    """

    domain: GridDomain
    values: np.ndarray
    weight: FieldWeight = SCALAR
    expr: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128)
        if v.shape != self.domain.shape:
            if v.size == self.domain.size:
                v = v.reshape(self.domain.shape)
            else:
                raise GridMismatch(f"values shape {v.shape} does not match grid {self.domain.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_expr(cls, domain: GridDomain, fn, weight: FieldWeight = SCALAR) -> "ComplexField":
        values = np.broadcast_to(np.asarray(fn(domain.z), dtype=np.complex128), domain.shape)
        return cls(domain, values, weight, fn)

    @classmethod
    def constant(cls, domain: GridDomain, c: complex, weight: FieldWeight = SCALAR) -> "ComplexField":
        c = complex(c)
        return cls.from_expr(domain, lambda z: np.full(np.shape(z), c, dtype=np.complex128), weight)

    def with_values(self, values, weight: Optional[FieldWeight] = None) -> "ComplexField":
        return ComplexField(self.domain, values, self.weight if weight is None else weight)

    def evaluate(self, z) -> np.ndarray:
        if self.expr is None:
            raise ValueError("field has no exact expression attached")
        return np.asarray(self.expr(np.asarray(z)), dtype=np.complex128)

    def conj(self) -> "ComplexField":
        fn = None if self.expr is None else _conj_expr(self.expr)
        return ComplexField(self.domain, np.conj(self.values), self.weight, fn)

    def _check_same(self, other: "ComplexField"):
        check_same_grid(self, other)
        if self.weight != other.weight:
            raise UnsupportedWeight(f"cannot add fields of weights {self.weight} and {other.weight}")

    def __add__(self, other):
        if isinstance(other, ComplexField):
            self._check_same(other)
            return ComplexField(self.domain, self.values + other.values, self.weight)
        return ComplexField(self.domain, self.values + other, self.weight)

    def __sub__(self, other):
        if isinstance(other, ComplexField):
            self._check_same(other)
            return ComplexField(self.domain, self.values - other.values, self.weight)
        return ComplexField(self.domain, self.values - other, self.weight)

    def __mul__(self, scalar):
        if isinstance(scalar, ComplexField):
            return NotImplemented
        return ComplexField(self.domain, self.values * scalar, self.weight)

    __rmul__ = __mul__

    def __neg__(self):
        return ComplexField(self.domain, -self.values, self.weight)


def _conj_expr(fn):
    return lambda z: np.conj(fn(z))


def check_same_grid(*fields: ComplexField) -> GridDomain:
    domain = fields[0].domain
    for f in fields[1:]:
        if f.domain != domain:
            raise GridMismatch(f"fields live on different grids: {domain} vs {f.domain}")
    return domain


def interior(values: np.ndarray, margin: int = DEFAULT_MARGIN) -> np.ndarray:
    """Strip ``margin`` boundary layers from a ``(ny, nx)`` array."""
    ny, nx = values.shape
    # small grids keep at least one interior node
    margin = min(margin, (min(nx, ny) - 1) // 2)
    if margin <= 0:
        return values
    return values[margin:-margin, margin:-margin]


def _trapezoid_weights(n: int) -> np.ndarray:
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def l2_norm(values: np.ndarray, hx: float, hy: float) -> float:
    """Trapezoid-weighted discrete L2 norm over the rectangle spanned by ``values``."""
    ny, nx = values.shape
    w = _trapezoid_weights(ny)[:, None] * _trapezoid_weights(nx)[None, :]
    return float(np.sqrt(hx * hy * np.sum(w * np.abs(values) ** 2)))


def field_norms(field: ComplexField, margin: int = 0) -> tuple[float, float, float]:
    """Return ``(l2, sup, max_real_part)``, optionally over the interior only."""
    v = interior(field.values, margin)
    l2 = l2_norm(v, field.domain.hx, field.domain.hy)
    return l2, float(np.max(np.abs(v))), float(np.max(np.abs(v.real)))


def relative_l2(residual: np.ndarray, reference: np.ndarray, domain: GridDomain,
                margin: int = DEFAULT_MARGIN, eps: float = 1e-300) -> float:
    """``||residual|| / max(||reference||, eps)`` over the interior."""
    num = l2_norm(interior(residual, margin), domain.hx, domain.hy)
    den = l2_norm(interior(reference, margin), domain.hx, domain.hy)
    return num / max(den, eps)


# --- differentiation -------------------------------------------------------

def _d_centered4(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    f = np.moveaxis(f, axis, -1)
    n = f.shape[-1]
    if n < 5:
        out = np.gradient(f, h, axis=-1, edge_order=1 if n < 3 else 2)
        return np.moveaxis(out, -1, axis)
    out = np.empty_like(f)
    out[..., 2:-2] = (f[..., :-4] - 8 * f[..., 1:-3] + 8 * f[..., 3:-1] - f[..., 4:]) / (12 * h)
    # one-sided 4th-order closures on the two outermost layers
    out[..., 0] = (-25 * f[..., 0] + 48 * f[..., 1] - 36 * f[..., 2] + 16 * f[..., 3] - 3 * f[..., 4]) / (12 * h)
    out[..., 1] = (-3 * f[..., 0] - 10 * f[..., 1] + 18 * f[..., 2] - 6 * f[..., 3] + f[..., 4]) / (12 * h)
    out[..., -1] = (25 * f[..., -1] - 48 * f[..., -2] + 36 * f[..., -3] - 16 * f[..., -4] + 3 * f[..., -5]) / (12 * h)
    out[..., -2] = (3 * f[..., -1] + 10 * f[..., -2] - 18 * f[..., -3] + 6 * f[..., -4] - f[..., -5]) / (12 * h)
    return np.moveaxis(out, -1, axis)


def _d_spectral(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    # Nodes are treated as one period of length n*h.
    n = f.shape[axis]
    k = 2j * np.pi * np.fft.fftfreq(n, d=h)
    if n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1, 1]
    shape[axis] = n
    return np.fft.ifft(np.fft.fft(f, axis=axis) * k.reshape(shape), axis=axis)


def partials(values: np.ndarray, domain: GridDomain, scheme=DiffScheme.CENTERED4):
    scheme = DiffScheme.parse(scheme)
    d = _d_spectral if scheme is DiffScheme.SPECTRAL else _d_centered4
    return d(values, domain.hx, 1), d(values, domain.hy, 0)


def dbar_values(values: np.ndarray, domain: GridDomain, scheme=DiffScheme.CENTERED4) -> np.ndarray:
    fx, fy = partials(values, domain, scheme)
    return 0.5 * (fx + 1j * fy)


def dz_values(values: np.ndarray, domain: GridDomain, scheme=DiffScheme.CENTERED4) -> np.ndarray:
    fx, fy = partials(values, domain, scheme)
    return 0.5 * (fx - 1j * fy)


def dbar(field: ComplexField, scheme=DiffScheme.CENTERED4) -> ComplexField:
    """Discrete ∂/∂z̄ = (∂x + i∂y)/2.  The output keeps the input weight."""
    return ComplexField(field.domain, dbar_values(field.values, field.domain, scheme), field.weight)


def dz(field: ComplexField, scheme=DiffScheme.CENTERED4) -> ComplexField:
    """Discrete ∂/∂z = (∂x − i∂y)/2."""
    return ComplexField(field.domain, dz_values(field.values, field.domain, scheme), field.weight)
