import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaf.errors import NotExact
from gaf.grid import DENSITY, SPINOR, ComplexField, dbar_values, dz_values, make_grid, relative_l2
from gaf.omega import (
    VERTICAL_FIRST,
    cumulative_simpson,
    exactness_residual,
    omega_build,
    path_independence,
)
from gaf.vekua import solve_psi, solve_psi_plus

A = 0.3
SQ65 = make_grid(-1, 1, -1, 1, 65, 65)      # node 32 sits on x = 0 and y = 0
SQ257 = make_grid(-1, 1, -1, 1, 257, 257)   # node 128 sits on x = 0


def F(grid, values):
    return ComplexField(grid, np.broadcast_to(values, grid.shape), SPINOR)


def exp_pair(grid):
    e = np.exp(A * (grid.z + np.conj(grid.z)))
    return F(grid, e), F(grid, 1j * e)


@pytest.fixture(scope="module")
def solver_pair():
    u = ComplexField.constant(make_grid(-1, 1, -1, 1, 256, 256), 0.1, DENSITY)
    psi, _ = solve_psi(u, ComplexField.constant(u.domain, 1))
    pp, _ = solve_psi_plus(u, ComplexField.constant(u.domain, 1))
    return psi, pp


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.integers(4, 40), st.floats(0.01, 1))
def test_cumulative_simpson_cubic_exact(c, n, h):
    x = np.arange(n) * h
    f = c[0] + c[1] * x + c[2] * x ** 2 + c[3] * x ** 3
    want = c[0] * x + c[1] * x ** 2 / 2 + c[2] * x ** 3 / 3 + c[3] * x ** 4 / 4
    got = cumulative_simpson(f, h)
    assert np.allclose(got, want, atol=1e-10 * (1 + np.abs(want).max()))


def test_cumulative_simpson_short_arrays():
    assert np.allclose(cumulative_simpson(np.array([1.0, 3.0]), 0.5), [0, 1])
    x = np.arange(3) * 0.5
    assert np.allclose(cumulative_simpson(x ** 2, 0.5), x ** 3 / 3)


def test_constants_give_2iy():
    w = omega_build(F(SQ65, 1), F(SQ65, 1), anchor=(10, 32), kappa=0)
    assert np.allclose(w.values, 2j * SQ65.z.imag, atol=1e-14)
    assert w.values[32, 10] == 0


def test_z_times_one_gives_2ixy():
    w = omega_build(F(SQ65, SQ65.z), F(SQ65, 1), anchor=(32, 32), kappa=0)
    assert np.allclose(w.values, 2j * SQ65.z.real * SQ65.z.imag, atol=1e-13)


def test_exponential_pair_closed_form():
    psi, pp = exp_pair(SQ257)
    w = omega_build(psi, pp, anchor=(128, 0), kappa=0)
    exact = 1j / (2 * A) * (np.exp(4 * A * SQ257.z.real) - 1)
    assert np.max(np.abs(w.values - exact)) <= 1e-8
    assert w.max_real_part <= 1e-8
    assert path_independence(psi, pp, 0, (128, 0)) <= 1e-8


def test_exactness_residual_detects_non_solutions():
    assert exactness_residual(F(SQ65, SQ65.z), F(SQ65, 1)) < 1e-12
    r = exactness_residual(F(SQ65, np.conj(SQ65.z)), F(SQ65, 1))
    assert 0.5 < r < 2
    with pytest.raises(NotExact):
        omega_build(F(SQ65, np.conj(SQ65.z)), F(SQ65, 1))


def test_constants_path_independent():
    assert path_independence(F(SQ65, 1), F(SQ65, 1)) < 1e-14


def test_solver_pair(solver_pair):
    psi, pp = solver_pair
    assert exactness_residual(psi, pp) <= 5e-3
    assert path_independence(psi, pp, 0.0) <= 1e-3
    assert omega_build(psi, pp).max_real_part <= 1e-4


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_gauge_covariance(k1, k2):
    psi, pp = exp_pair(SQ65)
    w1 = omega_build(psi, pp, (32, 0), k1)
    w2 = omega_build(psi, pp, (32, 0), k2)
    assert np.allclose(w1.values - w2.values, 1j * (k1 - k2), rtol=0, atol=1e-13)


@given(st.floats(-4, 4))
def test_real_bilinearity(a):
    psi, pp = exp_pair(SQ65)
    w = omega_build(psi, pp)
    wa = omega_build(F(SQ65, a * psi.values), pp)
    wb = omega_build(psi, F(SQ65, a * pp.values))
    assert np.allclose(wa.values, a * w.values, atol=1e-12)
    assert np.allclose(wb.values, a * w.values, atol=1e-12)


def test_definitional_derivatives():
    psi, pp = exp_pair(SQ257)
    w = omega_build(psi, pp, (128, 128), 0.7)
    p = psi.values * pp.values
    assert relative_l2(dz_values(w.values, SQ257) - p, p, SQ257, 3, 1e-8) <= 1e-5
    assert relative_l2(dbar_values(w.values, SQ257) + np.conj(p), p, SQ257, 3, 1e-8) <= 1e-5


def test_anchor_value_and_orders():
    psi, pp = exp_pair(SQ65)
    w = omega_build(psi, pp, (5, 7), 1.25, order=VERTICAL_FIRST)
    assert w.values[7, 5] == 1.25j
    assert w.sidecar() == {"anchor": [5, 7], "kappa": 1.25, "roles": ["psi", "psi_plus"]}
    with pytest.raises(IndexError):
        omega_build(psi, pp, (65, 0))


def test_real_part_exactly_zero_by_construction():
    psi, pp = exp_pair(SQ65)
    assert omega_build(psi, pp, (3, 3), 0.5).max_real_part == 0.0
