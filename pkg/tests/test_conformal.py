import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaf.conformal import (
    chart_build,
    continuity_defects,
    matched_kappa,
    omega_invariance_check,
    pullback,
    sample,
    verify_transformed_pair,
)
from gaf.errors import CriticalPoint, OutOfDomain
from gaf.exprlang import bind, parse
from gaf.grid import DENSITY, SCALAR, SPINOR, ComplexField, dz_values, make_grid, relative_l2
from gaf.omega import omega_build
from gaf.vekua import solve_psi, solve_psi_plus

A = 0.3
ZETA_SQ = make_grid(1, 2, 0, 1, 256, 256)


def expr_field(grid, src, weight, params=None):
    return ComplexField.from_expr(grid, bind(parse(src), params or {"a": A}), weight)


def exp_pair(grid):
    u = expr_field(grid, "a", DENSITY)
    return (u, expr_field(grid, "exp(a*(z+conj(z)))", SPINOR), expr_field(grid, "i*exp(a*(z+conj(z)))", SPINOR))


def test_identity_chart():
    g = make_grid(-1, 1, -1, 1, 33, 33)
    ch = chart_build("zeta", g)
    assert np.all(ch.derivative == 1) and np.all(ch.sigma == 1)
    f = ComplexField(g, np.exp(g.z) * np.conj(g.z), SPINOR)  # no expr: exercises the node gather
    assert np.array_equal(pullback(f, ch).values, f.values)


def test_zeta_squared_chart():
    ch = chart_build("zeta^2", ZETA_SQ, (0, 0))
    s = ch.sqrt_derivative
    assert np.allclose(s ** 2, 2 * ZETA_SQ.z, rtol=1e-14)
    assert continuity_defects(s) == 0
    assert s[0, 0] == np.sqrt(2 * ZETA_SQ.z[0, 0])


@pytest.mark.parametrize("grid", [make_grid(-1, 1, -1, 1, 33, 33), make_grid(-1, 1, -1, 1, 32, 32),
                                  make_grid(-0.3, 0.7, -0.45, 0.5, 11, 12)])
def test_critical_point(grid):
    with pytest.raises(CriticalPoint):
        chart_build("zeta^2", grid)


def test_affine_pullback_formulas():
    g = make_grid(-1, 0, 0.25, 0.75, 40, 30)
    zg = make_grid(-1.2, 1.2, 0.3, 1.7, 50, 50)
    ch = chart_build("2*zeta + 1", g)
    u = expr_field(zg, "exp(conj(z))*z", DENSITY)
    psi = expr_field(zg, "z^2 + i", SPINOR)
    w = 2 * g.z + 1
    assert np.allclose(pullback(u, ch).values, 2 * np.exp(np.conj(w)) * w, rtol=1e-14)
    assert np.allclose(pullback(psi, ch).values, np.sqrt(2) * (w ** 2 + 1j), rtol=1e-14)


def test_zeta_squared_constant_potential():
    g = make_grid(1, 2, 0, 1, 3, 3)  # node (1, 0) is zeta = 1.5
    ch = chart_build("zeta^2", g)
    u_star = pullback(ComplexField.constant(make_grid(0, 4, -1, 4, 9, 9), A, DENSITY), ch)
    assert u_star.values[0, 1] == pytest.approx(3 * A)
    assert u_star.weight == DENSITY


@pytest.mark.parametrize("src,grid,tol", [
    ("2*zeta + 1", make_grid(-1, 0, -0.5, 0.5, 128, 128), 1e-6),
    ("zeta^2", ZETA_SQ, 1e-5),
])
def test_pulled_exact_pair_residuals(src, grid, tol):
    zg = make_grid(-1, 4.5, -1, 4.5, 8, 8)  # expression-backed: only the bounds matter
    ch = chart_build(src, grid)
    u, f, fp = (pullback(x, ch).field for x in exp_pair(zg))
    r12, r13 = verify_transformed_pair(u, f, fp)
    assert r12 <= tol and r13 <= tol


def test_corrupted_branch_detected():
    zg = make_grid(-1, 4.5, -1, 4.5, 8, 8)
    ch = chart_build("zeta^2", ZETA_SQ)
    sigma = ch.sigma.copy()
    sigma[:, 128:] *= -1
    bad = ch.with_sigma(sigma)
    assert continuity_defects(bad.sqrt_derivative) > 0
    u, f, fp = (pullback(x, bad).field for x in exp_pair(zg))
    assert verify_transformed_pair(u, f, fp)[0] > 1e-1


def test_branch_flip_covariance():
    zg = make_grid(-1, 4.5, -1, 4.5, 8, 8)
    ch = chart_build("zeta^2", make_grid(1, 2, 0, 1, 64, 64))
    flip = ch.flipped()
    u, f, fp = exp_pair(zg)
    assert np.array_equal(pullback(u, flip).values, pullback(u, ch).values)
    assert np.array_equal(pullback(f, flip).values, -pullback(f, ch).values)
    assert np.array_equal(pullback(fp, flip).values, -pullback(fp, ch).values)
    w0 = omega_build(pullback(f, ch).field, pullback(fp, ch).field, (0, 0), 0.4)
    w1 = omega_build(pullback(f, flip).field, pullback(fp, flip).field, (0, 0), 0.4)
    assert np.array_equal(w0.values, w1.values)


def test_weight_algebra_product():
    zg = make_grid(-1, 4.5, -1, 4.5, 8, 8)
    g = make_grid(1, 2, 0, 1, 96, 96)
    ch = chart_build("zeta^2", g)
    _, f, fp = exp_pair(zg)
    prod_star = pullback(f, ch).values * pullback(fp, ch).values
    prod = ComplexField.from_expr(zg, lambda z: f.expr(z) * fp.expr(z), SCALAR)
    assert np.allclose(prod_star, pullback(prod, ch).values * ch.derivative, rtol=1e-13)
    # and dz of the pulled-back omega reproduces the product on the zeta plane
    w = omega_build(pullback(f, ch).field, pullback(fp, ch).field)
    assert relative_l2(dz_values(w.values, g) - prod_star, prod_star, g, 3, 1e-8) <= 1e-5


def test_omega_invariance_identity_and_affine():
    g = make_grid(-1, 1, -1, 1, 65, 65)
    _, f, fp = exp_pair(g)
    wz = omega_build(f, fp, (32, 0), 0.2)
    ident = chart_build("zeta", g)
    assert omega_invariance_check(wz, pullback(f, ident).field, pullback(fp, ident).field, ident, (32, 0)) < 1e-14

    zg = make_grid(-1, 1, -1, 1, 257, 257)
    _, f, fp = exp_pair(zg)
    wz = omega_build(f, fp, (128, 0), 0.2)
    # 129 zeta nodes: every image point is a z-grid node, so the numeric omega is gathered exactly
    ch = chart_build("2*zeta + 1", make_grid(-1, 0, -0.5, 0.5, 129, 129))
    dev = omega_invariance_check(wz, pullback(f, ch).field, pullback(fp, ch).field, ch, (5, 7))
    assert dev <= 1e-7


def test_omega_invariance_zeta_squared_solver():
    zg = make_grid(-0.5, 4.5, -0.5, 4.5, 256, 256)
    u = ComplexField.constant(zg, 0.1, DENSITY)
    psi, _ = solve_psi(u, ComplexField.constant(zg, 1))
    pp, _ = solve_psi_plus(u, ComplexField.from_expr(zg, lambda z: z))
    ch = chart_build("zeta^2", ZETA_SQ)
    wz = omega_build(psi, pp, (0, 0), 1.0)
    kappa = matched_kappa(wz, ch, (0, 0))
    dev = omega_invariance_check(wz, pullback(psi, ch).field, pullback(pp, ch).field, ch, (0, 0), kappa)
    assert dev <= 1e-3


def test_out_of_domain():
    zg = make_grid(0, 1, 0, 1, 20, 20)
    f = ComplexField(zg, np.ones(zg.shape))
    with pytest.raises(OutOfDomain):
        sample(f, np.array([0.5 + 0.99j]))
    with pytest.raises(OutOfDomain):
        sample(ComplexField.from_expr(zg, lambda z: z), np.array([2.0]))


@given(st.floats(0.2, 0.8), st.floats(0.2, 0.8))
def test_spline_sampling_accuracy(x, y):
    zg = make_grid(0, 1, 0, 1, 101, 101)
    f = ComplexField(zg, np.exp(1j * zg.z) * np.conj(zg.z))
    p = np.array([complex(x, y)])
    assert abs(sample(f, p)[0] - np.exp(1j * p[0]) * np.conj(p[0])) < 1e-7
