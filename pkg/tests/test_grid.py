import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaf.errors import DegenerateGrid, GridMismatch, UnsupportedWeight
from gaf.grid import (
    DENSITY,
    SCALAR,
    SPINOR,
    ComplexField,
    DiffScheme,
    FieldWeight,
    GridDomain,
    dbar,
    dbar_values,
    dz,
    dz_values,
    field_norms,
    interior,
    make_grid,
)


def test_make_grid_spacing():
    g = make_grid(-1, 1, -1, 1, 4, 4)
    assert g.size == 16
    assert g.hx == pytest.approx(2 / 3) and g.hy == pytest.approx(2 / 3)
    g = make_grid(0, 2, 0, 1, 256, 128)
    assert g.hx == pytest.approx(2 / 255) and g.hy == pytest.approx(1 / 127)


@pytest.mark.parametrize("args", [(0, 1, 0, 1, 1, 8), (0, 1, 0, 1, 8, 1), (1, 0, 0, 1, 4, 4), (0, 1, 2, 2, 4, 4)])
def test_degenerate_grids(args):
    with pytest.raises(DegenerateGrid):
        make_grid(*args)


def test_node_matches_coordinate_arrays():
    g = make_grid(-1, 2, 0.5, 1.5, 7, 5)
    for j, k in [(0, 0), (6, 4), (3, 2)]:
        assert g.node(j, k) == g.z[k, j]
    with pytest.raises(IndexError):
        g.node(7, 0)


def test_field_shape_checks(square64):
    with pytest.raises(GridMismatch):
        ComplexField(square64, np.zeros((3, 3)))
    flat = ComplexField(square64, np.arange(square64.size))
    assert flat.values.shape == square64.shape
    assert not flat.values.flags.writeable


def test_expr_values_agree(square64):
    f = ComplexField.from_expr(square64, lambda z: z ** 2 + 1j)
    assert np.array_equal(f.values, square64.z ** 2 + 1j)
    pts = np.array([0.1 + 0.2j])
    assert f.evaluate(pts)[0] == pts[0] ** 2 + 1j


def test_adding_different_weights_rejected(square64):
    a = ComplexField.constant(square64, 1, SPINOR)
    b = ComplexField.constant(square64, 1, DENSITY)
    with pytest.raises(UnsupportedWeight):
        a + b


def test_weights():
    assert FieldWeight.from_pair((0.5, 0)) == SPINOR
    assert DENSITY.as_list() == [0.5, 0.5]
    with pytest.raises(UnsupportedWeight):
        FieldWeight.from_pair((1, 0))


def test_field_norms_examples():
    g = make_grid(0, 1, 0, 1, 2, 2)
    assert field_norms(ComplexField.constant(g, 0)) == (0, 0, 0)
    l2, sup, mr = field_norms(ComplexField.constant(g, 1j))
    assert l2 == pytest.approx(1) and sup == 1 and mr == 0
    assert field_norms(ComplexField.constant(g, 3 + 4j))[1] == 5


@pytest.mark.parametrize("scheme", ["centered4"])
def test_dbar_dz_elementary(square64, scheme):
    z = square64.z
    zbar = ComplexField(square64, np.conj(z))
    zf = ComplexField(square64, z)
    assert np.allclose(dbar(zbar, scheme).values, 1, atol=1e-12)
    assert np.allclose(dbar(zf, scheme).values, 0, atol=1e-12)
    assert np.allclose(dz(zf, scheme).values, 1, atol=1e-12)
    assert np.allclose(dz(zbar, scheme).values, 0, atol=1e-12)
    sq = dz(ComplexField(square64, z ** 2), scheme).values
    assert np.allclose(sq, 2 * z, atol=1e-11)


@pytest.mark.parametrize("m,n", [(m, n) for m in range(4) for n in range(4) if m + n <= 3])
def test_centered4_exact_on_cubics(m, n):
    g = make_grid(-1, 1.5, -0.5, 1, 23, 19)
    x, y = g.z.real, g.z.imag
    f = x ** m * y ** n
    fx = m * x ** max(m - 1, 0) * y ** n
    fy = n * x ** m * y ** max(n - 1, 0)
    expected = 0.5 * (fx + 1j * fy)
    # exact on every node, including the one-sided boundary closures
    assert np.allclose(dbar_values(f.astype(complex), g), expected, atol=1e-11)


def test_centered4_convergence_order():
    def err(n):
        g = make_grid(-1, 1, -1, 1, n, n)
        z = g.z
        f = np.exp(np.conj(z) + z ** 2)
        return np.max(np.abs(interior(dbar_values(f, g) - f, 3)))

    e64, e128 = err(64), err(128)
    assert e64 / e128 >= 12


def test_exp_zbar_error_scales_like_h4():
    # calibrate C on 64^2 and check it bounds the 128^2 error
    errs = {}
    for n in (64, 128):
        g = make_grid(-1, 1, -1, 1, n, n)
        f = np.exp(np.conj(g.z))
        errs[n] = (np.max(np.abs(interior(dbar_values(f, g) - f, 3))), g.hx)
    c = errs[64][0] / errs[64][1] ** 4
    assert errs[128][0] <= 1.1 * c * errs[128][1] ** 4


def test_spectral_on_periodic_field():
    n = 64
    g = make_grid(0, 2 * np.pi * (n - 1) / n, 0, 2 * np.pi * (n - 1) / n, n, n)
    x, y = g.z.real, g.z.imag
    f = np.exp(1j * x) * np.cos(2 * y)
    expected = 0.5 * (1j * f + 1j * (-2 * np.exp(1j * x) * np.sin(2 * y)))
    assert np.allclose(dbar_values(f, g, DiffScheme.SPECTRAL), expected, atol=1e-10)


smooth_coeffs = st.tuples(*[st.floats(-2, 2) for _ in range(4)])


@given(a=smooth_coeffs, b=smooth_coeffs)
def test_dbar_linearity(a, b):
    g = make_grid(-1, 1, -1, 1, 24, 20)
    z = g.z
    F = np.exp(0.3 * z) * np.conj(z)
    G = np.sin(np.conj(z)) + z ** 2
    ca, cb = complex(a[0], a[1]), complex(b[0], b[1])
    lhs = dbar_values(ca * F + cb * G, g)
    rhs = ca * dbar_values(F, g) + cb * dbar_values(G, g)
    assert np.allclose(lhs, rhs, atol=1e-10)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_conjugation_duality(p, q):
    g = make_grid(-1, 1, -1, 1, 20, 24)
    F = ComplexField(g, np.exp(complex(p, q) * g.z) * np.conj(g.z) ** 2)
    assert np.allclose(dbar(F.conj()).values, np.conj(dz(F).values), atol=1e-12)


def test_interior_margin_clamped():
    a = np.arange(25).reshape(5, 5)
    assert interior(a, 1).shape == (3, 3)
    assert interior(a, 10).shape == (1, 1)
    assert interior(a, 0).shape == (5, 5)


def test_scaled_and_contains():
    g = make_grid(-1, 1, -1, 1, 11, 11)
    assert g.scaled(2).x_max == 2
    assert g.contains(np.array([0.0, 1.0 + 1j, 1.2]), 0).tolist() == [True, True, False]
    assert not g.contains(np.array([0.95]), 1)[0]


def test_scheme_parse():
    assert DiffScheme.parse("CENTERED4") is DiffScheme.CENTERED4
    with pytest.raises(ValueError):
        DiffScheme.parse("upwind")
    assert SCALAR != SPINOR
