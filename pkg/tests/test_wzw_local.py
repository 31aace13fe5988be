import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from todamaps.field_grid import Grid, PolyField, laplacian_zzbar, residual_of
from todamaps.wzw_local import (
    DomainError,
    GaussFields,
    InconsistencyError,
    RegularityError,
    bc_frame_check,
    energy_density,
    gauss_compose,
    gauss_decompose,
    kink_liouville_phi,
    munu_constants,
    orc_coefficient,
    orc_reduction,
    random_regular_unimodular,
    random_su11,
    su11_energy,
    su11_eom_residual,
    wzw_eom_residual,
)


def test_decompose_example_sl2r():
    f = gauss_decompose(np.array([[2.0, 1.0], [1.0, 1.0]]), "sl2r")
    assert (f.x, f.y, f.phi) == (1.0, 1.0, 0.0)
    assert np.allclose(gauss_compose(f), [[2, 1], [1, 1]])


@pytest.mark.parametrize("t", [-1.2, 0.0, 0.4, 2.0])
def test_decompose_example_su11_diagonal(t):
    f = gauss_decompose(np.diag([np.exp(t), np.exp(-t)]), "su11")
    assert f.x == 0 and f.y == 0 and f.phi == pytest.approx(2 * t)


@pytest.mark.parametrize("signature", ["sl2r", "su11"])
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_round_trip_and_real_coordinates(signature, seed):
    m = random_regular_unimodular(np.random.default_rng(seed), 50, signature)
    f = gauss_decompose(m, signature)
    assert np.abs(gauss_compose(f) - m).max() < 1e-12
    assert f.is_real(1e-9)


def test_genuine_su11_round_trip():
    m = random_su11(np.random.default_rng(0), 200)
    J = np.diag([1.0, -1.0])
    assert np.abs(np.conj(np.swapaxes(m, -1, -2)) @ J @ m - J).max() < 1e-9
    f = gauss_decompose(m, "su11")
    assert np.abs(gauss_compose(f) - m).max() < 1e-10


def test_negative_corner_gives_complex_phi():
    f = gauss_decompose(np.array([[-1.0, 0.0], [0.0, -1.0]]), "sl2r")
    assert np.iscomplexobj(f.phi) and not f.is_real()
    assert np.allclose(gauss_compose(f), -np.eye(2))


def test_decompose_errors():
    with pytest.raises(RegularityError):
        gauss_decompose(np.array([[0.0, 1.0], [-1.0, 0.0]]))
    with pytest.raises(DomainError):
        gauss_decompose(np.array([[2.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        gauss_decompose(np.eye(3))
    with pytest.raises(DomainError):
        GaussFields(0, 0, 0, "so3")


def test_decompose_evaluator_round_trip():
    g = Grid.square(0.5, 9)
    m = lambda x, y: gauss_compose(GaussFields(lambda a, b: a, lambda a, b: a * b, lambda a, b: b + 0j))(x, y)
    f = gauss_decompose(m)
    s = f.sampled(g)
    assert np.allclose(s.x, g.XY[0]) and np.allclose(s.phi, g.XY[1])


def test_eom_detects_non_solution():
    g = Grid.square(1.0, 17)
    zero = lambda x, y: jnp.zeros(jnp.shape(x))
    f = GaussFields(zero, zero, lambda x, y: x * x + y * y)
    for fn in (wzw_eom_residual, su11_eom_residual):
        r = fn(f, g)
        assert r["phi"].max_abs == pytest.approx(1.0)
        assert r["x"].max_abs == 0 and r["y"].max_abs == 0


def test_eom_fd_path_agrees_with_analytic():
    g = Grid.square(0.8, 41)
    f = GaussFields(lambda x, y: 0.3 * x * y + 0j, lambda x, y: jnp.sin(y) + 0j, lambda x, y: 0.2 * x * x + 0j)
    # the nested FD4 stencil masks a 4-point ring: compare on the same interior
    a = su11_eom_residual(f, g.crop(4))
    b = su11_eom_residual(f.sampled(g), g)
    for k in a:
        assert a[k].points_used == b[k].points_used
        assert abs(a[k].max_abs - b[k].max_abs) < 1e-4, k


def test_energy_of_linear_phi():
    g = Grid(0.0, 1.0, 0.0, 1.0, 33, 33)
    zero = lambda x, y: jnp.zeros(jnp.shape(x))
    f = GaussFields(zero, zero, lambda x, y: 2 * x)  # phi = z + zbar
    assert su11_energy(f, g) == pytest.approx(-0.5, abs=1e-3)
    assert su11_energy(f.sampled(g), g) == pytest.approx(-0.5, abs=1e-3)
    assert su11_energy(f, g, k=16 * np.pi) == pytest.approx(-1.0, abs=1e-3)
    assert np.allclose(energy_density(f, g).values, 0.5)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_orc_coefficient_imaginary(seed):
    rng = np.random.default_rng(seed)
    f = PolyField.holomorphic(rng.normal(size=3) + 1j * rng.normal(size=3))
    h = PolyField.holomorphic(rng.normal(size=3) + 1j * rng.normal(size=3))
    M = Grid.square(1.0, 9).evaluate(orc_coefficient(f, h))
    assert np.abs(M.real).max() < 1e-12


def test_munu_constants():
    nu, mu = munu_constants(0.7, 2.0)
    assert mu * nu == pytest.approx(1.0)
    assert np.angle(mu) == pytest.approx(0.7)


def test_liouville_family_with_unit_munu():
    # phi = -2 ln(1 + z zbar) has dd phi = -2 e^phi, so dd phi + 2 mu nu e^phi = 0 needs mu nu = 1
    phi = lambda x, y: -2 * jnp.log(1 + x * x + y * y)
    lap = laplacian_zzbar(phi)
    g = Grid.square(1.5, 33)
    assert residual_of(g, lambda x, y: lap(x, y) + 2 * jnp.exp(phi(x, y))).max_abs < 1e-8


def test_orc_munu_family_implication():
    g = Grid.square(1.0, 65)
    nu, mu = munu_constants(0.4)
    r = orc_reduction(PolyField.constant(nu), PolyField.constant(mu), kink_liouville_phi(1.3, 0.4), g)
    assert r.variant == "munu"
    assert r.liouville.max_abs < 1e-12
    bound = 2 * r.liouville.max_abs + 10 * g.h**2
    assert all(v.max_abs <= bound for v in r.eom.values())
    assert r.fields.is_real(1e-12)


def test_orc_implication_with_perturbation():
    g = Grid.square(1.0, 65)
    nu, mu = munu_constants(0.4)
    r = orc_reduction(PolyField.constant(nu), PolyField.constant(mu), kink_liouville_phi(1.3, 0.4, eps=1e-3), g)
    eps = r.liouville.max_abs
    assert 1e-4 < eps < 1e-2
    assert all(v.max_abs <= 2 * eps + 10 * g.h**2 for v in r.eom.values())


def test_orc_inconsistent_constants():
    g = Grid.square(1.0, 33)
    with pytest.raises(InconsistencyError):
        orc_reduction(PolyField.constant(1.0), PolyField.constant(1.0), kink_liouville_phi(1.3, 0.4), g)


def test_orc_variant_guards():
    g = Grid.square(1.0, 17)
    with pytest.raises(ValueError):
        orc_reduction(PolyField.z(), PolyField.z(), 0.0, g, variant="munu")
    with pytest.raises(ValueError):
        orc_reduction(PolyField.z(), PolyField.z(), 0.0, g, variant="other")


def test_bc_frame_on_special_solution():
    g = Grid.square(1.0, 65)
    nu, mu = munu_constants(0.4)
    r = orc_reduction(PolyField.constant(nu), PolyField.constant(mu), kink_liouville_phi(1.3, 0.4), g)
    bc = bc_frame_check(r.fields, g)
    assert bc.off_diagonal.max_abs < 1e-5
    assert bc.conjugation.max_abs < 1e-8
    assert bc.diagonal_formula.max_abs < 1e-8


def test_bc_ratio_holomorphic_example():
    # phi = 0, x = zbar, y = z^2/4 + z: the diagonal entry is -(z/2 + 1), holomorphic
    g = Grid.square(1.0, 33)
    f = GaussFields(lambda x, y: x - 1j * y, lambda x, y: (x + 1j * y) ** 2 / 4 + x + 1j * y,
                    lambda x, y: jnp.zeros(jnp.shape(x)) + 0j)
    bc = bc_frame_check(f, g)
    assert bc.off_diagonal.max_abs < 1e-12
    assert bc.ratio_holomorphic is not None and bc.ratio_holomorphic.max_abs < 1e-10
    Z = g.Z
    assert np.abs(bc.diagonal.values + (Z / 2 + 1)).max() < 1e-12
