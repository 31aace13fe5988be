from dataclasses import replace

import jax
import jax.numpy as jnp
import numpy as np
import pytest

from todamaps.affine_algebra import H
from todamaps.field_grid import Grid, PolyField, residual, su2_grid
from todamaps.lax_connection import Connection, Pencil, curvature, pencil_curvature
from todamaps.lie_core import build_sl_chevalley
from todamaps.toda_systems import (
    CatFields,
    HypothesisViolationError,
    LimitNotApplicableError,
    ShapeError,
    TodaData,
    branch_jumps,
    cat_connection,
    cat_limits,
    cat_pencil,
    cat_residual,
    cat_solution,
    curvature_cartan_part,
    expected_cartan_part,
    kink_profile,
    leznov_saveliev_connection,
    liouville_cat_fields,
    random_result4_pencil,
    random_theorem2_instance,
    result4_reduce,
    result4_shape_check,
    sl2_liouville_data,
    theorem2_instance,
    theorem2_reduce,
    toda_from_curvature,
    toda_residual,
    toda_residual_fields,
)

jax.config.update("jax_enable_x64", True)


@pytest.fixture(scope="module")
def small():
    return Grid.square(0.75, 33)


def test_sl2_liouville_is_a_toda_solution():
    g = su2_grid(33)
    d = sl2_liouville_data()
    assert toda_residual(d, g)[0].max_abs < 1e-12
    assert residual(curvature(leznov_saveliev_connection(d, g))).max_abs < 1e-12


def test_wrong_coupling_breaks_toda():
    g = su2_grid(33)
    d = sl2_liouville_data()
    bad = TodaData.canonical(d.basis, d.phi, alpha=1.0, beta=1.0)
    assert toda_residual(bad, g)[0].max_abs > 0.1


def test_sl2_family_needs_unit_derivative():
    with pytest.raises(ValueError):
        sl2_liouville_data(PolyField.holomorphic([0, 0, 1]))


@pytest.mark.parametrize("n", [3, 4])
def test_curvature_cartan_part_is_toda(n):
    g = Grid.square(1.0, 17)
    rng = np.random.default_rng(n)
    b = build_sl_chevalley(n)
    phis = []
    for _ in range(b.rank):
        c = rng.normal(size=3)
        phis.append(lambda x, y, c=c: c[0] * x * y + c[1] * jnp.sin(x) + c[2] * y**2)
    d = TodaData.canonical(b, phis, alpha=0.8, beta=1.3)
    R = np.stack([f.values for f in toda_residual_fields(d, g)])
    assert np.abs(R).max() > 1e-2
    assert np.abs(toda_from_curvature(d, g) - R).max() < 1e-9
    assert np.abs(curvature_cartan_part(d, g) - expected_cartan_part(d, g)).max() < 1e-9


def test_toda_data_validates_rank():
    with pytest.raises(ValueError):
        TodaData(build_sl_chevalley(3), (0.0,), (0.0,))


def test_kink_profile_ode():
    w, Xi = kink_profile(0.2)
    x = jnp.linspace(0.5, 2.0, 7)
    w2 = jax.vmap(jax.grad(jax.grad(w)))(x)
    Xi2 = jax.vmap(jax.grad(jax.grad(Xi)))(x)
    assert np.allclose(w2, 8 * np.sinh(2 * w(x)), rtol=1e-10)
    assert np.allclose(Xi2, 4 * np.exp(-2 * w(x)), rtol=1e-10)


@pytest.mark.parametrize("F", ["2,0.8,0.1", "2.5,1j", "3,0.5,0,0.05"])
def test_cat_solution_residuals(F, small):
    from todamaps.field_grid import parse_poly

    sol = cat_solution(parse_poly(F))
    for k, v in cat_residual(sol.fields, small).items():
        assert v.max_abs < 1e-8, k
    pc = pencil_curvature(cat_connection(sol.fields, small), (1.0, 2j))
    assert pc.max_abs < 1e-8


def test_cat_connection_detects_non_solution(small):
    # phi = x/10, eta = xi = 0: the phi residual is -2 sinh(x/5) (times H) and
    # the xi residual -e^{-x/5} sits in the central direction
    f = CatFields(lambda x, y: 0.1 * x, 0.0, 0.0)
    pc = pencil_curvature(cat_connection(f, small))
    assert pc.coefficients["lambda^0"].max_abs == pytest.approx(np.sqrt(2) * 2 * np.sinh(0.15), rel=1e-12)
    assert pc.coefficients["c"].max_abs == pytest.approx(np.exp(0.15), rel=1e-12)
    assert pc.coefficients["lambda^1"].max_abs == 0 and pc.coefficients["lambda^-1"].max_abs == 0


def test_cat_matrix_pencil_flat_for_constant_eta(small):
    sol = cat_solution(PolyField.holomorphic([2.0, np.exp(0.3j)]))
    assert pencil_curvature(cat_pencil(sol.fields, small), (1.0, -1.0)).max_abs < 1e-9


def test_cat_limits(small):
    sol = cat_solution(PolyField.holomorphic([2.0, 1.0]))
    assert cat_limits(sol.fields, "sinh", small).max_abs < 1e-9
    g = Grid.square(0.6, 33)
    assert cat_limits(liouville_cat_fields(eta=-20.0), "liouville", g).max_abs < 1e-6
    with pytest.raises(LimitNotApplicableError):
        cat_limits(liouville_cat_fields(eta=0.0), "liouville", g)
    with pytest.raises(LimitNotApplicableError):
        cat_limits(liouville_cat_fields(eta=-20.0), "sinh", g)
    with pytest.raises(ValueError):
        cat_limits(sol.fields, "kdv", small)


def test_branch_jumps():
    v = np.log(np.array([[np.exp(3.1j), np.exp(-3.1j), np.exp(-3.0j)]]))
    assert branch_jumps(v) == 1
    assert branch_jumps(v, np.array([[False, True, False]])) == 0


@pytest.mark.parametrize("seed", [0, 7])
def test_theorem2_reduction(seed, small):
    inst = random_theorem2_instance(np.random.default_rng(seed))
    r = theorem2_reduce(inst.f, inst.fprime, inst.theta, small)
    assert max(v.max_abs for v in r.cat.values()) < 1e-8
    assert r.curvature.max_abs < 1e-8
    assert r.xi_closure < 1e-8
    # reduced phi and eta agree with the generating solution
    sol = inst.solution.fields
    assert np.abs(small.evaluate(r.fields.phi) - small.evaluate(sol.phi)).max() < 1e-12
    assert np.abs(small.evaluate(r.fields.eta) - small.evaluate(sol.eta)).max() < 1e-12


def test_theorem2_needs_central_term(small):
    inst = theorem2_instance(PolyField.holomorphic([2.0, 0.8, 0.1]), central=False)
    r = theorem2_reduce(inst.f, inst.fprime, inst.theta, small)
    assert r.cat["xi"].max_abs > 0.1


@pytest.mark.parametrize("field_name", ["beta", "beta_p", "alpha", "gamma_p"])
def test_theorem2_gate(field_name, small):
    inst = random_theorem2_instance(np.random.default_rng(1))
    old = getattr(inst.theta, field_name)
    bad = replace(inst.theta, **{field_name: lambda x, y: old(x, y) + 0.1})
    with pytest.raises(HypothesisViolationError) as e:
        theorem2_reduce(inst.f, inst.fprime, bad, small)
    assert e.value.residuals


@pytest.mark.parametrize("seed", [3, 11])
def test_result4_reduction(seed, small):
    inst = random_result4_pencil(np.random.default_rng(seed), small)
    assert pencil_curvature(inst.pencil, (1.0, 0.5j)).max_abs < 1e-8
    r = result4_reduce(inst.pencil)
    assert r.residuals["affine_toda"].max_abs < 1e-8
    for k in ("dzbar_ln_g+", "dz_ln_f-", "dzbar_ln_f'+", "dz_ln_g'-"):
        assert r.residuals[k].max_abs < 1e-8
    holo = 10 * small.h**2
    assert r.residuals["holomorphic_eta+"].max_abs < holo
    assert r.residuals["antiholomorphic_eta-"].max_abs < holo
    phi = small.evaluate(r.fields.phi[(1,)])
    assert np.abs(phi - small.evaluate(inst.phi)).max() < 1e-12


def test_result4_orientation_independent(small):
    inst = random_result4_pencil(np.random.default_rng(5), small)
    a = result4_reduce(inst.pencil).residuals["affine_toda"].max_abs
    b = result4_reduce(inst.pencil.flipped()).residuals["affine_toda"].max_abs
    assert a == b


def test_result4_shape_rejection(small):
    inst = random_result4_pencil(np.random.default_rng(2), small)
    p = inst.pencil
    bz = p.B.az
    diag = Pencil(p.A, Connection(small, lambda x, y: bz(x, y) + 0.5 * np.asarray(H, complex), p.B.azbar),
                  orientation="z")
    v = result4_shape_check(diag, build_sl_chevalley(2))
    assert not v.ok and "A'_z.h[0]" in v.offending
    with pytest.raises(ShapeError):
        result4_reduce(diag)
    assert result4_shape_check(p, build_sl_chevalley(2)).ok


def test_result4_rejects_higher_rank(small):
    inst = random_result4_pencil(np.random.default_rng(0), small)
    with pytest.raises(ValueError):
        result4_reduce(inst.pencil, build_sl_chevalley(3))
