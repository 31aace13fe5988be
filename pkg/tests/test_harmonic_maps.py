import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from todamaps.field_grid import Grid, GridField, PolyField, SingularityError, parse_poly, residual
from todamaps.harmonic_maps import (
    ExtendedSolutionSample,
    GroupError,
    UnsupportedOrderError,
    chi_closed_form,
    chi_field,
    commutator_diagonalizer,
    default_grid,
    diagonalized_commutator,
    extended_solution_from_projector,
    gauged_uniton_pencil,
    harmonic_map_evaluator,
    harmonic_map_from_projector,
    harmonic_residual,
    jacobi_eigh_2x2,
    liouville_density,
    liouville_residual,
    sdcs_gauge_check,
    sdcs_residual,
    signature_matrix,
    uniton_projector,
    uniton_harmonic_residual,
    uniton_sdcs,
)
from todamaps.harmonic_maps import ProjectorField, projector_evaluator
from todamaps.harmonic_maps import verify_extended_solution
from todamaps.lax_connection import pencil_curvature, uhlenbeck_form

POLYS = ["0,1", "0,0,1", "0,1,0,0.3", "0.1,0.5,0,0,0.2"]


@pytest.mark.parametrize("signature", ["su2", "su11"])
@pytest.mark.parametrize("f", POLYS)
def test_projector_invariants_and_harmonicity(signature, f):
    f = parse_poly(f)
    g = default_grid(f, signature, 33)
    p = uniton_projector(f, signature, g)
    for k, v in p.invariants().items():
        assert v.max_abs < 1e-10, k
    assert harmonic_residual(harmonic_map_evaluator(p), g).max_abs < 1e-8


def test_harmonic_map_is_involution_times_q():
    f = PolyField.z()
    p = uniton_projector(f, "su2", Grid.square(1.0, 17))
    Q = np.array([[0, 1], [-1, 0]], complex)
    h = harmonic_map_from_projector(p, Q)
    hq = np.linalg.inv(Q) @ h.values
    assert np.abs(hq @ hq - np.eye(2)).max() < 1e-12
    with pytest.raises(GroupError):
        harmonic_map_from_projector(p, 2 * np.eye(2))


def test_fd_harmonic_residual_converges_su2():
    f = parse_poly("0,1,0.3")
    errs = []
    for n in (33, 65):
        g = default_grid(f, "su2", n)
        h = harmonic_map_from_projector(uniton_projector(f, "su2", g))
        errs.append(harmonic_residual(h).max_abs)
    assert errs[1] <= 10 * default_grid(f, "su2", 65).h ** 2
    assert errs[0] / errs[1] > 8


def test_non_harmonic_map_detected():
    g = Grid.square(1.0, 17)
    # h = 1 + 0.3 x^2 E+ is nilpotent-shifted, residual 2 * 0.3 * dd(x^2) = 0.3 exactly
    h = lambda x, y: np.eye(2) + 0.3 * (x * x)[..., None, None] * np.array([[0, 1], [0, 0]])
    assert harmonic_residual(h, g).max_abs == pytest.approx(0.3, abs=1e-12)
    with pytest.raises(ValueError):
        harmonic_residual(h)


def test_su11_requires_disk():
    with pytest.raises(SingularityError):
        uniton_projector(PolyField.z(), "su11", Grid.square(1.5, 17))
    with pytest.raises(ValueError):
        uniton_projector(PolyField({(0, 1): 1}), "su2")
    with pytest.raises(ValueError):
        signature_matrix("so3")


@pytest.mark.parametrize("signature", ["su2", "su11"])
def test_chi_closed_form_matches_map(signature):
    f = parse_poly("0.2,1,0.4")
    g = default_grid(f, signature, 21)
    p = uniton_projector(f, signature, g)
    chi = chi_field(harmonic_map_evaluator(p), g)
    exact = g.evaluate(chi_closed_form(f, signature))
    use = ~g.mask
    # chi grows like (1 - |f|^2)^-2 near the su11 mask edge, so compare relatively
    assert np.abs(chi.values - exact)[use].max() < 1e-12 * max(1.0, np.abs(exact)[use].max())


@pytest.mark.parametrize("signature", ["su2", "su11"])
@pytest.mark.parametrize("f", ["0,1", "0,0,1"])
def test_density_equals_diagonalized_commutator(signature, f):
    f = parse_poly(f)
    g = default_grid(f, signature, 33)
    dens = liouville_density(f, signature, g)
    dc = diagonalized_commutator(f, signature, g)
    use = ~g.mask
    assert np.abs(np.abs(dc.values[..., 0, 0]) - dens.density.values.real)[use].max() < 1e-9
    scale = max(1.0, np.abs(dc.values)[use].max())
    assert np.abs(dc.values[..., 0, 1])[use].max() < 1e-12 * scale
    assert np.abs(dens.log_det_laplacian.values - dens.density.values)[use].max() < 1e-9


@pytest.mark.parametrize("signature", ["su2", "su11"])
def test_diagonalizer_in_group(signature):
    f = parse_poly("0,0.7")
    fr = commutator_diagonalizer(f, signature, default_grid(f, signature, 17))
    J = signature_matrix(signature)
    u = fr.u
    assert np.abs(np.conj(np.swapaxes(u, -1, -2)) @ J @ u - J)[~fr.mask].max() < 1e-12


@pytest.mark.parametrize("signature", ["su2", "su11"])
def test_liouville_residual(signature):
    f = parse_poly("0,1,0,0.3")
    g = default_grid(f, signature, 33)
    assert residual(liouville_residual(f, signature, g)).max_abs < 1e-8


def test_density_at_origin_for_z():
    ld = liouville_density(PolyField.z(), "su2", Grid.square(1.5, 97))
    assert ld.density.values[48, 48].real == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_jacobi_eigh_matches_numpy(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(5, 2, 2)) + 1j * rng.normal(size=(5, 2, 2))
    m = a + np.conj(np.swapaxes(a, -1, -2))
    vals, vecs = jacobi_eigh_2x2(m)
    assert np.abs(m @ vecs - vecs * vals[..., None, :]).max() < 1e-12
    assert np.abs(np.conj(np.swapaxes(vecs, -1, -2)) @ vecs - np.eye(2)).max() < 1e-12


@pytest.mark.parametrize("signature", ["su2", "su11"])
def test_extended_solution_conditions(signature):
    f = parse_poly("0,0.8,0.1")
    g = default_grid(f, signature, 21)
    p = uniton_projector(f, signature, g)
    # E_{-1} = 2p - 1 = s and s^2 = 1, so (c) holds with Q = 1
    out = verify_extended_solution(extended_solution_from_projector(p), harmonic_map_from_projector(p))
    for k, v in out.items():
        assert v < 1e-10, k


def test_extended_solution_order_guard():
    f = PolyField.z()
    p = uniton_projector(f, "su2", Grid.square(1.0, 9))
    e = ExtendedSolutionSample((p.p, p.p, p.p), np.eye(2), np.eye(2))
    with pytest.raises(UnsupportedOrderError):
        verify_extended_solution(e, harmonic_map_from_projector(p))


def test_sdcs_equations_and_gauge_identity():
    g = Grid.square(1.0, 25)
    d = uniton_sdcs(parse_poly("0,1,0.2"), 2.0, g)
    for k, v in sdcs_residual(d).items():
        assert v.max_abs < 1e-10, k
    gc = sdcs_gauge_check(d)
    assert gc.chi_equation.max_abs < 1e-6 and gc.identity.max_abs < 1e-8 and gc.flatness.max_abs < 1e-10


def test_sdcs_identity_off_shell():
    import jax.numpy as jnp

    g = Grid.square(1.0, 25)
    pert = lambda x, y: 0.05 * jnp.stack([jnp.stack([x * y, x + 0j * y], -1),
                                          jnp.stack([y * y + 0j, -x * y], -1)], -2)
    d = uniton_sdcs(PolyField.z(), 3.0, g, perturb=pert)
    gc = sdcs_gauge_check(d, use_frame=True)
    assert gc.field_strength.max_abs > 1e-3
    assert gc.identity.max_abs < 1e-8
    with pytest.raises(ValueError):
        uniton_sdcs(PolyField.z(), -1.0, g)


def test_gauged_pencil_is_flat_and_normal_form_recovered():
    f = parse_poly("0.1,1,0.3")
    g = Grid.square(0.6, 33)
    p, atz, atzb = gauged_uniton_pencil(f, g)
    assert pencil_curvature(p, (1.0, 2.0)).max_abs < 1e-10
    A_t, rep = uhlenbeck_form(p)
    for lam, r in rep.match.items():
        assert r.max_abs < 1e-6, lam
    # At is gauge-covariant: compare with the known normal form up to the frame at the basepoint
    assert rep.harmonic.max_abs < 1e-3


def test_commutator_form_matches_expanded_form_off_shell():
    # p built from a non-holomorphic f is still a J-hermitian projector, but 2p - 1 is not harmonic
    f = PolyField({(1, 0): 1, (1, 1): 0.3})
    g = Grid.square(0.5, 17)
    for sig in ("su2", "su11"):
        fn = projector_evaluator(f, sig)
        p = ProjectorField(g, g.evaluate(fn), sig, f, fn)
        a = uniton_harmonic_residual(p)
        b = harmonic_residual(harmonic_map_evaluator(p), g)
        assert a.max_abs > 0.1
        assert a.max_abs == pytest.approx(b.max_abs, rel=1e-10)


@pytest.mark.parametrize("f", POLYS)
def test_commutator_form_su11_to_disk_edge(f):
    f = parse_poly(f)
    g = default_grid(f, "su11", 96)
    assert uniton_harmonic_residual(uniton_projector(f, "su11", g)).max_abs < 1e-8
