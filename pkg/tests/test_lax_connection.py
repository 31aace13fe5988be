import jax.numpy as jnp
import numpy as np
import pytest

from todamaps.field_grid import Grid, residual
from todamaps.lax_connection import (
    Connection,
    FlatnessError,
    GaugeFrame,
    InvalidParameterError,
    Pencil,
    SingularFrameError,
    curvature,
    gauge_conjugate,
    gauge_transform,
    pencil_curvature,
    trivialize,
)

EP = np.array([[0, 1], [0, 0]], complex)
EM = np.array([[0, 0], [1, 0]], complex)
H = np.array([[1, 0], [0, -1]], complex)


def const(m):
    m = jnp.asarray(m)
    return lambda x, y: jnp.broadcast_to(m, jnp.shape(x) + m.shape)


def unipotent(x, y):
    # u = [[1, z], [0, 1]], so u^-1 du has A_z = E+ and A_zbar = 0
    z = x + 1j * y
    one = jnp.ones_like(z)
    zero = jnp.zeros_like(z)
    return jnp.stack([jnp.stack([one, z], -1), jnp.stack([zero, one], -1)], -2)


@pytest.fixture
def grid():
    return Grid.square(1.0, 33)


def test_constant_curvature_is_commutator(grid):
    F = curvature(Connection(grid, const(EP), const(EM)))
    assert residual(F - H).max_abs < 1e-14


def test_fd_and_analytic_curvature_agree(grid):
    conn = Connection(grid, lambda x, y: (x * y)[..., None, None] * H, lambda x, y: (x**2)[..., None, None] * EP)
    Fa = curvature(conn)
    Ff = curvature(conn.sampled(), "fd", order=4)
    assert residual(Fa - Ff).max_abs < 1e-10


def test_trivialize_recovers_frame(grid):
    conn = Connection(grid, const(EP), const(np.zeros((2, 2))))
    u = trivialize(conn)
    assert np.abs(u.u - grid.evaluate(unipotent)).max() < 1e-12
    assert u.plaquette_defect < 1e-12 and u.path_defect < 1e-12


def test_trivialize_rejects_curved(grid):
    with pytest.raises(FlatnessError):
        trivialize(Connection(grid, const(EP), const(EM)))


def test_gauge_transform_of_zero_is_pure_gauge(grid):
    frame = GaugeFrame.analytic(grid, unipotent)
    out = gauge_transform(Connection.zero(grid, 2), frame)
    az, azbar = out.values()
    assert np.abs(az - EP).max() < 1e-14 and np.abs(azbar).max() < 1e-14
    assert residual(curvature(out)).max_abs < 1e-14


def test_gauge_transform_preserves_flatness_sampled(grid):
    frame = GaugeFrame(grid, grid.evaluate(unipotent))
    conn = Connection(grid, const(H), const(np.zeros((2, 2))))
    out = gauge_transform(conn, frame)
    assert out.mask[:, :2].all()
    az, _ = out.conn.values()
    exact = np.linalg.inv(frame.u) @ H @ frame.u + EP
    assert np.abs(az - exact)[~out.mask].max() < 1e-10


def test_gauge_conjugate_analytic(grid):
    frame = GaugeFrame.analytic(grid, unipotent)
    out = gauge_conjugate(Connection(grid, const(EM), const(EM)), frame)
    u = grid.evaluate(unipotent)
    assert np.abs(out.values()[0] - np.linalg.inv(u) @ EM @ u).max() < 1e-13


def test_singular_frame_rejected(grid):
    with pytest.raises(SingularFrameError):
        GaugeFrame(grid, np.zeros((33, 33, 2, 2)))


def test_pencil_orientation_and_zero_lambda(grid):
    A = Connection(grid, const(H), const(-H))
    B = Connection(grid, const(EP), const(EM))
    p = Pencil(A, B)
    with pytest.raises(InvalidParameterError):
        p.at(0)
    lam = 0.5 + 0.3j
    a1 = p.at(lam).values()
    a2 = p.flipped().at(1 / lam).values()
    assert np.allclose(a1[0], a2[0]) and np.allclose(a1[1], a2[1])
    with pytest.raises(ValueError):
        Pencil(A, B, "w")


def test_pencil_coefficients(grid):
    A = Connection.zero(grid, 2)
    B = Connection(grid, const(EP), const(EM))
    rep = pencil_curvature(Pencil(A, B), (1.0, 2.0))
    # l^-1 l cancels: only the l^0 term [E+, E-] = H survives
    assert rep.coefficients[-1].max_abs == 0 and rep.coefficients[1].max_abs == 0
    assert rep.coefficients[0].max_abs == pytest.approx(np.sqrt(2))
    with pytest.raises(InvalidParameterError):
        pencil_curvature(Pencil(A, B), (0.0,))


def test_connection_validation(grid):
    with pytest.raises(ValueError):
        Connection(grid, const(H), np.zeros((33, 33, 2, 2)))
    with pytest.raises(ValueError):
        Connection(grid, np.zeros((5, 5, 2, 2)), np.zeros((5, 5, 2, 2)))
