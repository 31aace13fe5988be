"""Connections, curvature, spectral pencils, gauge frames and trivialization.

Conventions used throughout:

* curvature ``F = d_z A_zbar - d_zbar A_z + [A_z, A_zbar]``;
* a flat connection is pure gauge, ``A = u^-1 du``, and :func:`trivialize`
  returns that ``u`` normalized to the identity at the basepoint;
* gauge action ``A -> u^-1 A u + u^-1 du``.

Components are either evaluators ``fn(x, y)`` (differentiated exactly with
jax) or sampled arrays of shape ``(ny, nx, n, n)`` (differentiated with
central differences).  Evaluators may also return
:class:`~todamaps.affine_algebra.AffineElement` values, in which case the
bracket is the affine one.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np

from .affine_algebra import AffineElement, loop_bracket
from .field_grid import (
    GridField,
    Grid,
    ResidualReport,
    d_z,
    d_zbar,
    fd_dz,
    fd_dzbar,
    residual,
)


class FlatnessError(ValueError):
    def __init__(self, msg: str, report: ResidualReport | None = None):
        super().__init__(msg)
        self.report = report


class IntegrationOverflowError(ArithmeticError):
    pass


class SingularFrameError(ValueError):
    pass


class InvalidParameterError(ValueError):
    pass


def bracket(X, Y):
    if isinstance(X, AffineElement):
        return loop_bracket(X, Y)
    return X @ Y - Y @ X


def _inv(u):
    return jnp.linalg.inv(u) if isinstance(u, jax.Array) else np.linalg.inv(u)


@dataclass(frozen=True)
class Connection:
    """Components ``(A_z, A_zbar)``: evaluators or sampled arrays on ``grid``."""

    grid: Grid
    az: object
    azbar: object

    def __post_init__(self):
        if callable(self.az) != callable(self.azbar):
            raise ValueError("components must both be analytic or both sampled")
        if not callable(self.az):
            a, b = np.asarray(self.az), np.asarray(self.azbar)
            want = (self.grid.ny, self.grid.nx)
            if a.shape != b.shape or a.shape[:2] != want:
                raise ValueError("sampled components do not match the grid")
            object.__setattr__(self, "az", a)
            object.__setattr__(self, "azbar", b)

    @property
    def is_analytic(self) -> bool:
        return callable(self.az)

    @classmethod
    def zero(cls, grid: Grid, n: int) -> "Connection":
        z = lambda x, y: jnp.zeros(jnp.shape(x) + (n, n), dtype=complex)
        return cls(grid, z, z)

    def values(self):
        """Sampled ``(A_z, A_zbar)`` on the grid."""
        if self.is_analytic:
            return self.grid.evaluate(self.az), self.grid.evaluate(self.azbar)
        return self.az, self.azbar

    @property
    def dim(self) -> int:
        a = self.values()[0]
        if isinstance(a, AffineElement):
            return 2
        return a.shape[-1]

    def __add__(self, other: "Connection") -> "Connection":
        if self.is_analytic and other.is_analytic:
            return Connection(self.grid,
                              lambda x, y: self.az(x, y) + other.az(x, y),
                              lambda x, y: self.azbar(x, y) + other.azbar(x, y))
        (a, b), (c, d) = self.values(), other.values()
        return Connection(self.grid, a + c, b + d)

    def scaled(self, sz, szbar=None) -> "Connection":
        """Multiply the components by constants ``sz`` and ``szbar``."""
        szbar = sz if szbar is None else szbar
        if self.is_analytic:
            return Connection(self.grid, lambda x, y: sz * self.az(x, y), lambda x, y: szbar * self.azbar(x, y))
        return Connection(self.grid, sz * self.az, szbar * self.azbar)

    def sampled(self) -> "Connection":
        a, b = self.values()
        return Connection(self.grid, a, b)


def curvature_evaluator(conn: Connection):
    if not conn.is_analytic:
        raise ValueError("connection has no analytic evaluators")
    dza, dzb = d_z(conn.azbar), d_zbar(conn.az)

    def F(x, y):
        return dza(x, y) - dzb(x, y) + bracket(conn.az(x, y), conn.azbar(x, y))

    return F


def curvature(conn: Connection, method: str = "auto", order: int = 2):
    """Curvature on the grid: a matrix GridField, or an AffineElement of arrays."""
    if method == "auto":
        method = "analytic" if conn.is_analytic else "fd"
    if method == "analytic":
        return _as_field(conn.grid, conn.grid.evaluate(curvature_evaluator(conn)))
    az, azbar = conn.values()
    if isinstance(az, AffineElement):
        raise ValueError("finite-difference curvature needs matrix components")
    g = conn.grid
    A, B = GridField(g, az), GridField(g, azbar)
    return fd_dz(B, order) - fd_dzbar(A, order) + GridField(g, az @ azbar - azbar @ az)


def _as_field(grid, values):
    return values if isinstance(values, AffineElement) else GridField(grid, values)


def affine_residuals(grid: Grid, F: AffineElement, mask=None) -> dict[str, ResidualReport]:
    """Per-λ-degree reports of an affine-valued field plus its c and d parts."""
    mask = grid.mask if mask is None else mask
    out = {}
    for k, m in F.laurent.items():
        out[f"lambda^{k}"] = residual(GridField(grid, np.asarray(m), mask))
    for name, v in (("c", F.c_coeff), ("d", F.d_coeff)):
        v = np.broadcast_to(np.asarray(v), (grid.ny, grid.nx))
        out[name] = residual(GridField(grid, v, mask))
    return out


def field_residual(grid: Grid, F) -> ResidualReport:
    if isinstance(F, AffineElement):
        norm = F.norm()
        return residual(GridField(grid, np.broadcast_to(norm, (grid.ny, grid.nx))))
    return residual(F)


# ---------------------------------------------------------------------------
# pencils


@dataclass(frozen=True)
class Pencil:
    """``(A_z + l^-1 B_z, A_zbar + l B_zbar)``.

    ``orientation="z"`` swaps the roles, giving ``(A_z + l B_z,
    A_zbar + l^-1 B_zbar)``; the two are related by ``l -> 1/l``.
    """

    A: Connection
    B: Connection
    orientation: str = "zbar"

    def __post_init__(self):
        if self.orientation not in ("z", "zbar"):
            raise ValueError("orientation must be 'z' or 'zbar'")
        if self.A.grid != self.B.grid:
            raise ValueError("A and B live on different grids")

    def _powers(self, lam):
        return (1 / lam, lam) if self.orientation == "zbar" else (lam, 1 / lam)

    def at(self, lam) -> Connection:
        if lam == 0:
            raise InvalidParameterError("spectral parameter must be nonzero")
        pz, pzbar = self._powers(lam)
        return self.A + self.B.scaled(pz, pzbar)

    def flipped(self) -> "Pencil":
        return Pencil(self.A, self.B, "z" if self.orientation == "zbar" else "zbar")

    def coefficient_evaluators(self):
        """Curvature coefficients of λ^-1, λ^0, λ^1 as evaluators."""
        A, B = self.A, self.B
        FA = curvature_evaluator(A)
        dz_bzbar, dzbar_bz = d_z(B.azbar), d_zbar(B.az)

        def c0(x, y):
            return FA(x, y) + bracket(B.az(x, y), B.azbar(x, y))

        def c_zbar(x, y):  # the power carried by B_zbar
            return dz_bzbar(x, y) + bracket(A.az(x, y), B.azbar(x, y))

        def c_z(x, y):  # the power carried by B_z
            return -dzbar_bz(x, y) + bracket(B.az(x, y), A.azbar(x, y))

        if self.orientation == "zbar":
            return {-1: c_z, 0: c0, 1: c_zbar}
        return {-1: c_zbar, 0: c0, 1: c_z}

    def coefficient_values(self) -> dict[int, np.ndarray]:
        if self.A.is_analytic and self.B.is_analytic:
            return {k: self.A.grid.evaluate(fn) for k, fn in self.coefficient_evaluators().items()}
        g = self.A.grid
        (az, azbar), (bz, bzbar) = self.A.values(), self.B.values()
        FA = curvature(self.A.sampled(), "fd")
        c0 = FA + GridField(g, bz @ bzbar - bzbar @ bz)
        c_zbar = fd_dz(GridField(g, bzbar)) + GridField(g, az @ bzbar - bzbar @ az)
        c_z = GridField(g, bz @ azbar - azbar @ bz) - fd_dzbar(GridField(g, bz))
        pair = {-1: c_z, 1: c_zbar} if self.orientation == "zbar" else {-1: c_zbar, 1: c_z}
        pair[0] = c0
        return pair


@dataclass(frozen=True)
class PencilReport:
    coefficients: dict[int, ResidualReport]
    samples: dict[complex, ResidualReport]

    @property
    def max_abs(self) -> float:
        vals = [r.max_abs for r in self.coefficients.values()] + [r.max_abs for r in self.samples.values()]
        return max(vals)

    def to_dict(self) -> dict:
        return {
            "coefficients": {f"lambda^{k}": r.to_dict() for k, r in sorted(self.coefficients.items())},
            "samples": {f"{complex(l)}": r.to_dict() for l, r in self.samples.items()},
        }


def pencil_curvature(p, lambdas=(1.0,)) -> PencilReport:
    """Curvature of a pencil split by powers of λ, plus residuals at sample λ.

    ``p`` is a :class:`Pencil` or an affine-valued :class:`Connection` (the
    spectral parameter then lives in the Laurent degree; c and d parts are
    reported under keys ``"c"`` and ``"d"``).
    """
    lambdas = list(lambdas)
    if any(l == 0 for l in lambdas):
        raise InvalidParameterError("spectral parameter must be nonzero")
    if isinstance(p, Connection):
        g = p.grid
        F = g.evaluate(curvature_evaluator(p))
        coeffs = affine_residuals(g, F)
        samples = {}
        for lam in lambdas:
            samples[lam] = residual(GridField(g, np.asarray(F.evaluate(lam))))
        return PencilReport(coeffs, samples)
    vals = p.coefficient_values()
    g = p.A.grid
    coeffs = {k: residual(v if isinstance(v, GridField) else GridField(g, v)) for k, v in vals.items()}
    samples = {}
    for lam in lambdas:
        tot = None
        for k, v in vals.items():
            arr = v.values if isinstance(v, GridField) else v
            term = lam**k * arr
            tot = term if tot is None else tot + term
        mask = np.zeros((g.ny, g.nx), dtype=bool)
        for v in vals.values():
            if isinstance(v, GridField):
                mask |= v.mask
        samples[lam] = residual(GridField(g, tot, mask | g.mask))
    return PencilReport(coeffs, samples)


# ---------------------------------------------------------------------------
# frames and trivialization


@dataclass(frozen=True)
class GaugeFrame:
    """Invertible matrix field ``u`` with ``u(basepoint) = I``.

    ``fn`` keeps a closed-form evaluator when one is known, so derivatives of
    ``u`` can be taken exactly.
    """

    grid: Grid
    u: np.ndarray
    basepoint: tuple[float, float] = (0.0, 0.0)
    fn: object = None
    plaquette_defect: float = 0.0
    path_defect: float = 0.0
    mask: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mask is None:
            object.__setattr__(self, "mask", self.grid.mask.copy())
        det = np.abs(np.linalg.det(self.u))
        if np.any(det[~self.mask] < 1e-8):
            raise SingularFrameError("frame is singular at some grid point")

    @classmethod
    def analytic(cls, grid: Grid, fn, basepoint=(0.0, 0.0)) -> "GaugeFrame":
        return cls(grid, grid.evaluate(fn), basepoint, fn)

    @classmethod
    def identity(cls, grid: Grid, n: int) -> "GaugeFrame":
        eye = np.broadcast_to(np.eye(n, dtype=complex), (grid.ny, grid.nx, n, n)).copy()
        return cls(grid, eye, fn=lambda x, y: jnp.broadcast_to(jnp.eye(n, dtype=complex), jnp.shape(x) + (n, n)))

    def inverse(self) -> "GaugeFrame":
        fn = None
        if self.fn is not None:
            f = self.fn
            fn = lambda x, y: jnp.linalg.inv(f(x, y))
        return GaugeFrame(self.grid, np.linalg.inv(self.u), self.basepoint, fn, self.plaquette_defect,
                          self.path_defect, self.mask)

    def derivatives(self, order: int = 4):
        """``(d_z u, d_zbar u)`` as GridFields (exact when ``fn`` is known)."""
        g = self.grid
        if self.fn is not None:
            return GridField(g, g.evaluate(d_z(self.fn)), self.mask), GridField(g, g.evaluate(d_zbar(self.fn)), self.mask)
        U = GridField(g, self.u, self.mask)
        return fd_dz(U, order), fd_dzbar(U, order)


def _rk4_propagators(M0, Mh, M1, h):
    """One RK4 step of ``u' = u M`` applied to the identity: returns T with u_next = u T."""
    n = M0.shape[-1]
    eye = np.eye(n)
    k1 = M0
    k2 = (eye + 0.5 * h * k1) @ Mh
    k3 = (eye + 0.5 * h * k2) @ Mh
    k4 = (eye + h * k3) @ M1
    return eye + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _midpoints(v: np.ndarray, axis: int) -> np.ndarray:
    """Fourth-order interpolation to midpoints along ``axis`` (n-1 values)."""
    v = np.moveaxis(v, axis, 0)
    n = v.shape[0]
    out = np.empty((n - 1,) + v.shape[1:], dtype=complex)
    out[1:-1] = (-v[:-3] + 9 * v[1:-2] + 9 * v[2:-1] - v[3:]) / 16
    out[0] = (3 * v[0] + 6 * v[1] - v[2]) / 8
    out[-1] = (3 * v[-1] + 6 * v[-2] - v[-3]) / 8
    return np.moveaxis(out, 0, axis)


def _directional(conn: Connection):
    """Returns callables giving A_x = A_z + A_zbar and A_y = i(A_z - A_zbar) on point arrays."""

    def ax(x, y):
        return np.asarray(conn.az(jnp.asarray(x), jnp.asarray(y)) + conn.azbar(jnp.asarray(x), jnp.asarray(y)))

    def ay(x, y):
        return np.asarray(1j * (conn.az(jnp.asarray(x), jnp.asarray(y)) - conn.azbar(jnp.asarray(x), jnp.asarray(y))))

    return ax, ay


def edge_propagators(conn: Connection):
    """RK4 transport matrices across every horizontal and vertical grid edge.

    Returns ``(Tx, Ty)`` of shapes ``(ny, nx-1, n, n)`` and ``(ny-1, nx, n, n)``
    so that ``u[i, j+1] = u[i, j] @ Tx[i, j]`` and ``u[i+1, j] = u[i, j] @ Ty[i, j]``.
    """
    g = conn.grid
    X, Y = g.XY
    if conn.is_analytic:
        ax, ay = _directional(conn)
        Ax, Ay = ax(X, Y), ay(X, Y)
        Xm = 0.5 * (X[:, 1:] + X[:, :-1])
        Ym = 0.5 * (Y[1:, :] + Y[:-1, :])
        Axm = ax(Xm, Y[:, 1:])
        Aym = ay(X[1:, :], Ym)
    else:
        az, azbar = conn.values()
        Ax, Ay = az + azbar, 1j * (az - azbar)
        Axm = _midpoints(Ax, 1)
        Aym = _midpoints(Ay, 0)
    Tx = _rk4_propagators(Ax[:, :-1], Axm, Ax[:, 1:], g.hx)
    Ty = _rk4_propagators(Ay[:-1, :], Aym, Ay[1:, :], g.hy)
    return Tx, Ty


def _check_overflow(u):
    if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 1e8:
        raise IntegrationOverflowError("frame norm exceeded 1e8 during integration")


def _integrate(Tx, Ty, i0, j0, x_first: bool):
    ny, nx = Tx.shape[0], Ty.shape[1]
    n = Tx.shape[-1]
    u = np.zeros((ny, nx, n, n), dtype=complex)
    u[i0, j0] = np.eye(n)
    if x_first:
        for j in range(j0 + 1, nx):
            u[i0, j] = u[i0, j - 1] @ Tx[i0, j - 1]
        for j in range(j0 - 1, -1, -1):
            u[i0, j] = u[i0, j + 1] @ np.linalg.inv(Tx[i0, j])
        for i in range(i0 + 1, ny):
            u[i] = u[i - 1] @ Ty[i - 1]
        for i in range(i0 - 1, -1, -1):
            u[i] = u[i + 1] @ np.linalg.inv(Ty[i])
    else:
        for i in range(i0 + 1, ny):
            u[i, j0] = u[i - 1, j0] @ Ty[i - 1, j0]
        for i in range(i0 - 1, -1, -1):
            u[i, j0] = u[i + 1, j0] @ np.linalg.inv(Ty[i, j0])
        for j in range(j0 + 1, nx):
            u[:, j] = u[:, j - 1] @ Tx[:, j - 1]
        for j in range(j0 - 1, -1, -1):
            u[:, j] = u[:, j + 1] @ np.linalg.inv(Tx[:, j])
        _check_overflow(u)
    _check_overflow(u)
    return u


def plaquette_defect(Tx, Ty) -> float:
    """Max over grid cells of ``|Tx(bottom) Ty(right) - Ty(left) Tx(top)|``."""
    lhs = Tx[:-1] @ Ty[:, 1:]
    rhs = Ty[:, :-1] @ Tx[1:]
    return float(np.max(np.sqrt(np.sum(np.abs(lhs - rhs) ** 2, axis=(-2, -1)))))


def trivialize(conn: Connection, basepoint=(0.0, 0.0), flatness_tol: float | None = None,
               check: bool = True) -> GaugeFrame:
    """Solve ``du = u A`` with ``u(basepoint) = I`` along the x-first staircase.

    The returned frame records the elementary plaquette closure defect and the
    maximal discrepancy between x-first and y-first staircases.
    """
    g = conn.grid
    if check:
        F = curvature(conn)
        rep = field_residual(g, F) if isinstance(F, AffineElement) else residual(F)
        tol = flatness_tol if flatness_tol is not None else (1e-6 if conn.is_analytic else 10 * g.h**2)
        if rep.max_abs > tol:
            raise FlatnessError(f"connection is not flat (max curvature {rep.max_abs:.3e})", rep)
    Tx, Ty = edge_propagators(conn)
    i0, j0 = g.index_of(basepoint)
    u = _integrate(Tx, Ty, i0, j0, True)
    u_alt = _integrate(Tx, Ty, i0, j0, False)
    path = float(np.max(np.sqrt(np.sum(np.abs(u - u_alt) ** 2, axis=(-2, -1)))))
    return GaugeFrame(g, u, (float(g.x[j0]), float(g.y[i0])), None, plaquette_defect(Tx, Ty), path)


# ---------------------------------------------------------------------------
# gauge transformations


def gauge_conjugate(conn: Connection, frame: GaugeFrame) -> Connection:
    """``u^-1 A u`` componentwise."""
    if conn.is_analytic and frame.fn is not None:
        f = frame.fn

        def conj(a):
            return lambda x, y: (lambda u: jnp.linalg.inv(u) @ a(x, y) @ u)(f(x, y))

        return Connection(conn.grid, conj(conn.az), conj(conn.azbar))
    az, azbar = conn.values()
    ui = np.linalg.inv(frame.u)
    return Connection(conn.grid, ui @ az @ frame.u, ui @ azbar @ frame.u)


@dataclass(frozen=True)
class MaskedConnection:
    """A sampled connection together with the points where it is unreliable."""

    conn: Connection
    mask: np.ndarray


def gauge_transform(conn: Connection, frame: GaugeFrame, order: int = 4):
    """``u^-1 A u + u^-1 du``.

    Exact (analytic) when both the connection and the frame have evaluators.
    Otherwise the derivative of ``u`` is taken by finite differences and the
    result is a :class:`MaskedConnection` whose mask covers the stencil ring.
    """
    if conn.is_analytic and frame.fn is not None:
        f = frame.fn
        fz, fzbar = d_z(f), d_zbar(f)

        def comp(a, df):
            def out(x, y):
                u = f(x, y)
                ui = jnp.linalg.inv(u)
                return ui @ a(x, y) @ u + ui @ df(x, y)

            return out

        return Connection(conn.grid, comp(conn.az, fz), comp(conn.azbar, fzbar))
    az, azbar = conn.values()
    u = frame.u
    ui = np.linalg.inv(u)
    duz, duzbar = frame.derivatives(order)
    out = Connection(conn.grid, ui @ az @ u + ui @ duz.values, ui @ azbar @ u + ui @ duzbar.values)
    return MaskedConnection(out, duz.mask | duzbar.mask)


# ---------------------------------------------------------------------------
# Uhlenbeck normal form


@dataclass(frozen=True)
class UhlenbeckReport:
    flatness: PencilReport
    match: dict[complex, ResidualReport]
    harmonic: ResidualReport
    plaquette_defect: float
    path_defect: float
    frame: GaugeFrame
    s: GaugeFrame

    def to_dict(self) -> dict:
        return {
            "flatness": self.flatness.to_dict(),
            "match": {f"{complex(l)}": r.to_dict() for l, r in self.match.items()},
            "harmonic": self.harmonic.to_dict(),
            "plaquette_defect": self.plaquette_defect,
            "path_defect": self.path_defect,
        }


def uhlenbeck_form(p: Pencil, basepoint=(0.0, 0.0), lambdas=(-1.0, 1j, 2.0), flat_tol: float = 1e-6,
                   crop: int = 2):
    """Gauge a flat pencil into ``(d_zbar + (1-l) At_zbar, d_z + (1-l^-1) At_z)``.

    Trivializes ``A + B`` to ``v`` (``v^-1 dv = A + B``) and gauges by
    ``u = v^-1``; the new ``A`` equals ``-v B v^-1``.  Returns ``At`` (on the
    grid cropped by ``crop`` points, where the finite-difference derivative of
    ``u`` is valid) and a report with the match residuals at sample λ and the
    harmonic residual of ``s`` solving ``s^-1 ds = 2 At``.
    """
    from .harmonic_maps import harmonic_residual

    if p.orientation != "zbar":
        p = p.flipped()
    flat = pencil_curvature(p, (1.0,))
    if max(r.max_abs for r in flat.coefficients.values()) > flat_tol:
        raise FlatnessError("pencil is not flat for all λ", flat.coefficients[0])
    C = p.at(1.0)
    v = trivialize(C, basepoint)
    u = v.inverse()
    A_t = gauge_transform(p.A, u)
    B_t = gauge_conjugate(p.B, u)
    if isinstance(A_t, MaskedConnection):
        mask = A_t.mask
        A_t = A_t.conn
    else:
        mask = p.A.grid.mask
    g = p.A.grid
    (atz, atzbar), (btz, btzbar) = A_t.values(), B_t.values()
    match = {}
    for lam in lambdas:
        # transformed pencil minus the (1-l) normal form built from At
        rz = atz + btz / lam - (1 - 1 / lam) * atz
        rzbar = atzbar + lam * btzbar - (1 - lam) * atzbar
        err = np.sqrt(np.sum(np.abs(rz) ** 2 + np.abs(rzbar) ** 2, axis=(-2, -1)))
        match[lam] = residual(GridField(g, err, mask))
    gc = g.crop(crop)
    two_at = Connection(gc, 2 * atz[crop:-crop, crop:-crop], 2 * atzbar[crop:-crop, crop:-crop])
    bp = (gc.x[gc.nx // 2], gc.y[gc.ny // 2]) if basepoint is None else basepoint
    s = trivialize(two_at, bp, check=False)
    harm = harmonic_residual(GridField(gc, s.u))
    return A_t, UhlenbeckReport(flat, match, harm, v.plaquette_defect, v.path_defect, v, s)
