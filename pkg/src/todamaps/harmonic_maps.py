"""Unitons into SU(2) and SU(1,1), the chiral-model equation and the SDCS system.

Signature ``"su2"`` uses ``J = I`` and ``M = (1, f)``, signature ``"su11"``
uses ``J = diag(1, -1)``.  The projector ``p = M (M* J M)^-1 M* J`` with f
holomorphic satisfies ``(1 - p) d_zbar p = 0`` and ``p d_z p = 0``, so
``chi = 1/2 h^-1 d_z h = -d_z p`` for ``h = 2p - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from .field_grid import (
    Grid,
    GridField,
    PolyField,
    ResidualReport,
    SingularityError,
    composite_log_laplacian,
    d_z,
    d_zbar,
    fd_dz,
    fd_dzbar,
    fd_laplacian_zzbar,
    laplacian_zzbar,
    residual,
    su2_grid,
    su11_grid,
)
from .lax_connection import Connection, GaugeFrame, curvature, trivialize

SIGNATURES = ("su2", "su11")


class UnsupportedOrderError(ValueError):
    pass


class GroupError(ValueError):
    pass


def signature_matrix(signature: str) -> np.ndarray:
    if signature == "su2":
        return np.eye(2)
    if signature == "su11":
        return np.diag([1.0, -1.0])
    raise ValueError(f"unknown signature {signature!r}")


def _sign(signature: str) -> int:
    return 1 if signature == "su2" else -1


def _dagger(m):
    return jnp.conj(jnp.swapaxes(m, -1, -2))


def default_grid(f: PolyField, signature: str, n: int = 96) -> Grid:
    return su2_grid(n) if signature == "su2" else su11_grid(f, n)


def _check_disk(f: PolyField, signature: str, grid: Grid):
    if signature == "su11":
        bad = (np.abs(f(grid.Z)) >= 1) & ~grid.mask
        if bad.any():
            raise SingularityError(f"{int(bad.sum())} unmasked points with |f| >= 1")


# ---------------------------------------------------------------------------
# projectors and harmonic maps


def projector_evaluator(f: PolyField, signature: str):
    s = _sign(signature)

    def p(x, y):
        a = f.xy(x, y)
        ab = jnp.conj(a)
        D = 1 + s * a * ab
        one = jnp.ones_like(a)
        m = jnp.stack([jnp.stack([one, s * ab], -1), jnp.stack([a, s * a * ab], -1)], -2)
        return m / D[..., None, None]

    return p


@dataclass(frozen=True)
class ProjectorField:
    grid: Grid
    p: np.ndarray
    signature: str
    source_f: PolyField
    fn: object

    @property
    def J(self) -> np.ndarray:
        return signature_matrix(self.signature)

    def invariants(self) -> dict[str, ResidualReport]:
        """Idempotence, J-hermiticity and holomorphicity residuals."""
        g, p, J = self.grid, self.p, self.J
        eye = np.eye(2)
        ps = np.conj(np.swapaxes(p, -1, -2))
        dzbar_p = g.evaluate(d_zbar(self.fn))
        return {
            "idempotent": residual(GridField(g, p @ p - p)),
            "j_hermitian": residual(GridField(g, ps @ J - J @ p)),
            "holomorphic": residual(GridField(g, (eye - p) @ dzbar_p)),
        }


def uniton_projector(f: PolyField, signature: str = "su2", grid: Grid | None = None) -> ProjectorField:
    if not f.is_holomorphic():
        raise ValueError("f must be holomorphic")
    grid = grid or default_grid(f, signature)
    _check_disk(f, signature, grid)
    fn = projector_evaluator(f, signature)
    return ProjectorField(grid, grid.evaluate(fn), signature, f, fn)


def _check_group(Q, J, tol=1e-12):
    Q = np.asarray(Q, dtype=complex)
    if np.max(np.abs(Q.conj().T @ J @ Q - J)) > tol:
        raise GroupError("Q does not preserve the signature form")
    return Q


def harmonic_map_evaluator(p: ProjectorField, Q=None):
    Q = _check_group(np.eye(2) if Q is None else Q, p.J)
    fn = p.fn
    return lambda x, y: Q @ (2 * fn(x, y) - jnp.eye(2))


def harmonic_map_from_projector(p: ProjectorField, Q=None) -> GridField:
    """``h = Q (2p - 1)`` sampled on the projector's grid."""
    return GridField(p.grid, p.grid.evaluate(harmonic_map_evaluator(p, Q)))


def _check_invertible(values, mask):
    det = np.abs(np.linalg.det(values))
    if np.any(det[~mask] < 1e-12):
        raise SingularityError("h is singular at some grid point")


def harmonic_residual(h, grid: Grid | None = None, order: int = 4) -> ResidualReport:
    """Residual of ``d_z(h^-1 d_zbar h) + d_zbar(h^-1 d_z h)``.

    ``h`` is an evaluator (exact derivatives, needs ``grid``) or a GridField
    (finite differences of the given order).  The exact path uses the
    expanded form ``h^-1 (2 d d h - h_z h^-1 h_zbar - h_zbar h^-1 h_z)``, which
    avoids forming ``h^-1`` explicitly and stays accurate where h is large.
    """
    if callable(h):
        if grid is None:
            raise ValueError("grid required for an analytic map")
        _check_invertible(grid.evaluate(h), grid.mask)
        hz, hzbar, hzz = d_z(h), d_zbar(h), laplacian_zzbar(h)

        def res(x, y):
            H, a, b = h(x, y), hzbar(x, y), hz(x, y)
            inner = 2 * hzz(x, y) - b @ jnp.linalg.solve(H, a) - a @ jnp.linalg.solve(H, b)
            return jnp.linalg.solve(H, inner)

        return residual(GridField(grid, grid.evaluate(res)))
    _check_invertible(h.values, h.mask)
    hinv = np.linalg.inv(h.values)
    dz_h, dzbar_h = fd_dz(h, order), fd_dzbar(h, order)
    jz = GridField(h.grid, hinv @ dz_h.values, dz_h.mask)
    jzbar = GridField(h.grid, hinv @ dzbar_h.values, dzbar_h.mask)
    return residual(fd_dz(jzbar, order) + fd_dzbar(jz, order))


def uniton_harmonic_residual(p: ProjectorField, Q=None) -> ResidualReport:
    """Exact harmonic residual of ``h = Q (2p - 1)`` in commutator form.

    Q drops out of ``h^-1 dh``, and differentiating ``(2p - 1)^2 = 1`` twice
    turns the residual into ``4 [p, d_z d_zbar p]``.  Same quantity as
    :func:`harmonic_residual` on the evaluator, without the large
    ``h_z h^-1 h_zbar`` products that cancel near the SU(1,1) disk edge.
    """
    _check_group(np.eye(2) if Q is None else Q, p.J)
    lap = laplacian_zzbar(p.fn)

    def res(x, y):
        P, L = p.fn(x, y), lap(x, y)
        return 4 * (P @ L - L @ P)

    return residual(GridField(p.grid, p.grid.evaluate(res)))


def chi_field(h, grid: Grid | None = None, order: int = 2) -> GridField:
    """``chi = 1/2 h^-1 d_z h`` (exact for evaluators, finite differences otherwise)."""
    if callable(h):
        return GridField(grid, grid.evaluate(lambda x, y: 0.5 * jnp.linalg.inv(h(x, y)) @ d_z(h)(x, y)))
    _check_invertible(h.values, h.mask)
    dh = fd_dz(h, order)
    return GridField(h.grid, 0.5 * np.linalg.inv(h.values) @ dh.values, dh.mask)


def chi_closed_form(f: PolyField, signature: str):
    """``chi = -d_z p = -(f'/D^2) [[-s fb, -fb^2], [1, s fb]]``, ``D = 1 + s|f|^2``."""
    s = _sign(signature)
    fp = f.dz()

    def chi(x, y):
        a, b = f.xy(x, y), fp.xy(x, y)
        ab = jnp.conj(a)
        D = 1 + s * a * ab
        m = jnp.stack([jnp.stack([-s * ab, -ab * ab], -1), jnp.stack([jnp.ones_like(a), s * ab], -1)], -2)
        return -(b / D**2)[..., None, None] * m

    return chi


def sharp(m, signature: str):
    """The adjoint for the signature's real form, ``J m* J``."""
    J = signature_matrix(signature)
    return J @ _dagger(m) @ J


# ---------------------------------------------------------------------------
# diagonalizer and the Liouville density


def diagonalizer_evaluator(f: PolyField, signature: str):
    s = _sign(signature)

    def u(x, y):
        a = f.xy(x, y)
        ab = jnp.conj(a)
        one = jnp.ones_like(a)
        m = jnp.stack([jnp.stack([one, -s * ab], -1), jnp.stack([a, one], -1)], -2)
        return m / jnp.sqrt(1 + s * a * ab)[..., None, None]

    return u


def commutator_diagonalizer(f: PolyField, signature: str = "su2", grid: Grid | None = None) -> GaugeFrame:
    """Frame u in the signature group with ``u^-1 [chi, chi#] u`` diagonal."""
    grid = grid or default_grid(f, signature)
    _check_disk(f, signature, grid)
    fn = diagonalizer_evaluator(f, signature)
    return GaugeFrame(grid, grid.evaluate(fn), (0.0, 0.0), fn)


def diagonalized_commutator(f: PolyField, signature: str = "su2", grid: Grid | None = None) -> GridField:
    grid = grid or default_grid(f, signature)
    u = commutator_diagonalizer(f, signature, grid).u
    chi = grid.evaluate(chi_closed_form(f, signature))
    chis = np.asarray(sharp(chi, signature))
    return GridField(grid, np.linalg.inv(u) @ (chi @ chis - chis @ chi) @ u)


def jacobi_eigh_2x2(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and unitary eigenvectors of Hermitian 2x2 stacks by one Jacobi rotation."""
    a = m[..., 0, 0].real
    d = m[..., 1, 1].real
    b = m[..., 0, 1]
    r = np.abs(b)
    ph = np.where(r > 0, b / np.where(r > 0, r, 1), 1)
    theta = 0.5 * np.arctan2(2 * r, a - d)
    c, s = np.cos(theta), np.sin(theta)
    vals = np.stack([c * c * a + 2 * c * s * r + s * s * d, s * s * a - 2 * c * s * r + c * c * d], -1)
    vecs = np.empty(m.shape, dtype=complex)
    vecs[..., 0, 0] = c
    vecs[..., 1, 0] = s * np.conj(ph)
    vecs[..., 0, 1] = -s * ph
    vecs[..., 1, 1] = c
    return vals, vecs


@dataclass(frozen=True)
class LiouvilleDensity:
    density: GridField
    log_det: GridField
    log_det_laplacian: GridField


def liouville_density(f: PolyField, signature: str = "su2", grid: Grid | None = None) -> LiouvilleDensity:
    """``|f'|^2/(1 + s|f|^2)^2`` and the det form ``ln det(M* J M) = ln(1 + s|f|^2)``.

    ``log_det_laplacian`` is ``s * d_z d_zbar ln det(M* J M)`` computed by exact
    differentiation of the det form, for comparison with ``density``.
    """
    s = _sign(signature)
    grid = grid or default_grid(f, signature)
    dens = composite_log_laplacian(f, s, grid)

    def logdet(x, y):
        a = f.xy(x, y)
        return jnp.log(1 + s * a * jnp.conj(a))

    lap = laplacian_zzbar(logdet)
    return LiouvilleDensity(
        dens,
        GridField(grid, grid.evaluate(logdet)),
        GridField(grid, s * grid.evaluate(lap)),
    )


def liouville_field(f: PolyField, signature: str = "su2"):
    """``phi = -2 ln(1 + s|f|^2)``, solving ``d d phi + 2 s |f'|^2 e^phi = 0``."""
    s = _sign(signature)

    def phi(x, y):
        a = f.xy(x, y)
        return -2 * jnp.log(1 + s * a * jnp.conj(a))

    return phi


def liouville_residual(f: PolyField, signature: str = "su2", grid: Grid | None = None) -> GridField:
    s = _sign(signature)
    grid = grid or default_grid(f, signature)
    _check_disk(f, signature, grid)
    phi = liouville_field(f, signature)
    fp = f.dz()
    lap = laplacian_zzbar(phi)

    def res(x, y):
        b = fp.xy(x, y)
        return lap(x, y) + 2 * s * b * jnp.conj(b) * jnp.exp(phi(x, y))

    return GridField(grid, grid.evaluate(res))


def liouville_fd_residual(f: PolyField, signature: str = "su2", grid: Grid | None = None) -> GridField:
    """Same residual with the five-point Laplacian applied to sampled phi."""
    s = _sign(signature)
    grid = grid or default_grid(f, signature)
    _check_disk(f, signature, grid)
    fp = f.dz()
    phi = GridField.sample(grid, liouville_field(f, signature))
    dens = grid.evaluate(lambda x, y: 2 * s * jnp.abs(fp.xy(x, y)) ** 2)
    return fd_laplacian_zzbar(phi) + dens * np.exp(phi.values)


# ---------------------------------------------------------------------------
# self-dual Chern-Simons


@dataclass(frozen=True)
class SdcsData:
    """Analytic SDCS configuration; ``frame`` is an optional known gauge u."""

    A: Connection
    Psi: object
    kappa: float = 2.0
    frame: object = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def k(self) -> float:
        return 2.0 / self.kappa


def sdcs_from_frame(grid: Grid, u, chi, kappa: float = 2.0) -> SdcsData:
    """``A = u^-1 du + u^-1 (chi, -chi^dagger) u`` and ``Psi = sqrt(kappa/2) u^-1 chi u``."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    uz, uzbar = d_z(u), d_zbar(u)
    r = np.sqrt(kappa / 2)

    def az(x, y):
        ui = jnp.linalg.inv(u(x, y))
        return ui @ uz(x, y) + ui @ chi(x, y) @ u(x, y)

    def azbar(x, y):
        ui = jnp.linalg.inv(u(x, y))
        return ui @ uzbar(x, y) - ui @ _dagger(chi(x, y)) @ u(x, y)

    def psi(x, y):
        U = u(x, y)
        return r * jnp.linalg.inv(U) @ chi(x, y) @ U

    return SdcsData(Connection(grid, az, azbar), psi, kappa, u)


def uniton_sdcs(f: PolyField, kappa: float = 2.0, grid: Grid | None = None, perturb=None) -> SdcsData:
    """SDCS data from the SU(2) uniton of f; ``perturb`` (an evaluator) is added to chi."""
    grid = grid or su2_grid()
    chi = chi_closed_form(f, "su2")
    if perturb is not None:
        base = chi
        chi = lambda x, y: base(x, y) + perturb(x, y)
    return sdcs_from_frame(grid, diagonalizer_evaluator(f, "su2"), chi, kappa)


def _field_strength_fn(d: SdcsData):
    from .lax_connection import curvature_evaluator

    F = curvature_evaluator(d.A)

    def r(x, y):
        P = d.Psi(x, y)
        Pd = _dagger(P)
        return F(x, y) - d.k * (P @ Pd - Pd @ P)

    return r


def _matter_fn(d: SdcsData):
    dpsi = d_zbar(d.Psi)

    def r(x, y):
        P, B = d.Psi(x, y), d.A.azbar(x, y)
        return dpsi(x, y) + B @ P - P @ B

    return r


def sdcs_residual(d: SdcsData) -> dict[str, ResidualReport]:
    """``F(A) - (2/kappa)[Psi, Psi^dagger]`` and ``d_zbar Psi + [A_zbar, Psi]``."""
    g = d.A.grid
    return {
        "field_strength": residual(GridField(g, g.evaluate(_field_strength_fn(d)))),
        "matter": residual(GridField(g, g.evaluate(_matter_fn(d)))),
    }


@dataclass(frozen=True)
class SdcsGaugeReport:
    flatness: ResidualReport
    chi_equation: ResidualReport
    identity: ResidualReport
    field_strength: ResidualReport
    plaquette_defect: float

    def to_dict(self) -> dict:
        return {
            "flatness": self.flatness.to_dict(),
            "chi_equation": self.chi_equation.to_dict(),
            "identity": self.identity.to_dict(),
            "field_strength": self.field_strength.to_dict(),
            "plaquette_defect": self.plaquette_defect,
        }


def sdcs_gauge_check(d: SdcsData, basepoint=(0.0, 0.0), use_frame: bool = False) -> SdcsGaugeReport:
    """Gauge the SDCS data to ``chi`` and compare with the single equation for chi.

    ``At_z = A_z - sqrt(k) Psi``, ``At_zbar = A_zbar + sqrt(k) Psi^dagger`` must be
    flat; writing ``At = u^-1 du`` and ``chi = sqrt(k) u Psi u^-1`` one has

        F(A) - k[Psi, Psi^dagger] = -u^-1 (d_zbar chi + d_z chi^dagger - 2[chi^dagger, chi]) u.

    ``u`` comes from numerical trivialization of ``At`` (or from ``d.frame``
    when ``use_frame``); derivatives of chi use ``d u = u At`` so that only
    ``Psi`` is differentiated exactly.
    """
    g = d.A.grid
    rk = np.sqrt(d.k)
    at = Connection(
        g,
        lambda x, y: d.A.az(x, y) - rk * d.Psi(x, y),
        lambda x, y: d.A.azbar(x, y) + rk * _dagger(d.Psi(x, y)),
    )
    flat = residual(curvature(at))
    if use_frame and d.frame is not None:
        u = g.evaluate(d.frame)
        defect = 0.0
    else:
        fr = trivialize(at, basepoint)
        u, defect = fr.u, fr.plaquette_defect
    ui = np.linalg.inv(u)
    P = g.evaluate(d.Psi)
    dzP, dzbarP = g.evaluate(d_z(d.Psi)), g.evaluate(d_zbar(d.Psi))
    atz, atzbar = at.values()
    chi = rk * u @ P @ ui
    chid = np.conj(np.swapaxes(chi, -1, -2))
    dzbar_chi = rk * u @ (dzbarP + atzbar @ P - P @ atzbar) @ ui
    Pd = np.conj(np.swapaxes(P, -1, -2))
    dz_chid = rk * u @ (np.conj(np.swapaxes(dzbarP, -1, -2)) + atz @ Pd - Pd @ atz) @ ui
    comm = chid @ chi - chi @ chid
    chi_equation = dzbar_chi - comm
    rhs = -ui @ (dzbar_chi + dz_chid - 2 * comm) @ u
    lhs = g.evaluate(_field_strength_fn(d))
    return SdcsGaugeReport(
        flatness=flat,
        chi_equation=residual(GridField(g, chi_equation)),
        identity=residual(GridField(g, lhs - rhs)),
        field_strength=residual(GridField(g, lhs)),
        plaquette_defect=defect,
    )


# ---------------------------------------------------------------------------
# extended solutions


@dataclass(frozen=True)
class ExtendedSolutionSample:
    """``E_l = sum_a T_a l^a`` with constant Q and signature J."""

    T: tuple
    Q: np.ndarray
    J: np.ndarray

    def E(self, lam):
        return sum(t * lam**a for a, t in enumerate(self.T))


def extended_solution_from_projector(p: ProjectorField, Q=None) -> ExtendedSolutionSample:
    eye = np.broadcast_to(np.eye(2), p.p.shape)
    Q = np.eye(2) if Q is None else np.asarray(Q)
    return ExtendedSolutionSample((p.p, eye - p.p), Q, p.J)


def verify_extended_solution(e: ExtendedSolutionSample, s: GridField,
                             lambdas=(2.0, 1j, -1 + 1j)) -> dict[str, float]:
    """Max residuals of conditions (b), (c), (d) and the projector consequences for T0."""
    if len(e.T) != 2:
        raise UnsupportedOrderError("only degree-one extended solutions are supported")
    J = e.J
    T0 = e.T[0]
    eye = np.eye(T0.shape[-1])
    use = ~s.mask

    def mx(a):
        return float(np.max(np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))[use]))

    def star(a):
        return np.conj(np.swapaxes(a, -1, -2))

    out = {
        "b": mx(e.E(1.0) - eye),
        "c": mx(e.E(-1.0) - e.Q @ np.linalg.inv(s.values)),
    }
    d = 0.0
    for lam in lambdas:
        lhs = star(e.E(np.conj(lam))) @ J
        rhs = J @ np.linalg.inv(e.E(1 / lam))
        d = max(d, mx(lhs - rhs))
    out["d"] = d
    T0s = star(T0)
    out["T0_reality"] = mx((eye - T0s) @ J @ T0)
    out["T0_hermitian"] = mx(T0s @ J - J @ T0)
    out["T0_idempotent"] = mx(T0 @ T0 - T0)
    return out


# ---------------------------------------------------------------------------
# gauged uniton pencils


def unipotent_gauge(a: PolyField | None = None, b: PolyField | None = None):
    """``g = [[1, a], [0, 1]] [[1, 0], [b, 1]]``; equals I at the origin when a(0) = b(0) = 0."""
    a = a or PolyField({(1, 0): 0.3, (0, 1): 0.2j})
    b = b or PolyField({(1, 1): 0.4, (1, 0): 0.1})

    def g(x, y):
        A, B = a.xy(x, y), b.xy(x, y)
        one, zero = jnp.ones_like(A), jnp.zeros_like(A)
        U = jnp.stack([jnp.stack([one, A], -1), jnp.stack([zero, one], -1)], -2)
        L = jnp.stack([jnp.stack([one, zero], -1), jnp.stack([B, one], -1)], -2)
        return U @ L

    # reused under many nested derivatives: compile once
    return jax.jit(g)


def gauged_uniton_pencil(f: PolyField, grid: Grid, gauge=None):
    """Flat pencil with known normal form ``At = (chi, -chi^dagger)``.

    ``A = g^-1 At g + g^-1 dg`` and ``B = -g^-1 At g`` for an SU(2) uniton chi
    and a gauge g (default :func:`unipotent_gauge`).  Returns
    ``(pencil, At_z, At_zbar)`` with the last two as evaluators.
    """
    from .lax_connection import Pencil

    g = gauge or unipotent_gauge()
    gz, gzb = d_z(g), d_zbar(g)
    chi = jax.jit(chi_closed_form(f, "su2"))
    atz = chi
    atzb = lambda x, y: -_dagger(chi(x, y))
    conj = lambda m: (lambda x, y: jnp.linalg.inv(g(x, y)) @ m(x, y) @ g(x, y))
    A = Connection(grid,
                   lambda x, y: conj(atz)(x, y) + jnp.linalg.inv(g(x, y)) @ gz(x, y),
                   lambda x, y: conj(atzb)(x, y) + jnp.linalg.inv(g(x, y)) @ gzb(x, y))
    B = Connection(grid, lambda x, y: -conj(atz)(x, y), lambda x, y: -conj(atzb)(x, y))
    return Pencil(A, B), atz, atzb
