"""Gauss coordinates ``g = A B C`` for SL(2,R) and SU(1,1) and the local WZW equations.

``A = exp(x E+)``, ``B = exp(phi H / 2)``, ``C = exp(y E-)``; the SU(1,1)
signature inserts factors of i: ``A = exp(i x E+)``, ``C = exp(i y E-)``.
For ``g = [[a, b], [c, d]]``::

    e^{-phi/2} = d,   x = b / d   (b / (i d)),   y = c / d   (c / (i d)).

The coordinates are real on the group generated by real (x, y, phi); for the
SU(1,1) signature that is ``diag(1, i) SL(2,R) diag(1, -i)``.  Other
unimodular matrices with ``d != 0`` decompose with complex coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import jax.numpy as jnp
import numpy as np
from scipy.integrate import trapezoid

from .field_grid import (
    Grid,
    GridField,
    PolyField,
    ResidualReport,
    as_evaluator,
    d_z,
    d_zbar,
    fd_dz,
    fd_dzbar,
    integrate_gradient,
    laplacian_zzbar,
    residual,
)

SIGNATURES = ("sl2r", "su11")


class RegularityError(ValueError):
    pass


class DomainError(ValueError):
    pass


class InconsistencyError(ValueError):
    pass


def _unit(signature: str):
    if signature == "sl2r":
        return 1.0
    if signature == "su11":
        return 1j
    raise DomainError(f"unknown signature {signature!r}")


@dataclass(frozen=True)
class GaussFields:
    """Coordinates (x, y, phi): evaluators, sampled arrays or plain numbers."""

    x: object
    y: object
    phi: object
    signature: str = "sl2r"

    def __post_init__(self):
        _unit(self.signature)

    @property
    def is_analytic(self) -> bool:
        return all(callable(v) for v in (self.x, self.y, self.phi))

    def sampled(self, grid: Grid) -> "GaussFields":
        ev = lambda v: grid.evaluate(v) if callable(v) else np.asarray(v)
        return GaussFields(ev(self.x), ev(self.y), ev(self.phi), self.signature)

    def is_real(self, tol: float = 1e-12) -> bool:
        if self.is_analytic:
            raise ValueError("sample the fields first")
        return all(np.max(np.abs(np.imag(np.asarray(v))), initial=0) <= tol for v in (self.x, self.y, self.phi))


def _xp(v):
    return np if isinstance(v, (np.ndarray, np.generic, float, complex, int)) else jnp


def _compose_values(x, y, phi, signature):
    u = _unit(signature)
    xp = _xp(phi)
    e = xp.exp(phi / 2)
    ei = 1 / e
    a = e + u * u * x * y * ei
    return xp.stack([xp.stack([a, u * x * ei], -1), xp.stack([u * y * ei, ei + 0 * a], -1)], -2)


def gauss_compose(f: GaussFields):
    """``A B C`` as matrices (an evaluator when the fields are evaluators)."""
    if f.is_analytic:
        return lambda x, y: _compose_values(f.x(x, y), f.y(x, y), f.phi(x, y), f.signature)
    return _compose_values(*(np.asarray(v, dtype=complex) for v in (f.x, f.y, f.phi)), f.signature)


def _decompose_values(g, signature, check: bool):
    u = _unit(signature)
    xp = _xp(g)
    d = g[..., 1, 1]
    if check:
        det = g[..., 0, 0] * d - g[..., 0, 1] * g[..., 1, 0]
        if np.max(np.abs(det - 1), initial=0) > 1e-10:
            raise DomainError("g is not unimodular")
        if np.min(np.abs(d), initial=np.inf) <= 1e-8:
            raise RegularityError("lower-right entry vanishes: no Gauss decomposition")
    phi = -2 * xp.log(d + 0j)
    if xp is np and np.all(np.isreal(d)) and np.all(np.real(d) > 0):
        phi = phi.real
    return g[..., 0, 1] / (u * d), g[..., 1, 0] / (u * d), phi


def gauss_decompose(g, signature: str = "sl2r") -> GaussFields:
    """Closed-form Gauss coordinates of a matrix, a stack of matrices or a matrix evaluator."""
    _unit(signature)
    if callable(g):
        fn = g
        parts = [lambda x, y, k=k: _decompose_values(fn(x, y), signature, False)[k] for k in range(3)]
        return GaussFields(*parts, signature)
    g = np.asarray(g)
    if g.shape[-2:] != (2, 2):
        raise DomainError("expected 2x2 matrices")
    return GaussFields(*_decompose_values(g, signature, True), signature)


def random_regular_unimodular(rng: np.random.Generator, size: int, signature: str = "sl2r",
                              d_range=(0.2, 3.0)) -> np.ndarray:
    """Random matrices with real Gauss coordinates (lower-right entry in ``d_range``)."""
    b, c = rng.normal(size=(2, size))
    d = rng.uniform(*d_range, size=size)
    a = (1 + b * c) / d
    m = np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2).astype(complex)
    if signature == "su11":
        D = np.diag([1, 1j])
        m = D @ m @ np.linalg.inv(D)
    elif signature != "sl2r":
        raise DomainError(f"unknown signature {signature!r}")
    return m


def random_su11(rng: np.random.Generator, size: int) -> np.ndarray:
    """Random elements ``[[a, b], [conj b, conj a]]`` of SU(1,1); always regular."""
    r = rng.uniform(0, 2, size)
    al, be = rng.uniform(0, 2 * np.pi, (2, size))
    a = np.cosh(r) * np.exp(1j * al)
    b = np.sinh(r) * np.exp(1j * be)
    return np.stack([np.stack([a, b], -1), np.stack([np.conj(b), np.conj(a)], -1)], -2)


# ---------------------------------------------------------------------------
# derivatives of the coordinate fields


class _Diff:
    """Uniform access to d_z, d_zbar and pointwise products for both paths."""

    def __init__(self, grid: Grid, analytic: bool, order: int = 4):
        self.grid, self.analytic, self.order = grid, analytic, order

    def field(self, v):
        if self.analytic:
            return v
        return v if isinstance(v, GridField) else GridField(self.grid, np.asarray(v, dtype=complex))

    def dz(self, v):
        return d_z(v) if self.analytic else fd_dz(v, self.order)

    def dzbar(self, v):
        return d_zbar(v) if self.analytic else fd_dzbar(v, self.order)

    def lap(self, v):
        return laplacian_zzbar(v) if self.analytic else fd_dz(fd_dzbar(v, self.order), self.order)

    def mul(self, *vs):
        if self.analytic:
            def out(x, y):
                r = 1
                for v in vs:
                    r = r * v(x, y)
                return r
            return out
        r = vs[0]
        for v in vs[1:]:
            r = r * v
        return r

    def exp(self, v, s=1):
        if self.analytic:
            return lambda x, y: jnp.exp(s * v(x, y))
        return GridField(v.grid, np.exp(s * v.values), v.mask)

    def scale(self, v, c):
        if self.analytic:
            return lambda x, y: c * v(x, y)
        return GridField(v.grid, c * v.values, v.mask)

    def add(self, a, b):
        if self.analytic:
            return lambda x, y: a(x, y) + b(x, y)
        return a + b

    def report(self, v) -> ResidualReport:
        if self.analytic:
            return residual(GridField(self.grid, self.grid.evaluate(v)))
        return residual(v)


def _setup(f: GaussFields, grid: Grid, order: int):
    D = _Diff(grid, f.is_analytic, order)
    return D, D.field(f.x), D.field(f.y), D.field(f.phi)


def wzw_eom_residual(f: GaussFields, grid: Grid, order: int = 4) -> dict[str, ResidualReport]:
    """SL(2,R) equations of motion in Gauss coordinates.

    ``dd phi + 2 e^-phi d_z y d_zbar x``, ``d_z(d_zbar x e^-phi)`` and
    ``d_zbar(d_z y e^-phi)``.  Exact for evaluators, finite differences of the
    given order for sampled fields.
    """
    D, x, y, phi = _setup(f, grid, order)
    em = D.exp(phi, -1)
    xzb, yz = D.dzbar(x), D.dz(y)
    r_phi = D.add(D.lap(phi), D.scale(D.mul(em, yz, xzb), 2))
    return {
        "phi": D.report(r_phi),
        "x": D.report(D.dz(D.mul(xzb, em))),
        "y": D.report(D.dzbar(D.mul(yz, em))),
    }


def su11_eom_residual(f: GaussFields, grid: Grid, order: int = 4) -> dict[str, ResidualReport]:
    """SU(1,1) equations of motion from the local energy.

    ``dd phi - e^-phi (x_z y_zbar + y_z x_zbar)``,
    ``d_z(x_zbar e^-phi) + d_zbar(x_z e^-phi)`` and the same for y.
    """
    D, x, y, phi = _setup(f, grid, order)
    em = D.exp(phi, -1)
    xz, xzb, yz, yzb = D.dz(x), D.dzbar(x), D.dz(y), D.dzbar(y)
    cross = D.add(D.mul(xz, yzb), D.mul(yz, xzb))
    r_phi = D.add(D.lap(phi), D.scale(D.mul(em, cross), -1))
    cons = lambda vz, vzb: D.add(D.dz(D.mul(vzb, em)), D.dzbar(D.mul(vz, em)))
    return {
        "phi": D.report(r_phi),
        "x": D.report(cons(xz, xzb)),
        "y": D.report(cons(yz, yzb)),
    }


def energy_density(f: GaussFields, grid: Grid) -> GridField:
    """``1/2 phi_z phi_zbar - e^-phi (x_z y_zbar + y_z x_zbar)``.

    Sampled fields are differentiated with ``np.gradient`` (second order,
    one-sided at the edges) so the whole grid contributes to the quadrature.
    """
    if f.is_analytic:
        fz = lambda v: d_z(v)
        fzb = lambda v: d_zbar(v)

        def dens(x, y):
            cross = fz(f.x)(x, y) * fzb(f.y)(x, y) + fz(f.y)(x, y) * fzb(f.x)(x, y)
            return 0.5 * fz(f.phi)(x, y) * fzb(f.phi)(x, y) - jnp.exp(-f.phi(x, y)) * cross

        return GridField(grid, grid.evaluate(dens))

    def parts(v):
        gy, gx = np.gradient(np.asarray(v, dtype=complex), grid.y, grid.x, edge_order=2)
        return 0.5 * (gx - 1j * gy), 0.5 * (gx + 1j * gy)

    (xz, xzb), (yz, yzb), (pz, pzb) = parts(f.x), parts(f.y), parts(f.phi)
    cross = xz * yzb + yz * xzb
    return GridField(grid, 0.5 * pz * pzb - np.exp(-np.asarray(f.phi)) * cross)


def su11_energy(f: GaussFields, grid: Grid, k: float = 8 * np.pi) -> float:
    """``-(k / 8 pi) * integral of the energy density`` by the trapezoid rule.

    The default ``k = 8 pi`` normalises the prefactor to one.  Masked points
    contribute zero.
    """
    dens = energy_density(f, grid)
    v = np.where(dens.mask, 0, dens.values)
    total = trapezoid(trapezoid(v, grid.x, axis=1), grid.y)
    return float(np.real(-(k / (8 * np.pi)) * total))


# ---------------------------------------------------------------------------
# special solutions and the Liouville reduction


def orc_coefficient(f: PolyField, g: PolyField):
    """``M = f conj(g) - conj(f) g`` (purely imaginary)."""
    def M(x, y):
        a, b = f.xy(x, y), g.xy(x, y)
        return a * jnp.conj(b) - jnp.conj(a) * b

    return M


@dataclass
class OrcReport:
    variant: str
    liouville: ResidualReport
    eom: dict[str, ResidualReport]
    closure_defect: float
    fields: GaussFields
    M: GridField

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "liouville": self.liouville.to_dict(),
            "eom": {k: v.to_dict() for k, v in self.eom.items()},
            "closure_defect": self.closure_defect,
        }


def _real_integral(grid, vz, basepoint):
    """Real field u with ``d_z u = vz`` (so ``d_zbar u = conj(vz)``)."""
    return integrate_gradient(grid, lambda x, y: 2 * jnp.real(vz(x, y)),
                              lambda x, y: -2 * jnp.imag(vz(x, y)), basepoint)


def orc_reduction(fplus: PolyField, gplus: PolyField, phi, grid: Grid, variant: str | None = None,
                  basepoint=(0.0, 0.0), closure_tol: float = 1e-6, order: int = 4) -> OrcReport:
    """Reduce the special-solution ansatz to Liouville and re-check the full equations.

    ``variant="orc"`` (SU(1,1)): ``x_z = f e^phi``, ``y_z = g e^phi`` with x real
    and y imaginary, so ``x_zbar = conj(f) e^phi``, ``y_zbar = -conj(g) e^phi``
    and the phi equation becomes ``dd phi + M e^phi = 0``.

    ``variant="munu"`` (SL(2,R), f = nu and g = mu constant):
    ``x_zbar = nu e^phi``, ``y_z = mu e^phi`` with x and y real, giving
    ``dd phi + 2 mu nu e^phi = 0``.  Chosen automatically for constant inputs.

    x and y are recovered by path integration; a closure defect above
    ``closure_tol`` means the ansatz is not integrable for this phi.
    """
    phi = as_evaluator(phi)
    const = fplus.dz() == PolyField() and fplus.dzbar() == PolyField() and \
        gplus.dz() == PolyField() and gplus.dzbar() == PolyField()
    variant = variant or ("munu" if const else "orc")
    lap = laplacian_zzbar(phi)
    M = orc_coefficient(fplus, gplus)
    ephi = lambda x, y: jnp.exp(phi(x, y))
    if variant == "orc":
        if not (fplus.is_holomorphic() and gplus.is_holomorphic()):
            raise ValueError("f and g must be holomorphic")
        liou = lambda x, y: lap(x, y) + M(x, y) * ephi(x, y)
        ix = _real_integral(grid, lambda x, y: fplus.xy(x, y) * ephi(x, y), basepoint)
        # y = i Y with Y real and Y_z = -i g e^phi
        iY = _real_integral(grid, lambda x, y: -1j * gplus.xy(x, y) * ephi(x, y), basepoint)
        xv, yv, sig = ix.values, 1j * iY.values, "su11"
        eom_fn = su11_eom_residual
    elif variant == "munu":
        if not const:
            raise ValueError("the munu variant needs constant inputs")
        nu, mu = complex(fplus.coeffs.get((0, 0), 0)), complex(gplus.coeffs.get((0, 0), 0))
        liou = lambda x, y: lap(x, y) + 2 * mu * nu * ephi(x, y)
        ix = _real_integral(grid, lambda x, y: np.conj(nu) * ephi(x, y), basepoint)
        iY = _real_integral(grid, lambda x, y: mu * ephi(x, y), basepoint)
        xv, yv, sig = ix.values, iY.values, "sl2r"
        eom_fn = wzw_eom_residual
    else:
        raise ValueError(f"unknown variant {variant!r}")
    closure = max(ix.closure_defect, iY.closure_defect)
    if closure > closure_tol:
        raise InconsistencyError(f"path integration does not close (defect {closure:.3g})")
    fields = GaussFields(xv, yv, grid.evaluate(phi), sig)
    return OrcReport(
        variant,
        residual(GridField(grid, grid.evaluate(liou))),
        eom_fn(fields, grid, order),
        closure,
        fields,
        GridField(grid, grid.evaluate(M)),
    )


def kink_liouville_phi(k: float = 1.0, theta: float = 0.0, eps: float = 0.0, bump=None):
    """``phi = ln(k^2/4) - 2 ln cosh(k s)`` with ``s = Re(e^{i theta} z)``.

    Solves ``dd phi + 2 e^phi = 0``; ``eps * bump(s)`` perturbs it while
    keeping phi a function of s (so the real ansatz stays integrable).
    """
    bump = bump or (lambda s: jnp.exp(-s * s))
    c, sn = np.cos(theta), np.sin(theta)

    def phi(x, y):
        s = c * x - sn * y
        return jnp.log(k * k / 4) - 2 * jnp.log(jnp.cosh(k * s)) + eps * bump(s)

    return phi


def munu_constants(theta: float = 0.0, mu_abs: float = 1.0):
    """``(nu, mu)`` with ``mu nu = 1`` for which the real ansatz closes on ``phi(s)``."""
    return np.exp(-1j * theta) / mu_abs, mu_abs * np.exp(1j * theta)


# ---------------------------------------------------------------------------
# the BC frame


@dataclass
class BcReport:
    off_diagonal: ResidualReport
    conjugation: ResidualReport
    diagonal_formula: ResidualReport
    ratio_holomorphic: ResidualReport | None
    diagonal: GridField

    def to_dict(self) -> dict:
        return {
            "off_diagonal": self.off_diagonal.to_dict(),
            "conjugation": self.conjugation.to_dict(),
            "diagonal_formula": self.diagonal_formula.to_dict(),
            "ratio_holomorphic": self.ratio_holomorphic.to_dict() if self.ratio_holomorphic else None,
        }


def bc_frame_check(f: GaussFields, grid: Grid, order: int = 4, vanish_tol: float = 1e-10) -> BcReport:
    """Check that ``u = BC`` diagonalises the commutator of ``g^-1 dg``.

    With ``J = g^-1 dg`` for ``g = ABC`` the conjugate ``u [J_z, J_zbar] u^-1``
    equals ``[At_z, At_zbar]`` for ``At = A^-1 dA + dB B^-1 + B dC C^-1 B^-1``.
    Reports its off-diagonal part (zero on special solutions), the mismatch
    between the direct conjugation and the At commutator, the
    deviation of the (0,0) entry from ``(x_z y_zbar - x_zbar y_z) e^-phi``
    (times ``i^2`` for SU(1,1)), and ``d_zbar ln(entry / e^phi)``
    (None where the entry vanishes identically).
    """
    s = f.sampled(grid) if f.is_analytic else f
    D, x, y, phi = _setup(f, grid, order)
    vals = lambda v: grid.evaluate(v) if D.analytic else v.values
    xz, xzb, yz, yzb = (vals(D.dz(x)), vals(D.dzbar(x)), vals(D.dz(y)), vals(D.dzbar(y)))
    phz, phzb = vals(D.dz(phi)), vals(D.dzbar(phi))
    mask = np.zeros(grid.XY[0].shape, bool)
    if not D.analytic:
        mask = D.dz(x).mask | D.dz(phi).mask
    u = _unit(f.signature)
    X, Y, P = (np.asarray(v, dtype=complex) for v in (s.x, s.y, s.phi))
    Ep = np.array([[0, 1], [0, 0]])
    Em = np.array([[0, 0], [1, 0]])
    Hm = np.diag([1.0, -1.0])
    m = lambda a, M: a[..., None, None] * M

    def at(vx, vy, vphi):
        return m(u * vx, Ep) + m(0.5 * vphi, Hm) + m(u * vy * np.exp(-P), Em)

    atz, atzb = at(xz, yz, phz), at(xzb, yzb, phzb)
    # direct route: J = g^-1 dg with dg from the product rule
    A = np.broadcast_to(np.eye(2), X.shape + (2, 2)) + m(u * X, Ep)
    Bm = m(np.exp(P / 2), np.diag([1.0, 0])) + m(np.exp(-P / 2), np.diag([0, 1.0]))
    C = np.broadcast_to(np.eye(2), X.shape + (2, 2)) + m(u * Y, Em)
    g = A @ Bm @ C

    def dg(vx, vy, vphi):
        dA, dC = m(u * vx, Ep), m(u * vy, Em)
        dB = m(0.5 * vphi, Hm) @ Bm
        return dA @ Bm @ C + A @ dB @ C + A @ Bm @ dC

    gi = np.linalg.inv(g)
    Jz, Jzb = gi @ dg(xz, yz, phz), gi @ dg(xzb, yzb, phzb)
    BC = Bm @ C
    K = BC @ (Jz @ Jzb - Jzb @ Jz) @ np.linalg.inv(BC)
    comm = atz @ atzb - atzb @ atz
    off = K.copy()
    off[..., 0, 0] = off[..., 1, 1] = 0
    diag = K[..., 0, 0]
    formula = u * u * (xz * yzb - xzb * yz) * np.exp(-P)
    ratio_rep = None
    use = ~mask
    if np.max(np.abs(diag[use]), initial=0) > vanish_tol:
        zero = np.abs(diag) <= vanish_tol
        safe = np.where(zero, 1, diag / np.exp(P))
        # d_zbar ln r = d_zbar r / r, free of branch cuts
        ratio = GridField(grid, safe, mask | zero)
        dr = fd_dzbar(ratio, order)
        ratio_rep = residual(GridField(grid, dr.values / safe, dr.mask))
    return BcReport(
        residual(GridField(grid, off, mask)),
        residual(GridField(grid, K - comm, mask)),
        residual(GridField(grid, diag - formula, mask)),
        ratio_rep,
        GridField(grid, diag, mask),
    )
