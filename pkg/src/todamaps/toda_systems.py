"""Toda, conformal affine Toda (CAT), sinh-Gordon and Liouville systems.

Field equations are written with ``dd = d_z d_zbar``:

* Toda: ``dd phi_i = (alpha^2 / beta) sum_j k_ij exp(beta phi_j)``;
* CAT:  ``dd phi = e^{2 phi} - e^{2 eta - 2 phi}``, ``dd eta = 0``,
  ``dd xi = e^{2 eta - 2 phi}``;
* affine Toda (sl2 reduction of a triangular pencil):
  ``dd phi = 2 (eta_+ e^phi - eta_- e^-phi)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np

from .affine_algebra import (
    EM,
    EP,
    H,
    AffineElement,
    CartanField,
    adjoint_exp_conjugate,
    cartan_element,
)
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
    fd_laplacian_zzbar,
    integrate_gradient,
    laplacian_zzbar,
    residual,
)
from .lax_connection import Connection, Pencil, curvature_evaluator, pencil_curvature
from .lie_core import ChevalleyBasis, build_sl_chevalley, decompose_field


class InvalidParameterError(ValueError):
    pass


class HypothesisViolationError(ValueError):
    def __init__(self, msg: str, residuals: dict | None = None):
        super().__init__(msg)
        self.residuals = residuals or {}


class BranchError(ValueError):
    pass


class ShapeError(ValueError):
    pass


class LimitNotApplicableError(ValueError):
    pass


def _stack2(a, b, c, d):
    return jnp.stack([jnp.stack([a, b], -1), jnp.stack([c, d], -1)], -2)


def _mat(coef, M):
    return jnp.asarray(coef)[..., None, None] * jnp.asarray(M, dtype=complex)


# ---------------------------------------------------------------------------
# Toda and the Leznov-Saveliev connection


@dataclass(frozen=True)
class TodaData:
    basis: ChevalleyBasis
    phi: tuple
    psi: tuple
    alpha: complex = 1.0
    beta: complex = 1.0

    def __post_init__(self):
        r = self.basis.rank
        if len(self.phi) != r or len(self.psi) != r:
            raise ValueError(f"need {r} fields phi and psi")
        object.__setattr__(self, "phi", tuple(as_evaluator(p) for p in self.phi))
        object.__setattr__(self, "psi", tuple(as_evaluator(p) for p in self.psi))

    @classmethod
    def canonical(cls, basis: ChevalleyBasis, phi, alpha=1.0, beta=1.0) -> "TodaData":
        """``psi_i = beta sum_j (k^-1)_ij phi_j``."""
        phi = tuple(as_evaluator(p) for p in phi)
        kinv = np.linalg.inv(basis.cartan.astype(float))

        def make(i):
            return lambda x, y: beta * sum(kinv[i, j] * phi[j](x, y) for j in range(len(phi)))

        return cls(basis, phi, tuple(make(i) for i in range(basis.rank)), alpha, beta)


def leznov_saveliev_connection(data: TodaData, grid: Grid) -> Connection:
    """``A_z = sum d_z psi_i H_i + alpha E_i^+``, ``A_zbar = alpha sum e^{beta phi_i} E_i^-``."""
    b = data.basis
    Hs = [np.asarray(h, dtype=complex) for h in b.H]
    Ep = sum(np.asarray(b.simple(i, +1), dtype=complex) for i in range(b.rank))
    Em = [np.asarray(b.simple(i, -1), dtype=complex) for i in range(b.rank)]
    dpsi = [d_z(p) for p in data.psi]
    al, be = data.alpha, data.beta

    def az(x, y):
        return sum(_mat(dp(x, y), Hi) for dp, Hi in zip(dpsi, Hs)) + al * jnp.asarray(Ep)

    def azbar(x, y):
        return sum(_mat(al * jnp.exp(be * p(x, y)), E) for p, E in zip(data.phi, Em))

    return Connection(grid, az, azbar)


def toda_residual_fields(data: TodaData, grid: Grid) -> list[GridField]:
    if data.beta == 0:
        raise InvalidParameterError("beta must be nonzero")
    k = data.basis.cartan
    c = data.alpha**2 / data.beta
    laps = [laplacian_zzbar(p) for p in data.phi]
    out = []
    for i in range(data.basis.rank):
        def res(x, y, i=i):
            rhs = sum(k[i, j] * jnp.exp(data.beta * data.phi[j](x, y)) for j in range(data.basis.rank))
            return laps[i](x, y) - c * rhs

        out.append(GridField(grid, grid.evaluate(res)))
    return out


def toda_residual(data: TodaData, grid: Grid) -> list[ResidualReport]:
    """Per-component residuals of ``dd phi_i - (alpha^2/beta) sum_j k_ij e^{beta phi_j}``."""
    return [residual(f) for f in toda_residual_fields(data, grid)]


def curvature_cartan_part(data: TodaData, grid: Grid) -> np.ndarray:
    """H-coordinates ``h_i`` of the Leznov-Saveliev curvature, shape ``(r, ny, nx)``."""
    F = grid.evaluate(curvature_evaluator(leznov_saveliev_connection(data, grid)))
    coords = decompose_field(F, data.basis)
    return np.stack([coords.h[i] for i in range(data.basis.rank)])


def expected_cartan_part(data: TodaData, grid: Grid) -> np.ndarray:
    """``alpha^2 e^{beta phi_i} - dd psi_i`` per component."""
    out = []
    for p, q in zip(data.phi, data.psi):
        lap = laplacian_zzbar(q)
        out.append(grid.evaluate(lambda x, y: data.alpha**2 * jnp.exp(data.beta * p(x, y)) - lap(x, y)))
    return np.stack(out)


def toda_from_curvature(data: TodaData, grid: Grid) -> np.ndarray:
    """Toda residuals predicted from the curvature: ``R = -(1/beta) k h``."""
    h = curvature_cartan_part(data, grid)
    return -np.einsum("ij,j...->i...", data.basis.cartan, h) / data.beta


def sl2_liouville_data(f: PolyField | None = None) -> TodaData:
    """Exact sl2 data: ``phi = -2 ln(1 + |f|^2)`` with ``alpha = i``, ``beta = 1`` and ``f' = 1``."""
    f = f or PolyField.z()
    if f.dz() != PolyField.constant(1):
        raise ValueError("this family needs f' = 1")

    def phi(x, y):
        a = f.xy(x, y)
        return jnp.real(-2 * jnp.log(1 + a * jnp.conj(a)))

    return TodaData.canonical(build_sl_chevalley(2), [phi], alpha=1j, beta=1.0)


# ---------------------------------------------------------------------------
# CAT fields and connection


class CatFields(CartanField):
    """CAT triple (phi, eta, xi).

    ``xi_laplacian`` optionally overrides ``dd xi`` (used when xi is only known
    on the grid from path integration of its first derivatives).
    """

    def __init__(self, phi, eta, xi, xi_laplacian=None, xi_values=None):
        super().__init__(phi, eta, xi)
        object.__setattr__(self, "xi_laplacian", xi_laplacian)
        object.__setattr__(self, "xi_values", xi_values)


def cat_residual_fields(f: CatFields, grid: Grid) -> dict[str, GridField]:
    lphi, leta = laplacian_zzbar(f.phi), laplacian_zzbar(f.eta)
    lxi = f.xi_laplacian or laplacian_zzbar(f.xi)

    def r_phi(x, y):
        p, e = f.phi(x, y), f.eta(x, y)
        return lphi(x, y) - jnp.exp(2 * p) + jnp.exp(2 * e - 2 * p)

    def r_xi(x, y):
        p, e = f.phi(x, y), f.eta(x, y)
        return lxi(x, y) - jnp.exp(2 * e - 2 * p)

    return {
        "phi": GridField(grid, grid.evaluate(r_phi)),
        "eta": GridField(grid, grid.evaluate(leta)),
        "xi": GridField(grid, grid.evaluate(r_xi)),
    }


def cat_residual(f: CatFields, grid: Grid) -> dict[str, ResidualReport]:
    return {k: residual(v) for k, v in cat_residual_fields(f, grid).items()}


def cat_connection(Phi: CartanField, grid: Grid) -> Connection:
    """Affine-valued CAT connection; the spectral parameter is the Laurent degree.

    ``A_z = d_z Phi + e^Phi (E+ + l E-) e^-Phi``,
    ``A_zbar = -d_zbar Phi + e^-Phi (E- + l^-1 E+) e^Phi``.
    """
    dz = [d_z(Phi.phi), d_z(Phi.eta), d_z(Phi.xi)]
    dzb = [d_zbar(Phi.phi), d_zbar(Phi.eta), d_zbar(Phi.xi)]
    up = AffineElement({0: EP, 1: EM})
    lo = AffineElement({0: EM, -1: EP})

    def full(fn, x, y):
        v = fn(x, y)
        return v + jnp.zeros(jnp.shape(x), dtype=complex)

    def az(x, y):
        P = cartan_element(full(Phi.phi, x, y), full(Phi.eta, x, y), full(Phi.xi, x, y))
        D = cartan_element(*(full(g, x, y) for g in dz))
        return D + adjoint_exp_conjugate(P, up)

    def azbar(x, y):
        P = cartan_element(full(Phi.phi, x, y), full(Phi.eta, x, y), full(Phi.xi, x, y))
        D = cartan_element(*(full(g, x, y) for g in dzb))
        return -D + adjoint_exp_conjugate(-P, lo)

    return Connection(grid, az, azbar)


def cat_pencil(Phi: CartanField, grid: Grid) -> Pencil:
    """Matrix pencil of the CAT connection with the c and d parts dropped.

    Flat exactly when eta is constant (the sinh-Gordon sector); the spectral
    parameter multiplies the z component (orientation ``"z"``).
    """
    def az(x, y):
        p = Phi.phi(x, y)
        return _mat(0.5 * d_z(Phi.phi)(x, y), H) + _mat(jnp.exp(p), EP)

    def bz(x, y):
        return _mat(jnp.exp(Phi.eta(x, y) - Phi.phi(x, y)), EM)

    def azbar(x, y):
        p = Phi.phi(x, y)
        return _mat(-0.5 * d_zbar(Phi.phi)(x, y), H) + _mat(jnp.exp(p), EM)

    def bzbar(x, y):
        return _mat(jnp.exp(Phi.eta(x, y) - Phi.phi(x, y)), EP)

    return Pencil(Connection(grid, az, azbar), Connection(grid, bz, bzbar), orientation="z")


def cat_limits(f: CatFields, which: str, grid: Grid, tol: float = 1e-6) -> ResidualReport:
    """Residual of the sinh-Gordon (eta -> 0) or Liouville (eta -> -inf) limit."""
    eta = grid.evaluate(f.eta)
    phi = grid.evaluate(f.phi)
    use = ~grid.mask
    if which in ("sinh-gordon", "sinh"):
        if np.max(np.abs(eta[use])) > tol:
            raise LimitNotApplicableError("eta is not close to 0")
        res = lambda x, y: laplacian_zzbar(f.phi)(x, y) - jnp.exp(2 * f.phi(x, y)) + jnp.exp(-2 * f.phi(x, y))
    elif which == "liouville":
        if np.max(np.abs(np.exp(2 * eta[use] - 2 * phi[use]))) > tol:
            raise LimitNotApplicableError("e^{2 eta - 2 phi} is not negligible")
        res = lambda x, y: laplacian_zzbar(f.phi)(x, y) - jnp.exp(2 * f.phi(x, y))
    else:
        raise ValueError(f"unknown limit {which!r}")
    return residual(GridField(grid, grid.evaluate(res)))


def liouville_cat_fields(F: PolyField | None = None, eta: float = -20.0) -> CatFields:
    """``phi = ln|F'| - ln(1 - |F|^2)`` solves ``dd phi = e^{2 phi}`` on ``|F| < 1``."""
    F = F or PolyField.z()
    Fp = F.dz()

    def phi(x, y):
        a, b = F.xy(x, y), Fp.xy(x, y)
        return jnp.real(0.5 * jnp.log(b * jnp.conj(b)) - jnp.log(1 - a * jnp.conj(a)))

    return CatFields(phi, eta, 0.0)


# ---------------------------------------------------------------------------
# exact CAT solutions from a travelling-kink profile


def kink_profile(x0: float = 0.0):
    """``w(x) = 2 artanh(e^{-4(x - x0)})`` with ``w'' = 8 sinh(2w)`` for x > x0.

    So ``w(Re F)`` solves ``dd w = |F'|^2 (e^{2w} - e^{-2w})``.  Also returns
    ``Xi`` with ``Xi'' = 4 e^{-2w}``.
    """

    def w(x):
        return 2 * jnp.arctanh(jnp.exp(-4 * (x - x0)))

    def Xi(x):
        s = jnp.exp(-4 * (x - x0))
        return 2 * x**2 - 4 * x - jnp.log(1 + s) + 4 * x0 * x

    return w, Xi


@dataclass(frozen=True)
class CatSolution:
    fields: CatFields
    F: PolyField


def cat_solution(F: PolyField, x0: float = 0.0) -> CatSolution:
    """Exact CAT triple built from holomorphic F (needs Re F > x0, F' != 0)."""
    w, Xi = kink_profile(x0)
    Fp = F.dz()

    def phi(x, y):
        b = Fp.xy(x, y)
        return jnp.real(w(jnp.real(F.xy(x, y))) + 0.5 * jnp.log(b * jnp.conj(b)))

    def eta(x, y):
        b = Fp.xy(x, y)
        return jnp.real(jnp.log(b * jnp.conj(b)))

    def xi(x, y):
        return Xi(jnp.real(F.xy(x, y)))

    return CatSolution(CatFields(phi, eta, xi), F)


# ---------------------------------------------------------------------------
# triangular harmonic-map pencils reduce to CAT


@dataclass(frozen=True)
class ThetaCoefficients:
    """Coefficient fields of the theta-gauged pencil (evaluators).

    ``A_z = -beta H - gamma E- - delta c - l^-1 f E+``,
    ``A_zbar = -beta' H - alpha' E+ - delta' c - l f' E-``; in the untruncated
    form alpha and gamma' multiply ``l^-1 E+`` and ``l E-`` and must equal f, f'.
    """

    alpha: object
    beta: object
    gamma: object
    delta: object
    alpha_p: object
    beta_p: object
    gamma_p: object
    delta_p: object

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            object.__setattr__(self, name, as_evaluator(getattr(self, name)))


def theorem2_connection(f, fprime, th: ThetaCoefficients, grid: Grid) -> Connection:
    f, fprime = as_evaluator(f), as_evaluator(fprime)

    def az(x, y):
        return AffineElement(
            {0: -_mat(th.beta(x, y), H) - _mat(th.gamma(x, y), EM), -1: -_mat(f(x, y), EP)},
            -th.delta(x, y) + 0j * x, jnp.zeros(jnp.shape(x), dtype=complex),
        )

    def azbar(x, y):
        return AffineElement(
            {0: -_mat(th.beta_p(x, y), H) - _mat(th.alpha_p(x, y), EP), 1: -_mat(fprime(x, y), EM)},
            -th.delta_p(x, y) + 0j * x, jnp.zeros(jnp.shape(x), dtype=complex),
        )

    return Connection(grid, az, azbar)


def theorem2_constraints(f, fprime, th: ThetaCoefficients, grid: Grid) -> dict[str, ResidualReport]:
    f, fprime = as_evaluator(f), as_evaluator(fprime)
    dzfp, dzbf = d_z(fprime), d_zbar(f)
    fields = {
        "dz_fprime": lambda x, y: dzfp(x, y) + 2 * th.beta(x, y) * fprime(x, y),
        "dzbar_f": lambda x, y: dzbf(x, y) - 2 * th.beta_p(x, y) * f(x, y),
        "alpha_eq_f": lambda x, y: th.alpha(x, y) - f(x, y),
        "gamma_p_eq_fprime": lambda x, y: th.gamma_p(x, y) - fprime(x, y),
    }
    return {k: residual(GridField(grid, grid.evaluate(v))) for k, v in fields.items()}


@dataclass
class Theorem2Result:
    fields: CatFields
    cat: dict[str, ResidualReport]
    curvature: object  # PencilReport
    connection: Connection
    xi_closure: float
    xi_fd: ResidualReport | None = None

    def to_dict(self) -> dict:
        return {
            "cat": {k: v.to_dict() for k, v in self.cat.items()},
            "curvature": self.curvature.to_dict(),
            "xi_closure": self.xi_closure,
            "xi_fd": self.xi_fd.to_dict() if self.xi_fd else None,
        }


def _principal_log(fn):
    return lambda x, y: jnp.log(fn(x, y) + 0j)


def _check_nonvanishing(grid: Grid, named: dict, tol: float = 1e-12):
    for name, fn in named.items():
        v = np.abs(grid.evaluate(fn))
        if np.any(v[~grid.mask] <= tol):
            raise BranchError(f"{name} vanishes on the grid")


def branch_jumps(values: np.ndarray, mask: np.ndarray | None = None) -> int:
    """Number of row-neighbour jumps of Im(log) larger than pi."""
    im = np.imag(values)
    jump = np.abs(np.diff(im, axis=1)) > np.pi
    if mask is not None:
        jump &= ~(mask[:, 1:] | mask[:, :-1])
    return int(jump.sum())


def theorem2_reduce(f, fprime, th: ThetaCoefficients, grid: Grid, tol: float = 1e-8,
                    lambdas=(1.0, -1.0, 2j)) -> Theorem2Result:
    """Reduce an admissible theta-gauged pencil to CAT fields and verify them.

    ``phi = 1/2 ln(f f')``, ``eta = 1/2 (ln(gamma f) + ln(alpha' f'))`` and
    ``xi = xi_2 - xi_1 - phi`` with real ``xi_2, xi_1`` solving
    ``d_z xi_2 = delta``, ``d_zbar xi_1 = delta'``.
    """
    f, fprime = as_evaluator(f), as_evaluator(fprime)
    cons = theorem2_constraints(f, fprime, th, grid)
    bad = {k: v.max_abs for k, v in cons.items() if v.max_abs > tol}
    if bad:
        raise HypothesisViolationError(f"pencil constraints violated: {bad}", cons)
    _check_nonvanishing(grid, {"f": f, "f'": fprime, "gamma": th.gamma, "alpha'": th.alpha_p})

    lf, lfp = _principal_log(f), _principal_log(fprime)
    lgf = _principal_log(lambda x, y: th.gamma(x, y) * f(x, y))
    lapf = _principal_log(lambda x, y: th.alpha_p(x, y) * fprime(x, y))
    for name, fn in (("f f'", lambda x, y: lf(x, y) + lfp(x, y)), ("gamma f", lgf), ("alpha' f'", lapf)):
        if branch_jumps(grid.evaluate(fn), grid.mask):
            raise BranchError(f"log({name}) jumps across the principal branch cut")

    phi = lambda x, y: jnp.real(0.5 * (lf(x, y) + lfp(x, y)))
    eta = lambda x, y: jnp.real(0.5 * (lgf(x, y) + lapf(x, y)))

    # real xi_2 with d_z xi_2 = delta: dx xi_2 = 2 Re delta, dy xi_2 = -2 Im delta
    i2 = integrate_gradient(grid, lambda x, y: 2 * jnp.real(th.delta(x, y)),
                            lambda x, y: -2 * jnp.imag(th.delta(x, y)))
    i1 = integrate_gradient(grid, lambda x, y: 2 * jnp.real(th.delta_p(x, y)),
                            lambda x, y: 2 * jnp.imag(th.delta_p(x, y)))
    xi_vals = i2.values - i1.values - grid.evaluate(phi)
    ddelta, ddelta_p, lphi = d_zbar(th.delta), d_z(th.delta_p), laplacian_zzbar(phi)
    xi_lap = lambda x, y: jnp.real(ddelta(x, y) - ddelta_p(x, y)) - lphi(x, y)

    fields = CatFields(phi, eta, lambda x, y: jnp.zeros(jnp.shape(x)), xi_laplacian=xi_lap, xi_values=xi_vals)
    cat = cat_residual(fields, grid)
    # finite-difference check of the path-integrated xi (interior points)
    xi_fd_field = fd_laplacian_zzbar(GridField(grid, xi_vals))
    target = GridField(grid, grid.evaluate(lambda x, y: jnp.exp(2 * eta(x, y) - 2 * phi(x, y))))
    xi_fd = residual(xi_fd_field - target)
    conn = theorem2_connection(f, fprime, th, grid)
    curv = pencil_curvature(conn, lambdas)
    return Theorem2Result(fields, cat, curv, conn, max(i1.closure_defect, i2.closure_defect), xi_fd)


@dataclass(frozen=True)
class Theorem2Instance:
    f: object
    fprime: object
    theta: ThetaCoefficients
    solution: CatSolution


def theorem2_instance(F: PolyField, P: PolyField | None = None, xi1: PolyField | None = None,
                      x0: float = 0.0, central: bool = True) -> Theorem2Instance:
    """Admissible theta data realising the exact CAT solution built from F.

    ``f = e^phi P``, ``f' = e^phi / P``, ``alpha' = conj(F')^2 / f'``,
    ``gamma = F'^2 / f``, ``beta' = 1/2 d_zbar ln f``, ``beta = -1/2 d_z ln f'``
    so every constraint holds by construction.  ``xi1`` (real part taken) is an
    arbitrary split of the central field; ``central=False`` sets
    ``delta = delta' = 0``.
    """
    sol = cat_solution(F, x0)
    phi, xi = sol.fields.phi, sol.fields.xi
    P = P or PolyField.constant(1)
    Fp = F.dz()
    xi1_fn = (lambda x, y: jnp.real(xi1.xy(x, y))) if xi1 is not None else (lambda x, y: jnp.zeros(jnp.shape(x)))

    f = lambda x, y: jnp.exp(phi(x, y)) * P.xy(x, y)
    fp = lambda x, y: jnp.exp(phi(x, y)) / P.xy(x, y)
    G = lambda x, y: Fp.xy(x, y) ** 2
    Gb = lambda x, y: jnp.conj(Fp.xy(x, y)) ** 2
    dlf, dlfp = d_zbar(_principal_log(f)), d_z(_principal_log(fp))
    xi2 = lambda x, y: xi(x, y) + phi(x, y) + xi1_fn(x, y)
    if central:
        delta, delta_p = d_z(xi2), d_zbar(xi1_fn)
    else:
        delta = delta_p = 0.0
    th = ThetaCoefficients(
        alpha=f,
        beta=lambda x, y: -0.5 * dlfp(x, y),
        gamma=lambda x, y: G(x, y) / f(x, y),
        delta=delta,
        alpha_p=lambda x, y: Gb(x, y) / fp(x, y),
        beta_p=lambda x, y: 0.5 * dlf(x, y),
        gamma_p=fp,
        delta_p=delta_p,
    )
    return Theorem2Instance(f, fp, th, sol)


def random_theorem2_instance(rng: np.random.Generator, central: bool = True) -> Theorem2Instance:
    """Seeded admissible instance on the default [-0.75, 0.75]^2 square."""
    c1 = (0.6 + 0.4 * rng.random()) * np.exp(2j * np.pi * rng.random())
    c2 = 0.15 * rng.random() * np.exp(2j * np.pi * rng.random())
    F = PolyField.holomorphic([2.0, c1, c2])
    P = PolyField.holomorphic([1.0, 0.2 * (rng.normal() + 1j * rng.normal())])
    xi1 = PolyField({(1, 0): rng.normal(), (0, 1): rng.normal(), (1, 1): 0.3 * rng.normal()})
    return theorem2_instance(F, P, xi1, central=central)


# ---------------------------------------------------------------------------
# triangular sl2 pencils and affine Toda


@dataclass(frozen=True)
class ShapeVerdict:
    ok: bool
    offending: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "offending": {k: v for k, v in self.offending.items()}}


def result4_shape_check(p: Pencil, basis: ChevalleyBasis, tol: float = 1e-10) -> ShapeVerdict:
    """A_z upper, A_zbar lower (triangular incl. Cartan), A'_z and A'_zbar without Cartan part.

    The pencil must carry the spectral parameter on the z component
    (``A_z + l A'_z``, ``A_zbar + l^-1 A'_zbar``).
    """
    if p.orientation != "z":
        p = p.flipped()
    (az, azbar), (bz, bzbar) = p.A.values(), p.B.values()
    off = {}
    mask = p.A.grid.mask

    def worst(table, label):
        for key, v in table.items():
            m = float(np.max(np.abs(np.asarray(v))[~mask], initial=0))
            if m > tol:
                off[f"{label}[{key}]"] = m

    worst(decompose_field(az, basis).f, "A_z.f")
    worst(decompose_field(azbar, basis).g, "A_zbar.g")
    worst(decompose_field(bz, basis).h, "A'_z.h")
    worst(decompose_field(bzbar, basis).h, "A'_zbar.h")
    return ShapeVerdict(not off, off)


@dataclass(frozen=True)
class AffineTodaFields:
    phi: dict
    eta_plus: dict
    eta_minus: dict


@dataclass
class Result4Result:
    fields: AffineTodaFields
    residuals: dict[str, ResidualReport]

    def to_dict(self) -> dict:
        return {k: v.to_dict() for k, v in self.residuals.items()}


def _entry(fn, i, j):
    return lambda x, y: fn(x, y)[..., i, j]


def result4_reduce(p: Pencil, basis: ChevalleyBasis | None = None, check_shape: bool = True) -> Result4Result:
    """sl2 reduction of a flat triangular pencil to affine Toda.

    Coordinates: ``A_z = h+ H + g+ E+``, ``A'_z = f'+ E-``,
    ``A_zbar = h- H + f- E-``, ``A'_zbar = g'- E+``.  Returns
    ``phi = ln(f-/f'+)``, ``eta+ = g+ f'+`` (holomorphic) and
    ``eta- = f- g'-`` (antiholomorphic) with residuals of
    ``dd phi - 2(eta+ e^phi - eta- e^-phi)``, the four intermediate identities
    and the (anti)holomorphicity of eta+-.
    """
    basis = basis or build_sl_chevalley(2)
    if basis.rank != 1:
        raise ValueError("the reduction is implemented for sl2")
    if p.orientation != "z":
        p = p.flipped()
    if check_shape:
        v = result4_shape_check(p, basis)
        if not v.ok:
            raise ShapeError(f"pencil is not triangular/off-diagonal: {v.offending}")
    g = p.A.grid
    if not (p.A.is_analytic and p.B.is_analytic):
        raise ValueError("result4_reduce needs analytic pencil components")
    hp, gp = _entry(p.A.az, 0, 0), _entry(p.A.az, 0, 1)
    hm, fm = _entry(p.A.azbar, 0, 0), _entry(p.A.azbar, 1, 0)
    fpp = _entry(p.B.az, 1, 0)
    gpm = _entry(p.B.azbar, 0, 1)
    _check_nonvanishing(g, {"g+": gp, "f'+": fpp, "f-": fm, "g'-": gpm})

    ratio = lambda x, y: fm(x, y) / fpp(x, y)
    if branch_jumps(np.log(g.evaluate(ratio) + 0j), g.mask):
        raise BranchError("ln(f-/f'+) crosses the principal branch cut")
    phi = _principal_log(ratio)
    eta_p = lambda x, y: gp(x, y) * fpp(x, y)
    eta_m = lambda x, y: fm(x, y) * gpm(x, y)
    lphi = laplacian_zzbar(phi)

    def toda(x, y):
        e = jnp.exp(phi(x, y))
        return lphi(x, y) - 2 * (eta_p(x, y) * e - eta_m(x, y) / e)

    ids = {
        "dzbar_ln_g+": lambda x, y: d_zbar(_principal_log(gp))(x, y) + 2 * hm(x, y),
        "dz_ln_f-": lambda x, y: d_z(_principal_log(fm))(x, y) - 2 * hp(x, y),
        "dzbar_ln_f'+": lambda x, y: d_zbar(_principal_log(fpp))(x, y) - 2 * hm(x, y),
        "dz_ln_g'-": lambda x, y: d_z(_principal_log(gpm))(x, y) + 2 * hp(x, y),
    }
    res = {"affine_toda": residual(GridField(g, g.evaluate(toda)))}
    for k, fn in ids.items():
        res[k] = residual(GridField(g, g.evaluate(fn)))
    # (anti)holomorphicity checked by finite differences of the sampled logs
    lep = GridField(g, np.log(g.evaluate(eta_p) + 0j))
    lem = GridField(g, np.log(g.evaluate(eta_m) + 0j))
    res["holomorphic_eta+"] = residual(fd_dzbar(lep))
    res["antiholomorphic_eta-"] = residual(fd_dz(lem))
    fields = AffineTodaFields({(1,): phi}, {(1,): eta_p}, {(1,): eta_m})
    return Result4Result(fields, res)


@dataclass(frozen=True)
class Result4Instance:
    pencil: Pencil
    F: PolyField
    phi: object


def _poly_eval(c, z, zb):
    """``sum c_k z^p zb^q`` over the fixed monomials ``1, z, zb, z zb``."""
    return c[0] + c[1] * z + c[2] * zb + c[3] * z * zb


def _r4_scalars(prm, x, y):
    z, zb = x + 1j * y, x - 1j * y
    c0, c1, c2 = prm["F"][0], prm["F"][1], prm["F"][2]
    F = c0 + c1 * z + c2 * z * z
    Fp = c1 + 2 * c2 * z
    w = 2 * jnp.arctanh(jnp.exp(-4 * (jnp.real(F) - prm["x0"])))
    phi = 2 * w + jnp.log(jnp.conj(Fp) / Fp)
    gplus = jnp.exp(_poly_eval(prm["q"], z, zb))
    fpp = Fp**2 / gplus
    fm = jnp.exp(phi) * fpp
    gpm = jnp.conj(Fp) ** 2 / fm
    return phi, gplus, fpp, fm, gpm


def _r4_log_fm(prm, x, y):
    return jnp.log(_r4_scalars(prm, x, y)[3])


def _r4_log_gplus(prm, x, y):
    return _poly_eval(prm["q"], x + 1j * y, x - 1j * y)


def _r4_az(prm, x, y):
    hp = 0.5 * d_z(lambda a, b: _r4_log_fm(prm, a, b))(x, y)
    return _mat(hp, H) + _mat(_r4_scalars(prm, x, y)[1], EP)


def _r4_azbar(prm, x, y):
    hm = -0.5 * d_zbar(lambda a, b: _r4_log_gplus(prm, a, b))(x, y)
    return _mat(hm, H) + _mat(_r4_scalars(prm, x, y)[3], EM)


def _r4_bz(prm, x, y):
    return _mat(_r4_scalars(prm, x, y)[2], EM)


def _r4_bzbar(prm, x, y):
    return _mat(_r4_scalars(prm, x, y)[4], EP)


# compiled once, reused for every seed (the seed only changes the arguments)
_R4_JIT = {k: jax.jit(f) for k, f in
           (("az", _r4_az), ("azbar", _r4_azbar), ("bz", _r4_bz), ("bzbar", _r4_bzbar))}


def random_result4_pencil(rng: np.random.Generator, grid: Grid, x0: float = 0.0) -> Result4Instance:
    """Seeded admissible sl2 pencil built by integrating the constraint equations.

    ``F = 2 + c1 z + c2 z^2``, ``eta+ = F'^2``, ``eta- = conj(F')^2`` and
    ``phi = 2 w(Re F) + ln(conj(F')/F')`` solve the affine Toda equation; the
    gauge freedom ``g+ = exp(random polynomial)`` then fixes every other
    coefficient through the intermediate identities::

        f'+ = eta+ / g+,  f- = e^phi f'+,  g'- = eta- / f-,
        h+ = 1/2 d_z ln f-,  h- = -1/2 d_zbar ln g+.
    """
    # |arg F'| < pi/4 + 0.56 keeps Im phi = -2 arg F' inside the principal strip
    c1 = (0.6 + 0.4 * rng.random()) * np.exp(0.5j * np.pi * (rng.random() - 0.5))
    c2 = 0.15 * rng.random() * np.exp(2j * np.pi * rng.random())
    q = np.array([0.1 * rng.normal(), 0.2 * (rng.normal() + 1j * rng.normal()),
                  0.2 * (rng.normal() + 1j * rng.normal()), 0.1 * rng.normal()], dtype=complex)
    prm = {"F": jnp.asarray([2.0, c1, c2], dtype=complex), "q": jnp.asarray(q), "x0": jnp.asarray(float(x0))}
    comp = {k: (lambda x, y, f=f: f(prm, x, y)) for k, f in _R4_JIT.items()}
    p = Pencil(Connection(grid, comp["az"], comp["azbar"]), Connection(grid, comp["bz"], comp["bzbar"]),
               orientation="z")
    return Result4Instance(p, PolyField.holomorphic([2.0, c1, c2]),
                           lambda x, y: _r4_scalars(prm, x, y)[0])
