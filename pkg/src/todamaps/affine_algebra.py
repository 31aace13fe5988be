"""The loop algebra of sl(2) with central charge c and derivation d.

An :class:`AffineElement` stores its Laurent part as a dict
``degree -> 2x2 matrix``; matrices may carry leading batch axes so the same
type also represents algebra-valued fields sampled on a grid.  The bracket is

    [x l^m + a c + b d, y l^n + a' c + b' d]
        = [x, y] l^(m+n) + b n y l^n - b' m x l^m + m delta_{m+n,0} tr(x y) c,

i.e. d acts as ``l d/dl`` and the central term is the residue pairing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from .field_grid import as_evaluator

H = np.array([[1, 0], [0, -1]])
EP = np.array([[0, 1], [0, 0]])
EM = np.array([[0, 0], [1, 0]])


class NonCartanError(ValueError):
    pass


def _is_concrete(m) -> bool:
    return isinstance(m, (np.ndarray, np.generic, int, float, complex))


def _is_zero(m) -> bool:
    return _is_concrete(m) and not np.any(m)


def _tr(m):
    return m[..., 0, 0] + m[..., 1, 1]


@dataclass(frozen=True)
class AffineElement:
    laurent: dict[int, object] = field(default_factory=dict)
    c_coeff: object = 0
    d_coeff: object = 0

    def __post_init__(self):
        clean = {}
        for k, m in self.laurent.items():
            if m.shape[-2:] != (2, 2):
                raise ValueError("Laurent coefficients must be 2x2")
            if _is_concrete(m):
                if np.max(np.abs(_tr(np.asarray(m))), initial=0) > 1e-12:
                    raise ValueError(f"degree {k} coefficient is not traceless")
                if _is_zero(m):
                    continue
            clean[int(k)] = m
        object.__setattr__(self, "laurent", clean)

    # construction helpers
    @classmethod
    def loop(cls, matrix, degree: int = 0) -> "AffineElement":
        return cls({degree: np.asarray(matrix) if _is_concrete(matrix) else matrix})

    @classmethod
    def central(cls, c=1) -> "AffineElement":
        return cls({}, c, 0)

    @classmethod
    def derivation(cls, d=1) -> "AffineElement":
        return cls({}, 0, d)

    @property
    def degrees(self) -> list[int]:
        return sorted(self.laurent)

    def component(self, k: int):
        return self.laurent.get(k, np.zeros((2, 2), dtype=int))

    def __add__(self, other: "AffineElement") -> "AffineElement":
        out = dict(self.laurent)
        for k, m in other.laurent.items():
            out[k] = out[k] + m if k in out else m
        return AffineElement(out, self.c_coeff + other.c_coeff, self.d_coeff + other.d_coeff)

    def __neg__(self) -> "AffineElement":
        return AffineElement({k: -m for k, m in self.laurent.items()}, -self.c_coeff, -self.d_coeff)

    def __sub__(self, other: "AffineElement") -> "AffineElement":
        return self + (-other)

    def scale(self, s) -> "AffineElement":
        """Multiply by a scalar or by a batch of scalars (broadcast over matrices)."""
        sm = s[..., None, None] if hasattr(s, "ndim") and s.ndim else s
        return AffineElement({k: sm * m for k, m in self.laurent.items()}, s * self.c_coeff, s * self.d_coeff)

    __rmul__ = scale

    def evaluate(self, lam):
        """Matrix value of the Laurent part at a spectral parameter."""
        out = 0
        for k, m in self.laurent.items():
            out = out + m * lam**k
        return out

    def norm(self) -> np.ndarray:
        """Pointwise size: Frobenius norm over all degrees plus |c| and |d|."""
        sq = np.abs(np.asarray(self.c_coeff)) ** 2 + np.abs(np.asarray(self.d_coeff)) ** 2
        for m in self.laurent.values():
            sq = sq + np.sum(np.abs(np.asarray(m)) ** 2, axis=(-2, -1))
        return np.sqrt(sq)

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.max(self.norm(), initial=0) <= tol)


def _flatten(X: AffineElement):
    keys = tuple(sorted(X.laurent))
    return (tuple(X.laurent[k] for k in keys), X.c_coeff, X.d_coeff), keys


def _unflatten(keys, children):
    # bypasses validation: jax may rebuild with placeholders or tangents
    obj = object.__new__(AffineElement)
    mats, c, d = children
    object.__setattr__(obj, "laurent", dict(zip(keys, mats)))
    object.__setattr__(obj, "c_coeff", c)
    object.__setattr__(obj, "d_coeff", d)
    return obj


jax.tree_util.register_pytree_node(AffineElement, _flatten, _unflatten)


def cocycle(X: AffineElement, Y: AffineElement):
    """Residue pairing ``sum_k k tr(x_k y_{-k})``."""
    out = 0
    for k, xk in X.laurent.items():
        if k != 0 and -k in Y.laurent:
            out = out + k * _tr(xk @ Y.laurent[-k])
    return out


def loop_bracket(X: AffineElement, Y: AffineElement) -> AffineElement:
    out: dict[int, object] = {}

    def acc(k, m):
        out[k] = out[k] + m if k in out else m

    for i, x in X.laurent.items():
        for j, y in Y.laurent.items():
            acc(i + j, x @ y - y @ x)
    if not _is_zero(X.d_coeff):
        dx = X.d_coeff[..., None, None] if hasattr(X.d_coeff, "ndim") and X.d_coeff.ndim else X.d_coeff
        for k, y in Y.laurent.items():
            if k:
                acc(k, k * dx * y)
    if not _is_zero(Y.d_coeff):
        dy = Y.d_coeff[..., None, None] if hasattr(Y.d_coeff, "ndim") and Y.d_coeff.ndim else Y.d_coeff
        for k, x in X.laurent.items():
            if k:
                acc(k, -k * dy * x)
    return AffineElement(out, cocycle(X, Y), 0)


def triangular_decompose(X: AffineElement) -> tuple[AffineElement, AffineElement, AffineElement]:
    """Split into (strictly lower, Cartan, strictly upper) parts degree by degree."""
    lo, ca, up = {}, {}, {}
    for k, m in X.laurent.items():
        z = np.zeros_like(m) if _is_concrete(m) else jnp.zeros_like(m)
        if _is_concrete(m):
            L = z.copy(); L[..., 1, 0] = m[..., 1, 0]
            U = z.copy(); U[..., 0, 1] = m[..., 0, 1]
            D = m - L - U
        else:
            L = z.at[..., 1, 0].set(m[..., 1, 0])
            U = z.at[..., 0, 1].set(m[..., 0, 1])
            D = m - L - U
        lo[k], ca[k], up[k] = L, D, U
    return AffineElement(lo), AffineElement(ca, X.c_coeff, X.d_coeff), AffineElement(up)


def cartan_element(phi, eta, xi) -> AffineElement:
    """``Phi = phi H / 2 + eta d + xi c / 2`` (pointwise if arrays)."""
    phi_m = _xp(phi).asarray(phi)[..., None, None] * H / 2
    return AffineElement({0: phi_m}, xi / 2, eta)


def _xp(*vals):
    return np if all(_is_concrete(v) for v in vals) else jnp


def adjoint_exp_conjugate(Phi: AffineElement, X: AffineElement) -> AffineElement:
    """``exp(Phi) X exp(-Phi)`` for Cartan-valued Phi, via ad-eigenvalues.

    With ``Phi = phi H/2 + eta d + xi c/2`` the component ``E+- l^k`` picks up
    ``exp(+-phi + k eta)`` and ``H l^k`` picks up ``exp(k eta)``.  The central
    term generated by conjugating a degree-0 H part is zero, so c and d
    coefficients of X pass through unchanged.
    """
    for k, m in Phi.laurent.items():
        if k != 0:
            raise NonCartanError("Phi has a nonzero Laurent degree")
        if _is_concrete(m) and (np.any(m[..., 0, 1]) or np.any(m[..., 1, 0])):
            raise NonCartanError("Phi has root-vector components")
    m0 = Phi.laurent.get(0)
    phi = 2 * m0[..., 0, 0] if m0 is not None else 0
    eta = Phi.d_coeff
    xp = _xp(phi, eta, *X.laurent.values())
    out = {}
    for k, m in X.laurent.items():
        diag = xp.exp(k * eta) if k else 1
        up = xp.exp(phi + k * eta)
        lo = xp.exp(-phi + k * eta)
        scal = xp.stack(
            [xp.stack([diag * xp.ones_like(up), up], -1), xp.stack([lo, diag * xp.ones_like(lo)], -1)], -2
        )
        out[k] = scal * m
    return AffineElement(out, X.c_coeff, X.d_coeff)


@dataclass(frozen=True)
class CartanField:
    """Scalar fields (phi, eta, xi) of ``Phi = phi H/2 + eta d + xi c/2``."""

    phi: Callable
    eta: Callable
    xi: Callable

    def __post_init__(self):
        for name in ("phi", "eta", "xi"):
            object.__setattr__(self, name, as_evaluator(getattr(self, name)))

    def element(self, x, y) -> AffineElement:
        return cartan_element(self.phi(x, y), self.eta(x, y), self.xi(x, y))


def random_element(rng: np.random.Generator, degrees=range(-3, 4), density: float = 0.6,
                   central: bool = True) -> AffineElement:
    """Random element with Laurent support in ``degrees`` (test and CLI helper)."""
    lau = {}
    for k in degrees:
        if rng.random() < density:
            a, b, c = rng.normal(size=3) + 1j * rng.normal(size=3)
            lau[k] = np.array([[a, b], [c, -a]])
    cc = complex(rng.normal() + 1j * rng.normal()) if central else 0
    dd = complex(rng.normal()) if central else 0
    return AffineElement(lau, cc, dd)


def bracket_defects(elements) -> dict[str, float]:
    """Largest antisymmetry and Jacobi defects over consecutive pairs and triples."""
    anti = jac = 0.0
    n = len(elements)
    for i in range(n):
        X, Y, Z = elements[i], elements[(i + 1) % n], elements[(i + 2) % n]
        anti = max(anti, float(np.max((loop_bracket(X, Y) + loop_bracket(Y, X)).norm())))
        j = (loop_bracket(loop_bracket(X, Y), Z) + loop_bracket(loop_bracket(Y, Z), X)
             + loop_bracket(loop_bracket(Z, X), Y))
        jac = max(jac, float(np.max(j.norm())))
    return {"antisymmetry": anti, "jacobi": jac}
