"""Complex-plane grids, Wirtinger calculus and residual statistics.

Two independent routes to derivatives live here:

* exact ones, either by coefficient shifting on :class:`PolyField` or by
  forward-mode differentiation (jax) of closed-form evaluators ``fn(x, y)``;
* central finite differences on sampled :class:`GridField` data.

Evaluators are plain callables ``fn(x, y)`` built from ``jax.numpy`` ops that
act pointwise on arrays of real coordinates and return either a scalar field
(shape of ``x``) or a matrix field (shape ``x.shape + (n, n)``).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

jax.config.update("jax_enable_x64", True)

Evaluator = Callable[[object, object], object]


class EmptyFieldError(ValueError):
    pass


class SingularityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# polynomial fields in (z, zbar)


class PolyField:
    """Finite sum of ``c[p, q] * z**p * zbar**q`` with complex coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: dict[tuple[int, int], complex] | None = None):
        clean = {}
        for (p, q), c in (coeffs or {}).items():
            if p < 0 or q < 0:
                raise ValueError("negative degree")
            if c != 0:
                clean[(int(p), int(q))] = complex(c)
        self.coeffs = clean

    @classmethod
    def holomorphic(cls, coeffs) -> "PolyField":
        """From ascending-degree coefficients of a polynomial in z."""
        return cls({(p, 0): c for p, c in enumerate(coeffs)})

    @classmethod
    def constant(cls, c) -> "PolyField":
        return cls({(0, 0): c})

    @classmethod
    def z(cls) -> "PolyField":
        return cls({(1, 0): 1})

    def is_holomorphic(self) -> bool:
        return all(q == 0 for _, q in self.coeffs)

    def is_antiholomorphic(self) -> bool:
        return all(p == 0 for p, _ in self.coeffs)

    def dz(self) -> "PolyField":
        return PolyField({(p - 1, q): p * c for (p, q), c in self.coeffs.items() if p > 0})

    def dzbar(self) -> "PolyField":
        return PolyField({(p, q - 1): q * c for (p, q), c in self.coeffs.items() if q > 0})

    def conj(self) -> "PolyField":
        """Complex conjugate field: swaps the roles of z and zbar."""
        return PolyField({(q, p): c.conjugate() for (p, q), c in self.coeffs.items()})

    def compose_scale(self, a: complex) -> "PolyField":
        """``P(a z)`` as a polynomial."""
        a = complex(a)
        return PolyField({(p, q): c * a**p * a.conjugate() ** q for (p, q), c in self.coeffs.items()})

    def __add__(self, other):
        other = other if isinstance(other, PolyField) else PolyField.constant(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0) + c
        return PolyField(out)

    __radd__ = __add__

    def __neg__(self):
        return PolyField({k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, PolyField) else -complex(other))

    def __mul__(self, other):
        if not isinstance(other, PolyField):
            return PolyField({k: c * other for k, c in self.coeffs.items()})
        out: dict[tuple[int, int], complex] = {}
        for (p1, q1), c1 in self.coeffs.items():
            for (p2, q2), c2 in other.coeffs.items():
                k = (p1 + p2, q1 + q2)
                out[k] = out.get(k, 0) + c1 * c2
        return PolyField(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, PolyField) and self.coeffs == other.coeffs

    def __repr__(self):
        return f"PolyField({self.coeffs})"

    def __call__(self, z):
        """Evaluate at complex points (numpy in, numpy out)."""
        z = np.asarray(z, dtype=complex)
        zb = z.conj()
        out = np.zeros_like(z)
        for (p, q), c in self.coeffs.items():
            out = out + c * z**p * zb**q
        return out

    def xy(self, x, y):
        """jax-traceable evaluation at real coordinates."""
        z = x + 1j * y
        zb = x - 1j * y
        out = jnp.zeros(jnp.shape(x), dtype=complex)
        for (p, q), c in self.coeffs.items():
            out = out + c * z**p * zb**q
        return out


def parse_complex(text: str) -> complex:
    """Parse ``a+bi`` style literals (``i`` or ``j`` accepted)."""
    t = text.strip().replace(" ", "").replace("i", "j")
    if t in ("j", "+j"):
        return 1j
    if t == "-j":
        return -1j
    if t.endswith("j") and t[:-1] and t[:-1][-1] in "+-":
        t = t[:-1] + "1j"
    return complex(t)


def parse_poly(text: str) -> PolyField:
    """Comma-separated ascending-degree coefficients, e.g. ``"0,1"`` is z."""
    return PolyField.holomorphic([parse_complex(t) for t in text.split(",") if t.strip()])


def as_evaluator(obj) -> Evaluator:
    """Accept a PolyField, a callable ``fn(x, y)`` or a constant."""
    if isinstance(obj, PolyField):
        return obj.xy
    if callable(obj):
        return obj
    c = complex(obj) if np.iscomplexobj(obj) else float(obj)
    return lambda x, y: c + jnp.zeros(jnp.shape(x))


# ---------------------------------------------------------------------------
# exact derivatives of evaluators


def d_x(fn: Evaluator) -> Evaluator:
    def out(x, y):
        x = jnp.asarray(x, dtype=float)
        return jax.jvp(lambda a: fn(a, y), (x,), (jnp.ones_like(x),))[1]

    return out


def d_y(fn: Evaluator) -> Evaluator:
    def out(x, y):
        y = jnp.asarray(y, dtype=float)
        return jax.jvp(lambda b: fn(x, b), (y,), (jnp.ones_like(y),))[1]

    return out


def _combine(a, b, s):
    # works leafwise so pytree-valued evaluators (e.g. affine elements) are fine
    return jax.tree_util.tree_map(lambda u, v: s * (u + v), a, b)


def d_z(fn: Evaluator) -> Evaluator:
    fx, fy = d_x(fn), d_y(fn)
    return lambda x, y: _combine(fx(x, y), jax.tree_util.tree_map(lambda v: -1j * v, fy(x, y)), 0.5)


def d_zbar(fn: Evaluator) -> Evaluator:
    fx, fy = d_x(fn), d_y(fn)
    return lambda x, y: _combine(fx(x, y), jax.tree_util.tree_map(lambda v: 1j * v, fy(x, y)), 0.5)


def laplacian_zzbar(fn: Evaluator) -> Evaluator:
    """``d_z d_zbar fn`` (a quarter of the flat Laplacian)."""
    fxx, fyy = d_x(d_x(fn)), d_y(d_y(fn))
    return lambda x, y: _combine(fxx(x, y), fyy(x, y), 0.25)


# ---------------------------------------------------------------------------
# grids and sampled fields


@dataclass(frozen=True)
class Grid:
    re_min: float = -1.5
    re_max: float = 1.5
    im_min: float = -1.5
    im_max: float = 1.5
    nx: int = 96
    ny: int = 96
    mask: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError("grid needs at least 8 points per axis")
        if not (self.re_max > self.re_min and self.im_max > self.im_min):
            raise ValueError("empty bounds")
        if self.mask is None:
            object.__setattr__(self, "mask", np.zeros((self.ny, self.nx), dtype=bool))
        elif self.mask.shape != (self.ny, self.nx):
            raise ValueError("mask shape mismatch")

    @classmethod
    def square(cls, half_width: float, n: int) -> "Grid":
        return cls(-half_width, half_width, -half_width, half_width, n, n)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.re_min, self.re_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.im_min, self.im_max, self.ny)

    @property
    def hx(self) -> float:
        return (self.re_max - self.re_min) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.im_max - self.im_min) / (self.ny - 1)

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def XY(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y)  # shape (ny, nx); axis 1 is Re z

    @property
    def Z(self) -> np.ndarray:
        X, Y = self.XY
        return X + 1j * Y

    def refined(self) -> "Grid":
        """Same bounds with the spacing halved (coarse points are kept)."""
        return Grid(self.re_min, self.re_max, self.im_min, self.im_max, 2 * self.nx - 1, 2 * self.ny - 1)

    def with_mask(self, mask: np.ndarray) -> "Grid":
        return Grid(self.re_min, self.re_max, self.im_min, self.im_max, self.nx, self.ny,
                    np.asarray(mask, dtype=bool) | self.mask)

    def evaluate(self, fn: Evaluator):
        X, Y = self.XY
        return jax.tree_util.tree_map(np.asarray, fn(jnp.asarray(X), jnp.asarray(Y)))

    def crop(self, k: int) -> "Grid":
        """Drop a ring of k points on every side."""
        x, y = self.x, self.y
        return Grid(x[k], x[-k - 1], y[k], y[-k - 1], self.nx - 2 * k, self.ny - 2 * k,
                    self.mask[k:-k, k:-k].copy())

    def index_of(self, point) -> tuple[int, int]:
        """(iy, ix) of the grid node nearest to ``(x, y)``."""
        ix = int(np.argmin(np.abs(self.x - point[0])))
        iy = int(np.argmin(np.abs(self.y - point[1])))
        return iy, ix


def su2_grid(n: int = 96) -> Grid:
    return Grid.square(1.5, n)


def su11_grid(f: PolyField | None = None, n: int = 96, margin: float = 0.05) -> Grid:
    """Default disk-type grid, masking ``|f| >= 1 - margin`` when f is given."""
    g = Grid.square(0.85, n)
    if f is not None:
        g = g.with_mask(np.abs(f(g.Z)) >= 1 - margin)
    return g


@dataclass(frozen=True)
class GridField:
    grid: Grid
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape[:2] != (self.grid.ny, self.grid.nx):
            raise ValueError("values do not match the grid")
        object.__setattr__(self, "values", v)
        if self.mask is None:
            object.__setattr__(self, "mask", self.grid.mask.copy())

    @classmethod
    def sample(cls, grid: Grid, fn: Evaluator) -> "GridField":
        return cls(grid, grid.evaluate(fn))

    def crop(self, k: int) -> "GridField":
        return GridField(self.grid.crop(k), self.values[k:-k, k:-k], self.mask[k:-k, k:-k])

    @property
    def is_matrix(self) -> bool:
        return self.values.ndim == 4

    def _combine(self, other, op):
        if isinstance(other, GridField):
            return GridField(self.grid, op(self.values, other.values), self.mask | other.mask)
        return GridField(self.grid, op(self.values, other), self.mask)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    def __matmul__(self, other):
        return self._combine(other, np.matmul)


def _dilate(mask: np.ndarray, width: int) -> np.ndarray:
    out = mask.copy()
    out[:width, :] = True
    out[-width:, :] = True
    out[:, :width] = True
    out[:, -width:] = True
    for s in range(1, width + 1):
        out[s:, :] |= mask[:-s, :]
        out[:-s, :] |= mask[s:, :]
        out[:, s:] |= mask[:, :-s]
        out[:, :-s] |= mask[:, s:]
    return out


def _central(values: np.ndarray, axis: int, h: float, order: int) -> np.ndarray:
    v = np.nan_to_num(values)
    out = np.zeros_like(v, dtype=complex)
    sl = [slice(None)] * v.ndim

    def shifted(k):
        s = list(sl)
        n = v.shape[axis]
        s[axis] = slice(max(0, k), n + min(0, k))
        t = list(sl)
        t[axis] = slice(max(0, -k), n + min(0, -k))
        res = np.zeros_like(v, dtype=complex)
        res[tuple(t)] = v[tuple(s)]
        return res

    if order == 2:
        out = (shifted(1) - shifted(-1)) / (2 * h)
    elif order == 4:
        out = (-shifted(2) + 8 * shifted(1) - 8 * shifted(-1) + shifted(-2)) / (12 * h)
    else:
        raise ValueError("order must be 2 or 4")
    return out


def _fd(fieldv: GridField, sign: int, order: int) -> GridField:
    if fieldv.mask.all():
        raise EmptyFieldError("all points masked")
    g = fieldv.grid
    fx = _central(fieldv.values, 1, g.hx, order)
    fy = _central(fieldv.values, 0, g.hy, order)
    mask = _dilate(fieldv.mask, order // 2)
    if mask.all():
        raise EmptyFieldError("no interior points left")
    return GridField(g, 0.5 * (fx + sign * 1j * fy), mask)


def fd_dz(fieldv: GridField, order: int = 2) -> GridField:
    return _fd(fieldv, -1, order)


def fd_dzbar(fieldv: GridField, order: int = 2) -> GridField:
    return _fd(fieldv, +1, order)


def fd_laplacian_zzbar(fieldv: GridField) -> GridField:
    """Five-point ``d_z d_zbar`` (= Laplacian / 4)."""
    if fieldv.mask.all():
        raise EmptyFieldError("all points masked")
    g = fieldv.grid
    v = np.nan_to_num(fieldv.values)
    out = np.zeros_like(v, dtype=complex)
    out[1:-1, 1:-1] = (
        (v[1:-1, 2:] - 2 * v[1:-1, 1:-1] + v[1:-1, :-2]) / g.hx**2
        + (v[2:, 1:-1] - 2 * v[1:-1, 1:-1] + v[:-2, 1:-1]) / g.hy**2
    ) / 4
    return GridField(g, out, _dilate(fieldv.mask, 1))


@dataclass(frozen=True)
class PathIntegral:
    values: np.ndarray
    closure_defect: float
    basepoint: tuple[float, float]


def integrate_gradient(grid: Grid, gx: Evaluator, gy: Evaluator, basepoint=(0.0, 0.0)) -> PathIntegral:
    """Recover F with ``dF/dx = gx``, ``dF/dy = gy`` and ``F(basepoint) = 0``.

    Simpson's rule edge by edge (midpoints from the evaluators) along the
    x-first staircase.  ``closure_defect`` is the largest difference from the
    y-first staircase; it vanishes (to quadrature accuracy) iff the gradient
    field is curl free.
    """
    X, Y = grid.XY
    ev = lambda fn, a, b: np.asarray(fn(jnp.asarray(a), jnp.asarray(b)))
    gxn, gyn = ev(gx, X, Y), ev(gy, X, Y)
    gxm = ev(gx, 0.5 * (X[:, 1:] + X[:, :-1]), Y[:, 1:])
    gym = ev(gy, X[1:, :], 0.5 * (Y[1:, :] + Y[:-1, :]))
    ex = grid.hx / 6 * (gxn[:, :-1] + 4 * gxm + gxn[:, 1:])  # F[:, j+1] - F[:, j]
    ey = grid.hy / 6 * (gyn[:-1, :] + 4 * gym + gyn[1:, :])  # F[i+1, :] - F[i, :]
    iy, ix = grid.index_of(basepoint)

    def cum(e, i0):
        out = np.zeros((e.shape[0] + 1,) + e.shape[1:], dtype=e.dtype)
        out[1:] = np.cumsum(e, axis=0)
        return out - out[i0]

    row = cum(ex[iy], ix)  # along the basepoint row
    Fx = row[None, :] + cum(ey, iy)
    col = cum(ey[:, ix], iy)
    Fy = col[:, None] + cum(ex.T, ix).T
    return PathIntegral(Fx, float(np.max(np.abs(Fx - Fy))), (float(grid.x[ix]), float(grid.y[iy])))


# ---------------------------------------------------------------------------
# residuals


@dataclass(frozen=True)
class ResidualReport:
    max_abs: float
    rms: float
    worst_point: tuple[float, float]
    points_used: int

    def to_dict(self) -> dict:
        return {
            "max_abs": self.max_abs,
            "rms": self.rms,
            "worst_point": list(self.worst_point),
            "points_used": self.points_used,
        }

    def ok(self, tol: float) -> bool:
        return self.max_abs <= tol


def pointwise_norm(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values)
    if v.ndim == 4:
        return np.sqrt(np.sum(np.abs(v) ** 2, axis=(2, 3)))
    return np.abs(v)


def residual(fieldv: GridField) -> ResidualReport:
    use = ~fieldv.mask
    if not use.any():
        raise EmptyFieldError("no unmasked points")
    norms = pointwise_norm(fieldv.values)
    vals = norms[use]
    if not np.all(np.isfinite(vals)):
        return ResidualReport(float("inf"), float("inf"), (float("nan"),) * 2, int(use.sum()))
    masked = np.where(use, norms, -np.inf)
    iy, ix = np.unravel_index(np.argmax(masked), masked.shape)
    return ResidualReport(
        max_abs=float(vals.max()),
        rms=float(np.sqrt(np.mean(vals**2))),
        worst_point=(float(fieldv.grid.x[ix]), float(fieldv.grid.y[iy])),
        points_used=int(use.sum()),
    )


def residual_of(grid: Grid, fn: Evaluator) -> ResidualReport:
    return residual(GridField.sample(grid, fn))


def refinement_ratio(coarse: GridField, fine: GridField) -> float:
    """``max|coarse| / max|fine|`` over the coarse nodes valid on both grids.

    ``fine`` must live on ``coarse.grid.refined()`` (same bounds, spacing
    halved), so every coarse node is also a fine node.  Comparing at shared
    nodes measures the convergence order at fixed points, independent of
    where each grid happens to place its extreme nodes.
    """
    gc, gf = coarse.grid, fine.grid
    same = (gc.re_min, gc.re_max, gc.im_min, gc.im_max) == (gf.re_min, gf.re_max, gf.im_min, gf.im_max)
    if not same or (gf.nx, gf.ny) != (2 * gc.nx - 1, 2 * gc.ny - 1):
        raise ValueError("fine grid is not the refinement of the coarse grid")
    use = ~coarse.mask & ~fine.mask[::2, ::2]
    if not use.any():
        raise EmptyFieldError("no shared unmasked nodes")
    a = pointwise_norm(coarse.values)[use].max()
    b = pointwise_norm(fine.values)[::2, ::2][use].max()
    return float(a / b) if b > 0 else float("inf")


# ---------------------------------------------------------------------------
# the composite log-Laplacian of ln(1 +- f fbar)


def composite_log_laplacian(f: PolyField, sign: int, grid: Grid | None = None):
    """Nonnegative density ``|f'|^2 / (1 + sign |f|^2)^2``.

    This equals ``sign * d_z d_zbar ln(1 + sign f fbar)``: the log-Laplacian
    itself for sign=+1 and its magnitude for sign=-1 (where it is negative).
    Returns an evaluator, or a :class:`GridField` when ``grid`` is given; for
    sign=-1 the grid must mask every point with ``|f| >= 1``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not f.is_holomorphic():
        raise ValueError("f must be holomorphic")
    fp = f.dz()

    def density(x, y):
        a = f.xy(x, y)
        b = fp.xy(x, y)
        return (b * jnp.conj(b)) / (1 + sign * a * jnp.conj(a)) ** 2

    if grid is None:
        return density
    if sign == -1:
        bad = (np.abs(f(grid.Z)) >= 1) & ~grid.mask
        if bad.any():
            raise SingularityError(f"{int(bad.sum())} unmasked points with |f| >= 1")
    return GridField.sample(grid, density)


# ---------------------------------------------------------------------------
# dumps


def _entries(values: np.ndarray) -> list[np.ndarray]:
    if values.ndim == 2:
        return [values]
    n = values.shape[-1]
    return [values[..., i, j] for i in range(n) for j in range(n)]


def dump_csv(fieldv: GridField, path) -> None:
    X, Y = fieldv.grid.XY
    cols = _entries(fieldv.values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if len(cols) == 1:
            w.writerow(["re", "im", "value_re", "value_im"])
        else:
            n = fieldv.values.shape[-1]
            head = []
            for i in range(n):
                for j in range(n):
                    head += [f"m{i}{j}_re", f"m{i}{j}_im"]
            w.writerow(["re", "im"] + head)
        use = ~fieldv.mask
        for iy, ix in zip(*np.nonzero(use)):
            row = [f"{X[iy, ix]:.17g}", f"{Y[iy, ix]:.17g}"]
            for c in cols:
                v = complex(c[iy, ix])
                row += [f"{v.real:.17g}", f"{v.imag:.17g}"]
            w.writerow(row)


def field_to_json(fieldv: GridField) -> dict:
    g = fieldv.grid
    vals = fieldv.values
    return {
        "grid": {"re": [g.re_min, g.re_max], "im": [g.im_min, g.im_max], "nx": g.nx, "ny": g.ny},
        "mask": fieldv.mask.astype(int).tolist(),
        "re": np.real(vals).tolist(),
        "im": np.imag(vals).tolist(),
    }


def dump_json(fieldv: GridField, path) -> None:
    with open(path, "w") as fh:
        json.dump(field_to_json(fieldv), fh)
