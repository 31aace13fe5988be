"""sl(n, C) in the Chevalley basis, realized in the defining representation.

All structural matrices are integer arrays so every relation check is exact.
Roots are labelled by their coefficient vectors over the simple roots, e.g. for
sl(3) the highest root is ``(1, 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

Root = tuple[int, ...]


class InvalidRankError(ValueError):
    pass


class DecompositionError(ValueError):
    pass


def commutator(X, Y):
    """Return ``XY - YX``; works on stacks of matrices (last two axes)."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape[-2:] != Y.shape[-2:] or X.shape[-1] != X.shape[-2]:
        raise ValueError(f"shape mismatch: {X.shape} vs {Y.shape}")
    return X @ Y - Y @ X


def _unit(n: int, i: int, j: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=np.int64)
    m[i, j] = 1
    return m


@dataclass(frozen=True)
class ChevalleyBasis:
    rank: int
    cartan: np.ndarray
    H: tuple[np.ndarray, ...]
    Epos: dict[Root, np.ndarray]
    Eneg: dict[Root, np.ndarray]
    simple_roots: tuple[Root, ...]
    positive_roots: tuple[Root, ...]
    # root -> (row, col, sign) locating E_alpha / E_-alpha in the defining rep
    _pos_loc: dict[Root, tuple[int, int, int]] = field(repr=False, default_factory=dict)
    _neg_loc: dict[Root, tuple[int, int, int]] = field(repr=False, default_factory=dict)

    @property
    def dim(self) -> int:
        return self.rank + 1

    def simple(self, i: int, sign: int = +1) -> np.ndarray:
        """E_i^+ or E_i^- for a 0-based simple index."""
        table = self.Epos if sign > 0 else self.Eneg
        return table[self.simple_roots[i]]

    def elements(self) -> list[tuple[str, np.ndarray]]:
        out = [(f"H{i + 1}", h) for i, h in enumerate(self.H)]
        out += [(f"E+{a}", self.Epos[a]) for a in self.positive_roots]
        out += [(f"E-{a}", self.Eneg[a]) for a in self.positive_roots]
        return out


def build_sl_chevalley(n: int) -> ChevalleyBasis:
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidRankError(f"need n >= 2, got {n!r}")
    n = int(n)
    r = n - 1
    H = tuple(_unit(n, i, i) - _unit(n, i + 1, i + 1) for i in range(r))
    simple = tuple(tuple(int(k == i) for k in range(r)) for i in range(r))

    # positive roots alpha_i + ... + alpha_{j-1}, ordered by height then start
    positive = []
    for height in range(1, n):
        for i in range(0, n - height):
            positive.append(tuple(int(i <= k < i + height) for k in range(r)))

    Epos: dict[Root, np.ndarray] = {}
    Eneg: dict[Root, np.ndarray] = {}
    for i in range(r):
        Epos[simple[i]] = _unit(n, i, i + 1)
        Eneg[simple[i]] = _unit(n, i + 1, i)
    # left-to-right bracketing: E_{a_i+..+a_j} = [E_{a_i+..+a_{j-1}}, E_{a_j}]
    for root in positive:
        if sum(root) == 1:
            continue
        start = root.index(1)
        last = start + sum(root) - 1
        prefix = tuple(int(start <= k < last) for k in range(r))
        Epos[root] = commutator(Epos[prefix], Epos[simple[last]])
        Eneg[root] = commutator(Eneg[prefix], Eneg[simple[last]])

    def locate(m: np.ndarray) -> tuple[int, int, int]:
        (i,), (j,) = np.nonzero(m)[0][:1], np.nonzero(m)[1][:1]
        return int(i), int(j), int(m[i, j])

    pos_loc = {a: locate(Epos[a]) for a in positive}
    neg_loc = {a: locate(Eneg[a]) for a in positive}

    cartan = np.zeros((r, r), dtype=np.int64)
    for i, j in product(range(r), repeat=2):
        # [H_i, E_j^+] = k_ji E_j^+  -> read off k_ji from the (nonzero) entry
        c = commutator(H[i], Epos[simple[j]])
        row, col, s = pos_loc[simple[j]]
        cartan[j, i] = c[row, col] // s

    return ChevalleyBasis(
        rank=r,
        cartan=cartan,
        H=H,
        Epos=Epos,
        Eneg=Eneg,
        simple_roots=simple,
        positive_roots=tuple(positive),
        _pos_loc=pos_loc,
        _neg_loc=neg_loc,
    )


def verify_chevalley_relations(basis: ChevalleyBasis) -> list[str]:
    """Exact check of the three Chevalley relation families.

    Returns a list of human-readable violations; empty means all hold.
    """
    r = basis.rank
    k = basis.cartan
    bad: list[str] = []
    zero = np.zeros((basis.dim, basis.dim), dtype=np.int64)
    for i, j in product(range(r), repeat=2):
        Hi, Hj = basis.H[i], basis.H[j]
        Ep, Em = basis.simple(j, +1), basis.simple(j, -1)
        if not np.array_equal(commutator(Hi, Hj), zero):
            bad.append(f"[H{i + 1},H{j + 1}] != 0")
        if not np.array_equal(commutator(Hi, Ep), k[j, i] * Ep):
            bad.append(f"[H{i + 1},E{j + 1}+] != k_{j + 1}{i + 1} E{j + 1}+")
        if not np.array_equal(commutator(Hi, Em), -k[j, i] * Em):
            bad.append(f"[H{i + 1},E{j + 1}-] != -k_{j + 1}{i + 1} E{j + 1}-")
        target = basis.H[j] if i == j else zero
        if not np.array_equal(commutator(basis.simple(i, +1), Em), target):
            bad.append(f"[E{i + 1}+,E{j + 1}-] != delta_{i + 1}{j + 1} H{j + 1}")
    return bad


def verify_jacobi(basis: ChevalleyBasis) -> list[str]:
    """Exact Jacobi identity over all ordered triples of basis elements."""
    names, mats = zip(*basis.elements())
    M = np.stack(mats)
    # pairwise commutators C[a, b] = [M_a, M_b]
    C = commutator(M[:, None], M[None, :])
    bad = []
    for c in range(len(M)):
        # [[X_a, X_b], X_c] + [[X_b, X_c], X_a] + [[X_c, X_a], X_b]
        t1 = commutator(C, M[c])
        t2 = commutator(C[:, c][None, :], M[:, None])
        t3 = commutator(C[c, :][:, None], M[None, :])
        total = t1 + t2 + t3
        for a, b in zip(*np.nonzero(np.any(total != 0, axis=(2, 3)))):
            bad.append(f"Jacobi({names[a]},{names[b]},{names[c]})")
    return bad


@dataclass(frozen=True)
class ChevalleyCoordinates:
    g: dict[Root, complex]
    f: dict[Root, complex]
    h: dict[int, complex]

    def _vanish(self, table, tol):
        return all(np.nanmax(np.abs(v), initial=0) <= tol for v in table.values())

    def is_upper(self, tol: float = 0.0) -> bool:
        return self._vanish(self.f, tol)

    def is_lower(self, tol: float = 0.0) -> bool:
        return self._vanish(self.g, tol)

    def is_diagonal(self, tol: float = 0.0) -> bool:
        return self._vanish(self.g, tol) and self._vanish(self.f, tol)

    def is_off_diagonal(self, tol: float = 0.0) -> bool:
        return self._vanish(self.h, tol)


def reconstruct(coords: ChevalleyCoordinates, basis: ChevalleyBasis) -> np.ndarray:
    n = basis.dim
    out = np.zeros((n, n), dtype=complex)
    for a, c in coords.g.items():
        out = out + c * basis.Epos[a]
    for a, c in coords.f.items():
        out = out + c * basis.Eneg[a]
    for i, c in coords.h.items():
        out = out + c * basis.H[i]
    return out


def decompose_chevalley(X, basis: ChevalleyBasis, tol: float = 1e-12) -> ChevalleyCoordinates:
    """Coordinates of a traceless matrix in the Chevalley basis.

    Read off directly from matrix entries, so rational (or Fraction-valued
    object) inputs give exact coordinates.
    """
    X = np.asarray(X)
    n = basis.dim
    if X.shape != (n, n):
        raise DecompositionError(f"expected {n}x{n}, got {X.shape}")
    scale = max(1.0, float(np.max(np.abs(X.astype(complex)))))
    tr = sum(X[i, i] for i in range(n))
    if abs(complex(tr)) > tol * scale:
        raise DecompositionError(f"matrix is not traceless (trace={complex(tr):.3e})")
    g = {a: X[i, j] * s for a, (i, j, s) in basis._pos_loc.items()}
    f = {a: X[i, j] * s for a, (i, j, s) in basis._neg_loc.items()}
    # H_i = e_ii - e_{i+1,i+1}: coefficient of H_i is the partial diagonal sum
    h = {}
    acc = 0
    for i in range(basis.rank):
        acc = acc + X[i, i]
        h[i] = acc
    coords = ChevalleyCoordinates(g=g, f=f, h=h)
    resid = np.max(np.abs(reconstruct(coords, basis) - X.astype(complex)))
    if resid > tol * scale:
        raise DecompositionError(f"matrix not in span (residual {resid:.3e})")
    return coords


def decompose_field(X, basis: ChevalleyBasis, tol: float = 1e-10) -> ChevalleyCoordinates:
    """Batched :func:`decompose_chevalley` for stacks ``(..., n, n)``.

    Coordinate values are arrays over the leading axes.
    """
    X = np.asarray(X)
    n = basis.dim
    if X.shape[-2:] != (n, n):
        raise DecompositionError(f"expected trailing {n}x{n}, got {X.shape}")
    tr = np.trace(X, axis1=-2, axis2=-1)
    scale = max(1.0, float(np.nanmax(np.abs(X), initial=0)))
    if np.nanmax(np.abs(tr), initial=0) > tol * scale:
        raise DecompositionError("matrix field is not traceless")
    g = {a: X[..., i, j] * s for a, (i, j, s) in basis._pos_loc.items()}
    f = {a: X[..., i, j] * s for a, (i, j, s) in basis._neg_loc.items()}
    h = {}
    acc = 0
    for i in range(basis.rank):
        acc = acc + X[..., i, i]
        h[i] = acc
    return ChevalleyCoordinates(g=g, f=f, h=h)


@dataclass(frozen=True)
class Result5Verdict:
    commutator_diagonal: bool
    components_off_diagonal: bool
    commutator_zero: bool
    proof_residuals: dict = field(default_factory=dict, repr=False)

    @property
    def holds(self) -> bool:
        """Diagonal commutator implies off-diagonal components or zero commutator."""
        return (not self.commutator_diagonal) or self.components_off_diagonal or self.commutator_zero


def check_result5(Az, Azbar, basis: ChevalleyBasis, tol: float = 1e-9) -> Result5Verdict:
    """Classify a pair by the diagonal-commutator dichotomy.

    ``tol`` is relative to the size of the inputs. The residual table holds
    ``h_+^b g_-^a - h_-^b g_+^a`` and the f-analogue for every (a, b).
    """
    Az = np.asarray(Az, dtype=complex)
    Azbar = np.asarray(Azbar, dtype=complex)
    cp = decompose_chevalley(Az, basis, tol=1e-10)
    cm = decompose_chevalley(Azbar, basis, tol=1e-10)
    scale = max(1.0, np.abs(Az).max(), np.abs(Azbar).max())
    C = commutator(Az, Azbar)
    off = C - np.diag(np.diag(C))
    diag = bool(np.abs(off).max() <= tol * scale**2)
    zero = bool(np.abs(C).max() <= tol * scale**2)
    offdiag = cp.is_off_diagonal(tol * scale) and cm.is_off_diagonal(tol * scale)
    res = {}
    for a in basis.positive_roots:
        for b in range(basis.rank):
            res[("g", a, b)] = cp.h[b] * cm.g[a] - cm.h[b] * cp.g[a]
            res[("f", a, b)] = cp.h[b] * cm.f[a] - cm.h[b] * cp.f[a]
    return Result5Verdict(diag, offdiag, zero, res)


def diagonal_commutator_pairs(n_pairs: int, seed: int = 42, dims=(2, 3, 4)):
    """Seeded pairs (Az, Azbar, basis) whose commutator is diagonal.

    Az is drawn either generic (Gaussian coordinates) or principal nilpotent
    (sum of simple root vectors, upper or lower); Azbar is then a random
    element of the kernel of ``Y -> offdiag([Az, Y])``, found by SVD.
    """
    rng = np.random.default_rng(seed)
    bases = {n: build_sl_chevalley(n) for n in dims}
    out = []
    for k in range(n_pairs):
        n = int(dims[k % len(dims)])
        basis = bases[n]
        elems = np.stack([m for _, m in basis.elements()]).astype(complex)
        family = (k // len(dims)) % 3
        if family == 0:
            c = rng.normal(size=len(elems)) + 1j * rng.normal(size=len(elems))
            Az = np.einsum("a,aij->ij", c, elems)
        else:
            sign = +1 if family == 1 else -1
            c = rng.normal(size=basis.rank) + 1j * rng.normal(size=basis.rank)
            Az = sum(ci * basis.simple(i, sign) for i, ci in enumerate(c))
        # linear map from coordinates of Y to off-diagonal entries of [Az, Y]
        mask = ~np.eye(n, dtype=bool)
        L = np.stack([commutator(Az, e)[mask] for e in elems], axis=1)
        _, s, vh = np.linalg.svd(L)
        null = vh[np.sum(s > 1e-10 * s[0]):].conj().T
        w = rng.normal(size=null.shape[1]) + 1j * rng.normal(size=null.shape[1])
        Azbar = np.einsum("a,aij->ij", null @ w, elems)
        out.append((Az, Azbar, basis))
    return out
