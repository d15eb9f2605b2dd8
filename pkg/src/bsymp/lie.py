"""Lie algebras and matrix group charts with exact rational skeletons.

Structure constants are always exact Fractions, derived from matrix
commutators by exact linear algebra.  Group charts are expression-valued
matrices; multiplication, inversion and the splittings used downstream are
closed-form expression maps, so every derived object (infinitesimal
generators, connections, momenta) comes out of exact differentiation.

Conventions:
    basis        E_a = d(chart)/d(param_a) at 0, chart(0) = I
    bracket      [X, Y] = XY - YX, c^k_ij exact rationals
    adjoint      Ad_g X = g X g^-1, re-expanded in the basis
    coadjoint    <Ad*_g mu, X> = <mu, Ad_{g^-1} X>
    lie_poisson  minus convention: {F, G}(mu) = -sum c^k_ij mu_k dF/dmu_i dG/dmu_j

The rotation block of the Galilean chart uses a Cayley parametrization
(R(u) = I + (4*hat(u) + 2*hat(u)^2)/(4 + |u|^2)) so that the group
multiplication stays inside the expression grammar; it covers a
neighbourhood of the identity, which is all the semilocal constructions
need.  The compact coordinates (the planar rotation angle, the Heisenberg
central coordinate) are wrapped only by the numeric group operations;
symbolic maps work on the universal-cover lift.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .expr import Const, Expr, Var, ZERO, ONE

__all__ = [
    "LieAlgebra", "MatrixGroup", "BLieGroupPair", "DualVector",
    "structure_constants_from_matrices", "SpanError", "builtin",
    "bracket", "group_mul", "group_inv", "group_exp", "group_log",
    "adjoint", "coadjoint_star", "lie_poisson", "dual_names",
    "param_distance",
]

FrMatrix = tuple[tuple[Fraction, ...], ...]


class SpanError(ValueError):
    """A commutator left the span of the declared basis."""


# ---------------------------------------------------------------------------
# exact rational linear algebra
# ---------------------------------------------------------------------------

def _fr_solve(A: list[list[Fraction]], rhs_cols: list[list[Fraction]]) -> list[list[Fraction]]:
    """Solve A X = RHS exactly (A square nonsingular); columns in, columns out."""
    n = len(A)
    m = len(rhs_cols)
    aug = [list(A[i]) + [rhs_cols[j][i] for j in range(m)] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise ValueError("singular system in exact solve")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [[aug[i][n + j] for i in range(n)] for j in range(m)]


def _basis_pinv(basis: Sequence[FrMatrix]) -> list[list[Fraction]]:
    """Exact left inverse of the vectorized basis map (normal equations)."""
    d = len(basis)
    m = len(basis[0])
    cols = [[basis[a][r][c] for r in range(m) for c in range(m)] for a in range(d)]
    gram = [[sum(cols[a][i] * cols[b][i] for i in range(m * m)) for b in range(d)] for a in range(d)]
    bt = _fr_solve(gram, [[cols[a][i] for a in range(d)] for i in range(m * m)])
    # bt[i] is the coefficient vector mapping unit entry i; transpose to rows
    return [[bt[i][a] for i in range(m * m)] for a in range(d)]


def _expand_in_basis(M, basis: Sequence[FrMatrix], pinv: list[list[Fraction]], tol: float = 1e-10):
    """Coefficients of M in the basis; raises SpanError on a real residual.

    Works uniformly for Fraction matrices (exact residual) and float arrays.
    """
    d = len(basis)
    m = len(basis[0])
    flat = [M[r][c] for r in range(m) for c in range(m)]
    coeffs = [sum(pinv[a][i] * flat[i] for i in range(m * m)) for a in range(d)]
    resid = 0.0
    for r in range(m):
        for c in range(m):
            back = sum(coeffs[a] * basis[a][r][c] for a in range(d))
            resid = max(resid, abs(float(M[r][c] - back)))
    if resid > tol:
        raise SpanError(f"matrix not in basis span (residual {resid:.3e})")
    return coeffs


# ---------------------------------------------------------------------------
# Lie algebras
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LieAlgebra:
    """Structure constants c^k_ij (exact) over a labelled basis."""

    labels: tuple[str, ...]
    constants: dict[tuple[int, int], tuple[Fraction, ...]]  # (i, j) -> c^._ij

    @property
    def dim(self) -> int:
        return len(self.labels)

    def c(self, i: int, j: int) -> tuple[Fraction, ...]:
        zero = tuple([Fraction(0)] * self.dim)
        return self.constants.get((i, j), zero)

    def bracket(self, X: Sequence, Y: Sequence):
        """[X, Y] coefficients; exact when inputs are Fractions."""
        n = self.dim
        out = [X[0] * 0 for _ in range(n)]
        for (i, j), row in self.constants.items():
            coef = X[i] * Y[j]
            if coef:
                for k in range(n):
                    if row[k]:
                        out[k] = out[k] + coef * row[k]
        return out

    def antisymmetry_defect(self) -> Fraction:
        worst = Fraction(0)
        for i in range(self.dim):
            for j in range(self.dim):
                ci, cj = self.c(i, j), self.c(j, i)
                for k in range(self.dim):
                    worst = max(worst, abs(ci[k] + cj[k]))
                if i == j:
                    for k in range(self.dim):
                        worst = max(worst, abs(ci[k]))
        return worst

    def jacobi_defect(self) -> Fraction:
        """Max |coefficient| of [[e_i,e_j],e_k] + cyclic over all triples; exact."""
        n = self.dim
        worst = Fraction(0)
        basis = [[Fraction(int(a == b)) for a in range(n)] for b in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    s = [Fraction(0)] * n
                    for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
                        inner = self.bracket(basis[a], basis[b])
                        outer = self.bracket(inner, basis[c])
                        s = [x + y for x, y in zip(s, outer)]
                    worst = max([worst] + [abs(v) for v in s])
        return worst

    def center_indices(self) -> tuple[int, ...]:
        """Basis elements commuting with the whole algebra (exact check)."""
        out = []
        for a in range(self.dim):
            if all(v == 0 for b in range(self.dim) for v in self.c(a, b)):
                out.append(a)
        return tuple(out)


def structure_constants_from_matrices(basis: Sequence) -> LieAlgebra:
    """Exact structure constants from commutators of rational basis matrices.

    This is the reference oracle for every built-in algebra: commutators are
    computed in exact arithmetic and re-expanded in the basis; any residual
    above 1e-10 is an error.
    """
    mats = [tuple(tuple(Fraction(v) for v in row) for row in M) for M in basis]
    d = len(mats)
    m = len(mats[0])
    pinv = _basis_pinv(mats)
    constants: dict[tuple[int, int], tuple[Fraction, ...]] = {}
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            comm = tuple(
                tuple(
                    sum(mats[i][r][t] * mats[j][t][c] - mats[j][r][t] * mats[i][t][c]
                        for t in range(m))
                    for c in range(m))
                for r in range(m))
            coeffs = _expand_in_basis(comm, mats, pinv)
            if any(v != 0 for v in coeffs):
                constants[(i, j)] = tuple(coeffs)
    labels = tuple(f"e{i + 1}" for i in range(d))
    return LieAlgebra(labels=labels, constants=constants)


def bracket(L: LieAlgebra, X: Sequence, Y: Sequence):
    return L.bracket(X, Y)


def dual_names(L: LieAlgebra) -> tuple[str, ...]:
    return tuple("mu_" + lab for lab in L.labels)


@dataclass(frozen=True)
class DualVector:
    algebra: LieAlgebra
    coeffs: tuple[float, ...]

    def pair(self, X: Sequence[float]) -> float:
        return float(sum(m * x for m, x in zip(self.coeffs, X)))


def lie_poisson(L: LieAlgebra, F: Expr, G: Expr, mu: Sequence[float]) -> float:
    """Minus Lie-Poisson bracket of F, G (exprs in mu_<label>) at a point."""
    return ex.evaluate(lie_poisson_sym(L, F, G), dict(zip(dual_names(L), mu)))


def lie_poisson_sym(L: LieAlgebra, F: Expr, G: Expr) -> Expr:
    names = dual_names(L)
    dF = [ex.diff(F, nm) for nm in names]
    dG = [ex.diff(G, nm) for nm in names]
    acc = ZERO
    for (i, j), row in L.constants.items():
        for k, c in enumerate(row):
            if c:
                term = Const(-c) * Var(names[k]) * dF[i] * dG[j]
                acc = acc + term
    return acc


# ---------------------------------------------------------------------------
# matrix groups
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MatrixGroup:
    """A matrix Lie group presented by an expression-valued chart.

    chart_fn / mul_fn / inv_fn are pure maps on expression lists, usable
    both symbolically and (through compilation) numerically.  `wrap` lists
    per-parameter compactifications applied by numeric group operations:
    None, "angle" (wrap to (-pi, pi]) or "mod1" (wrap to [0, 1)).
    """

    name: str
    param_names: tuple[str, ...]
    labels: tuple[str, ...]
    chart_fn: Callable = field(repr=False)
    mul_fn: Callable = field(repr=False)
    inv_fn: Callable = field(repr=False)
    params_from_matrix: Callable = field(repr=False)
    wrap: tuple = ()
    box: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.param_names)

    @property
    def param_vars(self) -> list[Expr]:
        return [Var(n) for n in self.param_names]

    def chart(self, params: Sequence[float]) -> np.ndarray:
        f = self._compiled("chart")
        m = self.matrix_dim
        return np.array(f(list(map(float, params)))).reshape(m, m)

    @property
    def matrix_dim(self) -> int:
        return len(self.chart_fn(self.param_vars))

    def _compiled(self, which: str):
        f = self._cache.get(which)
        if f is None:
            p = self.param_vars
            if which == "chart":
                rows = self.chart_fn(p)
                exprs = [e for row in rows for e in row]
                f = ex.compile_exprs(exprs, self.param_names)
            elif which == "inv":
                f = ex.compile_exprs(self.inv_fn(p), self.param_names)
            elif which == "mul":
                qn = ["q__" + n for n in self.param_names]
                q = [Var(n) for n in qn]
                f = ex.compile_exprs(self.mul_fn(p, q), list(self.param_names) + qn)
            self._cache[which] = f
        return f

    def basis(self) -> list[FrMatrix]:
        """E_a = d(chart)/d(param_a) at 0, exact."""
        mats = self._cache.get("basis")
        if mats is None:
            rows = self.chart_fn(self.param_vars)
            origin = {n: Fraction(0) for n in self.param_names}
            mats = []
            for nm in self.param_names:
                mat = tuple(
                    tuple(ex.eval_exact(ex.subs(ex.diff(e, nm),
                                                {k: ZERO for k in self.param_names}), origin)
                          for e in row)
                    for row in rows)
                mats.append(mat)
            self._cache["basis"] = mats
        return mats

    @property
    def algebra(self) -> LieAlgebra:
        L = self._cache.get("algebra")
        if L is None:
            L = structure_constants_from_matrices(self.basis())
            L = LieAlgebra(labels=self.labels, constants=L.constants)
            self._cache["algebra"] = L
        return L

    def basis_pinv(self) -> list[list[Fraction]]:
        p = self._cache.get("pinv")
        if p is None:
            p = _basis_pinv(self.basis())
            self._cache["pinv"] = p
        return p

    def wrap_params(self, params: np.ndarray) -> np.ndarray:
        out = np.array(params, dtype=float)
        for i, kind in enumerate(self.wrap):
            if kind == "angle":
                out[i] = math.remainder(out[i], 2 * math.pi)
            elif kind == "mod1":
                out[i] = out[i] % 1.0
        return out


def param_distance(G: MatrixGroup, p: Sequence[float], q: Sequence[float]) -> float:
    """Max coordinate distance, measured around the seam on circle coordinates."""
    worst = 0.0
    wrap = G.wrap or (None,) * G.dim
    for i in range(G.dim):
        d = abs(float(p[i]) - float(q[i]))
        if wrap[i] == "angle":
            d = abs(math.remainder(float(p[i]) - float(q[i]), 2 * math.pi))
        elif wrap[i] == "mod1":
            d = min(d % 1.0, 1.0 - d % 1.0)
        worst = max(worst, d)
    return worst


def group_mul(G: MatrixGroup, p: Sequence[float], q: Sequence[float]) -> np.ndarray:
    f = G._compiled("mul")
    return G.wrap_params(np.array(f(list(map(float, p)) + list(map(float, q)))))


def group_inv(G: MatrixGroup, p: Sequence[float]) -> np.ndarray:
    f = G._compiled("inv")
    return G.wrap_params(np.array(f(list(map(float, p)))))


def group_exp(G: MatrixGroup, X: Sequence[float]) -> np.ndarray:
    """Parameters of exp(sum X_a E_a); finite series when nilpotent."""
    basis = G.basis()
    m = G.matrix_dim
    M = np.zeros((m, m))
    for a, coef in enumerate(X):
        M += float(coef) * np.array([[float(v) for v in row] for row in basis[a]])
    P = np.eye(m)
    S = np.eye(m)
    nilpotent = False
    for k in range(1, m + 1):
        P = P @ M / k
        S = S + P
        if np.all(P == 0.0):
            nilpotent = True
            break
    if not nilpotent:
        from scipy.linalg import expm
        S = expm(M)
    return G.wrap_params(G.params_from_matrix(S))


def group_log(G: MatrixGroup, M: np.ndarray) -> np.ndarray:
    """Chart parameters of a matrix near the identity; checks the result."""
    params = G.params_from_matrix(np.asarray(M, dtype=float))
    back = G.chart(params)
    err = float(np.max(np.abs(back - M)))
    if err > 1e-8:
        raise ValueError(f"matrix log did not converge in this chart (residual {err:.3e})")
    return G.wrap_params(params)


def adjoint_matrix_sym(G: MatrixGroup, params: Sequence[Expr]) -> list[list[Expr]]:
    """[Ad_g]^b_a with Ad_g e_a = sum_b [Ad]_{b,a} e_b, entries as expressions."""
    chart = G.chart_fn(list(params))
    chart_inv = G.chart_fn(G.inv_fn(list(params)))
    basis = G.basis()
    pinv = G.basis_pinv()
    m = G.matrix_dim
    d = G.dim
    cols = []
    for a in range(d):
        Ea = [[Const(v) for v in row] for row in basis[a]]
        conj = _emat_mul(_emat_mul(chart, Ea), chart_inv)
        flat = [conj[r][c] for r in range(m) for c in range(m)]
        col = []
        for b in range(d):
            acc = ZERO
            for i, w in enumerate(pinv[b]):
                if w:
                    acc = acc + Const(w) * flat[i]
            col.append(acc)
        cols.append(col)
    return [[cols[a][b] for a in range(d)] for b in range(d)]  # [b][a]


def _adjoint_compiled(G: MatrixGroup):
    f = G._cache.get("ad")
    if f is None:
        mat = adjoint_matrix_sym(G, G.param_vars)
        f = ex.compile_exprs([e for row in mat for e in row], G.param_names)
        G._cache["ad"] = f
    return f


def adjoint(G: MatrixGroup, g: Sequence[float], X: Sequence[float]) -> np.ndarray:
    """Ad_g X by matrix conjugation, re-expanded in the basis (checked)."""
    chart = G.chart(g)
    chart_inv = G.chart(group_inv(G, g))
    m = G.matrix_dim
    basis = [np.array([[float(v) for v in row] for row in B]) for B in G.basis()]
    Xm = sum(float(c) * B for c, B in zip(X, basis))
    conj = chart @ Xm @ chart_inv
    pinv = G.basis_pinv()
    flat = conj.reshape(-1)
    coeffs = np.array([sum(float(w) * flat[i] for i, w in enumerate(row) if w) for row in pinv])
    back = sum(c * B for c, B in zip(coeffs, basis))
    resid = float(np.max(np.abs(conj - back)))
    if resid > 1e-10:
        raise SpanError(f"adjoint image not in basis span (residual {resid:.3e})")
    return coeffs


def coadjoint_star(G: MatrixGroup, g: Sequence[float], mu: Sequence[float]) -> np.ndarray:
    """<Ad*_g mu, X> = <mu, Ad_{g^-1} X>."""
    f = _adjoint_compiled(G)
    ginv = group_inv(G, g)
    d = G.dim
    ad = np.array(f(list(map(float, ginv)))).reshape(d, d)  # [b][a] of Ad_{g^-1}
    return np.array([sum(mu[b] * ad[b][a] for b in range(d)) for a in range(d)])


def _emat_mul(A, B):
    n, k, m = len(A), len(B), len(B[0])
    out = []
    for r in range(n):
        row = []
        for c in range(m):
            acc = ZERO
            for t in range(k):
                acc = acc + A[r][t] * B[t][c]
            row.append(acc)
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# group pairs (closed codimension-one subgroup, transverse coordinate)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BLieGroupPair:
    """A group with a marked codimension-one subgroup and a split chart.

    The trivialization maps group parameters to (subgroup parameters,
    transverse coordinate) equivariantly: left translation by the subgroup
    acts on the first factor only.  All reduction-side work happens in the
    trivialized chart.
    """

    name: str
    group: MatrixGroup
    phi_index: int
    triv_fn: Callable = field(repr=False)       # params -> (h_params, phi)
    triv_inv_fn: Callable = field(repr=False)   # (h_params, phi) -> params
    quotient: str = "line (R^1)"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def h_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.group.dim) if i != self.phi_index)

    @property
    def h_names(self) -> tuple[str, ...]:
        return tuple(self.group.param_names[i] for i in self.h_indices)

    @property
    def phi_name(self) -> str:
        return self.group.param_names[self.phi_index]

    @property
    def h_labels(self) -> tuple[str, ...]:
        return tuple(self.group.labels[i] for i in self.h_indices)

    def triv(self, params: Sequence[float]) -> tuple[np.ndarray, float]:
        f = self._cache.get("triv_num")
        if f is None:
            G = self.group
            hp, phi = self.triv_fn(G.param_vars)
            f = ex.compile_exprs([*hp, phi], G.param_names)
            self._cache["triv_num"] = f
        out = f(list(map(float, params)))
        return np.array(out[:-1]), out[-1]

    def triv_inv(self, k: Sequence[float], phi: float) -> np.ndarray:
        f = self._cache.get("triv_inv_num")
        if f is None:
            kv = [Var(n) for n in self.h_names]
            f = ex.compile_exprs(self.triv_inv_fn(kv, Var(self.phi_name)),
                                 [*self.h_names, self.phi_name])
            self._cache["triv_inv_num"] = f
        return np.array(f([*map(float, k), float(phi)]))

    @property
    def h_group(self) -> MatrixGroup:
        H = self._cache.get("h_group")
        if H is None:
            G = self.group
            embed = lambda k: self.triv_inv_fn(list(k), ZERO)
            hi = self.h_indices
            pi = self.phi_index

            def h_pfm(M):
                p = G.params_from_matrix(M)
                if abs(p[pi]) > 1e-9:
                    raise ValueError("matrix is not in the subgroup")
                return np.array([p[i] for i in hi])

            H = MatrixGroup(
                name=self.name + ".H",
                param_names=self.h_names,
                labels=self.h_labels,
                chart_fn=lambda k: G.chart_fn(embed(k)),
                mul_fn=lambda p, q: self.triv_fn(G.mul_fn(embed(p), embed(q)))[0],
                inv_fn=lambda p: self.triv_fn(G.inv_fn(embed(p)))[0],
                params_from_matrix=h_pfm,
                wrap=tuple(G.wrap[i] for i in hi),
                box=tuple(G.box[i] for i in hi),
            )
            self._cache["h_group"] = H
        return H

    @property
    def h_algebra(self) -> LieAlgebra:
        return self.h_group.algebra


def _check_pair(pair: BLieGroupPair):
    # subgroup chart must sit inside the group chart at transverse value 0
    G = pair.group
    k = [Var(n) for n in pair.h_names]
    back = pair.triv_fn(pair.triv_inv_fn(k, Var(pair.phi_name)))
    names = [*pair.h_names, pair.phi_name]
    env = {n: 0.37 + 0.11 * i for i, n in enumerate(names)}
    for e, n in zip([*back[0], back[1]], names):
        assert abs(ex.evaluate(e, env) - env[n]) < 1e-12, "trivialization not invertible"
    return pair


# ---------------------------------------------------------------------------
# built-in groups
# ---------------------------------------------------------------------------

def _se2() -> BLieGroupPair:
    names = ("b1", "b2", "phi")

    def chart(p):
        b1, b2, phi = p
        return [[ex.cos(phi), -ex.sin(phi), b1],
                [ex.sin(phi), ex.cos(phi), b2],
                [ZERO, ZERO, ONE]]

    def mul(p, q):
        b1, b2, phi = p
        c, s = ex.cos(phi), ex.sin(phi)
        return [c * q[0] - s * q[1] + b1, s * q[0] + c * q[1] + b2, phi + q[2]]

    def inv(p):
        b1, b2, phi = p
        c, s = ex.cos(phi), ex.sin(phi)
        return [-(c * b1 + s * b2), s * b1 - c * b2, -phi]

    def pfm(M):
        return np.array([M[0, 2], M[1, 2], math.atan2(M[1, 0], M[0, 0])])

    G = MatrixGroup(
        name="se2", param_names=names, labels=("P1", "P2", "J"),
        chart_fn=chart, mul_fn=mul, inv_fn=inv, params_from_matrix=pfm,
        wrap=(None, None, "angle"),
        box=((-1.5, 1.5), (-1.5, 1.5), (-1.2, 1.2)),
    )
    ident = lambda p: ([p[0], p[1]], p[2])
    return _check_pair(BLieGroupPair(
        name="se2", group=G, phi_index=2,
        triv_fn=ident, triv_inv_fn=lambda k, phi: [k[0], k[1], phi],
        quotient="circle (S^1), two angle charts",
    ))


def _heisenberg_q(n: int) -> BLieGroupPair:
    if n < 1:
        raise ValueError("heisenberg_q needs n >= 1")
    a_names = tuple(f"a{i + 1}" for i in range(n))
    b_names = tuple(f"b{i + 1}" for i in range(n))
    names = (*a_names, *b_names, "c")
    labels = (*(f"X{i + 1}" for i in range(n)), *(f"Y{i + 1}" for i in range(n)), "Z")
    m = n + 2

    def chart(p):
        a, b, c = p[:n], p[n:2 * n], p[2 * n]
        rows = []
        rows.append([ONE, *a, c])
        for i in range(n):
            rows.append([ZERO] * (1 + i) + [ONE] + [ZERO] * (n - 1 - i) + [b[i]])
        rows.append([ZERO] * (n + 1) + [ONE])
        return rows

    def mul(p, q):
        a, b, c = p[:n], p[n:2 * n], p[2 * n]
        ap, bp, cp = q[:n], q[n:2 * n], q[2 * n]
        dot = ZERO
        for i in range(n):
            dot = dot + a[i] * bp[i]
        return [*(x + y for x, y in zip(a, ap)), *(x + y for x, y in zip(b, bp)), c + cp + dot]

    def inv(p):
        a, b, c = p[:n], p[n:2 * n], p[2 * n]
        dot = ZERO
        for i in range(n):
            dot = dot + a[i] * b[i]
        return [*(-x for x in a), *(-x for x in b), -c + dot]

    def pfm(M):
        return np.array([*M[0, 1:n + 1], *M[1:n + 1, n + 1], M[0, n + 1]])

    G = MatrixGroup(
        name=f"heisenberg_q({n})", param_names=names, labels=labels,
        chart_fn=chart, mul_fn=mul, inv_fn=inv, params_from_matrix=pfm,
        wrap=(None,) * 2 * n + ("mod1",),
        box=((-1.5, 1.5),) * 2 * n + ((0.05, 0.95),),
    )
    # transverse coordinate a1; subgroup {a1 = 0}
    def triv(p):
        return [*p[1:n], *p[n:2 * n], p[2 * n]], p[0]

    def triv_inv(k, phi):
        return [phi, *k[:n - 1], *k[n - 1:2 * n - 1], k[2 * n - 1]]

    return _check_pair(BLieGroupPair(
        name=f"heisenberg_q({n})", group=G, phi_index=0,
        triv_fn=triv, triv_inv_fn=triv_inv,
        quotient="circle-bundle slice, transverse coordinate a1",
    ))


def _cayley_rotation(u: Sequence[Expr]) -> list[list[Expr]]:
    """R(u) = I + (4*hat(u) + 2*hat(u)^2)/(4 + |u|^2); dR/du_i(0) = J_i."""
    u1, u2, u3 = u
    den = Const(Fraction(4)) + u1 * u1 + u2 * u2 + u3 * u3
    hat = [[ZERO, -u3, u2], [u3, ZERO, -u1], [-u2, u1, ZERO]]
    hat2 = _emat_mul(hat, hat)
    rows = []
    for r in range(3):
        row = []
        for c in range(3):
            num = Const(Fraction(4)) * hat[r][c] + Const(Fraction(2)) * hat2[r][c]
            e = num / den
            if r == c:
                e = ONE + e
            row.append(e)
        rows.append(row)
    return rows


def _cayley_compose(u: Sequence[Expr], v: Sequence[Expr]) -> list[Expr]:
    """Parameters of R(u) R(v): (u + v + u x v / 2) / (1 - u.v / 4)."""
    cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
    dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
    den = ONE - dot / 4
    return [(u[i] + v[i] + cross[i] / 2) / den for i in range(3)]


def _galilean() -> BLieGroupPair:
    names = ("u1", "u2", "u3", "v1", "v2", "v3", "a1", "a2", "a3", "s")
    labels = ("J1", "J2", "J3", "K1", "K2", "K3", "P1", "P2", "P3", "E")

    def split(p):
        return p[0:3], p[3:6], p[6:9], p[9]

    def chart(p):
        u, v, a, s = split(p)
        R = _cayley_rotation(u)
        rows = []
        for r in range(3):
            rows.append([*R[r], v[r], a[r]])
        rows.append([ZERO, ZERO, ZERO, ONE, s])
        rows.append([ZERO, ZERO, ZERO, ZERO, ONE])
        return rows

    def mul(p, q):
        u, v, a, s = split(p)
        up, vp, ap, sp = split(q)
        R = _cayley_rotation(u)
        Rv = [sum((R[r][c] * vp[c] for c in range(3)), ZERO) for r in range(3)]
        Ra = [sum((R[r][c] * ap[c] for c in range(3)), ZERO) for r in range(3)]
        return [*_cayley_compose(u, up),
                *(Rv[r] + v[r] for r in range(3)),
                *(Ra[r] + sp * v[r] + a[r] for r in range(3)),
                s + sp]

    def inv(p):
        u, v, a, s = split(p)
        R = _cayley_rotation(u)  # R(-u) = R(u)^T
        Rt = [[R[c][r] for c in range(3)] for r in range(3)]
        Rtv = [sum((Rt[r][c] * v[c] for c in range(3)), ZERO) for r in range(3)]
        sva = [s * v[r] - a[r] for r in range(3)]
        Rtsva = [sum((Rt[r][c] * sva[c] for c in range(3)), ZERO) for r in range(3)]
        return [*(-u[i] for i in range(3)), *(-Rtv[r] for r in range(3)), *Rtsva, -s]

    def pfm(M):
        R = M[:3, :3]
        den = R + np.eye(3)
        if abs(np.linalg.det(den)) < 1e-12:
            raise ValueError("rotation too far from the identity for the Cayley chart")
        Gm = (R - np.eye(3)) @ np.linalg.inv(den)
        u = 2 * np.array([Gm[2, 1], Gm[0, 2], Gm[1, 0]])
        return np.array([*u, *M[:3, 3], *M[:3, 4], M[3, 4]])

    G = MatrixGroup(
        name="galilean", param_names=names, labels=labels,
        chart_fn=chart, mul_fn=mul, inv_fn=inv, params_from_matrix=pfm,
        wrap=(None,) * 10,
        box=((-0.8, 0.8),) * 3 + ((-1.5, 1.5),) * 6 + ((-1.2, 1.2),),
    )

    # equivariant splitting: (u, v, a, s) -> ((u, v, a - s v), s)
    def triv(p):
        u, v, a, s = split(p)
        return [*u, *v, *(a[r] - s * v[r] for r in range(3))], s

    def triv_inv(k, phi):
        u, v, at = k[0:3], k[3:6], k[6:9]
        return [*u, *v, *(at[r] + phi * v[r] for r in range(3)), phi]

    return _check_pair(BLieGroupPair(
        name="galilean", group=G, phi_index=9,
        triv_fn=triv, triv_inv_fn=triv_inv,
        quotient="line (time translations)",
    ))


_BUILTINS = {"se2": _se2, "galilean": _galilean}
_BUILTIN_CACHE: dict[str, BLieGroupPair] = {}


def builtin(name: str, n: int | None = None) -> BLieGroupPair:
    """Built-in group pairs: se2, galilean, heisenberg_q(n)."""
    key = name.strip()
    m = re.fullmatch(r"heisenberg_q\s*(?:\(\s*(\d+)\s*\))?", key)
    if m:
        nn = int(m.group(1)) if m.group(1) else (n if n is not None else 1)
        key = f"heisenberg_q({nn})"
        if key not in _BUILTIN_CACHE:
            _BUILTIN_CACHE[key] = _heisenberg_q(nn)
        return _BUILTIN_CACHE[key]
    if key not in _BUILTINS:
        raise ValueError(f"unknown builtin group {name!r}")
    if key not in _BUILTIN_CACHE:
        _BUILTIN_CACHE[key] = _BUILTINS[key]()
    return _BUILTIN_CACHE[key]
