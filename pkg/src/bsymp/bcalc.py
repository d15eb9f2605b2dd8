"""Calculus on charts with one marked degenerate coordinate.

A chart carries coordinate names, an optional index of a defining
coordinate f, and a sampling box.  Vector fields and forms are stored in
the rescaled frame

    (f d/df, d/dz_i)        dual coframe (df/f, dz_i)

so every stored coefficient is a smooth expression and evaluation on the
hypersurface {f = 0} never divides by f.  With no defining coordinate
(defining=None) the same containers and operators implement ordinary
smooth calculus: the frame reduces to (d/dz_i) and the rescale factors
below all become 1.

Orientation of conventions used package-wide (fixed here, reused by the
lift/reduction/dynamics layers):

    {F, G} = Pi(dF, dG),   X_H = {., H},   iota_{X_H} omega = dH

so inverting a frame matrix W of a nondegenerate 2-form yields the
bivector frame matrix transpose(W^-1) (= -W^-1 for antisymmetric W).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import qmc

from . import expr as ex
from .expr import Const, Expr, Var, ZERO, ONE

__all__ = [
    "BChart", "BVectorField", "BForm", "BFunction", "PoissonBivector",
    "SymplecticReport", "pair", "wedge", "b_d", "d_bfunction",
    "is_b_symplectic", "bdarboux_model", "invert_to_poisson", "pfaffian",
]


@dataclass(frozen=True, eq=False)
class BChart:
    """Coordinate names, optional defining-coordinate index, sampling box."""

    names: tuple[str, ...]
    defining: int | None
    box: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.defining is not None and not 0 <= self.defining < len(self.names):
            raise ValueError("defining index out of range")
        if len(self.box) != len(self.names):
            raise ValueError("box size must match coordinate count")

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def defining_name(self) -> str | None:
        return None if self.defining is None else self.names[self.defining]

    def scale(self, i: int) -> Expr:
        """Frame rescale factor: f for the defining slot, 1 elsewhere."""
        if i == self.defining:
            return Var(self.names[i])
        return ONE

    def env(self, point) -> dict[str, float]:
        if isinstance(point, Mapping):
            return {n: float(point[n]) for n in self.names}
        return {n: float(v) for n, v in zip(self.names, point)}

    def sample(self, count: int, seed: int, on_z: bool = False) -> np.ndarray:
        """Deterministic low-discrepancy points in the box; optionally on Z."""
        eng = qmc.Sobol(d=self.dim, scramble=True, seed=seed)
        with warnings.catch_warnings():
            # balance warning for non power-of-two budgets is irrelevant here
            warnings.simplefilter("ignore", UserWarning)
            pts = eng.random(count)
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        pts = lo + pts * (hi - lo)
        if on_z:
            if self.defining is None:
                raise ValueError("chart has no defining coordinate")
            pts[:, self.defining] = 0.0
        return pts


@dataclass(frozen=True, eq=False)
class BVectorField:
    """Components in the rescaled frame: comps[d]*(f d/df) + comps[i]*d/dz_i."""

    chart: BChart
    comps: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.comps) != self.chart.dim:
            raise ValueError("component count must match chart dimension")

    def at(self, point) -> np.ndarray:
        env = self.chart.env(point)
        return np.array([ex.evaluate(c, env) for c in self.comps])


@dataclass(frozen=True, eq=False)
class BForm:
    """Degree-k form: coefficients over strictly increasing frame multi-indices.

    Indices containing the defining slot make up the df/f-part (alpha);
    the rest is the smooth part (beta).
    """

    chart: BChart
    degree: int
    coeffs: dict[tuple[int, ...], Expr] = field(default_factory=dict)

    def __post_init__(self):
        for idx in self.coeffs:
            if len(idx) != self.degree or list(idx) != sorted(set(idx)):
                raise ValueError(f"bad multi-index {idx} for degree {self.degree}")

    def coeff(self, idx: tuple[int, ...]) -> Expr:
        return self.coeffs.get(idx, ZERO)

    def alpha_part(self) -> dict[tuple[int, ...], Expr]:
        d = self.chart.defining
        return {i: c for i, c in self.coeffs.items() if d in i}

    def beta_part(self) -> dict[tuple[int, ...], Expr]:
        d = self.chart.defining
        return {i: c for i, c in self.coeffs.items() if d not in i}

    def __add__(self, other: "BForm") -> "BForm":
        if other.chart is not self.chart or other.degree != self.degree:
            raise ValueError("can only add forms of one degree on one chart")
        out = dict(self.coeffs)
        for i, c in other.coeffs.items():
            out[i] = out.get(i, ZERO) + c
        return BForm(self.chart, self.degree, _prune(out))

    def scaled(self, factor) -> "BForm":
        f = ex.as_expr(factor)
        return BForm(self.chart, self.degree,
                     _prune({i: f * c for i, c in self.coeffs.items()}))

    def __neg__(self) -> "BForm":
        return self.scaled(-1)


def _prune(coeffs: dict) -> dict:
    return {i: c for i, c in coeffs.items() if not (isinstance(c, Const) and c.value == 0)}


@dataclass(frozen=True, eq=False)
class BFunction:
    """c*log|f| + g with constant c and smooth g; never evaluated on {f=0}."""

    chart: BChart
    c: Fraction
    smooth: Expr

    def __post_init__(self):
        if self.chart.defining is None and self.c != 0:
            raise ValueError("log part needs a defining coordinate")

    def value(self, point) -> float:
        env = self.chart.env(point)
        out = ex.evaluate(self.smooth, env)
        if self.c:
            f = env[self.chart.defining_name]
            if f == 0.0:
                raise ex.DomainError("log-part is unbounded on the hypersurface")
            out += float(self.c) * math.log(abs(f))
        return out


# ---------------------------------------------------------------------------
# frame pairing, wedge, exterior derivative
# ---------------------------------------------------------------------------

def pair(omega: BForm, fields: Sequence[BVectorField], point) -> float:
    """Full contraction omega(v_1, ..., v_k) at a point (on Z allowed)."""
    if len(fields) != omega.degree:
        raise ValueError(f"degree-{omega.degree} form needs {omega.degree} fields")
    for v in fields:
        if v.chart is not omega.chart:
            raise ValueError("fields and form must share one chart")
    env = omega.chart.env(point)
    cols = [v.at(env) for v in fields]
    total = 0.0
    for idx, c in omega.coeffs.items():
        rows = np.array([[col[i] for col in cols] for i in idx])
        total += ex.evaluate(c, env) * _det(rows)
    return total


def _det(M: np.ndarray) -> float:
    n = M.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return float(M[0, 0])
    if n == 2:
        return float(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
    return float(np.linalg.det(M))


def wedge(a: BForm, b: BForm) -> BForm:
    if a.chart is not b.chart:
        raise ValueError("wedge needs forms on one chart")
    out: dict[tuple[int, ...], Expr] = {}
    for ia, ca in a.coeffs.items():
        for ib, cb in b.coeffs.items():
            if set(ia) & set(ib):
                continue
            sign, merged = _merge_sign(ia, ib)
            term = Const(Fraction(sign)) * ca * cb
            out[merged] = out.get(merged, ZERO) + term
    return BForm(a.chart, a.degree + b.degree, _prune(out))


def _merge_sign(ia: tuple[int, ...], ib: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    inversions = sum(1 for x in ia for y in ib if y < x)
    return (-1) ** inversions, tuple(sorted(ia + ib))


def b_d(omega: BForm) -> BForm:
    """Exterior derivative in the rescaled coframe.

    d(c e^I) = sum_j s_j (dc/dz_j) e^j ^ e^I with s_j = f on the defining
    slot, 1 elsewhere; this is d(alpha)^df/f + d(beta) in one rule, and the
    classical derivative when there is no defining coordinate.
    """
    ch = omega.chart
    out: dict[tuple[int, ...], Expr] = {}
    for idx, c in omega.coeffs.items():
        for j in range(ch.dim):
            if j in idx:
                continue
            dc = ex.diff(c, ch.names[j])
            if isinstance(dc, Const) and dc.value == 0:
                continue
            term = ch.scale(j) * dc
            pos = sum(1 for i in idx if i < j)
            sign = (-1) ** pos
            merged = tuple(sorted(idx + (j,)))
            out[merged] = out.get(merged, ZERO) + Const(Fraction(sign)) * term
    return BForm(ch, omega.degree + 1, _prune(out))


def d_bfunction(u: BFunction) -> BForm:
    """d(c log|f| + g) = c df/f + dg, a smooth-coefficient 1-form."""
    ch = u.chart
    out: dict[tuple[int, ...], Expr] = {}
    for j in range(ch.dim):
        dg = ex.diff(u.smooth, ch.names[j])
        coeff = ch.scale(j) * dg
        if j == ch.defining:
            coeff = coeff + Const(Fraction(u.c))
        if not (isinstance(coeff, Const) and coeff.value == 0):
            out[(j,)] = coeff
    return BForm(ch, 1, out)


# ---------------------------------------------------------------------------
# nondegeneracy: pfaffian and the verdict report
# ---------------------------------------------------------------------------

def pfaffian(A: np.ndarray) -> float:
    """Pfaffian of an even skew-symmetric matrix (tridiagonal reduction)."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n % 2:
        return 0.0
    if n == 0:
        return 1.0
    pf = 1.0
    for k in range(0, n - 1, 2):
        piv = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if A[piv, k] == 0.0:
            return 0.0
        if piv != k + 1:
            A[[k + 1, piv], :] = A[[piv, k + 1], :]
            A[:, [k + 1, piv]] = A[:, [piv, k + 1]]
            pf = -pf
        pf *= A[k + 1, k]
        if k + 2 < n:
            tau = A[k + 2:, k] / A[k + 1, k]
            A[k + 2:, k + 2:] += np.outer(tau, A[k + 2:, k + 1])
            A[k + 2:, k + 2:] -= np.outer(A[k + 2:, k + 1], tau)
    # sign: pf of the direct sum of [[0, a],[-a, 0]] blocks built above is
    # prod(a), and the elimination assembled A[k+1, k] = -a entries
    return float(pf * (-1) ** (n // 2))


def frame_matrix(omega: BForm) -> list[list[Expr]]:
    """W_ij = omega(E_i, E_j) as expressions (frame pairing is coefficient lookup)."""
    n = omega.chart.dim
    W = [[ZERO] * n for _ in range(n)]
    for (i, j), c in omega.coeffs.items():
        W[i][j] = c
        W[j][i] = -c
    return W


@dataclass(frozen=True)
class SymplecticReport:
    dim: int
    samples: int
    on_z_samples: int
    closed_residual: float
    min_pfaffian: float
    threshold: float
    verdict: bool

    def text(self) -> str:
        lines = [
            f"dim: {self.dim}",
            f"samples: {self.samples}",
            f"on_z_samples: {self.on_z_samples}",
            f"closed_residual: {self.closed_residual!r}",
            f"min_pfaffian: {self.min_pfaffian!r}",
            f"threshold: {self.threshold!r}",
            f"verdict: {'true' if self.verdict else 'false'}",
        ]
        return "\n".join(lines)


def is_b_symplectic(omega: BForm, samples: int = 128, seed: int = 7,
                    threshold: float = 1e-8) -> SymplecticReport:
    """Sampled closedness and nondegeneracy verdict for a degree-2 form.

    Nondegeneracy is checked through the frame matrix, which is smooth, so
    half the sample budget is spent on the hypersurface itself when the
    chart has a defining coordinate: that is where rank loss would hide
    from box sampling.
    """
    ch = omega.chart
    if omega.degree != 2:
        raise ValueError("verdict is defined for degree-2 forms")
    if ch.dim % 2:
        raise ValueError("chart dimension must be even")
    d_omega = b_d(omega)
    pts = ch.sample(samples, seed)
    batches = [pts]
    n_on_z = 0
    if ch.defining is not None:
        zpts = ch.sample(samples, seed + 1, on_z=True)
        n_on_z = len(zpts)
        batches.append(zpts)
    W = frame_matrix(omega)
    flatW = [e for row in W for e in row]
    w_fn = ex.compile_exprs(flatW, ch.names)
    d_exprs = list(d_omega.coeffs.values())
    d_fn = ex.compile_exprs(d_exprs, ch.names) if d_exprs else None
    closed_residual = 0.0
    min_pf = math.inf
    for batch in batches:
        for row in batch:
            vals = list(map(float, row))
            if d_fn is not None:
                closed_residual = max(closed_residual, max(abs(v) for v in d_fn(vals)))
            Wnum = np.array(w_fn(vals)).reshape(ch.dim, ch.dim)
            min_pf = min(min_pf, abs(pfaffian(Wnum)))
    verdict = closed_residual <= threshold and min_pf > threshold
    return SymplecticReport(
        dim=ch.dim, samples=len(pts), on_z_samples=n_on_z,
        closed_residual=closed_residual, min_pfaffian=min_pf,
        threshold=threshold, verdict=verdict,
    )


def bdarboux_model(n: int, box_half: float = 1.5) -> BForm:
    """Normal form dx1^dy1/y1 + sum_{i>=2} dxi^dyi on a 2n-chart, defining y1."""
    if n < 1:
        raise ValueError("need n >= 1")
    names = []
    for i in range(1, n + 1):
        names += [f"x{i}", f"y{i}"]
    ch = BChart(tuple(names), defining=1, box=((-box_half, box_half),) * (2 * n))
    coeffs = {(2 * i, 2 * i + 1): ONE for i in range(n)}
    return BForm(ch, 2, coeffs)


# ---------------------------------------------------------------------------
# Poisson bivectors and inversion
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PoissonBivector:
    """Pi^{ij} over coordinate (not frame) vector fields, i < j."""

    names: tuple[str, ...]
    entries: dict[tuple[int, int], Expr] = field(default_factory=dict)

    def entry(self, i: int, j: int) -> Expr:
        if i == j:
            return ZERO
        if i < j:
            return self.entries.get((i, j), ZERO)
        e = self.entries.get((j, i), ZERO)
        return -e

    def bracket(self, F: Expr, G: Expr) -> Expr:
        dF = [ex.diff(F, n) for n in self.names]
        dG = [ex.diff(G, n) for n in self.names]
        acc = ZERO
        for (i, j), p in self.entries.items():
            acc = acc + p * (dF[i] * dG[j] - dF[j] * dG[i])
        return acc

    def bracket_value(self, F: Expr, G: Expr, point) -> float:
        env = point if isinstance(point, Mapping) else dict(zip(self.names, point))
        return ex.evaluate(self.bracket(F, G), {k: float(v) for k, v in env.items()})

    def jacobiator(self, F: Expr, G: Expr, H: Expr) -> Expr:
        return (self.bracket(self.bracket(F, G), H)
                + self.bracket(self.bracket(G, H), F)
                + self.bracket(self.bracket(H, F), G))

    def table(self) -> list[tuple[str, str, str]]:
        out = []
        for (i, j), p in sorted(self.entries.items()):
            out.append((self.names[i], self.names[j], ex.to_str(p)))
        return out


def _laplace_det(M: list[list[Expr]]) -> Expr:
    """Exact symbolic determinant, memoized over column subsets."""
    n = len(M)
    memo: dict[tuple[int, ...], Expr] = {}

    def go(r: int, cols: tuple[int, ...]) -> Expr:
        if not cols:
            return ONE
        key = cols
        if r == n - len(cols):
            got = memo.get(key)
            if got is not None:
                return got
        acc = ZERO
        for s, c in enumerate(cols):
            entry = M[r][c]
            if isinstance(entry, Const) and entry.value == 0:
                continue
            rest = cols[:s] + cols[s + 1:]
            term = entry * go(r + 1, rest)
            acc = acc + (term if s % 2 == 0 else -term)
        memo[key] = acc
        return acc

    return go(0, tuple(range(n)))


def invert_to_poisson(omega: BForm, samples: int = 8, seed: int = 3) -> PoissonBivector:
    """Bivector of a nondegenerate degree-2 form, over coordinate fields.

    The frame matrix is inverted (exactly for constant entries, by
    adjugate/determinant symbolically otherwise) with the bivector frame
    matrix transpose(W^-1); re-expanding the rescaled frame as coordinate
    fields multiplies the defining row and column by f.  Nonsingularity is
    spot-checked on samples, including on the hypersurface.
    """
    ch = omega.chart
    n = ch.dim
    W = frame_matrix(omega)
    if all(isinstance(e, Const) for row in W for e in row):
        A = [[e.value for e in row] for row in W]
        # _fr_inv returns the columns of W^-1, i.e. P[i][j] = (W^-1)[j][i]
        P = _fr_inv(A)
        get = lambda i, j: Const(P[i][j])
    else:
        if n > 8:
            raise ValueError("symbolic inversion limited to dimension 8; "
                             "evaluate the frame matrix pointwise instead")
        _spot_check_nonsingular(omega, samples, seed)
        det = _laplace_det(W)
        def get(i, j):
            minor = [[W[r][c] for c in range(n) if c != j] for r in range(n) if r != i]
            cof = _laplace_det(minor)
            num = cof if (i + j) % 2 == 0 else -cof
            return num / det
    entries: dict[tuple[int, int], Expr] = {}
    for i in range(n):
        for j in range(i + 1, n):
            e = get(i, j)
            if isinstance(e, Const) and e.value == 0:
                continue
            e = ch.scale(i) * ch.scale(j) * e
            entries[(i, j)] = e
    return PoissonBivector(ch.names, entries)


def _fr_inv(A: list[list[Fraction]]) -> list[list[Fraction]]:
    from .lie import _fr_solve
    n = len(A)
    eye = [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
    try:
        return _fr_solve([list(map(Fraction, row)) for row in A], eye)
    except ValueError:
        raise ValueError("frame matrix is singular") from None


def _spot_check_nonsingular(omega: BForm, samples: int, seed: int):
    ch = omega.chart
    W = frame_matrix(omega)
    w_fn = ex.compile_exprs([e for row in W for e in row], ch.names)
    batches = [ch.sample(samples, seed)]
    if ch.defining is not None:
        batches.append(ch.sample(samples, seed + 1, on_z=True))
    for batch in batches:
        for row in batch:
            Wnum = np.array(w_fn(list(map(float, row)))).reshape(ch.dim, ch.dim)
            if abs(_det(Wnum)) < 1e-12:
                raise ValueError("frame matrix is singular at a sample point")
