"""Principal connections on the split group chart and Poisson reduction.

The split chart (k_1..k_m, phi) of a group/subgroup pair puts the subgroup
orbit directions in the k-legs and the transverse direction in phi.  The
vertical bundle is spanned by the infinitesimal left translations zeta_a;
a connection is an algebra-valued 1-form theta with theta(zeta^X) = X that
transforms by Ad under left translation.

Conventions fixed here:

* the default connection is the right Maurer-Cartan form of the subgroup
  factor, computed exactly by differentiating kk -> kk * k^{-1} at kk = k;
  it has no dphi leg, so it kills the transverse frame field.
* the coupled chart carries coordinates (k, phi, mu_a, p): mu_a are the
  vertical momenta alpha(zeta_a), p is the annihilator coefficient of the
  covector on the dphi/phi (or dphi, classical mode) slot.
* the reduced bivector is block diagonal: a minus Lie-Poisson block
  {mu_i, mu_j} = -sum_k c^k_ij mu_k on the subgroup dual plus phi d/dphi ^
  d/dp (or d/dphi ^ d/dp in classical mode) on the transverse pair.
* invariant fiber coordinates nu_b = <mu, Ad_k E_b> undo the orbit motion
  of the vertical momenta; they are the pullbacks of the reduced mu_b.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import expr as ex
from .expr import Const, Expr, Var, ONE, ZERO
from .bcalc import BChart, BForm, BVectorField, PoissonBivector, b_d
from .bcalc import pair as form_pair
from .bcalc import invert_to_poisson
from .blift import LiftedAction, canonical_bsymplectic, trivialized_base_chart
from .lie import BLieGroupPair, adjoint_matrix_sym, dual_names, group_mul


# ---------------------------------------------------------------------------
# infinitesimal action


def zeta(pair: BLieGroupPair, g: Sequence[float], X: Sequence[float]) -> np.ndarray:
    """Value of the infinitesimal left translation by X at the base point g.

    Components are b-frame components on the split chart; the transverse
    slot is structurally zero because left translation fixes phi.
    """
    act = _action(pair)
    Z = act._cache.get("zeta_fn")
    if Z is None:
        rows = act.zeta_exprs()
        flat = [e for row in rows for e in row]
        Z = ex.compile_exprs(flat, list(pair.h_names))
        act._cache["zeta_fn"] = Z
    m = len(pair.h_names)
    vals = Z([float(v) for v in g[:m]])
    out = np.zeros(m + 1)
    for a in range(m):
        xa = float(X[a])
        if xa:
            for j in range(m):
                out[j] += xa * vals[a * m + j]
    return out


_ACTIONS: dict[tuple[int, str], LiftedAction] = {}


def _action(pair: BLieGroupPair, mode: str = "b") -> LiftedAction:
    key = (id(pair), mode)
    act = _ACTIONS.get(key)
    if act is None:
        act = LiftedAction(pair, mode=mode)
        _ACTIONS[key] = act
    return act


# ---------------------------------------------------------------------------
# connections


@dataclass(frozen=True, eq=False)
class Connection:
    """Algebra-valued 1-form on the split chart, one BForm per generator."""

    pair: BLieGroupPair
    mode: str
    forms: tuple[BForm, ...]
    tag: str
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def chart(self) -> BChart:
        return self.forms[0].chart

    @property
    def h_dim(self) -> int:
        return len(self.pair.h_names)

    def _theta_fn(self):
        f = self._cache.get("theta_fn")
        if f is None:
            ch = self.chart
            flat = []
            for form in self.forms:
                for j in range(len(ch.names)):
                    flat.append(form.coeff((j,)))
            f = ex.compile_exprs(flat, list(ch.names))
            self._cache["theta_fn"] = f
        return f

    def theta(self, point: Sequence[float], v: Sequence[float]) -> np.ndarray:
        """Apply theta to a b-tangent vector given in frame components."""
        n = len(self.chart.names)
        vals = self._theta_fn()([float(x) for x in point])
        out = np.zeros(self.h_dim)
        for a in range(self.h_dim):
            out[a] = sum(vals[a * n + j] * float(v[j]) for j in range(n))
        return out

    def phi_slot_exprs(self) -> list[Expr]:
        """The dphi-leg coefficients t_a, zero for the default connection."""
        m = self.h_dim
        return [form.coeff((m,)) for form in self.forms]


def _default_theta_exprs(pair: BLieGroupPair) -> list[list[Expr]]:
    H = pair.h_group
    names = list(pair.h_names)
    kk = [Var("kk__" + n) for n in names]
    k = [Var(n) for n in names]
    moved = H.mul_fn(kk, H.inv_fn(k))
    back = {"kk__" + n: Var(n) for n in names}
    rows = []
    for a in range(len(names)):
        row = []
        for j in range(len(names)):
            row.append(ex.subs(ex.diff(moved[a], "kk__" + names[j]), back))
        rows.append(row)
    return rows


def make_connection(pair: BLieGroupPair, mode: str = "b",
                    deformation: tuple | None = None) -> Connection:
    """Build the default connection, optionally deformed along dphi.

    deformation = (xi, c, b_flag): xi an algebra coefficient vector, c an
    Expr in phi (or a string to parse), b_flag True for a dphi/phi leg and
    False for a plain dphi leg.  The deformed form stays a connection
    because the added leg is horizontal and transforms by Ad; both axioms
    are still re-checked on samples and a residual above 1e-8 is an error.
    """
    if mode not in ("b", "classical"):
        raise ValueError("mode must be 'b' or 'classical'")
    ch = trivialized_base_chart(pair, mode=mode)
    m = len(pair.h_names)
    rows = _default_theta_exprs(pair)
    coeffs = [{(j,): rows[a][j] for j in range(m)
               if not (isinstance(rows[a][j], Const) and rows[a][j].value == 0)}
              for a in range(m)]
    tag = "default"
    if deformation is not None:
        xi, c, b_flag = deformation
        if b_flag and mode == "classical":
            raise ValueError("a dphi/phi deformation needs the b chart")
        if isinstance(c, str):
            c = ex.parse(c)
        adm = adjoint_matrix_sym(pair.h_group, [Var(n) for n in pair.h_names])
        for a in range(m):
            leg = ZERO
            for b in range(m):
                xb = ex.as_expr(xi[b])
                if isinstance(xb, Const) and xb.value == 0:
                    continue
                leg = leg + adm[a][b] * xb
            leg = leg * c
            if mode == "b" and not b_flag:
                # a smooth dphi leg on the b chart picks up one phi factor
                leg = leg * Var(pair.phi_name)
            if not (isinstance(leg, Const) and leg.value == 0):
                coeffs[a][(m,)] = leg
        tag = "deformed-b" if b_flag else "deformed-smooth"
    forms = tuple(BForm(ch, 1, c) for c in coeffs)
    theta = Connection(pair=pair, mode=mode, forms=forms, tag=tag)
    resid = _axiom_residual(theta, samples=40, seed=101)
    if resid > 1e-8:
        raise ValueError(f"connection axioms fail, residual {resid:.3e}")
    return theta


def _axiom_residual(theta: Connection, samples: int, seed: int) -> float:
    """Max residual of the reproducing and equivariance axioms on samples."""
    import random

    pair = theta.pair
    act = _action(pair, theta.mode)
    H = pair.h_group
    m = theta.h_dim
    rng = random.Random(seed)

    Jf = theta._cache.get("hmul_jac")
    if Jf is None:
        names = list(pair.h_names)
        hv = [Var("h__" + n) for n in names]
        kv = [Var(n) for n in names]
        moved = H.mul_fn(hv, kv)
        flat = [ex.diff(moved[j], names[i]) for j in range(m) for i in range(m)]
        Jf = ex.compile_exprs(flat + list(moved),
                              ["h__" + n for n in names] + names)
        theta._cache["hmul_jac"] = Jf
    adm = adjoint_matrix_sym(H, [Var(n) for n in pair.h_names])
    Adf = theta._cache.get("ad_fn")
    if Adf is None:
        Adf = ex.compile_exprs([adm[b][a] for b in range(m) for a in range(m)],
                               list(pair.h_names))
        theta._cache["ad_fn"] = Adf

    worst = 0.0
    for t in range(samples):
        g = [rng.uniform(-0.7, 0.7) for _ in range(m + 1)]
        if t % 3 == 0:
            g[m] = 0.0
        X = [rng.uniform(-1.0, 1.0) for _ in range(m)]
        zg = zeta(pair, g, X)
        rep = theta.theta(g, zg)
        worst = max(worst, max(abs(rep[a] - X[a]) for a in range(m)))

        h = [rng.uniform(-0.6, 0.6) for _ in range(m)]
        v = [rng.uniform(-1.0, 1.0) for _ in range(m + 1)]
        out = Jf([*h, *g[:m]])
        Jv = [sum(out[j * m + i] * v[i] for i in range(m)) for j in range(m)]
        moved = list(out[m * m:]) + [g[m]]
        pushed = [*Jv, v[m]]
        lhs = theta.theta(moved, pushed)
        ad = Adf(h)
        tv = theta.theta(g, v)
        rhs = [sum(ad[b * m + a] * tv[a] for a in range(m)) for b in range(m)]
        worst = max(worst, max(abs(x - y) for x, y in zip(lhs, rhs)))
    return worst


def horizontal_projection(theta: Connection, point: Sequence[float],
                          v: Sequence[float]) -> np.ndarray:
    """Project v onto the orbit directions: zeta(theta(v)) at the point."""
    X = theta.theta(point, v)
    return zeta(theta.pair, point, X)


def phi_theta(theta: Connection, point: Sequence[float],
              v: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Split a b-tangent vector into (ker theta part, algebra part)."""
    X = theta.theta(point, v)
    u = np.array([float(x) for x in v]) - zeta(theta.pair, point, X)
    return u, X


def phi_theta_inverse(theta: Connection, point: Sequence[float],
                      u: Sequence[float], X: Sequence[float]) -> np.ndarray:
    return np.array([float(x) for x in u]) + zeta(theta.pair, point, X)


# ---------------------------------------------------------------------------
# covector side


@dataclass(frozen=True)
class AnnihilatorElement:
    """Covector with no vertical leg: p times the transverse coframe slot."""

    base: tuple[float, ...]
    p: float

    def covector(self, m: int) -> np.ndarray:
        out = np.zeros(m + 1)
        out[m] = self.p
        return out


@dataclass(frozen=True)
class CoupledPoint:
    element: AnnihilatorElement
    mu: tuple[float, ...]


def _zeta_matrix_fn(pair: BLieGroupPair):
    act = _action(pair)
    f = act._cache.get("zeta_mat_fn")
    if f is None:
        rows = act.zeta_exprs()
        flat = [e for row in rows for e in row]
        f = ex.compile_exprs(flat, list(pair.h_names))
        act._cache["zeta_mat_fn"] = f
    return f


def psi_theta(theta: Connection, point: Sequence[float],
              alpha: Sequence[float]) -> CoupledPoint:
    """Split a covector (frame coefficients) into annihilator plus momenta."""
    pair = theta.pair
    m = theta.h_dim
    zf = _zeta_matrix_fn(pair)
    zv = zf([float(x) for x in point[:m]])
    mu = [sum(float(alpha[j]) * zv[a * m + j] for j in range(m)) for a in range(m)]
    tvals = theta._theta_fn()([float(x) for x in point])
    n = m + 1
    beta = [float(alpha[j]) - sum(mu[a] * tvals[a * n + j] for a in range(m))
            for j in range(n)]
    for j in range(m):
        if abs(beta[j]) > 1e-9 * (1.0 + max(abs(float(x)) for x in alpha)):
            raise AssertionError("annihilator part kept a vertical leg")
    return CoupledPoint(AnnihilatorElement(tuple(float(x) for x in point), beta[m]),
                        tuple(mu))


def psi_theta_inverse(theta: Connection, cp: CoupledPoint) -> np.ndarray:
    point = cp.element.base
    m = theta.h_dim
    n = m + 1
    tvals = theta._theta_fn()([float(x) for x in point])
    alpha = cp.element.covector(m)
    for a in range(m):
        for j in range(n):
            alpha[j] += cp.mu[a] * tvals[a * n + j]
    return alpha


def project_annihilator(a: AnnihilatorElement) -> tuple[float, float]:
    """Push p (dphi/phi) at (k, phi) down to p (dphi/phi) at phi."""
    return (a.base[-1], a.p)


def lambda_theta(theta: Connection, cp: CoupledPoint,
                 w: Sequence[float]) -> float:
    """Pair mu with theta of the base legs of a tangent vector at (alpha, mu).

    w carries frame components over (k, phi, p); the fiber leg never enters.
    """
    base_legs = [float(x) for x in w[: theta.h_dim + 1]]
    tv = theta.theta(cp.element.base, base_legs)
    return float(sum(m * t for m, t in zip(cp.mu, tv)))


# ---------------------------------------------------------------------------
# the coupling identity


def coupled_chart(theta: Connection) -> BChart:
    """Chart (k, phi, mu_a, p) that psi_theta maps the cotangent chart onto."""
    got = theta._cache.get("coupled_chart")
    if got is None:
        pair = theta.pair
        base = theta.chart
        mu_names = tuple(dual_names(pair.h_algebra))
        names = base.names + mu_names + ("p",)
        box = base.box + tuple((-1.5, 1.5) for _ in range(len(mu_names) + 1))
        got = BChart(names, base.defining, box)
        theta._cache["coupled_chart"] = got
    return got


def psi_map_exprs(theta: Connection) -> list[Expr]:
    """psi_theta as a chart map from the cotangent chart to the coupled one."""
    got = theta._cache.get("psi_exprs")
    if got is None:
        pair = theta.pair
        act = _action(pair, theta.mode)
        m = theta.h_dim
        cn = act.cot.chart.names
        zrows = act.zeta_exprs()
        mu = []
        for a in range(m):
            acc = ZERO
            for j in range(m):
                zij = zrows[a][j]
                if isinstance(zij, Const) and zij.value == 0:
                    continue
                acc = acc + Var(cn[m + 1 + j]) * zij
            mu.append(acc)
        tlegs = theta.phi_slot_exprs()
        p0 = Var(cn[2 * m + 1])
        for a in range(m):
            ta = tlegs[a]
            if isinstance(ta, Const) and ta.value == 0:
                continue
            p0 = p0 - mu[a] * ta
        got = [Var(n) for n in cn[: m + 1]] + mu + [p0]
        theta._cache["psi_exprs"] = got
    return got


def coupling_rhs_form(theta: Connection) -> BForm:
    """The target 2-form: pulled-back reduced form minus d(lambda_theta)."""
    got = theta._cache.get("rhs_form")
    if got is None:
        ch = coupled_chart(theta)
        m = theta.h_dim
        lam_coeffs = {}
        for j in range(m + 1):
            acc = ZERO
            for a in range(m):
                taj = theta.forms[a].coeff((j,))
                if isinstance(taj, Const) and taj.value == 0:
                    continue
                acc = acc + Var(ch.names[m + 1 + a]) * taj
            if not (isinstance(acc, Const) and acc.value == 0):
                lam_coeffs[(j,)] = acc
        dlam = b_d(BForm(ch, 1, lam_coeffs))
        coeffs = {k: ex.sub(ZERO, c) for k, c in dlam.coeffs.items()}
        key = (m, 2 * m + 1)
        coeffs[key] = coeffs.get(key, ZERO) + ONE
        got = BForm(ch, 2, coeffs)
        theta._cache["rhs_form"] = got
    return got


def _coupling_compiled(theta: Connection):
    f = theta._cache.get("coupling_fn")
    if f is None:
        pair = theta.pair
        act = _action(pair, theta.mode)
        cch = act.cot.chart
        names = list(cch.names)
        n = len(names)
        d = cch.defining
        psi = psi_map_exprs(theta)
        # exact frame-to-frame Jacobian; psi fixes phi so the singular
        # slot transports with ratio one
        jac = {}
        for i in range(n):
            for j in range(n):
                if i == d:
                    e = ONE if j == d else ZERO
                else:
                    e = ex.diff(psi[i], names[j])
                    if j == d and d is not None:
                        e = e * Var(names[d])
                if not (isinstance(e, Const) and e.value == 0):
                    jac[(i, j)] = e
        rhs = coupling_rhs_form(theta)
        rkeys = sorted(rhs.coeffs)
        jkeys = sorted(jac)
        body = [psi[i] for i in range(n)]
        body += [jac[k] for k in jkeys]
        fn = ex.compile_exprs(body, names)
        rfn = ex.compile_exprs([rhs.coeffs[k] for k in rkeys],
                               list(coupled_chart(theta).names))
        omega = canonical_bsymplectic(act.cot)
        f = (fn, rfn, jkeys, rkeys, omega, n)
        theta._cache["coupling_fn"] = f
    return f


def coupling_identity_residual(theta: Connection, point: Sequence[float],
                               v: Sequence[float], w: Sequence[float]) -> float:
    """|omega(v, w) - rhs(dpsi v, dpsi w)| at one cotangent-chart point."""
    fn, rfn, jkeys, rkeys, omega, n = _coupling_compiled(theta)
    pt = [float(x) for x in point]
    vals = fn(pt)
    image = vals[:n]
    J = {k: x for k, x in zip(jkeys, vals[n:])}
    pv = [sum(J.get((i, j), 0.0) * float(v[j]) for j in range(n)) for i in range(n)]
    pw = [sum(J.get((i, j), 0.0) * float(w[j]) for j in range(n)) for i in range(n)]
    rvals = rfn(image)
    rhs = 0.0
    for k, c in zip(rkeys, rvals):
        i, j = k
        rhs += c * (pv[i] * pw[j] - pv[j] * pw[i])
    env = {nm: x for nm, x in zip(omega.chart.names, pt)}
    lhs = 0.0
    for (i, j), c in omega.coeffs.items():
        lhs += ex.evaluate(c, env) * (float(v[i]) * float(w[j]) - float(v[j]) * float(w[i]))
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# the reduced structure


@dataclass(frozen=True, eq=False)
class ReducedPoisson:
    """Block bivector on (subgroup dual) x (transverse pair)."""

    pair: BLieGroupPair
    mode: str
    bivector: PoissonBivector

    @property
    def coordinates(self) -> tuple[str, ...]:
        return self.bivector.names

    def bracket(self, F: Expr, G: Expr) -> Expr:
        return self.bivector.bracket(F, G)

    def bracket_value(self, F: Expr, G: Expr, point: Sequence[float]) -> float:
        return self.bivector.bracket_value(F, G, point)

    def table(self):
        return self.bivector.table()

    def jacobiator(self, F: Expr, G: Expr, K: Expr) -> Expr:
        return self.bivector.jacobiator(F, G, K)


def reduced_poisson(pair: BLieGroupPair, theta: Connection | None = None) -> ReducedPoisson:
    """The reduced bivector; the connection only witnesses the construction.

    Every connection produces the same block formula, which is what the
    independence tests check, so the bivector is written down directly
    from the subgroup constants and the transverse pair.
    """
    mode = theta.mode if theta is not None else "b"
    alg = pair.h_algebra
    m = len(alg.labels)
    names = tuple(dual_names(alg)) + (pair.phi_name, "p")
    entries: dict[tuple[int, int], Expr] = {}
    for i in range(m):
        for j in range(i + 1, m):
            acc = ZERO
            for k, ck in enumerate(alg.c(i, j)):
                if ck:
                    acc = acc - Const(Fraction(ck)) * Var(names[k])
            if not (isinstance(acc, Const) and acc.value == 0):
                entries[(i, j)] = acc
    entries[(m, m + 1)] = Var(pair.phi_name) if mode == "b" else ONE
    return ReducedPoisson(pair=pair, mode=mode,
                          bivector=PoissonBivector(names, entries))


def invariant_moment_exprs(pair: BLieGroupPair, mode: str = "b") -> list[Expr]:
    """nu_b = <mu, Ad_k E_b> on the cotangent chart, constant along orbits."""
    act = _action(pair, mode)
    got = act._cache.get("invariant_mu")
    if got is None:
        m = len(pair.h_names)
        cn = act.cot.chart.names
        adm = adjoint_matrix_sym(pair.h_group, [Var(n) for n in pair.h_names])
        mus = act.moment_exprs()
        got = []
        for b in range(m):
            acc = ZERO
            for a in range(m):
                entry = adm[a][b]
                if isinstance(entry, Const) and entry.value == 0:
                    continue
                acc = acc + mus[a] * entry
            got.append(acc)
        act._cache["invariant_mu"] = got
    return got


def transverse_momentum_expr(theta: Connection) -> Expr:
    """The annihilator coefficient p as a function on the cotangent chart."""
    return psi_map_exprs(theta)[-1]


def reduced_bracket_via_invariants(pair: BLieGroupPair, F: Expr, G: Expr,
                                   point: Sequence[float], mode: str = "b") -> float:
    """Bracket of two invariant functions, evaluated with the upstairs
    canonical structure at the given lift.

    The inputs must be constant along the lifted orbits; that is checked on
    seeded samples before any value is produced, and it is exactly what
    makes the value a function of the reduced point alone.
    """
    import random

    act = _action(pair, mode)
    cch = act.cot.chart
    names = list(cch.names)
    m = len(pair.h_names)
    fg = ex.compile_exprs([F, G], names)
    rng = random.Random(211)
    scale = 1.0
    worst = 0.0
    for t in range(20):
        x = [rng.uniform(-0.8, 0.8) for _ in names]
        if mode == "b" and t % 4 == 0:
            x[m] = 0.0
        h = [rng.uniform(-0.5, 0.5) for _ in range(m)]
        a = fg(x)
        b = fg(list(act.act(h, x)))
        scale = max(scale, abs(a[0]), abs(a[1]))
        worst = max(worst, abs(a[0] - b[0]), abs(a[1] - b[1]))
    if worst > 1e-8 * scale:
        raise ValueError(f"inputs are not orbit-invariant, residual {worst:.3e}")

    key = "upstairs_poisson"
    up = act._cache.get(key)
    if up is None:
        up = invert_to_poisson(canonical_bsymplectic(act.cot))
        act._cache[key] = up
    return up.bracket_value(F, G, [float(x) for x in point])
