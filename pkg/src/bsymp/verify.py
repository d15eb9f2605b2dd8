"""Section-based self-checks behind the command line verify command.

Each section recomputes one family of invariants for a configured group
and reports a residual against a fixed tolerance.  Exact algebraic checks
carry tolerance zero; sampled analytic identities carry the tolerances the
test suite enforces.  Everything is seeded from one integer, so reruns of
the same configuration produce the same bytes.

Groups given only by structure constants (no matrix chart) run the algebra
sections and skip everything that needs the group or its cotangent side.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

import bsymp.expr as ex
from bsymp.expr import Const, Expr, Var, ONE, ZERO
from bsymp import bcalc, blift, dynamics as dyn, lie
from bsymp import reduction as red


@dataclass(frozen=True)
class VerifyOptions:
    seed: int = 42
    samples: int | None = None      # override for sampled section sizes
    tolerance: float | None = None  # override for inexact tolerances


@dataclass(frozen=True)
class SectionResult:
    name: str
    residual: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.residual <= self.tolerance


@dataclass(frozen=True)
class VerifyReport:
    subject: str
    seed: int
    sections: tuple[SectionResult, ...]

    @property
    def passed(self) -> bool:
        return all(s.ok for s in self.sections)

    def failing(self) -> list[str]:
        return [s.name for s in self.sections if not s.ok]

    def lines(self) -> list[str]:
        out = [f"subject: {self.subject}", f"seed: {self.seed}",
               f"sections: {len(self.sections)}"]
        for s in self.sections:
            mark = "ok" if s.ok else "FAIL"
            out.append(f"{mark} | {s.name} | residual: {s.residual!r}"
                       f" | tolerance: {s.tolerance!r}")
        out.append("result: " + ("pass" if self.passed else
                                 "fail: " + "; ".join(self.failing())))
        return out

    def text(self) -> str:
        return "\n".join(self.lines())


def _count(opts: VerifyOptions, default: int) -> int:
    return default if opts.samples is None else max(4, opts.samples)


def _tol(opts: VerifyOptions, default: float) -> float:
    return default if opts.tolerance is None else opts.tolerance


def _poly(rng, names, terms=3, deg=2):
    acc = ex.as_expr(rng.uniform(-1, 1))
    for _ in range(terms):
        t = ex.as_expr(rng.uniform(-1, 1))
        for _ in range(rng.randrange(1, deg + 1)):
            t = t * Var(rng.choice(names))
        acc = acc + t
    return acc


# ---------------------------------------------------------------------------
# algebra-level sections


def _sec_antisymmetry(L: lie.LieAlgebra, opts):
    return float(L.antisymmetry_defect()), 0.0


def _sec_jacobi(L: lie.LieAlgebra, opts):
    return float(L.jacobi_defect()), 0.0


def _sec_lp_jacobi(L: lie.LieAlgebra, opts):
    rng = random.Random(opts.seed * 5 + 1)
    names = list(lie.dual_names(L))
    worst = 0.0
    n = _count(opts, 50)
    for _ in range(n):
        F, G, K = (_poly(rng, names) for _ in range(3))
        jac = (lie.lie_poisson_sym(L, lie.lie_poisson_sym(L, F, G), K)
               + lie.lie_poisson_sym(L, lie.lie_poisson_sym(L, G, K), F)
               + lie.lie_poisson_sym(L, lie.lie_poisson_sym(L, K, F), G))
        env = {nm: rng.uniform(-1, 1) for nm in names}
        worst = max(worst, abs(ex.evaluate(jac, env)))
    return worst, _tol(opts, 1e-9)


ALGEBRA_SECTIONS: list[tuple[str, Callable]] = [
    ("lie: antisymmetry", _sec_antisymmetry),
    ("lie: Jacobi", _sec_jacobi),
    ("lie: Lie-Poisson-Jacobi", _sec_lp_jacobi),
]


# ---------------------------------------------------------------------------
# group-level sections


def _sec_commutator_match(pair, opts):
    G = pair.group
    redone = lie.structure_constants_from_matrices(G.basis())
    worst = Fraction(0)
    n = G.dim
    for i in range(n):
        for j in range(n):
            a, b = G.algebra.c(i, j), redone.c(i, j)
            worst = max([worst] + [abs(x - y) for x, y in zip(a, b)])
    return float(worst), 0.0


def _rational_point(rng, names, defining):
    pt = {}
    for i, nm in enumerate(names):
        num = rng.randrange(-8, 9)
        if defining is not None and i == defining and num == 0:
            num = 3
        pt[nm] = Fraction(num, rng.randrange(1, 7))
    return pt


def _sec_d_squared(pair, opts):
    act = blift.LiftedAction(pair)
    ch = act.cot.chart
    rng = random.Random(opts.seed * 7 + 2)
    names = list(ch.names)
    worst = Fraction(0)
    for _ in range(_count(opts, 12)):
        deg = rng.choice([0, 1, 2])
        if deg == 0:
            coeffs = {(): _rat_poly(rng, names)}
        else:
            coeffs = {}
            for _ in range(3):
                idx = tuple(sorted(rng.sample(range(ch.dim), deg)))
                coeffs[idx] = _rat_poly(rng, names)
        w = bcalc.BForm(ch, deg, coeffs)
        dd = bcalc.b_d(bcalc.b_d(w))
        for _ in range(3):
            pt = _rational_point(rng, names, ch.defining)
            for c in dd.coeffs.values():
                worst = max(worst, abs(ex.eval_exact(c, pt)))
    return float(worst), 0.0


def _rat_poly(rng, names):
    acc: Expr = Const(Fraction(rng.randrange(-3, 4)))
    for _ in range(2):
        t: Expr = Const(Fraction(rng.randrange(-3, 4), rng.randrange(1, 4)))
        for _ in range(rng.randrange(1, 3)):
            t = t * Var(rng.choice(names))
        acc = acc + t
    return acc


def _sec_log_derivative(pair, opts):
    act = blift.LiftedAction(pair)
    ch = act.cot.chart
    rng = random.Random(opts.seed * 11 + 3)
    d = ch.defining
    names = list(ch.names)
    worst = Fraction(0)
    for _ in range(6):
        c = Fraction(rng.randrange(-4, 5), rng.randrange(1, 4))
        g = _rat_poly(rng, names)
        u = bcalc.BFunction(ch, c, g)
        du = bcalc.d_bfunction(u)
        # expected: c on the rescaled defining slot plus the plain derivative
        for j in range(ch.dim):
            want = ex.diff(g, names[j])
            if j == d:
                want = Var(names[d]) * want + Const(c)
            diff = du.coeff((j,)) - want
            for _ in range(3):
                pt = _rational_point(rng, names, d)
                worst = max(worst, abs(ex.eval_exact(diff, pt)))
    return float(worst), 0.0


def _sec_normal_form_model(pair, opts):
    rep = bcalc.is_b_symplectic(bcalc.bdarboux_model(3), samples=64,
                                seed=opts.seed)
    res = rep.closed_residual + abs(abs(rep.min_pfaffian) - 1.0)
    if not rep.verdict:
        res = max(res, 1.0)
    return res, _tol(opts, 1e-9)


def _sec_canonical_layout(pair, opts):
    act = blift.LiftedAction(pair)
    om = blift.canonical_bsymplectic(act.cot)
    n = act.cot.n
    bad = 0.0
    for idx, c in om.coeffs.items():
        i, j = idx
        expect_one = (j == i + n)
        if expect_one and not (isinstance(c, Const) and c.value == 1):
            bad = 1.0
        if not expect_one and not (isinstance(c, Const) and c.value == 0):
            bad = 1.0
    rep = bcalc.is_b_symplectic(om, samples=48, seed=opts.seed + 1)
    if not rep.verdict:
        bad = max(bad, 1.0)
    return bad + rep.closed_residual, 0.0


def _sec_action_law(pair, opts):
    act = blift.LiftedAction(pair)
    H = pair.h_group
    names = act.cot.chart.names
    rng = random.Random(opts.seed * 13 + 4)
    worst = 0.0
    for _ in range(_count(opts, 100)):
        h1 = [rng.uniform(-0.5, 0.5) for _ in range(len(pair.h_names))]
        h2 = [rng.uniform(-0.5, 0.5) for _ in range(len(pair.h_names))]
        x = [rng.uniform(-0.6, 0.6) for _ in names]
        one = act.act(h1, act.act(h2, x))
        two = act.act(lie.group_mul(H, h1, h2), x)
        k_dist = lie.param_distance(H, one[:len(h1)], two[:len(h1)])
        rest = max(abs(a - b) for a, b in zip(one[len(h1):], two[len(h1):]))
        worst = max(worst, k_dist, rest)
    return worst, _tol(opts, 1e-9)


def _sec_moment_hamilton(pair, opts):
    act = blift.LiftedAction(pair)
    ch = act.cot.chart
    om = blift.canonical_bsymplectic(act.cot)
    m = len(pair.h_names)
    rng = random.Random(opts.seed * 17 + 5)
    mus = act.moment_exprs()
    worst = 0.0
    for _ in range(_count(opts, 100) // 4):
        X = [rng.uniform(-1, 1) for _ in range(m)]
        Xs = act.xsharp(X)
        muX = ZERO
        for a in range(m):
            muX = muX + ex.as_expr(X[a]) * mus[a]
        dmu = bcalc.b_d(bcalc.BForm(ch, 0, {(): muX}))
        for t in range(4):
            x = [rng.uniform(-0.7, 0.7) for _ in ch.names]
            if t % 2 == 0:
                x[m] = 0.0
            for j in range(ch.dim):
                W = bcalc.BVectorField(
                    ch, [ONE if q == j else ZERO for q in range(ch.dim)])
                lhs = bcalc.pair(om, [Xs, W], x)
                rhs = ex.evaluate(dmu.coeff((j,)), ch.env(x))
                worst = max(worst, abs(lhs - rhs))
    return worst, _tol(opts, 1e-8)


def _sec_moment_equivariance(pair, opts):
    act = blift.LiftedAction(pair)
    H = pair.h_group
    names = act.cot.chart.names
    m = len(pair.h_names)
    rng = random.Random(opts.seed * 19 + 6)
    worst = 0.0
    for _ in range(_count(opts, 100)):
        h = [rng.uniform(-0.5, 0.5) for _ in range(m)]
        x = [rng.uniform(-0.6, 0.6) for _ in names]
        moved = act.act(h, x)
        lhs = np.array([blift.moment(act, moved, e) for e in np.eye(m)])
        mu = [blift.moment(act, x, e) for e in np.eye(m)]
        rhs = lie.coadjoint_star(H, h, mu)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst, _tol(opts, 1e-9)


def _connection_cases(pair):
    m = len(pair.h_names)
    phi = pair.phi_name
    xi1 = [0.3 if a % 2 == 0 else -0.2 for a in range(m)]
    xi2 = [0.1 if a % 3 == 0 else 0.4 for a in range(m)]
    return [
        (red.make_connection(pair), None, None),
        (red.make_connection(pair, deformation=(xi1, f"1 + {phi}^2", True)),
         xi1, ex.parse(f"1 + {phi}^2")),
        (red.make_connection(pair, deformation=(xi2, f"cos({phi})", False)),
         xi2, ex.parse(f"cos({phi})") * Var(phi)),
    ]


def _sec_connection_axioms(pair, opts):
    worst = 0.0
    for theta, _, _ in _connection_cases(pair):
        worst = max(worst, red._axiom_residual(theta, 30, opts.seed + 7))
    return worst, _tol(opts, 1e-9)


def _sec_splitting_roundtrip(pair, opts):
    rng = random.Random(opts.seed * 23 + 8)
    m = len(pair.h_names)
    worst = 0.0
    for theta, _, _ in _connection_cases(pair):
        for _ in range(_count(opts, 40) // 2):
            g = [rng.uniform(-0.6, 0.6) for _ in range(m + 1)]
            v = [rng.uniform(-1, 1) for _ in range(m + 1)]
            u, X = red.phi_theta(theta, g, v)
            back = red.phi_theta_inverse(theta, g, u, X)
            worst = max(worst, float(np.max(np.abs(back - np.array(v)))))
            alpha = [rng.uniform(-1, 1) for _ in range(m + 1)]
            cp = red.psi_theta(theta, g, alpha)
            back2 = red.psi_theta_inverse(theta, cp)
            worst = max(worst, float(np.max(np.abs(back2 - np.array(alpha)))))
    return worst, _tol(opts, 1e-12)


def _sec_coupling_identity(pair, opts):
    rng = random.Random(opts.seed * 29 + 9)
    act = red._action(pair)
    names = act.cot.chart.names
    m = len(pair.h_names)
    n = _count(opts, 200)
    worst = 0.0
    for theta, _, _ in _connection_cases(pair):
        for t in range(n):
            x = [rng.uniform(-0.7, 0.7) for _ in names]
            if t % 2 == 0:
                x[m] = 0.0
            else:
                x[m] = math.copysign(rng.uniform(0.05, 1.0), x[m] or 1.0)
            v = [rng.uniform(-1, 1) for _ in names]
            w = [rng.uniform(-1, 1) for _ in names]
            worst = max(worst,
                        red.coupling_identity_residual(theta, x, v, w))
    return worst, _tol(opts, 1e-8)


def _sec_connection_independence(pair, opts):
    rng = random.Random(opts.seed * 31 + 10)
    act = red._action(pair)
    cn = list(act.cot.chart.names)
    m = len(pair.h_names)
    rp = red.reduced_poisson(pair)
    rnames = rp.coordinates
    nu = red.invariant_moment_exprs(pair)
    downf = ex.compile_exprs(list(nu), cn)
    n = _count(opts, 50)
    worst = 0.0
    for theta, xi, scale in _connection_cases(pair):
        p0 = red.transverse_momentum_expr(theta)
        lift_sub = {rnames[b]: nu[b] for b in range(m)}
        lift_sub[rnames[m + 1]] = p0
        if xi is None:
            tau = {}
        else:
            shift = ZERO
            for b in range(m):
                shift = shift + ex.as_expr(xi[b]) * Var(rnames[b])
            tau = {rnames[m + 1]: Var(rnames[m + 1]) - scale * shift}
        for _ in range(n):
            F = _poly(rng, list(rnames))
            G = _poly(rng, list(rnames))
            x = [rng.uniform(-0.6, 0.6) for _ in cn]
            if rng.random() < 0.4:
                x[m] = 0.0
            up = red.reduced_bracket_via_invariants(
                pair, ex.subs(F, lift_sub), ex.subs(G, lift_sub), x)
            down_pt = downf(x) + [x[m], x[2 * m + 1]]
            want = rp.bracket_value(ex.subs(F, tau), ex.subs(G, tau),
                                    down_pt)
            worst = max(worst, abs(up - want))
    return worst, _tol(opts, 1e-8)


def _sec_reduced_jacobi(pair, opts):
    rng = random.Random(opts.seed * 37 + 11)
    rp = red.reduced_poisson(pair)
    names = list(rp.coordinates)
    worst = 0.0
    for _ in range(_count(opts, 20)):
        F, G, K = (_poly(rng, names) for _ in range(3))
        jac = rp.jacobiator(F, G, K)
        env = {nm: rng.uniform(-1, 1) for nm in names}
        worst = max(worst, abs(ex.evaluate(jac, env)))
    return worst, _tol(opts, 1e-9)


def _reduced_flow_field(pair):
    rp = red.reduced_poisson(pair)
    m = len(rp.coordinates) - 2
    vf = dyn.hamiltonian_vf(rp.bivector, Var(rp.coordinates[m + 1]),
                            phi_slot=m)
    return rp, vf, m


def _sec_flow_endpoint(pair, opts):
    rp, vf, m = _reduced_flow_field(pair)
    x0 = [0.0] * m + [1.0, 0.0]
    tr = dyn.integrate(vf, x0, 1e-3, 1.0)
    return abs(tr.final[m] - math.e), _tol(opts, 1e-6)


def _sec_slice_hold(pair, opts):
    rng = random.Random(opts.seed * 41 + 12)
    rp = red.reduced_poisson(pair)
    m = len(rp.coordinates) - 2
    H = _poly(rng, list(rp.coordinates))
    vf = dyn.hamiltonian_vf(rp.bivector, H, phi_slot=m)
    x0 = [rng.uniform(-0.5, 0.5) for _ in rp.coordinates]
    x0[m] = 0.0
    tr = dyn.integrate(vf, x0, 1e-2, 2.0)
    return float(np.max(np.abs(tr.rows[:, m]))), 0.0


def _sec_order_factor(pair, opts):
    rp, vf, m = _reduced_flow_field(pair)
    errs = []
    for dt in (0.1, 0.05):
        tr = dyn.integrate(vf, [0.0] * m + [1.0, 0.0], dt, 1.0)
        errs.append(abs(tr.final[m] - math.e))
    factor = errs[0] / errs[1]
    return abs(math.log2(factor / 16.0)), 1.0


def _sec_energy_drift(pair, opts):
    rng = random.Random(opts.seed * 43 + 13)
    rp = red.reduced_poisson(pair)
    m = len(rp.coordinates) - 2
    worst = 0.0
    for _ in range(3):
        H = _poly(rng, list(rp.coordinates))
        vf = dyn.hamiltonian_vf(rp.bivector, H, phi_slot=m)
        x0 = [rng.uniform(-0.6, 0.6) for _ in rp.coordinates]
        # quadratic terms can drive finite-time escape; shrink the start
        # deterministically until the full horizon stays on the chart
        for _ in range(6):
            try:
                tr = dyn.integrate(vf, x0, 1e-3, 10.0)
                break
            except dyn.ChartExitError:
                x0 = [0.5 * v for v in x0]
        else:
            raise
        h0 = ex.evaluate(H, dict(zip(rp.coordinates, x0)))
        worst = max(worst, tr.energy_drift / (1.0 + abs(h0)))
    return worst, _tol(opts, 1e-6)


GROUP_SECTIONS: list[tuple[str, Callable]] = [
    ("lie: commutator-match", _sec_commutator_match),
    ("bcalc: derivative-squared", _sec_d_squared),
    ("bcalc: log-derivative", _sec_log_derivative),
    ("bcalc: normal-form-model", _sec_normal_form_model),
    ("bcalc: canonical-layout", _sec_canonical_layout),
    ("blift: action-law", _sec_action_law),
    ("blift: moment-Hamilton", _sec_moment_hamilton),
    ("blift: moment-equivariance", _sec_moment_equivariance),
    ("reduction: connection-axioms", _sec_connection_axioms),
    ("reduction: splitting-roundtrip", _sec_splitting_roundtrip),
    ("reduction: coupling-identity", _sec_coupling_identity),
    ("reduction: connection-independence", _sec_connection_independence),
    ("reduction: reduced-Jacobi", _sec_reduced_jacobi),
    ("dynamics: flow-endpoint", _sec_flow_endpoint),
    ("dynamics: slice-hold", _sec_slice_hold),
    ("dynamics: order-factor", _sec_order_factor),
    ("dynamics: energy-drift", _sec_energy_drift),
]


def run_suite(subject, opts: VerifyOptions | None = None) -> VerifyReport:
    """Run every applicable section for a group pair or a bare algebra."""
    opts = opts or VerifyOptions()
    results = []
    if isinstance(subject, lie.LieAlgebra):
        label = "algebra(" + ",".join(subject.labels) + ")"
        for name, fn in ALGEBRA_SECTIONS:
            resid, tol = fn(subject, opts)
            results.append(SectionResult(name, float(resid), float(tol)))
        return VerifyReport(label, opts.seed, tuple(results))
    pair = subject
    for name, fn in ALGEBRA_SECTIONS:
        resid, tol = fn(pair.group.algebra, opts)
        results.append(SectionResult(name, float(resid), float(tol)))
    for name, fn in GROUP_SECTIONS:
        resid, tol = fn(pair, opts)
        results.append(SectionResult(name, float(resid), float(tol)))
    return VerifyReport(pair.name, opts.seed, tuple(results))
