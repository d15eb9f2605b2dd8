"""Suite runner: section coverage, option overrides, determinism."""

from fractions import Fraction

from bsymp import lie, verify


def small(**kw):
    return verify.VerifyOptions(seed=42, samples=kw.pop("samples", 6), **kw)


def test_full_suite_sections_and_pass():
    rep = verify.run_suite(lie.builtin("se2"), small())
    assert rep.passed
    assert rep.subject == "se2"
    assert rep.seed == 42
    names = [s.name for s in rep.sections]
    for expected in ("lie: Jacobi", "bcalc: derivative-squared",
                     "blift: moment-Hamilton", "reduction: coupling-identity",
                     "reduction: connection-independence",
                     "dynamics: order-factor"):
        assert expected in names
    assert len(names) == len(set(names))


def test_algebra_subject_runs_lie_sections_only():
    alg = lie.builtin("se2").h_algebra
    rep = verify.run_suite(alg, small())
    names = [s.name for s in rep.sections]
    assert names == ["lie: antisymmetry", "lie: Jacobi",
                     "lie: Lie-Poisson-Jacobi"]
    assert rep.passed
    assert rep.subject.startswith("algebra(")


def test_tolerance_override_applies_to_inexact_sections():
    rep = verify.run_suite(lie.builtin("se2"),
                           small(tolerance=1e-300))
    assert not rep.passed
    bad = rep.failing()
    assert "lie: Lie-Poisson-Jacobi" in bad
    # exact sections keep tolerance zero and still pass
    exact = {s.name: s for s in rep.sections}["lie: Jacobi"]
    assert exact.ok and exact.tolerance == 0.0


def test_report_text_is_deterministic():
    a = verify.run_suite(lie.builtin("se2"), small()).text()
    b = verify.run_suite(lie.builtin("se2"), small()).text()
    assert a == b
    assert a.endswith("result: pass")
    for line in a.splitlines()[3:-1]:
        assert line.startswith(("ok | ", "FAIL | "))
        assert "residual: " in line and "tolerance: " in line


def test_failing_section_is_named():
    bad = lie.LieAlgebra(
        labels=("X", "Y", "Z"),
        constants={
            (0, 1): (Fraction(0), Fraction(0), Fraction(1)),
            (1, 0): (Fraction(0), Fraction(0), Fraction(-1)),
            (1, 2): (Fraction(1), Fraction(0), Fraction(1)),
            (2, 1): (Fraction(-1), Fraction(0), Fraction(-1)),
            (2, 0): (Fraction(0), Fraction(1), Fraction(0)),
            (0, 2): (Fraction(0), Fraction(-1), Fraction(0)),
        })
    rep = verify.run_suite(bad, small())
    assert not rep.passed
    assert "lie: Jacobi" in rep.failing()
    assert any(line.startswith("FAIL | lie: Jacobi") for line in rep.lines())
