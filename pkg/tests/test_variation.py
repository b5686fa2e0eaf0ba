"""Variational machinery: functionals, equivalent first-variation forms,
the integrating-factor solver, admissible variations, and the critical-point
test."""

import math

import numpy as np
import pytest

from conftest import random_mobius_curve, random_polynomial_variation
from schwarzlab.closed_form import MobiusFamily, family_eval_jet
from schwarzlab.el_ode import integrate
from schwarzlab.errors import InfeasibleVariationError, SingularJetError
from schwarzlab.schwarzian import Jet4, boundary_B
from schwarzlab.variation import (
    FORMS,
    BumpFn,
    ExprCurve,
    ExprVariation,
    LinearCombination,
    MobiusCurve,
    PerturbedCurve,
    SplineVariation,
    TrajectoryCurve,
    admissible_variation,
    critical_test,
    delta_fd,
    delta_form,
    functional_IL,
    functional_IS,
    solve_du,
)

AFFINE = MobiusCurve(MobiusFamily(2.0, 1.0, 0.0, 1.0, 0.0), (0.0, 1.0))


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------

def test_IL_examples():
    assert abs(functional_IL(AFFINE, 0.0, 1.0)) <= 1e-12
    u = ExprCurve("exp(2*t)", (0.0, 1.0))
    assert abs(functional_IL(u, 0.0, 1.0) - 4.0) <= 1e-10


def test_IL_tan_against_fixed_grid_oracle():
    # independent oracle: composite Gauss-Legendre on a fixed fine partition
    u_tan = ExprCurve("tan(t)", (0.0, 1.0))
    val = functional_IL(u_tan, 0.0, 1.0)
    xs, ws = np.polynomial.legendre.leggauss(24)
    acc = 0.0
    edges = np.linspace(0.0, 1.0, 33)
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = (a + b) / 2.0, (b - a) / 2.0
        for x, w in zip(xs, ws):
            j = u_tan.jet(mid + half * x)
            acc += half * w * (j.q / j.p) ** 2
    assert abs(val - acc) <= 1e-10


def test_IS_examples():
    assert abs(functional_IS(AFFINE, 0.0, 1.0)) <= 1e-12
    u = ExprCurve("exp(2*t)", (0.0, 1.0))
    assert abs(functional_IS(u, 0.0, 1.0) + 2.0) <= 1e-10
    u_tan = ExprCurve("tan(t)", (0.0, 0.5))
    assert abs(functional_IS(u_tan, 0.0, 0.5) - 1.0) <= 1e-10


def test_IS_boundary_identity_random_curves():
    rng = np.random.default_rng(41)
    for _ in range(10):
        u = random_mobius_curve(rng)
        t0, t1 = u.domain
        ja, jb = u.jet(t0), u.jet(t1)
        lhs = functional_IS(u, t0, t1)
        rhs = (jb.q / jb.p - ja.q / ja.p) - 0.5 * functional_IL(u, t0, t1)
        assert abs(lhs - rhs) <= 1e-9


def test_near_singular_curve_rejected():
    with pytest.raises(SingularJetError):
        ExprCurve("sin(t)", (0.0, 3.2))  # u' = cos t crosses zero
    with pytest.raises(SingularJetError):
        PerturbedCurve(ExprCurve("t", (0.0, 1.0)), ExprVariation("-1*t"), 1.0)


# ---------------------------------------------------------------------------
# finite-difference variation
# ---------------------------------------------------------------------------

def test_delta_fd_zero_variation():
    u = ExprCurve("exp(2*t)", (0.0, 1.0))
    assert delta_fd("I_S", u, ExprVariation("0")) == 0.0


def test_delta_fd_quadratic_on_line():
    u = ExprCurve("t", (0.0, 1.0))
    v = ExprVariation("t^2")
    # S(t + s t^2) = O(s^2), so the derivative at s = 0 vanishes to O(h^2)
    assert abs(delta_fd("I_S", u, v)) <= 1e-7


def test_delta_fd_cross_method_on_tan():
    u = ExprCurve("tan(t)", (0.0, 1.0))
    v = BumpFn(0.5, 0.2, 1.0)
    fd = delta_fd("I_S", u, v)
    integral, boundary = delta_form("schwarzian", u, v, 0.0, 1.0)
    assert abs(fd - (integral + boundary)) <= 1e-6


def test_delta_fd_richardson():
    u = ExprCurve("exp(2*t)", (0.0, 1.0))
    v = ExprVariation("t^2 + sin(t)")
    base = delta_fd("I_L", u, v)
    tight = delta_fd("I_L", u, v, richardson=True)
    exact = sum(delta_form("direct", u, v, 0.0, 1.0))
    assert abs(base - exact) <= 1e-5 * max(1.0, abs(exact))
    assert abs(tight - exact) <= 1e-6 * max(1.0, abs(exact))


# ---------------------------------------------------------------------------
# delta_form
# ---------------------------------------------------------------------------

def test_form_examples():
    # S == 0 annihilates the schwarzian-form integrand on Moebius curves
    v = random_polynomial_variation(np.random.default_rng(1))
    integral, _ = delta_form("schwarzian", AFFINE, v, 0.0, 1.0)
    assert abs(integral) <= 1e-12

    u_line = ExprCurve("t", (0.0, 1.0))
    integral, boundary = delta_form("schwarzian", u_line, ExprVariation("t^2"), 0.0, 1.0)
    assert abs(integral) <= 1e-12
    assert abs(boundary) <= 1e-12  # B = 2 at both ends

    u = ExprCurve("exp(2*t)", (0.0, 1.0))
    bump = BumpFn(0.5, 0.2, 1.0)
    totals = [sum(delta_form(f, u, bump, 0.0, 1.0)) for f in ("direct", "by_parts", "du_factored")]
    assert max(totals) - min(totals) <= 1e-8


def test_forms_agree_on_random_pairs():
    rng = np.random.default_rng(42)
    for _ in range(10):
        u = random_mobius_curve(rng, max_ratio=8.0)
        v = random_polynomial_variation(rng)
        t0, t1 = u.domain
        totals = {f: sum(delta_form(f, u, v, t0, t1)) for f in FORMS}
        il = [totals["direct"], totals["by_parts"], totals["du_factored"]]
        assert max(il) - min(il) <= 1e-8
        fd_l = delta_fd("I_L", u, v)
        assert abs(fd_l - totals["direct"]) <= 1e-5 * max(1.0, abs(fd_l))
        fd_s = delta_fd("I_S", u, v)
        assert abs(fd_s - totals["schwarzian"]) <= 1e-5 * max(1.0, abs(fd_s))


def test_unknown_form_rejected():
    with pytest.raises(ValueError):
        delta_form("form99", AFFINE, ExprVariation("t"), 0.0, 1.0)


def test_classical_el_vanishing_on_trajectory():
    """A trajectory of the stationarity equation has vanishing first
    variation against variations pinned to first order at the ends."""
    traj = integrate(Jet4(0.0, 0.0, 1.0, 0.4, 0.3), 1.0, 1e-11)
    u = TrajectoryCurve(traj)
    rng = np.random.default_rng(43)
    for _ in range(3):
        c0, c1 = (float(x) for x in rng.uniform(-1, 1, size=2))
        v = ExprVariation(f"t^2*(t - 1.0)^2*({c0!r} + {c1!r}*t)")
        fd = delta_fd("I_L", u, v, h=1e-4)
        assert abs(fd) <= 1e-5


# ---------------------------------------------------------------------------
# solve_du
# ---------------------------------------------------------------------------

def test_solve_du_on_line_is_antiderivative():
    u = ExprCurve("t", (0.0, 1.0))
    bump = BumpFn(0.5, 0.2, 1.0)
    v = solve_du(u, bump, 0.0)
    # for u = t the solution is the running integral of the bump
    from scipy.integrate import quad

    for t in (0.25, 0.5, 0.8):
        expected = quad(bump.value, 0.0, t, points=[0.3, 0.7], epsabs=1e-13)[0]
        assert abs(v.derivs3(t)[0] - expected) <= 1e-11
    assert v.residual() <= 1e-9


def test_solve_du_zero_data():
    u = ExprCurve("exp(2*t)", (0.0, 1.0))
    v = solve_du(u, ExprVariation("0"), 0.0)
    for t in (0.0, 0.3, 0.9):
        assert v.derivs3(t) == (0.0, 0.0, 0.0, 0.0)


def test_solve_du_kernel_element():
    u = ExprCurve("exp(2*t)", (0.0, 1.0))
    v = solve_du(u, ExprVariation("0"), u.jet(0.0).p)
    for t in (0.1, 0.5, 0.9):
        jet = u.jet(t)
        got = v.derivs3(t)
        assert abs(got[0] - jet.p) <= 1e-12 * jet.p
        assert abs(got[1] - jet.q) <= 1e-12 * jet.q


def test_solve_du_residual_random():
    rng = np.random.default_rng(44)
    for _ in range(50):
        u = random_mobius_curve(rng)
        t0, t1 = u.domain
        span = t1 - t0
        center = t0 + span * float(rng.uniform(0.35, 0.65))
        radius = span * float(rng.uniform(0.1, 0.25))
        bump = BumpFn(center, radius, float(rng.uniform(0.5, 1.5)))
        v = solve_du(u, bump, float(rng.uniform(-1, 1)))
        assert v.residual() <= 1e-9


# ---------------------------------------------------------------------------
# admissible variations
# ---------------------------------------------------------------------------

def test_admissible_balanced_bumps_need_no_glue():
    """On u = t with a phi that integrates to zero, the solved variation
    already meets the endpoint condition, so c = 0."""
    u = ExprCurve("t", (0.0, 1.0))
    phi = LinearCombination([(1.0, BumpFn(0.35, 0.12, 0.8)), (-1.0, BumpFn(0.7, 0.12, 0.8))])
    adm = admissible_variation(u, phi, 0.05)
    assert abs(adm.c) <= 1e-11
    assert adm.endpoint_residual() <= 1e-10


def test_quadratic_is_admissible_on_line():
    u = ExprCurve("t", (0.0, 1.0))
    w = ExprVariation("t^2")
    b0 = boundary_B(u.jet(0.0), w.var_jet(0.0))
    b1 = boundary_B(u.jet(1.0), w.var_jet(1.0))
    assert b0 == b1 == 2.0


def test_admissible_endpoint_condition_generic():
    u = ExprCurve("tan(t)", (0.1, 1.0))
    adm = admissible_variation(u, BumpFn(0.6, 0.15, 1.0), 0.045)
    assert adm.endpoint_residual() <= 1e-10
    assert adm.base.residual() <= 1e-9
    # the glue correction is O(eps)
    assert adm.glue_bound() * adm.eps <= 10.0 * adm.eps


def test_admissible_support_check():
    u = ExprCurve("t", (0.0, 1.0))
    with pytest.raises(ValueError):
        admissible_variation(u, BumpFn(0.1, 0.09, 1.0), 0.05)  # support starts left of eps


def test_admissible_infeasible_gain():
    # exp(a t) with a = (2 sqrt(3) - 4)/eps makes the glue's boundary
    # density vanish identically, so no c can meet the condition
    eps = 0.05
    a = (2.0 * math.sqrt(3.0) - 4.0) / eps
    u = ExprCurve(f"exp({a!r}*t)", (0.0, 1.0))
    with pytest.raises(InfeasibleVariationError):
        admissible_variation(u, BumpFn(0.5, 0.2, 1.0), eps)


# ---------------------------------------------------------------------------
# critical test
# ---------------------------------------------------------------------------

def test_critical_mobius_passes():
    u = MobiusCurve(MobiusFamily(2, 1, 1, 3, 0.0), (0.0, 1.0))
    report = critical_test(u, 0.0, 1.0, 12, seed=5)
    assert report.witness is None
    assert report.max_delta <= 1e-8
    assert report.is_critical


def test_critical_tan_fails_with_witness():
    u = ExprCurve("tan(t)", (0.1, 1.0))
    report = critical_test(u, 0.1, 1.0, 12, seed=5)
    assert report.witness is not None
    assert abs(report.witness["delta"]) > 1e-3
    assert report.max_endpoint_residual <= 1e-10
    assert report.max_du_residual <= 1e-9


def test_critical_exp_fails_with_witness():
    u = ExprCurve("exp(2*t)", (0.0, 1.0))
    report = critical_test(u, 0.0, 1.0, 12, seed=5)
    assert report.witness is not None
    assert abs(report.witness["delta"]) > 1e-3


def test_report_serialization():
    u = MobiusCurve(MobiusFamily(1, 0, 0, 1, 0.0), (0.0, 1.0))
    report = critical_test(u, 0.0, 1.0, 3, seed=1)
    payload = report.to_dict()
    assert set(payload) >= {"u", "interval", "n", "max_delta", "witness"}
    assert payload["witness"] is None


# ---------------------------------------------------------------------------
# variation realizations
# ---------------------------------------------------------------------------

def test_bump_derivatives_match_finite_differences():
    bump = BumpFn(0.5, 0.3, 1.2)
    h = 1e-6
    for t in (0.3, 0.45, 0.6, 0.74):
        v0, v1, v2, v3 = bump.derivs3(t)
        fd1 = (bump.value(t + h) - bump.value(t - h)) / (2 * h)
        fd2 = (bump.value(t + h) - 2 * bump.value(t) + bump.value(t - h)) / h ** 2
        assert abs(v1 - fd1) <= 1e-6 * max(1.0, abs(v1))
        assert abs(v2 - fd2) <= 1e-3 * max(1.0, abs(v2))
    assert bump.derivs3(0.19999) == (0.0, 0.0, 0.0, 0.0)
    assert bump.value(2.0) == 0.0
    assert bump.support == (0.2, 0.8)


def test_spline_variation():
    ts = np.linspace(0.0, 1.0, 9)
    vs = np.sin(2 * ts)
    spline = SplineVariation(ts, vs)
    v0, v1, _, _ = spline.derivs3(0.5)
    assert abs(v0 - math.sin(1.0)) <= 1e-3
    assert abs(v1 - 2 * math.cos(1.0)) <= 1e-2
    assert len(spline.breakpoints) == 7


def test_linear_combination():
    a = ExprVariation("t^2")
    b = ExprVariation("sin(t)")
    combo = LinearCombination([(2.0, a), (-1.0, b)])
    t = 0.7
    expected = tuple(2 * x - y for x, y in zip(a.derivs3(t), b.derivs3(t)))
    assert combo.derivs3(t) == pytest.approx(expected, abs=0, rel=1e-15)


def test_trajectory_curve_fourth():
    traj = integrate(Jet4(0, 0, 1, 0, 2), 1.0, 1e-10)
    u = TrajectoryCurve(traj)
    jet = u.jet(0.5)
    oracle = family_eval_jet(MobiusFamily(1, 0, 0, 1, 2.0), 0.5)
    assert abs(jet.u - oracle.u) <= 1e-8
    # fourth derivative from the equation itself
    from schwarzlab.schwarzian import el_rhs

    assert u.fourth(0.5) == el_rhs(jet)
