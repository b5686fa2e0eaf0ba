"""Generic contact-invariant engine for fourth-order ODEs u'''' = F(t,u,p,q,r):
the two generalized Wuenschmann invariants W0 and W1, and linearization along
a base solution.

Total derivatives of the partials F_p, F_q, F_r along the prolonged flow are
read off Taylor series of the formal solution through the jet, so the
invariants are exact to machine precision (no finite differences).  The k-th
total derivative of G is k! times coefficient k of G composed with the flow
series.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

from .closed_form import MobiusFamily, family_eval_jet
from .el_ode import Trajectory
from .schwarzian import EL_FIELD_TEXT, Jet4, schwarzian
from .symbolics import (
    Expr,
    TaylorScalar,
    differentiate,
    eval_scalar,
    formal_solution,
    parse,
    taylor_eval,
    variables_of,
)

# W0 needs three total derivatives of F_r; order 8 flow series leave two
# orders of headroom.
TAYLOR_ORDER = 8


@dataclass(frozen=True)
class OdeField:
    """A fourth-order right-hand side with its precomputed symbolic partials
    with respect to p, q, r."""

    F: Expr
    Fp: Expr
    Fq: Expr
    Fr: Expr

    @classmethod
    def from_expression(cls, source: Union[str, Expr]) -> "OdeField":
        F = parse(source) if isinstance(source, str) else source
        unknown = variables_of(F) - {"t", "u", "p", "q", "r"}
        if unknown:
            raise ValueError(f"field references unknown variables {sorted(unknown)}")
        return cls(F, differentiate(F, "p"), differentiate(F, "q"), differentiate(F, "r"))


def el_field() -> OdeField:
    """The field of the Schwarzian stationarity equation."""
    return OdeField.from_expression(EL_FIELD_TEXT)


def _flow_env(field: OdeField, j: Jet4) -> dict:
    env = formal_solution(field.F, j, TAYLOR_ORDER)
    env["t"] = TaylorScalar.variable(j.t, TAYLOR_ORDER)
    return env


def _total_derivs(expr: Expr, env: dict, k_max: int) -> list:
    """[G, dG/dt, ..., d^k G/dt^k] along the flow at the base point."""
    series = taylor_eval(expr, env)
    return [series.derivative(k) for k in range(k_max + 1)]


def w1(field: OdeField, j: Jet4) -> float:
    """First generalized Wuenschmann invariant:

    W1 = (9/4) F_r dF_r - (3/2) d2F_r + 3 dF_q - (3/8) F_r^3
         - (3/2) F_q F_r - 3 F_p
    """
    env = _flow_env(field, j)
    fr, dfr, d2fr = _total_derivs(field.Fr, env, 2)
    fq, dfq = _total_derivs(field.Fq, env, 1)
    fp = _total_derivs(field.Fp, env, 0)[0]
    return (
        2.25 * fr * dfr
        - 1.5 * d2fr
        + 3.0 * dfq
        - 0.375 * fr ** 3
        - 1.5 * fq * fr
        - 3.0 * fp
    )


def w0(field: OdeField, j: Jet4) -> float:
    """Second generalized Wuenschmann invariant:

    W0 = (11/1600) F_r^4 - (9/50) F_r^2 dF_r - (1/200) F_r^2 F_q
         + (21/100) (dF_r)^2 + (1/50) dF_r F_q - (9/100) F_q^2
         + (7/20) F_r d2F_r - (1/5) d3F_r + (3/10) d2F_q - (1/4) F_r dF_q
    """
    env = _flow_env(field, j)
    fr, dfr, d2fr, d3fr = _total_derivs(field.Fr, env, 3)
    fq, dfq, d2fq = _total_derivs(field.Fq, env, 2)
    return (
        (11.0 / 1600.0) * fr ** 4
        - 0.18 * fr ** 2 * dfr
        - 0.005 * fr ** 2 * fq
        + 0.21 * dfr ** 2
        + 0.02 * dfr * fq
        - 0.09 * fq ** 2
        + 0.35 * fr * d2fr
        - 0.2 * d3fr
        + 0.3 * d2fq
        - 0.25 * fr * dfq
    )


def invariants_at(field: OdeField, j: Jet4, with_schwarzian: bool = False) -> dict:
    """JSON-ready invariant record for one jet."""
    row = {"jet": list(j.as_tuple()), "W0": w0(field, j), "W1": w1(field, j)}
    if with_schwarzian:
        row["S"] = schwarzian(j)
    return row


BaseSolution = Union[MobiusFamily, Trajectory]


def _base_jet(base: BaseSolution, t: float) -> Jet4:
    if isinstance(base, MobiusFamily):
        return family_eval_jet(base, t)
    if isinstance(base, Trajectory):
        return base.jet_at(t)
    raise TypeError(f"base must be a MobiusFamily or Trajectory, got {type(base).__name__}")


def linearize(field: OdeField, base: BaseSolution, t: float) -> tuple:
    """Coefficients (a1, a2, a3) of the linearized equation
    v'''' = a3 v''' + a2 v'' + a1 v' along the base solution at time t;
    by construction a1 = F_p, a2 = F_q, a3 = F_r on the base jet."""
    jet = _base_jet(base, t)
    return (
        eval_scalar(field.Fp, jet),
        eval_scalar(field.Fq, jet),
        eval_scalar(field.Fr, jet),
    )


@dataclass(frozen=True)
class LinearizedOde:
    """The linear fourth-order equation governing infinitesimal perturbations
    of a fixed base solution, as coefficient functions of t."""

    a1: Callable
    a2: Callable
    a3: Callable

    @classmethod
    def along(cls, field: OdeField, base: BaseSolution) -> "LinearizedOde":
        return cls(
            a1=lambda t: eval_scalar(field.Fp, _base_jet(base, t)),
            a2=lambda t: eval_scalar(field.Fq, _base_jet(base, t)),
            a3=lambda t: eval_scalar(field.Fr, _base_jet(base, t)),
        )


def _derivs_to_4(fn: Union[str, Expr], t: float) -> list:
    """Value and first four derivatives of a t-only expression at t."""
    e = parse(fn) if isinstance(fn, str) else fn
    extra = variables_of(e) - {"t"}
    if extra:
        raise ValueError(f"basis function may only reference t, found {sorted(extra)}")
    series = taylor_eval(e, {"t": TaylorScalar.variable(t, 4)})
    return [series.derivative(k) for k in range(5)]


def verify_linear_basis(lin: LinearizedOde, basis: Sequence, ts: Sequence) -> float:
    """Max residual |v'''' - a3 v''' - a2 v'' - a1 v'| over basis x ts.
    Basis functions are t-only expressions (strings or Expr trees)."""
    worst = 0.0
    for fn in basis:
        for t in ts:
            v0, v1, v2, v3, v4 = _derivs_to_4(fn, t)
            resid = v4 - lin.a3(t) * v3 - lin.a2(t) * v2 - lin.a1(t) * v1
            worst = max(worst, abs(resid))
    return worst
