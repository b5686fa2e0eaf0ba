"""Exact solution families of the fourth-order equation, organised by the
constant value sigma of the Schwarzian along the solution.

A family is a Moebius transform of a generator g(t) that realises S(g) =
sigma:

    sigma < 0:  g(t) = exp(a t),    a = sqrt(-2 sigma)   (S(e^{at}) = -a^2/2)
    sigma = 0:  g(t) = t
    sigma > 0:  g(t) = tan(w t),    w = sqrt(sigma / 2)  (S(tan wt) = 2 w^2)

Moebius post-composition leaves the Schwarzian unchanged, so every member of
the family has S identically sigma.  Jets are computed by exact
differentiation of the closed form (Taylor arithmetic on the composite), not
by finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import EvalDomainError, SingularTimeError
from .schwarzian import Jet4, el_rhs, schwarzian
from .symbolics import TaylorScalar

# Half-width of the exclusion window around a pole when evaluating jets.
POLE_EPS = 1e-9
# Absolute accuracy of located singular times.
SINGULARITY_ACCURACY = 1e-12


@dataclass(frozen=True)
class MobiusFamily:
    """Moebius parameters (A, B, C, D) with AD - BC != 0, plus the target
    constant sigma realised by S(u)."""

    A: float
    B: float
    C: float
    D: float
    sigma: float

    def __post_init__(self):
        if self.determinant == 0.0:
            raise ValueError("degenerate Moebius parameters: AD - BC = 0")

    @property
    def determinant(self) -> float:
        return self.A * self.D - self.B * self.C

    @property
    def family_class(self) -> str:
        if self.sigma < 0:
            return "hyperbolic"
        if self.sigma > 0:
            return "elliptic"
        return "parabolic"

    def to_json(self) -> str:
        return json.dumps({"A": self.A, "B": self.B, "C": self.C, "D": self.D, "sigma": self.sigma})

    @classmethod
    def from_json(cls, text: str) -> "MobiusFamily":
        d = json.loads(text)
        return cls(d["A"], d["B"], d["C"], d["D"], d["sigma"])


def _generator(f: MobiusFamily, t: float):
    """Scalar value of the generator g at t, or None at a tan pole."""
    if f.sigma < 0:
        return math.exp(math.sqrt(-2.0 * f.sigma) * t)
    if f.sigma == 0:
        return t
    w = math.sqrt(f.sigma / 2.0)
    if abs(math.cos(w * t)) < 1e-15:
        return None
    return math.tan(w * t)


def _denominator(f: MobiusFamily, t: float):
    g = _generator(f, t)
    if g is None:
        return None
    return f.C * g + f.D


def family_series(f: MobiusFamily, t: float, order: int = 4) -> TaylorScalar:
    """Taylor series of the family member u at t; exact differentiation of
    the closed form."""
    tt = TaylorScalar.variable(t, order)
    if f.sigma < 0:
        g = (tt * math.sqrt(-2.0 * f.sigma)).exp()
    elif f.sigma == 0:
        g = tt
    else:
        try:
            g = (tt * math.sqrt(f.sigma / 2.0)).tan()
        except EvalDomainError:
            raise SingularTimeError(f"tan pole at t = {t}") from None
    den = f.C * g + f.D
    if abs(den.coeffs[0]) < POLE_EPS:
        raise SingularTimeError(f"Moebius denominator vanishes at t = {t}")
    return (f.A * g + f.B) / den


def family_eval_jet(f: MobiusFamily, t: float) -> Jet4:
    """The 3-jet of the family member at t."""
    s = family_series(f, t, order=3)
    return Jet4(t, s.coeffs[0], s.derivative(1), s.derivative(2), s.derivative(3))


def family_fourth(f: MobiusFamily, t: float) -> float:
    """u''''(t) from exact differentiation of the closed form."""
    return family_series(f, t, order=4).derivative(4)


def _tan_poles(f: MobiusFamily, t0: float, t1: float):
    if f.sigma <= 0:
        return []
    w = math.sqrt(f.sigma / 2.0)
    # poles of tan(w t) at w t = pi/2 + k pi
    k0 = math.ceil((w * t0 - math.pi / 2.0) / math.pi)
    poles = []
    k = k0
    while True:
        t = (math.pi / 2.0 + k * math.pi) / w
        if t > t1:
            break
        if t >= t0:
            poles.append(t)
        k += 1
    return poles


def _bisect_zero(fn, a: float, b: float) -> float:
    fa, fb = fn(a), fn(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    while b - a > SINGULARITY_ACCURACY:
        m = 0.5 * (a + b)
        fm = fn(m)
        if fm == 0.0:
            return m
        if (fa < 0) != (fm < 0):
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def family_singularities(f: MobiusFamily, t0: float, t1: float) -> list:
    """All singular times of the family member in [t0, t1]: zeros of the
    Moebius denominator and poles of the tan generator, sorted ascending.

    The denominator is monotone between generator poles, so each pole-free
    subinterval holds at most one zero, located by bisection.
    """
    if t0 >= t1:
        raise ValueError(f"need t0 < t1, got [{t0}, {t1}]")
    poles = _tan_poles(f, t0, t1)
    found = list(poles)
    if f.C != 0.0:
        edges = [t0] + poles + [t1]
        nudge = 1e-9 * max(1.0, t1 - t0)
        for a, b in zip(edges[:-1], edges[1:]):
            aa = a + nudge if a in poles else a
            bb = b - nudge if b in poles else b
            if aa >= bb:
                continue
            da, db = _denominator(f, aa), _denominator(f, bb)
            if da is None or db is None:
                continue
            if da == 0.0:
                found.append(aa)
            elif db == 0.0:
                found.append(bb)
            elif (da < 0) != (db < 0):
                found.append(_bisect_zero(lambda t: _denominator(f, t), aa, bb))
    return sorted(found)


@dataclass(frozen=True)
class VerifyReport:
    """Maximum residuals of a family over a sample window."""

    max_schwarzian_residual: float
    max_ode_residual: float
    samples: int
    window: tuple

    def to_dict(self) -> dict:
        return {
            "max_schwarzian_residual": self.max_schwarzian_residual,
            "max_ode_residual": self.max_ode_residual,
            "samples": self.samples,
            "window": list(self.window),
        }


def family_verify(f: MobiusFamily, samples: int, t0: float, t1: float) -> VerifyReport:
    """Check |S(jet) - sigma| and |u'''' - el_rhs(jet)| on an even sample of
    [t0, t1].  The window must avoid singular times."""
    if samples < 2:
        raise ValueError("need at least 2 samples")
    max_s = 0.0
    max_f = 0.0
    for i in range(samples):
        t = t0 + (t1 - t0) * i / (samples - 1)
        s = family_series(f, t, order=4)
        jet = Jet4(t, s.coeffs[0], s.derivative(1), s.derivative(2), s.derivative(3))
        max_s = max(max_s, abs(schwarzian(jet) - f.sigma))
        max_f = max(max_f, abs(s.derivative(4) - el_rhs(jet)))
    return VerifyReport(max_s, max_f, samples, (t0, t1))
