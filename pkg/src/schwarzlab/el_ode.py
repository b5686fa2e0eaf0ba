"""Adaptive integration of the fourth-order stationarity equation as a
first-order system on jets, with dense output and continuous monitoring of
the two first integrals.

The right-hand side blows up as u' -> 0, so integration stops gracefully
(status "stopped-near-singularity") when |p| decays below the floor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from scipy.integrate import solve_ivp

from .errors import SingularJetError
from .schwarzian import Jet4, mercator_c, schwarzian

SINGULARITY_FLOOR = 1e-8
TOL_MIN, TOL_MAX = 1e-13, 1e-3

STATUS_COMPLETED = "completed"
STATUS_STOPPED = "stopped-near-singularity"

CSV_HEADER = "t,u,p,q,r,S,C"


@dataclass(frozen=True)
class Trajectory:
    """A sampled numerical solution: every accepted step of the integrator,
    ascending in t, with per-sample first-integral values."""

    samples: tuple
    s_values: tuple
    c_values: tuple
    tolerance: float
    status: str
    dense: object = field(repr=False, compare=False, default=None)
    t_start: float = 0.0
    t_final: float = 0.0

    @property
    def final(self) -> Jet4:
        """The jet at the integration endpoint (t_final), which is
        samples[0] for backward runs."""
        return self.samples[-1] if self.t_final >= self.t_start else self.samples[0]

    def jet_at(self, t: float) -> Jet4:
        """Dense-output jet at any t inside the integration span."""
        lo, hi = min(self.t_start, self.t_final), max(self.t_start, self.t_final)
        if not (lo <= t <= hi):
            raise ValueError(f"t = {t} outside integration span [{lo}, {hi}]")
        u, p, q, r = self.dense(t)
        return Jet4(t, float(u), float(p), float(q), float(r))


def _rhs(t, y):
    p, q, r = y[1], y[2], y[3]
    return (p, q, r, -3.0 * q ** 3 / p ** 2 + 4.0 * q * r / p)


def _p_floor(t, y):
    return abs(y[1]) - SINGULARITY_FLOOR


_p_floor.terminal = True


def integrate(init: Jet4, t_end: float, tol: float) -> Trajectory:
    """Solve (u, p, q, r)' = (p, q, r, F) from init.t to t_end with adaptive
    local error control at tol.  Works in either time direction."""
    if not (TOL_MIN <= tol <= TOL_MAX):
        raise ValueError(f"tolerance {tol} outside [{TOL_MIN}, {TOL_MAX}]")
    if abs(init.p) < SINGULARITY_FLOOR:
        raise SingularJetError(f"singular initial jet (p = {init.p})")
    # internal safety factor so the accumulated endpoint error stays well
    # inside 10*tol relative to scale; 3e-14 is the float64 rtol floor
    inner = max(tol / 40.0, 3e-14)
    sol = solve_ivp(
        _rhs,
        (init.t, t_end),
        (init.u, init.p, init.q, init.r),
        method="RK45",
        rtol=inner,
        atol=inner,
        events=_p_floor,
        dense_output=True,
    )
    if sol.status < 0:
        raise RuntimeError(f"integration failed: {sol.message}")
    status = STATUS_STOPPED if sol.status == 1 else STATUS_COMPLETED
    ts, ys = sol.t, sol.y
    if ts[0] > ts[-1]:
        ts, ys = ts[::-1], ys[:, ::-1]
    samples = tuple(Jet4(float(t), *map(float, ys[:, i])) for i, t in enumerate(ts))
    s_values = tuple(schwarzian(j) for j in samples)
    c_values = tuple(mercator_c(j) for j in samples)
    return Trajectory(
        samples=samples,
        s_values=s_values,
        c_values=c_values,
        tolerance=tol,
        status=status,
        dense=sol.sol,
        t_start=init.t,
        t_final=float(sol.t[-1]),
    )


def invariant_drift(traj: Trajectory) -> tuple:
    """(max |S - S0|, max |C - C0|) over the trajectory samples, with the
    reference values taken at the start of integration."""
    if not traj.samples:
        raise ValueError("empty trajectory")
    i0 = 0 if traj.t_final >= traj.t_start else len(traj.samples) - 1
    s0, c0 = traj.s_values[i0], traj.c_values[i0]
    ds = max(abs(s - s0) for s in traj.s_values)
    dc = max(abs(c - c0) for c in traj.c_values)
    return (ds, dc)


def trajectory_csv(traj: Trajectory) -> str:
    """CSV body: header t,u,p,q,r,S,C, one row per sample, 17 significant
    digits, LF line endings."""
    lines = [CSV_HEADER]
    for jet, s, c in zip(traj.samples, traj.s_values, traj.c_values):
        row = (jet.t, jet.u, jet.p, jet.q, jet.r, s, c)
        lines.append(",".join(f"{x:.17g}" for x in row))
    return "\n".join(lines) + "\n"


def write_csv(traj: Trajectory, path, header_comment: str = "") -> None:
    with open(path, "w", newline="\n") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(trajectory_csv(traj))
