"""Steering between points: analytic constructions per normal form, barrier
certificates, and a random-shooting fallback.

All analytic work happens in the coordinates of the working normal form.  For
reversed normal forms (b > 0 in the segment and cone cases) the forward
problem p -> q is the backward problem q -> p of the working system; the
resulting control is replayed in reverse order with negated levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .. import kernels
from ..classify import admissible_ray_set, control_for_slope, ray_slope
from ..core import GroupPoint, NormalForm, NormalFormTag, SystemParams
from ..flows import PiecewiseControl, flow_endpoint, normal_form

__all__ = ["SteeringResult", "steer", "barrier_certificate", "cone_barriers"]

# Relative tolerance for barrier comparisons; a certificate must be robust to rounding.
_BARRIER_TOL = 1e-12


@dataclass(frozen=True)
class SteeringResult:
    found: bool
    control: PiecewiseControl
    terminal_error: float
    expansions: int
    method: str  # trivial | analytic | shooting | barrier-certified | budget-exhausted
    certificate: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "found": self.found,
            "control": self.control.to_list(),
            "terminal_error": self.terminal_error,
            "expansions": self.expansions,
            "method": self.method,
            "certificate": self.certificate,
        }


def _dist(p: GroupPoint, q: GroupPoint) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def _working_pair(nf: NormalForm, p: GroupPoint, q: GroupPoint):
    s = nf.psi.map_xy(p.x, p.y)
    g = nf.psi.map_xy(q.x, q.y)
    return (g, s) if nf.reversed else (s, g)


def _coeffs(nf: NormalForm):
    q = nf.params
    return nf.case, q.a, q.b, q.alpha, q.beta


class _Builder:
    """Accumulates constant segments while tracking the normal-coordinate state."""

    def __init__(self, nf: NormalForm, x: float, y: float):
        self.nf = nf
        self.coeffs = _coeffs(nf)
        self.x, self.y = x, y
        self.segments: list[tuple[float, float]] = []

    def run(self, dt: float, u: float) -> None:
        if dt < 0:
            raise ValueError(f"negative dwell time {dt!r}")
        if dt == 0:
            return
        self.x, self.y = kernels.nf_flow(*self.coeffs, self.x, self.y, u, dt)
        self.segments.append((dt, u))

    def preview(self, dt: float, u: float) -> tuple[float, float]:
        return kernels.nf_flow(*self.coeffs, self.x, self.y, u, dt)

    def control(self) -> PiecewiseControl:
        return PiecewiseControl(tuple(self.segments))


def _fastest(q: SystemParams, sign: float) -> float:
    """Omega endpoint u with sign(u alpha) == sign and largest |u alpha|."""
    return q.omega_hi if (q.alpha > 0) == (sign > 0) else q.omega_lo


def cone_barriers(q: SystemParams) -> tuple[float | None, float | None]:
    """(lower slope, upper slope) of the cone of a b < 0 cone form; ``None`` when absent."""
    bset = admissible_ray_set(q)
    lo = ray_slope(bset.lo, q.alpha, q.b).m if bset.lo_closed else None
    hi = ray_slope(bset.hi, q.alpha, q.b).m if bset.hi_closed else None
    return lo, hi


def barrier_certificate(nf: NormalForm, start, goal) -> str | None:
    """Reason why ``goal`` is not reachable from ``start`` (working coordinates), if provable."""
    q = nf.params
    (xs, ys), (xg, yg) = start, goal
    tag = nf.tag
    if tag in (NormalFormTag.VERTICAL_DRIFT, NormalFormTag.SEGMENT):
        if xs != xg:
            return "x-coordinate is invariant under every control"
        if tag is NormalFormTag.VERTICAL_DRIFT:
            rates = [q.a * (xs - 1.0) + u * xs * q.beta for u in q.omega]
            if yg > ys and max(rates) <= 0:
                return "y cannot increase on this vertical line"
            if yg < ys and min(rates) >= 0:
                return "y cannot decrease on this vertical line"
            return None
        eq = sorted(-u * q.beta * xs / q.b for u in q.omega)
        if yg > max(ys, eq[1]) or yg < min(ys, eq[0]):
            return "goal lies outside the hull of the start and the attracting equilibria"
        return None
    if tag is NormalFormTag.SADDLE:
        if (ys > 0) != (yg > 0) or (ys < 0) != (yg < 0):
            return "sign of the normal-form y-coordinate is invariant"
        if ys == 0:
            return None
        T = math.log(yg / ys) / q.b
        if T < 0:
            return "|y| evolves monotonically in the wrong direction"
        need = math.log(xg / xs) / q.alpha
        lo, hi = q.omega_lo * T, q.omega_hi * T
        if not (lo * (1 + _BARRIER_TOL) - 1e-300 <= need <= hi * (1 + _BARRIER_TOL) + 1e-300):
            return "x-coordinate cannot be matched within the time fixed by y"
        return None
    if tag is NormalFormTag.CONE:
        lo, hi = cone_barriers(q)
        scale = _BARRIER_TOL * (1.0 + abs(ys) + abs(yg) + xs + xg)
        if hi is not None:
            hs, hg = ys - hi * xs, yg - hi * xg
            if hg > max(hs, 0.0) + scale:
                return "upper boundary ray: y - m x can only decay toward the cone"
        if lo is not None:
            ks, kg = lo * xs - ys, lo * xg - yg
            if kg > max(ks, 0.0) + scale:
                return "lower boundary ray: m x - y can only decay toward the cone"
    return None


def _steer_drift(nf, start, goal):
    q = nf.params
    (x, ys), (_, yg) = start, goal
    dy = yg - ys
    if dy == 0:
        return PiecewiseControl()
    best = max(q.omega, key=lambda u: (q.a * (x - 1.0) + u * x * q.beta) * math.copysign(1.0, dy))
    rate = q.a * (x - 1.0) + best * x * q.beta
    if rate * dy <= 0:
        return None
    return PiecewiseControl.of((dy / rate, best))


def _steer_segment(nf, start, goal):
    q = nf.params
    (x, ys), (_, yg) = start, goal
    if yg == ys:
        return PiecewiseControl()
    # y - e_u = e^{bt} (y0 - e_u) with e_u = -u beta x / b; pick e_u beyond the goal
    eqs = {u: -u * q.beta * x / q.b for u in q.omega}
    u = max(eqs, key=lambda v: eqs[v]) if yg > ys else min(eqs, key=lambda v: eqs[v])
    e = eqs[u]
    ratio = (yg - e) / (ys - e)
    if not 0 < ratio < 1:
        return None
    return PiecewiseControl.of((math.log(ratio) / q.b, u))


def _steer_saddle(nf, start, goal):
    q = nf.params
    (xs, ys), (xg, yg) = start, goal
    k = math.log(xg / xs)
    if ys == 0 and yg == 0:
        if k == 0:
            return PiecewiseControl()
        u = _fastest(q, k)
        return PiecewiseControl.of((k / (u * q.alpha), u))
    if ys * yg <= 0:
        return None
    T = math.log(yg / ys) / q.b
    if T == 0:
        return PiecewiseControl() if k == 0 else None
    if T < 0:
        return None
    u = k / (q.alpha * T)
    u = min(max(u, q.omega_lo), q.omega_hi)
    return PiecewiseControl.of((T, u))


def _steer_shear(nf, start, goal):
    """Two-phase construction: cross x = 1 with an extreme control, adjust y by drifting."""
    q = nf.params
    b = _Builder(nf, *start)
    xg, yg = goal

    def go_x(xt):
        if xt == b.x:
            return
        k = math.log(xt / b.x)
        u = _fastest(q, k)
        b.run(k / (u * q.alpha), u)

    def transit(xt):
        k = math.log(xt / b.x)
        u = _fastest(q, k)
        return k / (u * q.alpha), u

    if xg == 1.0:
        # approach x = 1 from below along a transit whose y-increment is known
        low = 0.5
        k = math.log(1.0 / low)
        u = _fastest(q, k)
        dt = k / (u * q.alpha)
        _, y_end = kernels.nf_flow(*_coeffs(nf), low, 0.0, u, dt)
        head = _steer_shear(nf, start, (low, yg - y_end))
        return head + PiecewiseControl.of((dt, u))
    if xg > 1.0:
        if b.x >= 1.0:
            go_x(0.5)
        dt, u = transit(xg)
        _, y_arr = b.preview(dt, u)
        if y_arr <= yg:
            b.run(dt, u)
            b.run((yg - y_arr) / (xg - 1.0), 0.0)
        else:
            b.run((y_arr - yg) / (1.0 - b.x), 0.0)
            b.run(dt, u)
    else:
        if b.x <= 1.0:
            go_x(2.0)
        dt, u = transit(xg)
        _, y_arr = b.preview(dt, u)
        if y_arr >= yg:
            b.run(dt, u)
            b.run((y_arr - yg) / (1.0 - xg), 0.0)
        else:
            b.run((yg - y_arr) / (b.x - 1.0), 0.0)
            b.run(dt, u)
    return b.control()


def _ratio_time(q: SystemParams, r0: float, r1: float, u: float) -> float | None:
    """Time for the ratio y/x to move from ``r0`` to ``r1`` under constant ``u`` (cone form).

    The ratio obeys r' = u beta + (b - u alpha) r, so it relaxes toward (or is
    repelled from) the ray slope m_u; at u alpha = b it moves linearly.
    """
    delta = u * q.alpha - q.b
    if delta == 0.0:
        rate = u * q.beta
        t = (r1 - r0) / rate if rate != 0.0 else -1.0
        return t if t > 0 else None
    mu = u * q.beta / delta
    num, den = r0 - mu, r1 - mu
    if num == 0.0 or den == 0.0 or (num > 0) != (den > 0):
        return None
    t = math.log(num / den) / delta
    return t if t > 0 and math.isfinite(t) else None


def _steer_cone(nf, start, goal):
    """Ray-to-ray transitions plus one scaling dwell along an invariant ray.

    Constant-control flows of the cone form are homogeneous of degree one, so
    dwelling on an invariant ray multiplies the final point by the same factor
    wherever the dwell is inserted.
    """
    q = nf.params
    bset = admissible_ray_set(q)
    m_lo, m_hi = cone_barriers(q)
    lo_lim = -math.inf if m_lo is None else m_lo
    hi_lim = math.inf if m_hi is None else m_hi
    (xs, ys), (xg, yg) = start, goal
    s1, s2 = ys / xs, yg / xg
    if not lo_lim <= s2 <= hi_lim:
        return None

    def transition_controls(m_target, up):
        us = [q.omega_lo, q.omega_hi, 0.0]
        if up and m_hi is None or not up and m_lo is None:
            m = m_target + (1 if up else -1) * max(1.0, abs(m_target))
            us.append(control_for_slope(m, q.alpha, q.b))
        return [u for u in us if q.omega_lo <= u <= q.omega_hi]

    def transition(builder, m_target):
        m_now = builder.y / builder.x
        if m_now == m_target:
            return True
        best = None
        for u in transition_controls(m_target, m_target > m_now):
            t = _ratio_time(q, m_now, m_target, u)
            if t is not None and (best is None or t < best[0]):
                best = (t, u)
        if best is None:
            return False
        builder.run(*best)
        return True

    def ray_control(m):
        if not lo_lim < m < hi_lim:
            return None
        u = control_for_slope(m, q.alpha, q.b)
        return u if bset.interior_contains(u) and u != 0.0 else None

    # intermediate rays whose constant control grows (resp. shrinks) x
    grow = shrink = None
    for sign in (1.0, -1.0):
        wa = 0.5 * _fastest(q, sign) * q.alpha
        if sign < 0:
            wa = max(wa, 0.5 * q.b)
        w = wa / q.alpha
        if w in bset and w != 0.0:
            if sign > 0:
                grow = ray_slope(w, q.alpha, q.b).m
            else:
                shrink = ray_slope(w, q.alpha, q.b).m
    mids = [m for m in (grow, shrink) if m is not None]
    routes = [[s1, s2]] + [[s1, m, s2] for m in mids]
    if len(mids) == 2:
        routes += [[s1, mids[0], mids[1], s2], [s1, mids[1], mids[0], s2]]

    best = None
    for route in routes:
        dry = _Builder(nf, xs, ys)
        if not all(transition(dry, m) for m in route[1:]):
            continue
        lam = xg / dry.x
        if lam == 1.0:
            return dry.control()
        want = 1.0 if lam > 1.0 else -1.0
        for i, m in enumerate(route):
            u = ray_control(m)
            if u is None or (u * q.alpha > 0) != (want > 0):
                continue
            tau = math.log(lam) / (u * q.alpha)
            real = _Builder(nf, xs, ys)
            if i == 0:
                real.run(tau, u)
            ok = True
            for j, mm in enumerate(route[1:], start=1):
                ok = transition(real, mm)
                if not ok:
                    break
                if j == i:
                    real.run(tau, u)
            # shortest plans replay most accurately, above all backwards in time
            if ok and (best is None or real.control().duration < best.duration):
                best = real.control()
    return best


_ANALYTIC = {
    NormalFormTag.VERTICAL_DRIFT: _steer_drift,
    NormalFormTag.SEGMENT: _steer_segment,
    NormalFormTag.SADDLE: _steer_saddle,
    NormalFormTag.SHEAR: _steer_shear,
    NormalFormTag.CONE: _steer_cone,
}


def _clamp_levels(ctrl: PiecewiseControl, sys: SystemParams) -> PiecewiseControl:
    # rounding in the normal-form construction can push a level an ulp outside Omega
    return PiecewiseControl(
        tuple((dt, min(max(u, sys.omega_lo), sys.omega_hi)) for dt, u in ctrl)
    )


def _shoot(sys: SystemParams, p: GroupPoint, q: GroupPoint, eps: float, budget: int, rng, init=None):
    """Random bang-bang controls refined by a step-halving search on log dwell times.

    ``init``, when given, is refined first (e.g. an analytic control spoiled by rounding).
    """
    levels = np.array([sys.omega_lo, 0.0, sys.omega_hi])
    spent = 0
    best = (math.inf, PiecewiseControl())

    def err(ctrl):
        try:
            return _dist(flow_endpoint(sys, p, ctrl), q)
        except (ValueError, OverflowError):
            return math.inf

    while spent < budget:
        if init is not None and len(init):
            us, logs = init.levels, np.log(init.dts)
            k, init = len(us), None
        else:
            k = int(rng.integers(1, 5))
            us = levels[rng.integers(0, 3, size=k)]
            logs = np.log(rng.uniform(0.05, 3.0, size=k))
        cur = PiecewiseControl(tuple(zip(np.exp(logs), us)))
        e = err(cur)
        spent += 1
        step = 1.0
        while step > 1e-7 and spent < budget and e > eps:
            improved = False
            for i in range(k):
                for d in (step, -step):
                    trial = logs.copy()
                    trial[i] += d
                    cand = PiecewiseControl(tuple(zip(np.exp(trial), us)))
                    ce = err(cand)
                    spent += 1
                    if ce < e:
                        logs, cur, e, improved = trial, cand, ce, True
                        break
                if spent >= budget:
                    break
            if not improved:
                step *= 0.5
        if e < best[0]:
            best = (e, cur)
        if e <= eps:
            break
    return best[0], best[1], spent


def steer(
    sys: SystemParams,
    p: GroupPoint,
    q: GroupPoint,
    eps: float = 1e-2,
    budget: int = 2000,
    seed: int | np.random.Generator = 0,
) -> SteeringResult:
    """Search for a piecewise-constant control taking ``p`` to within ``eps`` of ``q``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if budget < 1:
        raise ValueError("budget must be positive")
    if p == q:
        return SteeringResult(True, PiecewiseControl(), 0.0, 0, "trivial")
    nf = normal_form(sys)
    start, goal = _working_pair(nf, p, q)
    cert = barrier_certificate(nf, start, goal)
    if cert is not None:
        return SteeringResult(False, PiecewiseControl(), _dist(p, q), 0, "barrier-certified", cert)
    expansions = 0
    seed_ctrl = None
    try:
        ctrl = _ANALYTIC[nf.tag](nf, start, goal)
    except (ValueError, OverflowError, ZeroDivisionError):
        ctrl = None
    if ctrl is not None:
        expansions += 1
        if nf.reversed:
            ctrl = ctrl.reversed_negated()
        ctrl = _clamp_levels(ctrl, sys)
        try:
            e = _dist(flow_endpoint(sys, p, ctrl), q)
        except (ValueError, OverflowError):
            e = math.inf
        if e <= eps:
            return SteeringResult(True, ctrl, e, expansions, "analytic")
        seed_ctrl = ctrl
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    e, ctrl, spent = _shoot(sys, p, q, eps, budget - expansions, rng, seed_ctrl)
    expansions += spent
    if e <= eps:
        return SteeringResult(True, ctrl, e, expansions, "shooting")
    return SteeringResult(False, ctrl, e, expansions, "budget-exhausted")
