"""Empirical checks of classified control sets.

* :func:`reach_sample` approximates positive orbits by random bang-bang-biased controls.
* :func:`verify_control_set` steers between interior pairs in both directions and
  tests invariance by flowing sampled members forward, backward or both.
* :func:`escape_check`, :func:`decay_to_cone_check` and :func:`barrier_check` probe
  the behaviour outside a control set.

Every random draw comes from a generator keyed on ``(seed, kind, index)`` so
results do not depend on scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .. import kernels
from ..classify import (
    Cone,
    ControlSetDescription,
    Invariance,
    Line,
    VerticalLines,
    VerticalSegments,
    WholeGroup,
)
from ..core import GroupPoint, NormalFormTag, SystemParams, invert_automorphism, time_reverse
from ..flows import PiecewiseControl, flow_constant, flow_endpoint, normal_form, rk4_flow
from .steering import SteeringResult, cone_barriers, steer

__all__ = [
    "DEFAULT_VIEWPORT",
    "PointCloud",
    "VerificationReport",
    "reach_sample",
    "verify_control_set",
    "escape_check",
    "decay_to_cone_check",
    "barrier_check",
    "thread_count",
]

DEFAULT_VIEWPORT = (0.1, 10.0, -10.0, 10.0)
INVARIANCE_SLACK = 1e-9
MAX_SEGMENTS = 32

# stream identifiers for per-task generators
_PAIRS, _INVARIANCE, _ESCAPE, _DECAY, _BARRIER = range(5)


def thread_count() -> int:
    env = os.environ.get("SOLVLIN_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("SOLVLIN_THREADS must be a positive integer")
        return n
    return min(4, os.cpu_count() or 1)


def _rng(seed: int, kind: int, idx: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, kind, idx])


def _random_controls(rng, omega: tuple[float, float], horizon: float, n: int):
    """(dts, us) of shape (n, MAX_SEGMENTS); dwell times stop at the horizon."""
    lo, hi = omega
    dts = rng.uniform(0.0, horizon / 4.0, size=(n, MAX_SEGMENTS))
    # uniform(0, h) can return 0; the interval is (0, h]
    dts = horizon / 4.0 - dts
    ends = np.cumsum(dts, axis=1)
    dts = np.clip(np.minimum(ends, horizon) - (ends - dts), 0.0, None)
    bang = rng.random((n, MAX_SEGMENTS)) < 0.75
    extreme = np.array([lo, 0.0, hi])[rng.integers(0, 3, size=(n, MAX_SEGMENTS))]
    us = np.where(bang, extreme, rng.uniform(lo, hi, size=(n, MAX_SEGMENTS)))
    return dts, us


@dataclass(frozen=True)
class PointCloud:
    """Endpoints of sampled trajectories plus the states at every switch."""

    end_x: np.ndarray
    end_y: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.end_x)


def _batch_flow(sys: SystemParams, p: GroupPoint, dts: np.ndarray, us: np.ndarray):
    nf = normal_form(sys)
    q = nf.params
    x0, y0 = nf.psi.map_xy(p.x, p.y)
    sgn = -1.0 if nf.reversed else 1.0
    n = dts.shape[0]
    xs, ys = kernels.flow_batch(
        nf.case, q.a, q.b, q.alpha, q.beta,
        np.full(n, x0), np.full(n, y0), dts, sgn * us, sgn,
    )
    return invert_automorphism(nf.psi).map_xy(xs, ys)


def reach_sample(sys: SystemParams, p: GroupPoint, horizon: float, n: int, seed: int = 0) -> PointCloud:
    """Monte-Carlo approximation of the positive orbit of ``p`` up to ``horizon``."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        empty = np.empty(0)
        return PointCloud(empty, empty, empty, empty)
    dts, us = _random_controls(_rng(seed, _PAIRS), sys.omega, horizon, n)
    xs, ys = _batch_flow(sys, p, dts, us)
    return PointCloud(xs[:, -1].copy(), ys[:, -1].copy(), xs.ravel(), ys.ravel())


@dataclass
class VerificationReport:
    pairs_tested: int = 0
    pairs_steered: int = 0
    invariance_samples: int = 0
    invariance_violations: int = 0
    escape_witnesses: list[dict[str, Any]] = field(default_factory=list)
    max_terminal_error: float = 0.0
    max_rk4_error: float = 0.0
    pairs: list[dict[str, Any]] = field(default_factory=list)
    settings: dict[str, Any] = field(default_factory=dict)

    @property
    def violations(self) -> int:
        """Invariance violations plus pairs that could not be steered both ways."""
        return self.invariance_violations + (self.pairs_tested - self.pairs_steered)

    @property
    def clean(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "pairs_tested": self.pairs_tested,
            "pairs_steered": self.pairs_steered,
            "invariance_samples": self.invariance_samples,
            "invariance_violations": self.invariance_violations,
            "escape_witnesses": self.escape_witnesses,
            "max_terminal_error": self.max_terminal_error,
            "max_rk4_error": self.max_rk4_error,
            "violations": self.violations,
            "settings": self.settings,
            "pairs": self.pairs,
        }


# --- sampling members of a description -------------------------------------


def _family_xs(desc, viewport, lines: int) -> np.ndarray:
    x0, x1 = viewport[0], viewport[1]
    if isinstance(desc, VerticalLines):
        x0, x1 = max(x0, desc.lo), min(x1, desc.hi)
    if not x0 < x1:
        raise ValueError("the viewport misses the family of control sets")
    # interior, evenly spaced
    return x0 + (x1 - x0) * (np.arange(1, lines + 1) / (lines + 1))


def _y_range(desc, x: float, viewport, margin: float) -> tuple[float, float]:
    y0, y1 = viewport[2], viewport[3]
    if isinstance(desc, VerticalSegments):
        lo, hi = desc.endpoints(x)
        w = hi - lo
        return lo + margin * w, hi - margin * w
    if isinstance(desc, Cone):
        lo, hi = desc.lower_at(x), desc.upper_at(x)
        if lo is not None:
            y0 = max(y0, lo)
        if hi is not None:
            y1 = min(y1, hi)
        w = y1 - y0
        return y0 + margin * w, y1 - margin * w
    return y0, y1


def _sample_member(desc, rng, viewport, member_x: float | None, margin: float) -> GroupPoint:
    """A point of the set (interior for full-dimensional sets, away from the viewport edge)."""
    x0, x1 = viewport[0], viewport[1]
    if member_x is not None:
        x = member_x
    elif isinstance(desc, Line):
        x = float(np.exp(rng.uniform(np.log(x0), np.log(x1))))
        return GroupPoint(x, desc.slope * (x - 1.0))
    else:
        for _ in range(10_000):
            x = float(rng.uniform(x0, x1))
            lo, hi = _y_range(desc, x, viewport, margin)
            if lo < hi:
                break
        else:
            raise ValueError("the viewport contains no interior points of the control set")
    lo, hi = _y_range(desc, x, viewport, margin)
    if not lo < hi:
        raise ValueError(f"no interior points above x = {x!r} in the viewport")
    return GroupPoint(x, float(rng.uniform(lo, hi)))


def _same_member(desc, p: GroupPoint, img: GroupPoint, slack: float) -> bool:
    if not desc.contains(img, slack):
        return False
    if isinstance(desc, (VerticalLines, VerticalSegments)):
        return abs(img.x - p.x) <= slack * max(1.0, p.x)
    return True


# --- pair steering ----------------------------------------------------------


def _replay(sys: SystemParams, p: GroupPoint, q: GroupPoint, res: SteeringResult, rk4_h: float):
    rec = res.to_dict()
    if not res.found:
        rec["replay_error"] = None
        rec["rk4_error"] = None
        return rec
    end = flow_endpoint(sys, p, res.control)
    rec["replay_error"] = math.hypot(end.x - q.x, end.y - q.y)
    try:
        fin = rk4_flow(sys, p, res.control, h=rk4_h).final if len(res.control) else p
        rec["rk4_error"] = math.hypot(fin.x - q.x, fin.y - q.y)
    except FloatingPointError:
        rec["rk4_error"] = math.inf
    return rec


def _pair_task(args):
    sys, desc, idx, seed, eps, budget, viewport, member_xs, margin, rk4_h = args
    rng = _rng(seed, _PAIRS, idx)
    mx = None if member_xs is None else float(member_xs[idx % len(member_xs)])
    p = _sample_member(desc, rng, viewport, mx, margin)
    q = _sample_member(desc, rng, viewport, mx, margin)
    legs = {}
    for name, (a, b) in (("forward", (p, q)), ("backward", (q, p))):
        res = steer(sys, a, b, eps=eps, budget=budget, seed=rng)
        legs[name] = _replay(sys, a, b, res, rk4_h)
    ok = all(
        leg["found"] and leg["replay_error"] <= eps and leg["rk4_error"] <= 2 * eps
        for leg in legs.values()
    )
    return {"index": idx, "p": [p.x, p.y], "q": [q.x, q.y], "steered": ok, **legs}


# --- invariance ---------------------------------------------------------------


def _invariance_task(args):
    sys, desc, idx, seed, viewport, member_xs, horizon = args
    rng = _rng(seed, _INVARIANCE, idx)
    mx = None if member_xs is None else float(member_xs[idx % len(member_xs)])
    # every tenth point sits on the boundary of a bounded member
    margin = 0.0 if idx % 10 == 0 else 1e-3
    p = _sample_member(desc, rng, viewport, mx, margin)
    u = float(rng.uniform(*sys.omega))
    t = float(horizon - rng.uniform(0.0, horizon))
    out = []
    directions = {
        Invariance.POSITIVE: ("forward",),
        Invariance.NEGATIVE: ("backward",),
        Invariance.BOTH: ("forward", "backward"),
    }[desc.invariance]
    for d in directions:
        if d == "forward":
            img = flow_constant(sys, p, u, t)
        else:
            img = flow_constant(time_reverse(sys), p, -u, t)
        if not _same_member(desc, p, img, INVARIANCE_SLACK):
            out.append({
                "point": [p.x, p.y],
                "control": [[t, u]],
                "direction": d,
                "image": [img.x, img.y],
            })
    return len(directions), out


def verify_control_set(
    sys: SystemParams,
    desc: ControlSetDescription,
    pairs: int = 10,
    eps: float = 1e-2,
    seed: int = 0,
    invariance_samples: int = 1000,
    budget: int = 2000,
    viewport: Sequence[float] = DEFAULT_VIEWPORT,
    lines: int = 5,
    horizon: float = 5.0,
    rk4_h: float = 1e-3,
    workers: int | None = None,
) -> VerificationReport:
    """Steer between interior pairs both ways and test invariance by sampling.

    For families of control sets (vertical lines, vertical segments) pairs are
    drawn on ``lines`` members inside the viewport and images must stay on the
    member they started from.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if pairs < 0 or invariance_samples < 0:
        raise ValueError("sample counts must be non-negative")
    viewport = tuple(float(v) for v in viewport)
    if not (0 < viewport[0] < viewport[1] and viewport[2] < viewport[3]):
        raise ValueError("viewport must satisfy 0 < x0 < x1 and y0 < y1")
    member_xs = None
    if isinstance(desc, (VerticalLines, VerticalSegments)):
        member_xs = _family_xs(desc, viewport, lines)
    workers = workers or thread_count()
    pair_args = [
        (sys, desc, i, seed, eps, budget, viewport, member_xs, 1e-3, rk4_h) for i in range(pairs)
    ]
    inv_args = [
        (sys, desc, i, seed, viewport, member_xs, horizon) for i in range(invariance_samples)
    ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pair_recs = list(pool.map(_pair_task, pair_args))
        inv = list(pool.map(_invariance_task, inv_args))

    rep = VerificationReport(settings={
        "pairs": pairs, "eps": eps, "seed": seed, "budget": budget,
        "invariance_samples": invariance_samples, "viewport": list(viewport),
        "lines": lines, "horizon": horizon, "rk4_h": rk4_h,
        "invariance_slack": INVARIANCE_SLACK,
    })
    rep.pairs = pair_recs
    rep.pairs_tested = len(pair_recs)
    rep.pairs_steered = sum(r["steered"] for r in pair_recs)
    for r in pair_recs:
        for leg in (r["forward"], r["backward"]):
            if leg["replay_error"] is not None:
                rep.max_terminal_error = max(rep.max_terminal_error, leg["replay_error"])
                rep.max_rk4_error = max(rep.max_rk4_error, leg["rk4_error"])
    for count, wits in inv:
        rep.invariance_samples += count
        rep.invariance_violations += len(wits)
        rep.escape_witnesses.extend(wits)
    return rep


# --- behaviour outside control sets ------------------------------------------


@dataclass(frozen=True)
class EscapeReport:
    x: float
    direction: int  # -1: y must decrease, +1: y must increase, 0: no monotone drift
    trajectories: int
    monotone: bool
    witnesses: list[dict[str, Any]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "x": self.x, "direction": self.direction, "trajectories": self.trajectories,
            "monotone": self.monotone, "witnesses": self.witnesses,
        }


def escape_check(
    sys: SystemParams, x: float, y0: float = 0.0, n: int = 100, horizon: float = 5.0, seed: int = 0
) -> EscapeReport:
    """On a vertical line with one-signed drift, check y is strictly monotone along random controls."""
    nf = normal_form(sys)
    if nf.tag is not NormalFormTag.VERTICAL_DRIFT:
        raise ValueError("escape check applies to systems with alpha = a alpha + b beta = 0")
    rates = [sys.a * (x - 1.0) + u * x * sys.beta for u in sys.omega]
    if max(rates) < 0:
        direction = -1
    elif min(rates) > 0:
        direction = 1
    else:
        direction = 0
    dts, us = _random_controls(_rng(seed, _ESCAPE), sys.omega, horizon, n)
    xs, ys = _batch_flow(sys, GroupPoint(x, y0), dts, us)
    witnesses = []
    if direction:
        steps = np.diff(ys, axis=1) * direction
        live = dts > 0
        for i in range(n):
            if np.any(steps[i][live[i]] <= 0):
                witnesses.append({
                    "point": [x, y0],
                    "control": [[float(d), float(u)] for d, u in zip(dts[i], us[i]) if d > 0],
                })
    return EscapeReport(float(x), direction, n, bool(direction) and not witnesses, witnesses)


def _working_cone(sys: SystemParams):
    nf = normal_form(sys)
    if nf.tag is not NormalFormTag.CONE:
        raise ValueError("expected a system in the cone case (LARC with b != 0)")
    return nf


def _offset(m_lo, m_hi, x, y):
    """Signed vertical offset from the cone, positive outside; the larger violated side wins."""
    parts = []
    if m_hi is not None:
        parts.append(y - m_hi * x)
    if m_lo is not None:
        parts.append(m_lo * x - y)
    return np.max(np.stack(np.broadcast_arrays(*parts)), axis=0)


@dataclass(frozen=True)
class DecayReport:
    max_residual: float
    initial_offset: float
    decay_rate: float | None
    b: float
    samples: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_residual": self.max_residual, "initial_offset": self.initial_offset,
            "decay_rate": self.decay_rate, "b": self.b, "samples": self.samples,
        }


def decay_to_cone_check(
    sys: SystemParams, p: GroupPoint, n: int = 1000, horizon: float = 5.0, seed: int = 0
) -> DecayReport:
    """Offset of trajectories from the cone never exceeds e^{bt} times its initial value.

    Works in normal coordinates of the working system (time-reversed when
    b > 0).  ``decay_rate`` is the least-squares slope of the log offset under
    the boundary control of the violated side; it should equal ``b``.
    """
    nf = _working_cone(sys)
    q = nf.params
    m_lo, m_hi = cone_barriers(q)
    x0, y0 = nf.psi.map_xy(p.x, p.y)
    d0 = float(_offset(m_lo, m_hi, x0, y0))
    dts, us = _random_controls(_rng(seed, _DECAY), q.omega, horizon, n)
    xs, ys = kernels.flow_batch(
        5, q.a, q.b, q.alpha, q.beta, np.full(n, x0), np.full(n, y0), dts, us, 1.0
    )
    ts = np.concatenate((np.zeros((n, 1)), np.cumsum(dts, axis=1)), axis=1)
    residual = _offset(m_lo, m_hi, xs, ys) - np.exp(q.b * ts) * max(d0, 0.0)
    rate = None
    if d0 > 0:
        hi_side = m_hi is not None and y0 - m_hi * x0 == d0
        bset_u = q.omega_hi if hi_side else q.omega_lo
        tt = np.linspace(0.0, horizon, 51)
        xt, yt = kernels.nf_flow_vec(5, q.a, q.b, q.alpha, q.beta, x0, y0, bset_u, tt)
        off = _offset(m_lo, m_hi, xt, yt)
        good = off > 0
        if good.sum() >= 2:
            rate = float(np.polyfit(tt[good], np.log(off[good]), 1)[0])
    return DecayReport(float(np.max(residual)), d0, rate, q.b, n)


def barrier_check(
    sys: SystemParams,
    n: int = 10_000,
    horizon: float = 5.0,
    viewport: Sequence[float] = DEFAULT_VIEWPORT,
    seed: int = 0,
) -> dict[str, Any]:
    """Largest value of h(t) - e^{bt} h(0) for h = y - m x on each cone boundary.

    Points, controls and times are random: p uniform in the viewport (normal
    coordinates), u uniform in Omega, t uniform in (0, horizon].
    """
    nf = _working_cone(sys)
    q = nf.params
    m_lo, m_hi = cone_barriers(q)
    rng = _rng(seed, _BARRIER)
    x = rng.uniform(viewport[0], viewport[1], n)
    y = rng.uniform(viewport[2], viewport[3], n)
    u = rng.uniform(*q.omega, n)
    t = horizon - rng.uniform(0.0, horizon, n)
    xt, yt = kernels.nf_flow_vec(5, q.a, q.b, q.alpha, q.beta, x, y, u, t)
    decay = np.exp(q.b * t)
    out: dict[str, Any] = {"samples": n}
    worst = -math.inf
    for name, m, sign in (("upper", m_hi, 1.0), ("lower", m_lo, -1.0)):
        if m is None:
            out[name] = None
            continue
        res = sign * (yt - m * xt) - decay * sign * (y - m * x)
        out[name] = {"slope": m, "max_residual": float(res.max())}
        worst = max(worst, float(res.max()))
    out["max_residual"] = worst
    return out
