"""Closed-form flows of linear systems on G, piecewise concatenation and an RK4 oracle.

Every system is evaluated through its normal form: a point is mapped by the
conjugating automorphism, flowed with the normal form's closed expression and
mapped back.  For normal forms obtained from the time-reversed system,

    phi(t, p, u) = psi^-1( phi_nf(-t, psi(p), -u) ).

:func:`rk4_flow` integrates the original right-hand side directly and shares
nothing with the closed forms beyond the coefficients.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Sequence, TextIO

import numpy as np

from . import kernels
from .core import (
    GroupPoint,
    InvalidSystemError,
    NormalForm,
    NormalFormTag,
    SystemParams,
    conjugate_to_normal_form,
    invert_automorphism,
)

__all__ = [
    "PiecewiseControl",
    "Trajectory",
    "normal_form",
    "flow_normal",
    "flow_constant",
    "flow_piecewise",
    "flow_endpoint",
    "flow_at",
    "rk4_flow",
    "ray_translation_identity_check",
    "write_trajectory_csv",
    "read_trajectory_csv",
]


@dataclass(frozen=True)
class PiecewiseControl:
    """Ordered ``(dt, u)`` segments; ``dt > 0``."""

    segments: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        segs = tuple((float(dt), float(u)) for dt, u in self.segments)
        for i, (dt, u) in enumerate(segs):
            if not (dt > 0.0 and math.isfinite(dt)):
                raise InvalidSystemError(f"segment {i}: dwell time must be positive, got {dt!r}")
            if not math.isfinite(u):
                raise InvalidSystemError(f"segment {i}: control level must be finite, got {u!r}")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def of(cls, *segments: tuple[float, float]) -> "PiecewiseControl":
        return cls(tuple(segments))

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(self.segments)

    def __add__(self, other: "PiecewiseControl") -> "PiecewiseControl":
        return PiecewiseControl(self.segments + other.segments)

    @property
    def duration(self) -> float:
        return math.fsum(dt for dt, _ in self.segments)

    @property
    def dts(self) -> np.ndarray:
        return np.array([dt for dt, _ in self.segments], dtype=float)

    @property
    def levels(self) -> np.ndarray:
        return np.array([u for _, u in self.segments], dtype=float)

    def validate(self, params: SystemParams) -> None:
        for i, (_, u) in enumerate(self.segments):
            if not (params.omega_lo <= u <= params.omega_hi):
                raise InvalidSystemError(
                    f"segment {i}: control {u!r} outside Omega = "
                    f"[{params.omega_lo}, {params.omega_hi}]"
                )

    def reversed_negated(self) -> "PiecewiseControl":
        """Control that replays this one backwards with ``u -> -u``."""
        return PiecewiseControl(tuple((dt, -u) for dt, u in reversed(self.segments)))

    def to_list(self) -> list[list[float]]:
        return [[dt, u] for dt, u in self.segments]


@dataclass(frozen=True)
class Trajectory:
    """Samples ``(t, x, y)`` of a solution; ``u`` is the level in force on the
    interval ending at each sample (the first sample takes the first level)."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    control: PiecewiseControl

    def __len__(self) -> int:
        return len(self.t)

    @property
    def samples(self) -> list[tuple[float, GroupPoint]]:
        return [(float(t), GroupPoint(float(x), float(y))) for t, x, y in zip(self.t, self.x, self.y)]

    @property
    def final(self) -> GroupPoint:
        return GroupPoint(float(self.x[-1]), float(self.y[-1]))


@lru_cache(maxsize=512)
def normal_form(params: SystemParams) -> NormalForm:
    return conjugate_to_normal_form(params)


def _nf_coeffs(nf: NormalForm):
    q = nf.params
    return nf.case, q.a, q.b, q.alpha, q.beta


def flow_normal(nf: NormalForm, p: GroupPoint, u: float, t: float) -> GroupPoint:
    """Closed-form flow of the normal-form system itself (normal coordinates)."""
    nf.params.check_control(u)
    x, y = kernels.nf_flow(*_nf_coeffs(nf), p.x, p.y, u, t)
    return GroupPoint(x, y)


def flow_constant(system: SystemParams | NormalForm, p: GroupPoint, u: float, t: float) -> GroupPoint:
    """Exact image of ``p`` under the constant control ``u`` for time ``t`` (any sign)."""
    if isinstance(system, NormalForm):
        return flow_normal(system, p, u, t)
    system.check_control(u)
    nf = normal_form(system)
    psi = nf.psi
    x, y = psi.map_xy(p.x, p.y)
    sgn = -1.0 if nf.reversed else 1.0
    x, y = kernels.nf_flow(*_nf_coeffs(nf), x, y, sgn * u, sgn * t)
    x, y = invert_automorphism(psi).map_xy(x, y)
    return GroupPoint(x, y)


def flow_endpoint(system: SystemParams, p: GroupPoint, control: PiecewiseControl) -> GroupPoint:
    """Endpoint of the concatenated flow; cheaper than building a trajectory."""
    control.validate(system)
    nf = normal_form(system)
    x, y = nf.psi.map_xy(p.x, p.y)
    sgn = -1.0 if nf.reversed else 1.0
    coeffs = _nf_coeffs(nf)
    for dt, u in control:
        x, y = kernels.nf_flow(*coeffs, x, y, sgn * u, sgn * dt)
    x, y = invert_automorphism(nf.psi).map_xy(x, y)
    return GroupPoint(x, y)


def _segment_starts(system: SystemParams, p: GroupPoint, control: PiecewiseControl):
    """Normal-coordinate states at every switch time, shape (K + 1,)."""
    nf = normal_form(system)
    x0, y0 = nf.psi.map_xy(p.x, p.y)
    sgn = -1.0 if nf.reversed else 1.0
    if not len(control):
        return nf, sgn, np.array([x0]), np.array([y0])
    xs, ys = kernels.flow_batch(
        *_nf_coeffs(nf), np.array([x0]), np.array([y0]),
        control.dts[None, :], sgn * control.levels[None, :], sgn,
    )
    return nf, sgn, xs[0], ys[0]


def flow_at(system: SystemParams, p: GroupPoint, control: PiecewiseControl, times) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form state at arbitrary times in ``[0, duration]``.

    Past the final switch the state is extended with the last level.
    """
    control.validate(system)
    times = np.asarray(times, dtype=float)
    nf, sgn, xs, ys = _segment_starts(system, p, control)
    if not len(control):
        levels = np.zeros(1)
        starts = np.zeros(1)
    else:
        levels = control.levels
        starts = np.concatenate(([0.0], np.cumsum(control.dts)[:-1]))
    idx = np.clip(np.searchsorted(starts, times, side="right") - 1, 0, len(levels) - 1)
    local = times - starts[idx]
    if not len(control):
        local = np.zeros_like(times)
    xn, yn = kernels.nf_flow_vec(*_nf_coeffs(nf), xs[idx], ys[idx], sgn * levels[idx], sgn * local)
    return invert_automorphism(nf.psi).map_xy(xn, yn)


def flow_piecewise(
    system: SystemParams, p: GroupPoint, control: PiecewiseControl, substeps: int = 16
) -> Trajectory:
    """Concatenated closed-form solution sampled at switches and ``substeps`` per segment."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    control.validate(system)
    if not len(control):
        return Trajectory(
            np.zeros(1), np.array([p.x]), np.array([p.y]), np.zeros(1), control
        )
    nf, sgn, xs, ys = _segment_starts(system, p, control)
    frac = np.arange(1, substeps + 1) / substeps
    dts, levels = control.dts, control.levels
    local = (dts[:, None] * frac[None, :])
    xn, yn = kernels.nf_flow_vec(
        *_nf_coeffs(nf), xs[:-1, None], ys[:-1, None], sgn * levels[:, None], sgn * local
    )
    # Switch times come from the batch concatenation so samples agree with it exactly.
    xn[:, -1] = xs[1:]
    yn[:, -1] = ys[1:]
    starts = np.concatenate(([0.0], np.cumsum(dts)[:-1]))
    t = np.concatenate(([0.0], (starts[:, None] + local).ravel()))
    u = np.concatenate(([levels[0]], np.repeat(levels, substeps)))
    x_all = np.concatenate(([xs[0]], xn.ravel()))
    y_all = np.concatenate(([ys[0]], yn.ravel()))
    xo, yo = invert_automorphism(nf.psi).map_xy(x_all, y_all)
    xo = xo.copy()
    yo = yo.copy()
    xo[0], yo[0] = p.x, p.y
    return Trajectory(t, xo, yo, u, control)


def rk4_flow(system: SystemParams, p: GroupPoint, control: PiecewiseControl, h: float = 1e-3) -> Trajectory:
    """Fixed-step RK4 on the original right-hand side; steps end on every switch."""
    control.validate(system)
    t, x, y, u = kernels.rk4_piecewise(
        system.a, system.b, system.alpha, system.beta, p.x, p.y, control.dts, control.levels, h
    )
    return Trajectory(t, x, y, u, control)


def ray_translation_identity_check(nf: NormalForm, p: GroupPoint, y2: float, u: float, t: float) -> float:
    """Residual of phi(t, (x, y + y2), u) = phi(t, (x, y), u) + (0, e^{bt} y2) for a cone form."""
    if nf.tag is not NormalFormTag.CONE:
        raise ValueError("ray translation identity is stated for the cone normal form")
    lhs = flow_normal(nf, GroupPoint(p.x, p.y + y2), u, t)
    rhs = flow_normal(nf, p, u, t)
    shift = math.exp(nf.params.b * t) * y2
    return math.hypot(lhs.x - rhs.x, lhs.y - (rhs.y + shift))


_CSV_HEADER = ("t", "x", "y", "u")
_AUDIT_HEADER = ("x_rk4", "y_rk4")


def write_trajectory_csv(
    traj: Trajectory, out: TextIO | str | Path, audit: tuple[np.ndarray, np.ndarray] | None = None
) -> None:
    """Write ``t,x,y,u`` rows (plus ``x_rk4,y_rk4`` when ``audit`` is given).

    Floats use ``repr`` so they parse back to the identical double.
    """
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="") as fh:
            write_trajectory_csv(traj, fh, audit)
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_CSV_HEADER + (_AUDIT_HEADER if audit is not None else ()))
    cols = [traj.t, traj.x, traj.y, traj.u]
    if audit is not None:
        cols.extend(audit)
    for row in zip(*cols):
        writer.writerow([repr(float(v)) for v in row])


def read_trajectory_csv(src: TextIO | str | Path) -> dict[str, np.ndarray]:
    if isinstance(src, Path) or (isinstance(src, str) and "\n" not in src):
        with open(src, newline="") as fh:
            return read_trajectory_csv(fh)
    if isinstance(src, str):
        src = io.StringIO(src)
    reader = csv.reader(src)
    header = next(reader)
    rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def controls_from_rows(rows: Iterable[Sequence[float]]) -> PiecewiseControl:
    return PiecewiseControl(tuple((float(dt), float(u)) for dt, u in rows))
