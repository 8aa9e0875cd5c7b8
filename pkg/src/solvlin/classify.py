"""Control sets of linear systems on G.

The five outcomes, in original coordinates:

1. alpha = a alpha + b beta = 0: vertical lines {x} x R for x in an open interval I
2. alpha = 0 != a alpha + b beta: one vertical segment per x > 0
3. alpha != 0 = a alpha + b beta: the single line y = beta/alpha (x - 1)
4. LARC with b = 0: the whole group
5. LARC with b != 0: a closed cone with apex (0, a/b)

Geometry is first computed on the normal form and then pulled back through
the inverse of the conjugating automorphism with :func:`image_under`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Union

from .core import (
    NEAR_DEGENERATE,
    Automorphism,
    GroupPoint,
    NormalForm,
    NormalFormTag,
    SystemParams,
    conjugate_to_normal_form,
    invert_automorphism,
    larc,
)

__all__ = [
    "Invariance",
    "RaySlope",
    "AdmissibleSet",
    "Boundary",
    "VerticalLines",
    "VerticalSegments",
    "Line",
    "WholeGroup",
    "Cone",
    "ControlSetDescription",
    "SingularRayError",
    "ray_slope",
    "control_for_slope",
    "admissible_ray_set",
    "cone_region",
    "classify",
    "classification_report",
    "membership",
    "image_under",
    "ray_ratio",
    "transition_time",
    "degeneracy_warnings",
]

LINE_TOL = 1e-12


class Invariance(str, Enum):
    POSITIVE = "positively-invariant"
    NEGATIVE = "negatively-invariant"
    BOTH = "invariant"
    NONE = "none-claimed"


class SingularRayError(ValueError):
    """``u alpha = b``: the ray slope has a vertical asymptote there."""


@dataclass(frozen=True)
class RaySlope:
    u: float
    m: float


def ray_slope(u: float, alpha: float, b: float) -> RaySlope:
    """Slope ``m_u = u / (u alpha - b)`` of the ray left invariant by the constant control ``u``."""
    den = u * alpha - b
    if den == 0.0:
        raise SingularRayError(f"u * alpha == b for u={u!r}: no invariant ray")
    return RaySlope(u, u / den)


def control_for_slope(m: float, alpha: float, b: float) -> float:
    """Inverse of :func:`ray_slope` on its range: ``u = m b / (m alpha - 1)``."""
    den = m * alpha - 1.0
    if den == 0.0:
        raise SingularRayError(f"slope {m!r} equals the asymptotic value 1/alpha")
    return m * b / den


@dataclass(frozen=True)
class AdmissibleSet:
    """Subinterval ``{u in Omega : u alpha - b > 0}`` with endpoint flags."""

    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def __contains__(self, u: float) -> bool:
        lo_ok = u >= self.lo if self.lo_closed else u > self.lo
        hi_ok = u <= self.hi if self.hi_closed else u < self.hi
        return lo_ok and hi_ok

    def interior_contains(self, u: float) -> bool:
        return self.lo < u < self.hi


def _cone_params(system: SystemParams | NormalForm) -> SystemParams:
    if isinstance(system, NormalForm):
        if system.tag is not NormalFormTag.CONE:
            raise ValueError(f"expected a cone normal form, got {system.tag.value}")
        return system.params
    if system.a != 0.0 or system.beta != 1.0:
        raise ValueError("expected cone normal-form coefficients (a = 0, beta = 1)")
    return system


def admissible_ray_set(system: SystemParams | NormalForm) -> AdmissibleSet:
    """``B`` for a cone-form system with ``b < 0``."""
    q = _cone_params(system)
    alpha, b = q.alpha, q.b
    if not b < 0:
        raise ValueError("admissible ray set is defined for b < 0; time-reverse first")
    lo, hi = q.omega_lo, q.omega_hi
    sing = b / alpha
    if alpha > 0:
        # u > b / alpha
        return AdmissibleSet(max(lo, sing), hi, lo > sing, True)
    return AdmissibleSet(lo, min(hi, sing), True, hi < sing)


@dataclass(frozen=True)
class Boundary:
    slope: float
    closed: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {"slope": self.slope, "closed": self.closed}


@dataclass(frozen=True)
class VerticalLines:
    """The family {x} x R, x in the open interval (lo, hi)."""

    lo: float
    hi: float
    invariance: Invariance = Invariance.BOTH
    case: int = 1

    def __post_init__(self):
        if not (0.0 <= self.lo < 1.0 < self.hi):
            raise ValueError("vertical-line interval must be a subinterval of (0, inf) containing 1")

    def contains(self, p: GroupPoint, slack: float = 0.0) -> bool:
        return self.lo - slack < p.x < self.hi + slack

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "VerticalLines",
            "interval": [self.lo, None if math.isinf(self.hi) else self.hi],
            "interval_open": True,
            "unclassified": "points with x outside the interval",
        }


@dataclass(frozen=True)
class VerticalSegments:
    """For each x > 0 the segment between lines through (0, apex_y).

    ``lower_slope <= upper_slope``; the segment at ``x`` is
    ``[apex_y + lower_slope x, apex_y + upper_slope x]`` and crosses the base
    line through (1, 0) with slope ``base_slope``.
    """

    apex_y: float
    lower_slope: float
    upper_slope: float
    base_slope: float
    invariance: Invariance = Invariance.POSITIVE
    case: int = 2

    def endpoints(self, x: float) -> tuple[float, float]:
        return self.apex_y + self.lower_slope * x, self.apex_y + self.upper_slope * x

    def contains(self, p: GroupPoint, slack: float = 0.0) -> bool:
        lo, hi = self.endpoints(p.x)
        return lo - slack <= p.y <= hi + slack

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "VerticalSegments",
            "apex": [0.0, self.apex_y],
            "lower_slope": self.lower_slope,
            "upper_slope": self.upper_slope,
            "base_line": {"point": [1.0, 0.0], "slope": self.base_slope},
        }


@dataclass(frozen=True)
class Line:
    """The line through (1, 0) with the given slope; empty interior."""

    slope: float
    invariance: Invariance = Invariance.BOTH
    case: int = 3

    def contains(self, p: GroupPoint, slack: float = 0.0) -> bool:
        return abs(p.y - self.slope * (p.x - 1.0)) <= max(LINE_TOL * (1.0 + abs(p.y)), slack)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "Line", "point": [1.0, 0.0], "slope": self.slope}


@dataclass(frozen=True)
class WholeGroup:
    invariance: Invariance = Invariance.BOTH
    case: int = 4

    def contains(self, p: GroupPoint, slack: float = 0.0) -> bool:
        return True

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "WholeGroup"}


@dataclass(frozen=True)
class Cone:
    """``{lower(x) <= y <= upper(x)}`` with boundary lines through (0, apex_y)."""

    apex_y: float
    lower: Boundary | None
    upper: Boundary | None
    invariance: Invariance = Invariance.POSITIVE
    case: int = 5

    def __post_init__(self):
        if self.lower is None and self.upper is None:
            raise ValueError("a cone needs at least one boundary")

    def lower_at(self, x):
        return None if self.lower is None else self.apex_y + self.lower.slope * x

    def upper_at(self, x):
        return None if self.upper is None else self.apex_y + self.upper.slope * x

    def contains(self, p: GroupPoint, slack: float = 0.0) -> bool:
        if self.lower is not None:
            y0 = self.apex_y + self.lower.slope * p.x
            if not (p.y >= y0 - slack if self.lower.closed else p.y > y0 - slack):
                return False
        if self.upper is not None:
            y1 = self.apex_y + self.upper.slope * p.x
            if not (p.y <= y1 + slack if self.upper.closed else p.y < y1 + slack):
                return False
        return True

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "Cone",
            "apex": [0.0, self.apex_y],
            "lower": None if self.lower is None else self.lower.to_dict(),
            "upper": None if self.upper is None else self.upper.to_dict(),
        }


ControlSetDescription = Union[VerticalLines, VerticalSegments, Line, WholeGroup, Cone]


def membership(desc: ControlSetDescription, p: GroupPoint, slack: float = 0.0) -> bool:
    return desc.contains(p, slack)


def _map_line(psi: Automorphism, intercept: float, slope: float) -> tuple[float, float]:
    # y = A + s x  ->  y' = c (x - 1) + d (A + s x) = (d A - c) + (c + d s) x
    return psi.d * intercept - psi.c, psi.c + psi.d * slope


def image_under(desc: ControlSetDescription, psi: Automorphism) -> ControlSetDescription:
    """Image of a control-set description under an automorphism.

    Automorphisms fix every vertical line and send lines to lines; on each
    vertical line they act by the affine map y -> c (x - 1) + d y, which
    reverses order when d < 0.
    """
    if isinstance(desc, (VerticalLines, WholeGroup)):
        return desc
    if isinstance(desc, Line):
        return replace(desc, slope=psi.c + psi.d * desc.slope)
    if isinstance(desc, VerticalSegments):
        apex, lo = _map_line(psi, desc.apex_y, desc.lower_slope)
        _, hi = _map_line(psi, desc.apex_y, desc.upper_slope)
        base = psi.c + psi.d * desc.base_slope
        lo, hi = (lo, hi) if psi.d > 0 else (hi, lo)
        return replace(desc, apex_y=apex, lower_slope=lo, upper_slope=hi, base_slope=base)
    if isinstance(desc, Cone):
        apex = psi.d * desc.apex_y - psi.c

        def move(bd: Boundary | None) -> Boundary | None:
            if bd is None:
                return None
            return Boundary(_map_line(psi, desc.apex_y, bd.slope)[1], bd.closed)

        lower, upper = move(desc.lower), move(desc.upper)
        if psi.d < 0:
            lower, upper = upper, lower
        return replace(desc, apex_y=apex, lower=lower, upper=upper)
    raise TypeError(f"not a control-set description: {desc!r}")


def cone_region(system: SystemParams | NormalForm, invariance: Invariance = Invariance.POSITIVE) -> Cone:
    """Closure of the union of rays r_u, u in B, for a cone form with b < 0 (apex at the origin)."""
    q = _cone_params(system)
    bset = admissible_ray_set(q)
    lower = Boundary(ray_slope(bset.lo, q.alpha, q.b).m) if bset.lo_closed else None
    upper = Boundary(ray_slope(bset.hi, q.alpha, q.b).m) if bset.hi_closed else None
    return Cone(0.0, lower, upper, invariance)


def _vertical_line_interval(params: SystemParams) -> tuple[float, float]:
    # x in I iff a(x-1) + u x beta takes both signs over Omega, i.e. the
    # endpoint values (a + u beta) x - a have strictly opposite signs.  The
    # breakpoints are a / (a + u beta) for u in {lo, hi}; I is the piece of
    # (0, inf) around x = 1, where the values are u beta and differ in sign.
    a, beta = params.a, params.beta
    roots = []
    for u in params.omega:
        p = a + u * beta
        if p != 0.0:
            r = a / p
            if r > 0.0:
                roots.append(r)
    lo = max((r for r in roots if r < 1.0), default=0.0)
    hi = min((r for r in roots if r > 1.0), default=math.inf)
    return lo, hi


def _normal_description(nf: NormalForm) -> ControlSetDescription:
    q = nf.params
    inv = Invariance.NEGATIVE if nf.reversed else Invariance.POSITIVE
    if nf.tag is NormalFormTag.VERTICAL_DRIFT:
        return VerticalLines(*_vertical_line_interval(q))
    if nf.tag is NormalFormTag.SEGMENT:
        # equilibria of ydot = b y + u beta x lie on y = -(u beta / b) x
        s = sorted(-u * q.beta / q.b for u in q.omega)
        return VerticalSegments(0.0, s[0], s[1], 0.0, inv)
    if nf.tag is NormalFormTag.SADDLE:
        return Line(0.0)
    if nf.tag is NormalFormTag.SHEAR:
        return WholeGroup()
    return cone_region(q, inv)


def classify(params: SystemParams) -> ControlSetDescription:
    nf = conjugate_to_normal_form(params)
    return image_under(_normal_description(nf), invert_automorphism(nf.psi))


def degeneracy_warnings(params: SystemParams) -> list[str]:
    out = []
    for name, val in (("alpha", params.alpha), ("a*alpha + b*beta", params.gamma), ("b", params.b)):
        if val != 0.0 and abs(val) < NEAR_DEGENERATE:
            out.append(
                f"{name} = {val!r} is nonzero but below {NEAR_DEGENERATE:g}; "
                "classification uses exact comparisons and may be sensitive to rounding"
            )
    return out


def classification_report(params: SystemParams) -> dict[str, Any]:
    """JSON-ready summary: case, original and normal-form geometry, psi, warnings."""
    nf = conjugate_to_normal_form(params)
    normal_desc = _normal_description(nf)
    desc = image_under(normal_desc, invert_automorphism(nf.psi))
    nf_doc = nf.to_dict()
    nf_doc["description"] = normal_desc.to_dict()
    return {
        "case": desc.case,
        "system": params.to_dict(),
        "larc": larc(params),
        "description": desc.to_dict(),
        "invariance": desc.invariance.value,
        "normal_form": nf_doc,
        "warnings": degeneracy_warnings(params),
    }


def ray_ratio(system: SystemParams | NormalForm, m1: float, u: float, t: float) -> float:
    """``phi_2 / phi_1`` after time ``t`` from a point of slope ``m1`` under constant ``u``."""
    q = _cone_params(system)
    mu = ray_slope(u, q.alpha, q.b).m
    return mu + math.exp(-t * (u * q.alpha - q.b)) * (m1 - mu)


def transition_time(system: SystemParams | NormalForm, u1: float, u2: float, u: float) -> float | None:
    """Time for the constant control ``u`` to carry the ray r_{u1} onto r_{u2}.

    Returns ``None`` when m_{u2} is not strictly between m_{u1} and m_u.
    """
    q = _cone_params(system)
    bset = admissible_ray_set(q)
    if u not in bset:
        raise ValueError(f"steering control {u!r} is not in B")
    for v in (u1, u2):
        if not bset.interior_contains(v):
            raise ValueError(f"{v!r} is not in the interior of B")
    m1 = ray_slope(u1, q.alpha, q.b).m
    return transition_time_slopes(q, m1, ray_slope(u2, q.alpha, q.b).m, u)


def transition_time_slopes(q: SystemParams, m1: float, m2: float, u: float) -> float | None:
    """Slope-level form of :func:`transition_time`; ``m1`` may be any ratio y/x."""
    mu = ray_slope(u, q.alpha, q.b).m
    delta = u * q.alpha - q.b
    if not delta > 0:
        return None
    if not (min(m1, mu) < m2 < max(m1, mu)):
        return None
    return math.log((m1 - mu) / (m2 - mu)) / delta
