"""Group algebra of the half-plane group G = R_+ x R and linear systems on it.

Points are ``(x, y)`` with ``x > 0`` and product

    (x1, y1) . (x2, y2) = (x1 x2, y2 + x2 y1)

A linear control system is

    xdot = u alpha x
    ydot = a (x - 1) + b y + u x beta,      u in [omega_lo, omega_hi]

Automorphisms of G are ``psi(x, y) = (x, c (x - 1) + d y)`` with ``d != 0``.
They carry linear systems to linear systems; :func:`conjugate_system` gives
the transformed coefficients and :func:`conjugate_to_normal_form` picks the
automorphism that reduces a system to one of five normal forms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

__all__ = [
    "InvalidSystemError",
    "GroupPoint",
    "TangentVector",
    "SystemParams",
    "Automorphism",
    "NormalFormTag",
    "NormalForm",
    "IDENTITY",
    "group_product",
    "group_inverse",
    "linear_field",
    "invariant_field",
    "system_rhs",
    "larc",
    "apply_automorphism",
    "invert_automorphism",
    "compose_automorphisms",
    "automorphism_differential",
    "conjugate_system",
    "conjugate_to_normal_form",
    "time_reverse",
    "case_number",
    "load_system",
    "NEAR_DEGENERATE",
]

# Below this magnitude a nonzero case discriminant is reported as near-degenerate.
NEAR_DEGENERATE = 1e-9


class InvalidSystemError(ValueError):
    """Raised when system data violate an invariant (bad coefficients, u outside Omega)."""


@dataclass(frozen=True)
class GroupPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (self.x > 0.0) or not math.isfinite(self.x):
            raise ValueError(f"GroupPoint requires x > 0, got x={self.x!r}")
        if not math.isfinite(self.y):
            raise ValueError(f"GroupPoint requires finite y, got y={self.y!r}")

    def __iter__(self):
        yield self.x
        yield self.y

    def scaled(self, lam: float) -> "GroupPoint":
        return GroupPoint(lam * self.x, lam * self.y)


@dataclass(frozen=True)
class TangentVector:
    vx: float
    vy: float

    def __iter__(self):
        yield self.vx
        yield self.vy

    def __add__(self, other: "TangentVector") -> "TangentVector":
        return TangentVector(self.vx + other.vx, self.vy + other.vy)

    def __mul__(self, k: float) -> "TangentVector":
        return TangentVector(k * self.vx, k * self.vy)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SystemParams:
    """Coefficients ``(a, b, alpha, beta)`` and control range ``[omega_lo, omega_hi]``."""

    a: float
    b: float
    alpha: float
    beta: float
    omega_lo: float = -1.0
    omega_hi: float = 1.0

    def __post_init__(self):
        vals = (self.a, self.b, self.alpha, self.beta, self.omega_lo, self.omega_hi)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidSystemError("all coefficients must be finite")
        if self.a == 0 and self.b == 0:
            raise InvalidSystemError("linear field must be nontrivial: (a, b) != (0, 0)")
        if self.alpha == 0 and self.beta == 0:
            raise InvalidSystemError("invariant field must be nontrivial: (alpha, beta) != (0, 0)")
        if not (self.omega_lo < 0.0 < self.omega_hi):
            raise InvalidSystemError(
                f"control range must satisfy omega_lo < 0 < omega_hi, got "
                f"[{self.omega_lo}, {self.omega_hi}]"
            )

    @property
    def omega(self) -> tuple[float, float]:
        return (self.omega_lo, self.omega_hi)

    @property
    def gamma(self) -> float:
        """``a alpha + b beta``; vanishes exactly when the drift and Y commute up to a factor."""
        return self.a * self.alpha + self.b * self.beta

    def check_control(self, u: float) -> None:
        if not (self.omega_lo <= u <= self.omega_hi):
            raise InvalidSystemError(
                f"control {u!r} outside Omega = [{self.omega_lo}, {self.omega_hi}]"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "a": self.a,
            "b": self.b,
            "alpha": self.alpha,
            "beta": self.beta,
            "omega": [self.omega_lo, self.omega_hi],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "SystemParams":
        missing = [k for k in ("a", "b", "alpha", "beta", "omega") if k not in doc]
        if missing:
            raise InvalidSystemError(f"system description missing keys: {', '.join(missing)}")
        omega = doc["omega"]
        if not isinstance(omega, (list, tuple)) or len(omega) != 2:
            raise InvalidSystemError("omega must be a two-element list [lo, hi]")
        try:
            vals = [float(doc[k]) for k in ("a", "b", "alpha", "beta")]
            lo, hi = float(omega[0]), float(omega[1])
        except (TypeError, ValueError) as exc:
            raise InvalidSystemError(f"non-numeric coefficient: {exc}") from None
        return cls(*vals, lo, hi)


def load_system(source: str | Path) -> SystemParams:
    """Read a system from a JSON file path or an inline JSON string."""
    text = str(source)
    if text.lstrip().startswith("{"):
        payload = text
    else:
        path = Path(text)
        try:
            payload = path.read_text()
        except OSError as exc:
            raise InvalidSystemError(f"cannot read system file {path}: {exc}") from None
    try:
        doc = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise InvalidSystemError(f"malformed system JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise InvalidSystemError("system JSON must be an object")
    return SystemParams.from_dict(doc)


def group_product(p: GroupPoint, q: GroupPoint) -> GroupPoint:
    return GroupPoint(p.x * q.x, q.y + q.x * p.y)


def group_inverse(p: GroupPoint) -> GroupPoint:
    return GroupPoint(1.0 / p.x, -p.y / p.x)


def linear_field(params: SystemParams, p: GroupPoint) -> TangentVector:
    return TangentVector(0.0, params.a * (p.x - 1.0) + params.b * p.y)


def invariant_field(params: SystemParams, p: GroupPoint) -> TangentVector:
    return TangentVector(p.x * params.alpha, p.x * params.beta)


def system_rhs(params: SystemParams, p: GroupPoint, u: float) -> TangentVector:
    params.check_control(u)
    return linear_field(params, p) + u * invariant_field(params, p)


def larc(params: SystemParams) -> bool:
    """Lie algebra rank condition: ``alpha (a alpha + b beta) != 0``, tested exactly."""
    return params.alpha * params.gamma != 0.0


@dataclass(frozen=True)
class Automorphism:
    """``psi(x, y) = (x, c (x - 1) + d y)``."""

    c: float
    d: float

    def __post_init__(self):
        if self.d == 0 or not math.isfinite(self.d) or not math.isfinite(self.c):
            raise ValueError(f"automorphism requires finite c and d != 0, got ({self.c}, {self.d})")

    def __call__(self, p: GroupPoint) -> GroupPoint:
        return apply_automorphism(self, p)

    def map_xy(self, x, y):
        """Array-friendly version of ``psi`` on raw coordinates."""
        return x, self.c * (x - 1.0) + self.d * y

    def to_dict(self) -> dict[str, float]:
        return {"c": self.c, "d": self.d}


IDENTITY = Automorphism(0.0, 1.0)


def apply_automorphism(psi: Automorphism, p: GroupPoint) -> GroupPoint:
    return GroupPoint(p.x, psi.c * (p.x - 1.0) + psi.d * p.y)


def invert_automorphism(psi: Automorphism) -> Automorphism:
    # y = (y' - c (x - 1)) / d
    return Automorphism(-psi.c / psi.d, 1.0 / psi.d)


def compose_automorphisms(outer: Automorphism, inner: Automorphism) -> Automorphism:
    """``outer o inner``: c = c_o + d_o c_i, d = d_o d_i."""
    return Automorphism(outer.c + outer.d * inner.c, outer.d * inner.d)


def automorphism_differential(psi: Automorphism, v: TangentVector) -> TangentVector:
    # d(psi) = [[1, 0], [c, d]], independent of the base point.
    return TangentVector(v.vx, psi.c * v.vx + psi.d * v.vy)


def conjugate_system(params: SystemParams, psi: Automorphism) -> SystemParams:
    """Coefficients of the system ``psi`` carries ``params`` to.

    With y' = c (x - 1) + d y the transformed drift is
    (d a - b c)(x - 1) + b y' and the control field is (alpha x, (c alpha + d beta) x).
    """
    c, d = psi.c, psi.d
    return SystemParams(
        d * params.a - params.b * c,
        params.b,
        params.alpha,
        c * params.alpha + d * params.beta,
        params.omega_lo,
        params.omega_hi,
    )


def time_reverse(params: SystemParams) -> SystemParams:
    """System whose trajectories under ``-u`` are those of ``params`` run backwards."""
    return SystemParams(
        -params.a, -params.b, params.alpha, params.beta, -params.omega_hi, -params.omega_lo
    )


class NormalFormTag(str, Enum):
    VERTICAL_DRIFT = "VerticalDrift"  # xdot = 0, ydot = a(x-1) + u x beta
    SEGMENT = "Segment"  # xdot = 0, ydot = b y + u x b beta
    SADDLE = "Saddle"  # xdot = u alpha x, ydot = b y
    SHEAR = "Shear"  # xdot = u alpha x, ydot = x - 1
    CONE = "Cone"  # xdot = u alpha x, ydot = b y + u x


@dataclass(frozen=True)
class NormalForm:
    """A reduced system together with the automorphism producing it.

    ``params`` is itself a linear system in normal-form shape.  When
    ``reversed`` is set the reduction was applied to ``time_reverse`` of the
    original system, so ``params`` has control range ``-Omega``.
    """

    tag: NormalFormTag
    params: SystemParams
    psi: Automorphism
    reversed: bool = False
    source: SystemParams | None = field(default=None, compare=False)

    @property
    def case(self) -> int:
        return _TAG_CASE[self.tag]

    def to_dict(self) -> dict[str, Any]:
        return {
            "tag": self.tag.value,
            "params": self.params.to_dict(),
            "psi": self.psi.to_dict(),
            "reversed": self.reversed,
        }


_TAG_CASE = {
    NormalFormTag.VERTICAL_DRIFT: 1,
    NormalFormTag.SEGMENT: 2,
    NormalFormTag.SADDLE: 3,
    NormalFormTag.SHEAR: 4,
    NormalFormTag.CONE: 5,
}


def case_number(params: SystemParams) -> int:
    """Case 1..5 of the classification, by exact tests on the coefficients."""
    alpha, gamma = params.alpha, params.gamma
    if alpha == 0.0:
        return 1 if gamma == 0.0 else 2
    if gamma == 0.0:
        return 3
    return 4 if params.b == 0.0 else 5


def conjugate_to_normal_form(params: SystemParams) -> NormalForm:
    case = case_number(params)
    if case == 1:
        # alpha = b = 0: already reduced.
        return NormalForm(NormalFormTag.VERTICAL_DRIFT, params, IDENTITY, False, params)
    if case == 3:
        psi = Automorphism(-params.beta / params.alpha, 1.0)
        return NormalForm(
            NormalFormTag.SADDLE, _reduced(params, psi, a=0.0, beta=0.0), psi, False, params
        )
    if case == 4:
        # y' = (y - beta/alpha (x - 1)) / a gives ydot' = x - 1.
        psi = Automorphism(-params.beta / (params.a * params.alpha), 1.0 / params.a)
        return NormalForm(
            NormalFormTag.SHEAR, _reduced(params, psi, a=1.0, beta=0.0), psi, False, params
        )

    work = time_reverse(params) if params.b > 0 else params
    rev = params.b > 0
    if case == 2:
        psi = Automorphism(work.a, work.b)
        nf = _reduced(work, psi, a=0.0, beta=work.b * work.beta)
        return NormalForm(NormalFormTag.SEGMENT, nf, psi, rev, params)
    gamma = work.gamma
    psi = Automorphism(work.a / gamma, work.b / gamma)
    return NormalForm(NormalFormTag.CONE, _reduced(work, psi, a=0.0, beta=1.0), psi, rev, params)


def _reduced(params: SystemParams, psi: Automorphism, *, a: float, beta: float) -> SystemParams:
    # The conjugation formula reproduces the canonical coefficients up to
    # rounding; pin them to their exact values.
    conj = conjugate_system(params, psi)
    return SystemParams(a, conj.b, conj.alpha, beta, conj.omega_lo, conj.omega_hi)
