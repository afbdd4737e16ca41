"""Minkowski points, causal classification and the P/Q0/Q1 agent layout.

Units have c = 1: spatial coordinates in light-seconds, time in seconds.
Points are written (x, y, z, t).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

LIGHTLIKE_TOL = 1e-9


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class SpacetimePoint:
    x: float
    y: float
    z: float
    t: float

    def __post_init__(self):
        for name in ("x", "y", "z", "t"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"coordinate {name} must be finite, got {v!r}")

    @classmethod
    def of(cls, coords) -> "SpacetimePoint":
        x, y, z, t = (float(c) for c in coords)
        return cls(x, y, z, t)

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.z, self.t)

    def spatial_distance(self, other: "SpacetimePoint") -> float:
        return math.dist(self.position, other.position)

    def __str__(self):
        return "({:.9g},{:.9g},{:.9g},{:.9g})".format(*self.as_tuple())


class CausalRelation(enum.Enum):
    TIMELIKE_FUTURE = "TimelikeFuture"
    TIMELIKE_PAST = "TimelikePast"
    LIGHTLIKE_FUTURE = "LightlikeFuture"
    LIGHTLIKE_PAST = "LightlikePast"
    SPACELIKE = "Spacelike"
    COINCIDENT = "Coincident"

    def inverse(self) -> "CausalRelation":
        return _INVERSE[self]

    @property
    def is_future(self) -> bool:
        return self in (CausalRelation.TIMELIKE_FUTURE, CausalRelation.LIGHTLIKE_FUTURE)


_INVERSE = {
    CausalRelation.TIMELIKE_FUTURE: CausalRelation.TIMELIKE_PAST,
    CausalRelation.TIMELIKE_PAST: CausalRelation.TIMELIKE_FUTURE,
    CausalRelation.LIGHTLIKE_FUTURE: CausalRelation.LIGHTLIKE_PAST,
    CausalRelation.LIGHTLIKE_PAST: CausalRelation.LIGHTLIKE_FUTURE,
    CausalRelation.SPACELIKE: CausalRelation.SPACELIKE,
    CausalRelation.COINCIDENT: CausalRelation.COINCIDENT,
}


def interval_squared(p: SpacetimePoint, q: SpacetimePoint) -> float:
    """Signature (+,-,-,-): positive for timelike, negative for spacelike."""
    dt = q.t - p.t
    return dt * dt - (q.x - p.x) ** 2 - (q.y - p.y) ** 2 - (q.z - p.z) ** 2


def causal_relation(p: SpacetimePoint, q: SpacetimePoint, tol: float = LIGHTLIKE_TOL) -> CausalRelation:
    """Where ``q`` sits relative to ``p``."""
    dt = q.t - p.t
    dr = p.spatial_distance(q)
    if abs(dt) <= tol and dr <= tol:
        return CausalRelation.COINCIDENT
    # compare |dt| against dr directly; the squared interval loses the tolerance scale
    gap = abs(dt) - dr
    if gap < -tol:
        return CausalRelation.SPACELIKE
    if gap <= tol:
        return CausalRelation.LIGHTLIKE_FUTURE if dt > 0 else CausalRelation.LIGHTLIKE_PAST
    return CausalRelation.TIMELIKE_FUTURE if dt > 0 else CausalRelation.TIMELIKE_PAST


def in_causal_future(p: SpacetimePoint, q: SpacetimePoint, tol: float = LIGHTLIKE_TOL) -> bool:
    """True if a light-speed signal emitted at ``p`` can be received at ``q``."""
    rel = causal_relation(p, q, tol)
    return rel is CausalRelation.COINCIDENT or rel.is_future


def boost_x(p: SpacetimePoint, v: float) -> SpacetimePoint:
    if not -1.0 < v < 1.0:
        raise ValueError("boost velocity must satisfy |v| < 1")
    g = 1.0 / math.sqrt(1.0 - v * v)
    return SpacetimePoint(g * (p.x - v * p.t), p.y, p.z, g * (p.t - v * p.x))


@dataclass(frozen=True)
class ProtocolLayout:
    commit_point: SpacetimePoint
    unveil_points: tuple[SpacetimePoint, SpacetimePoint]
    # recorded only; protocol logic never reads it
    distance: float | None = None

    @classmethod
    def symmetric(cls, d: float = 1.0, t_unveil: float = 0.5) -> "ProtocolLayout":
        """P at the origin, Q0 and Q1 at x = -d and x = +d."""
        return cls(
            SpacetimePoint(0.0, 0.0, 0.0, 0.0),
            (SpacetimePoint(-d, 0.0, 0.0, t_unveil), SpacetimePoint(d, 0.0, 0.0, t_unveil)),
            distance=d,
        )

    def named_points(self) -> dict[str, SpacetimePoint]:
        return {"P": self.commit_point, "Q0": self.unveil_points[0], "Q1": self.unveil_points[1]}

    def to_dict(self) -> dict:
        out = {k: list(v.as_tuple()) for k, v in self.named_points().items()}
        if self.distance is not None:
            out["distance"] = self.distance
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolLayout":
        pts = {}
        for key in ("P", "Q0", "Q1"):
            if key not in data:
                raise LayoutError(f"layout: missing field {key!r}")
            coords = data[key]
            if not isinstance(coords, (list, tuple)) or len(coords) != 4:
                raise LayoutError(f"layout.{key}: expected four reals (x, y, z, t)")
            try:
                pts[key] = SpacetimePoint.of(coords)
            except (TypeError, ValueError) as exc:
                raise LayoutError(f"layout.{key}: {exc}") from None
        dist = data.get("distance")
        return cls(pts["P"], (pts["Q0"], pts["Q1"]), None if dist is None else float(dist))


def validate_layout(layout: ProtocolLayout) -> list[str]:
    """Return the violated layout conditions; an empty list means the layout is usable."""
    problems = []
    p = layout.commit_point
    q0, q1 = layout.unveil_points
    for a_name, a, b_name, b in (("P", p, "Q0", q0), ("P", p, "Q1", q1), ("Q0", q0, "Q1", q1)):
        rel = causal_relation(a, b)
        if rel is not CausalRelation.SPACELIKE:
            problems.append(f"{a_name} and {b_name} are not spacelike separated ({rel.value})")
    for name, q in (("Q0", q0), ("Q1", q1)):
        if not q.t > p.t:
            problems.append(f"{name} time {q.t:g} is not after commitment time {p.t:g} (FFPD)")
    return problems


def earliest_joint_reception(layout: ProtocolLayout, i: int, check: bool = True) -> SpacetimePoint:
    """Earliest point on the spatial segment P--Q_i reached by light from both P and Q_i.

    Arrival time at fraction s along the segment is max(tP + s*D, tQ + (1-s)*D);
    the two branches cross at s = (tQ - tP + D) / 2D, clipped to [0, 1].
    """
    if i not in (0, 1):
        raise ValueError("unveil index must be 0 or 1")
    if check:
        problems = validate_layout(layout)
        if problems:
            raise LayoutError("; ".join(problems))
    p = layout.commit_point
    q = layout.unveil_points[i]
    dist = p.spatial_distance(q)
    if dist == 0.0:
        return SpacetimePoint(q.x, q.y, q.z, max(p.t, q.t))
    s = min(1.0, max(0.0, (q.t - p.t + dist) / (2.0 * dist)))
    t = max(p.t + s * dist, q.t + (1.0 - s) * dist)
    return SpacetimePoint(
        p.x + s * (q.x - p.x),
        p.y + s * (q.y - p.y),
        p.z + s * (q.z - p.z),
        t,
    )
