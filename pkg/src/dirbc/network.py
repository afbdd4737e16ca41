"""Light-speed message routing between agents on worldlines, and run transcripts.

Every value an agent handles is logged as an event.  Derived values list the
events they were computed from (``sources``) and receptions point at the
emission they came from (``ref``), which is what the causality audit walks.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .geometry import LIGHTLIKE_TOL, SpacetimePoint, causal_relation, in_causal_future

GEN = "gen"  # agent's own randomness or private choice
DEVICE = "device"  # output of the agent's own device
COMPUTE = "compute"  # value derived from earlier events
SEND = "send"
RECV = "recv"
VERDICT = "verdict"
KINDS = (GEN, DEVICE, COMPUTE, SEND, RECV, VERDICT)


class CausalityFault(RuntimeError):
    """Protocol logic demanded a transfer that light-speed signalling cannot make."""


@dataclass(frozen=True)
class Worldline:
    """Piecewise-linear path through (position, time) waypoints; static outside them."""

    waypoints: tuple[tuple[float, tuple[float, float, float]], ...]

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("worldline needs at least one waypoint")
        times = [t for t, _ in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("waypoint times must increase")
        for (t0, p0), (t1, p1) in zip(self.waypoints, self.waypoints[1:]):
            if math.dist(p0, p1) >= (t1 - t0):
                raise ValueError("worldline segments must be slower than light")

    @classmethod
    def static(cls, position) -> "Worldline":
        return cls(((0.0, tuple(float(c) for c in position)),))

    @classmethod
    def travel(cls, start, end, depart: float, speed: float) -> "Worldline":
        if not 0.0 < speed < 1.0:
            raise ValueError("travel speed must be in (0, 1)")
        start = tuple(float(c) for c in start)
        end = tuple(float(c) for c in end)
        dist = math.dist(start, end)
        if dist == 0.0:
            return cls.static(start)
        return cls(((depart, start), (depart + dist / speed, end)))

    def position_at(self, t: float) -> tuple[float, float, float]:
        wp = self.waypoints
        if t <= wp[0][0]:
            return wp[0][1]
        for (t0, p0), (t1, p1) in zip(wp, wp[1:]):
            if t <= t1:
                f = (t - t0) / (t1 - t0)
                return tuple(a + f * (b - a) for a, b in zip(p0, p1))
        return wp[-1][1]

    def point_at(self, t: float) -> SpacetimePoint:
        x, y, z = self.position_at(t)
        return SpacetimePoint(x, y, z, t)

    def earliest_reception(self, emission: SpacetimePoint) -> SpacetimePoint:
        """First point on this worldline inside the future light cone of ``emission``."""
        src = emission.position

        def slack(t):
            return (t - emission.t) - math.dist(self.position_at(t), src)

        # slack is strictly increasing because every segment is slower than light
        lo = emission.t
        if slack(lo) >= 0.0:
            return self.point_at(lo)
        hi = lo + 1.0
        while slack(hi) < 0.0:
            hi = lo + 2.0 * (hi - lo)
        # exact answers on the static head and tail
        first_t, first_p = self.waypoints[0]
        t_head = emission.t + math.dist(first_p, src)
        if t_head <= first_t:
            return self.point_at(t_head)
        last_t, last_p = self.waypoints[-1]
        t_static = emission.t + math.dist(last_p, src)
        if t_static >= last_t:
            return self.point_at(t_static)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if slack(mid) >= 0.0:
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-13:
                break
        return self.point_at(hi)


def deliver(emission: SpacetimePoint, recipient: Worldline, demanded: SpacetimePoint | None = None) -> SpacetimePoint:
    """Reception point of a light-speed message; faults if a demanded reception is impossible."""
    if demanded is not None and not in_causal_future(emission, demanded):
        rel = causal_relation(emission, demanded)
        raise CausalityFault(f"message emitted at {emission} cannot reach {demanded} ({rel.value})")
    reception = recipient.earliest_reception(emission)
    if demanded is not None and reception.t > demanded.t + LIGHTLIKE_TOL:
        raise CausalityFault(f"message emitted at {emission} reaches the recipient only at t={reception.t:.9g}")
    return reception


@dataclass(frozen=True)
class Event:
    seq: int
    time: float
    agent: str
    point: SpacetimePoint
    kind: str
    label: str
    payload: str = ""
    sources: tuple[int, ...] = ()
    recipients: tuple[str, ...] = ()
    ref: int | None = None

    def to_line(self) -> str:
        pt = ",".join(repr(c) for c in self.point.as_tuple())
        src = ",".join(str(s) for s in self.sources) or "-"
        to = ",".join(self.recipients) or "-"
        ref = "-" if self.ref is None else str(self.ref)
        payload = self.payload or "-"
        return (
            f"t={self.time!r} id={self.seq} agent={self.agent} at=({pt}) kind={self.kind} "
            f"label={self.label} src={src} ref={ref} to={to} payload={payload}"
        )

    @classmethod
    def from_line(cls, line: str) -> "Event":
        fields = line.rstrip("\n").split(" ", 9)
        keys = ("t", "id", "agent", "at", "kind", "label", "src", "ref", "to", "payload")
        if len(fields) != len(keys):
            raise ValueError(f"malformed transcript line: {line!r}")
        vals = {}
        for key, item in zip(keys, fields):
            name, sep, val = item.partition("=")
            if name != key or not sep:
                raise ValueError(f"expected field {key!r} in transcript line: {line!r}")
            vals[key] = val
        coords = vals["at"].strip("()").split(",")
        return cls(
            seq=int(vals["id"]),
            time=float(vals["t"]),
            agent=vals["agent"],
            point=SpacetimePoint.of(coords),
            kind=vals["kind"],
            label=vals["label"],
            payload="" if vals["payload"] == "-" else vals["payload"],
            sources=() if vals["src"] == "-" else tuple(int(s) for s in vals["src"].split(",")),
            recipients=() if vals["to"] == "-" else tuple(vals["to"].split(",")),
            ref=None if vals["ref"] == "-" else int(vals["ref"]),
        )


@dataclass
class Transcript:
    events: list[Event] = field(default_factory=list)
    header: dict[str, str] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def by_id(self) -> dict[int, Event]:
        return {e.seq: e for e in self.events}

    def find(self, agent: str | None = None, kind: str | None = None, label: str | None = None) -> list[Event]:
        return [
            e
            for e in self.events
            if (agent is None or e.agent == agent)
            and (kind is None or e.kind == kind)
            and (label is None or e.label == label)
        ]

    def to_text(self) -> str:
        lines = [f"# {k}={v}" for k, v in self.header.items()]
        lines.extend(e.to_line() for e in self.events)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Transcript":
        header = {}
        events = []
        for line in text.splitlines():
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                header[key] = val
                continue
            events.append(Event.from_line(line))
        return cls(events, header)


@dataclass
class Agent:
    name: str
    worldline: Worldline
    inbox: dict[str, Event] = field(default_factory=dict)


class Network:
    """Deterministic event loop: actions run in (time, agent, sequence) order.

    Agent computation takes zero simulated time.  ``send`` schedules a
    reception on each recipient's worldline at the earliest causally allowed
    point; ``on_receive`` handlers fire when it is processed.
    """

    def __init__(self):
        self.agents: dict[str, Agent] = {}
        self.transcript = Transcript()
        self._queue: list = []
        self._counter = 0
        self._handlers: dict[str, list[tuple[str | None, Callable]]] = {}
        self.now = -math.inf
        self._current: str | None = None

    def add_agent(self, name: str, worldline: Worldline) -> Agent:
        if name in self.agents:
            raise ValueError(f"duplicate agent {name}")
        if " " in name or "," in name:
            raise ValueError("agent names may not contain spaces or commas")
        agent = Agent(name, worldline)
        self.agents[name] = agent
        return agent

    def point_of(self, agent: str, t: float | None = None) -> SpacetimePoint:
        return self.agents[agent].worldline.point_at(self.now if t is None else t)

    def at(self, time: float, agent: str, action: Callable[["Network"], None]) -> None:
        self._push(time, agent, action)

    def on_receive(self, agent: str, handler: Callable[["Network", Event], None], label: str | None = None) -> None:
        self._handlers.setdefault(agent, []).append((label, handler))

    def _push(self, time, agent, action):
        self._counter += 1
        heapq.heappush(self._queue, (time, agent, self._counter, action))

    def log(self, kind: str, label: str, payload="", sources: Iterable[int] = (), agent: str | None = None) -> Event:
        who = agent or self._current
        if who is None:
            raise RuntimeError("log() called outside an agent action")
        event = Event(
            seq=len(self.transcript.events),
            time=self.now,
            agent=who,
            point=self.point_of(who),
            kind=kind,
            label=label,
            payload=str(payload),
            sources=tuple(sources),
        )
        self.transcript.events.append(event)
        return event

    def send(
        self,
        label: str,
        payload,
        recipients: Iterable[str],
        sources: Iterable[int] = (),
        demand: dict[str, SpacetimePoint] | None = None,
    ) -> Event:
        """Broadcast from the current agent; ``demand`` maps recipients to latest allowed reception points."""
        recipients = tuple(recipients)
        sender = self._current
        event = Event(
            seq=len(self.transcript.events),
            time=self.now,
            agent=sender,
            point=self.point_of(sender),
            kind=SEND,
            label=label,
            payload=str(payload),
            sources=tuple(sources),
            recipients=recipients,
        )
        self.transcript.events.append(event)
        for name in recipients:
            wl = self.agents[name].worldline
            reception = deliver(event.point, wl, (demand or {}).get(name))
            self._push(reception.t, name, _Delivery(event))
        return event

    def run(self) -> Transcript:
        while self._queue:
            time, agent, _, action = heapq.heappop(self._queue)
            if time < self.now - 1e-12:
                raise RuntimeError("event loop went backwards in time")
            self.now = max(self.now, time)
            self._current = agent
            if isinstance(action, _Delivery):
                self._receive(agent, action.event)
            else:
                action(self)
            self._current = None
        return self.transcript

    def _receive(self, agent: str, sent: Event) -> None:
        event = Event(
            seq=len(self.transcript.events),
            time=self.now,
            agent=agent,
            point=self.point_of(agent),
            kind=RECV,
            label=sent.label,
            payload=sent.payload,
            ref=sent.seq,
        )
        self.transcript.events.append(event)
        self.agents[agent].inbox[sent.label] = event
        for label, handler in self._handlers.get(agent, []):
            if label is None or label == sent.label:
                handler(self, event)


@dataclass(frozen=True)
class _Delivery:
    event: Event
