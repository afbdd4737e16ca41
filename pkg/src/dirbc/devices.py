"""Untrusted measurement devices and the small rule language for malicious ones.

A malicious device is a first-match list of rules.  Each rule has three
guards (location, setting, memory) and produces an output expression plus
optional memory updates::

    {location = "at:Q0", setting = "any", memory = "any", output = "0"}
    {output = "honest", update = ["seen=setting", "x=xor(block, 1)"]}

Expressions: ``0``, ``1``, ``honest``, ``setting``, ``block``, ``round``
(parity of the in-block round), ``hidden`` (the shared random bit for this
pair), ``hidden:K``, ``mem:KEY`` (0 when unset), ``outcome`` (updates only),
and ``xor(a, b)``, ``and(a, b)``, ``not(a)``.

Location guards: ``any``, ``at:NAME`` (named layout point, all four
coordinates within 1e-6), ``near:X,Y,Z,T`` (fixed coordinates, same
tolerance), ``region:NAME:R`` (spatial distance < R at any time), ``t<V``,
``t>=V``.  Memory guards: ``any``, ``has:KEY``, ``unset:KEY``, ``KEY=V``.
"""

from __future__ import annotations

import copy
import enum
import re
from dataclasses import dataclass, field
from typing import Any

from .geometry import SpacetimePoint

AT_TOL = 1e-6
HONEST = "honest"


class ProgramError(ValueError):
    pass


class DeviceKind(enum.Enum):
    HONEST_SINGLET = "honest"
    MALICIOUS = "malicious"


# --- expressions -----------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z_][\w:.\-]*)|(?P<num>[01])|(?P<punct>[(),]))")
_FUNCS = {"xor": 2, "and": 2, "not": 1}
_ATOMS = {"honest", "setting", "block", "round", "hidden", "outcome"}


@dataclass(frozen=True)
class Expr:
    op: str
    args: tuple = ()

    def __str__(self):
        if self.args and self.op in _FUNCS:
            return f"{self.op}({', '.join(str(a) for a in self.args)})"
        return self.op


def parse_expr(text: str) -> Expr:
    tokens = []
    pos = 0
    text = str(text)
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise ProgramError(f"cannot parse expression {text!r} at offset {pos}")
        tokens.append(m.group("name") or m.group("num") or m.group("punct"))
        pos = m.end()
    expr, rest = _parse_tokens(tokens, text)
    if rest:
        raise ProgramError(f"trailing tokens in expression {text!r}")
    return expr


def _parse_tokens(tokens, text):
    if not tokens:
        raise ProgramError(f"empty expression in {text!r}")
    head, rest = tokens[0], tokens[1:]
    if head in ("0", "1"):
        return Expr(head), rest
    if head in _FUNCS:
        if not rest or rest[0] != "(":
            raise ProgramError(f"{head} needs arguments in {text!r}")
        rest = rest[1:]
        args = []
        while True:
            arg, rest = _parse_tokens(rest, text)
            args.append(arg)
            if not rest:
                raise ProgramError(f"unclosed call in {text!r}")
            if rest[0] == ")":
                rest = rest[1:]
                break
            if rest[0] != ",":
                raise ProgramError(f"expected ',' in {text!r}")
            rest = rest[1:]
        if len(args) != _FUNCS[head]:
            raise ProgramError(f"{head} takes {_FUNCS[head]} argument(s) in {text!r}")
        return Expr(head, tuple(args)), rest
    if head in _ATOMS:
        return Expr(head), rest
    if head.startswith("mem:") and len(head) > 4:
        return Expr(head), rest
    if head.startswith("hidden:") and head[7:].isdigit():
        return Expr(head), rest
    raise ProgramError(f"unknown term {head!r} in {text!r}")


# --- guards ----------------------------------------------------------------


@dataclass(frozen=True)
class Guard:
    text: str = "any"

    def __str__(self):
        return self.text


def _check_location_guard(text: str) -> None:
    if text == "any" or re.fullmatch(r"at:\w+", text) or re.fullmatch(r"region:\w+:[0-9.eE+\-]+", text):
        return
    if re.fullmatch(r"t(<|>=)[0-9.eE+\-]+", text):
        return
    if text.startswith("near:"):
        try:
            coords = [float(c) for c in text[5:].split(",")]
        except ValueError:
            coords = []
        if len(coords) == 4:
            return
    raise ProgramError(f"bad location guard {text!r}")


def _check_memory_guard(text: str) -> None:
    if text == "any" or re.fullmatch(r"(has|unset):\w+", text) or re.fullmatch(r"\w+=[01]", text):
        return
    raise ProgramError(f"bad memory guard {text!r}")


@dataclass(frozen=True)
class Rule:
    location: str = "any"
    setting: str = "any"
    memory: str = "any"
    output: Expr = field(default_factory=lambda: Expr(HONEST))
    updates: tuple[tuple[str, Expr], ...] = ()

    @classmethod
    def from_dict(cls, data: dict) -> "Rule":
        unknown = set(data) - {"location", "setting", "memory", "output", "update"}
        if unknown:
            raise ProgramError(f"unknown rule field(s): {', '.join(sorted(unknown))}")
        location = str(data.get("location", "any"))
        _check_location_guard(location)
        setting = str(data.get("setting", "any"))
        if setting not in ("any", "0", "1"):
            raise ProgramError(f"bad setting guard {setting!r}")
        memory = str(data.get("memory", "any"))
        _check_memory_guard(memory)
        output = parse_expr(data.get("output", HONEST))
        if _mentions(output, "outcome"):
            raise ProgramError("'outcome' is only available in memory updates")
        updates = []
        raw = data.get("update", [])
        if isinstance(raw, str):
            raw = [raw]
        for item in raw:
            key, sep, expr = str(item).partition("=")
            if not sep or not re.fullmatch(r"\w+", key.strip()):
                raise ProgramError(f"bad memory update {item!r}; expected KEY=EXPR")
            updates.append((key.strip(), parse_expr(expr)))
        return cls(location, setting, memory, output, tuple(updates))

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "location": self.location,
            "setting": self.setting,
            "memory": self.memory,
            "output": str(self.output),
        }
        if self.updates:
            out["update"] = [f"{k}={e}" for k, e in self.updates]
        return out


def _mentions(expr: Expr, atom: str) -> bool:
    return expr.op == atom or any(_mentions(a, atom) for a in expr.args)


@dataclass
class DeviceContext:
    setting: int
    block: int
    pair_index: int
    round_index: int
    location: SpacetimePoint
    points: dict[str, SpacetimePoint]


@dataclass
class DeviceSpec:
    kind: DeviceKind = DeviceKind.HONEST_SINGLET
    noise: float = 0.0
    loss_fraction: float = 0.5
    rules: tuple[Rule, ...] = ()
    hidden: tuple[int, ...] = ()
    memory: dict[str, int] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if not 0.0 <= self.noise < 1.0:
            raise ValueError(f"device noise must lie in [0, 1), got {self.noise}")
        if not 0.0 <= self.loss_fraction <= 1.0:
            raise ValueError("loss_fraction must lie in [0, 1]")
        if self.kind is DeviceKind.HONEST_SINGLET and self.rules:
            raise ValueError("honest devices carry no program")

    @property
    def honest(self) -> bool:
        return self.kind is DeviceKind.HONEST_SINGLET

    def clone(self) -> "DeviceSpec":
        return copy.deepcopy(self)

    @classmethod
    def from_dict(cls, data: dict, name: str = "") -> "DeviceSpec":
        unknown = set(data) - {"kind", "noise", "loss_fraction", "rules", "hidden", "memory"}
        if unknown:
            raise ProgramError(f"unknown device field(s): {', '.join(sorted(unknown))}")
        try:
            kind = DeviceKind(data.get("kind", "honest"))
        except ValueError:
            raise ProgramError(f"device kind must be 'honest' or 'malicious', got {data.get('kind')!r}") from None
        rules = tuple(Rule.from_dict(r) for r in data.get("rules", []))
        hidden = tuple(int(b) & 1 for b in data.get("hidden", []))
        memory = {str(k): int(v) for k, v in data.get("memory", {}).items()}
        return cls(
            kind=kind,
            noise=float(data.get("noise", 0.0)),
            loss_fraction=float(data.get("loss_fraction", 0.5)),
            rules=rules,
            hidden=hidden,
            memory=memory,
            name=name,
        )

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind.value, "noise": self.noise, "loss_fraction": self.loss_fraction}
        if self.rules:
            out["rules"] = [r.to_dict() for r in self.rules]
        if self.hidden:
            out["hidden"] = list(self.hidden)
        if self.memory:
            out["memory"] = dict(self.memory)
        return out

    # -- program evaluation --

    def _location_ok(self, guard: str, ctx: DeviceContext) -> bool:
        if guard == "any":
            return True
        loc = ctx.location
        if guard.startswith("at:"):
            target = ctx.points.get(guard[3:])
            if target is None:
                return False
            return all(abs(a - b) <= AT_TOL for a, b in zip(loc.as_tuple(), target.as_tuple()))
        if guard.startswith("near:"):
            target = [float(c) for c in guard[5:].split(",")]
            return all(abs(a - b) <= AT_TOL for a, b in zip(loc.as_tuple(), target))
        if guard.startswith("region:"):
            _, pname, radius = guard.split(":")
            target = ctx.points.get(pname)
            return target is not None and loc.spatial_distance(target) < float(radius)
        if guard.startswith("t<"):
            return loc.t < float(guard[2:])
        if guard.startswith("t>="):
            return loc.t >= float(guard[3:])
        raise ProgramError(f"bad location guard {guard!r}")

    def _memory_ok(self, guard: str) -> bool:
        if guard == "any":
            return True
        if guard.startswith("has:"):
            return guard[4:] in self.memory
        if guard.startswith("unset:"):
            return guard[6:] not in self.memory
        key, _, val = guard.partition("=")
        return self.memory.get(key) == int(val)

    def _eval(self, expr: Expr, ctx: DeviceContext, outcome: int | None = None):
        op = expr.op
        if op in ("0", "1"):
            return int(op)
        if op == HONEST:
            return HONEST
        if op == "setting":
            return ctx.setting
        if op == "block":
            return ctx.block
        if op == "round":
            return ctx.round_index & 1
        if op == "outcome":
            return 0 if outcome is None else outcome
        if op == "hidden":
            return self.hidden[ctx.pair_index % len(self.hidden)] if self.hidden else 0
        if op.startswith("hidden:"):
            return self.hidden[int(op[7:]) % len(self.hidden)] if self.hidden else 0
        if op.startswith("mem:"):
            return self.memory.get(op[4:], 0)
        vals = [self._eval(a, ctx, outcome) for a in expr.args]
        if HONEST in vals:
            raise ProgramError("'honest' cannot be combined with other terms")
        if op == "xor":
            return vals[0] ^ vals[1]
        if op == "and":
            return vals[0] & vals[1]
        if op == "not":
            return 1 - vals[0]
        raise ProgramError(f"unknown operator {op!r}")

    def select_rule(self, ctx: DeviceContext) -> Rule | None:
        for rule in self.rules:
            if not self._location_ok(rule.location, ctx):
                continue
            if rule.setting != "any" and int(rule.setting) != ctx.setting:
                continue
            if not self._memory_ok(rule.memory):
                continue
            return rule
        return None

    def respond(self, ctx: DeviceContext):
        """Return (output, rule); output is 0, 1 or HONEST."""
        rule = self.select_rule(ctx)
        if rule is None:
            return HONEST, None
        return self._eval(rule.output, ctx), rule

    def apply_updates(self, rule: Rule | None, ctx: DeviceContext, outcome: int) -> None:
        if rule is None:
            return
        staged = {key: self._eval(expr, ctx, outcome) for key, expr in rule.updates}
        for key, val in staged.items():
            if val == HONEST:
                raise ProgramError("memory cannot store 'honest'")
            self.memory[key] = int(val)


def honest_device(noise: float = 0.0, loss_fraction: float = 0.5) -> DeviceSpec:
    return DeviceSpec(noise=noise, loss_fraction=loss_fraction)


def malicious_device(rules, hidden=(), name: str = "", memory=None) -> DeviceSpec:
    parsed = tuple(r if isinstance(r, Rule) else Rule.from_dict(r) for r in rules)
    return DeviceSpec(
        kind=DeviceKind.MALICIOUS, rules=parsed, hidden=tuple(hidden), name=name, memory=dict(memory or {})
    )


@dataclass
class DeviceBank:
    """Alice's devices: one for the a-side qubits, one per b-side block."""

    a: DeviceSpec = field(default_factory=DeviceSpec)
    b: tuple[DeviceSpec, DeviceSpec] = field(default_factory=lambda: (DeviceSpec(), DeviceSpec()))

    @classmethod
    def honest(cls, noise: float = 0.0, loss_fraction: float = 0.5) -> "DeviceBank":
        return cls(
            honest_device(noise, loss_fraction),
            (honest_device(noise, loss_fraction), honest_device(noise, loss_fraction)),
        )

    def clone(self) -> "DeviceBank":
        return copy.deepcopy(self)
