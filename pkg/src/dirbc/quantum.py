"""Singlet-pair statistics, the measurement-direction convention, and device measurement.

Outcome +1 is bit 0 and -1 is bit 1.  The committer's setting bit is L_j and
selects X when 1, Y when 0; the unveiler's setting bit is L^i_j and selects
X' when 1, Y' when 0.  A round is won when t xor s = x*y.

Pairs are simulated without a state vector: the first side measured draws a
uniform outcome, the second side draws from the singlet conditional given the
first.  This reproduces the joint distribution exactly and is order
independent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .bitmath import HONEST_WIN
from .devices import HONEST, DeviceContext, DeviceSpec, ProgramError
from .geometry import SpacetimePoint

TWO_PI = 2.0 * math.pi
ANGLE_TOL = 1e-9

COMMITTER = "committer"
UNVEILER = "unveiler"
SIDE_A = 0
SIDE_B = 1

FATE_UNSET = -1
FATE_OK = 0
FATE_LOST = 1
FATE_FLIP = 2


def normalize_angle(theta: float) -> float:
    theta = math.fmod(theta, TWO_PI)
    if theta < 0:
        theta += TWO_PI
    # fmod can return a value that rounds to 2pi
    return 0.0 if theta >= TWO_PI else theta


@dataclass(frozen=True)
class Direction:
    angle: float

    def __post_init__(self):
        object.__setattr__(self, "angle", normalize_angle(float(self.angle)))


def _line_separation(a: float, b: float) -> float:
    """Angle between two undirected lines, in [0, pi/2]."""
    d = math.fmod(abs(a - b), math.pi)
    return min(d, math.pi - d)


@dataclass(frozen=True)
class DirectionSet:
    x_dir: Direction
    y_dir: Direction
    xp_dir: Direction
    yp_dir: Direction
    outcome_flip_unveiler: bool = True

    def violations(self) -> list[str]:
        out = []
        quarter, eighth = math.pi / 2, math.pi / 4
        if abs(_line_separation(self.x_dir.angle, self.y_dir.angle) - quarter) > ANGLE_TOL:
            out.append("X is not orthogonal to Y")
        if abs(_line_separation(self.xp_dir.angle, self.yp_dir.angle) - quarter) > ANGLE_TOL:
            out.append("X' is not orthogonal to Y'")
        if abs(_line_separation(self.x_dir.angle, self.xp_dir.angle) - eighth) > ANGLE_TOL:
            out.append("X' is not separated from X by pi/4")
        if abs(_line_separation(self.y_dir.angle, self.yp_dir.angle) - eighth) > ANGLE_TOL:
            out.append("Y' is not separated from Y by pi/4")
        return out

    def is_valid(self) -> bool:
        return not self.violations()


def singlet_joint_distribution(theta_a, theta_b) -> np.ndarray:
    """2x2 array P[t, s] of raw singlet outcomes at the two angles."""
    ta = theta_a.angle if isinstance(theta_a, Direction) else float(theta_a)
    tb = theta_b.angle if isinstance(theta_b, Direction) else float(theta_b)
    c = math.cos(ta - tb)
    same = (1.0 - c) / 4.0
    diff = (1.0 + c) / 4.0
    return np.array([[same, diff], [diff, same]])


def direction_for_bit(ds: DirectionSet, role: str, program_bit: int) -> Direction:
    if role == COMMITTER:
        return ds.x_dir if program_bit else ds.y_dir
    if role == UNVEILER:
        return ds.xp_dir if program_bit else ds.yp_dir
    raise ValueError(f"role must be {COMMITTER!r} or {UNVEILER!r}")


def _pair_win_probabilities(ds: DirectionSet) -> dict[tuple[int, int], float]:
    wins = {}
    for x, y in itertools.product((0, 1), repeat=2):
        joint = singlet_joint_distribution(direction_for_bit(ds, COMMITTER, x), direction_for_bit(ds, UNVEILER, y))
        p_equal = joint[0, 0] + joint[1, 1]
        if ds.outcome_flip_unveiler:
            p_equal = 1.0 - p_equal
        wins[(x, y)] = (1.0 - p_equal) if x * y else p_equal
    return wins


def pair_win_probabilities(ds: DirectionSet) -> dict[tuple[int, int], float]:
    """P(t xor s = x*y) for each setting pair (x, y)."""
    problems = ds.violations()
    if problems:
        raise ValueError("invalid direction set: " + "; ".join(problems))
    return _pair_win_probabilities(ds)


def honest_round_win_probability(ds: DirectionSet) -> float:
    return sum(pair_win_probabilities(ds).values()) / 4.0


def search_conventions(x_angle: float = 0.0) -> list[DirectionSet]:
    """All 16 primed-direction/flip conventions around fixed X and Y = X + pi/2.

    X' ranges over the four angles at line separation pi/4 from X, Y' is one
    of the two angles orthogonal to X', and the unveiler flip is on or off.
    Returns those whose four per-pair win probabilities all equal (2+sqrt2)/4.
    """
    x = Direction(x_angle)
    y = Direction(x_angle + math.pi / 2)
    found = []
    for k, sign, flip in itertools.product(range(4), (1, -1), (False, True)):
        xp = x_angle + math.pi / 4 + k * math.pi / 2
        ds = DirectionSet(x, y, Direction(xp), Direction(xp + sign * math.pi / 2), flip)
        wins = pair_win_probabilities(ds)
        if all(abs(w - HONEST_WIN) < 1e-12 for w in wins.values()):
            found.append(ds)
    return found


def canonical_direction_set() -> DirectionSet:
    """X = 0, Y = pi/2, X' = 3pi/4, Y' = pi/4, unveiler outcome flipped.

    The flipped member of ``search_conventions()``; every setting pair then
    wins with probability (2+sqrt2)/4.
    """
    return DirectionSet(
        Direction(0.0), Direction(math.pi / 2), Direction(3 * math.pi / 4), Direction(math.pi / 4), True
    )


@dataclass(frozen=True)
class RoundRecord:
    setting_committer: int
    setting_unveiler: int
    outcome_committer: int | None
    outcome_unveiler: int | None
    lost: bool = False

    def __post_init__(self):
        has = self.outcome_committer is not None and self.outcome_unveiler is not None
        if has == self.lost:
            raise ValueError("outcomes must be present exactly when the round is not lost")

    def won(self) -> bool:
        if self.lost:
            return False
        return (self.outcome_committer ^ self.outcome_unveiler) == self.setting_committer * self.setting_unveiler


class MeasurementError(RuntimeError):
    pass


class EntangledRegistry:
    """Bookkeeping for 2N shared pairs; pair indices are 1-based as in the protocol text."""

    def __init__(self, n_pairs: int):
        if n_pairs < 1:
            raise ValueError("registry needs at least one pair")
        self.n_pairs = n_pairs
        self.outcome = np.zeros((2, n_pairs), dtype=np.uint8)
        self.measured = np.zeros((2, n_pairs), dtype=bool)
        self.angle = np.zeros((2, n_pairs))
        self.fate = np.full(n_pairs, FATE_UNSET, dtype=np.int8)

    def _positions(self, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        if idx.size and (idx.min() < 1 or idx.max() > self.n_pairs):
            raise IndexError(f"pair index out of range 1..{self.n_pairs}")
        return idx - 1

    def is_measured(self, pair_index: int, side: int) -> bool:
        return bool(self.measured[side, self._positions([pair_index])[0]])

    def lost(self, pair_index: int) -> bool:
        return self.fate[self._positions([pair_index])[0]] == FATE_LOST


def _draw_fates(registry, pos, device: DeviceSpec, rng):
    fresh = pos[registry.fate[pos] == FATE_UNSET]
    if fresh.size == 0:
        return
    if device.noise == 0.0:
        registry.fate[fresh] = FATE_OK
        return
    u = rng.random(fresh.size)
    fate = np.full(fresh.size, FATE_OK, dtype=np.int8)
    fate[u < device.noise] = FATE_FLIP
    fate[u < device.noise * device.loss_fraction] = FATE_LOST
    registry.fate[fresh] = fate


def _honest_outcomes(registry, pos, side, angles, rng) -> np.ndarray:
    other = 1 - side
    partner_done = registry.measured[other, pos] & (registry.fate[pos] == FATE_OK)
    u = rng.random(pos.size)
    # conditional singlet draw: P(same as partner) = (1 - cos d) / 2
    p_same = (1.0 - np.cos(angles - registry.angle[other, pos])) / 2.0
    partner = registry.outcome[other, pos]
    conditional = np.where(u < p_same, partner, 1 - partner).astype(np.uint8)
    marginal = (u < 0.5).astype(np.uint8)
    return np.where(partner_done, conditional, marginal)


def measure_block(
    registry: EntangledRegistry,
    indices,
    side: int,
    angles,
    device: DeviceSpec,
    location: SpacetimePoint,
    rng: np.random.Generator,
    settings=None,
    points: dict[str, SpacetimePoint] | None = None,
    block_size: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Measure one side of several pairs; returns (raw outcome bits, lost mask).

    ``settings`` are the declared setting bits shown to malicious programs;
    ``block_size`` (N) lets a program see which half of the registry a pair
    belongs to.
    """
    if side not in (SIDE_A, SIDE_B):
        raise ValueError("side must be 0 (a) or 1 (b)")
    pos = registry._positions(indices)
    if np.unique(pos).size != pos.size:
        raise MeasurementError("a pair appears twice in one measurement request")
    if registry.measured[side, pos].any():
        first = int(pos[registry.measured[side, pos]][0]) + 1
        raise MeasurementError(f"side {'ab'[side]} of pair {first} was already measured")
    angles = np.broadcast_to(np.asarray(angles, dtype=float), pos.shape).copy()
    _draw_fates(registry, pos, device, rng)

    if device.honest:
        out = _honest_outcomes(registry, pos, side, angles, rng)
    else:
        out = _program_outcomes(registry, pos, side, angles, device, location, rng, settings, points, block_size)

    fate = registry.fate[pos]
    if device.honest:
        flip = fate == FATE_FLIP
        if flip.any():
            out[flip] = rng.integers(0, 2, size=int(flip.sum()), dtype=np.uint8)
    lost = fate == FATE_LOST
    out[lost] = 0
    registry.outcome[side, pos] = out
    registry.angle[side, pos] = angles
    registry.measured[side, pos] = True
    return out, lost


def _program_outcomes(registry, pos, side, angles, device, location, rng, settings, points, block_size):
    if settings is None:
        raise ProgramError("malicious devices need the declared setting bits")
    settings = np.broadcast_to(np.asarray(settings, dtype=np.int64), pos.shape)
    n = block_size or registry.n_pairs
    out = np.zeros(pos.size, dtype=np.uint8)
    for k, p in enumerate(pos):
        ctx = DeviceContext(
            setting=int(settings[k]),
            block=int(p // n),
            pair_index=int(p + 1),
            round_index=int(p % n),
            location=location,
            points=points or {},
        )
        value, rule = device.respond(ctx)
        if value == HONEST:
            value = int(_honest_outcomes(registry, pos[k : k + 1], side, angles[k : k + 1], rng)[0])
        out[k] = value
        device.apply_updates(rule, ctx, int(value))
    return out


def measure(
    registry: EntangledRegistry,
    pair_index: int,
    side: int,
    direction: Direction,
    device: DeviceSpec,
    location: SpacetimePoint,
    rng: np.random.Generator,
    setting: int = 0,
    points=None,
    block_size=None,
) -> int | None:
    """Single-pair form of ``measure_block``; returns None for a lost round."""
    out, lost = measure_block(
        registry, [pair_index], side, [direction.angle], device, location, rng, [setting], points, block_size
    )
    return None if lost[0] else int(out[0])
