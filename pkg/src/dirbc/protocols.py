"""CHSH1/2/3, RCCBC and dual-run commitments executed over the light-speed network.

Pair indices are 1-based; block 0 holds pairs 1..N and block 1 holds N+1..2N.
The committer measures block b xor x and unveiler A_i holds block i xor x,
so the committed bit's unveiler always holds the partners of the measured
qubits.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import bitmath
from .adversary import RccbcStrategy, ReducedStrategy
from .bitmath import BitString
from .devices import DeviceBank
from .geometry import LIGHTLIKE_TOL, ProtocolLayout, SpacetimePoint, earliest_joint_reception, validate_layout
from .network import COMPUTE, DEVICE, GEN, VERDICT, CausalityFault, Network, Transcript, Worldline
from .quantum import (
    COMMITTER,
    SIDE_A,
    SIDE_B,
    UNVEILER,
    DirectionSet,
    EntangledRegistry,
    canonical_direction_set,
    direction_for_bit,
    measure_block,
)
from .seeding import STREAM_ALICE, STREAM_BOB, STREAM_DEVICE, STREAM_DUAL, derive_rng, derive_seed

LOST_CHAR = "x"
VERIFIER_PLACEMENTS = ("earliest", "bob_c", "bob_i")


class ConfigError(ValueError):
    pass


class Variant(enum.Enum):
    CHSH1 = "CHSH1"
    CHSH2 = "CHSH2"
    CHSH3 = "CHSH3"
    RCCBC = "RCCBC"

    @property
    def is_chsh(self) -> bool:
        return self is not Variant.RCCBC


@dataclass(frozen=True)
class ProtocolConfig:
    variant: Variant
    n: int
    xi: float = 0.05
    c_param: float = 1.0
    delta: float = 0.0
    loss_fraction: float = 0.5
    layout: ProtocolLayout = field(default_factory=ProtocolLayout.symmetric)
    l0: BitString | None = None
    seed: int = 0
    dual: bool = False
    travel_speed: float = 0.9
    verifier: str = "earliest"
    directions: DirectionSet = field(default_factory=canonical_direction_set)

    def __post_init__(self):
        if isinstance(self.variant, str):
            try:
                object.__setattr__(self, "variant", Variant(self.variant.upper()))
            except ValueError:
                raise ConfigError(f"variant: unknown protocol {self.variant!r}") from None
        if isinstance(self.l0, str):
            object.__setattr__(self, "l0", BitString.from_str(self.l0))
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ConfigError(f"n: must be a positive integer, got {self.n!r}")
        if self.variant.is_chsh:
            try:
                bitmath.check_xi(self.xi)
            except ValueError as exc:
                raise ConfigError(f"xi: {exc}") from None
        else:
            if self.n % 2:
                raise ConfigError("n: RCCBC needs an even N")
            if not self.c_param > 0:
                raise ConfigError("c: RCCBC constant must be positive")
        if not 0.0 <= self.delta < 1.0:
            raise ConfigError(f"delta: must lie in [0, 1), got {self.delta}")
        if not 0.0 <= self.loss_fraction <= 1.0:
            raise ConfigError("loss_fraction: must lie in [0, 1]")
        if self.l0 is not None:
            if self.variant is not Variant.CHSH1:
                raise ConfigError("l0: only CHSH1 uses a pre-agreed L0")
            if len(self.l0) != self.n:
                raise ConfigError(f"l0: expected {self.n} bits, got {len(self.l0)}")
        if self.dual and not self.variant.is_chsh:
            raise ConfigError("dual: only CHSH variants can be duplicated")
        if not 0.0 < self.travel_speed < 1.0:
            raise ConfigError("travel_speed: must lie in (0, 1)")
        if self.verifier not in VERIFIER_PLACEMENTS:
            raise ConfigError(f"verifier: must be one of {', '.join(VERIFIER_PLACEMENTS)}")
        if not self.directions.is_valid():
            raise ConfigError("directions: " + "; ".join(self.directions.violations()))
        problems = validate_layout(self.layout)
        if problems:
            raise ConfigError("layout: " + "; ".join(problems))

    def with_seed(self, seed: int) -> "ProtocolConfig":
        return replace(self, seed=int(seed))


# --- block algebra ------------------------------------------------------------


def commit_block(b: int, x: int) -> int:
    """Block measured by A_c: pairs j + xN for b = 0, N + j - xN for b = 1."""
    return b ^ x


def unveil_block(i: int, x: int) -> int:
    """Block held by A_i: pairs j + xN + iN - 2ixN."""
    return i ^ x


def block_indices(block: int, n: int) -> np.ndarray:
    return np.arange(1 + block * n, n + block * n + 1)


@dataclass
class CommitState:
    n: int
    x: int
    b: int | None = None
    assignment: dict[str, int] = field(default_factory=dict)
    committed: bool = False
    unveiled: set = field(default_factory=set)


@dataclass(frozen=True)
class Outcomes:
    """Measured or reported bits with a loss mask."""

    bits: BitString
    lost: np.ndarray

    @classmethod
    def clean(cls, bits: BitString) -> "Outcomes":
        return cls(bits, np.zeros(len(bits), dtype=bool))

    def __len__(self):
        return len(self.bits)

    def __str__(self):
        chars = np.frombuffer(str(self.bits).encode("ascii"), dtype=np.uint8).copy()
        chars[self.lost] = ord(LOST_CHAR)
        return chars.tobytes().decode("ascii")

    @classmethod
    def from_str(cls, text: str) -> "Outcomes":
        lost = np.frombuffer(text.encode("ascii"), dtype=np.uint8) == ord(LOST_CHAR)
        return cls(BitString.from_str(text.replace(LOST_CHAR, "0")), lost.copy())


def prepare(config: ProtocolConfig, rng: np.random.Generator, devices: DeviceBank | None = None):
    """Create 2N pairs, draw the secret x and hand the b-side blocks to A_0 and A_1."""
    if not config.variant.is_chsh:
        raise ConfigError("prepare() is for CHSH variants")
    if devices is None:
        devices = DeviceBank.honest(config.delta, config.loss_fraction)
    registry = EntangledRegistry(2 * config.n)
    x = int(rng.integers(0, 2))
    state = CommitState(n=config.n, x=x, assignment={"A_0": unveil_block(0, x), "A_1": unveil_block(1, x)})
    return state, registry, devices


def commit(
    state: CommitState,
    L: BitString,
    b: int,
    registry: EntangledRegistry,
    devices: DeviceBank,
    rng: np.random.Generator,
    location: SpacetimePoint,
    directions: DirectionSet | None = None,
    points=None,
) -> Outcomes:
    if state.committed:
        raise RuntimeError("commitment already performed")
    if len(L) != state.n:
        raise ValueError(f"L must have {state.n} bits")
    if b not in (0, 1):
        raise ValueError("committed bit must be 0 or 1")
    ds = directions or canonical_direction_set()
    angles = np.where(L.bits == 1, direction_for_bit(ds, COMMITTER, 1).angle, direction_for_bit(ds, COMMITTER, 0).angle)
    idx = block_indices(commit_block(b, state.x), state.n)
    out, lost = measure_block(
        registry, idx, SIDE_A, angles, devices.a, location, rng, L.bits, points, block_size=state.n
    )
    state.committed = True
    state.b = b
    return Outcomes(BitString(out), lost)


def unveil(
    state: CommitState,
    i: int,
    L_i: BitString,
    registry: EntangledRegistry,
    devices: DeviceBank,
    rng: np.random.Generator,
    location: SpacetimePoint,
    directions: DirectionSet | None = None,
    points=None,
) -> Outcomes:
    if i in state.unveiled:
        raise RuntimeError(f"A_{i} already unveiled")
    if len(L_i) != state.n:
        raise ValueError(f"L^{i} must have {state.n} bits")
    ds = directions or canonical_direction_set()
    angles = np.where(L_i.bits == 1, direction_for_bit(ds, UNVEILER, 1).angle, direction_for_bit(ds, UNVEILER, 0).angle)
    block = unveil_block(i, state.x)
    out, lost = measure_block(
        registry, block_indices(block, state.n), SIDE_B, angles, devices.b[block], location, rng, L_i.bits, points,
        block_size=state.n,
    )
    if ds.outcome_flip_unveiler:
        out = out ^ np.uint8(1)
        out[lost] = 0
    state.unveiled.add(i)
    return Outcomes(BitString(out), lost)


# --- verdicts ---------------------------------------------------------------


class Status(enum.Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"
    NOT_UNVEILED = "NotUnveiled"


@dataclass(frozen=True)
class VerdictEntry:
    status: Status
    statistic: float | None = None
    point: SpacetimePoint | None = None

    @property
    def accepted(self) -> bool:
        return self.status is Status.ACCEPTED


@dataclass(frozen=True)
class Verdict:
    entries: tuple[VerdictEntry, VerdictEntry]

    def __getitem__(self, i: int) -> VerdictEntry:
        return self.entries[i]

    def accepted(self, i: int) -> bool:
        return self.entries[i].accepted

    def statuses(self) -> tuple[Status, Status]:
        return (self.entries[0].status, self.entries[1].status)


def chsh_mismatches(O: Outcomes, O_i: Outcomes, L: BitString, L_i: BitString) -> int:
    """d(O^i xor O, L^i L) with every lost round counted as a mismatch."""
    n = len(L)
    for s in (O, O_i, L_i):
        if len(s) != n:
            raise ValueError("all strings must have the same length")
    lost = O.lost | O_i.lost
    wrong = (O.bits.bits ^ O_i.bits.bits) != (L.bits & L_i.bits)
    return int(np.count_nonzero(wrong | lost))


def verify_chsh(O, O_i, L: BitString, L_i: BitString, config: ProtocolConfig, point=None) -> VerdictEntry:
    """Accept iff the mismatch count is strictly below N(1/2 - 1/(2 sqrt2) + xi)."""
    O = O if isinstance(O, Outcomes) else Outcomes.clean(O)
    O_i = O_i if isinstance(O_i, Outcomes) else Outcomes.clean(O_i)
    mism = chsh_mismatches(O, O_i, L, L_i)
    n = len(L)
    ok = mism < bitmath.mismatch_threshold(n, config.xi)
    return VerdictEntry(Status.ACCEPTED if ok else Status.REJECTED, float(n - mism), point)


# --- run decisions --------------------------------------------------------------


@dataclass(frozen=True)
class Decisions:
    """b = None declines to commit; unveil flags are independent per agent.

    ``careless`` makes an A_i that does not unveil still feed inputs to its
    devices (outputs are kept, never sent).
    """

    b: int | None = 0
    unveil: tuple[bool, bool] = (True, True)
    careless: bool = False


@dataclass
class RunContext:
    """Mutable run state shared by the agent handlers of one execution."""

    config: ProtocolConfig
    net: Network
    rng_alice: np.random.Generator
    rng_bob: np.random.Generator
    rng_device: np.random.Generator
    t0: float
    verdicts: dict[int, VerdictEntry] = field(default_factory=dict)
    verdict_sites: dict[int, SpacetimePoint] = field(default_factory=dict)
    notes: dict = field(default_factory=dict)


def _verifier_position(config: ProtocolConfig, i: int):
    layout = config.layout
    if config.verifier == "bob_c":
        return layout.commit_point.position
    if config.verifier == "bob_i":
        return layout.unveil_points[i].position
    return earliest_joint_reception(layout, i).position


def _setup_network(config: ProtocolConfig) -> tuple[Network, float]:
    layout = config.layout
    p = layout.commit_point
    dists = [p.spatial_distance(q) for q in layout.unveil_points]
    # room for A_i to travel and for pre-shared messages to reach Q_i before the protocol
    t0 = p.t - max(dists) / config.travel_speed - max(dists) - 1.0
    net = Network()
    net.add_agent("A_c", Worldline.static(p.position))
    net.add_agent("B_c", Worldline.static(p.position))
    for i, q in enumerate(layout.unveil_points):
        net.add_agent(f"A_{i}", Worldline.travel(p.position, q.position, t0, config.travel_speed))
        net.add_agent(f"B_{i}", Worldline.static(q.position))
        net.add_agent(f"V_{i}", Worldline.static(_verifier_position(config, i)))
    net.transcript.header.update(
        {
            "variant": config.variant.value + ("-dual" if config.dual else ""),
            "n": str(config.n),
            "seed": str(config.seed),
            "layout": ";".join(f"{k}={v}" for k, v in layout.named_points().items()),
        }
    )
    return net, t0


def _require_at(net: Network, agent: str, point: SpacetimePoint) -> None:
    here = net.point_of(agent)
    if here.spatial_distance(point) > 1e-6 or abs(here.t - point.t) > LIGHTLIKE_TOL:
        raise CausalityFault(f"{agent} is at {here}, expected at {point}")


def _log_verdict(ctx: RunContext, i: int, entry: VerdictEntry, sources) -> None:
    net = ctx.net
    point = net.point_of(net._current)
    entry = replace(entry, point=point)
    ctx.verdicts[i] = entry
    stat = "-" if entry.statistic is None else repr(entry.statistic)
    net.log(VERDICT, f"verdict{i}", f"{entry.status.value}:{stat}", sources)


def _check_verdict_site(ctx: RunContext, i: int) -> None:
    if ctx.config.verifier != "earliest" or i not in ctx.verdicts:
        return
    got = ctx.verdicts[i].point
    expected = earliest_joint_reception(ctx.config.layout, i)
    if abs(got.t - expected.t) > 1e-9 or got.spatial_distance(expected) > 1e-9:
        raise CausalityFault(f"verdict {i} reached at {got}, geometry predicts {expected}")


# --- CHSH runs ----------------------------------------------------------------


def _verdict_from(ctx: RunContext) -> Verdict:
    entries = []
    for i in (0, 1):
        entries.append(ctx.verdicts.get(i, VerdictEntry(Status.NOT_UNVEILED)))
        _check_verdict_site(ctx, i)
    return Verdict(tuple(entries))


def run_chsh_variant(
    config: ProtocolConfig,
    decisions: Decisions = Decisions(),
    devices: DeviceBank | None = None,
    strategy: ReducedStrategy | None = None,
    unveil_strings: tuple[BitString, BitString] | None = None,
) -> tuple[Transcript, Verdict]:
    """Execute one CHSH1/CHSH2/CHSH3 commitment end to end.

    ``strategy`` replaces Alice's devices by a classical cheating strategy.
    ``unveil_strings`` fixes the strings B_0 and B_1 hand out (CHSH3 only).
    """
    if not config.variant.is_chsh:
        raise ConfigError("run_chsh_variant needs a CHSH variant")
    if strategy is not None and config.variant is Variant.CHSH3:
        raise ConfigError("reduced strategies model the fixed-direction variants only")
    if unveil_strings is not None and config.variant is not Variant.CHSH3:
        raise ConfigError("unveil_strings applies to CHSH3 only")
    n = config.n
    layout = config.layout
    points = layout.named_points()
    ds = config.directions
    net, t0 = _setup_network(config)
    ctx = RunContext(
        config,
        net,
        derive_rng(config.seed, STREAM_ALICE),
        derive_rng(config.seed, STREAM_BOB),
        derive_rng(config.seed, STREAM_DEVICE),
        t0,
    )
    bank = devices if devices is not None else DeviceBank.honest(config.delta, config.loss_fraction)
    alice: dict = {}
    bob: dict = {}

    # ---- preparation ----
    def bob_prep(net):
        if config.variant is Variant.CHSH1:
            l0 = config.l0 if config.l0 is not None else BitString.random(n, ctx.rng_bob)
            ev = net.log(GEN, "L0", l0)
            bob["L0"] = l0
            net.send("L0", l0, ["A_c", "A_0", "A_1", "B_0", "B_1", "V_0", "V_1"], [ev.seq])
        elif config.variant is Variant.CHSH2:
            l0 = BitString.random(n, ctx.rng_bob)
            ev = net.log(GEN, "L0", l0)
            l1 = ~l0
            ev1 = net.log(COMPUTE, "L1", l1, [ev.seq])
            net.send("L0", l0, ["B_0", "V_0"], [ev.seq])
            net.send("L1", l1, ["B_1", "V_1"], [ev1.seq])

    def alice_prep(net):
        if strategy is not None:
            ev = net.log(GEN, "strategy", f"D:{strategy.d_offset}")
            alice["strategy"] = ev.seq
            for i in (0, 1):
                net.send("strategy", f"D:{strategy.d_offset}", [f"A_{i}"], [ev.seq], demand={f"A_{i}": net.point_of("A_c")})
            return
        state, registry, _ = prepare(config, ctx.rng_alice, bank)
        alice.update(state=state, registry=registry)
        ev_x = net.log(GEN, "x", state.x)
        ev_pairs = net.log(DEVICE, "pairs", 2 * n)
        alice["x_ev"], alice["pairs_ev"] = ev_x.seq, ev_pairs.seq
        for i in (0, 1):
            block = state.assignment[f"A_{i}"]
            net.send(
                "qubits",
                f"block{block}",
                [f"A_{i}"],
                [ev_x.seq, ev_pairs.seq],
                demand={f"A_{i}": net.point_of("A_c")},
            )

    net.at(t0, "B_c", bob_prep)
    net.at(t0, "A_c", alice_prep)

    # ---- commitment ----
    def bob_commit(net):
        _require_at(net, "B_c", layout.commit_point)
        L = BitString.random(n, ctx.rng_bob)
        bob["L"] = L
        ev = net.log(GEN, "L", L)
        net.send("L", L, ["A_c", "V_0", "V_1"], [ev.seq], demand={"A_c": layout.commit_point})

    def alice_commit(net, recv):
        L = BitString.from_str(recv.payload)
        if strategy is not None:
            O = Outcomes.clean(strategy.respond(L))
            ev = net.log(COMPUTE, "O", O, [recv.seq, alice["strategy"]])
        elif decisions.b is None:
            O = Outcomes.clean(BitString.random(n, ctx.rng_alice))
            ev = net.log(GEN, "O", O)
        else:
            O = commit(
                alice["state"], L, decisions.b, alice["registry"], bank, ctx.rng_device,
                net.point_of("A_c"), ds, points,
            )
            ev = net.log(DEVICE, "O", O, [recv.seq, alice["x_ev"], alice["pairs_ev"]])
        alice["O"] = O
        net.send("O", O, ["B_c", "V_0", "V_1"], [ev.seq])

    net.at(layout.commit_point.t, "B_c", bob_commit)
    net.on_receive("A_c", alice_commit, label="L")

    # ---- unveiling ----
    def unveiler_string(net, i):
        """L^i as known to A_i, with the event id it derives from."""
        agent = net.agents[f"A_{i}"]
        if config.variant is Variant.CHSH1:
            recv = agent.inbox["L0"]
            l0 = BitString.from_str(recv.payload)
            if i == 0:
                return l0, recv.seq
            ev = net.log(COMPUTE, "L1", ~l0, [recv.seq])
            return ~l0, ev.seq
        recv = agent.inbox[f"L{i}"]
        return BitString.from_str(recv.payload), recv.seq

    def alice_unveil(net, i):
        unveiling = decisions.unveil[i]
        if not unveiling and not decisions.careless:
            return
        if strategy is not None:
            if not unveiling:
                return
            src = net.agents[f"A_{i}"].inbox["strategy"].seq
            O_i = Outcomes.clean(BitString.zeros(n) if i == 0 else strategy.d_offset)
            ev = net.log(COMPUTE, f"O{i}", O_i, [src])
        else:
            L_i, src = unveiler_string(net, i)
            qubits = net.agents[f"A_{i}"].inbox["qubits"].seq
            O_i = unveil(
                alice["state"], i, L_i, alice["registry"], bank, ctx.rng_device, net.point_of(f"A_{i}"), ds, points
            )
            ev = net.log(DEVICE, f"O{i}", O_i, [src, qubits])
        if unveiling:
            net.send(f"O{i}", O_i, [f"B_{i}", f"V_{i}"], [ev.seq])

    def bob_unveil_point(net, i):
        _require_at(net, f"B_{i}", layout.unveil_points[i])
        if config.variant is Variant.CHSH1:
            return
        if config.variant is Variant.CHSH2:
            recv = net.agents[f"B_{i}"].inbox[f"L{i}"]
            net.send(f"L{i}", recv.payload, [f"A_{i}"], [recv.seq], demand={f"A_{i}": layout.unveil_points[i]})
            return
        if unveil_strings is not None:
            L_i = unveil_strings[i]
        else:
            L_i = BitString.random(n, ctx.rng_bob)
        ev = net.log(GEN, f"L{i}", L_i)
        net.send(f"L{i}", L_i, [f"A_{i}", f"V_{i}"], [ev.seq], demand={f"A_{i}": layout.unveil_points[i]})

    for i in (0, 1):
        q = layout.unveil_points[i]
        net.at(q.t, f"B_{i}", lambda net, i=i: bob_unveil_point(net, i))
        if config.variant is Variant.CHSH1:
            net.at(q.t, f"A_{i}", lambda net, i=i, q=q: (_require_at(net, f"A_{i}", q), alice_unveil(net, i)))
        else:
            net.on_receive(f"A_{i}", lambda net, ev, i=i: alice_unveil(net, i), label=f"L{i}")

    # ---- verification ----
    def verifier(net, recv, i):
        inbox = net.agents[f"V_{i}"].inbox
        need = ("L", "O", f"O{i}", "L0" if config.variant is Variant.CHSH1 else f"L{i}")
        if i in ctx.verdicts or not all(k in inbox for k in need):
            return
        L = BitString.from_str(inbox["L"].payload)
        O = Outcomes.from_str(inbox["O"].payload)
        O_i = Outcomes.from_str(inbox[f"O{i}"].payload)
        sources = [inbox[k].seq for k in need]
        if config.variant is Variant.CHSH1:
            l0 = BitString.from_str(inbox["L0"].payload)
            L_i = l0 if i == 0 else ~l0
        else:
            L_i = BitString.from_str(inbox[f"L{i}"].payload)
        _log_verdict(ctx, i, verify_chsh(O, O_i, L, L_i, config), sources)

    for i in (0, 1):
        net.on_receive(f"V_{i}", lambda net, ev, i=i: verifier(net, ev, i))

    net.run()
    return net.transcript, _verdict_from(ctx)


# --- RCCBC ------------------------------------------------------------------


def _format_labeled(positions, bits) -> str:
    return ",".join(f"{j}:{b}" for j, b in zip(positions, bits))


def _parse_labeled(text: str) -> tuple[list[int], list[int]]:
    pos, bits = [], []
    for item in text.split(","):
        j, _, b = item.partition(":")
        pos.append(int(j))
        bits.append(int(b))
    return pos, bits


def rccbc_claims_honest(s0: BitString, s1: BitString, J, b: int | None, rng=None):
    """A_c's reply: labelled S0_J, S1_J and the unlabelled S_Jbar = S^b_Jbar."""
    n = len(s0)
    J = np.asarray(sorted(J))
    Jbar = np.setdiff1d(np.arange(1, n + 1), J)
    s0J, s1J = s0.select(J - 1), s1.select(J - 1)
    if b is None:
        sJbar = BitString.random(len(Jbar), rng)
    else:
        sJbar = (s0, s1)[b].select(Jbar - 1)
    return s0J, s1J, sJbar


def rccbc_verify(
    J, s0J: BitString, s1J: BitString, sJbar: BitString, s_i: BitString, i: int, n: int, c_param: float
) -> VerdictEntry:
    """Distance check on the J-substrings, then exact label-consistent union check."""
    d = bitmath.hamming_distance(s0J, s1J)
    if not bitmath.rccbc_distance_check(s0J, s1J, n, c_param):
        return VerdictEntry(Status.REJECTED, float(d))
    J = np.asarray(sorted(J))
    Jbar = np.setdiff1d(np.arange(1, n + 1), J)
    claimed = (s0J, s1J)[i]
    ok = s_i.select(J - 1) == claimed and s_i.select(Jbar - 1) == sJbar
    return VerdictEntry(Status.ACCEPTED if ok else Status.REJECTED, float(d))


def run_rccbc(
    config: ProtocolConfig,
    decisions: Decisions = Decisions(),
    strategy: RccbcStrategy | None = None,
    sjbar_override: BitString | None = None,
) -> tuple[Transcript, Verdict]:
    """Random-code classical commitment; ``sjbar_override`` replaces A_c's S_Jbar (for tests)."""
    if config.variant is not Variant.RCCBC:
        raise ConfigError("run_rccbc needs the RCCBC variant")
    n = config.n
    layout = config.layout
    net, t0 = _setup_network(config)
    ctx = RunContext(
        config, net, derive_rng(config.seed, STREAM_ALICE), derive_rng(config.seed, STREAM_BOB),
        derive_rng(config.seed, STREAM_DEVICE), t0,
    )
    alice: dict = {}

    def alice_prep(net):
        if strategy is not None:
            strings = (strategy.s0_full, strategy.s1_full)
            ev = net.log(GEN, "strategy", f"S0:{strategy.s0_full}|S1:{strategy.s1_full}")
        else:
            strings = (BitString.random(n, ctx.rng_alice), BitString.random(n, ctx.rng_alice))
            ev = net.log(GEN, "S", f"S0:{strings[0]}|S1:{strings[1]}")
        alice.update(strings=strings, gen=ev.seq)
        for i in (0, 1):
            net.send(f"S{i}", strings[i], [f"A_{i}"], [ev.seq], demand={f"A_{i}": net.point_of("A_c")})

    def bob_commit(net):
        _require_at(net, "B_c", layout.commit_point)
        J = np.sort(ctx.rng_bob.choice(np.arange(1, n + 1), size=n // 2, replace=False))
        ev = net.log(GEN, "J", ",".join(map(str, J)))
        net.send("J", ",".join(map(str, J)), ["A_c", "V_0", "V_1"], [ev.seq], demand={"A_c": layout.commit_point})

    def alice_commit(net, recv):
        J = [int(j) for j in recv.payload.split(",")]
        if strategy is not None:
            s0J, s1J, sJbar = strategy.claims(J)
        else:
            s0, s1 = alice["strings"]
            s0J, s1J, sJbar = rccbc_claims_honest(s0, s1, J, decisions.b, ctx.rng_alice)
        if sjbar_override is not None:
            sJbar = sjbar_override
        Jbar = [j for j in range(1, n + 1) if j not in set(J)]
        labelled = f"S0J:{_format_labeled(J, s0J)}|S1J:{_format_labeled(J, s1J)}"
        ev1 = net.log(COMPUTE, "SJ", labelled, [recv.seq, alice["gen"]])
        ev2 = net.log(COMPUTE, "SJbar", _format_labeled(Jbar, sJbar), [recv.seq, alice["gen"]])
        net.send("SJ", labelled, ["B_c", "V_0", "V_1"], [ev1.seq])
        net.send("SJbar", _format_labeled(Jbar, sJbar), ["B_c", "V_0", "V_1"], [ev2.seq])

    def bob_check(net, recv):
        inbox = net.agents["B_c"].inbox
        if "SJ" not in inbox or "SJbar" not in inbox or "check" in ctx.notes:
            return
        s0J, s1J = _split_sj(inbox["SJ"].payload)
        ok = bitmath.rccbc_distance_check(s0J, s1J, n, config.c_param)
        ctx.notes["check"] = ok
        net.log(COMPUTE, "distance_check", "pass" if ok else "fail", [inbox["SJ"].seq])

    def alice_unveil(net, i):
        _require_at(net, f"A_{i}", layout.unveil_points[i])
        if not decisions.unveil[i]:
            return
        recv = net.agents[f"A_{i}"].inbox[f"S{i}"]
        net.send(f"S{i}", recv.payload, [f"B_{i}", f"V_{i}"], [recv.seq])

    def verifier(net, recv, i):
        inbox = net.agents[f"V_{i}"].inbox
        need = ("J", "SJ", "SJbar", f"S{i}")
        if i in ctx.verdicts or not all(k in inbox for k in need):
            return
        J = [int(j) for j in inbox["J"].payload.split(",")]
        s0J, s1J = _split_sj(inbox["SJ"].payload)
        _, sjbar_bits = _parse_labeled(inbox["SJbar"].payload)
        entry = rccbc_verify(
            J, s0J, s1J, BitString(sjbar_bits), BitString.from_str(inbox[f"S{i}"].payload), i, n, config.c_param
        )
        _log_verdict(ctx, i, entry, [inbox[k].seq for k in need])

    net.at(t0, "A_c", alice_prep)
    net.at(layout.commit_point.t, "B_c", bob_commit)
    net.on_receive("A_c", alice_commit, label="J")
    net.on_receive("B_c", bob_check)
    for i in (0, 1):
        net.at(layout.unveil_points[i].t, f"A_{i}", lambda net, i=i: alice_unveil(net, i))
        net.on_receive(f"V_{i}", lambda net, ev, i=i: verifier(net, ev, i))
    net.run()
    return net.transcript, _verdict_from(ctx)


def _split_sj(payload: str) -> tuple[BitString, BitString]:
    part0, part1 = payload.split("|")
    _, bits0 = _parse_labeled(part0.split(":", 1)[1])
    _, bits1 = _parse_labeled(part1.split(":", 1)[1])
    return BitString(bits0), BitString(bits1)


# --- dual runs -----------------------------------------------------------------


def run_dual(
    config: ProtocolConfig,
    intent: int | None,
    unveil: tuple[bool, bool] = (True, True),
    devices: tuple[DeviceBank, DeviceBank] | None = None,
) -> tuple[tuple[Transcript, Transcript], Verdict]:
    """Two simultaneous CHSH runs; ``intent=None`` declines by committing 0 in one and 1 in the other.

    Bob accepts bit i only when both inner runs accept i.
    """
    if not config.variant.is_chsh:
        raise ConfigError("dual runs need a CHSH inner variant")
    bits = (intent, intent) if intent is not None else (0, 1)
    transcripts, verdicts = [], []
    for k in (0, 1):
        inner = replace(config, dual=False, seed=derive_seed(config.seed, STREAM_DUAL, k))
        t, v = run_chsh_variant(inner, Decisions(b=bits[k], unveil=unveil), devices[k] if devices else None)
        transcripts.append(t)
        verdicts.append(v)
    entries = []
    for i in (0, 1):
        a, b = verdicts[0][i], verdicts[1][i]
        if a.status is Status.NOT_UNVEILED and b.status is Status.NOT_UNVEILED:
            entries.append(VerdictEntry(Status.NOT_UNVEILED))
            continue
        both = a.accepted and b.accepted
        stats = [e.statistic for e in (a, b) if e.statistic is not None]
        points = [e.point for e in (a, b) if e.point is not None]
        entries.append(
            VerdictEntry(
                Status.ACCEPTED if both else Status.REJECTED,
                min(stats) if stats else None,
                max(points, key=lambda p: p.t) if points else None,
            )
        )
    return (transcripts[0], transcripts[1]), Verdict(tuple(entries))


def run_protocol(config: ProtocolConfig, decisions: Decisions = Decisions(), **kwargs):
    """Dispatch on variant; dual configs return a transcript pair."""
    if config.dual:
        return run_dual(config, decisions.b, decisions.unveil, kwargs.get("devices"))
    if config.variant is Variant.RCCBC:
        return run_rccbc(config, decisions, kwargs.get("strategy"))
    return run_chsh_variant(config, decisions, **kwargs)


def commit_view(
    config: ProtocolConfig, b: int | None, devices: DeviceBank | None = None
) -> tuple[BitString, Outcomes, int]:
    """B_c's pre-unveiling view (L, O) plus the secret x, without the network.

    Uses the same seed streams as ``run_chsh_variant`` with a fixed ``l0``,
    so the view matches the one a full run would deliver to B_c.
    """
    if config.variant is Variant.CHSH1 and config.l0 is None:
        raise ConfigError("commit_view needs a fixed l0 for CHSH1 to stay in step with full runs")
    rng_alice = derive_rng(config.seed, STREAM_ALICE)
    rng_bob = derive_rng(config.seed, STREAM_BOB)
    rng_device = derive_rng(config.seed, STREAM_DEVICE)
    bank = devices if devices is not None else DeviceBank.honest(config.delta, config.loss_fraction)
    if config.variant is Variant.CHSH2:
        BitString.random(config.n, rng_bob)  # L0 is drawn before L
    state, registry, _ = prepare(config, rng_alice, bank)
    L = BitString.random(config.n, rng_bob)
    if b is None:
        O = Outcomes.clean(BitString.random(config.n, rng_alice))
    else:
        O = commit(
            state, L, b, registry, bank, rng_device, config.layout.commit_point, config.directions,
            config.layout.named_points(),
        )
    return L, O, state.x
