"""Named scenarios, seeded trial execution, hiding estimates and the causality audit."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import adversary
from .adversary import RccbcStrategy, ReducedStrategy
from .bitmath import BitString
from .devices import DeviceBank, honest_device, malicious_device
from .geometry import ProtocolLayout, SpacetimePoint, in_causal_future
from .network import COMPUTE, GEN, RECV, SEND, VERDICT, Transcript
from .protocols import (
    ConfigError,
    Decisions,
    ProtocolConfig,
    Status,
    Verdict,
    commit_view,
    run_protocol,
)
from .seeding import STREAM_DUAL, STREAM_SCENARIO, derive_rng, derive_seed

RANDOM_BIT = "random"


@dataclass(frozen=True)
class AliceBehavior:
    """Honest play with bit ``b`` (0, 1, ``"random"`` or None to decline) or a classical strategy."""

    b: int | str | None = 0
    unveil: tuple[bool, bool] = (True, True)
    careless: bool = False
    strategy: ReducedStrategy | RccbcStrategy | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    config: ProtocolConfig
    alice: AliceBehavior = AliceBehavior()
    devices: DeviceBank | None = None
    repeat: int = 1
    seed: int = 0
    # location attack: rerun each trial on this layout first, as Alice's pre-test
    pretest_layout: ProtocolLayout | None = None
    # memory attack: a second run reuses the b-block-0 device as the committer's
    reuse_run: bool = False

    def __post_init__(self):
        if self.repeat < 1:
            raise ConfigError("repeat: must be at least 1")
        if self.alice.strategy is not None and self.devices is not None:
            raise ConfigError("devices: strategy behaviours bypass devices")
        if self.reuse_run and not self.config.variant.is_chsh:
            raise ConfigError("reuse_run: only CHSH variants use devices")


@dataclass
class TrialResult:
    index: int
    seed: int
    b: int | None
    transcripts: list
    verdict: Verdict
    extras: dict = field(default_factory=dict)


@dataclass
class ScenarioResult:
    scenario: Scenario
    trials: list[TrialResult]
    summary: dict

    @property
    def transcripts(self) -> list:
        return [t for trial in self.trials for t in trial.transcripts]

    @property
    def verdicts(self) -> list[Verdict]:
        return [trial.verdict for trial in self.trials]


def _trial_bit(scenario: Scenario, trial_seed: int):
    b = scenario.alice.b
    if b == RANDOM_BIT:
        return int(derive_rng(trial_seed, STREAM_SCENARIO).integers(0, 2))
    return b


def _flatten(transcripts):
    out = []
    for t in transcripts:
        out.extend(t if isinstance(t, tuple) else (t,))
    return out


def run_trial(scenario: Scenario, k: int) -> TrialResult:
    seed = derive_seed(scenario.seed, k)
    config = scenario.config.with_seed(seed)
    b = _trial_bit(scenario, seed)
    alice = scenario.alice
    decisions = Decisions(b=b, unveil=alice.unveil, careless=alice.careless)
    bank = scenario.devices.clone() if scenario.devices is not None else None
    extras: dict = {}
    transcripts = []
    kwargs = {}
    if alice.strategy is not None:
        kwargs["strategy"] = alice.strategy
    elif bank is not None:
        kwargs["devices"] = (bank, bank.clone()) if config.dual else bank

    if scenario.pretest_layout is not None:
        pre_config = replace(config, layout=scenario.pretest_layout)
        pre_bank = scenario.devices.clone() if scenario.devices is not None else None
        pre_t, pre_v = run_protocol(pre_config, decisions, **({"devices": pre_bank} if pre_bank else {}))
        transcripts.extend(_flatten([pre_t]))
        extras["pretest_accepted"] = b is not None and pre_v.accepted(b)

    t, verdict = run_protocol(config, decisions, **kwargs)
    transcripts.extend(_flatten([t]))

    if scenario.reuse_run:
        # the block-0 device, with whatever it remembered, becomes the committer's device
        reused = DeviceBank(a=bank.b[0], b=(honest_device(), honest_device()))
        second = config.with_seed(derive_seed(seed, STREAM_SCENARIO, 1))
        t2, _ = run_protocol(second, Decisions(b=0, unveil=(False, False)), devices=reused)
        transcripts.append(t2)
        o_first = _bob_received(t, "O")
        o_second = _bob_received(t2, "O")
        guess = int(o_first[0]) ^ int(o_second[0])
        extras["guess"] = guess
        extras["leaked"] = guess == b
    return TrialResult(k, seed, b, transcripts, verdict, extras)


def _bob_received(transcript: Transcript, label: str) -> str:
    events = transcript.find(agent="B_c", kind=RECV, label=label)
    if not events:
        raise ValueError(f"B_c never received {label}")
    return events[0].payload


def bob_commit_view(transcript: Transcript) -> tuple[str, str]:
    """(L, O) as seen by B_c before any unveiling."""
    L = transcript.find(agent="B_c", kind=GEN, label="L")
    if not L:
        raise ValueError("transcript has no commitment challenge")
    return L[0].payload, _bob_received(transcript, "O")


def run_scenario(scenario: Scenario, jobs: int = 1, keep_transcripts: bool = True) -> ScenarioResult:
    """Run ``repeat`` trials; trial k always uses seed derive_seed(scenario.seed, k)."""
    indices = range(scenario.repeat)
    if jobs > 1 and scenario.repeat > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trials = list(pool.map(run_trial, [scenario] * scenario.repeat, indices))
    else:
        trials = [run_trial(scenario, k) for k in indices]
    if not keep_transcripts:
        for trial in trials:
            trial.transcripts = []
    return ScenarioResult(scenario, trials, summarize(scenario, trials))


def summarize(scenario: Scenario, trials: list[TrialResult]) -> dict:
    n_trials = len(trials)
    summary: dict = {"scenario": scenario.name, "trials": n_trials, "seed": scenario.seed, "n": scenario.config.n}
    committed = [t for t in trials if t.b in (0, 1)]
    if committed:
        acc = [t.verdict.accepted(t.b) for t in committed]
        wrong = [t.verdict.accepted(1 - t.b) for t in committed]
        summary["accept_committed"] = float(np.mean(acc))
        summary["accept_other"] = float(np.mean(wrong))
        scores = [t.verdict[t.b].statistic for t in committed if t.verdict[t.b].statistic is not None]
        if scores:
            summary["mean_score"] = float(np.mean(scores))
            summary["score_sd"] = float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0
    for i in (0, 1):
        summary[f"accept_{i}"] = float(np.mean([t.verdict.accepted(i) for t in trials]))
        summary[f"not_unveiled_{i}"] = float(np.mean([t.verdict[i].status is Status.NOT_UNVEILED for t in trials]))
    for key in ("pretest_accepted", "leaked"):
        vals = [t.extras[key] for t in trials if key in t.extras]
        if vals:
            summary[key.replace("accepted", "accept") + "_rate"] = float(np.mean(vals))
    return summary


# --- builtin scenarios -----------------------------------------------------


def _shifted(layout: ProtocolLayout, dx: float) -> ProtocolLayout:
    def move(p: SpacetimePoint) -> SpacetimePoint:
        return SpacetimePoint(p.x + dx, p.y, p.z, p.t)

    return ProtocolLayout(move(layout.commit_point), tuple(move(q) for q in layout.unveil_points), layout.distance)


def location_attack_devices(target: SpacetimePoint) -> DeviceBank:
    coords = ",".join(repr(c) for c in target.as_tuple())
    prog = [{"location": f"near:{coords}", "output": "0"}]
    return DeviceBank(
        honest_device(),
        (malicious_device(prog, name="b0-location"), malicious_device(prog, name="b1-location")),
    )


def memory_attack_devices() -> DeviceBank:
    """A-device leaks b xor x; b-devices remember x if ever driven, then replay it from P."""
    recorder = [
        {"location": "at:P", "memory": "has:x", "output": "mem:x"},
        {"location": "at:Q0", "output": "honest", "update": "x=block"},
        {"location": "at:Q1", "output": "honest", "update": "x=not(block)"},
    ]
    return DeviceBank(
        malicious_device([{"output": "block"}], name="a-block"),
        (malicious_device(recorder, name="b0-recorder"), malicious_device(recorder, name="b1-recorder")),
    )


def malicious_programs() -> dict[str, DeviceBank]:
    """Committer-side device programs that try to shape B_c's view."""
    return {
        "constant-output": DeviceBank(malicious_device([{"output": "0"}], name="constant"), (honest_device(),) * 2),
        "location-conditioned": DeviceBank(
            malicious_device([{"location": "at:P", "output": "xor(block, setting)"}], name="location"),
            (honest_device(),) * 2,
        ),
        "memoryful": DeviceBank(
            malicious_device(
                [
                    {"memory": "has:last", "output": "xor(mem:last, block)", "update": "last=outcome"},
                    {"output": "honest", "update": "last=outcome"},
                ],
                name="memoryful",
            ),
            (honest_device(),) * 2,
        ),
    }


BUILTIN_NAMES = (
    "honest-chsh1",
    "honest-chsh2",
    "honest-chsh3",
    "honest-rccbc",
    "honest-dual",
    "decline-dual",
    "location-attack",
    "memory-attack-reuse",
    "memory-attack-disciplined",
    "malicious-constant-output",
    "malicious-location-conditioned",
    "malicious-memoryful",
    "cheat-chsh1",
)


def builtin_scenario(
    name: str,
    n: int | None = None,
    xi: float = 0.05,
    c_param: float = 1.0,
    delta: float = 0.0,
    repeat: int | None = None,
    seed: int = 0,
) -> Scenario:
    def cfg(variant, default_n, **kw):
        return ProtocolConfig(variant, n or default_n, xi=xi, c_param=c_param, delta=delta, **kw)

    honest = AliceBehavior(b=RANDOM_BIT)
    if name in ("honest-chsh1", "honest-chsh2", "honest-chsh3"):
        return Scenario(name, cfg(name[-5:].upper(), 10_000), honest, repeat=repeat or 100, seed=seed)
    if name == "honest-rccbc":
        return Scenario(name, cfg("RCCBC", 64), honest, repeat=repeat or 100, seed=seed)
    if name == "honest-dual":
        return Scenario(name, cfg("CHSH1", 10_000, dual=True), honest, repeat=repeat or 20, seed=seed)
    if name == "decline-dual":
        return Scenario(name, cfg("CHSH1", 10_000, dual=True), AliceBehavior(b=None), repeat=repeat or 20, seed=seed)
    if name == "location-attack":
        config = cfg("CHSH1", 1000)
        layout = config.layout
        return Scenario(
            name,
            config,
            AliceBehavior(b=0),
            devices=location_attack_devices(layout.unveil_points[0]),
            repeat=repeat or 20,
            seed=seed,
            pretest_layout=_shifted(layout, 10.0),
        )
    if name in ("memory-attack-reuse", "memory-attack-disciplined"):
        return Scenario(
            name,
            cfg("CHSH1", 16),
            AliceBehavior(b=RANDOM_BIT, unveil=(False, False), careless=name.endswith("reuse")),
            devices=memory_attack_devices(),
            repeat=repeat or 200,
            seed=seed,
            reuse_run=True,
        )
    if name.startswith("malicious-"):
        programs = malicious_programs()
        key = name[len("malicious-"):]
        return Scenario(name, cfg("CHSH1", 64), honest, devices=programs[key], repeat=repeat or 20, seed=seed)
    if name == "cheat-chsh1":
        config = cfg("CHSH1", n or 4, l0=BitString.zeros(n or 4))
        _, strategy = adversary.brute_force_epsilon_chsh(config.n, xi, config.l0)
        return Scenario(name, config, AliceBehavior(b=0, strategy=strategy), repeat=repeat or 20, seed=seed)
    raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


# --- hiding ------------------------------------------------------------------


@dataclass(frozen=True)
class HidingEstimate:
    """Best-guess advantage TV/2 with a permutation-debiased TV.

    ``tv_plugin`` is the raw histogram distance, which is biased upward by
    sampling noise; ``tv_null`` is its mean under random relabelling and
    ``tv`` the difference, floored at 0.
    """

    advantage: float
    tv: float
    tv_plugin: float
    tv_null: float
    stderr: float
    samples: tuple[int, int]
    bins: int


def _tv(counts0: np.ndarray, counts1: np.ndarray) -> float:
    return 0.5 * float(np.abs(counts0 / counts0.sum() - counts1 / counts1.sum()).sum())


def estimate_hiding_advantage(views, labels, permutations: int = 50, seed: int = 0) -> HidingEstimate:
    """Estimate how well the label can be guessed from hashable discrete views."""
    labels = np.asarray(labels, dtype=np.int64)
    views = list(views)
    if len(views) != labels.size:
        raise ValueError("one label per view is required")
    n0, n1 = int((labels == 0).sum()), int((labels == 1).sum())
    if n0 < 2 or n1 < 2:
        raise ValueError("need at least two samples for each label")
    keys = {v: k for k, v in enumerate(dict.fromkeys(views))}
    codes = np.array([keys[v] for v in views])
    nbins = len(keys)

    def tv_for(lab):
        c0 = np.bincount(codes[lab == 0], minlength=nbins).astype(float)
        c1 = np.bincount(codes[lab == 1], minlength=nbins).astype(float)
        return _tv(c0, c1)

    plug = tv_for(labels)
    rng = np.random.default_rng(seed)
    null = np.array([tv_for(rng.permutation(labels)) for _ in range(permutations)])
    tv = max(0.0, plug - float(null.mean()))
    se = float(null.std(ddof=1)) if permutations > 1 else float("nan")
    return HidingEstimate(tv / 2.0, tv, plug, float(null.mean()), se / 2.0, (n0, n1), nbins)


def sample_commit_views(
    config: ProtocolConfig, samples_per_label: int, devices: DeviceBank | None = None, seed: int = 0
) -> tuple[list, np.ndarray]:
    """B_c's (L, O) views for b = 0 and b = 1, each averaged over the secret x.

    Sample k of label b uses seed derive_seed(seed, b, k); malicious devices
    start every sample from their configured state.
    """
    views, labels = [], []
    for b in (0, 1):
        for k in range(samples_per_label):
            cfg = config.with_seed(derive_seed(seed, b, k))
            bank = devices.clone() if devices is not None else None
            L, O, _ = commit_view(cfg, b, bank)
            views.append((str(L), str(O)))
            labels.append(b)
    return views, np.array(labels)


def sample_dual_views(config: ProtocolConfig, samples_per_label: int, seed: int = 0) -> tuple[list, np.ndarray]:
    """B_c's views of both inner runs without unveiling: label 0 commits (random b), label 1 declines."""
    views, labels = [], []
    for label in (0, 1):
        for k in range(samples_per_label):
            s = derive_seed(seed, label, k)
            if label == 0:
                b = int(derive_rng(s, STREAM_SCENARIO).integers(0, 2))
                bits = (b, b)
            else:
                bits = (0, 1)
            view = []
            for j in (0, 1):
                inner = replace(config, dual=False, seed=derive_seed(s, STREAM_DUAL, j))
                _, O, _ = commit_view(inner, bits[j])
                view.append(str(O))
            views.append(tuple(view))
            labels.append(label)
    return views, np.array(labels)


# --- causality audit ---------------------------------------------------------


@dataclass(frozen=True)
class AuditViolation:
    transcript: int
    event: int
    reason: str

    def __str__(self):
        return f"transcript {self.transcript} event {self.event}: {self.reason}"


def audit_transcript(transcript: Transcript, index: int = 0) -> list[AuditViolation]:
    """Check that every value an agent uses has a light-speed causal origin.

    Derived values may only cite earlier events of the same agent (secure
    labs), each at a point in the agent's own past; receptions must match an
    emission addressed to the receiver, carry its payload unchanged, and lie
    in the emission's causal future; every addressed recipient must receive.
    """
    out: list[AuditViolation] = []
    events = transcript.by_id()

    def bad(ev, reason):
        out.append(AuditViolation(index, ev.seq, reason))

    received: dict[int, set] = {}
    for ev in transcript.events:
        for src in ev.sources:
            s = events.get(src)
            if s is None:
                bad(ev, f"cites missing event {src}")
                continue
            if s.seq >= ev.seq:
                bad(ev, f"cites later event {src}")
            if s.agent != ev.agent:
                bad(ev, f"uses {s.label} held by {s.agent}, not received by {ev.agent}")
            elif not in_causal_future(s.point, ev.point):
                bad(ev, f"uses {s.label} outside its own causal past")
        if ev.kind == RECV:
            sent = events.get(ev.ref) if ev.ref is not None else None
            if sent is None or sent.kind != SEND:
                bad(ev, "reception without a matching emission")
                continue
            if ev.agent not in sent.recipients:
                bad(ev, f"{ev.agent} received {sent.label} addressed to {','.join(sent.recipients)}")
            if ev.payload != sent.payload or ev.label != sent.label:
                bad(ev, "reception differs from the emitted message")
            if not in_causal_future(sent.point, ev.point):
                bad(ev, f"{sent.label} received outside the light cone of its emission")
            received.setdefault(sent.seq, set()).add(ev.agent)
        elif ev.kind in (SEND, COMPUTE, VERDICT) and not ev.sources:
            bad(ev, f"{ev.kind} event {ev.label} has no sources")
    for ev in transcript.events:
        if ev.kind == SEND:
            missing = set(ev.recipients) - received.get(ev.seq, set())
            if missing:
                bad(ev, f"{ev.label} never reached {','.join(sorted(missing))}")
    return out


def audit_no_signalling(transcripts) -> list[AuditViolation]:
    """Empty list means every transcript passed."""
    out = []
    for k, t in enumerate(_flatten(list(transcripts))):
        out.extend(audit_transcript(t, k))
    return out


def verdicts_in_causal_future(transcript: Transcript) -> bool:
    """Each verdict lies in the future of the commitment and of its unveiling emissions."""
    events = transcript.by_id()
    for ev in transcript.find(kind=VERDICT):
        for src in ev.sources:
            recv = events[src]
            if recv.ref is not None and not in_causal_future(events[recv.ref].point, ev.point):
                return False
    return True
