"""One test per acceptance criterion, each at its stated tolerance."""

import math
import time

from dirbc import bitmath
from dirbc.adversary import (
    brute_force_epsilon_chsh,
    brute_force_epsilon_rccbc,
    chsh3_game_values,
    evaluate_nosignalling_lp,
    rccbc_epsilon_by_weight,
)
from dirbc.bitmath import HONEST_WIN, BitString
from dirbc.harness import (
    BUILTIN_NAMES,
    audit_no_signalling,
    audit_transcript,
    builtin_scenario,
    estimate_hiding_advantage,
    malicious_programs,
    run_scenario,
    sample_commit_views,
    sample_dual_views,
)
from dirbc.network import COMPUTE, GEN, Event, Transcript
from dirbc.protocols import ProtocolConfig


def test_1_honest_completeness(verdict_line):
    n = 10_000
    start = time.perf_counter()
    result = run_scenario(builtin_scenario("honest-chsh1", n=n, xi=0.05, delta=0.0, repeat=100, seed=1))
    elapsed = time.perf_counter() - start
    accepted = sum(t.verdict.accepted(t.b) for t in result.trials)
    mean = result.summary["mean_score"]
    tol = 4 * math.sqrt(n * HONEST_WIN * (1 - HONEST_WIN))
    ok = accepted >= 99 and abs(mean - n * HONEST_WIN) <= tol and elapsed < 10
    verdict_line(
        "#1 honest completeness",
        ok,
        f"accepted {accepted}/100, mean score {mean:.1f} vs {n * HONEST_WIN:.1f} +/- {tol:.1f}, {elapsed:.2f} s",
    )


def test_2_binding_below_bound(verdict_line):
    start = time.perf_counter()
    worst_gap = math.inf
    rows = 0
    for xi in (0.02, 0.05, 0.10):
        for n in range(1, 7):
            eps, _ = brute_force_epsilon_chsh(n, xi)
            worst_gap = min(worst_gap, bitmath.epsilon_bound(n, xi).epsilon - eps)
            rows += 1
    single, _ = brute_force_epsilon_chsh(1, 0.05)
    elapsed = time.perf_counter() - start
    ok = worst_gap >= 0 and single == 0.5 and elapsed < 60
    verdict_line(
        "#2 binding vs bound",
        ok,
        f"{rows} cases, min(bound - eps*) = {worst_gap:.4g}, eps*(N=1, xi=0.05) = {single}, {elapsed:.2f} s",
    )


def test_3_nosignalling_lp(verdict_line):
    start = time.perf_counter()
    xi = 0.05
    det, _ = brute_force_epsilon_chsh(1, xi)
    ns = evaluate_nosignalling_lp(1, xi)
    bound = bitmath.epsilon_bound(1, xi).epsilon
    elapsed = time.perf_counter() - start
    ok = det <= ns + 1e-9 and ns <= bound + 1e-9 and elapsed < 5
    verdict_line("#3 no-signalling LP", ok, f"{det} <= {ns:.9f} <= {bound:.6f}, {elapsed:.2f} s")


def test_4_chsh3_complementary_reduction(verdict_line):
    start = time.perf_counter()
    pairs = []
    for n in (1, 2, 3):
        ind, comp = chsh3_game_values(n, 0.05)
        pairs.append((n, ind, comp))
    elapsed = time.perf_counter() - start
    ok = all(abs(a - b) <= 1e-12 for _, a, b in pairs) and elapsed < 60
    detail = ", ".join(f"N={n}: {a:.5f}/{b:.5f}" for n, a, b in pairs)
    verdict_line("#4 CHSH3 reduction", ok, f"independent/complementary {detail}, {elapsed:.2f} s")


def test_5_hiding(verdict_line):
    config = ProtocolConfig("CHSH1", 2, l0=BitString.zeros(2))
    programs = {"honest": None, **malicious_programs()}
    results = {}
    for name, bank in programs.items():
        views, labels = sample_commit_views(config, 5_000, bank, seed=5)
        results[name] = estimate_hiding_advantage(views, labels, seed=5)
    worst = max(e.advantage for e in results.values())
    ok = worst <= 0.02 and len(results) >= 4
    detail = ", ".join(f"{k} {e.advantage:.4f}" for k, e in results.items())
    verdict_line("#5 hiding", ok, f"advantage at N=2, 10^4 samples: {detail}")


def test_6_error_tolerance(verdict_line):
    n = 10_000
    rates, means = {}, {}
    for delta in (0.02, 0.2):
        s = run_scenario(builtin_scenario("honest-chsh1", n=n, xi=0.05, delta=delta, repeat=100, seed=6)).summary
        rates[delta], means[delta] = s["accept_committed"], s["mean_score"] / n
    threshold = bitmath.chsh_score_threshold(n, 0.05) / n
    ok = rates[0.02] >= 0.99 and rates[0.2] <= 0.01
    verdict_line(
        "#6 error tolerance",
        ok,
        f"accept {rates[0.02]:.2f} at delta=0.02 (score {means[0.02]:.4f}), {rates[0.2]:.2f} at delta=0.2 "
        f"(score {means[0.2]:.4f}); threshold {threshold:.4f}",
    )


def test_7_rccbc(verdict_line):
    result = run_scenario(builtin_scenario("honest-rccbc", n=64, c_param=1.0, repeat=1000, seed=7), keep_transcripts=False)
    honest, wrong = result.summary["accept_committed"], result.summary["accept_other"]
    eps = [brute_force_epsilon_rccbc(n, 0.5)[0] for n in (8, 10, 12)]
    decreasing = all(b < a for a, b in zip(eps, eps[1:]))
    larger = {n: rccbc_epsilon_by_weight(n, 0.5) for n in (16, 32, 64, 128)}
    ok = honest >= 0.99 and wrong == 0 and decreasing
    verdict_line(
        "#7 RCCBC",
        ok,
        f"honest {honest:.3f}, wrong-bit {wrong:.3f} over 1000 trials; eps* at C=0.5 for N=8,10,12: {eps} "
        f"(strictly decreasing: {decreasing}); weight-class eps* for N=16,32,64,128: "
        + ", ".join(f"{v:.3g}" for v in larger.values()),
    )


def test_8_dual_run_indistinguishable(verdict_line):
    config = ProtocolConfig("CHSH1", 2, l0=BitString.zeros(2))
    views, labels = sample_dual_views(config, 5_000, seed=8)
    est = estimate_hiding_advantage(views, labels, seed=8)
    ok = est.tv <= 0.02
    verdict_line(
        "#8 dual-run indistinguishability",
        ok,
        f"TV {est.tv:.4f} (plug-in {est.tv_plugin:.4f} minus null {est.tv_null:.4f}) at 10^4 samples",
    )


def test_9_structural_causality(verdict_line):
    transcripts = []
    for name in BUILTIN_NAMES:
        transcripts.extend(run_scenario(builtin_scenario(name, repeat=2, seed=9)).transcripts)
    violations = audit_no_signalling(transcripts)

    honest = run_scenario(builtin_scenario("honest-chsh1", n=16, repeat=1, seed=9)).transcripts[0]
    L = honest.find(agent="B_c", kind=GEN, label="L")[0]
    where = honest.find(agent="A_1")[-1].point
    forged = Event(len(honest.events), L.time, "A_1", where, COMPUTE, "O1", L.payload, (L.seq,))
    rejected = bool(audit_transcript(Transcript(honest.events + [forged])))

    scenario = builtin_scenario("honest-chsh2", n=500, repeat=3, seed=9)
    first = [t.to_text() for t in run_scenario(scenario).transcripts]
    again = [t.to_text() for t in run_scenario(scenario).transcripts]
    identical = first == again
    ok = not violations and rejected and identical
    verdict_line(
        "#9 structural causality",
        ok,
        f"{len(transcripts)} builtin transcripts, {len(violations)} violations; forged transcript rejected: "
        f"{rejected}; byte-identical rerun: {identical}",
    )


def test_10_math_kernel(verdict_line):
    worst = math.inf
    for n in range(1, 21):
        weights = bitmath.popcount_table(n)
        for r in range(n // 2 + 1):
            volume = int((weights <= r).sum())
            assert volume == bitmath.hamming_ball_volume(n, r)
            worst = min(worst, bitmath.hamming_ball_bound(n, r) - volume)
    n = 1000
    chsh = bitmath.chsh_value_from_score(n, n * (2 + math.sqrt(2)) / 4)
    entropy = bitmath.binary_entropy(0.5)
    ok = worst >= 0 and abs(chsh - 2 * math.sqrt(2)) <= 1e-12 and entropy == 1.0
    verdict_line(
        "#10 math kernel",
        ok,
        f"min(bound - volume) = {worst:.4g} over n <= 20; CHSH value error {abs(chsh - 2 * math.sqrt(2)):.1e}; "
        f"H(1/2) = {entropy!r}",
    )

