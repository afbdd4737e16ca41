import itertools

import numpy as np
import pytest

from dirbc.bitmath import BitString
from dirbc.harness import bob_commit_view
from dirbc.network import DEVICE, VERDICT
from dirbc.protocols import (
    ConfigError,
    Decisions,
    Outcomes,
    ProtocolConfig,
    Status,
    Variant,
    block_indices,
    chsh_mismatches,
    commit_block,
    commit_view,
    rccbc_claims_honest,
    rccbc_verify,
    run_chsh_variant,
    run_dual,
    run_protocol,
    run_rccbc,
    unveil_block,
    verify_chsh,
)

B = BitString.from_str


def test_block_algebra_exhaustive():
    for b, x, i in itertools.product((0, 1), repeat=3):
        assert commit_block(b, x) == b ^ x and unveil_block(i, x) == i ^ x
        # only the committed bit's unveiler holds the partners of the measured block
        assert (unveil_block(i, x) == commit_block(b, x)) == (i == b)


def test_block_index_examples():
    n = 4
    assert list(block_indices(commit_block(0, 0), n)) == [1, 2, 3, 4]
    assert list(block_indices(commit_block(1, 0), n)) == [5, 6, 7, 8]
    assert list(block_indices(commit_block(1, 1), n)) == [1, 2, 3, 4]
    assert list(block_indices(unveil_block(1, 1), n)) == [1, 2, 3, 4]


def test_verify_examples():
    cfg = ProtocolConfig("CHSH1", 4, xi=0.05)
    L, Li = B("1100"), B("1010")
    O = B("0000")
    good = verify_chsh(O, B("1000"), L, Li, cfg)
    assert good.status is Status.ACCEPTED and good.statistic == 4
    one_off = verify_chsh(O, B("0000"), L, Li, cfg)
    assert one_off.status is Status.REJECTED and one_off.statistic == 3


def test_lost_rounds_count_as_mismatches():
    O = Outcomes.from_str("0x00")
    assert str(O) == "0x00"
    assert chsh_mismatches(O, Outcomes.clean(B("0000")), B("0000"), B("0000")) == 1


def test_config_validation_names_field():
    with pytest.raises(ConfigError, match="^xi:"):
        ProtocolConfig("CHSH1", 10, xi=0.2)
    with pytest.raises(ConfigError, match="^n:"):
        ProtocolConfig("RCCBC", 5)
    with pytest.raises(ConfigError, match="^variant:"):
        ProtocolConfig("BB84", 5)
    with pytest.raises(ConfigError, match="^l0:"):
        ProtocolConfig("CHSH2", 2, l0="01")
    with pytest.raises(ConfigError, match="^dual:"):
        ProtocolConfig("RCCBC", 4, dual=True)


@pytest.mark.parametrize("variant", ["CHSH1", "CHSH2", "CHSH3"])
@pytest.mark.parametrize("b", [0, 1])
def test_honest_run_accepts_committed_bit_only(variant, b):
    cfg = ProtocolConfig(variant, 300, seed=11)
    _, verdict = run_chsh_variant(cfg, Decisions(b=b))
    assert verdict.accepted(b) and not verdict.accepted(1 - b)
    assert verdict[b].statistic > 0.8 * 300


def test_declined_unveil_gives_not_unveiled():
    cfg = ProtocolConfig("CHSH2", 50, seed=3)
    tr, verdict = run_chsh_variant(cfg, Decisions(b=0, unveil=(True, False)))
    assert verdict.statuses() == (Status.ACCEPTED, Status.NOT_UNVEILED)
    assert not tr.find(agent="A_1", kind=DEVICE)
    assert len(tr.find(kind=VERDICT)) == 1


def test_careless_unveiler_measures_but_sends_nothing():
    cfg = ProtocolConfig("CHSH1", 20, seed=3)
    tr, verdict = run_chsh_variant(cfg, Decisions(b=0, unveil=(True, False), careless=True))
    assert verdict[1].status is Status.NOT_UNVEILED
    assert tr.find(agent="A_1", kind=DEVICE) and not tr.find(agent="B_1", label="O1")


def test_complementary_chsh3_matches_chsh1():
    n = 64
    l0 = BitString.random(n, np.random.default_rng(9))
    _, v1 = run_chsh_variant(ProtocolConfig("CHSH1", n, seed=5, l0=l0), Decisions(b=1))
    _, v3 = run_chsh_variant(ProtocolConfig("CHSH3", n, seed=5), Decisions(b=1), unveil_strings=(l0, ~l0))
    assert [e.statistic for e in v1.entries] == [e.statistic for e in v3.entries]
    assert v1.statuses() == v3.statuses()


def test_runs_are_deterministic():
    cfg = ProtocolConfig("CHSH2", 40, seed=21)
    assert run_chsh_variant(cfg)[0].to_text() == run_chsh_variant(cfg)[0].to_text()


@pytest.mark.parametrize("variant", ["CHSH1", "CHSH2", "CHSH3"])
@pytest.mark.parametrize("b", [0, 1, None])
def test_commit_view_matches_full_run(variant, b):
    n = 24
    l0 = BitString.random(n, np.random.default_rng(1)) if variant == "CHSH1" else None
    cfg = ProtocolConfig(variant, n, seed=17, l0=l0, delta=0.1)
    tr, _ = run_chsh_variant(cfg, Decisions(b=b))
    L, O, _ = commit_view(cfg, b)
    assert bob_commit_view(tr) == (str(L), str(O))


def test_commit_view_needs_fixed_l0():
    with pytest.raises(ConfigError):
        commit_view(ProtocolConfig("CHSH1", 4), 0)


def test_dual_run_accepts_intent_and_declines():
    cfg = ProtocolConfig("CHSH2", 200, seed=2, dual=True)
    (t0, t1), v = run_dual(cfg, 1)
    assert t0.to_text() != t1.to_text()
    assert v.statuses() == (Status.REJECTED, Status.ACCEPTED)
    _, declined = run_dual(cfg, None)
    assert not declined.accepted(0) and not declined.accepted(1)
    _, via_dispatch = run_protocol(cfg, Decisions(b=1))
    assert via_dispatch == v


@pytest.mark.parametrize("b", [0, 1])
def test_rccbc_honest(b):
    cfg = ProtocolConfig("RCCBC", 16, seed=4)
    _, v = run_rccbc(cfg, Decisions(b=b))
    assert v.accepted(b) and not v.accepted(1 - b)


def test_rccbc_wrong_complement_rejected():
    cfg = ProtocolConfig("RCCBC", 16, seed=4)
    wrong = BitString.random(8, np.random.default_rng(99))
    _, v = run_rccbc(cfg, Decisions(b=0), sjbar_override=wrong)
    assert v.statuses() == (Status.REJECTED, Status.REJECTED)


def test_rccbc_verify_counts_and_claims():
    rng = np.random.default_rng(0)
    n = 8
    s0, s1 = B("00000000"), B("11110000")
    J = [1, 2, 5, 6]
    s0J, s1J, sJbar = rccbc_claims_honest(s0, s1, J, 0, rng)
    assert (str(s0J), str(s1J), str(sJbar)) == ("0000", "1100", "0000")
    assert rccbc_verify(J, s0J, s1J, sJbar, s0, 0, n, 0.25).status is Status.ACCEPTED
    assert rccbc_verify(J, s0J, s1J, sJbar, s1, 1, n, 0.25).status is Status.REJECTED
    # identical substrings fail the distance check for both bits
    assert rccbc_verify(J, s0J, s0J, sJbar, s0, 0, n, 0.25).status is Status.REJECTED


def test_honest_bank_variant_guard():
    with pytest.raises(ConfigError):
        run_chsh_variant(ProtocolConfig("RCCBC", 4))
    assert Variant("CHSH3").is_chsh and not Variant.RCCBC.is_chsh
