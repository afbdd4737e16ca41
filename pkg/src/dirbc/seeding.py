"""Seed derivation tree.

Every random stream is ``SeedSequence(master, spawn_key=path)`` for a fixed
integer path, so results never depend on how trials are spread over
workers.  Paths used by the package:

    (trial,)                    per-trial master for run_scenario
    (STREAM_ALICE,)             A_c's secret x, declined strings, RCCBC strings
    (STREAM_BOB,)               L, L0, L^i, J
    (STREAM_DEVICE,)            device sampling
    (STREAM_DUAL, k)            inner run k of a dual run
    (STREAM_SCENARIO,)          per-trial scenario choices (random b, hiding labels)
"""

from __future__ import annotations

import numpy as np

STREAM_ALICE = 0
STREAM_BOB = 1
STREAM_DEVICE = 2
STREAM_DUAL = 3
STREAM_SCENARIO = 4


def derive_seed(master: int, *path: int) -> int:
    seq = np.random.SeedSequence(int(master), spawn_key=tuple(int(p) for p in path))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def derive_rng(master: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(master), spawn_key=tuple(int(p) for p in path)))


def fresh_seed() -> int:
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
