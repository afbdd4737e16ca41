"""Cheating strategies for Alice and exhaustive oracles for the optimal binding violation.

Strings are handled as packed integers (position 1 is the most significant
bit) so that whole strategy tables fit in numpy arrays.  A CHSH cheating
strategy is quotiented by A_0's constant output: O' = O xor O0 and
D = O0 xor O1, and only O' and D enter either acceptance condition.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import bitmath
from .bitmath import BitString, popcount_table

CHSH_CAP = 8
CHSH3_CAP = 3
RCCBC_CAP = 12
LP_CAP = 2
CSV_FIELDS = ("variant", "N", "xi_or_C", "epsilon_star", "bound", "runtime_ms")


class OracleRangeError(ValueError):
    pass


@dataclass(frozen=True)
class ReducedStrategy:
    """Deterministic CHSH cheating strategy in canonical form.

    ``response[L]`` is O'(L) as a packed integer; A_0 reveals all zeros and
    A_1 reveals D.
    """

    d_offset: BitString
    response: tuple[int, ...]

    def __post_init__(self):
        n = len(self.d_offset)
        if len(self.response) != 1 << n:
            raise ValueError(f"response table must cover all {1 << n} inputs")
        if any(not 0 <= o < (1 << n) for o in self.response):
            raise ValueError("response entries must be n-bit values")

    @property
    def n(self) -> int:
        return len(self.d_offset)

    def respond(self, L: BitString) -> BitString:
        return BitString.from_int(self.response[L.to_int()], self.n)

    @classmethod
    def constant(cls, n: int, d: int = 0, o: int = 0) -> "ReducedStrategy":
        return cls(BitString.from_int(d, n), (o,) * (1 << n))


def reduce_strategy(o_table, o0: int, o1: int, n: int) -> ReducedStrategy:
    """Canonical form of the full strategy (O(L) table, constant O0, constant O1)."""
    return ReducedStrategy(BitString.from_int(o0 ^ o1, n), tuple(int(o) ^ o0 for o in o_table))


def _acceptance_table(n: int, t_max: int) -> np.ndarray:
    """accept[a, b] = d(a, b) <= t_max over packed n-bit values."""
    vals = np.arange(1 << n)
    return popcount_table(n)[vals[:, None] ^ vals[None, :]] <= t_max


def _chsh_conditions(o_prime, d: int, l0: int, l1: int, n: int, t_max: int):
    L = np.arange(1 << n)
    pop = popcount_table(n)
    o_prime = np.asarray(o_prime)
    ok0 = pop[o_prime ^ (l0 & L)] <= t_max
    ok1 = pop[o_prime ^ d ^ (l1 & L)] <= t_max
    return ok0, ok1


def evaluate_chsh_strategy(strategy: ReducedStrategy, l0: BitString, xi: float) -> tuple[float, float]:
    """(p0, p1) over uniform L for the fixed-direction game with L1 = complement(L0)."""
    n = strategy.n
    if len(l0) != n:
        raise ValueError("L0 length differs from the strategy's")
    mask = (1 << n) - 1
    t_max = bitmath.max_mismatches(n, xi)
    ok0, ok1 = _chsh_conditions(strategy.response, strategy.d_offset.to_int(), l0.to_int(), ~l0.to_int() & mask, n, t_max)
    return float(ok0.mean()), float(ok1.mean())


def evaluate_full_chsh_strategy(o_table, o0: int, o1: int, l0: BitString, xi: float) -> tuple[float, float]:
    """(p0, p1) evaluated directly on O xor O^i, without the reduced form."""
    n = len(l0)
    t_max = bitmath.max_mismatches(n, xi)
    mask = (1 << n) - 1
    a0, a1 = l0.to_int(), ~l0.to_int() & mask
    wins0 = wins1 = 0
    for L in range(1 << n):
        o = int(o_table[L])
        wins0 += bin((o ^ o0) ^ (a0 & L)).count("1") <= t_max
        wins1 += bin((o ^ o1) ^ (a1 & L)).count("1") <= t_max
    return wins0 / (1 << n), wins1 / (1 << n)


def _check_range(n: int, cap: int, what: str) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise OracleRangeError(f"{what}: n must be a positive integer")
    if n > cap:
        raise OracleRangeError(f"{what}: n={n} exceeds the oracle cap {cap}")


def brute_force_epsilon_chsh(
    n: int, xi: float, l0: BitString | None = None, cap: int = CHSH_CAP, d_range: range | None = None
) -> tuple[float, ReducedStrategy]:
    """Exact max of p0 + p1 - 1 over all deterministic reduced strategies.

    For each D the best O'(L) is chosen independently per L, since p0 + p1
    is a sum over L.  Ties go to the smallest D, then the smallest O'.
    ``d_range`` restricts the outer search (for partitioned runs).
    """
    _check_range(n, cap, "brute_force_epsilon_chsh")
    bitmath.check_xi(xi)
    l0 = l0 if l0 is not None else BitString.zeros(n)
    if len(l0) != n:
        raise ValueError("L0 must have n bits")
    size = 1 << n
    mask = size - 1
    t_max = bitmath.max_mismatches(n, xi)
    accept = _acceptance_table(n, t_max)
    L = np.arange(size)
    u = l0.to_int() & L  # target of O' for condition 0
    v = (~l0.to_int() & mask) & L  # target of O' xor D for condition 1
    cond0 = accept[u]  # [L, O']
    best_total, best_d, best_resp = -1, 0, None
    for d in d_range if d_range is not None else range(size):
        score = cond0.astype(np.int8) + accept[v][:, L ^ d]
        best_o = score.argmax(axis=1)
        total = int(score[L, best_o].sum())
        if total > best_total:
            best_total, best_d, best_resp = total, d, best_o
    strategy = ReducedStrategy(BitString.from_int(best_d, n), tuple(int(o) for o in best_resp))
    return best_total / size - 1.0, strategy


def naive_epsilon_chsh(n: int, xi: float, l0: BitString) -> float:
    """Triple loop over D, L and O' with no vectorization; reference for small n."""
    t_max = bitmath.max_mismatches(n, xi)
    mask = (1 << n) - 1
    a0, a1 = l0.to_int(), ~l0.to_int() & mask
    best = -1
    for d in range(1 << n):
        total = 0
        for L in range(1 << n):
            top = 0
            for o in range(1 << n):
                s = (bin(o ^ (a0 & L)).count("1") <= t_max) + (bin(o ^ d ^ (a1 & L)).count("1") <= t_max)
                top = max(top, s)
            total += top
        best = max(best, total)
    return best / (1 << n) - 1.0


# --- CHSH3: unveilers receive inputs ---------------------------------------


def _best_responses(o_batch: np.ndarray, n: int, t_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-input best-response win counts for A_0 and A_1 against each committer table.

    Returns arrays [batch, input] holding max over the unveiler's output of
    the number of L for which its condition holds.
    """
    size = 1 << n
    accept = _acceptance_table(n, t_max)
    L = np.arange(size)
    ins = np.arange(size)
    out = np.arange(size)
    # target[input, o_i, L] = (input & L) xor o_i, the value O(L) must be close to
    target = (ins[:, None, None] & L[None, None, :]) ^ out[None, :, None]
    best = np.empty((o_batch.shape[0], size), dtype=np.int64)
    for k in range(size):
        hits = accept[o_batch[:, None, :], target[k][None, :, :]].sum(axis=2)
        best[:, k] = hits.max(axis=1)
    # the game is symmetric between A_0 and A_1: both need O xor O^i close to L^i & L
    return best, best


def chsh3_game_values(n: int, xi: float, batch: int = 1 << 15) -> tuple[float, float]:
    """Optimal p0 + p1 - 1 with independent (L0, L1) and with L1 = complement(L0).

    Enumerates every committer table O(L) with O(0) = 0 (a common xor shift of
    all outputs leaves both conditions unchanged); A_0 and A_1 best-respond
    to their own inputs.
    """
    _check_range(n, CHSH3_CAP, "chsh3_game_values")
    bitmath.check_xi(xi)
    size = 1 << n
    mask = size - 1
    t_max = bitmath.max_mismatches(n, xi)
    free = size - 1
    total = size**free
    pairs_ind = [(a, b) for a in range(size) for b in range(size)]
    pairs_comp = [(a, ~a & mask) for a in range(size)]
    idx_ind = np.array(pairs_ind)
    idx_comp = np.array(pairs_comp)
    best_ind = best_comp = -1.0
    for start in range(0, total, batch):
        codes = np.arange(start, min(start + batch, total), dtype=np.int64)
        tables = np.zeros((codes.size, size), dtype=np.int64)
        rem = codes.copy()
        for col in range(1, size):
            tables[:, col] = rem % size
            rem //= size
        b0, b1 = _best_responses(tables, n, t_max)
        ind = (b0[:, idx_ind[:, 0]] + b1[:, idx_ind[:, 1]]).mean(axis=1) / size - 1.0
        comp = (b0[:, idx_comp[:, 0]] + b1[:, idx_comp[:, 1]]).mean(axis=1) / size - 1.0
        best_ind = max(best_ind, float(ind.max()))
        best_comp = max(best_comp, float(comp.max()))
    return best_ind, best_comp


# --- RCCBC --------------------------------------------------------------------


@dataclass(frozen=True)
class RccbcStrategy:
    """Unveilers reveal fixed strings; the committer answers each J from a table.

    ``committer_response`` maps a sorted tuple of 1-based positions J to the
    claims (S0_J, S1_J, S_Jbar).
    """

    s0_full: BitString
    s1_full: BitString
    committer_response: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.s0_full)
        if len(self.s1_full) != n:
            raise ValueError("unveiler strings must have equal length")
        for J, (a, b, c) in self.committer_response.items():
            if len(J) != n // 2 or len(a) != len(J) or len(b) != len(J) or len(c) != n - len(J):
                raise ValueError(f"claims for J={J} have the wrong lengths")

    def claims(self, J) -> tuple[BitString, BitString, BitString]:
        key = tuple(sorted(int(j) for j in J))
        if key in self.committer_response:
            return self.committer_response[key]
        return _consistent_claims(self.s0_full, self.s1_full, key)


def _consistent_claims(s0: BitString, s1: BitString, J) -> tuple[BitString, BitString, BitString]:
    n = len(s0)
    Jpos = np.asarray(J) - 1
    Jbar = np.setdiff1d(np.arange(n), Jpos)
    return s0.select(Jpos), s1.select(Jpos), s0.select(Jbar)


def _passing_weights(n: int, c_param: float) -> np.ndarray:
    w = np.arange(n // 2 + 1)
    return np.abs(w - n / 4.0) < c_param * n**0.75


def _subset_masks(n: int) -> np.ndarray:
    """Packed masks of every size-n/2 subset, in lexicographic order of positions."""
    masks = []
    for J in itertools.combinations(range(1, n + 1), n // 2):
        m = 0
        for j in J:
            m |= 1 << (n - j)
        masks.append(m)
    return np.array(masks, dtype=np.int64)


def brute_force_epsilon_rccbc(n: int, c_param: float) -> tuple[float, RccbcStrategy]:
    """Exact max of p0 + p1 - 1 over unveiler strings and committer replies.

    With S0 = 0 (a common xor shift changes no check) and D = S1, each J
    contributes 2 when D vanishes off J and wt(D on J) passes the distance
    check, 1 when some claim passes the distance check, and 0 otherwise.
    """
    if n % 2 or n < 2:
        raise OracleRangeError("brute_force_epsilon_rccbc: n must be even and positive")
    _check_range(n, RCCBC_CAP, "brute_force_epsilon_rccbc")
    if not c_param > 0:
        raise ValueError("C must be positive")
    passing = _passing_weights(n, c_param)
    any_pass = bool(passing.any())
    pop = popcount_table(n)
    masks = _subset_masks(n)
    D = np.arange(1 << n, dtype=np.int64)
    full = (1 << n) - 1
    inside = pop[D[:, None] & masks[None, :]]
    outside_zero = (D[:, None] & (~masks[None, :] & full)) == 0
    both = outside_zero & passing[inside]
    per_j = np.where(both, 2, 1 if any_pass else 0)
    totals = per_j.sum(axis=1)
    best_d = int(totals.argmax())
    eps = float(totals[best_d]) / masks.size - 1.0
    s0 = BitString.zeros(n)
    s1 = BitString.from_int(best_d, n)
    table = {}
    for J in itertools.combinations(range(1, n + 1), n // 2):
        table[J] = _best_claims(s0, s1, J, n, c_param, passing)
    return eps, RccbcStrategy(s0, s1, table)


def rccbc_epsilon_by_weight(n: int, c_param: float) -> float:
    """Same optimum as ``brute_force_epsilon_rccbc`` from a count over the weight of D.

    A D of weight w earns 2 on the C(n-w, n/2-w) subsets J that contain its
    support (when w passes the distance check) and 1 on every other J (when
    any weight passes).  Exact in integers, so usable far beyond the
    enumeration cap.
    """
    if n % 2 or n < 2:
        raise OracleRangeError("rccbc_epsilon_by_weight: n must be even and positive")
    passing = _passing_weights(n, c_param)
    total_j = math.comb(n, n // 2)
    base = total_j if passing.any() else 0
    best = base
    for w in np.flatnonzero(passing):
        best = max(best, base + math.comb(n - int(w), n // 2 - int(w)))
    return best / total_j - 1.0


def _best_claims(s0, s1, J, n, c_param, passing):
    a, b, c = _consistent_claims(s0, s1, J)
    if bitmath.rccbc_distance_check(a, b, n, c_param) or not passing.any():
        return a, b, c
    # favour unveiler 0: keep its labels, pick an S1_J at the smallest passing distance
    w = int(np.flatnonzero(passing)[0])
    bits = a.bits.copy()
    bits[:w] ^= 1
    return a, BitString(bits), c


def evaluate_rccbc_strategy(strategy: RccbcStrategy, n: int, c_param: float) -> tuple[float, float]:
    """(p0, p1) over a uniform size-n/2 subset J, using the verifier's checks."""
    s = (strategy.s0_full, strategy.s1_full)
    wins = [0, 0]
    count = 0
    for J in itertools.combinations(range(1, n + 1), n // 2):
        count += 1
        a, b, c = strategy.claims(J)
        if not bitmath.rccbc_distance_check(a, b, n, c_param):
            continue
        Jpos = np.asarray(J) - 1
        Jbar = np.setdiff1d(np.arange(n), Jpos)
        for i in (0, 1):
            if s[i].select(Jpos) == (a, b)[i] and s[i].select(Jbar) == c:
                wins[i] += 1
    return wins[0] / count, wins[1] / count


# --- no-signalling relaxation -----------------------------------------------


def evaluate_nosignalling_lp(n: int, xi: float, l0: BitString | None = None) -> float:
    """Max p0 + p1 - 1 over boxes p(O, O0, O1 | L) whose (O0, O1) marginal ignores L.

    Solved in double precision with HiGHS; the optimum is feasible to 1e-9.
    """
    from scipy.optimize import linprog

    _check_range(n, LP_CAP, "evaluate_nosignalling_lp")
    bitmath.check_xi(xi)
    l0 = l0 if l0 is not None else BitString.zeros(n)
    size = 1 << n
    mask = size - 1
    t_max = bitmath.max_mismatches(n, xi)
    accept = _acceptance_table(n, t_max)
    a0, a1 = l0.to_int(), ~l0.to_int() & mask
    # variable index: ((L * size + o) * size + o0) * size + o1
    L, o, o0, o1 = np.meshgrid(*(np.arange(size),) * 4, indexing="ij")
    L, o, o0, o1 = (a.ravel() for a in (L, o, o0, o1))
    nvar = L.size
    gain = accept[o ^ o0, a0 & L].astype(float) + accept[o ^ o1, a1 & L].astype(float)
    c = -gain / size

    rows, rhs = [], []
    for l in range(size):
        rows.append((L == l).astype(float))
        rhs.append(1.0)
    for l in range(1, size):
        for u in range(size):
            for w in range(size):
                sel = (o0 == u) & (o1 == w)
                rows.append(((L == l) & sel).astype(float) - ((L == 0) & sel).astype(float))
                rhs.append(0.0)
    res = linprog(c, A_eq=np.array(rows), b_eq=np.array(rhs), bounds=[(0, None)] * nvar, method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return float(-res.fun - 1.0)


# --- reporting -----------------------------------------------------------------


def oracle_row(variant: str, n: int, param: float, epsilon_star: float, bound: float | None, runtime_ms: float) -> dict:
    return {
        "variant": variant,
        "N": n,
        "xi_or_C": param,
        "epsilon_star": epsilon_star,
        "bound": "" if bound is None else bound,
        "runtime_ms": round(runtime_ms, 3),
    }


def chsh_oracle_rows(n_values, xi: float, l0_bits: str | None = None):
    for n in n_values:
        start = time.perf_counter()
        l0 = BitString.from_str(l0_bits) if l0_bits else None
        eps, _ = brute_force_epsilon_chsh(n, xi, l0)
        ms = (time.perf_counter() - start) * 1e3
        yield oracle_row("CHSH1", n, xi, eps, bitmath.epsilon_bound(n, xi).epsilon, ms)


def rccbc_oracle_rows(n_values, c_param: float):
    for n in n_values:
        start = time.perf_counter()
        eps, _ = brute_force_epsilon_rccbc(n, c_param)
        ms = (time.perf_counter() - start) * 1e3
        yield oracle_row("RCCBC", n, c_param, eps, None, ms)
