"""Oblivious transfer and concatenated random access codes over boxes.

Pairs in the concatenation tree are numbered level by level starting at the
leaves: level 1 holds pairs 0 .. 2^(n-1)-1, the root is pair 2^n - 2.  A
per-pair box list follows that numbering.

Box semantics for sampling: Alice's output is drawn from her marginal
P(a|x) as soon as her input is known; Bob's output is drawn later from
P(b|a,x,y).  For a no-signaling box this is the joint distribution
P(a,b|x,y), and it lets Alice's side of a run finish before Bob's target
index exists.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .boxes import CHSH, BoxError, BoxPoint, format_fraction, require_valid
from .infotheory import ic_term
from .rng import check_seed, run_uniforms

TREE_DEPTH_CAP = 24
EXACT_DEPTH_CAP = 16
SAMPLING_DEPTH_CAP = 12
_CHUNK_WORDS = 1 << 21


class ProtocolError(ValueError):
    pass


# -- oblivious transfer ---------------------------------------------------------


def _alice_output(box: BoxPoint, x: int, u: float) -> int:
    return 0 if Fraction(u) < box.alice_marginal(0, x) else 1


def _bob_output(box: BoxPoint, x: int, a: int, y: int, u: float) -> int:
    pa = box.alice_marginal(a, x, y)
    return 0 if Fraction(u) * pa < box[x, y, a, 0] else 1


def run_ot(x0: int, x1: int, k: int, box: BoxPoint, rng: np.random.Generator) -> int:
    """One round of the box-assisted oblivious transfer; returns Bob's bit C.

    Alice feeds x0 XOR x1 into her box and sends m = x0 XOR a.  Bob feeds k
    into his box and outputs m XOR b, which equals x_k whenever the box
    delivered a XOR b = x*y.
    """
    if any(v not in (0, 1) for v in (x0, x1, k)):
        raise ProtocolError("OT inputs must be bits")
    require_valid(box, CHSH)
    # Alice's phase: reads only her bits and her half of the box
    x = x0 ^ x1
    a = _alice_output(box, x, rng.random())
    m = x0 ^ a
    # Bob's phase: reads only m, k and his half of the box
    b = _bob_output(box, x, a, k, rng.random())
    return m ^ b


def ot_success_probability(box: BoxPoint) -> Fraction:
    """Exact probability that C = x_k, averaged over uniform (x0, x1, k)."""
    require_valid(box, CHSH)
    total = Fraction(0)
    for x0 in range(2):
        for x1 in range(2):
            for k in range(2):
                x = x0 ^ x1
                for a in range(2):
                    for b in range(2):
                        if (x0 ^ a ^ b) == (x0, x1)[k]:
                            total += box[x, k, a, b]
    return total / 8


# -- concatenation tree ------------------------------------------------------------


@dataclass(frozen=True)
class DecodeStep:
    level: int
    pair: int  # global pair number
    bob_input: int


@dataclass(frozen=True)
class ConcatenationTree:
    depth: int

    @property
    def n_bits(self) -> int:
        return 1 << self.depth

    @property
    def n_pairs(self) -> int:
        return (1 << self.depth) - 1

    @property
    def root(self) -> int:
        return self.n_pairs - 1

    def level_offset(self, level: int) -> int:
        """Global number of the first pair on ``level`` (1 = leaves)."""
        return self.n_bits - (1 << (self.depth - level + 1))

    def level_width(self, level: int) -> int:
        return 1 << (self.depth - level)

    def children(self, pair: int) -> tuple[int, int] | None:
        """The two pairs whose messages feed ``pair``; None at leaf level."""
        level, j = self.locate(pair)
        if level == 1:
            return None
        off = self.level_offset(level - 1)
        return off + 2 * j, off + 2 * j + 1

    def inputs(self, pair: int) -> tuple[int, int]:
        """Alice-bit indices covered by ``pair`` as a half-open range."""
        level, j = self.locate(pair)
        span = 1 << level
        return j * span, (j + 1) * span

    def locate(self, pair: int) -> tuple[int, int]:
        if not 0 <= pair < self.n_pairs:
            raise ProtocolError(f"no pair {pair} in a depth-{self.depth} tree")
        for level in range(1, self.depth + 1):
            off = self.level_offset(level)
            if pair < off + self.level_width(level):
                return level, pair - off
        raise AssertionError("unreachable")

    def decode_path(self, k: int) -> tuple[DecodeStep, ...]:
        """Pairs Bob uses to recover bit k, from the root down to the leaves."""
        if not 0 <= k < self.n_bits:
            raise ProtocolError(f"bit index {k} out of range")
        return tuple(
            DecodeStep(level, self.level_offset(level) + (k >> level), (k >> (level - 1)) & 1)
            for level in range(self.depth, 0, -1)
        )


def build_concatenation_tree(n: int, cap: int = TREE_DEPTH_CAP) -> ConcatenationTree:
    if isinstance(n, bool) or not isinstance(n, int) or not 1 <= n <= cap:
        raise ProtocolError(f"depth must be an integer in [1, {cap}], got {n!r}")
    return ConcatenationTree(n)


# -- configuration and results -------------------------------------------------------


@dataclass(frozen=True)
class RacConfig:
    depth: int
    boxes: tuple[BoxPoint, ...]
    trials: int = 0
    seed: int = 0

    def __init__(self, depth: int, box, trials: int = 0, seed: int = 0):
        tree = build_concatenation_tree(depth)
        if isinstance(box, BoxPoint):
            boxes = (box,) * tree.n_pairs
        else:
            boxes = tuple(box)
            if len(boxes) != tree.n_pairs:
                raise ProtocolError(
                    f"depth {depth} needs {tree.n_pairs} boxes, got {len(boxes)}"
                )
        for b in set(boxes):
            try:
                require_valid(b, CHSH)
            except BoxError as exc:
                raise ProtocolError(str(exc)) from exc
        if isinstance(trials, bool) or not isinstance(trials, int) or trials < 0:
            raise ProtocolError(f"trials must be a non-negative integer, got {trials!r}")
        try:
            seed = check_seed(seed)
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "seed", seed)

    @property
    def tree(self) -> ConcatenationTree:
        return ConcatenationTree(self.depth)


@dataclass(frozen=True)
class RacResult:
    depth: int
    trials: int
    seed: int
    exact_success: tuple[Fraction, ...] | None = None
    successes: tuple[int, ...] | None = None
    counts: tuple[int, ...] | None = None
    transcript: list = field(default=None, repr=False, compare=False)

    @property
    def exact_bias(self) -> tuple[Fraction, ...] | None:
        if self.exact_success is None:
            return None
        return tuple(2 * p - 1 for p in self.exact_success)

    @property
    def empirical(self) -> tuple[float, ...] | None:
        if self.successes is None:
            return None
        return tuple(s / c if c else math.nan for s, c in zip(self.successes, self.counts))

    @property
    def stderr(self) -> tuple[float, ...] | None:
        if self.successes is None:
            return None
        return tuple(
            math.sqrt(p * (1 - p) / c) if c else math.nan
            for p, c in zip(self.empirical, self.counts)
        )

    @property
    def ic_sum(self) -> float | None:
        """Sum over bits of I(x_k : beta_k) = 1 - h(p_k) for the exact guesses."""
        if self.exact_bias is None:
            return None
        return math.fsum(ic_term(float(e)) for e in self.exact_bias)

    def merged(self, other: "RacResult") -> "RacResult":
        return RacResult(
            self.depth,
            self.trials,
            self.seed,
            self.exact_success if self.exact_success is not None else other.exact_success,
            self.successes if self.successes is not None else other.successes,
            self.counts if self.counts is not None else other.counts,
            self.transcript if self.transcript is not None else other.transcript,
        )

    def to_dict(self) -> dict:
        per_bit = []
        for k in range(1 << self.depth):
            row = {"k": k}
            if self.exact_success is not None:
                row["exact"] = format_fraction(self.exact_success[k])
            if self.successes is not None:
                row["successes"] = self.successes[k]
                row["trials"] = self.counts[k]
            per_bit.append(row)
        ic = self.ic_sum
        return {
            "n": self.depth,
            "trials": self.trials,
            "seed": self.seed,
            "perBit": per_bit,
            "icSum": ic,
            "violated": None if ic is None else ic > 1.0,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# -- exact evaluation ------------------------------------------------------------------


def node_bias(box: BoxPoint, y: int) -> Fraction:
    """Bias of a XOR b == x*y for Bob input y, averaged over uniform x."""
    return sum(
        (
            box[x, y, a, b] * (1 if (a ^ b) == (x & y) else -1)
            for x in range(2)
            for a in range(2)
            for b in range(2)
        ),
        Fraction(0),
    ) / 2


def rac_exact(cfg: RacConfig) -> RacResult:
    """Exact per-bit success probabilities of the concatenated code.

    Bob's guess of bit k is wrong iff an odd number of pairs on its decode
    path err.  Each pair's input is the XOR of two child messages, one of
    which is uniform and independent of everything else along the path, so
    the path errors are independent and the bias of bit k is the product of
    the node biases for Bob's inputs on that path.  This holds for any
    no-signaling boxes; for isotropic ones it reduces to (1 + E^n) / 2.
    """
    tree = cfg.tree
    if cfg.depth > EXACT_DEPTH_CAP:
        raise ProtocolError(f"exact evaluation is capped at depth {EXACT_DEPTH_CAP}")
    cache = {}

    def bias(pair, y):
        key = (cfg.boxes[pair], y)
        if key not in cache:
            cache[key] = node_bias(cfg.boxes[pair], y)
        return cache[key]

    success = []
    for k in range(tree.n_bits):
        prod = Fraction(1)
        for step in tree.decode_path(k):
            prod *= bias(step.pair, step.bob_input)
        success.append((1 + prod) / 2)
    return RacResult(cfg.depth, cfg.trials, cfg.seed, exact_success=tuple(success))


# -- Monte Carlo -------------------------------------------------------------------------


def _sampling_tables(boxes: Sequence[BoxPoint]) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair P(a=0|x) of shape (P, 2) and P(b=0|a,x,y) of shape (P, 2, 2, 2)."""
    alice = np.empty((len(boxes), 2))
    bob = np.empty((len(boxes), 2, 2, 2))
    memo = {}
    for i, box in enumerate(boxes):
        if box not in memo:
            pa = np.array([float(box.alice_marginal(0, x)) for x in range(2)])
            pb = np.empty((2, 2, 2))
            for a in range(2):
                for x in range(2):
                    for y in range(2):
                        marg = box.alice_marginal(a, x, y)
                        pb[a, x, y] = float(box[x, y, a, 0] / marg) if marg else 0.5
            memo[box] = (pa, pb)
        alice[i], bob[i] = memo[box]
    return alice, bob


@dataclass
class AlicePhase:
    """Alice's side of a batch of runs: the message plus what her boxes saw.

    ``inputs``/``outputs`` are per level; the referee needs them to sample
    Bob's correlated outputs, but Bob's decoding logic never reads them.
    """

    bits: np.ndarray
    message: np.ndarray
    inputs: list[np.ndarray]
    outputs: list[np.ndarray]


def alice_phase(tree: ConcatenationTree, bits: np.ndarray, u: np.ndarray,
                alice_table: np.ndarray) -> AlicePhase:
    """XOR-cascade Alice's bits through her side of the tree.

    ``u`` holds one uniform per pair and run, ordered by pair number.
    """
    msgs = bits
    inputs, outputs = [], []
    for level in range(1, tree.depth + 1):
        left, right = msgs[:, 0::2], msgs[:, 1::2]
        x = left ^ right
        pairs = tree.level_offset(level) + np.arange(tree.level_width(level))
        a = (u[:, pairs] >= alice_table[pairs[None, :], x]).astype(np.int8)
        msgs = left ^ a
        inputs.append(x)
        outputs.append(a)
    return AlicePhase(bits, msgs[:, 0], inputs, outputs)


def bob_phase(tree: ConcatenationTree, alice: AlicePhase, k: np.ndarray, u: np.ndarray,
              bob_table: np.ndarray) -> np.ndarray:
    """Decode bit k of every run from the message; returns Bob's guesses.

    ``u`` holds one uniform per level and run (column ``level - 1``).
    """
    rows = np.arange(len(k))
    guess = alice.message.copy()
    for level in range(tree.depth, 0, -1):
        j = k >> level
        y = (k >> (level - 1)) & 1
        pair = tree.level_offset(level) + j
        # referee: Bob's box output conditioned on its partner's input/output
        x = alice.inputs[level - 1][rows, j]
        a = alice.outputs[level - 1][rows, j]
        b = (u[:, level - 1] >= bob_table[pair, a, x, y]).astype(np.int8)
        guess ^= b
    return guess


def _run_chunk(cfg: RacConfig, tables, start: int, count: int, want_transcript: bool):
    tree = cfg.tree
    N = tree.n_bits
    draws = N + tree.n_pairs + tree.depth
    u = run_uniforms(cfg.seed, start, count, draws)
    bits = (u[:, :N] >= 0.5).astype(np.int8)
    alice = alice_phase(tree, bits, u[:, N:N + tree.n_pairs], tables[0])
    # each block of N consecutive runs targets every bit index once
    k = (start + np.arange(count)) % N
    guess = bob_phase(tree, alice, k, u[:, N + tree.n_pairs:], tables[1])
    correct = guess == bits[np.arange(count), k]
    successes = np.bincount(k, weights=correct, minlength=N).astype(np.int64)
    counts = np.bincount(k, minlength=N).astype(np.int64)
    transcript = None
    if want_transcript:
        transcript = [
            {
                "run": int(start + i),
                "k": int(k[i]),
                "bits": "".join(map(str, bits[i])),
                "message": int(alice.message[i]),
                "guess": int(guess[i]),
                "correct": bool(correct[i]),
            }
            for i in range(count)
        ]
    return successes, counts, transcript


def rac_monte_carlo(cfg: RacConfig, jobs: int = 1, transcript: bool = False) -> RacResult:
    """Sample ``cfg.trials`` protocol runs per bit index.

    Run r targets bit r mod 2^n and draws its randomness from the counter
    block of run r, so the tallies do not depend on ``jobs`` or chunking.
    """
    if cfg.trials < 1:
        raise ProtocolError("Monte Carlo needs at least one trial")
    if cfg.depth > SAMPLING_DEPTH_CAP:
        raise ProtocolError(f"sampling is capped at depth {SAMPLING_DEPTH_CAP}")
    tree = cfg.tree
    N = tree.n_bits
    total_runs = cfg.trials * N
    width = N + tree.n_pairs + tree.depth
    chunk = max(N, (_CHUNK_WORDS // width) // N * N)
    starts = list(range(0, total_runs, chunk))
    tables = _sampling_tables(cfg.boxes)

    def work(start):
        return _run_chunk(cfg, tables, start, min(chunk, total_runs - start), transcript)

    if jobs > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]

    successes = np.sum([p[0] for p in parts], axis=0)
    counts = np.sum([p[1] for p in parts], axis=0)
    lines = [row for p in parts for row in p[2]] if transcript else None
    return RacResult(
        cfg.depth,
        cfg.trials,
        cfg.seed,
        successes=tuple(int(s) for s in successes),
        counts=tuple(int(c) for c in counts),
        transcript=lines,
    )


def run_rac(cfg: RacConfig, jobs: int = 1, transcript: bool = False) -> RacResult:
    """Exact evaluation, plus sampling when ``cfg.trials`` > 0."""
    result = rac_exact(cfg)
    if cfg.trials:
        result = result.merged(rac_monte_carlo(cfg, jobs=jobs, transcript=transcript))
    return result
