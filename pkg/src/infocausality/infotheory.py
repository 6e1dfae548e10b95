"""Shannon quantities on finite joint distributions and the IC functional.

Everything here is double precision.  Exact rationals coming from the box
and protocol modules are converted on entry.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

LN2 = math.log(2.0)
ZERO_CUTOFF = 1e-15
SUM_TOLERANCE = 1e-12
# below this E^n the closed form loses digits; switch to the series
SERIES_CUTOFF = 1e-8


class DistributionError(ValueError):
    pass


def _xlog2x(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    mask = p > ZERO_CUTOFF
    out[mask] = p[mask] * np.log2(p[mask])
    return out


def binary_entropy(p) -> float:
    """h(p) = -p log2 p - (1-p) log2 (1-p), with 0 log 0 = 0."""
    p = float(p)
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ValueError(f"probability outside [0, 1]: {p}")
    return float(-(_xlog2x(np.array([p, 1.0 - p])).sum()))


# -- joint distributions ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probabilities over the product of named finite alphabets.

    ``probs`` has one axis per variable, in the order of ``names``.
    """

    names: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        probs = np.array(self.probs, dtype=float)
        if len(set(names)) != len(names):
            raise DistributionError(f"duplicate variable names in {names}")
        if probs.ndim != len(names):
            raise DistributionError(
                f"{len(names)} variables but probability array has {probs.ndim} axes"
            )
        if np.any(probs < 0):
            raise DistributionError("negative probability")
        if abs(probs.sum() - 1.0) > SUM_TOLERANCE:
            raise DistributionError(f"probabilities sum to {probs.sum()!r}")
        probs.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "probs", probs)

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.probs.shape

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DistributionError(f"unknown variable {name!r}") from None

    def marginal(self, names: Iterable[str]) -> "JointDistribution":
        names = _as_names(names)
        axes = [self.axis(n) for n in names]
        drop = tuple(i for i in range(len(self.names)) if i not in axes)
        p = self.probs.sum(axis=drop)
        # sum() keeps the remaining axes in original order; reorder to request
        kept = [i for i in range(len(self.names)) if i in axes]
        p = np.moveaxis(p, [kept.index(a) for a in axes], list(range(len(axes))))
        return JointDistribution(tuple(names), p)

    def to_dict(self) -> dict:
        return {
            "vars": [{"name": n, "size": s} for n, s in zip(self.names, self.sizes)],
            "probs": [float(v) for v in self.probs.ravel()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "JointDistribution":
        try:
            names = tuple(v["name"] for v in data["vars"])
            sizes = tuple(int(v["size"]) for v in data["vars"])
            probs = np.asarray(data["probs"], dtype=float).reshape(sizes)
        except (KeyError, TypeError, ValueError) as exc:
            raise DistributionError(f"malformed distribution document: {exc}") from exc
        return cls(names, probs)

    @classmethod
    def from_json(cls, text: str) -> "JointDistribution":
        return cls.from_dict(json.loads(text))


def _as_names(names) -> list[str]:
    if isinstance(names, str):
        return [names]
    return list(names)


def shannon_entropy(d: JointDistribution, names: Iterable[str]) -> float:
    names = _as_names(names)
    if not names:
        return 0.0
    p = d.marginal(names).probs
    return float(-_xlog2x(p).sum())


def conditional_entropy(d: JointDistribution, target, given=()) -> float:
    """H(target | given) = H(target, given) - H(given)."""
    target, given = _as_names(target), _as_names(given)
    return shannon_entropy(d, target + given) - shannon_entropy(d, given)


def mutual_information(d: JointDistribution, left, right, given=()) -> float:
    """I(left : right | given) in bits; ``given`` empty for the plain version."""
    left, right, given = _as_names(left), _as_names(right), _as_names(given)
    overlap = set(left) & set(right)
    if overlap:
        raise DistributionError(f"variables on both sides: {sorted(overlap)}")
    return (
        shannon_entropy(d, left + given)
        + shannon_entropy(d, right + given)
        - shannon_entropy(d, left + right + given)
        - shannon_entropy(d, given)
    )


def apply_local_channel(
    d: JointDistribution, target: str, channel, new_name: str | None = None
) -> JointDistribution:
    """Push variable ``target`` through a row-stochastic matrix.

    ``channel[i, j]`` is P(out = j | in = i); rows are indexed by the current
    alphabet of ``target``.  The output takes the place of ``target``.
    """
    ax = d.axis(target)
    W = np.asarray(channel, dtype=float)
    if W.ndim != 2 or W.shape[0] != d.sizes[ax]:
        raise DistributionError(
            f"channel needs {d.sizes[ax]} rows, got shape {W.shape}"
        )
    if np.any(W < 0) or np.any(np.abs(W.sum(axis=1) - 1.0) > SUM_TOLERANCE):
        raise DistributionError("channel rows must be probability vectors")
    p = np.moveaxis(np.tensordot(d.probs, W, axes=([ax], [0])), -1, ax)
    names = list(d.names)
    if new_name is not None:
        names[ax] = new_name
    return JointDistribution(tuple(names), p)


# -- information causality ---------------------------------------------------------


def ic_term(t: float) -> float:
    """1 - h((1+t)/2), the information carried by a guess with bias t."""
    t = abs(float(t))
    if t < SERIES_CUTOFF:
        return t * t / (2 * LN2) * (1 + t * t / 6)
    if t >= 1.0:
        return 1.0
    return ((1 + t) * math.log1p(t) + (1 - t) * math.log1p(-t)) / (2 * LN2)


def ic_log2_sum(n: int, E: float) -> float:
    """log2 of 2^n (1 - h((1+E^n)/2)), evaluated without forming E^n."""
    if E == 0:
        return -math.inf
    log2_t = n * math.log2(E)
    if log2_t < math.log2(SERIES_CUTOFF):
        t2 = 2.0 ** (2 * log2_t)  # may underflow to 0; only a correction term
        return n + 2 * log2_t - math.log2(2 * LN2) + math.log2(1 + t2 / 6)
    return n + math.log2(ic_term(2.0**log2_t))


@dataclass(frozen=True)
class IcEvaluation:
    n: int
    E: float
    per_term: float
    sum: float
    bound: float
    log_sum2: float

    @property
    def violated(self) -> bool:
        return self.log_sum2 > math.log2(self.bound)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "E": self.E,
            "perTermInfo": self.per_term,
            "sum": self.sum,
            "bound": self.bound,
            "logSum2": self.log_sum2,
            "violated": self.violated,
        }


def _check_depth_bias(n, E) -> tuple[int, float]:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"depth must be a positive integer, got {n!r}")
    E = float(E)
    if not 0.0 <= E <= 1.0:
        raise ValueError(f"bias must lie in [0, 1], got {E}")
    return int(n), E


def ic_sum(n: int, E, bound: float = 1.0) -> IcEvaluation:
    """IC sum of the depth-n concatenated code with per-pair bias E.

    All 2^n bits are guessed with bias E^n, so the sum is
    2^n (1 - h((1+E^n)/2)).  The comparison with ``bound`` is made on the
    log2 scale, which stays finite where E^n underflows.
    """
    n, E = _check_depth_bias(n, E)
    log_sum2 = ic_log2_sum(n, E)
    log2_term = log_sum2 - n
    per_term = 2.0**log2_term if log2_term > -1074 else 0.0
    total = 2.0**log_sum2 if log_sum2 < 1024 else math.inf
    return IcEvaluation(n, E, per_term, total, float(bound), log_sum2)


def _violation_depths(nmax: int) -> np.ndarray:
    return np.arange(1, nmax + 1, dtype=float)


def _violates_somewhere(E: float, ns: np.ndarray) -> bool:
    """True if 2^n (1 - h((1+E^n)/2)) > 1 for some depth in ``ns``."""
    if E <= 0:
        return False
    if E >= 1:
        return True
    log2_t = ns * math.log2(E)
    t = np.exp2(log2_t)
    small = log2_t < math.log2(SERIES_CUTOFF)
    logs = np.empty_like(ns)
    # series branch
    t2 = np.exp2(2 * log2_t[small])
    logs[small] = ns[small] + 2 * log2_t[small] - math.log2(2 * LN2) + np.log2(1 + t2 / 6)
    # closed form
    tl = t[~small]
    term = ((1 + tl) * np.log1p(tl) + (1 - tl) * np.log1p(-tl)) / (2 * LN2)
    logs[~small] = ns[~small] + np.log2(term)
    return bool(np.any(logs > 0))


def tsirelson_threshold(nmax: int, tol: float = 1e-7) -> float:
    """Smallest bias E whose concatenated code violates IC at some depth <= nmax.

    Found by bisection on [0, 1]; the violation set is upward closed in E
    because 1 - h((1+t)/2) increases with t.
    """
    if isinstance(nmax, bool) or int(nmax) != nmax or nmax < 1:
        raise ValueError(f"nmax must be a positive integer, got {nmax!r}")
    ns = _violation_depths(int(nmax))
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _violates_somewhere(mid, ns):
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class QuadraticBound:
    value: float
    satisfied: bool


def quadratic_bound(
    biases: Sequence, multiplicities: Sequence[int] | None = None, tol: float = 1e-12
) -> QuadraticBound:
    """Sum of squared biases and whether it stays <= 1.

    ``multiplicities`` repeats each bias that many times, so a code whose
    2^n bits share one bias can be checked without a 2^n-long list.
    """
    if multiplicities is None:
        multiplicities = [1] * len(biases)
    if len(multiplicities) != len(biases) or any(m < 0 for m in multiplicities):
        raise ValueError("need one non-negative multiplicity per bias")
    terms = []
    for E, m in zip(biases, multiplicities):
        E = float(E)
        if not -1.0 <= E <= 1.0:
            raise ValueError(f"bias outside [-1, 1]: {E}")
        terms.append(m * (E * E))
    value = math.fsum(terms)
    return QuadraticBound(value, value <= 1.0 + tol)


# -- the proof chain, executable on classical variables ------------------------------


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    def holds(self, tol: float = 1e-9) -> bool:
        return self.slack >= -tol

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "slack": self.slack, "holds": self.holds()}


@dataclass(frozen=True)
class ProofChainReport:
    checks: tuple[InequalityCheck, ...]
    ic_sum: float
    bound: float

    def __getitem__(self, name: str) -> InequalityCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def all_hold(self, tol: float = 1e-9) -> bool:
        return all(c.holds(tol) for c in self.checks)


def check_ic_proof_chain(
    d: JointDistribution,
    bits: Sequence[str],
    guesses: Sequence[str],
    message: Sequence[str] | str,
    side: Sequence[str] | str = (),
    bound: float | None = None,
    weights: Sequence[float] | None = None,
    require_independent: bool = True,
    tol: float = 1e-9,
) -> ProofChainReport:
    """Evaluate each step of the IC argument on a classical joint distribution.

    Bob's black box is e = (message, side).  Checks, by name:

    * ``message_capacity``   I(x : m, side) <= bound
    * ``independence``       I(x : e) >= sum_i I(x_i : e)
    * ``data_processing``    I(x_i : e) >= I(x_i : beta_i) for each i
    * ``ic``                 sum_i I(x_i : beta_i) <= bound
    * ``entropy_message``    H(m) >= I(x : e)
    * ``entropy_guess[i]``   H(x_i | beta_i) >= H(x_i | e)
    * ``entropy_sum``        H(m) + sum_i H(x_i | beta_i) >= H(x)
    * ``weighted``           w0 H(m) + sum w_i H(x_i|beta_i) >= w0 I(x:e) + sum w_i H(x_i|e)

    The summed entropic form is written with the target bits x_i in the
    conditional entropies.  ``bound`` defaults to H(m).
    """
    bits, guesses = list(bits), list(guesses)
    message, side = _as_names(message), _as_names(side)
    if len(bits) != len(guesses):
        raise DistributionError("need one guess variable per input bit")
    e = message + side
    H = lambda names: shannon_entropy(d, names)  # noqa: E731

    if require_independent:
        dependence = sum(H([x]) for x in bits) - H(bits)
        if dependence > tol:
            raise DistributionError(
                f"input variables are not independent (total correlation {dependence:.3g})"
            )
    if bound is None:
        bound = H(message)
    if weights is None:
        weights = [1.0] * (len(bits) + 1)
    if len(weights) != len(bits) + 1 or any(w < 0 for w in weights):
        raise DistributionError("weights must be w0, w1..wN, all non-negative")

    I_x_e = mutual_information(d, bits, e)
    info = [mutual_information(d, [x], [g]) for x, g in zip(bits, guesses)]
    info_e = [mutual_information(d, [x], e) for x in bits]
    cond_guess = [conditional_entropy(d, [x], [g]) for x, g in zip(bits, guesses)]
    cond_e = [conditional_entropy(d, [x], e) for x in bits]
    H_m = H(message)

    checks = [
        InequalityCheck("message_capacity", bound, I_x_e),
        InequalityCheck("independence", I_x_e, math.fsum(info_e)),
    ]
    checks += [
        InequalityCheck(f"data_processing[{i}]", ie, ig)
        for i, (ie, ig) in enumerate(zip(info_e, info))
    ]
    checks.append(InequalityCheck("ic", bound, math.fsum(info)))
    checks.append(InequalityCheck("entropy_message", H_m, I_x_e))
    checks += [
        InequalityCheck(f"entropy_guess[{i}]", cg, ce)
        for i, (cg, ce) in enumerate(zip(cond_guess, cond_e))
    ]
    checks.append(InequalityCheck("entropy_sum", H_m + math.fsum(cond_guess), H(bits)))
    w0, ws = weights[0], weights[1:]
    checks.append(
        InequalityCheck(
            "weighted",
            w0 * H_m + math.fsum(w * c for w, c in zip(ws, cond_guess)),
            w0 * I_x_e + math.fsum(w * c for w, c in zip(ws, cond_e)),
        )
    )
    return ProofChainReport(tuple(checks), math.fsum(info), float(bound))


def random_classical_strategy(
    n_bits: int,
    rng: np.random.Generator,
    shared_size: int = 3,
    message_size: int = 2,
    deterministic: bool = False,
) -> JointDistribution:
    """Joint distribution of a random one-message classical RAC strategy.

    Variables: x0..x{N-1} (uniform bits), ``lam`` (shared randomness), ``m``
    (Alice's message, a function of x and lam) and g0..g{N-1} (Bob's guesses,
    each drawn from m and lam).  With ``deterministic`` the encoder and
    decoders are functions rather than stochastic maps.
    """
    N = n_bits
    lam = rng.dirichlet(np.ones(shared_size))

    def stochastic(rows, cols):
        if deterministic:
            out = np.zeros((rows, cols))
            out[np.arange(rows), rng.integers(0, cols, size=rows)] = 1.0
            return out
        return rng.dirichlet(np.ones(cols), size=rows)

    # encoder[x_index, lam, m], decoders[i][m, lam, guess]
    encoder = stochastic(2**N * shared_size, message_size).reshape(2**N, shared_size, message_size)
    decoders = [
        stochastic(message_size * shared_size, 2).reshape(message_size, shared_size, 2)
        for _ in range(N)
    ]

    shape = (2,) * N + (shared_size, message_size) + (2,) * N
    p = np.zeros(shape)
    for xi in range(2**N):
        xs = tuple((xi >> (N - 1 - i)) & 1 for i in range(N))
        for l in range(shared_size):
            for m in range(message_size):
                base = 2.0**-N * lam[l] * encoder[xi, l, m]
                if base == 0:
                    continue
                guess = np.array(1.0)
                for dec in decoders:
                    guess = np.multiply.outer(guess, dec[m, l])
                p[xs + (l, m)] = base * guess
    names = tuple(f"x{i}" for i in range(N)) + ("lam", "m") + tuple(f"g{i}" for i in range(N))
    return JointDistribution(names, p / p.sum())


def bits_and_guesses(n_bits: int) -> tuple[list[str], list[str]]:
    return [f"x{i}" for i in range(n_bits)], [f"g{i}" for i in range(n_bits)]

