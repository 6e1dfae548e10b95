"""Bipartite boxes P(a,b|x,y) in exact rational arithmetic.

A box is stored as a dense, row-major table over (x, y, a, b).  All
probabilities are :class:`fractions.Fraction` so that boundary cases such as
a CHSH value of exactly 3/4 are decided without tolerances.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence, Union

RationalLike = Union[Fraction, int, str]

CLASSICAL_BOUND = Fraction(3, 4)

CLASSICAL = "classical"
QUANTUM = "quantum-compatible"
SUPERQUANTUM = "superquantum"


class BoxError(ValueError):
    """Raised for malformed boxes, scenarios or box operations."""


def to_fraction(value: RationalLike) -> Fraction:
    """Convert ints, Fractions and ``"p/q"`` strings to an exact Fraction.

    Floats are rejected: they would silently import binary rounding into
    the exact code paths.
    """
    if isinstance(value, bool):
        raise BoxError(f"not a rational: {value!r}")
    if isinstance(value, (Fraction, int)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise BoxError(f"cannot parse rational {value!r}") from exc
    raise BoxError(f"expected an exact rational, got {type(value).__name__}")


@dataclass(frozen=True)
class Scenario:
    nX: int
    nY: int
    nA: int
    nB: int

    def __post_init__(self):
        for name in ("nX", "nY", "nA", "nB"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise BoxError(f"{name} must be a positive integer, got {v!r}")

    @property
    def size(self) -> int:
        return self.nX * self.nY * self.nA * self.nB

    def index(self, x: int, y: int, a: int, b: int) -> int:
        return ((x * self.nY + y) * self.nA + a) * self.nB + b

    def unravel(self, i: int) -> tuple[int, int, int, int]:
        i, b = divmod(i, self.nB)
        i, a = divmod(i, self.nA)
        x, y = divmod(i, self.nY)
        return x, y, a, b

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.nX, self.nY, self.nA, self.nB)


CHSH = Scenario(2, 2, 2, 2)


@dataclass(frozen=True)
class BoxPoint:
    """Probability point P(a,b|x,y); ``table`` is row-major over (x,y,a,b)."""

    scenario: Scenario
    table: tuple[Fraction, ...] = field(repr=False)

    def __post_init__(self):
        table = tuple(to_fraction(p) for p in self.table)
        if len(table) != self.scenario.size:
            raise BoxError(
                f"table has {len(table)} entries, scenario needs {self.scenario.size}"
            )
        object.__setattr__(self, "table", table)

    def __getitem__(self, key: tuple[int, int, int, int]) -> Fraction:
        x, y, a, b = key
        s = self.scenario
        if not (0 <= x < s.nX and 0 <= y < s.nY and 0 <= a < s.nA and 0 <= b < s.nB):
            raise IndexError(key)
        return self.table[s.index(x, y, a, b)]

    def alice_marginal(self, a: int, x: int, y: int = 0) -> Fraction:
        return sum((self[x, y, a, b] for b in range(self.scenario.nB)), Fraction(0))

    def bob_marginal(self, b: int, y: int, x: int = 0) -> Fraction:
        return sum((self[x, y, a, b] for a in range(self.scenario.nA)), Fraction(0))

    def to_dict(self) -> dict:
        return {
            "scenario": list(self.scenario.as_tuple()),
            "table": [format_fraction(p) for p in self.table],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "BoxPoint":
        try:
            scenario = Scenario(*[int(v) for v in data["scenario"]])
            table = data["table"]
        except (KeyError, TypeError, ValueError) as exc:
            raise BoxError(f"malformed box document: {exc}") from exc
        if not isinstance(table, list) or not all(isinstance(p, str) for p in table):
            raise BoxError("box table must be a list of 'p/q' strings")
        return cls(scenario, tuple(to_fraction(p) for p in table))

    @classmethod
    def from_json(cls, text: str) -> "BoxPoint":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BoxError(f"invalid box JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_function(
        cls, scenario: Scenario, prob: Callable[[int, int, int, int], RationalLike]
    ) -> "BoxPoint":
        s = scenario
        table = [
            prob(x, y, a, b)
            for x, y, a, b in itertools.product(
                range(s.nX), range(s.nY), range(s.nA), range(s.nB)
            )
        ]
        return cls(scenario, tuple(table))


def format_fraction(p: Fraction) -> str:
    return f"{p.numerator}/{p.denominator}"


# -- constructors -----------------------------------------------------------


def make_pr_box() -> BoxPoint:
    """The PR box: P(a,b|x,y) = 1/2 if a XOR b == x*y, else 0."""
    half = Fraction(1, 2)
    return BoxPoint.from_function(
        CHSH, lambda x, y, a, b: half if (a ^ b) == (x & y) else 0
    )


def make_white_noise(scenario: Scenario = CHSH) -> BoxPoint:
    w = Fraction(1, scenario.nA * scenario.nB)
    return BoxPoint(scenario, (w,) * scenario.size)


def make_isotropic(bias: RationalLike) -> BoxPoint:
    """Isotropic box with correlation bias E: (1 + (-1)^(a^b^xy) E) / 4."""
    E = to_fraction(bias)
    if abs(E) > 1:
        raise BoxError(f"bias must lie in [-1, 1], got {E}")

    def prob(x, y, a, b):
        sign = 1 if (a ^ b ^ (x & y)) == 0 else -1
        return (1 + sign * E) / 4

    return BoxPoint.from_function(CHSH, prob)


def make_local_deterministic(
    f: Sequence[int], g: Sequence[int], scenario: Scenario = CHSH
) -> BoxPoint:
    """Product box a = f(x), b = g(y); ``f`` and ``g`` are lookup tables."""
    f, g = tuple(f), tuple(g)
    if len(f) != scenario.nX or len(g) != scenario.nY:
        raise BoxError("f must be defined on every x and g on every y")
    if any(not 0 <= v < scenario.nA for v in f):
        raise BoxError(f"f maps outside Alice's alphabet of size {scenario.nA}")
    if any(not 0 <= v < scenario.nB for v in g):
        raise BoxError(f"g maps outside Bob's alphabet of size {scenario.nB}")
    return BoxPoint.from_function(
        scenario, lambda x, y, a, b: int(a == f[x] and b == g[y])
    )


def mix(points: Sequence[BoxPoint], weights: Sequence[RationalLike]) -> BoxPoint:
    """Exact convex combination of boxes sharing one scenario."""
    if not points:
        raise BoxError("mix needs at least one box")
    if len(points) != len(weights):
        raise BoxError("points and weights differ in length")
    ws = [to_fraction(w) for w in weights]
    if any(w < 0 for w in ws):
        raise BoxError("mixture weights must be non-negative")
    if sum(ws) != 1:
        raise BoxError(f"mixture weights sum to {sum(ws)}, not 1")
    scenario = points[0].scenario
    if any(p.scenario != scenario for p in points):
        raise BoxError("cannot mix boxes from different scenarios")
    table = [Fraction(0)] * scenario.size
    for p, w in zip(points, ws):
        if w:
            for i, v in enumerate(p.table):
                table[i] += w * v
    return BoxPoint(scenario, tuple(table))


def relabel_outputs(box: BoxPoint, alice: Sequence[int], bob: Sequence[int]) -> BoxPoint:
    """Apply output permutations a -> alice[a], b -> bob[b]."""
    s = box.scenario
    inv_a = {v: i for i, v in enumerate(alice)}
    inv_b = {v: i for i, v in enumerate(bob)}
    return BoxPoint.from_function(s, lambda x, y, a, b: box[x, y, inv_a[a], inv_b[b]])


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    nonnegative: bool
    normalized: bool
    no_signaling: bool
    negative_at: tuple[int, int, int, int] | None = None
    unnormalized_at: tuple[int, int] | None = None
    # (party, input, output, other input) of the first marginal that moves
    signaling_at: tuple[str, int, int, int] | None = None

    @property
    def ok(self) -> bool:
        return self.nonnegative and self.normalized and self.no_signaling

    def to_dict(self) -> dict:
        return {
            "nonnegative": self.nonnegative,
            "normalized": self.normalized,
            "noSignaling": self.no_signaling,
            "negativeAt": list(self.negative_at) if self.negative_at else None,
            "unnormalizedAt": list(self.unnormalized_at) if self.unnormalized_at else None,
            "signalingAt": list(self.signaling_at) if self.signaling_at else None,
        }


def validate(box: BoxPoint) -> ValidationReport:
    """Check non-negativity, normalization and no-signaling independently."""
    s = box.scenario
    negative_at = next(
        (s.unravel(i) for i, p in enumerate(box.table) if p < 0), None
    )
    unnormalized_at = None
    for x, y in itertools.product(range(s.nX), range(s.nY)):
        total = sum(
            (box[x, y, a, b] for a in range(s.nA) for b in range(s.nB)), Fraction(0)
        )
        if total != 1:
            unnormalized_at = (x, y)
            break

    signaling_at = None
    for x, a in itertools.product(range(s.nX), range(s.nA)):
        ref = box.alice_marginal(a, x, 0)
        bad = next((y for y in range(1, s.nY) if box.alice_marginal(a, x, y) != ref), None)
        if bad is not None:
            signaling_at = ("A", x, a, bad)
            break
    if signaling_at is None:
        for y, b in itertools.product(range(s.nY), range(s.nB)):
            ref = box.bob_marginal(b, y, 0)
            bad = next(
                (x for x in range(1, s.nX) if box.bob_marginal(b, y, x) != ref), None
            )
            if bad is not None:
                signaling_at = ("B", y, b, bad)
                break

    return ValidationReport(
        nonnegative=negative_at is None,
        normalized=unnormalized_at is None,
        no_signaling=signaling_at is None,
        negative_at=negative_at,
        unnormalized_at=unnormalized_at,
        signaling_at=signaling_at,
    )


def require_valid(box: BoxPoint, scenario: Scenario | None = None) -> None:
    if scenario is not None and box.scenario != scenario:
        raise BoxError(f"expected scenario {scenario.as_tuple()}, got {box.scenario.as_tuple()}")
    report = validate(box)
    if not report.ok:
        raise BoxError(f"invalid box: {report.to_dict()}")


# -- CHSH -----------------------------------------------------------------------


@dataclass(frozen=True)
class ChshClassification:
    value: Fraction
    tier: str

    @property
    def bias(self) -> Fraction:
        return 2 * self.value - 1


def correlation_success(box: BoxPoint, x: int, y: int) -> Fraction:
    """P(a XOR b == x*y | x, y) for a CHSH-scenario box."""
    return sum(
        (box[x, y, a, b] for a in range(2) for b in range(2) if (a ^ b) == (x & y)),
        Fraction(0),
    )


def chsh_value(box: BoxPoint) -> Fraction:
    """Winning probability of the CHSH game with uniform inputs."""
    if box.scenario != CHSH:
        raise BoxError("CHSH value is defined only for the (2,2,2,2) scenario")
    return sum(
        (correlation_success(box, x, y) for x in range(2) for y in range(2)),
        Fraction(0),
    ) / 4


def within_tsirelson(value: Fraction) -> bool:
    """Exact test of value <= (2 + sqrt 2) / 4, i.e. (4v - 2)^2 <= 2 or 4v < 2."""
    t = 4 * value - 2
    return t <= 0 or t * t <= 2


def tier_of(value: Fraction) -> str:
    if value <= CLASSICAL_BOUND:
        return CLASSICAL
    if within_tsirelson(value):
        return QUANTUM
    return SUPERQUANTUM


def classify_chsh(box: BoxPoint) -> ChshClassification:
    report = validate(box)
    if not report.no_signaling:
        raise BoxError(f"signaling box cannot be classified: {report.signaling_at}")
    value = chsh_value(box)
    return ChshClassification(value, tier_of(value))

