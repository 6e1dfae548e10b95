"""Local polytope: deterministic vertices, exact membership, dimension counts."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction

from .boxes import (
    BoxError,
    BoxPoint,
    Scenario,
    format_fraction,
    make_local_deterministic,
    validate,
)
from .simplex import phase1

DEFAULT_VERTEX_CAP = 10**6

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"


def vertex_count(s: Scenario) -> int:
    return s.nA**s.nX * s.nB**s.nY


def enumerate_local_vertices(s: Scenario, cap: int = DEFAULT_VERTEX_CAP) -> list[BoxPoint]:
    """All deterministic boxes a=f(x), b=g(y), lexicographic in (f, g)."""
    count = vertex_count(s)
    if count > cap:
        raise BoxError(f"{count} local vertices exceed the cap of {cap}")
    fs = list(itertools.product(range(s.nA), repeat=s.nX))
    gs = list(itertools.product(range(s.nB), repeat=s.nY))
    return [make_local_deterministic(f, g, s) for f in fs for g in gs]


def ns_dimension(s: Scenario) -> tuple[int, int]:
    """(dimension of the normalized full space, dimension of the no-signaling set)."""
    full = s.nX * s.nY * (s.nA * s.nB - 1)
    ns = (
        s.nX * s.nY * (s.nA - 1) * (s.nB - 1)
        + s.nX * (s.nA - 1)
        + s.nY * (s.nB - 1)
    )
    return full, ns


def _coordinate_rows(s: Scenario) -> list[list[int]]:
    """Index sets of table entries whose sums pin down a no-signaling box.

    Joint terms P(a,b|x,y) with a < nA-1, b < nB-1 plus the marginals
    P(a|x) (read at y=0) and P(b|y) (read at x=0).  There are exactly
    ``ns_dimension(s)[1]`` of them.
    """
    rows = []
    for x, y in itertools.product(range(s.nX), range(s.nY)):
        for a, b in itertools.product(range(s.nA - 1), range(s.nB - 1)):
            rows.append([s.index(x, y, a, b)])
    for x, a in itertools.product(range(s.nX), range(s.nA - 1)):
        rows.append([s.index(x, 0, a, b) for b in range(s.nB)])
    for y, b in itertools.product(range(s.nY), range(s.nB - 1)):
        rows.append([s.index(0, y, a, b) for a in range(s.nA)])
    return rows


@dataclass(frozen=True)
class MembershipCertificate:
    """Proof of (non-)membership in the local polytope.

    ``weights`` pairs vertex indices (into ``enumerate_local_vertices``) with
    convex weights.  ``witness`` is a linear functional on the box table; on
    an infeasible query it exceeds ``bound``, its maximum over all vertices.
    """

    status: str
    weights: tuple[tuple[int, Fraction], ...] = ()
    witness: tuple[Fraction, ...] | None = None
    bound: Fraction | None = None

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    def check(self, box: BoxPoint, vertices: list[BoxPoint] | None = None) -> bool:
        """Re-verify the certificate with exact arithmetic."""
        if vertices is None:
            vertices = enumerate_local_vertices(box.scenario)
        if self.feasible:
            ws = [w for _, w in self.weights]
            if any(w < 0 for w in ws) or sum(ws) != 1:
                return False
            recon = [Fraction(0)] * box.scenario.size
            for i, w in self.weights:
                for j, v in enumerate(vertices[i].table):
                    recon[j] += w * v
            return tuple(recon) == box.table
        value = _apply(self.witness, box)
        top = max(_apply(self.witness, v) for v in vertices)
        return top == self.bound and value > top

    def to_dict(self) -> dict:
        if self.feasible:
            return {
                "status": self.status,
                "weights": [[i, format_fraction(w)] for i, w in self.weights],
            }
        return {
            "status": self.status,
            "witness": [format_fraction(w) for w in self.witness],
            "bound": format_fraction(self.bound),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _apply(functional, box: BoxPoint) -> Fraction:
    return sum((c * p for c, p in zip(functional, box.table) if c), Fraction(0))


def classical_membership(
    box: BoxPoint, cap: int = DEFAULT_VERTEX_CAP
) -> MembershipCertificate:
    """Decide exactly whether ``box`` is a mixture of local deterministic boxes."""
    report = validate(box)
    if not report.ok:
        raise BoxError(f"membership needs a valid no-signaling box: {report.to_dict()}")
    s = box.scenario
    vertices = enumerate_local_vertices(s, cap)
    coords = _coordinate_rows(s)

    def coordinates(p: BoxPoint) -> list[Fraction]:
        return [sum((p.table[i] for i in row), Fraction(0)) for row in coords]

    columns = [coordinates(v) for v in vertices]
    # first row: weights sum to one
    A = [[Fraction(1)] * len(vertices)]
    A += [[col[r] for col in columns] for r in range(len(coords))]
    b = [Fraction(1)] + coordinates(box)

    result = phase1(A, b)
    if result.feasible:
        weights = tuple((i, w) for i, w in enumerate(result.primal) if w)
        cert = MembershipCertificate(FEASIBLE, weights=weights)
    else:
        # lift the dual on coordinates to a functional on the full table;
        # the normalization row contributes the same constant to every point
        witness = [Fraction(0)] * s.size
        for y, row in zip(result.dual[1:], coords):
            for i in row:
                witness[i] += y
        bound = max(_apply(witness, v) for v in vertices)
        cert = MembershipCertificate(INFEASIBLE, witness=tuple(witness), bound=bound)
    if not cert.check(box, vertices):
        raise ArithmeticError("membership certificate failed exact re-verification")
    return cert
