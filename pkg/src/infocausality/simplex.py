"""Exact phase-1 simplex over Fractions.

Solves   min 1.t   s.t.  A w + t = b,  w >= 0,  t >= 0   (b >= 0)

which is zero iff ``A w = b`` has a non-negative solution.  Pivoting follows
Bland's rule, so the solve terminates and is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


@dataclass(frozen=True)
class Phase1Result:
    optimum: Fraction
    # primal values of the structural variables w
    primal: tuple[Fraction, ...]
    # dual y with A^T y <= 0 and b.y == optimum
    dual: tuple[Fraction, ...]
    pivots: int

    @property
    def feasible(self) -> bool:
        return self.optimum == 0


def phase1(A: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> Phase1Result:
    m = len(A)
    n = len(A[0]) if m else 0
    if len(b) != m:
        raise ValueError("row count of A and length of b differ")
    if any(len(row) != n for row in A):
        raise ValueError("ragged constraint matrix")

    # flip rows so that b >= 0; remember the sign to map duals back
    signs = [1 if bi >= 0 else -1 for bi in b]
    # tableau columns: n structural, m artificial, then rhs
    T = []
    for i in range(m):
        s = signs[i]
        row = [Fraction(s * v) for v in A[i]]
        row += [Fraction(int(i == j)) for j in range(m)]
        row.append(Fraction(s * b[i]))
        T.append(row)
    basis = [n + i for i in range(m)]
    width = n + m

    # reduced costs of min sum(t): c_j - sum of column j over artificial rows
    cost = [Fraction(0)] * n + [Fraction(1)] * m
    red = [cost[j] - sum((T[i][j] for i in range(m)), Fraction(0)) for j in range(width)]
    obj = sum((T[i][-1] for i in range(m)), Fraction(0))

    pivots = 0
    while True:
        entering = next((j for j in range(width) if red[j] < 0), None)
        if entering is None:
            break
        best = None
        for i in range(m):
            coef = T[i][entering]
            if coef > 0:
                ratio = T[i][-1] / coef
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            # cannot happen: the objective is bounded below by zero
            raise ArithmeticError("phase-1 objective unbounded")
        r = best[1]
        piv = T[r][entering]
        prow = [v / piv for v in T[r]]
        T[r] = prow
        for i in range(m):
            if i != r and T[i][entering]:
                f = T[i][entering]
                T[i] = [v - f * p for v, p in zip(T[i], prow)]
        f = red[entering]
        red = [v - f * p for v, p in zip(red, prow[:width])]
        obj += f * prow[-1]
        basis[r] = entering
        pivots += 1

    primal = [Fraction(0)] * n
    for i, j in enumerate(basis):
        if j < n:
            primal[j] = T[i][-1]
    optimum = sum((T[i][-1] for i, j in enumerate(basis) if j >= n), Fraction(0))
    assert optimum == obj

    # y_i = c_B B^-1 e_i = cost_i - red_{n+i}, then undo the row flips
    dual = tuple(signs[i] * (1 - red[n + i]) for i in range(m))
    return Phase1Result(optimum, tuple(primal), dual, pivots)
