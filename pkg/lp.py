# src/lp.py
"""Exact rational linear programming: two-phase tableau simplex with Bland's rule.

All data are Fractions, so feasibility and optimality are decided without tolerances.
"""
from __future__ import annotations
from dataclasses import dataclass
from fractions import Fraction
import logging
from typing import List, Optional, Sequence

logger = logging.getLogger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass
class LPResult:
    status: str                      # "optimal" | "infeasible" | "unbounded"
    x: Optional[List[Fraction]] = None
    value: Optional[Fraction] = None

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"


class SimplexTableau:
    """Standard form: minimise c.z subject to A z = b, z >= 0, b >= 0."""

    def __init__(self, a: List[List[Fraction]], b: List[Fraction], c: List[Fraction]):
        self.m = len(a)
        self.n = len(c)
        self.rows = [list(r) + [bi] for r, bi in zip(a, b)]
        self.c = list(c)
        self.basis: List[int] = []
        self.pivots = 0

    def pivot(self, r: int, j: int, obj: List[Fraction]) -> None:
        piv = self.rows[r][j]
        row = [v / piv for v in self.rows[r]]
        self.rows[r] = row
        for i in range(len(self.rows)):
            if i != r:
                f = self.rows[i][j]
                if f != 0:
                    self.rows[i] = [a - f * b for a, b in zip(self.rows[i], row)]
        f = obj[j]
        if f != 0:
            obj[:] = [a - f * b for a, b in zip(obj, row)]
        self.basis[r] = j
        self.pivots += 1

    def run(self, obj: List[Fraction], allowed: int) -> str:
        """Bland's rule: lowest-index entering column, lowest-index basic variable on ratio ties."""
        while True:
            j = next((k for k in range(allowed) if obj[k] < 0), None)
            if j is None:
                return "optimal"
            best_r, best_ratio = None, None
            for i, row in enumerate(self.rows):
                if row[j] > 0:
                    ratio = row[-1] / row[j]
                    if (best_ratio is None or ratio < best_ratio
                            or (ratio == best_ratio and self.basis[i] < self.basis[best_r])):
                        best_r, best_ratio = i, ratio
            if best_r is None:
                return "unbounded"
            self.pivot(best_r, j, obj)

    def objective_row(self, costs: List[Fraction]) -> List[Fraction]:
        obj = list(costs) + [ZERO]
        for i, bj in enumerate(self.basis):
            f = obj[bj]
            if f != 0:
                obj = [a - f * b for a, b in zip(obj, self.rows[i])]
        return obj

    def solve(self) -> LPResult:
        n, m = self.n, self.m
        # phase I: one artificial per row
        for i, row in enumerate(self.rows):
            art = [ZERO] * m
            art[i] = ONE
            self.rows[i] = row[:-1] + art + [row[-1]]
        self.basis = [n + i for i in range(m)]
        obj = self.objective_row([ZERO] * n + [ONE] * m)
        self.run(obj, n + m)
        if -obj[-1] > 0:
            return LPResult("infeasible")
        # drive artificials out of the basis, dropping redundant rows
        i = 0
        while i < len(self.rows):
            if self.basis[i] >= n:
                j = next((k for k in range(n) if self.rows[i][k] != 0), None)
                if j is None:
                    del self.rows[i]
                    del self.basis[i]
                    continue
                self.pivot(i, j, obj)
            i += 1
        self.rows = [r[:n] + [r[-1]] for r in self.rows]
        obj = self.objective_row(self.c)
        status = self.run(obj, n)
        if status == "unbounded":
            return LPResult("unbounded")
        z = [ZERO] * n
        for i, bj in enumerate(self.basis):
            z[bj] = self.rows[i][-1]
        return LPResult("optimal", z, -obj[-1])


def linprog(c: Sequence, a_ub: Sequence[Sequence] = (), b_ub: Sequence = (),
            a_eq: Sequence[Sequence] = (), b_eq: Sequence = (),
            nonneg: Optional[Sequence[bool]] = None) -> LPResult:
    """Minimise c.x subject to a_ub x <= b_ub, a_eq x = b_eq.

    Variables are free unless flagged in ``nonneg``.
    """
    nv = len(c)
    nonneg = list(nonneg) if nonneg is not None else [False] * nv
    # column map: free variables split into positive and negative parts
    cols = []
    for k in range(nv):
        cols.append((k, ONE))
        if not nonneg[k]:
            cols.append((k, -ONE))
    n_slack = len(a_ub)
    width = len(cols) + n_slack

    def expand(row):
        return [Fraction(row[k]) * s for k, s in cols]

    a: List[List[Fraction]] = []
    b: List[Fraction] = []
    for i, (row, rhs) in enumerate(zip(a_ub, b_ub)):
        r = expand(row) + [ZERO] * n_slack
        r[len(cols) + i] = ONE
        a.append(r)
        b.append(Fraction(rhs))
    for row, rhs in zip(a_eq, b_eq):
        a.append(expand(row) + [ZERO] * n_slack)
        b.append(Fraction(rhs))
    for i in range(len(a)):
        if b[i] < 0:
            a[i] = [-v for v in a[i]]
            b[i] = -b[i]
    costs = [Fraction(c[k]) * s for k, s in cols] + [ZERO] * n_slack

    if not a:
        if any(v < 0 for v in costs):
            return LPResult("unbounded")
        return LPResult("optimal", [ZERO] * nv, ZERO)

    tableau = SimplexTableau(a, b, costs)
    res = tableau.solve()
    logger.debug("simplex: %d rows, %d columns, %d pivots, %s", len(a), width, tableau.pivots, res.status)
    if res.status != "optimal":
        return LPResult(res.status)
    x = [ZERO] * nv
    for (k, s), zv in zip(cols, res.x):
        x[k] += s * zv
    return LPResult("optimal", x, res.value)
