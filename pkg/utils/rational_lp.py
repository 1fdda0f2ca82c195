"""Exact two-phase simplex over the rationals.

Small dense instances only: every entry is a Fraction and pivoting follows
Bland's rule, so the method terminates and never suffers rounding.
All variables are nonnegative; callers split free variables themselves.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence

from errors import InfeasibleError, UnboundedError

logger = logging.getLogger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass
class LPResult:
    x: List[Fraction]
    value: Fraction
    pivots: int


def _as_fractions(row: Sequence) -> List[Fraction]:
    return [Fraction(v) for v in row]


class _Tableau:
    """Rows are [coefficients..., rhs]; basis[i] is the basic column of row i."""

    def __init__(self, rows: List[List[Fraction]], basis: List[int]):
        self.rows = rows
        self.basis = basis
        self.pivots = 0

    def pivot(self, r: int, c: int):
        row = self.rows[r]
        p = row[c]
        if p != ONE:
            row = [v / p for v in row]
            self.rows[r] = row
        support = [j for j, v in enumerate(row) if v != 0]
        for i, other in enumerate(self.rows):
            if i == r:
                continue
            f = other[c]
            if f == 0:
                continue
            for j in support:
                other[j] -= f * row[j]
        self.basis[r] = c
        self.pivots += 1

    def minimize(self, cost: List[Fraction], allowed: List[int]):
        """Run Bland's-rule simplex for min cost·x over the allowed columns."""
        while True:
            basic = set(self.basis)
            cb = [cost[b] for b in self.basis]
            entering = None
            for j in allowed:
                if j in basic:
                    continue
                reduced = cost[j] - sum((cb[i] * self.rows[i][j] for i in range(len(self.rows)) if cb[i] != 0 and self.rows[i][j] != 0), ZERO)
                if reduced < 0:
                    entering = j
                    break
            if entering is None:
                return
            leaving = None
            best = None
            for i, row in enumerate(self.rows):
                a = row[entering]
                if a > 0:
                    ratio = row[-1] / a
                    if best is None or ratio < best or (ratio == best and self.basis[i] < self.basis[leaving]):
                        best = ratio
                        leaving = i
            if leaving is None:
                raise UnboundedError("Linear program is unbounded")
            self.pivot(leaving, entering)

    def solution(self, n: int) -> List[Fraction]:
        x = [ZERO] * n
        for i, b in enumerate(self.basis):
            if b < n:
                x[b] = self.rows[i][-1]
        return x


def solve_lp(c: Sequence,
             A_ub: Optional[Sequence[Sequence]] = None, b_ub: Optional[Sequence] = None,
             A_eq: Optional[Sequence[Sequence]] = None, b_eq: Optional[Sequence] = None,
             maximize: bool = False) -> LPResult:
    """Solve min (or max) c·x s.t. A_ub x ≤ b_ub, A_eq x = b_eq, x ≥ 0 exactly.

    Raises:
        InfeasibleError: no x satisfies the constraints
        UnboundedError: the objective is unbounded in the optimizing direction
    """
    c = _as_fractions(c)
    n = len(c)
    A_ub = [_as_fractions(r) for r in (A_ub or [])]
    b_ub = _as_fractions(b_ub or [])
    A_eq = [_as_fractions(r) for r in (A_eq or [])]
    b_eq = _as_fractions(b_eq or [])

    n_slack = len(A_ub)
    raw_rows = []
    for k, (row, rhs) in enumerate(zip(A_ub, b_ub)):
        slack = [ZERO] * n_slack
        slack[k] = ONE
        raw_rows.append((row + slack, rhs, n + k))
    for row, rhs in zip(A_eq, b_eq):
        raw_rows.append((row + [ZERO] * n_slack, rhs, None))

    # Rows whose slack can start basic need no artificial column.
    needs_art = []
    for coeffs, rhs, slack_col in raw_rows:
        needs_art.append(not (slack_col is not None and rhs >= 0))
    n_art = sum(needs_art)
    width = n + n_slack + n_art

    rows, basis = [], []
    art_col = n + n_slack
    for (coeffs, rhs, slack_col), art in zip(raw_rows, needs_art):
        if rhs < 0:
            coeffs = [-v for v in coeffs]
            rhs = -rhs
        full = coeffs + [ZERO] * n_art + [rhs]
        if art:
            full[art_col] = ONE
            basis.append(art_col)
            art_col += 1
        else:
            basis.append(slack_col)
        rows.append(full)

    tab = _Tableau(rows, basis)
    structural = list(range(n + n_slack))

    if n_art:
        phase1 = [ZERO] * (n + n_slack) + [ONE] * n_art
        tab.minimize(phase1, list(range(width)))
        infeas = sum((tab.rows[i][-1] for i, b in enumerate(tab.basis) if b >= n + n_slack), ZERO)
        if infeas > 0:
            raise InfeasibleError("Linear program is infeasible")
        # Drive remaining (zero-valued) artificials out of the basis.
        i = 0
        while i < len(tab.rows):
            if tab.basis[i] >= n + n_slack:
                col = next((j for j in structural if tab.rows[i][j] != 0), None)
                if col is None:
                    del tab.rows[i]
                    del tab.basis[i]
                    continue
                tab.pivot(i, col)
            i += 1

    sign = -1 if maximize else 1
    cost = [sign * v for v in c] + [ZERO] * (n_slack + n_art)
    tab.minimize(cost, structural)
    x = tab.solution(n)
    value = sum((ci * xi for ci, xi in zip(c, x)), ZERO)
    logger.debug(f"LP solved: {n} vars, {len(A_ub)}+{len(A_eq)} rows, {tab.pivots} pivots, value {value}")
    return LPResult(x=x, value=value, pivots=tab.pivots)


def is_feasible(A_ub=None, b_ub=None, A_eq=None, b_eq=None, nvars: Optional[int] = None) -> bool:
    n = nvars if nvars is not None else len((A_ub or A_eq)[0])
    try:
        solve_lp([0] * n, A_ub, b_ub, A_eq, b_eq)
        return True
    except InfeasibleError:
        return False
