"""Exact linear programming over the rationals.

A dense two-phase simplex with Bland's rule, so it always terminates.  The
problems solved here are small (one variable per departure cell of a single
walk), which makes a dense ``Fraction`` tableau perfectly adequate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .timealg import as_rational

__all__ = ["RationalLP", "LPResult", "solve_lp"]


@dataclass(frozen=True)
class RationalLP:
    """``maximize c·x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and ``x >= 0``."""

    c: Sequence
    A_ub: Sequence[Sequence] = ()
    b_ub: Sequence = ()
    A_eq: Sequence[Sequence] = ()
    b_eq: Sequence = ()

    def __post_init__(self):
        n = len(self.c)
        object.__setattr__(self, "c", tuple(as_rational(v) for v in self.c))
        for name_a, name_b in (("A_ub", "b_ub"), ("A_eq", "b_eq")):
            A = tuple(tuple(as_rational(v) for v in row) for row in getattr(self, name_a))
            b = tuple(as_rational(v) for v in getattr(self, name_b))
            if len(A) != len(b):
                raise ValueError(f"{name_a} and {name_b} have different lengths")
            if any(len(row) != n for row in A):
                raise ValueError(f"every row of {name_a} needs {n} entries")
            object.__setattr__(self, name_a, A)
            object.__setattr__(self, name_b, b)

    @property
    def n(self) -> int:
        return len(self.c)


@dataclass(frozen=True)
class LPResult:
    """``status`` is ``"optimal"``, ``"infeasible"`` or ``"unbounded"``."""

    status: str
    x: tuple = field(default=())
    value: Fraction | None = None


def _pivot(T: list[list[Fraction]], basis: list[int], r: int, col: int) -> None:
    row = T[r]
    p = row[col]
    if p != 1:
        T[r] = row = [v / p for v in row]
    for i, other in enumerate(T):
        if i != r:
            f = other[col]
            if f:
                T[i] = [a - f * b for a, b in zip(other, row)]
    basis[r] = col


def _simplex(T, basis, cost, allowed) -> str:
    """Maximise ``cost`` over the tableau in place; columns outside ``allowed`` never enter."""
    m = len(T)
    while True:
        entering = None
        for j in allowed:
            if j in basis:
                continue
            r = cost[j] - sum((cost[basis[i]] * T[i][j] for i in range(m) if T[i][j]), Fraction(0))
            if r > 0:
                entering = j
                break
        if entering is None:
            return "optimal"
        best = None
        for i in range(m):
            a = T[i][entering]
            if a > 0:
                ratio = T[i][-1] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            return "unbounded"
        _pivot(T, basis, best[1], entering)


def solve_lp(lp: RationalLP) -> LPResult:
    """Solve ``lp`` exactly.

    Examples
    --------
    >>> solve_lp(RationalLP([1], [[1], [1]], ["1/3", "2/7"])).x
    (Fraction(2, 7),)
    """
    n = lp.n
    rows = [(list(a), b, 1) for a, b in zip(lp.A_ub, lp.b_ub)]
    rows += [(list(a), b, 0) for a, b in zip(lp.A_eq, lp.b_eq)]
    m = len(rows)
    n_slack = len(lp.A_ub)
    # columns: x (n) | slacks (n_slack) | artificials (m) | rhs
    width = n + n_slack + m
    T: list[list[Fraction]] = []
    basis: list[int] = []
    artificial_rows = []
    slack_idx = 0
    for i, (a, b, is_ub) in enumerate(rows):
        row = [Fraction(0)] * (width + 1)
        row[:n] = a
        if is_ub:
            row[n + slack_idx] = Fraction(1)
            slack_col = n + slack_idx
            slack_idx += 1
        else:
            slack_col = None
        row[-1] = b
        if b < 0:
            row = [-v for v in row]
        if slack_col is not None and row[slack_col] == 1:
            basis.append(slack_col)
        else:
            row[n + n_slack + i] = Fraction(1)
            basis.append(n + n_slack + i)
            artificial_rows.append(i)
        T.append(row)

    art_cols = set(range(n + n_slack, width))
    real_cols = list(range(n + n_slack))
    if artificial_rows:
        cost1 = [Fraction(0)] * width
        for j in art_cols:
            cost1[j] = Fraction(-1)
        _simplex(T, basis, cost1, list(range(width)))
        infeas = sum((T[i][-1] for i in range(m) if basis[i] in art_cols), Fraction(0))
        if infeas > 0:
            return LPResult("infeasible")
        # drive remaining (zero-valued) artificials out of the basis
        i = 0
        while i < len(T):
            if basis[i] in art_cols:
                col = next((j for j in real_cols if T[i][j] != 0), None)
                if col is None:
                    del T[i]
                    del basis[i]
                    continue
                _pivot(T, basis, i, col)
            i += 1

    cost2 = [Fraction(0)] * width
    cost2[:n] = lp.c
    status = _simplex(T, basis, cost2, real_cols)
    if status == "unbounded":
        return LPResult("unbounded")
    x = [Fraction(0)] * n
    for i, j in enumerate(basis):
        if j < n:
            x[j] = T[i][-1]
    value = sum((c * v for c, v in zip(lp.c, x)), Fraction(0))
    return LPResult("optimal", tuple(x), value)
