"""Two-phase primal simplex on a dense tableau, exact over the rationals.

Maximizes ``c . x`` subject to rows ``a_r . x (<=|>=|=) b_r`` with each
variable either free, nonnegative or nonpositive.  Bland's rule is used for
both entering and leaving variables, so the pivot sequence is fixed by the
input and the method terminates on degenerate problems.

Exact mode computes with :class:`fractions.Fraction` semantics (``gmpy2.mpq``
internally when available); ``exact=False`` runs the same pivots in floating
point with an absolute tolerance.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

try:
    from gmpy2 import mpq as _mpq
except ImportError:  # pragma: no cover - gmpy2 is optional
    _mpq = None

__all__ = ["Relation", "Bound", "LinearProgram", "LPResult", "solve", "feasibility"]


class Relation(str, enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class Bound(str, enum.Enum):
    FREE = "free"
    NONNEG = "nonneg"
    NONPOS = "nonpos"


@dataclass
class LinearProgram:
    """``maximize objective . x`` subject to ``rows[r] . x  relations[r]  rhs[r]``."""

    objective: Sequence
    rows: Sequence[Sequence] = ()
    relations: Sequence = ()
    rhs: Sequence = ()
    bounds: Sequence | None = None

    def __post_init__(self) -> None:
        n = len(self.objective)
        if n == 0:
            raise ValueError("linear program has no variables")
        if not (len(self.rows) == len(self.relations) == len(self.rhs)):
            raise ValueError("rows, relations and rhs differ in length")
        for r, row in enumerate(self.rows):
            if len(row) != n:
                raise ValueError(f"row {r} has {len(row)} entries, expected {n}")
        self.relations = [Relation(rel) for rel in self.relations]
        if self.bounds is None:
            self.bounds = [Bound.FREE] * n
        elif len(self.bounds) != n:
            raise ValueError("bounds length does not match variable count")
        self.bounds = [Bound(b) for b in self.bounds]

    @property
    def n_vars(self) -> int:
        return len(self.objective)


@dataclass
class LPResult:
    status: str  # "optimal", "unbounded", "infeasible" or "feasible"
    value: object = None
    x: list = field(default_factory=list)
    duals: list = field(default_factory=list)
    pivots: int = 0

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")


class _Arith:
    def __init__(self, exact: bool, tol: float):
        self.exact = exact
        self.tol = 0 if exact else tol
        if exact:
            self.conv = _mpq if _mpq is not None else Fraction
        else:
            self.conv = float
        self.zero = self.conv(0)
        self.one = self.conv(1)

    def num(self, v):
        if not isinstance(v, (int, float, Fraction)) and hasattr(v, "__index__"):
            v = int(v)
        if self.exact and isinstance(v, float):
            v = Fraction(v)
        if self.exact and _mpq is not None and isinstance(v, Fraction):
            return _mpq(v.numerator, v.denominator)
        return self.conv(v)

    def out(self, v):
        if self.exact:
            return Fraction(int(v.numerator), int(v.denominator))
        return float(v)


class _Tableau:
    def __init__(self, lp: LinearProgram, ar: _Arith):
        self.ar = ar
        num = ar.num
        zero, one = ar.zero, ar.one
        # structural columns: (variable, sign)
        self.cols: list[tuple[int, int]] = []
        for v, b in enumerate(lp.bounds):
            if b is Bound.FREE:
                self.cols += [(v, 1), (v, -1)]
            elif b is Bound.NONNEG:
                self.cols.append((v, 1))
            else:
                self.cols.append((v, -1))
        n_struct = len(self.cols)
        m = len(lp.rows)
        rows = []
        rels = []
        self.flip = []
        for row, rel, b in zip(lp.rows, lp.relations, lp.rhs):
            vals = [num(x) for x in row]
            b = num(b)
            sgn = 1
            if b < 0:
                sgn = -1
                b = -b
                vals = [-x for x in vals]
                rel = {Relation.LE: Relation.GE, Relation.GE: Relation.LE}.get(rel, rel)
            rows.append(([vals[v] * s if s == 1 else -vals[v] for v, s in self.cols], b))
            rels.append(rel)
            self.flip.append(sgn)
        # slack / surplus columns, then artificials
        n_slack = sum(1 for rel in rels if rel is not Relation.EQ)
        n_art = sum(1 for rel in rels if rel is not Relation.LE)
        self.n_struct = n_struct
        self.n_cols = n_struct + n_slack + n_art
        self.art_start = n_struct + n_slack
        self.T: list[list] = []
        self.basis: list[int] = []
        self.init_col: list[int] = []
        si, ai = n_struct, self.art_start
        for (vals, b), rel in zip(rows, rels):
            line = vals + [zero] * (n_slack + n_art) + [b]
            if rel is Relation.LE:
                line[si] = one
                self.basis.append(si)
                self.init_col.append(si)
                si += 1
            else:
                if rel is Relation.GE:
                    line[si] = -one
                    si += 1
                line[ai] = one
                self.basis.append(ai)
                self.init_col.append(ai)
                ai += 1
            self.T.append(line)
        self.m = m
        self.cost = [zero] * self.n_cols
        for j, (v, s) in enumerate(self.cols):
            c = num(lp.objective[v])
            self.cost[j] = c if s == 1 else -c
        self.pivots = 0

    def reduced_costs(self, cost):
        d = list(cost)
        for r, bvar in enumerate(self.basis):
            cb = cost[bvar]
            if cb:
                line = self.T[r]
                for j in range(self.n_cols):
                    if line[j]:
                        d[j] -= cb * line[j]
        return d

    def pivot(self, r: int, c: int, d: list) -> None:
        T = self.T
        prow = T[r]
        piv = prow[c]
        if piv != 1:
            inv = 1 / piv
            for j in range(len(prow)):
                if prow[j]:
                    prow[j] = prow[j] * inv
        nz = [j for j in range(len(prow)) if prow[j]]
        for k in range(self.m):
            if k == r:
                continue
            line = T[k]
            f = line[c]
            if f:
                for j in nz:
                    line[j] -= f * prow[j]
        f = d[c]
        if f:
            for j in nz:
                if j < len(d):
                    d[j] -= f * prow[j]
        self.basis[r] = c
        self.pivots += 1

    def run(self, cost, allowed: int, max_pivots: int | None):
        """Bland iterations maximizing ``cost``; returns "optimal" or "unbounded"."""
        tol = self.ar.tol
        d = self.reduced_costs(cost)
        while True:
            enter = next((j for j in range(allowed) if d[j] > tol), None)
            if enter is None:
                return "optimal"
            best = None
            for r in range(self.m):
                a = self.T[r][enter]
                if a > tol:
                    ratio = self.T[r][-1] / a
                    if best is None or (ratio < best[0] - tol) or (
                        abs(ratio - best[0]) <= tol and self.basis[r] < best[1]
                    ):
                        best = (ratio, self.basis[r], r)
            if best is None:
                return "unbounded"
            self.pivot(best[2], enter, d)
            if max_pivots is not None and self.pivots > max_pivots:
                raise RuntimeError(f"simplex exceeded {max_pivots} pivots")

    def phase1(self, max_pivots) -> bool:
        zero, one = self.ar.zero, self.ar.one
        if self.art_start == self.n_cols:
            return True
        cost = [zero] * self.n_cols
        for j in range(self.art_start, self.n_cols):
            cost[j] = -one
        self.run(cost, self.n_cols, max_pivots)
        infeas = sum((self.T[r][-1] for r, b in enumerate(self.basis) if b >= self.art_start), zero)
        if infeas > self.ar.tol:
            return False
        # drive zero-level artificials out of the basis where possible
        for r, b in enumerate(self.basis):
            if b >= self.art_start:
                line = self.T[r]
                j = next((j for j in range(self.art_start) if abs(line[j]) > self.ar.tol), None)
                if j is not None:
                    self.pivot(r, j, [zero] * self.n_cols)
        return True

    def primal(self):
        x = [self.ar.zero] * self.n_cols
        for r, b in enumerate(self.basis):
            x[b] = self.T[r][-1]
        return x

    def duals(self, cost):
        out = []
        for r in range(self.m):
            col = self.init_col[r]
            y = sum((cost[b] * self.T[k][col] for k, b in enumerate(self.basis) if cost[b]), self.ar.zero)
            out.append(y * self.flip[r])
        return out


def _unpack_x(tab: _Tableau, lp: LinearProgram, ar: _Arith):
    xc = tab.primal()
    x = [ar.zero] * lp.n_vars
    for j, (v, s) in enumerate(tab.cols):
        if xc[j]:
            x[v] += xc[j] if s == 1 else -xc[j]
    return x


def solve(lp: LinearProgram, *, exact: bool = True, tol: float = 1e-9, max_pivots: int | None = None) -> LPResult:
    """Maximize ``lp.objective``; duals are returned per row in the original orientation."""
    ar = _Arith(exact, tol)
    tab = _Tableau(lp, ar)
    if not tab.phase1(max_pivots):
        return LPResult("infeasible", pivots=tab.pivots)
    status = tab.run(tab.cost, tab.art_start, max_pivots)
    if status == "unbounded":
        return LPResult("unbounded", pivots=tab.pivots)
    x = _unpack_x(tab, lp, ar)
    value = sum((ar.num(c) * xi for c, xi in zip(lp.objective, x)), ar.zero)
    duals = tab.duals(tab.cost)
    return LPResult(
        "optimal",
        value=ar.out(value),
        x=[ar.out(v) for v in x],
        duals=[ar.out(v) for v in duals],
        pivots=tab.pivots,
    )


def feasibility(lp: LinearProgram, *, exact: bool = True, tol: float = 1e-9) -> LPResult:
    """Phase 1 only: any point satisfying the constraints, or ``infeasible``."""
    ar = _Arith(exact, tol)
    tab = _Tableau(lp, ar)
    if not tab.phase1(None):
        return LPResult("infeasible", pivots=tab.pivots)
    x = _unpack_x(tab, lp, ar)
    return LPResult("feasible", x=[ar.out(v) for v in x], pivots=tab.pivots)
