"""Linear-programming synthesis of Bell inequalities with low critical efficiency.

For a fixed state and measurement angles the quantum value of a symmetric
inequality is linear in its independent coefficients.  With the pair part
normalized to ``-1`` the critical efficiency is ``1 / max(triple part)``,
subject to every deterministic strategy scoring at most zero.

The float LP is solved with HiGHS, adding strategy constraints lazily for
large ``m``.  The optimal vertex is then recovered exactly: the rows tight
at the optimum determine a one-dimensional null space, computed over the
rationals, which gives integer coefficients.  The result is accepted only
after an exact classical-bound check.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import highspy
import numpy as np
from scipy.linalg import qr
from scipy.optimize import Bounds, LinearConstraint, milp, minimize, nnls
from sympy import QQ, ZZ
from sympy.polys.matrices import DomainMatrix

from . import lp
from .inequality import (
    PARTY_PAIRS,
    AsymmetricBellInequality,
    EfficiencySplit,
    NoViolation,
    SymmetricBellInequality,
    asym_quantum_value,
    eta_crit,
    mixed_small_angle_split,
    multiplicity,
    pair_keys,
    quantum_split,
    small_angle_split,
    triple_keys,
    _elements,
)
from .quantum import W_STATE, SmallAngleSpec, SymmetricState, sigma2
from .strategies import MAX_M, classical_bound, constraint_rows, most_violated

__all__ = [
    "SynthesisError",
    "InfeasibleLP",
    "UnboundedLP",
    "Certificate",
    "SynthesisResult",
    "ScanResult",
    "DerivationResult",
    "synthesize",
    "grid_scan",
    "derive_asymmetric",
    "inequality_hash",
    "identify",
]

log = logging.getLogger(__name__)

FULL_ROW_LIMIT = 5000  # above this many reduced strategies, add constraints lazily
BOX = 1e6  # bound on the scaled variables; hitting it means the LP is unbounded
SEP_LIMIT = 400
MAX_ROUNDS = 200


class SynthesisError(RuntimeError):
    pass


class InfeasibleLP(SynthesisError):
    pass


class UnboundedLP(SynthesisError):
    pass


@dataclass(frozen=True)
class Certificate:
    """Dual certificate: ``q3 = sum_s w_s row_s - bound * q2`` with ``w >= 0``.

    Every classically admissible coefficient vector then has triple part at
    most ``bound`` once its pair part is normalized to ``-1``.
    """

    codes: tuple
    weights: tuple
    bound: float
    residual: float

    def to_dict(self) -> dict:
        return {
            "strategies": list(self.codes),
            "weights": list(self.weights),
            "bound": self.bound,
            "residual": self.residual,
        }


@dataclass
class SynthesisResult:
    inequality: SymmetricBellInequality
    split: EfficiencySplit
    eta_crit: float
    angles: tuple
    lp_status: str
    lp_value: float
    family: str = "W"
    small_angle: bool = False
    mixing_slope: float | None = None
    certificate: Certificate | None = None

    def to_dict(self) -> dict:
        return {
            "eta_crit": float(self.eta_crit),
            "lp_status": self.lp_status,
            "lp_value": float(self.lp_value),
            "family": self.family,
            "small_angle": self.small_angle,
            "angles" if not self.small_angle else "slopes": [float(a) for a in self.angles],
            "mixing_slope": None if self.mixing_slope is None else float(self.mixing_slope),
            "split": {"m2": float(self.split.m2_value), "m3": float(self.split.m3_value)},
            "inequality": self.inequality.to_dict(),
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
        }


# --- problem construction ----------------------------------------------------


@dataclass
class _Problem:
    m: int
    pairs: list
    triples: list
    q2: np.ndarray
    q3: np.ndarray
    angles: tuple
    family: str
    small_angle: bool
    mixing: float | None
    evaluate: Callable[[SymmetricBellInequality], EfficiencySplit]

    @property
    def n(self) -> int:
        return len(self.pairs) + len(self.triples)


def _cancels(p, q) -> bool:
    if isinstance(p, float) or isinstance(q, float):
        return abs(p + q) <= 1e-12 * max(1.0, abs(p), abs(q))
    return p + q == 0


def _problem(target, angles, m: int | None) -> _Problem:
    if isinstance(target, SmallAngleSpec):
        phis = tuple(target.phis)
        if m is not None and m != len(phis):
            raise ValueError(f"m = {m} but {len(phis)} slopes given")
        m = len(phis)
        _check_m(m)
        pairs = [(i, j) for i, j in pair_keys(m) if _cancels(phis[i], phis[j])]
        triples = triple_keys(m)
        a = target.mixing_slope
        fphi = [float(p) for p in phis]
        c = 0.0 if a is None else float(a) / (2.0 * math.sqrt(3.0))
        a2 = 0.0 if a is None else float(a) ** 2
        q2 = [multiplicity(i, j) * ((fphi[i] * fphi[j]) ** 2 / 48 + c * fphi[i] * fphi[j] + a2) for i, j in pairs]
        q3 = [
            multiplicity(i, j, k) * (s * s / 48 + c * s + a2)
            for i, j, k in triples
            for s in [sigma2(fphi[i], fphi[j], fphi[k])]
        ]
        if a is None:
            def evaluate(ineq):
                return small_angle_split(ineq, phis)
            family = "W"
        else:
            def evaluate(ineq):
                return mixed_small_angle_split(ineq, phis).split_at(float(a))
            family = "W+111"
        return _Problem(m, pairs, triples, _vec(q2, 0, len(triples)), _vec(q3, len(pairs), 0),
                        phis, family, True, a, evaluate)
    if isinstance(target, SymmetricState):
        if angles is None:
            raise ValueError("explicit angles are required for a SymmetricState target")
        angles = tuple(float(a) for a in angles)
        if m is not None and m != len(angles):
            raise ValueError(f"m = {m} but {len(angles)} angles given")
        m = len(angles)
        _check_m(m)
        pair_el, triple_el = _elements(target, target)
        pairs, triples = pair_keys(m), triple_keys(m)
        q2 = [multiplicity(i, j) * pair_el(angles[i], angles[j]) for i, j in pairs]
        q3 = [multiplicity(i, j, k) * triple_el(angles[i], angles[j], angles[k]) for i, j, k in triples]

        def evaluate(ineq):
            return quantum_split(ineq, target, angles)

        family = _family_of(target)
        return _Problem(m, pairs, triples, _vec(q2, 0, len(triples)), _vec(q3, len(pairs), 0),
                        angles, family, False, None, evaluate)
    raise TypeError(f"unsupported synthesis target {type(target).__name__}")


def _family_of(state: SymmetricState) -> str:
    if state.c000:
        return "W+111+000"
    return "W+111" if state.c111 else "W"


def _vec(vals, before: int, after: int) -> np.ndarray:
    return np.concatenate([np.zeros(before), np.asarray(vals, dtype=float), np.zeros(after)])


def _check_m(m: int) -> None:
    if not 1 <= m <= MAX_M:
        raise ValueError(f"setting count {m} outside 1..{MAX_M}")


def _reduced_codes(m: int, max_weight: int | None = None) -> np.ndarray:
    words = [w for w in range(1 << m) if max_weight is None or bin(w).count("1") <= max_weight]
    codes = [
        (a << (2 * m)) | (b << m) | c
        for a, b, c in itertools.combinations_with_replacement(words, 3)
        if b > 0
    ]
    return np.array(sorted(codes), dtype=np.int64)


def _full_tensors(prob: _Problem, x: np.ndarray):
    m = prob.m
    m2 = np.zeros((m, m))
    m3 = np.zeros((m, m, m))
    for v, (i, j) in zip(x, prob.pairs):
        m2[i, j] = m2[j, i] = v
    for v, key in zip(x[len(prob.pairs):], prob.triples):
        for p in set(itertools.permutations(key)):
            m3[p] = v
    return m2, m3


# --- cutting-plane LP ----------------------------------------------------------


class _Rows:
    """Working set of strategy constraints."""

    def __init__(self, prob: _Problem):
        self.prob = prob
        self.lazy = _reduced_count(prob.m) > FULL_ROW_LIMIT
        codes = _reduced_codes(prob.m, 1 if self.lazy else None)
        self.codes = list(codes)
        self.known = set(self.codes)
        self.R = constraint_rows(codes, prob.m, prob.pairs, prob.triples).astype(float)

    def add(self, codes) -> int:
        new = [c for c in codes if c not in self.known]
        if new:
            rows = constraint_rows(new, self.prob.m, self.prob.pairs, self.prob.triples).astype(float)
            self.R = np.vstack([self.R, rows])
            self.codes += new
            self.known.update(new)
        return len(new)

    def separate(self, x: np.ndarray) -> int:
        if not self.lazy:
            return 0
        m2, m3 = _full_tensors(self.prob, x)
        tol = 1e-7 * max(1.0, float(np.abs(x).max()))
        codes, _ = most_violated(self.prob.m, m2, m3, tol=tol, limit=SEP_LIMIT)
        return self.add(codes)


def _reduced_count(m: int) -> int:
    n = 1 << m
    return math.comb(n + 2, 3) - n


class _Model:
    """Incrementally grown HiGHS model; re-solves warm-start from the previous basis."""

    def __init__(self, cost, lower, upper, maximize: bool = False):
        self.h = highspy.Highs()
        self.h.setOptionValue("output_flag", False)
        n = len(cost)
        self.n = n
        self.h.addVars(n, np.broadcast_to(np.asarray(lower, float), n).copy(), np.broadcast_to(np.asarray(upper, float), n).copy())
        self.h.changeColsCost(n, np.arange(n, dtype=np.int32), np.asarray(cost, dtype=float))
        sense = highspy.ObjSense.kMaximize if maximize else highspy.ObjSense.kMinimize
        self.h.changeObjectiveSense(sense)

    def add_rows(self, A, lower, upper) -> None:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if not len(A):
            return
        k = len(A)
        nz = A != 0
        starts = np.concatenate([[0], np.cumsum(nz.sum(axis=1))[:-1]]).astype(np.int32)
        idx = np.nonzero(nz)[1].astype(np.int32)
        vals = A[nz]
        lo = np.broadcast_to(np.asarray(lower, float), k).copy()
        hi = np.broadcast_to(np.asarray(upper, float), k).copy()
        self.h.addRows(k, lo, hi, len(vals), starts, idx, vals)

    def le(self, A) -> None:
        self.add_rows(A, -highspy.kHighsInf, 0.0)

    def solve(self) -> np.ndarray:
        self.h.run()
        status = self.h.getModelStatus()
        if status == highspy.HighsModelStatus.kInfeasible:
            raise InfeasibleLP("linear program is infeasible")
        if status != highspy.HighsModelStatus.kOptimal:
            raise SynthesisError(f"HiGHS: {self.h.modelStatusToString(status)}")
        return np.array(self.h.getSolution().col_value[: self.n])


def _stage_optimum(prob: _Problem, rows: _Rows, scale: float, box: float = BOX):
    """Maximize the triple part with pair part ``-1`` (variables scaled by ``scale``)."""
    q2s, q3s = prob.q2 * scale, prob.q3 * scale
    model = _Model(q3s, -box, box, maximize=True)
    model.add_rows(q2s, -1.0, -1.0)
    model.le(rows.R)
    for _ in range(MAX_ROUNDS):
        y = model.solve()
        before = len(rows.R)
        if rows.separate(y) == 0:
            break
        model.le(rows.R[before:])
    else:
        raise SynthesisError("cutting-plane loop did not converge")
    value = float(q3s @ y)
    if box == BOX and np.abs(y).max() >= 0.99 * box:
        # coefficients without quantum weight may sit on the box; only a growing optimum is unbounded
        _, wider = _stage_optimum(prob, rows, scale, 100 * box)
        if wider > value * (1 + 1e-6) + 1e-9:
            raise UnboundedLP("LP is unbounded for these angles (degenerate angle set)")
    return y, value


def _face_rows(prob: _Problem, rows: _Rows, y: np.ndarray, value: float, scale: float):
    """Rows supporting a dual certificate at the optimum ``y`` (scaled variables)."""
    slack = rows.R @ y
    tol = 1e-7 * max(1.0, float(np.abs(y).max()))
    tight = np.flatnonzero(np.abs(slack) <= tol)
    target = prob.q3 * scale + value * prob.q2 * scale
    if len(tight):
        w, resid = nnls(rows.R[tight].T, target, maxiter=50 * len(tight) + 1000)
    else:
        w, resid = np.zeros(0), float(np.linalg.norm(target))
    keep = w > 1e-9 * max(1.0, float(w.max()) if len(w) else 1.0)
    return tight, tight[keep], w[keep], resid


def _stage_support(prob: _Problem, rows: _Rows, face: Sequence[int], scale: float):
    """Minimum-L1 point of the optimal face (a proxy for the fewest nonzero coefficients)."""
    n = prob.n
    fset = set(int(r) for r in face)
    others = [r for r in range(len(rows.R)) if r not in fset]
    pad = lambda A: np.hstack([A, np.zeros((len(A), n))])  # noqa: E731
    model = _Model(np.concatenate([np.zeros(n), np.ones(n)]), [-BOX] * n + [0] * n, BOX)
    model.add_rows(np.concatenate([prob.q2 * scale, np.zeros(n)]), -1.0, -1.0)
    model.add_rows(pad(rows.R[sorted(fset)]), 0.0, 0.0)
    model.le(pad(rows.R[others]))
    eye = np.eye(n)
    model.le(np.hstack([eye, -eye]))
    model.le(np.hstack([-eye, -eye]))
    for _ in range(MAX_ROUNDS):
        y = model.solve()[:n]
        before = len(rows.R)
        if rows.separate(y) == 0:
            return y
        model.le(pad(rows.R[before:]))
    raise SynthesisError("support minimization did not converge")


def _exact_direction(prob: _Problem, rows: _Rows, y: np.ndarray):
    """Rational ray through ``y`` spanned by its tight rows and zero coordinates, or ``None``."""
    n = prob.n
    big = float(np.abs(y).max())
    tol = 1e-7 * max(1.0, big)
    slack = rows.R @ y
    tight = rows.R[np.abs(slack) <= tol]
    zeros = np.eye(n)[np.abs(y) <= 1e-9 * max(1.0, big)]
    A = np.vstack([tight, zeros])
    if len(A) < n - 1:
        return None
    _, R, piv = qr(A.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    rank = int((diag > 1e-9 * diag[0]).sum()) if len(diag) else 0
    if rank != n - 1:
        return None
    chosen = A[np.sort(piv[:rank])]
    dm = DomainMatrix([[ZZ(int(round(v))) for v in row] for row in chosen], (rank, n), ZZ).convert_to(QQ)
    ns = dm.nullspace()
    if ns.shape[0] != 1:
        return None
    d = [Fraction(int(v.numerator), int(v.denominator)) for v in ns.to_Matrix()]
    dot = sum(float(v) * y_i for v, y_i in zip(d, y))
    if dot == 0:
        return None
    if dot < 0:
        d = [-v for v in d]
    return d


def _to_inequality(prob: _Problem, d) -> SymmetricBellInequality:
    k = len(prob.pairs)
    m2 = {key: v for key, v in zip(prob.pairs, d[:k])}
    m3 = {key: v for key, v in zip(prob.triples, d[k:])}
    return SymmetricBellInequality(prob.m, m2, m3).integer_normalized()


def _accept(prob: _Problem, ineq: SymmetricBellInequality, value: float):
    """Exact classical check and threshold consistency with the LP optimum."""
    if any(v > 0 for v in ineq.m2.values()):
        return None
    if classical_bound(ineq)[0] != 0:
        return None
    split = prob.evaluate(ineq)
    try:
        eta = float(eta_crit(split))
    except NoViolation:
        return None
    if abs(eta * value - 1.0) > 1e-6:
        return None
    return split, eta


def synthesize(
    target,
    angles: Sequence | None = None,
    m: int | None = None,
) -> SynthesisResult:
    """Symmetric inequality minimizing the critical efficiency for a state and angles.

    ``target`` is a :class:`SmallAngleSpec` (slopes, optional mixing slope)
    or a :class:`SymmetricState` with explicit ``angles``.  Raises
    :class:`InfeasibleLP` if the pair part cannot be normalized,
    :class:`UnboundedLP` for degenerate angle sets and
    :class:`NoViolation` when the optimum gives no violation for
    ``eta <= 1``.
    """
    prob = _problem(target, angles, m)
    if not np.any(prob.q2):
        raise InfeasibleLP("every pair matrix element vanishes; cannot normalize the pair part to -1")
    scale = 1.0 / float(np.abs(prob.q2).max())
    rows = _Rows(prob)
    y, value = _stage_optimum(prob, rows, scale)
    if value <= 1.0 + 1e-12:
        raise NoViolation(f"best triple part {value:.9g} gives no violation below unit efficiency")
    tight, face, weights, resid = _face_rows(prob, rows, y, value, scale)
    cert = Certificate(
        tuple(int(rows.codes[r]) for r in face),
        tuple(float(w) for w in weights),
        value,
        float(resid),
    )
    candidates = []
    try:
        candidates.append(_stage_support(prob, rows, face, scale))
    except SynthesisError as exc:
        log.debug("support stage failed: %s", exc)
    candidates.append(y)
    for point in candidates:
        d = _exact_direction(prob, rows, point)
        if d is None:
            continue
        ineq = _to_inequality(prob, d)
        ok = _accept(prob, ineq, value)
        if ok is not None:
            split, eta = ok
            return SynthesisResult(
                ineq, split, eta, prob.angles, "optimal", value,
                prob.family, prob.small_angle, prob.mixing, cert,
            )
    raise SynthesisError("could not recover an exact optimal vertex")


# --- identification ---------------------------------------------------------------


def inequality_hash(ineq) -> str:
    """Short digest of the integer-normalized coefficients."""
    text = json.dumps(ineq.integer_normalized().to_dict(), sort_keys=True)
    return hashlib.sha1(text.encode()).hexdigest()[:12]


def identify(ineq) -> str:
    """Catalog id when the inequality matches a built-in entry, else its hash."""
    from . import catalog

    norm = ineq.integer_normalized()
    for entry in catalog.entries():
        if type(entry.inequality) is type(norm) and entry.inequality.integer_normalized() == norm:
            return entry.id
    return inequality_hash(norm)


# --- grid scans ------------------------------------------------------------------------


@dataclass
class ScanResult:
    best: SynthesisResult | None
    inequalities: dict = field(default_factory=dict)  # id or hash -> inequality
    records: list = field(default_factory=list)


def _scan_point(args):
    mode, family, point = args
    try:
        if mode == "angles":
            res = synthesize(W_STATE, point)
        elif family == "W":
            res = synthesize(SmallAngleSpec(point))
        else:
            from .optimize import iterate_synthesis_with_mixing

            res = iterate_synthesis_with_mixing(len(point), point, 1.0).result
    except (SynthesisError, NoViolation, ValueError, ZeroDivisionError):
        return None
    return res


def _grid_points(m: int, step, mode: str):
    if mode == "angles":
        n = int(math.floor(2 * math.pi / step + 1e-9))
        values = [k * step for k in range(n)]
        return list(itertools.combinations_with_replacement(values, m))
    st = Fraction(step).limit_denominator(10000)
    k = int(1 / st)
    values = [j * st for j in range(-k, k + 1)]
    if m == 1:
        return [(Fraction(1),)]
    # scale invariance: the second slope is fixed to 1
    return [(free[0], Fraction(1)) + tuple(free[1:]) for free in itertools.product(values, repeat=m - 1)]


def _refine_angles(ineq: SymmetricBellInequality, start) -> tuple:
    def f(theta):
        split = quantum_split(ineq, W_STATE, theta)
        if split.m3_value <= 0:
            return 10.0
        return float(-split.m2_value / split.m3_value)

    res = minimize(f, np.asarray(start, dtype=float), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    return tuple(float(t) for t in res.x), float(res.fun)


def grid_scan(
    m: int,
    step: float = math.pi / 20,
    family: str = "W",
    *,
    mode: str = "angles",
    refine: bool = True,
    jobs: int = 1,
    sink: Callable[[dict], None] | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> ScanResult:
    """Solve the synthesis LP on an even grid and collect the distinct optima.

    ``mode="angles"`` scans explicit W-state angles over ``[0, 2 pi)`` (sorted
    tuples, ``m <= 3``); ``mode="slopes"`` scans small-angle slopes in
    ``[-1, 1]`` with the second slope fixed to 1.  Each grid point produces a
    record passed to ``sink``.  With ``refine`` the angles of every distinct
    inequality are polished by Nelder-Mead and the LP is re-solved there.
    """
    if mode not in ("angles", "slopes"):
        raise ValueError(f"unknown scan mode {mode!r}")
    if family not in ("W", "W+111"):
        raise ValueError(f"unsupported scan family {family!r}")
    if mode == "angles" and family != "W":
        raise ValueError("angle scans support the W family only")
    if mode == "angles" and m > 3:
        raise ValueError("full angle grids are limited to m <= 3")
    if mode == "slopes" and m > 4:
        raise ValueError("slope grids are limited to m <= 4")
    if step <= 0:
        raise ValueError("step must be positive")
    _check_m(m)
    points = _grid_points(m, step, mode)
    tasks = [(mode, family, p) for p in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_scan_point, tasks, chunksize=16))
    else:
        results = []
        for n, t in enumerate(tasks):
            results.append(_scan_point(t))
            if progress is not None and (n + 1) % 50 == 0:
                progress(n + 1, len(tasks))
    out = ScanResult(None)
    best_at: dict = {}
    key_name = "angles" if mode == "angles" else "slopes"
    for point, res in zip(points, results):
        rec = {key_name: [float(p) for p in point], "eta_crit": None, "inequality": None}
        if res is not None:
            label = identify(res.inequality)
            out.inequalities.setdefault(label, res.inequality)
            rec["eta_crit"] = float(res.eta_crit)
            rec["inequality"] = label
            prev = best_at.get(label)
            if prev is None or res.eta_crit < prev.eta_crit:
                best_at[label] = res
            if out.best is None or _better(res, out.best):
                out.best = res
        out.records.append(rec)
        if sink is not None:
            sink(rec)
    if refine and mode == "angles" and out.best is not None:
        for label in sorted(best_at):
            res = best_at[label]
            theta, _ = _refine_angles(res.inequality, res.angles)
            try:
                polished = synthesize(W_STATE, theta)
            except (SynthesisError, NoViolation):
                continue
            if _better(polished, out.best):
                out.best = polished
    return out


def _better(a: SynthesisResult, b: SynthesisResult) -> bool:
    if a.eta_crit < b.eta_crit - 1e-12:
        return True
    if a.eta_crit > b.eta_crit + 1e-12:
        return False
    return a.inequality.coefficient_vector() < b.inequality.coefficient_vector()


# --- asymmetric derivation -----------------------------------------------------------


@dataclass
class DerivationResult:
    feasible: bool
    inequality: AsymmetricBellInequality | None = None
    scale: Fraction | None = None  # inequality * scale reproduces the symmetric quantum value
    report: str = ""

    @property
    def matched(self) -> AsymmetricBellInequality | None:
        """The derived inequality at the symmetric inequality's scale."""
        if self.inequality is None:
            return None
        return self.inequality.scaled(self.scale)


def _canon(vals) -> tuple:
    a = tuple(sorted(vals))
    b = tuple(sorted(-v for v in vals))
    return min(a, b)


def _class_key(slopes) -> tuple | None:
    """Value class of a matrix element; ``None`` for elements that vanish identically."""
    zeros = sum(1 for s in slopes if s == 0)
    if (len(slopes) == 2 and zeros == 2) or (len(slopes) == 3 and zeros >= 2):
        return None
    return (len(slopes), _canon(slopes))


def _asym_strategy_rows(settings, variables) -> np.ndarray:
    ma, mb, mc = settings
    total = ma + mb + mc
    codes = np.arange(1 << total, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(total)) & 1).astype(np.int64)
    party = {"A": bits[:, :ma], "B": bits[:, ma:ma + mb], "C": bits[:, ma + mb:]}
    cols = []
    for var in variables:
        if var[0] == "pair":
            _, pp, i, j = var
            cols.append(party[pp[0]][:, i] * party[pp[1]][:, j])
        else:
            _, i, j, k = var
            cols.append(party["A"][:, i] * party["B"][:, j] * party["C"][:, k])
    return np.stack(cols, axis=1)


def _build_asym(settings, variables, x) -> AsymmetricBellInequality:
    pairs, triples = {}, {}
    for var, v in zip(variables, x):
        if v == 0:
            continue
        if var[0] == "pair":
            pairs[var[1:]] = v
        else:
            triples[var[1:]] = v
    return AsymmetricBellInequality(tuple(settings), pairs, triples)


def derive_asymmetric(entry, party_slopes: Sequence[Sequence], sym_slopes: Sequence | None = None) -> DerivationResult:
    """Asymmetric inequality with per-party subsets of a symmetric entry's slopes.

    Coefficients are grouped by matrix-element value class (slope multiset up
    to a global sign); every class must carry the same total weight as in the
    symmetric inequality, and every deterministic strategy must score at most
    zero.  Among feasible solutions a mixed-integer program picks the one
    with fewest nonzero coefficients, then fewest triple terms, then the
    smallest L1 norm.
    """
    sym = entry.inequality if hasattr(entry, "inequality") else entry
    if not isinstance(sym, SymmetricBellInequality):
        raise TypeError("derive_asymmetric needs a symmetric inequality")
    if sym_slopes is None:
        if not hasattr(entry, "recipe") or entry.recipe.kind != "slopes":
            raise ValueError("symmetric slopes are required")
        sym_slopes = entry.recipe.resolve()
    sym_slopes = tuple(sym_slopes)
    if len(sym_slopes) != sym.m:
        raise ValueError("slope count does not match the symmetric inequality")
    party_slopes = [tuple(p) for p in party_slopes]
    if len(party_slopes) != 3 or any(not p for p in party_slopes):
        raise ValueError("need a non-empty slope list for each of the three parties")
    for p in party_slopes:
        for s in p:
            if s not in sym_slopes:
                raise ValueError(f"slope {s} is not among the symmetric slopes")
    settings = tuple(len(p) for p in party_slopes)

    target: dict = {}
    for (i, j), v in sym.m2.items():
        key = _class_key((sym_slopes[i], sym_slopes[j]))
        if key is not None:
            target[key] = target.get(key, 0) + v * multiplicity(i, j)
    for (i, j, k), v in sym.m3.items():
        key = _class_key((sym_slopes[i], sym_slopes[j], sym_slopes[k]))
        if key is not None:
            target[key] = target.get(key, 0) + v * multiplicity(i, j, k)
    target = {k: v for k, v in target.items() if v != 0}

    sa, sb, sc = party_slopes
    slot = {"A": sa, "B": sb, "C": sc}
    variables, keys = [], []
    for pp in PARTY_PAIRS:
        for i in range(len(slot[pp[0]])):
            for j in range(len(slot[pp[1]])):
                variables.append(("pair", pp, i, j))
                keys.append(_class_key((slot[pp[0]][i], slot[pp[1]][j])))
    for i, j, k in itertools.product(range(len(sa)), range(len(sb)), range(len(sc))):
        variables.append(("triple", i, j, k))
        keys.append(_class_key((sa[i], sb[j], sc[k])))

    classes = sorted(set(k for k in keys if k is not None) | set(target), key=repr)
    missing = [c for c in classes if c in target and c not in keys]
    if missing:
        return DerivationResult(False, report=f"infeasible: symmetric classes {missing} have no asymmetric terms")
    n = len(variables)
    A_eq = np.array([[1.0 if keys[v] == c else 0.0 for v in range(n)] for c in classes])
    b_eq = np.array([float(target.get(c, 0)) for c in classes])
    rows = _asym_strategy_rows(settings, variables).astype(float)
    big = 10.0 * (1.0 + float(np.abs(b_eq).max()) if len(b_eq) else 1.0)
    probe = _Model(np.zeros(n), -big, big)
    probe.add_rows(A_eq, b_eq, b_eq)
    probe.le(rows)
    try:
        probe.solve()
    except InfeasibleLP as exc:
        return DerivationResult(False, report=f"infeasible: {exc}")
    is_triple = np.array([v[0] == "triple" for v in variables], dtype=float)
    x = _sparsest(A_eq, b_eq, rows, is_triple, big)
    best = None
    if x is not None:
        best = _verified(settings, variables, keys, target, classes, [Fraction(v).limit_denominator(10000) for v in x])
    if best is None:
        best = _exact_feasible(settings, variables, keys, target, classes, rows.astype(np.int64))
        if best is None:
            return DerivationResult(False, report="infeasible: no exactly verified feasible point")
    norm = best.integer_normalized()
    scale = _ratio(best, norm)
    return DerivationResult(True, norm, scale, f"feasible: {norm.support} nonzero coefficients")


def _sparsest(A_eq, b_eq, rows, is_triple, big):
    """Fewest nonzeros, then fewest three-party terms, then smallest L1 norm.

    Mixed-integer program over ``(x, t, z)`` with ``|x| <= t <= big * z`` and
    binary ``z``; returns ``None`` if the solver fails.
    """
    n = A_eq.shape[1]
    Z = np.zeros((n, n))
    eye = np.eye(n)

    def block(*parts):
        return np.hstack(parts)

    cons = [
        LinearConstraint(block(A_eq, np.zeros_like(A_eq), np.zeros_like(A_eq)), b_eq, b_eq),
        LinearConstraint(block(rows, np.zeros_like(rows), np.zeros_like(rows)), -np.inf, 0.0),
        LinearConstraint(block(eye, -eye, Z), -np.inf, 0.0),
        LinearConstraint(block(-eye, -eye, Z), -np.inf, 0.0),
        LinearConstraint(block(Z, eye, -big * eye), -np.inf, 0.0),
    ]
    integrality = np.concatenate([np.zeros(2 * n), np.ones(n)])
    bounds = Bounds(np.concatenate([-big * np.ones(n), np.zeros(2 * n)]), np.concatenate([big * np.ones(2 * n), np.ones(n)]))
    zero = np.zeros(n)
    objectives = [
        np.concatenate([zero, zero, np.ones(n)]),
        np.concatenate([zero, zero, is_triple]),
        np.concatenate([zero, np.ones(n), zero]),
    ]
    res = None
    for obj in objectives:
        res = milp(obj, constraints=cons, integrality=integrality, bounds=bounds)
        if res.status != 0:
            return None
        # freeze this level (rounded: the first two objectives are integral)
        level = res.fun if obj is objectives[-1] else round(res.fun)
        cons.append(LinearConstraint(obj[None, :], -np.inf, level + 1e-9 * max(1.0, abs(level))))
    return res.x[:n]


def _ratio(orig: AsymmetricBellInequality, norm: AsymmetricBellInequality) -> Fraction:
    key, v = next(iter(norm.triples.items())) if norm.triples else next(iter(norm.pairs.items()))
    src = orig.triples if norm.triples else orig.pairs
    return Fraction(src[key]) / Fraction(v)


def _verified(settings, variables, keys, target, classes, x):
    sums: dict = {}
    for k, v in zip(keys, x):
        if k is not None:
            sums[k] = sums.get(k, 0) + v
    if any(sums.get(c, 0) != target.get(c, 0) for c in classes):
        return None
    ineq = _build_asym(settings, variables, x)
    if classical_bound(ineq)[0] != 0:
        return None
    return ineq


def _exact_feasible(settings, variables, keys, target, classes, rows):
    """Exact phase-1 feasibility on the full constraint set (small problems only)."""
    if len(rows) > 1024:
        return None
    n = len(variables)
    A = [[1 if keys[v] == c else 0 for v in range(n)] for c in classes]
    b = [target.get(c, 0) for c in classes]
    prog = lp.LinearProgram(
        [0] * n,
        A + rows.tolist(),
        [lp.Relation.EQ] * len(A) + [lp.Relation.LE] * len(rows),
        b + [0] * len(rows),
    )
    res = lp.feasibility(prog)
    if not res.ok:
        return None
    return _verified(settings, variables, keys, target, classes, res.x)


def asym_matches_symmetric(result: DerivationResult, entry, party_slopes, x: float = 0.05, etas=None) -> float:
    """Largest quantum-value mismatch between derived and symmetric inequality on an efficiency grid."""
    sym = entry.inequality
    slopes = entry.recipe.resolve()
    etas = np.linspace(0.1, 1.0, 10) if etas is None else etas
    sym_split = quantum_split(sym, W_STATE, [float(s) * x for s in slopes])
    angles = [[float(s) * x for s in p] for p in party_slopes]
    worst = 0.0
    for eta in etas:
        sv = eta**2 * sym_split.m2_value + eta**3 * sym_split.m3_value
        av = asym_quantum_value(result.matched, W_STATE, angles, float(eta))
        worst = max(worst, abs(sv - av))
    return worst
