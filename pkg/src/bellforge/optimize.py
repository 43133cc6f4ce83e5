"""Closed-form thresholds, free-parameter optimization, mixing iteration, violation curves.

Small-angle thresholds of the catalogued inequalities are rational (W state)
or algebraic (W with a small ``|111>`` admixture) functions of the slope
parameters.  They are kept as sympy expressions so that exact values,
gradients and Hessians are all available.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import sympy as sp
from scipy.optimize import brentq, minimize

from .inequality import NoViolation, SymmetricBellInequality, mixed_small_angle_split
from .quantum import SmallAngleSpec, SymmetricState
from .synthesis import SynthesisError, SynthesisResult, synthesize

__all__ = [
    "ClosedFormCondition",
    "ViolationCurvePoint",
    "MixingFixedPoint",
    "ConvergenceError",
    "DEFAULT_SEED",
    "default_seed",
    "conditions",
    "condition",
    "eta_crit_closed_form",
    "minimize_eta_crit",
    "optimal_mixing_slope",
    "iterate_synthesis_with_mixing",
    "mixing_multistart",
    "stationarity_residual",
    "max_violation_curve",
    "sym444_coefficients",
    "sym444_r_sum_form",
    "curve_csv",
    "no000_deficit",
]

DEFAULT_SEED = 42
CURVE_STARTS = 20
MIXING_STARTS = (1.0, 0.5, 0.1, 0.0, -0.1, -0.5, -1.0)
CURVE_MODES = ("full", "no000", "larsson")


def default_seed() -> int:
    """Seed for stochastic searches (``BELLFORGE_SEED`` overrides the default 42)."""
    raw = os.environ.get("BELLFORGE_SEED")
    return int(raw) if raw not in (None, "") else DEFAULT_SEED


class ConvergenceError(RuntimeError):
    pass


ETA = sp.Symbol("eta")
LAM, MU, NU = sp.symbols("lambda mu nu")
RHO, SIG, TAU = sp.symbols("rho sigma tau")


def sym444_coefficients(lam):
    """``(r, p, q)`` of the reduced violation condition for SYM-444."""
    r = 7 * lam**4 + 8 * lam**3 + 34 * lam**2 - 8 * lam + 7
    p = 5 * lam**4 + 6 * lam**2 + 5
    q = (lam**2 + 4 * lam - 1) ** 2 / 4
    return r, p, q


def sym444_r_sum_form(lam):
    """``r`` written as a manifestly positive sum."""
    return 5 * lam**4 + 2 * (lam + 1) ** 4 + 6 * lam**2 + 4 * (2 * lam - 1) ** 2 + 1


@dataclass(frozen=True)
class ClosedFormCondition:
    """Small-angle violation condition of one catalogued inequality.

    For W-state entries the condition is ``poly_state + eta * poly_eta > 0``
    (a positive common factor removed).  For mixed-state entries
    ``ww``, ``wx`` and ``xx`` are the x-scaled effective-operator elements;
    the violation condition with optimal mixing is
    ``ww - wx**2 / xx > 0`` (``xx < 0``).
    """

    id: str
    params: tuple  # sympy symbols
    slopes: tuple  # sympy expressions in params
    eta_expr: sp.Expr
    poly_state: sp.Expr | None = None
    poly_eta: sp.Expr | None = None
    ww: sp.Expr | None = None
    wx: sp.Expr | None = None
    xx: sp.Expr | None = None
    domain: Callable[[dict], bool] | None = None
    optimum_guess: tuple = ()

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(str(p) for p in self.params)

    @property
    def family(self) -> str:
        return "W" if self.poly_state is not None else "W+111"

    def violation(self) -> sp.Expr:
        """Expression positive exactly when the inequality is violated (small angles)."""
        if self.poly_state is not None:
            return self.poly_state + ETA * self.poly_eta
        return self.ww - self.wx**2 / self.xx

    def slope_values(self, values: Sequence):
        subs = dict(zip(self.params, (sp.nsimplify(v, rational=True) if isinstance(v, (int, Fraction)) else v for v in values)))
        out = []
        for s in self.slopes:
            v = sp.sympify(s).subs(subs)
            out.append(Fraction(int(v.p), int(v.q)) if v.is_Rational else float(v))
        return tuple(out)


def _w_condition(cid, params, slopes, state, eta, guess, domain=None):
    return ClosedFormCondition(cid, params, slopes, sp.cancel(-state / eta), state, eta,
                               domain=domain, optimum_guess=guess)


@lru_cache(maxsize=None)
def conditions() -> dict[str, ClosedFormCondition]:
    e = ETA
    half = sp.Rational(1, 2)
    r, p, q = sym444_coefficients(LAM)
    out = [
        _w_condition(
            "W-444", (LAM,), (1, -1, LAM, -LAM),
            -3 - LAM**4, 6 - 3 * (1 - 2 * LAM) ** 2, (0.466715,),
            domain=lambda v: abs(v[0]) <= 1,
        ),
        _w_condition(
            "W-666", (MU, NU), (1, -1, MU, -MU, NU, -NU),
            -3 * (1 + MU**4 + NU**4),
            6 + 6 * MU**4 + 4 * NU**4 - 3 * (1 - 2 * MU) ** 2 - 3 * (MU**2 - 2 * MU * NU) ** 2
            - 3 * (MU - NU - MU * NU) ** 2,
            (0.495815, 0.295435),
        ),
        _w_condition(
            "W-888", (RHO, SIG, TAU), (1, -1, RHO, -RHO, SIG, -SIG, TAU, -TAU),
            -3 * (1 + RHO**4 + SIG**4 + TAU**4),
            6 + 6 * RHO**4 + 6 * SIG**4 + 4 * TAU**4 - 3 * (1 - 2 * RHO) ** 2
            - 3 * (RHO**2 - 2 * RHO * SIG) ** 2 - 3 * (SIG**2 - 2 * SIG * TAU) ** 2
            - 3 * (RHO - SIG - RHO * SIG) ** 2 - 3 * (RHO * SIG - RHO * TAU - SIG * TAU) ** 2,
            (0.498442, 0.306395, 0.169989),
        ),
        ClosedFormCondition(
            "SYM-222", (), (0, 1), sp.Rational(3, 5),
            ww=-3 * e**3 / 48, wx=-3 * e**3 / (4 * sp.sqrt(3)), xx=-3 * e**2 + 2 * e**3,
        ),
        ClosedFormCondition(
            "SYM-333", (), (0, 1, -1), (19 + sp.sqrt(937)) / 96,
            ww=-6 * e**2 / 48, wx=-sp.sqrt(3) * e**2 * (2 * e - half), xx=-e**2 * (12 - 10 * e),
        ),
        ClosedFormCondition(
            "SYM-444", (LAM,), (1, -1, LAM, -LAM), half + (sp.sqrt(p**2 + 4 * r * q) - p) / (2 * r),
            ww=e**2 * (-1 - LAM**4 + e * (1 + 4 * LAM - 8 * LAM**2 - 4 * LAM**3 + LAM**4)) / 4,
            wx=sp.sqrt(3) * e**2 * (1 + LAM**2) * (1 - 3 * e),
            xx=-24 * e**2 * (1 - e),
            optimum_guess=(0.236068,),
        ),
    ]
    return {c.id: c for c in out}


def condition(cid: str) -> ClosedFormCondition:
    try:
        return conditions()[cid]
    except KeyError:
        raise KeyError(f"no closed form for {cid!r}; known: {', '.join(conditions())}") from None


def _subs(cond: ClosedFormCondition, params) -> dict:
    if params is None:
        params = ()
    if isinstance(params, dict):
        params = [params[n] for n in cond.param_names]
    params = tuple(params)
    if len(params) != len(cond.params):
        raise ValueError(f"{cond.id} takes parameters {cond.param_names}, got {len(params)} values")
    if cond.domain is not None and not cond.domain([float(sp.N(v)) for v in params]):
        raise ValueError(f"parameters {params} outside the valid domain of {cond.id}")
    return {s: (sp.nsimplify(v, rational=True) if isinstance(v, (int, Fraction)) else sp.sympify(v))
            for s, v in zip(cond.params, params)}


def eta_crit_closed_form(cid: str, params=None, exact: bool = False):
    """Critical efficiency from the closed form; ``exact`` returns a sympy number."""
    cond = condition(cid)
    subs = _subs(cond, params)
    if cond.poly_eta is not None:
        pe = cond.poly_eta.subs(subs)
        if float(sp.N(pe)) <= 0:
            raise NoViolation(f"{cid}: efficiency coefficient {sp.N(pe)} is not positive")
    val = cond.eta_expr.subs(subs)
    if exact:
        return sp.nsimplify(sp.simplify(val)) if val.is_number and not val.free_symbols else val
    return float(sp.N(val, 30))


@lru_cache(maxsize=None)
def _derivatives(cid: str):
    cond = condition(cid)
    f = cond.eta_expr
    grad = [sp.diff(f, v) for v in cond.params]
    hess = [[sp.diff(g, v) for v in cond.params] for g in grad]
    args = cond.params
    return (
        sp.lambdify(args, f, "math"),
        sp.lambdify(args, grad, "math"),
        sp.lambdify(args, hess, "math"),
    )


def _damped_newton(cid: str, start, tol: float = 1e-13, max_iter: int = 200):
    f, g, h = _derivatives(cid)
    x = np.array(start, dtype=float)
    fx = f(*x)
    for _ in range(max_iter):
        grad = np.array(g(*x), dtype=float)
        if np.linalg.norm(grad) < tol:
            return x, fx, grad
        H = np.array(h(*x), dtype=float)
        try:
            step = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = -grad
        if grad @ step >= 0:  # not a descent direction
            step = -grad
        t = 1.0
        while t > 1e-12:
            cand = x + t * step
            try:
                fc = f(*cand)
            except (ValueError, ZeroDivisionError):
                fc = math.inf
            if np.isfinite(fc) and fc <= fx + 1e-4 * t * (grad @ step):
                break
            t *= 0.5
        else:
            break
        x, fx = cand, fc
    grad = np.array(g(*x), dtype=float)
    return x, fx, grad


def minimize_eta_crit(cid: str, seed: int | None = None):
    """Stationary point of the closed-form threshold: ``(params, eta_crit)``.

    W-444 uses the bracketed root of the stationarity quintic, SYM-444 the
    exact zero of ``q``; multi-parameter families use damped Newton steps
    from seeded starts around the unit cube.
    """
    cond = condition(cid)
    if not cond.params:
        return {}, eta_crit_closed_form(cid)
    if cid == "W-444":
        quintic = np.polynomial.Polynomial([3, -6, 0, -1, -3, 2])
        lam = brentq(quintic, 0.3, 0.6, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return {"lambda": lam}, eta_crit_closed_form(cid, (lam,))
    if cid == "SYM-444":
        _, _, q = sym444_coefficients(LAM)
        roots = [r for r in sp.solve(sp.Eq(q, 0), LAM) if 0 < float(r) < 1]
        if not roots:
            raise ConvergenceError("no root of q in (0, 1)")
        lam = sp.simplify(roots[0])
        return {"lambda": lam}, eta_crit_closed_form(cid, (lam,))
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    starts = [np.array(cond.optimum_guess) * 0 + 0.5 / (1 + np.arange(len(cond.params)))]
    starts += list(rng.uniform(0.05, 0.95, size=(8, len(cond.params))))
    best = None
    for s in starts:
        x, fx, grad = _damped_newton(cid, s)
        if not np.isfinite(fx) or np.linalg.norm(grad) > 1e-10 or not 0 < fx < 1:
            continue
        if best is None or fx < best[1] - 1e-14:
            best = (x, fx)
    if best is None:
        raise ConvergenceError(f"{cid}: no stationary point found")
    x, fx = best
    return dict(zip(cond.param_names, (float(v) for v in x))), float(fx)


def stationarity_residual(cid: str, params) -> float:
    """Norm of the analytic gradient of the threshold at ``params``."""
    cond = condition(cid)
    _, g, _ = _derivatives(cid)
    vals = [params[n] for n in cond.param_names] if isinstance(params, dict) else list(params)
    return float(np.linalg.norm(np.array(g(*[float(v) for v in vals]), dtype=float)))


# --- mixing slope -------------------------------------------------------------------


def optimal_mixing_slope(ineq: SymmetricBellInequality, slopes: Sequence, eta: float | None = None) -> float:
    """Mixing slope ``a`` (``alpha = a x**2``) maximizing the small-angle value.

    ``eta`` defaults to the inequality's own threshold.  Requires
    ``<111|M_eta|111> < 0``.
    """
    ms = mixed_small_angle_split(ineq, slopes)
    if eta is None:
        eta = ms.eta_crit()
    xx = float(ms.element("xx", eta))
    if xx == 0:
        raise ZeroDivisionError("<111|M_eta|111> vanishes")
    if xx > 0:
        raise NoViolation("<111|M_eta|111> is positive; the mixed value is unbounded in a")
    return ms.optimal_a(eta)


@dataclass
class MixingFixedPoint:
    result: SynthesisResult
    a: float
    eta_crit: float
    iterations: int
    history: list = field(default_factory=list)  # (a, eta_crit) per iteration


def iterate_synthesis_with_mixing(m: int, slopes: Sequence, a0: float, max_iter: int = 100) -> MixingFixedPoint:
    """Alternate LP synthesis at fixed mixing slope with the optimal-slope update.

    Stops when ``a`` moves by less than ``1e-10`` or the synthesized
    inequality repeats; raises :class:`ConvergenceError` after ``max_iter``.
    The fixed point reached depends on the sign of ``a0``; see
    :func:`mixing_multistart`.
    """
    slopes = tuple(slopes)
    if len(slopes) != m:
        raise ValueError(f"m = {m} but {len(slopes)} slopes given")
    if not math.isfinite(a0):
        raise ValueError("initial mixing slope must be finite")
    a = float(a0)
    prev = None
    history = []
    for it in range(1, max_iter + 1):
        res = synthesize(SmallAngleSpec(slopes, mixing_slope=a))
        ms = mixed_small_angle_split(res.inequality, slopes)
        eta = ms.eta_crit()
        a_new = ms.optimal_a(eta)
        history.append((a, eta))
        if abs(a_new - a) < 1e-10 or res.inequality == prev:
            return MixingFixedPoint(res, a_new, eta, it, history)
        prev, a = res.inequality, a_new
    raise ConvergenceError(f"mixing iteration did not converge in {max_iter} steps")


def mixing_multistart(m: int, slopes: Sequence, starts: Sequence[float] = MIXING_STARTS) -> MixingFixedPoint:
    """Run the mixing iteration from several initial slopes; keep the lowest threshold.

    Starts that admit no violation or fail to normalize are skipped.
    """
    best = None
    failures = []
    for a0 in starts:
        try:
            fp = iterate_synthesis_with_mixing(m, slopes, a0)
        except (NoViolation, SynthesisError, ZeroDivisionError) as exc:
            failures.append(f"a0={a0}: {exc}")
            continue
        if best is None or fp.eta_crit < best.eta_crit - 1e-12:
            best = fp
    if best is None:
        raise NoViolation("no start reached a violating fixed point; " + "; ".join(failures))
    return best


# --- maximum violation curve -----------------------------------------------------


@dataclass(frozen=True)
class ViolationCurvePoint:
    eta: float
    max_violation: float
    state: SymmetricState
    angles: tuple


_BASIS = {
    "full": ("w", "c111", "c000"),
    "no000": ("w", "c111"),
    "larsson": ("c000", "w"),
}


def _basis_vectors(mode: str) -> np.ndarray:
    vecs = {
        "w": SymmetricState(1.0).vector(),
        "c111": SymmetricState(0.0, 1.0).vector(),
        "c000": SymmetricState(0.0, 0.0, 1.0).vector(),
    }
    return np.stack([vecs[k] for k in _BASIS[mode]], axis=1)


class _Restricted:
    """Bell operator restricted to a small basis, built from dense symmetric tensors."""

    def __init__(self, ineq: SymmetricBellInequality, basis: np.ndarray):
        m = ineq.m
        self.t2 = np.zeros((m, m))
        for (i, j), v in ineq.m2.items():
            self.t2[i, j] = self.t2[j, i] = float(v)
        self.t3 = np.zeros((m, m, m))
        for key, v in ineq.m3.items():
            for perm in itertools.permutations(key):
                self.t3[perm] = float(v)
        self.basis = basis
        # party-pair placements of a 4x4 two-qubit operator into the 8x8 space
        self._pair_axes = ((0, 1), (0, 2), (1, 2))

    def operator(self, angles, eta: float) -> np.ndarray:
        c = np.cos(np.asarray(angles, dtype=float))
        sn = -0.5 * np.sin(np.asarray(angles, dtype=float))
        P = np.empty((len(c), 2, 2))
        P[:, 0, 0] = 0.5 * (1 - c)
        P[:, 1, 1] = 0.5 * (1 + c)
        P[:, 0, 1] = P[:, 1, 0] = sn
        pair = np.einsum("ij,iab,jcd->acbd", self.t2, P, P)  # (a c | b d) on two qubits
        triple = np.einsum("ijk,iab,jcd,kef->acebdf", self.t3, P, P, P).reshape(8, 8)
        eye = np.eye(2)
        op = eta**3 * triple
        full = np.einsum("acbd,ef->acebdf", pair, eye)  # parties A, B
        op += eta**2 * full.reshape(8, 8)
        op += eta**2 * full.transpose(0, 2, 1, 3, 5, 4).reshape(8, 8)  # A, C
        op += eta**2 * full.transpose(2, 0, 1, 5, 3, 4).reshape(8, 8)  # B, C
        return op

    def top(self, angles, eta: float) -> tuple[float, np.ndarray]:
        small = self.basis.T @ self.operator(angles, eta) @ self.basis
        vals, vecs = np.linalg.eigh(small)
        return float(vals[-1]), vecs[:, -1]


_W_BAR = np.zeros(8)
_W_BAR[[3, 5, 6]] = 1.0 / math.sqrt(3.0)
_Z3 = np.diag([1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0])


def _rotation(beta: float) -> np.ndarray:
    c, s = math.cos(beta), math.sin(beta)
    r = np.array([[c, -s], [s, c]])
    return np.kron(np.kron(r, r), r)


def _canonical_frame(vec8: np.ndarray, angles: Sequence[float]):
    """Re-express an optimum in the frame where the first setting's angle is nearest zero.

    A common real rotation by ``beta`` of every qubit maps the projector
    angle ``phi`` to ``phi + 2 beta`` and keeps the value.  Only rotations
    that leave the state inside ``span{W, 111, 000}`` are admissible.
    """

    def overlap(beta):
        return float(_W_BAR @ (_rotation(beta) @ vec8))

    grid = np.linspace(0.0, math.pi, 361)
    vals = [overlap(b) for b in grid]
    betas = [0.0] if abs(vals[0]) < 1e-9 else []
    for b0, b1, v0, v1 in zip(grid, grid[1:], vals, vals[1:]):
        if v0 * v1 < 0:
            betas.append(brentq(overlap, b0, b1, xtol=1e-15))
    best = None
    for beta in betas:
        th = tuple(float(math.remainder(t + 2 * beta, 2 * math.pi)) for t in angles)
        if best is None or abs(th[0]) < abs(best[1][0]) - 1e-12:
            best = (_rotation(beta) @ vec8, th)
    vec, th = best
    if th[0] < 0:
        # mirror every qubit (Z reflection): angles change sign, |000> amplitude flips relative to W
        vec = _Z3 @ vec
        th = tuple(-t for t in th)
    return vec, th


def _point(op: _Restricted, eta, mode, starts, rng, warm, tol) -> ViolationCurvePoint:
    m = op.t2.shape[0]

    def f(theta):
        return -op.top(theta, eta)[0]

    # eigenvalue round-off sits near 1e-16, so the value tolerance stays above it
    opts = {"xatol": tol, "fatol": 1e-15, "maxiter": 2000 * m, "maxfev": 4000 * m}
    inits = [rng.uniform(-math.pi, math.pi, m) for _ in range(starts)]
    if warm is not None:
        inits[0] = np.asarray(warm, dtype=float)
    best = None
    for x0 in inits:
        res = minimize(f, x0, method="Nelder-Mead", options=opts)
        if best is None or res.fun < best.fun:
            best = res
    res = minimize(f, best.x, method="Nelder-Mead", options=opts)  # polish
    if res.fun < best.fun:
        best = res
    theta = tuple(float(math.remainder(t, 2 * math.pi)) for t in best.x)
    val, vec = op.top(theta, eta)
    vec8 = op.basis @ vec
    if mode == "full" and val > 0:
        vec8, theta = _canonical_frame(vec8, theta)
    w = float(np.sum(vec8[[1, 2, 4]]) / math.sqrt(3.0))
    c111, c000 = float(vec8[7]), float(vec8[0])
    sign = -1.0 if (w < 0 or (w == 0 and c000 < 0)) else 1.0
    state = SymmetricState.from_amplitudes(sign * w, sign * c111, sign * c000)
    return ViolationCurvePoint(float(eta), max(0.0, val), state, theta)


def no000_deficit(ineq: SymmetricBellInequality, point: ViolationCurvePoint) -> float:
    """Relative loss when the ``|000>`` amplitude of a full-basis optimum is set to zero.

    The angles stay at the optimum (canonical frame) and the remaining
    ``W``/``111`` amplitudes are re-optimized.
    """
    if point.max_violation < 1e-12:  # round-off level counts as no violation
        raise NoViolation("deficit is undefined without a violation")
    op = _Restricted(ineq, _basis_vectors("no000"))
    restricted = op.top(point.angles, point.eta)[0]
    return 1.0 - restricted / point.max_violation


def max_violation_curve(
    ineq: SymmetricBellInequality,
    etas: Sequence[float],
    mode: str = "full",
    *,
    starts: int = CURVE_STARTS,
    seed: int | None = None,
    tol: float = 1e-12,
    progress: Callable[[int, int], None] | None = None,
) -> list[ViolationCurvePoint]:
    """Maximum violation over symmetric states and common angles at each efficiency.

    For fixed angles the best state in the chosen basis is the top
    eigenvector of the restricted effective operator, so the search runs
    over angles only (seeded Nelder-Mead multistart, warm-started from the
    previous grid point).  Modes: ``full`` (W, 111, 000), ``no000``
    (W, 111) and ``larsson`` (000, W).
    """
    if mode not in CURVE_MODES:
        raise ValueError(f"unknown curve mode {mode!r}; use one of {CURVE_MODES}")
    etas = [float(e) for e in etas]
    if any(not 0 <= e <= 1 for e in etas):
        raise ValueError("efficiencies must lie in [0, 1]")
    seed = default_seed() if seed is None else seed
    op = _Restricted(ineq, _basis_vectors(mode))
    out = []
    warm = None
    for n, eta in enumerate(etas):
        rng = np.random.default_rng([seed, n])
        pt = _point(op, eta, mode, starts, rng, warm, tol)
        out.append(pt)
        if pt.max_violation > 0:
            warm = pt.angles
        if progress is not None:
            progress(n + 1, len(etas))
    return out


def curve_csv(points: Sequence[ViolationCurvePoint], digits: int = 9) -> str:
    """CSV text: ``eta, violation, w, c111, c000, angle_1..angle_m``."""
    if not points:
        return "eta,violation,w,c111,c000\n"
    m = len(points[0].angles)
    head = ["eta", "violation", "w", "c111", "c000"] + [f"angle_{i + 1}" for i in range(m)]
    fmt = f"{{:.{digits}g}}".format
    lines = [",".join(head)]
    for p in points:
        vals = [p.eta, p.max_violation, p.state.w, p.state.c111, p.state.c000, *p.angles]
        lines.append(",".join(fmt(v + 0.0) for v in vals))
    return "\n".join(lines) + "\n"
