"""Symmetric and asymmetric three-party Bell inequalities.

A symmetric inequality with ``m`` settings per party reads::

    sum_ij M2[i,j] (P(A_i B_j) + P(A_i C_j) + P(B_i C_j))
        + sum_ijk M3[i,j,k] P(A_i B_j C_k) <= 0

with fully symmetric coefficient tensors.  Only the independent entries
``i <= j`` and ``i <= j <= k`` are stored (0-based internally, 1-based in the
JSON exchange format).

At detection efficiency ``eta`` (no-click mapped to outcome -1) pair terms
pick up ``eta**2`` and triple terms ``eta**3``; the violation condition is
``eta**2 * M2val + eta**3 * M3val > 0``, see :class:`EfficiencySplit`.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Mapping, Sequence

import numpy as np

from . import quantum
from .quantum import IDENTITY, SymmetricState

__all__ = [
    "NoViolation",
    "SymmetricBellInequality",
    "AsymmetricBellInequality",
    "EfficiencySplit",
    "MixedSplit",
    "multiplicity",
    "quantum_split",
    "quantum_split_full",
    "small_angle_split",
    "mixed_small_angle_split",
    "effective_value",
    "eta_crit",
    "bell_operator",
    "asym_quantum_value",
    "asym_small_angle_split",
]


class NoViolation(ValueError):
    """The triple-term contribution is not positive: no violation at any efficiency."""


def multiplicity(*idx: int) -> int:
    """Number of distinct orderings of the index tuple (6, 3 or 1 for triples).

    Pairs are counted as triples with a distinct third index, so
    ``multiplicity(i, j)`` is 6 for ``i != j`` and 3 for ``i == j``; the
    extra factor 3 accounts for the three party pairs.
    """
    if len(idx) == 2:
        return 3 if idx[0] == idx[1] else 6
    return len(set(itertools.permutations(idx)))


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10**12)
    return Fraction(v)


@dataclass(frozen=True)
class SymmetricBellInequality:
    m: int
    m2: Mapping[tuple[int, int], Fraction]
    m3: Mapping[tuple[int, int, int], Fraction]

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("m must be positive")
        m2 = {}
        for key, v in self.m2.items():
            key = tuple(int(i) for i in key)
            if len(key) != 2 or list(key) != sorted(key) or not all(0 <= i < self.m for i in key):
                raise ValueError(f"bad pair index {key} for m={self.m}")
            v = _frac(v)
            if v:
                m2[key] = v
        m3 = {}
        for key, v in self.m3.items():
            key = tuple(int(i) for i in key)
            if len(key) != 3 or list(key) != sorted(key) or not all(0 <= i < self.m for i in key):
                raise ValueError(f"bad triple index {key} for m={self.m}")
            v = _frac(v)
            if v:
                m3[key] = v
        object.__setattr__(self, "m2", dict(sorted(m2.items())))
        object.__setattr__(self, "m3", dict(sorted(m3.items())))

    @classmethod
    def from_one_based(cls, m: int, m2: Mapping, m3: Mapping) -> "SymmetricBellInequality":
        """Build from 1-based keys; digit strings like ``123`` are accepted for m < 10."""

        def conv(key):
            if isinstance(key, (int, str)):
                key = tuple(int(c) for c in str(key))
            return tuple(sorted(i - 1 for i in key))

        return cls(m, {conv(k): v for k, v in m2.items()}, {conv(k): v for k, v in m3.items()})

    @classmethod
    def zero(cls, m: int) -> "SymmetricBellInequality":
        return cls(m, {}, {})

    def __hash__(self) -> int:
        return hash((self.m, tuple(self.m2.items()), tuple(self.m3.items())))

    def coefficient_vector(self) -> tuple[Fraction, ...]:
        """All independent coefficients in a fixed order (pairs, then triples)."""
        pairs = [self.m2.get(k, Fraction(0)) for k in pair_keys(self.m)]
        triples = [self.m3.get(k, Fraction(0)) for k in triple_keys(self.m)]
        return tuple(pairs + triples)

    @property
    def support(self) -> int:
        return len(self.m2) + len(self.m3)

    def scaled(self, factor) -> "SymmetricBellInequality":
        f = _frac(factor)
        return SymmetricBellInequality(
            self.m, {k: v * f for k, v in self.m2.items()}, {k: v * f for k, v in self.m3.items()}
        )

    def integer_normalized(self) -> "SymmetricBellInequality":
        """Smallest positive multiple with coprime integer coefficients."""
        vals = list(self.m2.values()) + list(self.m3.values())
        if not vals:
            return self
        lcm = reduce(lambda a, b: a * b // math.gcd(a, b), (v.denominator for v in vals), 1)
        ints = [int(v * lcm) for v in vals]
        g = reduce(math.gcd, (abs(i) for i in ints))
        return self.scaled(Fraction(lcm, g))

    def m2_full(self) -> np.ndarray:
        """Symmetric ``m x m`` object array of Fractions."""
        t = np.full((self.m, self.m), Fraction(0), dtype=object)
        for (i, j), v in self.m2.items():
            t[i, j] = t[j, i] = v
        return t

    def m3_full(self) -> np.ndarray:
        t = np.full((self.m,) * 3, Fraction(0), dtype=object)
        for key, v in self.m3.items():
            for p in set(itertools.permutations(key)):
                t[p] = v
        return t

    def extend(self, m: int) -> "SymmetricBellInequality":
        """Same coefficients viewed with more settings (new ones unused)."""
        if m < self.m:
            raise ValueError("cannot shrink")
        return SymmetricBellInequality(m, self.m2, self.m3)

    # JSON exchange format: {"m", "m2": [[i, j, num, den]], "m3": [[i, j, k, num, den]]}
    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "m2": [[i + 1, j + 1, v.numerator, v.denominator] for (i, j), v in self.m2.items()],
            "m3": [
                [i + 1, j + 1, k + 1, v.numerator, v.denominator]
                for (i, j, k), v in self.m3.items()
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SymmetricBellInequality":
        m = int(data["m"])
        m2 = {}
        for row in data.get("m2", []):
            i, j, num, den = row
            if not i <= j:
                raise ValueError(f"pair indices must satisfy i <= j: {row}")
            m2[(i - 1, j - 1)] = Fraction(num, den)
        m3 = {}
        for row in data.get("m3", []):
            i, j, k, num, den = row
            if not i <= j <= k:
                raise ValueError(f"triple indices must satisfy i <= j <= k: {row}")
            m3[(i - 1, j - 1, k - 1)] = Fraction(num, den)
        return cls(m, m2, m3)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SymmetricBellInequality":
        return cls.from_dict(json.loads(text))

    def describe(self) -> str:
        parts = [f"M2_{i + 1}{j + 1}={v}" for (i, j), v in self.m2.items()]
        parts += [f"M3_{i + 1}{j + 1}{k + 1}={v}" for (i, j, k), v in self.m3.items()]
        return " ".join(parts)


def _signed(v) -> str:
    return f"+{v}" if v >= 0 else f"{v}"


def pair_keys(m: int) -> list[tuple[int, int]]:
    return list(itertools.combinations_with_replacement(range(m), 2))


def triple_keys(m: int) -> list[tuple[int, int, int]]:
    return list(itertools.combinations_with_replacement(range(m), 3))


PARTY_PAIRS = ("AB", "AC", "BC")


@dataclass(frozen=True)
class AsymmetricBellInequality:
    """General pair/triple inequality with per-party setting counts.

    ``pairs`` maps ``(party_pair, i, j)`` with ``party_pair`` one of
    ``"AB"``, ``"AC"``, ``"BC"`` to the coefficient of ``P(11|X_i Y_j)``;
    ``triples`` maps ``(i, j, k)`` to that of ``P(111|A_i B_j C_k)``.
    """

    settings: tuple[int, int, int]
    pairs: Mapping[tuple[str, int, int], Fraction] = field(default_factory=dict)
    triples: Mapping[tuple[int, int, int], Fraction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ma, mb, mc = self.settings
        sizes = {"AB": (ma, mb), "AC": (ma, mc), "BC": (mb, mc)}
        pairs = {}
        for (pp, i, j), v in self.pairs.items():
            if pp not in sizes or not (0 <= i < sizes[pp][0] and 0 <= j < sizes[pp][1]):
                raise ValueError(f"bad pair term {(pp, i, j)}")
            v = _frac(v)
            if v:
                pairs[(pp, i, j)] = v
        triples = {}
        for (i, j, k), v in self.triples.items():
            if not (0 <= i < ma and 0 <= j < mb and 0 <= k < mc):
                raise ValueError(f"bad triple term {(i, j, k)}")
            v = _frac(v)
            if v:
                triples[(i, j, k)] = v
        object.__setattr__(self, "settings", tuple(self.settings))
        object.__setattr__(self, "pairs", dict(sorted(pairs.items())))
        object.__setattr__(self, "triples", dict(sorted(triples.items())))

    def __hash__(self) -> int:
        return hash((self.settings, tuple(self.pairs.items()), tuple(self.triples.items())))

    @classmethod
    def from_symmetric(cls, ineq: SymmetricBellInequality) -> "AsymmetricBellInequality":
        m = ineq.m
        m2, m3 = ineq.m2_full(), ineq.m3_full()
        pairs = {(pp, i, j): m2[i, j] for pp in PARTY_PAIRS for i in range(m) for j in range(m)}
        triples = {t: m3[t] for t in itertools.product(range(m), repeat=3)}
        return cls((m, m, m), pairs, triples)

    def scaled(self, factor) -> "AsymmetricBellInequality":
        f = _frac(factor)
        return AsymmetricBellInequality(
            self.settings,
            {k: v * f for k, v in self.pairs.items()},
            {k: v * f for k, v in self.triples.items()},
        )

    def integer_normalized(self) -> "AsymmetricBellInequality":
        vals = list(self.pairs.values()) + list(self.triples.values())
        if not vals:
            return self
        lcm = reduce(lambda a, b: a * b // math.gcd(a, b), (v.denominator for v in vals), 1)
        g = reduce(math.gcd, (abs(int(v * lcm)) for v in vals))
        return self.scaled(Fraction(lcm, g))

    @property
    def support(self) -> int:
        return len(self.pairs) + len(self.triples)

    def tensors(self):
        """Pair matrices ``AB, AC, BC`` and the ``ABC`` tensor as Fraction object arrays."""
        ma, mb, mc = self.settings
        shapes = {"AB": (ma, mb), "AC": (ma, mc), "BC": (mb, mc)}
        mats = {pp: np.full(shapes[pp], Fraction(0), dtype=object) for pp in PARTY_PAIRS}
        for (pp, i, j), v in self.pairs.items():
            mats[pp][i, j] = v
        t = np.full((ma, mb, mc), Fraction(0), dtype=object)
        for key, v in self.triples.items():
            t[key] = v
        return mats["AB"], mats["AC"], mats["BC"], t

    def describe(self) -> str:
        parts = []
        for (pp, i, j), v in self.pairs.items():
            parts.append(f"{_signed(v)}*P(11|{pp[0]}{i + 1}{pp[1]}{j + 1})")
        for (i, j, k), v in self.triples.items():
            parts.append(f"{_signed(v)}*P(111|A{i + 1}B{j + 1}C{k + 1})")
        return " ".join(parts) + " <= 0"

    def to_dict(self) -> dict:
        return {
            "settings": list(self.settings),
            "pairs": [[pp, i + 1, j + 1, v.numerator, v.denominator] for (pp, i, j), v in self.pairs.items()],
            "triples": [
                [i + 1, j + 1, k + 1, v.numerator, v.denominator]
                for (i, j, k), v in self.triples.items()
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AsymmetricBellInequality":
        pairs = {(pp, i - 1, j - 1): Fraction(n, d) for pp, i, j, n, d in data.get("pairs", [])}
        triples = {(i - 1, j - 1, k - 1): Fraction(n, d) for i, j, k, n, d in data.get("triples", [])}
        return cls(tuple(data["settings"]), pairs, triples)


@dataclass(frozen=True)
class EfficiencySplit:
    """Pair (``m2_value``) and triple (``m3_value``) parts of the quantum value."""

    m2_value: object
    m3_value: object

    @property
    def ratio(self):
        return eta_crit(self)


def effective_value(split: EfficiencySplit, eta):
    if not 0 <= eta <= 1:
        raise ValueError(f"efficiency {eta!r} outside [0, 1]")
    return eta**2 * split.m2_value + eta**3 * split.m3_value


def eta_crit(split: EfficiencySplit):
    """Critical efficiency ``-M2val / M3val``; raises :class:`NoViolation` if ``M3val <= 0``."""
    if split.m3_value <= 0:
        raise NoViolation(f"triple contribution {split.m3_value} is not positive")
    return -split.m2_value / split.m3_value


def _angles(angles) -> list[quantum.ProjectorAngle]:
    return [a if isinstance(a, quantum.ProjectorAngle) else quantum.ProjectorAngle(float(a)) for a in angles]


def _elements(bra: SymmetricState, ket: SymmetricState):
    """Pair and triple matrix-element callables for a pair of symmetric states."""
    if bra == quantum.W_STATE and ket == quantum.W_STATE:
        return quantum.w_two_party, quantum.w_three_party
    def pair(a, b):
        return quantum.matrix_element(bra, ket, (a, b, IDENTITY))

    def triple(a, b, c):
        return quantum.matrix_element(bra, ket, (a, b, c))

    return pair, triple


def quantum_split(
    ineq: SymmetricBellInequality,
    state: SymmetricState,
    angles: Sequence,
    ket: SymmetricState | None = None,
) -> EfficiencySplit:
    """Pair and triple parts from the independent coefficients and multiplicities.

    ``ket`` defaults to ``state``; a different symmetric ket gives the
    off-diagonal element ``<state| M_eta |ket>``.
    """
    if len(angles) != ineq.m:
        raise ValueError(f"need {ineq.m} angles, got {len(angles)}")
    angles = _angles(angles)
    pair, triple = _elements(state, state if ket is None else ket)
    m2 = sum(
        float(v) * multiplicity(i, j) * pair(angles[i], angles[j]) for (i, j), v in ineq.m2.items()
    )
    m3 = sum(
        float(v) * multiplicity(i, j, k) * triple(angles[i], angles[j], angles[k])
        for (i, j, k), v in ineq.m3.items()
    )
    return EfficiencySplit(float(m2), float(m3))


def quantum_split_full(ineq: SymmetricBellInequality, state: SymmetricState, angles: Sequence) -> EfficiencySplit:
    """Pair and triple parts summed over all ordered indices and party slots.

    Slow reference path; every term is a separate tensor contraction.
    """
    if len(angles) != ineq.m:
        raise ValueError(f"need {ineq.m} angles, got {len(angles)}")
    angles = _angles(angles)
    m2t, m3t = ineq.m2_full(), ineq.m3_full()
    m = ineq.m
    m2 = 0.0
    for i in range(m):
        for j in range(m):
            if m2t[i, j]:
                a, b = angles[i], angles[j]
                m2 += float(m2t[i, j]) * (
                    quantum.matrix_element(state, state, (a, b, IDENTITY))
                    + quantum.matrix_element(state, state, (a, IDENTITY, b))
                    + quantum.matrix_element(state, state, (IDENTITY, a, b))
                )
    m3 = 0.0
    for i, j, k in itertools.product(range(m), repeat=3):
        if m3t[i, j, k]:
            m3 += float(m3t[i, j, k]) * quantum.matrix_element(
                state, state, (angles[i], angles[j], angles[k])
            )
    return EfficiencySplit(m2, m3)


def bell_operator(ineq: SymmetricBellInequality, angles: Sequence, eta: float) -> np.ndarray:
    """Effective 8x8 Bell operator at efficiency ``eta`` (same angles for every party)."""
    mats = [quantum.projector(a) for a in angles]
    eye = np.eye(2)
    kron = np.kron
    op = np.zeros((8, 8))
    for (i, j), v in ineq.m2.items():
        a, b = mats[i], mats[j]
        term = kron(kron(a, b), eye) + kron(kron(a, eye), b) + kron(kron(eye, a), b)
        if i != j:
            term = term + kron(kron(b, a), eye) + kron(kron(b, eye), a) + kron(kron(eye, b), a)
        op += eta**2 * float(v) * term
    for key, v in ineq.m3.items():
        for p in set(itertools.permutations(key)):
            op += eta**3 * float(v) * kron(kron(mats[p[0]], mats[p[1]]), mats[p[2]])
    return op


def small_angle_split(ineq: SymmetricBellInequality, phis: Sequence) -> EfficiencySplit:
    """x**4 coefficients of the pair and triple parts for the W state.

    Exact for rational slopes.  Raises ``ValueError`` if a nonzero pair
    coefficient sits on slopes that do not cancel (the pair part would then be
    of order x**2 and the critical efficiency would diverge as x -> 0).
    """
    if len(phis) != ineq.m:
        raise ValueError(f"need {ineq.m} slopes, got {len(phis)}")
    m2 = Fraction(0)
    for (i, j), v in ineq.m2.items():
        if phis[i] + phis[j] != 0:
            raise ValueError(f"pair coefficient M2_{i + 1}{j + 1} on non-cancelling slopes")
        m2 += v * multiplicity(i, j) * phis[i] ** 2 * phis[j] ** 2
    m3 = Fraction(0)
    for (i, j, k), v in ineq.m3.items():
        s = quantum.sigma2(phis[i], phis[j], phis[k])
        m3 += v * multiplicity(i, j, k) * s * s
    return EfficiencySplit(m2 / 48, m3 / 48)


@dataclass(frozen=True)
class MixedSplit:
    """Small-angle effective-operator elements for ``cos(a x^2)|W> + sin(a x^2)|111>``.

    Each field is a ``(pair, triple)`` couple so that an element equals
    ``eta**2 * pair + eta**3 * triple``:

    - ``ww``: x**4 coefficient of ``<W|M|W>``
    - ``wx``: x**2 coefficient of ``<W|M|111>`` times ``4*sqrt(3)``
    - ``xx``: x**0 limit of ``<111|M|111>``

    Keeping the ``4*sqrt(3)`` out of ``wx`` makes all fields rational for
    rational slopes.
    """

    ww: tuple
    wx: tuple
    xx: tuple

    def element(self, name: str, eta):
        p, t = getattr(self, name)
        return eta**2 * p + eta**3 * t

    def wx_true(self, eta) -> float:
        return float(self.element("wx", eta)) / (4.0 * math.sqrt(3.0))

    def value(self, eta, a: float) -> float:
        """x**4 coefficient of the quantum value at mixing slope ``a``."""
        return (
            float(self.element("ww", eta))
            + 2.0 * a * self.wx_true(eta)
            + a * a * float(self.element("xx", eta))
        )

    def optimal_a(self, eta) -> float:
        xx = float(self.element("xx", eta))
        if xx == 0.0:
            raise ZeroDivisionError("<111|M|111> vanishes")
        return -self.wx_true(eta) / xx

    def best_value(self, eta) -> float:
        """Quantum value maximized over the mixing slope (needs ``<111|M|111> < 0``)."""
        xx = float(self.element("xx", eta))
        return float(self.element("ww", eta)) - self.wx_true(eta) ** 2 / xx

    def split_at(self, a) -> EfficiencySplit:
        """Pair/triple split at a fixed mixing slope (``a`` must be float)."""
        c = 2.0 * a / (4.0 * math.sqrt(3.0))
        pair = float(self.ww[0]) + c * float(self.wx[0]) + a * a * float(self.xx[0])
        triple = float(self.ww[1]) + c * float(self.wx[1]) + a * a * float(self.xx[1])
        return EfficiencySplit(pair, triple)

    def quadratic(self):
        """Coefficients ``(c0, c1, c2)`` of ``Q(eta) = ww*xx - wx^2/48`` divided by ``eta**4``.

        With ``xx < 0`` the optimally mixed value is positive iff ``Q < 0``.
        """
        w2, w3 = self.ww
        c2, c3 = self.wx
        x2, x3 = self.xx
        return (
            w2 * x2 - c2 * c2 / 48,
            w2 * x3 + w3 * x2 - 2 * c2 * c3 / 48,
            w3 * x3 - c3 * c3 / 48,
        )

    def eta_crit(self) -> float:
        """Smallest efficiency in (0, 1] above which the optimally mixed value is positive."""
        c0, c1, c2 = (float(c) for c in self.quadratic())
        roots = np.roots([c2, c1, c0]) if c2 != 0 else (np.array([-c0 / c1]) if c1 else np.array([]))
        real = sorted(r.real for r in np.atleast_1d(roots) if abs(r.imag) < 1e-12 and 0 < r.real <= 1)

        def q(e):
            return c0 + c1 * e + c2 * e * e

        for r in real:
            if q(min(1.0, r + 1e-9)) < 0 and all(q(e) < 0 for e in np.linspace(r, 1.0, 21)[1:]):
                return float(r)
        if q(1.0) < 0:
            return 0.0
        raise NoViolation("no violation for any efficiency in (0, 1]")


def mixed_small_angle_split(ineq: SymmetricBellInequality, phis: Sequence) -> MixedSplit:
    if len(phis) != ineq.m:
        raise ValueError(f"need {ineq.m} slopes, got {len(phis)}")
    ww = small_angle_split(ineq, phis)
    wx2 = Fraction(0)
    xx2 = Fraction(0)
    for (i, j), v in ineq.m2.items():
        pi = multiplicity(i, j)
        wx2 += v * pi * phis[i] * phis[j]
        xx2 += v * pi
    wx3 = Fraction(0)
    xx3 = Fraction(0)
    for (i, j, k), v in ineq.m3.items():
        pi = multiplicity(i, j, k)
        wx3 += v * pi * quantum.sigma2(phis[i], phis[j], phis[k])
        xx3 += v * pi
    return MixedSplit((ww.m2_value, ww.m3_value), (wx2, wx3), (xx2, xx3))


def asym_quantum_value(
    ineq: AsymmetricBellInequality,
    state: SymmetricState,
    angles: Sequence[Sequence],
    eta: float,
) -> float:
    """``<psi|M_eta|psi>`` for per-party angle lists, by tensor contraction."""
    if not 0 <= eta <= 1:
        raise ValueError(f"efficiency {eta!r} outside [0, 1]")
    if tuple(len(a) for a in angles) != tuple(ineq.settings):
        raise ValueError(f"angle lists {[len(a) for a in angles]} do not match settings {ineq.settings}")
    pa, pb, pc = ([quantum.ProjectorAngle(float(x)) for x in lst] for lst in angles)
    slots = {"AB": (pa, pb), "AC": (pa, pc), "BC": (pb, pc)}
    total = 0.0
    for (pp, i, j), v in ineq.pairs.items():
        x, y = slots[pp][0][i], slots[pp][1][j]
        ops = {"AB": (x, y, IDENTITY), "AC": (x, IDENTITY, y), "BC": (IDENTITY, x, y)}[pp]
        total += eta**2 * float(v) * quantum.matrix_element(state, state, ops)
    for (i, j, k), v in ineq.triples.items():
        total += eta**3 * float(v) * quantum.matrix_element(state, state, (pa[i], pb[j], pc[k]))
    return total


def asym_small_angle_split(ineq: AsymmetricBellInequality, slopes: Sequence[Sequence]) -> EfficiencySplit:
    """x**4 pair/triple coefficients for the W state with per-party slopes."""
    if tuple(len(s) for s in slopes) != tuple(ineq.settings):
        raise ValueError("slope lists do not match settings")
    sa, sb, sc = slopes
    slots = {"AB": (sa, sb), "AC": (sa, sc), "BC": (sb, sc)}
    m2 = Fraction(0)
    for (pp, i, j), v in ineq.pairs.items():
        p, q = slots[pp][0][i], slots[pp][1][j]
        if p + q != 0:
            raise ValueError(f"pair term {(pp, i + 1, j + 1)} on non-cancelling slopes")
        m2 += v * p * p * q * q
    m3 = Fraction(0)
    for (i, j, k), v in ineq.triples.items():
        s = quantum.sigma2(sa[i], sb[j], sc[k])
        m3 += v * s * s
    return EfficiencySplit(m2 / 48, m3 / 48)
