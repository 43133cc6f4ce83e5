"""Deterministic local strategies and exact classical values.

A strategy assigns outcome bits ``a_i, b_i, c_i`` to every setting.  It is
encoded as the integer ``(A << 2m) | (B << m) | C`` where bit ``i`` of ``A``
is ``a_i``; ascending codes order strategies lexicographically by
``(A, B, C)``.  Under permutations of the parties the canonical orbit
representative is the one with ``A <= B <= C``.

Classical maxima are computed exactly: rational coefficients are scaled to
integers and evaluated in int64 (object arrays if the bound could overflow).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterator

import numpy as np

from .inequality import AsymmetricBellInequality, SymmetricBellInequality

__all__ = [
    "DeterministicStrategy",
    "enumerate_strategies",
    "strategy_count",
    "classical_value",
    "classical_bound",
    "constraint_rows",
    "most_violated",
]

MAX_M = 8


@dataclass(frozen=True)
class DeterministicStrategy:
    a: tuple[int, ...]
    b: tuple[int, ...]
    c: tuple[int, ...]

    def __post_init__(self) -> None:
        for v in (self.a, self.b, self.c):
            if any(x not in (0, 1) for x in v):
                raise ValueError(f"non-binary entry in {v}")

    @property
    def settings(self) -> tuple[int, int, int]:
        return (len(self.a), len(self.b), len(self.c))

    @property
    def m(self) -> int:
        if len(set(self.settings)) != 1:
            raise ValueError(f"parties have different setting counts {self.settings}")
        return len(self.a)

    def to_int(self) -> int:
        _, mb, mc = self.settings
        return (_pack(self.a) << (mb + mc)) | (_pack(self.b) << mc) | _pack(self.c)

    @classmethod
    def from_int(cls, code: int, m: int) -> "DeterministicStrategy":
        mask = (1 << m) - 1
        return cls(_unpack(code >> (2 * m), m), _unpack((code >> m) & mask, m), _unpack(code & mask, m))

    def permuted(self, perm: tuple[int, int, int]) -> "DeterministicStrategy":
        parts = (self.a, self.b, self.c)
        return DeterministicStrategy(*(parts[p] for p in perm))

    def canonical(self) -> "DeterministicStrategy":
        self.m  # only defined for equal setting counts
        return DeterministicStrategy(*sorted((self.a, self.b, self.c), key=_pack))


def _pack(bits) -> int:
    return sum(int(x) << i for i, x in enumerate(bits))


def _unpack(word: int, m: int) -> tuple[int, ...]:
    return tuple((word >> i) & 1 for i in range(m))


def _check_m(m: int) -> None:
    if not 1 <= m <= MAX_M:
        raise ValueError(f"setting count {m} outside 1..{MAX_M}")


def enumerate_strategies(m: int, reduce_symmetry: bool = False) -> Iterator[DeterministicStrategy]:
    """All ``2**(3m)`` strategies, or one representative per nontrivial party-swap orbit.

    Reduction keeps ``A <= B <= C`` and drops strategies in which at most one
    party outputs a nonzero bit (their value is identically zero).
    """
    _check_m(m)
    n = 1 << m
    if not reduce_symmetry:
        for code in range(1 << (3 * m)):
            yield DeterministicStrategy.from_int(code, m)
        return
    for a in range(n):
        for b in range(max(a, 1), n):
            for c in range(b, n):
                yield DeterministicStrategy(_unpack(a, m), _unpack(b, m), _unpack(c, m))


def strategy_count(m: int, reduce_symmetry: bool = False) -> int:
    _check_m(m)
    n = 1 << m
    if not reduce_symmetry:
        return n**3
    return math.comb(n + 2, 3) - n


def classical_value(ineq, s: DeterministicStrategy) -> Fraction:
    """Exact value of the Bell expression on a deterministic strategy."""
    if isinstance(ineq, AsymmetricBellInequality):
        ma, mb, mc = ineq.settings
        if (len(s.a), len(s.b), len(s.c)) != (ma, mb, mc):
            raise ValueError("strategy does not match inequality settings")
        bits = {"A": s.a, "B": s.b, "C": s.c}
        total = Fraction(0)
        for (pp, i, j), v in ineq.pairs.items():
            total += v * bits[pp[0]][i] * bits[pp[1]][j]
        for (i, j, k), v in ineq.triples.items():
            total += v * s.a[i] * s.b[j] * s.c[k]
        return total
    if s.m != ineq.m:
        raise ValueError(f"strategy has {s.m} settings, inequality {ineq.m}")
    a, b, c = s.a, s.b, s.c
    total = Fraction(0)
    for (i, j), v in ineq.m2.items():
        orders = {(i, j), (j, i)}
        total += v * sum(a[p] * b[q] + a[p] * c[q] + b[p] * c[q] for p, q in orders)
    for key, v in ineq.m3.items():
        total += v * sum(a[p] * b[q] * c[r] for p, q, r in set(itertools.permutations(key)))
    return total


# --- vectorized evaluation -------------------------------------------------


def _bits(words: np.ndarray, m: int) -> np.ndarray:
    return ((words[:, None] >> np.arange(m)) & 1).astype(np.int64)


def _integer_tensors(ineq):
    """Integer coefficient tensors ``(AB, AC, BC, ABC)`` and the common scale."""
    if isinstance(ineq, SymmetricBellInequality):
        m2, m3 = ineq.m2_full(), ineq.m3_full()
        tensors = [m2, m2, m2, m3]
    else:
        tensors = list(ineq.tensors())
    dens = [v.denominator for t in tensors for v in t.flat]
    scale = reduce(lambda x, y: x * y // math.gcd(x, y), dens, 1)
    bound = sum(abs(v.numerator * (scale // v.denominator)) for t in tensors for v in t.flat)
    dtype = np.int64 if bound < 2**62 else object
    ints = [np.array([int(v * scale) for v in t.flat], dtype=dtype).reshape(t.shape) for t in tensors]
    return ints, scale


def _settings(ineq) -> tuple[int, int, int]:
    if isinstance(ineq, SymmetricBellInequality):
        return (ineq.m,) * 3
    return tuple(ineq.settings)


def _chunks(settings, reduce_symmetry: bool):
    """Yield ``(A words, B words, C word)`` covering the requested strategy set."""
    ma, mb, mc = settings
    if reduce_symmetry:
        n = 1 << ma
        aa, bb = np.triu_indices(n)
        order = np.lexsort((aa, bb))
        aa, bb = aa[order].astype(np.int64), bb[order].astype(np.int64)
        keep = bb > 0
        aa, bb = aa[keep], bb[keep]
        for c in range(n):
            stop = np.searchsorted(bb, c, side="right")
            if stop:
                yield aa[:stop], bb[:stop], c
    else:
        ga, gb = np.meshgrid(np.arange(1 << ma, dtype=np.int64), np.arange(1 << mb, dtype=np.int64), indexing="ij")
        ga, gb = ga.ravel(), gb.ravel()
        for c in range(1 << mc):
            yield ga, gb, c


def _chunk_values(tensors, settings, A, B, c_word):
    AB, AC, BC, T = tensors
    ma, mb, mc = settings
    a = _bits(A, ma)
    b = _bits(B, mb)
    cb = np.array([(c_word >> k) & 1 for k in range(mc)], dtype=np.int64)
    if T.dtype == object:
        a, b, cb = a.astype(object), b.astype(object), cb.astype(object)
    tc = T @ cb
    pair_ab = AB + tc
    lin = AC @ cb
    vals = ((a @ pair_ab) * b).sum(axis=1) + a @ lin + b @ (BC @ cb)
    return vals


def classical_bound(ineq, reduce_symmetry: bool | None = None):
    """Exact classical maximum and the first strategy (ascending code) attaining it.

    Symmetric inequalities may use the orbit-reduced set (default for
    ``m > 6``); asymmetric ones always use the full set.  The all-zero
    strategy is always included, so the bound is never negative.
    """
    settings = _settings(ineq)
    if isinstance(ineq, AsymmetricBellInequality):
        reduce_symmetry = False
    elif reduce_symmetry is None:
        reduce_symmetry = ineq.m > 6
    tensors, scale = _integer_tensors(ineq)
    ma, mb, mc = settings
    best_val = 0
    best_code = 0
    for A, B, c in _chunks(settings, reduce_symmetry):
        vals = _chunk_values(tensors, settings, A, B, c)
        top = vals.max()
        if top < best_val:
            continue
        idx = np.flatnonzero(vals == top)
        codes = (A[idx] << (mb + mc)) | (B[idx] << mc) | c
        code = int(codes.min())
        if top > best_val or code < best_code:
            best_val, best_code = int(top), code
    mask_b, mask_c = (1 << mb) - 1, (1 << mc) - 1
    s = DeterministicStrategy(
        _unpack(best_code >> (mb + mc), ma), _unpack((best_code >> mc) & mask_b, mb), _unpack(best_code & mask_c, mc)
    )
    return Fraction(best_val, scale), s


def constraint_rows(codes, m: int, pairs, triples) -> np.ndarray:
    """Coefficient rows of the classical-value constraints in the independent variables.

    ``pairs``/``triples`` list the sorted index keys of the variables (0-based);
    the row for strategy ``s`` satisfies ``row . x == classical_value(ineq_x, s)``.
    """
    codes = np.asarray(codes, dtype=np.int64)
    mask = (1 << m) - 1
    a = _bits(codes >> (2 * m), m)
    b = _bits((codes >> m) & mask, m)
    c = _bits(codes & mask, m)
    pm = np.einsum("ni,nj->nij", a, b) + np.einsum("ni,nj->nij", a, c) + np.einsum("ni,nj->nij", b, c)
    cols = []
    for i, j in pairs:
        cols.append(pm[:, i, j] + pm[:, j, i] if i != j else pm[:, i, i])
    for key in triples:
        col = np.zeros(len(codes), dtype=np.int64)
        for p, q, r in set(itertools.permutations(key)):
            col += a[:, p] * b[:, q] * c[:, r]
        cols.append(col)
    return np.stack(cols, axis=1) if cols else np.zeros((len(codes), 0), dtype=np.int64)


def most_violated(m: int, m2_full: np.ndarray, m3_full: np.ndarray, tol: float = 1e-9, limit: int = 200):
    """Canonical codes of strategies with value above ``tol`` for float coefficient tensors.

    For every pair of outcome words of the first two parties the third party's
    best response is taken, which is exhaustive for the maximum.  Returns codes
    sorted by decreasing value (at most ``limit``) and the overall maximum.
    """
    n = 1 << m
    A, B = np.meshgrid(np.arange(n, dtype=np.int64), np.arange(n, dtype=np.int64), indexing="ij")
    A, B = A.ravel(), B.ravel()
    keep = A <= B
    A, B = A[keep], B[keep]
    a = _bits(A, m).astype(float)
    b = _bits(B, m).astype(float)
    pair_ab = ((a @ m2_full) * b).sum(axis=1)
    ab = (a[:, :, None] * b[:, None, :]).reshape(len(a), m * m)
    w = (a + b) @ m2_full + ab @ m3_full.reshape(m * m, m)
    cbits = (w > 0).astype(np.int64)
    vals = pair_ab + np.where(w > 0, w, 0.0).sum(axis=1)
    top = float(vals.max()) if len(vals) else 0.0
    idx = np.flatnonzero(vals > tol)
    if not len(idx):
        return [], top
    idx = idx[np.argsort(-vals[idx], kind="stable")]
    C = (cbits[idx] << np.arange(m)).sum(axis=1)
    found = []
    seen = set()
    for x, y, z in zip(A[idx], B[idx], C):
        x, y, z = sorted((int(x), int(y), int(z)))
        code = (x << (2 * m)) | (y << m) | z
        if code not in seen and y > 0:
            seen.add(code)
            found.append(code)
            if len(found) >= limit:
                break
    return found, top
