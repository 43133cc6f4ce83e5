"""Three-qubit symmetric states and real projective measurements.

Basis ordering is binary ascending, ``|000>, |001>, ..., |111>``, with the
first tensor factor as the most significant bit.  Projectors are real and
parametrized by one angle; the +1 outcome projector at angle ``phi`` has
entries ``c- = (1 - cos phi)/2``, ``s = -sin(phi)/2``, ``c+ = (1 + cos phi)/2``.

Closed forms (:func:`w_two_party`, :func:`w_three_party`,
:func:`cross_elements`) are the fast path; :func:`matrix_element` contracts
full 8x8 operators and serves as the reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

__all__ = [
    "IDENTITY",
    "Identity",
    "ProjectorAngle",
    "SymmetricState",
    "SmallAngleSpec",
    "CrossElements",
    "SmallAngleElements",
    "projector",
    "operator",
    "matrix_element",
    "w_two_party",
    "w_three_party",
    "cross_elements",
    "small_angle_elements",
    "sigma2",
    "W_STATE",
    "KET_111",
    "KET_000",
]

INV_SQRT3 = 1.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class Identity:
    """Marks a party that does not measure (identity slot)."""

    def __repr__(self) -> str:
        return "IDENTITY"


IDENTITY = Identity()


@dataclass(frozen=True)
class ProjectorAngle:
    phi: float

    def __float__(self) -> float:
        return float(self.phi)

    @property
    def c_minus(self) -> float:
        return 0.5 * (1.0 - math.cos(self.phi))

    @property
    def c_plus(self) -> float:
        return 0.5 * (1.0 + math.cos(self.phi))

    @property
    def s(self) -> float:
        return -0.5 * math.sin(self.phi)


AngleLike = Union[ProjectorAngle, float, int, Fraction]
Slot = Union[ProjectorAngle, Identity, float, int]


def _angle(a: AngleLike) -> ProjectorAngle:
    if isinstance(a, ProjectorAngle):
        return a
    return ProjectorAngle(float(a))


def projector(angle: AngleLike) -> np.ndarray:
    """2x2 projector onto the +1 outcome."""
    a = _angle(angle)
    return np.array([[a.c_minus, a.s], [a.s, a.c_plus]])


def _slot_matrix(slot: Slot) -> np.ndarray:
    if isinstance(slot, Identity):
        return np.eye(2)
    return projector(slot)


def operator(ops: Sequence[Slot]) -> np.ndarray:
    """8x8 tensor product ``O_A (x) O_B (x) O_C``."""
    if len(ops) != 3:
        raise ValueError(f"expected 3 operator slots, got {len(ops)}")
    a, b, c = (_slot_matrix(o) for o in ops)
    return np.kron(np.kron(a, b), c)


@dataclass(frozen=True)
class SymmetricState:
    """Real state ``w|W> + c111|111> + c000|000>``.

    Every such state is invariant under permutations of the qubits.
    """

    w: float
    c111: float = 0.0
    c000: float = 0.0

    def __post_init__(self) -> None:
        norm = self.w**2 + self.c111**2 + self.c000**2
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")

    @classmethod
    def w_state(cls) -> "SymmetricState":
        return cls(1.0, 0.0, 0.0)

    @classmethod
    def psi(cls, alpha: float) -> "SymmetricState":
        """``cos(alpha)|W> + sin(alpha)|111>``."""
        return cls(math.cos(alpha), math.sin(alpha), 0.0)

    @classmethod
    def from_amplitudes(cls, w: float, c111: float = 0.0, c000: float = 0.0) -> "SymmetricState":
        """Normalize arbitrary amplitudes (not all zero)."""
        n = math.sqrt(w * w + c111 * c111 + c000 * c000)
        if n == 0.0:
            raise ValueError("zero vector")
        return cls(w / n, c111 / n, c000 / n)

    @property
    def alpha(self) -> float:
        """Mixing angle for states without a ``|000>`` component."""
        return math.atan2(self.c111, self.w)

    def vector(self) -> np.ndarray:
        v = np.zeros(8)
        v[[1, 2, 4]] = self.w * INV_SQRT3
        v[7] = self.c111
        v[0] = self.c000
        return v


W_STATE = SymmetricState.w_state()
KET_111 = SymmetricState(0.0, 1.0, 0.0)
KET_000 = SymmetricState(0.0, 0.0, 1.0)


def matrix_element(bra: SymmetricState, ket: SymmetricState, ops: Sequence[Slot]) -> float:
    """``<bra| O_A (x) O_B (x) O_C |ket>`` by explicit contraction."""
    return float(bra.vector() @ operator(ops) @ ket.vector())


def w_two_party(i: AngleLike, j: AngleLike) -> float:
    """``<W| A_i (x) A_j (x) I |W>``."""
    a, b = _angle(i), _angle(j)
    return (
        2.0 * a.s * b.s + a.c_minus * b.c_plus + a.c_plus * b.c_minus + a.c_minus * b.c_minus
    ) / 3.0


def w_three_party(i: AngleLike, j: AngleLike, k: AngleLike) -> float:
    """``<W| A_i (x) A_j (x) A_k |W>``."""
    a, b, c = _angle(i), _angle(j), _angle(k)
    cross = a.c_minus * b.s * c.s + a.s * b.c_minus * c.s + a.s * b.s * c.c_minus
    diag = (
        a.c_minus * b.c_minus * c.c_plus
        + a.c_minus * b.c_plus * c.c_minus
        + a.c_plus * b.c_minus * c.c_minus
    )
    return (2.0 * cross + diag) / 3.0


@dataclass(frozen=True)
class CrossElements:
    """Matrix elements involving ``|111>``."""

    w_111_pair: float  # <W| A_i A_j I |111>
    w_111_triple: float  # <W| A_i A_j A_k |111>
    p111_pair: float  # <111| A_i A_j I |111>
    p111_triple: float  # <111| A_i A_j A_k |111>


def cross_elements(i: AngleLike, j: AngleLike, k: AngleLike) -> CrossElements:
    a, b, c = _angle(i), _angle(j), _angle(k)
    return CrossElements(
        w_111_pair=a.s * b.s * INV_SQRT3,
        w_111_triple=(a.c_plus * b.s * c.s + a.s * b.c_plus * c.s + a.s * b.s * c.c_plus)
        * INV_SQRT3,
        p111_pair=a.c_plus * b.c_plus,
        p111_triple=a.c_plus * b.c_plus * c.c_plus,
    )


@dataclass(frozen=True)
class SmallAngleSpec:
    """Angles ``phi_i * x`` for small ``x``; mixing angle ``a * x**2``.

    ``mixing_slope`` of ``None`` means the plain W state.  Slopes may be
    :class:`~fractions.Fraction` so downstream linear programs stay exact.
    """

    phis: tuple
    mixing_slope: float | None = None

    def __post_init__(self) -> None:
        phis = tuple(self.phis)
        if not phis:
            raise ValueError("need at least one slope")
        for p in phis:
            if not math.isfinite(float(p)):
                raise ValueError(f"slope {p!r} is not finite")
        if all(p == 0 for p in phis):
            raise ValueError("all slopes are zero")
        # integers become fractions so that coefficient arithmetic stays exact
        phis = tuple(Fraction(p) if isinstance(p, int) else p for p in phis)
        object.__setattr__(self, "phis", phis)

    @property
    def m(self) -> int:
        return len(self.phis)


def sigma2(p, q, r):
    """Second elementary symmetric polynomial of three slopes."""
    return p * q + p * r + q * r


@dataclass(frozen=True)
class SmallAngleElements:
    """Leading small-``x`` coefficients for one index pair/triple.

    ``pair_x2`` and ``pair_x4`` are the ``x**2`` and ``x**4`` coefficients of
    ``<W|A_i A_j I|W>``; ``pair_x2`` vanishes exactly when the two slopes are
    opposite.  ``triple_x4`` is the ``x**4`` coefficient of
    ``<W|A_i A_j A_k|W>``.  ``cross_*_x2`` are ``x**2`` coefficients of the
    ``<W|..|111>`` elements; ``p111_*`` are the ``x**0`` limits of the
    ``<111|..|111>`` elements.
    """

    pair_x2: object
    pair_x4: object
    triple_x4: object
    cross_pair_x2: float
    cross_triple_x2: float
    p111_pair: int = 1
    p111_triple: int = 1


def small_angle_elements(spec: SmallAngleSpec, i: int, j: int, k: int) -> SmallAngleElements:
    """Small-angle coefficients for settings ``i, j`` (pair) and ``i, j, k`` (triple).

    Indices are 0-based.  Coefficients stay exact for rational slopes, except
    the ``<W|..|111>`` ones which carry a factor ``1/sqrt(3)``.
    """
    p, q, r = spec.phis[i], spec.phis[j], spec.phis[k]
    s = p + q
    s2 = sigma2(p, q, r)
    return SmallAngleElements(
        pair_x2=s * s / 12,
        pair_x4=-(s**4) / 144 + p * p * q * q / 48,
        triple_x4=s2 * s2 / 48,
        cross_pair_x2=float(p * q) / 4 * INV_SQRT3,
        cross_triple_x2=float(s2) / 4 * INV_SQRT3,
    )
