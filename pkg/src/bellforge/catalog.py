"""Built-in library of the reported inequalities with their optimal parameters.

Each entry couples an inequality with a state family and an angle recipe
from which its critical efficiency is recomputed:

- ``angles``: explicit measurement angles (radians), same for every party;
- ``slopes``: small-angle slopes ``phi_i`` (``Phi_i = phi_i * x``);
- ``party_slopes``: one slope list per party (asymmetric inequalities).

Slope and parameter entries are expressions such as ``"-lambda"`` or
``"-2+sqrt(5)"``; rational values stay exact.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import sympy

from . import inequality as ineqmod
from .inequality import AsymmetricBellInequality, NoViolation, SymmetricBellInequality
from .quantum import W_STATE
from .strategies import classical_bound

__all__ = [
    "AngleRecipe",
    "CatalogEntry",
    "EntryReport",
    "CatalogError",
    "ids",
    "load",
    "entries",
    "verify_all",
    "to_json",
    "from_json",
    "load_file",
    "recompute_eta",
]

FAMILIES = ("W", "W+111", "W+111+000")
ETA_TOL = 1e-5
EXACT_TOL = 1e-10


class CatalogError(ValueError):
    pass


def _value(expr, params: dict):
    """Evaluate a recipe expression; Fraction when rational, else float."""
    # parameter names such as "lambda" are Python keywords, so rename first
    names = sorted(params, key=len, reverse=True)
    safe = {name: f"_p{n}" for n, name in enumerate(names)}
    text = str(expr)
    for name in names:
        text = re.sub(rf"\b{re.escape(name)}\b", safe[name], text)
    val = sympy.sympify(text, rational=True)
    subs = {sympy.Symbol(safe[k]): sympy.sympify(str(v), rational=True) for k, v in params.items()}
    val = sympy.simplify(val.subs(subs)) if subs else val
    if val.free_symbols:
        raise CatalogError(f"unresolved symbols in {expr!r}: {sorted(map(str, val.free_symbols))}")
    if val.is_Rational:
        return Fraction(int(val.p), int(val.q))
    return float(val)


@dataclass(frozen=True)
class AngleRecipe:
    kind: str  # "angles", "slopes" or "party_slopes"
    values: tuple
    params: tuple = ()  # (name, expression) pairs

    def __post_init__(self) -> None:
        if self.kind not in ("angles", "slopes", "party_slopes"):
            raise CatalogError(f"unknown recipe kind {self.kind!r}")
        vals = tuple(tuple(v) for v in self.values) if self.kind == "party_slopes" else tuple(self.values)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "params", tuple(tuple(p) for p in self.params))

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    def resolve(self, **overrides):
        """Numeric angles/slopes; ``overrides`` replace named parameters."""
        params = {k: str(v) if not isinstance(v, str) else v for k, v in self.param_dict.items()}
        params.update({k: repr(v) if isinstance(v, float) else str(v) for k, v in overrides.items()})
        if self.kind == "party_slopes":
            return tuple(tuple(_value(e, params) for e in party) for party in self.values)
        vals = tuple(_value(e, params) for e in self.values)
        if self.kind == "angles":
            return tuple(float(v) for v in vals)
        return vals

    def to_dict(self) -> dict:
        return {"kind": self.kind, "values": [list(v) if isinstance(v, tuple) else v for v in self.values], "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "AngleRecipe":
        return cls(d["kind"], tuple(d["values"]), tuple(d.get("params", {}).items()))


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    inequality: object  # SymmetricBellInequality or AsymmetricBellInequality
    family: str
    recipe: AngleRecipe
    reference_eta: float
    label: str
    exact_eta: str | None = None
    notes: tuple = ()

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise CatalogError(f"unknown state family {self.family!r}")

    @property
    def symmetric(self) -> bool:
        return isinstance(self.inequality, SymmetricBellInequality)

    @property
    def settings(self) -> str:
        if self.symmetric:
            return str(self.inequality.m) * 3
        return "".join(str(s) for s in self.inequality.settings)

    def validate(self) -> None:
        """Cheap structural invariants; the classical bound is checked by :func:`verify_all`."""
        if self.symmetric:
            bad = [k for k, v in self.inequality.m2.items() if v > 0]
        else:
            bad = [k for k, v in self.inequality.pairs.items() if v > 0]
        if bad:
            raise CatalogError(f"{self.id}: positive pair coefficients at {bad}")
        if self.exact_eta is not None:
            exact = float(sympy.sympify(self.exact_eta))
            if abs(exact - self.reference_eta) > ETA_TOL:
                raise CatalogError(f"{self.id}: exact and printed thresholds disagree")

    def exact_value(self) -> float | None:
        return None if self.exact_eta is None else float(sympy.sympify(self.exact_eta))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": "symmetric" if self.symmetric else "asymmetric",
            "inequality": self.inequality.to_dict(),
            "family": self.family,
            "recipe": self.recipe.to_dict(),
            "reference_eta": self.reference_eta,
            "exact_eta": self.exact_eta,
            "label": self.label,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CatalogEntry":
        kind = d.get("kind", "symmetric")
        if kind == "symmetric":
            ineq = SymmetricBellInequality.from_dict(d["inequality"])
        elif kind == "asymmetric":
            ineq = AsymmetricBellInequality.from_dict(d["inequality"])
        else:
            raise CatalogError(f"unknown inequality kind {kind!r}")
        return cls(
            d["id"],
            ineq,
            d["family"],
            AngleRecipe.from_dict(d["recipe"]),
            float(d["reference_eta"]),
            str(d.get("label", "")),
            d.get("exact_eta"),
            tuple(d.get("notes", ())),
        )


def _sym(m, m2, m3):
    return SymmetricBellInequality.from_one_based(m, m2, m3)


def _eq19() -> AsymmetricBellInequality:
    pairs = {
        ("AB", 0, 0): -1, ("AC", 0, 0): -1, ("BC", 0, 0): -1,
        ("AB", 2, 1): -1, ("AC", 1, 1): -1, ("BC", 1, 1): -1,
    }
    triples = {(0, 1, 1): 1, (1, 0, 1): 1, (2, 1, 0): 1, (1, 1, 1): 1, (2, 1, 1): 1}
    return AsymmetricBellInequality((3, 2, 2), pairs, triples)


@lru_cache(maxsize=None)
def _builtin() -> dict[str, CatalogEntry]:
    w222 = _sym(2, {11: -1}, {111: 2, 112: 1, 122: -1})
    w333 = _sym(3, {11: -6, 23: -3}, {123: 3, 223: 2, 233: 2})
    w444 = _sym(
        4,
        {12: -6, 34: -2},
        {112: 6, 114: -6, 122: 6, 123: 3, 124: 3, 134: -1, 223: -6, 234: -1, 334: 2, 344: 2},
    )
    w666 = _sym(
        6,
        {12: -18, 34: -18, 56: -18},
        {
            112: 18, 114: -18, 122: 18, 123: 9, 124: 9, 136: -9, 156: 8, 223: -18,
            245: -9, 256: 4, 334: 18, 336: -18, 344: 18, 345: 9, 346: 9, 356: 1,
            445: -18, 456: 5, 556: 4, 566: 8,
        },
    )
    w888 = _sym(
        8,
        {12: -6, 34: -6, 56: -6, 78: -6},
        {
            112: 6, 114: -6, 122: 6, 123: 3, 124: 3, 136: -3, 223: -6, 245: -3,
            334: 6, 336: -6, 344: 6, 345: 3, 346: 3, 358: -3, 378: 2, 445: -6,
            467: -3, 478: 2, 556: 6, 558: -6, 566: 6, 567: 3, 568: 3, 578: 1,
            667: -6, 678: 1, 778: 2, 788: 2,
        },
    )
    s333 = _sym(
        3,
        {11: -2, 23: -1},
        {111: 4, 112: 1, 113: 1, 122: -2, 123: 1, 133: -2, 223: 1, 233: 1},
    )
    s444 = _sym(
        4,
        {12: -2, 34: -2},
        {
            112: 2, 114: -2, 122: 2, 123: 1, 124: 1, 133: -2, 134: 1,
            223: -2, 234: 1, 244: -2, 334: 2, 344: 2,
        },
    )
    lam_pattern = ("1", "-1", "lambda", "-lambda")
    found = [
        CatalogEntry(
            "W-222", w222, "W", AngleRecipe("angles", ("2.28059", "0.33432")), 0.83747, "two settings, W state",
        ),
        CatalogEntry(
            "W-223", _eq19(), "W",
            AngleRecipe("party_slopes", (("0", "1", "-1"), ("0", "1"), ("0", "-1"))),
            0.6, "asymmetric 3-2-2 reduction of the three-setting W inequality", exact_eta="3/5",
        ),
        CatalogEntry(
            "W-333", w333, "W", AngleRecipe("slopes", ("0", "1", "-1")), 0.6, "three settings, W state", exact_eta="3/5",
            notes=("optimum is not unique; the representative with fewest nonzero coefficients is stored",),
        ),
        CatalogEntry(
            "W-444", w444, "W", AngleRecipe("slopes", lam_pattern, (("lambda", "0.466715"),)), 0.509036, "four settings, W state",
        ),
        CatalogEntry(
            "W-666", w666, "W",
            AngleRecipe("slopes", ("1", "-1", "mu", "-mu", "nu", "-nu"), (("mu", "0.495815"), ("nu", "0.295435"))),
            0.502417, "six settings, W state",
        ),
        CatalogEntry(
            "W-888", w888, "W",
            AngleRecipe(
                "slopes",
                ("1", "-1", "rho", "-rho", "sigma", "-sigma", "tau", "-tau"),
                (("rho", "0.498442"), ("sigma", "0.306395"), ("tau", "0.169989")),
            ),
            0.501338, "eight settings, W state",
        ),
        CatalogEntry(
            "SYM-222", w222, "W+111", AngleRecipe("slopes", ("0", "1")), 0.6, "two settings, W with |111> admixture", exact_eta="3/5",
        ),
        CatalogEntry(
            "SYM-333", s333, "W+111", AngleRecipe("slopes", ("0", "1", "-1")), 0.51678, "three settings, W with |111> admixture",
            exact_eta="(19+sqrt(937))/96",
        ),
        CatalogEntry(
            "SYM-444", s444, "W+111", AngleRecipe("slopes", lam_pattern, (("lambda", "-2+sqrt(5)"),)), 0.5, "four settings, W with |111> admixture",
            exact_eta="1/2",
        ),
    ]
    return {e.id: e for e in found}


def ids() -> list[str]:
    return list(_builtin())


def load(entry_id: str) -> CatalogEntry:
    try:
        entry = _builtin()[entry_id]
    except KeyError:
        raise CatalogError(f"unknown catalog entry {entry_id!r}; known: {', '.join(ids())}") from None
    entry.validate()
    return entry


def entries() -> list[CatalogEntry]:
    return [load(i) for i in ids()]


def recompute_eta(entry: CatalogEntry, **params):
    """Critical efficiency from the entry's recipe (``params`` override free parameters)."""
    ineq = entry.inequality
    vals = entry.recipe.resolve(**params)
    kind = entry.recipe.kind
    if entry.family == "W":
        if kind == "angles":
            split = ineqmod.quantum_split(ineq, W_STATE, vals)
        elif kind == "slopes":
            split = ineqmod.small_angle_split(ineq, vals)
        else:
            split = ineqmod.asym_small_angle_split(ineq, vals)
        return ineqmod.eta_crit(split)
    if entry.family == "W+111" and kind == "slopes":
        return ineqmod.mixed_small_angle_split(ineq, vals).eta_crit()
    raise CatalogError(f"{entry.id}: no threshold recipe for family {entry.family} with {kind}")


@dataclass
class EntryReport:
    id: str
    classical_bound: Fraction | None = None
    classical_bound_ok: bool = False
    eta_crit: float | None = None
    eta_crit_ok: bool = False
    m2_sign_ok: bool = False
    errors: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.classical_bound_ok and self.eta_crit_ok and self.m2_sign_ok

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "ok": self.ok,
            "classical_bound": None if self.classical_bound is None else str(self.classical_bound),
            "classical_bound_ok": self.classical_bound_ok,
            "eta_crit": self.eta_crit,
            "eta_crit_ok": self.eta_crit_ok,
            "m2_sign_ok": self.m2_sign_ok,
            "errors": list(self.errors),
        }


def verify_entry(entry: CatalogEntry) -> EntryReport:
    rep = EntryReport(entry.id)
    ineq = entry.inequality
    pair_vals = ineq.m2.values() if entry.symmetric else ineq.pairs.values()
    rep.m2_sign_ok = all(v <= 0 for v in pair_vals)
    bound, strat = classical_bound(ineq)
    rep.classical_bound = bound
    rep.classical_bound_ok = bound == 0
    if not rep.classical_bound_ok:
        rep.errors.append(f"classical bound {bound} attained by {strat}")
    try:
        eta = recompute_eta(entry)
    except (NoViolation, ValueError) as exc:
        rep.errors.append(f"threshold: {exc}")
        return rep
    rep.eta_crit = float(eta)
    ok = abs(rep.eta_crit - entry.reference_eta) <= ETA_TOL
    exact = entry.exact_value()
    if exact is not None and abs(rep.eta_crit - exact) > EXACT_TOL:
        ok = False
        rep.errors.append(f"threshold {rep.eta_crit!r} differs from closed form {entry.exact_eta}")
    if not ok and not rep.errors:
        rep.errors.append(f"threshold {rep.eta_crit!r} differs from reference {entry.reference_eta}")
    rep.eta_crit_ok = ok
    return rep


def verify_all(selection: Iterable[CatalogEntry] | None = None) -> list[EntryReport]:
    """Classical bound, threshold and sign checks for each entry (all built-ins by default)."""
    chosen = entries() if selection is None else list(selection)
    return [verify_entry(e) for e in chosen]


def to_json(selection: Sequence[CatalogEntry] | None = None) -> str:
    chosen = entries() if selection is None else list(selection)
    return json.dumps({"entries": [e.to_dict() for e in chosen]}, indent=1)


def from_json(text: str) -> list[CatalogEntry]:
    data = json.loads(text)
    return [CatalogEntry.from_dict(d) for d in data["entries"]]


def load_file(path: str | Path) -> list[CatalogEntry]:
    return from_json(Path(path).read_text())


def closed_form_eta(entry_id: str) -> float:
    """Exact threshold for entries that have one (``math.nan`` otherwise)."""
    v = load(entry_id).exact_value()
    return math.nan if v is None else v
