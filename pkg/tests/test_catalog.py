import dataclasses
import json
import math
from fractions import Fraction as F

import pytest

from bellforge import catalog
from bellforge.inequality import SymmetricBellInequality

PRINTED = {
    "W-222": 0.83747,
    "W-333": 0.6,
    "W-444": 0.509036,
    "W-666": 0.502417,
    "W-888": 0.501338,
    "SYM-222": 0.6,
    "SYM-333": 0.51678,
    "SYM-444": 0.5,
}


def test_ids():
    assert set(PRINTED) | {"W-223"} == set(catalog.ids())
    assert len(catalog.entries()) == 9


def test_unknown_id():
    with pytest.raises(catalog.CatalogError):
        catalog.load("W-999")


def test_w222_coefficients():
    ineq = catalog.load("W-222").inequality
    assert ineq == SymmetricBellInequality.from_one_based(2, {11: -1}, {111: 2, 112: 1, 122: -1})


def test_w444_has_twelve_nonzero_coefficients():
    e = catalog.load("W-444")
    assert e.inequality.support == 12
    assert e.recipe.resolve() == pytest.approx((1, -1, 0.466715, -0.466715))


def test_sym444_recipe_is_exact():
    slopes = catalog.load("SYM-444").recipe.resolve()
    assert float(slopes[2]) == pytest.approx(math.sqrt(5) - 2, abs=1e-15)


@pytest.mark.parametrize("cid", sorted(PRINTED))
def test_recomputed_thresholds(cid):
    assert catalog.recompute_eta(catalog.load(cid)) == pytest.approx(PRINTED[cid], abs=1e-5)


def test_exact_thresholds():
    assert catalog.closed_form_eta("SYM-333") == pytest.approx((19 + math.sqrt(937)) / 96, abs=1e-15)
    assert catalog.recompute_eta(catalog.load("SYM-333")) == pytest.approx((19 + math.sqrt(937)) / 96, abs=1e-10)
    assert catalog.recompute_eta(catalog.load("SYM-444")) == pytest.approx(0.5, abs=1e-12)
    assert catalog.recompute_eta(catalog.load("W-223")) == F(3, 5)
    assert math.isnan(catalog.closed_form_eta("W-444"))


def test_recipe_override():
    e = catalog.load("W-444")
    # threshold (3 + l^4) / (6 - 3 (1 - 2 l)^2) at l = 1/2 is (3 + 1/16) / 6
    assert catalog.recompute_eta(e, **{"lambda": "1/2"}) == pytest.approx((3 + 1 / 16) / 6, abs=1e-12)


def test_verify_all_passes():
    reports = catalog.verify_all()
    assert [r.id for r in reports] == catalog.ids()
    assert all(r.ok for r in reports), [r.to_dict() for r in reports if not r.ok]


def test_verify_empty_selection():
    assert catalog.verify_all([]) == []


def test_perturbed_entry_fails_bound_check():
    e = catalog.load("W-333")
    m3 = dict(e.inequality.m3)
    m3[(1, 2, 2)] += 1
    bad = dataclasses.replace(e, inequality=SymmetricBellInequality(3, dict(e.inequality.m2), m3))
    rep = catalog.verify_entry(bad)
    assert not rep.classical_bound_ok
    assert not rep.ok
    assert rep.errors


def test_json_round_trip(tmp_path):
    text = catalog.to_json()
    assert catalog.from_json(text) == catalog.entries()
    path = tmp_path / "cat.json"
    path.write_text(text)
    assert catalog.load_file(path) == catalog.entries()
    data = json.loads(text)
    data["entries"][0]["kind"] = "weird"
    with pytest.raises(catalog.CatalogError):
        catalog.from_json(json.dumps(data))


def test_entry_validation_rejects_positive_pairs():
    e = catalog.load("W-222")
    bad = dataclasses.replace(e, inequality=SymmetricBellInequality(2, {(0, 0): F(1)}, dict(e.inequality.m3)))
    with pytest.raises(catalog.CatalogError):
        bad.validate()
    with pytest.raises(catalog.CatalogError):
        dataclasses.replace(e, family="GHZ")
