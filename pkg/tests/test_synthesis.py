import itertools
import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellforge import catalog
from bellforge.inequality import NoViolation, mixed_small_angle_split, small_angle_split
from bellforge.quantum import W_STATE, SmallAngleSpec
from bellforge.strategies import classical_bound
from bellforge.synthesis import (
    InfeasibleLP,
    asym_matches_symmetric,
    derive_asymmetric,
    grid_scan,
    identify,
    inequality_hash,
    synthesize,
)


def test_w333_pattern():
    res = synthesize(SmallAngleSpec((0, 1, -1)))
    assert res.eta_crit == pytest.approx(0.6, abs=1e-12)
    assert res.lp_status == "optimal"
    assert classical_bound(res.inequality)[0] == 0
    assert all(v <= 0 for v in res.inequality.m2.values())
    # the synthesized inequality reproduces its own threshold analytically
    split = small_angle_split(res.inequality, (0, 1, -1))
    assert float(-split.m2_value / split.m3_value) == pytest.approx(0.6, abs=1e-12)


def test_certificate():
    res = synthesize(SmallAngleSpec((0, 1, -1)))
    cert = res.certificate
    assert cert is not None
    assert all(w >= 0 for w in cert.weights)
    assert cert.residual < 1e-8
    assert cert.bound == pytest.approx(res.lp_value, rel=1e-9)
    assert res.lp_value == pytest.approx(1 / res.eta_crit, rel=1e-9)


def test_w444_reproduces_catalog_inequality():
    entry = catalog.load("W-444")
    res = synthesize(SmallAngleSpec(entry.recipe.resolve()))
    assert res.eta_crit == pytest.approx(0.509036, abs=1e-6)
    assert res.inequality.integer_normalized() == entry.inequality.integer_normalized()
    assert identify(res.inequality) == "W-444"


def test_explicit_w222_angles():
    res = synthesize(W_STATE, (2.28059, 0.33432))
    assert res.eta_crit == pytest.approx(0.83747, abs=1e-5)
    assert identify(res.inequality) == "W-222"


def test_mixing_at_optimal_slope():
    ms = mixed_small_angle_split(catalog.load("SYM-222").inequality, (0, 1))
    a = ms.optimal_a(0.6)
    res = synthesize(SmallAngleSpec((0, 1), mixing_slope=a))
    assert res.eta_crit == pytest.approx(0.6, abs=1e-9)


def test_single_setting_is_infeasible():
    with pytest.raises(InfeasibleLP):
        synthesize(SmallAngleSpec((1,)))


def test_no_violation_for_single_angle():
    with pytest.raises(NoViolation):
        synthesize(W_STATE, (0.7,))


def test_hash_is_scale_invariant():
    ineq = catalog.load("W-333").inequality
    assert inequality_hash(ineq) == inequality_hash(ineq.scaled(7))
    assert len(inequality_hash(ineq)) == 12


@settings(max_examples=8, deadline=None)
@given(st.fractions(min_value=F(1, 5), max_value=5), st.sampled_from(list(itertools.permutations(range(3)))))
def test_threshold_invariant_under_scale_and_permutation(t, perm):
    base = (F(0), F(1), F(-1))
    slopes = tuple(base[p] * t for p in perm)
    assert synthesize(SmallAngleSpec(slopes)).eta_crit == pytest.approx(0.6, abs=1e-12)


def test_slope_grid_scan_m3():
    res = grid_scan(3, 0.05, mode="slopes")
    assert res.best is not None
    assert res.best.eta_crit == pytest.approx(0.6, abs=1e-12)
    assert len(res.records) == 41 * 41


def test_angle_grid_scan_m2():
    res = grid_scan(2, 0.157)
    assert res.best.eta_crit == pytest.approx(0.83747, abs=1e-4)
    assert identify(res.best.inequality) == "W-222"


def test_grid_scan_m1_finds_nothing():
    assert grid_scan(1, math.pi / 4).best is None


def test_grid_scan_rejects_bad_arguments():
    with pytest.raises(ValueError):
        grid_scan(2, 0.0)
    with pytest.raises(ValueError):
        grid_scan(4, 0.5, mode="angles")
    with pytest.raises(ValueError):
        grid_scan(2, 0.5, mode="spiral")


def test_derive_asymmetric_from_w333():
    entry = catalog.load("W-333")
    slopes = ((F(0), F(1), F(-1)), (F(0), F(1)), (F(0), F(-1)))
    res = derive_asymmetric(entry, slopes)
    assert res.feasible
    assert res.inequality == catalog.load("W-223").inequality
    assert res.scale == 6
    assert classical_bound(res.inequality)[0] == 0
    assert asym_matches_symmetric(res, entry, slopes) < 1e-10


def test_two_slope_reductions_of_w444_are_infeasible():
    entry = catalog.load("W-444")
    slopes = entry.recipe.resolve()
    for sub in itertools.combinations(slopes, 2):
        res = derive_asymmetric(entry, (sub, slopes, slopes))
        assert not res.feasible
        assert res.inequality is None
