import json
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellforge import catalog
from bellforge.inequality import (
    AsymmetricBellInequality,
    EfficiencySplit,
    NoViolation,
    SymmetricBellInequality,
    asym_quantum_value,
    asym_small_angle_split,
    bell_operator,
    effective_value,
    eta_crit,
    mixed_small_angle_split,
    multiplicity,
    pair_keys,
    quantum_split,
    quantum_split_full,
    small_angle_split,
    triple_keys,
)
from bellforge.quantum import W_STATE, SymmetricState

W222 = SymmetricBellInequality.from_one_based(2, {11: -1}, {111: 2, 112: 1, 122: -1})


def test_multiplicities():
    assert [multiplicity(0, 0), multiplicity(0, 1)] == [3, 6]
    assert [multiplicity(0, 0, 0), multiplicity(0, 0, 1), multiplicity(0, 1, 2)] == [1, 3, 6]
    assert len(pair_keys(3)) == 6 and len(triple_keys(3)) == 10


def test_one_based_construction_and_describe():
    assert W222.m2 == {(0, 0): -1}
    assert W222.m3 == {(0, 0, 0): 2, (0, 0, 1): 1, (0, 1, 1): -1}
    assert W222.support == 4
    text = W222.describe()
    assert "M2_11" in text or "11" in text


def test_scaling_and_integer_normalization():
    half = W222.scaled(F(1, 2))
    assert half.integer_normalized() == W222
    assert W222.scaled(6).integer_normalized() == W222


def test_json_round_trip_for_all_catalog_entries():
    for entry in catalog.entries():
        ineq = entry.inequality
        restored = type(ineq).from_dict(json.loads(json.dumps(ineq.to_dict())))
        assert restored == ineq


def test_split_helpers():
    split = EfficiencySplit(F(-3), F(5))
    assert eta_crit(split) == F(3, 5)
    assert effective_value(split, F(3, 5)) == 0
    with pytest.raises(NoViolation):
        eta_crit(EfficiencySplit(-1, 0))
    with pytest.raises(ValueError):
        effective_value(split, 1.5)


def random_inequality(rng, m):
    m2 = {k: F(int(rng.integers(-3, 4))) for k in pair_keys(m)}
    m3 = {k: F(int(rng.integers(-3, 4))) for k in triple_keys(m)}
    return SymmetricBellInequality(m, {k: v for k, v in m2.items() if v}, {k: v for k, v in m3.items() if v})


def test_triangular_evaluation_matches_full_tensor_sum():
    rng = np.random.default_rng(7)
    for _ in range(40):
        m = int(rng.integers(1, 5))
        ineq = random_inequality(rng, m)
        angles = rng.uniform(-math.pi, math.pi, m)
        amps = rng.normal(size=3)
        state = SymmetricState.from_amplitudes(*amps)
        fast = quantum_split(ineq, state, angles)
        full = quantum_split_full(ineq, state, angles)
        assert fast.m2_value == pytest.approx(full.m2_value, abs=1e-12)
        assert fast.m3_value == pytest.approx(full.m3_value, abs=1e-12)


def test_bell_operator_expectation_equals_effective_value():
    rng = np.random.default_rng(3)
    for _ in range(20):
        ineq = random_inequality(rng, 3)
        angles = rng.uniform(-math.pi, math.pi, 3)
        state = SymmetricState.from_amplitudes(*rng.normal(size=3))
        eta = float(rng.uniform(0, 1))
        v = state.vector()
        split = quantum_split(ineq, state, angles)
        assert v @ bell_operator(ineq, angles, eta) @ v == pytest.approx(effective_value(split, eta), abs=1e-12)


@pytest.mark.parametrize("cid", ["W-333", "W-444", "W-666"])
def test_small_angle_split_is_the_x4_limit(cid):
    entry = catalog.load(cid)
    slopes = entry.recipe.resolve()
    exact = small_angle_split(entry.inequality, slopes)
    x = 2e-3
    num = quantum_split(entry.inequality, W_STATE, [float(s) * x for s in slopes])
    assert num.m2_value / x**4 == pytest.approx(float(exact.m2_value), rel=1e-4)
    assert num.m3_value / x**4 == pytest.approx(float(exact.m3_value), rel=1e-4)


def test_small_angle_split_rejects_unpaired_slopes():
    with pytest.raises(ValueError):
        small_angle_split(W222, (1, 2))


def test_mixed_split_matches_numerics():
    entry = catalog.load("SYM-333")
    slopes = entry.recipe.resolve()
    ms = mixed_small_angle_split(entry.inequality, slopes)
    eta, a, x = 0.7, -0.2, 3e-3
    state = SymmetricState.psi(a * x * x)
    split = quantum_split(entry.inequality, state, [float(s) * x for s in slopes])
    assert effective_value(split, eta) / x**4 == pytest.approx(ms.value(eta, a), rel=1e-3)


def test_mixed_split_threshold_for_sym222():
    ms = mixed_small_angle_split(W222, (0, 1))
    assert ms.eta_crit() == pytest.approx(0.6, abs=1e-12)
    assert ms.best_value(0.6) == pytest.approx(0.0, abs=1e-15)
    assert ms.best_value(0.7) > 0


def test_asymmetric_value_matches_symmetric_embedding():
    sym = catalog.load("W-333").inequality
    asym = AsymmetricBellInequality.from_symmetric(sym)
    rng = np.random.default_rng(11)
    angles = rng.uniform(-1, 1, 3)
    for eta in (0.3, 0.8):
        sv = effective_value(quantum_split(sym, W_STATE, angles), eta)
        av = asym_quantum_value(asym, W_STATE, [angles] * 3, eta)
        assert av == pytest.approx(sv, abs=1e-12)


def test_asymmetric_small_angle_split():
    entry = catalog.load("W-223")
    split = asym_small_angle_split(entry.inequality, entry.recipe.resolve())
    assert eta_crit(split) == F(3, 5)


small = st.integers(-3, 3)


@settings(max_examples=50, deadline=None)
@given(st.lists(small, min_size=3, max_size=3), st.lists(small, min_size=4, max_size=4), st.integers(1, 5))
def test_threshold_is_scale_invariant(m2, m3, k):
    m2keys, m3keys = pair_keys(2), triple_keys(2)
    ineq = SymmetricBellInequality(2, {kk: F(v) for kk, v in zip(m2keys, m2) if v},
                                   {kk: F(v) for kk, v in zip(m3keys, m3) if v})
    angles = (0.4, 2.1)
    a = quantum_split(ineq, W_STATE, angles)
    b = quantum_split(ineq.scaled(k), W_STATE, angles)
    assert b.m2_value == pytest.approx(k * a.m2_value, abs=1e-12)
    assert b.m3_value == pytest.approx(k * a.m3_value, abs=1e-12)
    # permuting the settings together with the angles leaves the value unchanged
    perm = {0: 1, 1: 0}
    swapped = SymmetricBellInequality(
        2,
        {tuple(sorted(perm[i] for i in kk)): v for kk, v in ineq.m2.items()},
        {tuple(sorted(perm[i] for i in kk)): v for kk, v in ineq.m3.items()},
    )
    c = quantum_split(swapped, W_STATE, angles[::-1])
    assert c.m2_value == pytest.approx(a.m2_value, abs=1e-12)
    assert c.m3_value == pytest.approx(a.m3_value, abs=1e-12)


def test_asymmetric_describe_handles_fractions():
    ineq = AsymmetricBellInequality((1, 1, 1), {("AB", 0, 0): F(-1, 2)}, {(0, 0, 0): F(3, 2)})
    assert "-1/2" in ineq.describe() and "+3/2" in ineq.describe()
    ab, ac, bc, abc = ineq.tensors()
    assert ab[0, 0] == F(-1, 2) and ac[0, 0] == 0 and bc[0, 0] == 0
    assert abc.shape == (1, 1, 1) and abc[0, 0, 0] == F(3, 2)
