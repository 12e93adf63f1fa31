from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpdengine.continuation import Ordering
from cpdengine.evaluation import (
    CONTINUATION_CRITERION,
    SURVIVAL_LIMIT_CRITERION,
    PenaltyConfig,
    completion_sensitivity,
    cpd_compare,
    cpd_value,
    decoupled_compare,
    dominance_threshold,
    penalty_compare,
    penalty_sweep,
    penalty_value,
)
from cpdengine.fixtures import fixture
from cpdengine.game import profile_from_id
from cpdengine.generators import random_game, random_profile
from cpdengine.performance import FailureCompletion


def pure(g, pid=0):
    return profile_from_id(g.form, pid)


def test_continuation_dominates_performance():
    g = fixture("completion_flip")
    safe, grab = cpd_value(g, pure(g, 0), 0), cpd_value(g, pure(g, 1), 0)
    assert cpd_compare(safe, grab) is Ordering.GREATER
    assert cpd_compare(grab, safe) is Ordering.LESS


def test_minus_infinity_ties_when_both_fail():
    g = fixture("stay_withdraw")
    a, b = cpd_value(g, pure(g, 2), 0), cpd_value(g, pure(g, 3), 0)
    assert a.performance.is_minus_infinity and b.performance.is_minus_infinity
    assert cpd_compare(a, b) is Ordering.EQUAL


def test_survival_limit_criterion_is_coarser():
    g1, g2 = fixture("fail_at_one"), fixture("fail_at_two")
    a, b = cpd_value(g1, pure(g1), 0, 16), cpd_value(g2, pure(g2), 0, 16)
    assert decoupled_compare(b, a, CONTINUATION_CRITERION) is Ordering.GREATER
    assert decoupled_compare(b, a, SURVIVAL_LIMIT_CRITERION) is Ordering.EQUAL


def test_penalty_value_interval_contains_value():
    g = fixture("geometric")
    pv = penalty_value(g, pure(g), 0, PenaltyConfig(3.0))
    assert pv.lo <= pv.value <= pv.hi
    assert pv.unconditional == pytest.approx(4 / 3)
    assert pv.value == pytest.approx(4 / 3 - 3 * 2 / 3)


def test_penalty_config_rejects_negative_or_infinite():
    for m in (-1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            PenaltyConfig(m)


def test_penalty_compare_indeterminate_on_overlap():
    g = fixture("geometric")
    short = penalty_value(g, pure(g), 0, PenaltyConfig(1e6), horizon=2)
    assert short.hi - short.lo > 1e-3
    assert penalty_compare(short, short) is Ordering.INDETERMINATE
    exact = penalty_value(g, pure(g), 0, PenaltyConfig(1.0))
    assert penalty_compare(exact, exact) is Ordering.EQUAL


def test_dominance_threshold_formula_and_errors():
    assert dominance_threshold(1.0, 0.5, 0.25) == pytest.approx(16.0)
    with pytest.raises(ValueError):
        dominance_threshold(1.0, 0.5, 0.0)


def test_penalty_sweep_on_penalty_limit_fixture():
    g = fixture("penalty_limit")
    sw = penalty_sweep(g, 0, [0, 1, 10, 100])
    assert sw.ranking(0.0)[0] == 2  # (R, S) for player 1
    assert sw.ranking(100.0)[0] == 0
    assert sw.stabilization == 10.0
    rows = sw.to_csv().splitlines()
    assert rows[0] == "profile_id,M,U,L_mid,L_lo,L_hi,penalty_value,rank"
    assert len(rows) == 1 + 4 * 4


def test_penalty_sweep_requires_increasing_schedule():
    with pytest.raises(ValueError):
        penalty_sweep(fixture("penalty_limit"), 0, [1, 1, 2])


def test_completion_flip_closed_forms():
    g = fixture("completion_flip")
    rep = completion_sensitivity(g, pure(g, 0), pure(g, 1), 0,
                                 [FailureCompletion.zero(), FailureCompletion.terminal(-100.0)])
    (_, s0, g0, o0), (_, s1, g1, o1) = rep.entries
    assert (s0, g0) == pytest.approx((0.2, 1.5), abs=1e-12)
    assert (s1, g1) == pytest.approx((0.2, -23.5), abs=1e-12)
    assert o0 is Ordering.LESS and o1 is Ordering.GREATER and rep.flip


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cpd_compare_is_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    g = random_game(rng, n_states=4, n_players=2, max_actions=2)
    a = cpd_value(g, random_profile(rng, g.form, pure=True), 0)
    b = cpd_value(g, random_profile(rng, g.form, pure=True), 0)
    assert cpd_compare(a, b) is cpd_compare(b, a).flip()


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_equal_survival_reduces_to_conditional_payoff(seed):
    rng = np.random.default_rng(seed)
    g = random_game(rng, n_states=4, n_players=2, max_actions=2, action_independent=True)
    a = cpd_value(g, random_profile(rng, g.form), 0)
    b = cpd_value(g, random_profile(rng, g.form), 0)
    assert np.allclose(a.continuation.survival, b.continuation.survival, rtol=0, atol=1e-12)
    got = cpd_compare(a, b)
    va, vb = a.performance.value, b.performance.value
    if va == vb or abs(va - vb) <= 1e-9:
        assert got is Ordering.EQUAL
    else:
        assert got is (Ordering.GREATER if va > vb else Ordering.LESS)
