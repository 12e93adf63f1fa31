from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import full_matrix
from cpdengine.fixtures import fixture
from cpdengine.game import enumerate_pure_profiles, profile_from_id
from cpdengine.generators import random_form, random_profile
from cpdengine.viability import is_viability_preserving, viab_profile_exists, viability_kernel


def reach_failure(form, profile, s0):
    m = full_matrix(form, profile) > 0
    seen, stack = {s0}, [s0]
    while stack:
        s = stack.pop()
        for t in np.flatnonzero(m[s]):
            if int(t) not in seen:
                seen.add(int(t))
                stack.append(int(t))
    return bool(seen & form.failure)


def brute_viable_states(form):
    """States from which some pure stationary profile never reaches F."""
    out = set()
    for prof in enumerate_pure_profiles(form):
        for s in form.nonfailure:
            if s not in out and not reach_failure(form, prof, s):
                out.add(s)
    return out


def test_fixture_kernels():
    assert viability_kernel(fixture("always_safe").form).kernel == {0}
    assert viability_kernel(fixture("geometric").form).kernel == frozenset()
    assert viability_kernel(fixture("empty_kernel").form).kernel == frozenset()
    k = viability_kernel(fixture("stay_withdraw").form)
    assert k.kernel == {0} and k.witness[0] == (0, 0)


def test_witness_is_lowest_index_action():
    k = viability_kernel(fixture("completion_flip").form)
    assert k.kernel == {0} and k.witness[0] == (0,)


def test_viab_profile_exists_returns_viable_witness():
    g = fixture("penalty_limit")
    ok, witness = viab_profile_exists(g.form, g.initial)
    assert ok and is_viability_preserving(g.form, witness, g.initial)
    ok, witness = viab_profile_exists(fixture("geometric").form, 0)
    assert not ok and witness is None


def test_profile_with_risky_action_is_not_viable():
    g = fixture("penalty_limit")
    assert is_viability_preserving(g.form, profile_from_id(g.form, 0), 0)
    assert not is_viability_preserving(g.form, profile_from_id(g.form, 1), 0)


def test_failure_initial_rejected():
    g = fixture("geometric")
    with pytest.raises(ValueError):
        viab_profile_exists(g.form, 1)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_kernel_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    form = random_form(rng, n_states=int(rng.integers(2, 5)), n_players=2, max_actions=2, density=0.4)
    k = viability_kernel(form)
    assert set(k.kernel) == brute_viable_states(form)
    for s in form.nonfailure:
        ok, w = viab_profile_exists(form, s, k)
        assert ok == (s in k.kernel)
        if ok:
            assert not reach_failure(form, w, s)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mixed_profile_viable_only_inside_kernel(seed):
    rng = np.random.default_rng(seed)
    form = random_form(rng, n_states=4, n_players=2, max_actions=2, density=0.4)
    k = viability_kernel(form)
    prof = random_profile(rng, form)
    if is_viability_preserving(form, prof, 0):
        assert 0 in k.kernel
