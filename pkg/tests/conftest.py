"""Brute-force oracles shared by the test modules.

They work on the full transition matrix with plain matrix powers and share
no code with the engine beyond the induced chain.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from cpdengine.game import induced_chain


def full_matrix(form, profile):
    return induced_chain(form, profile).matrix


def brute_survival(form, profile, initial, horizon):
    """P(T > n) = 1 - P(X_n in F) since F is absorbing."""
    p = full_matrix(form, profile)
    fail = sorted(form.failure)
    row = np.zeros(form.n_states)
    row[initial] = 1.0
    out = []
    for _ in range(horizon):
        row = row @ p
        out.append(1.0 - row[fail].sum())
    return np.array(out)


def brute_harmonic(form, profile, squarings=40):
    """h(s) = lim P_s(T > n): square the full chain, renormalizing rows to stay stochastic."""
    p = full_matrix(form, profile)
    for _ in range(squarings):
        p = p @ p
        p = np.clip(p, 0.0, None)
        p /= p.sum(axis=1, keepdims=True)
    fail = sorted(form.failure)
    h = 1.0 - p[:, fail].sum(axis=1)
    h[fail] = 0.0
    return np.clip(h, 0.0, 1.0)


def brute_unconditional(game, profile, player, horizon=2000, at_failure=0.0):
    """Forward sum of discounted stage payoffs plus a lump value at the failure date."""
    form = game.form
    p = full_matrix(form, profile)
    chain = induced_chain(form, profile)
    r = np.zeros(form.n_states)
    for s in range(form.n_states):
        if s not in form.failure:
            r[s] = chain.weights[s] @ game.payoffs[s][:, player]
    fail = sorted(form.failure)
    row = np.zeros(form.n_states)
    row[game.initial] = 1.0
    total, disc, failed = 0.0, 1.0, 0.0
    for _ in range(horizon):
        total += disc * (row @ r)
        row = row @ p
        disc *= game.discount
        newly = row[fail].sum() - failed
        failed += newly
        total += disc * newly * at_failure
    return total


def brute_conditional(game, profile, player, horizon=600):
    """E[sum_t delta^t u_t | T = infinity] via matrix powers of the live block."""
    form = game.form
    h = brute_harmonic(form, profile)
    if h[game.initial] <= 1e-13:
        return -np.inf
    p = full_matrix(form, profile)
    chain = induced_chain(form, profile)
    live = [s for s in range(form.n_states) if s not in form.failure]
    # reward weighted by survival after the action: sum_a w(a) u(s,a) P_a h(s)
    rh = np.zeros(form.n_states)
    for s in live:
        nxt = form.transition[s] @ h
        rh[s] = np.sum(chain.weights[s] * game.payoffs[s][:, player] * nxt)
    row = np.zeros(form.n_states)
    row[game.initial] = 1.0
    total, disc = 0.0, 1.0
    for _ in range(horizon):
        live_row = row.copy()
        live_row[sorted(form.failure)] = 0.0
        total += disc * (live_row @ rh)
        row = live_row @ p
        disc *= game.discount
    return total / h[game.initial]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# property tests replay a fixed example sequence so runs are repeatable
settings.register_profile("repeatable", derandomize=True, database=None)
settings.load_profile("repeatable")
