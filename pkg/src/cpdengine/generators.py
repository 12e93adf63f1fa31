"""Random game forms and instances for property tests and experiments."""

from __future__ import annotations

import numpy as np

from .game import IMPLICIT_ACTION, GameForm, InstanceGame, StationaryProfile

__all__ = ["random_form", "random_game", "random_profile"]


def random_form(
    rng: np.random.Generator,
    n_states: int = 4,
    n_players: int = 2,
    max_actions: int = 2,
    n_failure: int = 1,
    density: float = 0.5,
    fixed_actions: bool = False,
    action_independent: bool = False,
) -> GameForm:
    """Random form whose last ``n_failure`` states are absorbing failure states.

    Each row draws a random support (each state kept with probability
    ``density``, at least one) and Dirichlet(1) weights on it.  With
    ``action_independent`` every joint action at a state shares one row,
    so all profiles induce the same chain.
    """
    if not 0 <= n_failure < n_states:
        raise ValueError("need at least one non-failure state")
    failure = frozenset(range(n_states - n_failure, n_states))
    actions, blocks = [], []

    def row():
        mask = rng.random(n_states) < density
        if not mask.any():
            mask[rng.integers(n_states)] = True
        out = np.zeros(n_states)
        out[mask] = rng.dirichlet(np.ones(int(mask.sum())))
        return out

    for s in range(n_states):
        if s in failure:
            actions.append(tuple((IMPLICIT_ACTION,) for _ in range(n_players)))
            loop = np.zeros((1, n_states))
            loop[0, s] = 1.0
            blocks.append(loop)
            continue
        counts = [max_actions if fixed_actions else int(rng.integers(1, max_actions + 1)) for _ in range(n_players)]
        actions.append(tuple(tuple(f"a{k}" for k in range(c)) for c in counts))
        n_joint = int(np.prod(counts))
        if action_independent:
            shared = row()
            blocks.append(np.tile(shared, (n_joint, 1)))
        else:
            blocks.append(np.stack([row() for _ in range(n_joint)]))
    return GameForm(
        states=tuple(f"s{s}" for s in range(n_states)),
        players=tuple(f"p{i + 1}" for i in range(n_players)),
        actions=tuple(actions),
        transition=tuple(blocks),
        failure=failure,
    )


def random_game(
    rng: np.random.Generator,
    form: GameForm | None = None,
    discount: float = 0.9,
    ubar: float = 1.0,
    **form_kwargs,
) -> InstanceGame:
    """Uniform payoffs in [-ubar, ubar] on a given or freshly drawn form; initial state 0."""
    form = form or random_form(rng, **form_kwargs)
    payoffs = tuple(
        None if s in form.failure else rng.uniform(-ubar, ubar, size=(form.n_joint(s), form.n_players))
        for s in range(form.n_states)
    )
    return InstanceGame(form, payoffs, discount, 0)


def random_profile(rng: np.random.Generator, form: GameForm, pure: bool = False) -> StationaryProfile:
    if pure:
        choices = [
            [int(rng.integers(len(form.actions[s][i]))) for s in range(form.n_states)] for i in range(form.n_players)
        ]
        return StationaryProfile.pure(form, choices)
    policy = []
    for i in range(form.n_players):
        per_state = []
        for s in range(form.n_states):
            k = len(form.actions[s][i])
            per_state.append(np.eye(1, k, 0).ravel() if s in form.failure else rng.dirichlet(np.ones(k)))
        policy.append(tuple(per_state))
    return StationaryProfile(tuple(policy))
