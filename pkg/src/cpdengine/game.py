"""Game forms, instance games and stationary profiles.

A game form is the payoff-free skeleton: states, per-state action sets,
a dense transition kernel indexed by joint action, and an absorbing
failure set.  An instance game adds stage payoffs on non-failure states,
a discount factor and an initial state.

Joint actions at a state are tuples of per-player action indices.  They
are numbered lexicographically with player 0 most significant, which is
the row order of ``GameForm.transition[s]`` and ``InstanceGame.payoffs[s]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "ROW_SUM_TOL",
    "DEFAULT_ENUMERATION_CAP",
    "EnumerationCapError",
    "InstanceError",
    "GameForm",
    "InstanceGame",
    "StationaryProfile",
    "Violation",
    "InducedChain",
    "validate_game_form",
    "induced_chain",
    "enumerate_pure_profiles",
    "count_pure_profiles",
    "enumerate_player_policies",
    "count_player_policies",
    "pure_policy",
    "pure_profile_id",
    "profile_from_id",
]

ROW_SUM_TOL = 1e-12
DEFAULT_ENUMERATION_CAP = 10**6
IMPLICIT_ACTION = "-"


class EnumerationCapError(ValueError):
    """Raised when a Cartesian product of policies exceeds the cap."""

    def __init__(self, size: int, cap: int):
        super().__init__(f"profile count {size} exceeds enumeration cap {cap}")
        self.size = size
        self.cap = cap


class InstanceError(ValueError):
    """An instance game violates its own invariants."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class GameForm:
    """Payoff-free game skeleton with an absorbing failure set.

    ``actions[s][i]`` lists player ``i``'s action ids at state ``s``;
    ``transition[s]`` has shape ``(n_joint(s), n_states)``.
    """

    states: tuple[str, ...]
    players: tuple[str, ...]
    actions: tuple[tuple[tuple[str, ...], ...], ...]
    transition: tuple[np.ndarray, ...]
    failure: frozenset[int]

    def __post_init__(self):
        n, k = len(self.states), len(self.players)
        if n < 1 or k < 1:
            raise ValueError("a game form needs at least one state and one player")
        if len(set(self.states)) != n or len(set(self.players)) != k:
            raise ValueError("state and player ids must be unique")
        actions = tuple(tuple(tuple(a) for a in per_state) for per_state in self.actions)
        if len(actions) != n or any(len(per_state) != k for per_state in actions):
            raise ValueError("actions must be given for every (state, player)")
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "failure", frozenset(int(s) for s in self.failure))
        if any(not 0 <= s < n for s in self.failure):
            raise ValueError("failure set refers to unknown states")
        rows = []
        for s in range(n):
            t = _frozen(self.transition[s])
            expected = (self.n_joint(s), n)
            if t.ndim != 2 or t.shape != expected:
                raise ValueError(
                    f"transition block for state {self.states[s]!r} has shape "
                    f"{t.shape}, expected {expected}"
                )
            rows.append(t)
        object.__setattr__(self, "transition", tuple(rows))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def nonfailure(self) -> tuple[int, ...]:
        return tuple(s for s in range(self.n_states) if s not in self.failure)

    def action_counts(self, s: int) -> tuple[int, ...]:
        return tuple(len(a) for a in self.actions[s])

    def n_joint(self, s: int) -> int:
        return math.prod(self.action_counts(s))

    def joint_actions(self, s: int) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(c) for c in self.action_counts(s))))

    def joint_index(self, s: int, joint: Sequence[int]) -> int:
        idx = 0
        for c, a in zip(self.action_counts(s), joint):
            idx = idx * c + int(a)
        return idx

    def state_index(self, state: str | int) -> int:
        if isinstance(state, (int, np.integer)):
            return int(state)
        return self.states.index(state)

    def player_index(self, player: str | int) -> int:
        if isinstance(player, (int, np.integer)):
            return int(player)
        return self.players.index(player)

    def __eq__(self, other):
        if not isinstance(other, GameForm):
            return NotImplemented
        return (
            self.states == other.states
            and self.players == other.players
            and self.actions == other.actions
            and self.failure == other.failure
            and all(np.array_equal(a, b) for a, b in zip(self.transition, other.transition))
        )

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    kind: str
    state: str
    joint_action: tuple[int, ...] | None
    detail: str


def validate_game_form(form: GameForm, tol: float = ROW_SUM_TOL) -> list[Violation]:
    """Report every violated game-form invariant; an empty list means valid."""
    report: list[Violation] = []
    for s in range(form.n_states):
        name = form.states[s]
        for i, acts in enumerate(form.actions[s]):
            if not acts:
                report.append(
                    Violation("empty_actions", name, None, f"player {form.players[i]!r} has no actions")
                )
        block = form.transition[s]
        for j, joint in enumerate(form.joint_actions(s)):
            row = block[j]
            if not np.all(np.isfinite(row)) or np.any(row < 0):
                report.append(Violation("negative", name, joint, "entries must be finite and >= 0"))
            total = math.fsum(row)
            if abs(total - 1.0) > tol:
                report.append(
                    Violation("stochasticity", name, joint, f"row sums to {total!r}, not 1")
                )
            if s in form.failure and row[s] != 1.0:
                report.append(
                    Violation("absorption", name, joint, f"P(s|s,a) = {row[s]!r}, failure states must self-loop")
                )
    return report


@dataclass(frozen=True, eq=False)
class InstanceGame:
    """A game form with stage payoffs, discount and initial state.

    ``payoffs[s]`` has shape ``(n_joint(s), n_players)`` for non-failure
    states and is ``None`` on failure states.
    """

    form: GameForm
    payoffs: tuple[np.ndarray | None, ...]
    discount: float
    initial: int

    def __post_init__(self):
        form = self.form
        if not (0.0 < float(self.discount) < 1.0):
            raise InstanceError(f"discount out of range: {self.discount!r} not in (0, 1)")
        object.__setattr__(self, "discount", float(self.discount))
        if not 0 <= int(self.initial) < form.n_states:
            raise InstanceError(f"initial state index {self.initial} out of range")
        object.__setattr__(self, "initial", int(self.initial))
        if self.initial in form.failure:
            raise InstanceError(f"initial state {form.states[self.initial]!r} is a failure state")
        if len(self.payoffs) != form.n_states:
            raise InstanceError("payoffs must be listed for every state (None on failure states)")
        blocks = []
        for s, u in enumerate(self.payoffs):
            if s in form.failure:
                if u is not None:
                    raise InstanceError(
                        f"payoff defined on failure state {form.states[s]!r}"
                    )
                blocks.append(None)
                continue
            u = _frozen(u)
            if u.shape != (form.n_joint(s), form.n_players):
                raise InstanceError(
                    f"payoff block for {form.states[s]!r} has shape {u.shape}"
                )
            if not np.all(np.isfinite(u)):
                raise InstanceError(f"non-finite payoff at state {form.states[s]!r}")
            blocks.append(u)
        object.__setattr__(self, "payoffs", tuple(blocks))

    @property
    def ubar(self) -> float:
        """Largest absolute stage payoff."""
        vals = [float(np.max(np.abs(u))) for u in self.payoffs if u is not None and u.size]
        return max(vals, default=0.0)

    def with_initial(self, state: str | int) -> "InstanceGame":
        return InstanceGame(self.form, self.payoffs, self.discount, self.form.state_index(state))

    def map_payoffs(self, fn: Callable[[np.ndarray], np.ndarray]) -> "InstanceGame":
        blocks = tuple(None if u is None else fn(np.array(u)) for u in self.payoffs)
        return InstanceGame(self.form, blocks, self.discount, self.initial)

    def affine_payoffs(self, alpha: float, beta: float) -> "InstanceGame":
        return self.map_payoffs(lambda u: alpha * u + beta)

    def __eq__(self, other):
        if not isinstance(other, InstanceGame):
            return NotImplemented
        if self.form != other.form or self.discount != other.discount or self.initial != other.initial:
            return False
        for a, b in zip(self.payoffs, other.payoffs):
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True

    __hash__ = None


@dataclass(frozen=True, eq=False)
class StationaryProfile:
    """Per-player, per-state action distributions.

    ``policy[i][s]`` is a distribution over ``form.actions[s][i]``.  Entries
    on failure states are carried along but never used.
    """

    policy: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "policy", tuple(tuple(_frozen(p) for p in per_player) for per_player in self.policy)
        )

    @classmethod
    def pure(cls, form: GameForm, choices: Sequence[Sequence[int]]) -> "StationaryProfile":
        """Deterministic profile; ``choices[i][s]`` is an action index."""
        policy = []
        for i in range(form.n_players):
            row = []
            for s in range(form.n_states):
                dist = np.zeros(len(form.actions[s][i]))
                dist[int(choices[i][s]) if s not in form.failure else 0] = 1.0
                row.append(dist)
            policy.append(tuple(row))
        return cls(tuple(policy))

    @classmethod
    def uniform(cls, form: GameForm) -> "StationaryProfile":
        return cls(
            tuple(
                tuple(np.full(len(form.actions[s][i]), 1.0 / len(form.actions[s][i])) for s in range(form.n_states))
                for i in range(form.n_players)
            )
        )

    @property
    def choices(self) -> tuple[tuple[int, ...], ...] | None:
        """Action indices if the profile is deterministic, else ``None``."""
        out = []
        for per_player in self.policy:
            row = []
            for dist in per_player:
                nz = np.flatnonzero(dist)
                if len(nz) != 1 or dist[nz[0]] != 1.0:
                    return None
                row.append(int(nz[0]))
            out.append(tuple(row))
        return tuple(out)

    def replace_player(self, i: int, policy: Sequence[np.ndarray]) -> "StationaryProfile":
        rows = list(self.policy)
        rows[i] = tuple(policy)
        return StationaryProfile(tuple(rows))

    def check(self, form: GameForm, tol: float = ROW_SUM_TOL) -> None:
        """Raise ``ValueError`` unless every non-failure distribution is valid."""
        if len(self.policy) != form.n_players:
            raise ValueError("profile has the wrong number of players")
        for i, per_player in enumerate(self.policy):
            if len(per_player) != form.n_states:
                raise ValueError(f"player {form.players[i]!r}: wrong number of states")
            for s in form.nonfailure:
                dist = per_player[s]
                if dist.shape != (len(form.actions[s][i]),):
                    raise ValueError(
                        f"player {form.players[i]!r} at {form.states[s]!r}: support outside action set"
                    )
                if np.any(dist < 0) or abs(math.fsum(dist) - 1.0) > tol:
                    raise ValueError(
                        f"player {form.players[i]!r} at {form.states[s]!r}: not a distribution"
                    )

    def __eq__(self, other):
        if not isinstance(other, StationaryProfile):
            return NotImplemented
        return len(self.policy) == len(other.policy) and all(
            len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))
            for a, b in zip(self.policy, other.policy)
        )

    __hash__ = None


@dataclass(frozen=True)
class InducedChain:
    """State-to-state kernel induced by a stationary profile.

    ``weights[s]`` are joint-action probabilities and ``joint_support[s]``
    marks joint actions every player plays with positive probability.
    ``support`` is the exact support graph: ``support[s, t]`` is true iff
    some supported joint action moves ``s`` to ``t`` with positive probability.
    """

    matrix: np.ndarray
    support: np.ndarray
    weights: tuple[np.ndarray, ...]
    joint_support: tuple[np.ndarray, ...]


def induced_chain(form: GameForm, profile: StationaryProfile) -> InducedChain:
    n = form.n_states
    matrix = np.zeros((n, n))
    support = np.zeros((n, n), dtype=bool)
    weights, masks = [], []
    for s in range(n):
        if s in form.failure:
            w = np.zeros(form.n_joint(s))
            w[0] = 1.0
            mask = w > 0
        else:
            w = np.ones(1)
            mask = np.ones(1, dtype=bool)
            for i in range(form.n_players):
                dist = profile.policy[i][s]
                w = np.outer(w, dist).ravel()
                mask = np.outer(mask, dist > 0).ravel()
        weights.append(w)
        masks.append(mask)
        block = form.transition[s]
        matrix[s] = w @ block
        support[s] = np.any(block[mask] > 0, axis=0)
    return InducedChain(matrix, support, tuple(weights), tuple(masks))


def _decision_slots(form: GameForm, players: Sequence[int]) -> list[tuple[int, int]]:
    return [(i, s) for i in players for s in form.nonfailure]


def count_pure_profiles(form: GameForm) -> int:
    return math.prod(len(form.actions[s][i]) for i, s in _decision_slots(form, range(form.n_players)))


def count_player_policies(form: GameForm, player: int) -> int:
    return math.prod(len(form.actions[s][player]) for s in form.nonfailure)


def enumerate_pure_profiles(form: GameForm, cap: int = DEFAULT_ENUMERATION_CAP) -> Iterator[StationaryProfile]:
    """All deterministic stationary profiles in lexicographic index order.

    Decision slots are ordered player-major, then by state; the last slot
    varies fastest.  The cap is checked before anything is yielded.
    """
    size = count_pure_profiles(form)
    if size > cap:
        raise EnumerationCapError(size, cap)
    slots = _decision_slots(form, range(form.n_players))
    ranges = [range(len(form.actions[s][i])) for i, s in slots]

    def gen():
        for combo in itertools.product(*ranges):
            choices = [[0] * form.n_states for _ in range(form.n_players)]
            for (i, s), a in zip(slots, combo):
                choices[i][s] = a
            yield StationaryProfile.pure(form, choices)

    return gen()


def enumerate_player_policies(
    form: GameForm, player: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> Iterator[tuple[int, ...]]:
    """Deterministic policies of one player as per-state action indices."""
    size = count_player_policies(form, player)
    if size > cap:
        raise EnumerationCapError(size, cap)
    states = form.nonfailure
    ranges = [range(len(form.actions[s][player])) for s in states]

    def gen():
        for combo in itertools.product(*ranges):
            row = [0] * form.n_states
            for s, a in zip(states, combo):
                row[s] = a
            yield tuple(row)

    return gen()


def pure_policy(form: GameForm, player: int, choice: Sequence[int]) -> tuple[np.ndarray, ...]:
    """Per-state one-hot distributions for a single player."""
    out = []
    for s in range(form.n_states):
        dist = np.zeros(len(form.actions[s][player]))
        dist[0 if s in form.failure else int(choice[s])] = 1.0
        out.append(dist)
    return tuple(out)


def pure_profile_id(form: GameForm, choices: Sequence[Sequence[int]]) -> int:
    """Position of a deterministic profile in :func:`enumerate_pure_profiles` order."""
    idx = 0
    for i, s in _decision_slots(form, range(form.n_players)):
        idx = idx * len(form.actions[s][i]) + int(choices[i][s])
    return idx


def profile_from_id(form: GameForm, pid: int) -> StationaryProfile:
    slots = _decision_slots(form, range(form.n_players))
    size = count_pure_profiles(form)
    if not 0 <= pid < size:
        raise ValueError(f"profile id {pid} out of range [0, {size})")
    choices = [[0] * form.n_states for _ in range(form.n_players)]
    for i, s in reversed(slots):
        pid, choices[i][s] = divmod(pid, len(form.actions[s][i]))
    return StationaryProfile.pure(form, choices)
