"""Survival-conditioned and unconditional discounted payoffs.

The conditional payoff is computed on the h-transformed chain: with
h(s) = P(T = inf | s), conditioning the trajectory on survival gives a
Markov chain on {h > 0} with action weights sigma(a|s) g(s,a) / h(s) and
kernel P(s'|s,a) h(s') / g(s,a), where g(s,a) = sum_{s' not in F} P(s'|s,a) h(s').
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import streams
from .continuation import TailCertificate, TailKind, classify_tail
from .game import InducedChain, InstanceGame, StationaryProfile, induced_chain

__all__ = [
    "CompletionMode",
    "FailureCompletion",
    "ConditionalValue",
    "MCResult",
    "conditional_payoff",
    "mc_conditional_payoff",
    "unconditional_payoff",
    "stage_rewards",
]

_VI_TOL = 1e-12
_COND_LIMIT = 1e12


class CompletionMode(enum.Enum):
    ZERO_AFTER_FAILURE = "ZeroAfterFailure"
    ABSORBING_CONSTANT = "AbsorbingConstant"
    TERMINAL_PENALTY = "TerminalPenalty"


@dataclass(frozen=True)
class FailureCompletion:
    """Extrinsic payoff rule for periods after failure.

    ``parameter`` is the per-period payoff for ``ABSORBING_CONSTANT`` and the
    lump sum paid at T for ``TERMINAL_PENALTY``; it must be 0 for
    ``ZERO_AFTER_FAILURE``.
    """

    mode: CompletionMode = CompletionMode.ZERO_AFTER_FAILURE
    parameter: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.parameter):
            raise ValueError("completion parameter must be finite")
        if self.mode is CompletionMode.ZERO_AFTER_FAILURE and self.parameter != 0.0:
            raise ValueError("ZeroAfterFailure takes no parameter")

    @classmethod
    def zero(cls) -> "FailureCompletion":
        return cls()

    @classmethod
    def absorbing(cls, kappa: float) -> "FailureCompletion":
        return cls(CompletionMode.ABSORBING_CONSTANT, float(kappa))

    @classmethod
    def terminal(cls, phi: float) -> "FailureCompletion":
        return cls(CompletionMode.TERMINAL_PENALTY, float(phi))

    @classmethod
    def parse(cls, text: str) -> "FailureCompletion":
        """Parse ``zero``, ``absorbing:K`` or ``terminal:PHI``."""
        name, _, arg = text.strip().partition(":")
        name = name.lower()
        try:
            if name == "zero" and not arg:
                return cls.zero()
            if name == "absorbing":
                return cls.absorbing(float(arg))
            if name == "terminal":
                return cls.terminal(float(arg))
        except ValueError:
            pass
        raise ValueError(f"bad completion {text!r}; use zero, absorbing:K or terminal:PHI")

    def value_at_failure(self, discount: float) -> float:
        """Discounted value, measured at time T, of everything paid from T on."""
        if self.mode is CompletionMode.ABSORBING_CONSTANT:
            return self.parameter / (1.0 - discount)
        if self.mode is CompletionMode.TERMINAL_PENALTY:
            return self.parameter
        return 0.0

    def to_record(self) -> dict:
        return {"mode": self.mode.value, "parameter": self.parameter}

    def label(self) -> str:
        if self.mode is CompletionMode.ZERO_AFTER_FAILURE:
            return "zero"
        prefix = "absorbing" if self.mode is CompletionMode.ABSORBING_CONSTANT else "terminal"
        return f"{prefix}:{self.parameter:g}"


@dataclass(frozen=True)
class ConditionalValue:
    """Extended-real conditional payoff; ``value`` is ``-inf`` iff survival is certified impossible."""

    value: float
    survival_mass: float
    method: str = "solve"

    @property
    def is_minus_infinity(self) -> bool:
        return self.value == -math.inf

    def to_record(self) -> dict:
        return {
            "value": "-inf" if self.is_minus_infinity else self.value,
            "survival_mass": self.survival_mass,
        }


def stage_rewards(game: InstanceGame, chain: InducedChain, player: int) -> np.ndarray:
    """Expected stage payoff r(s) = sum_a sigma(a|s) u_i(s,a); 0 on F."""
    r = np.zeros(game.form.n_states)
    for s in game.form.nonfailure:
        r[s] = chain.weights[s] @ game.payoffs[s][:, player]
    return r


def _discounted_solve(matrix: np.ndarray, reward: np.ndarray, discount: float) -> tuple[np.ndarray, str]:
    """Solve V = r + discount * P V, falling back to value iteration."""
    a = np.eye(len(reward)) - discount * matrix
    try:
        cond = np.linalg.cond(a)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise np.linalg.LinAlgError(f"condition number {cond:.3g}")
        return np.linalg.solve(a, reward), "solve"
    except np.linalg.LinAlgError:
        v = np.zeros(len(reward))
        while True:
            nxt = reward + discount * (matrix @ v)
            if np.max(np.abs(nxt - v), initial=0.0) < _VI_TOL:
                return nxt, "iteration"
            v = nxt


def conditional_payoff(
    game: InstanceGame,
    profile: StationaryProfile,
    player: int,
    tail: TailCertificate | None = None,
    chain: InducedChain | None = None,
) -> ConditionalValue:
    """E[sum_t delta^t u_i(s_t, a_t) | T = inf], or ``-inf`` if P(T = inf) = 0."""
    form = game.form
    chain = chain or induced_chain(form, profile)
    tail = tail or classify_tail(form, profile, game.initial, chain=chain)
    if tail.kind is TailKind.ALMOST_SURE_FAILURE:
        return ConditionalValue(-math.inf, 0.0, method="certified")

    live = sorted(tail.positive)
    h = tail.harmonic
    twisted = np.zeros((len(live), len(live)))
    reward = np.zeros(len(live))
    for k, s in enumerate(live):
        block = form.transition[s][:, live]
        g = block @ h[live]
        w = chain.weights[s] * g
        total = w.sum()
        sigma_t = w / total
        reward[k] = sigma_t @ game.payoffs[s][:, player]
        row = chain.weights[s] @ (block * h[live]) / total
        twisted[k] = row / row.sum()
    values, method = _discounted_solve(twisted, reward, game.discount)
    return ConditionalValue(float(values[live.index(game.initial)]), tail.survival_limit, method)


def unconditional_payoff(
    game: InstanceGame,
    profile: StationaryProfile,
    player: int,
    completion: FailureCompletion | None = None,
    chain: InducedChain | None = None,
) -> float:
    """Expected discounted payoff over the full chain under a failure completion.

    F is collapsed to one absorbing node worth ``completion.value_at_failure``
    at the failure date; the default completion pays nothing after failure.
    """
    completion = completion or FailureCompletion.zero()
    form = game.form
    chain = chain or induced_chain(form, profile)
    live = list(form.nonfailure)
    fail = sorted(form.failure)
    q = chain.matrix[np.ix_(live, live)]
    exit_mass = chain.matrix[np.ix_(live, fail)].sum(axis=1) if fail else np.zeros(len(live))
    reward = stage_rewards(game, chain, player)[live]
    reward = reward + game.discount * exit_mass * completion.value_at_failure(game.discount)
    values, _ = _discounted_solve(q, reward, game.discount)
    return float(values[live.index(game.initial)])


@dataclass(frozen=True)
class MCResult:
    """Rejection estimate of the payoff conditioned on survival through ``horizon``.

    ``estimate`` and ``stderr`` are ``None`` when no run survived.
    """

    estimate: float | None
    stderr: float | None
    accepted: int
    total: int
    seed: int
    horizon: int

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.total

    @property
    def no_survivors(self) -> bool:
        return self.accepted == 0

    def to_record(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "accepted": self.accepted,
            "total": self.total,
            "seed": self.seed,
            "horizon": self.horizon,
            "acceptance_rate": self.acceptance_rate,
            "no_survivors": self.no_survivors,
        }


class _Sampler:
    """Vectorised path simulator for one (game, profile, player).

    Cumulative tables are stored transposed, one column per (state, joint)
    row, so a batch gather yields contiguous per-category rows.
    """

    def __init__(self, game: InstanceGame, profile: StationaryProfile, player: int):
        form = game.form
        self.game = game
        self.player = player
        n = form.n_states
        self.n_players = form.n_players
        max_a = max(len(form.actions[s][i]) for s in range(n) for i in range(form.n_players))
        self.max_j = max_j = max(form.n_joint(s) for s in range(n))
        action_cum = np.full((form.n_players, n, max_a), np.inf)
        self.stride = np.zeros((form.n_players, n), dtype=np.int64)
        trans_cum = np.full((n, max_j, n), np.inf)
        self.reward = np.zeros(n * max_j)
        self.failed = np.zeros(n, dtype=bool)
        self.failed[list(form.failure)] = True
        for s in range(n):
            counts = form.action_counts(s)
            stride = 1
            for i in reversed(range(form.n_players)):
                self.stride[i, s] = stride
                stride *= counts[i]
            if s in form.failure:
                continue
            for i in range(form.n_players):
                dist = profile.policy[i][s]
                action_cum[i, s, : len(dist)] = streams.cumulative_table(dist)[0]
            k = form.n_joint(s)
            trans_cum[s, :k] = streams.cumulative_table(form.transition[s])
            self.reward[s * max_j: s * max_j + k] = game.payoffs[s][:, player]
        self.action_cum = [np.ascontiguousarray(action_cum[i].T) for i in range(form.n_players)]
        self.trans_cum = np.ascontiguousarray(trans_cum.reshape(n * max_j, n).T)

    def run(self, seed: int, run_ids: np.ndarray, horizon: int) -> tuple[np.ndarray, np.ndarray]:
        keys = streams.run_keys(seed, run_ids)
        state = np.full(len(run_ids), self.game.initial, dtype=np.int64)
        total = np.zeros(len(run_ids))
        alive = np.ones(len(run_ids), dtype=bool)
        for t in range(horizon):
            row = state * self.max_j
            for i in range(self.n_players):
                u = streams.uniforms(keys, t, i)
                a = streams.categorical(u, np.take(self.action_cum[i], state, axis=1))
                row += a * self.stride[i, state]
            total += np.where(alive, self.game.discount**t * self.reward[row], 0.0)
            u = streams.uniforms(keys, t, self.n_players)
            state = np.where(alive, streams.categorical(u, np.take(self.trans_cum, row, axis=1)), state)
            alive &= ~self.failed[state]
        return total, alive


def mc_conditional_payoff(
    game: InstanceGame,
    profile: StationaryProfile,
    player: int,
    horizon: int,
    runs: int,
    seed: int,
    workers: int = 1,
    chunk: int = 1 << 15,
) -> MCResult:
    """Monte Carlo oracle: average of sum_{t<H} delta^t u_i over paths with T > H.

    Run ``r`` draws only from the stream keyed by ``(seed, r)``, and per-run
    results are aggregated in run order, so the result depends on
    ``(seed, runs, horizon)`` alone.
    """
    if horizon < 1 or runs < 1:
        raise ValueError("horizon and runs must be >= 1")
    sampler = _Sampler(game, profile, player)
    bounds = [(lo, min(lo + chunk, runs)) for lo in range(0, runs, chunk)]

    def work(bound):
        lo, hi = bound
        return sampler.run(seed, np.arange(lo, hi, dtype=np.uint64), horizon)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    values = np.concatenate([p[0] for p in parts])
    alive = np.concatenate([p[1] for p in parts])
    kept = values[alive]
    if len(kept) == 0:
        return MCResult(None, None, 0, runs, seed, horizon)
    est = math.fsum(kept) / len(kept)
    stderr = float(np.std(kept, ddof=1) / math.sqrt(len(kept))) if len(kept) > 1 else 0.0
    return MCResult(est, stderr, int(len(kept)), runs, seed, horizon)
