"""Bank-run game with absorbing failure and the weak-type withdrawal veto.

Reserves are measured in units of the promised payment ``d``.  In each
period the remaining depositors choose W (withdraw) or S (stay); with
``m`` withdrawals at reserve level ``k`` units the bank fails iff
``m >= k``.  In a failing period withdrawers are served in a uniformly
random arrival order until reserves run out; unpaid withdrawers and all
stayers receive the liquidation payoff.  Each completed period spent
staying costs ``c_w`` (weak) or ``c_s`` (strong); costs stop accruing at
the failure date.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from . import streams
from .equilibrium import CPDOrder, PenaltyOrder, best_responses
from .game import GameForm, InstanceGame, StationaryProfile, pure_policy
from .performance import FailureCompletion

__all__ = [
    "BankRunParams",
    "WithdrawalIncentive",
    "DepositorStrategy",
    "BankRunGame",
    "SimulationResult",
    "KnifeEdgeReport",
    "weak_withdraw_br",
    "collapse_bound",
    "knife_edge_failure_probability",
    "build_bankrun",
    "simulate_run",
    "knife_edge_check",
    "everyone_stays",
    "all_withdraw_from",
    "weak_withdraw_strong_stay",
    "withdraw_at_knife_edge",
]

EXACT_MAX_DEPOSITORS = 3
# with one reserve unit and known types the exact game has two states, so
# the knife-edge cross-check can afford a few more depositors
KNIFE_EDGE_EXACT_MAX = 6
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class BankRunParams:
    """Primitives of the bank-run game.

    Construction enforces the hard constraints (``0 <= ell < d``,
    ``0 <= c_s <= c_w``, ``L0 > 0``, ``p`` in [0, 1]).  The strict
    inequalities of the model's parameter region are reported by
    :meth:`region_violations` instead, so boundary cases stay expressible.
    """

    N: int
    p: float
    d: float
    ell: float
    c_w: float
    c_s: float
    L0: float
    T_max: int = 50
    discount: float = 0.95

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("need at least one depositor")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"weak-type probability {self.p!r} outside [0, 1]")
        if not self.d > 0:
            raise ValueError("promised payment d must be positive")
        if not 0.0 <= self.ell < self.d:
            raise ValueError(f"liquidation payoff must lie in [0, d), got {self.ell!r}")
        if not 0.0 <= self.c_s <= self.c_w:
            raise ValueError("waiting costs must satisfy 0 <= c_s <= c_w")
        if not self.L0 > 0:
            raise ValueError("initial reserves must be positive")
        if self.T_max < 1:
            raise ValueError("T_max must be >= 1")
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount out of range: {self.discount!r}")

    def region_violations(self) -> list[str]:
        out = []
        if not self.c_w > self.c_s:
            out.append("c_w > c_s fails")
        if not 0.0 < self.p < 1.0:
            out.append("p in (0, 1) fails")
        return out

    @property
    def reserve_units(self) -> int:
        """L0 / d, which must be a whole number."""
        ratio = self.L0 / self.d
        units = round(ratio)
        if units < 1 or abs(ratio - units) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"L0 / d = {ratio!r} is not a positive integer; reserves are quantized in units of d")
        return int(units)

    def to_record(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class WithdrawalIncentive:
    decision: str  # "strict_W", "strict_S" or "indifferent"
    withdraw_value: float
    stay_value: float

    @property
    def margin(self) -> float:
        return self.withdraw_value - self.stay_value

    def to_record(self) -> dict:
        return {"decision": self.decision, "withdraw_value": self.withdraw_value,
                "stay_value": self.stay_value, "margin": self.margin}


def weak_withdraw_br(params: BankRunParams, q: float, tol: float = _TIE_TOL) -> WithdrawalIncentive:
    """Weak type at the knife edge: ``d`` now versus the staying lottery.

    Staying pays one period of ``c_w`` and then ``d`` if the bank survives
    the period (probability ``1 - q``) or ``ell`` if it fails.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"failure belief {q!r} outside [0, 1]")
    stay = (1.0 - q) * (params.d - params.c_w) + q * (params.ell - params.c_w)
    diff = params.d - stay
    if abs(diff) <= tol:
        decision = "indifferent"
    else:
        decision = "strict_W" if diff > 0 else "strict_S"
    return WithdrawalIncentive(decision, params.d, stay)


def collapse_bound(p: float, N: int) -> float:
    """1 - (1 - p)^N: probability that at least one of N depositors is weak."""
    if not 0.0 <= p <= 1.0 or N < 1:
        raise ValueError("need p in [0, 1] and N >= 1")
    if p == 1.0:
        return 1.0
    return -math.expm1(N * math.log1p(-p))


def knife_edge_failure_probability(p: float, N: int, units: int = 1) -> float:
    """Exact failure probability at reserve level ``units`` when exactly the weak types withdraw."""
    return float(stats.binom.sf(units - 1, N, p))


@dataclass(frozen=True)
class DepositorStrategy:
    """Symmetric rule ``(weak, t, k) -> withdraw``.

    ``weak`` is a boolean array (runs x depositors), ``t`` the period
    (1-based) and ``k`` the reserve level in units of ``d`` per run.  The
    returned boolean array is broadcast to (runs x depositors).
    """

    name: str
    rule: Callable[[np.ndarray, int, np.ndarray], np.ndarray]

    def decide(self, weak: np.ndarray, t: int, k: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.rule(weak, t, k), dtype=bool), weak.shape)


def everyone_stays() -> DepositorStrategy:
    return DepositorStrategy("everyone_stays", lambda weak, t, k: np.zeros_like(weak))


def all_withdraw_from(period: int) -> DepositorStrategy:
    return DepositorStrategy(f"all_withdraw_from_{period}", lambda weak, t, k: np.full_like(weak, t >= period))


def weak_withdraw_strong_stay() -> DepositorStrategy:
    return DepositorStrategy("weak_withdraw_strong_stay", lambda weak, t, k: weak)


def withdraw_at_knife_edge(m: int = 1) -> DepositorStrategy:
    """Weak types withdraw once reserves are at most ``m`` units; strong types stay."""
    return DepositorStrategy(f"weak_withdraw_at_k<={m}", lambda weak, t, k: weak & (k[:, None] <= m))


@dataclass
class SimulationResult:
    runs: int
    seed: int
    T_max: int
    failures_at: np.ndarray  # failures_at[t-1] = runs failing in period t
    mean_payoff: dict[str, float]
    paid: np.ndarray
    reserves: np.ndarray
    shortfall: np.ndarray
    reserve_units: int
    unsettled: int
    strategy: str

    @property
    def survival(self) -> np.ndarray:
        return (self.runs - np.cumsum(self.failures_at)) / self.runs

    @property
    def failure_frequency(self) -> np.ndarray:
        return self.failures_at / self.runs

    @property
    def total_failure_frequency(self) -> float:
        return float(self.failures_at.sum() / self.runs)

    def frequency_stderr(self, t: int | None = None) -> float:
        f = self.total_failure_frequency if t is None else float(self.failure_frequency[t - 1])
        return math.sqrt(f * (1.0 - f) / self.runs)

    @property
    def accounting_ok(self) -> bool:
        return bool(np.all(self.paid + self.reserves + self.shortfall == self.reserve_units))

    def to_csv(self) -> str:
        lines = ["t,survival,failures"]
        for t, (s, f) in enumerate(zip(self.survival, self.failures_at), start=1):
            lines.append(f"{t},{s!r},{int(f)}")
        return "\n".join(lines) + "\n"

    def to_record(self) -> dict:
        return {
            "runs": self.runs,
            "seed": self.seed,
            "strategy": self.strategy,
            "failure_frequency": self.total_failure_frequency,
            "failure_stderr": self.frequency_stderr(),
            "failures_at": [int(x) for x in self.failures_at],
            "survival": [float(x) for x in self.survival],
            "mean_payoff": self.mean_payoff,
            "unsettled_depositors": self.unsettled,
            "accounting_ok": self.accounting_ok,
        }


def simulate_run(
    params: BankRunParams, strategy: DepositorStrategy, runs: int, seed: int, stream: int = 1
) -> SimulationResult:
    """Simulate ``runs`` independent banks; run ``r`` uses only the stream keyed by (seed, r).

    Depositors still in the bank at ``T_max`` without failure are left
    unsettled: they keep the costs they accrued and are counted in
    ``unsettled``.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    n = params.N
    units = params.reserve_units
    keys = streams.run_keys(seed, np.arange(runs, dtype=np.uint64), stream)
    weak = np.stack([streams.uniforms(keys, 0, i) < params.p for i in range(n)], axis=1)
    cost = np.where(weak, params.c_w, params.c_s)

    k = np.full(runs, units, dtype=np.int64)
    remaining = np.ones((runs, n), dtype=bool)
    alive = np.ones(runs, dtype=bool)
    payoff = np.zeros((runs, n))
    paid = np.zeros(runs, dtype=np.int64)
    shortfall = np.zeros(runs, dtype=np.int64)
    failures_at = np.zeros(params.T_max, dtype=np.int64)

    for t in range(1, params.T_max + 1):
        active = alive & remaining.any(axis=1)
        if not active.any():
            break
        dec = strategy.decide(weak, t, k) & remaining & active[:, None]
        stay = remaining & ~dec & active[:, None]
        m = dec.sum(axis=1)
        fails = active & (m >= k)
        ok = active & ~fails

        payoff -= np.where(stay & ok[:, None], cost, 0.0)
        payoff += np.where(dec & ok[:, None], params.d, 0.0)
        paid += np.where(ok, m, 0)

        if fails.any():
            arrival = np.stack([streams.uniforms(keys, t, n + i) for i in range(n)], axis=1)
            ahead = (dec[:, None, :] & (arrival[:, None, :] < arrival[:, :, None])).sum(axis=2)
            served = dec & (ahead < k[:, None]) & fails[:, None]
            unpaid = dec & ~served & fails[:, None]
            payoff += np.where(served, params.d, 0.0)
            payoff += np.where(unpaid | (stay & fails[:, None]), params.ell, 0.0)
            paid += np.where(fails, k, 0)
            shortfall += np.where(fails, m - k, 0)
            failures_at[t - 1] = int(fails.sum())
            remaining &= ~fails[:, None]

        k = np.where(active, k - m, k)
        remaining &= ~dec
        alive &= ~fails

    mean_payoff = {}
    for label, mask in (("w", weak), ("s", ~weak)):
        mean_payoff[label] = float(payoff[mask].mean()) if mask.any() else float("nan")
    unsettled = int((remaining & alive[:, None]).sum())
    return SimulationResult(
        runs=runs, seed=seed, T_max=params.T_max, failures_at=failures_at, mean_payoff=mean_payoff,
        paid=paid, reserves=k, shortfall=shortfall, reserve_units=units, unsettled=unsettled,
        strategy=strategy.name,
    )


@dataclass
class BankRunGame:
    """Exact finite game; ``labels[s]`` is ``(k, remaining, types)`` or a marker string."""

    instance: InstanceGame
    labels: tuple
    knife_edge_states: frozenset[int]
    params: BankRunParams

    def state_of(self, k: int, remaining, types) -> int:
        return self.labels.index((k, tuple(bool(x) for x in remaining), tuple(types)))


def _state_name(label) -> str:
    if isinstance(label, str):
        return label
    k, remaining, types = label
    inside = "".join("1" if r else "0" for r in remaining)
    return f"k={k}|in={inside}|types={''.join(types)}"


def build_bankrun(
    params: BankRunParams,
    m_threshold: int = 1,
    types: tuple[str, ...] | None = None,
    max_depositors: int = EXACT_MAX_DEPOSITORS,
) -> BankRunGame:
    """Exact instance game for at most three depositors.

    States are (reserve units, remaining depositors, type profile) plus a
    single failure state.  Without ``types`` a payoff-free nature state
    draws the type profile first; with ``types`` the game starts at full
    reserves with that profile.  Payoffs are attached to the transition
    that realizes them: ``d`` on a successful withdrawal, ``-c`` for each
    period survived while staying, and ``ell`` (or the expected
    arrival-order payment for withdrawers) on the transition into failure.  States with ``1 <= k <= m_threshold``
    and someone left are reported as knife-edge states.
    """
    n = params.N
    if n > max_depositors:
        raise ValueError(f"exact game limited to N <= {max_depositors} (state-space cap), got {n}")
    if m_threshold < 1:
        raise ValueError("m_threshold must be >= 1")
    units = params.reserve_units
    full = tuple([True] * n)

    if types is None:
        profiles = []
        for combo in itertools.product("ws", repeat=n):
            prob = math.prod(params.p if c == "w" else 1.0 - params.p for c in combo)
            if prob > 0:
                profiles.append((combo, prob))
        start = ["start"]
        frontier = [(units, full, combo) for combo, _ in profiles]
    else:
        types = tuple(types)
        if len(types) != n or any(t not in "ws" for t in types):
            raise ValueError("types must list 'w' or 's' for every depositor")
        profiles = None
        start = []
        frontier = [(units, full, types)]

    labels: list = start + []
    seen = set()
    order = []
    while frontier:
        label = frontier.pop(0)
        if label in seen:
            continue
        seen.add(label)
        order.append(label)
        k, remaining, combo = label
        inside = [i for i in range(n) if remaining[i]]
        for choice in itertools.product((True, False), repeat=len(inside)):
            m = sum(choice)
            if m >= k:
                continue
            left = list(remaining)
            for i, w in zip(inside, choice):
                if w:
                    left[i] = False
            frontier.append((k - m, tuple(left), combo))
    labels = start + order + ["F"]
    index = {lab: s for s, lab in enumerate(labels)}
    fail = len(labels) - 1
    n_states = len(labels)

    actions, blocks, payoffs = [], [], []
    for s, label in enumerate(labels):
        if label == "F":
            actions.append(tuple(("-",) for _ in range(n)))
            row = np.zeros((1, n_states))
            row[0, fail] = 1.0
            blocks.append(row)
            payoffs.append(None)
            continue
        if label == "start":
            actions.append(tuple(("-",) for _ in range(n)))
            row = np.zeros((1, n_states))
            for combo, prob in profiles:
                row[0, index[(units, full, combo)]] = prob
            blocks.append(row)
            payoffs.append(np.zeros((1, n)))
            continue
        k, remaining, combo = label
        acts = tuple(("W", "S") if remaining[i] else ("-",) for i in range(n))
        actions.append(acts)
        joints = list(itertools.product(*(range(len(a)) for a in acts)))
        block = np.zeros((len(joints), n_states))
        pay = np.zeros((len(joints), n))
        for j, joint in enumerate(joints):
            withdraw = [remaining[i] and joint[i] == 0 for i in range(n)]
            m = sum(withdraw)
            failing = m >= k
            if failing:
                block[j, fail] = 1.0
            else:
                left = tuple(remaining[i] and not withdraw[i] for i in range(n))
                block[j, index[(k - m, left, combo)]] = 1.0
            for i in range(n):
                if not remaining[i]:
                    continue
                c = params.c_w if combo[i] == "w" else params.c_s
                if withdraw[i]:
                    pay[j, i] = params.d if not failing else (k / m) * params.d + (1 - k / m) * params.ell
                else:
                    pay[j, i] = params.ell if failing else -c
        blocks.append(block)
        payoffs.append(pay)

    form = GameForm(
        states=tuple(_state_name(lab) for lab in labels),
        players=tuple(f"d{i + 1}" for i in range(n)),
        actions=tuple(actions),
        transition=tuple(blocks),
        failure=frozenset({fail}),
    )
    game = InstanceGame(form, tuple(payoffs), params.discount, 0)
    knife = frozenset(
        s for s, lab in enumerate(labels)
        if isinstance(lab, tuple) and 1 <= lab[0] <= m_threshold and any(lab[1])
    )
    return BankRunGame(game, tuple(labels), knife, params)


def _symmetric_policy(bank: BankRunGame, player: int, withdraw_if_weak: bool = True) -> tuple[np.ndarray, ...]:
    """Weak types withdraw wherever they can, strong types always stay."""
    form = bank.instance.form
    choice = [0] * form.n_states
    for s, lab in enumerate(bank.labels):
        if isinstance(lab, tuple) and lab[1][player]:
            weak = lab[2][player] == "w"
            choice[s] = 0 if (weak and withdraw_if_weak) else 1
    return pure_policy(form, player, choice)


@dataclass
class KnifeEdgeReport:
    params: BankRunParams
    q: float
    q_source: str
    incentive: WithdrawalIncentive
    applicable: bool
    bound: float
    frequency: float
    stderr: float
    stochastic_pass: bool
    exact: list[dict] | None
    exact_pass: bool | None

    @property
    def passed(self) -> bool | None:
        if not self.applicable:
            return None
        return self.stochastic_pass and self.exact_pass is not False

    def to_record(self) -> dict:
        return {
            "params": self.params.to_record(),
            "applicable": self.applicable,
            "passed": self.passed,
            "legs": {
                "incentive": {**self.incentive.to_record(), "q": self.q, "q_source": self.q_source,
                              "pass": self.incentive.decision == "strict_W"},
                "collapse": {"frequency": self.frequency, "stderr": self.stderr, "bound": self.bound,
                             "margin": self.frequency - self.bound + 4 * self.stderr,
                             "pass": self.stochastic_pass},
                "exact": {"applicable": self.exact is not None, "pass": self.exact_pass,
                          "type_profiles": self.exact},
            },
        }


def knife_edge_check(
    params: BankRunParams,
    q: float | None = None,
    runs: int = 100_000,
    seed: int = 0,
) -> KnifeEdgeReport:
    """Check the weak-type withdrawal veto at reserves ``L0 = d``.

    (a) the incentive inequality at belief ``q`` (estimated by simulating
    the other N-1 depositors when ``q`` is None); (b) simulated failure
    frequency in period 1 against ``1 - (1-p)^N`` minus four standard
    errors; (c) for N <= 3, exact best responses of a weak depositor at the
    knife-edge state, with the others playing weak-withdraw/strong-stay.
    Leg (c) runs for N <= 6 and is skipped above that.
    """
    if params.reserve_units != 1:
        raise ValueError("knife-edge check needs L0 in (0, d], i.e. L0 = d with quantized reserves")
    if q is None:
        if params.N == 1:
            q_val = 0.0
        else:
            others = dataclasses.replace(params, N=params.N - 1)
            q_val = float(simulate_run(others, weak_withdraw_strong_stay(), runs, seed, stream=2).failure_frequency[0])
        source = "simulation"
    else:
        q_val, source = float(q), "fixed"
    incentive = weak_withdraw_br(params, q_val)
    applicable = incentive.decision == "strict_W"

    sim = simulate_run(params, weak_withdraw_strong_stay(), runs, seed)
    freq = float(sim.failure_frequency[0])
    stderr = sim.frequency_stderr(1)
    bound = collapse_bound(params.p, params.N)
    stochastic_pass = freq >= bound - 4.0 * stderr

    exact, exact_pass = None, None
    if params.N <= KNIFE_EDGE_EXACT_MAX:
        exact = _exact_weak_best_response(params)
        exact_pass = all(entry["withdraw_is_best"] for entry in exact)
    return KnifeEdgeReport(params, q_val, source, incentive, applicable, bound, freq, stderr,
                           stochastic_pass, exact, exact_pass)


def _exact_weak_best_response(params: BankRunParams) -> list[dict]:
    """Best responses of a weak depositor 1 at the knife edge, per type profile of the others.

    Uses plain expected discounted payoff (penalty order with M = 0): the
    liquidation payoff is part of the game, so no completion is needed.
    The CPD best response is recorded alongside for contrast.
    """
    out = []
    expected = PenaltyOrder(0.0, FailureCompletion.zero())
    cpd = CPDOrder()
    for rest in itertools.product("ws", repeat=params.N - 1):
        combo = ("w",) + rest
        weight = math.prod(params.p if c == "w" else 1.0 - params.p for c in rest)
        bank = build_bankrun(params, types=combo, max_depositors=KNIFE_EDGE_EXACT_MAX)
        profile = StationaryProfile(tuple(_symmetric_policy(bank, i) for i in range(params.N)))
        br = best_responses(bank.instance, profile, 0, expected)
        start = bank.instance.initial
        withdraw_best = all(policy[start] == 0 for policy in br.policies)
        cpd_br = best_responses(bank.instance, profile, 0, cpd)
        values = {policy[start]: br.values[policy].value for policy in br.values}
        out.append({
            "types": "".join(combo),
            "weight": weight,
            "withdraw_is_best": withdraw_best,
            "best_actions": sorted({"W" if p[start] == 0 else "S" for p in br.policies}),
            "withdraw_value": values.get(0),
            "best_stay_value": max(
                (br.values[p].value for p in br.values if p[start] == 1), default=None
            ),
            "cpd_best_actions": sorted({"W" if p[start] == 0 else "S" for p in cpd_br.policies}),
        })
    return out
