"""Pure stationary Nash equilibria under the CPD order or a penalty order."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

from .continuation import (
    DEFAULT_HORIZON,
    DEFAULT_TOL,
    ContinuationProfile,
    Ordering,
    TailKind,
    continuation_profile,
    lex_compare_continuation,
    loss_from_profile,
)
from .evaluation import CPDValue, PenaltyConfig, cpd_compare, cpd_value, penalty_compare, penalty_value
from .game import (
    DEFAULT_ENUMERATION_CAP,
    EnumerationCapError,
    InstanceGame,
    StationaryProfile,
    count_pure_profiles,
    enumerate_player_policies,
    profile_from_id,
    pure_policy,
    pure_profile_id,
)
from .performance import FailureCompletion
from .viability import viab_profile_exists

__all__ = [
    "CPDOrder",
    "PenaltyOrder",
    "BestResponses",
    "EquilibriumReport",
    "LimitReport",
    "best_responses",
    "pure_nash",
    "penalty_limit_check",
    "admissibility_filter",
    "limit_counterexamples",
]


@dataclass(frozen=True)
class CPDOrder:
    horizon: int = DEFAULT_HORIZON
    tol: float = DEFAULT_TOL

    @property
    def id(self) -> str:
        return "CPD"

    def evaluate(self, game: InstanceGame, profile: StationaryProfile, player: int,
                 continuation: ContinuationProfile) -> CPDValue:
        return cpd_value(game, profile, player, self.horizon, continuation=continuation)

    def compare(self, a: CPDValue, b: CPDValue) -> Ordering:
        return cpd_compare(a, b, self.tol)

    def to_record(self) -> dict:
        return {"kind": "CPD", "horizon": self.horizon, "tol": self.tol}


@dataclass(frozen=True)
class PenaltyOrder:
    M: float
    completion: FailureCompletion = field(default_factory=FailureCompletion.zero)
    horizon: int = DEFAULT_HORIZON
    tol: float = DEFAULT_TOL

    @property
    def id(self) -> str:
        return f"Penalty(M={self.M:g}, completion={self.completion.label()})"

    def evaluate(self, game, profile, player, continuation):
        return penalty_value(game, profile, player, PenaltyConfig(self.M, self.completion), self.horizon,
                             continuation=continuation)

    def compare(self, a, b) -> Ordering:
        return penalty_compare(a, b, self.tol)

    def to_record(self) -> dict:
        return {"kind": "Penalty", "M": self.M, "completion": self.completion.to_record(),
                "horizon": self.horizon, "tol": self.tol}


Order = CPDOrder | PenaltyOrder


class _Cache:
    """Per-profile continuation and per-(profile, player) values, keyed by profile id."""

    def __init__(self, game: InstanceGame, order: Order):
        self.game, self.order = game, order
        self._cont: dict[int, tuple[StationaryProfile, ContinuationProfile]] = {}
        self._vals: dict[tuple[int, int], Any] = {}

    def profile(self, pid: int) -> tuple[StationaryProfile, ContinuationProfile]:
        if pid not in self._cont:
            prof = profile_from_id(self.game.form, pid)
            cont = continuation_profile(self.game.form, prof, self.game.initial, self.order.horizon)
            self._cont[pid] = (prof, cont)
        return self._cont[pid]

    def value(self, pid: int, player: int):
        key = (pid, player)
        if key not in self._vals:
            prof, cont = self.profile(pid)
            self._vals[key] = self.order.evaluate(self.game, prof, player, cont)
        return self._vals[key]


def _deviation_id(game: InstanceGame, choices, player: int, policy: Sequence[int]) -> int:
    rows = [list(c) for c in choices]
    rows[player] = list(policy)
    return pure_profile_id(game.form, rows)


@dataclass
class BestResponses:
    player: int
    policies: list[tuple[int, ...]]
    values: dict[tuple[int, ...], Any]
    indeterminate: bool


def best_responses(
    game: InstanceGame,
    profile: StationaryProfile,
    player: int,
    order: Order,
    cap: int = DEFAULT_ENUMERATION_CAP,
    _cache: _Cache | None = None,
) -> BestResponses:
    """All pure stationary policies of ``player`` not strictly beaten by another.

    Ties are kept; an indeterminate comparison never removes a policy but
    sets the ``indeterminate`` flag.
    """
    base = profile.choices
    if base is None:
        # opponents may mix; evaluate directly without the pure-profile cache
        return _best_responses_mixed(game, profile, player, order, cap)
    cache = _cache or _Cache(game, order)
    policies = list(enumerate_player_policies(game.form, player, cap))
    values = {p: cache.value(_deviation_id(game, base, player, p), player) for p in policies}
    return _maximal(order, player, policies, values)


def _best_responses_mixed(game, profile, player, order, cap) -> BestResponses:
    policies = list(enumerate_player_policies(game.form, player, cap))
    values = {}
    for p in policies:
        prof = profile.replace_player(player, pure_policy(game.form, player, p))
        cont = continuation_profile(game.form, prof, game.initial, order.horizon)
        values[p] = order.evaluate(game, prof, player, cont)
    return _maximal(order, player, policies, values)


def _maximal(order, player, policies, values) -> BestResponses:
    best, undecided = [], False
    for p in policies:
        beaten = False
        for q in policies:
            if q == p:
                continue
            got = order.compare(values[q], values[p])
            undecided |= got is Ordering.INDETERMINATE
            if got is Ordering.GREATER:
                beaten = True
                break
        if not beaten:
            best.append(p)
    return BestResponses(player, best, values, undecided)


@dataclass
class EquilibriumReport:
    """Pure equilibria with their deviation certificates.

    ``certificates[pid][player]`` lists ``(deviation_profile_id, ordering)``
    where the ordering compares the deviation against the equilibrium.
    """

    order_id: str
    equilibria: list[int]
    certificates: dict[int, dict[int, list[tuple[int, Ordering]]]]
    indeterminate: list[int]
    order: Any = None

    def to_record(self, game: InstanceGame | None = None) -> dict:
        rec = {
            "order": self.order.to_record() if self.order is not None else self.order_id,
            "equilibria": list(self.equilibria),
            "certificates": {
                str(pid): {
                    (game.form.players[i] if game else str(i)): [[dev, o.value] for dev, o in devs]
                    for i, devs in per.items()
                }
                for pid, per in self.certificates.items()
            },
            "indeterminate": list(self.indeterminate),
        }
        if game is not None:
            rec["choices"] = {
                str(pid): _named_choices(game, profile_from_id(game.form, pid).choices) for pid in self.equilibria
            }
        return rec


def _named_choices(game: InstanceGame, choices) -> dict:
    form = game.form
    return {
        p: {form.states[s]: form.actions[s][i][choices[i][s]] for s in form.nonfailure}
        for i, p in enumerate(form.players)
    }


def pure_nash(game: InstanceGame, order: Order, cap: int = DEFAULT_ENUMERATION_CAP) -> EquilibriumReport:
    """Enumerate every pure stationary profile and keep the unilateral-deviation-proof ones."""
    form = game.form
    size = count_pure_profiles(form)
    if size > cap:
        raise EnumerationCapError(size, cap)
    cache = _Cache(game, order)
    player_policies = [list(enumerate_player_policies(form, i, cap)) for i in range(form.n_players)]
    equilibria, certificates, undecided = [], {}, []
    for pid in range(size):
        choices = profile_from_id(form, pid).choices
        cert: dict[int, list[tuple[int, Ordering]]] = {}
        stable, flagged = True, False
        for i in range(form.n_players):
            current = cache.value(pid, i)
            devs = []
            for pol in player_policies[i]:
                if pol == tuple(choices[i]):
                    continue
                dev = _deviation_id(game, choices, i, pol)
                got = order.compare(cache.value(dev, i), current)
                flagged |= got is Ordering.INDETERMINATE
                devs.append((dev, got))
                if got is Ordering.GREATER:
                    stable = False
            cert[i] = devs
        if flagged:
            undecided.append(pid)
        if stable:
            equilibria.append(pid)
            certificates[pid] = cert
    return EquilibriumReport(order.id, equilibria, certificates, undecided, order)


def recheck_certificate(game: InstanceGame, order: Order, pid: int, player: int, deviation: int) -> Ordering:
    """Recompute one certificate entry from scratch."""
    cache = _Cache(game, order)
    return order.compare(cache.value(deviation, player), cache.value(pid, player))


@dataclass
class LimitReport:
    schedule: list[float]
    nash_by_M: dict[float, list[int]]
    cpd_nash: list[int]
    eventual: dict[int, float]
    vanished: dict[int, float]
    indeterminate: dict[float, list[int]]
    verdict: bool

    @property
    def determinate(self) -> bool:
        return not any(self.indeterminate.values())

    def to_record(self) -> dict:
        return {
            "schedule": self.schedule,
            "nash_by_M": {repr(m): ids for m, ids in self.nash_by_M.items()},
            "cpd_nash": self.cpd_nash,
            "eventual": {str(k): v for k, v in self.eventual.items()},
            "vanished": {str(k): v for k, v in self.vanished.items()},
            "indeterminate": {repr(m): ids for m, ids in self.indeterminate.items()},
            "verdict": self.verdict,
            "determinate": self.determinate,
        }


def penalty_limit_check(
    game: InstanceGame,
    schedule: Sequence[float],
    completion: FailureCompletion | None = None,
    horizon: int = DEFAULT_HORIZON,
    tol: float = DEFAULT_TOL,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> LimitReport:
    """Compare Nash sets of U - M L along ``schedule`` with the CPD Nash set.

    A profile counts as a limit point when it is an equilibrium for every
    scheduled M from some index on; ``eventual`` maps it to the first such M.
    The verdict is true iff every limit point is a CPD equilibrium.
    """
    schedule = [float(m) for m in schedule]
    if len(schedule) < 3:
        raise ValueError("penalty schedule needs at least 3 values")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("penalty schedule must be strictly increasing")
    completion = completion or FailureCompletion.zero()
    nash_by_M, indeterminate = {}, {}
    for m in schedule:
        rep = pure_nash(game, PenaltyOrder(m, completion, horizon, tol), cap)
        nash_by_M[m] = rep.equilibria
        indeterminate[m] = rep.indeterminate
    cpd = pure_nash(game, CPDOrder(horizon, tol), cap).equilibria

    eventual, vanished = {}, {}
    members = {pid for ids in nash_by_M.values() for pid in ids}
    for pid in sorted(members):
        inside = [pid in nash_by_M[m] for m in schedule]
        if inside[-1]:
            k = len(schedule) - 1
            while k > 0 and inside[k - 1]:
                k -= 1
            eventual[pid] = schedule[k]
        else:
            k = max(j for j, flag in enumerate(inside) if flag)
            vanished[pid] = schedule[k + 1]
    verdict = set(eventual) <= set(cpd)
    return LimitReport(schedule, nash_by_M, cpd, eventual, vanished, indeterminate, verdict)


def limit_counterexamples(
    game: InstanceGame, report: LimitReport, horizon: int = DEFAULT_HORIZON, tol: float = DEFAULT_TOL
) -> list[dict]:
    """Explain every eventual penalty equilibrium that is not a CPD equilibrium.

    For each such profile, lists the CPD-improving unilateral deviations
    with the continuation ordering, both losses and whether the deviation
    is penalized by a larger loss (which keeps U - M L from ever preferring it).
    """
    order = CPDOrder(horizon, tol)
    cache = _Cache(game, order)
    out = []
    for pid in sorted(set(report.eventual) - set(report.cpd_nash)):
        choices = profile_from_id(game.form, pid).choices
        for i in range(game.form.n_players):
            base = cache.value(pid, i)
            for pol in enumerate_player_policies(game.form, i):
                dev = _deviation_id(game, choices, i, pol)
                got = cache.value(dev, i)
                if order.compare(got, base) is not Ordering.GREATER:
                    continue
                l_eq = loss_from_profile(base.continuation)
                l_dev = loss_from_profile(got.continuation)
                out.append({
                    "profile": pid,
                    "player": i,
                    "deviation": dev,
                    "continuation": lex_compare_continuation(got.continuation, base.continuation, tol).value,
                    "loss_profile": l_eq.value,
                    "loss_deviation": l_dev.value,
                    "loss_inverted": l_dev.lo > l_eq.hi,
                })
    return out


def admissibility_filter(game: InstanceGame, equilibria: Sequence[int], horizon: int = DEFAULT_HORIZON) -> list[int]:
    """Drop equilibria with avoidable failure.

    When some profile avoids F surely from the initial state, only
    equilibria with certified almost-sure survival are kept; otherwise
    failure is unavoidable and nothing is dropped.
    """
    exists, _ = viab_profile_exists(game.form, game.initial)
    if not exists:
        return list(equilibria)
    kept = []
    for pid in equilibria:
        cont = continuation_profile(game.form, profile_from_id(game.form, pid), game.initial, horizon)
        if cont.tail.kind is TailKind.ALMOST_SURE_SURVIVAL:
            kept.append(pid)
    return kept
