"""Lexicographic CPD evaluation, penalty games and completion experiments."""

from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .continuation import (
    DEFAULT_HORIZON,
    DEFAULT_TOL,
    ContinuationProfile,
    LossEstimate,
    Ordering,
    TailKind,
    continuation_profile,
    lex_compare_continuation,
    loss_from_profile,
)
from .game import DEFAULT_ENUMERATION_CAP, InstanceGame, StationaryProfile, enumerate_pure_profiles, induced_chain
from .performance import ConditionalValue, FailureCompletion, conditional_payoff, unconditional_payoff

__all__ = [
    "CPDValue",
    "FailureTimeLaw",
    "TailCriterion",
    "CONTINUATION_CRITERION",
    "SURVIVAL_LIMIT_CRITERION",
    "PenaltyConfig",
    "PenaltyValue",
    "cpd_value",
    "cpd_compare",
    "compare_performance",
    "decoupled_compare",
    "penalty_value",
    "penalty_compare",
    "dominance_threshold",
    "penalty_sweep",
    "SweepResult",
    "completion_sensitivity",
    "CompletionReport",
]


@dataclass(frozen=True, eq=False)
class CPDValue:
    continuation: ContinuationProfile
    performance: ConditionalValue

    def to_record(self) -> dict:
        return {"continuation": self.continuation.to_record(), "performance": self.performance.to_record()}


def cpd_value(
    game: InstanceGame,
    profile: StationaryProfile,
    player: int,
    horizon: int = DEFAULT_HORIZON,
    continuation: ContinuationProfile | None = None,
) -> CPDValue:
    continuation = continuation or continuation_profile(game.form, profile, game.initial, horizon)
    perf = conditional_payoff(game, profile, player, tail=continuation.tail)
    return CPDValue(continuation, perf)


def _compare_reals(a: float, b: float, tol: float) -> Ordering:
    if a == b:
        return Ordering.EQUAL
    if a == -math.inf or b == -math.inf:
        return Ordering.LESS if a == -math.inf else Ordering.GREATER
    if abs(a - b) <= tol:
        return Ordering.EQUAL
    return Ordering.GREATER if a > b else Ordering.LESS


def compare_performance(p1: ConditionalValue, p2: ConditionalValue, tol: float = DEFAULT_TOL) -> Ordering:
    """Extended-real comparison: ``-inf`` sits below every finite value."""
    return _compare_reals(p1.value, p2.value, tol)


def cpd_compare(v1: CPDValue, v2: CPDValue, tol: float = DEFAULT_TOL) -> Ordering:
    """Continuation first; performance only breaks continuation ties."""
    first = lex_compare_continuation(v1.continuation, v2.continuation, tol)
    if first is not Ordering.EQUAL:
        return first
    return compare_performance(v1.performance, v2.performance, tol)


@dataclass(frozen=True)
class FailureTimeLaw:
    """The law of T as seen by a tail criterion: nothing else is exposed."""

    survival: tuple[float, ...]
    limit: float
    kind: TailKind

    @classmethod
    def of(cls, c: ContinuationProfile) -> "FailureTimeLaw":
        return cls(tuple(float(x) for x in c.survival), float(c.tail.survival_limit), c.tail.kind)


@dataclass(frozen=True)
class TailCriterion:
    """A totally ordered functional of the failure-time law."""

    id: str
    evaluate: Callable[[FailureTimeLaw], Any]

    def value(self, c: ContinuationProfile) -> Any:
        return self.evaluate(FailureTimeLaw.of(c))


@functools.total_ordering
@dataclass(frozen=True)
class _LexKey:
    law: FailureTimeLaw
    tol: float = DEFAULT_TOL

    def _cmp(self, other: "_LexKey") -> int:
        a, b = np.asarray(self.law.survival), np.asarray(other.law.survival)
        if len(a) != len(b):
            raise ValueError(f"horizon mismatch: {len(a)} vs {len(b)}")
        idx = np.flatnonzero(np.abs(a - b) > self.tol)
        if len(idx):
            return 1 if a[idx[0]] > b[idx[0]] else -1
        d = self.law.limit - other.law.limit
        return 0 if abs(d) <= self.tol else (1 if d > 0 else -1)

    def __eq__(self, other):
        return self._cmp(other) == 0

    def __lt__(self, other):
        return self._cmp(other) < 0


CONTINUATION_CRITERION = TailCriterion("continuation_profile", _LexKey)
SURVIVAL_LIMIT_CRITERION = TailCriterion("survival_limit", lambda law: law.limit)


def decoupled_compare(
    v1: CPDValue, v2: CPDValue, criterion: TailCriterion = CONTINUATION_CRITERION, tol: float = DEFAULT_TOL
) -> Ordering:
    """Lexicographic comparison of (tail criterion, conditional payoff)."""
    t1, t2 = criterion.value(v1.continuation), criterion.value(v2.continuation)
    if isinstance(t1, float) and isinstance(t2, float):
        first = _compare_reals(t1, t2, tol)
    else:
        first = Ordering.EQUAL if t1 == t2 else (Ordering.GREATER if t1 > t2 else Ordering.LESS)
    if first is not Ordering.EQUAL:
        return first
    return compare_performance(v1.performance, v2.performance, tol)


@dataclass(frozen=True)
class PenaltyConfig:
    M: float
    completion: FailureCompletion = field(default_factory=FailureCompletion.zero)

    def __post_init__(self):
        if not (math.isfinite(self.M) and self.M >= 0):
            raise ValueError(f"penalty weight must be finite and >= 0, got {self.M!r}")


@dataclass(frozen=True)
class PenaltyValue:
    """U - M L with the interval induced by the loss bracket."""

    value: float
    lo: float
    hi: float
    unconditional: float
    loss: LossEstimate
    config: PenaltyConfig

    def to_record(self) -> dict:
        return {
            "value": self.value,
            "interval": [self.lo, self.hi],
            "unconditional": self.unconditional,
            "loss": self.loss.to_record(),
            "M": self.config.M,
            "completion": self.config.completion.to_record(),
        }


def penalty_value(
    game: InstanceGame,
    profile: StationaryProfile,
    player: int,
    config: PenaltyConfig,
    horizon: int = DEFAULT_HORIZON,
    continuation: ContinuationProfile | None = None,
    unconditional: float | None = None,
) -> PenaltyValue:
    continuation = continuation or continuation_profile(game.form, profile, game.initial, horizon)
    loss = loss_from_profile(continuation)
    if unconditional is None:
        unconditional = unconditional_payoff(game, profile, player, config.completion)
    m = config.M
    return PenaltyValue(
        value=unconditional - m * loss.value,
        lo=unconditional - m * loss.hi,
        hi=unconditional - m * loss.lo,
        unconditional=unconditional,
        loss=loss,
        config=config,
    )


def penalty_compare(p1: PenaltyValue, p2: PenaltyValue, tol: float = DEFAULT_TOL) -> Ordering:
    """Interval comparison; overlapping non-degenerate intervals are indeterminate."""
    if p1.lo > p2.hi + tol:
        return Ordering.GREATER
    if p2.lo > p1.hi + tol:
        return Ordering.LESS
    if abs(p1.value - p2.value) <= tol and p1.hi - p1.lo <= tol and p2.hi - p2.lo <= tol:
        return Ordering.EQUAL
    return Ordering.INDETERMINATE


def dominance_threshold(ubar: float, discount: float, gap: float) -> float:
    """Penalty weight beyond which a loss gap of ``gap`` outweighs any payoff difference.

    Payoffs are bounded by ubar / (1 - discount), so two of them differ by at
    most 2 ubar / (1 - discount); any M above that over ``gap`` is enough.
    """
    if not gap > 0:
        raise ValueError(f"loss gap must be positive, got {gap!r}")
    if not 0 < discount < 1:
        raise ValueError(f"discount out of range: {discount!r}")
    if ubar < 0:
        raise ValueError("payoff bound must be >= 0")
    return 2.0 * ubar / ((1.0 - discount) * gap)


@dataclass
class SweepResult:
    profile_ids: list[int]
    choices: list[tuple[tuple[int, ...], ...]]
    M_values: list[float]
    values: dict[float, list[PenaltyValue]]
    ranks: dict[float, list[int]]
    agrees: dict[float, bool]
    indeterminate: dict[float, int]
    stabilization: float | None
    completion: FailureCompletion

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["profile_id", "M", "U", "L_mid", "L_lo", "L_hi", "penalty_value", "rank"])
        for m in self.M_values:
            for pid, pv, rank in zip(self.profile_ids, self.values[m], self.ranks[m]):
                writer.writerow(
                    [pid, repr(m), repr(pv.unconditional), repr(pv.loss.value), repr(pv.loss.lo),
                     repr(pv.loss.hi), repr(pv.value), rank]
                )
        return buf.getvalue()

    def ranking(self, m: float) -> list[int]:
        """Profile ids from best to worst at penalty ``m``."""
        order = np.argsort([-pv.value for pv in self.values[m]], kind="stable")
        return [self.profile_ids[k] for k in order]


def _competition_ranks(values: Sequence[float], tol: float) -> list[int]:
    order = sorted(range(len(values)), key=lambda k: -values[k])
    ranks = [0] * len(values)
    for pos, k in enumerate(order):
        if pos and abs(values[order[pos - 1]] - values[k]) <= tol:
            ranks[k] = ranks[order[pos - 1]]
        else:
            ranks[k] = pos + 1
    return ranks


def penalty_sweep(
    game: InstanceGame,
    player: int,
    M_values: Sequence[float],
    completion: FailureCompletion | None = None,
    horizon: int = DEFAULT_HORIZON,
    tol: float = DEFAULT_TOL,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> SweepResult:
    """Rank every pure profile by U - M L for each M and locate stabilization.

    The stabilization point is the first swept M from which, for every
    larger swept M as well, all pairs with distinct continuation profiles
    are ordered exactly as the CPD order orders them.
    """
    M_values = [float(m) for m in M_values]
    if not M_values:
        raise ValueError("need at least one penalty value")
    if any(b <= a for a, b in zip(M_values, M_values[1:])):
        raise ValueError("penalty values must be strictly increasing")
    completion = completion or FailureCompletion.zero()
    profiles = list(enumerate_pure_profiles(game.form, cap))
    conts = [continuation_profile(game.form, p, game.initial, horizon) for p in profiles]
    uncond = [unconditional_payoff(game, p, player, completion) for p in profiles]

    distinct = []
    for a in range(len(profiles)):
        for b in range(a + 1, len(profiles)):
            order = lex_compare_continuation(conts[a], conts[b], tol)
            if order is not Ordering.EQUAL:
                distinct.append((a, b, order))

    values, ranks, agrees, indeterminate = {}, {}, {}, {}
    for m in M_values:
        cfg = PenaltyConfig(m, completion)
        pvs = [
            penalty_value(game, p, player, cfg, horizon, continuation=c, unconditional=u)
            for p, c, u in zip(profiles, conts, uncond)
        ]
        values[m] = pvs
        ranks[m] = _competition_ranks([pv.value for pv in pvs], tol)
        ok, undecided = True, 0
        for a, b, order in distinct:
            got = penalty_compare(pvs[a], pvs[b], tol)
            undecided += got is Ordering.INDETERMINATE
            ok &= got is order
        agrees[m] = ok
        indeterminate[m] = undecided

    stabilization = None
    for m in reversed(M_values):
        if not agrees[m]:
            break
        stabilization = m
    return SweepResult(
        profile_ids=list(range(len(profiles))),
        choices=[p.choices for p in profiles],
        M_values=M_values,
        values=values,
        ranks=ranks,
        agrees=agrees,
        indeterminate=indeterminate,
        stabilization=stabilization,
        completion=completion,
    )


@dataclass
class CompletionReport:
    entries: list[tuple[FailureCompletion, float, float, Ordering]]
    flip: bool

    def to_record(self) -> dict:
        return {
            "orderings": [
                {"completion": c.to_record(), "U_first": u1, "U_second": u2, "ordering": o.value}
                for c, u1, u2, o in self.entries
            ],
            "flip": self.flip,
        }


def completion_sensitivity(
    game: InstanceGame,
    first: StationaryProfile,
    second: StationaryProfile,
    player: int,
    completions: Sequence[FailureCompletion],
    tol: float = DEFAULT_TOL,
) -> CompletionReport:
    """Order two profiles by unconditional payoff under each completion."""
    if len(completions) < 2:
        raise ValueError("need at least two completions")
    chains = induced_chain(game.form, first), induced_chain(game.form, second)
    entries = []
    for comp in completions:
        u1 = unconditional_payoff(game, first, player, comp, chain=chains[0])
        u2 = unconditional_payoff(game, second, player, comp, chain=chains[1])
        entries.append((comp, u1, u2, _compare_reals(u1, u2, tol)))
    flip = len({e[3] for e in entries}) > 1
    return CompletionReport(entries, flip)
