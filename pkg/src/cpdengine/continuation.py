"""Survival structure of the chain induced by a stationary profile.

The survival vector is computed by forward propagation of probability
mass on the non-failure states.  The limit P(T = inf) is certified by
graph analysis before any linear algebra: states that cannot reach the
failure set survive surely, states that cannot reach such a safe state
fail surely, and only the remaining transient states need a solve.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .game import GameForm, InducedChain, StationaryProfile, induced_chain

__all__ = [
    "DEFAULT_HORIZON",
    "DEFAULT_TOL",
    "Ordering",
    "TailKind",
    "TailCertificate",
    "ContinuationProfile",
    "LossEstimate",
    "survival_vector",
    "classify_tail",
    "continuation_profile",
    "continuation_loss",
    "loss_from_profile",
    "lex_compare_continuation",
    "SingularSystemError",
]

DEFAULT_HORIZON = 64
DEFAULT_TOL = 1e-9
_COND_LIMIT = 1e12
_ITER_TOL = 1e-12
_ITER_MAX = 10**7


class Ordering(enum.Enum):
    LESS = "less"
    EQUAL = "equal"
    GREATER = "greater"
    # only produced by interval-valued (penalty) comparisons
    INDETERMINATE = "indeterminate"

    def flip(self) -> "Ordering":
        return {Ordering.LESS: Ordering.GREATER, Ordering.GREATER: Ordering.LESS}.get(self, self)


class TailKind(enum.Enum):
    ALMOST_SURE_SURVIVAL = "AlmostSureSurvival"
    ALMOST_SURE_FAILURE = "AlmostSureFailure"
    MIXED = "Mixed"


class SingularSystemError(ArithmeticError):
    def __init__(self, condition: float):
        super().__init__(f"transient block is numerically singular (condition number {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True, eq=False)
class TailCertificate:
    """Exact classification of the survival limit from ``initial``.

    ``harmonic[s]`` is P(T = inf | start at s) for every state (0 on F).
    ``safe`` are states that cannot reach F; ``positive`` are states with
    positive survival probability.  Both are decided on the support graph.
    """

    kind: TailKind
    survival_limit: float
    harmonic: np.ndarray
    safe: frozenset[int]
    positive: frozenset[int]
    initial: int
    method: str = "graph"
    condition: float = 1.0

    def residual(self, form: GameForm, profile: StationaryProfile) -> float:
        """Sup-norm residual of the harmonic equation on non-failure states."""
        chain = induced_chain(form, profile)
        live = list(form.nonfailure)
        q = chain.matrix[np.ix_(live, live)]
        h = self.harmonic[live]
        return float(np.max(np.abs(h - q @ h), initial=0.0))


@dataclass(frozen=True, eq=False)
class ContinuationProfile:
    """Truncated continuation profile: (P(T>1), ..., P(T>N_h)) plus its tail."""

    horizon: int
    survival: np.ndarray
    tail: TailCertificate

    def to_record(self) -> dict:
        return {
            "survival": [float(x) for x in self.survival],
            "tail": {"kind": self.tail.kind.value, "limit": float(self.tail.survival_limit)},
        }


@dataclass(frozen=True)
class LossEstimate:
    """Continuation loss with a certified bracket ``lo <= L <= hi``."""

    value: float
    lo: float
    hi: float
    width: float
    horizon: int

    def to_record(self) -> dict:
        return {"value": self.value, "bracket": [self.lo, self.hi], "width": self.width}


def _reachable(support: np.ndarray, sources, allowed) -> set[int]:
    """States reachable from ``sources`` along support edges inside ``allowed``."""
    seen = set(s for s in sources if s in allowed)
    queue = deque(seen)
    while queue:
        s = queue.popleft()
        for t in np.flatnonzero(support[s]):
            t = int(t)
            if t in allowed and t not in seen:
                seen.add(t)
                queue.append(t)
    return seen


def _can_reach(support: np.ndarray, targets, allowed) -> set[int]:
    """States in ``allowed`` from which some state of ``targets`` is reachable."""
    return _reachable(support.T, targets, allowed | set(targets)) & allowed | (set(targets) & allowed)


def _exit_mass(form: GameForm, chain: InducedChain) -> np.ndarray:
    fail = sorted(form.failure)
    if not fail:
        return np.zeros(form.n_states)
    return chain.matrix[:, fail].sum(axis=1)


def survival_vector(
    form: GameForm, profile: StationaryProfile, initial: int, horizon: int = DEFAULT_HORIZON,
    chain: InducedChain | None = None,
) -> np.ndarray:
    """Survival probabilities ``P(T > n)`` for ``n = 1..horizon``.

    Each step removes exactly the mass that moves into F, so states with no
    support edge into F lose nothing and the vector stays at 1.0 exactly.
    """
    if initial in form.failure:
        raise ValueError(f"initial state {form.states[initial]!r} is in the failure set")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    chain = chain or induced_chain(form, profile)
    live = list(form.nonfailure)
    q = chain.matrix[np.ix_(live, live)]
    exit_mass = _exit_mass(form, chain)[live]
    mass = np.zeros(len(live))
    mass[live.index(initial)] = 1.0
    out = np.empty(horizon)
    alive = 1.0
    for n in range(horizon):
        alive = max(alive - float(mass @ exit_mass), 0.0)
        mass = mass @ q
        out[n] = alive
    return out


def classify_tail(
    form: GameForm, profile: StationaryProfile, initial: int, chain: InducedChain | None = None
) -> TailCertificate:
    chain = chain or induced_chain(form, profile)
    live = set(form.nonfailure)
    exits = {s for s in live if chain.support[s, list(form.failure)].any()} if form.failure else set()
    doomed_reach = _can_reach(chain.support, exits, live)
    safe = live - doomed_reach
    positive = _can_reach(chain.support, safe, live)
    transient = sorted(positive - safe)

    h = np.zeros(form.n_states)
    h[sorted(safe)] = 1.0
    method, condition = "graph", 1.0
    if transient:
        q_tt = chain.matrix[np.ix_(transient, transient)]
        rhs = chain.matrix[np.ix_(transient, sorted(safe))].sum(axis=1)
        a = np.eye(len(transient)) - q_tt
        condition = float(np.linalg.cond(a))
        try:
            if not np.isfinite(condition) or condition > _COND_LIMIT:
                raise SingularSystemError(condition)
            h_t = np.linalg.solve(a, rhs)
            method = "solve"
        except (np.linalg.LinAlgError, SingularSystemError):
            h_t = _monotone_iteration(chain.matrix, sorted(live), transient, safe)
            method = "iteration"
        h[transient] = np.clip(h_t, 0.0, 1.0)

    if initial in safe:
        kind = TailKind.ALMOST_SURE_SURVIVAL
    elif initial not in positive:
        kind = TailKind.ALMOST_SURE_FAILURE
    else:
        kind = TailKind.MIXED
    return TailCertificate(
        kind=kind,
        survival_limit=float(h[initial]),
        harmonic=h,
        safe=frozenset(safe),
        positive=frozenset(positive),
        initial=initial,
        method=method,
        condition=condition,
    )


def _monotone_iteration(matrix, live, transient, safe) -> np.ndarray:
    """h_{k+1} = Q h_k from h_0 = 1 on live states; decreases to the limit."""
    q = matrix[np.ix_(live, live)]
    h = np.ones(len(live))
    pos = [live.index(s) for s in transient]
    for _ in range(_ITER_MAX):
        nxt = q @ h
        nxt[[live.index(s) for s in safe]] = 1.0
        if np.max(np.abs(nxt - h)) < _ITER_TOL:
            return nxt[pos]
        h = nxt
    raise SingularSystemError(float("inf"))


def continuation_profile(
    form: GameForm, profile: StationaryProfile, initial: int, horizon: int = DEFAULT_HORIZON
) -> ContinuationProfile:
    chain = induced_chain(form, profile)
    return ContinuationProfile(
        horizon=horizon,
        survival=survival_vector(form, profile, initial, horizon, chain=chain),
        tail=classify_tail(form, profile, initial, chain=chain),
    )


def loss_from_profile(c: ContinuationProfile) -> LossEstimate:
    """Continuation loss sum_n 2^-n (1 - P(T>n)) with its tail bracket.

    The truncated series is exact up to rounding; the remainder after N_h
    terms lies in ``2^-N_h * [1 - P(T>N_h), 1 - h(s0)]``.
    """
    n_h = c.horizon
    terms = [math.ldexp(1.0 - float(p), -(n + 1)) for n, p in enumerate(c.survival)]
    last = float(c.survival[-1])
    r_lo = math.ldexp(1.0 - last, -n_h)
    r_hi = math.ldexp(1.0 - min(c.tail.survival_limit, last), -n_h)
    lo = math.fsum(terms + [r_lo])
    hi = math.fsum(terms + [r_hi])
    mid = math.fsum(terms + [r_lo / 2, r_hi / 2])
    return LossEstimate(value=mid, lo=lo, hi=hi, width=r_hi - r_lo, horizon=n_h)


def continuation_loss(
    form: GameForm, profile: StationaryProfile, initial: int, horizon: int = DEFAULT_HORIZON
) -> LossEstimate:
    return loss_from_profile(continuation_profile(form, profile, initial, horizon))


def lex_compare_continuation(
    c1: ContinuationProfile, c2: ContinuationProfile, tol: float = DEFAULT_TOL
) -> Ordering:
    """Lexicographic comparison with a declared tie band ``tol``.

    The first horizon whose survival probabilities differ by more than
    ``tol`` decides; otherwise the survival limits are compared.
    """
    if c1.horizon != c2.horizon:
        raise ValueError(f"horizon mismatch: {c1.horizon} vs {c2.horizon}")
    diff = c1.survival - c2.survival
    idx = np.flatnonzero(np.abs(diff) > tol)
    if len(idx):
        return Ordering.GREATER if diff[idx[0]] > 0 else Ordering.LESS
    d = c1.tail.survival_limit - c2.tail.survival_limit
    if abs(d) > tol:
        return Ordering.GREATER if d > 0 else Ordering.LESS
    return Ordering.EQUAL


def is_exact_tie(c1: ContinuationProfile, c2: ContinuationProfile) -> bool:
    """True when two profiles are equal without resorting to the tie band."""
    return bool(
        np.array_equal(c1.survival, c2.survival) and c1.tail.survival_limit == c2.tail.survival_limit
    )
