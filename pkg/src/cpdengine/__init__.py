"""Continuation-performance analysis of finite dynamic games with an absorbing failure set."""

from __future__ import annotations

from .continuation import (
    ContinuationProfile,
    LossEstimate,
    Ordering,
    TailCertificate,
    TailKind,
    classify_tail,
    continuation_loss,
    continuation_profile,
    lex_compare_continuation,
    loss_from_profile,
    survival_vector,
)
from .equilibrium import CPDOrder, PenaltyOrder, best_responses, penalty_limit_check, pure_nash
from .evaluation import (
    CPDValue,
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
from .game import GameForm, InstanceGame, StationaryProfile, induced_chain, validate_game_form
from .gamefile import load_game, parse_game, save_game
from .performance import FailureCompletion, conditional_payoff, mc_conditional_payoff, unconditional_payoff
from .viability import is_viability_preserving, viab_profile_exists, viability_kernel

__version__ = "0.1.0"

__all__ = [
    "CPDOrder",
    "CPDValue",
    "ContinuationProfile",
    "FailureCompletion",
    "GameForm",
    "InstanceGame",
    "LossEstimate",
    "Ordering",
    "PenaltyConfig",
    "PenaltyOrder",
    "StationaryProfile",
    "TailCertificate",
    "TailKind",
    "best_responses",
    "classify_tail",
    "completion_sensitivity",
    "conditional_payoff",
    "continuation_loss",
    "continuation_profile",
    "cpd_compare",
    "cpd_value",
    "decoupled_compare",
    "dominance_threshold",
    "induced_chain",
    "is_viability_preserving",
    "lex_compare_continuation",
    "load_game",
    "loss_from_profile",
    "mc_conditional_payoff",
    "parse_game",
    "penalty_compare",
    "penalty_limit_check",
    "penalty_sweep",
    "penalty_value",
    "pure_nash",
    "save_game",
    "survival_vector",
    "unconditional_payoff",
    "validate_game_form",
    "viab_profile_exists",
    "viability_kernel",
]
