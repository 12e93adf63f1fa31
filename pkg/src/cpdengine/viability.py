"""Viability kernel of a game form and almost-sure viability of profiles.

Everything here is support-theoretic: probabilities only matter through
whether they are zero, so no floating-point threshold is ever applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import GameForm, StationaryProfile, induced_chain

__all__ = ["ViabilityKernel", "viability_kernel", "is_viability_preserving", "viab_profile_exists"]


@dataclass(frozen=True)
class ViabilityKernel:
    kernel: frozenset[int]
    witness: dict[int, tuple[int, ...]]
    iterations: int

    def to_record(self, form: GameForm) -> dict:
        return {
            "kernel": [form.states[s] for s in sorted(self.kernel)],
            "witness": {
                form.states[s]: {
                    p: form.actions[s][i][a] for i, (p, a) in enumerate(zip(form.players, joint))
                }
                for s, joint in sorted(self.witness.items())
            },
        }


def viability_kernel(form: GameForm) -> ViabilityKernel:
    """Greatest fixed point of V -> {s not in F : some joint action keeps s in V surely}.

    Shrinks from S minus F; the witness is the lowest-index admissible joint
    action at each kernel state.
    """
    kernel = set(form.nonfailure)
    iterations = 0
    while True:
        iterations += 1
        inside = np.zeros(form.n_states, dtype=bool)
        inside[list(kernel)] = True
        keep = {s for s in kernel if _first_safe_action(form, s, inside) is not None}
        if keep == kernel:
            break
        kernel = keep
    inside = np.zeros(form.n_states, dtype=bool)
    inside[list(kernel)] = True
    joints = {}
    for s in sorted(kernel):
        j = _first_safe_action(form, s, inside)
        joints[s] = form.joint_actions(s)[j]
    return ViabilityKernel(frozenset(kernel), joints, iterations)


def _first_safe_action(form: GameForm, s: int, inside: np.ndarray) -> int | None:
    block = form.transition[s]
    ok = ~np.any((block > 0) & ~inside, axis=1)
    idx = np.flatnonzero(ok)
    return int(idx[0]) if len(idx) else None


def is_viability_preserving(form: GameForm, profile: StationaryProfile, initial: int) -> bool:
    """True iff no failure state is reachable from ``initial`` on the support graph."""
    if initial in form.failure:
        raise ValueError(f"initial state {form.states[initial]!r} is in the failure set")
    support = induced_chain(form, profile).support
    seen = {initial}
    stack = [initial]
    while stack:
        s = stack.pop()
        if s in form.failure:
            return False
        for t in np.flatnonzero(support[s]):
            t = int(t)
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return True


def viab_profile_exists(
    form: GameForm, initial: int, kernel: ViabilityKernel | None = None
) -> tuple[bool, StationaryProfile | None]:
    """Whether some profile avoids F surely from ``initial``, with a deterministic witness."""
    if initial in form.failure:
        raise ValueError(f"initial state {form.states[initial]!r} is in the failure set")
    kernel = kernel or viability_kernel(form)
    if initial not in kernel.kernel:
        return False, None
    choices = [[0] * form.n_states for _ in range(form.n_players)]
    for s, joint in kernel.witness.items():
        for i, a in enumerate(joint):
            choices[i][s] = a
    return True, StationaryProfile.pure(form, choices)
