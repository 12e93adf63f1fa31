"""Reading and writing game-spec documents (YAML; JSON is a YAML subset).

Document layout::

    states: [s0, s1]
    failure: [s1]
    players: [p1]
    actions:            # omitted for failure states
      s0: {p1: [stay, go]}
    transitions:
      - {state: s0, joint_action: {p1: stay}, dist: {s0: "1.0"}}
      - {state: s0, joint_action: {p1: go}, dist: {s1: "1.0"}}
    payoffs:            # non-failure states only; missing records are 0
      - {player: p1, state: s0, joint_action: {p1: stay}, value: 1.0}
    discount: 0.9
    initial: s0

Failure states get one synthesized action per player and a self-loop.
A transition record for a failure state (with an empty ``joint_action``)
overrides the synthesized self-loop, which lets malformed forms reach the
validator.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .game import IMPLICIT_ACTION, GameForm, InstanceError, InstanceGame, Violation, validate_game_form

__all__ = ["GameSpecError", "GameValidationError", "load_game", "save_game", "parse_game", "game_to_document"]

_DECIMAL = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
MAX_SIGNIFICANT_DIGITS = 17


class GameSpecError(ValueError):
    """A game-spec document is malformed; ``where`` locates the problem."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


class GameValidationError(ValueError):
    """The document parsed but describes an invalid game form."""

    def __init__(self, violations: list[Violation]):
        lines = [f"{v.kind} at state {v.state!r} joint action {v.joint_action}: {v.detail}" for v in violations]
        super().__init__("invalid game form:\n  " + "\n  ".join(lines))
        self.violations = violations


def _probability(value: Any, where: str) -> float:
    if isinstance(value, bool):
        raise GameSpecError(where, f"expected a probability, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str) or not _DECIMAL.match(value.strip()):
        raise GameSpecError(where, f"expected a decimal string, got {value!r}")
    digits = re.split("[eE]", value.strip().lstrip("+-"))[0].replace(".", "").lstrip("0")
    if len(digits) > MAX_SIGNIFICANT_DIGITS:
        raise GameSpecError(where, f"more than {MAX_SIGNIFICANT_DIGITS} significant digits in {value!r}")
    return float(value)


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool):
        raise GameSpecError(where, f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    raise GameSpecError(where, f"expected a number, got {value!r}")


def _require(doc: dict, key: str, kind, where: str = "") -> Any:
    loc = f"{where}.{key}" if where else key
    if key not in doc:
        raise GameSpecError(loc, "missing field")
    value = doc[key]
    if not isinstance(value, kind):
        names = "/".join(k.__name__ for k in kind) if isinstance(kind, tuple) else kind.__name__
        raise GameSpecError(loc, f"expected {names}, got {type(value).__name__}")
    return value


def _ids(values: list, where: str) -> tuple[str, ...]:
    out = tuple(str(v) for v in values)
    if len(set(out)) != len(out):
        raise GameSpecError(where, "duplicate ids")
    return out


def _joint(record_joint: Any, state: str, players, actions, where: str) -> tuple[int, ...]:
    if not isinstance(record_joint, dict):
        raise GameSpecError(where, "joint_action must map player -> action")
    if set(map(str, record_joint)) != set(players):
        raise GameSpecError(where, f"joint_action must name exactly the players {list(players)}")
    joint = []
    for i, p in enumerate(players):
        a = str(record_joint[p])
        if a not in actions[i]:
            raise GameSpecError(where, f"unknown action {a!r} for player {p!r} at state {state!r}")
        joint.append(actions[i].index(a))
    return tuple(joint)


def parse_game(doc: Any) -> InstanceGame:
    """Build an :class:`InstanceGame` from a parsed document."""
    if not isinstance(doc, dict):
        raise GameSpecError("<root>", "document must be a mapping")
    states = _ids(_require(doc, "states", list), "states")
    players = _ids(_require(doc, "players", list), "players")
    failure_ids = _ids(doc.get("failure", []) or [], "failure")
    for f in failure_ids:
        if f not in states:
            raise GameSpecError("failure", f"unknown state {f!r}")
    failure = frozenset(states.index(f) for f in failure_ids)

    actions_doc = doc.get("actions", {}) or {}
    if not isinstance(actions_doc, dict):
        raise GameSpecError("actions", "expected a mapping state -> player -> actions")
    actions = []
    for s, name in enumerate(states):
        if s in failure:
            if name in actions_doc:
                raise GameSpecError(f"actions.{name}", "failure states take no actions")
            actions.append(tuple((IMPLICIT_ACTION,) for _ in players))
            continue
        per_state = actions_doc.get(name)
        if not isinstance(per_state, dict):
            raise GameSpecError(f"actions.{name}", "missing action sets for non-failure state")
        row = []
        for p in players:
            acts = per_state.get(p)
            if not isinstance(acts, list):
                raise GameSpecError(f"actions.{name}.{p}", "missing action list")
            row.append(_ids(acts, f"actions.{name}.{p}"))
        actions.append(tuple(row))
    for name in actions_doc:
        if str(name) not in states:
            raise GameSpecError(f"actions.{name}", "unknown state")

    n = len(states)
    blocks = []
    seen: list[np.ndarray] = []
    for s in range(n):
        k = int(np.prod([len(a) for a in actions[s]]))
        block = np.zeros((k, n))
        if s in failure:
            block[:, s] = 1.0
        blocks.append(block)
        seen.append(np.zeros(k, dtype=bool))

    for r, rec in enumerate(_require(doc, "transitions", list)):
        where = f"transitions[{r}]"
        if not isinstance(rec, dict):
            raise GameSpecError(where, "expected a mapping")
        state = str(_require(rec, "state", (str, int), where))
        if state not in states:
            raise GameSpecError(f"{where}.state", f"unknown state {state!r}")
        s = states.index(state)
        if s in failure:
            if rec.get("joint_action") not in (None, {}):
                raise GameSpecError(f"{where}.joint_action", "failure states have no joint action")
            j = 0
        else:
            joint = _joint(rec.get("joint_action"), state, players, actions[s], f"{where}.joint_action")
            j = _flat(joint, actions[s])
            if seen[s][j]:
                raise GameSpecError(where, f"duplicate transition record for state {state!r}")
        dist = _require(rec, "dist", dict, where)
        row = np.zeros(n)
        for target, prob in dist.items():
            target = str(target)
            if target not in states:
                raise GameSpecError(f"{where}.dist.{target}", "unknown state")
            row[states.index(target)] = _probability(prob, f"{where}.dist.{target}")
        blocks[s][j] = row
        seen[s][j] = True

    for s in range(n):
        if s in failure:
            continue
        missing = np.flatnonzero(~seen[s])
        if len(missing):
            raise GameSpecError("transitions", f"state {states[s]!r} lacks {len(missing)} joint-action record(s)")

    form = GameForm(states, players, tuple(actions), tuple(blocks), failure)

    payoffs = [None if s in failure else np.zeros((form.n_joint(s), len(players))) for s in range(n)]
    for r, rec in enumerate(doc.get("payoffs", []) or []):
        where = f"payoffs[{r}]"
        if not isinstance(rec, dict):
            raise GameSpecError(where, "expected a mapping")
        state = str(_require(rec, "state", (str, int), where))
        if state not in states:
            raise GameSpecError(f"{where}.state", f"unknown state {state!r}")
        s = states.index(state)
        if s in failure:
            raise GameSpecError(f"{where}.state", f"payoff defined on failure state {state!r}")
        player = str(_require(rec, "player", (str, int), where))
        if player not in players:
            raise GameSpecError(f"{where}.player", f"unknown player {player!r}")
        joint = _joint(rec.get("joint_action"), state, players, actions[s], f"{where}.joint_action")
        payoffs[s][form.joint_index(s, joint), players.index(player)] = _number(
            _require(rec, "value", (int, float, str), where), f"{where}.value"
        )

    violations = validate_game_form(form)
    if violations:
        raise GameValidationError(violations)

    discount = _number(_require(doc, "discount", (int, float, str)), "discount")
    if not 0.0 < discount < 1.0:
        raise GameSpecError("discount", f"discount out of range: {discount!r} not in (0, 1)")
    initial = str(_require(doc, "initial", (str, int)))
    if initial not in states:
        raise GameSpecError("initial", f"unknown state {initial!r}")
    try:
        return InstanceGame(form, tuple(payoffs), discount, states.index(initial))
    except InstanceError as exc:
        raise GameSpecError("<instance>", str(exc)) from exc


def _flat(joint: tuple[int, ...], actions) -> int:
    idx = 0
    for acts, a in zip(actions, joint):
        idx = idx * len(acts) + a
    return idx


def load_game(path: str | Path) -> InstanceGame:
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else str(path)
        raise GameSpecError(where, f"cannot parse: {getattr(exc, 'problem', exc)}") from exc
    return parse_game(doc)


def game_to_document(game: InstanceGame) -> dict:
    form = game.form
    doc: dict[str, Any] = {
        "states": list(form.states),
        "failure": [form.states[s] for s in sorted(form.failure)],
        "players": list(form.players),
        "actions": {},
        "transitions": [],
        "payoffs": [],
        "discount": game.discount,
        "initial": form.states[game.initial],
    }
    for s in form.nonfailure:
        doc["actions"][form.states[s]] = {
            p: list(form.actions[s][i]) for i, p in enumerate(form.players)
        }
    for s in range(form.n_states):
        name = form.states[s]
        for j, joint in enumerate(form.joint_actions(s)):
            row = form.transition[s][j]
            dist = {form.states[t]: repr(float(row[t])) for t in np.flatnonzero(row)}
            if s in form.failure:
                if j == 0 and not (row[s] == 1.0 and len(dist) == 1):
                    doc["transitions"].append({"state": name, "joint_action": {}, "dist": dist})
                continue
            named = {p: form.actions[s][i][a] for i, (p, a) in enumerate(zip(form.players, joint))}
            doc["transitions"].append({"state": name, "joint_action": named, "dist": dist})
            for i, p in enumerate(form.players):
                doc["payoffs"].append(
                    {"player": p, "state": name, "joint_action": dict(named), "value": float(game.payoffs[s][j, i])}
                )
    return doc


def save_game(game: InstanceGame, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(game_to_document(game), sort_keys=False))
