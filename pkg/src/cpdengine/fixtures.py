"""Small stored games with known closed-form answers.

The documents live in ``cpdengine/data`` so they can be passed to the
command line as ordinary game files.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import yaml

from .game import InstanceGame
from .gamefile import parse_game

__all__ = ["FIXTURE_NAMES", "fixture", "fixture_path", "all_fixtures"]

FIXTURE_NAMES = (
    "geometric",
    "always_safe",
    "fail_at_one",
    "fail_at_two",
    "risky_branch",
    "completion_flip",
    "stay_withdraw",
    "penalty_limit",
    "empty_kernel",
)


def fixture_path(name: str) -> Path:
    if name not in FIXTURE_NAMES:
        raise KeyError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURE_NAMES)}")
    return Path(str(resources.files("cpdengine") / "data" / f"{name}.yaml"))


def fixture(name: str) -> InstanceGame:
    with open(fixture_path(name), encoding="utf-8") as fh:
        return parse_game(yaml.safe_load(fh))


def all_fixtures() -> dict[str, InstanceGame]:
    return {name: fixture(name) for name in FIXTURE_NAMES}
