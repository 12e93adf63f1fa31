"""Command-line front end.

Every command writes one artifact (JSON by default, CSV for tables) that
embeds the fully resolved configuration.  Exit status: 0 on success, 1 on
bad input or an invalid game, 2 when the analysis itself fails.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import bankrun
from .continuation import DEFAULT_HORIZON, DEFAULT_TOL, SingularSystemError, continuation_profile, loss_from_profile
from .equilibrium import CPDOrder, PenaltyOrder, admissibility_filter, penalty_limit_check, pure_nash
from .evaluation import PenaltyConfig, completion_sensitivity, cpd_compare, cpd_value, penalty_sweep, penalty_value
from .game import EnumerationCapError, InstanceGame, StationaryProfile, profile_from_id, validate_game_form
from .gamefile import GameSpecError, GameValidationError, load_game
from .performance import FailureCompletion, mc_conditional_payoff, unconditional_payoff
from .viability import viab_profile_exists, viability_kernel

__all__ = ["main", "build_parser", "InputError", "AnalysisError"]


class InputError(Exception):
    """Bad flags or unreadable input (exit 1)."""


class AnalysisError(Exception):
    """The requested analysis could not be carried out (exit 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


# -- argument helpers -------------------------------------------------------

def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def _tolerance(text: str) -> float:
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"expected a tolerance >= 0, got {text}")
    return value


def _penalties(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty penalty list")
    return values


def _completion(text: str) -> FailureCompletion:
    try:
        return FailureCompletion.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _completions(text: str) -> list[FailureCompletion]:
    return [_completion(part) for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cpdengine", description="Continuation-performance analysis of games with absorbing failure.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    common = _Parser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--horizon", type=_positive_int, default=DEFAULT_HORIZON, help="truncation N_h")
    common.add_argument("--tol", type=_tolerance, default=DEFAULT_TOL)

    game = _Parser(add_help=False)
    game.add_argument("--game", required=True, help="game-spec file (YAML or JSON)")

    prof = _Parser(add_help=False)
    prof.add_argument("--profile", default="0", help="pure profile id or JSON profile file (default 0)")

    stochastic = _Parser(add_help=False)
    stochastic.add_argument("--seed", type=int, help="RNG seed (mandatory for stochastic commands)")
    stochastic.add_argument("--runs", type=_positive_int, default=100_000)

    sub.add_parser("validate", parents=[common, game], help="check game-form invariants")
    sub.add_parser("continuation", parents=[common, game, prof], help="survival profile, tail and loss")

    ev = sub.add_parser("evaluate", parents=[common, game, prof, stochastic], help="CPD and penalty values")
    ev.add_argument("--other", help="second profile to compare against")
    ev.add_argument("--completion", type=_completion, default=FailureCompletion.zero())
    ev.add_argument("--penalties", type=_penalties, default=[])
    ev.add_argument("--mc", action="store_true", help="add a Monte Carlo check of the conditional payoff")

    sub.add_parser("viability", parents=[common, game], help="viability kernel and witness")

    eq = sub.add_parser("equilibria", parents=[common, game], help="pure stationary Nash equilibria")
    eq.add_argument("--order", choices=("cpd", "penalty"), default="cpd")
    eq.add_argument("--penalty", type=float, default=0.0, help="M for --order penalty")
    eq.add_argument("--penalties", type=_penalties, help="schedule for the penalty-limit check")
    eq.add_argument("--completion", type=_completion, default=FailureCompletion.zero())
    eq.add_argument("--admissible", action="store_true", help="drop equilibria with avoidable failure")

    sw = sub.add_parser("penalty-sweep", parents=[common, game], help="rank profiles by U - M L")
    sw.add_argument("--player", default="0")
    sw.add_argument("--penalties", type=_penalties, required=True)
    sw.add_argument("--completion", type=_completion, default=FailureCompletion.zero())

    cf = sub.add_parser("completion-flip", parents=[common, game, prof], help="orderings under several completions")
    cf.add_argument("--other", required=True)
    cf.add_argument("--player", default="0")
    cf.add_argument("--completion", type=_completions, default=None,
                    help="comma list (default: zero,terminal:-100)")

    bank = _Parser(add_help=False)
    bank.add_argument("--N", type=_positive_int, default=4)
    bank.add_argument("--p", type=float, default=0.5)
    bank.add_argument("--d", type=float, default=1.0)
    bank.add_argument("--ell", type=float, default=0.2)
    bank.add_argument("--c-w", dest="c_w", type=float, default=0.3)
    bank.add_argument("--c-s", dest="c_s", type=float, default=0.05)
    bank.add_argument("--L0", type=float, default=1.0)
    bank.add_argument("--T-max", dest="T_max", type=_positive_int, default=50)
    bank.add_argument("--discount", type=float, default=0.95)

    bs = sub.add_parser("bankrun-simulate", parents=[common, stochastic, bank], help="Monte Carlo bank runs")
    bs.add_argument("--strategy", default="weak_withdraw_strong_stay",
                    help="everyone_stays | weak_withdraw_strong_stay | all_withdraw_from:T | knife_edge:M")

    bk = sub.add_parser("bankrun-knife-edge", parents=[common, stochastic, bank], help="three-leg knife-edge check")
    bk.add_argument("--q", default="simulation", help="failure belief in [0,1] or 'simulation'")
    return parser


# -- input resolution -------------------------------------------------------

def _load(path: str) -> InstanceGame:
    if not Path(path).is_file():
        raise InputError(f"cannot read game file {path!r}")
    return load_game(path)


def _player(game: InstanceGame, text: str) -> int:
    try:
        return game.form.player_index(int(text) if text.isdigit() else text)
    except (KeyError, ValueError, IndexError):
        raise InputError(f"unknown player {text!r}; players are {', '.join(game.form.players)}") from None


def _profile(game: InstanceGame, text: str) -> StationaryProfile:
    """A pure profile id, or a JSON file mapping player -> state -> action (or action -> prob)."""
    form = game.form
    if text.lstrip("-").isdigit():
        try:
            return profile_from_id(form, int(text))
        except ValueError as exc:
            raise InputError(str(exc)) from None
    path = Path(text)
    if not path.is_file():
        raise InputError(f"--profile/--other: {text!r} is neither a profile id nor a readable file")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{text}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    policy = []
    for i, player in enumerate(form.players):
        rows = doc.get(player, {})
        per_state = []
        for s, state in enumerate(form.states):
            acts = form.actions[s][i]
            dist = np.zeros(len(acts))
            entry = rows.get(state)
            if s in form.failure or entry is None:
                if s not in form.failure and len(acts) > 1:
                    raise InputError(f"profile file lacks an action for player {player!r} at state {state!r}")
                dist[0] = 1.0
            elif isinstance(entry, str):
                if entry not in acts:
                    raise InputError(f"unknown action {entry!r} for {player!r} at {state!r}")
                dist[acts.index(entry)] = 1.0
            else:
                for a, w in entry.items():
                    if a not in acts:
                        raise InputError(f"unknown action {a!r} for {player!r} at {state!r}")
                    dist[acts.index(a)] = float(w)
            per_state.append(dist)
        policy.append(tuple(per_state))
    profile = StationaryProfile(tuple(policy))
    try:
        profile.check(form)
    except ValueError as exc:
        raise InputError(f"{text}: {exc}") from None
    return profile


def _need_seed(args) -> None:
    if args.seed is None:
        raise InputError(f"{args.command}: --seed is required for stochastic commands")


def _bank_params(args) -> bankrun.BankRunParams:
    try:
        params = bankrun.BankRunParams(N=args.N, p=args.p, d=args.d, ell=args.ell, c_w=args.c_w, c_s=args.c_s,
                                       L0=args.L0, T_max=args.T_max, discount=args.discount)
        params.reserve_units
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return params


def _strategy(text: str) -> bankrun.DepositorStrategy:
    name, _, arg = text.partition(":")
    try:
        if name == "everyone_stays" and not arg:
            return bankrun.everyone_stays()
        if name == "weak_withdraw_strong_stay" and not arg:
            return bankrun.weak_withdraw_strong_stay()
        if name == "all_withdraw_from":
            return bankrun.all_withdraw_from(int(arg))
        if name == "knife_edge":
            return bankrun.withdraw_at_knife_edge(int(arg or 1))
    except ValueError:
        pass
    raise InputError(f"unknown strategy {text!r}")


# -- output -----------------------------------------------------------------

def _clean(value: Any) -> Any:
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain numbers."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, FailureCompletion):
        return value.to_record()
    return value


def _config(args) -> dict:
    return _clean({k: v for k, v in sorted(vars(args).items())})


def _emit(args, result: Any, table: list[dict] | None = None) -> None:
    config = _config(args)
    if args.format == "csv":
        if table is None:
            raise InputError(f"{args.command}: no tabular output; use --format json")
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.DictWriter(buf, fieldnames=list(table[0].keys()) if table else ["empty"], lineterminator="\n")
        writer.writeheader()
        for row in table:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        text = buf.getvalue()
    else:
        doc = {
            "config": config,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "result": _clean(result),
        }
        text = json.dumps(doc, indent=2, allow_nan=False) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


# -- commands ---------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        game = _load(args.game)
    except GameValidationError as exc:
        _emit(args, {"valid": False, "violations": [_violation(v) for v in exc.violations]},
              [_violation(v) for v in exc.violations])
        return 1
    violations = validate_game_form(game.form)
    form = game.form
    _emit(args, {"valid": not violations, "violations": [_violation(v) for v in violations],
                 "states": form.n_states, "players": list(form.players),
                 "failure": [form.states[s] for s in sorted(form.failure)]},
          [_violation(v) for v in violations])
    return 1 if violations else 0


def _violation(v) -> dict:
    return {"kind": v.kind, "state": v.state,
            "joint_action": list(v.joint_action) if v.joint_action is not None else None, "detail": v.detail}


def cmd_continuation(args) -> int:
    game = _load(args.game)
    profile = _profile(game, args.profile)
    cont = continuation_profile(game.form, profile, game.initial, args.horizon)
    loss = loss_from_profile(cont)
    result = {**cont.to_record(), "loss": loss.to_record()}
    table = [{"n": n, "survival": float(s)} for n, s in enumerate(cont.survival, start=1)]
    _emit(args, result, table)
    return 0


def cmd_evaluate(args) -> int:
    game = _load(args.game)
    if args.mc:
        _need_seed(args)
    profiles = [_profile(game, args.profile)]
    if args.other is not None:
        profiles.append(_profile(game, args.other))
    out, table = [], []
    values = []
    for k, profile in enumerate(profiles):
        cont = continuation_profile(game.form, profile, game.initial, args.horizon)
        per = {}
        vals = []
        for i, player in enumerate(game.form.players):
            v = cpd_value(game, profile, i, args.horizon, continuation=cont)
            vals.append(v)
            rec = {
                "conditional": v.performance.to_record(),
                "unconditional": unconditional_payoff(game, profile, i, args.completion),
                "penalty": [penalty_value(game, profile, i, PenaltyConfig(m, args.completion), args.horizon,
                                          continuation=cont).to_record() for m in args.penalties],
            }
            if args.mc:
                rec["monte_carlo"] = mc_conditional_payoff(game, profile, i, args.horizon, args.runs,
                                                           args.seed).to_record()
            per[player] = rec
            table.append({"profile": k, "player": player, "conditional": v.performance.value,
                          "unconditional": rec["unconditional"], "loss": loss_from_profile(cont).value})
        values.append(vals)
        out.append({"continuation": cont.to_record(), "loss": loss_from_profile(cont).to_record(), "players": per})
    result: dict[str, Any] = {"profiles": out}
    if len(values) == 2:
        result["comparison"] = {
            p: cpd_compare(values[1][i], values[0][i], args.tol).value for i, p in enumerate(game.form.players)
        }
    _emit(args, result, table)
    return 0


def cmd_viability(args) -> int:
    game = _load(args.game)
    kernel = viability_kernel(game.form)
    exists, witness = viab_profile_exists(game.form, game.initial, kernel)
    result = {**kernel.to_record(game.form), "initial_viable": exists,
              "witness_profile": witness.choices if witness is not None else None}
    table = [{"state": st, "in_kernel": s in kernel.kernel} for s, st in enumerate(game.form.states)
             if s not in game.form.failure]
    _emit(args, result, table)
    return 0


def cmd_equilibria(args) -> int:
    game = _load(args.game)
    if args.order == "cpd":
        order = CPDOrder(args.horizon, args.tol)
    else:
        order = PenaltyOrder(args.penalty, args.completion, args.horizon, args.tol)
    report = pure_nash(game, order)
    result: dict[str, Any] = report.to_record(game)
    if args.admissible:
        result["admissible"] = admissibility_filter(game, report.equilibria, args.horizon)
    if args.penalties:
        try:
            limit = penalty_limit_check(game, args.penalties, args.completion, args.horizon, args.tol)
        except ValueError as exc:
            raise InputError(f"--penalties: {exc}") from None
        result["penalty_limit"] = limit.to_record()
    table = [{"profile_id": pid} for pid in report.equilibria]
    _emit(args, result, table)
    return 0


def cmd_penalty_sweep(args) -> int:
    game = _load(args.game)
    player = _player(game, args.player)
    try:
        sweep = penalty_sweep(game, player, args.penalties, args.completion, args.horizon, args.tol)
    except EnumerationCapError:
        raise
    except ValueError as exc:
        raise InputError(f"--penalties: {exc}") from None
    rows = list(csv.DictReader(io.StringIO(sweep.to_csv())))
    table = [{k: _number(v) for k, v in row.items()} for row in rows]
    result = {"player": game.form.players[player], "rows": table, "agrees": {repr(m): a for m, a in sweep.agrees.items()},
              "indeterminate": {repr(m): n for m, n in sweep.indeterminate.items()},
              "stabilization": sweep.stabilization}
    _emit(args, result, table)
    return 0


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def cmd_completion_flip(args) -> int:
    game = _load(args.game)
    player = _player(game, args.player)
    completions = args.completion or [FailureCompletion.zero(), FailureCompletion.terminal(-100.0)]
    args.completion = completions
    if len(completions) < 2:
        raise InputError("--completion: need at least two completions")
    first, second = _profile(game, args.profile), _profile(game, args.other)
    report = completion_sensitivity(game, first, second, player, completions, args.tol)
    table = [{"completion": c.label(), "U_first": u1, "U_second": u2, "ordering": o.value}
             for c, u1, u2, o in report.entries]
    _emit(args, report.to_record(), table)
    return 0


def cmd_bankrun_simulate(args) -> int:
    _need_seed(args)
    params = _bank_params(args)
    sim = bankrun.simulate_run(params, _strategy(args.strategy), args.runs, args.seed)
    table = [{"t": t, "survival": float(s), "failures": int(f)}
             for t, (s, f) in enumerate(zip(sim.survival, sim.failures_at), start=1)]
    _emit(args, sim.to_record(), table)
    return 0


def cmd_bankrun_knife_edge(args) -> int:
    _need_seed(args)
    params = _bank_params(args)
    if args.q == "simulation":
        q = None
    else:
        try:
            q = float(args.q)
        except ValueError:
            raise InputError(f"--q: expected a number in [0, 1] or 'simulation', got {args.q!r}") from None
    try:
        report = bankrun.knife_edge_check(params, q, args.runs, args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _emit(args, report.to_record())
    return 0 if report.passed is not False else 2


COMMANDS = {
    "validate": cmd_validate,
    "continuation": cmd_continuation,
    "evaluate": cmd_evaluate,
    "viability": cmd_viability,
    "equilibria": cmd_equilibria,
    "penalty-sweep": cmd_penalty_sweep,
    "completion-flip": cmd_completion_flip,
    "bankrun-simulate": cmd_bankrun_simulate,
    "bankrun-knife-edge": cmd_bankrun_knife_edge,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (GameSpecError, GameValidationError) as exc:
        print(f"error: {str(exc).splitlines()[0]}", file=sys.stderr)
        return 1
    except (EnumerationCapError, SingularSystemError, AnalysisError) as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return 1
