"""Train, evaluate and simulate the pendulum policy from the command line.

Exit codes: 0 success, 1 task failure (e.g. training did not converge, the
pole fell), 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from contextlib import contextmanager
from dataclasses import asdict
from typing import IO, Iterator

import numpy as np

from . import baselines, persistence
from ._backend import BACKEND
from .dynamics import ModelParameters, make_state
from .environment import (Disturbance, EnvConfig, disturbances_from_seconds, policy_rollout,
                          rollout)
from .training import DEFAULT_GRID, TrainingConfig, sweep, train

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad flag value or unreadable input; maps to exit code 2."""


def _open_in(path: str, flag: str):
    if path == "-":
        return _nullcontext(sys.stdin)
    try:
        return open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"{flag}: cannot read {path!r}: {exc.strerror}") from exc


@contextmanager
def _nullcontext(stream) -> Iterator[IO[str]]:
    yield stream


@contextmanager
def _open_out(path: str, flag: str) -> Iterator[IO[str]]:
    if path == "-":
        yield sys.stdout
        return
    try:
        f = open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise UsageError(f"{flag}: cannot write {path!r}: {exc.strerror}") from exc
    with f:
        yield f


def _load_json(path: str, flag: str):
    with _open_in(path, flag) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{flag}: {path!r} is not valid JSON: {exc}") from exc


def _model_params(args) -> ModelParameters:
    if not args.params:
        return ModelParameters()
    data = _load_json(args.params, "--params")
    if not isinstance(data, dict):
        raise UsageError("--params: expected a JSON object")
    try:
        return ModelParameters.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--params: {exc}") from exc


def _load_model(path: str):
    with _open_in(path, "--model") as f:
        text = f.read()
    try:
        return persistence.load_archive(text)
    except persistence.ArchiveError as exc:
        raise UsageError(f"--model: {exc}") from exc


def _print_config(command: str, config: dict) -> None:
    # stderr keeps stdout free for `--out -`.
    print(f"effective config: {json.dumps({'command': command, **config}, sort_keys=True, default=str)}",
          file=sys.stderr)


def _parse_disturbance(text: str) -> tuple[float, float]:
    fields = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected t=SECONDS,dalpha=RAD_PER_S, got {text!r}")
        fields[key.strip()] = value
    try:
        return float(fields["t"]), float(fields["dalpha"])
    except (KeyError, ValueError) as exc:
        raise argparse.ArgumentTypeError(
            f"expected t=SECONDS,dalpha=RAD_PER_S, got {text!r}") from exc


def _initial_state(args) -> np.ndarray:
    return make_state(args.init_x, math.radians(args.init_alpha_deg), 0.0, 0.0)


def _steps(duration: float, h: float) -> int:
    steps = int(round(duration / h))
    if steps < 1:
        raise UsageError("--duration: must cover at least one step")
    return steps


def _trace_summary(trace, h: float, settle_s: float = 2.0) -> dict:
    alpha_deg = np.degrees(np.abs(trace.next_states[:, 1]))
    settle = int(round(settle_s / h))
    return {
        "steps": len(trace),
        "duration_s": len(trace) * h,
        "terminated": trace.terminated,
        "max_abs_alpha_deg": float(alpha_deg.max()),
        "max_abs_alpha_deg_after_settle": float(alpha_deg[settle:].max()) if len(trace) > settle else None,
        "max_abs_x_mm": float(np.abs(trace.next_states[:, 0]).max() * 1000.0),
        "max_abs_voltage": float(np.abs(trace.voltages).max()),
    }


def cmd_train(args) -> int:
    params = _model_params(args)
    env = EnvConfig(params=params)
    config = TrainingConfig(
        gamma=args.gamma, learning_rate=args.lr, epsilon_entropy=args.epsilon, seed=args.seed,
        max_trials=args.max_trials, success_steps=args.success_steps,
        success_streak=args.success_streak,
        hidden_width=args.hidden, init_sigma=args.init_sigma, grad_clip=args.grad_clip,
        optimizer=args.optimizer, finetune_trials=args.finetune_trials,
        finetune_learning_rate=args.finetune_lr)
    _print_config("train", {**config.to_dict(), "model_params": params.to_dict(),
                            "out": args.out, "log": args.log, "backend": BACKEND})
    result = train(config, env)
    meta = {"training_config": config.to_dict(), "seed": config.seed,
            "trials_used": result.trials_used, "succeeded": result.succeeded}
    if args.out:
        with _open_out(args.out, "--out") as f:
            f.write(persistence.export_policy(result.params, meta) if result.params.is_finite()
                    else "")
    if args.log:
        with _open_out(args.log, "--log") as f:
            persistence.write_run_log(result, env, f, timestamp=not args.no_timestamp)
    status = "converged" if result.succeeded else "did not converge"
    print(f"training {status} after {result.trials_used} trials "
          f"({result.wall_time_s:.2f} s)", file=sys.stderr)
    return EXIT_OK if result.succeeded else EXIT_FAILED


def _load_grid(path: str | None) -> list[tuple[float, float]]:
    if path is None:
        return list(DEFAULT_GRID)
    data = _load_json(path, "--grid")
    try:
        if isinstance(data, dict):
            return [(float(g), float(lr)) for g in data["gamma"] for lr in data["learning_rate"]]
        return [(float(g), float(lr)) for g, lr in data]
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError("--grid: expected {\"gamma\": [...], \"learning_rate\": [...]} "
                         "or a list of [gamma, learning_rate] pairs") from exc


def cmd_sweep(args) -> int:
    grid = _load_grid(args.grid)
    if not grid:
        raise UsageError("--grid: grid is empty")
    env = EnvConfig(params=_model_params(args))
    base = TrainingConfig(max_trials=args.max_trials, seed=args.seed)
    for g, lr in grid:  # validate before launching anything
        TrainingConfig(gamma=g, learning_rate=lr)
    _print_config("sweep", {"grid": grid, "seeds": args.seeds, "base": base.to_dict(),
                            "parallel": args.parallel, "out": args.out, "backend": BACKEND})
    report = sweep(grid, args.seeds, env=env, base=base, parallel=args.parallel,
                   max_workers=args.workers)
    with _open_out(args.out, "--out") as f:
        persistence.write_sweep_csv(report, f)
    print(f"success rate {report.success_rate:.3f} over {report.runs} runs, "
          f"mean trials to success {report.mean_trials:.1f}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    params, _ = _load_model(args.model)
    env = EnvConfig(params=_model_params(args), max_steps=args.max_steps)
    _print_config("eval", {"model": args.model, "episodes": args.episodes,
                           "deterministic": args.deterministic, "max_steps": args.max_steps,
                           "seed": args.seed})
    rng = np.random.default_rng(args.seed)
    lengths = [len(policy_rollout(env, params, rng, args.max_steps,
                                  deterministic=args.deterministic))
               for _ in range(args.episodes)]
    balanced = sum(n == args.max_steps for n in lengths)
    report = {"episodes": args.episodes, "balanced": balanced,
              "balance_rate": balanced / args.episodes, "mean_length": float(np.mean(lengths))}
    print(json.dumps(report))
    if args.require is not None and report["balance_rate"] < args.require:
        return EXIT_FAILED
    return EXIT_OK


def cmd_simulate(args) -> int:
    params, _ = _load_model(args.model)
    model = _model_params(args)
    steps = _steps(args.duration, model.h)
    env = EnvConfig(params=model, max_steps=steps)
    disturbances = disturbances_from_seconds(args.disturb or [], model.h)
    _print_config("simulate", {"model": args.model, "duration_s": args.duration, "steps": steps,
                               "disturbances": [asdict(d) for d in disturbances],
                               "initial_state": _initial_state(args).tolist(),
                               "deterministic": not args.stochastic, "seed": args.seed,
                               "trace": args.trace})
    trace = policy_rollout(env, params, np.random.default_rng(args.seed), steps,
                           disturbances=disturbances, deterministic=not args.stochastic,
                           initial_state=_initial_state(args))
    if args.trace:
        with _open_out(args.trace, "--trace") as f:
            persistence.write_trace(trace, model, f)
    print(json.dumps(_trace_summary(trace, model.h)))
    return EXIT_FAILED if trace.terminated else EXIT_OK


def _baseline_controller(args, model: ModelParameters):
    data = _load_json(args.config, "--config") if args.config else {}
    if not isinstance(data, dict):
        raise UsageError("--config: expected a JSON object")
    try:
        if args.controller == "pid":
            cfg = baselines.PidConfig(**{"k_p": 50.0, "k_d": 10.0, **data})
            return baselines.PidController(cfg, model.h), asdict(cfg)
        q = data.get("q")
        if q is None and "q_diag" in data:
            q = np.diag(data["q_diag"])
        lqr_cfg = baselines.LqrConfig(**({"q": q} if q is not None else {}),
                                      **({"r": float(data["r"])} if "r" in data else {}))
        design = baselines.design_lqr(model, lqr_cfg)
        return design, {"q": lqr_cfg.q.tolist(), "r": lqr_cfg.r, "k": design.k.tolist(),
                        "riccati_residual": design.residual}
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--config: {exc}") from exc


def cmd_baseline(args) -> int:
    model = _model_params(args)
    steps = _steps(args.duration, model.h)
    env = EnvConfig(params=model, max_steps=steps)
    controller, effective = _baseline_controller(args, model)
    disturbances = disturbances_from_seconds(args.disturb or [], model.h)
    _print_config("baseline", {"controller": args.controller, **effective, "duration_s": args.duration,
                               "initial_state": _initial_state(args).tolist(),
                               "disturbances": [asdict(d) for d in disturbances],
                               "trace": args.trace})
    trace = rollout(env, controller, max_steps=steps, disturbances=disturbances,
                    initial_state=_initial_state(args))
    if args.trace:
        with _open_out(args.trace, "--trace") as f:
            persistence.write_trace(trace, model, f)
    print(json.dumps(_trace_summary(trace, model.h)))
    return EXIT_FAILED if trace.terminated else EXIT_OK


def cmd_export(args) -> int:
    params, meta = _load_model(args.model)
    _print_config("export", {"model": args.model, "out": args.out})
    meta.pop("created", None)
    with _open_out(args.out, "--out") as f:
        f.write(persistence.export_policy(params, meta))
    return EXIT_OK


def _add_model_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--params", metavar="JSON", help="model parameter overrides (JSON object)")


def _add_initial_state(p: argparse.ArgumentParser) -> None:
    p.add_argument("--init-x", type=float, default=0.0, help="initial cart position (m)")
    p.add_argument("--init-alpha-deg", type=float, default=1.0, help="initial pole angle (deg)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pendulum-vpg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a policy with vanilla policy gradient")
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epsilon", type=float, default=0.0, help="entropy coefficient")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-trials", type=int, default=5000)
    p.add_argument("--success-steps", type=int, default=500)
    p.add_argument("--success-streak", type=int, default=1,
                   help="consecutive surviving episodes required to stop")
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--init-sigma", type=float, default=3.0, help="initial exploration std (V)")
    p.add_argument("--grad-clip", type=float, default=10.0, help="gradient norm bound, 0 = off")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--finetune-trials", type=int, default=0)
    p.add_argument("--finetune-lr", type=float, default=0.001)
    p.add_argument("--out", metavar="MODEL.json", help="write the policy archive here")
    p.add_argument("--log", metavar="RUN.json", help="write the JSON run log here")
    p.add_argument("--no-timestamp", action="store_true", help="omit wall-clock fields from the log")
    _add_model_params(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="train over a (gamma, learning rate) grid")
    p.add_argument("--grid", metavar="GRID.json", help="default: 4 gammas x 3 learning rates")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="first seed of each cell")
    p.add_argument("--max-trials", type=int, default=2000)
    p.add_argument("--out", default="-", metavar="SWEEP.csv")
    p.add_argument("--parallel", action="store_true")
    p.add_argument("--workers", type=int)
    _add_model_params(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="balance rate of a trained policy from random starts")
    p.add_argument("--model", required=True)
    p.add_argument("--episodes", type=int, default=100)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--deterministic", dest="deterministic", action="store_true", default=True)
    mode.add_argument("--stochastic", dest="deterministic", action="store_false")
    p.add_argument("--max-steps", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--require", type=float, help="exit 1 if the balance rate is below this")
    _add_model_params(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="run a trained policy, optionally with disturbances")
    p.add_argument("--model", required=True)
    p.add_argument("--duration", type=float, default=20.0, help="seconds")
    p.add_argument("--disturb", type=_parse_disturbance, action="append",
                   metavar="t=S,dalpha=RAD_S", help="angular-velocity impulse; repeatable")
    p.add_argument("--trace", metavar="TRACE.csv")
    p.add_argument("--stochastic", action="store_true", help="sample actions instead of using mu")
    p.add_argument("--seed", type=int, default=0)
    _add_initial_state(p)
    _add_model_params(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("baseline", help="run a PID or LQR controller")
    p.add_argument("--controller", choices=("pid", "lqr"), required=True)
    p.add_argument("--config", metavar="JSON", help="PID gains or LQR q/q_diag/r")
    p.add_argument("--duration", type=float, default=10.0, help="seconds")
    p.add_argument("--disturb", type=_parse_disturbance, action="append", metavar="t=S,dalpha=RAD_S")
    p.add_argument("--trace", metavar="TRACE.csv")
    _add_initial_state(p)
    _add_model_params(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("export", help="validate and re-emit a policy archive")
    p.add_argument("--model", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pendulum-vpg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"pendulum-vpg {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
