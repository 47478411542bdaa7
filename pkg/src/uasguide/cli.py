"""Command-line entry point: ``uasguide {train,eval,plot,scenario}``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__, kernels
from . import scenario as scn
from .evaluation import (
    CsvFormatError,
    FingerprintMismatch,
    evaluate_moving,
    evaluate_static,
    read_report,
    write_report,
    write_trajectories,
)
from .plotting import emit_plot
from .policy import load_checkpoint
from .ppo import CURVE_COLUMNS, NonFiniteLossError, TrainConfig, train

log = logging.getLogger("uasguide")

EXIT_OK, EXIT_USAGE, EXIT_NONFINITE = 0, 2, 3
CONFIG_VERSION = 1

# flag name -> TrainConfig field
_OVERRIDES = {
    "horizon": ("horizon", int),
    "minibatch_size": ("minibatch_size", int),
    "epochs": ("epochs_per_update", int),
    "gamma": ("gamma", float),
    "lam": ("lam", float),
    "clip": ("clip", float),
    "ent_coef": ("ent_coef", float),
    "vf_coef": ("vf_coef", float),
    "lr": ("learning_rate", float),
    "max_grad_norm": ("max_grad_norm", float),
    "num_envs": ("num_envs", int),
    "reward_scale": ("reward_scale", float),
    "advantage_mode": ("advantage_mode", str),
    "checkpoint_every": ("checkpoint_every", int),
}


class UsageError(Exception):
    pass


def _add_scenario_args(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--scenario", help="scenario JSON file")
    g.add_argument("--preset", choices=sorted(scn.PRESETS), help="built-in scenario")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uasguide", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a policy with PPO")
    _add_scenario_args(t)
    t.add_argument("--steps", type=int, required=True, help="environment steps to train for")
    t.add_argument("--seed", type=int, help="random seed (drawn from the clock and recorded if omitted)")
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--workers", type=int, default=1, help="rollout processes; does not change results")
    t.add_argument("--config", help="JSON file of training hyperparameters")
    for flag, (_, typ) in _OVERRIDES.items():
        t.add_argument("--" + flag.replace("_", "-"), dest=flag, type=typ)
    t.add_argument("--no-adv-norm", action="store_true", help="disable per-batch advantage normalization")

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--ckpt", required=True)
    _add_scenario_args(e, required=False)
    e.add_argument("--episodes", type=int, default=500, help="episodes for intruder scenarios")
    e.add_argument("--spacing", type=float, default=100.0, help="origin spacing (m) for static scenarios")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--report", help="report CSV path")
    e.add_argument("--trajectories", help="trajectory CSV path")

    pl = sub.add_parser("plot", help="render a report or learning curve to SVG")
    pl.add_argument("--report", required=True, help="report CSV or learning-curve CSV")
    pl.add_argument("--trajectories")
    _add_scenario_args(pl, required=False)
    pl.add_argument("--style", choices=["auto", "arrows", "circles"], default="auto")
    pl.add_argument("--every", type=int)
    pl.add_argument("--out", required=True)

    s = sub.add_parser("scenario", help="write a built-in scenario to a JSON file")
    s.add_argument("--preset", choices=sorted(scn.PRESETS), required=True)
    s.add_argument("--out", required=True)
    return parser


def _load_scenario(args):
    """Return ``(scenario, raw_bytes, source_label)``; ``(None, None, None)`` if neither flag was set."""
    if getattr(args, "scenario", None):
        raw = Path(args.scenario).read_bytes()
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise scn.ScenarioError(f"{args.scenario}: invalid JSON ({exc})") from None
        return scn.from_dict(doc), raw, args.scenario
    if getattr(args, "preset", None):
        doc = scn.preset(args.preset)
        raw = (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()
        return scn.from_dict(doc), raw, f"preset:{args.preset}"
    return None, None, None


def _train_config(args, seed: int) -> TrainConfig:
    values = {}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        if doc.pop("version", None) != CONFIG_VERSION:
            raise UsageError(f"{args.config}: config needs \"version\": {CONFIG_VERSION}")
        unknown = sorted(set(doc) - set(TrainConfig.field_names()))
        if unknown:
            raise UsageError(f"{args.config}: unknown config fields {unknown}")
        values.update(doc)
    for flag, (name, _) in _OVERRIDES.items():
        v = getattr(args, flag)
        if v is not None:
            values[name] = v
    if args.no_adv_norm:
        values["normalize_advantages"] = False
    values["total_steps"] = args.steps
    values["seed"] = seed
    return TrainConfig(**values)


def _write_atomic(path: Path, text: str):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def cmd_train(args) -> int:
    seed = args.seed if args.seed is not None else int(time.time_ns() % (2**31))
    started = time.time()
    sc, raw, label = _load_scenario(args)
    cfg = _train_config(args, seed)
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scenario.json").write_bytes(raw)

    def progress(rec):
        log.info("steps=%d episodes=%d reward_mean=%.3f", rec["env_steps"], rec["episodes"],
                 rec["episode_reward_mean"])

    status, code = "completed", EXIT_OK
    try:
        train(sc, cfg, out_dir=out, workers=args.workers, progress=progress)
    except NonFiniteLossError as exc:
        status, code = f"aborted: {exc}", EXIT_NONFINITE
        print(f"error: {exc}; diagnostics {exc.diagnostics}", file=sys.stderr)
    manifest = {
        "tool": "uasguide",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "status": status,
        "scenario": {"source": label, "sha256": hashlib.sha256(raw).hexdigest(),
                     "fingerprint": scn.fingerprint(sc), "copy": "scenario.json"},
        "seed": seed,
        "seed_from_clock": args.seed is None,
        "workers": args.workers,
        "config": asdict(cfg),
        "command": ["uasguide", *args.argv],
        "started": started,
        "finished": time.time(),
        "outputs": {"checkpoint": "checkpoint.json", "curve": "curve.csv"},
    }
    _write_atomic(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'checkpoint.json'}, {out / 'curve.csv'}, {out / 'manifest.json'}")
    return code


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    sc, _, _ = _load_scenario(args)
    if sc is None:
        if ckpt.scenario is None:
            raise UsageError("checkpoint has no embedded scenario; pass --scenario or --preset")
        sc = scn.from_dict(ckpt.scenario)
    policy = ckpt.policy()
    if ckpt.fingerprint is not None and ckpt.fingerprint != scn.fingerprint(sc):
        raise FingerprintMismatch("checkpoint was trained on a different scenario than the one given")
    if sc.kind == "static":
        report = evaluate_static(policy, sc, spacing=args.spacing, seed=args.seed)
    else:
        report = evaluate_moving(policy, sc, episodes=args.episodes, seed=args.seed)
    if args.report:
        write_report(report, args.report)
    if args.trajectories:
        write_trajectories(report, args.trajectories)
    n = len(report.episodes)
    ok = sum(e.success for e in report.episodes)
    print(f"episodes={n} success={ok} success_rate={report.success_rate:.4f}")
    if report.kind == "moving" and n:
        dists = [e.min_distance for e in report.episodes]
        sep_m = sc.separation * scn.WORLD_UNIT_M
        below = sum(d < sep_m for d in dists)
        print(f"min_distance_m: min={min(dists):.2f} mean={sum(dists) / n:.2f} "
              f"below_separation({sep_m:g} m)={below}")
    return EXIT_OK


def _read_curve(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CURVE_COLUMNS:
            raise CsvFormatError(path, 1, "not a learning-curve file")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CURVE_COLUMNS):
                raise CsvFormatError(path, lineno, f"expected {len(CURVE_COLUMNS)} fields, got {len(row)}")
            try:
                rows.append({c: float(v) for c, v in zip(CURVE_COLUMNS, row)})
            except ValueError as exc:
                raise CsvFormatError(path, lineno, str(exc)) from None
        return rows


def cmd_plot(args) -> int:
    with open(args.report, newline="") as fh:
        first = fh.readline().strip()
    if tuple(first.split(",")) == CURVE_COLUMNS:
        svg = emit_plot(_read_curve(args.report))
    else:
        report = read_report(args.report, args.trajectories)
        sc, _, _ = _load_scenario(args)
        svg = emit_plot(report, sc, args.style, args.every)
    Path(args.out).write_text(svg)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_scenario(args) -> int:
    Path(args.out).write_text(json.dumps(scn.preset(args.preset), indent=2) + "\n")
    print(f"wrote {args.out}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "plot": cmd_plot, "scenario": cmd_scenario}


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)  # exits with status 2 and usage text on bad flags
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, scn.ScenarioError, FingerprintMismatch, CsvFormatError, ValueError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
