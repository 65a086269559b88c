"""Command-line front end: ``equilibrium``, ``hotboot``, ``run`` and ``sweep``.

Exit codes: 0 success, 1 configuration or I/O error, 2 equilibrium that
failed its deviation check.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as config_mod
from .channel import LinkGains
from .errors import ConfigError, DomainError
from .learning import HotbootCache
from .sim import (
    SWEEP_FIELDS,
    run_episode,
    summarize,
    sweep,
    sweep_csv,
    train_hotboot,
)
from .stackelberg import stackelberg_equilibrium

log = logging.getLogger("backscatter_game")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNCERTIFIED = 2


def _dump(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2)


def _write(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from exc


def _hotboot_for(cfg):
    hb = cfg.hotboot
    return train_hotboot(cfg.setting, cfg.jammer, hb.realizations, hb.slots, hb.reduction, hb.perturb)


def cmd_equilibrium(cfg, args) -> int:
    eq = stackelberg_equilibrium(LinkGains.from_phy(cfg.setting.phy), cfg.setting.game)
    print(_dump(eq.to_dict()))
    return EXIT_OK if eq.certified else EXIT_UNCERTIFIED


def cmd_hotboot(cfg, args) -> int:
    cache = _hotboot_for(cfg)
    _write(args.out, cache.to_json())
    print(_dump({
        "path": str(args.out),
        "I": cache.meta["I"],
        "N": cache.meta["N"],
        "coverage": cache.meta["coverage"],
        "fingerprint": cache.meta["fingerprint"],
    }))
    return EXIT_OK


def cmd_run(cfg, args) -> int:
    user = cfg.user
    if args.hotboot:
        if user.kind not in ("q-learning", "hotboot-q"):
            raise ConfigError("--hotboot needs a q-learning or hotboot-q user", key="user.kind")
        user = replace(user, kind="hotboot-q", cache=HotbootCache.load(args.hotboot))
    elif user.kind == "hotboot-q" and user.cache_path is None:
        user = replace(user, cache=_hotboot_for(cfg))
    seeds = [args.seed] if args.seed is not None else list(cfg.run.seeds)
    results = [run_episode(cfg.setting, user, cfg.jammer, cfg.run.slots, s,
                           cfg.run.window, cfg.run.threshold) for s in seeds]
    tails = np.array([r.avg_user_utility_tail for r in results])
    convs = [r.convergence_slot for r in results if r.convergence_slot is not None]
    payload = {
        "runs": [r.summary() for r in results],
        "mean_tail_utility": float(tails.mean()),
        "stderr": float(tails.std(ddof=1) / math.sqrt(len(tails))) if len(tails) > 1 else 0.0,
        "median_convergence_slot": float(np.median(convs)) if convs else None,
    }
    if args.trace:
        _write(args.trace, results[0].trace_csv())
    text = _dump(payload)
    if args.out:
        _write(args.out, text + "\n")
    print(text)
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError("--values needs at least one number", key="--values")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"--values must be comma-separated numbers: {exc}", key="--values") from exc


def cmd_sweep(cfg, args) -> int:
    values = _parse_values(args.values)
    hb = cfg.hotboot
    rows = sweep(cfg.setting, args.vary, values, cfg.sweep_user, cfg.jammer, cfg.run.slots,
                 list(cfg.run.seeds), hb.realizations, hb.slots, cfg.run.window, cfg.run.threshold)
    text = sweep_csv(rows)
    if args.out:
        _write(args.out, text)
        print(_dump({"vary": args.vary, "summary": summarize(rows)}))
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "hotboot": cmd_hotboot,
    "run": cmd_run,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="backscatter-game", description=__doc__.splitlines()[0])
    parser.add_argument("-c", "--config", help=f"TOML config (default: ${config_mod.CONFIG_ENV_VAR} "
                                               "or the built-in reference setup)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("equilibrium", help="solve the static game and print the equilibrium as JSON")

    p = sub.add_parser("hotboot", help="pre-train the user's Q-table and write the cache")
    p.add_argument("--out", required=True, help="cache file to write")

    p = sub.add_parser("run", help="play the repeated game for every configured seed")
    p.add_argument("--hotboot", help="cache written by `hotboot`; the user starts from it")
    p.add_argument("--trace", help="CSV path for the per-slot trace of the first run")
    p.add_argument("--seed", type=int, help="run only this seed")
    p.add_argument("--out", help="also write the JSON result here")

    p = sub.add_parser("sweep", help="mean tail utility over a grid of one parameter")
    p.add_argument("--vary", required=True, choices=SWEEP_FIELDS)
    p.add_argument("--values", required=True, help="comma-separated values, e.g. 5,10,15")
    p.add_argument("--out", help="CSV path (default: CSV on stdout)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_mod.load(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
