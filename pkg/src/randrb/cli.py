"""Command line interface.

    randrb run <config> [--seed S] [--realizations R] [--out DIR] [--threads T]
    randrb problem list
    randrb dist export <config> <kind-or-label> [--out FILE] [--data rhs|kappa] [--rank r]
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from .experiment import DIST_KINDS, ConfigError, export_distribution, load_config, run_experiment
from .problems import REGISTRY, UnknownProblem


def _overrides(cfg, args):
    changes = {}
    for name in ("seed", "realizations", "out", "threads"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _cmd_run(args) -> int:
    cfg = _overrides(load_config(args.config), args)
    result = run_experiment(cfg, log=lambda msg: print(msg, file=sys.stderr))
    ok = len(result.rel_l2h1)
    print(f"wrote {result.out} ({ok}/{len(result.seeds)} seeds ok)")
    return 0 if ok else 1


def _cmd_problem_list(args) -> int:
    width = max(len(n) for n in REGISTRY)
    for name, (_, desc) in sorted(REGISTRY.items()):
        print(f"{name:<{width}}  {desc}")
    return 0


def _cmd_dist_export(args) -> int:
    cfg = load_config(args.config)
    labels = {r.label for r in cfg.dists}
    if args.kind not in labels and args.kind not in DIST_KINDS:
        raise ConfigError(f"{args.kind!r} is neither a dist label in the config "
                          f"({sorted(labels)}) nor one of {DIST_KINDS}")
    text = export_distribution(cfg, args.kind, args.out, data=args.data, rank=args.rank)
    if text is not None:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randrb", description=(
        "Randomized local-in-time reduced basis generation for parabolic problems."))
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("config")
    run.add_argument("--seed", type=int, help="base seed (overrides run.seed)")
    run.add_argument("--realizations", type=int, help="number of seeds (overrides run.realizations)")
    run.add_argument("--out", help="output directory (overrides run.out)")
    run.add_argument("--threads", type=int, help="worker processes (overrides run.threads)")
    run.set_defaults(func=_cmd_run)

    prob = sub.add_parser("problem", help="built-in problems")
    psub = prob.add_subparsers(dest="action", required=True)
    plist = psub.add_parser("list", help="list built-in problems")
    plist.set_defaults(func=_cmd_problem_list)

    dist = sub.add_parser("dist", help="time sampling distributions")
    dsub = dist.add_subparsers(dest="action", required=True)
    exp = dsub.add_parser("export", help="write a distribution as CSV")
    exp.add_argument("config")
    exp.add_argument("kind", help=f"a dist label from the config or one of {', '.join(DIST_KINDS)}")
    exp.add_argument("--out", help="output CSV path (default: stdout)")
    exp.add_argument("--data", choices=("rhs", "kappa"), default="rhs")
    exp.add_argument("--rank", type=int, default=1, help="leverage-score rank")
    exp.set_defaults(func=_cmd_dist_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownProblem, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"randrb: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
