"""Command line entry point: ``dcsnn run | sweep | validate | preset``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import harness
from . import problems as P
from .geometry import DISTRIBUTIONS

LM_FLAGS = ("mu0", "mu_up", "mu_down", "mu_min", "mu_max", "max_iters", "loss_tol")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run config; flags override its fields")
    p.add_argument("--preset", choices=P.PRESETS)
    p.add_argument("--neurons", "-N", type=int)
    p.add_argument("--dist", choices=DISTRIBUTIONS)
    p.add_argument("--seed", type=int, help="sets init, sample and test seeds together")
    p.add_argument("--init-seed", type=int)
    p.add_argument("--sample-seed", type=int)
    p.add_argument("--test-seed", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--error-every", type=int)
    p.add_argument("--out", type=str)
    for name in LM_FLAGS:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name,
                       type=int if name == "max_iters" else float)


def _config_from_args(args) -> harness.RunConfig:
    base = json.loads(args.config.read_text()) if args.config else {}
    if args.seed is not None:
        base.update(init_seed=args.seed, sample_seed=args.seed, test_seed=args.seed)
    for key in ("preset", "neurons", "dist", "init_seed", "sample_seed", "test_seed",
                "n_test", "error_every", "out"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    lm = dict(base.get("lm", {}))
    for name in LM_FLAGS:
        val = getattr(args, name)
        if val is not None:
            lm[name] = val
    base["lm"] = lm
    return harness.RunConfig.from_dict(base)


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    rec = harness.run(cfg)
    out = rec.to_json()
    out.pop("params")
    print(json.dumps(out, indent=2))
    return 0 if rec.status == "ok" else 1


def cmd_sweep(args) -> int:
    configs, out = harness.load_sweep(args.config)
    out = args.out or out
    rows = harness.sweep(configs, out)
    sys.stdout.write(harness.sweep_csv(rows))
    return 0 if all(r["status"] == "ok" for r in rows) else 1


def cmd_validate(args) -> int:
    from .validate import run_all
    return 0 if run_all() else 1


def cmd_preset(args) -> int:
    names = P.PRESETS if args.name == "all" else [args.name]
    data = [P.preset(n).to_json() for n in names]
    print(json.dumps(data if len(data) > 1 else data[0], indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcsnn", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train one configuration")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a list or grid of configurations")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=str)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run derivative, solver and geometry self-checks")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("preset", help="print a preset as a JSON problem description")
    p.add_argument("name", choices=(*P.PRESETS, "all"))
    p.set_defaults(func=cmd_preset)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"dcsnn: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
