"""Command line: generate, solve, sweep, report, validate.

Exit codes: 0 success, 1 a trend verdict failed (``report --strict``),
2 invalid input (bad config, spec or snapshot).  Input errors are printed to
stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import config as config_mod
from . import harness, scenario


def _parse_values(text: str) -> tuple:
    out = []
    for tok in text.split(","):
        v = float(tok)
        out.append(int(v) if v.is_integer() and "." not in tok and "e" not in tok.lower() else v)
    return tuple(out)


def parse_seeds(text: str) -> tuple[int, ...]:
    """``1-20`` or ``1,2,5``."""
    if "-" in text and "," not in text:
        lo, hi = text.split("-")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(s) for s in text.split(","))


def _fail(kind: str, message: str, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return 2


def _load(args):
    cfg = config_mod.load(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def cmd_generate(args) -> int:
    cfg = _load(args)
    sc = scenario.generate(cfg.scenario)
    text = json.dumps(scenario.to_dict(sc), indent=1, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_solve(args) -> int:
    cfg = _load(args)
    if args.scenario:
        sc = scenario.from_dict(json.loads(Path(args.scenario).read_text()))
    else:
        sc = scenario.generate(cfg.scenario)
    print(json.dumps(harness.solve_scenario(sc, cfg), indent=1, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    seeds = parse_seeds(args.seeds)
    changes = {}
    if args.values:
        changes["values"] = _parse_values(args.values)
    if args.policies:
        changes["policies"] = tuple(args.policies.split(","))
    if args.experiment == "custom":
        if not (args.param and args.values and args.policies):
            return _fail("spec", "custom sweeps need --param, --values and --policies")
        spec = harness.SweepSpec("custom", args.param, changes["values"],
                                 changes["policies"], seeds, tier=args.tier)
    else:
        if args.param:
            changes["param"] = args.param
        spec = harness.SweepSpec.for_experiment(args.experiment, seeds, **changes)
    cfg = config_mod.load(args.config) if args.config else harness.default_config(spec)
    out = Path(args.output_dir) / f"{spec.experiment}.csv"
    rows = harness.run(harness.SweepSpec(**{**spec.__dict__, "output": str(out)}), cfg,
                       workers=args.workers)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_report(args) -> int:
    rows = harness.read_csv(args.csv)
    if not rows:
        return _fail("report", f"{args.csv} has no rows")
    text = harness.report(rows)
    print(text, end="")
    if args.output:
        Path(args.output).write_text(text)
    if args.strict and not all(ok for _, ok, _ in harness.verdicts(rows)):
        return 1
    return 0


def cmd_validate(args) -> int:
    cfg = config_mod.load(args.config)
    print(json.dumps({"ok": True, "config": cfg.to_dict()}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqoffload",
                                description="Two-tier sequential task offloading simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def add_config(sp):
        sp.add_argument("--config", help="YAML file or profile name (defaults, tier1)")

    g = sub.add_parser("generate", help="draw a scenario and print it as JSON")
    add_config(g)
    g.add_argument("--seed", type=int)
    g.add_argument("--output", "-o")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve one scenario with the proposed method")
    add_config(s)
    s.add_argument("--seed", type=int)
    s.add_argument("--scenario", help="JSON snapshot written by `generate`")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="run an experiment sweep and write CSV")
    add_config(w)
    w.add_argument("--experiment", required=True,
                   choices=sorted(harness.EXPERIMENTS) + ["custom"])
    w.add_argument("--seeds", default="1-20")
    w.add_argument("--values", help="comma-separated swept values (SI units)")
    w.add_argument("--param")
    w.add_argument("--policies", help="comma-separated policy ids")
    w.add_argument("--tier", type=int, default=1, help="tier of a custom sweep")
    w.add_argument("--output-dir", default="results")
    w.add_argument("--workers", type=int)
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="summarise a sweep CSV")
    r.add_argument("csv")
    r.add_argument("--output", "-o")
    r.add_argument("--strict", action="store_true", help="exit 1 if any verdict fails")
    r.set_defaults(func=cmd_report)

    v = sub.add_parser("validate", help="check a config file against the schema")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except config_mod.ConfigError as exc:
        print(json.dumps(exc.as_dict()), file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
