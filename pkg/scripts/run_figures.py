"""Run every experiment sweep, write one CSV and one text report per experiment.

    python3 scripts/run_figures.py --seeds 1-20 --out results
"""

import argparse
import sys
import time
from pathlib import Path

from seqoffload import harness
from seqoffload.cli import parse_seeds


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", default="1-20")
    ap.add_argument("--out", default="results")
    ap.add_argument("--only", help="comma-separated experiment ids")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    seeds = parse_seeds(args.seeds)
    names = args.only.split(",") if args.only else sorted(harness.EXPERIMENTS)
    out = Path(args.out)
    all_ok = True
    for name in names:
        t0 = time.perf_counter()
        spec = harness.SweepSpec.for_experiment(name, seeds, output=str(out / f"{name}.csv"))
        rows = harness.run(spec, harness.default_config(spec), workers=args.workers)
        text = harness.report(rows)
        (out / f"{name}.txt").write_text(text)
        print(text, end="")
        print(f"-- {name}: {len(rows)} rows in {time.perf_counter() - t0:.1f} s\n")
        all_ok &= all(ok for _, ok, _ in harness.verdicts(rows))
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
