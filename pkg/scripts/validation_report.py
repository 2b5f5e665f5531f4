"""Run the validation suite at one or more sizes and save the JSON reports.

    python3 scripts/validation_report.py --sizes 100,200 --reps 20
"""

import argparse
from pathlib import Path

from vbmse.validation import run_suite, suite_json


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", default="100", help="comma list; p = n for each")
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outdir", default="validation")
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for size in (int(s) for s in args.sizes.split(",")):
        checks, gate = run_suite(size, size, args.reps, args.seed)
        path = out / f"suite_p{size}.json"
        path.write_text(suite_json(checks, gate) + "\n")
        failed = [c.name for c in checks if not c.passed]
        print(f"p=n={size}: {len(checks) - len(failed)}/{len(checks)} checks pass, "
              f"bracket={gate.chosen.label}, failing: {', '.join(failed) or 'none'}")


if __name__ == "__main__":
    main()
