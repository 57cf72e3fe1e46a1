#!/usr/bin/env python3
"""Build a seeded reference survey store end to end: generate, zone-index,
and cross-match into the master catalog. The result is suitable for the
bench20 query set.

Usage: python3 scripts/make_reference_survey.py OUT_DIR [--objects N]
       [--passes N] [--seed N]
"""

import argparse

from skymine import cli


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir")
    ap.add_argument("--objects", type=int, default=300)
    ap.add_argument("--passes", type=int, default=12)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    steps = [
        ["gen", "--objects", str(args.objects), "--passes", str(args.passes),
         "--seed", str(args.seed), "--periodic-frac", "0.1",
         "--transient-frac", "0.05", "--mover-frac", "0.05",
         "--pos-noise", "0.05s", "--out", args.out_dir],
        ["index", "--store", args.out_dir],
        ["master", "--store", args.out_dir, "--radius", "1s"],
    ]
    for argv in steps:
        code = cli.run(argv)
        if code != 0:
            raise SystemExit(code)
    print(f"reference store ready at {args.out_dir}")


if __name__ == "__main__":
    main()
