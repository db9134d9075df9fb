"""Train-then-measure runs on the synthetic pattern graphs.

Usage: python scripts/run_pattern_suites.py [--seeds 0 1] [--suites symmetry inversion ...] [--skip-mapping]

Prints held-out Hits@1 and the line-geometry diagnostic for each suite and
seed, then the 1-to-N comparison against frozen-weight TransE.
"""

import argparse

from lineare.pattern_suites import run_mapping_comparison, run_pattern_suite

SUITES = ("symmetry", "antisymmetry", "inversion", "composition")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--suites", nargs="+", choices=SUITES, default=list(SUITES))
    ap.add_argument("--skip-mapping", action="store_true")
    args = ap.parse_args()
    for name in args.suites:
        for seed in args.seeds:
            res = run_pattern_suite(name, seed)
            print(f"seed {seed} {'PASS' if res.passed else 'FAIL'} {res.line()}", flush=True)
    if not args.skip_mapping:
        for seed in args.seeds:
            res = run_mapping_comparison(seed)
            print(f"seed {seed} {'PASS' if res.passed else 'FAIL'} one_to_many: {res.line()}", flush=True)


if __name__ == "__main__":
    main()
