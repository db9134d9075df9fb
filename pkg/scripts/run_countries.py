"""AUC-PR on Countries S1/S2/S3 over several seeds.

Usage: python scripts/run_countries.py [--data data/countries] [--tasks S1 S2 S3] [--repeats 5]
"""

import argparse
import json
from dataclasses import replace
from pathlib import Path

from lineare.countries import COUNTRIES_CONFIG, run_countries


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", type=Path, default=Path("data/countries"))
    ap.add_argument("--tasks", nargs="+", default=["S1", "S2", "S3"])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--steps", type=int)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    cfg = COUNTRIES_CONFIG if args.steps is None else replace(COUNTRIES_CONFIG, max_steps=args.steps)
    results = {}
    for task in args.tasks:
        res = run_countries(args.data, task, cfg, seeds=range(args.repeats))
        results[task] = res.to_json()
        print(f"{task}: AUC-PR {res.mean:.3f} +- {res.std:.3f}  per seed {[round(x, 3) for x in res.scores]}", flush=True)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(results, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
