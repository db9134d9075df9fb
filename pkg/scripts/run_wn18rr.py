"""Scaled WN18RR run: k=200, b=1024, n=128, alpha=0.5, beta=1.0, gamma=12.

Usage: python scripts/run_wn18rr.py [--data data/wn18rr] [--steps 100000] [--out runs/wn18rr]

Expects train.txt/valid.txt/test.txt under --data. Prints filtered test
MRR and Hits@10 against the targets and writes the checkpoint, log and
reports under --out.
"""

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from lineare import cli
from lineare.benchmarks import WN18RR_CONFIG, WN18RR_TARGETS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", type=Path, default=Path("data/wn18rr"))
    ap.add_argument("--steps", type=int, default=WN18RR_CONFIG.max_steps)
    ap.add_argument("--lr", type=float, default=WN18RR_CONFIG.learning_rate)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("runs/wn18rr"))
    args = ap.parse_args()
    if not (args.data / "train.txt").is_file():
        sys.exit(f"WN18RR files not found under {args.data}")
    settings = {f.name: getattr(WN18RR_CONFIG, f.name) for f in fields(WN18RR_CONFIG)}
    settings.update(max_steps=args.steps, learning_rate=args.lr, workers=args.workers)
    overrides = [x for k, v in settings.items() for x in ("--set", f"{k}={v}")]
    code = cli.main(["train", "--dataset", str(args.data), "--out", str(args.out), *overrides])
    if code:
        sys.exit(code)
    code = cli.main(["eval", "--checkpoint", str(args.out / cli.CHECKPOINT_NAME), "--dataset", str(args.data),
                     "--workers", str(args.workers), "--out", str(args.out)])
    report = json.loads((args.out / "metrics_test.json").read_text())
    ok = all(report[k] >= v for k, v in WN18RR_TARGETS.items())
    print(f"test MRR {report['mrr']:.4f}  Hits@10 {report['hits10']:.4f}  targets {WN18RR_TARGETS}: {'met' if ok else 'missed'}")
    sys.exit(code)


if __name__ == "__main__":
    main()
