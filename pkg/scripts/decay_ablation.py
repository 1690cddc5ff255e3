#!/usr/bin/env python
"""Optimal-root-action rate on random synthetic trees for each exploration
schedule: fixed c, decay by child visits, decay by parent visits.

    python scripts/decay_ablation.py --runs 300 --iterations 200
"""

import argparse
import dataclasses
import time

from pmcts.search import MctsConfig
from pmcts.synthetic import convergence_run, random_spec

VARIANTS = {
    "fixed-c": {"kappa": 0.0},
    "decay-by-child": {"decay_by": "child"},
    "decay-by-parent": {"decay_by": "parent"},
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--iterations", type=int, default=200)
    ap.add_argument("--depth", type=int, default=3)
    ap.add_argument("--branching", type=int, default=3)
    ap.add_argument("--margin", type=float, default=0.2)
    args = ap.parse_args()

    print("variant,runs,root_hits,leaf_hits,mean_regret,seconds")
    for name, overrides in VARIANTS.items():
        t0 = time.monotonic()
        root = leaf = 0
        regret = 0.0
        for seed in range(args.runs):
            spec = random_spec(args.depth, args.branching, seed, args.margin)
            cfg = dataclasses.replace(MctsConfig(iterations=args.iterations, seed=seed), **overrides)
            r, l, g = convergence_run(spec, cfg)
            root, leaf, regret = root + r, leaf + l, regret + g
        print(f"{name},{args.runs},{root},{leaf},{regret / args.runs:.4f},{time.monotonic() - t0:.2f}")


if __name__ == "__main__":
    main()
