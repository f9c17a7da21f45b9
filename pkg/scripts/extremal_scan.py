"""Exhaustive minimum of max(|A+A|, |A.A|) over small (p, n), compared with annealing.

    python3 scripts/extremal_scan.py --pairs 19:4 23:4 29:5
"""

import argparse
import time

from sumproduct.search import BudgetExceeded, anneal_extremal, exhaustive_scan


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", nargs="+", default=["11:3", "19:4", "23:4", "29:5", "37:5"])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--restarts", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print("p,n,exhaustive,members,anneal,seconds")
    for pair in args.pairs:
        p, n = map(int, pair.split(":"))
        t0 = time.perf_counter()
        try:
            rec, _ = exhaustive_scan(p, n)
        except BudgetExceeded as exc:
            print(f"{p},{n},refused ({exc.count} subsets),,,")
            continue
        el = time.perf_counter() - t0
        ann = anneal_extremal(p, n, args.steps, args.seed, restarts=args.restarts)
        members = " ".join(map(str, rec.members))
        print(f"{p},{n},{rec.objective},{members},{ann.objective},{el:.2f}")


if __name__ == "__main__":
    main()
