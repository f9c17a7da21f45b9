"""Random-sample exponent measurement.

Samples n-subsets of F_p^* for each size, keeps the per-size minimum of
max(|A+A|, |A.A|) and fits log(min) against log n.

    python3 scripts/exponent_scan.py --p 10007 --sizes 10 20 40 80 --samples 1000
"""

import argparse
import json
import time

from sumproduct.search import fit_exponent, random_scan, records_csv


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=int, default=10007)
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 40, 80])
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", help="write every sampled record here")
    args = ap.parse_args()

    t0 = time.perf_counter()
    records = []
    for k, n in enumerate(args.sizes):
        recs = random_scan(args.p, n, args.samples, args.seed + k, workers=args.workers)
        best = min(r.objective for r in recs)
        floor_ok = all(r.objective >= 2 * n - 1 for r in recs)
        print(f"n={n:4d}  min={best:6d}  normalized={best / n ** (12 / 11):.3f}  2n-1 floor ok={floor_ok}")
        records += recs
    fit = fit_exponent(records)
    print(json.dumps({"slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual}))
    print(f"elapsed {time.perf_counter() - t0:.2f}s")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(records_csv(records))


if __name__ == "__main__":
    main()
