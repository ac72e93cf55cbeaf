"""Tail of the origin's activity for growing truncation radius M (d = 1).

    python3 scripts/fixation_ladder.py --zeta 0.5 --lam 1 --ladder 4 8 16 32 --trials 500
"""

import argparse
import csv
from pathlib import Path

from arwlab.experiments import fixation_tail


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--zeta", type=float, default=0.5)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--ladder", type=int, nargs="+", default=[4, 8, 16, 32])
    ap.add_argument("--horizon", type=float, default=50.0)
    ap.add_argument("--lmax", type=int, default=40)
    ap.add_argument("--observable", choices=["changes", "odometer"], default="changes")
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="out/fixation_ladder.csv")
    a = ap.parse_args(argv)
    tab = fixation_tail(a.zeta, a.lam, a.ladder, a.horizon, range(a.lmax + 1), a.trials, a.seed,
                        observable=a.observable, jobs=a.jobs)
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    rows = tab.rows()
    with open(a.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    for M in tab.ladder:
        print(f"M={M}: P[R >= 1] = {tab.tail(M, 1):.3f}, P[R >= 10] = {tab.tail(M, 10):.3f}")


if __name__ == "__main__":
    main()
