"""Driven-dissipative warm-up: particles left in a 30x30 box against particles inserted.

    python3 scripts/warmup_curve.py --insertions 3000 --kappa 3 --seeds 3
"""

import argparse
import csv
import sys
from pathlib import Path

from arwlab.experiments import driven_dissipation


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--model", choices=["ssm", "arw"], default="ssm")
    ap.add_argument("--kappa", type=int, default=3)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--insertions", type=int, default=3000)
    ap.add_argument("--seeds", type=int, default=1)
    ap.add_argument("--out", default="out/warmup.csv")
    a = ap.parse_args(argv)
    rows = []
    for s in range(a.seeds):
        st = driven_dissipation(a.n, a.model, a.insertions, s, 2, a.kappa, a.lam)
        rows += [(s, *r) for r in st.curve]
        print(f"seed {s}: {st.remaining} left, {st.dissipated} dissipated", file=sys.stderr)
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    with open(a.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "inserted", "remaining", "dissipated"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
