"""Decay of <kappa(g_m^A) xi1, xi2> towards <P^A xi1, xi2> over several (n, r).

Prints one CSV block per parameter pair: exact gap, float gap and the ratio
gap / n^{-m/2}, which should stay bounded (by 3 |xi1| |xi2|).
"""
import argparse
import csv
import random
import sys

from htkoop import AdmissibleSet, GroupParams, StepFunction, convergence_table
from htkoop.scalars import QSqrtN


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m-max", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["n", "r", "A", "m", "gap_exact", "gap_float", "gap_over_rate"])
    for n, r in [(2, 1), (2, 2), (3, 1), (3, 2)]:
        params = GroupParams(n, r)
        A = AdmissibleSet.parse(params, "1:0,2:%d" % (n**2 - 1))
        size = r * n**2
        xi1 = StepFunction(params, 2, tuple(rng.randint(-2, 2) for _ in range(size)))
        xi2 = StepFunction(params, 2, tuple(rng.randint(-2, 2) for _ in range(size)))
        for row in convergence_table(A, xi1, xi2, range(1, args.m_max + 1)):
            rate = QSqrtN.power_half(n, -row.m)
            out.writerow([n, r, str(A), row.m, str(row.gap), f"{row.gap.to_float():.12g}",
                          f"{(row.gap / rate).to_float():.12g}"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
