"""Activity profiles and Koopman matrix coefficients for the first Grigorchuk group.

For each generator x and depth cap D, reports <kappa_p(x) 1, 1> with its
truncation bound; bounded activity makes the bound shrink geometrically in D.
"""
import argparse
import sys

from htkoop.tree import BernoulliWeights, CylinderFunction, activity_profile, grigorchuk, koopman_inner_cylinders


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", default="1/3,2/3")
    ap.add_argument("--n-max", type=int, default=20)
    ap.add_argument("--depth-max", type=int, default=16)
    args = ap.parse_args()
    p = BernoulliWeights.parse(args.p)
    gens = grigorchuk()
    print("# activity k_n, n = 0..%d" % args.n_max)
    for name in "abcd":
        print(name, " ".join(map(str, activity_profile(gens[name], args.n_max))))
    print("# generator,depth_cap,value,unresolved_bound")
    one = CylinderFunction.one()
    for name in "abcd":
        for D in range(0, args.depth_max + 1, 2):
            est = koopman_inner_cylinders(gens[name], p, one, one, D)
            print(f"{name},{D},{est.value:.12g},{est.unresolved_bound:.12g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
