"""Sample random axisymmetric perturbations of a geodesic sphere and evaluate the weighted inequalities."""

import argparse
import json

import numpy as np

from hypflows.functionals import random_perturbation_study


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=2)
    parser.add_argument("--k", type=int, default=1)
    parser.add_argument("--weight", type=float, default=1.0, help="constant weight f")
    parser.add_argument("--f-const", default=None,
                        help="constant inserted into p_k: a number, 'sphere', or omitted for the weight itself")
    parser.add_argument("--samples", type=int, default=1000)
    parser.add_argument("--amplitude", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    f_const = args.f_const
    if f_const not in (None, "sphere"):
        f_const = float(f_const)
    out = random_perturbation_study(args.n, args.k, args.weight, np.random.default_rng(args.seed),
                                    samples=args.samples, amplitude=args.amplitude, f_const=f_const)
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
