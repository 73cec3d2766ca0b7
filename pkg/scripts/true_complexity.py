"""Mean complexity C of generated ground-truth models (no estimation involved).

Example::

    python3 scripts/true_complexity.py --m 30 --n 2 --density 0.1 --r 2 --models 50
"""
import argparse

import numpy as np

from argraph.armodel import make_rng, random_latent_inverse, random_sparse_inverse
from argraph.evalx import truth_complexity


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, default=30)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--density", type=float, default=0.1)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--models", type=int, default=50)
    p.add_argument("--seed", type=int, default=10)
    a = p.parse_args()
    C = []
    for i in range(a.models):
        rng = make_rng(a.seed, i)
        if a.r:
            G = random_latent_inverse(a.m, a.n, a.density, a.r, rng=rng)
        else:
            G = random_sparse_inverse(a.m, a.n, a.density, rng=rng)
        C.append(truth_complexity(G))
    print(f"mean C over {a.models} models: {np.mean(C):.4f} (min {min(C):.4f}, max {max(C):.4f})")


if __name__ == "__main__":
    main()
