"""Compare the GML weight update with the plain 1/(q + eps) update at desk scale.

Example::

    python3 scripts/gml_vs_plain.py --trials 20 --outdir results/update-rule
"""
import argparse
from pathlib import Path

from argraph.ebayes import EBConfig
from argraph.harness import preset, run_montecarlo


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", default="results/update-rule")
    a = p.parse_args()
    for rule in ("gml", "plain"):
        cfg = preset("desk-sparse", trials=a.trials, seed=a.seed, estimators=("RW",),
                     eb=EBConfig(update=rule))
        s = run_montecarlo(cfg, Path(a.outdir) / rule)["estimators"]["RW"]
        print(f"{rule:6s} median e {s['e']['median']:.4f}  median e_SP {s['e_SP']['median']:.4f}  "
              f"mean C {s['C_mean']:.4f}")


if __name__ == "__main__":
    main()
