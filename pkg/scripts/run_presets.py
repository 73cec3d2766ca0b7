"""Run one or more Monte Carlo presets and print a compact comparison table.

Example::

    python3 scripts/run_presets.py desk-sparse desk-latent --outdir results
"""
import argparse
from pathlib import Path

from argraph.harness import PRESETS, preset, run_montecarlo


def fmt(x):
    return "   -   " if x is None else f"{x:7.4f}"


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("presets", nargs="+", choices=sorted(PRESETS))
    p.add_argument("--outdir", default="results")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    a = p.parse_args()
    over = {k: v for k, v in (("trials", a.trials), ("seed", a.seed)) if v is not None}
    for name in a.presets:
        out = Path(a.outdir) / name
        s = run_montecarlo(preset(name, **over), out)
        print(f"\n{name}  ({s['trials']} trials, {s['failures']} failures)  -> {out}")
        print("estimator  median e  median e_SP  mean C   mean rank")
        for est, st in s["estimators"].items():
            print(f"{est:9s}  {fmt(st['e'].get('median'))}   {fmt(st['e_SP'].get('median'))}    "
                  f"{fmt(st['C_mean'])}  {fmt(st['rank_mean'])}")
        print(f"TRUE                              {fmt(s['C_true_mean'])}")


if __name__ == "__main__":
    main()
