"""Command-line entry point: ``argraph <subcommand> ...``.

Exit codes: 0 on success, 1 on a runtime error, 2 on a usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__

log = logging.getLogger("argraph")


def _write_json(obj, path):
    if path in (None, "-"):
        json.dump(obj, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2)


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def cmd_gen_model(a):
    from .armodel import random_latent_inverse, random_sparse_inverse

    if a.mode == "sparse":
        G = random_sparse_inverse(a.m, a.n, a.density, a.margin, seed=a.seed)
    else:
        G = random_latent_inverse(a.m, a.n, a.density, a.r, a.margin, seed=a.seed)
    _write_json(G.to_dict(), a.out)


def cmd_simulate(a):
    from .armodel import GroundTruth, simulate
    from .tsdata import write_timeseries

    G = GroundTruth.from_dict(_read_json(a.model))
    y = simulate(G.ar, a.N, seed=a.seed, burnin=a.burnin)
    write_timeseries(y, a.out)


def _lags(a):
    from .tsdata import check_toeplitz_pd, covariance_lags, load_timeseries

    y = load_timeseries(a.input)
    if a.demean:
        y = y.demeaned()
    R = covariance_lags(y, a.order)
    if check_toeplitz_pd(R) <= 0:
        raise RuntimeError("sample Toeplitz matrix is not positive definite; too few samples")
    return R, y.N - a.order


def cmd_estimate(a):
    from .baseline import solve_fixed
    from .ebayes import EBConfig, run_latent_eb, run_sparse_eb

    R, Nn = _lags(a)
    cfg = EBConfig.from_dict(_read_json(a.config)) if a.config else EBConfig()
    if a.estimator == "fixed":
        est = solve_fixed(R, Nn, a.gamma, a.gamma_L if a.mode == "latent" else None)
        trace = None
    else:
        run = run_sparse_eb if a.mode == "sparse" else run_latent_eb
        est, trace = run(R, Nn, cfg)
    _write_json(est.to_dict(), a.out)
    if a.trace and trace is not None:
        with open(a.trace, "w") as fh:
            fh.write(trace.to_jsonl())


def cmd_baseline(a):
    from .baseline import latent_grid, run_baseline, sparse_grid, write_score_table

    R, Nn = _lags(a)
    grid = sparse_grid(R, Nn, a.points) if a.mode == "sparse" else latent_grid(R, Nn)
    est, table = run_baseline(R, Nn, grid)
    est.label = "TD-BIC" if a.mode == "latent" else f"TD{a.points}"
    _write_json(est.to_dict(), a.out)
    if a.scores:
        write_score_table(table, a.scores)


def cmd_metrics(a):
    from .armodel import GroundTruth
    from .ebayes import EstimateResult
    from .evalx import evaluate

    est = EstimateResult.from_dict(_read_json(a.estimate))
    G = GroundTruth.from_dict(_read_json(a.model))
    rep = evaluate(est, G, a.pc_threshold, a.sv_threshold)
    _write_json(rep.to_dict(), a.out)


def cmd_montecarlo(a):
    from .harness import ExperimentConfig, preset, run_montecarlo

    overrides = {k: v for k, v in (("trials", a.trials), ("seed", a.seed), ("N", a.N),
                                   ("workers", a.workers)) if v is not None}
    if a.preset:
        cfg = preset(a.preset, **overrides)
    else:
        cfg = ExperimentConfig.from_dict({**_read_json(a.config), **overrides})
    out = a.outdir or cfg.outdir
    summary = run_montecarlo(cfg, out)
    for name, s in summary["estimators"].items():
        print(f"{name:8s} median e {s['e'].get('median', float('nan')):.4g}  "
              f"median e_SP {s['e_SP'].get('median', float('nan')):.4g}  "
              f"mean C {s['C_mean'] if s['C_mean'] is not None else float('nan'):.4g}  "
              f"failures {s['failures']}")
    print(f"TRUE     mean C {summary['C_true_mean']:.4g}")
    print(f"wrote {out}/trials.csv and {out}/summary.json")


def cmd_selftest(a):
    from .oracles import run_all

    results = run_all()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:22s} {r.detail} ({r.seconds:.2f}s)")
    if not all(r.passed for r in results):
        raise RuntimeError("self-test failed")


def build_parser() -> argparse.ArgumentParser:
    from .harness import PRESETS

    p = argparse.ArgumentParser(prog="argraph", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-model", help="draw a random ground-truth model")
    g.add_argument("--mode", choices=["sparse", "latent"], default="sparse")
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--density", type=float, default=0.1)
    g.add_argument("--r", type=int, default=2)
    g.add_argument("--margin", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_gen_model)

    s = sub.add_parser("simulate", help="simulate data from a model JSON")
    s.add_argument("--model", required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--burnin", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    def data_args(q):
        q.add_argument("--mode", choices=["sparse", "latent"], default="sparse")
        q.add_argument("--input", required=True)
        q.add_argument("--order", type=int, required=True)
        q.add_argument("--demean", action="store_true")
        q.add_argument("--out", default="-")

    e = sub.add_parser("estimate", help="estimate a graphical model from a CSV time series")
    data_args(e)
    e.add_argument("--config", help="EBConfig JSON")
    e.add_argument("--estimator", choices=["RW", "fixed"], default="RW")
    e.add_argument("--gamma", type=float, default=10.0)
    e.add_argument("--gamma-L", dest="gamma_L", type=float, default=10.0)
    e.add_argument("--trace", help="write the reweighting trace as JSON lines")
    e.set_defaults(func=cmd_estimate)

    b = sub.add_parser("baseline", help="grid + BIC baseline estimate")
    data_args(b)
    b.add_argument("--points", type=int, default=9)
    b.add_argument("--scores", help="score table CSV")
    b.set_defaults(func=cmd_baseline)

    mt = sub.add_parser("metrics", help="score an estimate against a model")
    mt.add_argument("--estimate", required=True)
    mt.add_argument("--model", required=True)
    mt.add_argument("--pc-threshold", dest="pc_threshold", type=float, default=0.1)
    mt.add_argument("--sv-threshold", dest="sv_threshold", type=float, default=0.1)
    mt.add_argument("--out", default="-")
    mt.set_defaults(func=cmd_metrics)

    mc = sub.add_parser("montecarlo", help="run a Monte Carlo experiment")
    src = mc.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--config", help="ExperimentConfig JSON")
    mc.add_argument("--trials", type=int)
    mc.add_argument("--seed", type=int)
    mc.add_argument("--N", type=int)
    mc.add_argument("--workers", type=int)
    mc.add_argument("--outdir")
    mc.set_defaults(func=cmd_montecarlo)

    st = sub.add_parser("selftest", help="run the numerical oracle checks")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        a.func(a)
    except Exception as exc:
        print(f"argraph {a.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
