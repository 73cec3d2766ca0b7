"""Monte Carlo experiment driver: generate, simulate, estimate, score, summarise."""
from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .armodel import make_rng, random_latent_inverse, random_sparse_inverse, simulate
from .baseline import gamma_max, latent_grid, run_baseline, solve_fixed, sparse_grid
from .ebayes import EBConfig, run_latent_eb, run_sparse_eb
from .evalx import PC_THRESHOLD, SV_THRESHOLD, evaluate, truth_complexity
from .tsdata import covariance_lags

log = logging.getLogger(__name__)

CSV_SCHEMA = 1
CSV_COLUMNS = [
    "trial", "estimator", "status", "e", "e_SP", "e_SL", "C", "C_true", "rank_hat",
    "support_size", "iterations", "gap", "mm_max_increase", "wall_time", "error",
]
SPARSE_ESTIMATORS = ("RW", "TD9", "TD17", "fixed")
LATENT_ESTIMATORS = ("RW", "TD-BIC", "fixed")


@dataclass
class ExperimentConfig:
    mode: str = "sparse"
    m: int = 10
    n: int = 1
    N: int = 500
    trials: int = 20
    density: float = 0.1
    r: int = 0
    estimators: tuple = ("RW", "TD9", "TD17")
    eb: EBConfig = field(default_factory=EBConfig)
    pc_threshold: float = PC_THRESHOLD
    sv_threshold: float = SV_THRESHOLD
    seed: int = 0
    outdir: str = "results"
    margin: float = 0.1
    fixed_gamma: float = 10.0
    fixed_gamma_L: float = 10.0
    record_timing: bool = True
    save_traces: bool = True
    workers: int | None = None

    def __post_init__(self):
        self.estimators = tuple(self.estimators)
        if self.mode not in ("sparse", "latent"):
            raise ValueError("mode must be 'sparse' or 'latent'")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.N <= self.n:
            raise ValueError("N must exceed n")
        allowed = SPARSE_ESTIMATORS if self.mode == "sparse" else LATENT_ESTIMATORS
        bad = [e for e in self.estimators if e not in allowed]
        if bad or not self.estimators:
            raise ValueError(f"unknown estimators {bad} for mode {self.mode}; choose from {allowed}")
        if self.mode == "latent" and not 1 <= self.r < self.m:
            raise ValueError("latent mode needs 1 <= r < m")
        if isinstance(self.eb, dict):
            self.eb = EBConfig.from_dict(self.eb)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimators"] = list(self.estimators)
        d["eb"] = self.eb.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        return cls(**d)


PRESETS = {
    "paper-sparse-n1": dict(mode="sparse", m=30, n=1, N=500, trials=200, density=0.1),
    "paper-sparse-n2": dict(mode="sparse", m=30, n=2, N=500, trials=200, density=0.1),
    "paper-latent-r2": dict(mode="latent", m=30, n=2, N=1000, trials=200, density=0.1, r=2,
                            estimators=("RW", "TD-BIC")),
    "paper-latent-r5": dict(mode="latent", m=30, n=2, N=1000, trials=200, density=0.1, r=5,
                            estimators=("RW", "TD-BIC")),
    "desk-sparse": dict(mode="sparse", m=10, n=1, N=500, trials=20, density=0.1),
    "desk-latent": dict(mode="latent", m=10, n=1, N=1000, trials=10, density=0.1, r=2,
                        estimators=("RW", "TD-BIC")),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig(**{**PRESETS[name], **overrides})


def worker_count(cfg: ExperimentConfig) -> int:
    env = os.environ.get("ARGRAPH_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, cfg.workers or 1)


# ---------------------------------------------------------------------------
# one trial


def _estimate(name, cfg, R, Nn, cache):
    """Run one estimator; returns ``(EstimateResult, trace or None)``."""
    if name == "RW":
        run = run_sparse_eb if cfg.mode == "sparse" else run_latent_eb
        return run(R, Nn, cfg.eb)
    if name == "fixed":
        gl = cfg.fixed_gamma_L if cfg.mode == "latent" else None
        return solve_fixed(R, Nn, cfg.fixed_gamma, gl), None
    if name in ("TD9", "TD17"):
        if "gmax" not in cache:
            cache["gmax"] = gamma_max(R, Nn, cfg.pc_threshold)
        grid = sparse_grid(R, Nn, 9 if name == "TD9" else 17, pc_threshold=cfg.pc_threshold,
                           gmax=cache["gmax"])
    else:
        grid = latent_grid(R, Nn, pc_threshold=cfg.pc_threshold, sv_threshold=cfg.sv_threshold)
    est, _ = run_baseline(R, Nn, grid)
    return est, None


def run_trial(cfg: ExperimentConfig, trial: int):
    """Rows (one per estimator) and EB traces for one seeded trial."""
    rows, traces = [], []
    try:
        rng_model = make_rng(cfg.seed, trial, 0)
        if cfg.mode == "sparse":
            G = random_sparse_inverse(cfg.m, cfg.n, cfg.density, cfg.margin, rng=rng_model)
        else:
            G = random_latent_inverse(cfg.m, cfg.n, cfg.density, cfg.r, cfg.margin, rng=rng_model)
        y = simulate(G.ar, cfg.N, rng=make_rng(cfg.seed, trial, 1))
        R = covariance_lags(y, cfg.n)
    except Exception as exc:  # a bad draw is recorded, not fatal
        for name in cfg.estimators:
            rows.append({"trial": trial, "estimator": name, "status": "failed",
                         "error": f"setup: {exc}"})
        return rows, traces
    C_true = truth_complexity(G)
    Nn = cfg.N - cfg.n
    cache = {}
    for name in cfg.estimators:
        row = {"trial": trial, "estimator": name, "C_true": C_true}
        t0 = time.perf_counter()
        try:
            est, trace = _estimate(name, cfg, R, Nn, cache)
            rep = evaluate(est, G, cfg.pc_threshold, cfg.sv_threshold)
            row.update(status="ok", e=rep.e, e_SP=rep.e_SP, e_SL=rep.e_SL, C=rep.C,
                       rank_hat=rep.rank_hat, support_size=len(rep.support_hat),
                       iterations=est.iterations, gap=est.gap)
            if trace is not None:
                row["mm_max_increase"] = float(np.max(np.diff(trace.objectives), initial=-np.inf))
                traces.append({"trial": trial, "estimator": name,
                               "objectives": trace.objectives.tolist(),
                               "gaps": [r.gap for r in trace.records],
                               "steps": [r.step_change for r in trace.records]})
        except Exception as exc:
            log.warning("trial %d %s failed: %s", trial, name, exc)
            row.update(status="failed", error=str(exc))
        if cfg.record_timing:
            row["wall_time"] = time.perf_counter() - t0
        rows.append(row)
    return rows, traces


# ---------------------------------------------------------------------------
# aggregation


def box_stats(x) -> dict:
    """Median, quartiles and 1.5 IQR whiskers (clipped to the data)."""
    x = np.asarray([v for v in x if v is not None and np.isfinite(v)], dtype=float)
    if x.size == 0:
        return {"n": 0}
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    iqr = q3 - q1
    lo = x[x >= q1 - 1.5 * iqr].min()
    hi = x[x <= q3 + 1.5 * iqr].max()
    return {"n": int(x.size), "median": float(med), "q1": float(q1), "q3": float(q3),
            "whisker_lo": float(lo), "whisker_hi": float(hi), "mean": float(x.mean())}


def _num(v):
    if v in (None, ""):
        return None
    return float(v)


def summarize(rows: list) -> dict:
    """Per-estimator statistics; uses only fields present in the CSV."""
    out = {}
    names = list(dict.fromkeys(r["estimator"] for r in rows))
    for name in names:
        rs = [r for r in rows if r["estimator"] == name]
        ok = [r for r in rs if r["status"] == "ok"]
        C = [_num(r.get("C")) for r in ok]
        mm = [_num(r.get("mm_max_increase")) for r in ok if _num(r.get("mm_max_increase")) is not None]
        s = {
            "count": len(rs), "failures": len(rs) - len(ok),
            "e": box_stats(_num(r.get("e")) for r in ok),
            "e_SP": box_stats(_num(r.get("e_SP")) for r in ok),
            "C_mean": float(np.mean(C)) if C else None,
            "rank_mean": float(np.mean([_num(r.get("rank_hat")) for r in ok])) if ok else None,
        }
        e_sl = [_num(r.get("e_SL")) for r in ok if _num(r.get("e_SL")) is not None]
        if e_sl:
            s["e_SL"] = box_stats(e_sl)
        if mm:
            s["mm_max_increase"] = max(mm)
        out[name] = s
    C_true = {int(r["trial"]): _num(r["C_true"]) for r in rows if _num(r.get("C_true")) is not None}
    return {
        "estimators": out,
        "C_true_mean": float(np.mean(list(C_true.values()))) if C_true else None,
        "failures": sum(1 for r in rows if r["status"] != "ok"),
        "trials": len({int(r["trial"]) for r in rows}),
    }


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_trials_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_montecarlo(cfg: ExperimentConfig, outdir=None) -> dict:
    """Run all trials, write ``trials.csv`` and ``summary.json``; return the summary."""
    out = Path(outdir or cfg.outdir)
    out.mkdir(parents=True, exist_ok=True)
    workers = worker_count(cfg)
    job = partial(run_trial, cfg)
    all_rows, all_traces = [], []
    csv_path = out / "trials.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        if workers == 1:
            results = map(job, range(cfg.trials))
            pool = None
        else:
            pool = ProcessPoolExecutor(max_workers=workers)
            results = pool.map(job, range(cfg.trials))
        try:
            # map yields in trial order, so this single writer keeps the file ordered
            for rows, traces in results:
                for row in rows:
                    writer.writerow({c: _fmt(row.get(c)) for c in CSV_COLUMNS})
                fh.flush()
                all_rows.extend(rows)
                all_traces.extend(traces)
        finally:
            if pool is not None:
                pool.shutdown()
    if cfg.save_traces:
        with open(out / "traces.jsonl", "w") as fh:
            for t in all_traces:
                fh.write(json.dumps(t) + "\n")
    summary = summarize(read_trials_csv(csv_path))
    summary.update(config=cfg.to_dict(), version=__version__, csv_schema=CSV_SCHEMA)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def summarize_csv(path) -> dict:
    return summarize(read_trials_csv(path))


__all__ = ["ExperimentConfig", "PRESETS", "preset", "run_trial", "run_montecarlo",
           "summarize", "summarize_csv", "box_stats"]
