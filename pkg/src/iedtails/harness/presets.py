"""Experiment presets and the run manifest.

Each preset declares its parameters (with defaults, which double as the
config schema) and a pipeline returning criteria, results and CSV outputs.
Monte Carlo work is cut into fixed shards, see :mod:`.runner`.
"""
from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .. import __version__
from ..arma import ArmaModel, lambda_limit, psi_expansion, simulate
from ..core import IedClass, SeriesWeights, ied_series
from ..distributions import ReciprocalExponential, make_rng
from ..envelope import envelope_report
from ..errors import IedError
from ..flemingviot import (
    VARIANTS,
    ExperimentTable,
    check_experiment_size,
    sample_pairs,
    tail_counts,
)
from ..io import csv_text, dumps
from ..sfpe import ConstantA, FlemingViotPair, iterate, lambda_ar1
from ..tail_estimation import ecdf_left_fit, hill_fit, moment_root_alpha
from .config import RunConfig
from .runner import map_shards, shard_sizes

__all__ = ["Preset", "PRESETS", "run_experiment", "Criterion"]


@dataclass
class Criterion:
    name: str
    measured: Any
    target: str
    passed: bool

    def to_dict(self):
        return {"name": self.name, "measured": self.measured, "target": self.target,
                "pass": bool(self.passed)}


@dataclass
class PresetResult:
    criteria: list[Criterion]
    results: dict[str, Any]
    files: dict[str, str]  # file name -> CSV text


@dataclass
class Preset:
    name: str
    defaults: dict[str, Any]
    pipeline: Callable[[dict, int, int], PresetResult]
    description: str


# ---------------------------------------------------------------------------
# envelope presets


def _envelope_rows(rep, stride: int) -> str:
    """Rows at every ``stride``-th ``n``, wherever the running minimum drops,
    and the last ``n``."""
    idx = np.arange(rep.n_grid.size)
    drops = np.concatenate([[True], rep.running_min[1:] < rep.running_min[:-1]])
    keep = (idx % stride == 0) | drops | (idx == idx[-1])
    return csv_text(["n", "x", "statistic", "running_min"],
                    [rep.n_grid[keep], rep.x[keep], rep.statistic[keep], rep.running_min[keep]])


def _fig1_shard(seed, stream, n, r, rate, cap, window_lo, dip_lo, dip_level, stride):
    noise = ReciprocalExponential(rate, cap=cap)
    spec = ConstantA(r, noise)
    cls = lambda_ar1(noise.theoretical_ied(), r)
    traj = iterate(spec, n, make_rng(seed, stream))
    rep = envelope_report(traj, cls, (window_lo, n), [dip_level])
    dips = envelope_report(traj, cls, (dip_lo, n), [dip_level]).dip_counts[0]
    return {"min": rep.min_on_window, "dips": dips, "level": cls.level,
            "csv": _envelope_rows(rep, stride)}


def _arma_shard(seed, stream, n, phi, theta, rate, cap, window_lo, dip_lo, dip_rel, stride):
    noise = ReciprocalExponential(rate, cap=cap)
    model = ArmaModel(tuple(phi), tuple(theta), noise)
    cls = lambda_limit(psi_expansion(model), noise.theoretical_ied())
    traj = simulate(model, n, make_rng(seed, stream))
    rep = envelope_report(traj, cls, (window_lo, n), [dip_rel * cls.level])
    dips = envelope_report(traj, cls, (dip_lo, n), [dip_rel * cls.level]).dip_counts[0]
    return {"min": rep.min_on_window, "dips": dips, "level": cls.level,
            "csv": _envelope_rows(rep, stride)}


def _fig1(p, seed, workers) -> PresetResult:
    shards = [dict(seed=seed, stream=s, n=p["n"], r=p["r"], rate=p["rate"], cap=p["cap"],
                   window_lo=p["window_lo"], dip_lo=p["dip_window_lo"],
                   dip_level=p["dip_level"], stride=p["csv_stride"]) for s in range(p["seeds"])]
    out = map_shards(_fig1_shard, shards, workers)
    mins = [o["min"] for o in out]
    med = float(np.median(mins))
    dip_seeds = sum(o["dips"] > 0 for o in out)
    lo, hi = p["band"]
    crit = [
        Criterion("median window minimum of (log n) X_n", med, f"in [{lo}, {hi}]", lo <= med <= hi),
        Criterion(f"seeds dipping below {p['dip_level']} on [{p['dip_window_lo']}, n]", dip_seeds,
                  f"<= {p['max_dip_seeds']}", dip_seeds <= p["max_dip_seeds"]),
    ]
    files = {f"fig1_seed{s}.csv": o["csv"] for s, o in enumerate(out)}
    files["fig1_minima.csv"] = csv_text(["seed_index", "min_on_window", "dip_count"],
                                        [list(range(len(out))), mins, [o["dips"] for o in out]])
    return PresetResult(crit, {"theoretical_level": out[0]["level"], "minima": mins,
                               "median_min": med, "dip_seeds": dip_seeds}, files)


def _arma_envelope(p, seed, workers) -> PresetResult:
    shards = [dict(seed=seed, stream=s, n=p["n"], phi=p["phi"], theta=p["theta"], rate=p["rate"],
                   cap=p["cap"], window_lo=p["window_lo"], dip_lo=p["dip_window_lo"],
                   dip_rel=p["dip_rel"], stride=p["csv_stride"]) for s in range(p["seeds"])]
    out = map_shards(_arma_shard, shards, workers)
    mins = [o["min"] for o in out]
    med = float(np.median(mins))
    level = out[0]["level"]
    rel = med / level - 1.0
    crit = [Criterion("median window minimum relative to Lam**(1/rho)", rel,
                      f"|rel| <= {p['rel_band']}", abs(rel) <= p["rel_band"])]
    files = {f"arma_seed{s}.csv": o["csv"] for s, o in enumerate(out)}
    files["arma_minima.csv"] = csv_text(["seed_index", "min_on_window", "dip_count"],
                                        [list(range(len(out))), mins, [o["dips"] for o in out]])
    return PresetResult(crit, {"theoretical_level": level, "minima": mins, "median_min": med},
                        files)


# ---------------------------------------------------------------------------
# series-lambda


def _series_shard(seed, stream, size, weights, rate):
    rng = make_rng(seed, stream)
    noise = ReciprocalExponential(rate)
    s = np.zeros(size)
    for w in weights:
        s += w * noise.sample(rng, size)
    return s


def _series_lambda(p, seed, workers) -> PresetResult:
    ratio, rate = p["ratio"], p["rate"]
    weights = ratio ** np.arange(p["terms"])
    cls = IedClass(1.0, rate)
    formula = ied_series(cls, SeriesWeights(weights, decay_hint=ratio))
    shards = [dict(seed=seed, stream=i, size=k, weights=weights.tolist(), rate=rate)
              for i, k in enumerate(shard_sizes(p["n"], p["shard_size"]))]
    samples = np.concatenate(map_shards(_series_shard, shards, workers))
    fit = ecdf_left_fit(samples, fixed_rho=1.0, model="gengamma")
    lo, hi = p["band"]
    crit = [
        Criterion("Lam from the series formula", formula.lam, "2", abs(formula.lam - 2.0) < 1e-12),
        Criterion("fitted lambda of the summed samples", fit.lambda_hat, f"in [{lo}, {hi}]",
                  lo <= fit.lambda_hat <= hi),
    ]
    st = fit.point_stats
    files = {"series_lambda_fit.csv": csv_text(["x", "ecdf", "hits"], [st["x"], st["ecdf"], st["hits"]])}
    return PresetResult(crit, {"lambda_formula": formula.lam,
                               "formula_diagnostics": formula.diagnostics,
                               "fit": fit.to_dict()}, files)


# ---------------------------------------------------------------------------
# fv-left-tail


def _fv_shard(seed, stream, size, eps, m):
    hits = tail_counts(eps, size, make_rng(seed, stream), m, VARIANTS)
    return {v: h.tolist() for v, h in hits.items()}


def _fv_left_tail(p, seed, workers) -> PresetResult:
    eps = np.sort(np.asarray(p["eps"], dtype=float))[::-1]
    check_experiment_size(eps, p["n"])
    shards = [dict(seed=seed, stream=i, size=k, eps=eps.tolist(), m=p["m"])
              for i, k in enumerate(shard_sizes(p["n"], p["shard_size"]))]
    out = map_shards(_fv_shard, shards, workers)
    hits = {v: np.sum([o[v] for o in out], axis=0) for v in VARIANTS}
    table = ExperimentTable(eps, p["n"], hits, p["m"])
    dep = table.eps_log_p("dependent_sum")
    ctrl = table.eps_log_p("independent_control")
    chain = table.eps_log_p("dependent_chain")
    ref = p["gap_eps"]
    j = int(np.argmin(np.abs(eps - ref)))
    gap = float(ctrl[j] - dep[j])
    # eps is sorted decreasing, so "decreases as eps decreases" means dep is decreasing
    mono = bool(np.all(np.diff(dep) < 0))
    crit = [
        Criterion(f"control minus dependent eps log P at eps={eps[j]:g}", gap,
                  f">= {p['gap']}", gap >= p["gap"]),
        Criterion("dependent eps log P decreases as eps decreases", dep.tolist(),
                  "strictly decreasing", mono),
    ]
    return PresetResult(crit, {"dependent_sum": dep.tolist(), "independent_control": ctrl.tolist(),
                               "dependent_chain": chain.tolist(), "eps": eps.tolist()},
                        {"fv_left_tail.csv": table.to_csv()})


# ---------------------------------------------------------------------------
# kg-right-tail


def _fv_a_shard(seed, stream, size):
    return sample_pairs(make_rng(seed, stream), size)[0]


def _kg_right_tail(p, seed, workers) -> PresetResult:
    shards = [dict(seed=seed, stream=i, size=k)
              for i, k in enumerate(shard_sizes(p["n_moment"], p["shard_size"]))]
    a = np.concatenate(map_shards(_fv_a_shard, shards, workers))
    alpha_m = moment_root_alpha(lambda rng, size: a, tuple(p["bracket"]), a.size, None)
    chain_stream = len(shards)
    x = iterate(FlemingViotPair(), p["chain_n"], make_rng(seed, chain_stream)).values[p["burn"] + 1:]
    k = p["hill_k"] or int(round(x.size ** (2.0 / 3.0)))
    hill = hill_fit(x, k)
    mlo, mhi = p["moment_band"]
    hlo, hhi = p["hill_band"]
    crit = [
        Criterion("moment-root alpha on the A marginal", alpha_m, f"in [{mlo}, {mhi}]",
                  mlo <= alpha_m <= mhi),
        Criterion("Hill alpha on chain samples", hill.alpha_hat, f"in [{hlo}, {hhi}]",
                  hlo <= hill.alpha_hat <= hhi),
    ]
    files = {"kg_right_tail.csv": csv_text(
        ["quantity", "value"],
        [["alpha_moment", "alpha_hill", "hill_k", "hill_constant"],
         [alpha_m, hill.alpha_hat, hill.k, hill.constant_hat]])}
    return PresetResult(crit, {"alpha_moment": alpha_m, "hill": hill.to_dict()}, files)


PRESETS: dict[str, Preset] = {
    "fig1": Preset("fig1", {
        "seeds": 10, "n": 1_000_000, "r": 0.25, "rate": 0.5, "cap": 1.0,
        "window_lo": 1000, "dip_window_lo": 10_000, "dip_level": 1.0,
        "band": [1.5, 2.5], "max_dip_seeds": 1, "csv_stride": 1000,
    }, _fig1, "AR(1) lower envelope, r = 1/4 with capped reciprocal-exponential noise"),
    "arma-envelope": Preset("arma-envelope", {
        "seeds": 10, "n": 1_000_000, "phi": [0.25], "theta": [0.5], "rate": 0.5, "cap": 1.0,
        "window_lo": 1000, "dip_window_lo": 10_000, "dip_rel": 0.5, "rel_band": 0.3,
        "csv_stride": 1000,
    }, _arma_envelope, "ARMA lower envelope against Lam**(1/rho)"),
    "series-lambda": Preset("series-lambda", {
        "ratio": 0.25, "terms": 30, "rate": 0.5, "n": 1_000_000, "shard_size": 100_000,
        "band": [1.6, 2.4],
    }, _series_lambda, "geometric-weight series: formula and fitted decay constant"),
    "fv-left-tail": Preset("fv-left-tail", {
        "eps": [0.2, 0.1, 0.05], "n": 10_000_000, "m": 50, "shard_size": 1_000_000,
        "gap_eps": 0.1, "gap": 0.03,
    }, _fv_left_tail, "dependent pair left tail against an independent control"),
    "kg-right-tail": Preset("kg-right-tail", {
        "n_moment": 10_000_000, "bracket": [0.05, 0.95], "chain_n": 1_000_000, "burn": 1000,
        "hill_k": 0, "shard_size": 1_000_000, "moment_band": [0.48, 0.52],
        "hill_band": [0.4, 0.6],
    }, _kg_right_tail, "right-tail index of the dependent-pair fixed point"),
}


def run_experiment(cfg: RunConfig, write: bool = True) -> dict[str, Any]:
    """Run a preset, write its CSVs and ``manifest.json`` to ``cfg.out``.

    Returns the manifest. Module errors are recorded in the manifest and
    re-raised.
    """
    preset = PRESETS[cfg.experiment]
    t0 = time.perf_counter()
    manifest: dict[str, Any] = {"preset": preset.name, "config": cfg.to_dict(),
                                "version": __version__}
    if write:
        os.makedirs(cfg.out, exist_ok=True)
    try:
        res = preset.pipeline(cfg.params, cfg.seed, cfg.workers)
    except IedError as exc:
        manifest.update({"wall_time_s": time.perf_counter() - t0,
                         "error": {"type": type(exc).__name__, "message": str(exc)},
                         "criteria": []})
        if write:
            _write(os.path.join(cfg.out, "manifest.json"), dumps(manifest, indent=2) + "\n")
        raise
    paths = []
    if write:
        for name, text in res.files.items():
            path = os.path.join(cfg.out, name)
            _write(path, text)
            paths.append(path)
    manifest.update({
        "wall_time_s": time.perf_counter() - t0,
        "criteria": [c.to_dict() for c in res.criteria],
        "all_pass": all(c.passed for c in res.criteria),
        "results": res.results,
        "outputs": paths,
    })
    if write:
        _write(os.path.join(cfg.out, "manifest.json"), dumps(manifest, indent=2) + "\n")
    return manifest


def _write(path, text):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
