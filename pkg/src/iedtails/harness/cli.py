"""Command line front end (``iedtails`` or ``python -m iedtails``).

Exit codes: 0 success, 2 invalid input, 3 estimation or experiment failure.
Errors are printed to standard error as one line of JSON.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

import numpy as np

from .. import __version__
from ..arma import ArmaModel, lambda_limit, lambda_n, psi_expansion, simulate
from ..core import IedClass
from ..distributions import (
    Constant,
    CounterexampleB,
    HalfCauchyScaled,
    InverseGamma,
    ReciprocalAbsNormal,
    ReciprocalExponential,
    make_rng,
    write_samples_csv,
)
from ..envelope import envelope_report
from ..errors import ArgumentError, IedError, ValidationError
from ..flemingviot import (
    dependent_tail_experiment,
    density_A,
    density_B,
    density_joint,
    sample_pairs,
)
from ..io import csv_text, dumps, to_jsonable
from ..sfpe import (
    ConstantA,
    FlemingViotPair,
    IndependentPair,
    contraction_check,
    iterate,
    lambda_fixed_point,
    lambda_n_fixed_point,
    series_solution_many,
)
from ..tail_estimation import ecdf_left_fit, hill_fit, laplace_fit
from ..trajectory import Trajectory
from .config import OUT_ENV, RunConfig, load_config, resolve_params
from .presets import PRESETS, run_experiment

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


# ---------------------------------------------------------------------------
# argument helpers

_DISTS = {
    "inverse-gamma": lambda a: InverseGamma(a.alpha, a.beta),
    "reciprocal-exponential": lambda a: ReciprocalExponential(a.rate, a.cap),
    "reciprocal-abs-normal": lambda a: ReciprocalAbsNormal(a.mu, a.sigma),
    "counterexample-b": lambda a: CounterexampleB(a.index, a.c),
    "half-cauchy": lambda a: HalfCauchyScaled(a.scale),
    "constant": lambda a: Constant(a.value),
}


def _add_dist_args(p, required=True):
    p.add_argument("--dist", choices=sorted(_DISTS), required=required)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--cap", type=float, default=None)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--index", type=int, default=1)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--value", type=float, default=1.0)


def _dist(args):
    return _DISTS[args.dist](args)


def _add_source_args(p):
    """Samples from ``--input`` CSV (``index,value``) or drawn from ``--dist``."""
    p.add_argument("--input", help="CSV with header index,value")
    _add_dist_args(p, required=False)
    p.add_argument("--n", type=int, default=10_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--json", action="store_true", help="print the report as JSON")


def _read_column(path, name):
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            if name not in header:
                raise ArgumentError(f"{path}: no column {name!r} in header {header}")
            col = header.index(name)
            data = np.loadtxt(fh, delimiter=",", usecols=col, ndmin=1)
    except OSError as exc:
        raise ArgumentError(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise ArgumentError(f"{path}: {exc}") from None
    return data


def _samples(args):
    if args.input:
        return _read_column(args.input, "value")
    if not args.dist:
        raise ArgumentError("give --input or --dist")
    return np.asarray(_dist(args).sample(make_rng(args.seed, args.stream), args.n), dtype=float)


def _emit(text, out=None):
    if out:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _text_value(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return ", ".join(_text_value(x) for x in v)
    return str(v)


def _print_report(d, as_json):
    if as_json:
        print(dumps(d))
        return
    # one level of nesting is flattened to a.b; long arrays are left to --json
    rows = []
    for k, v in to_jsonable(d).items():
        items = v.items() if isinstance(v, dict) else [(None, v)]
        for kk, vv in items:
            if isinstance(vv, dict) or (isinstance(vv, list) and len(vv) > 8):
                continue
            rows.append((k if kk is None else f"{k}.{kk}", vv))
    width = max((len(k) for k, _ in rows), default=0)
    for k, v in rows:
        print(f"{k:<{width}}  {_text_value(v)}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()] if text else []
    except ValueError:
        raise ArgumentError(f"expected comma-separated numbers, got {text!r}") from None


# ---------------------------------------------------------------------------
# commands


def cmd_sample(args):
    x = _dist(args).sample(make_rng(args.seed, args.stream), args.n)
    _emit(write_samples_csv(np.atleast_1d(x)), args.out)


def cmd_fit_left(args):
    rep = ecdf_left_fit(_samples(args), fixed_rho=args.fixed_rho, model=args.model,
                        min_hits=args.min_hits, tail_level=args.tail_level)
    _print_report(rep.to_dict(), args.json)


def cmd_fit_laplace(args):
    z = np.geomspace(args.z_min, args.z_max, args.z_count)
    rep = laplace_fit(_samples(args), z, ess_min=args.ess_min, model=args.model)
    _print_report(rep.to_dict(), args.json)


def cmd_fit_right(args):
    x = _samples(args)
    k = args.k or int(round(x.size ** (2.0 / 3.0)))
    _print_report(hill_fit(x, k).to_dict(), args.json)


def _arma_model(args, need_noise):
    noise = _dist(args) if getattr(args, "dist", None) else None
    if need_noise and noise is None:
        raise ArgumentError("this command needs a noise law (--dist ...)")
    return ArmaModel(tuple(_floats(args.phi)), tuple(_floats(args.theta)), noise)


def _noise_class(args, model):
    if args.rho is not None and args.lam is not None:
        return IedClass(args.rho, args.lam)
    cls = model.noise_class()
    if cls is None:
        raise ArgumentError("noise class unknown: give --rho and --lam or an IED noise law")
    return cls


def cmd_arma(args):
    if args.action == "psi":
        model = _arma_model(args, False)
        exp = psi_expansion(model, args.tol, rho=args.rho)
        _emit(exp.to_csv(), args.out)
    elif args.action == "lambda":
        model = _arma_model(args, False)
        cls = _noise_class(args, model)
        exp = psi_expansion(model, args.tol, rho=cls.rho)
        res = lambda_limit(exp, cls) if args.n is None else lambda_n(exp, cls, args.n)
        out = res.to_dict()
        out.update({"stability": model.stability.to_dict(), "expansion": exp.to_dict()})
        _print_report(out, args.json)
    else:
        model = _arma_model(args, True)
        n = args.n if args.n is not None else 1000
        traj = simulate(model, n, make_rng(args.seed, args.stream), debug=args.debug)
        _emit(traj.to_csv(), args.out)


def _pair(args):
    if args.pair == "fleming-viot":
        return FlemingViotPair()
    if args.pair == "constant-a":
        if not args.dist:
            raise ArgumentError("constant-a needs a noise law (--dist ...)")
        return ConstantA(args.r, _dist(args))
    if not args.dist or not args.a_dist:
        raise ArgumentError("independent pair needs --a-dist and --dist")
    a_args = argparse.Namespace(**{**vars(args), "dist": args.a_dist, "value": args.a_value,
                                   "scale": args.a_scale})
    return IndependentPair(_dist(a_args), _dist(args), essinf=args.essinf)


def cmd_sfpe(args):
    if args.action == "lambda":
        cls = IedClass(args.rho, args.lam)
        pair = FlemingViotPair() if args.pair == "fleming-viot" else None
        res = (lambda_fixed_point(cls, args.essinf, pair) if args.n is None
               else lambda_n_fixed_point(cls, args.essinf, args.n, pair))
        _print_report(res.to_dict(), args.json)
        return
    pair = _pair(args)
    rng = make_rng(args.seed, args.stream)
    if args.action == "iterate":
        _emit(iterate(pair, args.n, rng).to_csv(), args.out)
    elif args.action == "series":
        vals, _ = series_solution_many(pair, args.tol, rng, args.n)
        _emit(write_samples_csv(vals), args.out)
    else:
        _print_report(contraction_check(pair, args.n, rng).to_dict(), True)


def cmd_envelope(args):
    x = _read_column(args.input, "x")
    try:
        traj = Trajectory(x)
    except ValueError as exc:
        raise ArgumentError(f"{args.input}: {exc}") from None
    hi = args.window[1] if args.window else traj.n
    lo = args.window[0] if args.window else 100
    rep = envelope_report(traj, IedClass(args.rho, args.lam), (lo, hi), _floats(args.levels))
    if args.out:
        rep.to_csv(args.out)
    _print_report(rep.summary(), args.json)


def cmd_fv(args):
    if args.action == "sample":
        a, b, y, t = sample_pairs(make_rng(args.seed, args.stream), args.n)
        _emit(csv_text(["index", "a", "b", "y", "t"], [np.arange(args.n), a, b, y, t]), args.out)
    elif args.action == "density":
        out = {}
        if args.a is not None:
            out["density_A"] = density_A(args.a)
        if args.b is not None:
            out["density_B"] = density_B(args.b)
        if args.a is not None and args.b is not None:
            out["density_joint"] = density_joint(args.a, args.b)
        if not out:
            raise ArgumentError("give --a and/or --b")
        _print_report(out, args.json)
    else:
        eps = _floats(args.eps)
        table = dependent_tail_experiment(eps, args.n, make_rng(args.seed, args.stream), m=args.m)
        _emit(table.to_csv(), args.out)


def cmd_experiment(args):
    if args.preset not in PRESETS:
        raise ArgumentError(f"unknown preset {args.preset!r}; expected one of {sorted(PRESETS)}")
    if args.config:
        cfg = load_config(args.config, PRESETS)
        if cfg.experiment != args.preset:
            raise ArgumentError(f"config is for {cfg.experiment!r}, not {args.preset!r}")
    else:
        cfg = RunConfig(args.preset, params=dict(PRESETS[args.preset].defaults))
    overrides = {}
    if args.n is not None:
        overrides["n_moment" if args.preset == "kg-right-tail" else "n"] = args.n
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    cfg.params = resolve_params(cfg.params, overrides, args.preset)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.out = args.out
    if cfg.seed < 0 or cfg.workers < 1:
        raise ArgumentError("seed must be >= 0 and workers >= 1")
    manifest = run_experiment(cfg)
    print(dumps({"preset": manifest["preset"], "all_pass": manifest["all_pass"],
                 "criteria": manifest["criteria"], "out": cfg.out}))


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="iedtails", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample", help="draw samples as an index,value CSV")
    _add_dist_args(s)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_sample)

    s = sub.add_parser("fit-left", help="left-tail fit from the empirical CDF")
    _add_source_args(s)
    s.add_argument("--fixed-rho", type=float)
    s.add_argument("--model", choices=["gengamma", "loglog", "median"])
    s.add_argument("--min-hits", type=int, default=10)
    s.add_argument("--tail-level", type=float, default=0.2)
    s.set_defaults(fn=cmd_fit_left)

    s = sub.add_parser("fit-laplace", help="left-tail fit from the empirical Laplace transform")
    _add_source_args(s)
    s.add_argument("--z-min", type=float, default=1.0)
    s.add_argument("--z-max", type=float, default=100.0)
    s.add_argument("--z-count", type=int, default=20)
    s.add_argument("--ess-min", type=float, default=100.0)
    s.add_argument("--model", choices=["corrected", "loglog"], default="corrected")
    s.set_defaults(fn=cmd_fit_laplace)

    s = sub.add_parser("fit-right", help="Hill estimate of the right-tail index")
    _add_source_args(s)
    s.add_argument("--k", type=int, default=0, help="order statistics used (default n**(2/3))")
    s.set_defaults(fn=cmd_fit_right)

    s = sub.add_parser("arma", help="ARMA psi weights, decay constants and paths")
    s.add_argument("action", choices=["psi", "lambda", "simulate"])
    s.add_argument("--phi", default="")
    s.add_argument("--theta", default="")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--rho", type=float)
    s.add_argument("--lam", type=float)
    s.add_argument("--n", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--debug", action="store_true")
    s.add_argument("--out")
    s.add_argument("--json", action="store_true")
    _add_dist_args(s, required=False)
    s.set_defaults(fn=cmd_arma)

    s = sub.add_parser("sfpe", help="fixed point equation X = AX + B")
    s.add_argument("action", choices=["iterate", "series", "lambda", "contraction"])
    s.add_argument("--pair", choices=["constant-a", "independent", "fleming-viot"],
                   default="constant-a")
    s.add_argument("--r", type=float, default=0.25)
    s.add_argument("--a-dist", choices=sorted(_DISTS))
    s.add_argument("--a-value", type=float, default=0.5)
    s.add_argument("--a-scale", type=float, default=0.5)
    s.add_argument("--essinf", type=float, default=0.0)
    s.add_argument("--rho", type=float, default=1.0)
    s.add_argument("--lam", type=float, default=1.0)
    s.add_argument("--n", type=int)
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--json", action="store_true")
    _add_dist_args(s, required=False)
    s.set_defaults(fn=cmd_sfpe)

    s = sub.add_parser("envelope", help="lower-envelope statistic of an n,x trajectory CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--rho", type=float, required=True)
    s.add_argument("--lam", type=float, required=True)
    s.add_argument("--window", type=int, nargs=2)
    s.add_argument("--levels", default="", help="comma-separated dip levels")
    s.add_argument("--out", help="write the n,x,statistic,running_min table here")
    s.add_argument("--json", action="store_true")
    s.set_defaults(fn=cmd_envelope)

    s = sub.add_parser("fv", help="dependent Brownian coefficient pair")
    s.add_argument("action", choices=["sample", "density", "tail"])
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--a", type=float)
    s.add_argument("--b", type=float)
    s.add_argument("--eps", default="0.2,0.1,0.05")
    s.add_argument("--m", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--json", action="store_true")
    s.set_defaults(fn=cmd_fv)

    s = sub.add_parser("experiment", help="run a preset and write CSVs plus manifest.json")
    s.add_argument("preset", help="fig1, arma-envelope, series-lambda, fv-left-tail or kg-right-tail")
    s.add_argument("--config", help="TOML file with a [run] table and per-preset tables")
    s.add_argument("--seeds", type=int, help="number of seeds (envelope presets)")
    s.add_argument("--n", type=int, help="sample size (n_moment for kg-right-tail)")
    s.add_argument("--seed", type=int, help="master seed")
    s.add_argument("--workers", type=int, help="worker processes; results do not depend on it")
    s.add_argument("--out", help=f"output directory (default ${OUT_ENV} or runs/)")
    s.set_defaults(fn=cmd_experiment)
    return p


def _fail(exc, code):
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "sfpe" and args.action in ("iterate", "series", "contraction") \
                and args.n is None:
            args.n = {"iterate": 1000, "series": 1000, "contraction": 100_000}[args.action]
        args.fn(args)
    except ValidationError as exc:
        return _fail(exc, 2)
    except IedError as exc:
        return _fail(exc, 3)
    except BrokenPipeError:  # pragma: no cover
        return 0
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
