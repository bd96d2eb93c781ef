"""Estimators for left-tail IED parameters and right-tail power indices.

Two independent routes estimate ``(rho, lam)`` from positive samples:

* :func:`ecdf_left_fit` works on the empirical CDF near zero;
* :func:`laplace_fit` works on the empirical Laplace transform at large
  arguments, where ``-log E[exp(-zX)] ~ c z**(rho/(1+rho))``.

The slowly varying factor is always taken to be 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import optimize, special

from .core import IedClass, bruijn_exponent
from .errors import (
    ArgumentError,
    BracketingError,
    EstimationError,
    HeavyTailError,
)

__all__ = [
    "TailFitReport",
    "RightTailReport",
    "ecdf_left_fit",
    "laplace_fit",
    "hill_fit",
    "moment_root_alpha",
    "m_alpha",
    "pqd_statistic",
]


@dataclass
class TailFitReport:
    rho_hat: float
    lambda_hat: float
    method: str  # "ECDF" or "Laplace"
    model: str
    grid: np.ndarray
    point_stats: dict[str, np.ndarray]
    residual_rms: float
    stderr: dict[str, float]
    n_samples: int
    extra: dict[str, Any] = field(default_factory=dict)

    def as_class(self) -> IedClass:
        return IedClass(self.rho_hat, self.lambda_hat)

    def to_dict(self) -> dict[str, Any]:
        return {
            "rho_hat": self.rho_hat,
            "lambda_hat": self.lambda_hat,
            "method": self.method,
            "model": self.model,
            "grid": self.grid.tolist(),
            "point_stats": {k: np.asarray(v).tolist() for k, v in self.point_stats.items()},
            "residual_rms": self.residual_rms,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "extra": self.extra,
        }


@dataclass
class RightTailReport:
    alpha_hat: float
    k: int
    constant_hat: float
    m_alpha_hat: float | None = None
    stderr: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def _positive_samples(samples, min_samples):
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < min_samples:
        raise ArgumentError(f"need at least {min_samples} samples, got {x.size}")
    if np.any(~(x >= 0)) or not np.all(np.isfinite(x)):
        raise ArgumentError("samples must be finite and nonnegative")
    return x


def _ols(x, y):
    """Slope, intercept and their standard errors."""
    X = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(len(x) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return coef[0], coef[1], math.sqrt(cov[0, 0]), math.sqrt(cov[1, 1]), resid


# ---------------------------------------------------------------------------
# ECDF route


def _log_upper_gamma(s, mu):
    """log of the unnormalised upper incomplete gamma ``Gamma(s, mu)``."""
    q = special.gammaincc(s, mu)
    if q > 0:
        return math.log(q) + special.gammaln(s)
    # asymptotic expansion for large mu
    return (s - 1) * math.log(mu) - mu + math.log1p((s - 1) / mu + (s - 1) * (s - 2) / mu**2)


class _GenGammaTail:
    """Likelihood of a left tail with density proportional to
    ``x**(-a-1) * exp(-lam * x**(-rho))`` below a threshold ``u``.

    Written in ``t = u/x >= 1``: density ``t**(a-1) exp(-mu t**rho)`` with
    ``mu = lam * u**(-rho)``, normalised by ``Gamma(a/rho, mu) / (rho mu**(a/rho))``.
    The sum of ``t**rho`` is evaluated from log-t bins of width ``bin_width``
    with a second-order correction, so one evaluation costs O(bins).
    """

    def __init__(self, tail, u, bin_width=1e-3):
        ell = np.log(u / tail)
        self.n = ell.size
        self.sum_ell = math.fsum(ell)
        idx = np.floor(ell / bin_width).astype(np.int64)
        cnt = np.bincount(idx)
        keep = cnt > 0
        s1 = np.bincount(idx, weights=ell)[keep]
        s2 = np.bincount(idx, weights=ell * ell)[keep]
        cnt = cnt[keep].astype(float)
        self.cnt = cnt
        self.mean = s1 / cnt
        self.var = np.maximum(s2 / cnt - self.mean**2, 0.0)
        self.log_u = math.log(u)

    def sum_pow(self, rho):
        return float(np.sum(self.cnt * np.exp(rho * self.mean + 0.5 * rho * rho * self.var)))

    def nll(self, theta):
        log_s, log_mu, log_rho = theta
        s, mu, rho = math.exp(log_s), math.exp(log_mu), math.exp(log_rho)
        if not (1e-8 < s < 1e6 and mu < 1e8 and 1e-3 < rho < 1e3):
            return 1e300
        a = s * rho
        lognorm = -log_rho - s * log_mu + _log_upper_gamma(s, mu)
        return -((a - 1) * self.sum_ell - mu * self.sum_pow(rho) - self.n * lognorm)

    def to_params(self, theta):
        rho = math.exp(theta[2])
        lam = math.exp(theta[1] + rho * self.log_u)
        return rho, lam, math.exp(theta[0]) * rho

    def log_cdf_ratio(self, x, theta):
        """``log F(x) - log F(u)`` under the fitted model."""
        s, mu, rho = (math.exp(v) for v in theta)
        t = math.exp(self.log_u) / np.asarray(x)
        num = np.array([_log_upper_gamma(s, mu * ti**rho) for ti in np.atleast_1d(t)])
        return num - _log_upper_gamma(s, mu)


def _hessian(f, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    k = x.size
    H = np.empty((k, k))
    f0 = f(x)
    for i in range(k):
        for j in range(i, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = h
            ej[j] = h
            if i == j:
                H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h**2
            else:
                H[i, j] = H[j, i] = (
                    f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
                ) / (4 * h * h)
    return H


def ecdf_left_fit(
    samples,
    *,
    fixed_rho: float | None = None,
    model: str | None = None,
    min_hits: int = 10,
    upper_level: float = 0.05,
    n_grid: int = 24,
    tail_level: float = 0.2,
    min_samples: int = 100_000,
) -> TailFitReport:
    """Estimate ``(rho, lam)`` from the empirical CDF near zero.

    The grid holds empirical quantiles at levels geometrically spaced in
    ``[max(min_hits/n, 1e-6), upper_level]``.

    ``model="loglog"`` regresses ``log(-log F(x))`` on ``log x`` by ordinary
    least squares (slope ``-rho``, intercept ``log lam``). It ignores the
    polynomial prefactor that most laws carry in front of
    ``exp(-lam x**-rho)`` and is biased at practical sample sizes.

    ``model="gengamma"`` (default) fits the left tail below the
    ``tail_level`` quantile by maximum likelihood to a density proportional
    to ``x**(-a-1) exp(-lam x**-rho)``, which includes the prefactor and is
    exact for inverse gamma and reciprocal normal laws.

    With ``fixed_rho`` the default (``model="median"``) estimate is the
    median over the grid of ``-x**rho log F(x)``; ``model="gengamma"`` with
    ``fixed_rho`` fits only the prefactor and ``lam``.
    """
    if model is None:
        model = "gengamma" if fixed_rho is None else "median"
    if fixed_rho is not None and not fixed_rho > 0:
        raise ArgumentError("fixed_rho must be positive")
    x = np.sort(_positive_samples(samples, min_samples))
    n = x.size
    lo = max(min_hits / n, 1e-6)
    if lo >= upper_level:
        raise EstimationError(f"too few samples: min_hits/n = {lo:g} exceeds {upper_level}")
    levels = np.geomspace(lo, upper_level, n_grid)
    q = x[np.ceil(levels * n).astype(np.int64) - 1]
    q = np.unique(q[q > 0])
    hits = np.searchsorted(x, q, side="right")
    ok = (hits >= min_hits) & (hits < n)
    q, hits = q[ok], hits[ok]
    if q.size < 4:
        raise EstimationError(
            f"insufficient left-tail mass: {q.size} usable grid points, need 4 "
            f"(each backed by >= {min_hits} observations)"
        )
    F = hits / n
    log_q = np.log(q)
    y = np.log(-np.log(F))
    stats = {"x": q, "ecdf": F, "hits": hits}

    if model == "median":
        if fixed_rho is None:
            raise ArgumentError("model='median' needs fixed_rho")
        vals = -(q**fixed_rho) * np.log(F)
        lam = float(np.median(vals))
        se = 1.2533 * float(np.std(vals, ddof=1)) / math.sqrt(vals.size)
        stats["lambda_point"] = vals
        resid = np.log(vals) - math.log(lam)
        return TailFitReport(float(fixed_rho), lam, "ECDF", "fixed-rho", q, stats,
                             float(np.sqrt(np.mean(resid**2))), {"rho": 0.0, "lambda": se}, n)

    slope, icpt, se_slope, se_icpt, resid = _ols(log_q, y)
    if model == "loglog":
        lam = math.exp(icpt)
        return TailFitReport(-slope, lam, "ECDF", "loglog", q, stats,
                             float(np.sqrt(np.mean(resid**2))),
                             {"rho": se_slope, "lambda": lam * se_icpt}, n)
    if model != "gengamma":
        raise ArgumentError(f"unknown model {model!r}")

    k = int(math.ceil(tail_level * n))
    u = float(x[k - 1])
    tail = x[:k]
    tail = tail[(tail > 0) & (tail < u)]
    if tail.size < 100:
        raise EstimationError(f"only {tail.size} observations below the {tail_level} quantile")
    lik = _GenGammaTail(tail, u)
    if fixed_rho is None:
        rho0 = max(-slope, 0.05)
        mu0 = math.exp(icpt) * u ** (-rho0)
        nll = lik.nll
        expand = lambda th: np.asarray(th)
        starts = [[math.log(s0), math.log(mu0), math.log(rho0)] for s0 in (0.5, 1.0, 2.0)]
    else:
        log_rho = math.log(fixed_rho)
        mu0 = float(np.median(-(q**fixed_rho) * np.log(F))) * u ** (-fixed_rho)
        expand = lambda th: np.array([th[0], th[1], log_rho])
        nll = lambda th: lik.nll(expand(th))
        starts = [[math.log(s0), math.log(mu0)] for s0 in (0.5, 1.0, 2.0)]
    best = None
    for x0 in starts:
        res = optimize.minimize(nll, x0, method="Nelder-Mead",
                                options={"xatol": 1e-9, "fatol": 1e-9, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
    res = optimize.minimize(nll, best.x, method="BFGS", options={"gtol": 1e-6})
    th = res.x if res.fun <= best.fun else best.x
    theta = expand(th)
    rho, lam, a = lik.to_params(theta)
    if not (math.isfinite(rho) and math.isfinite(lam)):
        raise EstimationError("tail likelihood optimisation failed")
    try:
        cov = np.linalg.inv(_hessian(nll, th))
        if fixed_rho is None:
            g = np.array([0.0, 1.0, rho * lik.log_u])
            se_rho = rho * math.sqrt(max(cov[2, 2], 0.0))
        else:
            g = np.array([0.0, 1.0])
            se_rho = 0.0
        se_lam = lam * math.sqrt(max(float(g @ cov @ g), 0.0))
    except np.linalg.LinAlgError:
        se_rho = se_lam = math.nan
    model_log_F = math.log(k / n) + lik.log_cdf_ratio(q, theta)
    resid = np.log(F) - model_log_F
    stats["model_log_cdf"] = model_log_F
    return TailFitReport(rho, lam, "ECDF", "gengamma", q, stats,
                         float(np.sqrt(np.mean(resid**2))),
                         {"rho": se_rho, "lambda": se_lam}, n,
                         {"prefactor_a": a, "threshold": u, "tail_count": int(tail.size),
                          "loglog_rho": -slope, "loglog_lambda": math.exp(icpt)})


# ---------------------------------------------------------------------------
# Laplace route


def _block_fsum(v, block=4096):
    """Pairwise sums over blocks, then an exactly rounded sum of the blocks."""
    v = np.asarray(v, dtype=float)
    if v.size <= block:
        return math.fsum(v)
    return math.fsum(np.add.reduceat(v, np.arange(0, v.size, block)))


def laplace_fit(
    samples,
    z_grid=None,
    *,
    ess_min: float = 100.0,
    model: str = "corrected",
    min_samples: int = 1,
) -> TailFitReport:
    """Estimate ``(rho, lam)`` from the empirical Laplace transform.

    ``M(z)`` is the mean of ``exp(-zX)`` (exactly rounded sum). Grid points
    whose effective sample size ``n M(z)**2 / M(2z)`` is below ``ess_min``
    are discarded.

    ``model="loglog"`` regresses ``log(-log M)`` on ``log z``.
    ``model="corrected"`` (default) fits ``-log M = c z**e + k log z + d``
    by weighted least squares, absorbing the logarithmic correction that a
    polynomial density prefactor produces. Either way
    ``rho = e/(1-e)`` and ``c = (1 + 1/rho)(lam rho)**(1/(1+rho))``.
    """
    x = _positive_samples(samples, min_samples)
    n = x.size
    z = np.geomspace(1.0, 100.0, 20) if z_grid is None else np.asarray(z_grid, dtype=float)
    if np.any(z <= 0):
        raise ArgumentError("z_grid must be positive")
    M = np.empty(z.size)
    M2 = np.empty(z.size)
    for i, zi in enumerate(z):
        w = np.exp(-zi * x)
        M[i] = _block_fsum(w) / n
        M2[i] = _block_fsum(w * w) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        ess = np.where(M2 > 0, n * M**2 / M2, 0.0)
    ok = (ess >= ess_min) & (M > 0) & (M < 1)
    stats = {"z": z, "M": M, "M2": M2, "ess": ess, "used": ok}
    if ok.sum() < 2:
        raise EstimationError("variance guard violated: fewer than two grid points have enough "
                              f"effective sample size (ess_min={ess_min})")
    zu, Mu = z[ok], M[ok]
    y = -np.log(Mu)
    slope, icpt, se_slope, se_icpt, resid = _ols(np.log(zu), np.log(y))
    if slope >= 1.0 - 1e-6 or float(np.max(np.abs(resid))) < 1e-12 and abs(slope - 1) < 1e-3:
        raise EstimationError(
            f"degenerate curvature: -log M(z) grows linearly (exponent {slope:.6f}); "
            "the sample has no IED left tail"
        )
    if model == "loglog":
        e, c, se_e = slope, math.exp(icpt), se_slope
        rms = float(np.sqrt(np.mean(resid**2)))
        extra = {}
    elif model == "corrected":
        if zu.size < 5:
            raise EstimationError("corrected Laplace model needs at least 5 usable grid points")
        # relative sd of M-hat, propagated to -log M
        sd = np.sqrt(np.maximum(M2[ok] / Mu**2 - 1.0, 1e-300) / n)
        w = 1.0 / sd
        lz = np.log(zu)

        def project(e):
            X = np.column_stack([zu**e, lz, np.ones_like(zu)])
            coef, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
            r = (X @ coef - y) * w
            return float(r @ r), coef

        grid = np.linspace(0.02, 0.98, 97)
        rss = [project(e)[0] for e in grid]
        j = int(np.argmin(rss))
        lo_e, hi_e = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
        r = optimize.minimize_scalar(lambda e: project(e)[0], bounds=(lo_e, hi_e),
                                     method="bounded", options={"xatol": 1e-10})
        e = float(r.x)
        _, coef = project(e)
        c, kappa, d = (float(v) for v in coef)
        if not (c > 0 and 0 < e < 0.98):
            raise EstimationError(f"corrected Laplace fit degenerate (c={c:g}, exponent={e:g})")
        J = np.column_stack([zu**e, c * zu**e * lz, lz, np.ones_like(zu)]) * w[:, None]
        dof = max(zu.size - 4, 1)
        try:
            cov = np.linalg.inv(J.T @ J) * max(r.fun / dof, 1.0)
            se_e = math.sqrt(max(cov[1, 1], 0.0))
        except np.linalg.LinAlgError:
            se_e = math.nan
        rms = math.sqrt(r.fun / zu.size)
        extra = {"log_coefficient": kappa, "offset": d}
    else:
        raise ArgumentError(f"unknown model {model!r}")
    rho = e / (1.0 - e)
    lam = (c / (1.0 + 1.0 / rho)) ** (1.0 + rho) / rho
    se_rho = se_e / (1.0 - e) ** 2
    extra.update({"exponent": e, "coefficient": c, "exponent_stderr": se_e})
    return TailFitReport(rho, lam, "Laplace", model, z, stats, rms,
                         {"rho": se_rho, "lambda": math.nan}, n, extra)


def laplace_exponent_truth(cls: IedClass) -> float:
    return bruijn_exponent(cls)[0]


# ---------------------------------------------------------------------------
# right tail


def hill_fit(samples, k: int) -> RightTailReport:
    """Hill estimator from the ``k`` largest observations.

    ``alpha = k / sum_j log(X_(n-j+1) / X_(n-k))`` and the tail constant is
    ``(k/n) X_(n-k)**alpha``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if not (10 <= k <= n // 10):
        raise ArgumentError(f"k must satisfy 10 <= k <= n/10 (n={n}), got {k}")
    top = np.partition(x, n - k - 1)[n - k - 1:]
    thresh = top.min()
    if not thresh > 0:
        raise EstimationError("Hill estimator needs positive order statistics")
    denom = math.fsum(np.log(np.sort(top)[1:] / thresh))
    if denom <= 0:
        raise EstimationError("tied upper order statistics: log-spacing sum is zero")
    alpha = k / denom
    return RightTailReport(alpha, k, (k / n) * thresh**alpha, stderr=alpha / math.sqrt(k))


def _draw(sampler, rng, n):
    if hasattr(sampler, "sample"):
        return np.asarray(sampler.sample(rng, n), dtype=float)
    return np.asarray(sampler(rng, n), dtype=float)


def m_alpha(a_samples, alpha: float) -> float:
    """Empirical ``E[A**alpha log A]``."""
    a = np.asarray(a_samples, dtype=float)
    a = a[a > 0]
    la = np.log(a)
    return float(np.sum(np.exp(alpha * la) * la)) / np.asarray(a_samples).size


def moment_root_alpha(
    sampler,
    bracket: tuple[float, float],
    n: int,
    rng: np.random.Generator,
    tol: float = 1e-6,
) -> float:
    """Solve ``mean(A**alpha) = 1`` on one fixed sample of ``n`` draws of ``A``.

    ``sampler`` is a distribution spec or a callable ``(rng, size)``.
    Reusing the same draws keeps the objective smooth and monotone between
    sign changes, so bisection is exact up to the sampling error.
    """
    lo, hi = map(float, bracket)
    if not (0 < lo < hi):
        raise ArgumentError("bracket must satisfy 0 < lo < hi")
    a = _draw(sampler, rng, n)
    if np.any(a < 0):
        raise ArgumentError("A must be nonnegative")
    la = np.log(a[a > 0])

    def g(alpha):
        with np.errstate(over="ignore"):
            v = np.exp(alpha * la)
        if not np.all(np.isfinite(v)):
            raise HeavyTailError(
                f"E[A**{alpha:g}] overflows on the sample; the moment is likely infinite, "
                "try a smaller upper bracket"
            )
        return float(np.sum(v)) / a.size - 1.0

    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0:
        return lo
    if g_hi == 0:
        return hi
    if (g_lo > 0) == (g_hi > 0):
        raise BracketingError(
            f"no sign change of mean(A**alpha) - 1 on [{lo:g}, {hi:g}] "
            f"(values {g_lo:.3g}, {g_hi:.3g})"
        )
    root = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(g(root)) >= tol:
        # flat objective: keep bisecting on the residual itself
        a_, b_ = lo, hi
        for _ in range(200):
            mid = 0.5 * (a_ + b_)
            gm = g(mid)
            if abs(gm) < tol:
                return mid
            if (gm > 0) == (g_lo > 0):
                a_ = mid
            else:
                b_ = mid
        raise EstimationError("moment equation could not be solved to the requested tolerance")
    return float(root)


# ---------------------------------------------------------------------------
# dependence


def pqd_statistic(a, b, grid_size: int = 20, min_pairs: int = 10_000) -> float:
    """``min F_AB(x, y) - F_A(x) F_B(y)`` over an empirical-quantile grid.

    Positively quadrant dependent pairs give values above ``-3/sqrt(n)`` up to
    noise. Thresholds are sample values, so the statistic is unchanged by
    strictly increasing transforms of either coordinate.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ArgumentError("a and b must have equal length")
    n = a.size
    if n < min_pairs:
        raise ArgumentError(f"need at least {min_pairs} pairs, got {n}")
    levels = np.arange(1, grid_size + 1) / (grid_size + 1)
    qa = np.quantile(a, levels, method="inverted_cdf")
    qb = np.quantile(b, levels, method="inverted_cdf")
    ia = np.searchsorted(qa, a, side="left")
    ib = np.searchsorted(qb, b, side="left")
    H = np.zeros((grid_size + 1, grid_size + 1), dtype=np.int64)
    np.add.at(H, (ia, ib), 1)
    C = H.cumsum(0).cumsum(1)[:grid_size, :grid_size] / n
    # C[j, k] = F_AB(qa_j, qb_k); the marginals come from the same counts
    Fa = (np.cumsum(np.bincount(ia, minlength=grid_size + 1))[:grid_size] / n)[:, None]
    Fb = (np.cumsum(np.bincount(ib, minlength=grid_size + 1))[:grid_size] / n)[None, :]
    return float(np.min(C - Fa * Fb))
