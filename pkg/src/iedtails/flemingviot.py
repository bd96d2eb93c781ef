"""Dependent coefficient pair from two Brownian motions started at 1.

``T`` is the first time either motion hits 0 and ``Y`` the position of the
surviving one at that time. The pair ``(A, B) = (Y**-2, T Y**-2)`` has joint
density

    [exp(-(sqrt(a) - 1/2)**2 / b) - exp(-(sqrt(a) + 1/2)**2 / b)] / (2 sqrt(pi a b))
        * exp(-1/(4b)) / (sqrt(pi) b**1.5),

marginals ``4/(pi(4a**2 + 1))`` for ``A`` and an IED(1, 1/4) law for ``B``.
``A`` and ``B`` are dependent, and the left tail of ``A_2 B_1 + B_2`` is
strictly thinner than independence would give.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, special, stats

from .errors import ArgumentError, ExperimentError, SamplerError
from .io import csv_text, write_text

__all__ = [
    "FvSample",
    "sample_hitting_time",
    "sample_pairs",
    "sample_pair",
    "sample_b",
    "sample_a_marginal",
    "density_joint",
    "density_A",
    "density_B",
    "cdf_A",
    "cdf_B",
    "cdf_hitting_time",
    "joint_cdf",
    "quantile_B",
    "chi_square_test",
    "ExperimentTable",
    "tail_counts",
    "dependent_tail_experiment",
    "VARIANTS",
]

MAX_REJECTIONS = 1_000_000
VARIANTS = ("dependent_sum", "dependent_chain", "independent_control")


@dataclass(frozen=True)
class FvSample:
    a: float
    b: float
    y: float
    t: float


def sample_hitting_time(rng: np.random.Generator, size=None):
    """First passage to 0 of Brownian motion from 1, as ``1/Z**2``."""
    z = rng.standard_normal(size)
    if size is None:
        while z == 0.0:
            z = rng.standard_normal()
        return 1.0 / (z * z)
    bad = z == 0.0
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = z == 0.0
    return 1.0 / (z * z)


def cdf_hitting_time(t):
    """``P(tau <= t) = 2(1 - Phi(1/sqrt(t)))``."""
    t = np.asarray(t, dtype=float)
    return 2.0 * special.ndtr(-1.0 / np.sqrt(np.where(t > 0, t, np.inf)))


def sample_pairs(rng: np.random.Generator, n: int):
    """``n`` independent draws of ``(A, B, Y, T)`` as arrays.

    ``Y`` given ``T`` has density proportional to
    ``phi((y-1)/sqrt(T)) (1 - exp(-2y/T))`` on ``y > 0`` (Brownian motion from
    1 killed at 0). It is drawn by proposing from ``N(1, T)`` and accepting
    with probability ``1 - exp(-2y/T)``.
    """
    t = np.minimum(sample_hitting_time(rng, n), sample_hitting_time(rng, n))
    y = np.empty(n)
    todo = np.arange(n)
    rounds = 0
    while todo.size:
        rounds += 1
        if rounds > MAX_REJECTIONS:
            raise SamplerError(f"Y rejection loop exceeded {MAX_REJECTIONS} rounds")
        tt = t[todo]
        prop = 1.0 + np.sqrt(tt) * rng.standard_normal(todo.size)
        u = rng.random(todo.size)
        ok = (prop > 0) & (u < -np.expm1(-2.0 * np.maximum(prop, 0.0) / tt))
        y[todo[ok]] = prop[ok]
        todo = todo[~ok]
    a = y**-2.0
    return a, t * a, y, t


def sample_pair(rng: np.random.Generator) -> FvSample:
    a, b, y, t = sample_pairs(rng, 1)
    return FvSample(float(a[0]), float(b[0]), float(y[0]), float(t[0]))


def sample_b(rng: np.random.Generator, n: int) -> np.ndarray:
    return sample_pairs(rng, n)[1]


def sample_a_marginal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Exact draws from the ``A`` marginal by inversion of ``(2/pi) arctan(2a)``."""
    return 0.5 * np.tan(0.5 * np.pi * rng.random(n))


def density_joint(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ok = (a > 0) & (b > 0)
    sa = np.sqrt(np.where(ok, a, 1.0))
    bb = np.where(ok, b, 1.0)
    # e^{-(s-1/2)^2/b} (1 - e^{-2s/b}), stable for small s/b
    first = np.exp(-((sa - 0.5) ** 2) / bb) * -np.expm1(-2.0 * sa / bb)
    val = first / (2.0 * np.sqrt(np.pi * sa * sa * bb)) * np.exp(-0.25 / bb) / (np.sqrt(np.pi) * bb**1.5)
    out = np.where(ok, val, 0.0)
    return out if out.ndim else float(out)


def density_A(a):
    a = np.asarray(a, dtype=float)
    out = np.where(a >= 0, 4.0 / (np.pi * (4.0 * a * a + 1.0)), 0.0)
    return out if out.ndim else float(out)


def cdf_A(a):
    a = np.asarray(a, dtype=float)
    out = np.where(a > 0, 2.0 / np.pi * np.arctan(2.0 * np.maximum(a, 0.0)), 0.0)
    return out if out.ndim else float(out)


def density_B(b):
    b = np.asarray(b, dtype=float)
    ok = b > 0
    bb = np.where(ok, b, 1.0)
    # inner standard normal mass on [-1/sqrt(2b), 1/sqrt(2b)] is erf(1/(2 sqrt(b)))
    val = special.erf(0.5 / np.sqrt(bb)) * np.exp(-0.25 / bb) / (np.sqrt(np.pi) * bb**1.5)
    out = np.where(ok, val, 0.0)
    return out if out.ndim else float(out)


def _cdf_B_scalar(x: float) -> float:
    if x <= 0:
        return 0.0
    if x <= 1.0:
        v, _ = integrate.quad(density_B, 0.0, x, epsabs=0.0, epsrel=1e-12, limit=200)
        return v
    # upper tail integrated in u = 1/b to keep the interval finite
    tail, _ = integrate.quad(lambda u: density_B(1.0 / u) / (u * u), 0.0, 1.0 / x,
                             epsabs=0.0, epsrel=1e-12, limit=200)
    return 1.0 - tail


def cdf_B(x):
    """CDF of ``B`` by adaptive quadrature of :func:`density_B`."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return _cdf_B_scalar(float(x))
    return np.array([_cdf_B_scalar(float(v)) for v in x.ravel()]).reshape(x.shape)


def _a_mass_given_b(a, b):
    """``P(A <= a, B in db) / db``, the inner integral in closed form.

    With ``u = sqrt(a)`` the ``a``-integral of the joint density is a
    difference of two Gaussian integrals.
    """
    s = math.sqrt(a)
    r = 1.0 / math.sqrt(b)
    inner = 0.5 * (special.erf((s - 0.5) * r) - special.erf((s + 0.5) * r)
                   + 2.0 * special.erf(0.5 * r))
    return inner * math.exp(-0.25 / b) / (math.sqrt(math.pi) * b**1.5)


def joint_cdf(a: float, b: float) -> float:
    """``P(A <= a, B <= b)``; one adaptive quadrature over ``b``."""
    if a <= 0 or b <= 0:
        return 0.0
    if math.isinf(a):
        return 1.0 if math.isinf(b) else _cdf_B_scalar(b)
    if math.isinf(b):
        return float(cdf_A(a))
    f = lambda v: _a_mass_given_b(a, v)
    if b <= 1.0:
        return integrate.quad(f, 0.0, b, epsabs=1e-14, epsrel=1e-11, limit=200)[0]
    head = integrate.quad(f, 0.0, 1.0, epsabs=1e-14, epsrel=1e-11, limit=200)[0]
    tail = integrate.quad(lambda u: f(1.0 / u) / (u * u), 1.0 / b, 1.0,
                          epsabs=1e-14, epsrel=1e-11, limit=200)[0]
    return head + tail


def quantile_B(p: float) -> float:
    if not 0 < p < 1:
        raise ArgumentError("quantile level must lie in (0, 1)")
    return optimize.brentq(lambda x: _cdf_B_scalar(x) - p, 1e-3, 1e12, xtol=1e-14, rtol=1e-13)


def _cell_probabilities(grid: int):
    levels = np.arange(1, grid) / grid
    qa = np.concatenate([[0.0], 0.5 * np.tan(0.5 * np.pi * levels), [np.inf]])
    qb = np.concatenate([[0.0], [quantile_B(p) for p in levels], [np.inf]])
    G = np.array([[joint_cdf(x, y) for y in qb] for x in qa])
    P = np.diff(np.diff(G, axis=0), axis=1)
    return qa, qb, P


_CELLS: dict[int, tuple] = {}


def chi_square_test(a, b, grid: int = 20) -> tuple[float, float]:
    """Pearson chi-square of ``(a, b)`` samples against the joint density on a
    ``grid x grid`` partition by exact marginal quantiles.

    Cells expecting fewer than 5 hits are pooled. Returns the statistic and
    its p-value.
    """
    if grid not in _CELLS:
        _CELLS[grid] = _cell_probabilities(grid)
    qa, qb, P = _CELLS[grid]
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ia = np.searchsorted(qa[1:-1], a, side="right")
    ib = np.searchsorted(qb[1:-1], b, side="right")
    counts = np.bincount(ia * grid + ib, minlength=grid * grid).reshape(grid, grid)
    expected = (a.size * P).ravel()
    counts = counts.ravel()
    # cells with fewer than 5 expected hits are pooled into one
    small = expected < 5.0
    obs = np.concatenate([counts[~small], [counts[small].sum()]]) if small.any() else counts
    exp = np.concatenate([expected[~small], [expected[small].sum()]]) if small.any() else expected
    if exp[-1] <= 0:
        obs, exp = obs[:-1], exp[:-1]
    stat = float(np.sum((obs - exp) ** 2 / exp))
    return stat, float(stats.chi2.sf(stat, exp.size - 1))


# ---------------------------------------------------------------------------
# left-tail experiment


@dataclass
class ExperimentTable:
    eps_grid: np.ndarray
    n: int
    hits: dict[str, np.ndarray]
    m: int

    def rows(self):
        for variant in self.hits:
            for eps, h in zip(self.eps_grid, self.hits[variant]):
                log_p = math.log(h / self.n) if h > 0 else -math.inf
                yield float(eps), self.n, int(h), log_p, eps * log_p, variant

    def eps_log_p(self, variant: str) -> np.ndarray:
        return np.array([r[4] for r in self.rows() if r[5] == variant])

    def to_csv(self, path=None) -> str:
        rows = list(self.rows())
        cols = list(zip(*rows)) if rows else [[]] * 6
        return write_text(csv_text(["epsilon", "n", "hits", "log_p_hat", "eps_log_p", "variant"],
                                   cols), path)

    def to_dict(self):
        return {"m": self.m, "n": self.n,
                "rows": [dict(zip(["epsilon", "n", "hits", "log_p_hat", "eps_log_p", "variant"], r))
                         for r in self.rows()]}


def _count_below(s, eps_grid):
    return np.array([int(np.count_nonzero(s < e)) for e in eps_grid], dtype=np.int64)


def tail_counts(eps_grid, n: int, rng: np.random.Generator, m: int = 50,
                variants: Sequence[str] = VARIANTS) -> dict[str, np.ndarray]:
    """Hit counts of ``{S < eps}`` for each variant from ``n`` draws.

    Every variant is a sum of nonnegative terms whose last term is ``B`` of a
    fresh pair, so draws are filtered on ``B < max(eps)`` before the
    remaining terms are generated. The filter never changes which draws hit.
    The chain ``X_m`` (``X_0 = 0``) is unrolled backwards as
    ``B_m + A_m B_{m-1} + A_m A_{m-1} B_{m-2} + ...`` and filtered after each term.
    """
    eps_grid = np.asarray(eps_grid, dtype=float)
    top = float(eps_grid.max())
    out: dict[str, np.ndarray] = {}
    for variant in variants:
        if variant == "dependent_sum":
            a2, b2, _, _ = sample_pairs(rng, n)
            keep = b2 < top
            a2, b2 = a2[keep], b2[keep]
            b1 = sample_b(rng, a2.size)
            out[variant] = _count_below(a2 * b1 + b2, eps_grid)
        elif variant == "independent_control":
            b2 = sample_b(rng, n)
            b2 = b2[b2 < top]
            a2 = sample_a_marginal(rng, b2.size)
            b1 = sample_b(rng, b2.size)
            out[variant] = _count_below(a2 * b1 + b2, eps_grid)
        elif variant == "dependent_chain":
            if m < 1:
                raise ArgumentError("chain length m must be >= 1")
            a, s, _, _ = sample_pairs(rng, n)
            keep = s < top
            prod, s = a[keep], s[keep]
            for _ in range(m - 1):
                ak, bk, _, _ = sample_pairs(rng, s.size)
                s = s + prod * bk
                keep = s < top
                prod, s = (prod * ak)[keep], s[keep]
            out[variant] = _count_below(s, eps_grid)
        else:
            raise ArgumentError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return out


def required_n(eps: float, min_hits: float = 50.0) -> int:
    """Sample size giving ``min_hits`` expected hits under ``P ~ exp(-1/(2 eps))``."""
    return int(math.ceil(min_hits * math.exp(0.5 / eps)))


def check_experiment_size(eps_grid, n: int, min_hits: float = 50.0) -> None:
    eps_grid = np.asarray(eps_grid, dtype=float)
    if eps_grid.size == 0 or np.any(eps_grid < 0.04) or np.any(eps_grid > 0.5):
        raise ArgumentError("eps_grid must be nonempty and within [0.04, 0.5]")
    need = required_n(float(eps_grid.min()), min_hits)
    if n < need:
        raise ExperimentError(
            f"n={n} gives fewer than {min_hits:g} expected hits at eps={eps_grid.min():g}; "
            f"need n >= {need}"
        )


def dependent_tail_experiment(
    eps_grid,
    n: int,
    rng: np.random.Generator,
    m: int = 50,
    variants: Sequence[str] = VARIANTS,
    chunk: int = 1_000_000,
) -> ExperimentTable:
    """Estimate ``eps log P(S < eps)`` for the dependent pair sum, the chain
    ``X_m`` and an independent control with the same marginals.

    Draws are generated in chunks of ``chunk`` from ``rng``; see
    :mod:`iedtails.harness.runner` for the sharded, multi-worker version.
    """
    eps_grid = np.sort(np.asarray(eps_grid, dtype=float))[::-1]
    check_experiment_size(eps_grid, n)
    hits = {v: np.zeros(eps_grid.size, dtype=np.int64) for v in variants}
    done = 0
    while done < n:
        k = min(chunk, n - done)
        for v, h in tail_counts(eps_grid, k, rng, m, variants).items():
            hits[v] += h
        done += k
    return ExperimentTable(eps_grid, n, hits, m)
