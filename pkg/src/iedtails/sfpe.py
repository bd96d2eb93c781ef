"""Stochastic fixed point equation ``X = AX + B`` in law.

Coefficient pairs are described by :class:`ConstantA`,
:class:`IndependentPair` and :class:`FlemingViotPair`. The solution is
reached either by running ``X_n = A_n X_{n-1} + B_n`` from ``X_0 = 0`` or by
summing the perpetuity ``sum_i (prod_{j<i} A_j) B_i``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np
from scipy import signal

from . import flemingviot
from .core import IedClass
from .distributions import spec_from_dict
from .errors import ArgumentError, DivergenceError
from .trajectory import Trajectory

__all__ = [
    "ConstantA",
    "IndependentPair",
    "FlemingViotPair",
    "pair_from_dict",
    "validate_essinf",
    "iterate",
    "iterate_many",
    "SeriesDraw",
    "series_solution",
    "series_solution_many",
    "lambda_ar1",
    "lambda_fixed_point",
    "lambda_n_fixed_point",
    "ContractionReport",
    "contraction_check",
    "PqdWarning",
]

SERIES_RUN = 32
SERIES_CAP = 1_000_000


class PqdWarning(UserWarning):
    """Raised when a closed-form decay constant is requested for a pair that
    is not positively quadrant dependent."""


class _Pair:
    kind: ClassVar[str]
    pqd_theory_applies: ClassVar[bool] = True

    def sample_pairs(self, rng, n):
        raise NotImplementedError

    @property
    def essinf_a(self) -> float:
        raise NotImplementedError

    @property
    def bound_beta(self) -> float | None:
        return None


@dataclass(frozen=True)
class ConstantA(_Pair):
    """``A = r`` almost surely."""

    r: float
    noise: Any
    kind: ClassVar[str] = "constant-a"

    def __post_init__(self):
        if not (0.0 <= self.r < 1.0):
            raise ArgumentError(f"r must lie in [0, 1), got {self.r}")
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", spec_from_dict(self.noise))

    def sample_pairs(self, rng, n):
        return np.full(n, float(self.r)), np.asarray(self.noise.sample(rng, n), dtype=float)

    @property
    def essinf_a(self):
        return float(self.r)

    @property
    def bound_beta(self):
        return float(self.r)

    def to_dict(self):
        return {"kind": self.kind, "r": self.r, "noise": self.noise.to_dict()}


@dataclass(frozen=True)
class IndependentPair(_Pair):
    """``A`` and ``B`` independent. ``essinf`` is the declared essential
    infimum of ``A`` and ``beta`` an optional almost-sure upper bound."""

    spec_a: Any
    spec_b: Any
    essinf: float = 0.0
    beta: float | None = None
    kind: ClassVar[str] = "independent"

    def __post_init__(self):
        for name in ("spec_a", "spec_b"):
            if isinstance(getattr(self, name), dict):
                object.__setattr__(self, name, spec_from_dict(getattr(self, name)))
        if not self.essinf >= 0:
            raise ArgumentError("declared essinf of A must be nonnegative")
        if self.beta is not None and not (0 < self.beta < 1):
            raise ArgumentError("bound beta must lie in (0, 1)")

    def sample_pairs(self, rng, n):
        a = np.asarray(self.spec_a.sample(rng, n), dtype=float)
        return a, np.asarray(self.spec_b.sample(rng, n), dtype=float)

    @property
    def essinf_a(self):
        return float(self.essinf)

    @property
    def bound_beta(self):
        return self.beta

    def to_dict(self):
        return {"kind": self.kind, "spec_a": self.spec_a.to_dict(), "spec_b": self.spec_b.to_dict(),
                "essinf": self.essinf, "beta": self.beta}


@dataclass(frozen=True)
class FlemingViotPair(_Pair):
    """The dependent Brownian pair of :mod:`iedtails.flemingviot`."""

    kind: ClassVar[str] = "fleming-viot"
    pqd_theory_applies: ClassVar[bool] = False

    def sample_pairs(self, rng, n):
        a, b, _, _ = flemingviot.sample_pairs(rng, n)
        return a, b

    @property
    def essinf_a(self):
        return 0.0

    def to_dict(self):
        return {"kind": self.kind}


_PAIRS = {c.kind: c for c in (ConstantA, IndependentPair, FlemingViotPair)}


def pair_from_dict(d: dict[str, Any]) -> _Pair:
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _PAIRS:
        raise ArgumentError(f"unknown coefficient pair {kind!r}; expected one of {sorted(_PAIRS)}")
    try:
        return _PAIRS[kind](**d)
    except TypeError as exc:
        raise ArgumentError(f"bad parameters for {kind}: {exc}") from None


def validate_essinf(spec: _Pair, rng: np.random.Generator, n: int = 1_000_000) -> float:
    """Check the declared essential infimum against ``n`` draws of ``A``.

    Returns the observed minimum; raises if it lies below the declaration by
    more than 1e-6.
    """
    a, _ = spec.sample_pairs(rng, n)
    lo = float(a.min())
    if lo < spec.essinf_a - 1e-6:
        raise ArgumentError(f"declared essinf {spec.essinf_a} exceeds observed minimum {lo}")
    if spec.bound_beta is not None and float(a.max()) > spec.bound_beta + 1e-12:
        raise ArgumentError(f"declared bound {spec.bound_beta} is below observed A {a.max()}")
    return lo


def iterate(spec: _Pair, n: int, rng: np.random.Generator, *, a=None, b=None) -> Trajectory:
    """``X_0 = 0, X_k = A_k X_{k-1} + B_k`` for ``k = 1..n``.

    Coefficients are drawn as one block of ``n`` pairs unless ``a`` and ``b``
    are supplied.
    """
    if n < 1:
        raise ArgumentError("n must be >= 1")
    if a is None or b is None:
        a, b = spec.sample_pairs(rng, n)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if isinstance(spec, ConstantA):
        x = signal.lfilter([1.0], [1.0, -spec.r], b)
    else:
        x = np.empty(n)
        prev = 0.0
        for k, (ak, bk) in enumerate(zip(a.tolist(), b.tolist())):
            prev = ak * prev + bk
            x[k] = prev
    return Trajectory(np.concatenate([[0.0], x]), {"kind": "sfpe", **spec.to_dict()})


def iterate_many(spec: _Pair, n: int, n_chains: int, rng: np.random.Generator) -> np.ndarray:
    """Endpoints ``X_n`` of ``n_chains`` independent chains, stepped together."""
    x = np.zeros(n_chains)
    for _ in range(n):
        a, b = spec.sample_pairs(rng, n_chains)
        x = a * x + b
    return x


@dataclass(frozen=True)
class SeriesDraw:
    value: float
    n_terms: int
    last_product: float

    def __float__(self):
        return self.value


def series_solution(spec: _Pair, tol: float, rng: np.random.Generator,
                    block: int = 64) -> SeriesDraw:
    """One draw of ``sum_i (prod_{j<i} A_j) B_i``, truncated once the running
    product stays below ``tol * (partial sum + tiny)`` for 32 consecutive terms."""
    s, prod, run, k = 0.0, 1.0, 0, 0
    tiny = np.finfo(float).tiny
    while k < SERIES_CAP:
        a, b = spec.sample_pairs(rng, block)
        for ak, bk in zip(a.tolist(), b.tolist()):
            s += prod * bk
            prod *= ak
            k += 1
            run = run + 1 if prod < tol * (s + tiny) else 0
            if run >= SERIES_RUN:
                return SeriesDraw(s, k, prod)
    raise DivergenceError(f"running product did not decay within {SERIES_CAP} terms")


def series_solution_many(spec: _Pair, tol: float, rng: np.random.Generator,
                         size: int) -> tuple[np.ndarray, np.ndarray]:
    """``size`` independent series draws, vectorised across draws.

    Returns the values and the number of terms each used.
    """
    s = np.zeros(size)
    prod = np.ones(size)
    run = np.zeros(size, dtype=np.int64)
    terms = np.zeros(size, dtype=np.int64)
    live = np.arange(size)
    tiny = np.finfo(float).tiny
    k = 0
    while live.size:
        if k >= SERIES_CAP:
            raise DivergenceError(f"running product did not decay within {SERIES_CAP} terms")
        a, b = spec.sample_pairs(rng, live.size)
        s[live] += prod[live] * b
        prod[live] *= a
        k += 1
        small = prod[live] < tol * (s[live] + tiny)
        run[live] = np.where(small, run[live] + 1, 0)
        done = run[live] >= SERIES_RUN
        terms[live[done]] = k
        live = live[~done]
    return s, terms


def _warn_pqd(pair):
    if pair is not None and not pair.pqd_theory_applies:
        warnings.warn(
            f"{pair.kind} coefficients are not positively quadrant dependent; the closed-form "
            "decay constant is not guaranteed for this pair",
            PqdWarning,
            stacklevel=3,
        )


def lambda_ar1(noise_class: IedClass, r: float) -> IedClass:
    """``lam / (1 - r**(rho/(1+rho)))**(1+rho)`` for ``X = rX + B``."""
    if not (0.0 <= r < 1.0):
        raise ArgumentError(f"r must lie in [0, 1), got {r}")
    return lambda_fixed_point(noise_class, r)


def lambda_fixed_point(noise_class: IedClass, essinf_a: float, pair=None) -> IedClass:
    """``(1 - a**(rho/(1+rho)))**(-1-rho) lam`` with ``a = essinf A``."""
    if not (0.0 <= essinf_a < 1.0):
        raise ArgumentError(f"essinf of A must lie in [0, 1), got {essinf_a}")
    _warn_pqd(pair)
    rho = noise_class.rho
    lam = noise_class.lam / (1.0 - essinf_a ** (rho / (1.0 + rho))) ** (1.0 + rho)
    return noise_class.with_lambda(lam)


def lambda_n_fixed_point(noise_class: IedClass, essinf_a: float, n: int, pair=None) -> IedClass:
    """Decay constant of ``X_n``: ``lam ((1 - a**(n e))/(1 - a**e))**(1+rho)``,
    ``e = rho/(1+rho)``."""
    if not (0.0 <= essinf_a < 1.0):
        raise ArgumentError(f"essinf of A must lie in [0, 1), got {essinf_a}")
    if n < 1:
        raise ArgumentError("n must be >= 1")
    _warn_pqd(pair)
    rho = noise_class.rho
    e = rho / (1.0 + rho)
    q = essinf_a**e
    # geometric sum 1 + q + ... + q**(n-1), exact for q = 0
    ratio = math.fsum(q**k for k in range(n)) if n <= 64 else (1.0 - q**n) / (1.0 - q)
    return noise_class.with_lambda(noise_class.lam * ratio ** (1.0 + rho))


@dataclass
class ContractionReport:
    e_log_a: float
    stderr: float
    e_logplus_b: float
    stderr_b: float
    n: int
    passed: bool = field(default=False)

    def to_dict(self):
        return {"e_log_a": self.e_log_a, "stderr": self.stderr, "e_logplus_b": self.e_logplus_b,
                "stderr_b": self.stderr_b, "n": self.n, "pass": self.passed}


def contraction_check(spec: _Pair, n: int, rng: np.random.Generator) -> ContractionReport:
    """Monte Carlo ``E[log A]`` and ``E[log+ B]``; passes when ``E[log A]``
    lies more than three standard errors below 0."""
    if n < 10_000:
        raise ArgumentError("contraction_check needs n >= 10000")
    a, b = spec.sample_pairs(rng, n)
    with np.errstate(divide="ignore"):
        la = np.log(a)
    lb = np.log(np.maximum(b, 1.0))
    if np.any(np.isneginf(la)):
        m, se = -math.inf, 0.0
    else:
        m = math.fsum(la) / n
        se = float(np.std(la, ddof=1)) / math.sqrt(n)
    mb = math.fsum(lb) / n
    seb = float(np.std(lb, ddof=1)) / math.sqrt(n)
    return ContractionReport(m, se, mb, seb, n, bool(m + 3.0 * se < 0.0))
