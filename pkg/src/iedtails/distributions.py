"""Positive noise laws with samplers, CDFs and their IED classes.

Random numbers come from :func:`make_rng`, a counter-based Philox generator
keyed by ``(seed, stream_id)``. Distinct stream ids give independent streams,
so Monte Carlo work can be split into shards whose results do not depend on
how the shards are scheduled.
"""
from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass
from typing import Any, ClassVar

import numpy as np
from scipy import special

from .core import IedClass
from .errors import ArgumentError

__all__ = [
    "make_rng",
    "InverseGamma",
    "ReciprocalExponential",
    "ReciprocalAbsNormal",
    "CounterexampleB",
    "HalfCauchyScaled",
    "Constant",
    "sample",
    "cdf",
    "theoretical_ied",
    "spec_from_dict",
    "write_samples_csv",
]


def make_rng(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Deterministic generator for stream ``stream_id`` of ``seed``."""
    if seed < 0 or stream_id < 0:
        raise ArgumentError("seed and stream_id must be nonnegative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(ss))


class _Spec:
    kind: ClassVar[str]
    has_cdf: ClassVar[bool] = True

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def theoretical_ied(self) -> IedClass | None:
        return None

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **asdict(self)}


def _positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise ArgumentError(f"{name} must be positive and finite, got {value}")


def _out(a):
    return a if np.ndim(a) else float(a)


@dataclass(frozen=True)
class InverseGamma(_Spec):
    """Density ``beta**alpha / Gamma(alpha) * x**(-alpha-1) * exp(-beta/x)``."""

    alpha: float
    beta: float
    kind: ClassVar[str] = "inverse-gamma"

    def __post_init__(self):
        _positive("alpha", self.alpha)
        _positive("beta", self.beta)

    def sample(self, rng, size=None):
        # reciprocal of Gamma(shape=alpha, rate=beta)
        return 1.0 / rng.gamma(self.alpha, 1.0 / self.beta, size)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(x > 0, special.gammaincc(self.alpha, self.beta / np.where(x > 0, x, 1.0)), 0.0)
        return _out(out)

    def theoretical_ied(self):
        return IedClass(1.0, self.beta)


@dataclass(frozen=True)
class ReciprocalExponential(_Spec):
    """``min(1/E, cap)`` with ``E`` exponential of the given rate."""

    rate: float
    cap: float | None = None
    kind: ClassVar[str] = "reciprocal-exponential"

    def __post_init__(self):
        _positive("rate", self.rate)
        if self.cap is not None:
            _positive("cap", self.cap)

    def sample(self, rng, size=None):
        x = 1.0 / rng.exponential(1.0 / self.rate, size)
        if self.cap is not None:
            x = np.minimum(x, self.cap)
        return _out(x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        safe = np.where(x > 0, x, 1.0)
        out = np.where(x > 0, np.exp(-self.rate / safe), 0.0)
        if self.cap is not None:
            out = np.where(x >= self.cap, 1.0, out)
        return _out(out)

    def theoretical_ied(self):
        return IedClass(1.0, self.rate)


@dataclass(frozen=True)
class ReciprocalAbsNormal(_Spec):
    """``1/|N|`` with ``N`` normal(mu, sigma**2)."""

    mu: float = 0.0
    sigma: float = 1.0
    kind: ClassVar[str] = "reciprocal-abs-normal"

    def __post_init__(self):
        _positive("sigma", self.sigma)

    def sample(self, rng, size=None):
        n = np.abs(rng.normal(self.mu, self.sigma, size))
        # |N| < 1e-300 would overflow the reciprocal; redraw those
        bad = n < 1e-300
        while np.any(bad):
            if np.ndim(n) == 0:
                n = abs(rng.normal(self.mu, self.sigma))
            else:
                n[bad] = np.abs(rng.normal(self.mu, self.sigma, int(bad.sum())))
            bad = n < 1e-300
        return _out(1.0 / n)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        t = 1.0 / np.where(x > 0, x, 1.0)
        tail = special.ndtr((-t - self.mu) / self.sigma) + special.ndtr((self.mu - t) / self.sigma)
        return _out(np.where(x > 0, tail, 0.0))

    def theoretical_ied(self):
        return IedClass(2.0, 1.0 / (2.0 * self.sigma**2))


@dataclass(frozen=True)
class CounterexampleB(_Spec):
    """Law with CDF ``exp(1 - tau) * exp(-1/(2**i x))`` below ``2**-i`` and an
    atom at ``2**-i``, where ``tau = c * 2**(i - 1/2)``."""

    index: int
    c: float
    kind: ClassVar[str] = "counterexample-b"

    def __post_init__(self):
        if int(self.index) != self.index or self.index < 1:
            raise ArgumentError("index must be an integer >= 1")
        _positive("c", self.c)

    @property
    def tau(self) -> float:
        return self.c * 2.0 ** (self.index - 0.5)

    @property
    def atom(self) -> float:
        return 2.0 ** -self.index

    def sample(self, rng, size=None):
        u = rng.random(size)
        log_u = np.log(u)
        # inverse CDF on the continuous part, atom for log u >= -tau
        cont = 1.0 / (2.0**self.index * (1.0 - self.tau - np.minimum(log_u, -self.tau)))
        return _out(np.where(log_u < -self.tau, cont, self.atom))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        safe = np.where(x > 0, x, 1.0)
        inner = np.exp(1.0 - self.tau - 1.0 / (2.0**self.index * safe))
        out = np.where(x >= self.atom, 1.0, np.where(x > 0, inner, 0.0))
        return _out(out)

    def theoretical_ied(self):
        return IedClass(1.0, 2.0 ** -self.index)


@dataclass(frozen=True)
class HalfCauchyScaled(_Spec):
    """Density ``2 / (pi s (1 + (a/s)**2))`` on ``a > 0``."""

    scale: float
    kind: ClassVar[str] = "half-cauchy"

    def __post_init__(self):
        _positive("scale", self.scale)

    def sample(self, rng, size=None):
        return _out(self.scale * np.tan(0.5 * np.pi * rng.random(size)))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.where(x > 0, 2.0 / np.pi * np.arctan(np.maximum(x, 0) / self.scale), 0.0))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(np.where(x >= 0, 2.0 / (np.pi * self.scale * (1 + (x / self.scale) ** 2)), 0.0))


@dataclass(frozen=True)
class Constant(_Spec):
    value: float
    kind: ClassVar[str] = "constant"

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise ArgumentError("constant value must be nonnegative and finite")

    def sample(self, rng, size=None):
        if size is None:
            return float(self.value)
        return np.full(size, float(self.value))

    def cdf(self, x):
        return _out(np.where(np.asarray(x, dtype=float) >= self.value, 1.0, 0.0))


_KINDS = {cls.kind: cls for cls in (InverseGamma, ReciprocalExponential, ReciprocalAbsNormal,
                                    CounterexampleB, HalfCauchyScaled, Constant)}


def spec_from_dict(d: dict[str, Any]) -> _Spec:
    """Inverse of ``spec.to_dict()``; unknown kinds or fields are rejected."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _KINDS:
        raise ArgumentError(f"unknown distribution kind {kind!r}; expected one of {sorted(_KINDS)}")
    try:
        return _KINDS[kind](**d)
    except TypeError as exc:
        raise ArgumentError(f"bad parameters for {kind}: {exc}") from None


def sample(spec, rng: np.random.Generator, size=None):
    return spec.sample(rng, size)


def cdf(spec, x):
    return spec.cdf(x)


def theoretical_ied(spec) -> IedClass | None:
    return spec.theoretical_ied()


def write_samples_csv(values, path=None) -> str:
    """``index,value`` CSV with 17 significant digits; returns the text."""
    buf = io.StringIO()
    buf.write("index,value\n")
    for i, v in enumerate(np.asarray(values, dtype=float)):
        buf.write(f"{i},{v:.17g}\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
