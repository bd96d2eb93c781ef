"""IED classes and closed-form decay-constant arithmetic.

A nonnegative random variable ``X`` belongs to the class ``IED(rho, L, lam)``
when ``x**rho * L(x) * log P(X < x) -> -lam`` as ``x -> 0+``. The functions
here combine such classes under scaling, powers, finite sums and infinite
weighted series, and evaluate the regularly varying normaliser
``x**rho * L(x)`` together with its generalized inverse.

Everything is pure and immutable, and all decay constants are computed in
64-bit floating point with exactly rounded summation (:func:`math.fsum`), so
sums do not depend on the order of their terms.
"""
from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import (
    ArgumentError,
    DivergenceError,
    DomainError,
    IncompatibleClassError,
    UnsupportedError,
)

__all__ = [
    "SlowVarSpec",
    "UNIT",
    "IedClass",
    "SeriesWeights",
    "regvar",
    "envelope_scale",
    "ied_scale",
    "ied_power",
    "ied_sum",
    "ied_series",
    "bruijn_exponent",
]


@dataclass(frozen=True)
class SlowVarSpec:
    """The slowly varying factor ``L`` of an IED class.

    ``SlowVarSpec()`` is the unit function ``L == 1``. A tabulated ``L`` is
    given on a strictly increasing grid and interpolated linearly in
    ``(log x, log L)``; evaluation outside the grid raises
    :class:`DomainError`.
    """

    xs: tuple[float, ...] | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if (self.xs is None) != (self.values is None):
            raise ArgumentError("xs and values must be given together")
        if self.xs is None:
            return
        xs = tuple(float(v) for v in self.xs)
        vals = tuple(float(v) for v in self.values)
        if len(xs) < 2 or len(xs) != len(vals):
            raise ArgumentError("tabulated L needs at least two (x, L(x)) pairs")
        if xs[0] <= 0 or any(b <= a for a, b in zip(xs, xs[1:])):
            raise ArgumentError("tabulation grid must be positive and strictly increasing")
        if any(not v > 0 for v in vals):
            raise ArgumentError("tabulated L values must be strictly positive")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", vals)

    @classmethod
    def tabulated(cls, xs: Sequence[float], values: Sequence[float]) -> SlowVarSpec:
        return cls(tuple(xs), tuple(values))

    @property
    def is_unit(self) -> bool:
        return self.xs is None

    @property
    def window(self) -> tuple[float, float]:
        if self.is_unit:
            return (0.0, math.inf)
        return (self.xs[0], self.xs[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_unit:
            out = np.ones_like(x)
        else:
            lo, hi = self.window
            if np.any(x < lo) or np.any(x > hi):
                raise DomainError(f"x outside tabulated window [{lo:g}, {hi:g}]")
            out = np.exp(np.interp(np.log(x), np.log(self.xs), np.log(self.values)))
        return out if out.ndim else float(out)

    def composed_power(self, gamma: float) -> SlowVarSpec:
        """``x -> L(x**(1/gamma))`` as a new spec."""
        if self.is_unit:
            return self
        return SlowVarSpec(tuple(x**gamma for x in self.xs), self.values)

    def to_dict(self) -> dict[str, Any]:
        if self.is_unit:
            return {"variant": "unit"}
        return {"variant": "tabulated", "xs": list(self.xs), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SlowVarSpec:
        if d.get("variant", "unit") == "unit":
            return cls()
        return cls(tuple(d["xs"]), tuple(d["values"]))


UNIT = SlowVarSpec()


@dataclass(frozen=True)
class IedClass:
    """Parameters ``(rho, L, lam)`` of an IED left tail.

    ``diagnostics`` carries bookkeeping from the operation that produced the
    class (dropped terms, truncation errors); it takes no part in equality.
    """

    rho: float
    lam: float
    slow_var: SlowVarSpec = UNIT
    diagnostics: dict[str, Any] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ArgumentError(f"rho must be positive and finite, got {self.rho}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ArgumentError(f"lambda must be nonnegative and finite, got {self.lam}")

    @property
    def level(self) -> float:
        """``lam**(1/rho)``, the lower-envelope constant."""
        return self.lam ** (1.0 / self.rho)

    def with_lambda(self, lam: float, **diagnostics) -> IedClass:
        return replace(self, lam=float(lam), diagnostics=diagnostics or None)

    def to_dict(self) -> dict[str, Any]:
        return {"rho": self.rho, "lambda": self.lam, "slow_var": self.slow_var.to_dict()}


@dataclass(frozen=True, eq=False)
class SeriesWeights:
    """Positive series weights ``alpha_1, alpha_2, ...``.

    ``weights`` is either a finite sequence or a vectorised callable mapping
    integer indices ``i >= 1`` to ``alpha_i``. A finite sequence together
    with ``decay_hint`` is read as the prefix of an infinite sequence whose
    terms continue geometrically with ratio ``decay_hint``.
    """

    weights: Sequence[float] | np.ndarray | Callable[[np.ndarray], np.ndarray]
    decay_hint: float | None = None

    def __post_init__(self):
        if self.decay_hint is not None and not (0 < self.decay_hint < 1):
            raise ArgumentError("decay_hint must lie in (0, 1)")
        if not callable(self.weights):
            w = np.array(self.weights, dtype=float)
            if w.ndim != 1 or w.size == 0:
                raise ArgumentError("weights must be a nonempty 1-d sequence")
            if np.any(~(w > 0)) or not np.all(np.isfinite(w)):
                raise ArgumentError("series weights must be positive and finite")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def is_infinite(self) -> bool:
        return callable(self.weights) or self.decay_hint is not None


def regvar(x, cls: IedClass):
    """Evaluate ``x**rho * L(x)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("regvar requires x > 0")
    out = x**cls.rho * cls.slow_var(x)
    return out if np.ndim(out) else float(out)


def envelope_scale(y, cls: IedClass, rtol: float = 1e-10):
    """Generalized inverse ``g`` of ``x -> x**rho * L(x)``.

    Exact (``y**(1/rho)``) for unit ``L``; otherwise bisection in ``log x``
    over the tabulation window, vectorised over ``y``.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise DomainError("envelope_scale requires y > 0")
    if cls.slow_var.is_unit:
        out = y ** (1.0 / cls.rho)
        return out if out.ndim else float(out)
    lo_x, hi_x = cls.slow_var.window
    f_lo, f_hi = regvar(lo_x, cls), regvar(hi_x, cls)
    if np.any(y < f_lo) or np.any(y > f_hi):
        raise DomainError(
            f"y outside the range [{f_lo:g}, {f_hi:g}] covered by the tabulated window"
        )
    lo = np.full(y.shape, math.log(lo_x))
    hi = np.full(y.shape, math.log(hi_x))
    # each step halves the log-width; stop once exp(width) - 1 < rtol
    while np.max(hi - lo) > rtol / 2:
        mid = 0.5 * (lo + hi)
        above = regvar(np.exp(mid), cls) > y
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    out = np.exp(0.5 * (lo + hi))
    return out if out.ndim else float(out)


def ied_scale(cls: IedClass, alpha: float) -> IedClass:
    """Class of ``alpha * X``: the decay constant becomes ``alpha**rho * lam``."""
    if not alpha > 0:
        raise ArgumentError(f"scale factor must be positive, got {alpha}")
    return cls.with_lambda(alpha**cls.rho * cls.lam)


def ied_power(cls: IedClass, gamma: float) -> IedClass:
    """Class of ``X**gamma``: index ``rho/gamma``, same ``lam``, ``L(x**(1/gamma))``."""
    if not gamma > 0:
        raise ArgumentError(f"power must be positive, got {gamma}")
    return IedClass(cls.rho / gamma, cls.lam, cls.slow_var.composed_power(gamma))


def ied_sum(terms: Iterable[tuple[IedClass, float]]) -> IedClass:
    """Class of ``sum_i w_i X_i`` for independent ``X_i``.

    Only the terms with the largest index contribute; the others are listed
    under ``diagnostics["dropped"]``.
    """
    terms = list(terms)
    if not terms:
        raise ArgumentError("ied_sum needs at least one term")
    for c, w in terms:
        if not w > 0:
            raise ArgumentError(f"weights must be positive, got {w}")
    rho = max(c.rho for c, _ in terms)
    top = [(c, w) for c, w in terms if c.rho == rho]
    dropped = [(i, c.rho) for i, (c, _) in enumerate(terms) if c.rho != rho]
    if len({c.slow_var for c, _ in top}) > 1:
        raise IncompatibleClassError("maximal-index terms have different slowly varying parts")
    e = 1.0 / (1.0 + rho)
    total = math.fsum((w**rho * c.lam) ** e for c, w in top)
    return IedClass(rho, total ** (1.0 + rho), top[0][0].slow_var,
                    {"dropped": dropped} if dropped else None)


_CHUNK = 1 << 16


def _power_tail(t_half: float, t_end: float, n: int) -> tuple[float, float]:
    """Midpoint-integral estimate of ``sum_{i>n} t_i`` for power-law terms."""
    s = math.log(t_half / t_end) / math.log(n / (n // 2))
    if s <= 1.0 + 1e-6:
        raise DivergenceError(f"terms decay like i**-{s:.3g}; the series diverges")
    c = t_end * n**s
    return c * (n + 0.5) ** (1.0 - s) / (s - 1.0), s


def ied_series(
    cls: IedClass,
    weights: SeriesWeights,
    rtol: float = 1e-12,
    run_length: int = 64,
    max_terms: int = 10_000_000,
) -> IedClass:
    """Class of ``sum_i alpha_i B_i`` for i.i.d. ``B_i`` in ``cls``.

    The decay constant is ``lam * (sum_i alpha_i**(rho/(1+rho)))**(1+rho)``.
    Infinite sums stop once ``run_length`` consecutive relative increments
    fall below ``rtol`` (a power-law tail estimate is then added), or, with
    a geometric ``decay_hint``, once the closed geometric tail is negligible.
    ``diagnostics`` reports the number of terms, the tail estimate and a
    bound on the error of the returned decay constant.
    """
    rho = cls.rho
    e = rho / (1.0 + rho)
    hint = weights.decay_hint
    if not weights.is_infinite:
        terms = weights.weights**e
        s = math.fsum(terms)
        return cls.with_lambda(cls.lam * s ** (1.0 + rho), n_terms=terms.size,
                               tail_estimate=0.0, truncation_error=0.0)

    if not callable(weights.weights):
        terms = weights.weights**e
        q = hint**e
        tail = float(terms[-1]) * q / (1.0 - q)
        s = math.fsum(terms)
        lam = cls.lam * (s + tail) ** (1.0 + rho)
        err = cls.lam * ((s + 2 * tail) ** (1.0 + rho) - (s + tail) ** (1.0 + rho))
        return cls.with_lambda(lam, n_terms=terms.size, tail_estimate=tail,
                               truncation_error=err)

    f = weights.weights
    partial: list[float] = []
    s = 0.0
    run = 0
    start = 1
    q = hint**e if hint is not None else None
    chunk = 256
    while start <= max_terms:
        idx = np.arange(start, start + chunk, dtype=float)
        t = np.asarray(f(idx), dtype=float)
        if np.any(t < 0) or not np.all(np.isfinite(t)) or not t[0] > 0:
            raise ArgumentError("series weights must be positive and finite")
        underflow = np.flatnonzero(t == 0)
        if underflow.size:
            # weights below the smallest double: the remaining tail is invisible
            t = t[: underflow[0]]
            partial.append(math.fsum(t**e))
            s = math.fsum(partial)
            return cls.with_lambda(cls.lam * s ** (1.0 + rho), n_terms=start + t.size - 1,
                                   tail_estimate=0.0, truncation_error=0.0)
        t = t**e
        if q is not None:
            small = t * q / (1.0 - q) < 1e-17 * (s + np.cumsum(t))
            if small.any():
                stop = int(np.argmax(small))
                partial.append(math.fsum(t[: stop + 1]))
                s = math.fsum(partial)
                tail = float(t[stop]) * q / (1.0 - q)
                lam = cls.lam * (s + tail) ** (1.0 + rho)
                err = cls.lam * ((s + 2 * tail) ** (1.0 + rho) - (s + tail) ** (1.0 + rho))
                return cls.with_lambda(lam, n_terms=start + stop, tail_estimate=tail,
                                       truncation_error=err)
        else:
            csum = s + np.cumsum(t)
            small = t < rtol * csum
            # consecutive-run detection, carrying the run over chunk boundaries
            pos = np.arange(t.size)
            last_break = np.maximum.accumulate(np.where(small, -1, pos))
            runs_end = np.where(last_break < 0, run + pos + 1, pos - last_break)
            hit = np.flatnonzero(runs_end >= run_length)
            if hit.size:
                stop = int(hit[0])
                partial.append(math.fsum(t[: stop + 1]))
                s = math.fsum(partial)
                n = start + stop
                t_end = float(t[stop])
                t_half = float(np.asarray(f(np.array([n // 2], dtype=float)))[0] ** e)
                tail, _ = _power_tail(t_half, t_end, n)
                lam = cls.lam * (s + tail) ** (1.0 + rho)
                err = (1.0 + rho) * cls.lam * (s + tail) ** rho * 0.5 * t_end
                return cls.with_lambda(lam, n_terms=n, tail_estimate=tail,
                                       truncation_error=err)
            run = int(runs_end[-1])
        partial.append(math.fsum(t))
        s = math.fsum(partial)
        start += chunk
        chunk = min(2 * chunk, _CHUNK)
    raise DivergenceError(
        f"partial sums of alpha_i**{e:.4g} did not stabilise within {max_terms} terms"
    )


def bruijn_exponent(cls: IedClass) -> tuple[float, float]:
    """Exponent and coefficient of ``-log E[exp(-zX)] ~ c * z**(rho/(1+rho))``.

    Closed form only for unit ``L``.
    """
    if not cls.slow_var.is_unit:
        raise UnsupportedError("Laplace asymptotics are only implemented for L == 1")
    rho = cls.rho
    return rho / (1.0 + rho), (1.0 + 1.0 / rho) * (cls.lam * rho) ** (1.0 / (1.0 + rho))
