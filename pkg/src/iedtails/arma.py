"""ARMA(p, q) models with positive coefficients.

The process is ``X_n = sum_i phi_i X_{n-i} + B_n + sum_j theta_j B_{n-j}``
started from zero. With ``Phi(z) = 1 - sum phi_i z**i`` and
``Theta(z) = 1 + sum theta_j z**j`` the moving-average weights ``psi_k`` are
the Taylor coefficients of ``Theta/Phi``; they are positive, and for noise in
``IED(rho, lam)`` the process limit has decay constant
``lam * (sum_k psi_k**(rho/(1+rho)))**(1+rho)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import signal

from .core import IedClass, SeriesWeights, ied_series
from .distributions import spec_from_dict
from .errors import ArgumentError, ExpansionError, IndeterminateError
from .io import csv_text, write_text
from .trajectory import Trajectory

__all__ = [
    "StabilityCertificate",
    "CoprimeCertificate",
    "ArmaModel",
    "PsiExpansion",
    "check_stability",
    "check_coprime",
    "psi_expansion",
    "lambda_limit",
    "lambda_n",
    "simulate",
]

_BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class StabilityCertificate:
    stable: bool
    margin: float  # smallest Jury pivot 1 - k_m**2
    reflection: tuple[float, ...]

    def to_dict(self):
        return {"stable": self.stable, "margin": self.margin, "reflection": list(self.reflection)}


@dataclass(frozen=True)
class CoprimeCertificate:
    coprime: bool
    resultant: float
    scale: float

    def to_dict(self):
        return {"coprime": self.coprime, "resultant": self.resultant, "scale": self.scale}


def _coeffs(v, name):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.ndim != 1 or not np.all(np.isfinite(a)):
        raise ArgumentError(f"{name} must be a finite 1-D sequence")
    return a


def check_stability(phi) -> StabilityCertificate:
    """Schur-Cohn step-down test that ``Phi`` has no zeros in ``|z| <= 1``.

    Equivalently ``z**p - phi_1 z**(p-1) - ... - phi_p`` has all zeros inside
    the open unit disc, which holds iff every reflection coefficient of the
    step-down recursion satisfies ``|k_m| < 1``. A pivot ``1 - k_m**2`` within
    1e-10 of zero (but not exactly on the boundary) is indeterminate.
    """
    a = -_coeffs(phi, "phi") if np.size(phi) else np.zeros(0)
    ks: list[float] = []
    margin = 1.0
    while a.size:
        k = float(a[-1])
        ks.append(k)
        pivot = 1.0 - k * k
        if abs(k) == 1.0 or pivot < 0:
            return StabilityCertificate(False, pivot, tuple(ks))
        if pivot <= _BOUNDARY_TOL:
            raise IndeterminateError(
                f"Jury pivot {pivot:.3g} is within 1e-10 of zero; the model is too close "
                "to the stability boundary to decide"
            )
        margin = min(margin, pivot)
        a = (a[:-1] - k * a[:-1][::-1]) / pivot
    return StabilityCertificate(True, margin, tuple(ks))


def _sylvester(f, g):
    """Sylvester matrix of polynomials given highest degree first."""
    m, n = len(f) - 1, len(g) - 1
    S = np.zeros((m + n, m + n))
    for i in range(n):
        S[i, i:i + m + 1] = f
    for i in range(m):
        S[n + i, i:i + n + 1] = g
    return S


def check_coprime(phi, theta, rtol: float = 1e-9) -> CoprimeCertificate:
    """Sylvester-resultant test that ``Phi`` and ``Theta`` share no zero.

    The resultant is compared with ``rtol * |Phi|**q |Theta|**p`` (Euclidean
    coefficient norms, the Hadamard bound on the determinant).
    """
    phi = _coeffs(phi, "phi") if np.size(phi) else np.zeros(0)
    theta = _coeffs(theta, "theta") if np.size(theta) else np.zeros(0)
    p, q = phi.size, theta.size
    if p == 0 or q == 0:
        return CoprimeCertificate(True, 1.0, 1.0)
    f = np.concatenate([[1.0], -phi])[::-1]
    g = np.concatenate([[1.0], theta])[::-1]
    res = float(np.linalg.det(_sylvester(f, g)))
    scale = float(np.linalg.norm(f) ** q * np.linalg.norm(g) ** p)
    return CoprimeCertificate(abs(res) > rtol * scale, res, scale)


@dataclass(frozen=True, eq=False)
class ArmaModel:
    """Positive-coefficient ARMA model; validated stable on construction.

    ``noise`` is a distribution spec (or ``None`` when noise values are
    supplied directly to :func:`simulate`).
    """

    phi: tuple[float, ...]
    theta: tuple[float, ...] = ()
    noise: Any = None
    stability: StabilityCertificate = field(init=False, repr=False)

    def __post_init__(self):
        phi = tuple(float(v) for v in np.atleast_1d(self.phi)) if np.size(self.phi) else ()
        theta = tuple(float(v) for v in np.atleast_1d(self.theta)) if np.size(self.theta) else ()
        if any(not (v > 0 and math.isfinite(v)) for v in phi + theta):
            raise ArgumentError("ARMA coefficients must be strictly positive and finite")
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", spec_from_dict(self.noise))
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "theta", theta)
        cert = check_stability(phi)
        if not cert.stable:
            raise ArgumentError(f"Phi has a zero in the closed unit disc (phi={list(phi)})")
        object.__setattr__(self, "stability", cert)

    @property
    def p(self) -> int:
        return len(self.phi)

    @property
    def q(self) -> int:
        return len(self.theta)

    @property
    def ar_poly(self) -> np.ndarray:
        """Coefficients of ``Phi`` in increasing powers of ``z``."""
        return np.concatenate([[1.0], -np.asarray(self.phi)])

    @property
    def ma_poly(self) -> np.ndarray:
        return np.concatenate([[1.0], np.asarray(self.theta)])

    def noise_class(self) -> IedClass | None:
        return None if self.noise is None else self.noise.theoretical_ied()

    def to_dict(self) -> dict[str, Any]:
        return {
            "phi": list(self.phi),
            "theta": list(self.theta),
            "noise": None if self.noise is None else self.noise.to_dict(),
            "stability": self.stability.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class PsiExpansion:
    """``psi_0..psi_K`` with a geometric certificate ``psi_k <= C beta**k`` and
    a bound on ``sum_{k>K} psi_k**e`` for ``e = rho/(1+rho)``."""

    model: ArmaModel
    psi: np.ndarray
    C: float
    beta: float
    rho: float
    truncation_error: float
    identity_error: float

    @property
    def K(self) -> int:
        return self.psi.size - 1

    def to_csv(self, path=None) -> str:
        return write_text(csv_text(["k", "psi"], [np.arange(self.psi.size), self.psi]), path)

    def to_dict(self) -> dict[str, Any]:
        return {"K": self.K, "C": self.C, "beta": self.beta, "rho": self.rho,
                "truncation_error": self.truncation_error,
                "identity_error": self.identity_error}


def _psi(model: ArmaModel, n_terms: int) -> np.ndarray:
    if model.p == 1 and model.q == 0:
        # closed form r**k, free of the rounding that repeated products pick up
        return model.phi[0] ** np.arange(n_terms, dtype=float)
    impulse = np.zeros(n_terms)
    impulse[0] = 1.0
    return signal.lfilter(model.ma_poly, model.ar_poly, impulse)


def _inflate(r: float) -> float:
    return r + 0.05 * (1.0 - r)


def psi_expansion(
    model: ArmaModel,
    target_tol: float = 1e-12,
    rho: float | None = None,
    min_terms: int = 0,
    max_terms: int = 1 << 22,
) -> PsiExpansion:
    """Expand ``Theta/Phi`` until the tail of ``sum psi_k**(rho/(1+rho))`` is
    below ``target_tol``.

    ``beta`` is the largest ratio ``r = psi_{k+1}/psi_k`` over the last 32
    terms, moved 5% of the way towards 1 (``r + 0.05 (1 - r)``) so the
    geometric bound stays conservative while the ratios settle. ``rho`` defaults to the noise class (or 1).
    """
    cc = check_coprime(model.phi, model.theta)
    if not cc.coprime:
        raise ArgumentError(f"Phi and Theta share a zero (resultant {cc.resultant:.3g})")
    if rho is None:
        nc = model.noise_class()
        rho = nc.rho if nc is not None else 1.0
    e = rho / (1.0 + rho)
    n_terms = max(64, model.p + model.q + 34, min_terms + 1)
    while True:
        psi = _psi(model, n_terms)
        pos = psi[psi > 0]
        if pos.size < psi.size and np.any(psi[pos.size:] != 0):
            raise ExpansionError("psi coefficients lost positivity")
        if pos.size < psi.size:
            # underflow: the remaining tail is below the smallest double
            beta, bound = 0.0, 0.0
            if pos.size > 33:
                r = pos[-32:] / pos[-33:-1]
                beta = _inflate(float(r.max()))
            break
        r = psi[-32:] / psi[-33:-1]
        if float(r.max()) >= 1.0:
            if n_terms >= max_terms:
                raise ExpansionError(f"estimated psi decay ratio {float(r.max()):.6f} >= 1")
            n_terms *= 2
            continue
        beta = _inflate(float(r.max()))
        be = beta**e
        bound = float(psi[-1]) ** e * be / (1.0 - be)
        if bound < target_tol or n_terms >= max_terms:
            break
        # terms needed for the geometric bound to reach the target
        need = math.log(target_tol * (1 - be) / (float(psi[-1]) ** e * be)) / math.log(be)
        n_terms = min(max(n_terms + int(math.ceil(need)) + 1, n_terms + 32), max_terms)
    if bound >= target_tol:
        raise ExpansionError(f"truncation bound {bound:.3g} above target after {n_terms} terms")

    # division identity: (psi * Phi)_k reproduces Theta's coefficients
    conv = np.convolve(psi, model.ar_poly)[: psi.size]
    target = np.zeros(psi.size)
    target[: min(psi.size, model.q + 1)] = model.ma_poly[: psi.size]
    scale = np.convolve(psi, np.abs(model.ar_poly))[: psi.size]
    ident = float(np.max(np.abs(conv - target) / np.maximum(scale, 1.0)))
    if ident > 1e-12:
        raise ExpansionError(f"division identity violated by {ident:.3g}")
    k = np.arange(psi.size)
    if beta > 0:
        pos = psi > 0
        C = float(np.exp(np.max(np.log(psi[pos]) - k[pos] * math.log(beta))))
    else:
        C = 1.0
    return PsiExpansion(model, psi, C, beta, float(rho), bound, ident)


def lambda_limit(expansion: PsiExpansion, noise_class: IedClass) -> IedClass:
    """Decay constant of the ARMA limit via :func:`core.ied_series`.

    ``diagnostics["truncation_error"]`` bounds the error of the result.
    """
    if abs(noise_class.rho - expansion.rho) > 1e-12:
        expansion = psi_expansion(expansion.model, rho=noise_class.rho)
    psi = expansion.psi[expansion.psi > 0]
    hint = expansion.beta if expansion.beta > 0 and expansion.truncation_error > 0 else None
    return ied_series(noise_class, SeriesWeights(psi, decay_hint=hint))


def lambda_n(expansion: PsiExpansion, noise_class: IedClass, n: int) -> IedClass:
    """Decay constant of ``X_n``: the partial sum over ``psi_0..psi_n``."""
    if n < 0:
        raise ArgumentError("n must be >= 0")
    if n > expansion.K:
        expansion = psi_expansion(expansion.model, rho=noise_class.rho, min_terms=n)
    psi = expansion.psi[: n + 1]
    psi = psi[psi > 0]
    return ied_series(noise_class, SeriesWeights(psi))


def simulate(
    model: ArmaModel,
    n: int,
    rng: np.random.Generator | None = None,
    *,
    noise_values=None,
    debug: bool = False,
) -> Trajectory:
    """Path ``X_0 = 0, X_1..X_n`` with ``X_m = B_m = 0`` for ``m <= 0``.

    Noise is drawn from ``model.noise`` unless ``noise_values`` (``B_1..B_n``)
    is given. ``debug`` recomputes ``X_n`` from the moving-average form and
    raises if the two disagree beyond 1e-9 relative.
    """
    if n < 1:
        raise ArgumentError("n must be >= 1")
    if noise_values is not None:
        b = np.asarray(noise_values, dtype=float)
        if b.shape != (n,):
            raise ArgumentError(f"noise_values must have length n={n}")
    else:
        if model.noise is None or rng is None:
            raise ArgumentError("need a noise spec and rng, or explicit noise_values")
        b = np.asarray(model.noise.sample(rng, n), dtype=float)
    x = signal.lfilter(model.ma_poly, model.ar_poly, b)
    if debug:
        psi = _psi(model, n)
        direct = math.fsum(psi * b[::-1])
        if abs(direct - x[-1]) > 1e-9 * max(abs(direct), 1e-300):
            raise ExpansionError(
                f"recursion and moving-average forms disagree at n={n}: {x[-1]!r} vs {direct!r}"
            )
    return Trajectory(np.concatenate([[0.0], x]), {"kind": "arma", **model.to_dict()})
