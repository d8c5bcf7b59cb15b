"""Shared constants, configuration records, errors and series helpers."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate


class DissipathError(Exception):
    """Base class for all errors raised by the package."""

    exit_code = 1
    kind = "error"

    def to_dict(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class ValidationError(DissipathError, ValueError):
    """Input failed a precondition check (bad shape, sign, enumeration)."""

    exit_code = 2
    kind = "validation"


class DomainError(DissipathError):
    """A typed domain error: the request is well formed but physically undefined."""

    exit_code = 3
    kind = "domain"


class DivergenceError(DomainError):
    kind = "divergence"


class ConjugatePointError(DomainError):
    kind = "conjugate_point"


class UnsupportedRegimeError(DomainError):
    kind = "unsupported_regime"


class ConvergenceError(DissipathError):
    """A numerical procedure failed to reach its requested tolerance."""

    exit_code = 4
    kind = "convergence"


@dataclass(frozen=True)
class GlobalConstants:
    hbar: float = 1.0
    k_boltzmann: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.k_boltzmann > 0):
            raise ValidationError("hbar and k_boltzmann must be strictly positive")


DEFAULT_CONSTANTS = GlobalConstants()


@dataclass(frozen=True)
class ThermalState:
    """Inverse temperature together with the constants it is measured in.

    ``beta = inf`` is accepted and denotes zero temperature.
    """

    beta: float
    constants: GlobalConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError("beta must be positive")

    @classmethod
    def from_temperature(cls, temperature, constants=DEFAULT_CONSTANTS):
        if temperature == 0:
            return cls(math.inf, constants)
        return cls(1.0 / (constants.k_boltzmann * temperature), constants)

    @property
    def is_zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    @property
    def hbar_beta(self) -> float:
        return self.constants.hbar * self.beta

    @property
    def temperature(self) -> float:
        return 1.0 / (self.constants.k_boltzmann * self.beta)

    def nu(self, n):
        """Matsubara frequency 2*pi*n/(hbar*beta)."""
        return 2.0 * np.pi * np.asarray(n, dtype=float) / self.hbar_beta


TAIL_POLICIES = ("none", "log_tail")


@dataclass(frozen=True)
class SeriesConfig:
    n_max: int = 4096
    tail_policy: str = "log_tail"
    tolerance: float = 1e-12

    def __post_init__(self):
        if self.n_max < 1:
            raise ValidationError("n_max must be at least 1")
        if self.tail_policy not in TAIL_POLICIES:
            raise ValidationError(f"unknown tail policy {self.tail_policy!r}")


@dataclass(frozen=True)
class QuadratureConfig:
    epsabs: float = 1e-13
    epsrel: float = 1e-11
    limit: int = 500
    omega_cap: float | None = None


@dataclass
class Diagnostics:
    """Free-form convergence record attached to numerical results."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def __setitem__(self, key, value):
        self.values[key] = value


def require(condition, message, error=ValidationError):
    if not condition:
        raise error(message)


def quad(f, a, b, **kwargs):
    """``scipy.integrate.quad`` with its tolerance warnings silenced.

    Callers that care inspect the returned error estimate instead; the QUADPACK
    warnings fire routinely when the requested tolerance sits at round-off level.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(f, a, b, **kwargs)
    return out[0], out[1]


def oscillatory_tail(f: Callable, start: int, z: complex, terms: int = 12):
    """Sum ``z**l * f(l)`` for ``l >= start`` with ``|z| = 1``, ``z != 1``.

    Uses repeated summation by parts, which expresses the tail through forward
    differences of ``f`` at ``start``.  The expansion is the Abel limit of the
    series, so it also assigns the natural value to series with polynomially
    growing ``f``.  The expansion is asymptotic once round-off enters the high
    differences, so it stops at the smallest term.  Returns the sum and the
    magnitude of the last term kept, which serves as an error estimate.
    """
    diffs = np.asarray(f(start + np.arange(terms + 1)), dtype=complex)
    ratio = z / (1.0 - z)
    factor = z**start / (1.0 - z)
    total = factor * diffs[0]
    last = abs(total)
    for _ in range(terms):
        diffs = np.diff(diffs)
        factor *= ratio
        term = factor * diffs[0]
        if abs(term) >= last:
            break
        total += term
        last = abs(term)
        if last <= 1e-17 * abs(total):
            break
    return total, last


def smooth_tail(f: Callable, start: int):
    """Sum ``f(n)`` for ``n >= start`` of a smooth, decaying ``f``.

    Midpoint Euler-Maclaurin: the integral from ``start - 1/2`` plus the first
    two derivative corrections (derivatives by central differences).
    """
    a = start - 0.5
    integral, err = quad(f, a, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    h = max(1e-3 * a, 1e-3)
    d1 = (f(a + h) - f(a - h)) / (2 * h)
    d3 = (f(a + 2 * h) - 2 * f(a + h) + 2 * f(a - h) - f(a - 2 * h)) / (2 * h**3)
    return integral - d1 / 24.0 + 7.0 * d3 / 5760.0


def inverse_power_tail(power: int, start: int) -> float:
    """Sum of ``n**-power`` for ``n >= start`` via the Hurwitz zeta function."""
    from scipy.special import zeta

    if power < 2 or start < 1:
        raise ValidationError("need power >= 2 and start >= 1")
    return float(zeta(power, start))


def richardson(f_coarse, f_fine, ratio=2.0, order=1):
    """Two-point Richardson extrapolation of a quantity with error ~ h**order."""
    w = ratio**order
    return (w * f_fine - f_coarse) / (w - 1.0)
