"""Harmonic-oscillator environment: spectral densities and the kernels derived from them.

All kernels accept a ``convention`` argument.  ``"with_hbar"`` returns the
force correlation itself; ``"per_hbar"`` divides it by hbar, which is the
normalization used by the closed-form Ohmic real part and by the imaginary-time
single-oscillator kernel.  ``"per_hbar"`` is the default wherever both make sense.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_CONSTANTS,
    ConvergenceError,
    DivergenceError,
    GlobalConstants,
    QuadratureConfig,
    SeriesConfig,
    ThermalState,
    ValidationError,
    oscillatory_tail,
    quad as _quad,
    require,
)

__all__ = [
    "GlobalConstants",
    "SpectralDensity",
    "TabulatedSpectralDensity",
    "BathOscillator",
    "DiscreteBath",
    "KernelSample",
    "DeltaDistribution",
    "TotalMass",
    "j_value",
    "damping_kernel_laplace",
    "damping_kernel_time",
    "noise_correlation",
    "noise_real_ohmic_closed_form",
    "imaginary_time_noise_kernel",
    "matsubara_kernel",
    "matsubara_delta_weight",
    "matsubara_kernel_leading",
    "single_oscillator_kernel",
    "potential_renormalization",
    "bath_total_mass",
    "discretize_bath",
    "bath_damping_kernel",
    "kernel_samples_to_csv",
]

CONVENTIONS = ("with_hbar", "per_hbar")


def _convention_factor(convention, hbar):
    require(convention in CONVENTIONS, f"unknown convention {convention!r}")
    return 1.0 if convention == "with_hbar" else 1.0 / hbar


@dataclass(frozen=True)
class SpectralDensity:
    """Ohmic ``J = m*gamma*omega`` or Drude ``J = m*gamma*omega*wd**2/(omega**2+wd**2)``."""

    kind: str
    gamma: float
    omega_d: float | None = None
    mass: float = 1.0

    def __post_init__(self):
        require(self.kind in ("ohmic", "drude"), f"unknown spectral density kind {self.kind!r}")
        require(self.gamma > 0, "gamma must be positive")
        require(self.mass > 0, "mass must be positive")
        if self.kind == "drude":
            require(self.omega_d is not None and self.omega_d > 0, "Drude cutoff must be positive")
        else:
            require(self.omega_d is None, "Ohmic density takes no cutoff")

    @classmethod
    def ohmic(cls, gamma, mass=1.0):
        return cls("ohmic", gamma, None, mass)

    @classmethod
    def drude(cls, gamma, omega_d, mass=1.0):
        return cls("drude", gamma, omega_d, mass)

    @property
    def is_ohmic(self) -> bool:
        return self.kind == "ohmic"

    def with_gamma(self, gamma):
        return SpectralDensity(self.kind, gamma, self.omega_d, self.mass)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "gamma": self.gamma, "mass": self.mass}
        if self.omega_d is not None:
            d["omega_d"] = self.omega_d
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralDensity":
        try:
            kind = d["kind"]
            gamma = float(d["gamma"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"invalid spectral density block: {d!r}") from exc
        omega_d = d.get("omega_d")
        return cls(kind, gamma, None if omega_d is None else float(omega_d), float(d.get("mass", 1.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SpectralDensity":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class TabulatedSpectralDensity:
    """J sampled on an increasing frequency grid; linear interpolation in between."""

    omegas: tuple
    values: tuple

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float)
        require(w.ndim == 1 and w.size >= 2, "need at least two samples")
        require(np.all(np.diff(w) > 0) and w[0] >= 0, "frequencies must be increasing and non-negative")
        require(len(self.values) == w.size, "values and frequencies differ in length")

    def __call__(self, omega):
        return np.interp(omega, self.omegas, self.values, right=0.0)


@dataclass(frozen=True)
class BathOscillator:
    mass: float
    omega: float
    coupling: float

    def __post_init__(self):
        require(self.mass > 0 and self.omega > 0, "bath oscillator mass and frequency must be positive")


@dataclass(frozen=True)
class DiscreteBath:
    oscillators: tuple

    @property
    def masses(self):
        return np.array([o.mass for o in self.oscillators])

    @property
    def omegas(self):
        return np.array([o.omega for o in self.oscillators])

    @property
    def couplings(self):
        return np.array([o.coupling for o in self.oscillators])

    def __len__(self):
        return len(self.oscillators)


@dataclass(frozen=True)
class KernelSample:
    argument: float
    value: complex
    convention_tag: str = "per_hbar"
    axis: str = "real_time"


@dataclass(frozen=True)
class DeltaDistribution:
    """The distribution ``weight * delta(t - center)``; it has no pointwise value."""

    weight: float
    center: float = 0.0

    def __float__(self):
        raise DivergenceError("a delta distribution has no pointwise value")


@dataclass(frozen=True)
class TotalMass:
    value: float
    infrared_divergent: bool


def j_value(sd: SpectralDensity, omega):
    """Spectral density of bath oscillators at ``omega >= 0``."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValidationError("spectral density is defined for omega >= 0")
    if sd.is_ohmic:
        out = sd.mass * sd.gamma * w
    else:
        out = sd.mass * sd.gamma * w * sd.omega_d**2 / (w**2 + sd.omega_d**2)
    return out if out.ndim else float(out)


def damping_kernel_laplace(sd: SpectralDensity, z):
    """Laplace transform of the damping kernel on the real axis ``z >= 0``."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValidationError("Laplace argument must be non-negative")
    if sd.is_ohmic:
        out = np.full_like(z, sd.gamma)
    else:
        out = sd.gamma * sd.omega_d / (sd.omega_d + z)
    return out if out.ndim else float(out)


def _laplace_times_z(sd, nu):
    # z * gamma_hat(z), continued to complex z where needed
    if sd.is_ohmic:
        return sd.gamma * nu
    return sd.gamma * sd.omega_d * nu / (sd.omega_d + nu)


def damping_kernel_time(sd: SpectralDensity, t):
    """Damping kernel gamma(t).

    Drude gives ``gamma*wd*exp(-wd*|t|)``.  For the Ohmic case the kernel is the
    distribution ``2*gamma*delta(t)`` and a :class:`DeltaDistribution` is returned.
    """
    if sd.is_ohmic:
        return DeltaDistribution(2.0 * sd.gamma)
    t = np.asarray(t, dtype=float)
    out = sd.gamma * sd.omega_d * np.exp(-sd.omega_d * np.abs(t))
    return out if out.ndim else float(out)


def _coth_minus_inverse(x):
    # coth(x) - 1/x, accurate near zero
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    big = 1.0 / np.tanh(xs) - 1.0 / xs
    series = x / 3.0 - x**3 / 45.0
    return np.where(small, series, big)


def _fourier(f, t, kind, upper, quad):
    """Integral of f(w)*cos(wt) or f(w)*sin(wt) over [0, upper] (upper may be inf)."""
    if t == 0.0:
        if kind == "sin":
            return 0.0
        val, _ = _quad(f, 0.0, upper, epsabs=quad.epsabs, epsrel=quad.epsrel, limit=quad.limit)
        return val
    sign = 1.0
    if t < 0:
        t = -t
        sign = -1.0 if kind == "sin" else 1.0
    if math.isinf(upper):
        val, _ = _quad(f, 0.0, np.inf, weight=kind, wvar=t, epsabs=quad.epsabs, limlst=200, limit=quad.limit)
    else:
        val, _ = _quad(f, 0.0, upper, weight=kind, wvar=t, epsabs=quad.epsabs, epsrel=quad.epsrel, limit=quad.limit)
    return sign * val


def noise_correlation(sd: SpectralDensity, thermal: ThermalState, t: float,
                      quadrature: QuadratureConfig | None = None, convention: str = "with_hbar"):
    """Quantum noise correlation K(t) by adaptive Fourier quadrature.

    ``K(t) = hbar * int_0^inf dw/pi J(w) [coth(hbar*beta*w/2) cos(wt) - i sin(wt)]``.
    A strictly Ohmic density needs ``quadrature.omega_cap``; otherwise the
    integral does not exist and :class:`DivergenceError` is raised.  The real part
    also diverges at ``t = 0`` without a cap.
    """
    quad = quadrature or QuadratureConfig()
    hbar = thermal.constants.hbar
    cap = quad.omega_cap
    if cap is None:
        if sd.is_ohmic:
            raise DivergenceError("the Ohmic noise kernel needs a Drude cutoff or an explicit frequency cap")
        if t == 0:
            raise DivergenceError("Re K(0) diverges logarithmically without a frequency cap")
        upper = np.inf
    else:
        require(cap > 0, "omega_cap must be positive")
        upper = float(cap)
    t = float(t)

    def jfun(w):
        return j_value(sd, w)

    if thermal.is_zero_temperature:
        real = _fourier(jfun, t, "cos", upper, quad)
    else:
        hb = thermal.hbar_beta
        # coth split into its classical 1/x part and a bounded remainder
        classical = _fourier(lambda w: j_value(sd, w) / w if w > 0 else sd.mass * sd.gamma, t, "cos", upper, quad)
        quantum = _fourier(lambda w: j_value(sd, w) * _coth_minus_inverse(0.5 * hb * w), t, "cos", upper, quad)
        real = 2.0 / hb * classical + quantum
    imag = -_fourier(jfun, t, "sin", upper, quad)
    value = hbar / np.pi * complex(real, imag)
    return value * _convention_factor(convention, hbar)


def noise_real_ohmic_closed_form(gamma, m, thermal: ThermalState, t, convention="per_hbar"):
    """Closed-form real part of the Ohmic noise kernel at finite temperature."""
    require(not thermal.is_zero_temperature, "the closed form needs a finite beta")
    t = np.asarray(t, dtype=float)
    if np.any(t == 0):
        raise DivergenceError("the Ohmic noise kernel is singular at t = 0")
    hb = thermal.hbar_beta
    value = -np.pi * m * gamma / hb**2 / np.sinh(np.pi * t / hb) ** 2
    hbar = thermal.constants.hbar
    value = value * hbar * _convention_factor(convention, hbar)
    return value if value.ndim else float(value)


def imaginary_time_noise_kernel(sd: SpectralDensity, thermal: ThermalState, tau,
                                quadrature: QuadratureConfig | None = None, convention="per_hbar"):
    """Continuum kernel ``int dw/pi J(w) cosh(w(hb/2 - tau))/sinh(hb w/2)``, i.e. K(-i tau)."""
    quad = quadrature or QuadratureConfig()
    hb = thermal.hbar_beta
    require(0 < tau < hb, "tau must lie inside (0, hbar*beta)")
    upper = np.inf if quad.omega_cap is None else quad.omega_cap
    s = min(tau, hb - tau)

    def f(w):
        if w == 0:
            return 2.0 * sd.mass * sd.gamma / hb / np.pi
        # cosh(w(hb/2-tau))/sinh(hb w/2) written with decaying exponentials
        num = np.exp(-w * s) + np.exp(-w * (hb - s))
        den = 1.0 - np.exp(-w * hb)
        return j_value(sd, w) * num / den / np.pi

    val, _ = _quad(f, 0.0, upper, epsabs=0.0, epsrel=quad.epsrel, limit=quad.limit)
    hbar = thermal.constants.hbar
    return val * hbar * _convention_factor(convention, hbar)


def matsubara_delta_weight(sd: SpectralDensity) -> float:
    """Weight of the periodic delta comb in k(tau), the large-z limit of z*gamma_hat(z) times m."""
    if sd.is_ohmic:
        raise DivergenceError("the local part of k(tau) is infinite for strictly Ohmic damping")
    return sd.mass * sd.gamma * sd.omega_d


def matsubara_kernel(sd: SpectralDensity, thermal: ThermalState, tau: float,
                     truncation: SeriesConfig | None = None, max_terms: int = 1 << 22) -> float:
    """Regular part of the imaginary-time influence kernel k(tau) for 0 < tau < hbar*beta.

    The Fourier series ``(m/hb) sum_l |nu_l| gamma_hat(|nu_l|) exp(i nu_l tau)``
    is split into a periodic delta comb of weight :func:`matsubara_delta_weight`
    and a regular remainder, which is returned here.  The remainder is summed
    symmetrically up to ``n_max`` with an analytic tail; ``n_max`` is doubled
    until the tail estimate drops below ``truncation.tolerance`` (relative).
    For the Ohmic case there is no comb and the series is taken in the Abel sense.
    """
    series = truncation or SeriesConfig(n_max=64, tolerance=1e-13)
    hb = thermal.hbar_beta
    require(not thermal.is_zero_temperature, "k(tau) needs a finite beta")
    if not 0.0 < tau < hb:
        raise ValidationError("tau must lie in the open interval (0, hbar*beta)")
    local = 0.0 if sd.is_ohmic else sd.gamma * sd.omega_d

    def g(nu):
        return _laplace_times_z(sd, nu) - local

    theta = 2.0 * np.pi * tau / hb
    z = np.exp(1j * theta)
    n = series.n_max
    while True:
        ls = np.arange(1, n + 1)
        head = g(0.0) + 2.0 * np.sum(g(thermal.nu(ls)) * np.cos(ls * theta))
        if series.tail_policy == "none":
            total, err = head, 0.0
        else:
            tail, last = oscillatory_tail(lambda l: g(thermal.nu(l)), n + 1, z)
            total = head + 2.0 * tail.real
            err = 2.0 * last
        if err <= series.tolerance * max(abs(total), 1e-300) or series.tail_policy == "none":
            return sd.mass / hb * float(total)
        if n >= max_terms:
            raise ConvergenceError(f"Matsubara kernel tail did not converge at tau={tau}")
        n *= 2


def matsubara_kernel_leading(sd: SpectralDensity, thermal: ThermalState, tau):
    """Leading large-cutoff form ``-pi m gamma/hb**2 / sin**2(pi tau/hb)`` of the regular part."""
    hb = thermal.hbar_beta
    return -np.pi * sd.mass * sd.gamma / hb**2 / np.sin(np.pi * np.asarray(tau) / hb) ** 2


def single_oscillator_kernel(osc: BathOscillator, thermal: ThermalState, tau, convention="per_hbar"):
    """Imaginary-time kernel of one bath oscillator on ``0 <= tau <= hbar*beta``."""
    hb = thermal.hbar_beta
    tau = np.asarray(tau, dtype=float)
    if np.any((tau < 0) | (tau > hb)):
        raise ValidationError("tau must lie in [0, hbar*beta]")
    w = osc.omega
    s = np.minimum(tau, hb - tau)
    # cosh(w(hb/2 - tau))/sinh(w hb/2) with decaying exponentials only
    ratio = (np.exp(-w * s) + np.exp(-w * (hb - s))) / (1.0 - np.exp(-w * hb))
    value = osc.coupling**2 / (2.0 * osc.mass * w) * ratio
    hbar = thermal.constants.hbar
    value = value * hbar * _convention_factor(convention, hbar)
    return value if value.ndim else float(value)


def potential_renormalization(sd: SpectralDensity, quadrature: QuadratureConfig | None = None) -> float:
    """Coefficient ``(1/pi) int_0^inf J(w)/w dw`` of the counterterm ``q**2``."""
    if sd.is_ohmic:
        raise DivergenceError("potential renormalization is infinite for strictly Ohmic damping")
    quad = quadrature or QuadratureConfig()
    val, _ = _quad(lambda w: j_value(sd, w) / w if w > 0 else sd.mass * sd.gamma,
                            0.0, np.inf, epsabs=0.0, epsrel=quad.epsrel, limit=quad.limit)
    return val / np.pi


def _low_frequency_exponent(omegas, values):
    mask = (omegas > 0) & (values > 0)
    w, v = omegas[mask], values[mask]
    if w.size < 2:
        return math.inf
    return float(np.log(v[1] / v[0]) / np.log(w[1] / w[0]))


def bath_total_mass(sd) -> TotalMass:
    """Total oscillator mass ``(2/pi) int J(w)/w**3 dw`` or an infrared-divergence flag.

    The integral diverges whenever J grows like ``w**alpha`` with ``alpha <= 2``
    at small frequencies; Ohmic and Drude densities both have ``alpha = 1``.
    """
    if isinstance(sd, SpectralDensity):
        return TotalMass(math.inf, True)
    w = np.asarray(sd.omegas, dtype=float)
    v = np.asarray(sd.values, dtype=float)
    alpha = _low_frequency_exponent(w, v)
    if alpha <= 2.0 + 1e-9:
        return TotalMass(math.inf, True)
    ratio = np.empty_like(w)
    pos = w > 0
    ratio[pos] = v[pos] / w[pos] ** 3
    if not pos[0]:
        # J/w**3 -> 0 for alpha > 3 and to a finite limit for alpha = 3
        ratio[0] = ratio[1] if abs(alpha - 3.0) < 1e-6 else 0.0
    return TotalMass(2.0 / np.pi * float(np.trapezoid(ratio, w)), False)


def _bin_integral(sd: SpectralDensity, a, b):
    if sd.is_ohmic:
        return 0.5 * sd.mass * sd.gamma * (b**2 - a**2)
    wd2 = sd.omega_d**2
    return 0.5 * sd.mass * sd.gamma * wd2 * np.log((b**2 + wd2) / (a**2 + wd2))


def discretize_bath(sd: SpectralDensity, count: int, omega_max: float) -> DiscreteBath:
    """Equally spaced bath whose delta sum reproduces J bin by bin.

    Oscillator ``n`` sits at the midpoint of the ``n``-th bin and carries the
    integral of J over that bin, ``pi c_n**2/(2 m_n w_n) = int_bin J``, with the
    translation-invariant choice ``c_n = m_n w_n**2``.
    """
    require(count >= 1, "count must be at least 1")
    require(omega_max > 0, "omega_max must be positive")
    edges = np.linspace(0.0, omega_max, count + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    weights = _bin_integral(sd, edges[:-1], edges[1:])
    masses = 2.0 / np.pi * weights / mids**3
    oscillators = tuple(BathOscillator(float(m), float(w), float(m * w**2)) for m, w in zip(masses, mids))
    return DiscreteBath(oscillators)


def bath_damping_kernel(bath: DiscreteBath, t, mass: float = 1.0):
    """Damping kernel of a discrete bath, ``(1/m) sum c_n**2/(m_n w_n**2) cos(w_n t)``."""
    t = np.asarray(t, dtype=float)
    c, mn, wn = bath.couplings, bath.masses, bath.omegas
    out = np.sum((c**2 / (mn * wn**2))[:, None] * np.cos(np.outer(wn, np.atleast_1d(t))), axis=0) / mass
    return out if t.ndim else float(out[0])


def kernel_samples_to_csv(samples: Sequence[KernelSample]) -> str:
    """CSV with header ``t,re,im`` (real time) or ``tau,value`` (imaginary time)."""
    if not samples:
        return ""
    if samples[0].axis == "imaginary_time":
        rows = ["tau,value"] + [f"{s.argument:.17g},{complex(s.value).real:.17g}" for s in samples]
    else:
        rows = ["t,re,im"] + [f"{s.argument:.17g},{complex(s.value).real:.17g},{complex(s.value).imag:.17g}" for s in samples]
    return "\n".join(rows) + "\n"
