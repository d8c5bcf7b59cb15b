"""Equilibrium thermodynamics of the damped harmonic oscillator.

Partition functions come in three flavours: the Matsubara product with an
analytic tail, an exact Gamma-function form for the Drude bath (the product
factorises over the roots of a cubic), and closed forms for the undamped
oscillator.  The density of states is obtained by inverting the Laplace
transform of ``Z(beta) exp(beta eps0)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline
from scipy.optimize import curve_fit

from .bath import SpectralDensity, _laplace_times_z, j_value
from .core import (
    ConvergenceError,
    DivergenceError,
    QuadratureConfig,
    SeriesConfig,
    ThermalState,
    ValidationError,
    quad,
    require,
    smooth_tail,
)
from .propagators import OscillatorSpec


@dataclass(frozen=True)
class DampedOscillator:
    """Harmonic oscillator of frequency ``omega_0`` coupled to a bath; ``bath=None`` means undamped."""

    spec: OscillatorSpec
    bath: SpectralDensity | None = None

    def __post_init__(self):
        require(self.spec.omega > 0, "the oscillator frequency must be positive")
        if self.bath is not None:
            require(math.isclose(self.bath.mass, self.spec.m), "bath and oscillator masses differ")

    @property
    def omega0(self) -> float:
        return self.spec.omega

    @property
    def hbar(self) -> float:
        return self.spec.constants.hbar

    def _require_cutoff(self, what):
        if self.bath is not None and self.bath.is_ohmic:
            raise DivergenceError(f"{what} diverges for strictly Ohmic damping; use a Drude cutoff")


# ---------------------------------------------------------------- undamped


def z_undamped(spec: OscillatorSpec, thermal: ThermalState) -> float:
    """``1/(2 sinh(hbar beta omega/2))``."""
    u = thermal.hbar_beta * spec.omega
    if math.isinf(u):
        return 0.0
    return 0.5 / math.sinh(0.5 * u)


def log_z_undamped(spec: OscillatorSpec, thermal: ThermalState) -> float:
    u = thermal.hbar_beta * spec.omega
    # -ln(2 sinh(u/2)) = -u/2 - log1p(-exp(-u))
    return -0.5 * u - math.log1p(-math.exp(-u))


def z_undamped_product(spec: OscillatorSpec, thermal: ThermalState, series: SeriesConfig = SeriesConfig()) -> float:
    """Matsubara product ``(1/hbar beta omega) prod_n nu_n**2/(nu_n**2 + omega**2)``.

    With the ``log_tail`` policy the omitted factors are summed through
    ``ln(1 + c**2/n**2) = sum_k (-1)**(k+1) c**(2k)/(k n**(2k))`` and Hurwitz zeta values.
    """
    hb = thermal.hbar_beta
    c = hb * spec.omega / (2 * np.pi)
    n = np.arange(1, series.n_max + 1)
    log_z = -math.log(hb * spec.omega) - float(np.sum(np.log1p((c / n) ** 2)))
    if series.tail_policy == "log_tail":
        log_z -= _log_tail_quadratic(c, series.n_max + 1)
    return math.exp(log_z)


def _log_tail_quadratic(c, start):
    """``sum_{n >= start} ln(1 + c**2/n**2)``."""
    if c >= start:
        return smooth_tail(lambda n: np.log1p((c / n) ** 2), start)
    total, k = 0.0, 1
    while True:
        term = (-1) ** (k + 1) * c ** (2 * k) / k * float(special.zeta(2 * k, start))
        total += term
        if abs(term) <= 1e-18 * max(abs(total), 1e-300) or k > 200:
            return total
        k += 1


# ---------------------------------------------------------------- damped


def _factor_excess(dosc: DampedOscillator, nu):
    """``gamma_hat(nu)/nu + omega0**2/nu**2``, the quantity inside each log."""
    w2 = dosc.omega0**2
    if dosc.bath is None:
        return w2 / nu**2
    return _laplace_times_z(dosc.bath, nu) / nu**2 + w2 / nu**2


def log_z_damped(dosc: DampedOscillator, thermal: ThermalState, series: SeriesConfig = SeriesConfig()) -> float:
    """``ln Z`` from the Matsubara product, truncated at ``series.n_max``.

    The ``log_tail`` policy splits each omitted ``ln(1 + x_n)`` into ``x_n``,
    summed exactly with digamma and trigamma functions, and the remainder
    ``ln(1 + x_n) - x_n`` of order ``n**-2``, summed by Euler-Maclaurin.
    """
    dosc._require_cutoff("the partition function")
    require(not thermal.is_zero_temperature, "Z needs a finite beta")
    hb = thermal.hbar_beta
    w0 = dosc.omega0
    n = np.arange(1, series.n_max + 1)
    x = _factor_excess(dosc, thermal.nu(n))
    log_z = -math.log(hb * w0) - float(np.sum(np.log1p(x)))
    if series.tail_policy == "none":
        return log_z
    start = series.n_max + 1
    c = hb / (2 * np.pi)
    linear = (w0 * c) ** 2 * float(special.polygamma(1, start))
    if dosc.bath is not None:
        a = c * dosc.bath.omega_d
        linear += dosc.bath.gamma * c * float(special.digamma(start + a) - special.digamma(start))

    def remainder(k):
        xk = _factor_excess(dosc, 2 * np.pi * np.asarray(k, dtype=float) / hb)
        return np.log1p(xk) - xk

    return log_z - linear - smooth_tail(remainder, start)


def z_damped(dosc: DampedOscillator, thermal: ThermalState, series: SeriesConfig = SeriesConfig()) -> float:
    """Partition function ``(1/hbar beta w0) prod_n nu_n**2/(nu_n**2 + nu_n gamma_hat(nu_n) + w0**2)``."""
    return math.exp(log_z_damped(dosc, thermal, series))


def free_energy(dosc: DampedOscillator, thermal: ThermalState, series: SeriesConfig = SeriesConfig()) -> float:
    """``F = (1/beta)[ln(hbar beta w0) + sum_n ln(1 + gamma_hat(nu_n)/nu_n + w0**2/nu_n**2)]``."""
    return -log_z_damped(dosc, thermal, series) / thermal.beta


def drude_roots(dosc: DampedOscillator) -> np.ndarray:
    """Roots ``lambda_i`` with ``prod (nu + lambda_i) = (nu + wd)(nu**2 + w0**2) + gamma wd nu``."""
    b = dosc.bath
    require(b is not None and not b.is_ohmic, "needs a Drude bath")
    wd, w0 = b.omega_d, dosc.omega0
    # lambda**3 - wd lambda**2 + (gamma wd + w0**2) lambda - w0**2 wd = 0
    return np.roots([1.0, -wd, b.gamma * wd + w0**2, -w0**2 * wd]).astype(complex)


def log_z_gamma_form(dosc: DampedOscillator, beta, hbar: float | None = None):
    """Exact ``ln Z`` of the Drude-damped oscillator for real or complex ``beta``.

    ``Z = Gamma(1+a_1) Gamma(1+a_2) Gamma(1+a_3) / (hbar beta w0 Gamma(1+a_D))``
    with ``a = hbar beta lambda/(2 pi)``; the roots sum to ``wd`` so the
    Weierstrass product converges.  The undamped case uses
    ``Gamma(1+ic) Gamma(1-ic) = pi c/sinh(pi c)``.
    """
    hbar = dosc.hbar if hbar is None else hbar
    beta = np.asarray(beta, dtype=complex)
    c = hbar * beta / (2 * np.pi)
    w0 = dosc.omega0
    if dosc.bath is None:
        roots = np.array([1j * w0, -1j * w0])
        out = -np.log(hbar * beta * w0) + sum(special.loggamma(1 + c * lam) for lam in roots)
        return out
    dosc._require_cutoff("the partition function")
    lam = drude_roots(dosc)
    out = -np.log(hbar * beta * w0) - special.loggamma(1 + c * dosc.bath.omega_d)
    for l in lam:
        out = out + special.loggamma(1 + c * l)
    return out


def z_gamma_form(dosc: DampedOscillator, thermal: ThermalState) -> float:
    return float(np.exp(log_z_gamma_form(dosc, thermal.beta, thermal.constants.hbar)).real)


# ---------------------------------------------------------------- energies


@dataclass(frozen=True)
class LambShift:
    value: float
    renormalization_asymptote: float
    log_asymptote: float

    @property
    def asymptote(self) -> float:
        return self.renormalization_asymptote + self.log_asymptote


def ground_state_energy(dosc: DampedOscillator, quadrature: QuadratureConfig | None = None) -> float:
    """``eps0 = (hbar/2 pi) int_0^inf ln(1 + gamma_hat(nu)/nu + w0**2/nu**2) dnu``.

    The undamped part integrates to ``pi w0`` exactly, so the quadrature only
    sees ``ln(1 + nu gamma_hat(nu)/(nu**2 + w0**2))``, which is bounded and
    decays like ``nu**-2``.
    """
    dosc._require_cutoff("the ground-state energy")
    hbar, w0 = dosc.hbar, dosc.omega0
    if dosc.bath is None:
        return 0.5 * hbar * w0
    q = quadrature or QuadratureConfig()
    b = dosc.bath

    def f(nu):
        return math.log1p(_laplace_times_z(b, nu) / (nu * nu + w0 * w0))

    cuts = sorted({0.0, w0, b.omega_d, 10 * max(w0, b.omega_d)})
    total = 0.0
    for a, c in zip(cuts[:-1], cuts[1:]):
        total += quad(f, a, c, epsabs=0.0, epsrel=q.epsrel, limit=q.limit)[0]
    total += quad(f, cuts[-1], np.inf, epsabs=0.0, epsrel=q.epsrel, limit=q.limit)[0]
    return 0.5 * hbar * w0 + hbar / (2 * np.pi) * total


def ground_state_energy_closed_form(dosc: DampedOscillator) -> float:
    """``(hbar/2 pi)[wd ln wd - sum_i lambda_i ln lambda_i]`` from the cubic roots (Drude only)."""
    lam = drude_roots(dosc)
    wd = dosc.bath.omega_d
    val = wd * math.log(wd) - np.sum(lam * np.log(lam))
    return float(dosc.hbar / (2 * np.pi) * val.real)


def lamb_shift_weak(dosc: DampedOscillator, quadrature: QuadratureConfig | None = None) -> LambShift:
    """Second-order shift ``-(hbar/2 pi m w0) int_0^inf J(w)/(w0 + w) dw`` and its large-cutoff asymptote."""
    dosc._require_cutoff("the second-order level shift")
    require(dosc.bath is not None, "needs a bath")
    q = quadrature or QuadratureConfig()
    b, w0, hbar, m = dosc.bath, dosc.omega0, dosc.hbar, dosc.spec.m
    f = lambda w: j_value(b, w) / (w0 + w)
    cuts = [0.0, w0, b.omega_d, 10 * b.omega_d]
    cuts = sorted(set(cuts))
    total = sum(quad(f, a, c, epsabs=0.0, epsrel=q.epsrel, limit=q.limit)[0] for a, c in zip(cuts[:-1], cuts[1:]))
    total += quad(f, cuts[-1], np.inf, epsabs=0.0, epsrel=q.epsrel, limit=q.limit)[0]
    value = -hbar / (2 * np.pi * m * w0) * total
    return LambShift(value, -hbar * b.gamma * b.omega_d / (4 * w0),
                     hbar * b.gamma / (2 * np.pi) * math.log(b.omega_d / w0))


def level_width(dosc: DampedOscillator, n: int) -> float:
    """Golden-rule width ``n J(w0)/(m w0)`` of level ``n``."""
    require(n >= 0, "level index must be non-negative")
    if dosc.bath is None:
        return 0.0
    return n * j_value(dosc.bath, dosc.omega0) / (dosc.spec.m * dosc.omega0)


# ---------------------------------------------------------------- density matrix


def ho_thermal_kernel(spec: OscillatorSpec, thermal: ThermalState, x, x_prime):
    """Unnormalised ``<x|exp(-beta H)|x'>``."""
    hbar, m, w = spec.constants.hbar, spec.m, spec.omega
    u = thermal.hbar_beta * w
    x, xp = np.asarray(x, dtype=float), np.asarray(x_prime, dtype=float)
    s = math.sinh(u)
    pref = math.sqrt(m * w / (2 * np.pi * hbar * s))
    return pref * np.exp(-m * w / (2 * hbar * s) * ((x**2 + xp**2) * math.cosh(u) - 2 * x * xp))


def ho_density_matrix(spec: OscillatorSpec, thermal: ThermalState, x, x_prime):
    """Normalised thermal density matrix of the harmonic oscillator.

    Written as ``sqrt((m w/pi hbar) tanh(u/2)) exp(-(m w/2 hbar)[(x**2+x'**2) coth u - 2 x x'/sinh u])``
    with ``u = hbar beta w``, which stays finite for ``beta = inf``.
    """
    hbar, m, w = spec.constants.hbar, spec.m, spec.omega
    u = thermal.hbar_beta * w
    x, xp = np.asarray(x, dtype=float), np.asarray(x_prime, dtype=float)
    coth = 1.0 / math.tanh(u)
    csch = 0.0 if u > 700 else 1.0 / math.sinh(u)
    pref = math.sqrt(m * w / (np.pi * hbar) * math.tanh(0.5 * u))
    return pref * np.exp(-m * w / (2 * hbar) * ((x**2 + xp**2) * coth - 2 * x * xp * csch))


def ho_ground_state(spec: OscillatorSpec, x):
    hbar, m, w = spec.constants.hbar, spec.m, spec.omega
    return (m * w / (np.pi * hbar)) ** 0.25 * np.exp(-m * w * np.asarray(x, dtype=float) ** 2 / (2 * hbar))


# ---------------------------------------------------------------- regularised Z and DOS


@dataclass(frozen=True)
class RegularizedPartition:
    value: float
    weak_coupling: float
    epsilon0: float


def _log_regularized(dosc: DampedOscillator, beta, hbar=None):
    eps0 = ground_state_energy_closed_form(dosc) if dosc.bath is not None else 0.5 * dosc.hbar * dosc.omega0
    return log_z_gamma_form(dosc, beta, hbar) + np.asarray(beta) * eps0


def weak_coupling_regularized(dosc: DampedOscillator, thermal: ThermalState) -> float:
    """Large-cutoff, first-order-in-gamma form of ``Z exp(beta eps0)``.

    Uses ``(1/hbar beta w0) prod (nu**2 + gamma nu)/(nu**2 + gamma nu + w0**2)``
    times ``(hbar beta wd/2 pi)**(-hbar beta gamma/2 pi)`` and
    ``eps0 = hbar w0/2 + (hbar gamma/2 pi) ln(wd/w0)``; the cutoff drops out.
    The product is ``Gamma(1+a+) Gamma(1+a-)/Gamma(1+g)`` with
    ``a+ + a- = g = hbar beta gamma/2 pi`` and ``a+ a- = (hbar beta w0/2 pi)**2``.
    """
    require(dosc.bath is not None, "needs a bath")
    hb = thermal.hbar_beta
    g = hb * dosc.bath.gamma / (2 * np.pi)
    w = hb * dosc.omega0 / (2 * np.pi)
    disc = np.sqrt(complex(g * g - 4 * w * w))
    ap, am = 0.5 * (g + disc), 0.5 * (g - disc)
    log_prod = special.loggamma(1 + ap) + special.loggamma(1 + am) - special.loggamma(1 + g)
    log_val = -math.log(hb * dosc.omega0) + log_prod - g * math.log(w) + 0.5 * hb * dosc.omega0
    return float(np.exp(log_val).real)


def regularized_partition(dosc: DampedOscillator, thermal: ThermalState,
                          series: SeriesConfig | None = None) -> RegularizedPartition:
    """``Z exp(beta eps0)`` evaluated in closed Gamma-function form.

    The cutoff-dependent pieces ``-lnGamma(1 + hbar beta wd/2 pi)`` and
    ``beta (hbar/2 pi) wd ln wd`` are combined before exponentiation, so large
    cutoffs cost no precision.  ``series`` is accepted for interface symmetry;
    the closed form needs no truncation.
    """
    dosc._require_cutoff("the partition function")
    beta = thermal.beta
    value = float(np.exp(_log_regularized(dosc, beta, thermal.constants.hbar)).real)
    eps0 = ground_state_energy_closed_form(dosc) if dosc.bath is not None else 0.5 * dosc.hbar * dosc.omega0
    wc = weak_coupling_regularized(dosc, thermal) if dosc.bath is not None else value
    return RegularizedPartition(value, wc, eps0)


@dataclass
class DosResult:
    energies: np.ndarray
    density: np.ndarray
    method_tag: str
    epsilon0_shift: float
    delta_weight: float
    average_density: float
    diagnostics: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        rows = ["E_minus_eps0,rho"]
        rows += [f"{e:.17g},{r:.17g}" for e, r in zip(self.energies, self.density)]
        return "\n".join(rows) + "\n"

    def metadata(self) -> str:
        return json.dumps({"method": self.method_tag, "epsilon0": self.epsilon0_shift,
                           "delta_weight": self.delta_weight, "average_density": self.average_density,
                           "diagnostics": self.diagnostics}, sort_keys=True)


def _smooth_transform(dosc: DampedOscillator, beta):
    """``Z exp(beta eps0)`` minus the ground-state delta and the ``1/(hbar w0 beta)`` pole."""
    hbar, w0 = dosc.hbar, dosc.omega0
    return np.exp(_log_regularized(dosc, beta)) - 1.0 - 1.0 / (hbar * w0 * beta)


def _bromwich(dosc: DampedOscillator, energies, c, period, n_terms):
    """Fourier-series Bromwich inversion along ``Re beta = c``.

    ``e**(-c E) f(E)`` is expanded on the period ``[0, period)`` with one FFT;
    aliasing contributes ``~exp(-c period)``.
    """
    k = np.arange(n_terms)
    betas = c + 2j * np.pi * k / period
    vals = np.empty(n_terms, dtype=complex)
    vals[0] = _smooth_transform(dosc, complex(c))
    vals[1:] = _smooth_transform(dosc, betas[1:])
    vals[0] *= 0.5
    series = np.fft.ifft(vals) * n_terms  # sum_k vals_k exp(2 pi i k j/N)
    grid = period * np.arange(n_terms) / n_terms
    f = 2.0 / period * np.exp(c * grid) * series.real
    keep = grid <= np.max(energies) + 10 * period / n_terms
    spline = CubicSpline(grid[keep], f[keep])
    return spline(energies), {"c": c, "period": period, "n_terms": n_terms,
                              "last_term": float(abs(vals[-1]))}


def _talbot(dosc: DampedOscillator, energies, n_nodes):
    """Fixed Talbot contour ``beta(theta) = r theta (cot theta + i)`` with ``r = 2M/(5E)``.

    The singularities of ``Z(beta)`` lie along lines approaching the imaginary
    axis, so the contour cannot enclose all of them; expect reduced accuracy.
    """
    out = np.empty(len(energies))
    for i, e in enumerate(energies):
        r = 2.0 * n_nodes / (5.0 * e)
        theta = np.pi * np.arange(1, n_nodes) / n_nodes
        cot = 1.0 / np.tan(theta)
        beta = r * theta * (cot + 1j)
        sigma = theta + (theta * cot - 1.0) * cot
        head = 0.5 * np.exp(r * e) * _smooth_transform(dosc, complex(r)).real
        body = np.sum((np.exp(beta * e) * _smooth_transform(dosc, beta) * (1 + 1j * sigma)).real)
        out[i] = r / n_nodes * (head + body)
    return out, {"n_nodes": n_nodes}


def density_of_states(dosc: DampedOscillator, energies, method: str = "bromwich",
                      series: SeriesConfig | None = None, c: float = 0.1, period: float | None = None,
                      n_terms: int = 1 << 20, n_nodes: int = 32,
                      check_betas=(0.5, 1.0, 2.0, 3.0, 5.0), tolerance: float = 1e-3) -> DosResult:
    """Density of states measured from ``eps0``, without the ground-state delta.

    The transform of ``Z exp(beta eps0)`` is inverted after removing the delta
    (weight ``lim Z exp(beta eps0) = 1`` as ``beta -> inf``) and the
    ``1/(hbar w0 beta)`` pole, whose inverse is the average density ``1/(hbar w0)``
    and is added back.  Energies (relative to ``eps0``) must be positive.  The
    diagnostics hold the relative round-trip residual over ``check_betas``
    (units of ``1/(hbar w0)``); exceeding ``tolerance`` raises
    :class:`ConvergenceError`.
    """
    dosc._require_cutoff("the density of states")
    require(dosc.bath is not None, "needs a Drude bath")
    energies = np.asarray(energies, dtype=float)
    require(energies.ndim == 1 and np.all(energies > 0), "energies must be positive")
    hbar, w0 = dosc.hbar, dosc.omega0
    if method == "bromwich":
        if period is None:
            period = max(30.0 / c, 2.0 * float(np.max(energies)))
        smooth, diag = _bromwich(dosc, energies, c, period, n_terms)
    elif method == "talbot":
        smooth, diag = _talbot(dosc, energies, n_nodes)
    else:
        raise ValidationError("method must be 'bromwich' or 'talbot'")
    avg = 1.0 / (hbar * w0)
    density = smooth + avg
    result = DosResult(energies, density, method, ground_state_energy_closed_form(dosc), 1.0, avg, diag)
    residual = laplace_round_trip(result, dosc, np.asarray(check_betas) / (hbar * w0))
    result.diagnostics["round_trip_residual"] = float(np.max(residual))
    if result.diagnostics["round_trip_residual"] > tolerance:
        raise ConvergenceError(f"density-of-states round trip residual {np.max(residual):.3g} exceeds {tolerance}")
    return result


def laplace_round_trip(dos: DosResult, dosc: DampedOscillator, betas) -> np.ndarray:
    """Relative mismatch of ``int rho exp(-beta E) dE + w_delta`` against ``Z exp(beta eps0)``.

    The density beyond the last tabulated energy is replaced by its average.
    """
    e, rho = dos.energies, dos.density
    out = []
    for b in np.atleast_1d(betas):
        integrand = rho * np.exp(-b * e)
        # below the first sample the density is taken constant
        head = rho[0] * (1 - np.exp(-b * e[0])) / b
        integral = head + np.trapezoid(integrand, e) + dos.average_density * np.exp(-b * e[-1]) / b
        exact = float(np.exp(_log_regularized(dosc, b)).real)
        out.append(abs(integral + dos.delta_weight - exact) / exact)
    return np.asarray(out)


@dataclass(frozen=True)
class PeakFit:
    level: int
    center: float
    fwhm: float
    amplitude: float


def _lorentzian(e, amp, center, hwhm, base, slope):
    return amp * (hwhm / np.pi) / ((e - center) ** 2 + hwhm**2) + base + slope * (e - center)


def _lorentzian_comb(e, *p):
    out = np.full_like(e, p[-1])
    for i in range((len(p) - 1) // 3):
        amp, centre, hwhm = p[3 * i: 3 * i + 3]
        out = out + amp * (hwhm / np.pi) / ((e - centre) ** 2 + hwhm**2)
    return out


def fit_level_widths(dos: DosResult, levels, spacing: float, guess_widths, method: str = "global",
                     extra_levels: int = 4) -> list[PeakFit]:
    """Lorentzian least-squares widths of the peaks near ``n * spacing``.

    ``method="local"`` fits one Lorentzian plus a linear background within
    three expected half-widths of each peak.  Once peaks overlap, the tails of
    the neighbours bias that fit, so the default ``"global"`` fits a comb of
    Lorentzians (all levels from 1 to ``max(levels) + extra_levels``, free
    amplitudes, centres and widths) plus a constant over the whole range.
    """
    levels = list(levels)
    guess = dict(zip(levels, guess_widths))
    if method == "local":
        fits = []
        for n in levels:
            hw = 0.5 * guess[n]
            centre = n * spacing
            sel = np.abs(dos.energies - centre) <= 3 * hw
            require(np.count_nonzero(sel) >= 8, f"too few samples around level {n}")
            e, r = dos.energies[sel], dos.density[sel]
            base = float(np.min(r))
            amp0 = float(np.max(r) - base) * np.pi * hw
            popt, _ = curve_fit(_lorentzian, e, r, p0=[amp0, centre, hw, base, 0.0], maxfev=20000)
            fits.append(PeakFit(n, float(popt[1]), float(2 * abs(popt[2])), float(popt[0])))
        return fits
    require(method == "global", "method must be 'global' or 'local'")
    top = max(levels) + extra_levels
    # widths of the extra levels extrapolated linearly in n
    slope = guess[levels[-1]] / levels[-1]
    p0 = []
    for n in range(1, top + 1):
        p0 += [1.0, n * spacing, 0.5 * guess.get(n, slope * n)]
    p0.append(0.0)
    sel = (dos.energies > 0.4 * spacing) & (dos.energies < (top + 0.5) * spacing)
    require(np.count_nonzero(sel) >= 4 * len(p0), "energy grid too coarse for the fit")
    popt, _ = curve_fit(_lorentzian_comb, dos.energies[sel], dos.density[sel], p0=p0, maxfev=200000)
    return [PeakFit(n, float(popt[3 * n - 2]), float(2 * abs(popt[3 * n - 1])), float(popt[3 * n - 3]))
            for n in levels]


def partition_sweep_csv(dosc: DampedOscillator, betas, series: SeriesConfig = SeriesConfig()) -> str:
    rows = ["beta,Z,F"]
    for b in betas:
        th = ThermalState(float(b), dosc.spec.constants)
        lz = log_z_damped(dosc, th, series)
        rows.append(f"{b:.17g},{math.exp(lz):.17g},{-lz / b:.17g}")
    return "\n".join(rows) + "\n"
