"""Equilibrium position correlations of the damped oscillator.

All formulas use a frequency-independent damping constant ``gamma`` taken from
the bath (for a Drude bath its cutoff is ignored here).  Frequency integrals
run over ``[0, inf)`` after folding the even or odd integrand, split at the
resonance ``omega_bar`` and handled with QUADPACK's Fourier-weighted rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import (
    QuadratureConfig,
    SeriesConfig,
    ThermalState,
    UnsupportedRegimeError,
    ValidationError,
    oscillatory_tail,
    quad,
    require,
    smooth_tail,
)
from .thermo import DampedOscillator

ROUTES = ("matsubara_sum", "frequency_integral", "pole_sum", "rwa", "rwa_markov")


@dataclass(frozen=True)
class Susceptibility:
    omega: np.ndarray | float
    value: np.ndarray | complex

    @property
    def real(self):
        return np.real(self.value)

    @property
    def imag(self):
        return np.imag(self.value)


@dataclass(frozen=True)
class OscillatorPoles:
    omega_bar: float
    gamma_half: float


@dataclass
class CorrelationSeries:
    axis: str
    samples: list
    route_tag: str

    def __post_init__(self):
        require(self.axis in ("real_time", "imaginary_time", "frequency"), "unknown axis")
        require(self.route_tag in ROUTES, "unknown route")


@dataclass(frozen=True)
class MarkovDiscrepancy:
    value: float
    asymptote: float
    asymptote_omega_bar: float


def _gamma(dosc: DampedOscillator) -> float:
    return 0.0 if dosc.bath is None else dosc.bath.gamma


def oscillator_poles(dosc: DampedOscillator) -> OscillatorPoles:
    """Resonances ``+-(omega_bar +- i gamma/2)``; underdamped oscillators only."""
    g, w0 = _gamma(dosc), dosc.omega0
    if g >= 2 * w0:
        raise UnsupportedRegimeError("overdamped oscillator: omega_bar is not real")
    return OscillatorPoles(math.sqrt(w0 * w0 - 0.25 * g * g), 0.5 * g)


def _spectral(dosc, w):
    # gamma w / ((w**2 - w0**2)**2 + gamma**2 w**2) = m chi''(w)
    g, w0 = _gamma(dosc), dosc.omega0
    return g * w / ((w * w - w0 * w0) ** 2 + g * g * w * w)


def chi(dosc: DampedOscillator, omega) -> Susceptibility:
    """Dynamic susceptibility ``(1/m)/(-omega**2 - i gamma omega + omega0**2)``."""
    w = np.asarray(omega, dtype=float)
    val = 1.0 / (dosc.spec.m * (-w * w - 1j * _gamma(dosc) * w + dosc.omega0**2))
    return Susceptibility(omega, val if val.ndim else complex(val))


def chi_time(dosc: DampedOscillator, t):
    """Response function ``(1/m omega_bar) exp(-gamma t/2) sin(omega_bar t)`` for ``t > 0``, zero before."""
    p = oscillator_poles(dosc)
    t = np.asarray(t, dtype=float)
    out = np.where(t > 0, np.exp(-p.gamma_half * t) * np.sin(p.omega_bar * t) / (dosc.spec.m * p.omega_bar), 0.0)
    return out if out.ndim else float(out)


def lorentzian_pair(dosc: DampedOscillator, omega):
    """Two-Lorentzian form of ``m chi''``, centred at ``+-omega_bar``."""
    p = oscillator_poles(dosc)
    w = np.asarray(omega, dtype=float)
    g2 = p.gamma_half**2
    g = _gamma(dosc)
    return g / (4 * p.omega_bar) * (1 / ((w - p.omega_bar) ** 2 + g2) - 1 / ((w + p.omega_bar) ** 2 + g2))


def c_tilde(dosc: DampedOscillator, thermal: ThermalState, omega):
    """Fluctuation-dissipation spectrum ``2 hbar chi''(w)/(1 - exp(-hbar beta w))``.

    The ``w -> 0`` value ``2 gamma/(m beta w0**4)`` is filled in analytically;
    at zero temperature the factor becomes a step function.
    """
    hbar, m = thermal.constants.hbar, dosc.spec.m
    w = np.asarray(omega, dtype=float)
    chi2 = _spectral(dosc, w) / m
    if thermal.is_zero_temperature:
        out = np.where(w > 0, 2 * hbar * chi2, 0.0)
    else:
        x = thermal.hbar_beta * w
        small = np.abs(x) < 1e-8
        xs = np.where(small, 1.0, x)
        with np.errstate(over="ignore"):
            occ = -1.0 / np.expm1(-xs)
        out = np.where(small, 2 * _gamma(dosc) / (m * thermal.beta * dosc.omega0**4), 2 * hbar * chi2 * occ)
    return out if out.ndim else float(out)


def _coth_half(thermal: ThermalState, w):
    """``coth(hbar beta w/2)`` for ``w > 0``; 1 at zero temperature."""
    if thermal.is_zero_temperature:
        return np.ones_like(np.asarray(w, dtype=float))
    return 1.0 / np.tanh(0.5 * thermal.hbar_beta * np.asarray(w, dtype=float))


def _w_coth(thermal: ThermalState, w):
    # w coth(hbar beta w/2), finite at w = 0
    if thermal.is_zero_temperature:
        return np.abs(w)
    x = 0.5 * thermal.hbar_beta * w
    if abs(x) < 1e-4:
        return 2.0 / thermal.hbar_beta * (1 + x * x / 3 - x**4 / 45)
    return w / math.tanh(x)


_FEW_CYCLES = 20 * np.pi  # panels with fewer than ten oscillations skip QAWO


def _fourier_half_line(f, t, kind, centre, width, q: QuadratureConfig):
    """``int_0^inf f(w) cos(w t)`` (or sin) with breakpoints around ``centre``."""
    cuts = [0.0]
    for k in (-20, -5, -1, 1, 5, 20):
        c = centre + k * width
        if c > cuts[-1]:
            cuts.append(c)
    top = max(4 * centre, centre + 40 * width)
    if q.omega_cap is not None:
        top = min(top, q.omega_cap)
        cuts = [c for c in cuts if c < top]
    cuts.append(top)
    trig = np.cos if kind == "cos" else np.sin
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if t * (b - a) < _FEW_CYCLES:
            # QAWO's moment recursion can silently fail on short panels (seen at t = 80, width 0.1)
            total += quad(lambda w: f(w) * trig(w * t), a, b, epsabs=q.epsabs, epsrel=q.epsrel, limit=q.limit)[0]
        else:
            total += quad(f, a, b, weight=kind, wvar=t, epsabs=q.epsabs, epsrel=q.epsrel, limit=q.limit)[0]
    if q.omega_cap is None:
        if t == 0:
            if kind == "cos":
                total += quad(f, top, np.inf, epsabs=q.epsabs, epsrel=q.epsrel, limit=q.limit)[0]
        else:
            total += quad(f, top, np.inf, weight=kind, wvar=t, epsabs=q.epsabs, limlst=100, limit=q.limit)[0]
    return total


def _resonance(dosc):
    g, w0 = _gamma(dosc), dosc.omega0
    wb = math.sqrt(max(w0 * w0 - 0.25 * g * g, 0.0))
    return (wb if wb > 0 else w0), max(0.5 * g, 1e-3 * w0)


def s_symmetric(dosc: DampedOscillator, thermal: ThermalState, t, quadrature: QuadratureConfig | None = None) -> float:
    """Symmetric correlation ``S(t)`` from its frequency integral."""
    q = quadrature or QuadratureConfig()
    require(_gamma(dosc) > 0, "needs a damped oscillator")
    hbar, m, g, w0 = thermal.constants.hbar, dosc.spec.m, _gamma(dosc), dosc.omega0
    t = abs(float(t))
    f = lambda w: g * _w_coth(thermal, w) / ((w * w - w0 * w0) ** 2 + g * g * w * w)
    centre, width = _resonance(dosc)
    return hbar / (np.pi * m) * _fourier_half_line(f, t, "cos", centre, width, q)


def a_antisymmetric(dosc: DampedOscillator, t, quadrature: QuadratureConfig | None = None, hbar: float | None = None) -> float:
    """Antisymmetric correlation ``A(t) = -(hbar/pi m) int_0^inf m chi''(w) sin(w t) dw``; independent of temperature."""
    q = quadrature or QuadratureConfig()
    require(_gamma(dosc) > 0, "needs a damped oscillator")
    hbar = dosc.hbar if hbar is None else hbar
    t = float(t)
    sign = 1.0 if t >= 0 else -1.0
    f = lambda w: _spectral(dosc, w)
    centre, width = _resonance(dosc)
    return -sign * hbar / (np.pi * dosc.spec.m) * _fourier_half_line(f, abs(t), "sin", centre, width, q)


def c_real_time(dosc: DampedOscillator, thermal: ThermalState, t, quadrature: QuadratureConfig | None = None) -> complex:
    """``C(t) = (hbar/pi m) int m chi''(w) exp(-i w t)/(1 - exp(-hbar beta w)) dw``.

    The negative-frequency half is folded onto ``w > 0``, where emission
    carries ``1 + n(w)`` and absorption ``n(w)`` with the Bose factor ``n``;
    the four occupation-weighted integrals are evaluated separately.
    """
    q = quadrature or QuadratureConfig()
    require(_gamma(dosc) > 0, "needs a damped oscillator")
    hbar, m = thermal.constants.hbar, dosc.spec.m
    t = float(t)
    centre, width = _resonance(dosc)
    hb = thermal.hbar_beta

    def bose_weighted(w):
        # m chi''(w) n(w), finite at w = 0
        if thermal.is_zero_temperature:
            return 0.0
        x = hb * w
        if x < 1e-8:
            return _gamma(dosc) / (hb * dosc.omega0**4)
        if x > 700:
            return 0.0
        return _spectral(dosc, w) / math.expm1(x)

    plain = lambda w: _spectral(dosc, w)
    ta = abs(t)
    sgn = 1.0 if t >= 0 else -1.0
    emit_cos = _fourier_half_line(plain, ta, "cos", centre, width, q) + _fourier_half_line(bose_weighted, ta, "cos", centre, width, q)
    absorb_cos = _fourier_half_line(bose_weighted, ta, "cos", centre, width, q)
    emit_sin = sgn * (_fourier_half_line(plain, ta, "sin", centre, width, q) + _fourier_half_line(bose_weighted, ta, "sin", centre, width, q))
    absorb_sin = sgn * _fourier_half_line(bose_weighted, ta, "sin", centre, width, q)
    pref = hbar / (np.pi * m)
    return complex(pref * (emit_cos + absorb_cos), pref * (absorb_sin - emit_sin))


def c_imaginary_time(dosc: DampedOscillator, thermal: ThermalState, tau,
                     series: SeriesConfig | None = None, max_terms: int = 1 << 22) -> float:
    """``C(tau) = (1/m beta) sum_n exp(i nu_n tau)/(nu_n**2 + gamma |nu_n| + w0**2)`` on ``[0, hbar beta]``.

    Summed symmetrically to ``n_max`` with an analytic tail; ``n_max`` doubles
    until the tail's error estimate meets ``series.tolerance``.
    """
    series = series or SeriesConfig(n_max=256, tolerance=1e-13)
    require(not thermal.is_zero_temperature, "needs a finite beta")
    hb = thermal.hbar_beta
    tau = float(tau)
    require(0.0 <= tau <= hb, "tau must lie in [0, hbar*beta]")
    g, w0 = _gamma(dosc), dosc.omega0

    def term(n):
        nu = 2 * np.pi * np.asarray(n, dtype=float) / hb
        return 1.0 / (nu * nu + g * nu + w0 * w0)

    theta = 2 * np.pi * tau / hb
    periodic = math.isclose(math.cos(theta), 1.0, abs_tol=1e-15)
    n = series.n_max
    while True:
        ns = np.arange(1, n + 1)
        head = term(0) + 2 * float(np.sum(term(ns) * np.cos(ns * theta)))
        if series.tail_policy == "none":
            return head / (dosc.spec.m * thermal.beta)
        if periodic:
            tail, err = 2 * _rational_tail(g * hb / (2 * np.pi), w0 * hb / (2 * np.pi), n + 1) * (hb / (2 * np.pi)) ** 2, 0.0
        else:
            tz, last = oscillatory_tail(term, n + 1, complex(math.cos(theta), math.sin(theta)))
            tail, err = 2 * tz.real, 2 * last
        total = head + tail
        if err <= series.tolerance * abs(total):
            return total / (dosc.spec.m * thermal.beta)
        if n >= max_terms:
            raise ValidationError(f"imaginary-time series did not converge at tau={tau}")
        n *= 2


def _rational_tail(b, c, start):
    """``sum_{n >= start} 1/(n**2 + b n + c**2)`` through digamma functions of the roots."""
    disc = complex(b * b - 4 * c * c) ** 0.5
    a1, a2 = 0.5 * (b + disc), 0.5 * (b - disc)
    if abs(a1 - a2) < 1e-8 * max(1.0, abs(a1)):
        return float(special.polygamma(1, start + 0.5 * b))
    return float(((special.digamma(start + a1) - special.digamma(start + a2)) / (a1 - a2)).real)


def s_pole_terms(dosc: DampedOscillator, thermal: ThermalState, t, series: SeriesConfig | None = None):
    """The resonance line and the Matsubara line of the pole expansion of ``S(t)``.

    At zero temperature the Matsubara sum becomes
    ``-(hbar gamma/pi m) int_0^inf nu exp(-nu t)/((nu**2+w0**2)**2 - gamma**2 nu**2) dnu``.
    """
    p = oscillator_poles(dosc)
    series = series or SeriesConfig(n_max=1024)
    hbar, m, g, w0 = thermal.constants.hbar, dosc.spec.m, _gamma(dosc), dosc.omega0
    wb = p.omega_bar
    t = abs(float(t))
    envelope = hbar / (2 * m * wb) * math.exp(-0.5 * g * t)

    def weight(nu):
        return nu * np.exp(-nu * t) / ((nu * nu + w0 * w0) ** 2 - g * g * nu * nu)

    if thermal.is_zero_temperature:
        resonance = envelope * math.cos(wb * t)
        cut = quad(weight, 0.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=500)[0]
        return resonance, -hbar * g / (np.pi * m) * cut
    hb = thermal.hbar_beta
    x, y = hb * wb, 0.5 * hb * g
    # [sinh x cos + sin y sin]/(cosh x - cos y), rescaled by 2 exp(-x)
    e1, e2 = math.exp(-x), math.exp(-2 * x)
    num = (1 - e2) * math.cos(wb * t) + 2 * e1 * math.sin(y) * math.sin(wb * t)
    den = 1 + e2 - 2 * e1 * math.cos(y)
    resonance = envelope * num / den
    term = lambda n: weight(2 * np.pi * np.asarray(n, dtype=float) / hb)
    ns = np.arange(1, series.n_max + 1)
    total = float(np.sum(term(ns)))
    if series.tail_policy == "log_tail":
        total += smooth_tail(term, series.n_max + 1)
    return resonance, -2 * g / (m * thermal.beta) * total


def s_pole_sum(dosc: DampedOscillator, thermal: ThermalState, t, series: SeriesConfig | None = None) -> float:
    """``S(t)`` from the residues of the resonance poles and the Matsubara poles."""
    res, mats = s_pole_terms(dosc, thermal, t, series)
    return res + mats


def s_zero_temperature_tail(dosc: DampedOscillator, t, hbar: float | None = None) -> float:
    """Long-time zero-temperature asymptote ``-hbar gamma/(pi m w0**4 t**2)``."""
    hbar = dosc.hbar if hbar is None else hbar
    return -hbar * _gamma(dosc) / (np.pi * dosc.spec.m * dosc.omega0**4 * float(t) ** 2)


def s_rwa(dosc: DampedOscillator, thermal: ThermalState, t, quadrature: QuadratureConfig | None = None) -> float:
    """Rotating-wave correlation: only the Lorentzian at ``+omega_bar``, full ``coth``.

    ``coth`` is odd, so the principal value over the real line folds onto
    ``w > 0`` as ``[L(w) - L(-w)] coth(hbar beta w/2)``, which is the full
    two-Lorentzian integrand.  Hence this equals ``S(t)/2`` identically.
    """
    q = quadrature or QuadratureConfig()
    p = oscillator_poles(dosc)
    hbar, m, g = thermal.constants.hbar, dosc.spec.m, _gamma(dosc)
    wb, g2 = p.omega_bar, p.gamma_half**2
    t = abs(float(t))

    def f(w):
        # [L(w) - L(-w)] coth = 4 gamma omega_bar/(D_- D_+) * w coth
        return 4 * g * wb / (((w - wb) ** 2 + g2) * ((w + wb) ** 2 + g2)) * _w_coth(thermal, w)

    return hbar / (8 * np.pi * m * wb) * _fourier_half_line(f, t, "cos", wb, p.gamma_half, q)


def s_rwa_markov(dosc: DampedOscillator, thermal: ThermalState, t) -> float:
    """``(hbar/4 m omega_bar) coth(hbar beta omega_bar/2) cos(omega_bar t) exp(-gamma |t|/2)``."""
    p = oscillator_poles(dosc)
    hbar = thermal.constants.hbar
    c = float(_coth_half(thermal, p.omega_bar))
    t = float(t)
    return hbar / (4 * dosc.spec.m * p.omega_bar) * c * math.cos(p.omega_bar * t) * math.exp(-p.gamma_half * abs(t))


def markov_discrepancy(dosc: DampedOscillator, t, quadrature: QuadratureConfig | None = None,
                       hbar: float | None = None) -> MarkovDiscrepancy:
    """Zero-temperature ``S_RWA - S_RWA,Markov``.

    Equals ``-(hbar/4 pi m omega_bar) int_{-inf}^0 L(w) cos(w t) dw`` with
    ``L(w) = gamma/((w - omega_bar)**2 + gamma**2/4)``.  For long times this
    tends to ``-hbar gamma/(2 pi m w0**4 t**2)``, half the algebraic tail of
    the full ``S(t)`` because ``S_RWA = S/2``.  The variant normalised with
    ``omega_bar**4`` is returned for comparison.
    """
    q = quadrature or QuadratureConfig()
    p = oscillator_poles(dosc)
    hbar = dosc.hbar if hbar is None else hbar
    m, g, wb = dosc.spec.m, _gamma(dosc), p.omega_bar
    f = lambda w: g / ((w + wb) ** 2 + p.gamma_half**2)
    integral = _fourier_half_line(f, abs(float(t)), "cos", 1e-9, wb, q)
    value = -hbar / (4 * np.pi * m * wb) * integral
    t2 = float(t) ** 2
    return MarkovDiscrepancy(value, -hbar * g / (2 * np.pi * m * dosc.omega0**4 * t2),
                             -hbar * g / (2 * np.pi * m * wb**4 * t2))


def power_law_exponent(ts, values) -> float:
    """Least-squares slope of ``log|value|`` against ``log t``."""
    ts, values = np.asarray(ts, dtype=float), np.asarray(values, dtype=float)
    return float(np.polyfit(np.log(ts), np.log(np.abs(values)), 1)[0])


def log_envelope_slope(ts, values, omega_bar):
    """Slope and max residual of a line fitted to ``log|value/cos(omega_bar t)|``."""
    ts = np.asarray(ts, dtype=float)
    env = np.log(np.abs(np.asarray(values, dtype=float) / np.cos(omega_bar * ts)))
    coef = np.polyfit(ts, env, 1)
    resid = env - np.polyval(coef, ts)
    return float(coef[0]), float(np.max(np.abs(resid)))


def time_csv(ts, s_values, a_values) -> str:
    rows = ["t,S,A"] + [f"{t:.17g},{s:.17g},{a:.17g}" for t, s, a in zip(ts, s_values, a_values)]
    return "\n".join(rows) + "\n"


def detailed_balance_defect(dosc: DampedOscillator, thermal: ThermalState, omega):
    """``|C(-w) - exp(-hbar beta w) C(w)|`` relative to ``C(w)``; identically zero in exact arithmetic."""
    w = np.asarray(omega, dtype=float)
    fwd = c_tilde(dosc, thermal, w)
    back = c_tilde(dosc, thermal, -w)
    if thermal.is_zero_temperature:
        return np.abs(back) / np.where(fwd == 0, 1.0, np.abs(fwd))
    diff = np.abs(back - np.exp(-thermal.hbar_beta * w) * fwd)
    return diff / np.where(fwd == 0, 1.0, np.abs(fwd))


def frequency_csv(dosc: DampedOscillator, thermal: ThermalState, omegas) -> str:
    omegas = np.asarray(omegas, dtype=float)
    x = np.atleast_1d(chi(dosc, omegas).value)
    ct = np.atleast_1d(c_tilde(dosc, thermal, omegas))
    fdt = np.atleast_1d(detailed_balance_defect(dosc, thermal, omegas))
    rows = ["omega,re_chi,im_chi,c_tilde,fdt_defect"]
    rows += [f"{w:.17g},{v.real:.17g},{v.imag:.17g},{c:.17g},{d:.17g}" for w, v, c, d in zip(omegas, x, ct, fdt)]
    return "\n".join(rows) + "\n"
