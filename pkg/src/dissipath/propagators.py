"""Closed-form propagators of exactly solvable one-dimensional systems.

Covers the free particle, the driven harmonic oscillator, a particle on a ring
(winding-number and spectral sums), a hard wall and a box (image and spectral
sums), plus the semiclassical Van Vleck construction from an arbitrary
classical action.

The oscillatory sums only converge in the distributional sense at real time.
They are evaluated at the complex time ``t - i*epsilon`` and the regulator is
removed by :func:`epsilon_extrapolated`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .core import (
    DEFAULT_CONSTANTS,
    ConjugatePointError,
    ConvergenceError,
    GlobalConstants,
    ValidationError,
    require,
)

ROUTES = ("closed_form", "winding_sum", "spectral_sum", "image_sum", "trotter")

# default regulator: epsilon = EPSILON_FACTOR * t / EPSILON_TERMS
EPSILON_FACTOR = 2.0
EPSILON_TERMS = 200
_CUTOFF = 40.0  # terms are dropped once their Gaussian damping exceeds exp(-_CUTOFF)


@dataclass
class PropagatorValue:
    amplitude: complex
    morse_index: int | None = 0
    route_tag: str = "closed_form"
    diagnostics: dict = field(default_factory=dict)

    def __complex__(self):
        return complex(self.amplitude)

    def __post_init__(self):
        require(self.route_tag in ROUTES, f"unknown route {self.route_tag!r}")


@dataclass(frozen=True)
class OscillatorSpec:
    m: float = 1.0
    omega: float = 1.0
    constants: GlobalConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        require(self.m > 0, "mass must be positive")
        require(self.omega >= 0, "frequency must be non-negative")


@dataclass(frozen=True)
class RingSpec:
    m: float = 1.0
    radius: float = 1.0
    constants: GlobalConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        require(self.m > 0 and self.radius > 0, "mass and radius must be positive")

    def energy(self, l):
        hbar = self.constants.hbar
        return hbar**2 * np.asarray(l, dtype=float) ** 2 / (2 * self.m * self.radius**2)


@dataclass(frozen=True)
class BoxSpec:
    m: float = 1.0
    length: float = 1.0
    constants: GlobalConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        require(self.m > 0 and self.length > 0, "mass and length must be positive")

    def energy(self, j):
        hbar = self.constants.hbar
        return (hbar * np.pi * np.asarray(j, dtype=float)) ** 2 / (2 * self.m * self.length**2)

    def eigenfunction(self, j, x):
        return np.sqrt(2.0 / self.length) * np.sin(np.pi * j * np.asarray(x) / self.length)


@dataclass(frozen=True)
class DriveForce:
    """External force given by samples ``(time, force)``; zero outside the sampled span."""

    samples: tuple
    interpolation: str = "linear"

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        require(arr.ndim == 2 and arr.shape[1] == 2 and arr.shape[0] >= 1, "samples must be (time, force) pairs")
        require(np.all(np.diff(arr[:, 0]) > 0), "sample times must be strictly increasing")
        require(np.all(np.isfinite(arr)), "force samples must be finite")
        require(self.interpolation in ("linear", "zero"), "interpolation must be 'linear' or 'zero'")

    @classmethod
    def constant(cls, value, t_end, t_start=0.0):
        return cls(((t_start, value), (t_end, value)))

    @property
    def times(self):
        return np.asarray(self.samples, dtype=float)[:, 0]

    @property
    def values(self):
        return np.asarray(self.samples, dtype=float)[:, 1]

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        ts, fs = self.times, self.values
        inside = (s >= ts[0]) & (s <= ts[-1])
        if self.interpolation == "linear":
            out = np.interp(s, ts, fs)
        else:
            idx = np.clip(np.searchsorted(ts, s, side="right") - 1, 0, len(ts) - 1)
            out = fs[idx]
        return np.where(inside, out, 0.0)


@dataclass(frozen=True)
class DeltaLimit:
    """Kernel ``weight * delta(x_f - sign * x_i)`` reached at a conjugate point."""

    weight: complex
    reflected: bool


def _check_time(t):
    if not t > 0:
        raise ValidationError("propagation time must be positive")


def free_classical_action(m, t, x_f, x_i):
    """Action of the straight classical path, ``m (x_f - x_i)**2 / (2 t)``."""
    _check_time(t)
    return m * (np.asarray(x_f) - np.asarray(x_i)) ** 2 / (2.0 * t)


def free_propagator(m, t, x_f, x_i, constants: GlobalConstants = DEFAULT_CONSTANTS) -> PropagatorValue:
    """Free-particle propagator ``sqrt(m/(2 pi i hbar t)) exp(i m (x_f-x_i)**2/(2 hbar t))``."""
    _check_time(t)
    hbar = constants.hbar
    dx = np.asarray(x_f, dtype=float) - np.asarray(x_i, dtype=float)
    pref = np.sqrt(m / (2 * np.pi * hbar * t)) * np.exp(-1j * np.pi / 4)
    return PropagatorValue(pref * np.exp(1j * m * dx**2 / (2 * hbar * t)), 0, "closed_form")


def free_propagator_from_action(m, t, x_f, x_i, constants: GlobalConstants = DEFAULT_CONSTANTS) -> PropagatorValue:
    """The same kernel assembled from the classical action and its mixed derivative."""
    hbar = constants.hbar
    mixed = -m / t  # d2S/dx_f dx_i
    pref = np.sqrt(-mixed / (2j * np.pi * hbar) + 0j)
    action = free_classical_action(m, t, x_f, x_i)
    return PropagatorValue(pref * np.exp(1j * action / hbar), 0, "closed_form")


# ---------------------------------------------------------------- driven oscillator


def _sn(omega, x):
    # sin(omega x)/omega, continuous at omega = 0
    x = np.asarray(x, dtype=float)
    return np.sin(omega * x) / omega if omega > 0 else x


def morse_index(omega, t) -> int:
    """Number of conjugate points passed, the integer part of ``omega t / pi``."""
    return int(math.floor(omega * t / np.pi)) if omega > 0 else 0


def _panels(drive: DriveForce | None, t, omega):
    cuts = [0.0, t]
    if drive is not None:
        cuts += [s for s in drive.times if 0.0 < s < t]
    cuts = np.unique(cuts)
    longest = np.pi / (2 * omega) if omega > 0 else t
    edges = [cuts[0]]
    for a, b in zip(cuts[:-1], cuts[1:]):
        pieces = max(1, int(math.ceil((b - a) / longest)))
        edges.extend(np.linspace(a, b, pieces + 1)[1:])
    return np.asarray(edges)


def _drive_integrals(omega, drive, t, order):
    """The three drive integrals of the classical action, written with sin(w x)/w."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = _panels(drive, t, omega)
    j1 = j2 = j3 = 0.0
    cumulative = 0.0  # int_0^a sn(u) f(u) du up to the current panel start
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        s = a + half * (nodes + 1.0)
        ws = half * weights
        fs = drive(s)
        j1 += np.sum(ws * _sn(omega, s) * fs)
        j2 += np.sum(ws * _sn(omega, t - s) * fs)
        # inner integral from a to each outer node, again by Gauss-Legendre
        inner_half = 0.5 * (s - a)
        u = a + inner_half[:, None] * (nodes[None, :] + 1.0)
        inner = np.sum(inner_half[:, None] * weights[None, :] * _sn(omega, u) * drive(u), axis=1)
        j3 += np.sum(ws * _sn(omega, t - s) * fs * (cumulative + inner))
        cumulative += np.sum(ws * _sn(omega, s) * fs)
    return j1, j2, j3


def ho_classical_action(spec: OscillatorSpec, drive: DriveForce | None, t, x_f, x_i,
                        order: int = 16, tolerance: float = 1e-12):
    """Classical action of the (optionally driven) harmonic oscillator.

    The drive terms are integrated with Gauss-Legendre panels whose edges sit on
    the force sample times.  Raises :class:`ConjugatePointError` when
    ``|sin(omega t)|`` falls below ``tolerance``.
    """
    _check_time(t)
    m, w = spec.m, spec.omega
    sn_t = float(_sn(w, t))
    if w > 0 and abs(math.sin(w * t)) < tolerance:
        raise ConjugatePointError(f"omega*t = {w * t!r} is a conjugate point")
    x_f = np.asarray(x_f, dtype=float)
    x_i = np.asarray(x_i, dtype=float)
    cos_t = math.cos(w * t)
    action = m / (2 * sn_t) * ((x_i**2 + x_f**2) * cos_t - 2 * x_i * x_f)
    if drive is not None:
        j1, j2, j3 = _drive_integrals(w, drive, t, order)
        action = action + (x_f * j1 + x_i * j2) / sn_t - j3 / (m * sn_t)
    return action


def ho_propagator(spec: OscillatorSpec, drive: DriveForce | None, t, x_f, x_i,
                  tolerance: float = 1e-12) -> PropagatorValue:
    """Driven-oscillator propagator with the Morse phase ``-i(pi/4 + n pi/2)``."""
    action = ho_classical_action(spec, drive, t, x_f, x_i, tolerance=tolerance)
    hbar = spec.constants.hbar
    n = morse_index(spec.omega, t)
    pref = np.sqrt(spec.m / (2 * np.pi * hbar * abs(float(_sn(spec.omega, t)))))
    amp = pref * np.exp(1j * action / hbar - 1j * (np.pi / 4 + n * np.pi / 2))
    return PropagatorValue(amp, n, "closed_form")


def ho_delta_limit(spec: OscillatorSpec, t, tolerance: float = 1e-9) -> DeltaLimit:
    """Distributional kernel of the undriven oscillator at ``omega t = k pi``.

    After a full period the wave function returns multiplied by ``-1``; after
    half a period it is reflected and multiplied by ``-i``.
    """
    require(spec.omega > 0, "the delta limit needs omega > 0")
    k = round(spec.omega * t / np.pi)
    if k < 1 or abs(spec.omega * t - k * np.pi) > tolerance * max(1.0, k * np.pi):
        raise ValidationError("t is not a conjugate point of the oscillator")
    return DeltaLimit(complex(np.exp(-1j * k * np.pi / 2)), bool(k % 2))


# ---------------------------------------------------------------- regulated sums


def default_epsilon(t, n_max=EPSILON_TERMS, c=EPSILON_FACTOR):
    return c * t / n_max


def _complex_time(t, epsilon):
    _check_time(t)
    if epsilon is None:
        epsilon = default_epsilon(t)
    require(epsilon >= 0, "epsilon must be non-negative")
    return t - 1j * epsilon, epsilon


def _gaussian_family(coef, offsets_of_n, center, n_max, epsilon_damp):
    """Sum ``exp(coef * d_n**2)`` over a window of n around ``center``.

    ``epsilon_damp`` is ``-Re(coef)``; when it is positive the window is sized so
    the dropped terms are below ``exp(-_CUTOFF)``.
    """
    if n_max is None:
        if epsilon_damp <= 0:
            raise ValidationError("an unregulated sum needs an explicit truncation")
        n_max = int(math.ceil(math.sqrt(_CUTOFF / epsilon_damp))) + 2
    n = center + np.arange(-n_max, n_max + 1)
    d = offsets_of_n(n)
    terms = np.exp(coef * d**2)
    edge = max(abs(terms[0]), abs(terms[-1]))
    return np.sum(terms), edge, n_max


def ring_propagator_winding(spec: RingSpec, t, phi_f, phi_i, n_max=None, epsilon=None,
                            tolerance: float = 1e-12) -> PropagatorValue:
    """Ring kernel as a sum of free propagators over winding numbers at time ``t - i eps``."""
    tc, eps = _complex_time(t, epsilon)
    hbar, m, R = spec.constants.hbar, spec.m, spec.radius
    dphi = float(phi_f) - float(phi_i)
    coef = 1j * m * R**2 / (2 * hbar * tc)
    damp = -coef.real * (2 * np.pi) ** 2
    center = int(round(dphi / (2 * np.pi)))
    total, edge, used = _gaussian_family(coef, lambda n: dphi - 2 * np.pi * n, center, n_max, damp)
    pref = R * np.sqrt(m / (2j * np.pi * hbar * tc))
    diag = {"epsilon": eps, "n_max": used, "truncation": float(abs(pref) * edge),
            "converged": bool(abs(pref) * edge <= tolerance)}
    return PropagatorValue(complex(pref * total), None, "winding_sum", diag)


def ring_propagator_spectral(spec: RingSpec, t, phi_f, phi_i, l_max=None, epsilon=None,
                             tolerance: float = 1e-12) -> PropagatorValue:
    """Ring kernel as the eigenfunction sum ``(1/2pi) sum_l exp(i l dphi - i E_l (t - i eps)/hbar)``."""
    tc, eps = _complex_time(t, epsilon)
    hbar, m, R = spec.constants.hbar, spec.m, spec.radius
    alpha = hbar * tc / (2 * m * R**2)
    if l_max is None:
        require(eps > 0, "an unregulated sum needs an explicit truncation")
        l_max = int(math.ceil(math.sqrt(_CUTOFF / (-(-1j * alpha).real)))) + 2
    ls = np.arange(-l_max, l_max + 1)
    dphi = float(phi_f) - float(phi_i)
    terms = np.exp(1j * ls * dphi - 1j * alpha * ls**2)
    edge = abs(terms[0]) / (2 * np.pi)
    diag = {"epsilon": eps, "l_max": int(l_max), "truncation": float(edge), "converged": bool(edge <= tolerance)}
    return PropagatorValue(complex(np.sum(terms) / (2 * np.pi)), None, "spectral_sum", diag)


def wall_propagator(m, t, x_f, x_i, constants: GlobalConstants = DEFAULT_CONSTANTS) -> PropagatorValue:
    """Half-line propagator with a hard wall at the origin (one mirror image)."""
    x_f = np.asarray(x_f, dtype=float)
    if np.any(x_f <= 0) or np.any(np.asarray(x_i) <= 0):
        raise ValidationError("coordinates must lie to the right of the wall at x = 0")
    direct = free_propagator(m, t, x_f, x_i, constants).amplitude
    mirror = free_propagator(m, t, -x_f, x_i, constants).amplitude
    return PropagatorValue(direct - mirror, 0, "image_sum")


def _check_box(spec, x_f, x_i, allow_extension):
    if allow_extension:
        return
    L = spec.length
    for x in (x_f, x_i):
        if not 0.0 <= x <= L:
            raise ValidationError("positions must lie inside the box [0, L]")


def box_propagator_images(spec: BoxSpec, t, x_f, x_i, n_max=None, epsilon=None,
                          tolerance: float = 1e-12, allow_extension: bool = False) -> PropagatorValue:
    """Box kernel from mirror images; odd numbers of reflections carry a minus sign."""
    _check_box(spec, x_f, x_i, allow_extension)
    tc, eps = _complex_time(t, epsilon)
    hbar, m, L = spec.constants.hbar, spec.m, spec.length
    x_f, x_i = float(x_f), float(x_i)
    coef = 1j * m / (2 * hbar * tc)
    damp = -coef.real * (2 * L) ** 2
    even, e1, used = _gaussian_family(coef, lambda n: 2 * n * L + x_f - x_i,
                                      int(round((x_i - x_f) / (2 * L))), n_max, damp)
    odd, e2, _ = _gaussian_family(coef, lambda n: 2 * n * L - x_f - x_i,
                                  int(round((x_i + x_f) / (2 * L))), n_max, damp)
    pref = np.sqrt(m / (2j * np.pi * hbar * tc))
    trunc = float(abs(pref) * max(e1, e2))
    diag = {"epsilon": eps, "n_max": used, "truncation": trunc, "converged": bool(trunc <= tolerance)}
    return PropagatorValue(complex(pref * (even - odd)), None, "image_sum", diag)


def box_propagator_spectral(spec: BoxSpec, t, x_f, x_i, j_max=None, epsilon=None,
                            tolerance: float = 1e-12, allow_extension: bool = False) -> PropagatorValue:
    """Box kernel as the eigenfunction sum ``(2/L) sum_j exp(-i E_j t/hbar) sin sin``."""
    _check_box(spec, x_f, x_i, allow_extension)
    tc, eps = _complex_time(t, epsilon)
    hbar, L = spec.constants.hbar, spec.length
    e1 = float(spec.energy(1))
    if j_max is None:
        require(eps > 0, "an unregulated sum needs an explicit truncation")
        j_max = int(math.ceil(math.sqrt(_CUTOFF * hbar / (e1 * eps)))) + 2
    js = np.arange(1, j_max + 1)
    phases = np.exp(-1j * spec.energy(js) * tc / hbar)
    terms = phases * np.sin(np.pi * js * x_f / L) * np.sin(np.pi * js * x_i / L)
    edge = 2.0 / L * abs(phases[-1])
    diag = {"epsilon": eps, "j_max": int(j_max), "truncation": float(edge), "converged": bool(edge <= tolerance)}
    return PropagatorValue(complex(2.0 / L * np.sum(terms)), None, "spectral_sum", diag)


def epsilon_extrapolated(route: Callable[..., PropagatorValue], *args, epsilon=None, **kwargs) -> PropagatorValue:
    """Remove the ``t - i eps`` regulator by two-point Richardson extrapolation.

    The route is evaluated at ``eps`` and ``eps/2``; the regulated value is
    linear in ``eps`` to leading order, so ``2 K(eps/2) - K(eps)`` is accurate to
    ``O(eps**2)``.  ``args[1]`` must be the time.
    """
    t = args[1]
    eps = default_epsilon(t) if epsilon is None else epsilon
    coarse = route(*args, epsilon=eps, **kwargs)
    fine = route(*args, epsilon=eps / 2, **kwargs)
    value = 2.0 * fine.amplitude - coarse.amplitude
    diag = {"epsilon": eps, "coarse": complex(coarse.amplitude), "fine": complex(fine.amplitude),
            "converged": bool(coarse.diagnostics.get("converged", True) and fine.diagnostics.get("converged", True))}
    return PropagatorValue(complex(value), coarse.morse_index, coarse.route_tag, diag)


# ---------------------------------------------------------------- semiclassics


def default_fd_step(x_f, x_i):
    """Step for the central mixed second difference: ``eps**(1/4)`` times the coordinate scale.

    A fourth root balances the ``h**2`` truncation error against the
    ``eps/h**2`` round-off of a second difference.
    """
    scale = max(1.0, abs(float(x_f)), abs(float(x_i)))
    return np.finfo(float).eps ** 0.25 * scale


def mixed_derivative(action_fn, t, x_f, x_i, fd_step=None):
    """Central-difference estimate of ``d2S/dx_f dx_i``."""
    h = default_fd_step(x_f, x_i) if fd_step is None else fd_step
    s_pp = action_fn(x_f + h, t, x_i + h)
    s_pm = action_fn(x_f + h, t, x_i - h)
    s_mp = action_fn(x_f - h, t, x_i + h)
    s_mm = action_fn(x_f - h, t, x_i - h)
    return float((s_pp - s_pm - s_mp + s_mm) / (4 * h * h))


def morse_index_sweep(action_fn, t, x_f, x_i, steps: int = 400, fd_step=None) -> int:
    """Count sign changes of the mixed derivative on a time sweep from ``0+`` to ``t``.

    Sweep points that land on a conjugate point are skipped.
    """
    signs = []
    for tk in t * np.arange(1, steps + 1) / steps:
        try:
            d = mixed_derivative(action_fn, tk, x_f, x_i, fd_step)
        except ConjugatePointError:
            continue
        if np.isfinite(d) and d != 0:
            signs.append(np.sign(d))
    return int(np.sum(np.asarray(signs[1:]) != np.asarray(signs[:-1]))) if len(signs) > 1 else 0


def vanvleck_propagator(action_fn, t, x_f, x_i, fd_step=None, hbar: float = 1.0,
                        morse_index: int | None = None, sweep_steps: int = 400,
                        tolerance: float = 1e-10) -> PropagatorValue:
    """Semiclassical propagator from a classical action ``action_fn(x_f, t, x_i)``.

    The prefactor uses a finite-difference mixed derivative.  At a conjugate
    point the final position no longer depends on the initial momentum, so
    ``dx_f/dp_i = -1/(d2S/dx_f dx_i)`` vanishes; that case raises
    :class:`ConjugatePointError`, as does a mixed derivative equal to zero.
    """
    _check_time(t)
    d = mixed_derivative(action_fn, t, x_f, x_i, fd_step)
    if not np.isfinite(d) or d == 0 or abs(1.0 / d) < tolerance:
        raise ConjugatePointError("the mixed derivative of the action is singular here")
    n = morse_index_sweep(action_fn, t, x_f, x_i, sweep_steps, fd_step) if morse_index is None else morse_index
    action = action_fn(x_f, t, x_i)
    amp = np.sqrt(abs(d) / (2 * np.pi * hbar)) * np.exp(1j * action / hbar - 1j * (np.pi / 4 + n * np.pi / 2))
    return PropagatorValue(complex(amp), n, "closed_form", {"mixed_derivative": d})


def propagator_rows(values: Sequence[tuple]) -> str:
    """CSV ``t,x_i,x_f,re,im,morse`` from tuples ``(t, x_i, x_f, PropagatorValue)``."""
    rows = ["t,x_i,x_f,re,im,morse"]
    for t, xi, xf, pv in values:
        a = complex(pv.amplitude)
        morse = "" if pv.morse_index is None else str(pv.morse_index)
        rows.append(f"{t:.17g},{xi:.17g},{xf:.17g},{a.real:.17g},{a.imag:.17g},{morse}")
    return "\n".join(rows) + "\n"
