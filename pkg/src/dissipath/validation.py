"""Cross-module oracle checks, runnable from the library or the ``validate`` subcommand."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import bath, correlations, pathgrid, propagators, thermo
from .core import SeriesConfig, ThermalState
from .propagators import BoxSpec, OscillatorSpec, RingSpec


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    seconds: float = 0.0
    detail: str = ""

    def to_dict(self):
        return asdict(self)


def _timed(name, tolerance, fn: Callable[[], tuple]) -> Check:
    start = time.perf_counter()
    value, detail = fn()
    return Check(name, bool(value <= tolerance), float(value), tolerance, time.perf_counter() - start, detail)


def box_dual_route():
    spec = BoxSpec(1.0, 1.0)
    worst = 0.0
    for t, xf, xi in ((0.05, 0.3, 0.6), (0.4, 0.15, 0.8), (1.3, 0.5, 0.5)):
        a = propagators.epsilon_extrapolated(propagators.box_propagator_images, spec, t, xf, xi).amplitude
        b = propagators.epsilon_extrapolated(propagators.box_propagator_spectral, spec, t, xf, xi).amplitude
        worst = max(worst, abs(a - b) / abs(b))
    return worst, "max relative |images - spectral|"


def ring_dual_route():
    spec = RingSpec(1.0, 1.0)
    worst = 0.0
    for t, pf, pi in ((0.1, 0.4, 0.0), (0.7, 2.0, -1.0), (2.5, -0.3, 1.1)):
        a = propagators.epsilon_extrapolated(propagators.ring_propagator_winding, spec, t, pf, pi).amplitude
        b = propagators.epsilon_extrapolated(propagators.ring_propagator_spectral, spec, t, pf, pi).amplitude
        worst = max(worst, abs(a - b) / abs(b))
    return worst, "max relative |winding - spectral|"


def free_trotter_column():
    grid = pathgrid.Grid1D(-40.0, 40.0, 2048)
    col = pathgrid.trotter_kernel_column(1024, pathgrid.PotentialTable.zero(grid),
                                         pathgrid.TrotterPlan.real_time(1.0, 64), 0.5)
    ref = pathgrid.smeared_free_column(grid, 0.0, 1.0, 0.5)
    return float(np.max(np.abs(col.amplitudes - ref)) / np.max(np.abs(ref))), "smeared free kernel"


def trotter_vs_ho(n_slices=4096, n_points=2048):
    grid = pathgrid.Grid1D(-10.0, 10.0, n_points)
    state = pathgrid.GridState.gaussian(grid, 1.0, 0.5, momentum=0.5)
    t = np.pi / 4
    out = pathgrid.trotter_propagate(state, pathgrid.PotentialTable.harmonic(grid),
                                     pathgrid.TrotterPlan.real_time(t, n_slices))
    kern = propagators.ho_propagator(OscillatorSpec(), None, t, grid.x[:, None], grid.x[None, :]).amplitude
    ref = kern @ state.amplitudes * grid.dx
    return float(np.linalg.norm(out.amplitudes - ref) / np.linalg.norm(ref)), "relative L2, omega t = pi/4"


def imaginary_time_matrix(n_points=256, n_slices=2048):
    grid = pathgrid.Grid1D(-8.0, 8.0, n_points)
    res = pathgrid.imaginary_trotter(pathgrid.PotentialTable.harmonic(grid), pathgrid.TrotterPlan.thermal(1.0, n_slices))
    x, y = np.meshgrid(grid.x, grid.x, indexing="ij")
    exact = thermo.ho_thermal_kernel(OscillatorSpec(), ThermalState(1.0), x, y)
    return float(np.max(np.abs(res.matrix - exact)) / np.max(exact)), "max |M - M_exact| / max M"


def imaginary_time_trace(n_points=256, n_slices=2048):
    grid = pathgrid.Grid1D(-8.0, 8.0, n_points)
    res = pathgrid.imaginary_trotter(pathgrid.PotentialTable.harmonic(grid), pathgrid.TrotterPlan.thermal(1.0, n_slices))
    z = thermo.z_undamped(OscillatorSpec(), ThermalState(1.0))
    return abs(res.z / z - 1.0), "relative trace error"


def partition_routes():
    dosc = thermo.DampedOscillator(OscillatorSpec(), bath.SpectralDensity.drude(0.2, 50.0))
    worst = 0.0
    for beta in (0.5, 1.0, 5.0):
        th = ThermalState(beta)
        a = thermo.log_z_damped(dosc, th, SeriesConfig(1000))
        b = float(thermo.log_z_gamma_form(dosc, beta).real)
        worst = max(worst, abs(a - b))
    return worst, "|ln Z product - ln Z Gamma form|"


def detailed_balance():
    dosc = thermo.DampedOscillator(OscillatorSpec(), bath.SpectralDensity.ohmic(0.2))
    th = ThermalState(1.7)
    w = np.linspace(0.05, 6.0, 120)
    lhs = correlations.c_tilde(dosc, th, -w)
    rhs = np.exp(-th.hbar_beta * w) * correlations.c_tilde(dosc, th, w)
    return float(np.max(np.abs(lhs - rhs) / np.abs(rhs))), "relative detailed-balance defect"


def antisymmetric_temperature_free():
    dosc = thermo.DampedOscillator(OscillatorSpec(), bath.SpectralDensity.ohmic(0.3))
    worst = 0.0
    for t in (0.5, 2.0, 7.0):
        exact = -0.5 * correlations.chi_time(dosc, t)
        worst = max(worst, abs(correlations.a_antisymmetric(dosc, t) - exact))
    return worst, "A(t) against -(hbar/2) chi(t)"


def kernel_leading_form():
    sd = bath.SpectralDensity.drude(1.0, 1e5)
    th = ThermalState(1.0)
    worst = 0.0
    for tau in (0.1, 0.3, 0.5):
        a = bath.matsubara_kernel(sd, th, tau)
        b = bath.matsubara_kernel_leading(sd, th, tau)
        worst = max(worst, abs(a / b - 1.0))
    return worst, "regular k(tau) vs leading form, omega_D hbar beta = 1e5"


def pole_sum_grid():
    worst = 0.0
    for g in (0.1, 0.3, 0.5):
        dosc = thermo.DampedOscillator(OscillatorSpec(), bath.SpectralDensity.ohmic(g))
        for beta in (0.5, 2.0, 10.0):
            th = ThermalState(beta)
            for t in (0.5, 1.0, 5.0):
                a = correlations.s_symmetric(dosc, th, t)
                b = correlations.s_pole_sum(dosc, th, t)
                worst = max(worst, abs(a - b) / abs(b))
    return worst, "3x3x3 grid, relative"


def dos_round_trip():
    dosc = thermo.DampedOscillator(OscillatorSpec(), bath.SpectralDensity.drude(0.1, 1e3))
    energies = np.linspace(0.01, 40.0, 8000)
    dos = thermo.density_of_states(dosc, energies, tolerance=math.inf)
    return dos.diagnostics["round_trip_residual"], "max relative residual over hbar beta w0 in [0.5, 5]"


def zero_temperature_cut():
    dosc = thermo.DampedOscillator(OscillatorSpec(), bath.SpectralDensity.ohmic(0.1))
    zero = ThermalState(math.inf)
    worst = 0.0
    for t in np.linspace(50, 100, 11):
        _, cut = correlations.s_pole_terms(dosc, zero, t)
        worst = max(worst, abs(cut / correlations.s_zero_temperature_tail(dosc, t) - 1.0))
    return worst, "Matsubara-cut part of S(t) t^2 vs algebraic tail"


QUICK = [
    ("box_dual_route", 1e-8, box_dual_route),
    ("ring_dual_route", 1e-8, ring_dual_route),
    ("free_trotter_column", 1e-5, free_trotter_column),
    ("partition_routes", 1e-10, partition_routes),
    ("detailed_balance", 1e-12, detailed_balance),
    ("antisymmetric_vs_response", 1e-6, antisymmetric_temperature_free),
    ("kernel_leading_form", 1e-6, kernel_leading_form),
    ("imaginary_time_trace", 1e-4, lambda: imaginary_time_trace(128, 512)),
]

FULL = QUICK + [
    ("trotter_vs_ho", 1e-4, trotter_vs_ho),
    ("imaginary_time_matrix", 1e-5, imaginary_time_matrix),
    ("pole_sum_grid", 1e-8, pole_sum_grid),
    ("dos_round_trip", 1e-3, dos_round_trip),
    ("zero_temperature_cut", 0.05, zero_temperature_cut),
]


def run_suite(tier: str = "quick") -> list[Check]:
    """Run the oracle checks of the given tier (``quick`` or ``full``)."""
    table = {"quick": QUICK, "full": FULL}[tier]
    return [_timed(name, tol, fn) for name, tol, fn in table]
