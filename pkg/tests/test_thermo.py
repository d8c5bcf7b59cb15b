import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dissipath import thermo as T
from dissipath.bath import SpectralDensity
from dissipath.core import DivergenceError, SeriesConfig, ThermalState, ValidationError
from dissipath.propagators import OscillatorSpec

OSC = OscillatorSpec()


def drude(gamma, omega_d):
    return T.DampedOscillator(OSC, SpectralDensity.drude(gamma, omega_d))


def test_undamped_partition_value():
    z = T.z_undamped(OSC, ThermalState(2.0))
    assert z == pytest.approx(1 / (2 * math.sinh(1.0)), rel=1e-15)
    assert z == pytest.approx(0.42548, abs=5e-5)


def test_undamped_product_truncation_and_tail():
    th = ThermalState(2.0)
    z = T.z_undamped(OSC, th)
    raw = T.z_undamped_product(OSC, th, SeriesConfig(10_000, "none"))
    tailed = T.z_undamped_product(OSC, th, SeriesConfig(10_000, "log_tail"))
    assert abs(raw / z - 1) <= 1e-3
    assert abs(raw / z - 1) > 1e-6  # the raw product really is truncated
    assert abs(tailed / z - 1) <= 1e-8


def test_ground_state_dominates_at_low_temperature():
    beta = 200.0
    assert -T.log_z_undamped(OSC, ThermalState(beta)) / beta == pytest.approx(0.5, rel=1e-12)


def test_damped_reduces_to_undamped_without_coupling():
    th = ThermalState(1.3)
    tiny = drude(1e-13, 50.0)
    assert T.z_damped(tiny, th) == pytest.approx(T.z_undamped(OSC, th), rel=1e-10)
    assert T.z_damped(T.DampedOscillator(OSC), th) == pytest.approx(T.z_undamped(OSC, th), rel=1e-10)


def test_damped_against_long_series_reference():
    d, th = drude(0.2, 50.0), ThermalState(1.0)
    default = T.log_z_damped(d, th)
    reference = T.log_z_damped(d, th, SeriesConfig(1_000_000))
    raw_reference = T.log_z_damped(d, th, SeriesConfig(1_000_000, "none"))
    assert default == pytest.approx(reference, abs=1e-12)
    assert default == pytest.approx(raw_reference, abs=1e-6)
    assert default == pytest.approx(float(T.log_z_gamma_form(d, 1.0).real), abs=1e-12)


def test_strict_ohmic_partition_is_rejected():
    d = T.DampedOscillator(OSC, SpectralDensity.ohmic(0.1))
    with pytest.raises(DivergenceError):
        T.z_damped(d, ThermalState(1.0))
    with pytest.raises(DivergenceError):
        T.ground_state_energy(d)
    with pytest.raises(DivergenceError):
        T.lamb_shift_weak(d)


def test_zero_frequency_rejected():
    with pytest.raises(ValidationError):
        T.DampedOscillator(OscillatorSpec(omega=0.0))


def test_free_energy_limits():
    und = T.DampedOscillator(OSC)
    assert T.free_energy(und, ThermalState(50.0)) == pytest.approx(0.5, abs=1e-6)
    d, th = drude(0.2, 50.0), ThermalState(0.7)
    assert T.free_energy(d, th) == pytest.approx(-math.log(T.z_damped(d, th)) / 0.7, rel=1e-10)


def test_free_energy_approaches_ground_state_energy():
    d = drude(0.01, 100.0)
    e0 = T.ground_state_energy(d)
    gaps = [abs(T.free_energy(d, ThermalState(b)) - e0) for b in (10.0, 100.0, 1000.0)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 1e-4


def test_ground_state_energy_values():
    assert T.ground_state_energy(T.DampedOscillator(OSC)) == 0.5
    assert T.ground_state_energy(drude(1e-14, 10.0)) == pytest.approx(0.5, rel=1e-12)
    d = drude(0.01, 100.0)
    e0 = T.ground_state_energy(d)
    assert e0 == pytest.approx(T.ground_state_energy_closed_form(d), rel=1e-10)
    assert (e0 - 0.5) == pytest.approx(0.01 / (2 * math.pi) * math.log(100.0), rel=0.03)
    doubled = T.ground_state_energy(drude(0.01, 200.0))
    assert doubled - e0 == pytest.approx(0.01 / (2 * math.pi) * math.log(2.0), rel=0.03)


def test_ground_state_energy_of_reference_case():
    assert T.ground_state_energy(drude(0.1, 1000.0)) == pytest.approx(0.60936, abs=1e-5)


def test_lamb_shift():
    shift = T.lamb_shift_weak(drude(0.01, 1000.0))
    assert shift.asymptote == pytest.approx(-0.01 * 1000 / 4 + 0.01 / (2 * math.pi) * math.log(1000.0))
    assert abs(shift.value / shift.asymptote - 1) <= 0.02
    a = T.lamb_shift_weak(drude(0.02, 30.0)).value
    b = T.lamb_shift_weak(drude(0.04, 30.0)).value
    assert b == pytest.approx(2 * a, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(gamma=st.floats(1e-3, 3.0), wd=st.floats(0.5, 500.0))
def test_lamb_shift_is_negative(gamma, wd):
    assert T.lamb_shift_weak(drude(gamma, wd)).value < 0


def test_level_widths():
    ohm = T.DampedOscillator(OSC, SpectralDensity.ohmic(0.1))
    assert T.level_width(ohm, 2) == pytest.approx(0.2, rel=1e-15)
    assert T.level_width(ohm, 0) == 0.0
    d = drude(0.1, 3.0)
    assert T.level_width(d, 3) == pytest.approx(3 * 0.1 * 9 / (1 + 9), rel=1e-14)
    with pytest.raises(ValidationError):
        T.level_width(d, -1)


def test_density_matrix_trace():
    x = np.linspace(-14, 14, 8001)
    for beta in (0.3, 1.0, 10.0):
        rho = T.ho_density_matrix(OSC, ThermalState(beta), x, x)
        assert np.trapezoid(rho, x) == pytest.approx(1.0, abs=1e-8)


def test_density_matrix_factorizes_at_low_temperature():
    x = np.linspace(-5, 5, 201)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    rho = T.ho_density_matrix(OSC, ThermalState(50.0), xx, yy)
    prod = T.ho_ground_state(OSC, xx) * T.ho_ground_state(OSC, yy)
    assert np.max(np.abs(rho - prod)) <= 1e-6
    cold = T.ho_density_matrix(OSC, ThermalState(math.inf), xx, yy)
    assert np.max(np.abs(cold - prod)) <= 1e-14


def test_density_matrix_high_temperature_is_boltzmann():
    beta = 0.01
    x = np.linspace(-40, 40, 801)
    diag = T.ho_density_matrix(OSC, ThermalState(beta), x, x)
    boltz = math.sqrt(beta / (2 * math.pi)) * np.exp(-beta * x**2 / 2)
    assert np.max(np.abs(diag - boltz)) / np.max(boltz) <= 1e-4


def test_density_matrix_normalizes_thermal_kernel():
    th = ThermalState(1.4)
    x, y = np.array([0.3, -1.0]), np.array([0.9, 0.2])
    assert np.allclose(T.ho_density_matrix(OSC, th, x, y), T.ho_thermal_kernel(OSC, th, x, y) / T.z_undamped(OSC, th),
                       rtol=1e-13)


@pytest.fixture(scope="module")
def dos_weak():
    d = drude(0.1, 1000.0)
    energies = np.linspace(0.01, 40.0, 8000)
    return d, T.density_of_states(d, energies, tolerance=1e-3)


def test_dos_round_trip(dos_weak):
    d, dos = dos_weak
    assert dos.method_tag == "bromwich"
    assert dos.diagnostics["round_trip_residual"] <= 1e-3
    betas = np.linspace(0.5, 5.0, 10)
    assert np.max(T.laplace_round_trip(dos, d, betas)) <= 1e-3
    assert np.all(np.isreal(dos.density))


def test_dos_average_density(dos_weak):
    _, dos = dos_weak
    assert dos.average_density == pytest.approx(1.0)
    tail = (dos.energies > 20) & (dos.energies < 40)
    mean = np.trapezoid(dos.density[tail], dos.energies[tail]) / (dos.energies[tail][-1] - dos.energies[tail][0])
    assert mean == pytest.approx(1.0, rel=0.02)


def test_dos_peak_widths(dos_weak):
    _, dos = dos_weak
    levels = [1, 2, 3, 4, 5]
    fits = T.fit_level_widths(dos, levels, 1.0, [0.1 * n for n in levels])
    for fit in fits:
        assert abs(fit.center - fit.level) < 0.1
        assert fit.fwhm == pytest.approx(0.1 * fit.level, rel=0.2)
    assert all(a.fwhm < b.fwhm for a, b in zip(fits, fits[1:]))


def test_dos_rejects_ohmic_and_bad_grid():
    with pytest.raises(DivergenceError):
        T.density_of_states(T.DampedOscillator(OSC, SpectralDensity.ohmic(0.1)), np.linspace(0.1, 1, 10))
    with pytest.raises(ValidationError):
        T.density_of_states(drude(0.1, 100.0), np.linspace(-1, 1, 10))


def test_regularized_partition_is_cutoff_independent():
    th = ThermalState(1.0)
    a = T.regularized_partition(drude(0.01, 1e3), th)
    b = T.regularized_partition(drude(0.01, 1e4), th)
    assert abs(a.value / b.value - 1) <= 1e-3
    assert abs(a.value / a.weak_coupling - 1) <= 0.01


def test_regularized_partition_without_coupling():
    th = ThermalState(2.0)
    r = T.regularized_partition(drude(1e-13, 100.0), th)
    assert r.value == pytest.approx(T.z_undamped(OSC, th) * math.exp(2.0 * 0.5), rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(gamma=st.floats(1e-3, 2.0), wd=st.floats(1.0, 200.0), beta=st.floats(0.1, 10.0))
def test_damping_lowers_partition_function(gamma, wd, beta):
    th = ThermalState(beta)
    assert T.log_z_damped(drude(gamma, wd), th) <= T.log_z_undamped(OSC, th) + 1e-12


@settings(max_examples=20, deadline=None)
@given(g1=st.floats(1e-3, 1.0), factor=st.floats(1.05, 3.0), wd=st.floats(1.0, 100.0), beta=st.floats(0.2, 5.0))
def test_free_energy_increases_with_damping(g1, factor, wd, beta):
    th = ThermalState(beta)
    assert T.free_energy(drude(g1, wd), th) < T.free_energy(drude(g1 * factor, wd), th)


@settings(max_examples=15, deadline=None)
@given(g1=st.floats(1e-3, 1.0), factor=st.floats(1.05, 3.0), wd=st.floats(1.0, 100.0))
def test_ground_state_energy_increases_with_damping(g1, factor, wd):
    assert T.ground_state_energy(drude(g1, wd)) < T.ground_state_energy(drude(g1 * factor, wd))


def test_partition_sweep_csv():
    text = T.partition_sweep_csv(drude(0.1, 10.0), [0.5, 1.0])
    lines = text.strip().splitlines()
    assert lines[0] == "beta,Z,F" and len(lines) == 3
