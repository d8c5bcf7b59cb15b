import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize, signal

from dissipath import propagators as P
from dissipath.core import ConjugatePointError, ValidationError
from dissipath.propagators import BoxSpec, DriveForce, OscillatorSpec, RingSpec


def test_free_propagator_modulus_and_phase():
    v = P.free_propagator(1.0, 1.0, 0.4, 0.4)
    assert abs(v.amplitude) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-14)
    for t in (0.01, 1.0, 17.0):
        assert cmath.phase(P.free_propagator(1.0, t, 0.0, 0.0).amplitude) == pytest.approx(-math.pi / 4, abs=1e-14)


def test_free_action():
    assert P.free_classical_action(1.0, 1.0, 2.0, 0.0) == pytest.approx(2.0)


def test_free_propagator_routes_agree():
    a = P.free_propagator(1.3, 0.7, 0.5, -0.2).amplitude
    b = P.free_propagator_from_action(1.3, 0.7, 0.5, -0.2).amplitude
    assert abs(a - b) < 1e-14


def test_ho_action_quarter_period():
    assert P.ho_classical_action(OscillatorSpec(), None, math.pi / 2, 1.0, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_ho_action_small_frequency_limit():
    spec = OscillatorSpec(1.0, 1e-4)
    s = P.ho_classical_action(spec, None, 1.0, 0.7, -0.3)
    assert s == pytest.approx(P.free_classical_action(1.0, 1.0, 0.7, -0.3), rel=1e-6)


def _shooting_action(omega, f0, t_end, x_i, x_f):
    def trajectory(p):
        return integrate.solve_ivp(lambda t, y: [y[1], -omega**2 * y[0] + f0], [0, t_end], [x_i, p],
                                   rtol=1e-12, atol=1e-12, dense_output=True)

    p0 = optimize.brentq(lambda p: trajectory(p).y[0, -1] - x_f, -20, 20, xtol=1e-14)
    sol = trajectory(p0)

    def lagrangian(t):
        x, v = sol.sol(t)
        return 0.5 * v * v - 0.5 * omega**2 * x * x + f0 * x

    return integrate.quad(lagrangian, 0, t_end, epsabs=1e-13, limit=200)[0]


@pytest.mark.parametrize("f0,omega,t", [(0.7, 1.3, 2.0), (-1.5, 0.6, 3.1)])
def test_driven_action_against_shooting(f0, omega, t):
    spec = OscillatorSpec(1.0, omega)
    s = P.ho_classical_action(spec, DriveForce.constant(f0, t), t, -0.4, 0.2)
    assert s == pytest.approx(_shooting_action(omega, f0, t, 0.2, -0.4), abs=1e-6)


def test_piecewise_drive_against_shooting():
    # ramp then constant: the panel breakpoints sit on the kinks
    spec = OscillatorSpec(1.0, 1.0)
    t_end = 2.0
    drive = DriveForce(((0.0, 0.0), (1.0, 1.0), (2.0, 1.0)))

    def rhs(t, y):
        return [y[1], -y[0] + float(drive(t))]

    def trajectory(p):
        return integrate.solve_ivp(rhs, [0, t_end], [0.1, p], rtol=1e-12, atol=1e-12, dense_output=True,
                                   max_step=0.01)

    p0 = optimize.brentq(lambda p: trajectory(p).y[0, -1] - 0.5, -20, 20, xtol=1e-14)
    sol = trajectory(p0)
    lag = lambda t: 0.5 * sol.sol(t)[1] ** 2 - 0.5 * sol.sol(t)[0] ** 2 + float(drive(t)) * sol.sol(t)[0]
    ref = integrate.quad(lag, 0, t_end, points=[1.0], epsabs=1e-13, limit=200)[0]
    assert P.ho_classical_action(spec, drive, t_end, 0.5, 0.1) == pytest.approx(ref, abs=1e-6)


def test_morse_index_values():
    assert P.morse_index(1.0, math.pi / 2) == 0
    assert P.morse_index(1.0, 1.1 * math.pi) == 1
    assert P.morse_index(1.0, 2.5 * math.pi) == 2


def test_phase_jumps_at_conjugate_points():
    spec = OscillatorSpec()
    for k in (1, 2, 3):
        before = P.ho_propagator(spec, None, k * math.pi - 1e-6, 0.0, 0.0)
        after = P.ho_propagator(spec, None, k * math.pi + 1e-6, 0.0, 0.0)
        assert after.morse_index == before.morse_index + 1
        jump = cmath.phase(after.amplitude / before.amplitude)
        assert jump == pytest.approx(-math.pi / 2, abs=1e-6)


def test_conjugate_point_raises_and_delta_limit():
    spec = OscillatorSpec()
    with pytest.raises(ConjugatePointError):
        P.ho_propagator(spec, None, math.pi, 0.1, 0.2)
    half = P.ho_delta_limit(spec, math.pi)
    assert half.reflected and half.weight == pytest.approx(-1j)
    full = P.ho_delta_limit(spec, 2 * math.pi)
    assert not full.reflected and full.weight == pytest.approx(-1)


def test_ho_small_frequency_matches_free():
    spec = OscillatorSpec(1.0, 1e-5)
    a = P.ho_propagator(spec, None, 1.0, 0.3, -0.2).amplitude
    b = P.free_propagator(1.0, 1.0, 0.3, -0.2).amplitude
    assert abs(a / b - 1) < 1e-8


@pytest.mark.parametrize("t1,t", [(0.4, 1.0), (1.0, 2.5)])
def test_ho_semigroup(t1, t):
    spec = OscillatorSpec()
    x = np.linspace(-300, 300, 300001)
    k2 = P.ho_propagator(spec, None, t - t1, 0.3, x).amplitude
    k1 = P.ho_propagator(spec, None, t1, x, -0.5).amplitude
    # the Fresnel integral over x'' is regulated by exp(-eps x**2); three-point Richardson removes eps
    r = [np.trapezoid(k2 * k1 * np.exp(-eps * x**2), x) for eps in (2e-3, 1e-3, 5e-4)]
    composed = (8 * r[2] - 6 * r[1] + r[0]) / 3
    direct = P.ho_propagator(spec, None, t, 0.3, -0.5).amplitude
    assert abs(composed - direct) / abs(direct) < 1e-6


def test_short_time_kernel_returns_narrow_gaussian():
    # the kernel oscillates on the scale hbar t/(m d), so the grid must be very fine
    dx = 5e-5
    x = np.arange(-1.8, 1.8 + dx / 2, dx)
    s, t = 0.2, 1e-4
    psi0 = np.exp(-x**2 / (4 * s**2))
    psi0 /= math.sqrt(np.sum(psi0**2) * dx)
    d = np.arange(-len(x) + 1, len(x)) * dx
    kernel = P.free_propagator(1.0, t, d, 0.0).amplitude
    psi = signal.fftconvolve(psi0, kernel, mode="same") * dx
    assert math.sqrt(np.sum(np.abs(psi - psi0) ** 2) * dx) < 1e-3
    osc = OscillatorSpec()
    kho = P.ho_propagator(osc, None, t, x[:, None][::200], x[None, :]).amplitude
    psi_ho = kho @ psi0 * dx
    assert np.max(np.abs(psi_ho - psi0[::200])) < 1e-3 * np.max(psi0)


def test_ring_periodicity_and_evenness():
    r = RingSpec()
    a = P.ring_propagator_winding(r, 1.0, 0.5, 0.1).amplitude
    b = P.ring_propagator_winding(r, 1.0, 0.5 + 2 * math.pi, 0.1).amplitude
    assert abs(a - b) < 1e-12
    c = P.ring_propagator_spectral(r, 0.8, 0.7, 0.0).amplitude
    d = P.ring_propagator_spectral(r, 0.8, -0.7, 0.0).amplitude
    assert abs(c - d) < 1e-12


def test_ring_energies():
    assert RingSpec().energy(2) == pytest.approx(2.0)


@pytest.mark.parametrize("t,pf,pi", [(0.3, 1.0, 0.2), (1.0, 2.5, 0.2), (2.7, -1.3, 0.2)])
def test_ring_dual_route(t, pf, pi):
    r = RingSpec()
    a = P.epsilon_extrapolated(P.ring_propagator_winding, r, t, pf, pi).amplitude
    b = P.epsilon_extrapolated(P.ring_propagator_spectral, r, t, pf, pi).amplitude
    assert abs(a - b) / abs(b) < 1e-8


@pytest.mark.parametrize("ell", [0, 1, 3])
def test_ring_fourier_coefficients(ell):
    r = RingSpec()
    t = 0.6
    phis = np.linspace(-math.pi, math.pi, 4097)[:-1]
    vals = np.array([P.epsilon_extrapolated(P.ring_propagator_winding, r, t, p, 0.0, epsilon=1e-4).amplitude
                     for p in phis])
    c = np.mean(vals * np.exp(-1j * ell * phis))
    exact = np.exp(-1j * ell**2 * t / 2) / (2 * math.pi)
    assert abs(c - exact) < 1e-6


def test_wall_propagator():
    assert abs(P.wall_propagator(1.0, 0.5, 1e-9, 0.7).amplitude) < 1e-8
    d = P.free_propagator(1.0, 0.5, 0.3, 0.7).amplitude - P.free_propagator(1.0, 0.5, -0.3, 0.7).amplitude
    assert abs(P.wall_propagator(1.0, 0.5, 0.3, 0.7).amplitude - d) < 1e-15
    with pytest.raises(ValidationError):
        P.wall_propagator(1.0, 0.5, -0.3, 0.7)


def test_box_energy():
    assert BoxSpec(1.0, math.pi).energy(1) == pytest.approx(0.5)


def test_box_symmetries():
    spec = BoxSpec()
    kw = dict(epsilon=0.01, n_max=60, allow_extension=True)
    base = P.box_propagator_images(spec, 0.3, 0.3, 0.6, **kw).amplitude
    shifted = P.box_propagator_images(spec, 0.3, 0.3 + 2.0, 0.6, **kw).amplitude
    mirrored = P.box_propagator_images(spec, 0.3, -0.3, 0.6, **kw).amplitude
    assert abs(base - shifted) < 1e-12
    assert abs(base + mirrored) < 1e-12
    for wall in (0.0, 1.0):
        assert abs(P.box_propagator_images(spec, 0.3, wall, 0.6, epsilon=0.01).amplitude) < 1e-12


@pytest.mark.parametrize("t,xf,xi", [(0.3, 0.2, 0.7), (1.0, 0.5, 0.5), (0.05, 0.9, 0.1)])
def test_box_dual_route(t, xf, xi):
    spec = BoxSpec()
    a = P.epsilon_extrapolated(P.box_propagator_images, spec, t, xf, xi).amplitude
    b = P.epsilon_extrapolated(P.box_propagator_spectral, spec, t, xf, xi).amplitude
    assert abs(a - b) / abs(b) < 1e-8


@pytest.mark.parametrize("j", [1, 2, 5])
def test_box_eigenfunction_round_trip(j):
    spec = BoxSpec()
    t, xf = 0.37, 0.3
    eps = 1e-3
    nodes, weights = np.polynomial.legendre.leggauss(200)
    xs = 0.5 * (nodes + 1)
    kern = np.array([P.box_propagator_spectral(spec, t, xf, x, epsilon=eps).amplitude for x in xs])
    proj = 0.5 * np.sum(weights * kern * spec.eigenfunction(j, xs))
    expected = np.exp(-1j * spec.energy(j) * (t - 1j * eps)) * spec.eigenfunction(j, xf)
    assert abs(proj - expected) < 1e-8


def test_box_rejects_outside_points():
    with pytest.raises(ValidationError):
        P.box_propagator_spectral(BoxSpec(), 0.2, 1.2, 0.5)


def test_vanvleck_free_and_oscillator():
    fa = lambda xf, t, xi: P.free_classical_action(1.0, t, xf, xi)
    v = P.vanvleck_propagator(fa, 1.0, 0.3, -0.1).amplitude
    assert abs(v - P.free_propagator(1.0, 1.0, 0.3, -0.1).amplitude) < 1e-8
    spec = OscillatorSpec()
    act = lambda xf, t, xi: float(P.ho_classical_action(spec, None, t, xf, xi))
    for t in (1.0, 3.0, 5.0):
        sc = P.vanvleck_propagator(act, t, 0.3, -0.1)
        ex = P.ho_propagator(spec, None, t, 0.3, -0.1)
        assert sc.morse_index == ex.morse_index
        assert abs(sc.amplitude - ex.amplitude) < 1e-6


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.1, 10.0), xf=st.floats(-3, 3), xi=st.floats(-3, 3))
def test_vanvleck_constant_mixed_derivative(a, xf, xi):
    act = lambda x1, t, x0: a * x1 * x0
    v = P.vanvleck_propagator(act, 1.0, xf, xi, morse_index=0)
    assert abs(v.amplitude) == pytest.approx(math.sqrt(a / (2 * math.pi)), rel=1e-7)


def test_vanvleck_conjugate_point():
    spec = OscillatorSpec()
    act = lambda xf, t, xi: float(P.ho_classical_action(spec, None, t, xf, xi, tolerance=0.0))
    with pytest.raises(ConjugatePointError):
        P.vanvleck_propagator(act, math.pi, 0.3, -0.1, morse_index=0)


def test_propagator_rows_csv():
    v = P.free_propagator(1.0, 1.0, 0.0, 0.0)
    text = P.propagator_rows([(1.0, 0.0, 0.0, v)])
    lines = text.splitlines()
    assert lines[0] == "t,x_i,x_f,re,im,morse" and text.endswith("\n")
    assert float(lines[1].split(",")[3]) == v.amplitude.real


def test_bad_drive_rejected():
    with pytest.raises(ValidationError):
        DriveForce(((1.0, 0.0), (0.5, 1.0)))


@pytest.mark.parametrize("omega", [0.0, 1.0])
def test_kernel_unitarity_on_gaussian(omega):
    x = np.linspace(-8, 8, 3201)
    dx = x[1] - x[0]
    psi0 = np.exp(-((x - 0.5) ** 2))
    psi0 /= math.sqrt(np.sum(psi0**2) * dx)
    t = 0.5
    if omega == 0.0:
        k = P.free_propagator(1.0, t, x[:, None], x[None, :]).amplitude
    else:
        k = P.ho_propagator(OscillatorSpec(1.0, omega), None, t, x[:, None], x[None, :]).amplitude
    back = k.conj().T @ (k @ psi0 * dx) * dx
    assert math.sqrt(np.sum(np.abs(back - psi0) ** 2) * dx) < 1e-6
