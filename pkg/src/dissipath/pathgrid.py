"""Split-step propagation on a uniform one-dimensional grid.

Real time evolves wave functions with ``exp(-i H dt/hbar)`` slices, imaginary
time builds ``<x|exp(-beta H)|x'>``.  The kinetic factor is applied exactly in
the momentum representation (FFT for periodic grids, a type-I sine transform
for Dirichlet walls).  Hard-wall masks split a Dirichlet grid into separate
boxes, each with its own sine transform; amplitudes behind the wall stay zero.
A literal real-space product of
short-time kernels is kept in :func:`reference_propagate` for small grids.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.fft
from scipy.signal import find_peaks, get_window

from .core import DEFAULT_CONSTANTS, GlobalConstants, ValidationError, require

SPLITTINGS = ("VT", "TV", "strang")
BOUNDARIES = ("periodic", "dirichlet")
NORM_CONVENTIONS = ("sum_dx", "unit_vector")


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``x_j = x_min + j*dx`` for ``j < n_points`` with ``dx = (x_max - x_min)/n_points``.

    With a periodic boundary ``x_max`` is identified with ``x_min``.  With
    Dirichlet walls the wave function vanishes at ``x_min`` (the first node) and
    at ``x_max``.
    """

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        require(self.x_min < self.x_max, "x_min must be below x_max")
        require(int(self.n_points) == self.n_points and self.n_points >= 8, "need at least 8 grid points")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def index_of(self, x) -> int:
        return int(round((x - self.x_min) / self.dx))


@dataclass
class GridState:
    grid: Grid1D
    amplitudes: np.ndarray
    norm_convention: str = "sum_dx"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        require(self.amplitudes.shape == (self.grid.n_points,), "amplitudes must match the grid")
        require(np.all(np.isfinite(self.amplitudes)), "amplitudes must be finite")
        require(self.norm_convention in NORM_CONVENTIONS, "unknown norm convention")

    def norm(self) -> float:
        n2 = float(np.sum(np.abs(self.amplitudes) ** 2))
        return n2 * self.grid.dx if self.norm_convention == "sum_dx" else n2

    def overlap(self, other: "GridState") -> complex:
        s = complex(np.vdot(self.amplitudes, other.amplitudes))
        return s * self.grid.dx if self.norm_convention == "sum_dx" else s

    @classmethod
    def gaussian(cls, grid: Grid1D, center, width, momentum=0.0, hbar=1.0, normalized=True):
        """Gaussian wave packet ``exp(-(x-c)**2/(4 w**2) + i p x/hbar)``, unit norm if requested."""
        x = grid.x
        psi = np.exp(-((x - center) ** 2) / (4 * width**2) + 1j * momentum * x / hbar)
        if normalized:
            psi = psi / math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
        return cls(grid, psi)

    def to_csv(self) -> str:
        rows = ["x,re,im"]
        for xv, a in zip(self.grid.x, self.amplitudes):
            rows.append(f"{xv:.17g},{a.real:.17g},{a.imag:.17g}")
        return "\n".join(rows) + "\n"

    def metadata(self, plan: "TrotterPlan | None" = None) -> str:
        meta = {"grid": asdict(self.grid), "norm_convention": self.norm_convention,
                "diagnostics": _jsonable(self.diagnostics)}
        if plan is not None:
            meta["plan"] = plan.to_dict()
        return json.dumps(meta, sort_keys=True)


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, complex):
            out[k] = [v.real, v.imag]
        elif isinstance(v, (np.floating, np.integer, np.bool_)):
            out[k] = v.item()
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class PotentialTable:
    """Potential sampled on the grid; ``mask`` marks grid points behind a hard wall."""

    grid: Grid1D
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        require(vals.shape == (self.grid.n_points,), "potential must match the grid")
        allowed = np.ones(vals.shape, bool) if self.mask is None else ~np.asarray(self.mask, bool)
        require(np.all(np.isfinite(vals[allowed])), "potential must be finite where unmasked")
        object.__setattr__(self, "values", np.where(allowed, vals, 0.0))
        if self.mask is not None:
            object.__setattr__(self, "mask", np.asarray(self.mask, bool))

    @classmethod
    def from_function(cls, grid: Grid1D, potential, wall=None):
        """Sample ``potential(x)``; ``wall(x)`` returns True where the particle may not go."""
        x = grid.x
        mask = None if wall is None else np.asarray(wall(x), bool)
        with np.errstate(all="ignore"):
            values = np.broadcast_to(np.asarray(potential(x), dtype=float), x.shape).copy()
        return cls(grid, values, mask)

    @classmethod
    def harmonic(cls, grid: Grid1D, m=1.0, omega=1.0):
        return cls(grid, 0.5 * m * omega**2 * grid.x**2)

    @classmethod
    def zero(cls, grid: Grid1D):
        return cls(grid, np.zeros(grid.n_points))

    def shifted(self, c) -> "PotentialTable":
        return replace(self, values=self.values + c)


@dataclass(frozen=True)
class TrotterPlan:
    """Slicing of a propagation.

    ``dt`` is the real time per slice for ``time_kind="real"`` and the
    imaginary-time step ``hbar*beta/N`` for ``time_kind="imaginary"``.
    """

    n_slices: int
    dt: float
    time_kind: str = "real"
    splitting: str = "strang"
    boundary: str = "periodic"
    mass: float = 1.0
    constants: GlobalConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        require(self.n_slices >= 1, "need at least one slice")
        require(self.dt != 0 and math.isfinite(self.dt), "dt must be finite and nonzero")
        require(self.time_kind in ("real", "imaginary"), "time_kind must be 'real' or 'imaginary'")
        require(self.splitting in SPLITTINGS, f"splitting must be one of {SPLITTINGS}")
        require(self.boundary in BOUNDARIES, f"boundary must be one of {BOUNDARIES}")
        require(self.mass > 0, "mass must be positive")
        if self.time_kind == "imaginary":
            require(self.dt > 0, "imaginary-time steps must be positive")

    @classmethod
    def real_time(cls, t_total, n_slices, **kw):
        return cls(n_slices, t_total / n_slices, "real", **kw)

    @classmethod
    def thermal(cls, beta, n_slices, constants: GlobalConstants = DEFAULT_CONSTANTS, **kw):
        return cls(n_slices, constants.hbar * beta / n_slices, "imaginary", constants=constants, **kw)

    @property
    def total(self) -> float:
        return self.n_slices * self.dt

    def halved(self) -> "TrotterPlan":
        require(self.n_slices % 2 == 0, "need an even number of slices to halve")
        return replace(self, n_slices=self.n_slices // 2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["constants"] = asdict(self.constants)
        return d


class _Stepper:
    """Precomputed one-slice factors; applies the slice to arrays of shape (n,) or (n, k)."""

    def __init__(self, potential: PotentialTable, plan: TrotterPlan):
        grid = potential.grid
        if potential.mask is not None and plan.boundary == "periodic":
            raise ValidationError("a hard-wall mask needs Dirichlet boundaries")
        hbar, m, dt = plan.constants.hbar, plan.mass, plan.dt
        n = grid.n_points
        if plan.time_kind == "real":
            evolve = lambda k: np.exp(-1j * hbar * k**2 / (2 * m) * dt)
            v_phase = lambda frac: np.exp(-1j * potential.values * dt * frac / hbar)
        else:
            evolve = lambda k: np.exp(-hbar * k**2 / (2 * m) * dt)
            v_phase = lambda frac: np.exp(-potential.values * dt * frac / hbar)
        if plan.boundary == "periodic":
            self.t_full = evolve(2 * np.pi * np.fft.fftfreq(n, grid.dx))
        else:
            # every run of allowed points between walls is its own box
            self.segments = []
            for start, stop in _allowed_runs(potential.mask, n):
                k = np.pi * np.arange(1, stop - start + 1) / ((stop - start + 1) * grid.dx)
                self.segments.append((start, stop, evolve(k)))
        self.v_full = v_phase(1.0)
        self.v_half = v_phase(0.5)
        self.keep = None if potential.mask is None else ~potential.mask
        self.plan = plan
        self.real = plan.time_kind == "imaginary"

    def kinetic(self, psi):
        if self.plan.boundary == "periodic":
            f = self.t_full if psi.ndim == 1 else self.t_full[:, None]
            return np.fft.ifft(f * np.fft.fft(psi, axis=0), axis=0)
        out = np.zeros_like(psi)
        for start, stop, f in self.segments:
            f = f if psi.ndim == 1 else f[:, None]
            # orthonormal DST-I is an involution
            out[start:stop] = scipy.fft.dst(f * scipy.fft.dst(psi[start:stop], type=1, norm="ortho", axis=0),
                                            type=1, norm="ortho", axis=0)
        return out

    def potential(self, psi, half=False):
        v = self.v_half if half else self.v_full
        psi = (v if psi.ndim == 1 else v[:, None]) * psi
        if self.keep is not None:
            psi = psi * (self.keep if psi.ndim == 1 else self.keep[:, None])
        return psi

    def slice(self, psi):
        s = self.plan.splitting
        if s == "strang":
            return self.potential(self.kinetic(self.potential(psi, True)), True)
        if s == "VT":  # exp(-iV dt) exp(-iT dt): kinetic acts first
            return self.potential(self.kinetic(psi))
        return self.kinetic(self.potential(psi))


def _allowed_runs(mask, n):
    """Maximal runs ``[start, stop)`` of unmasked points; index 0 is always a wall."""
    allowed = np.ones(n, bool) if mask is None else ~np.asarray(mask, bool)
    allowed[0] = False
    runs, start = [], None
    for i, ok in enumerate(allowed):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, n))
    return runs


def _edge_weight(psi, fraction=0.05):
    n = psi.shape[0]
    k = max(1, int(n * fraction))
    w = np.abs(psi) ** 2
    total = np.sum(w)
    return float((np.sum(w[:k]) + np.sum(w[-k:])) / total) if total > 0 else 0.0


def trotter_propagate(state: GridState, potential: PotentialTable, plan: TrotterPlan) -> GridState:
    """Evolve a state through ``plan.n_slices`` real-time split steps.

    The returned diagnostics record the relative norm change (``leakage``) and
    the probability in the outer five percent of the grid (``edge_weight``),
    from which the caller judges whether the grid was wide enough.
    """
    require(plan.time_kind == "real", "trotter_propagate needs a real-time plan")
    require(state.grid == potential.grid, "state and potential live on different grids")
    stepper = _Stepper(potential, plan)
    psi = state.amplitudes.copy()
    if plan.boundary == "dirichlet":
        psi[0] = 0.0
    for _ in range(plan.n_slices):
        psi = stepper.slice(psi)
    n0 = state.norm()
    out = GridState(state.grid, psi, state.norm_convention)
    n1 = out.norm()
    out.diagnostics = {"leakage": (n1 - n0) / n0 if n0 else 0.0, "edge_weight": _edge_weight(psi),
                       "n_slices": plan.n_slices, "t": plan.total}
    return out


def smeared_delta(grid: Grid1D, x_index: int, smearing_width) -> np.ndarray:
    """Unit-area Gaussian of standard deviation ``smearing_width`` centred on grid point ``x_index``."""
    require(smearing_width >= 2 * grid.dx, "smearing width must be at least two grid spacings")
    x0 = grid.x[x_index]
    return np.exp(-((grid.x - x0) ** 2) / (2 * smearing_width**2)) / math.sqrt(2 * np.pi * smearing_width**2)


def trotter_kernel_column(x_index: int, potential: PotentialTable, plan: TrotterPlan,
                          smearing_width) -> GridState:
    """Propagator column ``K(., t, x_i, 0)`` convolved with a unit-area Gaussian.

    Starting from ``g(x) = exp(-(x-x_i)**2/(2 s**2))/sqrt(2 pi s**2)`` the
    evolved state equals ``int K(x, t, y) g(y) dy``.  Closed-form kernels are
    compared after the same convolution; for the free particle this gives
    ``exp(-(x-x_i)**2/(2 a))/sqrt(2 pi a)`` with ``a = s**2 + i hbar t/m``.
    """
    grid = potential.grid
    require(0 <= x_index < grid.n_points, "x_index outside the grid")
    state = GridState(grid, smeared_delta(grid, x_index, smearing_width).astype(complex))
    out = trotter_propagate(state, potential, plan)
    out.diagnostics["smearing_width"] = smearing_width
    out.diagnostics["x_i"] = float(grid.x[x_index])
    return out


def smeared_free_column(grid: Grid1D, x_i, t, smearing_width, m=1.0, hbar=1.0) -> np.ndarray:
    a = smearing_width**2 + 1j * hbar * t / m
    return np.exp(-((grid.x - x_i) ** 2) / (2 * a)) / np.sqrt(2 * np.pi * a)


def trotter_matrix(potential: PotentialTable, plan: TrotterPlan) -> np.ndarray:
    """Grid kernel ``K(x_a, x_b)`` of the whole slicing, normalised so that ``psi_out = K @ psi * dx``."""
    grid = potential.grid
    stepper = _Stepper(potential, plan)
    mat = np.eye(grid.n_points, dtype=complex) / grid.dx
    if plan.boundary == "dirichlet":
        mat[0, 0] = 0.0
    for _ in range(plan.n_slices):
        mat = stepper.slice(mat)
    return mat


@dataclass
class ImaginaryTimeResult:
    """``<x|exp(-beta H)|x'>`` stored as ``exp(log_scale) * scaled``."""

    grid: Grid1D
    scaled: np.ndarray
    log_scale: float
    plan: TrotterPlan

    @property
    def matrix(self) -> np.ndarray:
        return self.scaled * math.exp(self.log_scale)

    @property
    def log_z(self) -> float:
        return self.log_scale + math.log(float(np.trace(self.scaled)) * self.grid.dx)

    @property
    def z(self) -> float:
        return math.exp(self.log_z)

    def diagonal_distribution(self) -> np.ndarray:
        d = np.diag(self.scaled).copy()
        return d / (np.sum(d) * self.grid.dx)


def imaginary_trotter(potential: PotentialTable, plan: TrotterPlan, initial: np.ndarray | None = None):
    """Imaginary-time propagation.

    Without ``initial`` the full matrix ``<x|exp(-beta H)|x'>`` is built from
    grid delta columns and an :class:`ImaginaryTimeResult` is returned; the
    trace gives ``Z``.  With ``initial`` (array of shape (n,) or (n, k)) the
    propagated array and its log scale are returned.  Columns are rescaled
    after every slice so large ``beta`` does not underflow.
    """
    require(plan.time_kind == "imaginary", "imaginary_trotter needs an imaginary-time plan")
    grid = potential.grid
    allowed = potential.values if potential.mask is None else potential.values[~potential.mask]
    require(np.all(np.isfinite(allowed)), "potential must be finite")
    stepper = _Stepper(potential, plan)
    if initial is None:
        psi = np.eye(grid.n_points) / grid.dx
    else:
        psi = np.array(initial, dtype=float)
    if plan.boundary == "dirichlet":
        psi[0] = 0.0
    log_scale = 0.0
    for _ in range(plan.n_slices):
        psi = stepper.slice(psi).real
        s = float(np.max(np.abs(psi)))
        if s == 0.0:
            raise ValidationError("imaginary-time propagation collapsed to zero")
        psi /= s
        log_scale += math.log(s)
    if initial is not None:
        return psi, log_scale
    return ImaginaryTimeResult(grid, psi, log_scale, plan)


def reference_propagate(state: GridState, potential: PotentialTable, plan: TrotterPlan) -> GridState:
    """Literal product of short-time kernels with the potential at the left point.

    Each slice multiplies by ``sqrt(m/(2 pi i hbar dt)) exp(i/hbar [m (x'-x)**2/(2 dt) - V(x) dt]) dx``
    (and the Euclidean counterpart in imaginary time).  Dense ``O(n**2)``
    matrices; intended for small grids as an independent check.
    """
    grid = potential.grid
    require(grid.n_points <= 4096, "the real-space reference is limited to small grids")
    hbar, m, dt = plan.constants.hbar, plan.mass, plan.dt
    x = grid.x
    dx2 = (x[:, None] - x[None, :]) ** 2
    if plan.time_kind == "real":
        kern = np.sqrt(m / (2j * np.pi * hbar * dt)) * np.exp(
            1j / hbar * (m * dx2 / (2 * dt) - potential.values[None, :] * dt))
    else:
        kern = np.sqrt(m / (2 * np.pi * hbar * dt)) * np.exp(
            -(m * dx2 / (2 * dt) + potential.values[None, :] * dt) / hbar)
    kern = kern * grid.dx
    if potential.mask is not None:
        kern[:, potential.mask] = 0.0
        kern[potential.mask, :] = 0.0
    psi = state.amplitudes.copy()
    for _ in range(plan.n_slices):
        psi = kern @ psi
    return GridState(grid, psi, state.norm_convention, {"route": "reference"})


# ---------------------------------------------------------------- spectra


@dataclass
class SpectralScan:
    energies: np.ndarray
    weights: np.ndarray
    resolution: float
    unresolved: bool
    spectrum_energy: np.ndarray = field(repr=False, default=None)
    spectrum: np.ndarray = field(repr=False, default=None)

    @property
    def peaks(self):
        return list(zip(self.energies.tolist(), self.weights.tolist()))


def autocorrelation(state: GridState, potential: PotentialTable, plan: TrotterPlan) -> np.ndarray:
    """``<psi_0|psi(k dt)>`` for ``k = 0..n_slices``."""
    stepper = _Stepper(potential, plan)
    psi = state.amplitudes.copy()
    out = np.empty(plan.n_slices + 1, dtype=complex)
    out[0] = state.overlap(state)
    for k in range(1, plan.n_slices + 1):
        psi = stepper.slice(psi)
        out[k] = state.overlap(GridState(state.grid, psi, state.norm_convention))
    return out


def spectral_scan(potential: PotentialTable, plan: TrotterPlan, t_max, initial: GridState,
                  window: str = "blackmanharris", min_height: float = 1e-3, padding: int = 8) -> SpectralScan:
    """Locate eigenenergies from the Fourier transform of the autocorrelation.

    The autocorrelation on ``[0, t_max]`` is tapered by the falling half of a
    scipy window (``"boxcar"`` for none); low-sidelobe windows keep leakage
    from strong levels below ``min_height``.  The tapered signal is transformed with ``exp(+i E t/hbar)``.
    Peak centres are refined by a parabola through the three highest samples.
    Peaks closer than the resolution ``2 pi hbar/t_max`` set ``unresolved``.
    """
    require(plan.time_kind == "real", "spectral_scan needs a real-time plan")
    require(t_max > 0, "t_max must be positive")
    hbar = plan.constants.hbar
    n = int(round(t_max / plan.dt))
    require(n >= 8, "t_max must span at least 8 slices")
    c = autocorrelation(initial, potential, replace(plan, n_slices=n))
    t = plan.dt * np.arange(n + 1)
    try:
        # falling half of a symmetric window; the mirrored t < 0 half restores the full taper
        w = get_window(window, 2 * n + 1, fftbins=False)[n:]
    except ValueError as exc:
        raise ValidationError(f"unknown window {window!r}") from exc
    w = w / w[0]
    signal = c * w * plan.dt
    signal[0] *= 0.5  # the t < 0 half is the complex conjugate
    size = padding * (n + 1)
    spec = 2.0 * np.real(np.fft.ifft(signal, size) * size)
    energy = 2 * np.pi * hbar * np.fft.fftfreq(size, plan.dt)
    order = np.argsort(energy)
    energy, spec = energy[order], spec[order]
    idx, _ = find_peaks(spec, height=min_height * np.max(spec))
    centres, heights = [], []
    dE = energy[1] - energy[0]
    for i in idx:
        if 0 < i < len(spec) - 1:
            y0, y1, y2 = spec[i - 1], spec[i], spec[i + 1]
            denom = y0 - 2 * y1 + y2
            shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
            centres.append(energy[i] + shift * dE)
            heights.append(y1 - 0.25 * (y0 - y2) * shift)
    centres = np.asarray(centres)
    resolution = 2 * np.pi * hbar / t_max
    unresolved = bool(len(centres) > 1 and np.min(np.diff(centres)) < resolution)
    return SpectralScan(centres, np.asarray(heights), resolution, unresolved, energy, spec)
