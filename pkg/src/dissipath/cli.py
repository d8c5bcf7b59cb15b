"""Command-line front end.

Each subcommand reads a JSON configuration, calls library functions and writes
a plot-ready table (CSV or JSON) together with a run report.  All numerical
work happens in the library modules.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, correlations, propagators, thermo, validation
from .bath import SpectralDensity
from .core import (
    DissipathError,
    GlobalConstants,
    QuadratureConfig,
    SeriesConfig,
    ThermalState,
    ValidationError,
    require,
)
from .propagators import BoxSpec, DriveForce, OscillatorSpec, RingSpec

FORMATS = ("csv", "json")
PROPAGATOR_SYSTEMS = ("free", "ho", "ring", "box", "wall")
SEMICLASSICAL = "vanvleck"


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def to_csv(self, report_id: str) -> str:
        lines = [f"# report_id={report_id}", ",".join(self.columns)]
        lines += [",".join(_fmt(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def to_json(self, report_id: str) -> str:
        rows = [[_jsonable(v) for v in row] for row in self.rows]
        return json.dumps({"report_id": report_id, "columns": self.columns, "rows": rows}, indent=1) + "\n"


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    out: str | None = None
    format: str = "csv"
    route: str | None = None
    compare: bool = False
    tier: str = "quick"

    def canonical(self) -> str:
        d = {"subcommand": self.subcommand, "params": self.params, "format": self.format,
             "route": self.route, "compare": self.compare}
        if self.subcommand == "validate":
            d["tier"] = self.tier
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @property
    def report_id(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


# ---------------------------------------------------------------- config blocks


def _axis(spec, name):
    """A list of numbers, a scalar, or ``{"start", "stop", "num"}``."""
    if spec is None:
        raise ValidationError(f"missing axis {name!r}")
    if isinstance(spec, dict):
        try:
            return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"axis {name!r} needs start, stop and num") from exc
    try:
        arr = np.atleast_1d(np.asarray(spec, dtype=float))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"axis {name!r} must be numeric") from exc
    require(arr.ndim == 1 and arr.size > 0, f"axis {name!r} must be a non-empty list")
    return arr


def _block(params, name):
    b = params.get(name, {})
    require(isinstance(b, dict), f"block {name!r} must be an object")
    return b


def _build(cls, block, name):
    try:
        return cls(**block)
    except TypeError as exc:
        raise ValidationError(f"bad {name!r} block: {exc}") from exc


def constants_of(params) -> GlobalConstants:
    return _build(GlobalConstants, _block(params, "constants"), "constants")


def oscillator_of(params) -> OscillatorSpec:
    return _build(OscillatorSpec, dict(_block(params, "oscillator"), constants=constants_of(params)), "oscillator")


def bath_of(params, mass):
    b = params.get("bath")
    if b is None:
        return None
    require(isinstance(b, dict), "block 'bath' must be an object")
    if float(b.get("gamma", 1.0)) == 0.0:
        return None  # coupling switched off
    return SpectralDensity.from_dict(dict({"mass": mass}, **b))


def damped_of(params) -> thermo.DampedOscillator:
    spec = oscillator_of(params)
    return thermo.DampedOscillator(spec, bath_of(params, spec.m))


def thermal_of(params) -> ThermalState:
    b = _block(params, "thermal")
    c = constants_of(params)
    if "beta" in b:
        beta = b["beta"]
        return ThermalState(math.inf if beta in ("inf", None) else float(beta), c)
    if "temperature" in b:
        return ThermalState.from_temperature(float(b["temperature"]), c)
    raise ValidationError("thermal block needs 'beta' or 'temperature'")


def series_of(params, default: SeriesConfig | None = None) -> SeriesConfig | None:
    if "series" not in params:
        return default
    return _build(SeriesConfig, _block(params, "series"), "series")


def quadrature_of(params) -> QuadratureConfig | None:
    if "quadrature" not in params:
        return None
    return _build(QuadratureConfig, _block(params, "quadrature"), "quadrature")


# ---------------------------------------------------------------- propagator


def _propagator_route(system, route, p, params):
    """Return ``f(t, x_f, x_i) -> PropagatorValue`` for a system and route."""
    c = constants_of(params)
    m = float(p.get("m", _block(params, "oscillator").get("m", 1.0)))
    eps = p.get("epsilon")
    regulated = (lambda fn, spec: (lambda t, xf, xi: propagators.epsilon_extrapolated(fn, spec, t, xf, xi)
                                   if eps is None else fn(spec, t, xf, xi, epsilon=float(eps))))
    if system == "free":
        if route == "closed_form":
            return lambda t, xf, xi: propagators.free_propagator(m, t, xf, xi, c)
        if route == SEMICLASSICAL:
            return lambda t, xf, xi: propagators.vanvleck_propagator(
                lambda a, s, b: propagators.free_classical_action(m, s, a, b), t, xf, xi, hbar=c.hbar)
    elif system == "ho":
        spec = oscillator_of(params)
        drive = DriveForce(tuple(map(tuple, p["drive"]))) if p.get("drive") else None
        if route == "closed_form":
            return lambda t, xf, xi: propagators.ho_propagator(spec, drive, t, xf, xi)
        if route == SEMICLASSICAL:
            action = lambda a, s, b: float(propagators.ho_classical_action(spec, drive, s, a, b))
            return lambda t, xf, xi: propagators.vanvleck_propagator(
                action, t, xf, xi, hbar=c.hbar, morse_index=propagators.morse_index(spec.omega, t))
    elif system == "wall":
        if route in ("closed_form", "image_sum"):
            return lambda t, xf, xi: propagators.wall_propagator(m, t, xf, xi, c)
    elif system == "ring":
        spec = RingSpec(m, float(p.get("radius", 1.0)), c)
        if route == "winding_sum":
            return regulated(propagators.ring_propagator_winding, spec)
        if route == "spectral_sum":
            return regulated(propagators.ring_propagator_spectral, spec)
    elif system == "box":
        spec = BoxSpec(m, float(p.get("length", 1.0)), c)
        if route == "image_sum":
            return regulated(propagators.box_propagator_images, spec)
        if route == "spectral_sum":
            return regulated(propagators.box_propagator_spectral, spec)
    raise ValidationError(f"route {route!r} is not available for system {system!r}")


DEFAULT_ROUTES = {"free": ("closed_form", SEMICLASSICAL), "ho": ("closed_form", SEMICLASSICAL),
                  "wall": ("closed_form", None), "ring": ("winding_sum", "spectral_sum"),
                  "box": ("image_sum", "spectral_sum")}


def cmd_propagator(cfg: RunConfig):
    p = _block(cfg.params, "propagator")
    system = p.get("system")
    require(system in PROPAGATOR_SYSTEMS, f"system must be one of {PROPAGATOR_SYSTEMS}")
    primary, partner = DEFAULT_ROUTES[system]
    route = cfg.route or p.get("route") or primary
    times = _axis(p.get("times"), "times")
    x_f = _axis(p.get("x_f"), "x_f")
    x_i = _axis(p.get("x_i", 0.0), "x_i")
    first = _propagator_route(system, route, p, cfg.params)
    diag = {"route": route, "system": system}
    if not cfg.compare:
        table = Table(["t", "x_i", "x_f", "re", "im", "morse"])
        for t in times:
            for xi in x_i:
                for xf in x_f:
                    v = first(float(t), float(xf), float(xi))
                    a = complex(v.amplitude)
                    table.rows.append([t, xi, xf, a.real, a.imag, v.morse_index])
        return table, diag
    other = p.get("compare_route") or (partner if partner != route else primary)
    require(other is not None and other != route, f"no second route to compare for {system!r}")
    second = _propagator_route(system, other, p, cfg.params)
    table = Table(["t", "x_i", "x_f", f"re_{route}", f"im_{route}", f"re_{other}", f"im_{other}", "abs_diff"])
    worst = 0.0
    for t in times:
        for xi in x_i:
            for xf in x_f:
                a = complex(first(float(t), float(xf), float(xi)).amplitude)
                b = complex(second(float(t), float(xf), float(xi)).amplitude)
                worst = max(worst, abs(a - b))
                table.rows.append([t, xi, xf, a.real, a.imag, b.real, b.imag, abs(a - b)])
    diag.update(compare_route=other, max_abs_diff=worst)
    return table, diag


# ---------------------------------------------------------------- thermo


THERMO_TASKS = ("sweep", "ground_state", "widths", "dos")


def cmd_thermo(cfg: RunConfig):
    p = _block(cfg.params, "thermo")
    task = cfg.route or p.get("task", "sweep")
    require(task in THERMO_TASKS, f"thermo task must be one of {THERMO_TASKS}")
    dosc = damped_of(cfg.params)
    series = series_of(cfg.params, SeriesConfig())
    c = dosc.spec.constants
    diag = {"task": task}
    if task == "sweep":
        table = Table(["beta", "Z", "F"])
        worst = 0.0
        for b in _axis(p.get("betas"), "betas"):
            th = ThermalState(float(b), c)
            lz = thermo.log_z_damped(dosc, th, series)
            table.rows.append([b, math.exp(lz), -lz / b])
            if dosc.bath is None:
                exact = thermo.log_z_undamped(dosc.spec, th)
                worst = max(worst, abs(math.expm1(lz - exact)))
        if dosc.bath is None:
            diag["max_rel_diff_closed_form"] = worst
        return table, diag
    if task == "ground_state":
        table = Table(["quantity", "value"])
        eps_q = thermo.ground_state_energy(dosc, quadrature_of(cfg.params))
        table.rows.append(["epsilon0_quadrature", eps_q])
        if dosc.bath is not None:
            table.rows.append(["epsilon0_closed_form", thermo.ground_state_energy_closed_form(dosc)])
            shift = thermo.lamb_shift_weak(dosc, quadrature_of(cfg.params))
            table.rows += [["lamb_shift_weak", shift.value], ["lamb_shift_asymptote", shift.asymptote],
                           ["epsilon0_minus_half_hbar_omega0", eps_q - 0.5 * dosc.hbar * dosc.omega0]]
        return table, diag
    if task == "widths":
        table = Table(["n", "Gamma_n"])
        for n in _axis(p.get("levels", [0, 1, 2, 3, 4, 5]), "levels"):
            table.rows.append([int(n), thermo.level_width(dosc, int(n))])
        return table, diag
    energies = _axis(p.get("energies"), "energies")
    kw = {k: p[k] for k in ("c", "period", "n_terms", "n_nodes", "tolerance") if k in p}
    dos = thermo.density_of_states(dosc, energies, method=p.get("method", "bromwich"), series=series, **kw)
    table = Table(["E_minus_eps0", "rho"], [[e, r] for e, r in zip(dos.energies, dos.density)])
    diag.update(method=dos.method_tag, epsilon0=dos.epsilon0_shift, delta_weight=dos.delta_weight,
                average_density=dos.average_density, **dos.diagnostics)
    if "fit_levels" in p:
        levels = [int(n) for n in p["fit_levels"]]
        guess = [thermo.level_width(dosc, n) for n in levels]
        fits = thermo.fit_level_widths(dos, levels, dosc.hbar * dosc.omega0, guess,
                                       method=p.get("fit_method", "global"))
        diag["peak_fits"] = [dict(asdict(f), golden_rule=g) for f, g in zip(fits, guess)]
    return table, diag


# ---------------------------------------------------------------- correlations


CORRELATION_TASKS = ("time", "frequency", "imaginary_time")
TIME_ROUTES = ("frequency_integral", "pole_sum")


def cmd_correlation(cfg: RunConfig):
    p = _block(cfg.params, "correlation")
    task = p.get("task", "time")
    require(task in CORRELATION_TASKS, f"correlation task must be one of {CORRELATION_TASKS}")
    dosc = damped_of(cfg.params)
    require(dosc.bath is not None, "correlations need a bath block with gamma > 0")
    thermal = thermal_of(cfg.params)
    quad = quadrature_of(cfg.params)
    diag = {"task": task}
    if task == "frequency":
        w = _axis(p.get("omegas"), "omegas")
        x = np.atleast_1d(correlations.chi(dosc, w).value)
        ct = np.atleast_1d(correlations.c_tilde(dosc, thermal, w))
        fdt = np.atleast_1d(correlations.detailed_balance_defect(dosc, thermal, w))
        table = Table(["omega", "re_chi", "im_chi", "c_tilde", "fdt_defect"],
                      [[a, b.real, b.imag, c, d] for a, b, c, d in zip(w, x, ct, fdt)])
        diag["max_fdt_defect"] = float(np.max(fdt))
        return table, diag
    if task == "imaginary_time":
        taus = _axis(p.get("taus"), "taus")
        series = series_of(cfg.params)
        table = Table(["tau", "C"], [[t, correlations.c_imaginary_time(dosc, thermal, t, series)] for t in taus])
        return table, diag
    ts = _axis(p.get("times"), "times")
    route = cfg.route or p.get("route", "frequency_integral")
    require(route in TIME_ROUTES, f"time route must be one of {TIME_ROUTES}")
    diag["route"] = route
    if route == "pole_sum":
        s_of = lambda t: correlations.s_pole_sum(dosc, thermal, t, series_of(cfg.params))
    else:
        s_of = lambda t: correlations.s_symmetric(dosc, thermal, t, quad)
    if not cfg.compare:
        table = Table(["t", "S", "A"], [[t, s_of(t), correlations.a_antisymmetric(dosc, t, quad)] for t in ts])
        return table, diag
    table = Table(["t", "S", "S_rwa", "S_rwa_markov", "delta"])
    for t in ts:
        rwa = correlations.s_rwa(dosc, thermal, t, quad)
        markov = correlations.s_rwa_markov(dosc, thermal, t)
        table.rows.append([t, s_of(t), rwa, markov, rwa - markov])
    cols = np.asarray(table.rows, dtype=float)
    wb = correlations.oscillator_poles(dosc).omega_bar
    slope, resid = correlations.log_envelope_slope(cols[:, 0], cols[:, 3], wb)
    diag.update(markov_envelope_slope=slope, markov_envelope_residual=resid, expected_slope=-0.5 * dosc.bath.gamma)
    lo, hi = p.get("fit_window", [float(ts[0]), float(ts[-1])])
    sel = (cols[:, 0] >= lo) & (cols[:, 0] <= hi) & (cols[:, 0] > 0)
    if np.count_nonzero(sel) >= 2:
        diag["delta_tail_exponent"] = correlations.power_law_exponent(cols[sel, 0], cols[sel, 4])
        if thermal.is_zero_temperature:
            t_last = float(cols[sel, 0][-1])
            md = correlations.markov_discrepancy(dosc, t_last, quad)
            diag.update(delta_t2_at_fit_end=float(cols[sel, 4][-1]) * t_last**2,
                        delta_t2_asymptote_omega0=md.asymptote * t_last**2,
                        delta_t2_asymptote_omega_bar=md.asymptote_omega_bar * t_last**2)
    return table, diag


# ---------------------------------------------------------------- validate


def cmd_validate(cfg: RunConfig):
    tier = cfg.tier
    require(tier in ("quick", "full"), "tier must be 'quick' or 'full'")
    checks = validation.run_suite(tier)
    table = Table(["check", "passed", "value", "tolerance"],
                  [[c.name, c.passed, c.value, c.tolerance] for c in checks])
    diag = {"tier": tier, "checks": [c.to_dict() for c in checks],
            "failed": [c.name for c in checks if not c.passed]}
    return table, diag


COMMANDS = {"propagator": cmd_propagator, "thermo": cmd_thermo,
            "correlation": cmd_correlation, "validate": cmd_validate}


# ---------------------------------------------------------------- driver


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dissipath", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dissipath {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", help="table path; the report goes to <out>.report.json")
        sp.add_argument("--format", choices=FORMATS)
        sp.add_argument("--route")
        sp.add_argument("--compare", action="store_true", default=None)
        sp.add_argument("--tier", choices=("quick", "full"))
    return parser


def load_config(args) -> RunConfig:
    params = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                params = json.load(fh)
        except OSError as exc:
            raise ValidationError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from exc
        require(isinstance(params, dict), "config must be a JSON object")
    elif args.subcommand != "validate":
        raise ValidationError("--config is required")
    run = params.pop("run", {})
    pick = lambda flag, key, default: flag if flag is not None else run.get(key, default)
    fmt = pick(args.format, "format", "csv")
    require(fmt in FORMATS, f"format must be one of {FORMATS}")
    return RunConfig(args.subcommand, params, pick(args.out, "out", None), fmt,
                     pick(args.route, "route", None), bool(pick(args.compare, "compare", False)),
                     pick(args.tier, "tier", "quick"))


def _emit_error(exc: DissipathError) -> int:
    payload = dict(exc.to_dict(), exit_code=exc.exit_code, type=type(exc).__name__)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return exc.exit_code


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = load_config(args)
        with np.errstate(all="ignore"):
            table, diag = COMMANDS[cfg.subcommand](cfg)
    except DissipathError as exc:
        return _emit_error(exc)
    rid = cfg.report_id
    text = table.to_csv(rid) if cfg.format == "csv" else table.to_json(rid)
    report = {"report_id": rid, "tool_version": __version__, "subcommand": cfg.subcommand,
              "inputs": json.loads(cfg.canonical()),
              "outputs": {"columns": table.columns, "rows": len(table.rows), "path": cfg.out,
                          "format": cfg.format},
              "diagnostics": _jsonable(diag), "wall_time_s": time.perf_counter() - start}
    report_text = json.dumps(report, indent=1, sort_keys=True) + "\n"
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        with open(cfg.out + ".report.json", "w", encoding="utf-8") as fh:
            fh.write(report_text)
    else:
        sys.stdout.write(text)
        sys.stderr.write(report_text)
    if cfg.subcommand == "validate" and diag["failed"]:
        return 1
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
