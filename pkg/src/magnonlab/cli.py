"""Configuration-driven scenario runner.

Wires geometry -> spectra -> couplings -> dynamics and emits figure-ready
CSV data files plus a JSON run manifest.  Scenario configuration is a TOML
file; see ``magnonlab config-init``.

CSV dialect: comma-separated, '.' decimal, a header row of unit-suffixed
column names followed by a unit row; floats are written as %.12e so that
re-running an identical configuration reproduces byte-identical numeric
columns.  Exit codes: 0 success, 2 configuration error, 3 physics /
convergence error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import tomli

from .constants import (DomainError, MaterialParams, PhysicalConstants,
                        TWO_PI, nv_transition_frequencies, yig)
from .numerics import ConvergenceError, FactorizationError
from .paraunitary import InstabilityError
from . import bar as barmod
from . import waveguide as wgmod
from . import lindblad as lb

__all__ = ["main", "ConfigError", "load_config", "default_config_text"]


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


_PHYSICS_ERRORS = (InstabilityError, ConvergenceError, FactorizationError,
                   DomainError, RuntimeError)

# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

_SCHEMA: Dict[str, set] = {
    "geometry": {"kind", "d_nm", "w_nm", "l_nm", "n_trunc"},
    "material": {"alpha", "mu0_ms_mt"},
    "field": {"fixed_mt", "detuning_mhz", "resonance_p"},
    "nv": {"positions_nm", "t2_star_ms"},
    "protocol": {"kind", "detuning_mhz", "idle_detuning_mhz",
                 "temperatures_mk", "fock_cutoff"},
    "sweep": {"n_points", "delta_z_min_um", "delta_z_max_um",
              "field_min_mt", "field_max_mt", "tau_max_us",
              "total_time_us", "map_nx", "map_ny",
              "alpha_min", "alpha_max", "alpha_points", "gamma2_max_rel",
              "gamma2_points", "n_modes"},
    "output": {"directory"},
}


def default_config_text() -> str:
    return """\
# magnonlab scenario configuration

[geometry]
kind = "bar"          # "bar" or "waveguide"
d_nm = 5.0            # thickness
w_nm = 30.0           # width
l_nm = 3000.0         # length (bar only)
n_trunc = 40          # longitudinal mode truncation (bar only)

[material]
alpha = 1.0e-5        # Gilbert damping
mu0_ms_mt = 245.8     # saturation magnetization, mu0*Ms in mT

[field]
# exactly one of: fixed_mt, detuning_mhz (waveguide), resonance_p (bar)
resonance_p = 5

[nv]
# qubit positions in nm; must lie outside the magnet
positions_nm = [[10.0, 30.0, 400.0], [10.0, 30.0, 2600.0]]
t2_star_ms = 1.0

[protocol]
kind = "both"         # "transduction", "exchange" or "both"
detuning_mhz = 3.0    # off-resonant magnon detuning
idle_detuning_mhz = 5.0
temperatures_mk = [70.0]

[sweep]
n_points = 61

[output]
directory = "out"
"""


def _check_unknown_keys(tree: dict) -> None:
    for section, body in tree.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown configuration section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"section [{section}] must be a table")
        for key in body:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{section}.{key}'")


def _get(cfg: dict, section: str, key: str, default=None):
    return cfg.get(section, {}).get(key, default)


def _require(cfg: dict, section: str, key: str):
    value = _get(cfg, section, key)
    if value is None:
        raise ConfigError(f"missing required key '{section}.{key}'")
    return value


def _finite(value, where: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"'{where}' must be a number") from None
    if not math.isfinite(x):
        raise ConfigError(f"'{where}' must be finite")
    return x


def load_config(path: Path) -> dict:
    """Parse and schema-validate a scenario configuration file."""
    try:
        with open(path, "rb") as fh:
            cfg = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    _check_unknown_keys(cfg)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    kind = _require(cfg, "geometry", "kind")
    if kind not in ("bar", "waveguide"):
        raise ConfigError("'geometry.kind' must be 'bar' or 'waveguide'")
    d = _finite(_require(cfg, "geometry", "d_nm"), "geometry.d_nm")
    w = _finite(_require(cfg, "geometry", "w_nm"), "geometry.w_nm")
    if not 0 < d <= w:
        raise ConfigError("'geometry' requires 0 < d_nm <= w_nm")
    if kind == "bar":
        length = _finite(_require(cfg, "geometry", "l_nm"), "geometry.l_nm")
        if length <= w:
            raise ConfigError("'geometry.l_nm' must exceed w_nm")

    field = cfg.get("field", {})
    specs = [k for k in ("fixed_mt", "detuning_mhz", "resonance_p")
             if k in field]
    if len(specs) != 1:
        raise ConfigError("section [field] must contain exactly one of "
                          "fixed_mt, detuning_mhz, resonance_p")
    if specs[0] == "resonance_p" and kind != "bar":
        raise ConfigError("'field.resonance_p' requires geometry.kind='bar'")
    if specs[0] == "detuning_mhz" and kind != "waveguide":
        raise ConfigError("'field.detuning_mhz' requires "
                          "geometry.kind='waveguide'")
    if specs[0] != "resonance_p":
        _finite(field[specs[0]], f"field.{specs[0]}")

    alpha = _finite(_get(cfg, "material", "alpha", 1e-5), "material.alpha")
    if not 0 < alpha < 1:
        raise ConfigError("'material.alpha' must lie in (0, 1)")
    _finite(_get(cfg, "material", "mu0_ms_mt", 245.8), "material.mu0_ms_mt")

    positions = _require(cfg, "nv", "positions_nm")
    if not isinstance(positions, list) or not positions:
        raise ConfigError("'nv.positions_nm' must be a non-empty list")
    for i, pos in enumerate(positions):
        if not isinstance(pos, list) or len(pos) != 3:
            raise ConfigError(f"'nv.positions_nm[{i}]' must be [x, y, z] nm")
        for c in pos:
            _finite(c, f"nv.positions_nm[{i}]")
    _finite(_get(cfg, "nv", "t2_star_ms", 1.0), "nv.t2_star_ms")

    proto = cfg.get("protocol", {})
    if proto.get("kind", "both") not in ("transduction", "exchange", "both"):
        raise ConfigError("'protocol.kind' must be 'transduction', "
                          "'exchange' or 'both'")
    temps = proto.get("temperatures_mk", [70.0])
    if not isinstance(temps, list) or not temps:
        raise ConfigError("'protocol.temperatures_mk' must be a non-empty "
                          "list of temperatures in mK")
    for t in temps:
        if _finite(t, "protocol.temperatures_mk") < 0:
            raise ConfigError("'protocol.temperatures_mk' entries must be "
                              ">= 0")
    for key in ("detuning_mhz", "idle_detuning_mhz"):
        if key in proto:
            _finite(proto[key], f"protocol.{key}")
    for key, val in cfg.get("sweep", {}).items():
        _finite(val, f"sweep.{key}")


# ---------------------------------------------------------------------------
# scenario assembly
# ---------------------------------------------------------------------------

def _quad_level(quad_rtol: float) -> int:
    if quad_rtol >= 1e-6:
        return 1
    if quad_rtol >= 1e-8:
        return 2
    return 3


class Scenario:
    """Resolved scenario: models, field and couplings built from a config."""

    def __init__(self, cfg: dict, *, quad_rtol: float = 1e-6,
                 n_trunc: Optional[int] = None,
                 fock_cutoff: Optional[int] = None):
        self.cfg = cfg
        self.kind = cfg["geometry"]["kind"]
        self.quad_rtol = quad_rtol
        self.quad_level = _quad_level(quad_rtol)
        self.constants = PhysicalConstants()
        mu0_ms = _get(cfg, "material", "mu0_ms_mt", 245.8) * 1e-3
        alpha = _get(cfg, "material", "alpha", 1e-5)
        base = yig(alpha=alpha, constants=self.constants)
        self.material = MaterialParams(mu0_ms=mu0_ms, d_ex=base.d_ex,
                                       alpha=alpha)
        self.d = cfg["geometry"]["d_nm"] * 1e-9
        self.w = cfg["geometry"]["w_nm"] * 1e-9
        self.l = _get(cfg, "geometry", "l_nm", 0.0) * 1e-9
        self.n_trunc = int(n_trunc if n_trunc is not None
                           else _get(cfg, "geometry", "n_trunc", 40))
        self.fock_cutoff = fock_cutoff
        self.positions = [tuple(c * 1e-9 for c in pos)
                          for pos in cfg["nv"]["positions_nm"]]
        self.t2_star = _get(cfg, "nv", "t2_star_ms", 1.0) * 1e-3
        proto = cfg.get("protocol", {})
        self.protocol_kind = proto.get("kind", "both")
        self.delta_omega = TWO_PI * proto.get("detuning_mhz", 3.0) * 1e6
        self.delta_idle = TWO_PI * proto.get("idle_detuning_mhz", 5.0) * 1e6
        self.temperatures = [t * 1e-3 for t in
                             proto.get("temperatures_mk", [70.0])]
        if self.fock_cutoff is None and "fock_cutoff" in proto:
            self.fock_cutoff = int(proto["fock_cutoff"])
        self.sweep = cfg.get("sweep", {})
        self._resolve_field_and_models()
        self._check_positions_outside()

    # -- geometry / field -------------------------------------------------

    def _resolve_field_and_models(self) -> None:
        field = self.cfg["field"]
        if self.kind == "bar":
            probe = barmod.BarModel(self.d, self.w, self.l, self.material,
                                    h_ext=1e-3, n_trunc=self.n_trunc,
                                    constants=self.constants,
                                    quad_level=self.quad_level)
            if "fixed_mt" in field:
                self.h_ext = field["fixed_mt"] * 1e-3
                self.resonant_p = int(field.get("resonance_p", 5)) \
                    if "resonance_p" in field else 5
            else:
                self.resonant_p = int(field["resonance_p"])
                self.h_ext = barmod.find_resonant_field(probe,
                                                        self.resonant_p)
            self.bar = barmod.BarModel(self.d, self.w, self.l, self.material,
                                       h_ext=self.h_ext,
                                       n_trunc=self.n_trunc,
                                       constants=self.constants,
                                       quad_level=self.quad_level)
            self.waveguide = None
        else:
            probe = wgmod.WaveguideModel(self.d, self.w, self.material,
                                         h_ext=0.0,
                                         constants=self.constants,
                                         quad_level=self.quad_level)
            if "fixed_mt" in field:
                self.h_ext = field["fixed_mt"] * 1e-3
            else:
                target = TWO_PI * field["detuning_mhz"] * 1e6
                self.h_ext = wgmod.find_field_for_detuning(probe, target)
            self.waveguide = wgmod.WaveguideModel(
                self.d, self.w, self.material, h_ext=self.h_ext,
                constants=self.constants, quad_level=self.quad_level)
            self.bar = None
            self.resonant_p = None
        self._bar_spectrum = None
        self._bar_couplings: Dict[Tuple[float, float, float],
                                  barmod.BarCouplingSet] = {}
        self._wg_curve = None

    def _check_positions_outside(self) -> None:
        for i, pos in enumerate(self.positions):
            if self.kind == "bar":
                inside = barmod._inside_bar(self.bar, pos)
            else:
                inside = wgmod._inside(self.waveguide, pos[:2])
            if inside:
                raise ConfigError(f"'nv.positions_nm[{i}]' lies inside the "
                                  "magnet")

    # -- cached heavy results ---------------------------------------------

    def bar_spectrum(self) -> "barmod.BarSpectrum":
        if self._bar_spectrum is None:
            self._bar_spectrum = barmod.bar_spectrum(self.bar)
        return self._bar_spectrum

    def bar_coupling_at(self, pos) -> "barmod.BarCouplingSet":
        key = tuple(pos)
        if key not in self._bar_couplings:
            self._bar_couplings[key] = barmod.bar_coupling(
                self.bar, self.bar_spectrum(), pos)
        return self._bar_couplings[key]

    def wg_curve(self) -> "wgmod.DispersionCurve":
        if self._wg_curve is None:
            self._wg_curve = wgmod.dispersion(self.waveguide)
        return self._wg_curve

    def open_system(self, temperature: float) -> "lb.OpenSystemModel":
        """Two-qubit open-system model at the resonant bar mode."""
        if self.kind != "bar":
            raise ConfigError("protocol simulation requires "
                              "geometry.kind='bar'")
        if len(self.positions) < 2:
            raise ConfigError("protocol simulation requires two entries in "
                              "'nv.positions_nm'")
        spec = self.bar_spectrum()
        p = self.resonant_p
        omega = spec.omega_of(p)
        g1 = self.bar_coupling_at(self.positions[0]).g_lower[p]
        g2 = self.bar_coupling_at(self.positions[1]).g_lower[p]
        return lb.OpenSystemModel.from_physical(
            g1, g2, omega, self.material.alpha, self.t2_star, temperature,
            n_max=self.fock_cutoff, constants=self.constants)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12e}"


def _write_csv(path: Path, names: Sequence[str], units: Sequence[str],
               columns: Sequence[Sequence]) -> None:
    if len(names) != len(units) or len(names) != len(columns):
        raise ValueError("names, units and columns must align")
    n = len(columns[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        writer.writerow(units)
        for i in range(n):
            writer.writerow([_fmt(col[i]) for col in columns])


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


class RunWriter:
    """Collects output files and emits the JSON run manifest."""

    def __init__(self, outdir: Path, subcommand: str, config_path: Path,
                 scenario: Scenario):
        self.outdir = outdir
        self.subcommand = subcommand
        self.scenario = scenario
        self.config_sha = hashlib.sha256(
            config_path.read_bytes()).hexdigest()
        self.files: List[Path] = []
        self.extra: Dict[str, object] = {}
        outdir.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, names, units, columns) -> Path:
        path = self.outdir / name
        _write_csv(path, names, units, columns)
        self.files.append(path)
        return path

    def manifest(self) -> Path:
        s = self.scenario
        doc = {
            "subcommand": self.subcommand,
            "config_sha256": self.config_sha,
            "constants": {
                "gamma_rad_per_s_per_t": s.constants.gamma,
                "zero_field_splitting_rad_per_s": s.constants.d_nv,
                "boltzmann_over_hbar_rad_per_s_per_k":
                    s.constants.boltzmann_over_hbar,
            },
            "material": {
                "mu0_ms_t": s.material.mu0_ms,
                "exchange_stiffness_rad_m2_per_s": s.material.d_ex,
                "gilbert_damping": s.material.alpha,
            },
            "field_t": s.h_ext,
            "quadrature": {"rtol": s.quad_rtol, "level": s.quad_level},
            "mode_truncation": s.n_trunc,
            "fock_cutoff": s.fock_cutoff,
            "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ",
                                         time.gmtime()),
            "outputs": [{"path": p.name, "sha256": _sha256(p)}
                        for p in self.files],
        }
        doc.update(self.extra)
        path = self.outdir / f"{self.subcommand}_manifest.json"
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


_TRACE_NAMES = ["t_us", "p1e", "p2e", "n_mean", "negativity_norm", "chsh",
                "fidelity"]
_TRACE_UNITS = ["us", "1", "1", "1", "1", "1", "1"]


def _trace_columns(trace: "lb.SimulationTrace"):
    return [trace.times * 1e6, trace.p1e, trace.p2e, trace.n_mean,
            trace.negativity_norm, trace.chsh, trace.fidelity]


def _temp_tag(temperature_k: float) -> str:
    return f"{temperature_k * 1e3:g}mk"


def _map_temperatures(scenario: Scenario, jobs: int, fn):
    temps = scenario.temperatures
    if jobs > 1 and len(temps) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, temps))
    return [fn(t) for t in temps]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _run_dispersion(scenario: Scenario, writer: RunWriter, jobs: int) -> None:
    if scenario.kind != "waveguide":
        raise ConfigError("'dispersion' requires geometry.kind='waveguide'")
    curve = scenario.wg_curve()
    rho = scenario.positions[0][:2]
    profile = wgmod.coupling_profile(scenario.waveguide, rho, curve.k, curve)
    writer.csv("dispersion.csv",
               ["k_rad_per_m", "f_ghz", "coupling_abs"],
               ["rad/m", "GHz", "1"],
               [curve.k, curve.omega / (TWO_PI * 1e9),
                np.abs(profile.g_of_k)])
    writer.extra["band_minimum"] = {
        "k_min_rad_per_m": curve.k_min,
        "f_min_ghz": curve.omega_min / (TWO_PI * 1e9),
        "field_t": scenario.h_ext,
    }


def _run_coupling_map(scenario: Scenario, writer: RunWriter,
                      jobs: int) -> None:
    n = int(scenario.sweep.get("n_points", 41))
    if scenario.kind == "bar":
        spec = scenario.bar_spectrum()
        p = scenario.resonant_p
        omega = spec.omega_of(p)
        x0, y0, _ = scenario.positions[0]
        zs = np.linspace(0.05 * scenario.l, 0.95 * scenario.l, n)
        positions = [(x0, y0, z) for z in zs]

        def work(pos):
            return scenario.bar_coupling_at(pos).g_lower[p]

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                gs = list(pool.map(work, positions))
        else:
            gs = [work(pos) for pos in positions]
        gabs = np.abs(np.array(gs))
        coop = np.array([barmod.cooperativity(g, omega,
                                              scenario.material.alpha,
                                              scenario.t2_star)
                         for g in gabs])
        writer.csv("coupling_map.csv",
                   ["z_nm", "g_over_2pi_khz", "cooperativity"],
                   ["nm", "kHz", "1"],
                   [zs * 1e9, gabs / (TWO_PI * 1e3), coop])
        writer.extra["resonant_mode"] = {
            "p": p, "f_ghz": omega / (TWO_PI * 1e9)}
    else:
        curve = scenario.wg_curve()
        nx = int(scenario.sweep.get("map_nx", n))
        ny = int(scenario.sweep.get("map_ny", n))
        xs = np.linspace(1.02 * scenario.d, 4.0 * scenario.d, nx)
        ys = np.linspace(-scenario.w, 2.0 * scenario.w, ny)
        rows_x, rows_y, rows_g = [], [], []
        for x in xs:
            for y in ys:
                g = wgmod.coupling_g(scenario.waveguide, (x, y), curve.k_min)
                rows_x.append(x * 1e9)
                rows_y.append(y * 1e9)
                rows_g.append(abs(g))
        writer.csv("coupling_map.csv",
                   ["x_nm", "y_nm", "coupling_abs"],
                   ["nm", "nm", "1"],
                   [rows_x, rows_y, rows_g])
        writer.extra["band_minimum"] = {"k_min_rad_per_m": curve.k_min}


def _run_geff_sweep(scenario: Scenario, writer: RunWriter, jobs: int) -> None:
    n = int(scenario.sweep.get("n_points", 21))
    z_lo = scenario.sweep.get("delta_z_min_um", 0.1) * 1e-6
    z_hi = scenario.sweep.get("delta_z_max_um", 2.0) * 1e-6
    dzs = np.linspace(z_lo, z_hi, n)
    if scenario.kind == "waveguide":
        curve = scenario.wg_curve()
        rho = scenario.positions[0][:2]
        omega_nv, _ = nv_transition_frequencies(scenario.h_ext,
                                                scenario.constants)
        delta = curve.omega_min - omega_nv
        g_kmin = wgmod.coupling_g(scenario.waveguide, rho, curve.k_min)

        def work(dz):
            num = wgmod.effective_coupling(scenario.waveguide, rho, dz,
                                           curve)
            ana = wgmod.analytic_geff(g_kmin, curve.k_min, dz, delta,
                                      scenario.waveguide)
            _, gdr = wgmod.er_gdr(num, scenario.t2_star)
            return num, ana, gdr

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(work, dzs))
        else:
            rows = [work(dz) for dz in dzs]
        num, ana, gdr = map(np.array, zip(*rows))
        writer.csv("geff_sweep.csv",
                   ["delta_z_um", "geff_numeric_over_2pi_khz",
                    "geff_analytic_over_2pi_khz", "gdr"],
                   ["um", "kHz", "kHz", "1"],
                   [dzs * 1e6, num / (TWO_PI * 1e3), ana / (TWO_PI * 1e3),
                    gdr])
    else:
        spec = scenario.bar_spectrum()
        p = scenario.resonant_p
        x0, y0, z0 = scenario.positions[0]
        g1 = scenario.bar_coupling_at(scenario.positions[0]).g_lower[p]

        def work(dz):
            g2 = scenario.bar_coupling_at((x0, y0, z0 + dz)).g_lower[p]
            geff = barmod.bar_geff(g1, g2, scenario.delta_omega)
            _, gdr = wgmod.er_gdr(abs(geff), scenario.t2_star)
            return abs(geff), gdr

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(work, dzs))
        else:
            rows = [work(dz) for dz in dzs]
        geff, gdr = map(np.array, zip(*rows))
        writer.csv("geff_sweep.csv",
                   ["delta_z_um", "geff_over_2pi_khz", "gdr"],
                   ["um", "kHz", "1"],
                   [dzs * 1e6, geff / (TWO_PI * 1e3), gdr])


def _run_bar_modes(scenario: Scenario, writer: RunWriter, jobs: int) -> None:
    if scenario.kind != "bar":
        raise ConfigError("'bar-modes' requires geometry.kind='bar'")
    n = int(scenario.sweep.get("n_points", 21))
    h_lo = scenario.sweep.get("field_min_mt", 1.0) * 1e-3
    h_hi = scenario.sweep.get("field_max_mt", 8.0) * 1e-3
    n_modes = int(scenario.sweep.get(
        "n_modes", min(9, scenario.n_trunc + 1)))
    fields = np.linspace(h_lo, h_hi, n)
    from dataclasses import replace as _replace

    def work(h):
        spec = barmod.bar_spectrum(_replace(scenario.bar, h_ext=h))
        lo, up = nv_transition_frequencies(h, scenario.constants)
        return spec.frequencies[:n_modes], lo, up

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(work, fields))
    else:
        rows = [work(h) for h in fields]
    freqs = np.array([r[0] for r in rows]) / (TWO_PI * 1e9)
    lower = np.array([r[1] for r in rows]) / (TWO_PI * 1e9)
    upper = np.array([r[2] for r in rows]) / (TWO_PI * 1e9)
    names = ["h_mt"] + [f"f_mode{p}_ghz" for p in range(n_modes)] \
        + ["f_qubit_lower_ghz", "f_qubit_upper_ghz"]
    units = ["mT"] + ["GHz"] * (n_modes + 2)
    cols = [fields * 1e3] + [freqs[:, p] for p in range(n_modes)] \
        + [lower, upper]
    writer.csv("bar_modes.csv", names, units, cols)


def _run_simulate(scenario: Scenario, writer: RunWriter, jobs: int) -> None:
    kinds = (["transduction", "exchange"]
             if scenario.protocol_kind == "both"
             else [scenario.protocol_kind])
    n = int(scenario.sweep.get("n_points", 61))
    peaks = {}

    def work(temperature):
        model = scenario.open_system(temperature)
        tag = _temp_tag(temperature)
        out = []
        if "transduction" in kinds:
            tau_swap = np.pi / (2.0 * abs(model.g1))
            tau_max = scenario.sweep.get("tau_max_us", None)
            tau_max = (tau_max * 1e-6 if tau_max is not None
                       else 2.0 * tau_swap)
            taus = np.linspace(0.0, tau_max, n)
            trace = lb.transduction_endpoint_sweep(model, taus,
                                                   scenario.delta_idle)
            out.append((f"transduction_{tag}.csv", trace,
                        ("transduction", tag,
                         float(np.max(trace.fidelity)))))
        if "exchange" in kinds:
            g_eff = abs(model.g1 * model.g2) / scenario.delta_omega
            total = scenario.sweep.get("total_time_us", None)
            total = (total * 1e-6 if total is not None
                     else 0.75 * np.pi / g_eff)
            trace = lb.run_virtual_exchange(model, scenario.delta_omega,
                                            total, n_samples=max(n, 120))
            out.append((f"exchange_{tag}.csv", trace,
                        ("exchange", tag, float(np.max(trace.fidelity)))))
        return out

    for result in _map_temperatures(scenario, jobs, work):
        for name, trace, (kind, tag, peak) in result:
            writer.csv(name, _TRACE_NAMES, _TRACE_UNITS,
                       _trace_columns(trace))
            peaks[f"{kind}_{tag}"] = peak
    writer.extra["peak_fidelity"] = peaks


def _run_gate_fidelity(scenario: Scenario, writer: RunWriter,
                       jobs: int) -> None:
    n = int(scenario.sweep.get("n_points", 241))
    peaks = {}

    def work(temperature):
        model = scenario.open_system(temperature)
        times, fbar = lb.gate_fidelity_curve(model, scenario.delta_omega,
                                             n_samples=n)
        return temperature, times, fbar

    for temperature, times, fbar in _map_temperatures(scenario, jobs, work):
        tag = _temp_tag(temperature)
        writer.csv(f"gate_fidelity_{tag}.csv",
                   ["t_us", "avg_gate_fidelity"], ["us", "1"],
                   [times * 1e6, fbar])
        peaks[tag] = float(fbar.max())
    writer.extra["peak_avg_gate_fidelity"] = peaks


def _run_phase_diagram(scenario: Scenario, writer: RunWriter,
                       jobs: int) -> None:
    model = scenario.open_system(scenario.temperatures[0])
    g = abs(model.g1)
    omega = model.omega_m
    a_lo = scenario.sweep.get("alpha_min", 1e-8)
    a_hi = scenario.sweep.get("alpha_max", 1e-6)
    n_a = int(scenario.sweep.get("alpha_points", 7))
    g2_max = scenario.sweep.get("gamma2_max_rel", 3e-4) * g
    n_g = int(scenario.sweep.get("gamma2_points", 4))
    alpha_grid = np.geomspace(a_lo, a_hi, n_a)
    gamma2_grid = np.linspace(0.0, g2_max, n_g)
    diagram = lb.protocol_phase_diagram(alpha_grid, gamma2_grid,
                                        scenario.delta_omega, g, omega)
    cols = {k: [] for k in ("alpha", "gamma2", "on", "off", "win")}
    for i, al in enumerate(diagram.alpha):
        for j, g2 in enumerate(diagram.gamma2):
            cols["alpha"].append(al)
            cols["gamma2"].append(g2)
            cols["on"].append(diagram.fid_onres[i, j])
            cols["off"].append(diagram.fid_offres[i, j])
            cols["win"].append(int(diagram.winner[i, j]))
    writer.csv("phase_diagram.csv",
               ["alpha", "gamma2", "fid_onres", "fid_offres", "winner"],
               ["1", "rad/s", "1", "1", "sign"],
               [cols["alpha"], cols["gamma2"], cols["on"], cols["off"],
                cols["win"]])
    writer.extra["boundary_fit"] = {"slope": diagram.slope,
                                    "offset": diagram.offset,
                                    "g_rad_per_s": g,
                                    "omega_rad_per_s": omega}


def _run_decoherence(scenario: Scenario, writer: RunWriter,
                     jobs: int) -> None:
    if scenario.kind != "bar":
        raise ConfigError("'decoherence' requires geometry.kind='bar'")
    spec = scenario.bar_spectrum()
    coupling = scenario.bar_coupling_at(scenario.positions[0])

    def work(temperature):
        tau2, t2s = barmod.dephasing_higher_order(
            scenario.bar, spec, temperature, scenario.material.alpha,
            r=scenario.positions[0])
        gm, gp = barmod.t1_decay_rates(coupling, spec, "lower",
                                       scenario.h_ext, temperature,
                                       scenario.material.alpha,
                                       scenario.constants)
        return tau2, t2s, gm, gp

    rows = _map_temperatures(scenario, jobs, work)
    temps = np.array(scenario.temperatures)
    tau2, t2s, gm, gp = map(np.array, zip(*rows))
    writer.csv("decoherence.csv",
               ["temperature_mk", "tau2_gaussian_us", "t2_star_us",
                "t1_rate_down_per_s", "t1_rate_up_per_s"],
               ["mK", "us", "us", "1/s", "1/s"],
               [temps * 1e3, np.minimum(tau2, 1e6) * 1e6,
                np.minimum(t2s, 1e6) * 1e6, gm, gp])


_SUBCOMMANDS = {
    "dispersion": _run_dispersion,
    "coupling-map": _run_coupling_map,
    "geff-sweep": _run_geff_sweep,
    "bar-modes": _run_bar_modes,
    "simulate": _run_simulate,
    "gate-fidelity": _run_gate_fidelity,
    "phase-diagram": _run_phase_diagram,
    "decoherence": _run_decoherence,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magnonlab",
        description="Magnon spectra, spin-qubit couplings and entanglement "
                    "protocol simulations for ferromagnetic waveguides and "
                    "bars.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in list(_SUBCOMMANDS) + ["config-init"]:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None,
                       help="scenario configuration file (TOML)")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (overrides [output])")
        p.add_argument("--jobs", type=int, default=1,
                       help="sweep-level worker count")
        p.add_argument("--quad-rtol", type=float, default=1e-6,
                       help="quadrature refinement tolerance")
        p.add_argument("--n-trunc", type=int, default=None,
                       help="override the longitudinal mode truncation")
        p.add_argument("--fock-cutoff", type=int, default=None,
                       help="override the bosonic Fock cutoff")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.subcommand == "config-init":
        path = args.config if args.config is not None \
            else Path("magnonlab.toml")
        try:
            path.write_text(default_config_text())
            load_config(path)          # emitted defaults must parse back
        except (ConfigError, OSError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        print(f"wrote {path}")
        return 0

    if args.config is None:
        print("config error: --config is required", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return 2

    try:
        cfg = load_config(args.config)
        scenario = Scenario(cfg, quad_rtol=args.quad_rtol,
                            n_trunc=args.n_trunc,
                            fock_cutoff=args.fock_cutoff)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _PHYSICS_ERRORS as exc:
        print(f"physics error while resolving the scenario: {exc}",
              file=sys.stderr)
        return 3

    outdir = args.out if args.out is not None \
        else Path(_get(cfg, "output", "directory", "out"))
    writer = RunWriter(outdir, args.subcommand, args.config, scenario)
    try:
        _SUBCOMMANDS[args.subcommand](scenario, writer, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _PHYSICS_ERRORS as exc:
        # partial outputs are preserved for inspection
        writer.manifest()
        print(f"physics error in '{args.subcommand}': {exc}",
              file=sys.stderr)
        return 3
    manifest = writer.manifest()
    for p in writer.files:
        print(f"wrote {p}")
    print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
