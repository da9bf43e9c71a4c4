"""Experiment configuration: sectioned key-value text parsed into SI-unit records.

Example::

    [lattice]
    sigma_z = 10 um
    wavelength = 16 lambda_D2
    detuning_ghz = 200
    xi = 5.37
    z0 = 20 um

    [bec]
    N = 1e5
    a_s = 100          # Bohr radii
    trap_hz = 10, 70, 70
    kick = 1 cm/s      # or "16 hbar_k"

    [run]
    mode = gpe

Quantities accept an optional unit suffix (``m mm um nm``, ``W mW uW nW``,
``m/s cm/s mm/s``); bare numbers are SI.  Wavelengths also accept multiples
of ``lambda_D2``.  Unknown keys are rejected.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, fields, replace

from .gpe.grid import Grid3D
from .gpe.state import TrapConfig
from .lattice import LatticeSpec, peak_intensity_from_power, power_from_peak_intensity
from .physconst import A0, Species, detuning_angular, kick_velocity, rb87_d2_defaults


class ConfigError(ValueError):
    pass


_UNITS = {
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "µW": 1e-6, "nW": 1e-9},
    "velocity": {"m/s": 1.0, "cm/s": 1e-2, "mm/s": 1e-3},
    "intensity": {"W/m^2": 1.0, "W/m2": 1.0},
    "acceleration": {"m/s^2": 1.0, "m/s2": 1.0},
    "none": {},
}

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def _quantity(text: str, kind: str, path: str) -> float:
    m = re.fullmatch(rf"\s*({_NUM})\s*(\S*)\s*", text)
    if not m:
        raise ConfigError(f"{path}: cannot parse {text!r} as a number")
    value, unit = float(m.group(1)), m.group(2)
    if not unit:
        return value
    try:
        return value * _UNITS[kind][unit]
    except KeyError:
        allowed = ", ".join(_UNITS[kind]) or "none"
        raise ConfigError(f"{path}: unknown unit {unit!r} (allowed: {allowed})") from None


def _wavelength(text: str, species: Species, path: str) -> float:
    m = re.fullmatch(rf"\s*({_NUM})?\s*\*?\s*lambda_D2\s*", text)
    if m:
        return float(m.group(1) or 1.0) * species.lambda_res
    return _quantity(text, "length", path)


def _kick(text: str, species: Species, path: str) -> float:
    m = re.fullmatch(rf"\s*({_NUM})\s*\*?\s*hbar_?k\s*", text)
    if m:
        return kick_velocity(float(m.group(1)), species)
    return _quantity(text, "velocity", path)


def _floats(text: str, path: str, n: int | None = None) -> tuple:
    try:
        vals = tuple(float(v) for v in re.split(r"[,\s]+", text.strip()) if v)
    except ValueError:
        raise ConfigError(f"{path}: expected a list of numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"{path}: expected {n} values, got {len(vals)}")
    return vals


def _bool(text: str, path: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{path}: expected a boolean, got {text!r}")


def _positive(value, path, *, strict=True):
    if not (value > 0 if strict else value >= 0) or not math.isfinite(value):
        raise ConfigError(f"{path}: must be {'> 0' if strict else '>= 0'}, got {value!r}")
    return value


@dataclass(frozen=True)
class LatticeBlock:
    sigma_z: float
    wavelength: float
    detuning_ghz: float = 200.0
    xi: float | None = None
    P0: float | None = None
    I0: float | None = None
    z0: float = 20e-6
    g: float = 0.0

    @property
    def delta_ang(self) -> float:
        return detuning_angular(self.detuning_ghz * 1e9)


@dataclass(frozen=True)
class BECBlock:
    N: float = 1e5
    a_s_a0: float = 100.0
    trap_hz: tuple = (10.0, 70.0, 70.0)
    kick: float = 0.01  # m/s

    @property
    def a_s(self) -> float:
        return self.a_s_a0 * A0

    @property
    def trap(self) -> TrapConfig:
        return TrapConfig.from_hz(*self.trap_hz)


@dataclass(frozen=True)
class GridBlock:
    ground: tuple | str = (128, 64, 64)  # counts or "auto"
    ground_extent: tuple = (100e-6, 20e-6, 20e-6)
    window_periods: int = 2
    nx_window: int = 256
    z_extend: int = 1
    planar: bool = False
    envelope: str = "uniform"


@dataclass(frozen=True)
class AnalysisBlock:
    model: str = "voigt"
    threshold: float = 1.0 / math.e
    profile: str = "single"
    n_rays: int = 62400
    n_bins: int = 50
    velocity_time: float = 2e-3


@dataclass(frozen=True)
class BudgetBlock:
    sph: float | None = None
    f: float | None = None
    dF_dxi: float | None = None
    dv_z: float | None = None
    dv_x: float | None = None
    beta: float = 0.88


@dataclass(frozen=True)
class RunBlock:
    mode: str
    output: str = "out"
    interactions: str = "both"
    kicks: tuple = ()  # hbar k units
    powers: tuple = ()  # W
    workers: int = 1
    snapshots: bool = False
    velocities: bool = False


MODES = ("classical", "gpe", "budget", "sweep", "ground-state")


@dataclass(frozen=True)
class ExperimentConfig:
    lattice: LatticeBlock
    bec: BECBlock
    run: RunBlock
    species: Species = field(default_factory=rb87_d2_defaults)
    grid: GridBlock = field(default_factory=GridBlock)
    analysis: AnalysisBlock = field(default_factory=AnalysisBlock)
    budget: BudgetBlock = field(default_factory=BudgetBlock)

    def lattice_spec(self, v_z: float | None = None) -> LatticeSpec:
        """Resolved lattice for release speed ``v_z`` (default: the configured kick)."""
        lb = self.lattice
        v = self.bec.kick if v_z is None else v_z
        kw = dict(species=self.species, z0=lb.z0, g=lb.g, v0=v)
        if lb.xi is not None:
            return LatticeSpec.for_xi(lb.xi, v, lb.sigma_z, lb.wavelength, lb.delta_ang, **kw)
        I0 = lb.I0 if lb.I0 is not None else peak_intensity_from_power(lb.P0, lb.sigma_z)
        return LatticeSpec(I0=I0, sigma_z=lb.sigma_z, lam=lb.wavelength, delta_ang=lb.delta_ang, **kw)

    @property
    def P0(self) -> float:
        return power_from_peak_intensity(self.lattice_spec().I0, self.lattice.sigma_z)

    def ground_grid(self) -> Grid3D:
        gb = self.grid
        if gb.ground == "auto":
            from .gpe.grid import auto_grid
            from .gpe.groundstate import tf_chemical_potential, tf_radii
            from .gpe.state import BECConfig

            bec = BECConfig(N=self.bec.N, a_s=self.bec.a_s, species=self.species)
            mu = tf_chemical_potential(self.bec.trap, bec)
            return auto_grid(tf_radii(mu, self.bec.trap, self.species.mass))
        return Grid3D(*gb.ground, *gb.ground_extent)

    def with_(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

_SCHEMA = {
    "species": {"mass", "lambda_res", "gamma", "I_sat", "name"},
    "lattice": {"sigma_z", "wavelength", "detuning_ghz", "xi", "P0", "I0", "z0", "g"},
    "bec": {"N", "a_s", "trap_hz", "kick"},
    "grid": {"ground", "ground_extent", "window_periods", "nx_window", "z_extend", "planar", "envelope"},
    "analysis": {"model", "threshold", "profile", "n_rays", "n_bins", "velocity_time"},
    "budget": {"sph", "f", "dF_dxi", "dv_z", "dv_x", "beta"},
    "run": {"mode", "output", "interactions", "kicks", "powers", "workers", "snapshots", "velocities"},
}


def _reader(text: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str  # keys are case sensitive (P0, I0, N)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{section}: unknown section (allowed: {', '.join(_SCHEMA)})")
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
    return cp


def _get(cp, section, key, default=None):
    if cp.has_section(section) and key in cp[section]:
        return cp[section][key]
    return default


def _require(cp, section, key):
    v = _get(cp, section, key)
    if v is None:
        raise ConfigError(f"{section}.{key}: missing required key")
    return v


def _int(text, path):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{path}: expected an integer, got {text!r}") from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate configuration text; units are converted to SI."""
    cp = _reader(text)

    species = rb87_d2_defaults()
    if cp.has_section("species"):
        sp = cp["species"]
        try:
            species = Species(
                mass=_quantity(sp.get("mass", repr(species.mass)), "none", "species.mass"),
                lambda_res=_quantity(sp.get("lambda_res", repr(species.lambda_res)), "length", "species.lambda_res"),
                gamma=_quantity(sp.get("gamma", repr(species.gamma)), "none", "species.gamma"),
                I_sat=_quantity(sp.get("I_sat", repr(species.I_sat)), "intensity", "species.I_sat"),
                name=sp.get("name", ""),
            )
        except ValueError as exc:
            raise ConfigError(f"species: {exc}") from None

    # lattice
    strength = [k for k in ("xi", "P0", "I0") if _get(cp, "lattice", k) is not None]
    if len(strength) != 1:
        if strength:
            raise ConfigError(f"lattice.{' and lattice.'.join(strength)}: give exactly one of xi, P0, I0")
        raise ConfigError("lattice.xi: missing required key (or lattice.P0 / lattice.I0)")
    lattice = LatticeBlock(
        sigma_z=_positive(_quantity(_require(cp, "lattice", "sigma_z"), "length", "lattice.sigma_z"), "lattice.sigma_z"),
        wavelength=_positive(_wavelength(_require(cp, "lattice", "wavelength"), species, "lattice.wavelength"), "lattice.wavelength"),
        detuning_ghz=_quantity(_get(cp, "lattice", "detuning_ghz", "200"), "none", "lattice.detuning_ghz"),
        z0=_quantity(_get(cp, "lattice", "z0", "20e-6"), "length", "lattice.z0"),
        g=_quantity(_get(cp, "lattice", "g", "0"), "acceleration", "lattice.g"),
        **{
            k: _positive(_quantity(_get(cp, "lattice", k), {"xi": "none", "P0": "power", "I0": "intensity"}[k], f"lattice.{k}"), f"lattice.{k}", strict=k == "xi")
            for k in strength
        },
    )
    if lattice.detuning_ghz == 0:
        raise ConfigError("lattice.detuning_ghz: resonant beam, dipole formula invalid (delta = 0)")

    bec = BECBlock(
        N=_positive(_quantity(_get(cp, "bec", "N", "1e5"), "none", "bec.N"), "bec.N"),
        a_s_a0=_positive(_quantity(_get(cp, "bec", "a_s", "100"), "none", "bec.a_s"), "bec.a_s", strict=False),
        trap_hz=tuple(_positive(w, "bec.trap_hz", strict=False) for w in _floats(_get(cp, "bec", "trap_hz", "10, 70, 70"), "bec.trap_hz", 3)),
        kick=_positive(_kick(_require(cp, "bec", "kick"), species, "bec.kick"), "bec.kick"),
    )

    ground = _get(cp, "grid", "ground", "128, 64, 64").strip()
    grid = GridBlock(
        ground="auto" if ground == "auto" else tuple(int(v) for v in _floats(ground, "grid.ground", 3)),
        ground_extent=tuple(
            _positive(_quantity(v, "length", "grid.ground_extent"), "grid.ground_extent")
            for v in re.split(r"\s*,\s*", _get(cp, "grid", "ground_extent", "100 um, 20 um, 20 um").strip())
        ),
        window_periods=_int(_get(cp, "grid", "window_periods", "2"), "grid.window_periods"),
        nx_window=_int(_get(cp, "grid", "nx_window", "256"), "grid.nx_window"),
        z_extend=_int(_get(cp, "grid", "z_extend", "1"), "grid.z_extend"),
        planar=_bool(_get(cp, "grid", "planar", "false"), "grid.planar"),
        envelope=_get(cp, "grid", "envelope", "uniform").strip(),
    )
    if len(grid.ground_extent) != 3:
        raise ConfigError("grid.ground_extent: expected 3 values")
    if grid.envelope not in ("uniform", "local"):
        raise ConfigError(f"grid.envelope: must be 'uniform' or 'local', got {grid.envelope!r}")

    thr = _get(cp, "analysis", "threshold", "1/e").strip()
    analysis = AnalysisBlock(
        model=_get(cp, "analysis", "model", "voigt").strip(),
        threshold=1.0 / math.e if thr == "1/e" else _quantity(thr, "none", "analysis.threshold"),
        profile=_get(cp, "analysis", "profile", "single").strip(),
        n_rays=_int(_get(cp, "analysis", "n_rays", "62400"), "analysis.n_rays"),
        n_bins=_int(_get(cp, "analysis", "n_bins", "50"), "analysis.n_bins"),
        velocity_time=_positive(_quantity(_get(cp, "analysis", "velocity_time", "2e-3"), "none", "analysis.velocity_time"), "analysis.velocity_time"),
    )
    if analysis.model not in ("voigt", "gaussian"):
        raise ConfigError(f"analysis.model: must be 'voigt' or 'gaussian', got {analysis.model!r}")
    if analysis.profile not in ("single", "sweep"):
        raise ConfigError(f"analysis.profile: must be 'single' or 'sweep', got {analysis.profile!r}")
    if not 0 < analysis.threshold <= 1:
        raise ConfigError("analysis.threshold: must lie in (0, 1]")

    def opt(key, kind, **kw):
        v = _get(cp, "budget", key)
        return None if v is None else _positive(_quantity(v, kind, f"budget.{key}"), f"budget.{key}", **kw)

    dF = _get(cp, "budget", "dF_dxi")
    budget = BudgetBlock(
        sph=opt("sph", "length", strict=False),
        f=opt("f", "length"),
        dF_dxi=None if dF is None else _quantity(dF, "none", "budget.dF_dxi"),
        dv_z=opt("dv_z", "velocity", strict=False),
        dv_x=opt("dv_x", "velocity", strict=False),
        beta=_positive(_quantity(_get(cp, "budget", "beta", "0.88"), "none", "budget.beta"), "budget.beta"),
    )

    mode = _require(cp, "run", "mode").strip()
    if mode not in MODES:
        raise ConfigError(f"run.mode: must be one of {', '.join(MODES)}, got {mode!r}")
    inter = _get(cp, "run", "interactions", "both").strip()
    if inter not in ("both", "on", "off"):
        raise ConfigError(f"run.interactions: must be 'both', 'on' or 'off', got {inter!r}")
    kicks = _get(cp, "run", "kicks", "")
    powers = _get(cp, "run", "powers", "")
    run = RunBlock(
        mode=mode,
        output=_get(cp, "run", "output", "out").strip(),
        interactions=inter,
        kicks=tuple(_positive(k, "run.kicks") for k in _floats(kicks, "run.kicks")) if kicks.strip() else (),
        powers=tuple(_positive(_quantity(p, "power", "run.powers"), "run.powers") for p in re.split(r"\s*,\s*", powers.strip())) if powers.strip() else (),
        workers=_int(_get(cp, "run", "workers", "1"), "run.workers"),
        snapshots=_bool(_get(cp, "run", "snapshots", "false"), "run.snapshots"),
        velocities=_bool(_get(cp, "run", "velocities", "false"), "run.velocities"),
    )
    if run.workers < 1:
        raise ConfigError("run.workers: must be >= 1")
    if mode == "sweep" and not (run.kicks or run.powers):
        raise ConfigError("run.kicks: a sweep needs run.kicks and/or run.powers")

    return ExperimentConfig(lattice=lattice, bec=bec, run=run, species=species, grid=grid, analysis=analysis, budget=budget)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# --------------------------------------------------------------------------
# serialisation (SI numbers, lossless through repr)
# --------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(dump_config(c)) == c``."""
    out = []

    def section(name, items):
        out.append(f"[{name}]")
        out.extend(f"{k} = {_fmt(v)}" for k, v in items if v is not None)
        out.append("")

    sp = cfg.species
    section("species", [("mass", sp.mass), ("lambda_res", sp.lambda_res), ("gamma", sp.gamma), ("I_sat", sp.I_sat), ("name", sp.name or None)])
    lb = cfg.lattice
    section(
        "lattice",
        [("sigma_z", lb.sigma_z), ("wavelength", lb.wavelength), ("detuning_ghz", lb.detuning_ghz), ("xi", lb.xi), ("P0", lb.P0), ("I0", lb.I0), ("z0", lb.z0), ("g", lb.g)],
    )
    b = cfg.bec
    section("bec", [("N", b.N), ("a_s", b.a_s_a0), ("trap_hz", b.trap_hz), ("kick", b.kick)])
    section("grid", [(f.name, getattr(cfg.grid, f.name)) for f in fields(GridBlock)])
    a = cfg.analysis
    section("analysis", [(f.name, getattr(a, f.name)) for f in fields(AnalysisBlock)])
    section("budget", [(f.name, getattr(cfg.budget, f.name)) for f in fields(BudgetBlock)])
    r = cfg.run
    section("run", [(f.name, getattr(r, f.name) if getattr(r, f.name) != () else None) for f in fields(RunBlock)])
    return "\n".join(out)
