"""Dispatch configured experiments and record what they wrote.

Output units in every CSV and summary: positions in um, velocities in cm/s,
densities in atoms/um^2, powers in uW, intensities in W/m^2.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import aberration, classical
from .config import ExperimentConfig, dump_config
from .gpe.focus import FocusConfig, focus_run, prepare_ground_state, velocity_spread
from .gpe.state import BECConfig
from .lattice import power_from_peak_intensity, xi_for_power
from .physconst import H_PLANCK, kick_velocity
from .snapshot import write_snapshot

log = logging.getLogger(__name__)

UM = 1e6
CM_S = 1e2


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: str  # resolved configuration text
    version: str
    wall_time: float
    outputs: list = field(default_factory=list)  # [{"path", "sha256"}]
    warnings: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    assumptions: list = field(default_factory=list)

    def verify(self, root) -> bool:
        root = Path(root)
        return all((root / o["path"]).is_file() and sha256(root / o["path"]) == o["sha256"] for o in self.outputs)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_jsonable)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


class _Outputs:
    def __init__(self, root: Path):
        self.root = root
        self.files = []
        root.mkdir(parents=True, exist_ok=True)

    def path(self, name) -> Path:
        return self.root / name

    def add(self, name):
        self.files.append({"path": name, "sha256": sha256(self.root / name)})

    def write_csv(self, name, header, rows):
        with open(self.root / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        self.add(name)

    def write_json(self, name, obj):
        (self.root / name).write_text(json.dumps(obj, indent=2, default=_jsonable))
        self.add(name)


# --------------------------------------------------------------------------
# per-mode drivers
# --------------------------------------------------------------------------


def focus_config(cfg: ExperimentConfig, **overrides) -> FocusConfig:
    lb, gb, bb = cfg.lattice, cfg.grid, cfg.bec
    spec = cfg.lattice_spec()
    kw = dict(
        sigma_z=lb.sigma_z,
        v_z=bb.kick,
        lam=lb.wavelength,
        delta_ang=lb.delta_ang,
        z0=lb.z0,
        g=lb.g,
        N=bb.N,
        a_s=bb.a_s,
        trap=bb.trap,
        envelope=gb.envelope,
        ground_grid=cfg.ground_grid(),
        window_periods=gb.window_periods,
        nx_window=gb.nx_window,
        z_extend=gb.z_extend,
        planar=gb.planar,
        mode=cfg.analysis.profile,
        model=cfg.analysis.model,
        threshold=cfg.analysis.threshold,
    )
    if lb.xi is not None:
        kw.update(xi=lb.xi, P0=None)
    else:
        kw.update(xi=None, P0=power_from_peak_intensity(spec.I0, lb.sigma_z))
    kw.update(overrides)
    return FocusConfig(**kw)


def _run_classical(cfg, out, warnings):
    spec = cfg.lattice_spec()
    prof = classical.deposit(cfg.analysis.n_rays, spec, cfg.bec.kick, 0.0, n_bins=cfg.analysis.n_bins)
    centers = prof.bin_centers
    kde_at_bins = np.interp(centers, prof.kde_x, prof.kde_density)
    rows = [(c * UM, int(n), d / UM) for c, n, d in zip(centers, prof.counts, kde_at_bins)]
    out.write_csv("profile.csv", ["x_um", "count", "kde_density_per_um"], rows)
    out.write_csv("kde.csv", ["x_um", "kde_density_per_um"], [(x * UM, d / UM) for x, d in zip(prof.kde_x, prof.kde_density)])
    if prof.n_reflected:
        warnings.append(f"{prof.n_reflected} rays turned back before the focal plane")
    if prof.resolution_limited:
        warnings.append("KDE bandwidth at its floor: width is resolution limited")
    return {
        "fwhm_um": prof.fwhm * UM,
        "n_rays": cfg.analysis.n_rays,
        "n_reflected": prof.n_reflected,
        "bandwidth_um": prof.bandwidth * UM,
        "P0_uW": power_from_peak_intensity(spec.I0, spec.sigma_z) * UM,
        "I0_W_m2": spec.I0,
    }


def budget_terms(cfg: ExperimentConfig, *, ground_state=None) -> dict:
    """Aberration budget with configured overrides; missing terms are computed."""
    lb, bb, b = cfg.lattice, cfg.bec, cfg.budget
    spec = cfg.lattice_spec()
    xi = lb.xi if lb.xi is not None else _xi_of(spec, bb.kick)
    f = b.f if b.f is not None else classical.focal_length(xi, lb.sigma_z)
    dF = b.dF_dxi if b.dF_dxi is not None else classical.dF_dxi(xi)
    sph = b.sph if b.sph is not None else classical.deposit(cfg.analysis.n_rays, spec, bb.kick).fwhm
    dv_z, dv_x = b.dv_z, b.dv_x
    if dv_z is None or dv_x is None:
        bec = BECConfig(N=bb.N, a_s=bb.a_s, v_kick=bb.kick, species=cfg.species)
        gs = ground_state or prepare_ground_state(focus_config(cfg))
        vs = velocity_spread(gs, bec, cfg.analysis.velocity_time)
        dv_z = vs.dv_z if dv_z is None else dv_z
        dv_x = vs.dv_x if dv_x is None else dv_x
    diff = aberration.diffraction_fwhm(f, bb.kick, lb.wavelength, cfg.species, beta=b.beta)
    chrom = aberration.chromatic_fwhm(xi, dF, lb.sigma_z, lb.wavelength, f, dv_z, bb.kick)
    ang = aberration.angular_fwhm(f, dv_x, bb.kick)
    budget = aberration.assemble_budget(sph, diff, chrom, ang)
    return {
        "xi": xi,
        "f_um": f * UM,
        "dF_dxi": dF,
        "dv_z_cm_s": dv_z * CM_S,
        "dv_x_cm_s": dv_x * CM_S,
        **{f"{k}_um": v * UM for k, v in budget.as_dict().items()},
    }


def _xi_of(spec, v):
    return xi_for_power(spec.P0, 0.5 * spec.species.mass * v * v, spec)


def _run_budget(cfg, out, warnings):
    summary = budget_terms(cfg)
    out.write_csv("budget.csv", ["term", "value_um"], [(k[:-3], v) for k, v in summary.items() if k.endswith("_um") and k != "f_um"])
    return summary


def _interaction_settings(cfg):
    return {"both": (True, False), "on": (True,), "off": (False,)}[cfg.run.interactions]


def _run_ground_state(cfg, out, warnings):
    gs = prepare_ground_state(focus_config(cfg))
    if cfg.run.snapshots:
        write_snapshot(out.path("ground_state.bin"), gs.wavefunction)
        out.add("ground_state.bin")
    return {"mu_h_Hz": gs.mu / H_PLANCK, "mu_tf_h_Hz": gs.mu_tf / H_PLANCK, "virial_residual": gs.virial_residual, "steps": gs.steps}, gs


def _run_gpe(cfg, out, warnings):
    summary, gs = _run_ground_state(cfg, out, warnings)
    columns, names = [], []
    x = None
    for inter in _interaction_settings(cfg):
        tag = "int" if inter else "non"
        res = focus_run(focus_config(cfg, interacting=inter), gs)
        x = res.x
        columns.append(res.profile)
        names.append(f"density_{tag}_atoms_um2")
        summary[f"fwhm_{tag}_um"] = res.fwhm * UM
        summary[f"peak_{tag}_atoms_um2"] = res.peak_density
        summary[f"dt_study_{tag}"] = [(dt, pl, m * UM) for dt, pl, m in res.dt_study]
        warnings.extend(f"{tag}: {w}" for w in res.warnings)
    if "fwhm_int_um" in summary and "fwhm_non_um" in summary:
        summary["fwhm_ratio"] = summary["fwhm_int_um"] / summary["fwhm_non_um"]
    out.write_csv("profile.csv", ["x_um", *names], [(xi * UM, *vals) for xi, *vals in zip(x, *columns)])
    if cfg.run.velocities:
        bb = cfg.bec
        vs = velocity_spread(gs, BECConfig(N=bb.N, a_s=bb.a_s, v_kick=bb.kick, species=cfg.species), cfg.analysis.velocity_time)
        summary["dv_z_cm_s"] = vs.dv_z * CM_S
        summary["dv_x_cm_s"] = vs.dv_x * CM_S
        out.write_csv("velocity_z.csv", ["v_cm_s", "density_per_cm_s"], zip(vs.marginal_z.v * CM_S, vs.marginal_z.density / CM_S))
        out.write_csv("velocity_x.csv", ["v_cm_s", "density_per_cm_s"], zip(vs.marginal_x.v * CM_S, vs.marginal_x.density / CM_S))
        warnings.extend(f"velocity: {w}" for w in vs.warnings)
    return summary


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

SWEEP_COLUMNS = ["kick_hbar_k", "v_z_cm_s", "P0_uW", "I0_W_m2", "fwhm_um", "peak_atoms_um2", "status", "error"]


@dataclass(frozen=True)
class SweepPoint:
    kick_hbar_k: float
    P0: float | None  # None: optimal power for the kick


def sweep_points(cfg: ExperimentConfig) -> list[SweepPoint]:
    """Kick list at optimal power, or the kick x power grid for fixed-power scans."""
    kicks = cfg.run.kicks or (None,)
    if not cfg.run.powers:
        return [SweepPoint(k, None) for k in kicks]
    return [SweepPoint(k, p) for k in kicks for p in cfg.run.powers]


def _sweep_worker(args):
    fc, gs, point = args
    try:
        res = focus_run(fc, gs)
        spec = fc.lattice()
        return (point.kick_hbar_k, fc.v_z * CM_S, power_from_peak_intensity(spec.I0, fc.sigma_z) * UM, spec.I0, res.fwhm * UM, res.peak_density, "ok", "")
    except Exception as exc:  # per-point failures are recorded, the sweep continues
        log.debug("sweep point failed:\n%s", traceback.format_exc())
        return (point.kick_hbar_k, fc.v_z * CM_S, float("nan"), float("nan"), float("nan"), float("nan"), "failed", f"{type(exc).__name__}: {exc}")


def sweep(cfg: ExperimentConfig, *, ground_state=None, workers: int | None = None) -> list[tuple]:
    """Run every sweep point; rows come back in input order.

    For kick sweeps with ``xi`` the beam power is recomputed per kick; for
    power sweeps the configured power is used as is.
    """
    points = sweep_points(cfg)
    base = focus_config(cfg, mode="sweep")
    gs = ground_state or prepare_ground_state(base)
    jobs = []
    for p in points:
        v = kick_velocity(p.kick_hbar_k, cfg.species) if p.kick_hbar_k is not None else cfg.bec.kick
        # with xi the power follows the kick through FocusConfig.lattice()
        fc = base.with_(v_z=v, xi=None, P0=p.P0) if p.P0 is not None else base.with_(v_z=v)
        jobs.append((fc, gs, p))
    workers = workers or cfg.run.workers
    if workers == 1:
        return [_sweep_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_worker, jobs))


def _run_sweep(cfg, out, warnings):
    rows = sweep(cfg)
    out.write_csv("sweep.csv", SWEEP_COLUMNS, rows)
    failed = [r for r in rows if r[6] != "ok"]
    if failed:
        warnings.append(f"{len(failed)} of {len(rows)} sweep points failed")
    return {"points": len(rows), "failed": len(failed)}


RELEASE_ASSUMPTION = (
    "release: the trap is switched off at t=0 and the cloud starts from the trapped ground state "
    "with the configured kick along z; y/z release details beyond the trap frequencies are not "
    "specified for long approach distances and are taken to be the same as for z0 = 20 um"
)


def _assumptions(cfg: ExperimentConfig) -> list[str]:
    if cfg.run.mode in ("gpe", "sweep") and cfg.lattice.z0 > 20e-6 * (1 + 1e-9):
        return [RELEASE_ASSUMPTION + f" (here z0 = {cfg.lattice.z0 * UM:g} um)"]
    return []


_DRIVERS = {
    "classical": _run_classical,
    "budget": _run_budget,
    "gpe": _run_gpe,
    "sweep": _run_sweep,
    "ground-state": lambda cfg, out, w: _run_ground_state(cfg, out, w)[0],
}


def run(cfg: ExperimentConfig, output: str | Path | None = None) -> RunManifest:
    """Execute ``cfg.run.mode`` and write summary, outputs and manifest to ``output``."""
    t0 = time.perf_counter()
    out = _Outputs(Path(output or cfg.run.output))
    warnings: list[str] = []
    resolved = dump_config(cfg)
    (out.path("config.resolved.ini")).write_text(resolved)
    out.add("config.resolved.ini")
    summary = _DRIVERS[cfg.run.mode](cfg, out, warnings)
    summary = {"mode": cfg.run.mode, **summary}
    out.write_json("summary.json", summary)
    manifest = RunManifest(config=resolved, version=code_version(), wall_time=time.perf_counter() - t0, outputs=out.files, warnings=warnings, summary=summary, assumptions=_assumptions(cfg))
    out.path("manifest.json").write_text(manifest.to_json())
    return manifest
