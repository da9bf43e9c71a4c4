"""Classical atomic trajectories through the standing-wave lens.

Two levels of description are provided:

* :func:`paraxial_trace` integrates the dimensionless paraxial ray equation
  ``u'' + xi * exp(-2 zeta^2) * u = 0`` (``zeta = z / sigma_z``) and builds the
  focal map ``F(xi)`` used by the chromatic-aberration estimate;
* :func:`trace_full` / :func:`deposit` integrate Newton's equations in time in
  the full dipole potential, giving spherical-aberration limited deposition
  profiles.

Atoms travel from ``z > 0`` towards ``z < 0`` everywhere in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853, solve_ivp

from .lattice import LatticeSpec, dipole_force, dipole_potential, xi_for_power
from .profiles import kde

__all__ = [
    "FocusBeyondWindow",
    "StiffTrajectoryError",
    "FocalMapEntry",
    "Trajectory",
    "DepositionProfile",
    "paraxial_trace",
    "focal_map",
    "dF_dxi",
    "focal_length",
    "trace_full",
    "deposit",
]

ZETA_START = 4.0
ZETA_END = -8.0


class FocusBeyondWindow(RuntimeError):
    """The paraxial ray never crossed the axis inside the integration window."""

    def __init__(self, xi, exit_slope):
        super().__init__(f"focus beyond window for xi={xi:g} (exit slope {exit_slope:.3e})")
        self.xi = xi
        self.exit_slope = exit_slope


class StiffTrajectoryError(RuntimeError):
    pass


@dataclass(frozen=True)
class FocalMapEntry:
    """Paraxial focal properties, all lengths in units of ``sigma_z``.

    ``zf`` is the axis crossing, ``principal_plane`` the plane where the ray
    tangent at the crossing reaches the incoming ray height, and ``F`` their
    separation.
    """

    xi: float
    F: float
    zf: float
    principal_plane: float
    crossing_slope: float


def _paraxial_rhs(xi):
    def rhs(zeta, y):
        return (y[1], -xi * math.exp(-2.0 * zeta * zeta) * y[0])

    return rhs


def paraxial_trace(xi: float, *, zeta_start: float = ZETA_START, zeta_end: float = ZETA_END, rtol: float = 1e-12) -> FocalMapEntry:
    """Trace the unit paraxial ray (u=1, u'=0 at ``zeta_start``) towards decreasing zeta.

    Raises
    ------
    FocusBeyondWindow
        When ``u`` does not cross zero before ``zeta_end``.
    """
    if not xi > 0:
        raise ValueError(f"xi must be > 0, got {xi!r}")

    def crossing(zeta, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1

    sol = solve_ivp(
        _paraxial_rhs(xi),
        (zeta_start, zeta_end),
        (1.0, 0.0),
        method="DOP853",
        rtol=rtol,
        atol=rtol * 1e-2,
        events=crossing,
    )
    if not sol.t_events[0].size:
        raise FocusBeyondWindow(xi, float(sol.y[1, -1]))
    zf = float(sol.t_events[0][0])
    slope = float(sol.y_events[0][0][1])
    # slope is du/dzeta along decreasing zeta; the back-extrapolated tangent
    # reaches u = 1 a distance 1/|slope| upstream of the crossing
    F = 1.0 / abs(slope)
    return FocalMapEntry(xi=xi, F=F, zf=zf, principal_plane=zf + F, crossing_slope=slope)


def focal_map(xis) -> list[FocalMapEntry]:
    return [paraxial_trace(float(xi)) for xi in np.atleast_1d(xis)]


def dF_dxi(xi: float, step: float = 1e-2) -> float:
    """Central-difference slope of the focal map at ``xi``."""
    hi = paraxial_trace(xi + step).F
    lo = paraxial_trace(xi - step).F
    return (hi - lo) / (2.0 * step)


def focal_length(xi: float, sigma_z: float) -> float:
    """Physical focal length F(xi) * sigma_z [m]."""
    return paraxial_trace(xi).F * sigma_z


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    vx: np.ndarray
    vz: np.ndarray
    spec: LatticeSpec = field(repr=False)

    def energy(self) -> np.ndarray:
        m = self.spec.species.mass
        return 0.5 * m * (self.vx**2 + self.vz**2) + dipole_potential(self.spec, self.x, self.z)


def _newton_rhs(spec: LatticeSpec):
    m = spec.species.mass

    def rhs(t, y):
        n = y.size // 4
        x, z = y[:n], y[n : 2 * n]
        fx, fz = dipole_force(spec, x, z)
        return np.concatenate((y[2 * n : 3 * n], y[3 * n :], fx / m, fz / m))

    return rhs


def trace_full(
    x0: float,
    z_start: float,
    v_z: float,
    spec: LatticeSpec,
    z_f: float = 0.0,
    *,
    rtol: float = 1e-10,
) -> Trajectory:
    """Integrate one ray in the full dipole potential until it reaches ``z = z_f``.

    The ray enters parallel to the axis with speed ``v_z`` heading to -z.
    """
    if not v_z > 0:
        raise ValueError("v_z must be positive")
    if z_start <= z_f:
        raise ValueError("z_start must lie above the target plane z_f")

    def plane(t, y):
        return y[1] - z_f

    plane.terminal = True
    plane.direction = -1
    t_max = 4.0 * (z_start - z_f) / v_z
    sol = solve_ivp(
        _newton_rhs(spec),
        (0.0, t_max),
        np.array([x0, z_start, 0.0, -v_z]),
        method="DOP853",
        rtol=rtol,
        atol=_atol(spec, v_z, rtol),
        events=plane,
    )
    if sol.status == -1:
        raise StiffTrajectoryError(f"stiff trajectory from x0={x0:g}: {sol.message}")
    t, y = sol.t, sol.y
    if sol.t_events[0].size:
        t = np.append(t, sol.t_events[0][0])
        y = np.column_stack([y, sol.y_events[0][0]])
    return Trajectory(t=t, x=y[0], z=y[1], vx=y[2], vz=y[3], spec=spec)


def _atol(spec, v_z, rtol, n=1):
    # per-component floors: positions scale with the lattice period, speeds with v_z
    length = rtol * 1e-3 * min(spec.lam, spec.sigma_z)
    speed = rtol * 1e-3 * v_z
    return np.repeat([length, length, speed, speed], n)


def _arrivals(x0, z_start, v_z, spec, z_f, rtol):
    """Arrival x at the plane z_f for a bundle of parallel rays.

    All rays share one adaptive Dormand-Prince 8(5,3) step sequence; plane
    crossings are located on the step's dense-output polynomial.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    y0 = np.concatenate((x0, np.full(n, z_start), np.zeros(n), np.full(n, -v_z)))
    t_max = 4.0 * (z_start - z_f) / v_z
    solver = DOP853(_newton_rhs(spec), 0.0, y0, t_max, rtol=rtol, atol=_atol(spec, v_z, rtol, n))
    x_f = np.full(n, np.nan)
    done = np.zeros(n, dtype=bool)
    reflected = np.zeros(n, dtype=bool)
    z_prev = y0[n : 2 * n].copy()
    while not done.all():
        if solver.status != "running":
            break
        msg = solver.step()
        if solver.status == "failed":
            raise StiffTrajectoryError(f"stiff trajectory bundle: {msg}")
        y = solver.y
        z_now = y[n : 2 * n]
        hit = (~done) & (z_now <= z_f) & (z_prev > z_f)
        if hit.any():
            x_f[hit] = _locate_crossing(solver.dense_output(), solver.t_old, solver.t, hit, n, z_f)
            done |= hit
        turned = (~done) & (y[3 * n :] >= 0.0)
        reflected |= turned
        done |= turned
        z_prev = z_now.copy()
    reflected |= ~done
    return x_f, reflected


def _locate_crossing(interp, t_lo, t_hi, hit, n, z_f, samples=65):
    idx = np.flatnonzero(hit)
    ts = np.linspace(t_lo, t_hi, samples)
    vals = interp(ts)
    z = vals[n + idx]
    x = vals[idx]
    below = z <= z_f
    j = np.argmax(below, axis=1)
    j = np.maximum(j, 1)
    r = np.arange(idx.size)
    z_a, z_b = z[r, j - 1], z[r, j]
    w = (z_a - z_f) / (z_a - z_b)
    return x[r, j - 1] + w * (x[r, j] - x[r, j - 1])


@dataclass
class DepositionProfile:
    x_f: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray
    kde_x: np.ndarray
    kde_density: np.ndarray
    fwhm: float
    bandwidth: float
    n_reflected: int
    resolution_limited: bool = False

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


def deposit(
    n_rays: int,
    spec: LatticeSpec,
    v_z: float,
    z_f: float = 0.0,
    *,
    slit: tuple[float, float] | None = None,
    z_start: float | None = None,
    n_bins: int = 50,
    bandwidth="silverman",
    mode: str = "full",
    chunk: int = 16384,
    rtol: float = 1e-10,
) -> DepositionProfile:
    """Deposit a uniform fan of parallel rays through one lattice slit.

    ``mode="full"`` integrates Newton's equations in the full potential from
    ``z_start`` (default ``spec.z0``); ``mode="paraxial"`` maps the rays through
    the ideal harmonic lens instead.  Rays that turn back before the plane are
    counted in ``n_reflected`` and excluded from the statistics.
    """
    if n_rays < 100:
        raise ValueError("deposit needs at least 100 rays")
    lo, hi = slit if slit is not None else (-spec.lam / 4, spec.lam / 4)
    z_start = spec.z0 if z_start is None else z_start
    width = hi - lo
    x0 = lo + (np.arange(n_rays) + 0.5) * width / n_rays

    if mode == "full":
        parts = [_arrivals(x0[i : i + chunk], z_start, v_z, spec, z_f, rtol) for i in range(0, n_rays, chunk)]
        x_f = np.concatenate([p[0] for p in parts])
        reflected = np.concatenate([p[1] for p in parts])
    elif mode == "paraxial":
        x_f = x0 * _paraxial_height(spec, v_z, z_start, z_f)
        reflected = np.zeros(n_rays, dtype=bool)
    else:
        raise ValueError(f"unknown deposit mode {mode!r}")

    arrived = x_f[~reflected]
    counts, edges = np.histogram(arrived, bins=n_bins, range=(lo, hi))
    bin_width = width / n_bins
    # floor only matters for (near) degenerate arrivals such as the ideal lens
    est = kde(arrived, bandwidth=bandwidth, min_bandwidth=0.1 * bin_width, support=(lo, hi))
    return DepositionProfile(
        x_f=x_f,
        bin_edges=edges,
        counts=counts,
        kde_x=est.x,
        kde_density=est.density,
        fwhm=est.fwhm,
        bandwidth=est.bandwidth,
        n_reflected=int(reflected.sum()),
        resolution_limited=est.resolution_limited,
    )


def _paraxial_height(spec: LatticeSpec, v_z: float, z_start: float, z_f: float) -> float:
    """Height u(z_f) of the unit paraxial ray launched parallel at z_start."""
    E0 = 0.5 * spec.species.mass * v_z**2
    xi = xi_for_power(spec.P0, E0, spec)
    sol = solve_ivp(
        _paraxial_rhs(xi),
        (z_start / spec.sigma_z, z_f / spec.sigma_z),
        (1.0, 0.0),
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
    )
    return float(sol.y[0, -1])
