"""Blow-up diagnostics and the experiment runner: scaling-symmetry
rescaling, the small-scale vanishing pairing, compensated lower-bound
monitors, energy ledgers, and archived experiment runs.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field as dc_field, asdict

import numpy as np
from scipy.integrate import simpson

from .besov import (BesovIndex, DyadicPartition, Trajectory, besov_norm,
                    critical_exponent, default_partition)
from .errors import ConfigError, GridError, PicardDivergenceError
from .heat import _pl_weights
from .solver import (SolverConfig, _forcing_stack, mild_solve_nse,
                     mild_solve_perturbed, mollified_solve,
                     solve_with_continuation)
from .spectral import (Grid, Mollifier, SpectralField, divergence_residual,
                       read_clf1, write_clf1)

CONFIG_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------
# Rescaling:  u'(x, t) = lam * u(lam x + x0, t0 + lam^2 t)
# ---------------------------------------------------------------------

def _power_of_two_exponent(lam: float) -> int:
    m = round(math.log2(lam))
    if abs(lam - 2.0**m) > 1e-12 * lam:
        raise ConfigError(f"scaling factor must be a power of 2, got {lam}")
    return m


def rescale(field: SpectralField, lam: float,
            x0=None) -> SpectralField:
    """Scaling symmetry on a field: u' = lam u(lam x + x0).

    Realized without resampling by shrinking the box to L/lam: the
    coefficient at integer index k keeps its index but its physical
    frequency becomes lam * xi_k, and is multiplied by
    lam * exp(i xi_k . x0).  lam must be a power of 2 and x0 a
    grid-point shift.  In 3D the critical Besov norm is exactly
    invariant; in 2D it scales by lam^{1/p} (the volume factor).
    """
    grid = field.grid
    _power_of_two_exponent(lam)
    new_grid = Grid(grid.dim, grid.n, grid.box_length / lam)
    phase = 1.0
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (grid.dim,):
            raise ConfigError("x0 must have one entry per axis")
        h = grid.box_length / grid.n
        if np.max(np.abs(x0 / h - np.round(x0 / h))) > 1e-9:
            raise ConfigError("x0 must be a grid-point shift")
        phase = np.exp(1j * np.einsum("i...,i->...",
                                      grid.wavevectors, x0))
    coeffs = lam * field.coeffs * phase
    return SpectralField(new_grid, field.rank, coeffs, check_hermitian=False)


def rescale_trajectory(traj: Trajectory, lam: float, x0=None,
                       t0: float = 0.0) -> Trajectory:
    """Rescale a trajectory: samples with t >= t0 map to (t - t0)/lam^2."""
    keep = traj.times >= t0 - 1e-15
    if not np.any(keep):
        raise ConfigError(f"no samples at or after t0 = {t0}")
    times = (traj.times[keep] - t0) / lam**2
    times = np.maximum(times, 0.0)
    fields = [rescale(f, lam, x0)
              for f, k in zip(traj.fields, keep) if k]
    return Trajectory(fields[0].grid, times, fields)


# ---------------------------------------------------------------------
# Vanishing pairing  <u, lam^{-2} phi(./lam)>
# ---------------------------------------------------------------------

def vanishing_test(field: SpectralField, lambdas,
                   profile=None) -> np.ndarray:
    """Pairing series int u(x) . lam^{-2} phi(x/lam) dx by direct
    grid quadrature, phi centered at the origin (periodic distance).

    ``lambdas`` must be powers of 2 between twice the grid spacing and
    half the box.  For fixed smooth u the series decays as lam drops
    (like lam^{dim-2} once phi(./lam) concentrates).  Returns the
    Euclidean magnitude of the componentwise pairings per lam.
    """
    grid = field.grid
    if profile is None:
        profile = Mollifier(grid.dim, 1.0).profile
    h = grid.box_length / grid.n
    lambdas = np.asarray(lambdas, dtype=float)
    for lam in lambdas:
        _power_of_two_exponent(lam)
        if lam < 2.0 * h:
            raise GridError(f"lambda {lam} below grid resolution {h}")
        if lam > grid.box_length / 2.0:
            raise GridError(f"lambda {lam} exceeds half the box")
    mesh = grid.physical_mesh()
    centered = [np.where(x > grid.box_length / 2.0, x - grid.box_length, x)
                for x in mesh]
    r = np.sqrt(sum(c**2 for c in centered))
    phys = field.to_physical()
    if field.rank == "scalar":
        phys = phys[None]
    out = np.empty(lambdas.size)
    for i, lam in enumerate(lambdas):
        w = profile(r / lam) / lam**2
        pair = grid.cell_volume * np.sum(phys * w, axis=tuple(range(1, phys.ndim)))
        out[i] = float(np.sqrt(np.sum(pair**2)))
    return out


# ---------------------------------------------------------------------
# Compensated lower-bound monitor
# ---------------------------------------------------------------------

def leray_monitor(traj: Trajectory, ps, t_end: float) -> dict:
    """Series ||u(t)||_p * (t_end - t)^{(1 - 3/p)/2} per exponent p.

    Requires 3 < p <= inf for every entry; a profile saturating the
    lower bound gives a constant series, decay rules blow-up out at
    t_end.
    """
    for p in ps:
        if not p > 3.0:
            raise ConfigError(f"monitor exponents must satisfy p > 3, got {p}")
    if traj.times[-1] > t_end + 1e-12:
        raise ConfigError("trajectory extends past t_end")
    out = {}
    for p in ps:
        expo = (1.0 - (0.0 if math.isinf(p) else 3.0 / p)) / 2.0
        gap = np.maximum(t_end - traj.times, 0.0)
        out[p] = np.array([g**expo * f.lp_norm(p)
                           for g, f in zip(gap, traj.fields)])
    return out


# ---------------------------------------------------------------------
# Energy ledger
# ---------------------------------------------------------------------

@dataclass
class LedgerReport:
    """Interval-by-interval energy balance of a sampled solution.

    slack[i] = E(t_i) - E(t_{i+1}) - D_i + W_i where E = ||u||_2^2 / 2,
    D_i the dissipation integral and W_i the forcing work over the
    interval; exact balances give slack ~ 0, and the energy inequality
    requires slack >= -tolerance.
    """

    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    work: np.ndarray
    slacks: np.ndarray
    scale: float

    @property
    def min_slack(self) -> float:
        return float(np.min(self.slacks))

    @property
    def max_abs_slack(self) -> float:
        return float(np.max(np.abs(self.slacks)))


def _ledger_forcing(grid: Grid, u_stack: np.ndarray, nonlinearity: str,
                    rho: float | None, background) -> np.ndarray:
    if nonlinearity == "none":
        return np.zeros_like(u_stack)
    mult = None
    if nonlinearity == "mollified":
        if rho is None:
            raise ConfigError("mollified ledger needs rho")
        moll = Mollifier(grid.dim, rho)
        mult = moll.hat(rho * grid.xi_abs.ravel()).reshape(grid.shape)
    elif nonlinearity != "nse":
        raise ConfigError(f"unknown nonlinearity {nonlinearity!r}")
    g = -_forcing_stack(grid, u_stack, u_stack, w_multiplier=mult)
    if background is not None:
        v_stack = np.stack([f.coeffs for f in background.fields])
        g = g - _forcing_stack(grid, u_stack, v_stack) \
            - _forcing_stack(grid, v_stack, u_stack)
    return g


def energy_ledger(traj: Trajectory, background: Trajectory | None = None,
                  nonlinearity: str = "nse", rho: float | None = None,
                  substeps: int = 32,
                  g_stack: np.ndarray | None = None) -> LedgerReport:
    """Energy balance of a trajectory produced by the exponential
    piecewise-linear-forcing quadrature.

    Within each sample interval the solution is reconstructed exactly
    from the quadrature model u' = Lap u + g with g linear in time, so
    the only ledger error is the composite Simpson rule on ``substeps``
    subintervals (even, >= 2): residuals shrink like substeps^{-4}.
    The forcing is recomputed from the fields (plain, mollified, or
    none, plus optional background coupling) unless ``g_stack`` is
    given explicitly.
    """
    if substeps < 2 or substeps % 2 != 0:
        raise ConfigError("substeps must be even and >= 2")
    grid = traj.grid
    times = traj.times
    if background is not None and (len(background) != len(traj) or
                                   not np.allclose(background.times, times)):
        raise ConfigError("background must share the trajectory schedule")
    u_stack = np.stack([f.coeffs for f in traj.fields])
    if g_stack is None:
        g_stack = _ledger_forcing(grid, u_stack, nonlinearity, rho, background)
    vol = grid.volume
    xi_sq = grid.xi_sq
    energy = 0.5 * vol * np.sum(np.abs(u_stack) ** 2,
                                axis=tuple(range(1, u_stack.ndim)))
    n_int = times.size - 1
    diss = np.zeros(n_int)
    work = np.zeros(n_int)
    fracs = np.linspace(0.0, 1.0, substeps + 1)
    for i in range(n_int):
        dt = times[i + 1] - times[i]
        a = u_stack[i]
        g0, g1 = g_stack[i], g_stack[i + 1]
        d_vals = np.empty(substeps + 1)
        w_vals = np.empty(substeps + 1)
        for r, f in enumerate(fracs):
            tau = f * dt
            gl = g0 + (g1 - g0) * f
            alpha, beta = _pl_weights(xi_sq * tau)
            u_tau = np.exp(-xi_sq * tau) * a + tau * (alpha * g0 + beta * gl)
            d_vals[r] = vol * np.sum(xi_sq * np.abs(u_tau) ** 2)
            w_vals[r] = vol * np.sum(np.real(gl * np.conj(u_tau)))
        nodes = fracs * dt
        diss[i] = float(simpson(d_vals, x=nodes))
        work[i] = float(simpson(w_vals, x=nodes))
    slacks = energy[:-1] - energy[1:] - diss + work
    scale = float(np.max(energy) + np.sum(diss)) if n_int else float(np.max(energy))
    return LedgerReport(times=times, energy=energy, dissipation=diss,
                        work=work, slacks=slacks, scale=max(scale, 1e-300))


def critical_norm_series(traj: Trajectory, p: float,
                         partition: DyadicPartition | None = None) -> np.ndarray:
    """Critical Besov norm of every sample."""
    partition = partition or default_partition(traj.grid)
    idx = BesovIndex(critical_exponent(p), p, p)
    return np.array([besov_norm(f.zero_mean(), idx, partition).value
                     for f in traj.fields])


# ---------------------------------------------------------------------
# Experiment runner
# ---------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """One archived run: data recipe, grid, horizon, solver, diagnostics.

    ``recipe`` is a dict: {"family": "taylor-green" | "abc" | "random"
    | "file", ...parameters}.  ``solver`` is "direct",
    "split-perturbed", or "mollified".
    """

    dim: int
    n: int
    box_length: float
    horizon: float
    recipe: dict
    solver: str = "direct"
    out_dir: str | None = None
    monitor_ps: tuple = (4.0,)
    besov_p: float = 4.0
    rho: float = 0.5
    split_p: float = 4.0
    split_q: float = 8.0
    split_lambda: float = 1.0
    seed: int = 0
    n_geometric: int = 24
    n_uniform: int = 24
    measure_probes: int = 8

    def to_json(self) -> str:
        d = {"clab_config": CONFIG_SCHEMA_VERSION}
        d.update(asdict(self))
        d["monitor_ps"] = list(self.monitor_ps)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        d = json.loads(text)
        if d.pop("clab_config", None) != CONFIG_SCHEMA_VERSION:
            raise ConfigError("missing or unsupported clab_config version")
        d["monitor_ps"] = tuple(d.get("monitor_ps", (4.0,)))
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc


@dataclass
class DiagnosticsReport:
    """Per-sample diagnostic series of one run, all on shared timestamps."""

    times: np.ndarray
    status: str
    lp_series: dict = dc_field(default_factory=dict)
    besov_series: np.ndarray | None = None
    leray_series: dict = dc_field(default_factory=dict)
    energy_slacks: np.ndarray | None = None
    div_residuals: np.ndarray | None = None
    t_end: float = float("nan")
    meta: dict = dc_field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "status": self.status,
            "t_end": self.t_end,
            "n_samples": int(self.times.size),
            "max_div_residual": (float(np.max(self.div_residuals))
                                 if self.div_residuals is not None else None),
            "min_energy_slack": (float(np.min(self.energy_slacks))
                                 if self.energy_slacks is not None
                                 and self.energy_slacks.size else None),
            **self.meta,
        }


def _resolve_recipe(grid: Grid, recipe: dict, seed: int) -> SpectralField:
    from . import families

    kind = recipe.get("family")
    params = {k: v for k, v in recipe.items() if k != "family"}
    if kind == "taylor-green":
        return families.taylor_green(grid, **params)
    if kind == "abc":
        return families.abc_flow(grid, **params)
    if kind == "random":
        params.setdefault("alpha", 2.0)
        params.setdefault("seed", seed)
        params.setdefault("amplitude", 1.0)
        return families.random_power_law(grid, **params)
    if kind == "zero":
        return SpectralField.zero(grid, "vector")
    if kind == "file":
        f = read_clf1(params["path"])
        if f.grid != grid:
            raise ConfigError("field file grid does not match the config")
        return f
    raise ConfigError(f"unknown data family {kind!r}")


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write-temp-then-rename so partial files never appear."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _series_csv(times: np.ndarray, columns: dict) -> str:
    names = ["time"] + list(columns)
    lines = [",".join(names)]
    for i, t in enumerate(times):
        row = [repr(float(t))] + [repr(float(columns[c][i])) for c in columns]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _run_solver(config: ExperimentConfig, grid: Grid,
                u0: SpectralField):
    """Returns (trajectory, status, ledger_nonlinearity, meta)."""
    sc = SolverConfig(grid=grid, horizon=config.horizon,
                      n_geometric=config.n_geometric,
                      n_uniform=config.n_uniform,
                      measure_probes=config.measure_probes)
    meta = {}
    if config.solver == "direct":
        res = solve_with_continuation(u0, sc)
        meta["segments"] = [float(s) for s in res.segment_horizons]
        return res.trajectory, res.status, "nse", meta
    if config.solver == "mollified":
        sol = mollified_solve(u0, None, None, config.rho, sc)
        meta["picard_iterations"] = sol.report.iterations
        meta["residual_doubled"] = sol.residual_doubled
        return sol.trajectory, "completed", "mollified", meta
    if config.solver == "split-perturbed":
        from .calderon import SplitConfig, split

        partition = default_partition(grid)
        scfg = SplitConfig(config.split_p, config.split_q, config.split_lambda)
        parts = split(u0, scfg, partition)
        v_sol = mild_solve_nse(parts.small, sc)
        w_sol = mild_solve_perturbed(parts.large, v_sol.trajectory, sc)
        fields = [a + b for a, b in zip(v_sol.trajectory.fields,
                                        w_sol.trajectory.fields)]
        traj = Trajectory(grid, v_sol.trajectory.times, fields)
        meta["l2_large"] = parts.l2_large
        meta["besov_small"] = parts.besov_small
        return traj, "completed", "nse", meta
    raise ConfigError(f"unknown solver {config.solver!r}")


def run_experiment(config: ExperimentConfig) -> DiagnosticsReport:
    """Run one solver experiment, compute diagnostics, archive results.

    Status is 'completed', 'blow-up suspected', or 'numerical failure'
    (residual gates: divergence-free and energy-slack checks).  When
    ``out_dir`` is set the archive holds manifest.json, per-series CSV
    files, and the sampled fields as CLF1.
    """
    grid = Grid(config.dim, config.n, config.box_length)
    u0 = _resolve_recipe(grid, config.recipe, config.seed)
    try:
        traj, status, ledger_mode, meta = _run_solver(config, grid, u0)
    except PicardDivergenceError as exc:
        raise PicardDivergenceError(
            f"solver diverged: {exc}", norms=exc.norms, diffs=exc.diffs)

    t_end = float(traj.times[-1]) if status != "completed" else config.horizon
    report = DiagnosticsReport(times=traj.times, status=status, t_end=t_end,
                               meta=meta)
    for p in config.monitor_ps:
        report.lp_series[p] = traj.lp_series(p)
    report.besov_series = critical_norm_series(traj, config.besov_p)
    report.leray_series = leray_monitor(traj, config.monitor_ps, t_end)
    ledger = energy_ledger(traj, nonlinearity=ledger_mode,
                           rho=config.rho if ledger_mode == "mollified" else None)
    report.energy_slacks = ledger.slacks
    report.div_residuals = np.array([divergence_residual(f)
                                     for f in traj.fields])
    # residual gates: a run is never silently wrong
    if np.max(report.div_residuals) > 1e-8 or \
            (ledger.slacks.size and ledger.min_slack < -1e-5 * ledger.scale):
        report.status = "numerical failure"
    report.meta["energy_scale"] = ledger.scale

    if config.out_dir is not None:
        _archive(config, report, traj, ledger)
    return report


def _archive(config: ExperimentConfig, report: DiagnosticsReport,
             traj: Trajectory, ledger: LedgerReport) -> None:
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    manifest = {
        "config": json.loads(config.to_json()),
        "summary": report.summary(),
        "series_files": [],
        "field_files": [],
    }
    cols = {f"lp_{p:g}": s for p, s in report.lp_series.items()}
    cols[f"besov_crit_{config.besov_p:g}"] = report.besov_series
    for p, s in report.leray_series.items():
        cols[f"leray_{p:g}"] = s
    cols["div_residual"] = report.div_residuals
    atomic_write_text(os.path.join(out, "series.csv"),
                      _series_csv(report.times, cols))
    manifest["series_files"].append("series.csv")
    lcols = {"energy_start": ledger.energy[:-1],
             "energy_end": ledger.energy[1:],
             "dissipation": ledger.dissipation,
             "work": ledger.work, "slack": ledger.slacks}
    atomic_write_text(os.path.join(out, "ledger.csv"),
                      _series_csv(report.times[:-1], lcols))
    manifest["series_files"].append("ledger.csv")
    for i, (t, f) in enumerate(traj):
        name = f"sample_{i:04d}.clf1"
        tmp = os.path.join(out, name + ".tmp")
        write_clf1(tmp, f)
        os.replace(tmp, os.path.join(out, name))
        manifest["field_files"].append({"file": name, "time": float(t)})
    atomic_write_text(os.path.join(out, "manifest.json"),
                      json.dumps(manifest, indent=2, sort_keys=True))
