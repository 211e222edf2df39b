"""Mild Navier-Stokes solvers built on the abstract Picard engine:
the direct solver u = e^{tL}u0 - B(u,u), the perturbed solver around a
precomputed background, and the Leray-mollified energy solver.

Solver state is the stack of Fourier coefficients at every sample
time, shape (M, dim, N, ..., N); the bilinear operator forms the
dealiased tensor product per sample and runs the exact-exponential
Duhamel recursion over the schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .besov import BesovIndex, DyadicPartition, Trajectory, besov_norm, critical_exponent
from .errors import ConfigError, GridError, PicardDivergenceError, QuadratureError
from .heat import duhamel_stack, time_schedule
from .picard import (FixedPointReport, PicardProblem, estimate_constants,
                     solve_picard)
from .spectral import Grid, Mollifier, SpectralField, divergence_residual

DEFAULT_KAPPA = 0.17  # existence-time smallness constant, calibrated empirically


@dataclass
class SolverConfig:
    """Shared solver configuration.

    The contraction norm X is the Kato norm K_p (sup of
    t^{-s_p/2}||u(t)||_p); time samples are geometric near zero and
    uniform after T/8.
    """

    grid: Grid
    horizon: float
    n_geometric: int = 24
    n_uniform: int = 24
    first_exponent: int = 20
    times: np.ndarray | None = None
    kato_p: float = 4.0
    picard_tol: float = 1e-10
    max_iter: int = 60
    rho: float | None = None
    measure_probes: int = 20
    probe_seed: int = 0

    def schedule(self) -> np.ndarray:
        if self.times is not None:
            return np.asarray(self.times, dtype=float)
        return time_schedule(self.horizon, self.n_geometric, self.n_uniform,
                             self.first_exponent)


@dataclass
class MildSolution:
    """Trajectory plus the Picard iteration record and residual checks."""

    trajectory: Trajectory
    report: FixedPointReport
    residual_doubled: float = float("nan")
    max_div_residual: float = 0.0
    config: SolverConfig | None = None


# ---------------------------------------------------------------------
# Stack helpers
# ---------------------------------------------------------------------

def _grid_axes(grid: Grid, stack: np.ndarray):
    return tuple(range(stack.ndim - grid.dim, stack.ndim))


def _stack_to_physical(grid: Grid, stack: np.ndarray) -> np.ndarray:
    axes = _grid_axes(grid, stack)
    return np.fft.ifftn(stack * grid.n**grid.dim, axes=axes).real


def _physical_to_stack(grid: Grid, phys: np.ndarray) -> np.ndarray:
    axes = _grid_axes(grid, phys)
    return np.fft.fftn(phys, axes=axes) / grid.n**grid.dim


def _forcing_stack(grid: Grid, v_stack: np.ndarray, w_stack: np.ndarray,
                   w_multiplier: np.ndarray | None = None) -> np.ndarray:
    """G = P div dealias(v (x) w), per sample; w may be premultiplied
    (mollification)."""
    wc = v_stack if w_stack is None else w_stack
    if w_multiplier is not None:
        wc = wc * w_multiplier
    pv = _stack_to_physical(grid, v_stack)
    pw = _stack_to_physical(grid, wc)
    tensor = pv[:, :, None] * pw[:, None, :]  # (M, i, j, grid)
    tc = _physical_to_stack(grid, tensor) * grid.dealias_mask
    xi = grid.deriv_wavevectors
    g = 1j * np.einsum("j...,mij...->mi...", xi, tc)
    # Leray projection
    inv = np.zeros_like(grid.deriv_xi_sq)
    nz = grid.deriv_xi_sq > 0
    inv[nz] = 1.0 / grid.deriv_xi_sq[nz]
    xg = np.einsum("i...,mi...->m...", xi, g)
    g = g - xi[None] * (xg * inv)[:, None]
    return g


def _heat_stack(grid: Grid, u0: SpectralField, times: np.ndarray) -> np.ndarray:
    decay = np.exp(-np.multiply.outer(times, grid.xi_sq))  # (M, grid)
    return decay[:, None] * u0.coeffs[None]


def _stack_lp_series(grid: Grid, stack: np.ndarray, p: float) -> np.ndarray:
    phys = _stack_to_physical(grid, stack)
    mag = np.sqrt(np.sum(phys**2, axis=1))
    if math.isinf(p):
        return np.max(mag, axis=tuple(range(1, mag.ndim)))
    vols = grid.cell_volume
    return (vols * np.sum(mag**p, axis=tuple(range(1, mag.ndim)))) ** (1.0 / p)


def kato_stack_norm(grid: Grid, times: np.ndarray, stack: np.ndarray,
                    p: float) -> float:
    """Kato K_p norm of a coefficient stack (t = 0 sample skipped)."""
    s = critical_exponent(p)
    series = _stack_lp_series(grid, stack, p)
    pos = times > 0
    if not np.any(pos):
        return 0.0
    return float(np.max(times[pos] ** (-s / 2.0) * series[pos]))


def stack_to_trajectory(grid: Grid, times: np.ndarray,
                        stack: np.ndarray) -> Trajectory:
    fields = [SpectralField(grid, "vector", stack[i], check_hermitian=False)
              for i in range(times.size)]
    return Trajectory(grid, times, fields)


def _prepare_data(u0: SpectralField, grid: Grid) -> SpectralField:
    if u0.grid != grid:
        raise GridError("data grid does not match solver grid")
    if u0.rank != "vector":
        raise GridError("initial data must be a vector field")
    if divergence_residual(u0) > 1e-10:
        raise GridError("initial data is not divergence-free")
    # keep solver states in the dealias band so product identities are exact
    c = u0.coeffs * grid.dealias_mask
    f = SpectralField(grid, "vector", c, check_hermitian=False).zero_mean()
    return f


def _make_probe(grid: Grid, times: np.ndarray):
    """Heat flows of random divergence-free data as probe elements."""
    from .families import random_power_law

    def probe(rng):
        seed = int(rng.integers(0, 2**31 - 1))
        w = random_power_law(grid, alpha=2.0, seed=seed, amplitude=1.0)
        return _heat_stack(grid, w, times)

    return probe


# ---------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------

def _build_problem(grid: Grid, times: np.ndarray, a_stack: np.ndarray,
                   linear, bilinear, config: SolverConfig) -> PicardProblem:
    def norm(stack):
        return kato_stack_norm(grid, times, stack, config.kato_p)

    problem = PicardProblem(a=a_stack, linear=linear, bilinear=bilinear,
                            norm=norm, probe=_make_probe(grid, times))
    if config.measure_probes > 0:
        estimate_constants(problem, n_probes=config.measure_probes,
                           seed=config.probe_seed)
    else:
        problem.gamma = 0.0
        problem.l_norm = 0.0
    return problem


def _nse_bilinear(grid: Grid, times: np.ndarray,
                  w_multiplier: np.ndarray | None = None):
    def bilinear(x, y):
        g = _forcing_stack(grid, x, y, w_multiplier=w_multiplier)
        return -duhamel_stack(times, g, grid.xi_sq)

    return bilinear


def _doubled_residual(grid: Grid, times: np.ndarray, stack: np.ndarray,
                      u0: SpectralField, linear_refined, config: SolverConfig,
                      w_multiplier=None) -> float:
    """Integral-equation residual recomputed on a midpoint-refined
    schedule (independent doubled quadrature)."""
    fine_times = np.sort(np.concatenate(
        [times, 0.5 * (times[:-1] + times[1:])]))
    # linear interpolation of the solution onto the refined schedule
    idx = np.searchsorted(times, fine_times, side="right") - 1
    idx = np.clip(idx, 0, times.size - 2)
    w = (fine_times - times[idx]) / (times[idx + 1] - times[idx])
    shape = (fine_times.size,) + stack.shape[1:]
    fine = (1 - w).reshape(-1, *[1] * (stack.ndim - 1)) * stack[idx] \
        + w.reshape(-1, *[1] * (stack.ndim - 1)) * stack[idx + 1]
    assert fine.shape == shape
    a_fine = _heat_stack(grid, u0, fine_times)
    b_fine = _nse_bilinear(grid, fine_times, w_multiplier)(fine, fine)
    rhs = a_fine + b_fine
    if linear_refined is not None:
        rhs = rhs + linear_refined(fine_times, fine)
    resid = fine - rhs
    # compare at the original samples only
    keep = np.isin(fine_times, times)
    return kato_stack_norm(grid, fine_times[keep], resid[keep], config.kato_p)


def mild_solve_nse(u0: SpectralField, config: SolverConfig) -> MildSolution:
    """Picard solution of u(t) = e^{tL}u0 - B(u, u)(t) on the schedule."""
    grid = config.grid
    u0 = _prepare_data(u0, grid)
    times = config.schedule()
    a_stack = _heat_stack(grid, u0, times)
    bilinear = _nse_bilinear(grid, times)
    problem = _build_problem(grid, times, a_stack, None, bilinear, config)
    report = solve_picard(problem, tol=config.picard_tol,
                          max_iter=config.max_iter)
    stack = report.solution
    traj = stack_to_trajectory(grid, times, stack)
    rd = _doubled_residual(grid, times, stack, u0, None, config)
    divs = max(divergence_residual(f) for f in traj.fields)
    return MildSolution(trajectory=traj, report=report, residual_doubled=rd,
                        max_div_residual=divs, config=config)


def mild_solve_perturbed(u0_large: SpectralField, background: Trajectory,
                         config: SolverConfig) -> MildSolution:
    """Solve W = e^{tL}U0 - B(W,W) - B(W,V) - B(V,W) around background V.

    The background must be sampled on the solver schedule.
    """
    grid = config.grid
    times = config.schedule()
    if len(background) != times.size or \
            not np.allclose(background.times, times, rtol=1e-12, atol=0):
        raise QuadratureError("background trajectory must share the "
                              "solver time schedule")
    u0_large = _prepare_data(u0_large, grid)
    v_stack = np.stack([f.coeffs for f in background.fields])
    bilinear = _nse_bilinear(grid, times)

    def linear(w):
        return bilinear(w, v_stack) + bilinear(v_stack, w)

    a_stack = _heat_stack(grid, u0_large, times)
    problem = _build_problem(grid, times, a_stack, linear, bilinear, config)
    report = solve_picard(problem, tol=config.picard_tol,
                          max_iter=config.max_iter)
    stack = report.solution

    def linear_refined(fine_times, fine):
        idx = np.searchsorted(times, fine_times, side="right") - 1
        idx = np.clip(idx, 0, times.size - 2)
        w = (fine_times - times[idx]) / (times[idx + 1] - times[idx])
        vf = (1 - w).reshape(-1, *[1] * (v_stack.ndim - 1)) * v_stack[idx] \
            + w.reshape(-1, *[1] * (v_stack.ndim - 1)) * v_stack[idx + 1]
        b = _nse_bilinear(grid, fine_times)
        return b(fine, vf) + b(vf, fine)

    traj = stack_to_trajectory(grid, times, stack)
    rd = _doubled_residual(grid, times, stack, u0_large, linear_refined,
                           config)
    divs = max(divergence_residual(f) for f in traj.fields)
    return MildSolution(trajectory=traj, report=report, residual_doubled=rd,
                        max_div_residual=divs, config=config)


def _background_stack(grid: Grid, times: np.ndarray, bg) -> np.ndarray | None:
    if bg is None:
        return None
    if isinstance(bg, Trajectory):
        if len(bg) != times.size or not np.allclose(bg.times, times):
            raise QuadratureError("background trajectory must share the "
                                  "solver schedule")
        return np.stack([f.coeffs for f in bg.fields])
    if isinstance(bg, SpectralField):
        return np.broadcast_to(bg.coeffs[None],
                               (times.size,) + bg.coeffs.shape).copy()
    raise ConfigError("background must be a Trajectory, SpectralField, or None")


def mollified_solve(u0: SpectralField, a_bg, b_bg, rho: float,
                    config: SolverConfig) -> MildSolution:
    """Leray-mollified perturbed solver:
    U = e^{tL}U0 - B_rho(U, U) - L(U), with the advected factor
    mollified, B_rho(v,w) = Duhamel(P div v (x) (w)_rho) and
    L(w) = Duhamel(P div (a (x) w + w (x) b)); requires div b = 0.
    """
    grid = config.grid
    u0 = _prepare_data(u0, grid)
    times = config.schedule()
    moll = Mollifier(grid.dim, rho)
    if rho >= grid.box_length:
        raise GridError("mollification radius exceeds the box")
    m_rho = moll.hat(rho * grid.xi_abs.ravel()).reshape(grid.shape)

    a_stack_bg = _background_stack(grid, times, a_bg)
    b_stack_bg = _background_stack(grid, times, b_bg)
    if b_stack_bg is not None:
        xi = grid.deriv_wavevectors
        div_b = np.einsum("i...,mi...->m...", xi, b_stack_bg)
        scale = np.max(np.abs(b_stack_bg))
        if scale > 0 and np.max(np.abs(div_b)) > 1e-10 * grid.xi_max * scale:
            raise GridError("background b must be divergence-free")

    bilinear = _nse_bilinear(grid, times, w_multiplier=m_rho)

    linear = None
    if a_stack_bg is not None or b_stack_bg is not None:
        plain = _nse_bilinear(grid, times)

        def linear(w):
            out = None
            if a_stack_bg is not None:
                out = plain(a_stack_bg, w)
            if b_stack_bg is not None:
                term = plain(w, b_stack_bg)
                out = term if out is None else out + term
            return out

    a_stack = _heat_stack(grid, u0, times)
    problem = _build_problem(grid, times, a_stack, linear, bilinear, config)
    report = solve_picard(problem, tol=config.picard_tol,
                          max_iter=config.max_iter)
    stack = report.solution
    traj = stack_to_trajectory(grid, times, stack)
    rd = _doubled_residual(grid, times, stack, u0, None, config,
                           w_multiplier=m_rho) if linear is None \
        else float("nan")
    divs = max(divergence_residual(f) for f in traj.fields)
    return MildSolution(trajectory=traj, report=report, residual_doubled=rd,
                        max_div_residual=divs, config=config)


# ---------------------------------------------------------------------
# Subcritical existence time and continuation
# ---------------------------------------------------------------------

def subcritical_existence_time(v0: SpectralField, q: float, eps: float,
                               partition: DyadicPartition,
                               kappa: float = DEFAULT_KAPPA,
                               horizon_cap: float = 10.0) -> float:
    """Existence-time rule T = (kappa/M)^{2/eps} with
    M = ||V0||_{B^{s_q+eps}_{q,q}}; returns the horizon cap for M = 0.

    kappa is configuration calibrated against solver success, not a
    theoretical constant.
    """
    if not (eps > 0 and eps < -critical_exponent(q)):
        raise ConfigError(f"need 0 < eps < -s_q, got eps={eps}")
    s = critical_exponent(q) + eps
    m = besov_norm(v0, BesovIndex(s, q, q), partition).value
    if m == 0:
        return horizon_cap
    return min(horizon_cap, (kappa / m) ** (2.0 / eps))


@dataclass
class ContinuationResult:
    trajectory: Trajectory
    status: str                       # 'completed' | 'blow-up suspected'
    segment_horizons: list = dc_field(default_factory=list)
    reports: list = dc_field(default_factory=list)


def solve_with_continuation(u0: SpectralField, config: SolverConfig,
                            step_floor: float = 1e-4) -> ContinuationResult:
    """Re-seeded continuation: solve on shrinking steps while Picard
    converges; declare 'blow-up suspected' when the step falls below
    the floor (an explicitly heuristic surrogate for T*)."""
    grid = config.grid
    t0 = 0.0
    step = config.horizon
    current = u0
    all_times = [np.array([0.0])]
    all_fields = [[_prepare_data(u0, grid)]]
    segments = []
    reports = []
    while t0 < config.horizon - 1e-12:
        step = min(step, config.horizon - t0)
        sub = SolverConfig(grid=grid, horizon=step,
                           n_geometric=config.n_geometric,
                           n_uniform=config.n_uniform,
                           first_exponent=config.first_exponent,
                           kato_p=config.kato_p,
                           picard_tol=config.picard_tol,
                           max_iter=config.max_iter,
                           measure_probes=config.measure_probes)
        try:
            sol = mild_solve_nse(current, sub)
        except PicardDivergenceError:
            step *= 0.5
            if step < step_floor:
                traj = Trajectory(grid, np.concatenate(all_times),
                                  [f for seg in all_fields for f in seg])
                return ContinuationResult(traj, "blow-up suspected",
                                          segments, reports)
            continue
        segments.append(step)
        reports.append(sol.report)
        all_times.append(sol.trajectory.times[1:] + t0)
        all_fields.append(sol.trajectory.fields[1:])
        current = sol.trajectory.fields[-1]
        t0 += step
    traj = Trajectory(grid, np.concatenate(all_times),
                      [f for seg in all_fields for f in seg])
    return ContinuationResult(traj, "completed", segments, reports)
