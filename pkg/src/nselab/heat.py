"""Heat semigroup, Oseen operator e^{tL}P div, and Duhamel integrals.

The Duhamel quadrature treats the forcing as piecewise linear in time
between samples and integrates the exponential factor exactly per mode
(integrating-factor form): unconditionally stable, exact for the stiff
factor, second order in the sample spacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .besov import BesovIndex, Trajectory, kato_norm
from .errors import ExponentError, QuadratureError, RankError
from .spectral import Grid, SpectralField, leray_project


def heat_evolve(field: SpectralField, t: float) -> SpectralField:
    """e^{t Lap} by the multiplier exp(-|xi|^2 t); t = 0 is the identity."""
    if t < 0:
        raise QuadratureError(f"heat flow requires t >= 0, got {t}")
    return field.with_coeffs(field.coeffs * np.exp(-field.grid.xi_sq * t))


def heat_trajectory(field: SpectralField, times) -> Trajectory:
    times = np.asarray(times, dtype=float)
    return Trajectory(field.grid, times,
                      [heat_evolve(field, t) for t in times])


def projected_divergence(tensor: SpectralField) -> SpectralField:
    """P div F for a matrix field: contract i xi_j into F_ij, project."""
    if tensor.rank != "matrix":
        raise RankError("P div needs a matrix field")
    xi = tensor.grid.deriv_wavevectors
    c = 1j * np.einsum("j...,ij...->i...", xi, tensor.coeffs)
    vec = SpectralField(tensor.grid, "vector", c, check_hermitian=False)
    return leray_project(vec)


def oseen_apply(tensor: SpectralField, t: float) -> SpectralField:
    """Oseen operator e^{t Lap} P div applied to a tensor field."""
    return heat_evolve(projected_divergence(tensor), t)


# ---------------------------------------------------------------------
# Exponential quadrature weights, stable for all z = kappa*dt >= 0
# ---------------------------------------------------------------------

def _pl_weights(z: np.ndarray):
    """Weights (alpha, beta) with
    int_0^D e^{-kappa(D-s)} [Ga(1-s/D) + Gb s/D] ds = D*(Ga*alpha + Gb*beta),
    z = kappa*D.  beta = (z-1+e^{-z})/z^2, alpha = (1-e^{-z})/z - beta.
    """
    z = np.asarray(z, dtype=np.float64)
    small = z < 1e-4
    zs = np.where(small, 1.0, z)
    em = np.expm1(-zs)  # e^{-z} - 1
    beta = (zs + em) / zs**2
    alpha = -em / zs - beta
    beta_series = 0.5 - z / 6.0 + z**2 / 24.0
    alpha_series = 0.5 - z / 3.0 + z**2 / 8.0
    return np.where(small, alpha_series, alpha), \
        np.where(small, beta_series, beta)


def duhamel_stack(times: np.ndarray, g_stack: np.ndarray,
                  xi_sq: np.ndarray) -> np.ndarray:
    """Cumulative Duhamel integral at every sample time.

    g_stack has shape (M,) + field_shape where the trailing axes match
    xi_sq after broadcasting.  Returns the same shape: out[i] =
    int_0^{t_i} e^{-|xi|^2 (t_i - s)} g(s) ds with g piecewise linear.
    """
    times = np.asarray(times, dtype=float)
    out = np.zeros_like(g_stack)
    for i in range(1, times.size):
        dt = times[i] - times[i - 1]
        z = xi_sq * dt
        alpha, beta = _pl_weights(z)
        decay = np.exp(-z)
        out[i] = decay * out[i - 1] + dt * (alpha * g_stack[i - 1]
                                            + beta * g_stack[i])
    return out


@dataclass
class QuadratureScheme:
    """Duhamel time-quadrature configuration.

    'exact-exponential' integrates the exponential factor exactly per
    mode against the piecewise-linear forcing; 'composite' uses a
    plain trapezoid on ``substeps`` subintervals per sample interval
    (useful for convergence studies).
    """

    kind: str = "exact-exponential"
    substeps: int = 1
    error_estimate: bool = False

    def __post_init__(self):
        if self.kind not in ("exact-exponential", "composite"):
            raise QuadratureError(f"unknown quadrature kind {self.kind!r}")
        if self.substeps < 1:
            raise QuadratureError("substeps must be >= 1")


def _gather_forcing(traj: Trajectory):
    """Stack P div F over the samples of a tensor trajectory."""
    g = [projected_divergence(f).coeffs for f in traj.fields]
    return np.stack(g)


def _interp_mode(times, stack, t):
    """Linear interpolation of stacked mode arrays at time t."""
    i = int(np.searchsorted(times, t, side="right")) - 1
    i = min(max(i, 0), times.size - 2)
    w = (t - times[i]) / (times[i + 1] - times[i])
    return (1.0 - w) * stack[i] + w * stack[i + 1]


def _duhamel_at(times, g_stack, xi_sq, t, scheme: QuadratureScheme):
    acc = np.zeros_like(g_stack[0])
    i = 0
    while i + 1 < times.size and times[i] < t - 1e-15:
        sa = times[i]
        sb = min(times[i + 1], t)
        ga = g_stack[i]
        gb = g_stack[i + 1] if sb == times[i + 1] else \
            _interp_mode(times, g_stack, sb)
        if scheme.kind == "exact-exponential":
            dt = sb - sa
            z = xi_sq * dt
            alpha, beta = _pl_weights(z)
            acc = acc + np.exp(-xi_sq * (t - sb)) * dt * (ga * alpha + gb * beta)
        else:
            nodes = np.linspace(sa, sb, scheme.substeps + 1)
            vals = [np.exp(-xi_sq * (t - s))
                    * ((1 - w) * ga + w * gb)
                    for s, w in zip(nodes, np.linspace(0.0, 1.0, nodes.size))]
            h = (sb - sa) / scheme.substeps
            acc = acc + h * (0.5 * vals[0] + sum(vals[1:-1]) + 0.5 * vals[-1])
        i += 1
    return acc


def duhamel_integral(f_traj: Trajectory, t: float,
                     scheme: QuadratureScheme | None = None):
    """int_0^t e^{(t-s)Lap} P div F(s) ds from a sampled tensor F.

    The trajectory must cover [0, t].  Returns (field, error_estimate);
    the estimate is a Richardson difference against halved sampling
    when the scheme requests it, else None.
    """
    scheme = scheme or QuadratureScheme()
    times = f_traj.times
    if times[0] > 1e-15 or t > times[-1] + 1e-12:
        raise QuadratureError(
            f"trajectory [{times[0]}, {times[-1]}] does not cover [0, {t}]")
    xi_sq = f_traj.grid.xi_sq
    g_stack = _gather_forcing(f_traj)
    acc = _duhamel_at(times, g_stack, xi_sq, t, scheme)
    field = SpectralField(f_traj.grid, "vector", acc, check_hermitian=False)
    err = None
    if scheme.error_estimate and times.size >= 3:
        coarse = f_traj.coarsen()
        g_coarse = _gather_forcing(coarse)
        acc_c = _duhamel_at(coarse.times, g_coarse, xi_sq, t, scheme)
        err = float(np.max(np.abs(acc - acc_c))) / 3.0
    return field, err


def duhamel_trajectory(f_traj: Trajectory,
                       scheme: QuadratureScheme | None = None) -> Trajectory:
    """Cumulative Duhamel integral evaluated at every sample time."""
    scheme = scheme or QuadratureScheme()
    g_stack = _gather_forcing(f_traj)
    if scheme.kind == "exact-exponential":
        out = duhamel_stack(f_traj.times, g_stack, f_traj.grid.xi_sq)
    else:
        out = np.stack([_duhamel_at(f_traj.times, g_stack,
                                    f_traj.grid.xi_sq, t, scheme)
                        for t in f_traj.times])
    fields = [SpectralField(f_traj.grid, "vector", out[i],
                            check_hermitian=False)
              for i in range(len(f_traj))]
    return Trajectory(f_traj.grid, f_traj.times, fields)


# ---------------------------------------------------------------------
# Smoothing-estimate verification
# ---------------------------------------------------------------------

def check_kato_exponents(s1: float, p1: float, p2: float) -> float:
    """Validate s1 > -2 and 3/p1 - 3/p2 < 1 (both strict); return s2."""
    if not s1 > -2.0:
        raise ExponentError(f"need s1 > -2, got {s1}")
    gap = 3.0 / p1 - 3.0 / p2
    if not gap < 1.0 - 1e-14:
        raise ExponentError(f"need 3/p1 - 3/p2 < 1 strictly, got {gap}")
    return 1.0 + s1 - 3.0 / p1 + 3.0 / p2


def verify_kato_estimate(f_traj: Trajectory, s1: float, p1: float,
                         p2: float) -> dict:
    """Measured constant of the Kato-space Duhamel estimate.

    Returns {'constant', 's2', 'input_norm', 'output_norm'}; refuses
    exponent configurations outside the estimate's hypotheses.
    """
    s2 = check_kato_exponents(s1, p1, p2)
    out = duhamel_trajectory(f_traj)
    in_norm = kato_norm(f_traj, BesovIndex(s1, p1, math.inf)).value
    out_norm = kato_norm(out, BesovIndex(s2, p2, math.inf)).value
    const = out_norm / in_norm if in_norm > 0 else 0.0
    return {"constant": const, "s2": s2,
            "input_norm": in_norm, "output_norm": out_norm}


def _lp_norm_stack(grid: Grid, coeffs: np.ndarray, p: float) -> float:
    """L^p norm of a coefficient array with arbitrary leading axes
    (Frobenius pointwise magnitude)."""
    axes = tuple(range(coeffs.ndim - grid.dim, coeffs.ndim))
    phys = np.fft.ifftn(coeffs * grid.n**grid.dim, axes=axes).real
    lead = tuple(range(coeffs.ndim - grid.dim))
    mag = np.sqrt(np.sum(phys**2, axis=lead)) if lead else np.abs(phys)
    if math.isinf(p):
        return float(np.max(mag))
    return float((grid.cell_volume * np.sum(mag**p)) ** (1.0 / p))


def _grad_stack(grid: Grid, coeffs: np.ndarray, order: int) -> np.ndarray:
    out = coeffs
    for _ in range(order):
        out = 1j * grid.deriv_wavevectors[(slice(None),) + (None,) * (out.ndim - grid.dim)] * out[None]
    return out


def _time_slopes(times: np.ndarray, stack: np.ndarray) -> np.ndarray:
    """Sample-point derivative of a piecewise-linear stack (one-sided
    at the ends, interval-average inside)."""
    slopes = np.zeros_like(stack)
    fwd = np.zeros_like(stack)
    for i in range(times.size - 1):
        fwd[i] = (stack[i + 1] - stack[i]) / (times[i + 1] - times[i])
    fwd[-1] = fwd[-2]
    slopes[0] = fwd[0]
    slopes[-1] = fwd[-2]
    for i in range(1, times.size - 1):
        slopes[i] = 0.5 * (fwd[i - 1] + fwd[i])
    return slopes


def verify_smoothing_derivatives(f_traj: Trajectory, k: int, l: int,
                                 s1: float, p1: float, p2: float) -> dict:
    """Measured constant of the weighted-derivative smoothing estimate.

    LHS: sup_t t^{-s2/2} t^{k+l/2} ||d_t^k grad^l Duhamel(F)||_{p2};
    RHS: sum over a <= k, b <= l of the matching weighted Kato norms of
    F.  Time derivatives follow the quadrature model exactly:
    d_t u = G - |xi|^2 u with G = P div F piecewise linear.
    """
    if k > 2 or l > 2 or k < 0 or l < 0:
        raise ExponentError("supported derivative orders are k, l <= 2")
    s2 = check_kato_exponents(s1, p1, p2)
    grid = f_traj.grid
    times = f_traj.times
    g_stack = _gather_forcing(f_traj)
    u_stack = duhamel_stack(times, g_stack, grid.xi_sq)

    # time-derivative towers: u^(m) = G^(m-1) - |xi|^2 u^(m-1)
    derivs = [u_stack]
    g_derivs = [g_stack, _time_slopes(times, g_stack)]
    for m in range(1, k + 1):
        derivs.append(g_derivs[m - 1] - grid.xi_sq * derivs[m - 1])

    pos = times > 0
    lhs = 0.0
    for i in np.nonzero(pos)[0]:
        c = _grad_stack(grid, derivs[k][i], l)
        w = times[i] ** (-s2 / 2.0 + k + l / 2.0)
        lhs = max(lhs, w * _lp_norm_stack(grid, c, p2))

    f_stack = np.stack([f.coeffs for f in f_traj.fields])
    f_derivs = [f_stack, _time_slopes(times, f_stack),
                np.zeros_like(f_stack)]
    rhs = 0.0
    for a in range(k + 1):
        for b in range(l + 1):
            term = 0.0
            for i in np.nonzero(pos)[0]:
                c = _grad_stack(grid, f_derivs[a][i], b)
                w = times[i] ** (-s1 / 2.0 + a + b / 2.0)
                term = max(term, w * _lp_norm_stack(grid, c, p1))
            rhs += term
    const = lhs / rhs if rhs > 0 else 0.0
    return {"constant": const, "s2": s2, "lhs": lhs, "rhs": rhs}


# ---------------------------------------------------------------------
# Time schedules
# ---------------------------------------------------------------------

def time_schedule(horizon: float, n_geometric: int = 24, n_uniform: int = 24,
                  first_exponent: int = 20, include_zero: bool = True):
    """Geometric samples from T*2^{-J} to T/8, then uniform up to T.

    Resolves the singular t^{-s/2} Kato weights near t = 0.
    """
    if horizon <= 0:
        raise QuadratureError("horizon must be positive")
    t1 = horizon * 2.0 ** (-first_exponent)
    geo = np.geomspace(t1, horizon / 8.0, n_geometric)
    uni = np.linspace(horizon / 8.0, horizon, n_uniform + 1)[1:]
    times = np.concatenate([geo, uni])
    if include_zero:
        times = np.concatenate([[0.0], times])
    return times
