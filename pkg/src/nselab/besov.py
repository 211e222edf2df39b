"""Dyadic Littlewood-Paley partitions, homogeneous Besov / Kato /
time-space norms, the energy norm, and Bony paraproducts.

The partition is built from a smooth radial step chi equal to 1 on
|xi| <= 3/4 and 0 on |xi| >= 4/3, with phi(xi) = chi(xi/2) - chi(xi),
so supp phi is the annulus 3/4 <= |xi| <= 8/3 and the dyadic sum
telescopes to a partition of unity on the resolved band.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ExponentError, GridError, PartitionError, QuadratureError
from .spectral import Grid, SpectralField, dealias_product

CRITICAL_DIM = 3  # s_p := -1 + 3/p throughout, following the 3D theory


def critical_exponent(p: float) -> float:
    """s_p = -1 + 3/p (p = inf gives -1)."""
    return -1.0 + (0.0 if math.isinf(p) else CRITICAL_DIM / p)


# ---------------------------------------------------------------------
# Smooth radial step and dyadic symbols
# ---------------------------------------------------------------------

def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C^inf step: 0 for t<=0, 1 for t>=1, exp(-1/t) blending between."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    out[t >= 1.0] = 1.0
    mid = (t > 0.0) & (t < 1.0)
    tm = t[mid]
    a = np.exp(-1.0 / tm)
    b = np.exp(-1.0 / (1.0 - tm))
    out[mid] = a / (a + b)
    return out


CHI_ONE = 0.75   # chi == 1 inside this radius
CHI_ZERO = 4.0 / 3.0  # chi == 0 outside this radius


def chi_profile(r: np.ndarray) -> np.ndarray:
    """Smooth low-pass step: 1 on r <= 3/4, 0 on r >= 4/3."""
    t = (np.asarray(r, dtype=np.float64) - CHI_ONE) / (CHI_ZERO - CHI_ONE)
    return 1.0 - _smooth_step(t)


def phi_profile(r: np.ndarray) -> np.ndarray:
    """Annulus bump phi(r) = chi(r/2) - chi(r); support [3/4, 8/3]."""
    r = np.asarray(r, dtype=np.float64)
    return chi_profile(r / 2.0) - chi_profile(r)


class DyadicPartition:
    """Tabulated dyadic multipliers phi(2^-j xi), chi(2^-j xi) on a grid.

    The index range must cover the grid's nonzero spectrum:
    (4/3)*2^j_min <= min nonzero |xi| and (3/4)*2^(j_max+1) >= max |xi|,
    which makes sum_j phi_j == 1 on every nonzero grid frequency.
    """

    def __init__(self, grid: Grid, j_min: int, j_max: int):
        if j_min > j_max:
            raise PartitionError("j_min must not exceed j_max")
        lo = grid.xi_min_nonzero
        hi = grid.xi_max
        if CHI_ZERO * 2.0**j_min > lo * (1 + 1e-12):
            raise PartitionError(
                f"j_min={j_min} too high: lowest block does not clear the "
                f"minimum grid frequency {lo}")
        if CHI_ONE * 2.0 ** (j_max + 1) < hi * (1 - 1e-12):
            raise PartitionError(
                f"j_max={j_max} too low for maximum grid frequency {hi}")
        self.grid = grid
        self.j_min = int(j_min)
        self.j_max = int(j_max)
        r = grid.xi_abs
        self._phi = {j: phi_profile(r / 2.0**j)
                     for j in range(j_min, j_max + 1)}
        self._chi = {j: chi_profile(r / 2.0**j)
                     for j in range(j_min - 1, j_max + 2)}

    @property
    def j_range(self):
        return range(self.j_min, self.j_max + 1)

    def phi_symbol(self, j: int) -> np.ndarray:
        if j not in self._phi:
            raise PartitionError(f"block index {j} outside "
                                 f"[{self.j_min}, {self.j_max}]")
        return self._phi[j]

    def chi_symbol(self, j: int) -> np.ndarray:
        if j not in self._chi:
            raise PartitionError(f"low-pass index {j} outside "
                                 f"[{self.j_min - 1}, {self.j_max + 1}]")
        return self._chi[j]

    def partition_deviation(self) -> float:
        """max |sum_j phi_j - 1| over nonzero grid frequencies."""
        total = sum(self._phi.values())
        mask = self.grid.xi_sq > 0
        return float(np.max(np.abs(total[mask] - 1.0)))

    def telescoping_deviation(self) -> float:
        """max |chi + sum_{j>=0} phi_j - 1| on the resolved band |xi| <= 3/4*2^(j_max+1)."""
        total = chi_profile(self.grid.xi_abs)
        for j in range(0, self.j_max + 1):
            total = total + self._phi[j]
        band = self.grid.xi_abs <= CHI_ONE * 2.0 ** (self.j_max + 1)
        return float(np.max(np.abs(total[band] - 1.0)))


def build_partition(grid: Grid, j_min: int, j_max: int) -> DyadicPartition:
    return DyadicPartition(grid, j_min, j_max)


def default_partition(grid: Grid) -> DyadicPartition:
    """Widest-coverage partition for a grid: identity holds on every
    nonzero mode."""
    j_min = math.floor(math.log2(grid.xi_min_nonzero / CHI_ZERO))
    j_max = math.ceil(math.log2(grid.xi_max / (2.0 * CHI_ONE)))
    return DyadicPartition(grid, j_min, j_max)


def lp_block(field: SpectralField, j: int,
             partition: DyadicPartition) -> SpectralField:
    """Littlewood-Paley block: multiply by phi(2^-j xi)."""
    if field.grid != partition.grid:
        raise GridError("field and partition grids differ")
    return field.with_coeffs(field.coeffs * partition.phi_symbol(j))


def low_freq(field: SpectralField, j: int,
             partition: DyadicPartition) -> SpectralField:
    """Low-pass S_j: multiply by chi(2^-j xi)."""
    if field.grid != partition.grid:
        raise GridError("field and partition grids differ")
    return field.with_coeffs(field.coeffs * partition.chi_symbol(j))


# ---------------------------------------------------------------------
# Indices and reports
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class BesovIndex:
    """(s, p, q[, r]) exponent tuple."""

    s: float
    p: float
    q: float
    r: float | None = None

    def __post_init__(self):
        for e in (self.p, self.q) + (() if self.r is None else (self.r,)):
            if not (e >= 1.0):
                raise ExponentError(f"integrability exponents must be >= 1, got {e}")

    @property
    def s_critical(self) -> float:
        return critical_exponent(self.p)

    @property
    def is_critical(self) -> bool:
        return abs(self.s + 1.0 - CRITICAL_DIM / self.p) <= 1e-14

    def as_dict(self):
        d = {"s": self.s, "p": self.p, "q": self.q}
        if self.r is not None:
            d["r"] = self.r
        return d


@dataclass
class NormReport:
    """Computed norm with its blockwise breakdown.

    ``blocks`` holds (label, contribution) pairs; for dyadic norms the
    label is the block index j, for time-based norms the sample index.
    """

    value: float
    index: BesovIndex
    blocks: list = dc_field(default_factory=list)
    truncated: bool = False
    meta: dict = dc_field(default_factory=dict)

    def aggregation_residual(self) -> float:
        """Relative gap between value and the l^q re-aggregation of blocks."""
        contribs = np.array([c for _, c in self.blocks], dtype=float)
        agg = _lq_aggregate(contribs, self.index.q)
        scale = max(abs(self.value), 1e-300)
        return abs(agg - self.value) / scale

    def to_json(self) -> str:
        payload = {
            "index": self.index.as_dict(),
            "value": self.value,
            "blocks": [{"j": int(j), "contrib": float(c)}
                       for j, c in self.blocks],
            "truncated": self.truncated,
        }
        if self.meta:
            payload["meta"] = {k: v for k, v in self.meta.items()}
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "NormReport":
        d = json.loads(text)
        idx = BesovIndex(**d["index"])
        blocks = [(b["j"], b["contrib"]) for b in d["blocks"]]
        return cls(value=d["value"], index=idx, blocks=blocks,
                   truncated=d.get("truncated", False),
                   meta=d.get("meta", {}))


def _lq_aggregate(contribs: np.ndarray, q: float) -> float:
    if contribs.size == 0:
        return 0.0
    if math.isinf(q):
        return float(np.max(contribs))
    return float(np.sum(contribs**q) ** (1.0 / q))


# ---------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------

class Trajectory:
    """Time-stamped sequence of fields on a shared grid.

    Times are strictly increasing; a leading t = 0 sample is allowed
    (it carries the initial data and is skipped by singular-weight
    quadratures).
    """

    def __init__(self, grid: Grid, times, fields):
        times = np.asarray(times, dtype=np.float64)
        if times.ndim != 1 or len(fields) != times.size:
            raise QuadratureError("times and fields length mismatch")
        if times.size == 0:
            raise QuadratureError("empty trajectory")
        if np.any(np.diff(times) <= 0) or times[0] < 0:
            raise QuadratureError("times must be non-negative and strictly increasing")
        for f in fields:
            if f.grid != grid:
                raise GridError("trajectory fields must share the grid")
        self.grid = grid
        self.times = times
        self.fields = list(fields)

    def __len__(self):
        return self.times.size

    def __iter__(self):
        return iter(zip(self.times, self.fields))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def coarsen(self) -> "Trajectory":
        """Keep every other sample (always keeping the endpoints)."""
        idx = list(range(0, len(self) - 1, 2)) + [len(self) - 1]
        idx = sorted(set(idx))
        return Trajectory(self.grid, self.times[idx],
                          [self.fields[i] for i in idx])

    def map(self, fn) -> "Trajectory":
        return Trajectory(self.grid, self.times,
                          [fn(f) for f in self.fields])

    def lp_series(self, p: float) -> np.ndarray:
        return np.array([f.lp_norm(p) for f in self.fields])

    def l2_series(self) -> np.ndarray:
        return np.array([f.l2_norm() for f in self.fields])


def _positive_part(traj: Trajectory):
    """(times, fields) with any t = 0 sample dropped."""
    if traj.times[0] == 0.0:
        return traj.times[1:], traj.fields[1:]
    return traj.times, traj.fields


# ---------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------

def besov_norm(field: SpectralField, index: BesovIndex,
               partition: DyadicPartition) -> NormReport:
    """Homogeneous Besov norm: l^q over j of 2^{js} ||Delta_j f||_p."""
    if np.max(np.abs(field.mean_mode())) > 1e-13 * max(field.max_abs_coeff(), 1e-300):
        raise GridError("Besov norms require zero-mean fields")
    blocks = []
    for j in partition.j_range:
        bj = lp_block(field, j, partition)
        contrib = 2.0 ** (j * index.s) * bj.lp_norm(index.p)
        blocks.append((j, contrib))
    contribs = np.array([c for _, c in blocks])
    value = _lq_aggregate(contribs, index.q)
    # blocks at the edge of the tabulated j-range carrying weight mean
    # the (in principle infinite) dyadic sum was truncated
    tol = 1e-12 * max(np.max(contribs), 1e-300)
    truncated = bool(contribs[0] > tol or contribs[-1] > tol)
    meta = {}
    if math.isinf(index.q) and value > 0:
        meta["attaining_j"] = int(min(j for (j, c) in blocks if c == value))
    return NormReport(value=value, index=index, blocks=blocks,
                      truncated=truncated, meta=meta)


def kato_decay_profile(traj: Trajectory, s: float, p: float) -> np.ndarray:
    """Series t^{-s/2} ||u(.,t)||_p over the positive-time samples."""
    times, fields = _positive_part(traj)
    return np.array([t ** (-s / 2.0) * f.lp_norm(p)
                     for t, f in zip(times, fields)])


def kato_norm(traj: Trajectory, index: BesovIndex) -> NormReport:
    """Kato norm K^s_{p,q}: L^q of t^{-s/2}||u||_p against dt/t.

    q = inf takes the sup over samples (the smallest attaining sample
    is recorded); finite q integrates by trapezoid in log t.
    """
    times, _ = _positive_part(traj)
    if times.size == 0:
        raise QuadratureError("trajectory has no positive-time samples")
    profile = kato_decay_profile(traj, index.s, index.p)
    blocks = list(enumerate(profile))
    if math.isinf(index.q):
        value = float(np.max(profile))
        attain = int(np.argmax(profile))
        meta = {"attaining_sample": attain, "attaining_time": float(times[attain])}
    else:
        if times.size < 2:
            raise QuadratureError("finite-q Kato norm needs >= 2 samples")
        value = float(np.trapezoid(profile**index.q, np.log(times)) ** (1.0 / index.q))
        meta = {}
        # report per-sample contributions, aggregation happens in log-t
        blocks = []
    rep = NormReport(value=value, index=index, blocks=blocks, meta=meta)
    rep.meta["profile_times"] = [float(t) for t in times]
    rep.meta["profile"] = [float(v) for v in profile]
    return rep


def timespace_besov_norm(traj: Trajectory, r: float, index: BesovIndex,
                         partition: DyadicPartition,
                         check_resolution: bool = True) -> NormReport:
    """Time-space Besov norm: l^q over j of 2^{js} ||Delta_j u||_{L^r_t L^p_x}.

    For finite r a Richardson check against halved time sampling must
    agree within 1%, otherwise QuadratureError is raised.
    """
    idx = BesovIndex(index.s, index.p, index.q, r)

    def compute(t: Trajectory):
        blocks = []
        for j in partition.j_range:
            series = np.array([lp_block(f, j, partition).lp_norm(index.p)
                               for f in t.fields])
            if math.isinf(r):
                time_norm = float(np.max(series))
            else:
                time_norm = float(np.trapezoid(series**r, t.times) ** (1.0 / r))
            blocks.append((j, 2.0 ** (j * index.s) * time_norm))
        contribs = np.array([c for _, c in blocks])
        return _lq_aggregate(contribs, index.q), blocks

    value, blocks = compute(traj)
    if check_resolution and not math.isinf(r) and len(traj) >= 5:
        coarse, _ = compute(traj.coarsen())
        if value > 0 and abs(value - coarse) / value > 0.01:
            raise QuadratureError(
                f"time quadrature under-resolved: refined/coarse values "
                f"{value} vs {coarse}")
    return NormReport(value=value, index=idx, blocks=blocks)


def energy_norm(traj: Trajectory) -> float:
    """Squared energy norm: sup_t ||U||_2^2 + 2 int ||grad U||_2^2 dt."""
    sup = float(np.max(traj.l2_series()) ** 2)
    grads = np.array([f.h1_seminorm() ** 2 for f in traj.fields])
    integral = float(np.trapezoid(grads, traj.times))
    return sup + 2.0 * integral


def interpolation_check(traj: Trajectory, m: float, n: float) -> float:
    """Ratio ||U||_{L^m_t L^n_x} / |U|_{2,Q_T} for admissible (m, n)."""
    if abs(2.0 / m + 3.0 / n - 1.5) > 1e-12:
        raise ExponentError(f"(m, n) = ({m}, {n}) violates 2/m + 3/n = 3/2")
    if not (2.0 <= n <= 6.0) or not (2.0 <= m):
        raise ExponentError(f"(m, n) = ({m}, {n}) outside the admissible range")
    energy = energy_norm(traj)
    if energy == 0.0:
        return 0.0
    series = traj.lp_series(n)
    if math.isinf(m):
        num = float(np.max(series))
    else:
        num = float(np.trapezoid(series**m, traj.times) ** (1.0 / m))
    return num / math.sqrt(energy)


# ---------------------------------------------------------------------
# Paraproducts
# ---------------------------------------------------------------------

def paraproduct(u: SpectralField, v: SpectralField,
                partition: DyadicPartition):
    """Bony decomposition of the product uv on scalar fields.

    Returns (T_u v, T_v u, R(u, v)) with
    T_u v = sum_j S_{j-1}u * Delta_j v and R summing the |j-j'| <= 1
    interactions; the three pieces sum to the dealiased product uv.
    """
    if u.rank != "scalar" or v.rank != "scalar":
        raise GridError("paraproducts are defined on scalar fields here")
    if u.grid != v.grid or u.grid != partition.grid:
        raise GridError("fields and partition must share the grid")
    blocks_u = {j: lp_block(u, j, partition) for j in partition.j_range}
    blocks_v = {j: lp_block(v, j, partition) for j in partition.j_range}
    lows_u = {j: low_freq(u, j - 1, partition) for j in partition.j_range}
    lows_v = {j: low_freq(v, j - 1, partition) for j in partition.j_range}

    t_uv = SpectralField.zero(u.grid, "scalar")
    t_vu = SpectralField.zero(u.grid, "scalar")
    reso = SpectralField.zero(u.grid, "scalar")
    for j in partition.j_range:
        t_uv = t_uv + dealias_product(lows_u[j], blocks_v[j])
        t_vu = t_vu + dealias_product(lows_v[j], blocks_u[j])
        for jp in (j - 1, j, j + 1):
            if partition.j_min <= jp <= partition.j_max:
                reso = reso + dealias_product(blocks_u[j], blocks_v[jp])
    return t_uv, t_vu, reso


@dataclass(frozen=True)
class ProductExponents:
    """Exponent set for the paraproduct estimates: 1/p = 1/p1 + 1/p2,
    1/q = 1/q1 + 1/q2, s = s1 + s2."""

    s1: float
    s2: float
    p1: float
    p2: float
    q1: float
    q2: float

    def __post_init__(self):
        for e in (self.p1, self.p2, self.q1, self.q2):
            if not e >= 1.0:
                raise ExponentError("integrability exponents must be >= 1")

    @property
    def s(self):
        return self.s1 + self.s2

    @property
    def p(self):
        return 1.0 / (_inv(self.p1) + _inv(self.p2))

    @property
    def q(self):
        return 1.0 / (_inv(self.q1) + _inv(self.q2))

    def validate(self):
        if _inv(self.p1) + _inv(self.p2) > 1.0 + 1e-12:
            raise ExponentError("1/p1 + 1/p2 exceeds 1")
        if _inv(self.q1) + _inv(self.q2) > 1.0 + 1e-12:
            raise ExponentError("1/q1 + 1/q2 exceeds 1")


def _inv(e: float) -> float:
    return 0.0 if math.isinf(e) else 1.0 / e


def paraproduct_estimate_check(u: SpectralField, v: SpectralField,
                               exponents: ProductExponents,
                               partition: DyadicPartition) -> dict:
    """Measured constants of the paraproduct estimates.

    Returns {'T': ||T_u v||_{B^s_{p,q}} / (||u||_{B^{s1}_{p1,q1}}
    ||v||_{B^{s2}_{p2,q2}}), 'R': the resonant analogue}.  The T check
    requires s1 < 0, the R check s > 0 (the hypotheses of the
    continuous estimates).
    """
    exponents.validate()
    if not exponents.s1 < 0:
        raise ExponentError("low-high paraproduct estimate requires s1 < 0")
    if not exponents.s > 0:
        raise ExponentError("resonant estimate requires s = s1 + s2 > 0")
    t_uv, _, reso = paraproduct(u, v, partition)
    nu = besov_norm(u, BesovIndex(exponents.s1, exponents.p1, exponents.q1),
                    partition).value
    nv = besov_norm(v, BesovIndex(exponents.s2, exponents.p2, exponents.q2),
                    partition).value
    if nu * nv == 0.0:
        return {"T": 0.0, "R": 0.0}
    idx = BesovIndex(exponents.s, exponents.p, exponents.q)
    nt = besov_norm(t_uv.zero_mean(), idx, partition).value
    nr = besov_norm(reso.zero_mean(), idx, partition).value
    return {"T": nt / (nu * nv), "R": nr / (nu * nv)}
