"""Periodic spectral grids, Fourier-coefficient fields, and the multiplier
operators everything else is built from: Leray projection, pressure
recovery, spectral derivatives, mollification, and dealiased products.

Conventions
-----------
A field is stored by its Fourier coefficients ``c_k`` in numpy FFT index
order, normalized so that ``f(x) = sum_k c_k exp(i xi_k . x)`` with
``xi_k = 2*pi*k/L``.  Physical samples live on the uniform grid
``x = (L/N)*m``.  All L^p norms are uniform-grid quadratures,
``||f||_p^p = (L/N)^d * sum |f(x)|^p``; Parseval then reads
``||f||_2^2 = L^d * sum |c_k|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import j0

from .errors import GridError, RankError, SymbolError

HERMITIAN_RTOL = 1e-12

_SCALAR = "scalar"
_VECTOR = "vector"
_MATRIX = "matrix"


class Grid:
    """Isotropic periodic grid: ``dim`` axes, N points each, period L.

    Wavenumbers per axis are the integers -N/2 .. N/2-1 in FFT order;
    physical frequencies are xi = 2*pi*k/L.
    """

    def __init__(self, dim: int, n: int, box_length: float):
        if dim not in (2, 3):
            raise GridError(f"dim must be 2 or 3, got {dim}")
        if n % 2 != 0 or n < 8:
            raise GridError(f"points_per_axis must be even and >= 8, got {n}")
        if not box_length > 0:
            raise GridError(f"box_length must be positive, got {box_length}")
        self.dim = dim
        self.n = int(n)
        self.box_length = float(box_length)

        k1 = np.fft.fftfreq(self.n, d=1.0 / self.n)  # integers, FFT order
        self.k_axis = k1.astype(np.int64)
        mesh = np.meshgrid(*([k1] * dim), indexing="ij")
        self.k_int = np.stack(mesh)  # (dim, N, ..., N)
        self.wavevectors = (2.0 * np.pi / self.box_length) * self.k_int
        # for odd-order derivative symbols the unpaired Nyquist mode
        # k = -N/2 must act as zero, or real fields lose their
        # Hermitian symmetry under differentiation and projection
        self.deriv_wavevectors = np.where(self.k_int == -self.n // 2, 0.0,
                                          self.wavevectors)
        self.deriv_xi_sq = np.sum(self.deriv_wavevectors**2, axis=0)
        self.xi_sq = np.sum(self.wavevectors**2, axis=0)
        self.xi_abs = np.sqrt(self.xi_sq)
        # 2/3-rule mask: True where a mode survives a dealiased product.
        keep = np.ones(self.shape, dtype=bool)
        for a in range(dim):
            keep &= np.abs(self.k_int[a]) <= self.n / 3.0
        self.dealias_mask = keep
        self.xi_min_nonzero = 2.0 * np.pi / self.box_length
        self.xi_max = float(np.max(self.xi_abs))

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def cell_volume(self) -> float:
        return (self.box_length / self.n) ** self.dim

    @property
    def volume(self) -> float:
        return self.box_length**self.dim

    def physical_mesh(self):
        x1 = np.arange(self.n) * (self.box_length / self.n)
        return np.meshgrid(*([x1] * self.dim), indexing="ij")

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.dim == other.dim
            and self.n == other.n
            and self.box_length == other.box_length
        )

    def __hash__(self):
        return hash((self.dim, self.n, self.box_length))

    def __repr__(self):
        return f"Grid(dim={self.dim}, n={self.n}, box_length={self.box_length})"


def make_grid(dim: int, n: int, box_length: float) -> Grid:
    """Build a periodic spectral grid, validating dim/N/L."""
    return Grid(dim, n, box_length)


def _conjugate_partner(c: np.ndarray, dim: int) -> np.ndarray:
    """Return conj(c at index -k) for the trailing ``dim`` grid axes."""
    out = np.conj(c)
    for a in range(c.ndim - dim, c.ndim):
        out = np.roll(np.flip(out, axis=a), 1, axis=a)
    return out


class SpectralField:
    """Immutable periodic field stored as Fourier coefficients.

    rank 'scalar' -> coeffs shape grid.shape; 'vector' -> (dim,) + shape;
    'matrix' -> (dim, dim) + shape.
    """

    def __init__(self, grid: Grid, rank: str, coeffs: np.ndarray,
                 check_hermitian: bool = True):
        if rank not in (_SCALAR, _VECTOR, _MATRIX):
            raise RankError(f"unknown rank {rank!r}")
        expected = {
            _SCALAR: grid.shape,
            _VECTOR: (grid.dim,) + grid.shape,
            _MATRIX: (grid.dim, grid.dim) + grid.shape,
        }[rank]
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != expected:
            raise RankError(
                f"coeff shape {coeffs.shape} does not match rank {rank!r} "
                f"on {grid!r}")
        if check_hermitian:
            partner = _conjugate_partner(coeffs, grid.dim)
            scale = np.max(np.abs(coeffs))
            if scale > 0 and np.max(np.abs(coeffs - partner)) > HERMITIAN_RTOL * scale * 10:
                raise RankError("coefficients are not Hermitian-symmetric "
                                "(field would not be real-valued)")
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        self.grid = grid
        self.rank = rank
        self.coeffs = coeffs

    # -- constructors -------------------------------------------------
    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        """Build a field from real physical samples (any rank)."""
        values = np.asarray(values, dtype=np.float64)
        lead = values.shape[: values.ndim - grid.dim]
        if lead == ():
            rank = _SCALAR
        elif lead == (grid.dim,):
            rank = _VECTOR
        elif lead == (grid.dim, grid.dim):
            rank = _MATRIX
        else:
            raise RankError(f"cannot infer rank from shape {values.shape}")
        axes = tuple(range(values.ndim - grid.dim, values.ndim))
        coeffs = np.fft.fftn(values, axes=axes) / grid.n**grid.dim
        return cls(grid, rank, coeffs, check_hermitian=False)

    @classmethod
    def zero(cls, grid: Grid, rank: str = _VECTOR) -> "SpectralField":
        shape = {
            _SCALAR: grid.shape,
            _VECTOR: (grid.dim,) + grid.shape,
            _MATRIX: (grid.dim, grid.dim) + grid.shape,
        }[rank]
        return cls(grid, rank, np.zeros(shape, dtype=np.complex128),
                   check_hermitian=False)

    def with_coeffs(self, coeffs: np.ndarray,
                    check_hermitian: bool = False) -> "SpectralField":
        return SpectralField(self.grid, self.rank, coeffs,
                             check_hermitian=check_hermitian)

    # -- transforms and reductions ------------------------------------
    def to_physical(self) -> np.ndarray:
        axes = tuple(range(self.coeffs.ndim - self.grid.dim, self.coeffs.ndim))
        out = np.fft.ifftn(self.coeffs * self.grid.n**self.grid.dim, axes=axes)
        return np.real(out)

    def pointwise_magnitude(self) -> np.ndarray:
        """|f(x)| on the grid; Euclidean/Frobenius over component axes."""
        phys = self.to_physical()
        if self.rank == _SCALAR:
            return np.abs(phys)
        comp_axes = tuple(range(phys.ndim - self.grid.dim))
        return np.sqrt(np.sum(phys**2, axis=comp_axes))

    def lp_norm(self, p: float) -> float:
        """Grid-quadrature L^p norm of the pointwise magnitude."""
        mag = self.pointwise_magnitude()
        if np.isinf(p):
            return float(np.max(mag))
        return float((self.grid.cell_volume * np.sum(mag**p)) ** (1.0 / p))

    def l2_norm(self) -> float:
        """Parseval L^2 norm from the coefficients."""
        return float(np.sqrt(self.grid.volume * np.sum(np.abs(self.coeffs) ** 2)))

    def h1_seminorm(self) -> float:
        """|| |xi| f^ ||, i.e. the homogeneous H^1 seminorm."""
        w = self.grid.xi_sq * np.abs(self.coeffs) ** 2
        return float(np.sqrt(self.grid.volume * np.sum(w)))

    def sobolev_norm(self, s: float) -> float:
        """Homogeneous H^s seminorm (k=0 mode excluded)."""
        mask = self.grid.xi_sq > 0
        w = np.zeros_like(self.grid.xi_sq)
        w[mask] = self.grid.xi_sq[mask] ** s
        total = np.sum(w * np.abs(self.coeffs) ** 2)
        return float(np.sqrt(self.grid.volume * total))

    def mean_mode(self) -> np.ndarray:
        idx = (Ellipsis,) + (0,) * self.grid.dim
        return np.array(self.coeffs[idx])

    def zero_mean(self) -> "SpectralField":
        c = self.coeffs.copy()
        idx = (Ellipsis,) + (0,) * self.grid.dim
        c[idx] = 0.0
        return self.with_coeffs(c)

    def max_abs_coeff(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    # -- arithmetic ----------------------------------------------------
    def _check_compatible(self, other: "SpectralField"):
        if self.grid != other.grid or self.rank != other.rank:
            raise GridError("incompatible fields")

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, a):
        return self.with_coeffs(self.coeffs * a)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def component(self, *idx) -> "SpectralField":
        if self.rank == _SCALAR:
            raise RankError("scalar field has no components")
        return SpectralField(self.grid, _SCALAR, self.coeffs[idx],
                             check_hermitian=False)


# ---------------------------------------------------------------------
# Multipliers
# ---------------------------------------------------------------------

def apply_multiplier(field: SpectralField, symbol) -> SpectralField:
    """Apply a scalar Fourier multiplier m(xi) to every component.

    ``symbol`` receives the wavevector array of shape (dim, N, ..., N)
    and must return finite values on every grid point (including xi=0).
    """
    m = np.asarray(symbol(field.grid.wavevectors))
    if m.shape != field.grid.shape:
        raise SymbolError(f"symbol returned shape {m.shape}, "
                          f"expected {field.grid.shape}")
    if not np.all(np.isfinite(m)):
        raise SymbolError("symbol produced non-finite values on the grid")
    return field.with_coeffs(field.coeffs * m)


def radial_symbol(fn):
    """Lift a function of |xi| to a multiplier symbol."""
    def symbol(xi):
        return fn(np.sqrt(np.sum(xi**2, axis=0)))
    return symbol


def heat_symbol(grid: Grid, t: float) -> np.ndarray:
    return np.exp(-grid.xi_sq * t)


# ---------------------------------------------------------------------
# Differential / projection operators
# ---------------------------------------------------------------------

def divergence(field: SpectralField) -> SpectralField:
    """Spectral divergence i xi . u^ of a vector field."""
    if field.rank != _VECTOR:
        raise RankError("divergence needs a vector field")
    xi = field.grid.deriv_wavevectors
    c = 1j * np.sum(xi * field.coeffs, axis=0)
    return SpectralField(field.grid, _SCALAR, c, check_hermitian=False)


def gradient(field: SpectralField) -> SpectralField:
    """Spectral gradient; scalar -> vector, vector -> matrix (d_i u_j)."""
    xi = field.grid.deriv_wavevectors
    if field.rank == _SCALAR:
        c = 1j * xi * field.coeffs[None]
        return SpectralField(field.grid, _VECTOR, c, check_hermitian=False)
    if field.rank == _VECTOR:
        c = 1j * xi[:, None] * field.coeffs[None, :]
        return SpectralField(field.grid, _MATRIX, c, check_hermitian=False)
    raise RankError("gradient of a matrix field is not supported")


def curl(field: SpectralField):
    """Spectral curl; 3D vector -> vector, 2D vector -> scalar."""
    if field.rank != _VECTOR:
        raise RankError("curl needs a vector field")
    xi = field.grid.deriv_wavevectors
    u = field.coeffs
    if field.grid.dim == 2:
        c = 1j * (xi[0] * u[1] - xi[1] * u[0])
        return SpectralField(field.grid, _SCALAR, c, check_hermitian=False)
    c = 1j * np.stack([
        xi[1] * u[2] - xi[2] * u[1],
        xi[2] * u[0] - xi[0] * u[2],
        xi[0] * u[1] - xi[1] * u[0],
    ])
    return SpectralField(field.grid, _VECTOR, c, check_hermitian=False)


def leray_project(field: SpectralField) -> SpectralField:
    """Project onto divergence-free fields: (delta_ij - xi_i xi_j/|xi|^2)."""
    if field.rank != _VECTOR:
        raise RankError("Leray projection needs a vector field")
    g = field.grid
    inv = np.zeros_like(g.deriv_xi_sq)
    nz = g.deriv_xi_sq > 0
    inv[nz] = 1.0 / g.deriv_xi_sq[nz]
    xi = g.deriv_wavevectors
    xu = np.sum(xi * field.coeffs, axis=0)  # xi . u^
    c = field.coeffs - xi * (xu * inv)[None]
    return field.with_coeffs(c)


def divergence_residual(field: SpectralField) -> float:
    """max_k |xi . u^| / max |u^|; 0 for the zero field."""
    scale = field.max_abs_coeff()
    if scale == 0:
        return 0.0
    xu = np.sum(field.grid.deriv_wavevectors * field.coeffs, axis=0)
    return float(np.max(np.abs(xu)) / (field.grid.xi_max * scale))


def dealias_product(u: SpectralField, v: SpectralField) -> SpectralField:
    """Pointwise product in physical space, 2/3-rule dealiased.

    vector x vector gives the tensor u_i v_j; scalar factors multiply
    componentwise.
    """
    if u.grid != v.grid:
        raise GridError("fields on different grids")
    g = u.grid
    pu = u.to_physical()
    pv = v.to_physical()
    if u.rank == _VECTOR and v.rank == _VECTOR:
        prod = pu[:, None] * pv[None, :]
        rank = _MATRIX
    elif u.rank == _SCALAR and v.rank == _SCALAR:
        prod = pu * pv
        rank = _SCALAR
    elif u.rank == _SCALAR:
        prod = pu[None] * pv if v.rank == _VECTOR else pu[(None, None)] * pv
        rank = v.rank
    elif v.rank == _SCALAR:
        return dealias_product(v, u)
    else:
        raise RankError(f"unsupported product ranks {u.rank} x {v.rank}")
    axes = tuple(range(prod.ndim - g.dim, prod.ndim))
    c = np.fft.fftn(prod, axes=axes) / g.n**g.dim
    c = c * g.dealias_mask
    return SpectralField(g, rank, c, check_hermitian=False)


def dealias(field: SpectralField) -> SpectralField:
    """Truncate a field to the 2/3 dealias band."""
    return field.with_coeffs(field.coeffs * field.grid.dealias_mask)


def pressure_from_velocity(u: SpectralField, v: SpectralField) -> SpectralField:
    """(-Laplace)^{-1} div div (u (x) v) with zero mean.

    For u = v this is the Navier-Stokes pressure of the convention
    du/dt - Lap u + div(u(x)u) + grad p = 0.
    """
    if u.rank != _VECTOR or v.rank != _VECTOR:
        raise RankError("pressure recovery needs vector fields")
    g = u.grid
    tensor = dealias_product(u, v)
    xi = g.deriv_wavevectors
    num = -np.einsum("i...,j...,ij...->...", xi, xi, tensor.coeffs)
    inv = np.zeros_like(g.deriv_xi_sq)
    nz = g.deriv_xi_sq > 0
    inv[nz] = 1.0 / g.deriv_xi_sq[nz]
    return SpectralField(g, _SCALAR, num * inv, check_hermitian=False)


# ---------------------------------------------------------------------
# Mollification
# ---------------------------------------------------------------------

_GAUSS_NODES = 256


def _bump(r: np.ndarray) -> np.ndarray:
    """Unnormalized kernel exp(-1/(1-r^2)) on [0,1), 0 outside."""
    out = np.zeros_like(r)
    inside = r < 1.0
    ri = r[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ri**2))
    return out


@dataclass
class Mollifier:
    """Radial compactly supported unit-mass kernel theta, scaled by rho.

    theta(x) = c * exp(-1/(1-|x|^2)) for |x| < 1, zero outside; c fixes
    unit integral in the given dimension.  Frequency response
    theta^(s) is tabulated by Gauss-Legendre quadrature of the radial
    profile, normalized so theta^(0) = 1 exactly.
    """

    dim: int
    rho: float
    _nodes: np.ndarray = dc_field(init=False, repr=False)
    _weights: np.ndarray = dc_field(init=False, repr=False)
    _mass: float = dc_field(init=False, repr=False)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise GridError("mollifier dimension must be 2 or 3")
        if not self.rho > 0:
            raise GridError("mollifier rho must be positive")
        x, w = leggauss(_GAUSS_NODES)
        r = 0.5 * (x + 1.0)
        wr = 0.5 * w
        self._nodes = r
        self._weights = wr
        surf = 2.0 * np.pi if self.dim == 2 else 4.0 * np.pi
        self._mass = float(surf * np.sum(wr * _bump(r) * r ** (self.dim - 1)))

    def profile(self, r: np.ndarray) -> np.ndarray:
        """theta(|x|), normalized to unit mass."""
        return _bump(np.asarray(r, dtype=np.float64)) / self._mass

    def hat(self, s: np.ndarray) -> np.ndarray:
        """theta^(s) for the unit-support kernel; theta^(0) = 1."""
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        r = self._nodes
        g = self._weights * _bump(r) * r ** (self.dim - 1)
        sr = np.multiply.outer(s, r)
        if self.dim == 3:
            kern = np.sinc(sr / np.pi)  # sin(sr)/(sr)
            vals = 4.0 * np.pi * np.sum(g * kern, axis=-1)
        else:
            vals = 2.0 * np.pi * np.sum(g * j0(sr), axis=-1)
        return vals / self._mass


def mollify(field: SpectralField, mollifier: Mollifier) -> SpectralField:
    """Convolve with theta_rho, i.e. multiply by theta^(rho |xi|).

    Rejects rho >= box length (the kernel would wrap around the torus).
    """
    g = field.grid
    if mollifier.dim != g.dim:
        raise GridError("mollifier dimension does not match the grid")
    if mollifier.rho >= g.box_length:
        raise GridError("mollifier radius exceeds the periodic box")
    svals = mollifier.rho * g.xi_abs.ravel()
    m = mollifier.hat(svals).reshape(g.shape)
    return field.with_coeffs(field.coeffs * m)


# ---------------------------------------------------------------------
# CLF1 field file format
# ---------------------------------------------------------------------

def write_clf1(path, field: SpectralField) -> None:
    """Write a field as CLF1: ASCII header then little-endian float64
    (re, im) pairs in row-major k-order per component."""
    g = field.grid
    ncomp = {_SCALAR: 1, _VECTOR: g.dim, _MATRIX: g.dim * g.dim}[field.rank]
    header = f"CLF1 {g.dim} {g.n} {g.box_length!r} {field.rank} {ncomp}\n"
    flat = field.coeffs.reshape(ncomp, -1)
    pairs = np.empty((ncomp, flat.shape[1], 2), dtype="<f8")
    pairs[..., 0] = flat.real
    pairs[..., 1] = flat.imag
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(pairs.tobytes())


def read_clf1(path) -> SpectralField:
    """Read a CLF1 field file; bit-exact inverse of write_clf1."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 6 or header[0] != "CLF1":
            raise GridError(f"not a CLF1 file: {path}")
        dim, n = int(header[1]), int(header[2])
        box = float(header[3])
        rank = header[4]
        ncomp = int(header[5])
        raw = np.frombuffer(fh.read(), dtype="<f8")
    grid = Grid(dim, n, box)
    npts = n**dim
    if raw.size != ncomp * npts * 2:
        raise GridError("CLF1 payload size mismatch")
    pairs = raw.reshape(ncomp, npts, 2)
    coeffs = (pairs[..., 0] + 1j * pairs[..., 1])
    shape = {
        _SCALAR: grid.shape,
        _VECTOR: (dim,) + grid.shape,
        _MATRIX: (dim, dim) + grid.shape,
    }[rank]
    return SpectralField(grid, rank, coeffs.reshape(shape),
                         check_hermitian=False)
