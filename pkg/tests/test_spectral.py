import numpy as np
import pytest

from nselab import (Grid, GridError, Mollifier, RankError, SpectralField,
                    SymbolError, apply_multiplier, curl, dealias_product,
                    divergence, divergence_residual, gradient, leray_project,
                    make_grid, mollify, pressure_from_velocity, read_clf1,
                    write_clf1)
from nselab.families import random_power_law, single_mode


def test_grid_validation():
    with pytest.raises(GridError):
        make_grid(4, 16, 1.0)
    with pytest.raises(GridError):
        make_grid(3, 15, 1.0)
    with pytest.raises(GridError):
        make_grid(3, 16, -1.0)


def test_round_trip_transform(grid32):
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((3,) + grid32.shape)
    f = SpectralField.from_physical(grid32, vals)
    back = f.to_physical()
    assert np.max(np.abs(back - vals)) < 1e-12 * np.max(np.abs(vals))


def test_parseval(grid32):
    for seed in range(5):
        f = random_power_law(grid32, alpha=1.0, seed=seed)
        phys = f.pointwise_magnitude()
        quad = np.sqrt(grid32.cell_volume * np.sum(phys**2))
        assert abs(quad - f.l2_norm()) < 1e-10 * f.l2_norm()


def test_hermitian_enforcement(grid16):
    coeffs = np.zeros((3,) + grid16.shape, dtype=np.complex128)
    coeffs[0, 1, 0, 0] = 1.0 + 1.0j  # no conjugate partner at -k
    with pytest.raises(RankError):
        SpectralField(grid16, "vector", coeffs, check_hermitian=True)


def test_leray_projector_idempotent(grid32):
    f = random_power_law(grid32, alpha=0.5, seed=1)
    once = leray_project(f)
    twice = leray_project(once)
    dev = (twice - once).max_abs_coeff()
    assert dev <= 1e-12 * once.max_abs_coeff()
    assert divergence_residual(once) < 1e-12


def test_divergence_of_gradient_free(grid16):
    # div curl = 0 identically
    f = random_power_law(grid16, alpha=1.0, seed=2)
    c = curl(f)
    assert divergence(c).max_abs_coeff() < 1e-13 * c.max_abs_coeff()


def test_pressure_balances_momentum(grid32):
    u = random_power_law(grid32, alpha=1.5, seed=3)
    p = pressure_from_velocity(u, u)
    tensor = dealias_product(u, u)
    xi = grid32.deriv_wavevectors
    force = 1j * np.einsum("j...,ij...->i...", xi, tensor.coeffs) \
        + 1j * xi * p.coeffs[None]
    div = np.sum(xi * force, axis=0)
    scale = np.max(np.abs(force)) * grid32.xi_max
    assert np.max(np.abs(div)) < 1e-10 * scale


def test_dealias_product_single_modes(grid16):
    # two scalar modes whose sum stays inside the retained band
    k1, k2 = 2, 3
    c = np.zeros(grid16.shape, dtype=np.complex128)
    c[k1, 0, 0] = 0.5
    c[-k1, 0, 0] = 0.5
    u = SpectralField(grid16, "scalar", c)
    d = np.zeros(grid16.shape, dtype=np.complex128)
    d[k2, 0, 0] = 0.5
    d[-k2, 0, 0] = 0.5
    v = SpectralField(grid16, "scalar", d)
    prod = dealias_product(u, v)
    # cos(k1 x) cos(k2 x) = (cos((k1+k2)x) + cos((k2-k1)x)) / 2
    assert abs(prod.coeffs[k1 + k2, 0, 0] - 0.25) < 1e-14
    assert abs(prod.coeffs[k2 - k1, 0, 0] - 0.25) < 1e-14


def test_dealias_zeroes_aliasing(grid16):
    # modes at k=7: sum 14 > N/3, aliased output must be zeroed
    c = np.zeros(grid16.shape, dtype=np.complex128)
    c[7, 0, 0] = 0.5
    c[-7, 0, 0] = 0.5
    u = SpectralField(grid16, "scalar", c)
    prod = dealias_product(u, u)
    assert not grid16.dealias_mask[7, 0, 0]
    assert np.max(np.abs(prod.coeffs[~grid16.dealias_mask])) == 0.0


def test_apply_multiplier_validation(grid16):
    f = random_power_law(grid16, alpha=1.0, seed=4)
    with pytest.raises(SymbolError):
        apply_multiplier(f, lambda xi: np.zeros((2, 2)))
    with pytest.raises(SymbolError), np.errstate(divide="ignore"):
        apply_multiplier(f, lambda xi: 1.0 / np.sum(xi**2, axis=0))


def test_mollifier_unit_mass():
    for dim in (2, 3):
        m = Mollifier(dim, 1.0)
        # radial quadrature of the normalized profile must give 1
        assert abs(m.hat(np.array([0.0]))[0] - 1.0) < 1e-10
        assert np.all(m.profile(np.array([1.0, 2.0])) == 0.0)


def test_mollify_rejects_wraparound(grid16):
    f = random_power_law(grid16, alpha=1.0, seed=5)
    with pytest.raises(GridError):
        mollify(f, Mollifier(3, 10.0))


def test_mollify_smooths(grid16):
    f = random_power_law(grid16, alpha=0.5, seed=6)
    g = mollify(f, Mollifier(3, 0.5))
    assert g.h1_seminorm() < f.h1_seminorm()


def test_clf1_round_trip(tmp_path, grid16):
    f = random_power_law(grid16, alpha=1.0, seed=7)
    path = tmp_path / "u.clf1"
    write_clf1(path, f)
    g = read_clf1(path)
    assert g.grid == f.grid
    assert g.rank == f.rank
    assert np.array_equal(g.coeffs, f.coeffs)  # bit-exact


def test_clf1_rejects_garbage(tmp_path):
    path = tmp_path / "junk.clf1"
    path.write_bytes(b"not a field\n123")
    with pytest.raises(GridError):
        read_clf1(path)


def test_single_mode_is_divergence_free(grid16):
    f = single_mode(grid16, (1, 2, 0), (1.0, 0.5, 0.25))
    assert divergence_residual(f) < 1e-13


def test_gradient_ranks(grid16):
    s = random_power_law(grid16, alpha=1.0, seed=8, rank="scalar")
    assert gradient(s).rank == "vector"
    v = random_power_law(grid16, alpha=1.0, seed=8)
    assert gradient(v).rank == "matrix"
    with pytest.raises(RankError):
        curl(s)
