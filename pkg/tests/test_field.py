import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dispersive_profiles.field import (
    AliasingError,
    Field,
    FieldMismatchError,
    GridError,
    GridSpec,
    SequenceFamily,
    _dilation_matrix,
    annulus_masses,
    besov_sup_norm,
    dilate_hat,
    dyadic_exponent,
    fft,
    ifft,
    lebesgue_norm,
    profile_operator,
    propagate,
    sobolev_norm,
    strichartz_norm,
    time_sweep,
    transform,
    translate_hat,
)
from dispersive_profiles.symbols import AdmissibilityError, make_builtin, symbol_from_id


def gaussian(grid, w=1.0, c=0.0):
    return Field(grid, np.exp(-np.sum((grid.x - c) ** 2, axis=-1) / (2 * w * w)), "physical")


def test_grid_validation():
    with pytest.raises(GridError):
        GridSpec(1, 100)
    with pytest.raises(GridError):
        GridSpec(0, 64)
    with pytest.raises(GridError):
        GridSpec(1, 64, -1.0)
    with pytest.raises(GridError):
        GridSpec(3, 1024)


def test_coordinates_in_fft_order():
    g = GridSpec(1, 8, 8.0)
    np.testing.assert_allclose(g.x1d, [0, 1, 2, 3, -4, -3, -2, -1])
    np.testing.assert_allclose(g.xi1d, 2 * np.pi / 8 * np.array([0, 1, 2, 3, -4, -3, -2, -1]))


def test_parseval(grid2, rng):
    f = rng.normal(size=(2,) + grid2.shape) + 1j * rng.normal(size=(2,) + grid2.shape)
    F = fft(f, grid2)
    assert np.allclose(np.sum(np.abs(f) ** 2) * grid2.cell, np.sum(np.abs(F) ** 2) * grid2.cell)
    np.testing.assert_allclose(ifft(F, grid2), f, atol=1e-12)
    fld = Field(grid2, f)
    np.testing.assert_allclose(transform(transform(fld), "inverse").samples, f, atol=1e-12)


def test_plane_wave_norms():
    g = GridSpec(1, 64, 2 * np.pi)
    k = 5
    f = Field(g, np.exp(1j * k * g.x1d), "physical")
    # |xi|^s weight at a single mode; L^2 norm is sqrt(L)
    assert sobolev_norm(f, 0.0) == pytest.approx(math.sqrt(2 * np.pi), rel=1e-12)
    assert sobolev_norm(f, 0.5) == pytest.approx(math.sqrt(k) * math.sqrt(2 * np.pi), rel=1e-12)
    assert lebesgue_norm(f, math.inf) == pytest.approx(1.0)
    assert lebesgue_norm(f, 4) == pytest.approx((2 * np.pi) ** 0.25, rel=1e-12)


def test_zero_mode_has_no_weight():
    g = GridSpec(1, 32)
    f = Field(g, np.ones(32), "physical")
    assert sobolev_norm(f, 0.0) == 0.0
    assert besov_sup_norm(f) == 0.0


def test_lattice_translation_matches_roll(grid2, rng):
    f = rng.normal(size=(1,) + grid2.shape) + 0j
    shift = np.array([3 * grid2.dx, -5 * grid2.dx])
    moved = ifft(translate_hat(fft(f, grid2), grid2, shift), grid2)
    np.testing.assert_allclose(moved, np.roll(f, (3, -5), axis=(1, 2)), atol=1e-12)


def test_annulus_masses_partition_energy(grid2, rng):
    f = rng.normal(size=(1,) + grid2.shape) + 0j
    fh = fft(f, grid2)
    fh[0, 0, 0] = 0
    m = annulus_masses(fh, grid2)
    assert m.sum() == pytest.approx(sobolev_norm(Field(grid2, fh, "frequency"), 0.0) ** 2, rel=1e-12)


def test_schrodinger_gaussian_sup_norm_closed_form():
    # e^{it Delta} of exp(-x^2/2) has modulus peak (1 + 4 t^2)^(-1/4)
    g = GridSpec(1, 2048, 200.0)
    sym = make_builtin("schrodinger", 1)
    f = gaussian(g)
    for t in (0.0, 0.5, 1.0, 3.0, 7.0):
        u = propagate(f, sym, t)
        assert lebesgue_norm(u, math.inf) == pytest.approx((1 + 4 * t * t) ** -0.25, rel=1e-10)


def test_schrodinger_gaussian_full_profile_2d():
    g = GridSpec(2, 128, 60.0)
    sym = make_builtin("schrodinger", 2)
    w, t = 1.5, 0.8
    z = w * w + 2j * t
    ref = (w * w / z) * np.exp(-np.sum(g.x**2, axis=-1) / (2 * z))
    got = propagate(gaussian(g, w), sym, t).phys[0]
    assert np.max(np.abs(got - ref)) < 1e-12


def test_wave_d1_is_transport():
    # |D| on a right-moving analytic signal moves it left: exp(it|xi|) on positive frequencies
    g = GridSpec(1, 512, 100.0)
    sym = make_builtin("wave", 1)
    f = gaussian(g, 2.0).hat
    pos = f * (g.xi1d > 0)
    shifted = translate_hat(pos, g, [-6.0])
    np.testing.assert_allclose(propagate(Field(g, pos, "frequency"), sym, 6.0).hat, shifted, atol=1e-12)


@pytest.mark.parametrize("sid,d", [("schrodinger", 2), ("wave", 2), ("nonelliptic:1", 2), ("dirac3d", 3)])
def test_group_law_and_unitarity(sid, d, rng):
    g = GridSpec(d, 16 if d == 3 else 32, 20.0)
    sym = symbol_from_id(sid, d)
    f = Field(g, rng.normal(size=(sym.N,) + g.shape) + 1j * rng.normal(size=(sym.N,) + g.shape))
    a = propagate(propagate(f, sym, 0.7), sym, -1.9)
    b = propagate(f, sym, -1.2)
    np.testing.assert_allclose(a.hat, b.hat, atol=1e-11)
    for s in (0.0, 0.5):
        assert sobolev_norm(b, s) == pytest.approx(sobolev_norm(f, s), rel=1e-12)


def test_dirac_closed_form_against_matrix_exponential(rng):
    from scipy.linalg import expm

    g = GridSpec(3, 8, 10.0)
    sym = make_builtin("dirac3d", 3)
    f = Field(g, rng.normal(size=(4,) + g.shape) + 0j, "frequency")
    t = 0.9
    got = propagate(f, sym, t).hat
    L = sym(g.xi.reshape(-1, 3))
    ref = np.stack([expm(1j * t * Lk) @ fk for Lk, fk in zip(L, f.hat.reshape(4, -1).T)]).T
    np.testing.assert_allclose(got.reshape(4, -1), ref, atol=1e-12)


def test_field_mismatch():
    g = GridSpec(1, 32)
    with pytest.raises(FieldMismatchError):
        propagate(Field(g, np.zeros((2, 32))), make_builtin("wave", 1), 1.0)
    with pytest.raises(FieldMismatchError):
        SequenceFamily((Field(g, np.zeros(32)), Field(GridSpec(1, 64), np.zeros(64))))


@pytest.mark.parametrize("k", [-2, -1, 1, 2])
def test_dyadic_dilation_matches_dense(k):
    g = GridSpec(2, 64, 40.0)
    h = 2.0**k
    # both paths evaluate the same trigonometric interpolant, so the aliasing guard is off
    f = gaussian(g, 2.0).hat
    fast = dilate_hat(f, g, h, 0.0, check=False)
    mat = _dilation_matrix(g, h)
    dense = f
    for axis in (1, 2):
        dense = np.moveaxis(np.tensordot(dense, mat, axes=([axis], [1])), -1, axis)
    dense = fft(dense, g) * h ** (-(g.d / 2))
    np.testing.assert_allclose(fast, dense, atol=1e-10)


def test_dilation_of_gaussian_is_exact():
    g = GridSpec(1, 1024, 100.0)
    for h in (0.5, 2.0, 1.5, 0.7):
        got = ifft(dilate_hat(gaussian(g, 2.0).hat, g, h, 0.25), g)[0]
        ref = h ** (-(0.5 - 0.25)) * np.exp(-(g.x1d / h) ** 2 / 8.0)
        assert np.max(np.abs(got - ref)) < 1e-10


@given(k=st.integers(-2, 2), s=st.sampled_from([0.0, 0.25]))
@settings(max_examples=20, deadline=None)
def test_dilation_preserves_homogeneous_norm(k, s):
    g = GridSpec(1, 1024, 100.0)
    f = Field(g, gaussian(g, 2.0).phys * np.exp(3j * g.x1d), "physical")
    out = Field(g, dilate_hat(f.hat, g, 2.0**k, s), "frequency")
    assert sobolev_norm(out, s) == pytest.approx(sobolev_norm(f, s), rel=1e-8)


def test_dilation_refuses_lossy_and_oversized():
    g = GridSpec(1, 256, 50.0)
    with pytest.raises(AliasingError):
        dilate_hat(gaussian(g, 0.3).hat, g, 0.25, 0.0)
    with pytest.raises(AliasingError):
        dilate_hat(gaussian(g, 8.0).hat, g, 4.0, 0.0)
    big = GridSpec(1, 4096, 400.0)
    with pytest.raises(GridError):
        dilate_hat(gaussian(big, 2.0).hat, big, 1.5, 0.0)
    assert dyadic_exponent(0.25) == -2 and dyadic_exponent(3.0) is None


def test_profile_operator_homogeneity_identity():
    # h^{-(d/2-s)} [e^{i t0/h^a L} U]((x-x0)/h) equals e^{i t0 L} applied to the rescaled, shifted U
    g = GridSpec(1, 2048, 200.0)
    sym = make_builtin("schrodinger", 1)
    U = Field(g, gaussian(g, 2.0).phys * np.exp(0.5j * g.x1d), "physical")
    h, x0, t0, s = 2.0, 7.0, 3.0, 0.25
    lhs = profile_operator(U, h, x0, t0, sym, s)
    scaled = Field(g, translate_hat(dilate_hat(U.hat, g, h, s), g, [x0]), "frequency")
    rhs = propagate(scaled, sym, t0)
    assert np.max(np.abs(lhs.phys - rhs.phys)) < 1e-10


def test_strichartz_norm_requires_admissible_pair():
    g = GridSpec(1, 256)
    sym = make_builtin("schrodinger", 1)
    f = gaussian(g, 2.0)
    with pytest.raises(AdmissibilityError):
        strichartz_norm(f, sym, 8, 4, T=2.0, s=0.25)
    val = strichartz_norm(f, sym, 12, 12, T=2.0, n_t=65, s=0.25)
    assert val > 0
    forced = strichartz_norm(f, sym, 8, 4, T=2.0, override=True)
    assert forced > 0


def test_strichartz_trapezoid_against_closed_form():
    # ||e^{it Delta} exp(-x^2/2)||_{L^inf_x} = (1+4t^2)^(-1/4); L^4_t of that over [-T,T]
    from scipy.integrate import quad

    g = GridSpec(1, 1024, 200.0)
    sym = make_builtin("schrodinger", 1)
    T, n_t = 2.0, 401
    vals = time_sweep(gaussian(g).hat, sym, g, np.linspace(-T, T, n_t), [math.inf])[:, 0]
    np.testing.assert_allclose(vals, (1 + 4 * np.linspace(-T, T, n_t) ** 2) ** -0.25, rtol=1e-10)
    exact = quad(lambda t: (1 + 4 * t * t) ** -1.0, -T, T)[0] ** 0.25
    got = strichartz_norm(gaussian(g), sym, 4, math.inf, T=T, n_t=n_t, override=True)
    assert got == pytest.approx(exact, rel=1e-5)
