import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from dispersive_profiles.symbols import (
    AdmissibilityError,
    SymbolError,
    admissible_exponents,
    custom_symbol,
    diagonal_exponent,
    eigendecompose,
    homogeneity_defect,
    is_admissible,
    jacobi_eigh,
    make_builtin,
    sobolev_exponent,
    symbol_from_id,
)


def pauli_like_dirac():
    """The standard Dirac alpha matrices built from Pauli blocks, as an independent reference."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    z = np.zeros((2, 2))
    return [np.block([[z, s], [s, z]]) for s in (sx, sy, sz)]


def test_scalar_symbols_match_formulas(rng):
    xi = rng.normal(size=(50, 3))
    r2 = np.sum(xi**2, axis=-1)
    np.testing.assert_allclose(make_builtin("schrodinger", 3)(xi)[:, 0, 0], -r2)
    np.testing.assert_allclose(make_builtin("wave", 3)(xi)[:, 0, 0], np.sqrt(r2))
    ne = make_builtin("nonelliptic", 3, 1)(xi)[:, 0, 0]
    np.testing.assert_allclose(ne, -xi[:, 0] ** 2 + xi[:, 1] ** 2 + xi[:, 2] ** 2)


def test_dirac_symbol_squares_to_laplacian(rng):
    sym = make_builtin("dirac3d", 3)
    xi = rng.normal(size=(40, 3))
    L = sym(xi)
    sq = L @ L
    target = np.sum(xi**2, axis=-1)[:, None, None] * np.eye(4)
    assert np.max(np.abs(sq - target)) < 1e-13
    # hermitian and traceless
    assert np.allclose(L, np.conj(np.swapaxes(L, -1, -2)))
    assert np.allclose(np.trace(L, axis1=-2, axis2=-1), 0)


def test_dirac_spectrum_is_plus_minus_abs_xi(rng):
    sym = make_builtin("dirac3d", 3)
    xi = rng.normal(size=(20, 3))
    lam, vec = sym.spectral(xi)
    r = np.linalg.norm(xi, axis=-1)
    np.testing.assert_allclose(np.sort(lam, axis=-1), np.stack([-r, -r, r, r], axis=-1), atol=1e-12)
    # eigenvectors reconstruct the matrix
    rebuilt = vec @ (lam[..., None] * np.conj(np.swapaxes(vec, -1, -2)))
    np.testing.assert_allclose(rebuilt, sym(xi), atol=1e-12)
    lam0, vec0 = eigendecompose(sym, xi[0])
    np.testing.assert_allclose(lam0, [-r[0], -r[0], r[0], r[0]], atol=1e-12)


def test_dirac_agrees_with_pauli_construction_up_to_unitary_equivalence(rng):
    # any choice of alpha matrices gives the same spectrum of sum alpha_j xi_j
    alphas = pauli_like_dirac()
    xi = rng.normal(size=(10, 3))
    ref = np.einsum("nj,jab->nab", xi, np.array(alphas))
    ours = make_builtin("dirac3d", 3)(xi)
    np.testing.assert_allclose(np.linalg.eigvalsh(ref), np.linalg.eigvalsh(ours), atol=1e-12)


def test_jacobi_matches_numpy_eigh(rng):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    a = a + a.conj().T
    lam, vec = jacobi_eigh(a)
    np.testing.assert_allclose(np.sort(lam), np.linalg.eigvalsh(a), atol=1e-12)
    np.testing.assert_allclose(vec @ np.diag(lam) @ vec.conj().T, a, atol=1e-12)


@given(
    xi=st.lists(st.floats(-50, 50, allow_nan=False), min_size=3, max_size=3),
    lam=st.floats(1e-3, 1e3),
)
@example(xi=[1.0, 0.001, 1.0], lam=0.001)
@settings(max_examples=60, deadline=None)
def test_homogeneity_property(xi, lam):
    xi = np.array([xi])
    if np.linalg.norm(xi) < 1e-6:
        return
    for sid in ("schrodinger", "wave", "nonelliptic:2", "dirac3d"):
        sym = symbol_from_id(sid, 3)
        assert homogeneity_defect(sym, xi, np.array([lam])) <= 1e-10


def test_symbol_errors():
    with pytest.raises(SymbolError):
        make_builtin("dirac3d", 2)
    with pytest.raises(SymbolError):
        make_builtin("nonelliptic", 1, 1)
    with pytest.raises(SymbolError):
        make_builtin("klein-gordon", 3)
    with pytest.raises(SymbolError):
        symbol_from_id("nonelliptic", 3)


def test_custom_symbol_checks_homogeneity():
    good = custom_symbol(lambda xi: np.sum(xi**4, axis=-1)[:, None, None] + 0j, d=2, N=1, alpha=4)
    assert good.alpha == 4
    with pytest.raises(SymbolError):
        custom_symbol(lambda xi: (np.sum(xi**2, axis=-1) + 1.0)[:, None, None] + 0j, d=2, N=1, alpha=2)
    with pytest.raises(SymbolError):
        custom_symbol(lambda xi: 1j * np.sum(xi**2, axis=-1)[:, None, None], d=2, N=1, alpha=2)


def test_exact_exponents():
    assert diagonal_exponent(3, 1, 2) == 10
    assert isinstance(diagonal_exponent(3, Fraction(1, 2), 1), Fraction)
    assert diagonal_exponent(3, Fraction(1, 2), 1) == 4
    assert sobolev_exponent(3, 1) == 6
    assert sobolev_exponent(1, Fraction(1, 4)) == 4


@given(
    d=st.integers(1, 4),
    s_num=st.integers(1, 15),
    alpha=st.sampled_from([1, 2]),
    p_choice=st.integers(0, 6),
)
def test_admissible_pairs_satisfy_scaling_relation(d, s_num, alpha, p_choice):
    s = Fraction(s_num, 8)
    if not 0 < s < Fraction(d, 2):
        return
    pair = admissible_exponents(d, s, alpha)
    assert pair.residual() == 0
    # the diagonal exponent exceeds the Sobolev one by a fixed amount in the reciprocal
    assert Fraction(alpha + d, 1) / pair.p == Fraction(d, 2) - s
    p = [2, 3, 4, 6, 8, 12, math.inf][p_choice]
    try:
        pr = admissible_exponents(d, s, alpha, p if p == math.inf else Fraction(p))
    except AdmissibilityError:
        assert Fraction(d, 2) - s - (0 if p == math.inf else Fraction(alpha, p)) < 0
        return
    assert is_admissible(d, float(s), alpha, float(pr.p), float(pr.q))


def test_inadmissible_inputs_raise():
    with pytest.raises(AdmissibilityError):
        diagonal_exponent(1, Fraction(1, 2), 2)
    with pytest.raises(AdmissibilityError):
        admissible_exponents(3, Fraction(1, 2), 2, 1)
    with pytest.raises(AdmissibilityError):
        # alpha/p exceeds d/2 - s
        admissible_exponents(1, Fraction(1, 4), 2, 4)
