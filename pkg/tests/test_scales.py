import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dispersive_profiles.field import GridSpec, SequenceFamily, dilate_hat, fft, hs_norm_sq
from dispersive_profiles.scales import (
    ScaleError,
    ScaleSequence,
    dyadic_profile,
    is_oscillatory,
    oscillatory_defect,
    remainder_besov,
    scale_decompose,
    scales_orthogonal,
    singular_band_mass,
    singularity_report,
)


def packet(g, xi0, w, energy):
    x = g.x[..., 0]
    f = fft(np.exp(-(x**2) / (2 * w * w) + 1j * xi0 * x)[None], g)
    return f * np.sqrt(energy / hs_norm_sq(f, g, 0.0))


def static_family(g, fh, n):
    return SequenceFamily.from_hat(np.stack([fh] * n), g)


def test_scale_sequence_basics():
    h = ScaleSequence.dyadic([0, -1, -2])
    np.testing.assert_allclose(h.values, [1, 0.5, 0.25])
    np.testing.assert_array_equal(h.exponents, [0, -1, -2])
    assert ScaleSequence([3.0, 1.5]).exponents is None
    assert ScaleSequence.ones(4).is_constant
    np.testing.assert_allclose(ScaleSequence([4.0, 2.0]).normalized().values, [1.0, 0.5])
    with pytest.raises(ScaleError):
        ScaleSequence([1.0, 0.0])
    with pytest.raises(ScaleError):
        ScaleSequence([])


def test_dyadic_profile_single_mode():
    # a plane wave with |xi| = 3 dxi sits in annulus floor(log2(3 dxi))
    g = GridSpec(1, 64, 2 * np.pi)
    fh = np.zeros((1, 64), dtype=complex)
    fh[0, 3] = 1.0
    prof = dyadic_profile(static_family(g, fh, 2))
    j = int(np.floor(np.log2(3.0)))
    row = prof.masses[0]
    assert row[j - prof.j_min] == pytest.approx(g.cell)
    assert row.sum() == pytest.approx(g.cell)


def test_oscillatory_defect_of_band_limited_packet():
    g = GridSpec(1, 2048)
    fam = static_family(g, packet(g, 2.0, 8.0, 1.0), 4)
    # all mass near |xi| = 2: at scale 1/2 the band 1/R <= |xi|/2 <= R captures it
    assert oscillatory_defect(fam, np.full(4, 0.5), 4.0) < 1e-12
    # a wrong scale misses it
    assert oscillatory_defect(fam, np.full(4, 1e-3), 4.0) > 0.99
    assert is_oscillatory(fam, np.full(4, 0.5), 1e-10)
    with pytest.raises(ScaleError):
        oscillatory_defect(fam, np.full(4, 0.5), 1.0)
    with pytest.raises(ScaleError):
        oscillatory_defect(fam, np.full(3, 0.5), 2.0)


def test_singular_band_mass_and_report():
    g = GridSpec(1, 2048)
    fam = SequenceFamily.from_hat(
        np.stack([packet(g, 2.0 ** (1 - k), 8.0, 1.0) for k in range(4)]), g
    )
    mass = singular_band_mass(fam, np.ones(4), 1.0, 4.0)
    assert mass[0] > 0.9 and mass[-1] < 1e-12
    rep = singularity_report(fam, np.ones(4), 1.0, 4.0)
    assert rep["singular"] and rep["slope"] < 0


@given(a=st.integers(-6, 6), b=st.integers(-6, 6))
@settings(max_examples=40)
def test_orthogonality_of_power_laws(a, b):
    n = np.arange(1, 33)
    h = 2.0 ** (-a * n / 4)
    ht = 2.0 ** (-b * n / 4)
    res = scales_orthogonal(h, ht)
    # ratio 2^{|a-b| n/4}: last-quarter min is 2^{|a-b| 25/4}
    expected = 2.0 ** (abs(a - b) * 25 / 4)
    assert res.statistic == pytest.approx(expected)
    assert res.orthogonal == (expected > 16)


def test_small_or_shrinking_ratios_are_not_orthogonal():
    n = np.arange(1, 17)
    assert not scales_orthogonal(np.ones(16), np.full(16, 4.0)).orthogonal
    # a large ratio that is collapsing over the tail is rejected by the monotonicity rule
    assert not scales_orthogonal(np.ones(16), 1000.0 / n).orthogonal
    with pytest.raises(ScaleError):
        scales_orthogonal(np.ones(4), np.ones(5))


def test_scale_decompose_single_scale_family():
    g = GridSpec(1, 2048)
    fam = static_family(g, packet(g, 2.0, 8.0, 1.0), 8)
    rep = scale_decompose(fam, J_max=3)
    assert rep.J == 1
    assert rep.components[0].scale.is_constant
    assert rep.energy_fractions()[0] == pytest.approx(1.0, abs=1e-9)
    assert remainder_besov(rep.remainder) <= 1e-6
    assert rep.stopping_reason == "threshold"


def test_scale_decompose_recovers_two_scales():
    g = GridSpec(1, 2048)
    U1 = packet(g, 0.707, 8.0, 0.7)
    U2 = packet(g, 2.83, 8.0, 0.3)
    n_max = 16
    members = [U1 + dilate_hat(U2, g, 2.0 ** (-(n // 4)), 0.0) for n in range(1, n_max + 1)]
    fam = SequenceFamily.from_hat(np.stack(members), g)
    rep = scale_decompose(fam, J_max=4)
    assert rep.J == 2
    fr = sorted(rep.energy_fractions(), reverse=True)
    assert fr[0] == pytest.approx(0.7, abs=0.014) and fr[1] == pytest.approx(0.3, abs=0.006)
    assert rep.orthogonality and all(o["orthogonal"] for o in rep.orthogonality)
    assert rep.pythagorean["max_abs_defect"] <= 1e-10
    # components add back to the input
    total = sum(c.family.hat() for c in rep.components) + rep.remainder.hat()
    np.testing.assert_allclose(total, fam.hat(), atol=1e-12)


def test_scale_decompose_budget_stop():
    g = GridSpec(1, 2048)
    U1 = packet(g, 0.707, 8.0, 0.7)
    U2 = packet(g, 2.83, 8.0, 0.3)
    fam = static_family(g, U1 + U2, 8)
    rep = scale_decompose(fam, J_max=1)
    assert rep.J == 1 and rep.stopping_reason == "budget"
