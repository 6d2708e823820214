import numpy as np
import pytest

from dispersive_profiles.field import GridSpec, hs_norm_sq, sobolev_norm
from dispersive_profiles.symbols import symbol_from_id
from dispersive_profiles.synthesis import (
    PlantError,
    PlantSpec,
    PlantedProfile,
    ProfileLaw,
    divergence_statistic,
    make_shape,
    orthogonal_laws,
    plant,
    white_hs_noise,
)


def test_make_shape_energy_and_mean():
    g = GridSpec(1, 256)
    for kind in ("gaussian", "ricker", "bump", "modulated_gaussian"):
        f = make_shape(g, {"kind": kind, "width": 2.0, "energy": 0.3, "xi0": 1.0}, 1, 0.25)
        assert sobolev_norm(f, 0.25) ** 2 == pytest.approx(0.3, rel=1e-12)
    with pytest.raises(PlantError):
        make_shape(g, {"kind": "gaussian", "width": -1.0})


def test_divergence_statistic_formula():
    a = ProfileLaw(np.ones(3), np.array([0.0, 1.0, 2.0]), np.zeros((3, 1)))
    b = ProfileLaw(np.full(3, 0.5), np.zeros(3), np.array([[1.0], [2.0], [3.0]]))
    # h/h' + h'/h + |t - t'|/h^alpha + |x - x'|/h with h = 1
    np.testing.assert_allclose(divergence_statistic(a, b, 2.0), 2.5 + np.array([0, 1, 2]) + np.array([1, 2, 3]))


@pytest.mark.parametrize("kind", ["space_divergent", "time_divergent", "scale_divergent", "mixed"])
def test_orthogonal_laws_diverge(kind):
    g = GridSpec(1, 1024, 400.0)
    laws = orthogonal_laws(3, 16, kind, g, width=1.0, dt=0.5)
    for a in range(3):
        for b in range(a + 1, 3):
            stat = divergence_statistic(laws[a], laws[b], 2.0, g)
            assert stat[-1] > stat[0]


def test_orthogonal_laws_reject_oversized_drift():
    with pytest.raises(PlantError):
        orthogonal_laws(3, 64, "space_divergent", GridSpec(1, 256), width=4.0)
    with pytest.raises(PlantError):
        orthogonal_laws(5, 8, "mixed", GridSpec(1, 256))


def test_white_noise_level(rng):
    g = GridSpec(2, 32)
    n = white_hs_noise(g, 1, 0.5, 1e-3, rng)
    assert float(np.sqrt(hs_norm_sq(n, g, 0.5))) == pytest.approx(1e-3, rel=1e-12)
    assert n[0, 0, 0] == 0


def test_plant_ledger_and_determinism():
    g = GridSpec(1, 256)
    sym = symbol_from_id("schrodinger", 1)
    laws = orthogonal_laws(2, 8, "mixed", g, width=2.0, dt=0.5)
    spec = PlantSpec(
        g,
        [PlantedProfile({"kind": "ricker", "width": 2.0, "energy": e}, law) for e, law in zip([1.0, 0.5], laws)],
        n_max=8,
        noise_level=1e-3,
        seed=7,
        require_orthogonal=True,
        T=8.0,
        n_t=33,
    )
    fam, ledger = plant(spec, sym, 0.25)
    fam2, _ = plant(spec, sym, 0.25)
    np.testing.assert_array_equal(fam.hat(), fam2.hat())
    assert len(fam) == 8
    assert [p["energy"] for p in ledger["profiles"]] == pytest.approx([1.0, 0.5])
    assert ledger["noise"]["s_floor"] > 0
    # separated packets: the member energy is the planted sum up to small cross terms
    assert max(ledger["cross_term_defect"]) < 1e-2


def test_plant_requires_orthogonality_when_asked():
    g = GridSpec(1, 256)
    sym = symbol_from_id("schrodinger", 1)
    static = ProfileLaw.static(8, 1)
    near = ProfileLaw.static(8, 1, x=[4.0])
    spec = PlantSpec(
        g,
        [PlantedProfile({"kind": "gaussian", "width": 2.0}, static), PlantedProfile({"kind": "gaussian", "width": 2.0}, near)],
        n_max=8,
        require_orthogonal=True,
    )
    with pytest.raises(PlantError):
        plant(spec, sym, 0.25)


def test_plant_spec_from_json():
    obj = {
        "d": 1,
        "grid": {"M": 256},
        "n_max": 8,
        "T": 8.0,
        "n_t": 33,
        "laws": {"kind": "mixed"},
        "profiles": [{"kind": "ricker", "width": 2.0, "energy": 1.0}, {"kind": "ricker", "width": 2.0, "energy": 0.5}],
        "noise": {"level": 1e-3},
        "seed": 2,
    }
    spec = PlantSpec.from_json(obj)
    assert spec.grid.M == 256 and spec.n_max == 8 and len(spec.profiles) == 2
    assert spec.noise_level == 1e-3
