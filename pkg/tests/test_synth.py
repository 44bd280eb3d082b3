import numpy as np
import pytest

from sindylom.loss import l0_norm
from sindylom.synth import (
    ExcitationSpec, SimulationError, builtin_plants, get_plant, simulate,
)


def test_plant_catalogue():
    names = [p.name for p in builtin_plants()]
    assert names == ["P1", "P2", "P3", "P4"]
    assert get_plant("p3").name == "P3"
    with pytest.raises(KeyError):
        get_plant("P9")
    assert [l0_norm(p.true_model.xi) for p in builtin_plants()] == [3, 5, 3, 3]


@pytest.mark.parametrize("plant", builtin_plants(), ids=lambda p: p.name)
def test_true_model_matches_closed_form(plant):
    ds = simulate(plant, N=300, seed=5)
    assert len(ds) == 301
    for k in range(300):
        np.testing.assert_allclose(ds.states[k + 1], plant.f(ds.states[k], ds.inputs[k]),
                                   rtol=1e-13, atol=1e-14)


def test_seeded_and_noisy():
    p = get_plant("P1")
    a = simulate(p, N=100, seed=3)
    b = simulate(p, N=100, seed=3)
    c = simulate(p, N=100, seed=4)
    assert np.array_equal(a.states, b.states) and not np.array_equal(a.states, c.states)
    noisy = simulate(p.with_noise(0.01), N=100, seed=3)
    assert np.array_equal(noisy.inputs, a.inputs)
    assert 0 < np.abs(noisy.states - a.states).max() < 0.1


@pytest.mark.parametrize("kind", ["steps", "sines", "chirp"])
def test_excitation_stays_in_range(kind):
    W = ExcitationSpec(kind, -2.0, 3.0).generate(2, 500, np.random.default_rng(0))
    assert W.shape == (500, 2)
    assert W.min() >= -2.0 and W.max() <= 3.0


def test_excitation_validation():
    with pytest.raises(ValueError):
        ExcitationSpec(("steps",)).generate(2, 10, np.random.default_rng(0))
    with pytest.raises(ValueError):
        ExcitationSpec("noise").generate(1, 10, np.random.default_rng(0))


def test_unstable_excitation_is_reported():
    with pytest.raises(SimulationError):
        simulate(get_plant("P2"), ExcitationSpec("steps", 50.0, 60.0), N=500, seed=0)
    with pytest.raises(ValueError):
        simulate(get_plant("P1"), N=1)
