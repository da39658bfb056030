import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimox.decoder import (
    MAX_CANDIDATES,
    CandidateOverflowError,
    LatticeModel,
    build_levels,
    exhaustive_decode,
    ml_decode,
    sphere_decode,
)


def _model(rng, batch, n, r, L, noise=0.0, var=None):
    cols = rng.standard_normal(batch + (n, r)) + 1j * rng.standard_normal(batch + (n, r))
    levels, nlev = build_levels([np.arange(L, dtype=float) * 2 - (L - 1)] * r)
    idx = rng.integers(0, L, size=batch + (r,))
    u = levels[np.arange(r), idx]
    y = np.einsum("...nr,...r->...n", cols, u)
    var = np.ones(n) if var is None else var
    y = y + noise * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return LatticeModel(y, cols, var, levels, nlev), idx


@pytest.mark.parametrize("mode", ["sphere", "exhaustive"])
def test_noiseless_recovers_truth(mode):
    model, idx = _model(np.random.default_rng(0), (30,), 4, 6, 4)
    out, metric = ml_decode(model, mode)
    np.testing.assert_array_equal(out, idx)
    np.testing.assert_allclose(metric, 0, atol=1e-18)


@pytest.mark.parametrize("mode", ["sphere", "exhaustive"])
def test_tie_goes_to_lowest_index(mode):
    levels, nlev = build_levels([[-1.0, 1.0]])
    model = LatticeModel(np.zeros((1, 1), complex), np.ones((1, 1, 1), complex), np.ones(1), levels, nlev)
    out, metric = ml_decode(model, mode)
    assert out[0, 0] == 0 and metric[0] == pytest.approx(1.0)


def test_sphere_matches_exhaustive_on_noisy_models():
    rng = np.random.default_rng(1)
    for L in (2, 3, 4):
        model, _ = _model(rng, (200,), 3, 6, L, noise=1.0, var=np.array([1.0, 2.0, 0.5]))
        np.testing.assert_array_equal(sphere_decode(model), exhaustive_decode(model))


def test_ragged_alphabets():
    rng = np.random.default_rng(2)
    levels, nlev = build_levels([[-1.0, 1.0], [-3.0, -1.0, 1.0, 3.0], [0.0, 0.5, 2.0]])
    assert np.isnan(levels[0, 2]) and list(nlev) == [2, 4, 3]
    cols = rng.standard_normal((100, 2, 3)) + 1j * rng.standard_normal((100, 2, 3))
    y = rng.standard_normal((100, 2)) * 3 + 0j
    m = LatticeModel(y, cols, np.ones(2), levels, nlev)
    a, b = sphere_decode(m), exhaustive_decode(m)
    np.testing.assert_array_equal(a, b)
    assert np.all(a < nlev)


def test_disconnected_components_are_searched_separately():
    # a block-diagonal model with many unknowns stays cheap
    r = 40
    cols = np.zeros((1, r, r), complex)
    cols[0, np.arange(r), np.arange(r)] = 1.0
    levels, nlev = build_levels([[-1.0, 1.0]] * r)
    y = np.where(np.arange(r) % 2, 0.9, -0.7)[None, :] + 0j
    out = exhaustive_decode(LatticeModel(y, cols, np.ones(r), levels, nlev))
    np.testing.assert_array_equal(out[0], np.arange(r) % 2)


def test_candidate_overflow():
    r = 24
    cols = np.ones((1, 1, r), complex)
    levels, nlev = build_levels([[-1.0, 1.0]] * r)
    assert 2**r > MAX_CANDIDATES
    with pytest.raises(CandidateOverflowError):
        exhaustive_decode(LatticeModel(np.zeros((1, 1), complex), cols, np.ones(1), levels, nlev))


def test_unknown_mode():
    model, _ = _model(np.random.default_rng(0), (1,), 2, 2, 2)
    with pytest.raises(ValueError):
        ml_decode(model, "greedy")


@given(st.integers(0, 2**31), st.floats(0.01, 100.0))
@settings(max_examples=40, deadline=None)
def test_argmin_invariant_to_common_scaling(seed, a):
    # scaling signal and noise std together leaves the whitened problem unchanged
    model, _ = _model(np.random.default_rng(seed), (5,), 3, 4, 3, noise=0.7)
    scaled = LatticeModel(a * model.y, a * model.cols, a**2 * np.asarray(model.noise_var), model.levels, model.nlev)
    np.testing.assert_array_equal(sphere_decode(scaled), sphere_decode(model))
    np.testing.assert_array_equal(exhaustive_decode(scaled), exhaustive_decode(model))
