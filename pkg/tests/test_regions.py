import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import triggering_value
from petcsched.errors import InputError
from petcsched.lti import PlantLoop, timing_tables
from petcsched.regions import (RegionSpec, effective_bounds, normalized_extreme_eigs,
                               region_of_state, regions_of_states)

# normalized extreme eigenvalues of N(k) around the maximum inter-event bound
# (frozen from an independent eigen-decomposition run)
FROZEN_LAMBDA_MIN = {
    "loop1": {18: -1.291821e-03, 19: -9.991301e-04},
    "loop2": {15: -1.128243e-03, 16: -8.557526e-04},
}


def test_region_spec_validation():
    with pytest.raises(InputError):
        RegionSpec(5, 4)
    with pytest.raises(InputError):
        RegionSpec(0, 4)
    with pytest.raises(InputError):
        RegionSpec(2, 4, eig_threshold=0.0)
    assert list(RegionSpec(3, 5).regions) == [3, 4, 5] and len(RegionSpec(3, 5)) == 3


@pytest.mark.parametrize("lid, bounds", [("loop1", (6, 19)), ("loop2", (4, 16))])
def test_effective_bounds_batch_reactor(designed, lid, bounds):
    spec = effective_bounds(designed[lid].tables, 1e-3)
    assert (spec.k_min, spec.k_max) == bounds


@pytest.mark.parametrize("lid", ["loop1", "loop2"])
def test_frozen_boundary_eigenvalues(designed, lid):
    for k, ref in FROZEN_LAMBDA_MIN[lid].items():
        lo, hi = normalized_extreme_eigs(designed[lid].tables.N(k))
        assert lo == pytest.approx(ref, rel=1e-5)
        assert hi == pytest.approx(1.0)


def test_forms_below_minimum_are_negative_definite(designed):
    tb = designed["loop1"].tables
    for k in range(1, 6):
        assert normalized_extreme_eigs(tb.N(k))[1] < 0


def test_degenerate_forms_give_single_region():
    loop = PlantLoop([[-1.0]], [[1.0]], [[-1.0]], "0.1", 7, np.diag([-1.0, 0.0]))
    spec = effective_bounds(timing_tables(loop))
    assert (spec.k_min, spec.k_max) == (7, 7)


def test_region_of_state_matches_integrated_trigger(designed):
    """First check at which the trigger fires, found by ODE integration instead of N(k)."""
    d = designed["loop1"]
    spec = effective_bounds(d.tables)
    rng = np.random.default_rng(11)
    for _ in range(40):
        x = rng.standard_normal(4)
        expected = spec.k_max
        for k in range(spec.k_min, spec.k_max):
            if triggering_value(d.loop, k, x, d.loop.hf / 200) > 0:
                expected = k
                break
        assert region_of_state(x, d.tables, spec) == expected


def test_region_of_state_falls_back_to_k_max():
    loop = PlantLoop([[-1.0]], [[1.0]], [[-1.0]], "0.1", 5, -np.eye(2))
    tb = timing_tables(loop)
    assert region_of_state([1.0], tb, RegionSpec(2, 4)) == 4


def test_region_of_state_rejects_nan(designed):
    with pytest.raises(InputError):
        region_of_state([np.nan, 0, 0, 0], designed["loop1"].tables, RegionSpec(6, 19))


def test_vectorized_agrees_with_scalar(designed):
    d = designed["loop2"]
    spec = RegionSpec(4, 16)
    X = np.random.default_rng(2).standard_normal((300, 4))
    vec = regions_of_states(X, d.tables, spec)
    assert list(vec) == [region_of_state(x, d.tables, spec) for x in X]


vectors = st.lists(st.floats(-10, 10, allow_nan=False), min_size=4, max_size=4).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


@settings(max_examples=200, deadline=None)
@given(x=vectors, scale=st.floats(1e-3, 1e3) | st.floats(-1e3, -1e-3))
def test_region_is_scale_invariant(designed, x, scale):
    d = designed["loop1"]
    spec = RegionSpec(6, 19)
    x = np.array(x)
    assert region_of_state(scale * x, d.tables, spec) == region_of_state(x, d.tables, spec)
