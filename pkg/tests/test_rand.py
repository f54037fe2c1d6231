"""Seeded random substrate: determinism, stream independence, and the
distributional quality of the normal and uniform-index draws."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgdmlab import GENERATOR_NAME, RngStream
from sgdmlab.rand import batch_indices, normal_vector

# 1% critical value of chi-square with 99 dof (scipy.stats.chi2.ppf(0.99, 99))
CHI2_99_CRIT = 134.64161685578915


def test_generator_name_is_fixed():
    assert GENERATOR_NAME == "philox4x64-ziggurat"


def test_fixed_seed_first_values_frozen():
    # cross-run / cross-platform reproducibility contract: these literals
    # must never change for (seed=42, stream=0)
    got = RngStream(42).normal_vector(5)
    frozen = np.array([
        0.3375714466967798, -0.7821534784435413, -0.3160252007782352,
        -2.1012153395949684, 0.6151910649170811,
    ])
    assert got.tolist() == frozen.tolist()


def test_same_key_bit_identical():
    a = RngStream(123, stream=4).standard_normal(64)
    b = RngStream(123, stream=4).standard_normal(64)
    assert a.tolist() == b.tolist()


def test_distinct_streams_differ():
    a = RngStream(123, stream=0).standard_normal(32)
    b = RngStream(123, stream=1).standard_normal(32)
    c = RngStream(124, stream=0).standard_normal(32)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_child_stream_matches_direct_construction():
    parent = RngStream(9)
    assert parent.child(3).standard_normal(8).tolist() == \
        RngStream(9, stream=3).standard_normal(8).tolist()


def test_normal_moments_one_million_draws():
    draws = RngStream(7).standard_normal(1_000_000)
    assert abs(draws.mean()) < 0.005
    assert 0.995 <= draws.var() <= 1.005


def test_single_batch_index_in_range():
    idx = RngStream(5).batch_indices(17, 1)
    assert idx.shape == (1,)
    assert 0 <= idx[0] < 17


def test_batch_indices_same_seed_identical():
    a = RngStream(31).batch_indices(1000, 500)
    b = RngStream(31).batch_indices(1000, 500)
    assert a.tolist() == b.tolist()


def test_batch_indices_chi_square_uniformity():
    idx = RngStream(12).batch_indices(100, 1_000_000)
    counts = np.bincount(idx, minlength=100)
    expected = 1_000_000 / 100
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < CHI2_99_CRIT


def test_module_level_wrappers():
    assert normal_vector(RngStream(2), 3).shape == (3,)
    idx = batch_indices(RngStream(2), 10, 6)
    assert idx.shape == (6,)
    assert np.all((0 <= idx) & (idx < 10))


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(0, stream=-2)


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=10_000),
    b=st.integers(min_value=1, max_value=512),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_indices_always_in_range(n, b, seed):
    idx = RngStream(seed).batch_indices(n, b)
    assert idx.shape == (b,)
    assert np.all((0 <= idx) & (idx < n))
