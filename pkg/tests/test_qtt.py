import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tensorgrid.errors import InvalidArgumentError
from tensorgrid.qtt import fold, tt_decompose, tt_eval, tt_storage, unfold

L = 12
X = np.linspace(0.0, 1.0, 2 ** L)


def test_fold_puts_low_bit_first():
    t = fold(np.arange(8))
    assert t[1, 0, 0] == 1 and t[0, 1, 0] == 2 and t[0, 0, 1] == 4


@given(st.integers(1, 10))
def test_fold_unfold_roundtrip(levels):
    x = np.arange(2 ** levels, dtype=float)
    np.testing.assert_array_equal(unfold(fold(x)), x)


@pytest.mark.parametrize("n", [0, 1, 3, 12])
def test_rejects_non_power_of_two(n):
    with pytest.raises(InvalidArgumentError):
        fold(np.zeros(n))


def test_exponential_has_rank_one():
    q = tt_decompose(np.exp(-3.0 * X), 1e-12)
    assert set(q.ranks) == {1}
    assert tt_storage(q) == 2 * L


def test_sine_has_rank_two():
    q = tt_decompose(np.sin(7.0 * X + 0.3), 1e-12)
    assert max(q.ranks) == 2


def test_cubic_rank_at_most_four():
    f = 1.0 + X - 2.0 * X ** 2 + X ** 3
    q = tt_decompose(f, 1e-10)
    assert max(q.ranks) <= 4
    assert np.linalg.norm(q.full() - f) <= 1e-10 * np.linalg.norm(f)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 9), st.sampled_from([1e-2, 1e-5, 1e-9]), st.integers(0, 2 ** 32 - 1))
def test_reconstruction_error_bound(levels, eps, seed):
    x = np.random.default_rng(seed).standard_normal(2 ** levels)
    q = tt_decompose(x, eps)
    assert np.linalg.norm(q.full() - x) <= eps * np.linalg.norm(x) * (1 + 1e-10)


def test_entry_evaluation_matches_reconstruction():
    f = np.cos(20.0 * X) * np.exp(-X)
    q = tt_decompose(f, 1e-12)
    full = q.full()
    for i in [0, 1, 777, 2 ** L - 1]:
        assert tt_eval(q, i) == pytest.approx(full[i], abs=1e-14)
    with pytest.raises(InvalidArgumentError):
        tt_eval(q, 2 ** L)


def test_storage_is_logarithmic_for_smooth_signal():
    for levels in (10, 14, 18):
        x = np.linspace(0, 1, 2 ** levels)
        q = tt_decompose(np.exp(-x) + np.sin(5 * x), 1e-10)
        assert tt_storage(q) <= 2 * 9 * levels
