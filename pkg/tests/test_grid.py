import numpy as np
import pytest
from hypothesis import given, strategies as st

from tensorgrid.errors import InvalidArgumentError, OutOfDomainError, SnapError
from tensorgrid.grid import WindowMap, grid_from_spacing, make_grid, window_for_center


def test_too_few_points():
    with pytest.raises(InvalidArgumentError):
        make_grid(20.0, 1)


def test_nonpositive_box():
    with pytest.raises(InvalidArgumentError):
        make_grid(0.0, 8)


def test_three_point_grid():
    g = make_grid(20.0, 3)
    assert g.h == 10.0
    np.testing.assert_array_equal(g.points(), [-10.0, 0.0, 10.0])


def test_mesh_size_arithmetic():
    assert make_grid(20.0, 1023).h == 0.0390625


def test_points_symmetric():
    for n in (4, 7, 64, 255):
        x = make_grid(3.7, n).points()
        np.testing.assert_array_equal(x, -x[::-1])
        np.testing.assert_allclose(x[0], -3.7 + 2 * 3.7 / (n + 1), rtol=1e-14)


def test_grid_from_spacing():
    g = grid_from_spacing(0.25, (9, 9, 17))
    assert g.h == 0.25
    assert g.b_half == (1.25, 1.25, 2.25)


@given(st.integers(2, 300), st.data())
def test_index_coordinate_roundtrip(n, data):
    g = make_grid(5.0, n)
    idx = tuple(data.draw(st.integers(0, n - 1)) for _ in range(3))
    assert g.index_of(g.coordinate(idx)) == idx


def test_central_window():
    g = make_grid(10.0, 31)
    w = window_for_center(g, (0.0, 0.0, 0.0))
    assert w.start == (15, 15, 15)
    assert w.start[0] == g.n[0] // 2


def test_shifted_window():
    g = make_grid(10.0, 31)
    for m in (-5, 1, 7):
        w = window_for_center(g, (m * g.h, 0.0, 0.0))
        assert w.start == (g.n[0] // 2 - m, 15, 15)


def test_window_reads_translated_reference(rng):
    g = make_grid(4.0, 17)
    ref = rng.standard_normal(2 * g.n[0])
    offsets = np.rint(g.reference_points() / g.h).astype(int)
    table = dict(zip(offsets, ref))
    center = g.coordinate((3, 12, 8))
    w = window_for_center(g, center)
    x = g.points()
    for _ in range(10):
        p = rng.integers(0, g.n[0])
        for axis in range(3):
            expected = table[int(np.rint((x[p] - center[axis]) / g.h))]
            assert w.apply(ref, axis)[p] == expected


def test_out_of_domain():
    with pytest.raises(OutOfDomainError):
        window_for_center(make_grid(2.0, 9), (2.5, 0, 0))


def test_snap_failure():
    g = make_grid(2.0, 9)
    with pytest.raises(SnapError):
        g.index_of((0.3 * g.h, 0, 0), tol=0.1 * g.h)
    assert g.index_of((0.3 * g.h, 0, 0)) == (4, 4, 4)


def test_window_linear(rng):
    g = make_grid(1.0, 12)
    w = window_for_center(g, g.coordinate((2, 5, 11)))
    u, v = rng.standard_normal((2, 24))
    np.testing.assert_allclose(w.apply(2.5 * u + v, 1), 2.5 * w.apply(u, 1) + w.apply(v, 1))


def test_window_shift_composition():
    w = WindowMap((10, 10, 10), (12, 12, 12))
    assert w.shifted((1, 2, -1)).shifted((2, -1, 1)) == w.shifted((3, 1, 0))


def test_window_bounds_checked():
    with pytest.raises(InvalidArgumentError):
        WindowMap((13, 0, 0), (12, 12, 12))
