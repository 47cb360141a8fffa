"""Mode lattice geometry: shapes, enumeration order, weights, indexing."""

import numpy as np
import pytest

import hamsplit as hs
from hamsplit.lattice import as_components


def test_full_lattice_axis_and_size():
    lat = hs.ModeLattice(1, 4, hs.FULL)
    assert lat.axis_size == 9
    assert lat.shape == (9,)
    assert lat.size == 9


def test_half_lattice_axis_and_size():
    lat = hs.ModeLattice(1, 4, hs.HALF)
    assert lat.axis_size == 5
    assert lat.shape == (5,)
    assert list(lat.axis_values()) == [0, 1, 2, 3, 4]


def test_two_dim_shape():
    lat = hs.ModeLattice(2, 3, hs.FULL)
    assert lat.shape == (7, 7)
    assert lat.size == 49


def test_validation():
    with pytest.raises(ValueError):
        hs.ModeLattice(0, 4, hs.FULL)
    with pytest.raises(ValueError):
        hs.ModeLattice(1, -1, hs.FULL)
    with pytest.raises(ValueError):
        hs.ModeLattice(1, 4, "diagonal")


def test_modes_lexicographic_d1():
    lat = hs.ModeLattice(1, 2, hs.FULL)
    assert list(lat.modes()) == [-2, -1, 0, 1, 2]


def test_modes_lexicographic_d2():
    lat = hs.ModeLattice(2, 1, hs.FULL)
    modes = list(lat.modes())
    assert modes[0] == (-1, -1)
    assert modes[-1] == (1, 1)
    assert modes == sorted(modes)
    assert len(modes) == 9


def test_contains_and_index_round_trip():
    lat = hs.ModeLattice(1, 3, hs.FULL)
    for a in lat.modes():
        assert lat.contains(a)
        idx = lat.index(a)
        assert lat.axis_values()[idx[0]] == a
    assert not lat.contains(4)
    assert not lat.contains(-4)
    with pytest.raises(ValueError):
        lat.index(17)


def test_index_matches_coeff_layout():
    lat = hs.ModeLattice(2, 2, hs.FULL)
    coeffs = np.zeros(lat.shape, dtype=complex)
    coeffs[lat.index((1, -2))] = 3.0
    state = hs.SpectralState(lat, coeffs)
    assert state.amplitude((1, -2)) == 3.0


def test_mode_weight_floor():
    # weight is sqrt(max(1, sum a_i^2)): never below 1
    assert hs.mode_weight(0) == 1.0
    assert hs.mode_weight(1) == 1.0
    assert hs.mode_weight(-3) == 3.0
    assert hs.mode_weight((0, 0)) == 1.0
    assert hs.mode_weight((3, 4)) == 5.0


def test_weights_array_matches_scalar():
    lat = hs.ModeLattice(2, 3, hs.FULL)
    w = lat.weights
    for a in lat.modes():
        assert w[lat.index(a)] == hs.mode_weight(a)


def test_sum_of_squares_raw():
    lat = hs.ModeLattice(1, 3, hs.FULL)
    ss = lat.sum_of_squares
    assert ss[lat.index(0)] == 0
    assert ss[lat.index(-3)] == 9


def test_as_components():
    assert as_components(3, 1) == (3,)
    assert as_components((1, 2), 2) == (1, 2)
    with pytest.raises(ValueError):
        as_components((1, 2), 1)
    with pytest.raises(ValueError):
        as_components(5, 2)
