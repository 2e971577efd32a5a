import json

import numpy as np
import pytest

from rotdiv.alphabet import (RotationPattern, difference_set, make_alphabet,
                             random_rotation)


def test_bpsk_points():
    a = make_alphabet("bpsk")
    assert np.array_equal(a.points, [1.0, -1.0])
    assert a.bits_per_symbol == 1


def test_qpsk_points():
    a = make_alphabet("qpsk")
    assert a.bits_per_symbol == 2
    expected = {(1 + 1j), (1 - 1j), (-1 + 1j), (-1 - 1j)}
    got = {complex(np.round(p * np.sqrt(2), 9)) for p in a.points}
    assert got == expected


def test_qam16_unit_energy():
    a = make_alphabet("qam16")
    assert a.size == 16
    assert abs(a.mean_energy - 1.0) <= 1e-12


def test_unsupported_kind():
    with pytest.raises(ValueError):
        make_alphabet("qam64")


def test_gray_labelling_adjacent_points_differ_in_one_bit():
    # Nearest neighbours on each axis must differ in exactly one bit.
    a = make_alphabet("qam16")
    bits = a.index_to_bits()
    pts = a.points
    spacing = 2 / np.sqrt(10)
    for i in range(a.size):
        for j in range(a.size):
            if abs(abs(pts[i] - pts[j]) - spacing) < 1e-9:
                assert np.count_nonzero(bits[i] != bits[j]) == 1


def test_bits_roundtrip():
    a = make_alphabet("qpsk")
    bits = np.array([[0, 1], [1, 0], [1, 1], [0, 0]], dtype=np.uint8)
    idx = a.bits_to_indices(bits)
    assert np.array_equal(a.index_to_bits()[idx], bits)
    assert np.array_equal(a.nearest_indices(a.points[idx]), idx)


def test_difference_set_bpsk():
    b = difference_set(make_alphabet("bpsk"))
    assert b.size == 3
    assert set(np.round(b.values.real, 9)) == {-2.0, 0.0, 2.0}


def test_difference_set_qpsk():
    b = difference_set(make_alphabet("qpsk"))
    assert b.size == 9
    comp = np.concatenate([b.values.real, b.values.imag])
    assert set(np.round(comp, 9)) <= {0.0, np.round(np.sqrt(2), 9), -np.round(np.sqrt(2), 9)}


def test_difference_set_contains_zero_and_negations():
    for kind in ("bpsk", "qpsk", "qam16"):
        a = make_alphabet(kind)
        b = difference_set(a)
        assert np.any(b.values == 0)
        assert b.size <= a.size ** 2
        vals = set(map(lambda z: complex(np.round(z, 9)), b.values))
        for v in vals:
            assert complex(np.round(-v, 9)) in vals


def test_random_rotation_deterministic():
    p1 = random_rotation(4, 7)
    p2 = random_rotation(4, 7)
    assert np.array_equal(p1.angles, p2.angles)
    assert p1.seed == 7
    p3 = random_rotation(4, 8)
    assert not np.array_equal(p1.angles, p3.angles)


def test_random_rotation_range():
    p = random_rotation(1024, 1)
    assert np.all(p.angles >= 0) and np.all(p.angles < 2 * np.pi)


def test_random_rotation_mean():
    # Law-of-large-numbers check on the generator: mean of 1e5 uniform angles.
    p = random_rotation(100_000, 1)
    assert abs(p.angles.mean() - np.pi) < 0.02


def test_random_rotation_rejects_empty():
    with pytest.raises(ValueError):
        random_rotation(0, 1)


def test_rotation_pattern_json_roundtrip():
    p = random_rotation(6, 5)
    text = p.to_json()
    assert isinstance(json.loads(text), list)
    q = RotationPattern.from_json(text)
    assert np.allclose(q.angles, p.angles)


def test_rotation_pattern_validates_range():
    with pytest.raises(ValueError):
        RotationPattern(np.array([0.0, 7.0]))
    with pytest.raises(ValueError):
        RotationPattern(np.array([-0.1]))


def test_rotation_phases_unimodular():
    p = random_rotation(16, 2)
    assert np.allclose(np.abs(p.phases), 1.0)
