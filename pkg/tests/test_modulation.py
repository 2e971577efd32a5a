import numpy as np
import pytest

from rotdiv.alphabet import RotationPattern, make_alphabet, random_rotation
from rotdiv.diversity import judgment_matrix
from rotdiv.modulation import (Precoder, adjust_prefix_for_diversity2,
                               build_scheme, dft_matrix, scheme_from_json,
                               scheme_to_json, transmit)
from rotdiv.seeding import derive_rng


def test_dft_s_ofdm_rows_are_data_selectors():
    # M=4, Mp=2: rows (top to bottom) select data symbols d2, d3, d0, d1, d2, d3.
    s = build_scheme("dft_s_ofdm", 4, 2)
    expected_cols = [2, 3, 0, 1, 2, 3]
    for row, col in enumerate(expected_cols):
        want = np.zeros(4)
        want[col] = 1.0
        assert np.allclose(s.psi[row], want, atol=1e-12)


def test_plain_ofdm_m2():
    s = build_scheme("plain_ofdm", 2, 1)
    f2h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert np.allclose(s.data_part, f2h, atol=1e-12)
    assert np.allclose(s.psi[0], s.psi[2], atol=0)  # prefix row duplicates the last


def test_dd_grid_support_pattern():
    # M=8, 4 Doppler bins, 2 delay bins: each column holds 4 data-part entries
    # of magnitude 1/2, spaced m_delay = 2 apart.
    s = build_scheme("dd_grid", 8, 2, n_doppler=4, m_delay=2)
    for q in range(8):
        col = s.data_part[:, q]
        support = np.nonzero(np.abs(col) > 1e-12)[0]
        assert len(support) == 4
        assert np.allclose(np.abs(col[support]), 0.5, atol=1e-12)
        assert np.all(np.diff(support) == 2)


def test_cp_rows_duplicate_tail():
    for kind, kwargs in [("plain_ofdm", {}), ("dft_s_ofdm", {}),
                         ("dd_grid", {"n_doppler": 2, "m_delay": 4})]:
        s = build_scheme(kind, 8, 3, **kwargs)
        assert np.array_equal(s.prefix_part, s.data_part[8 - 3:])


def test_demodulator_unitary_and_data_part_normalized():
    for kind, kwargs in [("plain_ofdm", {}), ("dft_s_ofdm", {}),
                         ("dd_grid", {"n_doppler": 4, "m_delay": 2})]:
        s = build_scheme(kind, 8, 2, **kwargs)
        assert np.allclose(s.g @ s.g.conj().T, np.eye(8), atol=1e-10)
        assert np.allclose(np.linalg.norm(s.data_part, axis=0), 1.0, atol=1e-10)


def test_dft_s_equals_precoded_with_dft():
    m = 8
    a = build_scheme("dft_s_ofdm", m, 3)
    b = build_scheme("precoded_cp_ofdm", m, 3, precoder=Precoder(dft_matrix(m)))
    assert np.array_equal(a.psi, b.psi)
    assert np.array_equal(a.g, b.g)


def test_transmit_identity_rotation_is_cp_copy():
    s = build_scheme("dft_s_ofdm", 4, 2)
    d = np.array([1, -1, 1, 1], dtype=complex)
    out = transmit(s, RotationPattern.identity(4), d)
    expected = np.concatenate([d[-2:], d])
    assert np.allclose(out, expected, atol=1e-12)


def test_transmit_plain_ofdm_constant_input():
    s = build_scheme("plain_ofdm", 2, 1)
    out = transmit(s, RotationPattern.identity(2), np.ones(2, dtype=complex))
    assert np.allclose(out[1:], [np.sqrt(2), 0], atol=1e-12)


def test_transmit_matches_matrix_multiply_oracle():
    rng = derive_rng(10)
    s = build_scheme("dd_grid", 8, 2, n_doppler=4, m_delay=2)
    phi = random_rotation(8, 3)
    d = np.sign(rng.standard_normal(8)) + 0j
    out = transmit(s, phi, d)
    oracle = s.psi @ np.diag(np.exp(1j * phi.angles)) @ d
    assert np.allclose(out, oracle, atol=1e-12)
    assert abs(np.linalg.norm(out) - np.linalg.norm(s.psi @ d)) < 1e-10  # isometry


def test_transmit_rejects_bad_input():
    s = build_scheme("dft_s_ofdm", 4, 2)
    with pytest.raises(ValueError):
        transmit(s, RotationPattern.identity(4), np.array([1.0, np.nan, 1, 1]))
    with pytest.raises(ValueError):
        transmit(s, RotationPattern.identity(3), np.ones(3))


def test_custom_scheme_validation():
    m = 3
    g = dft_matrix(m)
    psi = np.vstack([g.conj().T[-1:], g.conj().T])
    s = build_scheme("custom", m, 1, psi=psi, g=g)
    assert s.kind == "custom"
    with pytest.raises(ValueError):
        build_scheme("custom", m, 1, psi=psi, g=2 * g)  # not unitary
    with pytest.raises(ValueError):
        build_scheme("custom", m, 0, psi=psi, g=g)  # shape mismatch


def test_dd_grid_dimension_check():
    with pytest.raises(ValueError):
        build_scheme("dd_grid", 8, 2, n_doppler=3, m_delay=2)


def test_scheme_json_roundtrip():
    s = build_scheme("dft_s_ofdm", 4, 2)
    text = scheme_to_json(s)
    t = scheme_from_json(text)
    assert t.m == 4 and t.mp == 2
    assert np.allclose(t.psi, s.psi)
    assert np.allclose(t.g, s.g)


def test_scheme_json_rejects_malformed():
    with pytest.raises(ValueError):
        scheme_from_json('{"m": 2, "mp": 0, "psi": [[1, 0]], "g": [[1, 0]]}')


def test_adjust_prefix_gives_rank2_columns():
    # After the adjustment, the first two shifted copies of every column are
    # linearly independent; verified by an explicit 2-column Gram determinant.
    for kind, kwargs in [("dft_s_ofdm", {}), ("plain_ofdm", {}),
                         ("dd_grid", {"n_doppler": 2, "m_delay": 2})]:
        s = build_scheme(kind, 4, 2, **kwargs)
        adj = adjust_prefix_for_diversity2(s)
        assert adj.kind == "custom"
        for q in range(4):
            j2 = judgment_matrix(adj, q, 2).matrix
            gram = j2.conj().T @ j2
            assert np.linalg.det(gram).real > 1e-12


def test_adjust_prefix_idempotent():
    # plain_ofdm has no zero leading entries, so a second application must
    # reproduce the adjusted row exactly (the orthogonality equation already
    # holds); the fixed point is reached after one application.
    s = build_scheme("plain_ofdm", 5, 2)
    once = adjust_prefix_for_diversity2(s)
    twice = adjust_prefix_for_diversity2(once)
    assert np.max(np.abs(once.psi - twice.psi)) < 1e-12


def test_adjust_prefix_requires_prefix():
    m = 3
    g = dft_matrix(m)
    s = build_scheme("custom", m, 0, psi=g.conj().T, g=g)
    with pytest.raises(ValueError):
        adjust_prefix_for_diversity2(s)


def test_precoder_validation():
    with pytest.raises(ValueError):
        Precoder(np.array([[1.0, 0.0], [0.0, 2.0]]))  # not unitary
    p = Precoder(np.array([[1.0, 0.0], [0.0, 2.0]]), require_unitary=False)
    assert not p.unitary
    assert Precoder(dft_matrix(4)).unitary
    assert Precoder(np.eye(2)).has_zero_entries()
    assert not Precoder(dft_matrix(3)).has_zero_entries()
