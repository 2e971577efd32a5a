import numpy as np
import pytest

from rotdiv.alphabet import RotationPattern, make_alphabet, random_rotation
from rotdiv.channel import (apply_channel, build_shift_matrix, draw_channel,
                            equivalent_channels)
from rotdiv.modulation import build_scheme, transmit
from rotdiv.seeding import complex_normal, derive_rng


def test_shift_matrix_examples():
    a0 = build_shift_matrix(2, 1, 0)
    assert np.array_equal(a0.real, [[0, 1, 0], [0, 0, 1]])
    a1 = build_shift_matrix(2, 1, 1)
    assert np.array_equal(a1.real, [[1, 0, 0], [0, 1, 0]])


def test_shift_matrix_selection_identity():
    for m, mp, l in [(4, 2, 0), (4, 2, 1), (4, 2, 2), (5, 3, 1)]:
        a = build_shift_matrix(m, mp, l)
        assert np.allclose(a @ a.conj().T, np.eye(m))
        assert np.all(np.sum(np.abs(a) > 0, axis=1) == 1)


def test_shift_matrix_rejects_long_delay():
    with pytest.raises(ValueError):
        build_shift_matrix(4, 1, 2)


def test_draw_channel_deterministic_and_counts():
    c1 = draw_channel("time", 3, seed=9)
    c2 = draw_channel("time", 3, seed=9)
    assert np.array_equal(c1.taps, c2.taps)
    d = draw_channel("doubly", 2, k=1, seed=5, frame_len=8)
    assert d.taps.shape == (3, 2)
    assert d.k_max == 1 and d.l_max == 2


def test_draw_channel_unit_mean_energy():
    # Monte Carlo moment check: total tap energy averages to 1.
    total = 0.0
    n = 100_000
    for i in range(n):
        total += float(np.sum(np.abs(draw_channel("time", 2, seed=i).taps) ** 2))
    assert abs(total / n - 1.0) < 0.01


def test_doubly_requires_small_spread():
    with pytest.raises(ValueError):
        draw_channel("doubly", 3, k=1, seed=0, frame_len=8)  # (2K+1)L = 9 >= 8


def test_apply_channel_identity_tap():
    s = np.arange(6, dtype=complex)
    ch = draw_channel("time", 1, seed=0)
    ch.taps[:] = [1.0]
    r = apply_channel(ch, s, mp=2, n0=0.0)
    assert np.array_equal(r, s[2:])


def test_apply_channel_matches_shift_matrix_oracle():
    # Vectorized oracle: r = sum_l h_l A_l s with explicit selection matrices.
    rng = derive_rng(3)
    scheme = build_scheme("dft_s_ofdm", 4, 2)
    for trial in range(100):
        ch = draw_channel("time", 2, seed=trial)
        d = np.sign(rng.standard_normal(4)) + 0j
        s = transmit(scheme, RotationPattern.identity(4), d)
        r = apply_channel(ch, s, mp=2, n0=0.0)
        oracle = sum(ch.taps[l] * (build_shift_matrix(4, 2, l) @ s) for l in range(2))
        assert np.max(np.abs(r - oracle)) < 1e-10


def test_apply_channel_pure_doppler_ramp():
    m, mp = 8, 2
    ch = draw_channel("doubly", 1, k=1, seed=0, frame_len=m)
    ch.taps[:] = 0
    ch.taps[2, 0] = 1.0  # k = +1, l = 0
    s = complex_normal(derive_rng(4), m + mp)
    r = apply_channel(ch, s, mp=mp, n0=0.0)
    expected = np.exp(2j * np.pi * np.arange(m) / m) * s[mp:]
    assert np.max(np.abs(r - expected)) < 1e-12


def test_apply_channel_prefix_too_short():
    ch = draw_channel("time", 3, seed=0)
    with pytest.raises(ValueError):
        apply_channel(ch, np.ones(5, dtype=complex), mp=1, n0=0.0)


def test_apply_channel_noise_is_seeded():
    ch = draw_channel("time", 2, seed=1)
    s = np.ones(6, dtype=complex)
    r1 = apply_channel(ch, s, mp=2, n0=0.1, seed=5)
    r2 = apply_channel(ch, s, mp=2, n0=0.1, seed=5)
    r3 = apply_channel(ch, s, mp=2, n0=0.1, seed=6)
    assert np.array_equal(r1, r2)
    assert not np.array_equal(r1, r3)


def test_equivalent_channels_end_to_end_consistency():
    # G * apply_channel(transmit(d)) must equal sum_l h_l H_l d, noiseless.
    rng = derive_rng(7)
    for kind, kwargs, k_taps in [("dft_s_ofdm", {}, 0), ("plain_ofdm", {}, 0),
                                 ("dd_grid", {"n_doppler": 4, "m_delay": 2}, 1)]:
        scheme = build_scheme(kind, 8, 3, **kwargs)
        phi = random_rotation(8, 11)
        h_mats = equivalent_channels(scheme, phi, 2, k_taps)
        for trial in range(20):
            kind_ch = "doubly" if k_taps else "time"
            ch = draw_channel(kind_ch, 2, k=k_taps, seed=trial,
                              frame_len=8 if k_taps else None)
            d = rng.standard_normal(8) + 1j * rng.standard_normal(8)
            s = transmit(scheme, phi, d)
            y_direct = scheme.g @ apply_channel(ch, s, mp=3, n0=0.0)
            taps_flat = ch.taps.ravel() if k_taps else ch.taps
            y_equiv = sum(t * (h @ d) for t, h in zip(taps_flat, h_mats))
            assert np.max(np.abs(y_direct - y_equiv)) < 1e-10


def test_equivalent_channels_full_rank():
    for kind in ("plain_ofdm", "dft_s_ofdm"):
        scheme = build_scheme(kind, 8, 3, )
        h_mats = equivalent_channels(scheme, RotationPattern.identity(8), 3)
        for h in h_mats:
            assert np.linalg.matrix_rank(h) == 8


def test_zero_delay_zero_doppler_is_rotation():
    # With g = data_part^H and no CP aliasing at l = 0, H_0 is the rotation.
    scheme = build_scheme("dd_grid", 8, 2, n_doppler=4, m_delay=2)
    phi = random_rotation(8, 2)
    h0 = equivalent_channels(scheme, phi, 1, 0)[0]
    assert np.max(np.abs(h0 - np.diag(phi.phases))) < 1e-10


def test_received_energy_anchors_snr():
    # With unit-energy data-part columns and unit channel energy, the mean
    # received energy per frame is M, anchoring snr = 1/n0.
    rng = derive_rng(8)
    scheme = build_scheme("dft_s_ofdm", 4, 2)
    alphabet = make_alphabet("bpsk")
    total = 0.0
    n = 4000
    for i in range(n):
        ch = draw_channel("time", 2, seed=i)
        bits = rng.integers(0, 2, 4)
        d = alphabet.points[bits]
        s = transmit(scheme, RotationPattern.identity(4), d)
        r = apply_channel(ch, s, mp=2, n0=0.0)
        total += float(np.sum(np.abs(r) ** 2))
    assert abs(total / (n * 4) - 1.0) < 0.05
