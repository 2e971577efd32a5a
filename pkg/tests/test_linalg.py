import numpy as np
import pytest

from rotdiv.linalg import (RANK_REL_TOL, batched_ranks, det_poly_coeffs,
                           numerical_rank, random_unitary)
from rotdiv.seeding import derive_rng


def test_rank_identity():
    rank, s = numerical_rank(np.eye(3))
    assert rank == 3
    assert np.allclose(s, [1, 1, 1])


def test_rank_all_ones():
    rank, s = numerical_rank(np.ones((2, 2)))
    assert rank == 1
    assert np.allclose(s, [2, 0], atol=1e-12)


def test_rank_shifted_one_hot_columns():
    # Judgment matrix of the M=4, Mp=2, L=2 CP single-carrier scheme at q=0:
    # two shifted one-hot columns.  Hand row-reduction oracle: the columns hit
    # distinct rows, so the rank is exactly 2.
    j = np.zeros((4, 2), dtype=complex)
    j[0, 0] = 1.0
    j[1, 1] = 1.0
    rank, _ = numerical_rank(j)
    assert rank == 2


def test_rank_never_exceeds_min_dim():
    rng = derive_rng(0)
    for _ in range(20):
        rows = int(rng.integers(1, 7))
        cols = int(rng.integers(1, 7))
        a = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
        rank, _ = numerical_rank(a)
        assert rank <= min(rows, cols)


def test_rank_invariant_under_unitary():
    # Unitary demodulation cannot change any rank decision downstream.
    rng = derive_rng(1)
    for trial in range(20):
        a = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        if trial % 2:
            a[:, 2] = a[:, 0] + a[:, 1]  # force a rank drop sometimes
        u = random_unitary(5, rng)
        assert numerical_rank(u @ a)[0] == numerical_rank(a)[0]


def test_rank_rejects_non_finite():
    with pytest.raises(ValueError):
        numerical_rank(np.array([[1.0, np.nan], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        numerical_rank(np.array([[np.inf + 0j, 0], [0, 1]]))


def test_rank_custom_tolerance():
    a = np.diag([1.0, 1e-6])
    assert numerical_rank(a)[0] == 2
    assert numerical_rank(a, tol=1e-3)[0] == 1
    with pytest.raises(ValueError):
        numerical_rank(a, tol=-1.0)


def test_batched_ranks_match_scalar():
    rng = derive_rng(2)
    mats = rng.standard_normal((10, 4, 3)) + 1j * rng.standard_normal((10, 4, 3))
    mats[3, :, 2] = mats[3, :, 0]
    ranks, _, _ = batched_ranks(mats)
    for i in range(10):
        assert ranks[i] == numerical_rank(mats[i])[0]


def test_det_poly_scalar_shift():
    coeffs = det_poly_coeffs(np.eye(2), np.eye(2))
    assert np.allclose(coeffs, [1, 2, 1], atol=1e-12)


def test_det_poly_constant():
    coeffs = det_poly_coeffs(np.eye(2), np.zeros((2, 2)))
    assert np.allclose(coeffs, [1, 0, 0], atol=1e-12)


def test_det_poly_constant_term_matches_direct_determinant():
    # Independent oracle: a_0 must equal det(a) computed directly.
    rng = derive_rng(3)
    for _ in range(20):
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        coeffs = det_poly_coeffs(a, b)
        expected = np.linalg.det(a)
        assert abs(coeffs[0] - expected) <= 1e-8 * max(1.0, abs(expected))


def test_det_poly_rejects_bad_shapes():
    with pytest.raises(ValueError):
        det_poly_coeffs(np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        det_poly_coeffs(np.ones((2, 3)), np.ones((2, 3)))


def test_det_poly_full_rank_pairs_have_nonzero_constant():
    # Nonsingular pairs: det(a + c b) has nonzero constant coefficient and at
    # most m roots, so only finitely many scalars can break the rank.
    rng = derive_rng(4)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        coeffs = det_poly_coeffs(a, b)
        assert abs(coeffs[0]) > 1e-9
        roots = np.roots(coeffs[::-1])
        assert len(roots) <= n
