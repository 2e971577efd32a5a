"""Diversity-order machinery: judgment matrices, the full-diversity rank
condition, exhaustive enumeration over error patterns, rotation-pattern
construction with a checkable certificate, continuous-delay ranks, pairwise
error bounds, and the finite-root-count property behind the randomization
argument.

Column conventions
------------------
Time-dispersive judgment matrix:   J_q(p, l)       = psi(p - l, q)
Doubly dispersive judgment matrix: V_q(p, kL + l)  = exp(j 2 pi k p / M) psi(p - l, q)
with Doppler index k in [-K, K] remapped to column blocks (k + K) of width L.
Prefix rows are consulted for p - l < 0 through the storage offset mp.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .alphabet import DifferenceSet, RotationPattern
from .channel import doppler_ramp
from .linalg import (RANK_REL_TOL, as_matrix, batched_ranks, det_poly_coeffs,
                     numerical_rank, rank_cutoff)
from .modulation import ModulationScheme, Precoder
from .seeding import derive_rng

DEFAULT_ENUM_CAP = 3 ** 10
SPREAD_ZERO_REL_TOL = 1e-9
FORBIDDEN_EXCLUSION_RAD = 1e-6
_ON_CIRCLE_TOL = 1e-7


class EnumerationCapError(ValueError):
    """Raised when an exhaustive enumeration would exceed the configured cap."""


@dataclass
class JudgmentMatrix:
    """Shifted (and Doppler-phased) copies of one modulation column."""

    q: int
    matrix: np.ndarray
    kind: str  # "time" or "doubly"


@dataclass
class DiversityReport:
    """Result of the exhaustive minimum-rank search over error patterns."""

    order: int
    witness: np.ndarray
    n_vectors_checked: int
    dedup_factor: int
    tolerance: float

    def to_json(self) -> str:
        return json.dumps({
            "order": self.order,
            "witness": [[float(z.real), float(z.imag)] for z in self.witness],
            "n_vectors_checked": self.n_vectors_checked,
            "dedup_factor": self.dedup_factor,
            "tolerance": self.tolerance,
        })


@dataclass
class PepBound:
    """Product-form upper bound on an average pairwise error probability."""

    singular_values: np.ndarray
    rank_used: int
    n0: float
    p_norm: float
    bound: float


class SpreadCheck(NamedTuple):
    passed: bool
    witness: tuple[np.ndarray, int] | None
    min_margin: float


def judgment_matrix(scheme: ModulationScheme, q: int, l_max: int,
                    k_max: int = 0) -> JudgmentMatrix:
    """Judgment matrix for symbol q: columns are the delayed (and Doppler-
    phased) copies of the q-th modulation column."""
    if not 0 <= q < scheme.m:
        raise ValueError("symbol index out of range")
    if not 1 <= l_max <= scheme.mp + 1:
        raise ValueError("need 1 <= l_max <= mp + 1")
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    col = scheme.psi[:, q]
    m, mp = scheme.m, scheme.mp
    shifted = np.stack([col[mp - l: mp - l + m] for l in range(l_max)], axis=1)
    if k_max == 0:
        return JudgmentMatrix(q=q, matrix=shifted, kind="time")
    blocks = [doppler_ramp(m, k)[:, None] * shifted for k in range(-k_max, k_max + 1)]
    return JudgmentMatrix(q=q, matrix=np.concatenate(blocks, axis=1), kind="doubly")


def _judgment_stack(scheme: ModulationScheme, l_max: int, k_max: int) -> np.ndarray:
    return np.stack([judgment_matrix(scheme, q, l_max, k_max).matrix
                     for q in range(scheme.m)])


def check_full_diversity_condition(scheme: ModulationScheme, l_max: int,
                                   k_max: int = 0,
                                   rel_tol: float = RANK_REL_TOL):
    """Single-symbol-error rank condition.

    Returns ``(passed, per_q_ranks, lower_bound)`` where ``passed`` means every
    judgment matrix has full column rank and ``lower_bound`` is the largest l
    such that the first l columns (flat column order documented above) are
    linearly independent for every q — the diversity order guaranteed under a
    randomly drawn rotation pattern.
    """
    mats = _judgment_stack(scheme, l_max, k_max)
    n_cols = mats.shape[2]
    ranks, _, _ = batched_ranks(mats, rel_tol)
    passed = bool(np.all(ranks == n_cols))
    lower_bound = 0
    for l in range(1, n_cols + 1):
        sub_ranks, _, _ = batched_ranks(mats[:, :, :l], rel_tol)
        if np.all(sub_ranks == l):
            lower_bound = l
        else:
            break
    return passed, [int(r) for r in ranks], lower_bound


def enumerate_error_vectors(b: DifferenceSet, m: int,
                            cap: int = DEFAULT_ENUM_CAP):
    """All nonzero error vectors in B^m, deduplicated up to a global scalar.

    Two vectors z and c*z produce equal ranks for any nonzero scalar c, so
    each projective class is represented by its first member in enumeration
    order (itertools.product over the sorted difference values).

    Returns ``(vectors, n_total, n_checked)``.
    """
    n_total = b.size ** m - 1
    if b.size ** m > cap:
        raise EnumerationCapError(
            f"{b.size}**{m} = {b.size ** m} error vectors exceed the cap of {cap}; "
            "use check_full_diversity_condition (per-column rank test) instead, "
            "or raise the cap explicitly")
    grid = np.array(list(itertools.product(b.values, repeat=m)), dtype=np.complex128)
    nz_rows = np.any(grid != 0, axis=1)
    grid = grid[nz_rows]
    first_nz = np.argmax(grid != 0, axis=1)
    lead = grid[np.arange(len(grid)), first_nz]
    canon = grid / lead[:, None]
    keys = np.round(canon, 9)
    key_view = np.ascontiguousarray(keys).view([("", keys.dtype)] * m)
    _, first_idx = np.unique(key_view, return_index=True)
    reps = grid[np.sort(first_idx)]
    return reps, n_total, len(reps)


def _error_sequence_matrices(scheme: ModulationScheme, phi: RotationPattern,
                             z_batch: np.ndarray, l_max: int, k_max: int) -> np.ndarray:
    """Stack of matrices [A_0 psi phi z, A_1 psi phi z, ...] (with Doppler
    phase blocks when k_max > 0) for a batch of error vectors."""
    m, mp = scheme.m, scheme.mp
    s_e = (phi.phases[None, :] * z_batch) @ scheme.psi.T  # (n, m + mp)
    cols = []
    for k in range(-k_max, k_max + 1):
        ramp = doppler_ramp(m, k)
        for l in range(l_max):
            cols.append(ramp[None, :] * s_e[:, mp - l: mp - l + m])
    return np.stack(cols, axis=2)  # (n, m, l_max * (2*k_max + 1))


def exhaustive_diversity(scheme: ModulationScheme, phi: RotationPattern,
                         b: DifferenceSet, l_max: int, k_max: int = 0,
                         cap: int = DEFAULT_ENUM_CAP,
                         rel_tol: float = RANK_REL_TOL,
                         chunk: int = 8192) -> DiversityReport:
    """Exact diversity order: minimum rank of the shifted error-sequence
    matrix over all nonzero error patterns (demodulation omitted; a unitary
    demodulator cannot change these ranks)."""
    if not 1 <= l_max <= scheme.mp + 1:
        raise ValueError("need 1 <= l_max <= mp + 1")
    if phi.m != scheme.m:
        raise ValueError("rotation pattern length must equal m")
    reps, n_total, n_checked = enumerate_error_vectors(b, scheme.m, cap)
    best_rank = None
    best_witness = None
    best_tol = 0.0
    for start in range(0, len(reps), chunk):
        zs = reps[start: start + chunk]
        mats = _error_sequence_matrices(scheme, phi, zs, l_max, k_max)
        ranks, _, cuts = batched_ranks(mats, rel_tol)
        i = int(np.argmin(ranks))
        if best_rank is None or ranks[i] < best_rank:
            best_rank = int(ranks[i])
            best_witness = zs[i]
            best_tol = float(cuts[i])
    return DiversityReport(order=best_rank, witness=best_witness,
                           n_vectors_checked=n_checked,
                           dedup_factor=n_total // n_checked,
                           tolerance=best_tol)


def nonzero_spread_check(precoder: Precoder, phi: RotationPattern,
                         b: DifferenceSet, cap: int = DEFAULT_ENUM_CAP,
                         rel_tol: float = SPREAD_ZERO_REL_TOL,
                         chunk: int = 8192) -> SpreadCheck:
    """Check that the spread error vector ``psi_tilde @ diag(phases) @ z`` has
    no zero entry for any nonzero error pattern z.

    An entry counts as zero when its magnitude is at most ``rel_tol`` times
    the vector norm.  On failure the witness is ``(z, entry_index)``.
    """
    m = precoder.m
    if phi.m != m:
        raise ValueError("rotation pattern length must equal the precoder size")
    reps, _, _ = enumerate_error_vectors(b, m, cap)
    worst = None  # (margin, z, entry)
    for start in range(0, len(reps), chunk):
        zs = reps[start: start + chunk]
        x_e = (phi.phases[None, :] * zs) @ precoder.psi_tilde.T
        margins = np.abs(x_e) / np.linalg.norm(x_e, axis=1)[:, None]
        flat = int(np.argmin(margins))
        i, entry = divmod(flat, m)
        margin = float(margins[i, entry])
        if worst is None or margin < worst[0]:
            worst = (margin, zs[i], entry)
    margin, z, entry = worst
    if margin > rel_tol:
        return SpreadCheck(passed=True, witness=None, min_margin=margin)
    return SpreadCheck(passed=False, witness=(z, entry), min_margin=margin)


def algorithm1_inequality_total(m: int, b_size: int) -> int:
    """Total number of avoidance inequalities examined by the sequential
    construction: sum over q of m * b_size**q * (b_size - 1) = m*(b**m - b)."""
    return m * (b_size ** m - b_size)


def _circular_min_distance(angle: float, forbidden: np.ndarray) -> float:
    if len(forbidden) == 0:
        return np.inf
    d = np.abs(np.angle(np.exp(1j * (angle - forbidden))))
    return float(np.min(d))


def forbidden_rotation_points(precoder: Precoder, b: DifferenceSet,
                              angles_so_far: np.ndarray, q: int):
    """Step-q forbidden set of the sequential construction.

    Returns ``(forbidden_angles, n_inequalities)``: the deduplicated angles of
    every unit-circle point the next rotation phase must avoid, together with
    the number of avoidance inequalities examined (off-circle ratios satisfy
    their inequality for every angle and contribute no forbidden point).
    """
    bvals = b.values
    bnz = bvals[bvals != 0]
    prefix = np.array(list(itertools.product(bvals, repeat=q)), dtype=np.complex128)
    partial = (np.exp(1j * angles_so_far[:q])[None, :] * prefix) @ precoder.psi_tilde[:, :q].T
    # ratios[n, row, j]: the point e^{j phi_q} must avoid for prefix pattern n,
    # output row, and nonzero current error value bnz[j].
    denom = precoder.psi_tilde[:, q][None, :, None] * bnz[None, None, :]
    ratios = -partial[:, :, None] / denom
    on_circle = np.abs(np.abs(ratios) - 1.0) <= _ON_CIRCLE_TOL
    angles = np.mod(np.angle(ratios[on_circle]), 2 * np.pi)
    return np.unique(np.round(angles, 12)), int(ratios.size)


def _construct_precoded_exact(precoder: Precoder, b: DifferenceSet, seed: int,
                              exclusion_rad: float, cap: int, verify: bool):
    if precoder.has_zero_entries():
        raise ValueError("sequential construction requires a precoder with no zero entries")
    m = precoder.m
    if b.size ** m > cap:
        raise EnumerationCapError(
            f"construction would enumerate {b.size ** m} prefix patterns, over the cap {cap}")
    rng = derive_rng(seed, 0)
    angles = np.empty(m)
    angles[0] = rng.uniform(0.0, 2 * np.pi)
    forbidden_sizes = [0]
    inequality_counts = [0]
    for q in range(1, m):
        forbidden, n_ineq = forbidden_rotation_points(precoder, b, angles, q)
        inequality_counts.append(n_ineq)
        forbidden_sizes.append(int(len(forbidden)))
        for _ in range(10000):
            cand = rng.uniform(0.0, 2 * np.pi)
            if _circular_min_distance(cand, forbidden) >= exclusion_rad:
                angles[q] = cand
                break
        else:
            raise RuntimeError("could not find an admissible rotation angle; "
                               "forbidden set appears to cover the circle")
    pattern = RotationPattern(angles=angles, seed="constructed")
    certificate = {
        "mode": "precoded_exact",
        "seed": int(seed),
        "forbidden_set_sizes": forbidden_sizes,
        "inequalities_per_step": inequality_counts,
        "inequalities_evaluated": int(sum(inequality_counts)),
        "inequality_total_formula": algorithm1_inequality_total(m, b.size),
        "exclusion_radius_rad": exclusion_rad,
    }
    if verify:
        chk = nonzero_spread_check(precoder, pattern, b, cap=cap)
        certificate["verified"] = bool(chk.passed)
        certificate["min_margin"] = chk.min_margin
        certificate["near_threshold"] = bool(chk.min_margin < 1e3 * SPREAD_ZERO_REL_TOL)
        if not chk.passed:
            raise RuntimeError("constructed pattern failed verification; "
                               "this indicates a numerical-tolerance problem")
    return pattern, certificate


def _construct_general_randomized(scheme: ModulationScheme, b: DifferenceSet,
                                  l_max: int, k_max: int, seed: int,
                                  max_tries: int, cap: int):
    passed, ranks, _ = check_full_diversity_condition(scheme, l_max, k_max)
    if not passed:
        raise ValueError(f"rank condition fails (per-column ranks {ranks}); "
                         "no rotation pattern can reach full diversity")
    full = l_max * (2 * k_max + 1)
    for t in range(1, max_tries + 1):
        angles = derive_rng(seed, t).uniform(0.0, 2 * np.pi, size=scheme.m)
        pattern = RotationPattern(angles=angles, seed=int(seed))
        report = exhaustive_diversity(scheme, pattern, b, l_max, k_max, cap=cap)
        if report.order == full:
            certificate = {
                "mode": "general_randomized",
                "seed": int(seed),
                "tries": t,
                "verified_order": report.order,
                "n_vectors_checked": report.n_vectors_checked,
            }
            return pattern, certificate
    raise RuntimeError(
        f"no verified pattern after {max_tries} tries; this signals a numerical "
        "tolerance issue or an input whose rank condition passed spuriously")


def construct_rotation(target, b: DifferenceSet, mode: str, l_max: int | None = None,
                       k_max: int = 0, seed: int = 0, max_tries: int = 100,
                       cap: int = DEFAULT_ENUM_CAP,
                       exclusion_rad: float = FORBIDDEN_EXCLUSION_RAD,
                       verify: bool = True):
    """Produce a rotation pattern with a certificate.

    ``precoded_exact`` runs the sequential forbidden-set construction on a
    zero-free precoder (target: Precoder); the certificate records the
    per-step forbidden-set sizes and inequality counts.  ``general_randomized``
    draws random patterns and verifies each exhaustively until one reaches
    full diversity (target: ModulationScheme, needs ``l_max``).
    """
    if mode == "precoded_exact":
        if not isinstance(target, Precoder):
            raise TypeError("precoded_exact mode needs a Precoder")
        return _construct_precoded_exact(target, b, seed, exclusion_rad, cap, verify)
    if mode == "general_randomized":
        if not isinstance(target, ModulationScheme):
            raise TypeError("general_randomized mode needs a ModulationScheme")
        if l_max is None:
            raise ValueError("general_randomized mode needs l_max")
        return _construct_general_randomized(target, b, l_max, k_max, seed, max_tries, cap)
    raise ValueError(f"unknown construction mode {mode!r}")


def diversity_continuous_delays(precoder: Precoder, phi: RotationPattern,
                                b: DifferenceSet, profile,
                                cap: int = DEFAULT_ENUM_CAP,
                                rel_tol: float = RANK_REL_TOL,
                                chunk: int = 8192) -> int:
    """Minimum rank of [D_1 x_e, ..., D_I x_e] over all nonzero error patterns,
    where D_i = diag(exp(-j 2 pi p tau_i)) for normalized delays tau_i and
    x_e is the spread error vector."""
    m = precoder.m
    if phi.m != m:
        raise ValueError("rotation pattern length must equal the precoder size")
    reps, _, _ = enumerate_error_vectors(b, m, cap)
    p_idx = np.arange(m)
    ramps = np.exp(-2j * np.pi * np.outer(p_idx, profile.delays))  # (m, I)
    best = None
    for start in range(0, len(reps), chunk):
        zs = reps[start: start + chunk]
        x_e = (phi.phases[None, :] * zs) @ precoder.psi_tilde.T
        mats = x_e[:, :, None] * ramps[None, :, :]
        ranks, _, _ = batched_ranks(mats, rel_tol)
        lo = int(ranks.min())
        if best is None or lo < best:
            best = lo
    return best


def pep_upper_bound(x1_minus_x2, n0: float, p_norm: float) -> PepBound:
    """Product-form bound on the channel-averaged pairwise error probability:
    prod over the R nonzero singular values of 1 / (1 + lambda^2 / (4 P n0))."""
    if n0 <= 0:
        raise ValueError("n0 must be positive")
    if p_norm <= 0:
        raise ValueError("p_norm must be positive")
    diff = as_matrix(x1_minus_x2, "difference matrix")
    rank, svals = numerical_rank(diff)
    lam2 = svals[:rank] ** 2
    bound = float(np.prod(1.0 / (1.0 + lam2 / (4.0 * p_norm * n0)))) if rank else 1.0
    return PepBound(singular_values=svals, rank_used=rank, n0=n0,
                    p_norm=p_norm, bound=bound)


def _cluster_distinct(values: np.ndarray, tol: float = 1e-8) -> int:
    """Number of distinct complex values up to a relative clustering tolerance."""
    distinct: list[complex] = []
    for v in values:
        if all(abs(v - u) > tol * max(1.0, abs(u)) for u in distinct):
            distinct.append(v)
    return len(distinct)


def lemma1_root_count(a, b, seed: int = 0):
    """For full-rank rectangular (a, b) of equal shape, count the distinct
    scalars c at which ``a + c*b`` drops rank, via the determinant polynomial
    of random nonsingular square completions.

    Returns ``(n_distinct_roots, constant_coeff_nonzero)`` and checks that the
    count is at most max(rows, cols) and the constant coefficient is nonzero.
    """
    A = as_matrix(a, "a")
    B = as_matrix(b, "b")
    if A.shape != B.shape:
        raise ValueError("a and b must have the same shape")
    if A.shape[0] < A.shape[1]:
        A, B = A.T, B.T  # the property is transpose-invariant
    rows, cols = A.shape
    if numerical_rank(A)[0] != cols or numerical_rank(B)[0] != cols:
        raise ValueError("a and b must both have full rank")
    rng = derive_rng(seed)
    for _ in range(100):
        pad_a = (rng.standard_normal((rows, rows - cols))
                 + 1j * rng.standard_normal((rows, rows - cols)))
        pad_b = (rng.standard_normal((rows, rows - cols))
                 + 1j * rng.standard_normal((rows, rows - cols)))
        a_sq = np.hstack([A, pad_a])
        b_sq = np.hstack([B, pad_b])
        if numerical_rank(a_sq)[0] == rows and numerical_rank(b_sq)[0] == rows:
            break
    else:
        raise RuntimeError("failed to complete the pair to nonsingular squares")
    coeffs = det_poly_coeffs(a_sq, b_sq)
    roots = np.roots(coeffs[::-1])
    n_roots = _cluster_distinct(roots)
    const_nonzero = bool(abs(coeffs[0]) > 1e-10 * np.max(np.abs(coeffs)))
    if n_roots > rows:
        raise AssertionError("distinct root count exceeded max(m, n)")
    if not const_nonzero:
        raise AssertionError("constant determinant coefficient vanished for a "
                             "nonsingular completion")
    return n_roots, const_nonzero
