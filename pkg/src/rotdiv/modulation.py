"""Modulation matrices with prefix rows, demodulation matrices, and the
prefix adjustment that secures a diversity order of at least 2.

Storage convention: the modulation matrix ``psi`` has shape ``(m + mp, m)``
with logical row index ``p = -mp, ..., m-1`` stored at array row ``p + mp``
(prefix rows first).  The bottom ``m`` rows (the orthogonal-transform part,
``data_part``) have unit-norm columns; prefix rows add energy on top, so a
cyclic prefix duplicates tail rows exactly.  The demodulation matrix ``g``
is unitary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .alphabet import RotationPattern
from .linalg import as_matrix

SCHEME_KINDS = ("plain_ofdm", "precoded_cp_ofdm", "dft_s_ofdm", "dd_grid", "custom")

UNITARY_TOL = 1e-10


def dft_matrix(m: int) -> np.ndarray:
    """Normalized m-point DFT matrix (unitary)."""
    k = np.arange(m)
    return np.exp(-2j * np.pi * np.outer(k, k) / m) / np.sqrt(m)


def _is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)


@dataclass
class Precoder:
    """Square spread matrix applied in the transform domain before modulation."""

    psi_tilde: np.ndarray
    label: str = "precoder"
    require_unitary: bool = True

    def __post_init__(self):
        self.psi_tilde = as_matrix(self.psi_tilde, "psi_tilde")
        n = self.psi_tilde.shape[0]
        if self.psi_tilde.shape[1] != n:
            raise ValueError("precoder must be square")
        if self.require_unitary:
            if not _is_unitary(self.psi_tilde):
                raise ValueError("precoder is not unitary within tolerance")
            self.unitary = True
        else:
            # Relaxed mode: nonsingular is enough.
            if abs(np.linalg.det(self.psi_tilde)) == 0.0:
                raise ValueError("precoder must be nonsingular")
            self.unitary = _is_unitary(self.psi_tilde)

    @property
    def m(self) -> int:
        return self.psi_tilde.shape[0]

    def has_zero_entries(self, rel_tol: float = 1e-12) -> bool:
        mags = np.abs(self.psi_tilde)
        return bool(np.any(mags <= rel_tol * mags.max()))


@dataclass
class ModulationScheme:
    """Modulation matrix ``psi`` ((m+mp) x m), unitary demodulation ``g`` (m x m)."""

    psi: np.ndarray
    g: np.ndarray
    m: int
    mp: int
    kind: str
    normalized: bool = True  # data-part columns unit norm (False for relaxed precoders)

    def __post_init__(self):
        self.psi = as_matrix(self.psi, "psi")
        self.g = as_matrix(self.g, "g")
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.m < 1 or self.mp < 0:
            raise ValueError("need m >= 1 and mp >= 0")
        if self.psi.shape != (self.m + self.mp, self.m):
            raise ValueError("psi must have shape (m + mp, m)")
        if self.g.shape != (self.m, self.m):
            raise ValueError("g must have shape (m, m)")
        if not _is_unitary(self.g):
            raise ValueError("demodulation matrix is not unitary within tolerance")
        if self.normalized:
            col_norms = np.linalg.norm(self.data_part, axis=0)
            if np.max(np.abs(col_norms - 1.0)) > UNITARY_TOL:
                raise ValueError("data-part columns of psi must have unit norm")
        if self.kind in ("plain_ofdm", "precoded_cp_ofdm", "dft_s_ofdm", "dd_grid"):
            if self.mp > 0 and not np.array_equal(self.prefix_part, self.data_part[self.m - self.mp:]):
                raise ValueError("cyclic-prefix rows must duplicate the tail rows exactly")

    @property
    def data_part(self) -> np.ndarray:
        """Bottom m rows of psi (logical rows p = 0..m-1)."""
        return self.psi[self.mp:]

    @property
    def prefix_part(self) -> np.ndarray:
        """Top mp rows of psi (logical rows p = -mp..-1)."""
        return self.psi[: self.mp]

    def row(self, p: int) -> np.ndarray:
        """Row of psi by logical index p in [-mp, m)."""
        if not (-self.mp <= p < self.m):
            raise IndexError("row index outside [-mp, m)")
        return self.psi[p + self.mp]


def _add_cyclic_prefix(data: np.ndarray, mp: int) -> np.ndarray:
    if mp == 0:
        return data.copy()
    m = data.shape[0]
    if mp > m:
        raise ValueError("prefix longer than the data block is not supported")
    return np.vstack([data[m - mp:], data])


def _dd_grid_transform(m: int, n_doppler: int, m_delay: int) -> np.ndarray:
    """Delay-Doppler grid layout: symbol (delay bin d, Doppler bin k') occupies
    time samples ``p = d + k'' * m_delay`` weighted by the inverse-DFT kernel
    across the n_doppler bins.  Column index q = k' * m_delay + d."""
    out = np.zeros((m, m), dtype=np.complex128)
    kernel = np.exp(2j * np.pi * np.outer(np.arange(n_doppler), np.arange(n_doppler)) / n_doppler)
    kernel /= np.sqrt(n_doppler)
    for kp in range(n_doppler):
        for d in range(m_delay):
            q = kp * m_delay + d
            rows = d + m_delay * np.arange(n_doppler)
            out[rows, q] = kernel[kp]
    return out


def build_scheme(kind: str, m: int, mp: int, *, precoder: Precoder | None = None,
                 n_doppler: int | None = None, m_delay: int | None = None,
                 psi=None, g=None) -> ModulationScheme:
    """Construct a modulation scheme of the requested kind.

    plain_ofdm        : psi = CP(F^H), g = F.
    precoded_cp_ofdm  : psi = CP(F^H @ psi_tilde), g = F.
    dft_s_ofdm        : precoded_cp_ofdm with psi_tilde = F (CP single carrier).
    dd_grid           : delay-Doppler grid transform with CP, g = data_part^H;
                        requires n_doppler * m_delay = m.
    custom            : wraps explicit psi and g after validating invariants.
    """
    if kind not in SCHEME_KINDS:
        raise ValueError(f"unknown scheme kind {kind!r}")
    if kind == "custom":
        if psi is None or g is None:
            raise ValueError("custom schemes need explicit psi and g")
        psi = as_matrix(psi, "psi")
        g = as_matrix(g, "g")
        if psi.shape != (m + mp, m):
            raise ValueError("psi must have shape (m + mp, m)")
        return ModulationScheme(psi=psi, g=g, m=m, mp=mp, kind="custom")

    if m < 1 or mp < 0:
        raise ValueError("need m >= 1 and mp >= 0")
    fm = dft_matrix(m)
    if kind == "plain_ofdm":
        data = fm.conj().T
        g_out = fm
        normalized = True
    elif kind in ("precoded_cp_ofdm", "dft_s_ofdm"):
        if kind == "dft_s_ofdm":
            precoder = Precoder(fm, label="dft")
        if precoder is None:
            raise ValueError("precoded_cp_ofdm needs a precoder")
        if precoder.m != m:
            raise ValueError("precoder size must match m")
        data = fm.conj().T @ precoder.psi_tilde
        g_out = fm
        normalized = precoder.unitary
    elif kind == "dd_grid":
        if n_doppler is None or m_delay is None:
            raise ValueError("dd_grid needs n_doppler and m_delay")
        if n_doppler * m_delay != m:
            raise ValueError("n_doppler * m_delay must equal m")
        data = _dd_grid_transform(m, n_doppler, m_delay)
        g_out = data.conj().T
        normalized = True
    psi_full = _add_cyclic_prefix(data, mp)
    return ModulationScheme(psi=psi_full, g=g_out, m=m, mp=mp, kind=kind,
                            normalized=normalized)


def transmit(scheme: ModulationScheme, phi: RotationPattern, d) -> np.ndarray:
    """Transmitted sequence (length m + mp) for a data vector: psi @ diag(phases) @ d."""
    d = np.asarray(d, dtype=np.complex128)
    if d.shape != (scheme.m,):
        raise ValueError("data vector length must equal m")
    if not np.all(np.isfinite(d)):
        raise ValueError("data vector contains non-finite entries")
    if phi.m != scheme.m:
        raise ValueError("rotation pattern length must equal m")
    return scheme.psi @ (phi.phases * d)


def adjust_prefix_for_diversity2(scheme: ModulationScheme) -> ModulationScheme:
    """Rewrite the last prefix row (p = -1) so the first two shifted copies of
    every column are linearly independent.

    Column by column: with ``a = psi(0, q)`` and the data-part column ``v``,
    the replacement solves ``conj(a) * psi(-1, q) + <v[1:], v[:-1]> = 0``;
    when ``a = 0`` any nonzero value works and 1 is used.  The result is
    returned as a ``custom`` scheme (the prefix is generally no longer cyclic).
    """
    if scheme.mp < 1:
        raise ValueError("scheme has no prefix row to adjust")
    new_psi = scheme.psi.copy()
    data = scheme.data_part
    for q in range(scheme.m):
        a = data[0, q]
        if abs(a) <= 1e-12:
            new_psi[scheme.mp - 1, q] = 1.0
        else:
            overlap = np.vdot(data[1:, q], data[:-1, q])
            new_psi[scheme.mp - 1, q] = -overlap / np.conj(a)
    return ModulationScheme(psi=new_psi, g=scheme.g.copy(), m=scheme.m, mp=scheme.mp,
                            kind="custom", normalized=scheme.normalized)


def scheme_to_json(scheme: ModulationScheme) -> str:
    """Serialize a scheme to the interchange JSON format ([re, im] pairs,
    row-major, prefix rows first)."""
    def pairs(mat):
        return [[float(v.real), float(v.imag)] for v in mat.ravel(order="C")]

    return json.dumps({
        "m": scheme.m,
        "mp": scheme.mp,
        "psi": pairs(scheme.psi),
        "g": pairs(scheme.g),
    })


def scheme_from_json(text: str) -> ModulationScheme:
    """Load a custom scheme from the interchange JSON format."""
    obj = json.loads(text)
    try:
        m = int(obj["m"])
        mp = int(obj["mp"])
        psi_pairs = np.asarray(obj["psi"], dtype=np.float64)
        g_pairs = np.asarray(obj["g"], dtype=np.float64)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed scheme JSON: {exc}") from exc
    if psi_pairs.shape != ((m + mp) * m, 2):
        raise ValueError("psi must hold (m+mp)*m [re, im] pairs in row-major order")
    if g_pairs.shape != (m * m, 2):
        raise ValueError("g must hold m*m [re, im] pairs in row-major order")
    psi = (psi_pairs[:, 0] + 1j * psi_pairs[:, 1]).reshape(m + mp, m)
    g = (g_pairs[:, 0] + 1j * g_pairs[:, 1]).reshape(m, m)
    return build_scheme("custom", m, mp, psi=psi, g=g)
