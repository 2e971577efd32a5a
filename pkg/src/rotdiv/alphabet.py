"""Mapping alphabets, their difference sets, and rotation patterns.

Gray labeling is fixed per constellation and documented on the builder so
bit error counts are reproducible.  A rotation pattern is a frame-independent
scheme parameter: it is drawn (or constructed) once and never redrawn per
frame by any simulation engine in this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .seeding import derive_rng

ALPHABET_KINDS = ("bpsk", "qpsk", "qam16")


@dataclass
class MappingAlphabet:
    """Finite complex constellation with a fixed Gray bit labeling.

    ``points[i]`` carries the ``bits_per_symbol``-bit label ``i`` read
    MSB-first.  Builders normalize to unit average symbol energy.
    """

    points: np.ndarray
    bits_per_symbol: int
    label: str

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.complex128)
        if self.points.ndim != 1:
            raise ValueError("points must be a 1-D sequence of complex values")
        if len(self.points) != 2 ** self.bits_per_symbol:
            raise ValueError("need exactly 2**bits_per_symbol points")
        if len(np.unique(np.round(self.points, 12))) != len(self.points):
            raise ValueError("constellation points must be pairwise distinct")

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def mean_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    def index_to_bits(self) -> np.ndarray:
        """(size, bits_per_symbol) table of labels, MSB first."""
        idx = np.arange(self.size)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)

    def bits_to_indices(self, bits: np.ndarray) -> np.ndarray:
        """Pack bit rows (..., bits_per_symbol) into symbol indices."""
        bits = np.asarray(bits)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return (bits * weights).sum(axis=-1)

    def nearest_indices(self, values: np.ndarray) -> np.ndarray:
        """Hard-decision indices of the nearest constellation points."""
        values = np.asarray(values, dtype=np.complex128)
        d2 = np.abs(values[..., None] - self.points) ** 2
        return np.argmin(d2, axis=-1)


@dataclass
class DifferenceSet:
    """All pairwise differences of an alphabet (the possible error patterns)."""

    values: np.ndarray
    source_label: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if not np.any(self.values == 0):
            raise ValueError("difference set must contain 0")

    @property
    def size(self) -> int:
        return len(self.values)


@dataclass
class RotationPattern:
    """Per-symbol rotation angles in radians, fixed for the life of a scheme.

    ``seed`` records provenance: the integer master seed for random draws, or
    ``"constructed"`` for patterns assembled explicitly.
    """

    angles: np.ndarray
    seed: int | str = "constructed"

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.angles.ndim != 1 or len(self.angles) < 1:
            raise ValueError("angles must be a nonempty 1-D array")
        if np.any(self.angles < 0) or np.any(self.angles >= 2 * np.pi):
            raise ValueError("angles must lie in [0, 2*pi)")

    @property
    def m(self) -> int:
        return len(self.angles)

    @property
    def phases(self) -> np.ndarray:
        """Unit-modulus factors exp(j*angle)."""
        return np.exp(1j * self.angles)

    @classmethod
    def identity(cls, m: int) -> "RotationPattern":
        return cls(np.zeros(m), seed="constructed")

    def to_json(self) -> str:
        """Serialize as a plain JSON array of radians."""
        return json.dumps([float(a) for a in self.angles])

    @classmethod
    def from_json(cls, text: str) -> "RotationPattern":
        angles = json.loads(text)
        if not isinstance(angles, list):
            raise ValueError("rotation JSON must be an array of radians")
        return cls(np.asarray(angles, dtype=np.float64), seed="constructed")


def make_alphabet(kind: str, normalize: bool = True) -> MappingAlphabet:
    """Build a standard constellation with its documented Gray labeling.

    bpsk   : label 0 -> +1, label 1 -> -1.
    qpsk   : label (b1 b0): I = 1-2*b1, Q = 1-2*b0, scaled by 1/sqrt(2).
    qam16  : label (i1 i0 q1 q0): per-axis Gray PAM4 with
             00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3, scaled by 1/sqrt(10).
    """
    if kind == "bpsk":
        pts = np.array([1.0, -1.0], dtype=np.complex128)
        bps = 1
    elif kind == "qpsk":
        pts = np.empty(4, dtype=np.complex128)
        for i in range(4):
            b1, b0 = (i >> 1) & 1, i & 1
            pts[i] = (1 - 2 * b1) + 1j * (1 - 2 * b0)
        if normalize:
            pts /= np.sqrt(2)
        bps = 2
    elif kind == "qam16":
        gray_pam = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}
        pts = np.empty(16, dtype=np.complex128)
        for i in range(16):
            pts[i] = gray_pam[(i >> 2) & 0b11] + 1j * gray_pam[i & 0b11]
        if normalize:
            pts /= np.sqrt(10)
        bps = 4
    else:
        raise ValueError(f"unsupported alphabet kind: {kind!r}")
    return MappingAlphabet(points=pts, bits_per_symbol=bps, label=kind)


def difference_set(a: MappingAlphabet) -> DifferenceSet:
    """Deduplicated set of pairwise differences ``x - y`` over the alphabet.

    Always contains 0 and is closed under negation.  Values are sorted by
    (real, imag) so enumeration order is deterministic.
    """
    diffs = (a.points[:, None] - a.points[None, :]).ravel()
    # Dedup by rounded key but keep the first exact value for each key.
    seen: dict[complex, complex] = {}
    for v in diffs:
        key = complex(np.round(v.real, 12), np.round(v.imag, 12))
        if key not in seen:
            seen[key] = v
    vals = np.array(sorted(seen.values(), key=lambda z: (z.real, z.imag)))
    return DifferenceSet(values=vals, source_label=a.label)


def random_rotation(m: int, seed: int) -> RotationPattern:
    """Draw m i.i.d. uniform angles on [0, 2*pi) from the seeded Philox stream.

    The same seed always yields the bit-identical pattern.
    """
    if m < 1:
        raise ValueError("pattern length must be at least 1")
    rng = derive_rng(seed)
    angles = rng.uniform(0.0, 2 * np.pi, size=m)
    return RotationPattern(angles=angles, seed=int(seed))
