"""Square M-QAM alphabets with per-dimension Gray bit maps and decision rules."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Constellation",
    "build_constellation",
    "constellation_boundary",
    "half_spacing",
]


def _validate_order(order) -> int:
    m = int(order)
    if m != order or m < 4:
        raise ValueError(f"modulation order must be an integer >= 4, got {order!r}")
    if (m & (m - 1)) != 0 or math.isqrt(m) ** 2 != m:
        raise ValueError(
            f"modulation order must be a square power of two (4, 16, 64, ...), got {order!r}"
        )
    return m


def half_spacing(order: int) -> float:
    """Half the distance between adjacent per-dimension levels at unit symbol power."""
    m = _validate_order(order)
    return math.sqrt(3.0 / (2.0 * (m - 1)))


def constellation_boundary(order: int) -> float:
    """Outermost per-dimension level magnitude of a unit-power square QAM alphabet."""
    m = _validate_order(order)
    root = math.isqrt(m)
    return math.sqrt(3.0 * (root - 1) ** 2 / (2.0 * (m - 1)))


@dataclass(frozen=True)
class Constellation:
    """Unit-average-power square QAM alphabet.

    ``pam_set`` holds the ascending per-dimension level set (average power 1/2,
    so the complex alphabet has unit average power).  Bit labels are Gray-coded
    independently per dimension: the first half of a symbol label selects the
    in-phase level, the second half the quadrature level, and adjacent levels
    differ in exactly one bit.
    """

    order: int
    complex_points: np.ndarray
    pam_set: np.ndarray
    boundary: float
    boundary_set: np.ndarray
    half_spacing: float
    bits_per_symbol: int
    level_labels: np.ndarray  # level index -> Gray label
    label_to_level: np.ndarray  # Gray label -> level index

    @property
    def levels_per_dim(self) -> int:
        return self.pam_set.size

    @property
    def bits_per_dim(self) -> int:
        return self.bits_per_symbol // 2

    def level_index(self, v):
        """Index of the nearest per-dimension level; boundary ties resolve upward."""
        return np.searchsorted(self.boundary_set, np.asarray(v, dtype=float), side="right")

    def nearest_level(self, v):
        """Nearest per-dimension level to ``v`` (minimum-distance decision)."""
        out = self.pam_set[self.level_index(v)]
        return out if out.ndim else float(out)

    def map_bits(self, bits) -> complex:
        """Map one ``bits_per_symbol``-long label to its complex point."""
        bits = np.asarray(bits, dtype=int).ravel()
        if bits.size != self.bits_per_symbol:
            raise ValueError(
                f"expected {self.bits_per_symbol} bits, got {bits.size}"
            )
        half = self.bits_per_dim
        li = self.label_to_level[_bits_to_label(bits[:half])]
        lq = self.label_to_level[_bits_to_label(bits[half:])]
        return complex(self.pam_set[li], self.pam_set[lq])

    def unmap_symbol(self, symbol: complex) -> np.ndarray:
        """Recover the bit label of a constellation point (inverse of map_bits)."""
        li = int(self.level_index(symbol.real))
        lq = int(self.level_index(symbol.imag))
        half = self.bits_per_dim
        return np.concatenate(
            [
                _label_to_bits(int(self.level_labels[li]), half),
                _label_to_bits(int(self.level_labels[lq]), half),
            ]
        )


def _bits_to_label(bits: np.ndarray) -> int:
    label = 0
    for b in bits:
        label = (label << 1) | int(b)
    return label


def _label_to_bits(label: int, n_bits: int) -> np.ndarray:
    return np.array([(label >> (n_bits - 1 - i)) & 1 for i in range(n_bits)], dtype=int)


def build_constellation(order: int) -> Constellation:
    """Construct the unit-power square QAM alphabet of the given order."""
    m = _validate_order(order)
    root = math.isqrt(m)
    d = half_spacing(m)

    # Ascending odd multiples of d: -(root-1)d, ..., -d, d, ..., (root-1)d.
    pam = (2.0 * np.arange(root) - (root - 1)) * d
    # Midpoints between adjacent levels: even multiples of d.
    boundaries = (pam[:-1] + pam[1:]) / 2.0

    levels = np.arange(root)
    gray = levels ^ (levels >> 1)
    inverse = np.empty(root, dtype=int)
    inverse[gray] = levels

    points = (pam[:, None] + 1j * pam[None, :]).ravel()

    return Constellation(
        order=m,
        complex_points=points,
        pam_set=pam,
        boundary=constellation_boundary(m),
        boundary_set=boundaries,
        half_spacing=d,
        bits_per_symbol=int(math.log2(m)),
        level_labels=gray,
        label_to_level=inverse,
    )
