"""Gray-labeled square constellations and bit/symbol conversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Per-axis amplitude levels, ascending, before normalization.
_AXIS_LEVELS = {
    1: np.array([-1.0, 1.0]),
    2: np.array([-3.0, -1.0, 1.0, 3.0]),
    3: np.array([-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0]),
}

# Reflected Gray code per axis, listed in the same ascending-level order.
# The leading bit is the sign bit (1 on the positive half); the remaining
# bits Gray-code the magnitude, so codes of +x and -x differ only in the
# leading bit.
_AXIS_CODES = {
    1: (0b0, 0b1),
    2: (0b00, 0b01, 0b11, 0b10),
    3: (0b000, 0b001, 0b011, 0b010, 0b110, 0b111, 0b101, 0b100),
}

_AXIS_BITS = {"qpsk": 1, "qam16": 2, "qam64": 3}
_NORM = {"qpsk": np.sqrt(2.0), "qam16": np.sqrt(10.0), "qam64": np.sqrt(42.0)}


@dataclass(frozen=True)
class Constellation:
    """Unit-power constellation with per-point bit labels.

    points[j] carries the label bit_labels[j]; point order is chosen so that
    the label read as a big-endian integer equals j, which makes mapping a
    single table lookup.
    """

    name: str
    points: np.ndarray
    bit_labels: np.ndarray
    eta_alpha: float
    uniform_power: bool

    @property
    def bits_per_symbol(self) -> int:
        return int(self.bit_labels.shape[1])


def constellation(name: str) -> Constellation:
    """Build one of qpsk, qam16, qam64.

    The first half of each symbol's bits selects the in-phase level, the
    second half the quadrature level, both through the per-axis Gray table.
    """
    if name not in _AXIS_BITS:
        raise ValueError(f"unknown constellation {name!r}")
    half = _AXIS_BITS[name]
    levels = _AXIS_LEVELS[half]
    codes = _AXIS_CODES[half]
    norm = _NORM[name]
    m = 2 * half
    mu = 1 << m

    points = np.empty(mu, dtype=np.complex128)
    labels = np.empty((mu, m), dtype=np.uint8)
    for a, la in enumerate(levels):
        for b, lb in enumerate(levels):
            lab = (codes[a] << half) | codes[b]
            points[lab] = (la + 1j * lb) / norm
            for l in range(m):
                labels[lab, l] = (lab >> (m - 1 - l)) & 1

    eta_alpha = float(np.mean(np.abs(points) ** 2))
    return Constellation(
        name=name,
        points=points,
        bit_labels=labels,
        eta_alpha=eta_alpha,
        uniform_power=(name == "qpsk"),
    )


def map_bits(bits: np.ndarray, c: Constellation) -> np.ndarray:
    """Map a flat bit vector to constellation symbols, big-endian per symbol."""
    bits = np.asarray(bits)
    m = c.bits_per_symbol
    if bits.size % m:
        raise ValueError(f"bit count {bits.size} is not a multiple of {m}")
    groups = bits.reshape(-1, m).astype(np.int64)
    weights = 1 << np.arange(m - 1, -1, -1)
    return c.points[groups @ weights]


def hard_decisions(symbols: np.ndarray, c: Constellation) -> np.ndarray:
    """Slice to the nearest constellation point and return the label bits."""
    z = np.asarray(symbols)
    d = np.abs(z[..., None] - c.points) ** 2
    idx = np.argmin(d, axis=-1)
    return c.bit_labels[idx].reshape(z.shape + (c.bits_per_symbol,)).reshape(-1)
