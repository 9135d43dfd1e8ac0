"""Arithmetic over the rings Z_{2^l}.

Every protocol value lives in Z_{2^l} for l in {1, 32, 64} (plus l = 8, a tiny
ring used only by brute-force test oracles).  Addition and multiplication wrap
mod 2^l; for l = 1 they coincide with XOR and AND, so the same code path serves
boolean circuits.  Signed interpretation is two's complement: the top bit is
the sign.

Decimals are represented in fixed point: l = 64 with FRAC_BITS = 13 fractional
bits, 50 integer bits and one sign bit.  A product of two such encodings
carries 26 fractional bits; single-multiplication pipelines decode the result
at PROD_FRAC_BITS without any truncation step.
"""

from __future__ import annotations

WIDTHS = (1, 8, 32, 64)

FX_WIDTH = 64
FRAC_BITS = 13
INT_BITS = FX_WIDTH - FRAC_BITS - 1  # 50
PROD_FRAC_BITS = 2 * FRAC_BITS  # 26


def mask(ell: int) -> int:
    return (1 << ell) - 1


def elem_size(ell: int) -> int:
    """Serialized size of one scalar element: ceil(l/8) bytes."""
    return (ell + 7) // 8


class WidthError(ValueError):
    """Operands of mismatched or unsupported ring width."""


class RangeError(ValueError):
    """Fixed-point value outside the representable range."""


class RingElement:
    """An element of Z_{2^l}, wrapping on every operation.

    Mixed-width arithmetic is a contract violation, not a coercion.
    """

    __slots__ = ("value", "ell")

    def __init__(self, value: int, ell: int):
        if ell not in WIDTHS:
            raise WidthError(f"unsupported ring width {ell}")
        self.value = value & mask(ell)
        self.ell = ell

    def _check(self, other: "RingElement") -> None:
        if not isinstance(other, RingElement):
            raise TypeError(f"expected RingElement, got {type(other).__name__}")
        if other.ell != self.ell:
            raise WidthError(f"width mismatch: {self.ell} vs {other.ell}")

    def __add__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        return RingElement(self.value + other.value, self.ell)

    def __sub__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        return RingElement(self.value - other.value, self.ell)

    def __mul__(self, other: "RingElement") -> "RingElement":
        self._check(other)
        return RingElement(self.value * other.value, self.ell)

    def __neg__(self) -> "RingElement":
        return RingElement(-self.value, self.ell)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RingElement)
            and self.value == other.value
            and self.ell == other.ell
        )

    def __hash__(self) -> int:
        return hash((self.value, self.ell))

    def __repr__(self) -> str:
        return f"RingElement({self.value}, ell={self.ell})"

    def msb(self) -> int:
        """Two's-complement sign bit (bit l-1).  Undefined for l = 1."""
        if self.ell < 2:
            raise WidthError("msb needs ell >= 2")
        return (self.value >> (self.ell - 1)) & 1

    def signed(self) -> int:
        """Value in [-2^(l-1), 2^(l-1))."""
        if self.ell < 2:
            raise WidthError("signed interpretation needs ell >= 2")
        half = 1 << (self.ell - 1)
        return self.value - (1 << self.ell) if self.value >= half else self.value

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(elem_size(self.ell), "little")

    @classmethod
    def from_bytes(cls, data: bytes, ell: int) -> "RingElement":
        if len(data) != elem_size(ell):
            raise WidthError(f"need {elem_size(ell)} bytes for ell={ell}")
        return cls(int.from_bytes(data, "little"), ell)


def ring_add(a: RingElement, b: RingElement) -> RingElement:
    return a + b


def ring_sub(a: RingElement, b: RingElement) -> RingElement:
    return a - b


def ring_mul(a: RingElement, b: RingElement) -> RingElement:
    return a * b


def ring_neg(a: RingElement) -> RingElement:
    return -a


def msb(a: RingElement) -> int:
    return a.msb()


def signed_value(value: int, ell: int) -> int:
    half = 1 << (ell - 1)
    value &= mask(ell)
    return value - (1 << ell) if value >= half else value


def msb_of(value: int, ell: int) -> int:
    return (value >> (ell - 1)) & 1


def fx_encode(x: float, frac_bits: int = FRAC_BITS) -> RingElement:
    """Encode a decimal as a signed fixed-point element of Z_{2^64}.

    Rounding is half-away-from-zero, which keeps the encoding sign-symmetric:
    fx_encode(-x) == -fx_encode(x).
    """
    scaled = abs(x) * (1 << frac_bits)
    magnitude = int(scaled + 0.5)
    if magnitude >= 1 << (FX_WIDTH - 1):
        raise RangeError(f"{x} overflows {INT_BITS} integer bits at {frac_bits} fractional bits")
    raw = -magnitude if x < 0 else magnitude
    return RingElement(raw, FX_WIDTH)


def fx_decode(a: RingElement, frac_bits: int = FRAC_BITS) -> float:
    """Inverse of fx_encode; also decodes 26-fractional-bit products."""
    if a.ell != FX_WIDTH:
        raise WidthError("fixed point is defined over the 64-bit ring")
    return a.signed() / (1 << frac_bits)


def pack_elements(values: list[int], ell: int) -> bytes:
    """Serialize a vector, little-endian; l = 1 packs 8 bits per byte."""
    if ell == 1:
        acc = 0
        for i, v in enumerate(values):
            acc |= (v & 1) << i
        return acc.to_bytes((len(values) + 7) // 8, "little")
    size = elem_size(ell)
    m = mask(ell)
    return b"".join((v & m).to_bytes(size, "little") for v in values)


def unpack_elements(data: bytes, ell: int, count: int) -> list[int]:
    if ell == 1:
        acc = int.from_bytes(data, "little")
        return [(acc >> i) & 1 for i in range(count)]
    size = elem_size(ell)
    if len(data) != size * count:
        raise WidthError(f"expected {size * count} bytes, got {len(data)}")
    return [int.from_bytes(data[i * size : (i + 1) * size], "little") for i in range(count)]


def packed_size(count: int, ell: int) -> int:
    if ell == 1:
        return (count + 7) // 8
    return count * elem_size(ell)
