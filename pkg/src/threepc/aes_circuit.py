"""AES-128 encryption as a Bristol Fashion boolean circuit.

The benchmark circuit is generated rather than shipped: S-boxes compute the
field inverse x^254 in GF(2^8) with a 4-multiplication addition chain
(x^3, x^15, x^14, x^254), Karatsuba bit-sliced multipliers, and squarings /
the affine map as XOR layers (squaring is GF(2)-linear).  Constants (Rcon,
the 0x63 affine constant) become INV gates.  The result is a plain XOR/AND/INV
circuit whose declared gate counts come straight from the construction.

Input groups: [0] the 128-bit key, [1] the 128-bit plaintext; output is the
ciphertext.  Bit j of a group is bit j%8 (LSB first) of byte j//8.
"""

from __future__ import annotations

import functools

AES_POLY = 0x11B  # x^8 + x^4 + x^3 + x + 1

RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36)


def _gf_mul_int(a: int, b: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= AES_POLY
    return r


def _linear_matrix(fn) -> list[int]:
    """Column masks of a GF(2)-linear byte map: out bit j = XOR of in bits i
    with matrix[i] bit j set."""
    return [fn(1 << i) for i in range(8)]

_SQUARE_COLS = _linear_matrix(lambda v: _gf_mul_int(v, v))


def _reduce_degree(d: int) -> int:
    """x^d mod p as a byte, for the overflow degrees of a 15-term product."""
    v = 1 << d
    for bit in range(14, 7, -1):
        if v & (1 << bit):
            v ^= AES_POLY << (bit - 8)
    return v

_REDUCE = {d: _reduce_degree(d) for d in range(8, 15)}


class _Builder:
    def __init__(self, n_inputs: int):
        self.n_inputs = n_inputs
        self.next_wire = n_inputs
        self.lines: list[str] = []
        self.n_xor = self.n_and = self.n_inv = 0

    def _new(self) -> int:
        w = self.next_wire
        self.next_wire += 1
        return w

    def xor(self, a: int, b: int, out: int | None = None) -> int:
        out = self._new() if out is None else out
        self.lines.append(f"2 1 {a} {b} {out} XOR")
        self.n_xor += 1
        return out

    def and_(self, a: int, b: int) -> int:
        out = self._new()
        self.lines.append(f"2 1 {a} {b} {out} AND")
        self.n_and += 1
        return out

    def inv(self, a: int) -> int:
        out = self._new()
        self.lines.append(f"1 1 {a} {out} INV")
        self.n_inv += 1
        return out

    def xor_many(self, wires: list[int]) -> int:
        acc = wires[0]
        for w in wires[1:]:
            acc = self.xor(acc, w)
        return acc

    # bytes are 8-wire tuples, LSB first
    def xor_bytes(self, x, y):
        return tuple(self.xor(a, b) for a, b in zip(x, y))

    def const_xor_byte(self, x, k: int):
        return tuple(self.inv(w) if (k >> j) & 1 else w for j, w in enumerate(x))

    def linear_byte(self, cols, x):
        """Apply a GF(2)-linear map given by column masks (see _linear_matrix)."""
        out = []
        for j in range(8):
            taps = [x[i] for i in range(8) if (cols[i] >> j) & 1]
            out.append(self.xor_many(taps))
        return tuple(out)

    def gf_square(self, x):
        return self.linear_byte(_SQUARE_COLS, x)

    def _poly_mul(self, a, b):
        """Karatsuba carry-less multiply: n coefficients -> 2n-1."""
        n = len(a)
        if n == 1:
            return [self.and_(a[0], b[0])]
        h = n // 2
        al, ah, bl, bh = a[:h], a[h:], b[:h], b[h:]
        pl = self._poly_mul(al, bl)
        ph = self._poly_mul(ah, bh)
        am = [self.xor(x, y) for x, y in zip(al, ah)]
        bm = [self.xor(x, y) for x, y in zip(bl, bh)]
        pm = self._poly_mul(am, bm)
        out: list[list[int]] = [[] for _ in range(2 * n - 1)]
        for i, w in enumerate(pl):
            out[i].append(w)
            out[i + h].append(w)  # -pl term of the middle word (char 2: + == -)
        for i, w in enumerate(ph):
            out[i + 2 * h].append(w)
            out[i + h].append(w)
        for i, w in enumerate(pm):
            out[i + h].append(w)
        return [self.xor_many(ws) for ws in out]

    def gf_mul(self, x, y):
        prod = self._poly_mul(list(x), list(y))
        out = []
        for j in range(8):
            taps = [prod[j]]
            taps += [prod[d] for d in range(8, 15) if (_REDUCE[d] >> j) & 1]
            out.append(self.xor_many(taps))
        return tuple(out)

    def gf_inverse(self, x):
        """x^254 = ((x^15)^16) * (x^12 * x^2), chain of 4 multiplications."""
        t1 = self.gf_square(x)  # x^2
        t2 = self.gf_mul(t1, x)  # x^3
        t3 = self.gf_square(self.gf_square(t2))  # x^12
        t4 = self.gf_mul(t3, t2)  # x^15
        t5 = t4
        for _ in range(4):
            t5 = self.gf_square(t5)  # x^240
        t6 = self.gf_mul(t3, t1)  # x^14
        return self.gf_mul(t5, t6)  # x^254

    def sbox(self, x):
        inv = self.gf_inverse(x)
        # affine: b'_j = b_j ^ b_{j+4} ^ b_{j+5} ^ b_{j+6} ^ b_{j+7} (indices mod 8)
        mixed = []
        for j in range(8):
            taps = [inv[j], inv[(j + 4) % 8], inv[(j + 5) % 8], inv[(j + 6) % 8], inv[(j + 7) % 8]]
            mixed.append(self.xor_many(taps))
        return self.const_xor_byte(tuple(mixed), 0x63)

    def xtime(self, x):
        # multiply by 2: shift left, conditionally fold 0x1B (bits 0,1,3,4)
        out = [x[7], self.xor(x[0], x[7]), x[1], self.xor(x[2], x[7]),
               self.xor(x[3], x[7]), x[4], x[5], x[6]]
        return tuple(out)

    def mul2(self, x):
        return self.xtime(x)

    def mul3(self, x):
        return self.xor_bytes(self.xtime(x), x)


def _mix_columns(bld: _Builder, state):
    new = [None] * 16
    for c in range(4):
        a = [state[r + 4 * c] for r in range(4)]
        d2 = [bld.mul2(x) for x in a]
        d3 = [bld.xor_bytes(d2[i], a[i]) for i in range(4)]
        cols = [
            (d2[0], d3[1], a[2], a[3]),
            (a[0], d2[1], d3[2], a[3]),
            (a[0], a[1], d2[2], d3[3]),
            (d3[0], a[1], a[2], d2[3]),
        ]
        for r in range(4):
            w, x, y, z = cols[r]
            acc = bld.xor_bytes(bld.xor_bytes(w, x), bld.xor_bytes(y, z))
            new[r + 4 * c] = acc
    return new


def _shift_rows(state):
    # row r rotates left by r: new[r + 4c] = old[r + 4((c + r) % 4)]
    return [state[(i % 4) + 4 * (((i // 4) + (i % 4)) % 4)] for i in range(16)]


def _key_schedule(bld: _Builder, key_bytes):
    """Expand 16 key bytes into 11 round keys (lists of 16 byte-tuples)."""
    words = [key_bytes[4 * i : 4 * i + 4] for i in range(4)]
    for i in range(4, 44):
        temp = words[i - 1]
        if i % 4 == 0:
            rot = [temp[1], temp[2], temp[3], temp[0]]
            sub = [bld.sbox(b) for b in rot]
            sub[0] = bld.const_xor_byte(sub[0], RCON[i // 4 - 1])
            temp = sub
        words.append([bld.xor_bytes(words[i - 4][j], temp[j]) for j in range(4)])
    return [sum(words[4 * r : 4 * r + 4], []) for r in range(11)]


@functools.lru_cache(maxsize=1)
def aes128_bristol() -> str:
    """Bristol Fashion text of the AES-128 encryption circuit."""
    bld = _Builder(256)
    key = [tuple(range(8 * i, 8 * i + 8)) for i in range(16)]
    pt = [tuple(range(128 + 8 * i, 128 + 8 * i + 8)) for i in range(16)]

    round_keys = _key_schedule(bld, key)
    state = [bld.xor_bytes(pt[i], round_keys[0][i]) for i in range(16)]
    for rnd in range(1, 10):
        state = [bld.sbox(b) for b in state]
        state = _shift_rows(state)
        state = _mix_columns(bld, state)
        state = [bld.xor_bytes(state[i], round_keys[rnd][i]) for i in range(16)]
    state = [bld.sbox(b) for b in state]
    state = _shift_rows(state)
    # final AddRoundKey lands on the last 128 wires so outputs are trailing
    out_base = bld.next_wire
    bld.next_wire += 128
    for i in range(16):
        for j in range(8):
            bld.xor(state[i][j], round_keys[10][i][j], out_base + 8 * i + j)

    n_gates = bld.n_xor + bld.n_and + bld.n_inv
    header = [f"{n_gates} {bld.next_wire}", "2 128 128", "1 128", ""]
    return "\n".join(header + bld.lines) + "\n"


def bytes_to_bits(data: bytes) -> list[int]:
    return [(byte >> j) & 1 for byte in data for j in range(8)]


def bits_to_bytes(bits: list[int]) -> bytes:
    out = bytearray(len(bits) // 8)
    for i, b in enumerate(bits):
        out[i // 8] |= (b & 1) << (i % 8)
    return bytes(out)


def aes_input_values(circuit, key: bytes, plaintext: bytes) -> dict[int, int]:
    """Wire-value map for a parsed AES circuit (key group first)."""
    bits = bytes_to_bits(key) + bytes_to_bits(plaintext)
    return {w: bits[w] for w in range(256)}
