"""Shared-key setup, counter-mode PRF randomness, hashing, commitments.

A one-time setup hands each party three 128-bit AES keys:

    P0: (k01, k02, kP)    P1: (k01, k12, kP)    P2: (k02, k12, kP)

k01/k02/k12 are pairwise; kP is common to all three.  Two parties holding the
same key expand identical pseudorandom streams without interaction, which is
how every mask, pad and permutation in the protocols is sampled.  The setup is
realized by a local trusted dealer expanding a seed (any secure MPC coin-toss
would do; the dealer keeps key distribution out of protocol logic).

A stream is addressed by (key id, label).  The keystream block for (label, i)
is AES_k(label8 || i) where label8 is the first 8 bytes of SHA-256(label), so
streams under distinct labels never collide and both holders of a key derive
the same bytes with no negotiation.  Streams support sequential draws (with a
monotone per-stream counter) and random access by element index, used for
wire-indexed material.

Commitments are hash based: Com(x; r) = SHA-256(x || r) with 256-bit r, opened
by revealing (x, r).
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .ring import elem_size, mask

KEY_BYTES = 16
DIGEST_BYTES = 32
COMMIT_RAND_BYTES = 32

K01, K02, K12, KP = "k01", "k02", "k12", "kP"
ALL_KEYS = (K01, K02, K12, KP)

# Which keys each party holds (the setup table).
KEYS_OF_PARTY = {
    0: (K01, K02, KP),
    1: (K01, K12, KP),
    2: (K02, K12, KP),
}

KEYFILE_MAGIC = b"3PCK"


class KeyAccessError(KeyError):
    """A party asked for a PRF key it does not hold."""


def hash_digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def derive_keys(seed: bytes) -> dict[str, bytes]:
    """Expand a seed into the four setup keys (the dealer's view)."""
    return {kid: hashlib.sha256(seed + b"/" + kid.encode()).digest()[:KEY_BYTES] for kid in ALL_KEYS}


def random_seed() -> bytes:
    return os.urandom(KEY_BYTES)


class PrfStream:
    """One AES-CTR keystream under (key, label), consumed as ring elements.

    `next_*` draws advance the stream counter; `element_at` is random access
    by index and never overlaps the sequential region because callers use a
    stream either positionally or sequentially, not both.
    """

    __slots__ = ("_key", "label", "_prefix", "pos")

    def __init__(self, key: bytes, label: str):
        self._key = key
        self.label = label
        self._prefix = hashlib.sha256(label.encode()).digest()[:8]
        self.pos = 0  # bytes consumed sequentially

    def _bytes_at(self, offset: int, n: int) -> bytes:
        start_block, skip = divmod(offset, 16)
        nonce = self._prefix + start_block.to_bytes(8, "big")
        enc = Cipher(algorithms.AES(self._key), modes.CTR(nonce)).encryptor()
        return enc.update(bytes(skip + n))[skip:]

    def next_bytes(self, n: int) -> bytes:
        out = self._bytes_at(self.pos, n)
        self.pos += n
        return out

    def next_elements(self, ell: int, n: int) -> list[int]:
        size = elem_size(ell)
        data = self.next_bytes(size * n)
        m = mask(ell)
        return [int.from_bytes(data[i * size : (i + 1) * size], "little") & m for i in range(n)]

    def next_element(self, ell: int) -> int:
        return self.next_elements(ell, 1)[0]

    def element_at(self, ell: int, index: int) -> int:
        size = elem_size(ell)
        data = self._bytes_at(index * size, size)
        return int.from_bytes(data, "little") & mask(ell)

    def elements_at(self, ell: int, start: int, n: int) -> list[int]:
        size = elem_size(ell)
        data = self._bytes_at(start * size, size * n)
        m = mask(ell)
        return [int.from_bytes(data[i * size : (i + 1) * size], "little") & m for i in range(n)]

    def next_below(self, bound: int) -> int:
        """Uniform draw in [0, bound) by rejection on 64-bit words."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = int.from_bytes(self.next_bytes(8), "little")
            if x < limit:
                return x % bound

    def next_nonzero(self, bits: int) -> int:
        """Uniform draw in [1, 2^bits)."""
        nbytes = (bits + 7) // 8
        m = (1 << bits) - 1
        while True:
            v = int.from_bytes(self.next_bytes(nbytes), "little") & m
            if v != 0:
                return v

    def next_permutation(self, n: int) -> list[int]:
        """Fisher-Yates with i descending from n-1 and j drawn in [0, i]."""
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.next_below(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm


class KeySetup:
    """One party's view of the shared keys plus its stream-counter map."""

    def __init__(self, role: int, keys: dict[str, bytes]):
        self.role = role
        self._keys = dict(keys)
        self._streams: dict[tuple[str, str], PrfStream] = {}

    def has_key(self, kid: str) -> bool:
        return kid in self._keys

    def key(self, kid: str) -> bytes:
        if kid not in self._keys:
            raise KeyAccessError(f"P{self.role} does not hold {kid}")
        return self._keys[kid]

    def stream(self, kid: str, label: str) -> PrfStream:
        st = self._streams.get((kid, label))
        if st is None:
            st = PrfStream(self.key(kid), label)
            self._streams[(kid, label)] = st
        return st

    def counters(self) -> dict[tuple[str, str], int]:
        """Bytes consumed per sequential stream; monotone by construction."""
        return {k: st.pos for k, st in self._streams.items()}


def setup_keys(seed: bytes) -> tuple[KeySetup, KeySetup, KeySetup]:
    """Trusted-dealer realization of the key setup: seed -> three views."""
    full = derive_keys(seed)
    return tuple(
        KeySetup(role, {kid: full[kid] for kid in KEYS_OF_PARTY[role]}) for role in (0, 1, 2)
    )


def write_keyfile(path: str, seed: bytes) -> None:
    """Dealer key file: 4-byte magic then k01, k02, k12, kP (16 bytes each)."""
    full = derive_keys(seed)
    with open(path, "wb") as fh:
        fh.write(KEYFILE_MAGIC)
        for kid in ALL_KEYS:
            fh.write(full[kid])


def read_keyfile(path: str) -> dict[str, bytes]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != KEYFILE_MAGIC or len(blob) != 4 + 4 * KEY_BYTES:
        raise ValueError("malformed key file")
    return {
        kid: blob[4 + i * KEY_BYTES : 4 + (i + 1) * KEY_BYTES] for i, kid in enumerate(ALL_KEYS)
    }


@dataclass(frozen=True)
class Commitment:
    digest: bytes


def commit(payload: bytes, randomness: bytes) -> Commitment:
    if len(randomness) != COMMIT_RAND_BYTES:
        raise ValueError("commitment randomness must be 256 bits")
    return Commitment(hash_digest(payload + randomness))


def verify_open(c: Commitment, payload: bytes, randomness: bytes) -> bool:
    return c.digest == hash_digest(payload + randomness)
