"""The two secret-sharing schemes and their linear operations.

[.]-sharing: v = v1 + v2, an additive 2-of-2 sharing between the evaluators
P1 and P2.

Masked sharing (the three-party scheme): a value v is split as

    v = m - (lambda1 + lambda2)

where P0 holds (lambda1, lambda2), P1 holds (m, lambda1), P2 holds
(m, lambda2).  The mask lambda = lambda1 + lambda2 is input-independent, so
its shares are precomputed offline; the masked value m is what the online
phase moves around.  Everything is linear: public linear combinations are
computed locally on each component (the public constant lands on m only,
since v = (m + k) - lambda shifts v by k).

With ell = 1 the same code is the boolean scheme (m XOR lambda semantics).
"""

from __future__ import annotations

from dataclasses import dataclass

from .ring import mask, pack_elements, unpack_elements

SHAREFILE_MAGIC = b"3PCS"


class ShareError(ValueError):
    """Role/width contract violation on shares."""


@dataclass(frozen=True)
class AdditiveShare:
    holder: int  # 1 or 2
    value: int
    ell: int

    def __post_init__(self):
        if self.holder not in (1, 2):
            raise ShareError("additive shares live at the evaluators")


def additive_reconstruct(s1: AdditiveShare, s2: AdditiveShare) -> int:
    if s1.ell != s2.ell:
        raise ShareError("width mismatch")
    if {s1.holder, s2.holder} != {1, 2}:
        raise ShareError("need complementary holders")
    return (s1.value + s2.value) & mask(s1.ell)


class MaskedShare:
    """One party's component of a masked sharing.

    Fields not held by the role are None: P0 has (l1, l2), P1 has (m, l1),
    P2 has (m, l2).  The lambda part is fixed at creation (offline); m may be
    filled in exactly once when the online phase learns it.
    """

    __slots__ = ("role", "ell", "m", "l1", "l2")

    def __init__(self, role: int, ell: int, m=None, l1=None, l2=None):
        if role == 0 and (l1 is None or l2 is None or m is not None):
            raise ShareError("P0 holds exactly (l1, l2)")
        if role == 1 and l2 is not None:
            raise ShareError("P1 holds (m, l1)")
        if role == 2 and l1 is not None:
            raise ShareError("P2 holds (m, l2)")
        self.role = role
        self.ell = ell
        w = mask(ell)
        self.m = m & w if m is not None else None
        self.l1 = l1 & w if l1 is not None else None
        self.l2 = l2 & w if l2 is not None else None

    def lam(self) -> int:
        """This party's lambda component (P0: both summed is not defined here)."""
        return self.l1 if self.role in (0, 1) else self.l2

    def __repr__(self):
        return f"MaskedShare(P{self.role}, ell={self.ell}, m={self.m}, l1={self.l1}, l2={self.l2})"


def lin_combine(
    coeffs: list[int], shares: list[MaskedShare], constant: int = 0
) -> MaskedShare:
    """Local linear combination: sum(c_i * x_i) + constant.

    Coefficients and the constant are public and identical at every party.
    The constant is added to m by the evaluators only; P0's lambda parts see
    just the coefficient combination.
    """
    if not shares:
        raise ShareError("empty combination")
    if len(coeffs) != len(shares):
        raise ShareError("coefficient/share count mismatch")
    role, ell = shares[0].role, shares[0].ell
    w = mask(ell)
    for s in shares:
        if s.role != role or s.ell != ell:
            raise ShareError("mixed roles or widths in combination")

    def comb(part: str):
        vals = [getattr(s, part) for s in shares]
        if any(v is None for v in vals):
            return None
        return sum(c * v for c, v in zip(coeffs, vals)) & w

    m = comb("m")
    if m is not None:
        m = (m + constant) & w
    if role == 0:
        return MaskedShare(0, ell, l1=comb("l1"), l2=comb("l2"))
    if role == 1:
        return MaskedShare(1, ell, m=m, l1=comb("l1"))
    return MaskedShare(2, ell, m=m, l2=comb("l2"))


def share_add(a: MaskedShare, b: MaskedShare) -> MaskedShare:
    return lin_combine([1, 1], [a, b])


def share_sub(a: MaskedShare, b: MaskedShare) -> MaskedShare:
    return lin_combine([1, -1], [a, b])


def share_xor(a: MaskedShare, b: MaskedShare) -> MaskedShare:
    """Boolean XOR is addition in Z_2."""
    if a.ell != 1 or b.ell != 1:
        raise ShareError("share_xor is the ell=1 case")
    return lin_combine([1, 1], [a, b])


def reconstruct_views(v0: MaskedShare, v1: MaskedShare, v2: MaskedShare) -> int:
    """Test/dealer backdoor: combine all three views into the plain value."""
    if not (v0.role, v1.role, v2.role) == (0, 1, 2):
        raise ShareError("views out of role order")
    if v1.m != v2.m:
        raise ShareError("evaluators disagree on m")
    if v0.l1 != v1.l1 or v0.l2 != v2.l2:
        raise ShareError("lambda components inconsistent")
    return (v1.m - v0.l1 - v0.l2) & mask(v0.ell)


def make_views(value: int, ell: int, l1: int, l2: int) -> tuple[MaskedShare, MaskedShare, MaskedShare]:
    """Build the three consistent views for a value under given mask parts."""
    w = mask(ell)
    m = (value + l1 + l2) & w
    return (
        MaskedShare(0, ell, l1=l1, l2=l2),
        MaskedShare(1, ell, m=m, l1=l1),
        MaskedShare(2, ell, m=m, l2=l2),
    )


def dealer_share(value: int, ell: int, stream) -> tuple[MaskedShare, MaskedShare, MaskedShare]:
    """Trusted-dealer sharing for tests and for staging model/query inputs.

    lambda1, lambda2 are drawn from the given PRF stream; the resulting views
    satisfy v = m - lambda1 - lambda2.
    """
    l1 = stream.next_element(ell)
    l2 = stream.next_element(ell)
    return make_views(value, ell, l1, l2)


def dealer_share_vector(values: list[int], ell: int, stream):
    views = [dealer_share(v, ell, stream) for v in values]
    return tuple(ShareVector([v[r] for v in views]) for r in range(3))


class ShareVector:
    """An ordered list of MaskedShare of common role and width."""

    def __init__(self, elems: list[MaskedShare]):
        if not elems:
            raise ShareError("empty share vector")
        role, ell = elems[0].role, elems[0].ell
        for e in elems:
            if e.role != role or e.ell != ell:
                raise ShareError("mixed roles or widths in vector")
        self.elems = list(elems)
        self.role = role
        self.ell = ell

    def __len__(self):
        return len(self.elems)

    def __iter__(self):
        return iter(self.elems)

    def __getitem__(self, i):
        return self.elems[i]


def write_share_file(path: str, vec: ShareVector) -> None:
    """Share staging format: magic, width, role, count, then the packed
    component arrays in role order (P0: l1,l2; P1: m,l1; P2: m,l2)."""
    parts = {0: ("l1", "l2"), 1: ("m", "l1"), 2: ("m", "l2")}[vec.role]
    with open(path, "wb") as fh:
        fh.write(SHAREFILE_MAGIC)
        fh.write(bytes([vec.ell, vec.role]))
        fh.write(len(vec).to_bytes(4, "little"))
        for part in parts:
            fh.write(pack_elements([getattr(e, part) for e in vec], vec.ell))


def read_share_file(path: str) -> ShareVector:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != SHAREFILE_MAGIC:
        raise ValueError("not a share file")
    ell, role = blob[4], blob[5]
    count = int.from_bytes(blob[6:10], "little")
    from .ring import packed_size

    body = blob[10:]
    span = packed_size(count, ell)
    if len(body) != 2 * span:
        raise ValueError("truncated share file")
    first = unpack_elements(body[:span], ell, count)
    second = unpack_elements(body[span:], ell, count)
    if role == 0:
        elems = [MaskedShare(0, ell, l1=a, l2=b) for a, b in zip(first, second)]
    elif role == 1:
        elems = [MaskedShare(1, ell, m=a, l1=b) for a, b in zip(first, second)]
    else:
        elems = [MaskedShare(2, ell, m=a, l2=b) for a, b in zip(first, second)]
    return ShareVector(elems)
