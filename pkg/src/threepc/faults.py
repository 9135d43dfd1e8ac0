"""Fault scripts: scripted active deviations applied at send boundaries.

A script is a list of directives, each naming a protocol point, the corrupted
party, and a tamper op.  The transport applies a directive when the named
party sends at the named point; honest protocol code never branches on any of
this.  Ops:

    add-delta   add value to the index-th ring element of the payload
    replace     substitute the payload with the given bytes
    drop        withhold the message (the receiver sees a transport failure)

File format, one directive per line:

    point=<id> party=<0|1|2> op=<add-delta|replace|drop> value=<hex> [index=<n>] [occurrence=<n>]

`occurrence` counts matching sends at that party/point (1-based, default 1);
a directive fires exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ring import elem_size, mask

DROP_MESSAGE = object()


@dataclass
class FaultDirective:
    point: str
    party: int
    op: str  # add-delta | replace | drop
    value: bytes = b""
    index: int = 0
    occurrence: int = 1
    ell: int = 0  # element width for add-delta; required for that op
    seen: int = field(default=0, compare=False)
    fired: bool = field(default=False, compare=False)

    def to_line(self) -> str:
        parts = [f"point={self.point}", f"party={self.party}", f"op={self.op}",
                 f"value={self.value.hex()}"]
        if self.index:
            parts.append(f"index={self.index}")
        if self.occurrence != 1:
            parts.append(f"occurrence={self.occurrence}")
        if self.ell:
            parts.append(f"ell={self.ell}")
        return " ".join(parts)


def _tamper(directive: FaultDirective, payload: bytes):
    if directive.op == "drop":
        return DROP_MESSAGE
    if directive.op == "replace":
        return directive.value
    if directive.op == "add-delta":
        ell = directive.ell
        if ell == 0:
            raise ValueError("add-delta needs the element width (ell=...)")
        delta = int.from_bytes(directive.value, "little")
        if ell == 1:
            # packed bits: flip when delta is odd
            if delta & 1 == 0:
                return payload
            byte_i, bit_i = divmod(directive.index, 8)
            out = bytearray(payload)
            out[byte_i] ^= 1 << bit_i
            return bytes(out)
        size = elem_size(ell)
        off = directive.index * size
        cur = int.from_bytes(payload[off : off + size], "little")
        new = (cur + delta) & mask(ell)
        return payload[:off] + new.to_bytes(size, "little") + payload[off + size :]
    raise ValueError(f"unknown fault op {directive.op}")


class FaultScript:
    def __init__(self, directives: list[FaultDirective]):
        self.directives = list(directives)

    def apply(self, point: str, party: int, payload: bytes):
        for d in self.directives:
            if d.fired or d.party != party or d.point != point:
                continue
            d.seen += 1
            if d.seen != d.occurrence:
                continue
            d.fired = True
            return _tamper(d, payload)
        return payload

    def reset(self):
        for d in self.directives:
            d.seen = 0
            d.fired = False

    def to_text(self) -> str:
        return "\n".join(d.to_line() for d in self.directives) + "\n"

    @classmethod
    def parse(cls, text: str) -> "FaultScript":
        directives = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = {}
            for token in line.split():
                if "=" not in token:
                    raise ValueError(f"fault script line {lineno}: bad token {token!r}")
                k, v = token.split("=", 1)
                fields[k] = v
            try:
                directives.append(FaultDirective(
                    point=fields["point"],
                    party=int(fields["party"]),
                    op=fields["op"],
                    value=bytes.fromhex(fields.get("value", "")),
                    index=int(fields.get("index", "0")),
                    occurrence=int(fields.get("occurrence", "1")),
                    ell=int(fields.get("ell", "0")),
                ))
            except KeyError as e:
                raise ValueError(f"fault script line {lineno}: missing {e}") from None
        return cls(directives)

    @classmethod
    def load(cls, path: str) -> "FaultScript":
        with open(path) as fh:
            return cls.parse(fh.read())
