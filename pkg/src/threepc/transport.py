"""Point-to-point ordered channels among P0, P1, P2, with a communication meter.

Two interchangeable backends: in-process queues and TCP (one duplex
connection per pair, dialed in party-id order so there are no races).  Wire
framing is fixed -- 1-byte message type, 4-byte little-endian length, payload
-- so byte counts are deterministic.  The meter counts payload by category
(ring elements, digests, commitments, openings, control); framing overhead is
tracked separately under control, which keeps element counts aligned with the
cost theorems.

"Round" is a layer of messages none of which depends on a message of the same
layer: protocols call round_mark() once per such layer and the per-phase
counter is compared against the round claims.  Amortized hash exchanges that
ride along other layers do not get a mark.

A fault script (see faults.py) hooks the send path of the corrupted party
only; honest code paths carry no adversarial branches.
"""

from __future__ import annotations

import queue
import socket
import threading
import time
from dataclasses import dataclass, field

from .faults import DROP_MESSAGE, FaultScript
from .ring import pack_elements, packed_size, unpack_elements

MSG_ELEMS = 1
MSG_DIGEST = 2
MSG_COMMIT = 3
MSG_OPEN = 4
MSG_CONTROL = 5
MSG_ABORT = 6
MSG_POISON = 7  # stands in for a withheld message; receiver treats as transport failure

CATEGORY_OF_TYPE = {
    MSG_ELEMS: "ring",
    MSG_DIGEST: "digest",
    MSG_COMMIT: "commitment",
    MSG_OPEN: "opening",
    MSG_CONTROL: "control",
}

HEADER_BYTES = 5

OFFLINE = "offline"
ONLINE = "online"


class TransportError(RuntimeError):
    """Channel-level failure (disconnect, timeout, withheld message)."""


class FramingError(TransportError):
    """Received message type differs from the protocol's expectation."""


class ProtocolAbort(RuntimeError):
    """A verification check failed; carries the failed check's name."""

    def __init__(self, check: str):
        super().__init__(check)
        self.check = check


class PeerAborted(ProtocolAbort):
    def __init__(self, peer: int):
        super().__init__(f"peer-abort:P{peer}")
        self.peer = peer


@dataclass
class Counts:
    items: int = 0
    bits: int = 0
    bytes: int = 0
    msgs: int = 0

    def add(self, items, bits, nbytes, msgs=1):
        self.items += items
        self.bits += bits
        self.bytes += nbytes
        self.msgs += msgs

    def copy(self):
        return Counts(self.items, self.bits, self.bytes, self.msgs)


class CommMeter:
    """Per-party counters keyed by (phase, peer, category), plus round marks."""

    def __init__(self):
        self.sent: dict[tuple[str, int, str], Counts] = {}
        self.recv: dict[tuple[str, int, str], Counts] = {}
        self.rounds: dict[str, int] = {OFFLINE: 0, ONLINE: 0}

    def _slot(self, table, phase, peer, category) -> Counts:
        key = (phase, peer, category)
        if key not in table:
            table[key] = Counts()
        return table[key]

    def on_send(self, phase, peer, category, items, bits, nbytes):
        self._slot(self.sent, phase, peer, category).add(items, bits, nbytes)
        # framing overhead, control category, zero items
        self._slot(self.sent, phase, peer, "control").add(0, 0, HEADER_BYTES, 0)

    def on_recv(self, phase, peer, category, items, bits, nbytes):
        self._slot(self.recv, phase, peer, category).add(items, bits, nbytes)
        self._slot(self.recv, phase, peer, "control").add(0, 0, HEADER_BYTES, 0)

    def round_mark(self, phase) -> int:
        self.rounds[phase] += 1
        return self.rounds[phase]

    # --- queries -----------------------------------------------------------

    def sent_total(self, phase=None, category=None, field_name="items") -> int:
        out = 0
        for (ph, _peer, cat), c in self.sent.items():
            if phase is not None and ph != phase:
                continue
            if category is not None and cat != category:
                continue
            out += getattr(c, field_name)
        return out

    def elements(self, phase=None) -> int:
        return self.sent_total(phase, "ring", "items")

    def element_bits(self, phase=None) -> int:
        return self.sent_total(phase, "ring", "bits")

    def digests(self, phase=None) -> int:
        return self.sent_total(phase, "digest", "items")

    def commitments(self, phase=None) -> int:
        return self.sent_total(phase, "commitment", "items")

    def openings(self, phase=None) -> int:
        return self.sent_total(phase, "opening", "items")

    def pair_bytes(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for (_ph, peer, _cat), c in self.sent.items():
            out[peer] = out.get(peer, 0) + c.bytes
        return out

    def snapshot(self) -> dict:
        return {
            "sent": {k: v.copy() for k, v in self.sent.items()},
            "rounds": dict(self.rounds),
        }

    def key_values(self, prefix="meter") -> list[str]:
        lines = []
        for phase in (OFFLINE, ONLINE):
            for name, cat in (
                ("elements", "ring"),
                ("digests", "digest"),
                ("commitments", "commitment"),
                ("openings", "opening"),
            ):
                lines.append(f"{prefix}.{phase}.{name}={self.sent_total(phase, cat, 'items')}")
            lines.append(f"{prefix}.{phase}.element_bits={self.sent_total(phase, 'ring', 'bits')}")
            lines.append(f"{prefix}.{phase}.bytes={self.sent_total(phase, None, 'bytes')}")
            lines.append(f"{prefix}.{phase}.rounds={self.rounds[phase]}")
        return lines


class MeterTotals:
    """Aggregate view over the three party meters (whole-protocol totals)."""

    def __init__(self, meters):
        self.meters = list(meters)

    def elements(self, phase=None):
        return sum(m.elements(phase) for m in self.meters)

    def element_bits(self, phase=None):
        return sum(m.element_bits(phase) for m in self.meters)

    def digests(self, phase=None):
        return sum(m.digests(phase) for m in self.meters)

    def commitments(self, phase=None):
        return sum(m.commitments(phase) for m in self.meters)

    def openings(self, phase=None):
        return sum(m.openings(phase) for m in self.meters)

    def rounds(self, phase):
        return max(m.rounds[phase] for m in self.meters)


# --- backends ---------------------------------------------------------------


class MemNetwork:
    """Shared in-process backend: one FIFO per directed pair."""

    def __init__(self):
        self.queues = {(s, d): queue.SimpleQueue() for s in range(3) for d in range(3) if s != d}

    def send(self, src, dst, frame: bytes):
        self.queues[(src, dst)].put(frame)

    def recv(self, src, dst, timeout) -> bytes:
        try:
            return self.queues[(src, dst)].get(timeout=timeout)
        except queue.Empty:
            raise TransportError(f"recv timeout waiting on P{src}") from None

    def close(self, role):
        pass


def _recv_exact(sock, n):
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise TransportError("peer closed connection")
        buf += chunk
    return buf


class TcpNetwork:
    """One duplex TCP connection per pair; lower id listens, higher id dials."""

    def __init__(self, role: int, addrs, timeout=30.0):
        self.role = role
        self.socks: dict[int, socket.socket] = {}
        self._lock = threading.Lock()
        host, port = addrs[role]
        listener = None
        if role < 2:  # expects dials from higher ids
            listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            listener.bind((host, port))
            listener.listen(2)
            listener.settimeout(timeout)
        # dial every lower id
        for peer in range(role):
            deadline = time.monotonic() + timeout
            while True:
                try:
                    s = socket.create_connection(addrs[peer], timeout=timeout)
                    break
                except OSError:
                    if time.monotonic() > deadline:
                        raise TransportError(f"cannot reach P{peer}") from None
                    time.sleep(0.02)
            s.sendall(bytes([self.role]))
            self.socks[peer] = s
        # accept every higher id
        if listener is not None:
            for _ in range(2 - role):
                try:
                    s, _addr = listener.accept()
                except socket.timeout:
                    raise TransportError("accept timeout") from None
                peer = _recv_exact(s, 1)[0]
                self.socks[peer] = s
            listener.close()
        for s in self.socks.values():
            s.settimeout(timeout)
            s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def send(self, src, dst, frame: bytes):
        assert src == self.role
        try:
            self.socks[dst].sendall(frame)
        except OSError as e:
            raise TransportError(f"send to P{dst} failed: {e}") from None

    def recv(self, src, dst, timeout) -> bytes:
        assert dst == self.role
        sock = self.socks[src]
        try:
            head = _recv_exact(sock, HEADER_BYTES)
            length = int.from_bytes(head[1:5], "little")
            return head + _recv_exact(sock, length)
        except socket.timeout:
            raise TransportError(f"recv timeout waiting on P{src}") from None

    def close(self, role):
        for s in self.socks.values():
            try:
                s.close()
            except OSError:
                pass


@dataclass
class SendRecord:
    phase: str
    dst: int
    mtype: int
    payload: bytes


class Endpoint:
    """A party's handle on its two channels, with metering and fault hooks."""

    def __init__(self, role: int, net, *, faults: FaultScript | None = None,
                 record: bool = False, timeout: float = 60.0):
        self.role = role
        self.net = net
        self.meter = CommMeter()
        self.faults = faults
        self.timeout = timeout
        self.phase = ONLINE
        self.sends: list[SendRecord] = [] if record else None
        self._aborted = False

    def peers(self):
        return [p for p in range(3) if p != self.role]

    def round_mark(self):
        return self.meter.round_mark(self.phase)

    # --- send path ----------------------------------------------------------

    def _emit(self, dst, mtype, payload, category, items, bits, point):
        if self.faults is not None:
            payload = self.faults.apply(point, self.role, payload)
            if payload is DROP_MESSAGE:
                mtype, payload = MSG_POISON, b""
                items = bits = 0
        frame = bytes([mtype]) + len(payload).to_bytes(4, "little") + payload
        if self.sends is not None:
            self.sends.append(SendRecord(self.phase, dst, mtype, payload))
        self.meter.on_send(self.phase, dst, CATEGORY_OF_TYPE.get(mtype, "control"),
                           items, bits, len(payload))
        self.net.send(self.role, dst, frame)

    def send_elements(self, dst, values, ell, point=""):
        self._emit(dst, MSG_ELEMS, pack_elements(values, ell), "ring",
                   len(values), len(values) * ell, point)

    def send_digest(self, dst, digest: bytes, point=""):
        self._emit(dst, MSG_DIGEST, digest, "digest", 1, 0, point)

    def send_commitments(self, dst, digests: list[bytes], point=""):
        self._emit(dst, MSG_COMMIT, b"".join(digests), "commitment", len(digests), 0, point)

    def send_openings(self, dst, openings: list[bytes], point=""):
        body = b"".join(len(o).to_bytes(4, "little") + o for o in openings)
        self._emit(dst, MSG_OPEN, body, "opening", len(openings), 0, point)

    def send_control(self, dst, data: bytes, point=""):
        self._emit(dst, MSG_CONTROL, data, "control", 1, 0, point)

    # --- recv path ----------------------------------------------------------

    def _take(self, src, expect):
        frame = self.net.recv(src, self.role, self.timeout)
        mtype, payload = frame[0], frame[HEADER_BYTES:]
        if mtype == MSG_ABORT:
            raise PeerAborted(src)
        if mtype == MSG_POISON:
            raise TransportError(f"P{src} withheld an expected message")
        if mtype != expect:
            raise FramingError(f"expected message type {expect}, got {mtype} from P{src}")
        return payload

    def recv_elements(self, src, count, ell):
        payload = self._take(src, MSG_ELEMS)
        if len(payload) != packed_size(count, ell):
            raise FramingError(f"element payload size mismatch from P{src}")
        self.meter.on_recv(self.phase, src, "ring", count, count * ell, len(payload))
        return unpack_elements(payload, ell, count)

    def recv_digest(self, src) -> bytes:
        payload = self._take(src, MSG_DIGEST)
        self.meter.on_recv(self.phase, src, "digest", 1, 0, len(payload))
        return payload

    def recv_commitments(self, src, count) -> list[bytes]:
        payload = self._take(src, MSG_COMMIT)
        if len(payload) != 32 * count:
            raise FramingError("commitment payload size mismatch")
        self.meter.on_recv(self.phase, src, "commitment", count, 0, len(payload))
        return [payload[i * 32 : (i + 1) * 32] for i in range(count)]

    def recv_openings(self, src, count) -> list[bytes]:
        payload = self._take(src, MSG_OPEN)
        self.meter.on_recv(self.phase, src, "opening", count, 0, len(payload))
        out, off = [], 0
        for _ in range(count):
            n = int.from_bytes(payload[off : off + 4], "little")
            off += 4
            out.append(payload[off : off + n])
            off += n
        if off != len(payload):
            raise FramingError("opening payload size mismatch")
        return out

    def recv_control(self, src) -> bytes:
        payload = self._take(src, MSG_CONTROL)
        self.meter.on_recv(self.phase, src, "control", 1, 0, len(payload))
        return payload

    # --- lifecycle ----------------------------------------------------------

    def notify_abort(self):
        """Last-gasp ABORT frames so peers blocked on us fail fast."""
        if self._aborted:
            return
        self._aborted = True
        frame = bytes([MSG_ABORT]) + (0).to_bytes(4, "little")
        for p in self.peers():
            try:
                self.net.send(self.role, p, frame)
            except TransportError:
                pass

    def close(self):
        self.net.close(self.role)
