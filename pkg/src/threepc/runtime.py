"""Party orchestration: run the three roles as threads over a chosen backend.

Each party executes the same role-parameterized function against its own
endpoint; there is no shared mutable state besides the channels.  A party
that aborts sends last-gasp ABORT frames so peers blocked on it fail fast
(selective abort stays possible: peers that no longer need its messages
finish normally).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .faults import FaultScript
from .transport import (
    Endpoint,
    MemNetwork,
    MeterTotals,
    PeerAborted,
    ProtocolAbort,
    TcpNetwork,
    TransportError,
)

LOCAL_ADDRS = [("127.0.0.1", 19051), ("127.0.0.1", 19052), ("127.0.0.1", 19053)]


@dataclass
class PartyResult:
    role: int
    value: object = None
    abort: str | None = None
    error: str | None = None
    meter: object = None
    sends: list | None = None

    @property
    def ok(self):
        return self.abort is None and self.error is None


def _party_main(fn, role, ep, result: PartyResult):
    try:
        result.value = fn(role, ep)
    except ProtocolAbort as e:
        result.abort = e.check
        ep.notify_abort()
    except TransportError as e:
        result.error = str(e)
        ep.notify_abort()
    finally:
        result.meter = ep.meter
        result.sends = ep.sends
        ep.close()


def run_parties(fn, *, transport="mem", addrs=None, faults: FaultScript | None = None,
                record=False, timeout=60.0) -> list[PartyResult]:
    """Run fn(role, endpoint) at all three parties; returns their results.

    `faults` applies to the sends of the corrupted party named inside each
    directive; honest parties share the same script object but never match.
    """
    results = [PartyResult(role=r) for r in range(3)]
    if transport == "mem":
        net = MemNetwork()
        endpoints = [Endpoint(r, net, faults=faults, record=record, timeout=timeout)
                     for r in range(3)]
    elif transport == "tcp":
        addrs = addrs or LOCAL_ADDRS
        endpoints = [None] * 3
        errs = []

        def build(r):
            try:
                endpoints[r] = Endpoint(r, TcpNetwork(r, addrs, timeout=timeout),
                                        faults=faults, record=record, timeout=timeout)
            except TransportError as e:
                errs.append((r, str(e)))

        builders = [threading.Thread(target=build, args=(r,)) for r in range(3)]
        for t in builders:
            t.start()
        for t in builders:
            t.join()
        if errs:
            raise TransportError(f"tcp setup failed: {errs}")
    else:
        raise ValueError(f"unknown transport {transport}")

    threads = [
        threading.Thread(target=_party_main, args=(fn, r, endpoints[r], results[r]))
        for r in range(3)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return results


def totals(results) -> MeterTotals:
    return MeterTotals([r.meter for r in results])


def require_ok(results):
    for r in results:
        if not r.ok:
            raise AssertionError(f"P{r.role} failed: abort={r.abort} error={r.error}")
    return results
