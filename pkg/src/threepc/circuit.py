"""Circuits over Z_{2^l}: representation, parsers, plaintext oracle.

A circuit is a topologically ordered list of 2-input ADD/MUL gates over
numbered wires (XOR/AND at ell=1).  Bristol Fashion boolean circuits are
ingested with XOR -> ADD, AND -> MUL; INV gates are rewritten as XOR against
a constant-one wire materialized as an extra P1-owned input fixed to 1, which
keeps the protocol surface at {ADD, MUL}.

The native arithmetic format is line oriented:

    I O A M ell          header: inputs, outputs, additions, multiplications
    o_1 ... o_I          owner id (0|1|2) of each input wire
    w_1 ... w_O          output wire ids
    ADD|MUL left right out

Input wires are 0..I-1.  eval_plain is the correctness oracle for every
protocol equivalence test in the suite.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .ring import WIDTHS, mask

ADD = "ADD"
MUL = "MUL"


class CircuitError(ValueError):
    pass


@dataclass
class Circuit:
    ell: int
    n_wires: int
    inputs: dict[int, list[int]]  # owner -> wire ids (ascending)
    outputs: list[int]
    gates: list[tuple[str, int, int, int]]  # (op, left, right, out)
    const_one: int | None = None  # wire carrying the public constant 1
    _depths: list[int] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.ell not in WIDTHS:
            raise CircuitError(f"unsupported width {self.ell}")
        defined = set(self.input_wires())
        for op, a, b, out in self.gates:
            if op not in (ADD, MUL):
                raise CircuitError(f"unknown gate op {op}")
            if a not in defined or b not in defined:
                raise CircuitError(f"gate output {out} reads undefined wire")
            if out in defined:
                raise CircuitError(f"wire {out} defined twice")
            defined.add(out)
        for w in self.outputs:
            if w not in defined:
                raise CircuitError(f"dangling output wire {w}")

    def input_wires(self) -> list[int]:
        out = []
        for owner in sorted(self.inputs):
            out.extend(self.inputs[owner])
        if self.const_one is not None:
            out.append(self.const_one)
        return sorted(out)

    @property
    def n_inputs(self) -> int:
        return sum(len(v) for v in self.inputs.values())

    @property
    def n_mul(self) -> int:
        return sum(1 for g in self.gates if g[0] == MUL)

    @property
    def n_add(self) -> int:
        return sum(1 for g in self.gates if g[0] == ADD)

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def wire_depths(self) -> list[int]:
        """Multiplicative depth of each wire (inputs at 0)."""
        if self._depths is None:
            d = [0] * self.n_wires
            for op, a, b, out in self.gates:
                d[out] = max(d[a], d[b]) + (1 if op == MUL else 0)
            self._depths = d
        return self._depths

    @property
    def depth(self) -> int:
        ds = self.wire_depths()
        return max((ds[g[3]] for g in self.gates if g[0] == MUL), default=0)

    def mul_layers(self) -> list[list[int]]:
        """Gate indices of MUL gates grouped by multiplicative depth (1-based)."""
        ds = self.wire_depths()
        layers: list[list[int]] = [[] for _ in range(self.depth)]
        for gi, (op, _a, _b, out) in enumerate(self.gates):
            if op == MUL:
                layers[ds[out] - 1].append(gi)
        return layers

    def owner_of(self, wire: int) -> int:
        if wire == self.const_one:
            return 1
        for owner, wires in self.inputs.items():
            if wire in wires:
                return owner
        raise CircuitError(f"wire {wire} is not an input")

    def input_comm_elements(self) -> int:
        """Exact online element count of the input-sharing stage.

        A P0-owned input costs 2 elements (m to both evaluators); an
        evaluator-owned input costs 1 (the owner already knows m).
        """
        total = 0
        for owner, wires in self.inputs.items():
            total += (2 if owner == 0 else 1) * len(wires)
        if self.const_one is not None:
            total += 1
        return total


def eval_plain(circuit: Circuit, values: dict[int, int]) -> list[int]:
    """Gate-by-gate plaintext evaluation; the oracle for all equivalence tests."""
    w = mask(circuit.ell)
    vals = dict(values)
    if circuit.const_one is not None:
        vals[circuit.const_one] = 1
    missing = [x for x in circuit.input_wires() if x not in vals]
    if missing:
        raise CircuitError(f"missing input values for wires {missing[:5]}")
    for op, a, b, out in circuit.gates:
        if op == ADD:
            vals[out] = (vals[a] + vals[b]) & w
        else:
            vals[out] = (vals[a] * vals[b]) & w
    return [vals[o] for o in circuit.outputs]


# --- Bristol Fashion --------------------------------------------------------


def parse_bristol(text: str, owners=(1, 2)) -> Circuit:
    """Parse a Bristol Fashion circuit (XOR/AND/INV gates, ell = 1).

    `owners` assigns the declared input groups to parties in order.  INV
    becomes XOR with the constant-one wire appended as a P1-owned input.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    body = [(i + 1, ln) for i, ln in enumerate(lines) if ln]
    if len(body) < 3:
        raise CircuitError("truncated Bristol header")

    def ints(lineno, ln):
        try:
            return [int(tok) for tok in ln.split()]
        except ValueError:
            raise CircuitError(f"line {lineno}: expected integers") from None

    (l1, h1), (l2, h2), (l3, h3) = body[0], body[1], body[2]
    ngates, nwires = ints(l1, h1)
    in_hdr = ints(l2, h2)
    out_hdr = ints(l3, h3)
    if in_hdr[0] != len(in_hdr) - 1 or out_hdr[0] != len(out_hdr) - 1:
        raise CircuitError("malformed input/output header")
    in_sizes, out_sizes = in_hdr[1:], out_hdr[1:]
    if len(in_sizes) > len(owners):
        raise CircuitError("more input groups than owners")

    inputs: dict[int, list[int]] = {}
    next_wire = 0
    for size, owner in zip(in_sizes, owners):
        inputs.setdefault(owner, []).extend(range(next_wire, next_wire + size))
        next_wire += size
    n_out = sum(out_sizes)
    outputs = list(range(nwires - n_out, nwires))

    const_one = None
    gates = []
    count = 0
    for lineno, ln in body[3:]:
        toks = ln.split()
        op = toks[-1].upper()
        try:
            nin, nout = int(toks[0]), int(toks[1])
            wires = [int(t) for t in toks[2 : 2 + nin + nout]]
        except (ValueError, IndexError):
            raise CircuitError(f"line {lineno}: malformed gate") from None
        if op in ("XOR", "AND"):
            if nin != 2 or nout != 1:
                raise CircuitError(f"line {lineno}: {op} must be 2->1")
            a, b, out = wires
            gates.append((ADD if op == "XOR" else MUL, a, b, out))
        elif op in ("INV", "NOT"):
            if nin != 1 or nout != 1:
                raise CircuitError(f"line {lineno}: INV must be 1->1")
            if const_one is None:
                const_one = nwires
                nwires += 1
            a, out = wires
            gates.append((ADD, a, const_one, out))
        else:
            raise CircuitError(f"line {lineno}: unsupported gate {op}")
        count += 1
    if count != ngates:
        raise CircuitError(f"header declares {ngates} gates, found {count}")
    return Circuit(ell=1, n_wires=nwires, inputs=inputs, outputs=outputs,
                   gates=gates, const_one=const_one)


# --- native arithmetic format ------------------------------------------------


def serialize_native(c: Circuit) -> str:
    owners = {}
    for owner, wires in c.inputs.items():
        for w in wires:
            owners[w] = owner
    owner_line = " ".join(str(owners[w]) for w in sorted(owners))
    lines = [
        f"{c.n_inputs} {c.n_outputs} {c.n_add} {c.n_mul} {c.ell}",
        owner_line,
        " ".join(str(w) for w in c.outputs),
    ]
    lines += [f"{op} {a} {b} {out}" for op, a, b, out in c.gates]
    return "\n".join(lines) + "\n"


def parse_native(text: str) -> Circuit:
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    try:
        n_in, n_out, n_add, n_mul, ell = (int(t) for t in lines[0].split())
        owner_ids = [int(t) for t in lines[1].split()]
        outputs = [int(t) for t in lines[2].split()]
    except (ValueError, IndexError):
        raise CircuitError("malformed native header") from None
    if len(owner_ids) != n_in or len(outputs) != n_out:
        raise CircuitError("header counts disagree with owner/output lines")
    inputs: dict[int, list[int]] = {}
    for w, owner in enumerate(owner_ids):
        inputs.setdefault(owner, []).append(w)
    gates = []
    top = n_in
    for lineno, ln in enumerate(lines[3:], 4):
        toks = ln.split()
        if len(toks) != 4 or toks[0] not in (ADD, MUL):
            raise CircuitError(f"line {lineno}: malformed gate")
        _, a, b, out = toks[0], int(toks[1]), int(toks[2]), int(toks[3])
        gates.append((toks[0], a, b, out))
        top = max(top, out + 1)
    c = Circuit(ell=ell, n_wires=top, inputs=inputs, outputs=outputs, gates=gates)
    if c.n_add != n_add or c.n_mul != n_mul:
        raise CircuitError("header gate counts disagree with gate list")
    return c


# --- pseudo-random test circuits ---------------------------------------------


def random_circuit(seed: int, *, ell=32, n_inputs=6, n_gates=40, max_depth=4,
                   n_outputs=3) -> Circuit:
    """Seeded random circuit for oracle-equivalence suites.

    Gate kinds are drawn at random, demoting MUL to ADD once a candidate
    would exceed max_depth; owners round-robin over the three parties.
    """
    rng = random.Random(seed)
    inputs: dict[int, list[int]] = {0: [], 1: [], 2: []}
    for w in range(n_inputs):
        inputs[w % 3].append(w)
    depths = [0] * n_inputs
    gates = []
    wires = n_inputs
    for _ in range(n_gates):
        a = rng.randrange(wires)
        b = rng.randrange(wires)
        op = MUL if rng.random() < 0.5 else ADD
        d = max(depths[a], depths[b]) + 1
        if op == MUL and d > max_depth:
            op = ADD
        depths.append(max(depths[a], depths[b]) + (1 if op == MUL else 0))
        gates.append((op, a, b, wires))
        wires += 1
    pool = list(range(max(n_inputs, wires - 2 * n_outputs), wires))
    outputs = rng.sample(pool, min(n_outputs, len(pool)))
    return Circuit(ell=ell, n_wires=wires, inputs={k: v for k, v in inputs.items() if v},
                   outputs=outputs, gates=gates)


def random_inputs(circuit: Circuit, seed: int) -> dict[int, int]:
    rng = random.Random(seed ^ 0x5EED)
    w = mask(circuit.ell)
    vals = {}
    for wire in circuit.input_wires():
        if wire == circuit.const_one:
            continue
        vals[wire] = rng.getrandbits(64) & w
    return vals
