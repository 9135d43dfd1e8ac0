"""Semi-honest three-party circuit evaluation.

Roles: P0 is the distributor (offline preprocessing only), P1/P2 are the
evaluators (online work only).  Per wire w the parties hold a masked sharing
(m_w, lambda_w1, lambda_w2); all lambda material is PRF-sampled offline
without interaction, keyed so that exactly the right subset of parties knows
each component:

    input wire owned by P0:  l1 ~ k01, l2 ~ k02
    input wire owned by P1:  l1 ~ k01, l2 ~ kP   (owner knows the full mask)
    input wire owned by P2:  l1 ~ kP,  l2 ~ k02
    MUL output wire:         l1 ~ k01, l2 ~ k02
    ADD output wire:         component-wise sums, locally

Streams are consumed positionally by wire index, so no coordination messages
are needed.  The only offline communication is P0 dealing the cross terms
gamma_g = lambda_x * lambda_y of each MUL gate: gamma_1 is PRF-shared with
P1 and gamma_2 = gamma - gamma_1 goes to P2, M elements in one round.

Online, the owner of wire w sends m_w = x + lambda_w (2 elements if P0 owns
it, else 1); each MUL gate costs the evaluators one exchange of additive
shares of

    m_z = m_x m_y - m_x lambda_y - m_y lambda_x + lambda_z + gamma

(2 elements), with all gates of one multiplicative depth batched into a
single round; reconstruction sends each party its one missing component
(P2->P1: l2, P1->P2: l1, P1->P0: m; 3 elements per output, one round).
"""

from __future__ import annotations

from .circuit import ADD, MUL, Circuit
from .crypto import K01, K02, KP, KeySetup
from .ring import mask
from .transport import OFFLINE, ONLINE, Endpoint


class WireState:
    """Per-party wire components; entries this role does not hold stay None."""

    __slots__ = ("m", "l1", "l2", "ell")

    def __init__(self, n: int, ell: int):
        self.m = [None] * n
        self.l1 = [None] * n
        self.l2 = [None] * n
        self.ell = ell


def mul_share_formula(i: int, mx: int, my: int, lx_i: int, ly_i: int,
                      lz_i: int, gamma_i: int, w: int) -> int:
    """Evaluator P_i's additive share of m_z (i in {1, 2})."""
    return ((i - 1) * mx * my - mx * ly_i - my * lx_i + lz_i + gamma_i) & w


def gamma_second_share(lx: int, ly: int, gamma1: int, w: int) -> int:
    """P0's message to P2: gamma_2 = lambda_x lambda_y - gamma_1."""
    return (lx * ly - gamma1) & w


def sample_wire_lambdas(role: int, keys: KeySetup, circuit: Circuit, sid: str) -> WireState:
    """Offline mask assignment for every wire, no communication."""
    ell, n = circuit.ell, circuit.n_wires
    st = WireState(n, ell)
    # bulk streams, addressed by wire index
    lam1 = keys.stream(K01, f"{sid}/lam1").elements_at(ell, 0, n) if keys.has_key(K01) else None
    lam2 = keys.stream(K02, f"{sid}/lam2").elements_at(ell, 0, n) if keys.has_key(K02) else None
    lam1p = keys.stream(KP, f"{sid}/lam1P")
    lam2p = keys.stream(KP, f"{sid}/lam2P")

    owner_of = {}
    for owner, wires in circuit.inputs.items():
        for w in wires:
            owner_of[w] = owner
    if circuit.const_one is not None:
        owner_of[circuit.const_one] = 1

    for w in circuit.input_wires():
        owner = owner_of[w]
        # l1 component: kP stream when P2 owns the wire, else k01
        if owner == 2:
            st.l1[w] = lam1p.element_at(ell, w)
        elif lam1 is not None:
            st.l1[w] = lam1[w]
        # l2 component: kP stream when P1 owns the wire, else k02
        if owner == 1:
            st.l2[w] = lam2p.element_at(ell, w)
        elif lam2 is not None:
            st.l2[w] = lam2[w]

    w_mask = mask(ell)
    for op, a, b, out in circuit.gates:
        if op == ADD:
            if st.l1[a] is not None and st.l1[b] is not None:
                st.l1[out] = (st.l1[a] + st.l1[b]) & w_mask
            if st.l2[a] is not None and st.l2[b] is not None:
                st.l2[out] = (st.l2[a] + st.l2[b]) & w_mask
        else:
            if lam1 is not None:
                st.l1[out] = lam1[out]
            if lam2 is not None:
                st.l2[out] = lam2[out]
    return st


def deal_gammas(role: int, ep: Endpoint, keys: KeySetup, circuit: Circuit,
                st: WireState, sid: str, point="mul.gamma2"):
    """Offline cross terms, one round: returns this evaluator's gamma parts
    (indexed by MUL-gate order), or None at P0."""
    ell = circuit.ell
    w = mask(ell)
    mul_gates = [g for g in circuit.gates if g[0] == MUL]
    n = len(mul_gates)
    if n == 0:
        return None if role == 0 else []
    if role == 0:
        g1 = keys.stream(K01, f"{sid}/gam1").elements_at(ell, 0, n)
        g2 = [gamma_second_share(
                (st.l1[a] + st.l2[a]) & w, (st.l1[b] + st.l2[b]) & w, g1[i], w)
              for i, (_op, a, b, _out) in enumerate(mul_gates)]
        ep.round_mark()
        ep.send_elements(2, g2, ell, point=point)
        return None
    if role == 1:
        ep.round_mark()
        return keys.stream(K01, f"{sid}/gam1").elements_at(ell, 0, n)
    ep.round_mark()
    return ep.recv_elements(0, n, ell)


def input_stage(role: int, ep: Endpoint, circuit: Circuit, st: WireState,
                my_inputs: dict[int, int], on_p0_m=None, point="share.m"):
    """Online input sharing: owners send masked values, one round.

    on_p0_m(wire, m) is called at the evaluators for every P0-owned masked
    value they accept (the malicious engine hooks its consistency buffer in).
    """
    ell = circuit.ell
    w = mask(ell)
    owned: dict[int, list[int]] = {0: [], 1: [], 2: []}
    for owner, wires in circuit.inputs.items():
        owned[owner].extend(wires)
    if circuit.const_one is not None:
        owned[1].append(circuit.const_one)
    for o in owned:
        owned[o].sort()

    ep.round_mark()
    mine = owned[role]
    if mine:
        ms = []
        for wire in mine:
            x = 1 if wire == circuit.const_one else my_inputs[wire]
            m = (x + st.l1[wire] + st.l2[wire]) & w
            ms.append(m)
            if role != 0:
                st.m[wire] = m
        # the owner sends m to every evaluator that does not already know it
        for dst in (1, 2):
            if dst != role:
                ep.send_elements(dst, ms, ell, point=point)
    if role != 0:
        other = 2 if role == 1 else 1
        for src in (0, other):
            if owned[src]:
                ms = ep.recv_elements(src, len(owned[src]), ell)
                for wire, m in zip(owned[src], ms):
                    st.m[wire] = m
                    if src == 0 and on_p0_m is not None:
                        on_p0_m(wire, m)


def eval_layers(role: int, ep: Endpoint, circuit: Circuit, st: WireState,
                gammas, on_mul=None, point="mul.mz"):
    """Online gate evaluation: ADD locally, MUL batched per depth layer.

    on_mul(gate_index, mx, my, mz) runs at the evaluators once m_z is fixed
    (malicious engine hook).  One round is marked per MUL layer.
    """
    ell = circuit.ell
    w = mask(ell)
    depths = circuit.wire_depths()

    groups: dict[int, list[int]] = {}
    for gi, (op, a, b, out) in enumerate(circuit.gates):
        ready = max(depths[a], depths[b])
        groups.setdefault(ready, []).append(gi)

    mul_index = {}  # gate index -> position in MUL order (for gamma lookup)
    k = 0
    for gi, g in enumerate(circuit.gates):
        if g[0] == MUL:
            mul_index[gi] = k
            k += 1

    i = role
    other = 2 if role == 1 else 1
    for ready in sorted(groups):
        batch = []  # (gate_index, my share of m_z)
        for gi in groups[ready]:
            op, a, b, out = circuit.gates[gi]
            if op == ADD:
                if role != 0:
                    st.m[out] = (st.m[a] + st.m[b]) & w
                continue
            if role == 0:
                batch.append((gi, 0))
                continue
            lx = st.l1 if role == 1 else st.l2
            share = mul_share_formula(i, st.m[a], st.m[b], lx[a], lx[b],
                                      lx[out], gammas[mul_index[gi]], w)
            batch.append((gi, share))
        if not batch:
            continue
        ep.round_mark()
        if role == 0:
            continue
        ep.send_elements(other, [s for _gi, s in batch], ell, point=point)
        theirs = ep.recv_elements(other, len(batch), ell)
        for (gi, share), their in zip(batch, theirs):
            out = circuit.gates[gi][3]
            mz = (share + their) & w
            st.m[out] = mz
            if on_mul is not None:
                _op, a, b, _out = circuit.gates[gi]
                on_mul(gi, st.m[a], st.m[b], mz)


def reconstruct_semi(role: int, ep: Endpoint, circuit: Circuit, st: WireState,
                     point="rec.value") -> list[int]:
    """Output reconstruction with fixed designated senders, one round."""
    ell = circuit.ell
    w = mask(ell)
    outs = circuit.outputs
    ep.round_mark()
    if role == 0:
        ms = ep.recv_elements(1, len(outs), ell)
        return [(m - st.l1[o] - st.l2[o]) & w for m, o in zip(ms, outs)]
    if role == 1:
        ep.send_elements(2, [st.l1[o] for o in outs], ell, point=point)
        ep.send_elements(0, [st.m[o] for o in outs], ell, point=point)
        l2s = ep.recv_elements(2, len(outs), ell)
        return [(st.m[o] - st.l1[o] - l2) & w for o, l2 in zip(outs, l2s)]
    ep.send_elements(1, [st.l2[o] for o in outs], ell, point=point)
    l1s = ep.recv_elements(1, len(outs), ell)
    return [(st.m[o] - l1 - st.l2[o]) & w for o, l1 in zip(outs, l1s)]


def run_circuit_semi(role: int, ep: Endpoint, keys: KeySetup, circuit: Circuit,
                     my_inputs: dict[int, int], sid: str = "ckt",
                     state_out: dict | None = None) -> list[int]:
    """The full semi-honest protocol for one circuit; returns the outputs.

    Offline cost: M elements, 1 round.  Online: at most 2I + 2M + 3O
    elements in 1 + D + 1 rounds.
    """
    ep.phase = OFFLINE
    st = sample_wire_lambdas(role, keys, circuit, sid)
    gammas = deal_gammas(role, ep, keys, circuit, st, sid)

    ep.phase = ONLINE
    input_stage(role, ep, circuit, st, my_inputs)
    eval_layers(role, ep, circuit, st, gammas)
    outputs = reconstruct_semi(role, ep, circuit, st)
    if state_out is not None:
        state_out["wires"] = st
    return outputs
