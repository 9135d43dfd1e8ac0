"""Maliciously secure three-party evaluation with abort, and fair output.

Built on the semi-honest wire machinery plus four verification devices:

* consistent sharing -- evaluators cross-check a combined digest of every
  masked value the distributor dealt;
* verified reconstruction -- each party receives its missing component from
  one holder and a digest of it from the other;
* verified multiplication -- per MUL instance the evaluators pad the masked
  inputs with fresh deltas, ship an additive sharing of
  chi = dx*ly + dy*lx + dz - gamma to P0, and the parties locally assemble a
  shared triple (a, b, c) = (dx - lx, dy - ly, (dz + dx*dy) - chi) that is a
  multiplication triple iff gamma and chi were dealt honestly.  The triple is
  sacrificed against a verified random triple (product-relation check); the
  online masked product is re-derived by P0 from padded masked inputs
  (m*_x = m_x + dx) as m*_z = -m*_x ly - m*_y lx + lz + 2 gamma + chi and
  digest-compared against m_z - m_x m_y + dz at each evaluator;
* random triples -- optimistic semi-honest products, cut (C opened) and
  bucketed (size B, B-1 sacrifices per bucket, first of bucket survives)
  under a shared permutation drawn from the all-party key.

Every digest check accumulates in deferred pairwise buffers flushed at phase
boundaries (end of offline, end of circuit evaluation, at reconstruction), so
hashes amortize to a constant number of messages.  Amortized offline cost per
multiplication is 9B + 3 elements in 4 rounds (the C opened triples add 9C
per pool); online is 4 elements per gate -- the per-gate digest of m*_z is
batched per circuit (a per-gate digest is the unbatched alternative).

The product-relation check pins tau = c - f - sigma*d - rho*e - sigma*rho,
with rho = a - d, sigma = b - e reconstructed; tau = 0 is checked without a
third reconstruction via three pairwise digest comparisons of
m_tau - lambda_tau,i against the counterpart component.

Fair reconstruction replaces the output stage when requested: the pairs
commit their common components (randomness from their shared PRF keys), P0
arbitrates continue/abort, and a pair-committed proof-of-origin value lets an
evaluator authenticate a relayed abort, so no broadcast channel is needed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

from .circuit import MUL, Circuit
from .crypto import COMMIT_RAND_BYTES, K01, K02, K12, KP, KeySetup, hash_digest
from .engine_semi import (
    WireState,
    eval_layers,
    gamma_second_share,
    input_stage,
    sample_wire_lambdas,
)
from .ring import elem_size, mask, pack_elements
from .transport import OFFLINE, ONLINE, Endpoint, ProtocolAbort

# which unordered pairs exchange digests for each deferred-check buffer
PAIRS_OF_BUFFER = {
    "sharem": ((1, 2),),
    "rec": ((1, 2), (0, 2)),
    "tau": ((0, 1), (0, 2), (1, 2)),
    "mstar": ((0, 2),),
    "mdown": ((0, 1), (0, 2)),
    "rect": ((0, 2), (1, 2)),
    "q": ((0, 2),),
}

ABORT_OF_BUFFER = {
    "sharem": "share-consistency",
    "rec": "rec-digest",
    "tau": "tau-check",
    "mstar": "mstar-consistency",
    "mdown": "mstar-down",
    "rect": "rec-digest",
    "q": "bitext-q",
}


@dataclass
class TripleConfig:
    """Cut-and-bucket parameters: batch size N, statistical parameter s,
    opened count C (default 3B) and an optional forced bucket size B."""

    n_batch: int | None = None  # default: exactly the demand
    s: int = 40
    c_open: int | None = None
    bucket: int | None = None
    plain_bucketing: bool = False

    def bucket_size(self, n: int) -> int:
        if self.bucket is not None:
            b = self.bucket
        else:
            b = math.ceil(self.s / math.log2(max(n, 2)))
        if b < 2:
            b = 2
        return b


@dataclass
class SharedCols:
    """Party-local columns of a vector of masked sharings (None if not held)."""

    m: list | None
    l1: list | None
    l2: list | None

    def take(self, idx: list[int]) -> "SharedCols":
        pick = lambda col: None if col is None else [col[i] for i in idx]
        return SharedCols(pick(self.m), pick(self.l1), pick(self.l2))


def _sub(x, y, w):
    if x is None or y is None:
        return None
    return [(a - b) & w for a, b in zip(x, y)]


def cols_sub(x: SharedCols, y: SharedCols, w) -> SharedCols:
    return SharedCols(_sub(x.m, y.m, w), _sub(x.l1, y.l1, w), _sub(x.l2, y.l2, w))


class MalEngine:
    """Per-party verification state and malicious sub-protocols."""

    def __init__(self, role: int, ep: Endpoint, keys: KeySetup, ell: int,
                 sid: str, cfg: TripleConfig | None = None):
        self.role = role
        self.ep = ep
        self.keys = keys
        self.ell = ell
        self.w = mask(ell)
        self.sid = sid
        self.cfg = cfg or TripleConfig()
        self._bufs: dict[tuple[int, str], "hashlib._Hash"] = {}
        self._buf_n: dict[tuple[int, str], int] = {}

    # --- deferred digest buffers ---------------------------------------------

    def buf_elems(self, peer: int, name: str, values: list[int], ell=None):
        key = (peer, name)
        h = self._bufs.get(key)
        if h is None:
            h = hashlib.sha256()
            self._bufs[key] = h
            self._buf_n[key] = 0
        h.update(pack_elements(values, ell or self.ell))
        self._buf_n[key] += 1

    def flush(self, names: list[str]):
        """Mutual digest exchange and comparison on every named buffer."""
        plan = []
        for name in names:
            for a, b in PAIRS_OF_BUFFER[name]:
                if self.role == a:
                    plan.append((b, name))
                elif self.role == b:
                    plan.append((a, name))
        plan = [(peer, name) for peer, name in plan if self._buf_n.get((peer, name))]
        for peer, name in plan:
            self.ep.send_digest(peer, self._bufs[(peer, name)].digest(), point=f"flush.{name}")
        failed = None
        for peer, name in plan:
            theirs = self.ep.recv_digest(peer)
            if theirs != self._bufs[(peer, name)].digest():
                failed = failed or ABORT_OF_BUFFER[name]
            del self._bufs[(peer, name)]
            del self._buf_n[(peer, name)]
        if failed:
            raise ProtocolAbort(failed)

    # --- non-interactive randomness ------------------------------------------

    def _stream(self, kid, label):
        return self.keys.stream(kid, f"{self.sid}/{label}")

    def rand_shared(self, label: str, n: int) -> SharedCols:
        """n random shared values at zero communication: l1 ~ k01, l2 ~ k02,
        m ~ k12, defining v = m - l1 - l2."""
        k = self.keys
        m = self._stream(K12, label + ".m").elements_at(self.ell, 0, n) if k.has_key(K12) else None
        l1 = self._stream(K01, label + ".l1").elements_at(self.ell, 0, n) if k.has_key(K01) else None
        l2 = self._stream(K02, label + ".l2").elements_at(self.ell, 0, n) if k.has_key(K02) else None
        return SharedCols(m, l1, l2)

    # --- verified reconstruction ----------------------------------------------

    def rec_mal(self, cols: SharedCols, n: int, mark=True, point="rec.value",
                ell: int | None = None) -> list[int]:
        """Reconstruct n shared values toward all parties: 3n elements plus
        pairwise digests of the cross components."""
        ep = self.ep
        ell = self.ell if ell is None else ell
        w = mask(ell)
        if mark:
            ep.round_mark()
        if self.role == 0:
            ep.send_elements(1, cols.l2, ell, point=point)
            ep.send_elements(2, cols.l1, ell, point=point)
            ms = ep.recv_elements(1, n, ell)
            self.buf_elems(2, "rec", ms, ell=ell)
            return [(m - a - b) & w for m, a, b in zip(ms, cols.l1, cols.l2)]
        if self.role == 1:
            ep.send_elements(0, cols.m, ell, point=point)
            l2s = ep.recv_elements(0, n, ell)
            self.buf_elems(2, "rec", l2s + cols.l1, ell=ell)
            return [(m - a - b) & w for m, a, b in zip(cols.m, cols.l1, l2s)]
        l1s = ep.recv_elements(0, n, ell)
        self.buf_elems(1, "rec", cols.l2 + l1s, ell=ell)
        self.buf_elems(0, "rec", cols.m, ell=ell)
        return [(m - a - b) & w for m, a, b in zip(cols.m, l1s, cols.l2)]

    def rec_toward(self, target: int, cols: SharedCols, n: int, mark=True,
                   point="rec.value") -> list[int] | None:
        """Reconstruct toward one party: missing component from one holder,
        digest of it from the other (buffered)."""
        ep, w, ell = self.ep, self.w, self.ell
        if mark:
            ep.round_mark()
        if target == 0:
            if self.role == 1:
                ep.send_elements(0, cols.m, ell, point=point)
            elif self.role == 2:
                self.buf_elems(0, "rect", cols.m)
            else:
                ms = ep.recv_elements(1, n, ell)
                self.buf_elems(2, "rect", ms)
                return [(m - a - b) & w for m, a, b in zip(ms, cols.l1, cols.l2)]
            return None
        if target == 1:
            if self.role == 0:
                ep.send_elements(1, cols.l2, ell, point=point)
            elif self.role == 2:
                self.buf_elems(1, "rect", cols.l2)
            else:
                l2s = ep.recv_elements(0, n, ell)
                self.buf_elems(2, "rect", l2s)
                return [(m - a - b) & w for m, a, b in zip(cols.m, cols.l1, l2s)]
            return None
        raise ValueError("rec_toward supports targets 0 and 1")

    # --- product-relation check ------------------------------------------------

    def prc_batch(self, checked: SharedCols3, sacrificed: SharedCols3, mark=True):
        """Sacrifice check on pairs of shared triples, batched.

        checked/sacrificed hold columns (a, b, c) and (d, e, f).  rho = a - d
        and sigma = b - e are reconstructed with verified reconstruction;
        tau = c - f - sigma d - rho e - sigma rho stays shared and tau = 0 is
        digest-checked pairwise.  Returns the local tau components (for the
        offline flush to rule on).
        """
        w = self.w
        a, b, c = checked.a, checked.b, checked.c
        d, e, f = sacrificed.a, sacrificed.b, sacrificed.c
        n = checked.n
        rho_sigma = SharedCols(
            None if a.m is None else _sub(a.m, d.m, w) + _sub(b.m, e.m, w),
            None if a.l1 is None else _sub(a.l1, d.l1, w) + _sub(b.l1, e.l1, w),
            None if a.l2 is None else _sub(a.l2, d.l2, w) + _sub(b.l2, e.l2, w),
        )
        opened = self.rec_mal(rho_sigma, 2 * n, mark=mark, point="prc.rhosigma")
        rho, sigma = opened[:n], opened[n:]

        def tau_part(cc, ff, dd, ee, extra):
            if cc is None:
                return None
            out = []
            for i in range(n):
                v = (cc[i] - ff[i] - sigma[i] * dd[i] - rho[i] * ee[i] - extra[i]) & w
                out.append(v)
            return out

        sr = [(sigma[i] * rho[i]) & w for i in range(n)]
        zeros = [0] * n
        tau_m = tau_part(c.m, f.m, d.m, e.m, sr)
        tau_l1 = tau_part(c.l1, f.l1, d.l1, e.l1, zeros)
        tau_l2 = tau_part(c.l2, f.l2, d.l2, e.l2, zeros)

        if self.role == 0:
            self.buf_elems(1, "tau", tau_l2)
            self.buf_elems(2, "tau", tau_l1)
        elif self.role == 1:
            diff = _sub(tau_m, tau_l1, w)
            self.buf_elems(0, "tau", diff)
            self.buf_elems(2, "tau", diff)
        else:
            self.buf_elems(1, "tau", tau_l2)
            self.buf_elems(0, "tau", _sub(tau_m, tau_l2, w))
        return SharedCols(tau_m, tau_l1, tau_l2)


class SharedCols3:
    """Columns of a vector of shared triples (three SharedCols of equal length)."""

    def __init__(self, a: SharedCols, b: SharedCols, c: SharedCols, n: int):
        self.a, self.b, self.c = a, b, c
        self.n = n

    @staticmethod
    def concat(parts: list["SharedCols3"]) -> "SharedCols3":
        def cat(cols_list):
            m = None if cols_list[0].m is None else sum((c.m for c in cols_list), [])
            l1 = None if cols_list[0].l1 is None else sum((c.l1 for c in cols_list), [])
            l2 = None if cols_list[0].l2 is None else sum((c.l2 for c in cols_list), [])
            return SharedCols(m, l1, l2)

        return SharedCols3(cat([p.a for p in parts]), cat([p.b for p in parts]),
                           cat([p.c for p in parts]), sum(p.n for p in parts))

    def take(self, idx: list[int]) -> "SharedCols3":
        return SharedCols3(self.a.take(idx), self.b.take(idx), self.c.take(idx), len(idx))


@dataclass
class PoolPlan:
    n_batches: int
    n_per_batch: int  # N: verified triples per batch
    bucket: int  # B
    c_open: int  # C per batch

    @property
    def per_batch(self) -> int:
        return self.bucket * self.n_per_batch + self.c_open

    @property
    def total(self) -> int:
        return self.n_batches * self.per_batch


@dataclass
class MulPrep:
    """Per-instance offline material for verified multiplications."""

    n: int
    gamma1: list | None = None  # P1 (and P0)
    gamma2: list | None = None  # P2 (and P0 implicitly)
    gamma: list | None = None  # P0 only: full cross terms
    dx: list | None = None  # evaluators
    dy: list | None = None
    dz: list | None = None
    chi: list | None = None  # P0 only

    def gamma_mine(self, role):
        return self.gamma1 if role == 1 else self.gamma2


class TriplePipeline:
    """The optimistic pool, cut-and-bucket, and sacrifice steps.

    Split into step methods so the circuit driver can overlap pool rounds
    with the gamma/chi rounds of the gate instances (4 offline rounds total).
    """

    def __init__(self, eng: MalEngine, n_needed: int, label: str):
        self.eng = eng
        cfg = eng.cfg
        n_batch = cfg.n_batch or max(n_needed, 2)
        b = cfg.bucket_size(n_batch)
        c = cfg.c_open if cfg.c_open is not None else 3 * b
        n_batches = max(1, math.ceil(n_needed / n_batch))
        self.plan = PoolPlan(n_batches, n_batch, b, c)
        self.label = label
        self.pool: SharedCols3 | None = None
        self.gamma_mine = None
        self.verified_idx: list[int] = []
        self.sac_pairs: list[tuple[int, int]] = []

    def sample(self):
        eng, total = self.eng, self.plan.total
        d = eng.rand_shared(f"{self.label}/d", total)
        e = eng.rand_shared(f"{self.label}/e", total)
        k = eng.keys
        fl1 = eng._stream(K01, f"{self.label}/f.l1").elements_at(eng.ell, 0, total) if k.has_key(K01) else None
        fl2 = eng._stream(K02, f"{self.label}/f.l2").elements_at(eng.ell, 0, total) if k.has_key(K02) else None
        f = SharedCols(None, fl1, fl2)
        self.pool = SharedCols3(d, e, f, total)

    def gamma_step(self):
        """P0 deals the cross terms of the optimistic products (rides round A)."""
        eng, pool, total = self.eng, self.pool, self.plan.total
        w = eng.w
        if eng.role == 0:
            g1 = eng._stream(K01, f"{self.label}/g1").elements_at(eng.ell, 0, total)
            lam_d = [(a + b) & w for a, b in zip(pool.a.l1, pool.a.l2)]
            lam_e = [(a + b) & w for a, b in zip(pool.b.l1, pool.b.l2)]
            g2 = [gamma_second_share(ld, le, g, w) for ld, le, g in zip(lam_d, lam_e, g1)]
            eng.ep.send_elements(2, g2, eng.ell, point="trip.gamma2")
            self.gamma_mine = None
        elif eng.role == 1:
            self.gamma_mine = eng._stream(K01, f"{self.label}/g1").elements_at(eng.ell, 0, total)
        else:
            self.gamma_mine = eng.ep.recv_elements(0, total, eng.ell)

    def mf_step(self):
        """Optimistic semi-honest products: evaluators exchange [m_f] (rides round B)."""
        eng, pool, total = self.eng, self.pool, self.plan.total
        if eng.role == 0:
            return
        i, w = eng.role, eng.w
        lccol = pool.a.l1 if i == 1 else pool.a.l2  # d lambda parts
        lecol = pool.b.l1 if i == 1 else pool.b.l2
        lfcol = pool.c.l1 if i == 1 else pool.c.l2
        shares = [
            ((i - 1) * pool.a.m[t] * pool.b.m[t]
             - pool.a.m[t] * lecol[t] - pool.b.m[t] * lccol[t]
             + lfcol[t] + self.gamma_mine[t]) & w
            for t in range(total)
        ]
        other = 2 if i == 1 else 1
        eng.ep.send_elements(other, shares, eng.ell, point="trip.mz")
        theirs = eng.ep.recv_elements(other, total, eng.ell)
        pool.c.m = [(a + b) & w for a, b in zip(shares, theirs)]

    def cut_step(self):
        """Shared permutation, open C triples per batch, form buckets (round C)."""
        eng, plan = self.eng, self.plan
        perm_stream = eng._stream(KP, f"{self.label}/perm")
        opened_idx: list[int] = []
        for bi in range(plan.n_batches):
            base = bi * plan.per_batch
            order = [base + j for j in perm_stream.next_permutation(plan.per_batch)]
            opened_idx.extend(order[: plan.c_open])
            rest = order[plan.c_open :]
            for k in range(plan.n_per_batch):
                bucket = rest[k * plan.bucket : (k + 1) * plan.bucket]
                self.verified_idx.append(bucket[0])
                self.sac_pairs.extend((bucket[0], bucket[j]) for j in range(1, plan.bucket))

        if not opened_idx:
            return
        pool, w, ell, ep = self.pool, eng.w, eng.ell, eng.ep
        n_open = 3 * len(opened_idx)

        def gather(col_of):
            out = []
            for t in opened_idx:
                out.extend((col_of(pool.a)[t], col_of(pool.b)[t], col_of(pool.c)[t]))
            return out

        # semi-honest public reconstruction with the designated senders
        if eng.role == 1:
            ep.send_elements(2, gather(lambda c: c.l1), ell, point="trip.open")
            ep.send_elements(0, gather(lambda c: c.m), ell, point="trip.open")
            l2s = ep.recv_elements(2, n_open, ell)
            vals = [(m - a - b) & w for m, a, b in zip(gather(lambda c: c.m), gather(lambda c: c.l1), l2s)]
        elif eng.role == 2:
            ep.send_elements(1, gather(lambda c: c.l2), ell, point="trip.open")
            l1s = ep.recv_elements(1, n_open, ell)
            vals = [(m - a - b) & w for m, a, b in zip(gather(lambda c: c.m), l1s, gather(lambda c: c.l2))]
        else:
            ms = ep.recv_elements(1, n_open, ell)
            vals = [(m - a - b) & w for m, a, b in zip(ms, gather(lambda c: c.l1), gather(lambda c: c.l2))]
        for j in range(0, n_open, 3):
            d, e, f = vals[j : j + 3]
            if f != (d * e) & w:
                raise ProtocolAbort("triple-open")

    def sacrifice_cols(self) -> tuple[SharedCols3, SharedCols3]:
        first = [p[0] for p in self.sac_pairs]
        other = [p[1] for p in self.sac_pairs]
        return self.pool.take(first), self.pool.take(other)

    def verified(self, n: int) -> SharedCols3:
        return self.pool.take(self.verified_idx[:n])


def gen_triples(eng: MalEngine, n: int, label="trip", flush=True) -> SharedCols3:
    """Standalone triple factory: N verified random multiplication triples or
    abort.  4 offline rounds; amortized 9B - 6 elements per triple plus 9C
    per pool for the cut."""
    pipe = TriplePipeline(eng, n, label)
    pipe.sample()
    eng.ep.round_mark()
    pipe.gamma_step()
    eng.ep.round_mark()
    pipe.mf_step()
    eng.ep.round_mark()
    pipe.cut_step()
    checked, sac = pipe.sacrifice_cols()
    if checked.n:
        eng.prc_batch(checked, sac, mark=True)
    if flush:
        eng.flush(["rec", "tau"])
    return pipe.verified(n)


def mal_mul_offline(eng: MalEngine, xl1, xl2, yl1, yl2, zl1, zl2,
                    label="gate") -> MulPrep:
    """Offline stage for a vector of verified multiplication instances.

    Inputs are the lambda components of x, y, z per instance (None columns for
    parts this role does not hold).  Runs the gamma/chi dealing, triple pool,
    and all product-relation checks in 4 rounds; leaves the tau/rec digests in
    the deferred buffers (callers flush at the end of the offline phase).
    """
    n = (len(xl1) if xl1 is not None else len(xl2))
    prep = MulPrep(n=n)
    ep, w, ell = eng.ep, eng.w, eng.ell

    pipe = TriplePipeline(eng, n, f"{label}/pool")
    if eng.cfg.plain_bucketing:
        verified = gen_triples(eng, n, label=f"{label}/pool", flush=False)
    else:
        pipe.sample()

    # evaluator pads, sampled from the evaluators' common key
    if eng.keys.has_key(K12):
        prep.dx = eng._stream(K12, f"{label}/dx").elements_at(ell, 0, n)
        prep.dy = eng._stream(K12, f"{label}/dy").elements_at(ell, 0, n)
        prep.dz = eng._stream(K12, f"{label}/dz").elements_at(ell, 0, n)
        dz1 = eng._stream(K12, f"{label}/dz1").elements_at(ell, 0, n)

    # round A: gamma of the gate instances and of the pool products
    ep.round_mark()
    if eng.role == 0:
        g1 = eng._stream(K01, f"{label}/g1").elements_at(ell, 0, n)
        prep.gamma = [((xl1[i] + xl2[i]) * (yl1[i] + yl2[i])) & w for i in range(n)]
        g2 = [(prep.gamma[i] - g1[i]) & w for i in range(n)]
        prep.gamma1 = g1
        ep.send_elements(2, g2, ell, point="mul.gamma2")
    elif eng.role == 1:
        prep.gamma1 = eng._stream(K01, f"{label}/g1").elements_at(ell, 0, n)
    else:
        prep.gamma2 = ep.recv_elements(0, n, ell)
    if not eng.cfg.plain_bucketing:
        pipe.gamma_step()

    # round B: chi toward P0, pool products exchanged
    ep.round_mark()
    chi_mine = None
    if eng.role == 1:
        chi_mine = [(prep.dx[i] * yl1[i] + prep.dy[i] * xl1[i] + dz1[i] - prep.gamma1[i]) & w
                    for i in range(n)]
        ep.send_elements(0, chi_mine, ell, point="mul.chi")
    elif eng.role == 2:
        dz2 = [(prep.dz[i] - dz1[i]) & w for i in range(n)]
        chi_mine = [(prep.dx[i] * yl2[i] + prep.dy[i] * xl2[i] + dz2[i] - prep.gamma2[i]) & w
                    for i in range(n)]
        ep.send_elements(0, chi_mine, ell, point="mul.chi")
    if not eng.cfg.plain_bucketing:
        pipe.mf_step()
    if eng.role == 0:
        chi1 = ep.recv_elements(1, n, ell)
        chi2 = ep.recv_elements(2, n, ell)
        prep.chi = [(a + b) & w for a, b in zip(chi1, chi2)]
        abc_c = SharedCols(None, chi1, chi2)
    else:
        cm = [(prep.dz[i] + prep.dx[i] * prep.dy[i]) & w for i in range(n)]
        abc_c = SharedCols(cm, chi_mine if eng.role == 1 else None,
                           chi_mine if eng.role == 2 else None)

    # the linked triple (a, b, c): a = dx - lx, b = dy - ly, c = (dz + dx dy) - chi
    abc = SharedCols3(
        SharedCols(prep.dx, xl1, xl2),
        SharedCols(prep.dy, yl1, yl2),
        abc_c,
        n,
    )

    if eng.cfg.plain_bucketing:
        eng.prc_batch(abc, verified, mark=True)
        return prep

    # round C: cut and bucket
    ep.round_mark()
    pipe.cut_step()

    # round D: all product-relation checks (bucket sacrifices + gate triples)
    sac_first, sac_other = pipe.sacrifice_cols()
    verified = pipe.verified(n)
    checked = SharedCols3.concat([sac_first, abc]) if sac_first.n else abc
    sacrificed = SharedCols3.concat([sac_other, verified]) if sac_first.n else verified
    eng.prc_batch(checked, sacrificed, mark=True)
    return prep


def mal_mul_online(eng: MalEngine, prep: MulPrep, mx, my, xl1, xl2, yl1, yl2,
                   zl1, zl2, mark=True, flush=True, point="mul.mz") -> list[int] | None:
    """Online stage of verified multiplication for a vector of instances.

    Evaluators exchange [m_z] (one round) and the padded masked inputs travel
    to P0 in the same round; P0's recomputed digest and the evaluators'
    expectations land in the deferred buffers (flushed here unless the caller
    batches further).  Returns m_z at the evaluators, None at P0.
    """
    ep, w, ell, n = eng.ep, eng.w, eng.ell, prep.n
    if mark:
        ep.round_mark()
    mz = None
    if eng.role == 0:
        got = ep.recv_elements(1, 2 * n, ell)
        eng.buf_elems(2, "mstar", got)
        down = p0_mstar(eng, prep, got, xl1, xl2, yl1, yl2, zl1, zl2)
        eng.buf_elems(1, "mdown", down)
        eng.buf_elems(2, "mdown", down)
    else:
        i = eng.role
        lx = xl1 if i == 1 else xl2
        ly = yl1 if i == 1 else yl2
        lz = zl1 if i == 1 else zl2
        gam = prep.gamma_mine(i)
        shares = [((i - 1) * mx[t] * my[t] - mx[t] * ly[t] - my[t] * lx[t]
                   + lz[t] + gam[t]) & w for t in range(n)]
        other = 2 if i == 1 else 1
        ep.send_elements(other, shares, ell, point=point)
        mstars = []
        for t in range(n):
            mstars.append((mx[t] + prep.dx[t]) & w)
            mstars.append((my[t] + prep.dy[t]) & w)
        if i == 1:
            ep.send_elements(0, mstars, ell, point="mul.mstar")
        else:
            eng.buf_elems(0, "mstar", mstars)
        theirs = ep.recv_elements(other, n, ell)
        mz = [(a + b) & w for a, b in zip(shares, theirs)]
        expect = [(mz[t] - mx[t] * my[t] + prep.dz[t]) & w for t in range(n)]
        eng.buf_elems(0, "mdown", expect)
    if flush:
        eng.flush(["mstar", "mdown"])
    return mz


def p0_mstar(eng: MalEngine, prep: MulPrep, mstars: list[int],
             xl1, xl2, yl1, yl2, zl1, zl2) -> list[int]:
    """P0's recomputation of the padded masked products from m*_x, m*_y."""
    w = eng.w
    out = []
    for i in range(prep.n):
        msx, msy = mstars[2 * i], mstars[2 * i + 1]
        lx = (xl1[i] + xl2[i]) & w
        ly = (yl1[i] + yl2[i]) & w
        lz = (zl1[i] + zl2[i]) & w
        out.append((-msx * ly - msy * lx + lz + 2 * prep.gamma[i] + prep.chi[i]) & w)
    return out


# --- fair reconstruction -----------------------------------------------------


class FairState:
    """Pair commitments and proof-of-origin material for fair output."""

    def __init__(self):
        self.agreed_l1: list[bytes] | None = None  # held by P2
        self.agreed_l2: list[bytes] | None = None  # held by P1
        self.agreed_m: list[bytes] | None = None  # held by P0 after round 1
        self.r_com: bytes | None = None  # P2: com(r1); P1: com(r2)
        self.o1: bytes | None = None  # r1 opening: issued by P0, known to P1
        self.o2: bytes | None = None  # r2 opening: issued by P0, known to P2
        self.open_l1: list[bytes] | None = None  # P0, P1
        self.open_l2: list[bytes] | None = None  # P0, P2
        self.open_m: list[bytes] | None = None  # evaluators (online)


def _open_bytes(value: int, ell: int, rand: bytes) -> bytes:
    return value.to_bytes(elem_size(ell), "little") + rand


def fair_offline(eng: MalEngine, l1_col, l2_col, n: int, mark=False) -> FairState:
    """Commitment stage: pairs (P0,P1) and (P0,P2) commit their common lambda
    components cross-pair, plus the proof-of-origin values r1, r2."""
    ep, ell = eng.ep, eng.ell
    fs = FairState()
    if mark:
        ep.round_mark()
    k = eng.keys

    def pair_coms(kid, col, rl, rr):
        rs = eng._stream(kid, rl)
        opens = [_open_bytes(col[i], ell, rs.next_bytes(COMMIT_RAND_BYTES)) for i in range(n)]
        value_coms = [hash_digest(o) for o in opens]
        rstream = eng._stream(kid, rr)
        r_open = _open_bytes(rstream.next_element(ell), ell,
                             rstream.next_bytes(COMMIT_RAND_BYTES))
        return value_coms, opens, r_open

    if k.has_key(K01):  # member of the (P0, P1) pair: commits l1 and r1 to P2
        coms, fs.open_l1, fs.o1 = pair_coms(K01, l1_col, "frec/l1r", "frec/r1")
        ep.send_commitments(2, coms, point="frec.lcom")
        ep.send_control(2, hash_digest(fs.o1), point="frec.rcom")
    if k.has_key(K02):  # member of the (P0, P2) pair: commits l2 and r2 to P1
        coms, fs.open_l2, fs.o2 = pair_coms(K02, l2_col, "frec/l2r", "frec/r2")
        ep.send_commitments(1, coms, point="frec.lcom")
        ep.send_control(1, hash_digest(fs.o2), point="frec.rcom")

    if eng.role == 1:
        a = ep.recv_commitments(0, n)
        b = ep.recv_commitments(2, n)
        ra, rb = ep.recv_control(0), ep.recv_control(2)
        if a != b or ra != rb:
            raise ProtocolAbort("fair-commitments")
        fs.agreed_l2, fs.r_com = a, ra
    elif eng.role == 2:
        a = ep.recv_commitments(0, n)
        b = ep.recv_commitments(1, n)
        ra, rb = ep.recv_control(0), ep.recv_control(1)
        if a != b or ra != rb:
            raise ProtocolAbort("fair-commitments")
        fs.agreed_l1, fs.r_com = a, ra
    return fs


def fair_online(eng: MalEngine, fs: FairState, m_col, l1_col, l2_col, n: int) -> list[int]:
    """Four online rounds: m commitments up, P0's verdict down, evaluator
    cross-exchange with proof-of-origin validation, then openings."""
    ep, ell, w = eng.ep, eng.ell, eng.w
    role = eng.role
    k = eng.keys

    # round 1: evaluators commit the masked outputs to P0
    ep.round_mark()
    if role != 0:
        rs = eng._stream(K12, "frec/mr")
        fs.open_m = [_open_bytes(m_col[i], ell, rs.next_bytes(COMMIT_RAND_BYTES))
                     for i in range(n)]
        ep.send_commitments(0, [hash_digest(o) for o in fs.open_m], point="frec.mcom")

    # round 2: P0 signals continue, or abort with the proof-of-origin opening
    ep.round_mark()
    if role == 0:
        a = ep.recv_commitments(1, n)
        b = ep.recv_commitments(2, n)
        if a == b:
            fs.agreed_m = a
            for dst in (1, 2):
                ep.send_control(dst, b"\x01", point="frec.signal")
        else:
            # o2 (the r2 opening) convinces P1; o1 convinces P2
            ep.send_control(1, b"\x00" + fs.o2, point="frec.signal")
            ep.send_control(2, b"\x00" + fs.o1, point="frec.signal")
            raise ProtocolAbort("fair-mcom")
        signal = None
    else:
        signal = ep.recv_control(0)

    # round 3: evaluators exchange what P0 told them
    ep.round_mark()
    if role != 0:
        other = 2 if role == 1 else 1
        ep.send_control(other, signal, point="frec.relay")
        relayed = ep.recv_control(other)

        def valid_abort(msg, against_com, known_open):
            if not msg or msg[0] != 0:
                return False
            opening = msg[1:]
            if against_com is not None:
                return hash_digest(opening) == against_com
            return opening == known_open  # the pair member knows the value itself

        # the direct signal is judged against the agreed r commitment; a
        # relayed claim against the r value this party itself knows
        my_claim = valid_abort(signal, fs.r_com, None)
        their_claim = valid_abort(relayed, None, fs.o1 if role == 1 else fs.o2)
        if my_claim or their_claim:
            raise ProtocolAbort("fair-abort")

    # round 4: openings (each pair opens its common component to the third)
    ep.round_mark()
    if role == 0:
        ep.send_openings(2, fs.open_l1, point="frec.open")
        ep.send_openings(1, fs.open_l2, point="frec.open")
        got1 = ep.recv_openings(1, n)
        got2 = ep.recv_openings(2, n)
        ms = _pick_openings(fs.agreed_m, [got1, got2], ell)
        return [(m - a - b) & w for m, a, b in zip(ms, l1_col, l2_col)]
    if role == 1:
        ep.send_openings(2, fs.open_l1, point="frec.open")
        ep.send_openings(0, fs.open_m, point="frec.open")
        got0 = ep.recv_openings(0, n)
        got2 = ep.recv_openings(2, n)
        l2s = _pick_openings(fs.agreed_l2, [got0, got2], ell)
        return [(m - a - b) & w for m, a, b in zip(m_col, l1_col, l2s)]
    ep.send_openings(1, fs.open_l2, point="frec.open")
    ep.send_openings(0, fs.open_m, point="frec.open")
    got0 = ep.recv_openings(0, n)
    got1 = ep.recv_openings(1, n)
    l1s = _pick_openings(fs.agreed_l1, [got0, got1], ell)
    return [(m - a - b) & w for m, a, b in zip(m_col, l1s, l2_col)]


def _pick_openings(agreed: list[bytes], candidates: list[list[bytes]], ell: int) -> list[int]:
    """Per output, accept whichever received opening matches the agreed
    commitment (at least one sender per pair is honest)."""
    size = elem_size(ell)
    out = []
    for i, com in enumerate(agreed):
        for cand in candidates:
            if hash_digest(cand[i]) == com:
                out.append(int.from_bytes(cand[i][:size], "little"))
                break
        else:
            raise ProtocolAbort("fair-opening")
    return out


# --- the full circuit protocol ------------------------------------------------


def run_circuit_mal(role: int, ep: Endpoint, keys: KeySetup, circuit: Circuit,
                    my_inputs: dict[int, int], cfg: TripleConfig | None = None,
                    fairness: bool = False, sid: str = "ckt",
                    state_out: dict | None = None) -> list[int]:
    """Maliciously secure circuit evaluation; outputs or ProtocolAbort.

    Per MUL gate, amortized: offline 9B + 3 elements in 4 rounds; online 4
    elements, with the padded-input round and the digest round constant per
    circuit.  Fairness swaps verified reconstruction for the fair protocol at
    the output gates only.
    """
    eng = MalEngine(role, ep, keys, circuit.ell, sid, cfg)
    w = mask(circuit.ell)

    ep.phase = OFFLINE
    st = sample_wire_lambdas(role, keys, circuit, sid)
    mul_gates = [g for g in circuit.gates if g[0] == MUL]
    n = len(mul_gates)

    # role-uniform lambda columns (a party may incidentally know the odd
    # cross component of an owned input wire, but the protocol ignores it)
    def col(part, which):
        return [getattr(st, part)[g[which]] for g in mul_gates]

    xl1 = col("l1", 1) if role != 2 else None
    yl1 = col("l1", 2) if role != 2 else None
    zl1 = col("l1", 3) if role != 2 else None
    xl2 = col("l2", 1) if role != 1 else None
    yl2 = col("l2", 2) if role != 1 else None
    zl2 = col("l2", 3) if role != 1 else None
    if n:
        prep = mal_mul_offline(eng, xl1, xl2, yl1, yl2, zl1, zl2, label="gate")
    else:
        prep = MulPrep(n=0)

    fs = None
    if fairness:
        outs = circuit.outputs
        fs = fair_offline(eng, [st.l1[o] for o in outs] if role != 2 else None,
                          [st.l2[o] for o in outs] if role != 1 else None,
                          len(outs), mark=True)
    eng.flush(["rec", "tau"])

    ep.phase = ONLINE
    on_m = None
    if role != 0:
        other = 2 if role == 1 else 1
        on_m = lambda wire, m: eng.buf_elems(other, "sharem", [m])
    input_stage(role, ep, circuit, st, my_inputs, on_p0_m=on_m)
    eng.flush(["sharem"])

    mul_pos = {}
    kpos = 0
    for gi, g in enumerate(circuit.gates):
        if g[0] == MUL:
            mul_pos[gi] = kpos
            kpos += 1
    mstars = [0] * (2 * n)
    expect_down = [0] * n

    def on_mul(gi, mx, my, mz):
        k = mul_pos[gi]
        mstars[2 * k] = (mx + prep.dx[k]) & w
        mstars[2 * k + 1] = (my + prep.dy[k]) & w
        expect_down[k] = (mz - mx * my + prep.dz[k]) & w

    eval_layers(role, ep, circuit, st, prep.gamma_mine(role), on_mul=on_mul if role else None)

    if n:
        # padded masked inputs up to P0, then P0's combined digest back down
        ep.round_mark()
        if role == 1:
            ep.send_elements(0, mstars, circuit.ell, point="mul.mstar")
            eng.buf_elems(0, "mdown", expect_down)
        elif role == 2:
            eng.buf_elems(0, "mstar", mstars)
            eng.buf_elems(0, "mdown", expect_down)
        else:
            got = ep.recv_elements(1, 2 * n, circuit.ell)
            eng.buf_elems(2, "mstar", got)
            down = p0_mstar(eng, prep, got, xl1, xl2, yl1, yl2, zl1, zl2)
            eng.buf_elems(1, "mdown", down)
            eng.buf_elems(2, "mdown", down)
        eng.flush(["mstar"])
        ep.round_mark()
        eng.flush(["mdown"])

    outs = circuit.outputs
    out_cols = SharedCols(
        None if role == 0 else [st.m[o] for o in outs],
        None if role == 2 else [st.l1[o] for o in outs],
        None if role == 1 else [st.l2[o] for o in outs],
    )
    if fairness:
        values = fair_online(eng, fs, out_cols.m, out_cols.l1, out_cols.l2, len(outs))
    else:
        values = eng.rec_mal(out_cols, len(outs))
        eng.flush(["rec"])
    if state_out is not None:
        state_out["wires"] = st
        state_out["engine"] = eng
    return values
