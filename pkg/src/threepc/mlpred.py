"""Secure prediction: dot products, sign extraction, four model kinds.

The model owner and client stage their fixed-point inputs with the dealer
(input staging is outside the metered server computation), the servers
compute the shared prediction, and only the final reconstruction leaves the
share domain.

Dot product (semi-honest): the distributor deals one combined cross term
gamma_pq = sum_j lambda_pj * lambda_qj instead of d of them, so both the
offline cost (1 element) and the online cost (one exchange of the summed
[m_u], 2 elements) are independent of d.  The malicious variant pays the full
d verified multiplications offline (21d at bucket size 2), but the online
verification combines into a single recomputed sum: P0 checks
m*_u = sum m*_uj against m_u - sum(m_pj m_qj - dz_j), so online traffic is
2d + 2 elements and still one round.

Comparison reduces to the sign bit: sign(r*a) = sign(r) XOR sign(a) in two's
complement as long as the product does not wrap.  The mask r is therefore
drawn from [1, 2^(l-2-k)) for declared input magnitude |a| <= 2^k (the
malicious factors r1, r2 each from [1, 2^((l-2-k)//2))), which keeps
|r*a| < 2^(l-2) and the identity unconditional on admissible inputs.  The
evaluators reveal r*a (blinded additive shares) to P0, who shares back its
sign bit; XOR with the locally shared sign of r yields boolean shares of
msb(a).  a = 0 yields msb(0) = 0 ("not less").

Model kinds: linear regression and SVM regression are w . z + b; logistic
regression and SVM classification add a sign.  SVM parameters collapse to an
effective (w, b) by the owner (w = sum_j alpha_j y_j x_j); the logistic
threshold folds into the bias as b - ln(t/(1-t)).  Both happen in the clear
on the owner's side before dealing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .crypto import K01, K02, K12, KP, KeySetup, PrfStream, hash_digest
from .engine_mal import (
    MalEngine,
    MulPrep,
    SharedCols,
    mal_mul_offline,
    mal_mul_online,
    p0_mstar,
)
from .ring import FRAC_BITS, PROD_FRAC_BITS, RingElement, fx_decode, fx_encode, mask
from .sharing import MaskedShare, ShareVector, dealer_share, dealer_share_vector, lin_combine
from .transport import OFFLINE, ONLINE, Endpoint

KINDS = ("linreg", "svmr", "logr", "svmc")
CLASSIFIER_KINDS = ("logr", "svmc")

DEFAULT_KA = 31  # |signed(a)| < 2^31 covers d=784 products at 26 fractional bits


@dataclass
class ModelInput:
    """Owner-side model description before staging."""

    kind: str
    w: list[float] | None = None
    b: float = 0.0
    threshold: float | None = None  # logr only, in (0, 1)
    support: list[tuple[float, float, list[float]]] = field(default_factory=list)
    # svm kinds: (alpha_j, y_j, x_j)


def effective_linear_model(model: ModelInput) -> tuple[list[float], float]:
    """Collapse any model kind to (w, b) for the servers' linear pipeline."""
    if model.kind not in KINDS:
        raise ValueError(f"unknown model kind {model.kind}")
    if model.kind in ("svmr", "svmc"):
        if not model.support:
            raise ValueError("svm model needs support vectors")
        d = len(model.support[0][2])
        w = [0.0] * d
        for alpha, y, x in model.support:
            for i, xi in enumerate(x):
                w[i] += alpha * y * xi
        b = model.b
    else:
        if not model.w:
            raise ValueError("linear model needs a weight vector")
        w, b = list(model.w), model.b
    if model.kind == "logr":
        t = model.threshold
        if t is None or not (0.0 < t < 1.0):
            raise ValueError("logr threshold must lie in (0, 1)")
        b = b - math.log(t / (1.0 - t))
    return w, b


def plain_prediction(model: ModelInput, z: list[float]):
    """The cleartext pipeline: the oracle for end-to-end tests."""
    w, b = effective_linear_model(model)
    score = sum(wi * zi for wi, zi in zip(w, z)) + b
    if model.kind in CLASSIFIER_KINDS:
        return 1 if score < 0 else 0
    return score


def stage_shares(model: ModelInput, z: list[float], seed: bytes):
    """Dealer staging: fx-encode the effective model and query, deal vectors.

    Returns per-role dicts {w, z, b}; the classifier bias is pre-scaled to
    the 26-fractional-bit domain of the dot product at prediction time, not
    here, so b stays a plain 13-bit-fraction sharing.
    """
    w, b = effective_linear_model(model)
    if len(w) != len(z):
        raise ValueError("model/query dimension mismatch")
    stream = PrfStream(hash_digest(seed + b"/dealer")[:16], "stage")
    w_enc = [fx_encode(x).value for x in w]
    z_enc = [fx_encode(x).value for x in z]
    w_views = dealer_share_vector(w_enc, 64, stream)
    z_views = dealer_share_vector(z_enc, 64, stream)
    b_views = dealer_share(fx_encode(b).value, 64, stream)
    return [
        {"kind": model.kind, "w": w_views[r], "z": z_views[r], "b": b_views[r]}
        for r in range(3)
    ]


def _cols(vec: ShareVector):
    m = [s.m for s in vec] if vec.role != 0 else None
    l1 = [s.l1 for s in vec] if vec.role != 2 else None
    l2 = [s.l2 for s in vec] if vec.role != 1 else None
    return m, l1, l2


# --- dot products -------------------------------------------------------------


def dot_semi(role: int, ep: Endpoint, keys: KeySetup, p: ShareVector, q: ShareVector,
             label: str = "dp") -> MaskedShare:
    """Semi-honest dot product: 1 element offline, 2 online, any d."""
    if len(p) != len(q):
        raise ValueError("dot product needs equal lengths")
    ell = p.ell
    w = mask(ell)
    d = len(p)
    pm, pl1, pl2 = _cols(p)
    qm, ql1, ql2 = _cols(q)

    ep.phase = OFFLINE
    ul1 = keys.stream(K01, f"{label}/u.l1").next_element(ell) if keys.has_key(K01) else None
    ul2 = keys.stream(K02, f"{label}/u.l2").next_element(ell) if keys.has_key(K02) else None
    if role == 0:
        gamma = sum((pl1[j] + pl2[j]) * (ql1[j] + ql2[j]) for j in range(d)) & w
        g1 = keys.stream(K01, f"{label}/g1").next_element(ell)
        ep.round_mark()
        ep.send_elements(2, [(gamma - g1) & w], ell, point="dp.gamma2")
        ep.phase = ONLINE
        return MaskedShare(0, ell, l1=ul1, l2=ul2)
    if role == 1:
        gam_mine = keys.stream(K01, f"{label}/g1").next_element(ell)
        ep.round_mark()
        lp, lq, lu = pl1, ql1, ul1
    else:
        ep.round_mark()
        gam_mine = ep.recv_elements(0, 1, ell)[0]
        lp, lq, lu = pl2, ql2, ul2

    ep.phase = ONLINE
    i = role
    share = sum(((i - 1) * pm[j] * qm[j] - pm[j] * lq[j] - qm[j] * lp[j])
                for j in range(d))
    share = (share + gam_mine + lu) & w
    other = 2 if role == 1 else 1
    ep.round_mark()
    ep.send_elements(other, [share], ell, point="dp.mu")
    m_u = (share + ep.recv_elements(other, 1, ell)[0]) & w
    if role == 1:
        return MaskedShare(1, ell, m=m_u, l1=ul1)
    return MaskedShare(2, ell, m=m_u, l2=ul2)


def dot_mal(eng: MalEngine, p: ShareVector, q: ShareVector, label: str = "dp") -> MaskedShare:
    """Verified dot product: d-fold multiplication machinery with one
    combined online verification.  Offline 21d elements (bucket 2), online
    2d + 2 in one round."""
    if len(p) != len(q):
        raise ValueError("dot product needs equal lengths")
    ep, ell, w = eng.ep, eng.ell, eng.w
    role, keys, d = eng.role, eng.keys, len(p)
    pm, pl1, pl2 = _cols(p)
    qm, ql1, ql2 = _cols(q)

    ep.phase = OFFLINE
    # one lambda_u component per product; the output mask is their sum
    ul1 = eng._stream(K01, f"{label}/u.l1").next_elements(ell, d) if keys.has_key(K01) else None
    ul2 = eng._stream(K02, f"{label}/u.l2").next_elements(ell, d) if keys.has_key(K02) else None
    prep = mal_mul_offline(eng, pl1, pl2, ql1, ql2, ul1, ul2, label=label)
    eng.flush(["rec", "tau"])

    ep.phase = ONLINE
    ep.round_mark()
    if role == 0:
        got = ep.recv_elements(1, 2 * d, ell)
        eng.buf_elems(2, "mstar", got)
        per_term = p0_mstar(eng, prep, got, pl1, pl2, ql1, ql2, ul1, ul2)
        down = [sum(per_term) & w]
        eng.buf_elems(1, "mdown", down)
        eng.buf_elems(2, "mdown", down)
        eng.flush(["mstar", "mdown"])
        return MaskedShare(0, ell, l1=sum(ul1) & w, l2=sum(ul2) & w)

    i = role
    lp = pl1 if i == 1 else pl2
    lq = ql1 if i == 1 else ql2
    lu = ul1 if i == 1 else ul2
    gam = prep.gamma_mine(i)
    share = sum(((i - 1) * pm[j] * qm[j] - pm[j] * lq[j] - qm[j] * lp[j]
                 + lu[j] + gam[j]) for j in range(d)) & w
    other = 2 if i == 1 else 1
    ep.send_elements(other, [share], ell, point="dp.mu")
    mstars = []
    for j in range(d):
        mstars.append((pm[j] + prep.dx[j]) & w)
        mstars.append((qm[j] + prep.dy[j]) & w)
    if i == 1:
        ep.send_elements(0, mstars, ell, point="mul.mstar")
    else:
        eng.buf_elems(0, "mstar", mstars)
    m_u = (share + ep.recv_elements(other, 1, ell)[0]) & w
    expect = (m_u - sum(pm[j] * qm[j] - prep.dz[j] for j in range(d))) & w
    eng.buf_elems(0, "mdown", [expect])
    eng.flush(["mstar", "mdown"])
    if i == 1:
        return MaskedShare(1, ell, m=m_u, l1=sum(ul1) & w)
    return MaskedShare(2, ell, m=m_u, l2=sum(ul2) & w)


# --- sign extraction (secure comparison) ---------------------------------------


def _mask_bits(ell: int, k_a: int) -> int:
    bits = ell - 2 - k_a
    if bits < 1:
        raise ValueError(f"magnitude bound 2^{k_a} leaves no room at ell={ell}")
    return bits


def bool_share(role: int, m=0, l1=0, l2=0) -> MaskedShare:
    if role == 0:
        return MaskedShare(0, 1, l1=l1, l2=l2)
    if role == 1:
        return MaskedShare(1, 1, m=m, l1=l1)
    return MaskedShare(2, 1, m=m, l2=l2)


def bitext_semi(role: int, ep: Endpoint, keys: KeySetup, a: MaskedShare,
                k_a: int = DEFAULT_KA, label: str = "cmp",
                forced_r: int | None = None) -> MaskedShare:
    """Boolean sharing of msb(a), semi-honest: 2 rounds, 2l + 2 bits online.

    Requires |signed(a)| <= 2^k_a.  forced_r pins the evaluators' mask (test
    injection for exhaustive sweeps).
    """
    ell = a.ell
    w = mask(ell)
    bits = _mask_bits(ell, k_a)

    ep.phase = OFFLINE
    if keys.has_key(K12):
        st = keys.stream(K12, f"{label}/r")
        r = st.next_nonzero(bits)
        rp = st.next_element(ell)
        if forced_r is not None:
            r = forced_r
        p_bit = (r >> (ell - 1)) & 1  # 0 by the sampling range
    ep.phase = ONLINE

    ep.round_mark()
    if role == 1:
        share_a = (a.m - a.l1) & w
        ep.send_elements(0, [(r * share_a + rp) & w], ell, point="bitext.ra")
    elif role == 2:
        share_a = (-a.l2) & w
        ep.send_elements(0, [(r * share_a - rp) & w], ell, point="bitext.ra")

    # P0 learns r*a and shares its sign bit at ell = 1
    ql1 = keys.stream(K01, f"{label}/q.l1").next_element(1) if keys.has_key(K01) else None
    ql2 = keys.stream(K02, f"{label}/q.l2").next_element(1) if keys.has_key(K02) else None
    ep.round_mark()
    if role == 0:
        ra = sum(ep.recv_elements(src, 1, ell)[0] for src in (1, 2)) & w
        q = (ra >> (ell - 1)) & 1
        m_q = (q + ql1 + ql2) & 1
        ep.send_elements(1, [m_q], 1, point="bitext.mq")
        ep.send_elements(2, [m_q], 1, point="bitext.mq")
        q_sh = bool_share(0, l1=ql1, l2=ql2)
        p_sh = bool_share(0)
    else:
        m_q = ep.recv_elements(0, 1, 1)[0]
        q_sh = bool_share(role, m=m_q, l1=ql1 if role == 1 else 0,
                          l2=ql2 if role == 2 else 0)
        p_sh = bool_share(role, m=p_bit)
    return lin_combine([1, 1], [p_sh, q_sh])


def bitext_mal(eng: MalEngine, a: MaskedShare, k_a: int = DEFAULT_KA,
               label: str = "cmp", forced: tuple[int, int] | None = None) -> MaskedShare:
    """Boolean sharing of msb(a), malicious: offline 46l bits in 4 rounds,
    online 6l + 1 bits in 3 rounds.

    The mask is a product r = r1 * r2 of pair-sampled factors (P1,P2 and
    P0,P2), multiplied with verified multiplication; r*a is reconstructed
    toward P0 and P1, and P1's sharing of its sign bit is cross-checked
    against P0's digest by P2.
    """
    ep, ell, w = eng.ep, eng.ell, eng.w
    role, keys = eng.role, eng.keys
    bits = _mask_bits(ell, k_a) // 2
    if bits < 1:
        raise ValueError("magnitude bound too tight to split between two factors")

    ep.phase = OFFLINE
    r1 = keys.stream(K12, f"{eng.sid}/{label}/r1").next_nonzero(bits) if keys.has_key(K12) else None
    r2 = keys.stream(K02, f"{eng.sid}/{label}/r2").next_nonzero(bits) if keys.has_key(K02) else None
    if forced is not None:
        r1 = forced[0] if r1 is not None else None
        r2 = forced[1] if r2 is not None else None
    p1 = (r1 >> (ell - 1)) & 1 if r1 is not None else None  # 0 by range
    p2 = (r2 >> (ell - 1)) & 1 if r2 is not None else None

    # non-interactive sharings: <<r1>> = (r1, [0, 0]);  <<r2>> = (0, [0, -r2])
    r1m, r1l1, r1l2 = r1, 0, 0
    r2m, r2l1, r2l2 = 0, 0, (-r2) & w if r2 is not None else None

    # fresh output masks for r = r1*r2 and for ra
    rl1 = eng._stream(K01, f"{label}/r.l1").next_element(ell) if keys.has_key(K01) else None
    rl2 = eng._stream(K02, f"{label}/r.l2").next_element(ell) if keys.has_key(K02) else None
    ral1 = eng._stream(K01, f"{label}/ra.l1").next_element(ell) if keys.has_key(K01) else None
    ral2 = eng._stream(K02, f"{label}/ra.l2").next_element(ell) if keys.has_key(K02) else None

    # two verified-multiplication instances prepared in one batch:
    # index 0: r1 * r2 -> r      index 1: r * a -> ra
    xl1 = [r1l1, rl1] if role != 2 else None
    xl2 = [r1l2, rl2] if role != 1 else None
    yl1 = [r2l1, a.l1] if role != 2 else None
    yl2 = [r2l2, a.l2] if role != 1 else None
    zl1 = [rl1, ral1] if role != 2 else None
    zl2 = [rl2, ral2] if role != 1 else None
    prep = mal_mul_offline(eng, xl1, xl2, yl1, yl2, zl1, zl2, label=label)

    # the r1*r2 instance completes inside the offline phase
    sub = _prep_slice(prep, 0)
    mr = mal_mul_online(eng, sub, [r1m] if role else None, [r2m] if role else None,
                        _sl(xl1, 0), _sl(xl2, 0), _sl(yl1, 0), _sl(yl2, 0),
                        _sl(zl1, 0), _sl(zl2, 0), mark=False, flush=False,
                        point="bitext.mr")
    eng.flush(["rec", "tau", "mstar", "mdown"])

    ep.phase = ONLINE
    # round 1: verified multiplication of r and a
    sub = _prep_slice(prep, 1)
    mra = mal_mul_online(eng, sub, mr, [a.m] if role else None,
                         _sl(xl1, 1), _sl(xl2, 1), _sl(yl1, 1), _sl(yl2, 1),
                         _sl(zl1, 1), _sl(zl2, 1), mark=True, flush=False,
                         point="bitext.mra")

    # round 2: reconstruct r*a toward P0 and P1
    ra_cols = SharedCols([mra[0]] if role else None,
                         [ral1] if role != 2 else None,
                         [ral2] if role != 1 else None)
    got0 = eng.rec_toward(0, ra_cols, 1, mark=True, point="bitext.rec")
    got1 = eng.rec_toward(1, ra_cols, 1, mark=False, point="bitext.rec")
    eng.flush(["mstar", "mdown", "rect"])

    # round 3: P1 shares q = msb(r*a); P2 cross-checks against P0's digest
    ql1 = eng._stream(K01, f"{label}/q.l1").next_element(1) if keys.has_key(K01) else None
    ql2 = eng.keys.stream(KP, f"{eng.sid}/{label}/q.l2").next_element(1)
    ep.round_mark()
    if role == 1:
        q = (got1[0] >> (ell - 1)) & 1
        m_q = (q + ql1 + ql2) & 1
        ep.send_elements(2, [m_q], 1, point="bitext.mq")
        q_sh = MaskedShare(1, 1, m=m_q, l1=ql1)
        p_sh = lin_combine([1, 1], [bool_share(1, m=p1), bool_share(1)])
    elif role == 0:
        q = (got0[0] >> (ell - 1)) & 1
        m_q = (q + ql1 + ql2) & 1
        eng.buf_elems(2, "q", [m_q], ell=1)
        q_sh = MaskedShare(0, 1, l1=ql1, l2=ql2)
        p_sh = lin_combine([1, 1], [bool_share(0), bool_share(0, l2=p2)])
    else:
        m_q = ep.recv_elements(1, 1, 1)[0]
        eng.buf_elems(0, "q", [m_q], ell=1)
        q_sh = MaskedShare(2, 1, m=m_q, l2=ql2)
        p_sh = lin_combine([1, 1], [bool_share(2, m=p1), bool_share(2, m=0, l2=p2)])
    eng.flush(["q"])
    return lin_combine([1, 1], [p_sh, q_sh])


def _sl(col, i):
    return None if col is None else [col[i]]


def _prep_slice(prep: MulPrep, i: int) -> MulPrep:
    pick = lambda col: None if col is None else [col[i]]
    return MulPrep(n=1, gamma1=pick(prep.gamma1), gamma2=pick(prep.gamma2),
                   gamma=pick(prep.gamma), dx=pick(prep.dx), dy=pick(prep.dy),
                   dz=pick(prep.dz), chi=pick(prep.chi))


# --- prediction pipelines -------------------------------------------------------


def predict(role: int, ep: Endpoint, keys: KeySetup, staged: dict, mode: str,
            k_a: int = DEFAULT_KA, eng: MalEngine | None = None,
            label: str = "pred") -> MaskedShare:
    """Shared prediction from staged shares: a masked 64-bit score carrying
    26 fractional bits for regression kinds, a boolean share for classifiers.

    The caller reconstructs outside this function; its communication is
    exactly the server-side cost of the prediction."""
    kind = staged["kind"]
    wv, zv, bsh = staged["w"], staged["z"], staged["b"]
    if mode == "semi":
        u = dot_semi(role, ep, keys, wv, zv, label=f"{label}/dp")
    elif mode == "mal":
        if eng is None:
            raise ValueError("malicious prediction needs a MalEngine")
        u = dot_mal(eng, wv, zv, label=f"{label}/dp")
    else:
        raise ValueError(f"unknown mode {mode}")
    # align the 13-fraction bias with the 26-fraction product domain
    score = lin_combine([1, 1 << FRAC_BITS], [u, bsh])
    if kind not in CLASSIFIER_KINDS:
        return score
    if mode == "semi":
        return bitext_semi(role, ep, keys, score, k_a, label=f"{label}/cmp")
    return bitext_mal(eng, score, k_a, label=f"{label}/cmp")


def reconstruct_semi_share(role: int, ep: Endpoint, sh: MaskedShare) -> int:
    """Designated-sender reconstruction of one shared value (3 elements)."""
    ell = sh.ell
    w = mask(ell)
    ep.round_mark()
    if role == 0:
        m = ep.recv_elements(1, 1, ell)[0]
        return (m - sh.l1 - sh.l2) & w
    if role == 1:
        ep.send_elements(2, [sh.l1], ell, point="rec.value")
        ep.send_elements(0, [sh.m], ell, point="rec.value")
        l2 = ep.recv_elements(2, 1, ell)[0]
        return (sh.m - sh.l1 - l2) & w
    ep.send_elements(1, [sh.l2], ell, point="rec.value")
    l1 = ep.recv_elements(1, 1, ell)[0]
    return (sh.m - l1 - sh.l2) & w


def reconstruct_mal_share(eng: MalEngine, sh: MaskedShare) -> int:
    cols = SharedCols([sh.m] if sh.m is not None else None,
                      [sh.l1] if sh.l1 is not None else None,
                      [sh.l2] if sh.l2 is not None else None)
    out = eng.rec_mal(cols, 1, ell=sh.ell)
    eng.flush(["rec"])
    return out[0]


def decode_regression(raw: int) -> float:
    """Regression outputs carry 26 fractional bits (a depth-one product)."""
    return fx_decode(RingElement(raw, 64), PROD_FRAC_BITS)
