"""Jitted numerical core shared by the allocation state and the chain driver.

Everything here operates on plain arrays bundled in namedtuples so that the
same machinery serves rows and columns: a column move is a row move on the
transposed view (labels, cluster sizes, block-statistic matrix and caches all
swap roles). The public, documented API lives in ``model`` and ``sampler``;
these functions assume validated inputs.

Log-gamma values are read from integer-indexed tables built once per
(data, hyperparameter) pair, which keeps the inner Gibbs loop free of
transcendental calls for binary data.
"""

import math
from collections import namedtuple

import numpy as np
from numba import njit

BERNOULLI = 0
GAUSSIAN = 1

# Block-marginal tables. For the Bernoulli model t0[x] = lgamma(x + gamma),
# t1[x] = lgamma(x + delta), t2[c] = lgamma(c + gamma + delta) and
# c0 = lgamma(gamma + delta) - lgamma(gamma) - lgamma(delta).
# For the Gaussian model t0[c] = lgamma((c + delta) / 2),
# t1[c] = 0.5 * log(c * tau2 + 1) + (c / 2) * log(pi),
# c0 = (delta / 2) * log(gamma) - lgamma(delta / 2); t2 is unused.
MTab = namedtuple("MTab", ["model", "c0", "t0", "t1", "t2", "xi", "tau2", "delta", "gamma"])

# Per-axis Dirichlet and cluster-count-prior tables; alpha is this axis's
# concentration and N its length. ta[x] = lgamma(x + alpha) for x = 0..N,
# taK[K] = lgamma(alpha * K), tnK[K] = lgamma(N + alpha * K),
# lfact[K] = lgamma(K + 1) = log K!.
DirTab = namedtuple("DirTab", ["alpha", "lga", "ta", "taK", "tnK", "lfact"])

# One axis's view of the shared allocation state. ``y`` is axis-major
# (items x other-axis length), ``S``/``SS`` are oriented [this-cluster,
# other-cluster]. ``ownAgg[i, g]`` holds item i's data summed within
# other-axis cluster g; ``othAgg[j, k]`` the mirror cache updated on this
# axis's moves.
AxisView = namedtuple(
    "AxisView",
    [
        "y", "y2",
        "lab",
        "nk", "mg",
        "K", "G",
        "S", "SS",
        "ownAgg", "ownAgg2",
        "othAgg", "othAgg2",
    ],
)

# acceptance-counter layout (proposed, accepted) per move per axis
C_M3_PROP_ROW, C_M3_ACC_ROW = 0, 1
C_M3_PROP_COL, C_M3_ACC_COL = 2, 3
C_SPLIT_PROP_ROW, C_SPLIT_ACC_ROW = 4, 5
C_COMB_PROP_ROW, C_COMB_ACC_ROW = 6, 7
C_SPLIT_PROP_COL, C_SPLIT_ACC_COL = 8, 9
C_COMB_PROP_COL, C_COMB_ACC_COL = 10, 11
N_COUNTERS = 12


@njit(cache=True)
def logM(mt, count, s, ss):
    """Log marginal likelihood of one block from its sufficient statistics."""
    if count == 0:
        return 0.0
    if mt.model == BERNOULLI:
        si = int(s + 0.5)
        return mt.c0 + mt.t0[si] + mt.t1[count - si] - mt.t2[count]
    b = ss - mt.tau2 * (s + mt.xi / mt.tau2) ** 2 / (count * mt.tau2 + 1.0) \
        + mt.xi * mt.xi / mt.tau2 + mt.gamma
    if b <= 0.0:
        raise ValueError("non-positive scale term in Gaussian block marginal; statistics corrupted")
    return mt.c0 + mt.t0[count] - mt.t1[count] - 0.5 * (count + mt.delta) * math.log(b)


@njit(cache=True)
def _remove(v, i):
    """Detach item i from its cluster, updating sizes, block stats and caches."""
    k = v.lab[i]
    G = v.G[0]
    for g in range(G):
        v.S[k, g] -= v.ownAgg[i, g]
        v.SS[k, g] -= v.ownAgg2[i, g]
    v.nk[k] -= 1
    M = v.y.shape[1]
    for j in range(M):
        v.othAgg[j, k] -= v.y[i, j]
        v.othAgg2[j, k] -= v.y2[i, j]
    v.lab[i] = -1
    return k


@njit(cache=True)
def _insert(v, i, k):
    G = v.G[0]
    for g in range(G):
        v.S[k, g] += v.ownAgg[i, g]
        v.SS[k, g] += v.ownAgg2[i, g]
    v.nk[k] += 1
    M = v.y.shape[1]
    for j in range(M):
        v.othAgg[j, k] += v.y[i, j]
        v.othAgg2[j, k] += v.y2[i, j]
    v.lab[i] = k


@njit(cache=True)
def _add_delta(v, mt, i, k):
    """Log predictive of inserting the (detached) item i into cluster k."""
    G = v.G[0]
    nk = v.nk[k]
    acc = 0.0
    for g in range(G):
        c = nk * v.mg[g]
        s = v.S[k, g]
        ss = v.SS[k, g]
        acc += logM(mt, c + v.mg[g], s + v.ownAgg[i, g], ss + v.ownAgg2[i, g]) \
            - logM(mt, c, s, ss)
    return acc


@njit(cache=True)
def gibbs_logweights(v, dt, mt, i, wbuf):
    """Unnormalized log full conditional of item i's label, state preserved.

    Fills wbuf[0:K]; returns the item's current label.
    """
    k0 = v.lab[i]
    _remove(v, i)
    K = v.K[0]
    for k in range(K):
        wbuf[k] = math.log(v.nk[k] + dt.alpha) + _add_delta(v, mt, i, k)
    _insert(v, i, k0)
    return k0


@njit(cache=True)
def gibbs_one(v, dt, mt, i, u, wbuf):
    """One collapsed Gibbs update of item i's label; returns the new label."""
    _remove(v, i)
    K = v.K[0]
    best = -np.inf
    for k in range(K):
        a = math.log(v.nk[k] + dt.alpha) + _add_delta(v, mt, i, k)
        wbuf[k] = a
        if a > best:
            best = a
    tot = 0.0
    for k in range(K):
        wbuf[k] = math.exp(wbuf[k] - best)
        tot += wbuf[k]
    r = u * tot
    knew = K - 1
    acc = 0.0
    for k in range(K):
        acc += wbuf[k]
        if r < acc:
            knew = k
            break
    _insert(v, i, knew)
    return knew


@njit(cache=True)
def metropolis_one(v, dt, mt, i, u_prop, u_acc):
    """Single-label Metropolis update: uniform proposal over the other clusters."""
    K = v.K[0]
    if K < 2:
        return False
    k0 = v.lab[i]
    t = int(u_prop * (K - 1))
    if t >= K - 1:
        t = K - 2
    kprop = t + 1 if t >= k0 else t
    _remove(v, i)
    a0 = math.log(v.nk[k0] + dt.alpha) + _add_delta(v, mt, i, k0)
    a1 = math.log(v.nk[kprop] + dt.alpha) + _add_delta(v, mt, i, kprop)
    if math.log(u_acc) < a1 - a0:
        _insert(v, i, kprop)
        return True
    _insert(v, i, k0)
    return False


@njit(cache=True)
def cluster_logpost(v, dt, mt, k):
    """This cluster's terms of the collapsed log posterior:
    lgamma(n_k + alpha) plus its row of block log marginals."""
    G = v.G[0]
    acc = dt.ta[v.nk[k]]
    for g in range(G):
        acc += logM(mt, v.nk[k] * v.mg[g], v.S[k, g], v.SS[k, g])
    return acc


@njit(cache=True)
def seq_alloc_core(v, dt, mt, ka, kb, order, u_seq, forced, out_labels):
    """Sequential allocation of the items in ``order`` between clusters ka, kb.

    Starts from both clusters notionally emptied, reassigns each item with the
    conditional predictive probabilities, and records the realized allocation
    in ``out_labels``. If ``forced`` has the same length as ``order`` the
    allocation is dictated by it and only its probability is evaluated.

    The entry state is always restored before returning. Returns
    (lp_before, lp_after, logp_seq): the ka+kb cluster log-posterior
    contributions at entry and under the realized allocation, and the log
    probability of that allocation under the sequential scheme.
    """
    nS = order.shape[0]
    orig = np.empty(nS, np.int64)
    for t in range(nS):
        orig[t] = v.lab[order[t]]
    lp_before = cluster_logpost(v, dt, mt, ka) + cluster_logpost(v, dt, mt, kb)
    for t in range(nS):
        _remove(v, order[t])
    use_forced = forced.shape[0] == nS
    logp = 0.0
    for t in range(nS):
        i = order[t]
        aa = math.log(v.nk[ka] + dt.alpha) + _add_delta(v, mt, i, ka)
        ab = math.log(v.nk[kb] + dt.alpha) + _add_delta(v, mt, i, kb)
        mx = aa if aa > ab else ab
        pa = math.exp(aa - mx)
        pb = math.exp(ab - mx)
        tot = pa + pb
        if use_forced:
            lab = forced[t]
        else:
            lab = ka if u_seq[t] * tot < pa else kb
        if lab == ka:
            logp += math.log(pa / tot)
        else:
            logp += math.log(pb / tot)
        out_labels[t] = lab
        _insert(v, i, lab)
    lp_after = cluster_logpost(v, dt, mt, ka) + cluster_logpost(v, dt, mt, kb)
    for t in range(nS):
        _remove(v, order[t])
    for t in range(nS):
        _insert(v, order[t], orig[t])
    return lp_before, lp_after, logp


@njit(cache=True)
def apply_labels(v, order, labels):
    """Reassign the listed items to the given labels."""
    for t in range(order.shape[0]):
        _remove(v, order[t])
    for t in range(order.shape[0]):
        _insert(v, order[t], labels[t])


@njit(cache=True)
def m3_move(v, dt, mt, ka, kb, order, u_seq, u_acc, out_labels, forced):
    """Joint reallocation of all members of clusters (ka, kb).

    Proposes a fresh sequential allocation, compares it with the reverse
    (regenerating the current one), and accepts by Metropolis-Hastings.
    Returns (log_accept_ratio, logp_forward, logp_reverse, accepted).
    """
    nS = order.shape[0]
    lp0, lp1, logp_fwd = seq_alloc_core(v, dt, mt, ka, kb, order, u_seq, forced, out_labels)
    orig = np.empty(nS, np.int64)
    for t in range(nS):
        orig[t] = v.lab[order[t]]
    sink = np.empty(nS, np.int64)
    _, _, logp_rev = seq_alloc_core(v, dt, mt, ka, kb, order, u_seq, orig, sink)
    logA = (lp1 - lp0) + (logp_rev - logp_fwd)
    accepted = math.log(u_acc) < logA
    if accepted:
        apply_labels(v, order, out_labels)
    return logA, logp_fwd, logp_rev, accepted


@njit(cache=True)
def swap_clusters(v, a, b):
    """Exchange the labels of clusters a and b (contents untouched)."""
    if a == b:
        return
    n = v.lab.shape[0]
    for i in range(n):
        if v.lab[i] == a:
            v.lab[i] = b
        elif v.lab[i] == b:
            v.lab[i] = a
    t = v.nk[a]
    v.nk[a] = v.nk[b]
    v.nk[b] = t
    Gmax = v.S.shape[1]
    for g in range(Gmax):
        ts = v.S[a, g]
        v.S[a, g] = v.S[b, g]
        v.S[b, g] = ts
        ts = v.SS[a, g]
        v.SS[a, g] = v.SS[b, g]
        v.SS[b, g] = ts
    M = v.othAgg.shape[0]
    for j in range(M):
        ta_ = v.othAgg[j, a]
        v.othAgg[j, a] = v.othAgg[j, b]
        v.othAgg[j, b] = ta_
        ta_ = v.othAgg2[j, a]
        v.othAgg2[j, a] = v.othAgg2[j, b]
        v.othAgg2[j, b] = ta_


@njit(cache=True)
def shift_down(v, gone):
    """Close the gap left by emptied cluster ``gone``; labels above shift down."""
    K = v.K[0]
    n = v.lab.shape[0]
    for i in range(n):
        if v.lab[i] > gone:
            v.lab[i] -= 1
    Gmax = v.S.shape[1]
    M = v.othAgg.shape[0]
    for k in range(gone, K - 1):
        v.nk[k] = v.nk[k + 1]
        for g in range(Gmax):
            v.S[k, g] = v.S[k + 1, g]
            v.SS[k, g] = v.SS[k + 1, g]
        for j in range(M):
            v.othAgg[j, k] = v.othAgg[j, k + 1]
            v.othAgg2[j, k] = v.othAgg2[j, k + 1]
    v.nk[K - 1] = 0
    for g in range(Gmax):
        v.S[K - 1, g] = 0.0
        v.SS[K - 1, g] = 0.0
    for j in range(M):
        v.othAgg[j, K - 1] = 0.0
        v.othAgg2[j, K - 1] = 0.0


@njit(cache=True)
def split_logratio_terms(dt, K):
    """Fixed part of the split log acceptance ratio going from K to K+1
    clusters: cluster-count prior, Dirichlet normalization and total-count
    gamma terms. The lgamma(alpha) factors cancel against the empty slot
    included in the pair log-posterior difference."""
    return (
        -(dt.lfact[K + 1] - dt.lfact[K])
        + dt.tnK[K] - dt.tnK[K + 1]
        + dt.taK[K + 1] - dt.taK[K]
    )


@njit(cache=True)
def split_move(v, dt, mt, k, kswap, order, u_seq, u_acc, ps_K, ps_K1, out_labels, forced):
    """Split cluster k by sequentially allocating its members between k and a
    fresh cluster, then swap the fresh label with ``kswap``.

    Returns (log_accept_ratio, logp_seq, accepted).
    """
    K = v.K[0]
    kb = K
    lp0, lp1, logp_fwd = seq_alloc_core(v, dt, mt, k, kb, order, u_seq, forced, out_labels)
    logA = split_logratio_terms(dt, K) + (lp1 - lp0) \
        + math.log(1.0 - ps_K1) - math.log(ps_K) - logp_fwd
    accepted = math.log(u_acc) < logA
    if accepted:
        apply_labels(v, order, out_labels)
        v.K[0] = K + 1
        swap_clusters(v, kswap, kb)
    return logA, logp_fwd, accepted


@njit(cache=True)
def combine_move(v, dt, mt, k, k2, order, u_acc, ps_K, ps_Km1):
    """Merge cluster k2 into k, accepting with the inverse of the matching
    split ratio evaluated on a random ordering of the merged members.

    Returns (log_accept_ratio, logp_reverse_split, accepted).
    """
    K = v.K[0]
    nS = order.shape[0]
    orig = np.empty(nS, np.int64)
    for t in range(nS):
        orig[t] = v.lab[order[t]]
    sink = np.empty(nS, np.int64)
    u_dummy = np.empty(0, np.float64)
    # probability that a split of the merged cluster regenerates the current one
    lp_split, _, logp_rev = seq_alloc_core(v, dt, mt, k, k2, order, u_dummy, orig, sink)
    # pair contribution in the merged configuration
    all_k = np.full(nS, k, np.int64)
    _, lp_merged, _ = seq_alloc_core(v, dt, mt, k, k2, order, u_dummy, all_k, sink)
    logA_split = split_logratio_terms(dt, K - 1) + (lp_split - lp_merged) \
        + math.log(1.0 - ps_K) - math.log(ps_Km1) - logp_rev
    logA = -logA_split
    accepted = math.log(u_acc) < logA
    if accepted:
        apply_labels(v, order, all_k)
        shift_down(v, k2)
        v.K[0] = K - 1
    return logA, logp_rev, accepted


@njit(cache=True)
def full_logpost(vr, dtr, dtc, mt):
    """Collapsed log posterior (unnormalized) from the cached statistics."""
    K = vr.K[0]
    G = vr.G[0]
    lp = -dtr.lfact[K] - dtc.lfact[G]
    lp += dtr.taK[K] - K * dtr.lga - dtr.tnK[K]
    for k in range(K):
        lp += dtr.ta[vr.nk[k]]
    lp += dtc.taK[G] - G * dtc.lga - dtc.tnK[G]
    for g in range(G):
        lp += dtc.ta[vr.mg[g]]
    for k in range(K):
        for g in range(G):
            lp += logM(mt, vr.nk[k] * vr.mg[g], vr.S[k, g], vr.SS[k, g])
    return lp


@njit(cache=True)
def rebuild_caches(vr, w):
    """Recompute block statistics and aggregate caches from labels and data.

    Bounds the slow drift of the incrementally maintained float sums on long
    continuous-data runs; exact re-derivation for binary data.
    """
    n, m = vr.y.shape
    Kmax = vr.S.shape[0]
    Gmax = vr.S.shape[1]
    for k in range(Kmax):
        for g in range(Gmax):
            vr.S[k, g] = 0.0
            vr.SS[k, g] = 0.0
    for i in range(n):
        for g in range(Gmax):
            vr.ownAgg[i, g] = 0.0
            vr.ownAgg2[i, g] = 0.0
    for j in range(m):
        for k in range(Kmax):
            vr.othAgg[j, k] = 0.0
            vr.othAgg2[j, k] = 0.0
    for i in range(n):
        k = vr.lab[i]
        for j in range(m):
            g = w[j]
            yij = vr.y[i, j]
            y2ij = vr.y2[i, j]
            vr.S[k, g] += yij
            vr.SS[k, g] += y2ij
            vr.ownAgg[i, g] += yij
            vr.ownAgg2[i, g] += y2ij
            vr.othAgg[j, k] += yij
            vr.othAgg2[j, k] += y2ij


@njit(cache=True)
def _gather_members(lab, k, k2, buf):
    """Collect indices labelled k or k2 (ascending); returns the count."""
    t = 0
    for i in range(lab.shape[0]):
        if lab[i] == k or lab[i] == k2:
            buf[t] = i
            t += 1
    return t


@njit(cache=True)
def _nonempty(nk, K):
    c = 0
    for k in range(K):
        if nk[k] > 0:
            c += 1
    return c


@njit(cache=True)
def _m3_step(v, dt, mt, counters, cbase, scratch_idx):
    K = v.K[0]
    if K < 2:
        return
    counters[cbase] += 1
    k = np.random.randint(0, K)
    k2 = np.random.randint(0, K - 1)
    if k2 >= k:
        k2 += 1
    nS = _gather_members(v.lab, k, k2, scratch_idx)
    order = scratch_idx[:nS].copy()
    np.random.shuffle(order)
    u_seq = np.random.random(nS)
    out_labels = np.empty(nS, np.int64)
    forced = np.empty(0, np.int64)
    _, _, _, accepted = m3_move(v, dt, mt, k, k2, order, u_seq,
                                np.random.random(), out_labels, forced)
    if accepted:
        counters[cbase + 1] += 1


@njit(cache=True)
def _split_combine_step(v, dt, mt, ps, counters, cs, cc, scratch_idx):
    K = v.K[0]
    if np.random.random() < ps[K]:
        counters[cs] += 1
        k = np.random.randint(0, K)
        kswap = np.random.randint(0, K + 1)
        nS = _gather_members(v.lab, k, k, scratch_idx)
        order = scratch_idx[:nS].copy()
        np.random.shuffle(order)
        u_seq = np.random.random(nS)
        out_labels = np.empty(nS, np.int64)
        forced = np.empty(0, np.int64)
        _, _, accepted = split_move(v, dt, mt, k, kswap, order, u_seq,
                                    np.random.random(), ps[K], ps[K + 1],
                                    out_labels, forced)
        if accepted:
            counters[cs + 1] += 1
    else:
        counters[cc] += 1
        if K < 2:
            return
        k = np.random.randint(0, K)
        k2 = np.random.randint(0, K - 1)
        if k2 >= k:
            k2 += 1
        nS = _gather_members(v.lab, k, k2, scratch_idx)
        order = scratch_idx[:nS].copy()
        np.random.shuffle(order)
        _, _, accepted = combine_move(v, dt, mt, k, k2, order,
                                      np.random.random(), ps[K], ps[K - 1])
        if accepted:
            counters[cc + 1] += 1


REBUILD_EVERY = 512


@njit(cache=True)
def run_chain_kernel(vr, vc, dtr, dtc, mt, ps_row, ps_col, metro_mix,
                     iterations, burn_in, thin, seed,
                     out_K, out_G, out_Kne, out_Gne, out_lp, out_z, out_w,
                     counters):
    """Full sweep loop. One sweep: Gibbs over every row, Gibbs over every
    column, one joint pair reallocation per axis, one split-or-combine per
    axis. Thinned post burn-in states are written to the out buffers.
    Returns the number of recorded samples."""
    np.random.seed(seed)
    n = vr.lab.shape[0]
    m = vc.lab.shape[0]
    kmax = vr.nk.shape[0]
    gmax = vc.nk.shape[0]
    wbuf = np.empty(max(kmax, gmax), np.float64)
    scratch_r = np.empty(n, np.int64)
    scratch_c = np.empty(m, np.int64)
    kept = 0
    for t in range(1, iterations + 1):
        if metro_mix > 0.0:
            for i in range(n):
                if np.random.random() < metro_mix:
                    metropolis_one(vr, dtr, mt, i, np.random.random(), np.random.random())
                else:
                    gibbs_one(vr, dtr, mt, i, np.random.random(), wbuf)
            for j in range(m):
                if np.random.random() < metro_mix:
                    metropolis_one(vc, dtc, mt, j, np.random.random(), np.random.random())
                else:
                    gibbs_one(vc, dtc, mt, j, np.random.random(), wbuf)
        else:
            for i in range(n):
                gibbs_one(vr, dtr, mt, i, np.random.random(), wbuf)
            for j in range(m):
                gibbs_one(vc, dtc, mt, j, np.random.random(), wbuf)
        _m3_step(vr, dtr, mt, counters, C_M3_PROP_ROW, scratch_r)
        _m3_step(vc, dtc, mt, counters, C_M3_PROP_COL, scratch_c)
        _split_combine_step(vr, dtr, mt, ps_row, counters,
                            C_SPLIT_PROP_ROW, C_COMB_PROP_ROW, scratch_r)
        _split_combine_step(vc, dtc, mt, ps_col, counters,
                            C_SPLIT_PROP_COL, C_COMB_PROP_COL, scratch_c)
        if t % REBUILD_EVERY == 0:
            rebuild_caches(vr, vc.lab)
        if t > burn_in and (t - burn_in) % thin == 0:
            out_K[kept] = vr.K[0]
            out_G[kept] = vr.G[0]
            out_Kne[kept] = _nonempty(vr.nk, vr.K[0])
            out_Gne[kept] = _nonempty(vc.nk, vc.K[0])
            out_lp[kept] = full_logpost(vr, dtr, dtc, mt)
            for i in range(n):
                out_z[kept, i] = vr.lab[i]
            for j in range(m):
                out_w[kept, j] = vc.lab[j]
            kept += 1
    return kept
