"""MCMC over (K, G, z, w): collapsed Gibbs single-label updates, joint
pair reallocation, and split/combine moves, plus the sweep driver.

One sweep applies, in order: a Gibbs update to every row label, a Gibbs
update to every column label, one pair-reallocation move per axis, and one
split-or-combine move per axis. Everything random in ``run_chain`` is seeded,
so traces are reproducible bit for bit.

The per-move functions in this module operate on an ``AllocationState`` in
place and draw their randomness from a caller-supplied ``numpy.random.Generator``;
they exist for library use and for verifying the moves against independent
oracles. The chain driver runs entirely inside a jitted kernel.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .model import AllocationState, DataMatrix, Hyperparams

_EMPTY_I64 = np.empty(0, dtype=np.int64)


@dataclass(frozen=True)
class MoveSchedule:
    """Move-mix knobs.

    p_split: probability of proposing a split rather than a combine while the
        cluster count is below its bound (forced to 0 at the bound, where only
        combines are possible). A combine drawn at one cluster auto-rejects.
    metropolis_mix: fraction of single-label updates done as symmetric
        Metropolis proposals instead of full Gibbs scans (0 = pure Gibbs).
    """

    p_split: float = 0.5
    metropolis_mix: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.p_split <= 1.0):
            raise ValueError("p_split must lie in (0, 1]")
        if not (0.0 <= self.metropolis_mix <= 1.0):
            raise ValueError("metropolis_mix must lie in [0, 1]")

    def split_probs(self, c_max: int) -> np.ndarray:
        """Split probability indexed by the current cluster count (0..c_max+1)."""
        ps = np.full(c_max + 2, self.p_split)
        ps[0] = 0.0
        ps[c_max:] = 0.0
        return ps


@dataclass(frozen=True)
class ChainConfig:
    """Run-length and reproducibility settings for one chain.

    ``init_k``/``init_g`` of 1 start from the no-cluster model; larger values
    start from that many contiguous bands. ``random_init`` instead draws the
    initial counts and labels uniformly (seeded).
    """

    iterations: int
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    init_k: int = 1
    init_g: int = 1
    random_init: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("burn-in must be shorter than the run")
        if self.thin < 1:
            raise ValueError("thinning stride must be at least 1")
        if not (0 <= self.seed < 2**32):
            raise ValueError("seed must fit in 32 bits")
        if self.init_k < 1 or self.init_g < 1:
            raise ValueError("initial cluster counts must be at least 1")

    @property
    def n_samples(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


MOVE_COUNTER_KEYS = (
    "m3_rows_proposed", "m3_rows_accepted",
    "m3_cols_proposed", "m3_cols_accepted",
    "split_rows_proposed", "split_rows_accepted",
    "combine_rows_proposed", "combine_rows_accepted",
    "split_cols_proposed", "split_cols_accepted",
    "combine_cols_proposed", "combine_cols_accepted",
)


@dataclass
class ChainTrace:
    """Thinned chain output: per-sample model sizes, labels and log posterior,
    plus per-move acceptance counters and provenance (seed, config)."""

    k: np.ndarray
    g: np.ndarray
    k_nonempty: np.ndarray
    g_nonempty: np.ndarray
    log_post: np.ndarray
    z: np.ndarray
    w: np.ndarray
    counters: dict
    config: ChainConfig
    schedule: MoveSchedule
    hp: Hyperparams
    variant: str
    n: int
    m: int
    runtime_seconds: float = 0.0
    sweeps_per_second: float = 0.0
    digest: str = ""

    @property
    def n_samples(self) -> int:
        return len(self.k)

    def sweep_of(self, idx: int) -> int:
        """Sweep number (1-based) at which sample ``idx`` was recorded."""
        return self.config.burn_in + self.config.thin * (idx + 1)

    def acceptance_rates(self) -> dict:
        """Per-move, per-axis acceptance fractions (NaN where never proposed)."""
        c = self.counters
        out = {}
        for move in ("m3_rows", "m3_cols", "split_rows", "combine_rows",
                     "split_cols", "combine_cols"):
            prop = c[f"{move}_proposed"]
            out[move] = c[f"{move}_accepted"] / prop if prop else float("nan")
        return out

    def reconstruct_state(self, idx: int, data: DataMatrix) -> AllocationState:
        """Rebuild the full allocation state of one stored sample."""
        return AllocationState(data, self.hp,
                               self.z[idx].astype(np.int64),
                               self.w[idx].astype(np.int64),
                               int(self.k[idx]), int(self.g[idx]))


def _initial_labels(cfg: ChainConfig, hp: Hyperparams, n: int, m: int):
    if cfg.random_init:
        rng = np.random.default_rng(cfg.seed)
        K0 = int(rng.integers(1, hp.k_max + 1))
        G0 = int(rng.integers(1, hp.g_max + 1))
        z = rng.integers(0, K0, size=n).astype(np.int64)
        w = rng.integers(0, G0, size=m).astype(np.int64)
        return z, w, K0, G0
    if cfg.init_k > hp.k_max or cfg.init_g > hp.g_max:
        raise ValueError("initial cluster counts exceed the truncation bounds")
    z = (np.arange(n, dtype=np.int64) * cfg.init_k) // n
    w = (np.arange(m, dtype=np.int64) * cfg.init_g) // m
    return z, w, cfg.init_k, cfg.init_g


def run_chain(data: DataMatrix, hp: Hyperparams, cfg: ChainConfig,
              sched: MoveSchedule | None = None) -> ChainTrace:
    """Run one chain and return its thinned trace. Deterministic given the seed."""
    sched = sched or MoveSchedule()
    hp = hp.resolve(data.n, data.m)
    z0, w0, K0, G0 = _initial_labels(cfg, hp, data.n, data.m)
    state = AllocationState(data, hp, z0, w0, K0, G0)
    dtr, dtc, mt = state.tables()
    ps_row = sched.split_probs(hp.k_max)
    ps_col = sched.split_probs(hp.g_max)
    ns = cfg.n_samples
    out_K = np.empty(ns, np.int64)
    out_G = np.empty(ns, np.int64)
    out_Kne = np.empty(ns, np.int64)
    out_Gne = np.empty(ns, np.int64)
    out_lp = np.empty(ns, np.float64)
    out_z = np.empty((ns, data.n), np.int32)
    out_w = np.empty((ns, data.m), np.int32)
    counters = np.zeros(_kernels.N_COUNTERS, np.int64)
    t0 = time.perf_counter()
    kept = _kernels.run_chain_kernel(
        state.row_view(), state.col_view(), dtr, dtc, mt, ps_row, ps_col,
        float(sched.metropolis_mix), cfg.iterations, cfg.burn_in, cfg.thin,
        cfg.seed, out_K, out_G, out_Kne, out_Gne, out_lp, out_z, out_w, counters)
    elapsed = time.perf_counter() - t0
    assert kept == ns, f"recorded {kept} samples, expected {ns}"
    return ChainTrace(
        k=out_K, g=out_G, k_nonempty=out_Kne, g_nonempty=out_Gne,
        log_post=out_lp, z=out_z, w=out_w,
        counters=dict(zip(MOVE_COUNTER_KEYS, (int(x) for x in counters))),
        config=cfg, schedule=sched, hp=hp, variant=data.variant,
        n=data.n, m=data.m,
        runtime_seconds=elapsed,
        sweeps_per_second=cfg.iterations / elapsed if elapsed > 0 else float("inf"),
    )


# ---------------------------------------------------------------------------
# single moves on a live state


@dataclass
class MoveResult:
    """Outcome of one pair-reallocation or split/combine move."""

    kind: str
    axis: str
    proposed: bool
    accepted: bool
    clusters: Optional[tuple]
    order: Optional[np.ndarray]
    proposed_labels: Optional[np.ndarray]
    log_accept_ratio: float = float("nan")
    logp_forward: float = float("nan")
    logp_reverse: float = float("nan")


def _axis(state: AllocationState, axis: str):
    if axis == "row":
        dtr, _, mt = state.tables()
        return state.row_view(), dtr, mt, state.hp.k_max
    dtc = state.tables()[1]
    mt = state.tables()[2]
    return state.col_view(), dtc, mt, state.hp.g_max


def gibbs_conditional_row(state: AllocationState, i: int) -> np.ndarray:
    """Full-conditional probabilities of row i's label given everything else."""
    return _gibbs_conditional(state, "row", i)


def gibbs_conditional_column(state: AllocationState, j: int) -> np.ndarray:
    return _gibbs_conditional(state, "col", j)


def _gibbs_conditional(state, axis, i):
    v, dt, mt, cmax = _axis(state, axis)
    wbuf = np.empty(cmax)
    _kernels.gibbs_logweights(v, dt, mt, i, wbuf)
    K = int(v.K[0])
    logw = wbuf[:K]
    return np.exp(logw - logsumexp(logw))


def gibbs_update_row(state: AllocationState, i: int, rng: np.random.Generator) -> int:
    """Resample row i's label from its full conditional; returns the new label."""
    v, dt, mt, cmax = _axis(state, "row")
    wbuf = np.empty(cmax)
    return int(_kernels.gibbs_one(v, dt, mt, i, float(rng.random()), wbuf))


def gibbs_update_column(state: AllocationState, j: int, rng: np.random.Generator) -> int:
    v, dt, mt, cmax = _axis(state, "col")
    wbuf = np.empty(cmax)
    return int(_kernels.gibbs_one(v, dt, mt, j, float(rng.random()), wbuf))


def _members(labels: np.ndarray, k: int, k2: int) -> np.ndarray:
    return np.flatnonzero((labels == k) | (labels == k2)).astype(np.int64)


def _m3(state, axis, rng, pair, order, forced_labels, u_seq, u_accept) -> MoveResult:
    v, dt, mt, _ = _axis(state, axis)
    K = int(v.K[0])
    if K < 2:
        return MoveResult("m3", axis, False, False, None, None, None)
    if pair is None:
        k = int(rng.integers(K))
        k2 = int(rng.integers(K - 1))
        if k2 >= k:
            k2 += 1
    else:
        k, k2 = pair
    if order is None:
        members = _members(np.asarray(v.lab), k, k2)
        order = rng.permutation(members).astype(np.int64)
    else:
        order = np.asarray(order, dtype=np.int64)
    nS = len(order)
    if forced_labels is None:
        forced = _EMPTY_I64
        if u_seq is None:
            u_seq = rng.random(nS)
    else:
        forced = np.asarray(forced_labels, dtype=np.int64)
        u_seq = np.zeros(nS)
    if u_accept is None:
        u_accept = float(rng.random())
    out_labels = np.empty(nS, np.int64)
    logA, lf, lr, acc = _kernels.m3_move(v, dt, mt, k, k2, order,
                                         np.asarray(u_seq, dtype=np.float64),
                                         u_accept, out_labels, forced)
    return MoveResult("m3", axis, True, bool(acc), (k, k2), order, out_labels,
                      float(logA), float(lf), float(lr))


def m3_reallocate_rows(state: AllocationState, rng: np.random.Generator, *,
                       pair=None, order=None, forced_labels=None,
                       u_seq=None, u_accept=None) -> MoveResult:
    """Propose a joint reallocation of two row clusters' members and accept or
    reject it. No-op (not proposed) when fewer than two row clusters exist.

    The keyword arguments pin parts of the proposal for replay and testing.
    """
    return _m3(state, "row", rng, pair, order, forced_labels, u_seq, u_accept)


def m3_reallocate_columns(state: AllocationState, rng: np.random.Generator, *,
                          pair=None, order=None, forced_labels=None,
                          u_seq=None, u_accept=None) -> MoveResult:
    return _m3(state, "col", rng, pair, order, forced_labels, u_seq, u_accept)


def _split_combine(state, axis, rng, sched, kind, cluster, kswap, pair, order,
                   forced_labels, u_seq, u_accept) -> MoveResult:
    v, dt, mt, cmax = _axis(state, axis)
    K = int(v.K[0])
    ps = sched.split_probs(cmax)
    if kind is None:
        kind = "split" if rng.random() < ps[K] else "combine"
    if u_accept is None:
        u_accept = float(rng.random())
    if kind == "split":
        if ps[K] <= 0.0:
            raise ValueError("split proposed at the cluster-count bound")
        if cluster is None:
            cluster = int(rng.integers(K))
        if kswap is None:
            kswap = int(rng.integers(K + 1))
        if order is None:
            members = _members(np.asarray(v.lab), cluster, cluster)
            order = rng.permutation(members).astype(np.int64)
        else:
            order = np.asarray(order, dtype=np.int64)
        nS = len(order)
        if forced_labels is None:
            forced = _EMPTY_I64
            if u_seq is None:
                u_seq = rng.random(nS)
        else:
            forced = np.asarray(forced_labels, dtype=np.int64)
            u_seq = np.zeros(nS)
        out_labels = np.empty(nS, np.int64)
        logA, lf, acc = _kernels.split_move(v, dt, mt, cluster, kswap, order,
                                            np.asarray(u_seq, dtype=np.float64),
                                            u_accept, ps[K], ps[K + 1],
                                            out_labels, forced)
        return MoveResult("split", axis, True, bool(acc), (cluster, kswap),
                          order, out_labels, float(logA), float(lf))
    if K < 2:
        return MoveResult("combine", axis, True, False, None, None, None,
                          float("-inf"))
    if pair is None:
        k = int(rng.integers(K))
        k2 = int(rng.integers(K - 1))
        if k2 >= k:
            k2 += 1
    else:
        k, k2 = pair
    if order is None:
        members = _members(np.asarray(v.lab), k, k2)
        order = rng.permutation(members).astype(np.int64)
    else:
        order = np.asarray(order, dtype=np.int64)
    logA, lr, acc = _kernels.combine_move(v, dt, mt, k, k2, order, u_accept,
                                          ps[K], ps[K - 1])
    return MoveResult("combine", axis, True, bool(acc), (k, k2), order, None,
                      float(logA), logp_reverse=float(lr))


def split_combine_rows(state: AllocationState, rng: np.random.Generator,
                       sched: MoveSchedule | None = None, *, kind=None,
                       cluster=None, kswap=None, pair=None, order=None,
                       forced_labels=None, u_seq=None, u_accept=None) -> MoveResult:
    """Propose a row-cluster split (probability ``p_split``) or combine.

    A combine drawn while only one cluster exists auto-rejects. Keyword
    arguments pin parts of the proposal for replay and testing.
    """
    sched = sched or MoveSchedule()
    return _split_combine(state, "row", rng, sched, kind, cluster, kswap,
                          pair, order, forced_labels, u_seq, u_accept)


def split_combine_columns(state: AllocationState, rng: np.random.Generator,
                          sched: MoveSchedule | None = None, *, kind=None,
                          cluster=None, kswap=None, pair=None, order=None,
                          forced_labels=None, u_seq=None, u_accept=None) -> MoveResult:
    sched = sched or MoveSchedule()
    return _split_combine(state, "col", rng, sched, kind, cluster, kswap,
                          pair, order, forced_labels, u_seq, u_accept)
