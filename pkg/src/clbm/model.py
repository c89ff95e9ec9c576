"""Model core: data matrix, hyperparameters, allocation state and the
collapsed log posterior.

The collapsed model places row items into K clusters and column items into G
clusters, integrates the block parameters and mixing weights out under
conjugate priors, and scores a configuration (K, G, z, w) by

    log pi(K) + log pi(G) + row Dirichlet term + column Dirichlet term
        + sum over blocks of the block log marginal likelihood,

with a truncated Poisson(1) prior on each cluster count, stored unnormalized
as 1/K! (the normalizing constant is shared by every K <= K_max and cancels
from all ratios). Labels are 0-based throughout the library; file formats
emitted by the command line tools are 1-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
from scipy.special import gammaln

from . import _kernels

BERNOULLI = "bernoulli"
GAUSSIAN = "gaussian"
VARIANTS = (BERNOULLI, GAUSSIAN)

DEFAULT_MAX_CLUSTERS = 50


class NumericalDegeneracyError(ArithmeticError):
    """Raised when block statistics violate a positivity guarantee."""


@dataclass(frozen=True)
class DataMatrix:
    """An n x m fully observed data matrix with a model-variant tag.

    Binary matrices hold {0, 1} cells and are scored with the Bernoulli block
    model; continuous matrices hold reals and use the Gaussian block model.
    ``value_map`` optionally records how raw tokens were mapped at ingestion.
    """

    values: np.ndarray
    variant: str
    value_map: Mapping[str, float] | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError("data matrix must be 2-d with at least one row and one column")
        if not np.all(np.isfinite(vals)):
            raise ValueError("data matrix contains non-finite cells")
        if self.variant == BERNOULLI and not np.all((vals == 0.0) | (vals == 1.0)):
            raise ValueError("binary variant requires every cell in {0, 1}")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Hyperparams:
    """Prior hyperparameters.

    alpha, beta: symmetric Dirichlet concentrations for row / column weights.
    gamma, delta: Beta(gamma, delta) shapes for the Bernoulli block parameter,
        or the Gaussian variance prior IG(delta/2, gamma/2) shapes.
    xi, tau2: Gaussian block-mean prior N(xi, tau2 * sigma^2) location/scale.
    k_max, g_max: cluster-count truncation bounds; ``None`` resolves to
        min(50, n) and min(50, m) for the data at hand.
    """

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    delta: float = 1.0
    xi: float = 0.0
    tau2: float = 100.0
    k_max: int | None = None
    g_max: int | None = None

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta", "tau2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("k_max", "g_max"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be at least 1")

    @classmethod
    def for_variant(cls, variant: str, **overrides) -> "Hyperparams":
        """Non-informative defaults: Beta(1, 1) for binary data;
        gamma = delta = 0.02, xi = 0, tau2 = 100 for continuous data."""
        if variant == BERNOULLI:
            base = dict(gamma=1.0, delta=1.0)
        elif variant == GAUSSIAN:
            base = dict(gamma=0.02, delta=0.02, xi=0.0, tau2=100.0)
        else:
            raise ValueError(f"unknown variant {variant!r}")
        base.update(overrides)
        return cls(**base)

    def resolve(self, n: int, m: int) -> "Hyperparams":
        """Fill unset truncation bounds from the data dimensions."""
        k_max = self.k_max if self.k_max is not None else min(DEFAULT_MAX_CLUSTERS, n)
        g_max = self.g_max if self.g_max is not None else min(DEFAULT_MAX_CLUSTERS, m)
        return replace(self, k_max=k_max, g_max=g_max)


@dataclass(frozen=True)
class BlockStats:
    """Sufficient statistics of one block: cell count, sum, sum of squares."""

    count: int
    s: float
    ss: float = 0.0


def log_marginal_bernoulli(stats: BlockStats, gamma: float, delta: float) -> float:
    """Log marginal likelihood of a binary block under a Beta(gamma, delta)
    prior on its success probability. An empty block integrates to 1."""
    if gamma <= 0 or delta <= 0:
        raise ValueError("gamma and delta must be strictly positive")
    if stats.count == 0:
        return 0.0
    s = stats.s
    if s < 0 or s != round(s) or s > stats.count:
        raise ValueError(f"invalid binary block sum s={s} for count={stats.count}")
    return float(bernoulli_logm_arrays(np.asarray(stats.count), np.asarray(s), gamma, delta))


def log_marginal_gaussian(stats: BlockStats, xi: float, tau2: float,
                          delta: float, gamma: float) -> float:
    """Log marginal likelihood of a continuous block under the conjugate
    normal / inverse-gamma prior pair. An empty block integrates to 1."""
    if tau2 <= 0 or delta <= 0 or gamma <= 0:
        raise ValueError("tau2, delta and gamma must be strictly positive")
    if stats.count == 0:
        return 0.0
    return float(gaussian_logm_arrays(np.asarray(stats.count), np.asarray(stats.s),
                                      np.asarray(stats.ss), xi, tau2, delta, gamma))


def bernoulli_logm_arrays(count, s, gamma, delta):
    """Vectorized Bernoulli block log marginal; empty blocks give 0."""
    count = np.asarray(count, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    c0 = gammaln(gamma + delta) - gammaln(gamma) - gammaln(delta)
    out = c0 + gammaln(s + gamma) + gammaln(count - s + delta) - gammaln(count + gamma + delta)
    return np.where(count == 0, 0.0, out)


def gaussian_logm_arrays(count, s, ss, xi, tau2, delta, gamma):
    """Vectorized Gaussian block log marginal; empty blocks give 0."""
    count = np.asarray(count, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    ss = np.asarray(ss, dtype=np.float64)
    bracket = ss - tau2 * (s + xi / tau2) ** 2 / (count * tau2 + 1.0) + xi * xi / tau2 + gamma
    if np.any((count > 0) & (bracket <= 0)):
        raise NumericalDegeneracyError(
            "non-positive scale term in Gaussian block marginal; statistics corrupted")
    c0 = 0.5 * delta * math.log(gamma) - gammaln(0.5 * delta)
    safe = np.where(bracket > 0, bracket, 1.0)
    out = (c0 + gammaln(0.5 * (count + delta))
           - 0.5 * count * math.log(math.pi)
           - 0.5 * np.log(count * tau2 + 1.0)
           - 0.5 * (count + delta) * np.log(safe))
    return np.where(count == 0, 0.0, out)


def log_cluster_count_prior(k: int) -> float:
    """Unnormalized truncated Poisson(1) log prior on a cluster count: -log k!."""
    if k < 1:
        raise ValueError("cluster count must be at least 1")
    return -float(gammaln(k + 1))


def _build_dirtab(alpha: float, length: int, cmax: int) -> "_kernels.DirTab":
    x = np.arange(length + 1, dtype=np.float64)
    ks = np.arange(cmax + 2, dtype=np.float64)
    return _kernels.DirTab(
        alpha=float(alpha),
        lga=float(gammaln(alpha)),
        ta=gammaln(x + alpha),
        taK=gammaln(np.maximum(alpha * ks, 1e-300)),
        tnK=gammaln(length + alpha * ks),
        lfact=gammaln(ks + 1.0),
    )


def _build_mtab(variant: str, hp: Hyperparams, max_count: int) -> "_kernels.MTab":
    c = np.arange(max_count + 1, dtype=np.float64)
    if variant == BERNOULLI:
        return _kernels.MTab(
            model=_kernels.BERNOULLI,
            c0=float(gammaln(hp.gamma + hp.delta) - gammaln(hp.gamma) - gammaln(hp.delta)),
            t0=gammaln(c + hp.gamma),
            t1=gammaln(c + hp.delta),
            t2=gammaln(c + hp.gamma + hp.delta),
            xi=0.0, tau2=1.0, delta=hp.delta, gamma=hp.gamma,
        )
    return _kernels.MTab(
        model=_kernels.GAUSSIAN,
        c0=float(0.5 * hp.delta * math.log(hp.gamma) - gammaln(0.5 * hp.delta)),
        t0=gammaln(0.5 * (c + hp.delta)),
        t1=0.5 * np.log(c * hp.tau2 + 1.0) + 0.5 * c * math.log(math.pi),
        t2=np.zeros(1),
        xi=hp.xi, tau2=hp.tau2, delta=hp.delta, gamma=hp.gamma,
    )


class AllocationState:
    """Mutable clustering state with incrementally maintained statistics.

    Holds the labels (z, w), cluster sizes, the K_max x G_max block sum and
    sum-of-squares matrices, and the per-item aggregate caches that make a
    single-label move O(G) (rows) or O(K) (columns) plus the cache refresh on
    the opposite axis. Buffers are preallocated at the truncation bounds so
    the jitted kernels never reallocate.

    Single-writer: a state must not be mutated from two threads. Independent
    chains should each own a state.
    """

    def __init__(self, data: DataMatrix, hp: Hyperparams, z, w, K: int | None = None,
                 G: int | None = None):
        hp = hp.resolve(data.n, data.m)
        z = np.asarray(z, dtype=np.int64).copy()
        w = np.asarray(w, dtype=np.int64).copy()
        if z.shape != (data.n,) or w.shape != (data.m,):
            raise ValueError("label vectors must match the data dimensions")
        K = int(K) if K is not None else int(z.max()) + 1
        G = int(G) if G is not None else int(w.max()) + 1
        if not (1 <= K <= hp.k_max) or not (1 <= G <= hp.g_max):
            raise ValueError(f"cluster counts K={K}, G={G} outside 1..K_max/G_max")
        if z.min() < 0 or z.max() >= K or w.min() < 0 or w.max() >= G:
            raise ValueError("labels must lie in 0..K-1 / 0..G-1")
        self.data = data
        self.hp = hp
        self._z = z
        self._w = w
        self._K = np.array([K], dtype=np.int64)
        self._G = np.array([G], dtype=np.int64)
        y = data.values
        self._y = y
        self._y2 = np.ascontiguousarray(y * y)
        self._yT = np.ascontiguousarray(y.T)
        self._y2T = np.ascontiguousarray(self._y2.T)
        self._nk = np.zeros(hp.k_max, dtype=np.int64)
        self._mg = np.zeros(hp.g_max, dtype=np.int64)
        self._S = np.zeros((hp.k_max, hp.g_max))
        self._SS = np.zeros((hp.k_max, hp.g_max))
        self._rowAgg = np.zeros((data.n, hp.g_max))
        self._rowAgg2 = np.zeros((data.n, hp.g_max))
        self._colAgg = np.zeros((data.m, hp.k_max))
        self._colAgg2 = np.zeros((data.m, hp.k_max))
        self._tables = None
        self.rebuild_caches()

    @classmethod
    def single_cluster(cls, data: DataMatrix, hp: Hyperparams) -> "AllocationState":
        """The no-structure state: K = G = 1."""
        return cls(data, hp, np.zeros(data.n, np.int64), np.zeros(data.m, np.int64), 1, 1)

    @classmethod
    def from_labels(cls, data: DataMatrix, hp: Hyperparams, z, w,
                    K: int | None = None, G: int | None = None) -> "AllocationState":
        return cls(data, hp, z, w, K, G)

    # mutation happens through kernels and through apply_*_move below

    @property
    def K(self) -> int:
        return int(self._K[0])

    @property
    def G(self) -> int:
        return int(self._G[0])

    @property
    def z(self) -> np.ndarray:
        """Row labels (copy)."""
        return self._z.copy()

    @property
    def w(self) -> np.ndarray:
        return self._w.copy()

    @property
    def n_k(self) -> np.ndarray:
        """Row-cluster sizes for clusters 0..K-1 (copy; empty clusters allowed)."""
        return self._nk[: self.K].copy()

    @property
    def m_g(self) -> np.ndarray:
        return self._mg[: self.G].copy()

    def block_stats(self, k: int, g: int) -> BlockStats:
        if not (0 <= k < self.K and 0 <= g < self.G):
            raise IndexError("block index outside the active clusters")
        return BlockStats(count=int(self._nk[k] * self._mg[g]),
                          s=float(self._S[k, g]), ss=float(self._SS[k, g]))

    def row_view(self) -> "_kernels.AxisView":
        return _kernels.AxisView(
            y=self._y, y2=self._y2, lab=self._z, nk=self._nk, mg=self._mg,
            K=self._K, G=self._G, S=self._S, SS=self._SS,
            ownAgg=self._rowAgg, ownAgg2=self._rowAgg2,
            othAgg=self._colAgg, othAgg2=self._colAgg2,
        )

    def col_view(self) -> "_kernels.AxisView":
        return _kernels.AxisView(
            y=self._yT, y2=self._y2T, lab=self._w, nk=self._mg, mg=self._nk,
            K=self._G, G=self._K, S=self._S.T, SS=self._SS.T,
            ownAgg=self._colAgg, ownAgg2=self._colAgg2,
            othAgg=self._rowAgg, othAgg2=self._rowAgg2,
        )

    def tables(self):
        """(row DirTab, column DirTab, MTab) for the jitted kernels."""
        if self._tables is None:
            hp = self.hp
            dtr = _build_dirtab(hp.alpha, self.data.n, hp.k_max)
            dtc = _build_dirtab(hp.beta, self.data.m, hp.g_max)
            mt = _build_mtab(self.data.variant, hp, self.data.n * self.data.m)
            self._tables = (dtr, dtc, mt)
        return self._tables

    def rebuild_caches(self) -> None:
        """Recompute sizes, block statistics and aggregates from the labels."""
        K, G = self.K, self.G
        self._nk[:] = 0
        self._nk[:K] = np.bincount(self._z, minlength=K)
        self._mg[:] = 0
        self._mg[:G] = np.bincount(self._w, minlength=G)
        zh = np.zeros((self.data.n, self.hp.k_max))
        zh[np.arange(self.data.n), self._z] = 1.0
        wh = np.zeros((self.data.m, self.hp.g_max))
        wh[np.arange(self.data.m), self._w] = 1.0
        self._rowAgg[:] = self._y @ wh
        self._rowAgg2[:] = self._y2 @ wh
        self._colAgg[:] = self._yT @ zh
        self._colAgg2[:] = self._y2T @ zh
        self._S[:] = zh.T @ self._rowAgg
        self._SS[:] = zh.T @ self._rowAgg2

    def copy(self) -> "AllocationState":
        other = AllocationState.__new__(AllocationState)
        other.data = self.data
        other.hp = self.hp
        other._z = self._z.copy()
        other._w = self._w.copy()
        other._K = self._K.copy()
        other._G = self._G.copy()
        other._y = self._y
        other._y2 = self._y2
        other._yT = self._yT
        other._y2T = self._y2T
        other._nk = self._nk.copy()
        other._mg = self._mg.copy()
        other._S = self._S.copy()
        other._SS = self._SS.copy()
        other._rowAgg = self._rowAgg.copy()
        other._rowAgg2 = self._rowAgg2.copy()
        other._colAgg = self._colAgg.copy()
        other._colAgg2 = self._colAgg2.copy()
        other._tables = self._tables
        return other

    def max_cache_deviation(self) -> float:
        """Largest relative disagreement between the incrementally maintained
        statistics and a from-scratch recomputation."""
        fresh = AllocationState(self.data, self.hp, self._z, self._w, self.K, self.G)
        dev = 0.0
        for a, b in ((self._S, fresh._S), (self._SS, fresh._SS),
                     (self._rowAgg, fresh._rowAgg), (self._rowAgg2, fresh._rowAgg2),
                     (self._colAgg, fresh._colAgg), (self._colAgg2, fresh._colAgg2)):
            scale = np.maximum(np.abs(b), 1.0)
            dev = max(dev, float(np.max(np.abs(a - b) / scale)))
        if not np.array_equal(self._nk, fresh._nk) or not np.array_equal(self._mg, fresh._mg):
            return np.inf
        return dev

    def _pair_logpost(self, axis: str, ka: int, kb: int) -> float:
        hp = self.hp
        if axis == "row":
            alpha, nk, S, SS, other = hp.alpha, self._nk, self._S, self._SS, self._mg[: self.G]
        else:
            alpha, nk, S, SS, other = hp.beta, self._mg, self._S.T, self._SS.T, self._nk[: self.K]
        total = 0.0
        for k in (ka, kb):
            counts = nk[k] * other
            total += float(gammaln(nk[k] + alpha))
            total += float(np.sum(_block_logm(self.data.variant, hp, counts, S[k, : len(other)],
                                              SS[k, : len(other)])))
        return total

    def apply_row_move(self, i: int, k_to: int) -> float:
        """Move row i to cluster k_to; returns the change in log posterior.

        Applying a move and then its inverse restores the state exactly for
        binary data and to within accumulation noise for continuous data.
        """
        if not (0 <= k_to < self.K):
            raise ValueError(f"target cluster {k_to} outside 0..K-1")
        k_from = int(self._z[i])
        if k_to == k_from:
            return 0.0
        before = self._pair_logpost("row", k_from, k_to)
        v = self.row_view()
        _kernels._remove(v, i)
        _kernels._insert(v, i, k_to)
        return self._pair_logpost("row", k_from, k_to) - before

    def apply_column_move(self, j: int, g_to: int) -> float:
        """Column analogue of :meth:`apply_row_move`."""
        if not (0 <= g_to < self.G):
            raise ValueError(f"target cluster {g_to} outside 0..G-1")
        g_from = int(self._w[j])
        if g_to == g_from:
            return 0.0
        before = self._pair_logpost("col", g_from, g_to)
        v = self.col_view()
        _kernels._remove(v, j)
        _kernels._insert(v, j, g_to)
        return self._pair_logpost("col", g_from, g_to) - before


def _block_logm(variant: str, hp: Hyperparams, counts, s, ss):
    if variant == BERNOULLI:
        return bernoulli_logm_arrays(counts, s, hp.gamma, hp.delta)
    return gaussian_logm_arrays(counts, s, ss, hp.xi, hp.tau2, hp.delta, hp.gamma)


def log_posterior(state: AllocationState) -> float:
    """Collapsed log posterior (unnormalized) of the state's configuration.

    Depends on the labels only through cluster contents, so it is invariant
    under label permutation.
    """
    hp, data = state.hp, state.data
    K, G = state.K, state.G
    if K > hp.k_max or G > hp.g_max:
        raise ValueError("cluster count exceeds the truncation bound")
    nk = state._nk[:K]
    mg = state._mg[:G]
    lp = log_cluster_count_prior(K) + log_cluster_count_prior(G)
    lp += float(gammaln(hp.alpha * K) - K * gammaln(hp.alpha)
                - gammaln(data.n + hp.alpha * K))
    lp += float(gammaln(hp.beta * G) - G * gammaln(hp.beta)
                - gammaln(data.m + hp.beta * G))
    counts = np.outer(nk, mg)
    blocks = _block_logm(data.variant, hp, counts, state._S[:K, :G], state._SS[:K, :G])
    # fsum keeps the value bit-identical under any relabelling of the clusters
    lp += math.fsum(gammaln(nk + hp.alpha))
    lp += math.fsum(gammaln(mg + hp.beta))
    lp += math.fsum(blocks.ravel())
    return lp
