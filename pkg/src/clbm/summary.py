"""Posterior summaries of a chain trace: model probabilities, mixing
diagnostics, modal-model memberships and the MAP clustering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .relabel import OnlineRelabeler, sort_for_processing
from .sampler import ChainTrace


@dataclass(frozen=True)
class PMPTable:
    """Empirical posterior probabilities of the visited (K, G) cluster models."""

    counts: dict
    total: int

    def prob(self, k: int, g: int) -> float:
        return self.counts.get((k, g), 0) / self.total

    def modal(self) -> tuple:
        """Most visited (K, G); ties resolved to the smallest pair."""
        best = max(self.counts.items(), key=lambda kv: (kv[1], (-kv[0][0], -kv[0][1])))
        return best[0]

    def as_rows(self):
        """(K, G, count, pmp) rows sorted by decreasing probability."""
        rows = [(k, g, c, c / self.total) for (k, g), c in self.counts.items()]
        rows.sort(key=lambda r: (-r[2], r[0], r[1]))
        return rows


def pmp_table(trace: ChainTrace, nonempty: bool = False) -> PMPTable:
    """Visit frequencies of the sampled cluster models.

    ``nonempty=True`` tabulates the non-empty component counts instead of the
    sampled K and G (the two can differ when empty clusters are carried).
    """
    if trace.n_samples == 0:
        raise ValueError("empty trace")
    ks = trace.k_nonempty if nonempty else trace.k
    gs = trace.g_nonempty if nonempty else trace.g
    counts = {}
    for k, g in zip(ks.tolist(), gs.tolist()):
        counts[(k, g)] = counts.get((k, g), 0) + 1
    return PMPTable(counts=counts, total=trace.n_samples)


@dataclass(frozen=True)
class IATResult:
    """Integrated autocorrelation time estimate of the model-index series."""

    tau: float
    lags_used: int
    degenerate: bool = False


def model_index_series(trace: ChainTrace) -> np.ndarray:
    """Map each sampled (K, G) to a scalar model index in 1..K_max*G_max."""
    return (trace.k - 1) * trace.hp.g_max + trace.g


def autocorrelations(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Empirical autocorrelations at lags 0..max_lag (FFT-based)."""
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    x = x - x.mean()
    var = np.dot(x, x)
    if var == 0:
        return np.full(max_lag + 1, np.nan)
    nfft = 1
    while nfft < 2 * n:
        nfft *= 2
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f))[: max_lag + 1]
    return acov / acov[0]


def iat_of_series(series, rho_threshold: float = 0.05, window_divisor: int = 50) -> IATResult:
    """tau = 1 + 2 sum rho(t), truncated at the first lag with rho below the
    threshold or beyond length/window_divisor, whichever comes first.

    A constant series has undefined autocorrelation; it is reported as tau = 1
    with the degenerate flag set.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size < 2:
        raise ValueError("series too short")
    if np.all(x == x[0]):
        return IATResult(tau=1.0, lags_used=0, degenerate=True)
    max_lag = max(1, int(x.size // window_divisor))
    rho = autocorrelations(x, min(max_lag, x.size - 1))
    tau = 1.0
    used = 0
    for t in range(1, len(rho)):
        if t > max_lag or rho[t] < rho_threshold:
            break
        tau += 2.0 * rho[t]
        used += 1
    return IATResult(tau=float(tau), lags_used=used)


def iat(trace: ChainTrace) -> IATResult:
    """IAT of the sampled cluster-model index series."""
    if trace.n_samples < 100:
        raise ValueError("need at least 100 samples for an IAT estimate")
    return iat_of_series(model_index_series(trace))


@dataclass(frozen=True)
class MembershipSummary:
    """Average memberships under the modal cluster model, label switching
    undone. ``q_rows[i, k]`` estimates the posterior probability that row i
    belongs to cluster k; hard assignments take the argmax (lowest index on
    ties)."""

    k_hat: int
    g_hat: int
    n_occurrences: int
    q_rows: np.ndarray
    q_cols: np.ndarray
    hard_rows: np.ndarray
    hard_cols: np.ndarray


def _membership_probs(samples: list, n_labels: int) -> np.ndarray:
    n = samples[0].size
    q = np.zeros((n, n_labels))
    for s in samples:
        q[np.arange(n), s] += 1.0
    return q / len(samples)


def modal_summary(trace: ChainTrace, row_relabeler: OnlineRelabeler | None = None,
                  col_relabeler: OnlineRelabeler | None = None) -> MembershipSummary:
    """Membership summary over the samples visiting the modal (K, G)."""
    table = pmp_table(trace)
    k_hat, g_hat = table.modal()
    sel = np.flatnonzero((trace.k == k_hat) & (trace.g == g_hat))
    zs = [trace.z[i].astype(np.int64) for i in sel]
    ws = [trace.w[i].astype(np.int64) for i in sel]
    row_relabeler = row_relabeler or OnlineRelabeler()
    col_relabeler = col_relabeler or OnlineRelabeler()
    zr = [row_relabeler.process(s) for s in sort_for_processing(zs)]
    wr = [col_relabeler.process(s) for s in sort_for_processing(ws)]
    q_rows = _membership_probs(zr, k_hat)
    q_cols = _membership_probs(wr, g_hat)
    return MembershipSummary(
        k_hat=int(k_hat), g_hat=int(g_hat), n_occurrences=len(sel),
        q_rows=q_rows, q_cols=q_cols,
        hard_rows=np.argmax(q_rows, axis=1),
        hard_cols=np.argmax(q_cols, axis=1),
    )


@dataclass(frozen=True)
class MapEstimate:
    """The stored sample with the highest collapsed log posterior."""

    k: int
    g: int
    z: np.ndarray
    w: np.ndarray
    log_posterior: float
    sample_index: int


def map_estimate(trace: ChainTrace) -> MapEstimate:
    """Highest-posterior visited sample; earliest wins on exact ties."""
    if trace.n_samples == 0:
        raise ValueError("empty trace")
    idx = int(np.argmax(trace.log_post))
    return MapEstimate(
        k=int(trace.k[idx]), g=int(trace.g[idx]),
        z=trace.z[idx].astype(np.int64), w=trace.w[idx].astype(np.int64),
        log_posterior=float(trace.log_post[idx]), sample_index=idx,
    )
