"""Online correction of label switching in sampled allocation vectors.

Cluster labels carry no meaning in the collapsed posterior, so a chain hops
freely between the K! relabellings of each clustering. Before membership
probabilities can be averaged, every sampled vector is aligned to the vectors
processed so far: a square cost matrix counts disagreements between incoming
and historical labels, an exact assignment solver picks the permutation with
the least total cost, and a running count matrix makes the whole pass online.

Rows and columns are processed by separate relabeler instances. Vectors
should be fed in order of increasing number of non-empty components
(:func:`sort_for_processing`), which also keeps cost-matrix padding minimal.
"""

from __future__ import annotations

import numpy as np


def count_nonempty(labels) -> int:
    """Number of distinct labels used by a vector."""
    return int(np.unique(np.asarray(labels)).size)


def sort_for_processing(samples):
    """Stable sort of label vectors by increasing non-empty component count.

    Ties keep their original (chain) order.
    """
    return sorted(samples, key=count_nonempty)


def _jv(cost: np.ndarray):
    """Shortest-augmenting-path assignment on a square cost matrix.

    Returns (row_to_col, row_potentials, col_potentials). Potentials are
    dual-feasible with zero reduced cost on every assigned edge.
    """
    n = cost.shape[0]
    INF = float("inf")
    # col n is a virtual unassigned column
    assigned_row = np.full(n + 1, -1, dtype=np.int64)
    u = np.zeros(n)
    v = np.zeros(n + 1)
    for r in range(n):
        j0 = n
        assigned_row[j0] = r
        min_to = np.full(n + 1, INF)
        prev = np.full(n + 1, -1, dtype=np.int64)
        used = np.zeros(n + 1, dtype=bool)
        while assigned_row[j0] != -1:
            used[j0] = True
            r0 = assigned_row[j0]
            delta = INF
            j1 = -1
            for j in range(n):
                if not used[j]:
                    cur = cost[r0, j] - u[r0] - v[j]
                    if cur < min_to[j]:
                        min_to[j] = cur
                        prev[j] = j0
                    if min_to[j] < delta:
                        delta = min_to[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[assigned_row[j]] += delta
                    v[j] -= delta
                else:
                    min_to[j] -= delta
            j0 = j1
        while j0 != n:
            j1 = prev[j0]
            assigned_row[j0] = assigned_row[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=np.int64)
    for j in range(n):
        row_to_col[assigned_row[j]] = j
    return row_to_col, u, v[:n]


def _augment(r, adj, row_to_col, col_to_row, frontier, visited):
    """Kuhn augmenting step from unmatched row r over rows >= frontier."""
    for c in adj[r]:
        if visited[c]:
            continue
        holder = col_to_row[c]
        if holder != -1 and holder < frontier:
            continue
        visited[c] = True
        if holder == -1 or _augment(holder, adj, row_to_col, col_to_row, frontier, visited):
            row_to_col[r] = c
            col_to_row[c] = r
            return True
    return False


def solve_assignment(cost) -> np.ndarray:
    """Minimum-cost square assignment, exact, in O(K^3).

    Returns the permutation ``sigma`` minimizing ``sum_k cost[k, sigma[k]]``.
    Among equally cheap permutations the lexicographically smallest is
    returned, which keeps downstream relabeling deterministic.
    """
    C = np.asarray(cost, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("cost matrix must be square")
    if C.size == 0:
        return np.empty(0, dtype=np.int64)
    if not np.all(np.isfinite(C)) or np.any(C < 0):
        raise ValueError("costs must be finite and non-negative")
    D = C.shape[0]
    sigma, u, v = _jv(C)
    best_total = C[np.arange(D), sigma].sum()
    # every minimum-cost assignment uses only edges with zero reduced cost;
    # walk the rows in order, always taking the smallest feasible tight column
    scale = max(1.0, float(np.abs(C).max()))
    tight = (C - u[:, None] - v[None, :]) <= 1e-9 * scale
    adj = [np.flatnonzero(tight[r]) for r in range(D)]
    row_to_col = sigma.copy()
    col_to_row = np.empty(D, dtype=np.int64)
    col_to_row[row_to_col] = np.arange(D)
    for k in range(D):
        for c in adj[k]:
            if c == row_to_col[k]:
                break
            holder = col_to_row[c]
            if holder < k:
                continue
            saved_rtc = row_to_col.copy()
            saved_ctr = col_to_row.copy()
            old = row_to_col[k]
            row_to_col[k] = c
            col_to_row[c] = k
            col_to_row[old] = -1
            row_to_col[holder] = -1
            visited = np.zeros(D, dtype=bool)
            visited[c] = True
            if _augment(holder, adj, row_to_col, col_to_row, k, visited):
                break
            row_to_col = saved_rtc
            col_to_row = saved_ctr
    refined_total = C[np.arange(D), row_to_col].sum()
    if refined_total > best_total + 1e-6 * scale:
        raise AssertionError("lexicographic refinement lost optimality")
    return row_to_col


class OnlineRelabeler:
    """Streaming relabeler over a sequence of label vectors.

    The first processed vector fixes the reference labelling. Each later
    vector is permuted to minimize total disagreement with the running label
    counts, then folded into them. ``S[k, i]`` counts how many processed
    vectors gave item i label k. Strictly sequential; use one instance per
    axis.
    """

    def __init__(self):
        self.S: np.ndarray | None = None
        self.T: int = 0

    @property
    def n_items(self) -> int:
        return 0 if self.S is None else self.S.shape[1]

    def _padded(self, dim: int) -> np.ndarray:
        if self.S.shape[0] >= dim:
            return self.S
        pad = np.zeros((dim - self.S.shape[0], self.S.shape[1]), dtype=np.int64)
        return np.vstack([self.S, pad])

    def cost_matrix(self, labels) -> np.ndarray:
        """Disagreement cost between historical labels k1 and incoming labels
        k2 over the T vectors processed so far:
        C[k1, k2] = n T - sum_i S[k1, i] [z_i = k2]. Padded entries (labels
        unseen on one side) sit at the total-disagreement level n T."""
        if self.T < 1:
            raise ValueError("no vectors processed yet")
        z = np.asarray(labels, dtype=np.int64)
        if z.shape != (self.S.shape[1],):
            raise ValueError("label vector length does not match")
        if z.min() < 0:
            raise ValueError("labels must be non-negative")
        dim = max(self.S.shape[0], int(z.max()) + 1)
        S = self._padded(dim)
        n = z.shape[0]
        overlap = np.zeros((dim, dim), dtype=np.int64)
        for k2 in range(dim):
            sel = z == k2
            if sel.any():
                overlap[:, k2] = S[:, sel].sum(axis=1)
        return n * self.T - overlap

    def process(self, labels) -> np.ndarray:
        """Relabel one vector against the history and absorb it. Returns the
        relabeled copy."""
        z = np.asarray(labels, dtype=np.int64)
        if z.ndim != 1 or z.size == 0:
            raise ValueError("expected a non-empty 1-d label vector")
        if z.min() < 0:
            raise ValueError("labels must be non-negative")
        if self.T == 0:
            dim = int(z.max()) + 1
            self.S = np.zeros((dim, z.size), dtype=np.int64)
            self.S[z, np.arange(z.size)] = 1
            self.T = 1
            return z.copy()
        C = self.cost_matrix(z)
        sigma = solve_assignment(C)
        inv = np.empty(len(sigma), dtype=np.int64)
        inv[sigma] = np.arange(len(sigma))
        znew = inv[z]
        self.S = self._padded(len(sigma))
        self.S[znew, np.arange(z.size)] += 1
        self.T += 1
        return znew

    def process_all(self, samples, presort: bool = True) -> list:
        """Relabel a batch, optionally sorting by non-empty count first."""
        seq = sort_for_processing(samples) if presort else list(samples)
        return [self.process(s) for s in seq]
