"""Synthetic block-structured binary matrices with tunable distinguishability.

Block success probabilities are drawn uniformly and then squeezed into a
target interval; narrower intervals make neighbouring blocks harder to tell
apart. Rows and columns are assigned to equal-size clusters (remainder spread
over the first ones), cells sampled independently per block, and the matrix
optionally scrambled by random row and column permutations to hide the
banded layout. Ground truth is returned aligned with the emitted matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BERNOULLI, DataMatrix


@dataclass(frozen=True)
class SimSpec:
    """Generator settings: dimensions, true cluster counts, the target
    interval for the block probabilities, seed, and whether to scramble."""

    n: int
    m: int
    k: int
    g: int
    theta_low: float = 0.0
    theta_high: float = 1.0
    seed: int = 0
    scramble: bool = True

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("matrix dimensions must be positive")
        if not (1 <= self.k <= self.n):
            raise ValueError("row cluster count must lie in 1..n")
        if not (1 <= self.g <= self.m):
            raise ValueError("column cluster count must lie in 1..m")
        if not (0.0 <= self.theta_low <= self.theta_high <= 1.0):
            raise ValueError("need 0 <= theta_low <= theta_high <= 1")


def transform_theta(theta, low: float, high: float):
    """Affine squeeze of probabilities from [0, 1] into [low, high]."""
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta < 0) or np.any(theta > 1):
        raise ValueError("theta must lie in [0, 1]")
    return low + theta * (high - low)


def _banded_labels(length: int, clusters: int) -> np.ndarray:
    sizes = np.full(clusters, length // clusters, dtype=np.int64)
    sizes[: length % clusters] += 1
    return np.repeat(np.arange(clusters, dtype=np.int64), sizes)


@dataclass(frozen=True)
class SimResult:
    """Generated matrix plus the ground truth it was built from. Labels are
    aligned with the emitted (possibly scrambled) matrix."""

    data: DataMatrix
    row_labels: np.ndarray
    col_labels: np.ndarray
    theta: np.ndarray


def generate(spec: SimSpec) -> SimResult:
    """Draw one synthetic dataset. Deterministic given the seed."""
    rng = np.random.default_rng(spec.seed)
    theta = transform_theta(rng.random((spec.k, spec.g)), spec.theta_low, spec.theta_high)
    z = _banded_labels(spec.n, spec.k)
    w = _banded_labels(spec.m, spec.g)
    cells = (rng.random((spec.n, spec.m)) < theta[np.ix_(z, w)]).astype(np.float64)
    if spec.scramble:
        rp = rng.permutation(spec.n)
        cp = rng.permutation(spec.m)
        cells = cells[np.ix_(rp, cp)]
        z = z[rp]
        w = w[cp]
    return SimResult(data=DataMatrix(cells, BERNOULLI), row_labels=z,
                     col_labels=w, theta=theta)
