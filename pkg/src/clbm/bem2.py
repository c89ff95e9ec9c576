"""Alternating variational EM for the latent block model at fixed (K, G),
and AIC-3 scoring of fitted cluster models.

The fitted objective is the complete-data log likelihood evaluated at fuzzy
memberships plus the membership entropies. Each half-step maximizes it
coordinate-wise (row memberships, row weights and block parameters with the
column side held fixed, then the mirror image), so the objective never
decreases. Unused clusters are legitimate outcomes, not errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .model import BERNOULLI, DataMatrix

THETA_EPS = 1e-10
VAR_FLOOR = 1e-10
_WEIGHT_FLOOR = 1e-300


@dataclass
class FuzzyState:
    """Fuzzy memberships and parameters of one BEM2 fit.

    s: (n, K) row membership probabilities, rows on the simplex.
    t: (m, G) column membership probabilities.
    omega, rho: mixing weights.
    theta: (K, G) block means (Bernoulli success probabilities, clamped away
        from 0 and 1, or Gaussian means).
    theta_var: (K, G) block variances (Gaussian only, floored).
    """

    variant: str
    s: np.ndarray
    t: np.ndarray
    omega: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    theta_var: np.ndarray | None = None


def _block_weights(s, t):
    return np.outer(s.sum(axis=0), t.sum(axis=0))


def _soft_stats(y, y2, s, t):
    return s.T @ y @ t, s.T @ y2 @ t


def _complete_loglik(state: FuzzyState, data: DataMatrix) -> float:
    s, t = state.s, state.t
    w = _block_weights(s, t)
    sy, syy = _soft_stats(data.values, data.values * data.values, s, t)
    lw = float(np.sum(xlogy(s.sum(axis=0), state.omega))
               + np.sum(xlogy(t.sum(axis=0), state.rho)))
    if state.variant == BERNOULLI:
        ldata = float(np.sum(sy * np.log(state.theta)
                             + (w - sy) * np.log1p(-state.theta)))
    else:
        mu, var = state.theta, state.theta_var
        quad = syy - 2.0 * mu * sy + w * mu * mu
        ldata = float(np.sum(-0.5 * w * np.log(2.0 * np.pi * var) - quad / (2.0 * var)))
    return lw + ldata


def bem2_criterion(state: FuzzyState, data: DataMatrix) -> float:
    """Fuzzy clustering objective: complete log likelihood at the soft
    memberships plus both membership entropies (0 log 0 = 0)."""
    ent = float(np.sum(xlogy(state.s, state.s)) + np.sum(xlogy(state.t, state.t)))
    return _complete_loglik(state, data) - ent


def _update_theta(data: DataMatrix, s, t, state: FuzzyState) -> None:
    w = _block_weights(s, t)
    sy, syy = _soft_stats(data.values, data.values * data.values, s, t)
    safe_w = np.maximum(w, _WEIGHT_FLOOR)
    if data.variant == BERNOULLI:
        state.theta = np.clip(sy / safe_w, THETA_EPS, 1.0 - THETA_EPS)
    else:
        mu = sy / safe_w
        var = syy / safe_w - mu * mu
        state.theta = mu
        state.theta_var = np.maximum(var, VAR_FLOOR)


def _log_block_scores(data: DataMatrix, state: FuzzyState):
    """Per-cell log densities aggregated for membership updates.

    Returns (A, B) with A[k, g] applied to the data-weighted membership
    cross-counts and B[k, g] to the plain cross-counts.
    """
    if data.variant == BERNOULLI:
        a = np.log(state.theta) - np.log1p(-state.theta)
        b = np.log1p(-state.theta)
        return a, b, None
    var = state.theta_var
    mu = state.theta
    # log N(y; mu, var) = -(y^2 - 2 mu y + mu^2) / (2 var) - 0.5 log(2 pi var)
    c_y2 = -0.5 / var
    c_y = mu / var
    c_1 = -0.5 * mu * mu / var - 0.5 * np.log(2.0 * np.pi * var)
    return c_y, c_1, c_y2


def _softmax_rows(logits):
    logits = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=1, keepdims=True)


def _update_rows(data: DataMatrix, state: FuzzyState) -> None:
    y, t = data.values, state.t
    yt = y @ t
    if data.variant == BERNOULLI:
        a, b, _ = _log_block_scores(data, state)
        scores = yt @ a.T + t.sum(axis=0)[None, :] @ b.T
    else:
        c_y, c_1, c_y2 = _log_block_scores(data, state)
        y2t = (y * y) @ t
        scores = y2t @ c_y2.T + yt @ c_y.T + t.sum(axis=0)[None, :] @ c_1.T
    logits = scores + np.log(np.maximum(state.omega, _WEIGHT_FLOOR))[None, :]
    state.s = _softmax_rows(logits)
    state.omega = state.s.mean(axis=0)
    _update_theta(data, state.s, state.t, state)


def _update_cols(data: DataMatrix, state: FuzzyState) -> None:
    yT, s = data.values.T, state.s
    ys = yT @ s
    if data.variant == BERNOULLI:
        a, b, _ = _log_block_scores(data, state)
        scores = ys @ a + s.sum(axis=0)[None, :] @ b
    else:
        c_y, c_1, c_y2 = _log_block_scores(data, state)
        y2s = (yT * yT) @ s
        scores = y2s @ c_y2 + ys @ c_y + s.sum(axis=0)[None, :] @ c_1
    logits = scores + np.log(np.maximum(state.rho, _WEIGHT_FLOOR))[None, :]
    state.t = _softmax_rows(logits)
    state.rho = state.t.mean(axis=0)
    _update_theta(data, state.s, state.t, state)


@dataclass
class BEM2Result:
    """Converged fit plus its objective trajectory (one entry per half-step)."""

    state: FuzzyState
    hard_rows: np.ndarray
    hard_cols: np.ndarray
    criterion: float
    history: np.ndarray
    n_iterations: int
    converged: bool


# near-one-hot random memberships; soft (flat-Dirichlet) starts make every
# block parameter collapse to the global mean, a fixed point the iteration
# cannot leave
_INIT_CONCENTRATION = 0.1


def _init_state(data: DataMatrix, K: int, G: int, rng) -> FuzzyState:
    s = rng.dirichlet(np.full(K, _INIT_CONCENTRATION), size=data.n)
    t = rng.dirichlet(np.full(G, _INIT_CONCENTRATION), size=data.m)
    state = FuzzyState(variant=data.variant, s=s, t=t,
                       omega=s.mean(axis=0), rho=t.mean(axis=0),
                       theta=np.empty((K, G)))
    _update_theta(data, s, t, state)
    return state


def bem2_fit(data: DataMatrix, K: int, G: int, seed: int = 0, tol: float = 1e-8,
             max_iter: int = 5000, n_restarts: int = 10) -> BEM2Result:
    """Fit the block model at fixed (K, G) by alternating maximization,
    keeping the best of ``n_restarts`` random initializations.

    Stops when the objective improves by less than ``tol`` over a full
    iteration. Hard assignments take each item's highest-probability cluster.
    """
    if not (1 <= K <= data.n) or not (1 <= G <= data.m):
        raise ValueError("cluster counts must lie in 1..n and 1..m")
    rng = np.random.default_rng(seed)
    best: BEM2Result | None = None
    for _ in range(max(1, n_restarts)):
        state = _init_state(data, K, G, rng)
        history = [bem2_criterion(state, data)]
        converged = False
        it = 0
        for it in range(1, max_iter + 1):
            _update_rows(data, state)
            history.append(bem2_criterion(state, data))
            _update_cols(data, state)
            history.append(bem2_criterion(state, data))
            if not np.isfinite(history[-1]):
                raise FloatingPointError("objective became non-finite during BEM2")
            if abs(history[-1] - history[-3]) < tol:
                converged = True
                break
        result = BEM2Result(
            state=state,
            hard_rows=np.argmax(state.s, axis=1),
            hard_cols=np.argmax(state.t, axis=1),
            criterion=history[-1],
            history=np.asarray(history),
            n_iterations=it,
            converged=converged,
        )
        if best is None or result.criterion > best.criterion:
            best = result
    return best


def aic3_parameter_count(n: int, m: int, K: int, G: int, d: int) -> int:
    """Free-parameter count of a (K, G) block model with d-dimensional block
    parameters: n(K-1) + m(G-1) + dKG + (K-1) + (G-1)."""
    if min(n, m, K, G, d) < 1:
        raise ValueError("all arguments must be positive")
    return n * (K - 1) + m * (G - 1) + d * K * G + (K - 1) + (G - 1)


def aic3_score(data: DataMatrix, hard_rows, hard_cols, K: int, G: int) -> float:
    """AIC-3 = -2 * maximized complete log likelihood + 3 * parameter count.

    The complete log likelihood is evaluated at the hard assignments with the
    matching maximum-likelihood weights and block parameters (membership
    entropies are zero at hard assignments).
    """
    z = np.asarray(hard_rows, dtype=np.int64)
    w = np.asarray(hard_cols, dtype=np.int64)
    s = np.zeros((data.n, K))
    s[np.arange(data.n), z] = 1.0
    t = np.zeros((data.m, G))
    t[np.arange(data.m), w] = 1.0
    state = FuzzyState(variant=data.variant, s=s, t=t,
                       omega=s.mean(axis=0), rho=t.mean(axis=0),
                       theta=np.empty((K, G)))
    _update_theta(data, s, t, state)
    d = 1 if data.variant == BERNOULLI else 2
    return -2.0 * _complete_loglik(state, data) + 3.0 * aic3_parameter_count(data.n, data.m, K, G, d)
