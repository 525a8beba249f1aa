"""Exact O(N^2) t-SNE."""

from __future__ import annotations

import numpy as np

MACHINE_EPS = np.finfo(np.float64).eps


def squared_distances(X: np.ndarray) -> np.ndarray:
    sq = (X * X).sum(axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def conditional_affinities(D: np.ndarray, perplexity: float, tol: float = 1e-5, max_iter: int = 100) -> np.ndarray:
    """Row-stochastic P(j|i) with each row's Gaussian precision binary-searched
    so that the row entropy equals log(perplexity)."""
    n = D.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        d = np.delete(D[i], i)
        d = d - d.min()
        beta, lo, hi = 1.0, 0.0, np.inf
        for _ in range(max_iter):
            w = np.exp(-d * beta)
            sw = max(w.sum(), MACHINE_EPS)
            p = w / sw
            entropy = np.log(sw) + beta * (d * p).sum()
            diff = entropy - target
            if abs(diff) < tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
        P[i, np.arange(n) != i] = p
    return P


def joint_affinities(X: np.ndarray, perplexity: float) -> np.ndarray:
    P = conditional_affinities(squared_distances(X), perplexity)
    P = (P + P.T) / (2.0 * P.shape[0])
    return np.maximum(P, 1e-12)


def _student_t(Y: np.ndarray):
    num = 1.0 / (1.0 + squared_distances(Y))
    np.fill_diagonal(num, 0.0)
    Q = np.maximum(num / num.sum(), 1e-12)
    return Q, num


def kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    Q, _ = _student_t(Y)
    mask = ~np.eye(len(P), dtype=bool)
    return float((P[mask] * np.log(P[mask] / Q[mask])).sum())


def tsne(
    X: np.ndarray,
    perplexity: float = 30.0,
    n_iter: int = 1000,
    learning_rate: float = 200.0,
    early_exaggeration: float = 12.0,
    exaggeration_iters: int = 250,
    seed: int = 0,
    polish_iters: int = 100,
    record_kl: bool = False,
):
    """Embed rows of ``X`` in 2D. Returns ``(Y, kl_history)``; the history is
    empty unless ``record_kl`` is set.

    The final ``polish_iters`` iterations drop momentum and gains and use a
    backtracking step, so KL never increases over that stretch.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 3:
        raise ValueError("t-SNE needs at least 3 points")
    if not 0 < perplexity < (n - 1) / 3.0:
        raise ValueError(f"perplexity must be in (0, {(n - 1) / 3.0:.3g}) for {n} points, got {perplexity}")
    rng = np.random.default_rng(seed)
    P = joint_affinities(X, perplexity)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    history = []
    polish_start = max(n_iter - polish_iters, exaggeration_iters)
    for it in range(polish_start):
        exaggerate = it < exaggeration_iters
        momentum = 0.5 if exaggerate else 0.8
        P_eff = P * early_exaggeration if exaggerate else P
        Q, num = _student_t(Y)
        W = (P_eff - Q) * num
        grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y
        same_sign = np.sign(grad) == np.sign(update)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)
        if record_kl:
            history.append(kl_divergence(P, Y))

    kl = kl_divergence(P, Y)
    step = learning_rate
    for _ in range(polish_start, n_iter):
        Q, num = _student_t(Y)
        W = (P - Q) * num
        grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y
        for _ in range(40):
            cand = Y - step * grad
            cand_kl = kl_divergence(P, cand)
            if cand_kl <= kl:
                Y, kl = cand - cand.mean(axis=0), cand_kl
                step *= 1.2
                break
            step *= 0.5
        if record_kl:
            history.append(kl)
    return Y, history
