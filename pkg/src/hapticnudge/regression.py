"""Weighted regression solvers used by the learner-model M-steps.

Two problems appear there:
  - soft-count multinomial logit (softmax regression) with an L2 penalty on
    the input weights, intercepts unpenalized, last class fixed as the zero
    reference;
  - per-output-dimension weighted elastic net (squared loss) solved by
    coordinate descent with soft-thresholding.
Both support warm starts so repeated M-steps stay cheap and deterministic.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp


def softmax_log_probs(X, W, b) -> np.ndarray:
    """Row-normalized log softmax probabilities; X (n,d), W (C,d), b (C,)."""
    logits = X @ W.T + b
    return logits - logsumexp(logits, axis=1, keepdims=True)


def softmax_objective(X, counts, W, b, l2: float) -> float:
    """Negative weighted log-likelihood plus L2 penalty on input weights."""
    logp = softmax_log_probs(X, W, b)
    nll = -float(np.sum(counts * logp))
    return nll + 0.5 * l2 * float(np.sum(W * W))


def fit_softmax_regression(X, counts, l2: float, W0=None, b0=None,
                           gtol: float = 1e-9, max_iter: int = 1000):
    """Fit a soft-count multinomial logit with the last class as zero reference.

    X: (n, d) inputs; counts: (n, C) nonnegative soft counts (rows need not
    sum to 1). Intercepts are unpenalized. Returns (W (C, d), b (C,)) with
    the last row of each fixed at zero.
    """
    X = np.asarray(X, dtype=float)
    counts = np.asarray(counts, dtype=float)
    n, d = X.shape
    C = counts.shape[1]
    if C < 2:
        return np.zeros((1, d)), np.zeros(1)
    free = C - 1
    totals = counts.sum(axis=1)

    def unpack(theta):
        Wf = theta[: free * d].reshape(free, d)
        bf = theta[free * d:]
        W = np.vstack([Wf, np.zeros((1, d))])
        b = np.concatenate([bf, [0.0]])
        return W, b

    def fun(theta):
        W, b = unpack(theta)
        logp = softmax_log_probs(X, W, b)
        value = -float(np.sum(counts * logp)) + 0.5 * l2 * float(np.sum(W * W))
        P = np.exp(logp)
        resid = P * totals[:, None] - counts      # (n, C)
        gW = resid[:, :free].T @ X + l2 * W[:free]
        gb = resid[:, :free].sum(axis=0)
        return value, np.concatenate([gW.ravel(), gb])

    theta0 = np.zeros(free * (d + 1))
    if W0 is not None:
        theta0[: free * d] = np.asarray(W0, dtype=float)[:free].ravel()
    if b0 is not None:
        theta0[free * d:] = np.asarray(b0, dtype=float)[:free]

    res = minimize(fun, theta0, jac=True, method="L-BFGS-B",
                   options={"gtol": gtol, "ftol": 1e-14, "maxiter": max_iter})
    return unpack(res.x)


def elastic_net_objective(X, y, weights, v, c, alpha: float, l1_ratio: float) -> float:
    """0.5 * sum(w r^2) + alpha * (l1 ||v||_1 + 0.5 (1 - l1) ||v||_2^2)."""
    r = y - X @ v - c
    loss = 0.5 * float(weights @ (r * r))
    pen = alpha * (l1_ratio * float(np.abs(v).sum())
                   + 0.5 * (1.0 - l1_ratio) * float(v @ v))
    return loss + pen


def fit_elastic_net(X, y, weights, alpha: float, l1_ratio: float,
                    v0=None, c0: float = 0.0,
                    tol: float = 1e-12, max_sweeps: int = 1000):
    """Weighted elastic net by cyclic coordinate descent.

    Minimizes 0.5*sum_i w_i (y_i - x_i.v - c)^2
              + alpha*(l1_ratio*||v||_1 + 0.5*(1-l1_ratio)*||v||_2^2)
    with the intercept c unpenalized. Returns (v (d,), c).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    n, d = X.shape
    total = float(w.sum())
    if total <= 0.0:
        raise ValueError("weights sum to zero")

    v = np.zeros(d) if v0 is None else np.asarray(v0, dtype=float).copy()
    c = float(c0)
    l1 = alpha * l1_ratio
    l2 = alpha * (1.0 - l1_ratio)
    wX = w[:, None] * X
    col_norm = np.einsum("ij,ij->j", wX, X)      # sum_i w_i x_ij^2
    r = y - X @ v - c                            # residual kept in sync

    def objective():
        return (0.5 * float(w @ (r * r))
                + l1 * float(np.abs(v).sum()) + 0.5 * l2 * float(v @ v))

    prev_obj = objective()
    for _ in range(max_sweeps):
        delta = 0.0
        # intercept (unpenalized weighted mean of residual)
        c_new = c + float(w @ r) / total
        r -= c_new - c
        delta = max(delta, abs(c_new - c))
        c = c_new
        for j in range(d):
            denom = col_norm[j] + l2
            if denom <= 0.0:
                continue
            rho = float(wX[:, j] @ r) + col_norm[j] * v[j]
            vj = np.sign(rho) * max(abs(rho) - l1, 0.0) / denom
            if vj != v[j]:
                r -= X[:, j] * (vj - v[j])
                delta = max(delta, abs(vj - v[j]))
                v[j] = vj
        if delta < tol:
            break
        # collinear designs leave an objective-flat ridge that coefficient
        # deltas crawl along forever; stop once a sweep's gain is float noise
        obj = objective()
        if prev_obj - obj < 1e-15 * max(1.0, abs(obj)):
            break
        prev_obj = obj
    return v, c


def kmeans(points, k: int, rng, n_iter: int = 100):
    """Plain Lloyd k-means with data-point initialization.

    Deterministic given rng. Returns (centers (k, d), labels (n,)). Empty
    clusters are reseeded with the point farthest from its center.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds {n} points")
    centers = pts[rng.choice(n, size=k, replace=False)].copy()
    labels = np.zeros(n, dtype=int)
    for _ in range(n_iter):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        for j in range(k):
            mask = new_labels == j
            if mask.any():
                centers[j] = pts[mask].mean(axis=0)
            else:
                worst = int(d2[np.arange(n), new_labels].argmax())
                centers[j] = pts[worst]
                new_labels[worst] = j
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return centers, labels
