"""Scalar-loop reference evaluations written independently of the vectorized code."""

from __future__ import annotations

import math

import numpy as np


def vlad_matrix_loop(X, a, b, c):
    """H[k][j] = sum_i softmax_k(a_k . x_i + b_k) * (x_i(j) - c_k(j))."""
    n, d = len(X), len(X[0])
    K = len(c)
    H = [[0.0] * d for _ in range(K)]
    for i in range(n):
        logits = []
        for k in range(K):
            z = b[k]
            for j in range(d):
                z += a[k][j] * X[i][j]
            logits.append(z)
        top = max(logits)
        ex = [math.exp(z - top) for z in logits]
        tot = sum(ex)
        for k in range(K):
            w = ex[k] / tot
            for j in range(d):
                H[k][j] += w * (X[i][j] - c[k][j])
    return H


def l2_loop(v):
    s = math.sqrt(sum(x * x for x in v))
    return [x / s for x in v]


def netvlad_eval_loop(X, a, b, c, W, fc_b, gamma, beta, mean, var, eps):
    """Residual matrix, flatten (k-major), L2, FC, eval-mode batch norm, L2."""
    H = vlad_matrix_loop(X, a, b, c)
    flat = l2_loop([x for row in H for x in row])
    d_out = len(fc_b)
    z = []
    for o in range(d_out):
        acc = fc_b[o]
        for t in range(len(flat)):
            acc += flat[t] * W[t][o]
        z.append(acc)
    y = [gamma[o] * (z[o] - mean[o]) / math.sqrt(var[o] + eps) + beta[o] for o in range(d_out)]
    return l2_loop(y)


def sum_pool_loop(X):
    d = len(X[0])
    return l2_loop([sum(row[j] for row in X) for j in range(d)])


def gem_pool_loop(X, p, eps=1e-6):
    n, d = len(X), len(X[0])
    out = []
    for j in range(d):
        acc = 0.0
        for i in range(n):
            acc += max(X[i][j], eps) ** p
        out.append((acc / n) ** (1.0 / p))
    return out


def pairwise_auc(pos, neg):
    """Mann-Whitney statistic with half credit for ties."""
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    gt = (pos[:, None] > neg[None, :]).sum()
    eq = (pos[:, None] == neg[None, :]).sum()
    return (gt + 0.5 * eq) / (pos.size * neg.size)
