"""Slow, loop-based reference implementations used as test oracles."""
import math

import numpy as np


def conv1d_loops(x, w, b, padding):
    B, C, T = x.shape
    O, _, K = w.shape
    if padding == "same":
        left = (K - 1) // 2
        right = K - 1 - left
    else:
        left = right = 0
    T_out = T + left + right - K + 1
    out = np.zeros((B, O, T_out))
    for n in range(B):
        for o in range(O):
            for t in range(T_out):
                acc = b[o] if b is not None else 0.0
                for c in range(C):
                    for k in range(K):
                        src = t + k - left
                        if 0 <= src < T:
                            acc += x[n, c, src] * w[o, c, k]
                out[n, o, t] = acc
    return out


def attention_loops(q, k, v, causal):
    B, H, S, D = q.shape
    out = np.zeros_like(q, dtype=np.float64)
    scale = 1.0 / math.sqrt(D)
    for b in range(B):
        for h in range(H):
            for i in range(S):
                scores = []
                for j in range(S):
                    if causal and j > i:
                        scores.append(-math.inf)
                    else:
                        scores.append(sum(q[b, h, i, d] * k[b, h, j, d] for d in range(D)) * scale)
                m = max(scores)
                weights = [math.exp(s - m) for s in scores]
                z = sum(weights)
                for d in range(D):
                    out[b, h, i, d] = sum(weights[j] / z * v[b, h, j, d] for j in range(S))
    return out
