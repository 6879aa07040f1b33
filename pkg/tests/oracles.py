"""Independent reference implementations used as test oracles.

These are written for clarity, not speed, and share no code with the package.
"""
import itertools
import math

import numpy as np


def ncc_loop(o_i, o_j):
    """Lag trace by literal double summation; o_i is the longer trace."""
    o_i = [float(v) for v in o_i]
    o_j = [float(v) for v in o_j]
    n_i, n_j = len(o_i), len(o_j)
    assert n_i >= n_j
    shift = (n_j - n_j % 2) // 2 - (n_i % 2) * (1 - n_j % 2)
    sd_i = float(np.std(o_i))
    sd_j = float(np.std(o_j))
    out = []
    for tau in range(n_i):
        acc = 0.0
        for m in range(n_i):
            k = m + shift - tau
            if 0 <= k < n_j:
                acc += o_i[m] * o_j[k]
        out.append(acc / (sd_i * sd_j * n_i) if sd_i > 0 and sd_j > 0 else 0.0)
    return np.array(out)


def ncc_distance_loop(x_i, x_j):
    """Multichannel distance from the per-channel loop traces (x_i longer)."""
    x_i = np.atleast_2d(x_i)
    x_j = np.atleast_2d(x_j)
    total = sum(ncc_loop(a, b) for a, b in zip(x_i, x_j))
    return 1.0 - np.max(np.abs(total)) / x_i.shape[0]


def levenshtein_table(s, t):
    """Full (len(s)+1) x (len(t)+1) DP table."""
    table = [[0] * (len(t) + 1) for _ in range(len(s) + 1)]
    for i in range(len(s) + 1):
        table[i][0] = i
    for j in range(len(t) + 1):
        table[0][j] = j
    for i in range(1, len(s) + 1):
        for j in range(1, len(t) + 1):
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + (0 if s[i - 1] == t[j - 1] else 1),
            )
    return table[-1][-1]


def auc_pairs(scores, labels):
    """P(score_pos > score_neg) + 0.5 P(tie), as an exact Fraction-free ratio."""
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    twice = 0
    for p, n in itertools.product(pos, neg):
        twice += 2 if p > n else (1 if p == n else 0)
    return twice / (2 * len(pos) * len(neg))


def euclid(x, y):
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(x, y)))


def ncc_sum_literal(x_i, x_j):
    """Channel-summed lag trace by direct summation, one lag at a time (x_i longer).

    Same definition as :func:`ncc_loop` with the inner sum vectorized, so it
    stays usable at n = 4096.
    """
    x_i = np.atleast_2d(np.asarray(x_i, dtype=np.float64))
    x_j = np.atleast_2d(np.asarray(x_j, dtype=np.float64))
    n_i, n_j = x_i.shape[1], x_j.shape[1]
    shift = (n_j - n_j % 2) // 2 - (n_i % 2) * (1 - n_j % 2)
    m = np.arange(n_i)
    total = np.zeros(n_i)
    for a, b in zip(x_i, x_j):
        sd = a.std() * b.std()
        if sd == 0:
            continue
        for tau in range(n_i):
            k = m + shift - tau
            ok = (k >= 0) & (k < n_j)
            total[tau] += np.dot(a[ok], b[k[ok]]) / (sd * n_i)
    return total
