"""Reference implementations used only by the tests.

Each one is written without touching the code under test: plain loops,
closed forms, or plain graph search.
"""

from __future__ import annotations

import math

import numpy as np

from eedgcnn.tensor import Tape


def naive_conv1d(x, W, b, dilation):
    """Same-length zero-padded dilated conv by triple loop. W is [k, in, out]."""
    T, n_in = x.shape
    k, _, n_out = W.shape
    half = (k - 1) // 2
    out = np.zeros((T, n_out))
    for t in range(T):
        for o in range(n_out):
            acc = b[o]
            for j in range(k):
                src = t + (j - half) * dilation
                if 0 <= src < T:
                    for i in range(n_in):
                        acc += W[j, i, o] * x[src, i]
            out[t, o] = acc
    return out


def direct_gated_block(x, Wv, bv, Wg, bg, dilation, combine="multiply", residual=False):
    value = naive_conv1d(x, Wv, bv, dilation)
    gate_pre = naive_conv1d(x, Wg, bg, dilation)
    gate = np.array([[1.0 / (1.0 + math.exp(-z)) for z in row] for row in gate_pre])
    y = value * gate if combine == "multiply" else value + gate
    return y + x if residual else y


def log_sum_exp_xent(logits, target):
    """Per-row cross entropy written with math.fsum over a shifted row."""
    row = [float(v) for v in logits]
    m = max(row)
    lse = m + math.log(math.fsum(math.exp(v - m) for v in row))
    return lse - row[target]


def grad_check(build, tensors, h=1e-5, seed=None):
    """Worst ``|g_a - g_fd| / max(1, |g_fd|)`` over every element of ``tensors``.

    ``build(tape)`` must return a scalar loss Tensor; it is re-run for each
    perturbed value so the graph is rebuilt from the current ``.data``.
    """
    for t in tensors:
        t.grad = None
    tape = Tape(seed=seed, training=False)
    loss = build(tape)
    tape.backward(loss)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]
    worst = 0.0
    for t, ga in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = build(Tape(seed=seed, training=False)).item()
            flat[i] = keep - h
            down = build(Tape(seed=seed, training=False)).item()
            flat[i] = keep
            fd = (up - down) / (2 * h)
            worst = max(worst, abs(gflat[i] - fd) / max(1.0, abs(fd)))
    return worst


def prf(tp, n_pred, n_gold):
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def max_matching(gold, pred, key):
    """Size of a maximum one-to-one matching between gold and predicted items.

    Augmenting-path search over the bipartite graph whose edges join items
    with equal ``key``; independent of any counting shortcut.
    """
    owner = [-1] * len(gold)

    def augment(p, seen):
        for g in range(len(gold)):
            if g not in seen and key(pred[p]) == key(gold[g]):
                seen.add(g)
                if owner[g] < 0 or augment(owner[g], seen):
                    owner[g] = p
                    return True
        return False

    return sum(augment(p, set()) for p in range(len(pred)))
