"""Slow, loop-only reference implementations used to freeze derived values.

Nothing here calls the engines under test; only data containers are shared.
"""
import itertools
from fractions import Fraction

import numpy as np

from nlcomm.correlations import deterministic_local, from_function, mix, white_noise
from nlcomm.rational import random_fraction, random_stochastic, zeros
from nlcomm.tasks import Channel, Task, noiseless_channel
from nlcomm.wirecut import AssistedProtocol


def brute_local_bound(task):
    """max over every (E, D) of sum_m sum_t' T(t'|E(m)) w(m, t', D(t'))."""
    M, T, N = task.sizes
    W = task.wire_weights()
    Tm = task.channel.matrix
    best = None
    for D in itertools.product(range(N), repeat=T):
        for E in itertools.product(range(T), repeat=M):
            v = Fraction(0)
            for m in range(M):
                for s in range(T):
                    v += Tm[E[m], s] * W[m, s, D[s]]
            if best is None or v > best:
                best = v
    return best


def brute_bell_local(c):
    """max over deterministic boxes of sum c[x, y, la(x), lb(y)]."""
    X, Y, A, B = c.shape
    best = None
    for la in itertools.product(range(A), repeat=X):
        for lb in itertools.product(range(B), repeat=Y):
            v = sum(c[x, y, la[x], lb[y]] for x in range(X) for y in range(Y))
            if best is None or v > best:
                best = v
    return best


def brute_assisted(task, P):
    """Best deterministic wiring around a fixed box, every map enumerated jointly per input."""
    M, T, N = task.sizes
    X, Y, A, B = P.dims
    W = task.wire_weights()
    Tm = task.channel.matrix
    best = None
    for fy in itertools.product(range(Y), repeat=T):
        for fn in itertools.product(range(N), repeat=T * B):
            total = Fraction(0)
            for m in range(M):
                per_m = None
                for x in range(X):
                    for ft in itertools.product(range(T), repeat=A):
                        v = Fraction(0)
                        for a, b, s in itertools.product(range(A), range(B), range(T)):
                            v += Tm[ft[a], s] * P.table[x, fy[s], a, b] * W[m, s, fn[s * B + b]]
                        if per_m is None or v > per_m:
                            per_m = v
                total += per_m
            if best is None or total > best:
                best = total
    return best


def ns_marginals_ok(table):
    X, Y, A, B = table.shape
    for x, a in itertools.product(range(X), range(A)):
        vals = {sum(table[x, y, a, b] for b in range(B)) for y in range(Y)}
        if len(vals) > 1:
            return False
    for y, b in itertools.product(range(Y), range(B)):
        vals = {sum(table[x, y, a, b] for a in range(A)) for x in range(X)}
        if len(vals) > 1:
            return False
    return True


def random_task(rng, M, T, N, noisy=True, plain=False):
    channel = Channel(random_stochastic(rng, T, T, max_den=4)) if noisy else noiseless_channel(T)
    shape = (M, N) if plain else (M, T, N)
    W = zeros(shape)
    for idx in np.ndindex(shape):
        W[idx] = random_fraction(rng, 5) - Fraction(int(rng.integers(0, 2)), 3)
    return Task("plain" if plain else "wire_read", tuple(range(1, M + 1)), tuple(range(1, N + 1)),
                channel, W, family="random")


def random_deterministic(rng, dims):
    X, Y, A, B = dims
    la = [int(v) + 1 for v in rng.integers(0, A, X)]
    lb = [int(v) + 1 for v in rng.integers(0, B, Y)]
    return deterministic_local(la, lb, A, B)


def modular_box(rng, dims):
    """Uniform-marginal box with a - b = f(x, y) mod K; no-signalling but generally nonlocal."""
    X, Y, A, B = dims
    K = A
    f = rng.integers(0, K, (X, Y))
    return from_function(dims, lambda a, b, x, y: Fraction(1, K) if (a - b) % K == f[x - 1, y - 1] else 0)


def random_ns_box(rng, dims, parts=3):
    """Rational convex mixture of deterministic, modular and noise boxes."""
    X, Y, A, B = dims
    boxes = [white_noise(*dims)]
    for _ in range(parts):
        if A == B and rng.random() < 0.6:
            boxes.append(modular_box(rng, dims))
        else:
            boxes.append(random_deterministic(rng, dims))
    raw = [int(v) for v in rng.integers(0, 4, len(boxes))]
    raw[int(rng.integers(0, len(raw)))] += 1
    total = sum(raw)
    return mix(boxes, [Fraction(r, total) for r in raw])


def random_protocol(rng, task, dims):
    M, T, N = task.sizes
    X, Y, A, B = dims
    box = random_ns_box(rng, dims)
    return AssistedProtocol(
        box,
        random_stochastic(rng, M, X, max_den=3),
        random_stochastic(rng, M * A, T, max_den=3).reshape(M, A, T),
        random_stochastic(rng, T, Y, max_den=3),
        random_stochastic(rng, T * B, N, max_den=3).reshape(T, B, N),
    )
