"""Independent reference implementations used as test oracles.

Everything here is written with scalar loops and the ``math`` module so it
shares no code path with the vectorized package internals.
"""

import itertools
import math

FLOOR = 1e-4
EPS = 1e-5


def softplus(z):
    return math.log1p(math.exp(-abs(z))) + max(z, 0.0)


def sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def gauss(x, mu, s):
    return math.exp(-((x - mu) ** 2) / (2.0 * s * s))


def bell(x, a, b, c):
    return 1.0 / (1.0 + abs((x - c) / a) ** (2.0 * b))


def basis_value(x, p, i, j, k, family, it2):
    mu = float(p["center"][i, j, k])
    if it2:
        lo = softplus(float(p["lower_width_raw"][i, j, k])) + FLOOR
        up = lo + softplus(float(p["gap_raw"][i, j, k])) + FLOOR
        return 0.5 * (gauss(x, mu, up) + gauss(x, mu, lo))
    if family == "gaussian":
        return gauss(x, mu, softplus(float(p["width_raw"][i, j, k])) + FLOOR)
    if family == "bell":
        a = softplus(float(p["a_raw"][i, j, k])) + FLOOR
        b = softplus(float(p["b_raw"][i, j, k])) + FLOOR
        return bell(x, a, b, mu)
    slope = float(p["slope"][i, j, k])
    return sigmoid(slope * (x - mu))


def layer_rows(xs, p, d_in, d_out, n_bases, family, it2):
    out = []
    for j in range(d_out):
        h = 0.0
        for i in range(d_in):
            e = 0.0
            for k in range(n_bases):
                e += softplus(float(p["amp_raw"][i, j, k])) * basis_value(xs[i], p, i, j, k, family, it2)
            h += sigmoid(float(p["mask_logits"][i, j])) * e
        out.append(h)
    return out


def standardize_row(h):
    m = sum(h) / len(h)
    v = sum((t - m) ** 2 for t in h) / len(h)
    return [(t - m) / math.sqrt(v + EPS) for t in h]


def forward(model, X):
    """Scalar-loop model output, one list per sample."""
    rows = []
    last = len(model.layers) - 1
    W = model.params["head.weight"]
    bias = model.params["head.bias"]
    for x in X:
        h = [float(v) for v in x]
        for li, layer in enumerate(model.layers):
            p = {k[len(layer.prefix):]: v for k, v in model.params.items() if k.startswith(layer.prefix)}
            h = layer_rows(h, p, layer.d_in, layer.d_out, layer.n_bases, layer.family, layer.it2)
            if li < last:
                h = standardize_row(h)
        rows.append([sum(float(W[o, j]) * h[j] for j in range(len(h))) + float(bias[o])
                     for o in range(W.shape[0])])
    return rows


def pfs(centers, sigmas, consequents, x):
    """Product-rule system by explicit enumeration of every rule."""
    n, m = len(centers), len(centers[0])
    num = den = 0.0
    for r, combo in enumerate(itertools.product(range(m), repeat=n)):
        tau = 1.0
        for i, c in enumerate(combo):
            tau *= gauss(x[i], centers[i][c], sigmas[i][c])
        num += tau * consequents[r]
        den += tau
    return num / den


def auroc(scores, positive):
    """Pairwise Mann-Whitney count with ties scoring one half."""
    pos = [s for s, p in zip(scores, positive) if p]
    neg = [s for s, p in zip(scores, positive) if not p]
    wins = 0.0
    for a in pos:
        for b in neg:
            wins += 1.0 if a > b else 0.5 if a == b else 0.0
    return wins / (len(pos) * len(neg))


def binary_entropy(p):
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def cosine_sum(cols):
    total = 0.0
    for a in range(len(cols)):
        for b in range(a + 1, len(cols)):
            dot = sum(u * v for u, v in zip(cols[a], cols[b]))
            na = math.sqrt(sum(u * u for u in cols[a]))
            nb = math.sqrt(sum(v * v for v in cols[b]))
            total += dot / max(na * nb, 1e-12)
    return total


def matmul(a, b):
    return [[sum(a[i][t] * b[t][j] for t in range(len(b))) for j in range(len(b[0]))]
            for i in range(len(a))]
