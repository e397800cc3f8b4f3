"""Reference implementations and numeric helpers shared by the tests."""

from __future__ import annotations

import numpy as np

from persiland.landscape import LandscapeSpec, _tents
from persiland.topology import compute_pairs


def rel_error(analytic, numeric) -> float:
    """Norm-wise relative error, robust to entries that are exactly zero."""
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - n) / scale)


def central_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Gradient of the scalar function ``f`` at ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        g[i] = (fp - fm) / (2 * h)
    return grad


def naive_conv(x, w, b, pool, activation="relu"):
    """Triple-loop convolution, nonlinearity and max pooling for one (C, N) map."""
    K, C, L = w.shape
    N = x.shape[1]
    n_valid = N - L + 1
    pre = np.zeros((K, n_valid))
    for k in range(K):
        for t in range(n_valid):
            acc = b[k]
            for c in range(C):
                for ell in range(L):
                    acc += w[k, c, ell] * x[c, t + ell]
            pre[k, t] = acc
    act = np.maximum(pre, 0.0) if activation == "relu" else pre
    n_out = n_valid // pool
    out = np.zeros((K, n_out))
    for k in range(K):
        for j in range(n_out):
            out[k, j] = max(act[k, j * pool : (j + 1) * pool])
    return out


def naive_local_maxima(values) -> int:
    """Count runs of equal values whose neighbours on both sides are strictly lower."""
    v = list(values)
    runs = []
    for x in v:
        if runs and runs[-1][0] == x:
            runs[-1][1] += 1
        else:
            runs.append([x, 1])
    count = 0
    for i, (x, _) in enumerate(runs):
        left = runs[i - 1][0] if i > 0 else -np.inf
        right = runs[i + 1][0] if i + 1 < len(runs) else -np.inf
        if x > left and x > right:
            count += 1
    return count


def is_generic(signal, spec: LandscapeSpec, tol: float = 1e-6) -> bool:
    """True when sampling ``signal`` is differentiable at every grid point.

    Signal values must be pairwise distinct, no grid point may sit within
    ``tol`` of a tent's death, apex or birth, and no two tent values at a
    grid point may be within ``tol`` of each other.
    """
    s = np.asarray(signal, dtype=np.float64)
    if np.min(np.diff(np.sort(s))) < tol:
        return False
    d = compute_pairs(s)
    grid = spec.grid
    for knots in (d.deaths, (d.births + d.deaths) / 2, d.births):
        if np.any(np.abs(grid[None, :] - knots[:, None]) < tol):
            return False
    vals, _ = _tents(d.births, d.deaths, grid)
    for q in range(grid.size):
        col = np.sort(vals[:, q])[::-1][: spec.num_pieces + 1]
        col = col[col > 0]
        if col.size > 1 and np.min(-np.diff(col)) < tol:
            return False
    return True


def mann_whitney_oracle(scores, labels) -> float:
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def ap_oracle(scores, labels) -> float:
    order = sorted(range(len(scores)), key=lambda i: -scores[i])  # sorted() is stable
    hits = 0
    precisions = []
    for rank, i in enumerate(order, start=1):
        if labels[i] == 1:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / len(precisions)


def tiny_pcnn_spec(branch: str = "pcnn"):
    """2 early filters (L=4, S=2), T=8, P=2, Q=4, 2 middle filters, one late layer, 2 tags."""
    from persiland.network import ConvLayerSpec, NetworkSpec, PersistenceLayerSpec

    return NetworkSpec(
        input_channels=3,
        num_tags=2,
        branch=branch,
        early=[ConvLayerSpec(2, 4, 2)],
        middle=ConvLayerSpec(2, 1, 8) if branch != "pnn" else None,
        persistence=PersistenceLayerSpec(LandscapeSpec(0.0, 2.0, 2, 4), 8) if branch != "cnn" else None,
        late=[ConvLayerSpec(2, 1, 1)],
    ).validate()


def end_to_end_errors(network, x, y) -> dict[str, float]:
    """Relative error of every parameter and the input gradient against central differences."""
    _, grads, grad_x = network.loss_and_grad(x, y)

    def loss_at(name):
        def f(v):
            saved = network.params[name]
            network.params[name] = v
            try:
                return network.loss_and_grad(x, y)[0]
            finally:
                network.params[name] = saved
        return f

    errors = {}
    for name, g in grads.items():
        errors[name] = rel_error(g, central_difference(loss_at(name), network.params[name].copy()))
    errors["input"] = rel_error(grad_x, central_difference(lambda v: network.loss_and_grad(v, y)[0], x.copy()))
    return errors
