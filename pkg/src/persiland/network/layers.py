"""Differentiable layers operating on batched feature maps.

All layers take arrays of shape ``(batch, channels, time)`` and return the
output together with a cache consumed by the matching backward function.
Trailing frames that do not fill a whole pooling window or persistence
segment are dropped and receive zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import InvalidInputError
from ..landscape import LandscapeSpec, sample_landscape
from ..topology import compute_pairs

__all__ = [
    "ConvLayerSpec",
    "PersistenceLayerSpec",
    "conv1d_forward",
    "conv1d_backward",
    "persistence_forward",
    "persistence_backward",
    "concat_forward",
    "concat_backward",
    "mean_pool_forward",
    "mean_pool_backward",
    "dropout_forward",
    "sigmoid",
]


@dataclass(frozen=True)
class ConvLayerSpec:
    """``num_filters`` filters of length ``filter_length`` followed by max pooling of width ``pool_size``."""

    num_filters: int
    filter_length: int = 1
    pool_size: int = 1

    def violations(self, name: str) -> list[str]:
        out = []
        for field in ("num_filters", "filter_length", "pool_size"):
            v = getattr(self, field)
            if not isinstance(v, (int, np.integer)) or v < 1:
                out.append(f"{name}.{field} must be a positive integer (got {v!r})")
        return out

    def output_length(self, n: int) -> int:
        return max(n - self.filter_length + 1, 0) // self.pool_size

    def to_list(self) -> list[int]:
        return [int(self.num_filters), int(self.filter_length), int(self.pool_size)]


@dataclass(frozen=True)
class PersistenceLayerSpec:
    landscape: LandscapeSpec = LandscapeSpec()
    segment_length: int = 32

    @property
    def channels_per_filter(self) -> int:
        return self.landscape.num_pieces * self.landscape.num_samples

    def output_length(self, n: int) -> int:
        return n // self.segment_length

    def to_dict(self) -> dict:
        ls = self.landscape
        return {
            "c0": ls.c0,
            "c1": ls.c1,
            "pieces": ls.num_pieces,
            "samples": ls.num_samples,
            "segment_length": self.segment_length,
        }


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_batch(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[np.newaxis]
    if x.ndim != 3:
        raise InvalidInputError(f"expected (batch, channels, time) input, got shape {x.shape}")
    return x


def conv1d_forward(x, weight, bias, pool_size: int = 1, activation: str = "relu", name: str = "conv"):
    """Full-depth 1-D convolution, pointwise nonlinearity, non-overlapping max pooling.

    Parameters
    ----------
    x : ndarray of shape (B, C, N)
    weight : ndarray of shape (K, C, L)
    bias : ndarray of shape (K,)
    pool_size : int
        Pool width and stride ``S``; the remainder of ``N - L + 1`` modulo ``S`` is dropped.
    activation : {"relu", "linear"}

    Returns
    -------
    out : ndarray of shape (B, K, (N - L + 1) // S)
    cache : tuple
    """
    x = _as_batch(x)
    K, C, L = weight.shape
    B, Cx, N = x.shape
    if Cx != C:
        raise InvalidInputError(f"layer '{name}' expects {C} input channels, got {Cx}")
    n_valid = N - L + 1
    n_out = max(n_valid, 0) // pool_size
    if n_out < 1:
        raise InvalidInputError(
            f"input of length {N} is too short for layer '{name}' "
            f"(needs at least {L + pool_size - 1} frames)"
        )
    windows = sliding_window_view(x, L, axis=2)  # (B, C, n_valid, L)
    pre = np.einsum("bctl,kcl->bkt", windows, weight, optimize=True) + bias[None, :, None]
    if activation == "relu":
        act = np.maximum(pre, 0.0)
    elif activation == "linear":
        act = pre
    else:
        raise InvalidInputError(f"unknown activation {activation!r}")
    blocks = act[:, :, : n_out * pool_size].reshape(B, K, n_out, pool_size)
    # argmax takes the first maximum, routing ties to the earliest frame
    arg = blocks.argmax(axis=3)
    out = np.take_along_axis(blocks, arg[..., None], axis=3)[..., 0]
    cache = (x, weight, pre, arg, pool_size, activation)
    return out, cache


def conv1d_backward(grad_out, cache):
    """Gradients of :func:`conv1d_forward` w.r.t. input, weight and bias."""
    x, weight, pre, arg, pool_size, activation = cache
    B, K, n_out = arg.shape
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != (B, K, n_out):
        raise InvalidInputError(f"upstream gradient shape {grad_out.shape} != output shape {(B, K, n_out)}")
    _, C, L = weight.shape
    n_valid = pre.shape[2]

    g_act = np.zeros_like(pre)
    positions = arg + (np.arange(n_out) * pool_size)[None, None, :]
    np.put_along_axis(g_act, positions, grad_out, axis=2)
    g_pre = g_act * (pre > 0.0) if activation == "relu" else g_act

    windows = sliding_window_view(x, L, axis=2)
    grad_w = np.einsum("bkt,bctl->kcl", g_pre, windows, optimize=True)
    grad_b = g_pre.sum(axis=(0, 2))
    grad_x = np.zeros_like(x)
    for ell in range(L):
        grad_x[:, :, ell : ell + n_valid] += np.einsum("bkt,kc->bct", g_pre, weight[:, :, ell], optimize=True)
    return grad_x, grad_w, grad_b


def persistence_forward(x, spec: PersistenceLayerSpec, name: str = "persistence"):
    """Sampled persistence landscape of every channel and length-``T`` segment.

    Output channel ``u * P * Q + k * Q + q`` holds entry ``(k, q)`` of the
    landscape of input channel ``u``; output frame ``s`` covers input frames
    ``[s * T, (s + 1) * T)``.
    """
    x = _as_batch(x)
    B, U, N = x.shape
    T = spec.segment_length
    n_seg = N // T
    if n_seg < 1:
        raise InvalidInputError(
            f"input of length {N} is too short for layer '{name}' (needs at least {T} frames)"
        )
    P, Q = spec.landscape.shape
    PQ = P * Q
    out = np.zeros((B, U * PQ, n_seg))
    out_idx, in_idx, signs = [], [], []
    block = np.arange(PQ)
    for b in range(B):
        for u in range(U):
            for s in range(n_seg):
                seg = x[b, u, s * T : (s + 1) * T]
                mat = sample_landscape(compute_pairs(seg), spec.landscape)
                out[b, u * PQ : (u + 1) * PQ, s] = mat.values.ravel()
                live = mat.sides.ravel() != 0
                if live.any():
                    ch = u * PQ + block[live]
                    out_idx.append((b * U * PQ + ch) * n_seg + s)
                    in_idx.append((b * U + u) * N + s * T + mat.source_index.ravel()[live])
                    signs.append(mat.sides.ravel()[live].astype(np.float64))
    if out_idx:
        routes = (np.concatenate(out_idx), np.concatenate(in_idx), np.concatenate(signs))
    else:
        routes = (np.zeros(0, np.intp), np.zeros(0, np.intp), np.zeros(0))
    cache = (x.shape, out.shape, routes)
    return out, cache


def persistence_backward(grad_out, cache):
    """Route each output gradient to the birth or death frame that owns it."""
    in_shape, out_shape, (out_idx, in_idx, signs) = cache
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != out_shape:
        raise InvalidInputError(f"upstream gradient shape {grad_out.shape} != output shape {out_shape}")
    grad_x = np.zeros(int(np.prod(in_shape)))
    np.add.at(grad_x, in_idx, signs * grad_out.ravel()[out_idx])
    return grad_x.reshape(in_shape)


def concat_forward(a, b):
    """Channel-wise concatenation of two maps with equal time length."""
    a = _as_batch(a)
    b = _as_batch(b)
    if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[2]:
        raise InvalidInputError(f"cannot concatenate maps of shapes {a.shape} and {b.shape}")
    return np.concatenate([a, b], axis=1), a.shape[1]


def concat_backward(grad_out, split: int):
    return grad_out[:, :split], grad_out[:, split:]


def mean_pool_forward(x):
    x = _as_batch(x)
    return x.mean(axis=2), x.shape[2]


def mean_pool_backward(grad_out, n_frames: int):
    return np.repeat(grad_out[:, :, None] / n_frames, n_frames, axis=2)


def dropout_forward(x, rate: float, rng: np.random.Generator):
    """Inverted dropout; returns the output and the scaled keep-mask."""
    if rate <= 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask
