"""Fully-connected networks with layer normalization and Swish activations.

Parameters live in one flat float64 vector. ``NetworkSpec.layout`` maps
each weight, bias and normalization affine onto slices of that vector, so
gradients come back in exactly the same shape and can be fed to traces and
optimizers without any packing step.

The per-sample forward and backward passes are small enough that Python
call overhead dominates a numpy version, so both run as numba kernels over
the flat vector; :func:`forward` and :func:`backward` are thin wrappers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, NamedTuple

import numba
import numpy as np

VAR_FLOOR = 1e-12
MAPPINGS = ("identity", "softplus", "softplus_plus_two")
_POS_FLOOR = float(np.finfo(np.float64).tiny)
_TWO_FLOOR = float(np.nextafter(2.0, 3.0))


class Head(NamedTuple):
    name: str
    dim: int
    mapping: str = "identity"


@dataclass(frozen=True)
class NetworkSpec:
    """Topology of a network: ``hidden_layers`` blocks of
    affine -> layer norm -> Swish, followed by one affine+mapping per head."""

    input_dim: int
    hidden_layers: int
    hidden_width: int
    heads: tuple[Head, ...]
    layer_norm_affine: bool = True

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(Head(*h) for h in self.heads))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.hidden_layers < 1:
            raise ValueError(f"hidden_layers must be >= 1, got {self.hidden_layers}")
        if self.hidden_width < 1:
            raise ValueError(f"hidden_width must be >= 1, got {self.hidden_width}")
        if not self.heads:
            raise ValueError("at least one head is required")
        names = [h.name for h in self.heads]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate head names: {names}")
        for h in self.heads:
            if h.dim < 1:
                raise ValueError(f"head {h.name!r} has dim {h.dim}")
            if h.mapping not in MAPPINGS:
                raise ValueError(f"head {h.name!r}: unknown mapping {h.mapping!r}")

    @cached_property
    def layout(self) -> dict[str, tuple[slice, tuple[int, ...]]]:
        """Name -> (slice into the flat vector, array shape)."""
        out: dict[str, tuple[slice, tuple[int, ...]]] = {}
        pos = 0

        def put(name, shape):
            nonlocal pos
            size = int(np.prod(shape))
            out[name] = (slice(pos, pos + size), shape)
            pos += size

        fan_in = self.input_dim
        n = self.hidden_width
        for i in range(self.hidden_layers):
            put(f"W{i}", (fan_in, n))
            put(f"b{i}", (n,))
            if self.layer_norm_affine:
                put(f"gain{i}", (n,))
                put(f"offset{i}", (n,))
            fan_in = n
        for h in self.heads:
            put(f"W_{h.name}", (n, h.dim))
            put(f"b_{h.name}", (h.dim,))
        return out

    @cached_property
    def n_params(self) -> int:
        return max(s.stop for s, _ in self.layout.values())

    @cached_property
    def output_dim(self) -> int:
        return sum(h.dim for h in self.heads)

    def unpack(self, params: np.ndarray) -> dict[str, np.ndarray]:
        """Views into ``params`` keyed by layout name (no copies)."""
        if params.shape != (self.n_params,):
            raise ValueError(
                f"expected {self.n_params} parameters, got shape {params.shape}"
            )
        return {k: params[s].reshape(shape) for k, (s, shape) in self.layout.items()}

    @cached_property
    def _tables(self):
        lay = self.layout
        layers = np.full((self.hidden_layers, 4), -1, dtype=np.int64)
        for i in range(self.hidden_layers):
            layers[i, 0] = lay[f"W{i}"][0].start
            layers[i, 1] = lay[f"b{i}"][0].start
            if self.layer_norm_affine:
                layers[i, 2] = lay[f"gain{i}"][0].start
                layers[i, 3] = lay[f"offset{i}"][0].start
        heads = np.zeros((len(self.heads), 5), dtype=np.int64)
        start = 0
        for j, h in enumerate(self.heads):
            heads[j] = (
                lay[f"W_{h.name}"][0].start,
                lay[f"b_{h.name}"][0].start,
                h.dim,
                MAPPINGS.index(h.mapping),
                start,
            )
            start += h.dim
        return layers, heads

    @cached_property
    def _head_slices(self) -> dict[str, slice]:
        out, start = {}, 0
        for h in self.heads:
            out[h.name] = slice(start, start + h.dim)
            start += h.dim
        return out


@dataclass
class ForwardCache:
    """Everything the backward pass needs; rows are hidden layers."""

    x: np.ndarray
    pre_norm: np.ndarray
    normed: np.ndarray  # standardized, before the affine
    inv_std: np.ndarray
    floored: np.ndarray
    affine_out: np.ndarray
    hidden: np.ndarray
    head_pre: np.ndarray  # all heads concatenated, before mapping


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def swish(z):
    return z * _sigmoid(z)


def softplus(z):
    return np.logaddexp(0.0, z)


def init_network(spec: NetworkSpec, seed) -> np.ndarray:
    """Uniform fan-in weights, zero biases, unit gains, zero offsets."""
    rng = np.random.default_rng(seed)
    params = np.zeros(spec.n_params)
    for name, arr in spec.unpack(params).items():
        if name.startswith("W"):
            bound = 1.0 / np.sqrt(arr.shape[0])
            arr[...] = rng.uniform(-bound, bound, size=arr.shape)
        elif name.startswith("gain"):
            arr[...] = 1.0
    return params


def layer_norm(z: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """Standardize ``z`` across its units. Returns (normed, 1/std, floored)."""
    centered = z - z.mean()
    var = float(centered @ centered) / z.size
    floored = var < VAR_FLOOR
    inv_std = 1.0 / np.sqrt(VAR_FLOOR if floored else var)
    return centered * inv_std, inv_std, floored


def forward(
    params: np.ndarray, spec: NetworkSpec, x: np.ndarray
) -> tuple[dict[str, np.ndarray], ForwardCache]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.input_dim,):
        raise ValueError(f"input shape {x.shape} != ({spec.input_dim},)")
    if not np.isfinite(x).all():
        raise ValueError("non-finite network input")
    if params.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} parameters, got shape {params.shape}")
    layers, heads = spec._tables
    n_l, n = spec.hidden_layers, spec.hidden_width
    cache = ForwardCache(
        x=x,
        pre_norm=np.empty((n_l, n)),
        normed=np.empty((n_l, n)),
        inv_std=np.empty(n_l),
        floored=np.zeros(n_l, dtype=np.bool_),
        affine_out=np.empty((n_l, n)),
        hidden=np.empty((n_l, n)),
        head_pre=np.empty(spec.output_dim),
    )
    out = np.empty(spec.output_dim)
    _forward_kernel(
        params, x, layers, heads, VAR_FLOOR, cache.pre_norm, cache.normed,
        cache.inv_std, cache.floored, cache.affine_out, cache.hidden,
        cache.head_pre, out,
    )
    return {name: out[s] for name, s in spec._head_slices.items()}, cache


def backward(
    params: np.ndarray,
    spec: NetworkSpec,
    cache: ForwardCache,
    head_grads: Mapping[str, np.ndarray],
    out: np.ndarray | None = None,
) -> np.ndarray:
    """Gradient of sum_heads <head_grads[h], output[h]> w.r.t. ``params``.

    Heads missing from ``head_grads`` contribute nothing. ``out``, when
    given, receives the gradient in place (it may be a slice of a larger
    vector).
    """
    g_out = np.zeros(spec.output_dim)
    slices = spec._head_slices
    for name, g in head_grads.items():
        if name not in slices:
            raise ValueError(f"unknown head {name!r}")
        g = np.asarray(g, dtype=np.float64).reshape(-1)
        s = slices[name]
        if g.shape != (s.stop - s.start,):
            raise ValueError(f"head {name!r}: gradient shape {g.shape} != ({s.stop - s.start},)")
        g_out[s] = g
    if cache.hidden.shape != (spec.hidden_layers, spec.hidden_width):
        raise ValueError("forward cache does not match the network spec")
    if out is None:
        out = np.empty(spec.n_params)
    elif out.shape != (spec.n_params,):
        raise ValueError(f"gradient buffer shape {out.shape} != ({spec.n_params},)")
    layers, heads = spec._tables
    _backward_kernel(
        params, cache.x, layers, heads, cache.normed, cache.inv_std,
        cache.floored, cache.affine_out, cache.hidden, cache.head_pre, g_out, out,
    )
    return out


@numba.njit(cache=True)
def _sig(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@numba.njit(cache=True)
def _forward_kernel(p, x, layers, heads, var_floor, pre, normed, inv_std,
                    floored, yv, hv, head_pre, out):
    n_l, n = hv.shape
    inp = x
    for i in range(n_l):
        w0, b0, g0, o0 = layers[i, 0], layers[i, 1], layers[i, 2], layers[i, 3]
        z = pre[i]
        for k in range(n):
            z[k] = p[b0 + k]
        for j in range(inp.shape[0]):
            xj = inp[j]
            row = w0 + j * n
            for k in range(n):
                z[k] += xj * p[row + k]
        mean = 0.0
        for k in range(n):
            mean += z[k]
        mean /= n
        var = 0.0
        for k in range(n):
            d = z[k] - mean
            var += d * d
        var /= n
        if var < var_floor:
            floored[i] = True
            var = var_floor
        inv = 1.0 / np.sqrt(var)
        inv_std[i] = inv
        for k in range(n):
            zh = (z[k] - mean) * inv
            normed[i, k] = zh
            y = zh * p[g0 + k] + p[o0 + k] if g0 >= 0 else zh
            yv[i, k] = y
            hv[i, k] = y * _sig(y)
        inp = hv[i]
    top = hv[n_l - 1]
    for hi in range(heads.shape[0]):
        w0, b0, dim, mapping, start = heads[hi, 0], heads[hi, 1], heads[hi, 2], heads[hi, 3], heads[hi, 4]
        for o in range(dim):
            acc = p[b0 + o]
            for j in range(n):
                acc += top[j] * p[w0 + j * dim + o]
            head_pre[start + o] = acc
            if mapping == 0:
                out[start + o] = acc
            else:
                sp = max(acc, 0.0) + np.log1p(np.exp(-abs(acc)))
                # floors keep the bounds strict once softplus rounds away
                if mapping == 1:
                    out[start + o] = max(sp, _POS_FLOOR)
                else:
                    out[start + o] = max(2.0 + sp, _TWO_FLOOR)


@numba.njit(cache=True)
def _backward_kernel(p, x, layers, heads, normed, inv_std, floored, yv, hv,
                     head_pre, g_out, grad):
    n_l, n = hv.shape
    top = hv[n_l - 1]
    dh = np.zeros(n)
    for hi in range(heads.shape[0]):
        w0, b0, dim, mapping, start = heads[hi, 0], heads[hi, 1], heads[hi, 2], heads[hi, 3], heads[hi, 4]
        for o in range(dim):
            dz = g_out[start + o]
            if mapping != 0:
                dz *= _sig(head_pre[start + o])
            grad[b0 + o] = dz
            for j in range(n):
                grad[w0 + j * dim + o] = top[j] * dz
                dh[j] += p[w0 + j * dim + o] * dz
    dzh = np.empty(n)
    dz = np.empty(n)
    for i in range(n_l - 1, -1, -1):
        w0, b0, g0, o0 = layers[i, 0], layers[i, 1], layers[i, 2], layers[i, 3]
        mean_d = 0.0
        dot = 0.0
        for k in range(n):
            y = yv[i, k]
            s = _sig(y)
            dy = dh[k] * (s * (1.0 + y * (1.0 - s)))
            if g0 >= 0:
                grad[g0 + k] = dy * normed[i, k]
                grad[o0 + k] = dy
                dzh[k] = dy * p[g0 + k]
            else:
                dzh[k] = dy
            mean_d += dzh[k]
            dot += dzh[k] * normed[i, k]
        mean_d /= n
        dot /= n
        inv = inv_std[i]
        for k in range(n):
            v = dzh[k] - mean_d
            if not floored[i]:
                v -= normed[i, k] * dot
            dz[k] = v * inv
            grad[b0 + k] = dz[k]
        inp = x if i == 0 else hv[i - 1]
        for j in range(inp.shape[0]):
            xj = inp[j]
            row = w0 + j * n
            acc = 0.0
            for k in range(n):
                grad[row + k] = xj * dz[k]
                acc += p[row + k] * dz[k]
            if i > 0:
                dh[j] = acc
