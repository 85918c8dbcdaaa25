"""Learnable normalized-difference features over all channel pairs.

For every pair (i, j) of input channels with i < j the layer computes

    N_ij = (sa * b_i - sb * b_j) / (sa * b_i + sb * b_j + eps)

where sa = softplus(alpha_ij) and sb = softplus(beta_ij) are learned
positive coupling coefficients and eps > 0 keeps the denominator bounded
away from zero. With alpha == beta the output reduces (in the eps -> 0
limit) to the classical normalized difference (b_i - b_j) / (b_i + b_j):
bounded in [-1, 1] and invariant to a common positive rescaling of the
inputs.

The backward passes use closed-form partial derivatives. Writing
A = sa*b_i - sb*b_j and B = sa*b_i + sb*b_j + eps, the quotient rule plus
the identities B - A = 2*sb*b_j + eps and B + A = 2*sa*b_i + eps give

    dN/dalpha =  sigmoid(alpha) * b_i * (2*sb*b_j + eps) / B^2
    dN/dbeta  = -sigmoid(beta)  * b_j * (2*sa*b_i + eps) / B^2
    dN/db_i   =  sa * (2*sb*b_j + eps) / B^2
    dN/db_j   = -sb * (2*sa*b_i + eps) / B^2

Two generalizations accept inputs of any sign:

* ``nd_forward_signed`` keeps the raw numerator but replaces each |b| in
  the denominator with the smooth stand-in sqrt(b^2 + eps);
* ``nd_forward_softplus`` maps inputs through softplus first and reuses
  the nonnegative formulation on the transformed values.

All forwards accept a single channel vector of shape (n,) or a batch of
shape (batch, n). Parameter gradients are summed over the batch axis;
input gradients keep the input's shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ndmath import sigmoid, softplus

DEFAULT_EPS = 1e-8

__all__ = [
    "DEFAULT_EPS",
    "PairIndexer",
    "NdParams",
    "NdCache",
    "NdSignedCache",
    "NdSoftplusCache",
    "NdGradients",
    "AttentionCache",
    "AttentionGradients",
    "pair_count",
    "pair_index",
    "nd_forward",
    "nd_backward",
    "nd_forward_signed",
    "nd_backward_signed",
    "nd_forward_softplus",
    "nd_backward_softplus",
    "attention_gate",
    "attention_gate_backward",
]


def pair_count(n_bands: int) -> int:
    """Number of unordered channel pairs, n*(n-1)/2."""
    if n_bands < 2:
        raise ValueError(f"need at least 2 bands, got {n_bands}")
    return n_bands * (n_bands - 1) // 2


def pair_index(i: int, j: int, n_bands: int) -> int:
    """Lexicographic rank of the pair (i, j), i < j, among all pairs.

    The rank is the position of (i, j) when pairs are listed as
    (0,1), (0,2), ..., (0,n-1), (1,2), ... Raises ValueError unless
    0 <= i < j < n_bands.
    """
    if not (0 <= i < j < n_bands):
        raise ValueError(f"invalid pair ({i}, {j}) for {n_bands} bands")
    return i * (2 * n_bands - i - 1) // 2 + (j - i - 1)


class PairIndexer:
    """Fixed lexicographic enumeration of all (i, j) channel pairs, i < j."""

    def __init__(self, n_bands: int):
        self.n_bands = int(n_bands)
        self.n_pairs = pair_count(self.n_bands)
        self.pairs = [
            (i, j) for i in range(self.n_bands) for j in range(i + 1, self.n_bands)
        ]
        self.i_idx = np.array([p[0] for p in self.pairs], dtype=np.intp)
        self.j_idx = np.array([p[1] for p in self.pairs], dtype=np.intp)

    def __repr__(self) -> str:
        return f"PairIndexer(n_bands={self.n_bands}, n_pairs={self.n_pairs})"


@dataclass
class NdParams:
    """Per-pair coupling coefficients, in PairIndexer order."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if self.alpha.shape != self.beta.shape or self.alpha.ndim != 1:
            raise ValueError(
                f"alpha/beta must be matching 1-d arrays, got {self.alpha.shape} "
                f"and {self.beta.shape}"
            )
        if not (np.isfinite(self.alpha).all() and np.isfinite(self.beta).all()):
            raise ValueError("alpha/beta must be finite")

    @property
    def n_pairs(self) -> int:
        return self.alpha.shape[0]

    @classmethod
    def zeros(cls, n_pairs: int) -> "NdParams":
        """Classical-index warm start: softplus(0) on both sides of each pair."""
        return cls(np.zeros(n_pairs), np.zeros(n_pairs))

    def copy(self) -> "NdParams":
        return NdParams(self.alpha.copy(), self.beta.copy())


@dataclass
class NdCache:
    """Forward quantities needed by the nonnegative backward pass."""

    sigma_alpha: np.ndarray  # (n_pairs,)
    sigma_beta: np.ndarray  # (n_pairs,)
    b_i: np.ndarray  # (batch, n_pairs)
    b_j: np.ndarray  # (batch, n_pairs)
    denom: np.ndarray  # (batch, n_pairs)
    indexer: PairIndexer
    eps: float
    single: bool  # True when forward saw a 1-d input


@dataclass
class NdSignedCache:
    """Forward quantities for the smooth-absolute-value backward pass."""

    sigma_alpha: np.ndarray
    sigma_beta: np.ndarray
    b_i: np.ndarray
    b_j: np.ndarray
    smooth_i: np.ndarray  # sqrt(b_i^2 + eps)
    smooth_j: np.ndarray
    numer: np.ndarray
    denom: np.ndarray
    indexer: PairIndexer
    eps: float
    single: bool


@dataclass
class NdSoftplusCache:
    """Wraps the nonnegative cache on softplus(inputs) plus the raw inputs."""

    inner: NdCache
    raw: np.ndarray  # (batch, n_bands), pre-softplus
    single: bool


@dataclass
class NdGradients:
    """Loss gradients: per-pair for the coefficients, per-band for inputs."""

    d_alpha: np.ndarray  # (n_pairs,)
    d_beta: np.ndarray  # (n_pairs,)
    d_input: np.ndarray  # same shape as the forward input


@dataclass
class AttentionCache:
    bands: np.ndarray
    weights: np.ndarray
    gate: np.ndarray  # sigmoid(W b + c)
    nd_outputs: np.ndarray
    single: bool


@dataclass
class AttentionGradients:
    d_weights: np.ndarray
    d_bias: np.ndarray
    d_bands: np.ndarray
    d_nd_outputs: np.ndarray


def _as_batch(x, name="input"):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        return a[None, :], True
    if a.ndim == 2:
        return a, False
    raise ValueError(f"{name} must be 1-d or 2-d, got shape {a.shape}")


def _check_params(params: NdParams, indexer: PairIndexer):
    if params.n_pairs != indexer.n_pairs:
        raise ValueError(
            f"params carry {params.n_pairs} pairs but input implies "
            f"{indexer.n_pairs}"
        )


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not (eps > 0 and np.isfinite(eps)):
        raise ValueError(f"eps must be a positive finite real, got {eps}")
    return eps


def nd_forward(bands, params: NdParams, eps: float = DEFAULT_EPS,
               indexer: PairIndexer | None = None):
    """Nonnegative-input forward pass over all channel pairs.

    Returns (outputs, cache) where outputs has one value in [-1, 1] per
    pair in lexicographic order. Rejects NaN and negative inputs; use
    ``nd_forward_signed`` or ``nd_forward_softplus`` for signed data.
    """
    eps = _check_eps(eps)
    batch, single = _as_batch(bands, "bands")
    if np.isnan(batch).any():
        raise ValueError("bands contain NaN")
    if (batch < 0).any():
        raise ValueError(
            "nd_forward requires nonnegative inputs; use the signed variant "
            "for data that may be negative"
        )
    idx = indexer if indexer is not None else PairIndexer(batch.shape[1])
    _check_params(params, idx)

    sa = softplus(params.alpha)
    sb = softplus(params.beta)
    b_i = batch[:, idx.i_idx]
    b_j = batch[:, idx.j_idx]
    numer = sa * b_i - sb * b_j
    denom = sa * b_i + sb * b_j + eps
    out = numer / denom
    cache = NdCache(sa, sb, b_i, b_j, denom, idx, eps, single)
    return (out[0] if single else out), cache


def nd_backward(cache: NdCache, upstream, params: NdParams,
                eps: float = DEFAULT_EPS) -> NdGradients:
    """Backward pass matching ``nd_forward``.

    ``upstream`` is dLoss/dN per pair, shaped like the forward output.
    Coefficient gradients are summed over the batch axis; each band's
    input gradient accumulates the contributions of all n-1 pairs that
    contain it.
    """
    eps = _check_eps(eps)
    idx = cache.indexer
    delta = np.asarray(upstream, dtype=np.float64)
    if cache.single:
        delta = delta[None, :]
    if delta.shape != cache.denom.shape:
        raise ValueError(
            f"upstream shape {delta.shape} does not match cached forward "
            f"shape {cache.denom.shape}"
        )

    s_alpha = sigmoid(params.alpha)
    s_beta = sigmoid(params.beta)
    denom_sq = cache.denom ** 2
    w_i = (2.0 * cache.sigma_beta * cache.b_j + eps) / denom_sq
    w_j = (2.0 * cache.sigma_alpha * cache.b_i + eps) / denom_sq

    d_alpha = (delta * s_alpha * cache.b_i * w_i).sum(axis=0)
    d_beta = -(delta * s_beta * cache.b_j * w_j).sum(axis=0)

    g_i = delta * cache.sigma_alpha * w_i
    g_j = -delta * cache.sigma_beta * w_j
    d_input = _scatter_pairs(g_i, g_j, idx, cache.denom.shape[0])
    if cache.single:
        d_input = d_input[0]
    return NdGradients(d_alpha, d_beta, d_input)


def _scatter_pairs(g_i, g_j, idx: PairIndexer, batch_size: int) -> np.ndarray:
    """Accumulate per-pair contributions into per-band gradients, pair order."""
    acc = np.zeros((idx.n_bands, batch_size))
    np.add.at(acc, idx.i_idx, g_i.T)
    np.add.at(acc, idx.j_idx, g_j.T)
    return acc.T


def nd_forward_signed(bands, params: NdParams, eps: float = DEFAULT_EPS,
                      indexer: PairIndexer | None = None):
    """Signed-input forward: smooth absolute values in the denominator.

    N_ij = (sa*b_i - sb*b_j) / (sa*sqrt(b_i^2+eps) + sb*sqrt(b_j^2+eps) + eps).
    The denominator is strictly positive and dominates |numerator|, so
    outputs stay in [-1, 1] for inputs of any sign.
    """
    eps = _check_eps(eps)
    batch, single = _as_batch(bands, "bands")
    if np.isnan(batch).any():
        raise ValueError("bands contain NaN")
    idx = indexer if indexer is not None else PairIndexer(batch.shape[1])
    _check_params(params, idx)

    sa = softplus(params.alpha)
    sb = softplus(params.beta)
    b_i = batch[:, idx.i_idx]
    b_j = batch[:, idx.j_idx]
    smooth_i = np.sqrt(b_i ** 2 + eps)
    smooth_j = np.sqrt(b_j ** 2 + eps)
    numer = sa * b_i - sb * b_j
    denom = sa * smooth_i + sb * smooth_j + eps
    out = numer / denom
    cache = NdSignedCache(sa, sb, b_i, b_j, smooth_i, smooth_j, numer, denom,
                          idx, eps, single)
    return (out[0] if single else out), cache


def nd_backward_signed(cache: NdSignedCache, upstream, params: NdParams,
                       eps: float = DEFAULT_EPS) -> NdGradients:
    """Backward pass matching ``nd_forward_signed``.

    Quotient rule with d/db sqrt(b^2+eps) = b / sqrt(b^2+eps); the tidy
    difference identities of the nonnegative case no longer apply, so the
    raw form (B*dA - A*dB) / B^2 is used for each partial.
    """
    eps = _check_eps(eps)
    idx = cache.indexer
    delta = np.asarray(upstream, dtype=np.float64)
    if cache.single:
        delta = delta[None, :]
    if delta.shape != cache.denom.shape:
        raise ValueError(
            f"upstream shape {delta.shape} does not match cached forward "
            f"shape {cache.denom.shape}"
        )

    s_alpha = sigmoid(params.alpha)
    s_beta = sigmoid(params.beta)
    A, B = cache.numer, cache.denom
    denom_sq = B ** 2

    d_alpha = (delta * s_alpha * (cache.b_i * B - A * cache.smooth_i)
               / denom_sq).sum(axis=0)
    d_beta = (delta * s_beta * (-cache.b_j * B - A * cache.smooth_j)
              / denom_sq).sum(axis=0)

    g_i = delta * cache.sigma_alpha * (B - A * cache.b_i / cache.smooth_i) / denom_sq
    g_j = -delta * cache.sigma_beta * (B + A * cache.b_j / cache.smooth_j) / denom_sq
    d_input = _scatter_pairs(g_i, g_j, idx, B.shape[0])
    if cache.single:
        d_input = d_input[0]
    return NdGradients(d_alpha, d_beta, d_input)


def nd_forward_softplus(bands, params: NdParams, eps: float = DEFAULT_EPS,
                        indexer: PairIndexer | None = None):
    """Signed-input forward: inputs pass through softplus first.

    The transformed values softplus(b) are strictly positive, so the
    nonnegative formulation applies unchanged to them; outputs are in
    (-1, 1). Nonlinear in the inputs, unlike the smooth-|b| variant.
    """
    batch, single = _as_batch(bands, "bands")
    if np.isnan(batch).any():
        raise ValueError("bands contain NaN")
    transformed = softplus(batch)
    out, inner = nd_forward(transformed, params, eps, indexer)
    cache = NdSoftplusCache(inner=inner, raw=batch, single=single)
    return (out[0] if single else out), cache


def nd_backward_softplus(cache: NdSoftplusCache, upstream, params: NdParams,
                         eps: float = DEFAULT_EPS) -> NdGradients:
    """Backward pass matching ``nd_forward_softplus``.

    Chains the nonnegative backward (on the transformed inputs) with the
    softplus derivative: d softplus(b)/db = sigmoid(b).
    """
    delta = np.asarray(upstream, dtype=np.float64)
    if cache.single and delta.ndim == 1:
        delta = delta[None, :]  # inner cache is always batch-shaped
    grads = nd_backward(cache.inner, delta, params, eps)
    d_raw = grads.d_input * sigmoid(cache.raw)
    if cache.single:
        d_raw = d_raw[0]
    return NdGradients(grads.d_alpha, grads.d_beta, d_raw)


def attention_gate(bands, weights, bias, nd_outputs):
    """Scale pair outputs by input-dependent gates sigmoid(W @ bands + c).

    ``weights`` has one row per pair and one column per band; ``bias`` has
    one entry per pair. Gates lie in (0, 1), so gated outputs keep the
    [-1, 1] bound of their inputs. Returns (gated, cache).
    """
    batch, single = _as_batch(bands, "bands")
    outputs, out_single = _as_batch(nd_outputs, "nd_outputs")
    if single != out_single or batch.shape[0] != outputs.shape[0]:
        raise ValueError("bands and nd_outputs disagree on batch shape")
    W = np.asarray(weights, dtype=np.float64)
    c = np.asarray(bias, dtype=np.float64)
    if W.ndim != 2 or W.shape != (outputs.shape[1], batch.shape[1]):
        raise ValueError(
            f"attention weights must be (n_pairs, n_bands) = "
            f"({outputs.shape[1]}, {batch.shape[1]}), got {W.shape}"
        )
    if c.shape != (outputs.shape[1],):
        raise ValueError(
            f"attention bias must have length {outputs.shape[1]}, got {c.shape}"
        )
    gate = sigmoid(batch @ W.T + c)
    gated = gate * outputs
    cache = AttentionCache(batch, W, gate, outputs, single)
    return (gated[0] if single else gated), cache


def attention_gate_backward(cache: AttentionCache, upstream) -> AttentionGradients:
    """Backward pass for the attention gate.

    Splits the upstream gradient between the gate path (through the
    sigmoid's q*(1-q) factor, reaching W, c and the raw bands) and the
    gated pair outputs themselves.
    """
    delta = np.asarray(upstream, dtype=np.float64)
    if cache.single:
        delta = delta[None, :]
    if delta.shape != cache.gate.shape:
        raise ValueError(
            f"upstream shape {delta.shape} does not match gate shape "
            f"{cache.gate.shape}"
        )
    d_nd = delta * cache.gate
    d_pre = delta * cache.nd_outputs * cache.gate * (1.0 - cache.gate)
    d_weights = d_pre.T @ cache.bands
    d_bias = d_pre.sum(axis=0)
    d_bands = d_pre @ cache.weights
    if cache.single:
        d_nd = d_nd[0]
        d_bands = d_bands[0]
    return AttentionGradients(d_weights, d_bias, d_bands, d_nd)
