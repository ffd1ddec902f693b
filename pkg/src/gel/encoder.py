"""Graph-convolutional encoder mapping (features, normalized adjacency)
to latent node embeddings.

Each layer computes ``A_norm @ H @ W``; hidden layers apply tanh, the
final layer is linear so the latent space is unconstrained in sign.
Layers carry no bias terms.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import autodiff as ad
from .errors import ContractError, DimensionError


def default_latent_dim(d: int) -> int:
    """16 for narrow feature spaces (d <= 32), 64 otherwise."""
    return 16 if d <= 32 else 64


def init_encoder(
    d: int, hidden_dims: Sequence[int], latent_dim: int, seed: int
) -> list[np.ndarray]:
    """Per-layer weight matrices d -> hidden... -> latent_dim.

    Entries are uniform on [-sqrt(6/fan_in), sqrt(6/fan_in)]; identical
    seeds give bit-identical weights.
    """
    dims = [int(d), *[int(h) for h in hidden_dims], int(latent_dim)]
    if any(v < 1 for v in dims):
        raise ContractError(f"all layer dimensions must be >= 1, got {dims}")
    rng = np.random.default_rng(seed)
    weights = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    return weights


def encode(
    features: ad.Tensor, a_norm: ad.Tensor, weights: Sequence[ad.Tensor]
) -> ad.Tensor:
    """Latent embedding Z, recorded on the operands' tape."""
    if not weights:
        raise ContractError("encoder needs at least one layer")
    n = features.rows
    if a_norm.shape != (n, n):
        raise DimensionError(
            f"adjacency shape {a_norm.shape} does not match {n} nodes"
        )
    h = features
    for layer, w in enumerate(weights):
        h = ad.matmul(ad.matmul(a_norm, h), w)
        if layer < len(weights) - 1:
            h = ad.tanh(h)
    return h
