"""Evidential output heads: per-node NIG parameters for features and
per-pair Beta evidence for topology, plus the point reconstructions.

The feature head runs four small MLPs on the latent embedding:

* gamma: three layers with tanh hiddens and a linear output;
* nu, beta: two layers, relu hidden and relu output, floored at NU_BETA_FLOOR;
* alpha: like nu but shifted by 1 + ALPHA_FLOOR so alpha > 1 strictly.

The topology head is one two-layer relu MLP on the concatenation
(z_i, z_j) of a canonical (i < j) pair, producing nonnegative evidence
(E, E_bar); Beta parameters are epsilon = E + 1, epsilon_bar = E_bar + 1.

The floors keep the uncertainty formulas (which divide by nu and by
alpha - 1) well defined for every possible weight setting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .errors import ContractError

# Floors applied after the relu outputs.
NU_BETA_FLOOR = 1e-6
ALPHA_FLOOR = 1e-4

# Initialization of the evidence (relu) stacks.  Two failure modes shape
# these choices.  First, while reconstruction error is still large every
# loss term pushes evidence down; output units driven below zero stop
# receiving gradient, and a stack that goes fully dead pins its parameter
# to the floor for every node with no way back.  So the output biases
# start positive, near where the stacks settle on typical data, and the
# hidden bias keeps the hidden layer active.  Second, with random output
# weights a node with an unusual embedding gets unusually LARGE evidence
# by sheer projection, the opposite of the intended "little evidence for
# odd inputs"; zeroed output weights remove that artifact, so any
# across-node contrast in the evidence is learned rather than sampled.
_HIDDEN_BIAS = 1.0
_OUTPUT_BIAS = {
    "nu": 2.0,
    "alpha": 2.5,
    "beta": 1.0,
    "pair": (3.0, 3.0),
}
_OUTPUT_WEIGHT_SCALE = 0.0


@dataclass
class NIGParams:
    """Per-node-and-dimension NIG parameters, all n x d tape tensors."""

    gamma: ad.Tensor
    nu: ad.Tensor
    alpha: ad.Tensor
    beta: ad.Tensor

    def check(self) -> None:
        if not (self.gamma.shape == self.nu.shape == self.alpha.shape == self.beta.shape):
            raise ContractError("NIG parameter shapes disagree")
        if np.min(self.nu.value) <= 0.0:
            raise ContractError("nu must be strictly positive")
        if np.min(self.alpha.value) <= 1.0:
            raise ContractError("alpha must exceed 1")
        if np.min(self.beta.value) <= 0.0:
            raise ContractError("beta must be strictly positive")


@dataclass
class BetaEvidence:
    """Beta parameters for a set of unordered node pairs.

    ``pairs`` is (P, 2) int64 with i < j; ``flags`` is the 0/1 is-edge
    indicator for the adjacency the evidence is evaluated against;
    ``eps`` and ``eps_bar`` are P x 1 tape tensors, each >= 1.
    """

    pairs: np.ndarray
    flags: np.ndarray
    eps: ad.Tensor
    eps_bar: ad.Tensor

    @property
    def count(self) -> int:
        return self.pairs.shape[0]


def canonicalize_pairs(pairs, n: int) -> np.ndarray:
    """Validate and sort pair indices so i < j in every row."""
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if arr.size:
        if arr.min() < 0 or arr.max() >= n:
            raise ContractError(f"pair index out of range for {n} nodes")
        if np.any(arr[:, 0] == arr[:, 1]):
            raise ContractError("pairs must join two distinct nodes")
    return np.sort(arr, axis=1)


def _mlp_keys(name: str, layers: int):
    for layer in range(layers):
        yield f"{name}.w{layer}", f"{name}.b{layer}"


def _init_mlp(params, rng, name, dims, relu_output):
    """Append one MLP's weights to params; relu stacks get live biases."""
    n_layers = len(dims) - 1
    for layer, (w_key, b_key) in enumerate(_mlp_keys(name, n_layers)):
        fan_in, fan_out = dims[layer], dims[layer + 1]
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        last = layer == n_layers - 1
        if relu_output:
            bias = _OUTPUT_BIAS[name] if last else _HIDDEN_BIAS
            if last:
                w *= _OUTPUT_WEIGHT_SCALE
        else:
            bias = 0.0
        params[w_key] = w
        bias_row = np.empty((1, fan_out))
        bias_row[:] = bias
        params[b_key] = bias_row


def _run_mlp(z, params, name, n_layers, hidden_act, output_act):
    h = z
    for layer, (w_key, b_key) in enumerate(_mlp_keys(name, n_layers)):
        h = ad.add_rowvec(ad.matmul(h, params[w_key]), params[b_key])
        act = output_act if layer == n_layers - 1 else hidden_act
        if act is not None:
            h = act(h)
    return h


def init_feature_head(
    latent_dim: int,
    out_dim: int,
    hidden_dim: int,
    seed: int,
    gamma_bias=None,
) -> dict[str, np.ndarray]:
    """Weights for the four NIG branches, keyed gamma/nu/alpha/beta.

    ``gamma_bias`` (length out_dim), typically the per-column feature
    means, presets the gamma output so the first epochs are not spent
    matching the gross feature location.
    """
    if min(latent_dim, out_dim, hidden_dim) < 1:
        raise ContractError("all head dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    _init_mlp(params, rng, "gamma", [latent_dim, hidden_dim, hidden_dim, out_dim], relu_output=False)
    if gamma_bias is not None:
        bias = np.asarray(gamma_bias, dtype=np.float64).reshape(-1)
        if bias.shape[0] != out_dim:
            raise ContractError(
                f"gamma_bias has {bias.shape[0]} entries for {out_dim} outputs"
            )
        if not np.all(np.isfinite(bias)):
            raise ContractError("gamma_bias must be finite")
        params["gamma.b2"][0, :] = bias
    for name in ("nu", "alpha", "beta"):
        _init_mlp(params, rng, name, [latent_dim, hidden_dim, out_dim], relu_output=True)
    return params


def feature_head(z: ad.Tensor, params: Mapping[str, ad.Tensor]) -> NIGParams:
    """NIG parameters for every node, floored into the valid region."""
    gamma = _run_mlp(z, params, "gamma", 3, ad.tanh, None)
    nu_raw = _run_mlp(z, params, "nu", 2, ad.relu, ad.relu)
    alpha_raw = _run_mlp(z, params, "alpha", 2, ad.relu, ad.relu)
    beta_raw = _run_mlp(z, params, "beta", 2, ad.relu, ad.relu)
    return NIGParams(
        gamma=gamma,
        nu=ad.add(nu_raw, NU_BETA_FLOOR),
        alpha=ad.add(alpha_raw, 1.0 + ALPHA_FLOOR),
        beta=ad.add(beta_raw, NU_BETA_FLOOR),
    )


def init_topology_head(
    latent_dim: int, hidden_dim: int, seed: int
) -> dict[str, np.ndarray]:
    """Weights for the pairwise evidence MLP (input width 2 * latent_dim)."""
    if min(latent_dim, hidden_dim) < 1:
        raise ContractError("all head dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    _init_mlp(params, rng, "pair", [2 * latent_dim, hidden_dim, 2], relu_output=True)
    return params


def topology_head(
    z: ad.Tensor,
    params: Mapping[str, ad.Tensor],
    pairs,
    flags,
) -> BetaEvidence:
    """Beta evidence for the requested unordered pairs.

    ``flags`` records, per pair, whether the adjacency being modeled has
    that edge; it rides along for the losses.  Pair order (i, j) versus
    (j, i) does not matter: indices are canonicalized to i < j first.
    """
    pair_arr = canonicalize_pairs(pairs, z.rows)
    flag_arr = np.asarray(flags, dtype=np.float64).reshape(-1)
    if flag_arr.shape[0] != pair_arr.shape[0]:
        raise ContractError(
            f"{flag_arr.shape[0]} flags for {pair_arr.shape[0]} pairs"
        )
    if flag_arr.size and not np.all((flag_arr == 0.0) | (flag_arr == 1.0)):
        raise ContractError("flags must be 0 or 1")

    zi = ad.gather_rows(z, pair_arr[:, 0])
    zj = ad.gather_rows(z, pair_arr[:, 1])
    evidence = _run_mlp(
        ad.concat_cols(zi, zj), params, "pair", 2, ad.relu, ad.relu
    )
    eps = ad.add(ad.slice_cols(evidence, 0, 1), 1.0)
    eps_bar = ad.add(ad.slice_cols(evidence, 1, 2), 1.0)
    return BetaEvidence(pairs=pair_arr, flags=flag_arr, eps=eps, eps_bar=eps_bar)


def reconstruct_features(p: NIGParams) -> ad.Tensor:
    """Point reconstruction of the features: the NIG mean, gamma itself."""
    return p.gamma


def reconstruct_topology(e: BetaEvidence) -> ad.Tensor:
    """Per-pair edge probability: the Beta mean eps / (eps + eps_bar)."""
    return ad.div(e.eps, ad.add(e.eps, e.eps_bar))
