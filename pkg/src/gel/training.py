"""End-to-end training: perturb, encode, heads, losses, gradient step.

Each epoch draws a fresh perturbation of the graph, runs the forward
pass on a new tape, backpropagates the weighted total loss and applies
one Adam update (decay 0.9 / 0.999, stability offset 1e-8, bias
corrected).  Everything is a pure function of (graph, config), so a
rerun with the same seed reproduces the model bit for bit.

The perturbed graph feeds the encoder and defines the adjacency flags
of the topology terms; the clean features remain the regression targets
(denoising convention).  Scoring later encodes the clean graph.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .encoder import default_latent_dim, encode, init_encoder
from .errors import ContractError, NumericalAbort
from .graphdata import (
    AttributedGraph,
    PerturbationConfig,
    edges_from_adjacency,
    normalize_adjacency,
    perturb,
)
from .heads import (
    feature_head,
    init_feature_head,
    init_topology_head,
    topology_head,
)
from .losses import (
    FULL_PAIR_THRESHOLD,
    LossParts,
    LossWeights,
    beta_nll,
    build_pair_set,
    feature_evidence_reg,
    nig_nll,
    topology_evidence_reg,
    total_loss,
)

# Child-stream tags appended to the master seed so the independent random
# streams (weight init, pair sampling) never collide with each other.
_STREAM_ENCODER = 108301
_STREAM_FEATURE_HEAD = 108302
_STREAM_TOPOLOGY_HEAD = 108303
_STREAM_PAIRS = 700001

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run.

    ``latent_dim`` defaults by feature width (16 if d <= 32 else 64);
    ``hidden_dims`` defaults to one hidden layer of twice the latent
    width; ``head_hidden`` defaults to the latent width.
    """

    latent_dim: Optional[int] = None
    hidden_dims: Optional[Sequence[int]] = None
    head_hidden: Optional[int] = None
    epochs: int = 200
    learning_rate: float = 0.01
    loss_weights: LossWeights = field(default_factory=LossWeights)
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    negative_sample_k: int = 5
    full_pair_threshold: int = FULL_PAIR_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0.0:
            raise ContractError(
                f"learning_rate must be > 0, got {self.learning_rate}"
            )
        if self.negative_sample_k < 1:
            raise ContractError(
                f"negative_sample_k must be >= 1, got {self.negative_sample_k}"
            )


def resolve_config(cfg: TrainConfig, d: int) -> TrainConfig:
    """Fill the dimension defaults for a graph of feature width d."""
    latent = cfg.latent_dim if cfg.latent_dim is not None else default_latent_dim(d)
    hidden = list(cfg.hidden_dims) if cfg.hidden_dims is not None else [2 * latent]
    head_hidden = cfg.head_hidden if cfg.head_hidden is not None else latent
    pert = cfg.perturbation
    if pert.seed is None:
        pert = replace(pert, seed=cfg.seed)
    return replace(
        cfg,
        latent_dim=int(latent),
        hidden_dims=tuple(int(h) for h in hidden),
        head_hidden=int(head_hidden),
        perturbation=pert,
    )


@dataclass
class ModelState:
    """All trainable weights plus the optimizer moments.

    ``params`` maps flat names to arrays: ``enc.<layer>`` for the
    encoder, ``fh.<branch>.<w|b><layer>`` for the feature head and
    ``th.pair.<w|b><layer>`` for the topology head.  ``meta`` records
    the dimensions needed to rebuild the forward pass.
    """

    params: dict[str, np.ndarray]
    opt_m: dict[str, np.ndarray]
    opt_v: dict[str, np.ndarray]
    step_count: int
    meta: dict

    def check_finite(self, epoch: int) -> None:
        for key, value in self.params.items():
            if not np.all(np.isfinite(value)):
                raise NumericalAbort(epoch, f"parameter {key}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    total: float
    nll_f: float
    nll_t: float
    reg_f: float
    reg_t: float
    seconds: float


TrainHistory = list


def init_model(graph: AttributedGraph, cfg: TrainConfig) -> ModelState:
    """Fresh weights and zeroed moments for the given graph."""
    d = graph.d
    cfg = resolve_config(cfg, d)
    params: dict[str, np.ndarray] = {}
    encoder_weights = init_encoder(
        d, cfg.hidden_dims, cfg.latent_dim, (cfg.seed, _STREAM_ENCODER)
    )
    for idx, w in enumerate(encoder_weights):
        params[f"enc.{idx}"] = w
    for key, value in init_feature_head(
        cfg.latent_dim,
        d,
        cfg.head_hidden,
        (cfg.seed, _STREAM_FEATURE_HEAD),
        gamma_bias=graph.features.mean(axis=0),
    ).items():
        params[f"fh.{key}"] = value
    for key, value in init_topology_head(
        cfg.latent_dim, cfg.head_hidden, (cfg.seed, _STREAM_TOPOLOGY_HEAD)
    ).items():
        params[f"th.{key}"] = value
    return ModelState(
        params=params,
        opt_m={k: np.zeros_like(v) for k, v in params.items()},
        opt_v={k: np.zeros_like(v) for k, v in params.items()},
        step_count=0,
        meta={
            "feature_dim": int(d),
            "latent_dim": int(cfg.latent_dim),
            "hidden_dims": [int(h) for h in cfg.hidden_dims],
            "head_hidden": int(cfg.head_hidden),
            "encoder_layers": len(encoder_weights),
            "seed": int(cfg.seed),
        },
    )


def lift_params(tape: ad.Tape, state: ModelState) -> dict[str, ad.Tensor]:
    """Put every parameter on the tape as a differentiable leaf."""
    return {key: tape.leaf(value) for key, value in state.params.items()}


def model_forward(
    tape: ad.Tape,
    state: ModelState,
    features: np.ndarray,
    a_norm: np.ndarray,
    pairs: np.ndarray,
    flags: np.ndarray,
):
    """Encoder plus both heads on one tape.

    Returns (lifted parameter tensors, latent embedding, NIG parameters,
    Beta evidence).
    """
    lifted = lift_params(tape, state)
    x_in = tape.constant(features)
    a_in = tape.constant(a_norm)
    enc_ws = [lifted[f"enc.{i}"] for i in range(state.meta["encoder_layers"])]
    z = encode(x_in, a_in, enc_ws)
    fh_params = {k[3:]: v for k, v in lifted.items() if k.startswith("fh.")}
    th_params = {k[3:]: v for k, v in lifted.items() if k.startswith("th.")}
    nig = feature_head(z, fh_params)
    evidence = topology_head(z, th_params, pairs, flags)
    return lifted, z, nig, evidence


def adam_step(
    state: ModelState, gradients: Mapping[str, np.ndarray], lr: float
) -> ModelState:
    """One bias-corrected Adam update; moments persist in the state."""
    for key, param in state.params.items():
        if key not in gradients:
            raise ContractError(f"missing gradient for parameter {key}")
        if np.asarray(gradients[key]).shape != param.shape:
            raise ContractError(
                f"gradient shape {np.asarray(gradients[key]).shape} does not "
                f"match parameter {key} {param.shape}"
            )
    t = state.step_count + 1
    bias1 = 1.0 - _ADAM_BETA1**t
    bias2 = 1.0 - _ADAM_BETA2**t
    for key, param in state.params.items():
        g = np.asarray(gradients[key], dtype=np.float64)
        m = _ADAM_BETA1 * state.opt_m[key] + (1.0 - _ADAM_BETA1) * g
        v = _ADAM_BETA2 * state.opt_v[key] + (1.0 - _ADAM_BETA2) * (g * g)
        state.opt_m[key] = m
        state.opt_v[key] = v
        state.params[key] = param - lr * (m / bias1) / (np.sqrt(v / bias2) + _ADAM_EPS)
    state.step_count = t
    return state


# step is the optimizer's contract name; adam_step states the algorithm.
step = adam_step


def train(
    graph: AttributedGraph, cfg: TrainConfig
) -> tuple[ModelState, TrainHistory]:
    """Run the full optimization loop; see the module docstring.

    Raises :class:`NumericalAbort` naming the epoch and offending term
    if any loss component, gradient or parameter becomes non-finite.
    """
    cfg = resolve_config(cfg, graph.d)
    state = init_model(graph, cfg)
    history: TrainHistory = []
    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        x_tilde, a_tilde = perturb(graph, cfg.perturbation, epoch)
        a_norm = normalize_adjacency(a_tilde)
        kept_edges = edges_from_adjacency(a_tilde)
        pair_rng = np.random.default_rng((cfg.seed, _STREAM_PAIRS, epoch))
        pair_set = build_pair_set(
            graph.n,
            kept_edges,
            pair_rng,
            cfg.negative_sample_k,
            cfg.full_pair_threshold,
        )

        tape = ad.Tape()
        lifted, _, nig, evidence = model_forward(
            tape, state, x_tilde, a_norm, pair_set.pairs, pair_set.flags
        )
        parts = LossParts(
            nll_f=nig_nll(nig, graph.features),
            nll_t=beta_nll(evidence, nonedge_weight=pair_set.nonedge_weight),
            reg_f=feature_evidence_reg(nig, graph.features),
            reg_t=topology_evidence_reg(
                evidence, nonedge_weight=pair_set.nonedge_weight
            ),
        )
        part_values = parts.values()
        for term, value in part_values.items():
            if not np.isfinite(value):
                raise NumericalAbort(epoch, term)
        loss = total_loss(parts, cfg.loss_weights)
        total = float(loss.value[0, 0])
        if not np.isfinite(total):
            raise NumericalAbort(epoch, "total")

        grads = ad.backward(loss)
        grad_arrays = {}
        for key, tensor in lifted.items():
            g = grads[tensor]
            if not np.all(np.isfinite(g)):
                raise NumericalAbort(epoch, f"gradient {key}")
            grad_arrays[key] = g
        adam_step(state, grad_arrays, cfg.learning_rate)
        state.check_finite(epoch)

        history.append(
            EpochRecord(
                epoch=epoch,
                total=total,
                seconds=time.perf_counter() - start,
                **part_values,
            )
        )
    return state, history
