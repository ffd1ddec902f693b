"""The four training objectives and their weighted total, plus the
pair-universe policy that decides which node pairs the topology terms
evaluate.

Feature terms (per entry, summed):

* NLL: the negative log marginal likelihood of the NIG model,
  1/2 log(pi/nu) - alpha log Omega + (alpha + 1/2) log((x - gamma)^2 nu + Omega)
  + lgamma(alpha) - lgamma(alpha + 1/2), with Omega = 2 beta (1 + nu).
  Equivalent to the negative log of a Student-t with df 2 alpha, location
  gamma and scale^2 = beta (1 + nu) / (nu alpha).
* evidence penalty: |x - gamma| (2 nu + alpha), shrinking evidence where
  the reconstruction is poor.

Topology terms (per pair, summed; A is the 0/1 edge flag):

* NLL: A log(S/eps) + (1 - A) log(S/eps_bar), S = eps + eps_bar.
* evidence penalty: |A - eps/S| KL(Beta(eps, eps_bar) || Beta(1, 1)).

When pairs are subsampled, non-edge terms are rescaled so the loss stays
an unbiased estimate of the full-universe sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ContractError, DimensionError
from .heads import BetaEvidence, NIGParams


@dataclass(frozen=True)
class LossWeights:
    """Multipliers for the four loss terms; nonnegative, not all zero."""

    nll_f: float = 0.7
    nll_t: float = 0.3
    reg_f: float = 0.3
    reg_t: float = 0.7

    def __post_init__(self):
        vals = (self.nll_f, self.nll_t, self.reg_f, self.reg_t)
        if any(not v >= 0.0 for v in vals):
            raise ContractError(f"loss weights must be nonnegative, got {vals}")
        if all(v == 0.0 for v in vals):
            raise ContractError("loss weights must not all be zero")


@dataclass
class LossParts:
    """The four component losses as 1x1 tape tensors."""

    nll_f: ad.Tensor
    nll_t: ad.Tensor
    reg_f: ad.Tensor
    reg_t: ad.Tensor

    def values(self) -> dict[str, float]:
        return {
            "nll_f": float(self.nll_f.value[0, 0]),
            "nll_t": float(self.nll_t.value[0, 0]),
            "reg_f": float(self.reg_f.value[0, 0]),
            "reg_t": float(self.reg_t.value[0, 0]),
        }


@dataclass(frozen=True)
class PairSet:
    """Node pairs evaluated by the topology terms.

    ``nonedge_weight`` rescales sampled non-edge terms; 1.0 in the
    full-universe case.
    """

    pairs: np.ndarray
    flags: np.ndarray
    nonedge_weight: float = 1.0


def _check_against(p: NIGParams, x: ad.Tensor) -> None:
    p.check()
    if x.shape != p.gamma.shape:
        raise DimensionError(
            f"targets shape {x.shape} does not match parameters {p.gamma.shape}"
        )


def _as_target(tape, x) -> ad.Tensor:
    if isinstance(x, ad.Tensor):
        return x
    return tape.constant(np.asarray(x, dtype=np.float64))


def nig_nll(p: NIGParams, x) -> ad.Tensor:
    """Negative log-likelihood of the targets under the NIG marginal."""
    x = _as_target(p.gamma.tape, x)
    _check_against(p, x)
    omega = ad.mul(ad.mul(p.beta, ad.add(p.nu, 1.0)), 2.0)
    err = ad.sub(x, p.gamma)
    half = ad.add(ad.mul(ad.log(p.nu), -0.5), 0.5 * np.log(np.pi))
    fit = ad.mul(ad.add(p.alpha, 0.5), ad.log(ad.add(ad.mul(ad.mul(err, err), p.nu), omega)))
    entries = ad.add(
        ad.add(half, ad.sub(fit, ad.mul(p.alpha, ad.log(omega)))),
        ad.sub(ad.lgamma(p.alpha), ad.lgamma(ad.add(p.alpha, 0.5))),
    )
    return ad.reduce_sum(entries)


def feature_evidence_reg(p: NIGParams, x) -> ad.Tensor:
    """Evidence penalty |x - gamma| (2 nu + alpha), summed."""
    x = _as_target(p.gamma.tape, x)
    _check_against(p, x)
    evidence = ad.add(ad.mul(p.nu, 2.0), p.alpha)
    return ad.reduce_sum(ad.mul(ad.absolute(ad.sub(x, p.gamma)), evidence))


def _pair_weights(e: BetaEvidence, flags, nonedge_weight: float):
    """Per-pair (flag, weight) column constants on e's tape."""
    tape = e.eps.tape
    flag_arr = np.asarray(flags, dtype=np.float64).reshape(-1, 1)
    if flag_arr.shape[0] != e.count:
        raise ContractError(f"{flag_arr.shape[0]} flags for {e.count} pairs")
    if flag_arr.size and not np.all((flag_arr == 0.0) | (flag_arr == 1.0)):
        raise ContractError("flags must be 0 or 1")
    weight_arr = np.where(flag_arr == 1.0, 1.0, float(nonedge_weight))
    return tape.constant(flag_arr), tape.constant(weight_arr)


def beta_nll(e: BetaEvidence, flags=None, nonedge_weight: float = 1.0) -> ad.Tensor:
    """Topology NLL over the pair set; flags default to the evidence's own."""
    if flags is None:
        flags = e.flags
    a, w = _pair_weights(e, flags, nonedge_weight)
    log_s = ad.log(ad.add(e.eps, e.eps_bar))
    per_pair = ad.add(
        ad.mul(a, ad.sub(log_s, ad.log(e.eps))),
        ad.mul(ad.add(ad.negate(a), 1.0), ad.sub(log_s, ad.log(e.eps_bar))),
    )
    return ad.reduce_sum(ad.mul(w, per_pair))


def kl_beta_uniform(eps: ad.Tensor, eps_bar: ad.Tensor) -> ad.Tensor:
    """KL(Beta(eps, eps_bar) || Beta(1, 1)), elementwise.

    Closed form: lgamma(S) - lgamma(eps) - lgamma(eps_bar)
    + (eps - 1) digamma(eps) + (eps_bar - 1) digamma(eps_bar)
    - (S - 2) digamma(S), with S = eps + eps_bar.
    """
    if np.min(eps.value, initial=1.0) < 1.0 or np.min(eps_bar.value, initial=1.0) < 1.0:
        raise ContractError("Beta parameters must be >= 1")
    s = ad.add(eps, eps_bar)
    return ad.add(
        ad.sub(ad.sub(ad.lgamma(s), ad.lgamma(eps)), ad.lgamma(eps_bar)),
        ad.sub(
            ad.add(
                ad.mul(ad.sub(eps, 1.0), ad.digamma(eps)),
                ad.mul(ad.sub(eps_bar, 1.0), ad.digamma(eps_bar)),
            ),
            ad.mul(ad.sub(s, 2.0), ad.digamma(s)),
        ),
    )


def topology_evidence_reg(
    e: BetaEvidence, flags=None, nonedge_weight: float = 1.0
) -> ad.Tensor:
    """Evidence penalty |A - eps/S| KL(Beta || uniform), summed over pairs."""
    if flags is None:
        flags = e.flags
    a, w = _pair_weights(e, flags, nonedge_weight)
    p_hat = ad.div(e.eps, ad.add(e.eps, e.eps_bar))
    residual = ad.absolute(ad.sub(a, p_hat))
    kl = kl_beta_uniform(e.eps, e.eps_bar)
    return ad.reduce_sum(ad.mul(w, ad.mul(residual, kl)))


def total_loss(parts: LossParts, w: LossWeights) -> ad.Tensor:
    """Weighted sum of the four components, on the tape."""
    return ad.add(
        ad.add(ad.mul(parts.nll_f, w.nll_f), ad.mul(parts.nll_t, w.nll_t)),
        ad.add(ad.mul(parts.reg_f, w.reg_f), ad.mul(parts.reg_t, w.reg_t)),
    )


# ---------------------------------------------------------------------------
# pair universe

FULL_PAIR_THRESHOLD = 2000


def full_pairs(n: int) -> np.ndarray:
    """All unordered pairs (i < j) in lexicographic order."""
    iu, ju = np.triu_indices(n, k=1)
    return np.stack([iu, ju], axis=1).astype(np.int64)


def _edge_flag_lookup(n: int, edges: np.ndarray):
    adj = np.zeros((n, n), dtype=bool)
    if edges.size:
        adj[edges[:, 0], edges[:, 1]] = True
        adj[edges[:, 1], edges[:, 0]] = True
    return adj


def build_pair_set(
    n: int,
    edges: np.ndarray,
    rng: np.random.Generator | None = None,
    neg_per_edge: int = 5,
    full_threshold: int = FULL_PAIR_THRESHOLD,
) -> PairSet:
    """Pairs for the topology losses.

    Small graphs (n <= full_threshold) evaluate every unordered pair.
    Larger graphs evaluate all edges plus ``neg_per_edge`` uniformly
    sampled non-edges per edge (with replacement), rescaling the
    non-edge terms by #non-edges / #sampled so the expected loss equals
    the full sum.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n <= full_threshold:
        pairs = full_pairs(n)
        adj = _edge_flag_lookup(n, edges)
        flags = adj[pairs[:, 0], pairs[:, 1]].astype(np.float64)
        return PairSet(pairs=pairs, flags=flags, nonedge_weight=1.0)

    if rng is None:
        raise ContractError("subsampled pair policy needs an rng")
    n_edges = edges.shape[0]
    total_pairs = n * (n - 1) // 2
    n_nonedges = total_pairs - n_edges
    n_samples = neg_per_edge * n_edges
    if n_nonedges <= 0 or n_samples == 0:
        return PairSet(
            pairs=edges, flags=np.ones(n_edges), nonedge_weight=1.0
        )
    adj = _edge_flag_lookup(n, edges)
    sampled = np.empty((n_samples, 2), dtype=np.int64)
    filled = 0
    while filled < n_samples:
        cand = rng.integers(0, n, size=(2 * (n_samples - filled), 2))
        cand.sort(axis=1)
        ok = (cand[:, 0] != cand[:, 1]) & ~adj[cand[:, 0], cand[:, 1]]
        take = cand[ok][: n_samples - filled]
        sampled[filled : filled + take.shape[0]] = take
        filled += take.shape[0]
    pairs = np.concatenate([edges, sampled], axis=0)
    flags = np.concatenate([np.ones(n_edges), np.zeros(n_samples)])
    return PairSet(
        pairs=pairs, flags=flags, nonedge_weight=n_nonedges / n_samples
    )
