"""Learned hard edge-mask explanations over a frozen classifier.

A small MLP maps concatenated endpoint embeddings [z_i ; z_j] to one logit
per undirected edge.  Soft weights come from a binary-concrete relaxation
(logistic noise, temperature tau); the classifier only ever sees hard binary
masks, obtained either by thresholding or by an exact top-K budget, with a
straight-through estimator carrying gradients back to the logits.  The
sparsity penalty acts on the hard bits, i.e. it counts selected edges.
"""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    Tensor,
    concat_cols,
    cross_entropy_mean,
    custom_primitive,
    gather_rows,
    linear,
    relu,
    reshape,
    sigmoid,
    softmax_cross_entropy,
    sum_all,
)
from .gin import BackboneParams, backbone_forward_batch, build_graph_batch, glorot
from .graphs import EdgeMask, Graph, SubgraphBag
from .optim import AdamState, TrainingError, step_from_gradients

__all__ = [
    "ExplainerConfig",
    "ExplainerParams",
    "bag_from_json",
    "bag_to_json",
    "binarize_ste",
    "concrete_sample",
    "edge_logits",
    "explainer_loss",
    "generate_bag_noise",
    "generate_bag_topk",
    "hard_threshold",
    "hard_top_k",
    "init_explainer",
    "mask_seed",
    "topk_binarize",
    "train_explainer",
]

DEFAULT_FRACTIONS = (0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75)


@dataclass
class ExplainerParams:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def named(self, prefix: str = "explainer/") -> dict[str, Tensor]:
        return {
            f"{prefix}lin1/W": self.w1,
            f"{prefix}lin1/b": self.b1,
            f"{prefix}lin2/W": self.w2,
            f"{prefix}lin2/b": self.b2,
        }


def init_explainer(rng: np.random.Generator, hidden: int = 32, width: int = 32) -> ExplainerParams:
    return ExplainerParams(
        w1=Tensor(glorot(rng, 2 * hidden, width), requires_grad=True),
        b1=Tensor(np.zeros(width), requires_grad=True),
        w2=Tensor(glorot(rng, width, 1), requires_grad=True),
        b2=Tensor(np.zeros(1), requires_grad=True),
    )


@dataclass
class ExplainerConfig:
    tau_start: float = 5.0
    tau_end: float = 1.0
    lam: float = 0.1
    noise_scale: float = 1.0
    threshold: float = 0.5
    bag_size: int = 10
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    epochs: int = 30
    lr: float = 3e-3
    batch_size: int = 32

    def __post_init__(self):
        if self.tau_start <= 0 or self.tau_end <= 0:
            raise ValueError("temperatures must be positive")
        if self.lam < 0:
            raise ValueError(f"sparsity weight {self.lam} must be >= 0")
        if self.noise_scale < 0:
            raise ValueError("noise scale must be >= 0")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold {self.threshold} outside (0, 1)")
        if not self.fractions or list(self.fractions) != sorted(self.fractions):
            raise ValueError("fractions must be non-empty and ascending")
        if any(not 0.0 < f <= 1.0 for f in self.fractions):
            raise ValueError("fractions must lie in (0, 1]")

    def tau_at(self, epoch: int) -> float:
        if self.epochs <= 1:
            return self.tau_end
        step = (self.tau_end - self.tau_start) / (self.epochs - 1)
        return self.tau_start + step * epoch


def edge_logits(Z: Tensor | np.ndarray, edges: np.ndarray, params: ExplainerParams) -> Tensor:
    """One logit per undirected edge from [z_i ; z_j] on the canonical i < j pair."""
    Z = Z if isinstance(Z, Tensor) else Tensor(Z)
    if edges.size == 0:
        return Tensor(np.zeros(0))
    pair = concat_cols(gather_rows(Z, edges[:, 0]), gather_rows(Z, edges[:, 1]))
    h = relu(linear(pair, params.w1, params.b1))
    return reshape(linear(h, params.w2, params.b2), (edges.shape[0],))


def concrete_sample(omega: Tensor | np.ndarray, tau: float, noise_scale: float, seed) -> Tensor:
    """Binary-concrete soft weights: sigmoid((omega + noise_scale * logistic) / tau).

    noise_scale = 0 gives the deterministic map sigmoid(omega / tau).
    """
    if tau <= 0:
        raise ValueError(f"temperature {tau} must be positive")
    omega = omega if isinstance(omega, Tensor) else Tensor(omega)
    n = omega.data.shape[0]
    if noise_scale == 0.0:
        noise = np.zeros(n)
    else:
        u = np.random.default_rng(seed).random(n)
        u = np.clip(u, 1e-12, 1.0 - 1e-12)
        noise = noise_scale * (np.log(u) - np.log1p(-u))
    return sigmoid((omega + Tensor(noise)) * (1.0 / tau))


def hard_threshold(s: Tensor, threshold: float) -> Tensor:
    """Bits 1{s > threshold}; backward is the identity (straight-through)."""
    bits = (s.data > threshold).astype(np.float64)
    return custom_primitive(bits, [s], lambda g: [g])


def hard_top_k(s: Tensor, k: int) -> Tensor:
    """Bits marking the k largest soft weights (ties to the lower index);
    straight-through backward."""
    if not 1 <= k <= s.data.size:
        raise ValueError(f"budget {k} outside 1..{s.data.size}")
    order = np.argsort(-s.data, kind="stable")
    bits = np.zeros_like(s.data)
    bits[order[:k]] = 1.0
    return custom_primitive(bits, [s], lambda g: [g])


def binarize_ste(s: Tensor | np.ndarray, threshold: float) -> EdgeMask:
    """Threshold soft weights into a hard EdgeMask (strict inequality)."""
    soft = s.data if isinstance(s, Tensor) else np.asarray(s, dtype=np.float64)
    hard = (soft > threshold).astype(np.float64)
    return EdgeMask(soft=soft.copy(), hard=hard, threshold_used=threshold)


def topk_binarize(s: Tensor | np.ndarray, k: int) -> EdgeMask:
    """Keep exactly the k largest soft weights as an EdgeMask."""
    soft = s.data if isinstance(s, Tensor) else np.asarray(s, dtype=np.float64)
    if not 1 <= k <= soft.size:
        raise ValueError(f"budget {k} outside 1..{soft.size}")
    order = np.argsort(-soft, kind="stable")
    hard = np.zeros_like(soft)
    hard[order[:k]] = 1.0
    return EdgeMask(
        soft=soft.copy(), hard=hard, threshold_used=float(soft[order[k - 1]]), budget=k
    )


def explainer_loss(masked_logits: Tensor, target: int, e: Tensor, lam: float) -> Tensor:
    """Cross-entropy to the unmasked prediction plus lam * (selected edges / total)."""
    if lam < 0:
        raise ValueError(f"sparsity weight {lam} must be >= 0")
    ce = softmax_cross_entropy(masked_logits, target)
    num_edges = e.data.shape[0]
    if num_edges == 0:
        return ce
    return ce + sum_all(e) * (lam / num_edges)


def _frozen_copy(backbone: BackboneParams) -> BackboneParams:
    frozen = backbone.copy()
    for t in frozen.named().values():
        t.requires_grad = False
    return frozen


def _predicted_labels(graphs: list[Graph], backbone: BackboneParams) -> np.ndarray:
    batch = build_graph_batch(graphs)
    logits, _, _ = backbone_forward_batch(batch, backbone)
    return logits.data.argmax(axis=1)


def _node_embedding_cache(graphs: list[Graph], backbone: BackboneParams) -> list[np.ndarray]:
    out = []
    for start in range(0, len(graphs), 256):
        chunk = graphs[start : start + 256]
        batch = build_graph_batch(chunk)
        _, h, _ = backbone_forward_batch(batch, backbone)
        offset = 0
        for g in chunk:
            out.append(h.data[offset : offset + g.num_nodes])
            offset += g.num_nodes
    return out


def train_explainer(
    graphs: list[Graph],
    backbone: BackboneParams,
    cfg: ExplainerConfig,
    seed: int = 0,
) -> tuple[ExplainerParams, list[dict]]:
    """Fit the edge-logit MLP against the frozen classifier's predictions.

    Per graph the objective is cross-entropy of the masked prediction to the
    unmasked predicted label plus the normalized hard-edge count; the batch
    loss is the mean over graphs.  Deterministic for a fixed (cfg, seed).
    """
    if not graphs:
        raise ValueError("empty training set")
    frozen = _frozen_copy(backbone)
    params = init_explainer(np.random.default_rng(seed), hidden=backbone.hidden)
    named = params.named()
    state = AdamState()
    targets = _predicted_labels(graphs, frozen)
    z_cache = _node_embedding_cache(graphs, frozen)
    history: list[dict] = []
    for epoch in range(cfg.epochs):
        tau = cfg.tau_at(epoch)
        order = np.random.default_rng([seed, 1, epoch]).permutation(len(graphs))
        losses, fractions = [], []
        for bi, start in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            chunk = [graphs[i] for i in idx]
            batch = build_graph_batch(chunk)
            z = Tensor(np.concatenate([z_cache[i] for i in idx]))
            edges, offset = [], 0
            for g in chunk:
                edges.append(g.edge_array() + offset)
                offset += g.num_nodes
            edges = np.concatenate(edges) if edges else np.zeros((0, 2), dtype=np.intp)

            omega = edge_logits(z, edges, params)
            s = concrete_sample(omega, tau, cfg.noise_scale, [seed, 2, epoch, bi])
            e = hard_threshold(s, cfg.threshold)

            logits, _, _ = backbone_forward_batch(batch, frozen, mask_values=e)
            ce = cross_entropy_mean(logits, targets[idx])
            # mean over graphs of (selected edges / graph edges)
            edge_counts = np.array([g.num_edges for g in chunk], dtype=np.float64)
            weight = np.zeros(batch.num_edges)
            if batch.num_edges:
                weight = 1.0 / (edge_counts[batch.edge_graph] * len(chunk))
            loss = ce + sum_all(e * Tensor(weight)) * cfg.lam
            if not np.isfinite(loss.data):
                raise TrainingError(f"non-finite explainer loss at epoch {epoch}")
            loss.backward()
            step_from_gradients(named, state, cfg.lr)
            losses.append(loss.item())
            if batch.num_edges:
                fractions.append(float(e.data.mean()))
        history.append(
            {
                "epoch": epoch,
                "loss": float(np.mean(losses)),
                "tau": tau,
                "mean_mask_fraction": float(np.mean(fractions)) if fractions else 0.0,
            }
        )
    return params, history


def mask_seed(*parts: int) -> int:
    """Single recordable integer seed derived from a tuple of parts."""
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def edge_scores(g: Graph, backbone: BackboneParams, params: ExplainerParams) -> np.ndarray:
    """Raw per-edge logits omega for one graph (no gradients)."""
    frozen = _frozen_copy(backbone)
    batch = build_graph_batch([g])
    _, h, _ = backbone_forward_batch(batch, frozen)
    return edge_logits(Tensor(h.data), g.edge_array(), params).data


def generate_bag_noise(
    g: Graph,
    backbone: BackboneParams,
    params: ExplainerParams,
    m: int,
    noise_scale: float,
    seed: int,
    tau: float = 1.0,
    threshold: float = 0.5,
) -> SubgraphBag:
    """m independent concrete draws, thresholded into hard masks."""
    if m < 1:
        raise ValueError(f"bag size {m} must be >= 1")
    omega = edge_scores(g, backbone, params)
    masks = []
    for t in range(m):
        child = mask_seed(seed, t)
        s = concrete_sample(Tensor(omega), tau, noise_scale, child)
        mask = binarize_ste(s, threshold)
        masks.append(
            EdgeMask(
                soft=mask.soft,
                hard=mask.hard,
                threshold_used=threshold,
                seed=child,
            )
        )
    return SubgraphBag(base=g, masks=tuple(masks), policy_tag="EXPLAIN_NOISE")


def generate_bag_topk(
    g: Graph,
    backbone: BackboneParams,
    params: ExplainerParams,
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS,
    tau: float = 1.0,
) -> SubgraphBag:
    """One mask per fraction f with budget max(1, ceil(f * |E|)); noise-free,
    so the masks are nested."""
    if not fractions:
        raise ValueError("fractions must be non-empty")
    omega = edge_scores(g, backbone, params)
    s = concrete_sample(Tensor(omega), tau, 0.0, 0)
    masks = tuple(
        topk_binarize(s, max(1, math.ceil(f * g.num_edges))) for f in fractions
    )
    return SubgraphBag(base=g, masks=masks, policy_tag="EXPLAIN_TOPK")


def bag_to_json(bag: SubgraphBag, graph_id: int) -> dict:
    masks = []
    for m in bag.masks:
        packed = np.packbits(m.hard.astype(np.uint8)) if m.num_edges else np.zeros(0, dtype=np.uint8)
        masks.append(
            {
                "bits": base64.b64encode(packed.tobytes()).decode("ascii"),
                "K": m.budget,
                "seed": m.seed,
            }
        )
    return {"graph_id": graph_id, "policy": bag.policy_tag, "masks": masks}


def bag_from_json(doc: dict, base: Graph) -> SubgraphBag:
    masks = []
    for k, entry in enumerate(doc["masks"]):
        raw = base64.b64decode(entry["bits"])
        if base.num_edges:
            bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), count=base.num_edges)
            hard = bits.astype(np.float64)
        else:
            hard = np.zeros(0)
        zeroed = (k,) if doc["policy"] == "ND" else ()
        masks.append(
            EdgeMask(
                soft=hard.copy(),
                hard=hard,
                budget=entry.get("K"),
                seed=entry.get("seed"),
                zeroed_nodes=zeroed,
            )
        )
    return SubgraphBag(base=base, masks=tuple(masks), policy_tag=doc["policy"])
