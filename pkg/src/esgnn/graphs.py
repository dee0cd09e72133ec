"""Graph containers, subgraph policies, and connectivity operators.

Graphs are immutable once built: undirected edges are stored once as
canonically ordered (i, j) pairs with i < j, and every subgraph view is an
edge mask over that list.  Node deletion keeps the node slot and zeroes its
feature row plus incident edges, so matrix shapes never change across a bag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import SparseMatrix

__all__ = [
    "EdgeMask",
    "FeatureSpec",
    "Graph",
    "GraphDataset",
    "PolicyError",
    "SubgraphBag",
    "adjacency",
    "adjacency_with_self_loops",
    "constant_features",
    "degree_features",
    "degrees",
    "policy_edge_deleted",
    "policy_node_deleted",
    "sample_bag",
]


class PolicyError(ValueError):
    """A subgraph policy was applied to a graph it cannot handle."""


@dataclass(frozen=True)
class FeatureSpec:
    """How node feature matrices are derived for a dataset.

    kind: "node_labels" (one-hot over observed labels), "degree" (one-hot of
    the capped degree), or "constant" (single all-ones column).
    """

    kind: str = "node_labels"
    cap: int | None = None

    def __post_init__(self):
        if self.kind not in ("node_labels", "degree", "constant"):
            raise ValueError(f"unknown feature kind '{self.kind}'")
        if self.kind == "degree" and (self.cap is None or self.cap < 1):
            raise ValueError("degree features need cap >= 1")


@dataclass(frozen=True)
class Graph:
    """Undirected graph with node features and a class label."""

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    x: np.ndarray
    y: int
    node_labels: tuple[int, ...] | None = None
    ground_truth_motif_edges: frozenset[int] | None = None

    def __post_init__(self):
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < j < self.num_nodes):
                raise ValueError(f"edge ({i}, {j}) outside 0..{self.num_nodes - 1} or not canonical")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        if self.x.shape[0] != self.num_nodes:
            raise ValueError(f"feature matrix has {self.x.shape[0]} rows for {self.num_nodes} nodes")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_array(self) -> np.ndarray:
        """Edges as an (E, 2) int array (empty -> shape (0, 2))."""
        if not self.edges:
            return np.zeros((0, 2), dtype=np.intp)
        return np.asarray(self.edges, dtype=np.intp)


def degrees(g: Graph) -> np.ndarray:
    deg = np.zeros(g.num_nodes, dtype=np.intp)
    for i, j in g.edges:
        deg[i] += 1
        deg[j] += 1
    return deg


@dataclass(frozen=True)
class GraphDataset:
    graphs: tuple[Graph, ...]
    num_classes: int
    name: str
    feature_spec: FeatureSpec

    def __post_init__(self):
        dims = {g.x.shape[1] for g in self.graphs}
        if len(dims) > 1:
            raise ValueError(f"inconsistent feature dimensions {sorted(dims)}")
        for g in self.graphs:
            if not 0 <= g.y < self.num_classes:
                raise ValueError(f"label {g.y} outside 0..{self.num_classes - 1}")

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def feature_dim(self) -> int:
        return self.graphs[0].x.shape[1]

    def labels(self) -> np.ndarray:
        return np.array([g.y for g in self.graphs], dtype=np.intp)


@dataclass(frozen=True)
class EdgeMask:
    """Per-undirected-edge selection: soft weights plus hard bits.

    ``zeroed_nodes`` flags feature rows to blank at encoding time (node
    deletion); index removal never happens.
    """

    soft: np.ndarray
    hard: np.ndarray
    threshold_used: float | None = None
    budget: int | None = None
    seed: int | None = None
    zeroed_nodes: tuple[int, ...] = ()

    def __post_init__(self):
        if self.hard.shape != self.soft.shape or self.hard.ndim != 1:
            raise ValueError("soft and hard mask lengths differ")
        if not np.all((self.hard == 0.0) | (self.hard == 1.0)):
            raise ValueError("hard mask must be binary")
        if self.budget is not None and int(self.hard.sum()) != self.budget:
            raise ValueError(f"hard mask sums to {int(self.hard.sum())}, budget is {self.budget}")

    @property
    def num_edges(self) -> int:
        return self.soft.shape[0]

    @staticmethod
    def full(num_edges: int) -> "EdgeMask":
        ones = np.ones(num_edges)
        return EdgeMask(soft=ones.copy(), hard=ones)


@dataclass(frozen=True)
class SubgraphBag:
    """Ordered collection of edge-mask views over one base graph."""

    base: Graph
    masks: tuple[EdgeMask, ...]
    policy_tag: str  # ED | ND | EXPLAIN_NOISE | EXPLAIN_TOPK

    def __post_init__(self):
        if not self.masks:
            raise ValueError("bag must hold at least one mask")
        for m in self.masks:
            if m.num_edges != self.base.num_edges:
                raise ValueError(
                    f"mask over {m.num_edges} edges for a base graph with {self.base.num_edges}"
                )

    def __len__(self) -> int:
        return len(self.masks)


def policy_edge_deleted(g: Graph) -> SubgraphBag:
    """One subgraph per edge, each dropping exactly that edge."""
    if g.num_edges == 0:
        raise PolicyError("edge-deleted policy needs at least one edge")
    masks = []
    for k in range(g.num_edges):
        hard = np.ones(g.num_edges)
        hard[k] = 0.0
        masks.append(EdgeMask(soft=hard.copy(), hard=hard))
    return SubgraphBag(base=g, masks=tuple(masks), policy_tag="ED")


def policy_node_deleted(g: Graph) -> SubgraphBag:
    """One subgraph per node, dropping its incident edges and feature row."""
    if g.num_nodes < 1:
        raise PolicyError("node-deleted policy needs at least one node")
    edge_arr = g.edge_array()
    masks = []
    for v in range(g.num_nodes):
        hard = np.ones(g.num_edges)
        if g.num_edges:
            hard[(edge_arr[:, 0] == v) | (edge_arr[:, 1] == v)] = 0.0
        masks.append(EdgeMask(soft=hard.copy(), hard=hard, zeroed_nodes=(v,)))
    return SubgraphBag(base=g, masks=tuple(masks), policy_tag="ND")


def sample_bag(bag: SubgraphBag, fraction: float, seed) -> SubgraphBag:
    """Keep ceil(fraction * m) masks, sampled uniformly without replacement."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction {fraction} outside (0, 1]")
    m = len(bag.masks)
    keep = math.ceil(fraction * m)
    if keep >= m:
        return bag
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(m, size=keep, replace=False))
    return SubgraphBag(
        base=bag.base,
        masks=tuple(bag.masks[int(i)] for i in chosen),
        policy_tag=bag.policy_tag,
    )


def degree_features(g: Graph, cap: int) -> np.ndarray:
    """Row v = one-hot of min(deg(v), cap) in dimension cap + 1."""
    if cap < 1:
        raise ValueError(f"cap {cap} must be >= 1")
    idx = np.minimum(degrees(g), cap)
    out = np.zeros((g.num_nodes, cap + 1))
    out[np.arange(g.num_nodes), idx] = 1.0
    return out


def constant_features(num_nodes: int) -> np.ndarray:
    return np.ones((num_nodes, 1))


def adjacency(g: Graph) -> SparseMatrix:
    """Symmetric adjacency pattern: two directed entries per undirected edge.

    Entry order is (i->j, j->i) per edge k, so entry 2k and 2k+1 both carry
    the weight of undirected edge k.
    """
    arr = g.edge_array()
    rows = np.empty(2 * g.num_edges, dtype=np.intp)
    cols = np.empty(2 * g.num_edges, dtype=np.intp)
    rows[0::2], cols[0::2] = arr[:, 0], arr[:, 1]
    rows[1::2], cols[1::2] = arr[:, 1], arr[:, 0]
    return SparseMatrix(g.num_nodes, g.num_nodes, rows, cols)


def adjacency_with_self_loops(g: Graph, self_weight: float = 1.0):
    """Adjacency plus a weighted diagonal, as (pattern, weights).

    With self_weight = 1 + eps this is the GIN aggregation operator; the
    pattern stays inside A plus the diagonal.
    """
    arr = g.edge_array()
    e = g.num_edges
    rows = np.empty(2 * e + g.num_nodes, dtype=np.intp)
    cols = np.empty_like(rows)
    rows[0:2 * e:2], cols[0:2 * e:2] = arr[:, 0], arr[:, 1]
    rows[1:2 * e:2], cols[1:2 * e:2] = arr[:, 1], arr[:, 0]
    rows[2 * e:] = cols[2 * e:] = np.arange(g.num_nodes)
    weights = np.ones(rows.size)
    weights[2 * e:] = self_weight
    return SparseMatrix(g.num_nodes, g.num_nodes, rows, cols), weights
