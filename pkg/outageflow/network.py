"""Static small-world social graph over customers."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Set

import networkx as nx
import numpy as np
import pandas as pd
from scipy import sparse

from .labels import Mode

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SocialGraph:
    """Undirected graph stored as CSR arrays with sorted neighbour lists."""

    n_nodes: int
    mean_degree: int
    rewire_prob: float
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self) -> None:
        self.indptr.flags.writeable = False
        self.indices.flags.writeable = False

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def n_edges(self) -> int:
        return int(self.indices.size // 2)

    @property
    def adjacency(self) -> List[List[int]]:
        return [self.neighbors(i).tolist() for i in range(self.n_nodes)]

    def neighbors(self, node: int) -> np.ndarray:
        return self.indices[self.indptr[node]:self.indptr[node + 1]]

    @cached_property
    def matrix(self) -> sparse.csr_matrix:
        data = np.ones(self.indices.size, dtype=np.float64)
        return sparse.csr_matrix((data, self.indices, self.indptr), shape=(self.n_nodes, self.n_nodes))

    def edges(self) -> np.ndarray:
        """Undirected edges as an (E, 2) array with a < b, sorted."""
        rows = np.repeat(np.arange(self.n_nodes), self.degree)
        keep = rows < self.indices
        return np.column_stack([rows[keep], self.indices[keep]])

    def to_frame(self) -> pd.DataFrame:
        edges = self.edges()
        return pd.DataFrame({"node_a": edges[:, 0], "node_b": edges[:, 1]})

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(map(tuple, self.edges().tolist()))
        return g


def _from_sets(adj: List[Set[int]], k: int, beta: float) -> SocialGraph:
    degree = np.fromiter((len(s) for s in adj), dtype=np.int64, count=len(adj))
    indptr = np.concatenate([[0], np.cumsum(degree)])
    indices = np.fromiter((j for s in adj for j in sorted(s)), dtype=np.int64, count=int(indptr[-1]))
    return SocialGraph(n_nodes=len(adj), mean_degree=k, rewire_prob=beta, indptr=indptr, indices=indices)


def generate_watts_strogatz(n: int, k: int, beta: float, rng: np.random.Generator) -> SocialGraph:
    """Ring lattice of ``k`` nearest neighbours, each edge then rewired with probability ``beta``.

    Edges are visited by offset ``j`` then node ``u``; a flipped edge ``(u, u+j)``
    moves its far endpoint to a uniformly drawn node, redrawing on self-loops and
    duplicates. After ``n`` rejected draws the original edge is kept.
    """
    if k < 2 or k % 2:
        raise ValueError(f"k must be an even number >= 2, got {k}")
    if k >= n:
        raise ValueError(f"k must be smaller than n (k={k}, n={n})")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")

    adj: List[Set[int]] = [set() for _ in range(n)]
    half = k // 2
    for u in range(n):
        for j in range(1, half + 1):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)

    flips = rng.random((half, n)) < beta
    kept = 0
    for j in range(1, half + 1):
        for u in range(n):
            if not flips[j - 1, u]:
                continue
            v = (u + j) % n
            for _ in range(n):
                w = int(rng.integers(n))
                if w != u and w not in adj[u]:
                    adj[u].discard(v)
                    adj[v].discard(u)
                    adj[u].add(w)
                    adj[w].add(u)
                    break
            else:
                kept += 1
    if kept:
        log.debug("rewiring kept %d lattice edges with no valid target", kept)
    return _from_sets(adj, k, beta)


def avoiding_fraction(graph: SocialGraph, node: int, modes: np.ndarray) -> float:
    nbrs = graph.neighbors(node)
    if nbrs.size == 0:
        return 0.0
    return float(np.count_nonzero(modes[nbrs] == Mode.AVOIDING)) / nbrs.size


def avoiding_fractions(graph: SocialGraph, modes: np.ndarray) -> np.ndarray:
    """``avoiding_fraction`` for every node at once."""
    counts = graph.matrix @ (modes == Mode.AVOIDING).astype(np.float64)
    return counts / np.maximum(graph.degree, 1)
