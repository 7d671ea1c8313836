"""Device graph construction and rooted minimum-spanning-tree queries.

Devices are indexed 1..k and the aggregation destination is always device k.
Edges carry complex channel coefficients; the MST uses edge weight 1/|h|^2,
so the tree prefers strong links. Ties are broken lexicographically by the
(min, max) device pair, which makes both MST algorithms deterministic.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .channel import FadingConfig, draw_channels


class DisconnectedGraphError(ValueError):
    """A spanning tree cannot reach every device."""


class TopologyGenerationError(RuntimeError):
    """Random graph generation exhausted its retry budget without connectivity."""


def _norm_edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class ChannelGraph:
    """Undirected weighted graph of D2D channel coefficients among k devices.

    ``edges`` maps unordered pairs (i, j) with i < j to the complex channel
    coefficient, stored once per pair (the channel is reciprocal as used).
    """

    k: int
    destination: int
    edges: dict[tuple[int, int], complex]
    _adjacency: dict[int, list[int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"need at least 2 devices, got k={self.k}")
        if self.destination != self.k:
            raise ValueError(
                f"destination must be the highest device index {self.k}, got {self.destination}"
            )
        adjacency: dict[int, list[int]] = {i: [] for i in range(1, self.k + 1)}
        for (i, j), h in self.edges.items():
            if not (1 <= i < j <= self.k):
                raise ValueError(f"edge ({i},{j}) out of range or not normalized")
            if abs(h) == 0.0:
                raise ValueError(f"edge ({i},{j}) has zero channel coefficient")
            adjacency[i].append(j)
            adjacency[j].append(i)
        for neigh in adjacency.values():
            neigh.sort()
        object.__setattr__(self, "_adjacency", adjacency)

    def neighbors(self, i: int) -> list[int]:
        return self._adjacency[i]

    def coefficient(self, i: int, j: int) -> complex:
        return self.edges[_norm_edge(i, j)]

    def weight(self, i: int, j: int) -> float:
        h = self.edges[_norm_edge(i, j)]
        return 1.0 / (h.real * h.real + h.imag * h.imag)

    def unreachable_from_destination(self) -> list[int]:
        seen = {self.destination}
        stack = [self.destination]
        while stack:
            u = stack.pop()
            for v in self._adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return sorted(set(range(1, self.k + 1)) - seen)

    def is_connected(self) -> bool:
        return not self.unreachable_from_destination()


@dataclass(frozen=True)
class AggregationTree:
    """MST rooted at the destination with all derived protocol queries.

    ``level`` is the path length to the root, ``descendants`` the strict
    descendant set of each device, and ``effective_channel`` the product of
    hop coefficients along the unique path to the root (1 for the root).
    """

    graph: ChannelGraph
    root: int
    parent: dict[int, int]
    children: dict[int, tuple[int, ...]]
    level: dict[int, int]
    levels: int
    leaf_set: frozenset[int]
    inter_set: frozenset[int]
    descendants: dict[int, frozenset[int]]
    effective_channel: dict[int, complex]

    @property
    def k(self) -> int:
        return self.graph.k

    @property
    def sources(self) -> tuple[int, ...]:
        return tuple(i for i in range(1, self.k + 1) if i != self.root)

    @property
    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(_norm_edge(i, p) for i, p in self.parent.items())

    @property
    def total_weight(self) -> float:
        return sum(self.graph.weight(i, p) for i, p in self.parent.items())

    def distance_set(self, ell: int) -> tuple[int, ...]:
        return tuple(sorted(i for i, l in self.level.items() if l == ell and i != self.root))

    def hop_channel(self, i: int) -> complex:
        """Channel coefficient on the edge from device i to its parent."""
        return self.graph.coefficient(i, self.parent[i])

    def hop_gain_sq(self, j: int, i: int) -> float:
        """|h_{j->i}|^2 for a strict descendant j of ancestor i."""
        hj = self.effective_channel[j]
        hi = self.effective_channel[i]
        return (hj.real**2 + hj.imag**2) / (hi.real**2 + hi.imag**2)

    def path_to_root(self, i: int) -> list[tuple[int, int]]:
        """Hop list [(i, parent), (parent, grandparent), ...] ending at the root."""
        hops = []
        while i != self.root:
            p = self.parent[i]
            hops.append((i, p))
            i = p
        return hops


def _tree_from_edges(graph: ChannelGraph, tree_edges: set[tuple[int, int]]) -> AggregationTree:
    adjacency: dict[int, list[int]] = {i: [] for i in range(1, graph.k + 1)}
    for i, j in tree_edges:
        adjacency[i].append(j)
        adjacency[j].append(i)

    root = graph.destination
    parent: dict[int, int] = {}
    level: dict[int, int] = {root: 0}
    order = [root]
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for v in sorted(adjacency[u]):
                if v not in level:
                    level[v] = level[u] + 1
                    parent[v] = u
                    order.append(v)
                    nxt.append(v)
        frontier = nxt

    if len(level) < graph.k:
        missing = sorted(set(range(1, graph.k + 1)) - set(level))
        raise DisconnectedGraphError(
            f"device {missing[0]} is unreachable from destination {root}"
        )

    children: dict[int, list[int]] = {i: [] for i in range(1, graph.k + 1)}
    for i, p in parent.items():
        children[p].append(i)

    desc: dict[int, set[int]] = {i: set() for i in range(1, graph.k + 1)}
    for u in reversed(order):
        if u == root:
            continue
        p = parent[u]
        desc[p].add(u)
        desc[p].update(desc[u])

    leaf = frozenset(i for i in parent if not desc[i])
    inter = frozenset(i for i in parent if desc[i])

    # Telescoping construction keeps h_{i->K} = h_{pi(i),i} * h_{pi(i)->K} exact.
    eff: dict[int, complex] = {root: 1.0 + 0.0j}
    for u in order:
        if u == root:
            continue
        eff[u] = graph.coefficient(parent[u], u) * eff[parent[u]]

    return AggregationTree(
        graph=graph,
        root=root,
        parent=parent,
        children={i: tuple(sorted(c)) for i, c in children.items()},
        level=level,
        levels=max(level[i] for i in parent) if parent else 0,
        leaf_set=leaf,
        inter_set=inter,
        descendants={i: frozenset(d) for i, d in desc.items()},
        effective_channel=eff,
    )


def build_mst_prim(graph: ChannelGraph) -> AggregationTree:
    """Grow the MST from the destination, always attaching the lightest frontier edge."""
    root = graph.destination
    in_tree = {root}
    best: dict[int, tuple[float, int, int]] = {}
    heap: list[tuple[tuple[float, int, int], int]] = []
    tree_edges: set[tuple[int, int]] = set()

    def push_frontier(u: int) -> None:
        for v in graph.neighbors(u):
            if v in in_tree:
                continue
            lo, hi = _norm_edge(u, v)
            cand = (graph.weight(u, v), lo, hi)
            if v not in best or cand < best[v]:
                best[v] = cand
                heapq.heappush(heap, (cand, v))

    push_frontier(root)
    while heap and len(in_tree) < graph.k:
        cand, v = heapq.heappop(heap)
        if v in in_tree or best.get(v) != cand:
            continue
        tree_edges.add((cand[1], cand[2]))
        in_tree.add(v)
        push_frontier(v)

    if len(in_tree) < graph.k:
        missing = sorted(set(range(1, graph.k + 1)) - in_tree)
        raise DisconnectedGraphError(
            f"device {missing[0]} is unreachable from destination {root}"
        )
    return _tree_from_edges(graph, tree_edges)


def build_mst_kruskal(graph: ChannelGraph) -> AggregationTree:
    """Merge single-node trees along weight-sorted edges until one tree remains."""
    parent_uf = {i: i for i in range(1, graph.k + 1)}

    def find(x: int) -> int:
        while parent_uf[x] != x:
            parent_uf[x] = parent_uf[parent_uf[x]]
            x = parent_uf[x]
        return x

    ranked = sorted((graph.weight(i, j), i, j) for (i, j) in graph.edges)
    tree_edges: set[tuple[int, int]] = set()
    for _, i, j in ranked:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent_uf[ri] = rj
            tree_edges.add((i, j))
            if len(tree_edges) == graph.k - 1:
                break

    if len(tree_edges) < graph.k - 1:
        dest_comp = find(graph.destination)
        missing = sorted(i for i in range(1, graph.k + 1) if find(i) != dest_comp)
        raise DisconnectedGraphError(
            f"device {missing[0]} is unreachable from destination {graph.destination}"
        )
    return _tree_from_edges(graph, tree_edges)


CONNECTIVITY_RETRY_BUDGET = 100


def random_geometric_graph(
    k: int,
    radius: float,
    seed: int,
    fading: FadingConfig,
    max_retries: int = CONNECTIVITY_RETRY_BUDGET,
) -> ChannelGraph:
    """Place k devices uniformly in the unit square and connect pairs within radius.

    Redraws with a derived seed until the graph is connected; fails loudly after
    ``max_retries`` attempts rather than silently densifying.
    """
    if k < 2:
        raise ValueError(f"need at least 2 devices, got k={k}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    for attempt in range(max_retries):
        rng = np.random.default_rng(np.random.SeedSequence((seed, attempt)))
        positions = rng.random((k, 2))
        pairs = []
        for i in range(1, k + 1):
            for j in range(i + 1, k + 1):
                d = positions[i - 1] - positions[j - 1]
                if float(np.hypot(d[0], d[1])) <= radius:
                    pairs.append((i, j))
        coefficients = draw_channels(positions, pairs, fading, rng=rng)
        graph = ChannelGraph(k=k, destination=k, edges=coefficients)
        if graph.is_connected():
            return graph
    raise TopologyGenerationError(
        f"no connected graph with k={k}, radius={radius} after {max_retries} attempts"
    )


def write_graph(graph: ChannelGraph, path) -> None:
    """Write a graph as text: header 'k destination', then 'i j re(h) im(h)' lines."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{graph.k} {graph.destination}\n")
        for (i, j) in sorted(graph.edges):
            h = graph.edges[(i, j)]
            fh.write(f"{i} {j} {h.real:.17g} {h.imag:.17g}\n")


def read_graph(path) -> ChannelGraph:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"empty graph file: {path}")
    k_str, dest_str = lines[0].split()
    edges: dict[tuple[int, int], complex] = {}
    for ln in lines[1:]:
        i_str, j_str, re_str, im_str = ln.split()
        i, j = int(i_str), int(j_str)
        edges[_norm_edge(i, j)] = complex(float(re_str), float(im_str))
    return ChannelGraph(k=int(k_str), destination=int(dest_str), edges=edges)
