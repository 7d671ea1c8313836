import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otaagg.channel import FadingConfig
from otaagg.topology import (
    ChannelGraph,
    DisconnectedGraphError,
    TopologyGenerationError,
    build_mst_kruskal,
    build_mst_prim,
    random_geometric_graph,
    read_graph,
    write_graph,
)


def three_device_graph():
    # squared gains: (1,3)=1, (2,3)=4, (1,2)=2 -> weights 1, 0.25, 0.5
    return ChannelGraph(
        k=3,
        destination=3,
        edges={
            (1, 3): complex(1.0),
            (2, 3): complex(2.0),
            (1, 2): complex(math.sqrt(2.0)),
        },
    )


def random_graph(k, seed, duplicate_weights=False):
    rng = np.random.default_rng(seed)
    edges = {}
    order = list(range(1, k + 1))
    rng.shuffle(order)
    for a, b in zip(order, order[1:]):  # random spanning path keeps it connected
        edges[(min(a, b), max(a, b))] = complex(rng.uniform(0.3, 3.0), rng.uniform(-1.0, 1.0))
    for i in range(1, k + 1):
        for j in range(i + 1, k + 1):
            if (i, j) not in edges and rng.random() < 0.5:
                edges[(i, j)] = complex(rng.uniform(0.3, 3.0), rng.uniform(-1.0, 1.0))
    if duplicate_weights:
        edges = {e: complex(1.0, 0.0) for e in edges}
    return ChannelGraph(k=k, destination=k, edges=edges)


def spanning_tree_minimum(graph):
    """Brute-force minimum spanning tree weight by enumerating edge subsets."""
    edges = list(graph.edges)
    best = math.inf
    for subset in itertools.combinations(edges, graph.k - 1):
        parent = {i: i for i in range(1, graph.k + 1)}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        acyclic = True
        for i, j in subset:
            ri, rj = find(i), find(j)
            if ri == rj:
                acyclic = False
                break
            parent[ri] = rj
        if acyclic:
            best = min(best, sum(graph.weight(i, j) for i, j in subset))
    return best


class TestMstExamples:
    def test_three_device_tree(self):
        tree = build_mst_prim(three_device_graph())
        assert tree.edge_set == frozenset({(2, 3), (1, 2)})
        assert tree.total_weight == pytest.approx(0.75, rel=1e-15)
        assert tree.parent == {2: 3, 1: 2}
        assert tree.levels == 2
        assert spanning_tree_minimum(three_device_graph()) == pytest.approx(0.75)

    def test_two_devices(self):
        graph = ChannelGraph(k=2, destination=2, edges={(1, 2): complex(0.7, 0.1)})
        tree = build_mst_prim(graph)
        assert tree.edge_set == frozenset({(1, 2)})
        assert tree.levels == 1
        assert tree.leaf_set == frozenset({1})
        assert tree.inter_set == frozenset()

    def test_star_graph(self):
        k = 6
        edges = {(i, k): complex(1.0 + 0.1 * i) for i in range(1, k)}
        tree = build_mst_prim(ChannelGraph(k=k, destination=k, edges=edges))
        assert tree.levels == 1
        assert tree.leaf_set == frozenset(range(1, k))
        assert all(tree.level[i] == 1 for i in range(1, k))

    def test_kruskal_matches_prim_edge_set(self):
        graph = three_device_graph()
        assert build_mst_kruskal(graph).edge_set == build_mst_prim(graph).edge_set

    def test_distinct_weight_k6_identical_edge_sets(self):
        graph = random_graph(6, seed=3)
        prim = build_mst_prim(graph)
        kruskal = build_mst_kruskal(graph)
        assert prim.edge_set == kruskal.edge_set
        assert prim.total_weight == pytest.approx(spanning_tree_minimum(graph), rel=1e-12)

    def test_duplicate_weights_equal_total(self):
        graph = random_graph(6, seed=5, duplicate_weights=True)
        prim = build_mst_prim(graph)
        kruskal = build_mst_kruskal(graph)
        assert prim.total_weight == pytest.approx(kruskal.total_weight, rel=1e-12)

    def test_disconnected_graph_names_device(self):
        graph = ChannelGraph(
            k=4, destination=4, edges={(1, 2): complex(1.0), (3, 4): complex(1.0)}
        )
        with pytest.raises(DisconnectedGraphError, match="device 1"):
            build_mst_prim(graph)
        with pytest.raises(DisconnectedGraphError, match="device 1"):
            build_mst_kruskal(graph)


@given(k=st.integers(3, 7), seed=st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_mst_invariants(k, seed):
    graph = random_graph(k, seed)
    prim = build_mst_prim(graph)
    kruskal = build_mst_kruskal(graph)
    assert prim.total_weight == pytest.approx(kruskal.total_weight, rel=1e-12)
    assert prim.total_weight == pytest.approx(spanning_tree_minimum(graph), rel=1e-12)

    # telescoping is exact by construction
    for i in prim.parent:
        expected = graph.coefficient(prim.parent[i], i) * prim.effective_channel[prim.parent[i]]
        assert prim.effective_channel[i] == expected

    # descendants match parent chains
    for i in range(1, k + 1):
        for j in prim.parent:
            chain = set()
            node = j
            while node != prim.root:
                node = prim.parent[node]
                chain.add(node)
            assert (j in prim.descendants[i]) == (i in chain)

    # levels partition the sources
    assert sum(len(prim.distance_set(l)) for l in range(1, prim.levels + 1)) == k - 1
    for i in prim.parent:
        assert prim.level[prim.parent[i]] == prim.level[i] - 1
    assert prim.leaf_set | prim.inter_set | {prim.root} == set(range(1, k + 1))
    assert not prim.leaf_set & prim.inter_set


class TestRandomGeometric:
    def test_two_devices_wide_radius(self):
        graph = random_geometric_graph(2, 2.0, seed=0, fading=FadingConfig())
        assert len(graph.edges) == 1

    def test_deterministic_given_seed(self):
        a = random_geometric_graph(20, 0.4, seed=7, fading=FadingConfig())
        b = random_geometric_graph(20, 0.4, seed=7, fading=FadingConfig())
        assert a.edges == b.edges

    def test_tiny_radius_fails_loudly(self):
        with pytest.raises(TopologyGenerationError):
            random_geometric_graph(20, 0.01, seed=1, fading=FadingConfig(), max_retries=5)

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            random_geometric_graph(1, 0.5, seed=0, fading=FadingConfig())
        with pytest.raises(ValueError):
            random_geometric_graph(4, 0.0, seed=0, fading=FadingConfig())


def test_graph_file_round_trip(tmp_path):
    graph = random_graph(6, seed=11)
    path = tmp_path / "graph.txt"
    write_graph(graph, path)
    back = read_graph(path)
    assert back.k == graph.k and back.destination == graph.destination
    assert set(back.edges) == set(graph.edges)
    for e, h in graph.edges.items():
        assert back.edges[e] == pytest.approx(h, rel=1e-15)


def test_graph_validation():
    with pytest.raises(ValueError):
        ChannelGraph(k=1, destination=1, edges={})
    with pytest.raises(ValueError):
        ChannelGraph(k=3, destination=2, edges={(1, 2): complex(1.0)})
    with pytest.raises(ValueError):
        ChannelGraph(k=3, destination=3, edges={(1, 1): complex(1.0)})
    with pytest.raises(ValueError):
        ChannelGraph(k=3, destination=3, edges={(1, 2): complex(0.0)})
