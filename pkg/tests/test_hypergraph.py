"""Hypergraph construction and typed neighbor queries."""

import pytest

from bdhh.errors import EmptyTrainSet, UnknownNode
from bdhh.hypergraph import EdgeType, NodeRef, NodeType, build_hypergraph
from conftest import make_basket, make_vocab, random_sequences, random_vocab


def brute_force_neighbors(graph, node, target_type):
    found = set()
    for edge in graph.hyperedges:
        if node in edge.members:
            for member in edge.members:
                if member.node_type == target_type and member != node:
                    found.add(member.code)
    return sorted(found)


def test_single_basket_edge_counts(tiny_vocab):
    # items 0 and 1 have distinct levels (0, 1) and the same category.
    basket = make_basket(tiny_vocab, 0, 0, [0, 1])
    graph = build_hypergraph([basket], tiny_vocab)
    by_type = {}
    for edge in graph.hyperedges:
        by_type.setdefault(edge.edge_type, []).append(edge)
    assert len(by_type[EdgeType.ITEM_FEATURE]) == 2
    assert len(by_type[EdgeType.ITEM_ID]) == 1
    assert len(by_type[EdgeType.ITEM_ID][0].members) == 2
    assert len(by_type[EdgeType.ITEM_PRICE]) == 1
    assert len(by_type[EdgeType.ITEM_PRICE][0].members) == 2


def test_item_feature_edges_join_one_node_per_type(tiny_vocab):
    graph = build_hypergraph([make_basket(tiny_vocab, 0, 0, [2])], tiny_vocab)
    edge = next(e for e in graph.hyperedges if e.edge_type == EdgeType.ITEM_FEATURE)
    types = sorted(m.node_type for m in edge.members)
    assert types == sorted([NodeType.ID, NodeType.CATEGORY, NodeType.PRICE])


def test_empty_train_set_raises():
    vocab = make_vocab([0], [0], 2)
    with pytest.raises(EmptyTrainSet):
        build_hypergraph([], vocab)


def test_single_feature_edge_neighbors(tiny_vocab):
    graph = build_hypergraph([make_basket(tiny_vocab, 0, 0, [2])], tiny_vocab)
    neigh = graph.neighbors(NodeRef(NodeType.ID, 2), NodeType.PRICE)
    assert neigh == [NodeRef(NodeType.PRICE, 2)]


def test_price_node_sees_all_its_items():
    vocab = make_vocab(item_level=[1, 0, 1], item_category=[0, 0, 0], n_levels=2)
    baskets = [make_basket(vocab, 0, 0, [0, 1]), make_basket(vocab, 1, 0, [2])]
    graph = build_hypergraph(baskets, vocab)
    neigh = graph.neighbors(NodeRef(NodeType.PRICE, 1), NodeType.ID)
    assert [n.code for n in neigh] == [0, 2]


def test_isolated_node_has_no_neighbors(tiny_vocab):
    # item 5 never appears in a training basket
    graph = build_hypergraph([make_basket(tiny_vocab, 0, 0, [0])], tiny_vocab)
    assert graph.neighbors(NodeRef(NodeType.ID, 5), NodeType.PRICE) == []


def test_unknown_node_raises(tiny_vocab):
    graph = build_hypergraph([make_basket(tiny_vocab, 0, 0, [0])], tiny_vocab)
    with pytest.raises(UnknownNode):
        graph.neighbors(NodeRef(NodeType.ID, 99), NodeType.PRICE)


def test_query_node_never_in_result():
    vocab = make_vocab(item_level=[0, 0], item_category=[0, 0], n_levels=1)
    graph = build_hypergraph([make_basket(vocab, 0, 0, [0, 1])], vocab)
    neigh = graph.neighbors(NodeRef(NodeType.ID, 0), NodeType.ID)
    assert [n.code for n in neigh] == [1]


def test_incidence_symmetry(rng):
    for _ in range(30):
        vocab = random_vocab(rng)
        sequences = random_sequences(rng, vocab)
        baskets = [b for s in sequences for b in s.baskets]
        graph = build_hypergraph(baskets, vocab)
        for node, edge_ids in graph.incidence.items():
            for edge_id in edge_ids:
                assert node in graph.hyperedges[edge_id].members
        for edge_id, edge in enumerate(graph.hyperedges):
            for member in edge.members:
                assert edge_id in graph.incidence[member]


def test_neighbors_match_brute_force(rng):
    checked = 0
    while checked < 200:
        vocab = random_vocab(rng)
        sequences = random_sequences(rng, vocab)
        baskets = [b for s in sequences for b in s.baskets]
        graph = build_hypergraph(baskets, vocab)
        for node_type, size in ((NodeType.ID, vocab.m_d), (NodeType.PRICE, vocab.m_p),
                                (NodeType.CATEGORY, vocab.m_c)):
            node = NodeRef(node_type, int(rng.integers(0, size)))
            target = NodeType(int(rng.integers(0, 3)))
            got = [n.code for n in graph.neighbors(node, target)]
            assert got == brute_force_neighbors(graph, node, target)
            checked += 1


def test_rebuild_is_identical(rng):
    vocab = random_vocab(rng, max_items=6)
    sequences = random_sequences(rng, vocab)
    baskets = [b for s in sequences for b in s.baskets]
    g1 = build_hypergraph(baskets, vocab)
    g2 = build_hypergraph(list(reversed(baskets)), vocab)
    assert g1.hyperedges == g2.hyperedges
    assert g1.incidence == g2.incidence


def test_neighbor_csr_matches_query_api(rng):
    vocab = random_vocab(rng)
    sequences = random_sequences(rng, vocab)
    baskets = [b for s in sequences for b in s.baskets]
    graph = build_hypergraph(baskets, vocab)
    for center in NodeType:
        for target in NodeType:
            if center == target:
                continue
            indices, offsets = graph.neighbor_csr(center, target)
            for code in range(graph.size_of(center)):
                seg = indices[offsets[code] : offsets[code + 1]].tolist()
                assert seg == [n.code for n in graph.neighbors(NodeRef(center, code), target)]


def test_type_counts_sum_to_six(tiny_vocab):
    graph = build_hypergraph([make_basket(tiny_vocab, 0, 0, [0, 1])], tiny_vocab)
    node_types = {m.node_type for e in graph.hyperedges for m in e.members}
    edge_types = {e.edge_type for e in graph.hyperedges}
    assert len(node_types) + len(edge_types) == 6


def test_summary_report(tiny_vocab):
    graph = build_hypergraph([make_basket(tiny_vocab, 0, 0, [0, 1])], tiny_vocab)
    text = graph.summary()
    assert "ITEM_FEATURE: 2" in text
    assert "ID=6 PRICE=3 CATEGORY=2" in text
