"""Heterogeneous hypergraph over item-ID, price-level and category nodes.

Three hyperedge families: one per-item edge joining its three feature nodes,
plus per-basket edges joining the item IDs (resp. the price levels) bought
together. Built from training baskets only; immutable once constructed.
"""

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import EmptyTrainSet, UnknownNode


class NodeType(enum.IntEnum):
    ID = 0
    CATEGORY = 1
    PRICE = 2


# Canonical feature order; the encoder's (delta1, delta2) pairs are this
# order with the centre type removed.
FEATURE_ORDER = (NodeType.ID, NodeType.CATEGORY, NodeType.PRICE)


class EdgeType(enum.IntEnum):
    ITEM_FEATURE = 0
    ITEM_ID = 1
    ITEM_PRICE = 2


class NodeRef(NamedTuple):
    node_type: NodeType
    code: int


@dataclass(frozen=True)
class Hyperedge:
    edge_type: EdgeType
    members: tuple


@dataclass
class HeteroHypergraph:
    m_d: int
    m_p: int
    m_c: int
    hyperedges: list
    incidence: dict
    _csr_cache: dict = field(default_factory=dict, repr=False)

    def size_of(self, node_type):
        return {NodeType.ID: self.m_d, NodeType.PRICE: self.m_p, NodeType.CATEGORY: self.m_c}[
            node_type
        ]

    def _check_node(self, node):
        if node.code < 0 or node.code >= self.size_of(node.node_type):
            raise UnknownNode(f"{node.node_type.name} code {node.code} out of range")

    def neighbors(self, node, target_type):
        """All ``target_type`` nodes sharing at least one hyperedge with
        ``node``, deduplicated, ascending code, excluding ``node`` itself."""
        self._check_node(node)
        found = set()
        for edge_index in self.incidence.get(node, ()):
            for member in self.hyperedges[edge_index].members:
                if member.node_type == target_type and member != node:
                    found.add(member.code)
        return [NodeRef(target_type, code) for code in sorted(found)]

    def neighbor_csr(self, center_type, neighbor_type):
        """CSR arrays (indices, offsets) of ``neighbor_type`` neighbors for
        every node of ``center_type``; cached after first use."""
        key = (center_type, neighbor_type)
        if key not in self._csr_cache:
            n_center = self.size_of(center_type)
            indices = []
            offsets = np.zeros(n_center + 1, dtype=np.int64)
            for code in range(n_center):
                neigh = self.neighbors(NodeRef(center_type, code), neighbor_type)
                indices.extend(ref.code for ref in neigh)
                offsets[code + 1] = len(indices)
            self._csr_cache[key] = (np.array(indices, dtype=np.int64), offsets)
        return self._csr_cache[key]

    def summary(self):
        """Structured text report of node counts and edge histograms."""
        edge_counts = {etype.name: 0 for etype in EdgeType}
        size_hist = {}
        for edge in self.hyperedges:
            edge_counts[edge.edge_type.name] += 1
            key = (edge.edge_type.name, len(edge.members))
            size_hist[key] = size_hist.get(key, 0) + 1
        lines = [
            "hypergraph",
            f"  nodes: ID={self.m_d} PRICE={self.m_p} CATEGORY={self.m_c}",
            f"  hyperedges: total={len(self.hyperedges)}",
        ]
        for name, count in sorted(edge_counts.items()):
            lines.append(f"    {name}: {count}")
        lines.append("  edge size histogram:")
        for (name, size), count in sorted(size_hist.items()):
            lines.append(f"    {name} size={size}: {count}")
        return "\n".join(lines)


def build_hypergraph(train_baskets, vocab):
    """Build the graph from training baskets and the item feature table.

    One ITEM_FEATURE edge per distinct item appearing in the baskets, one
    ITEM_ID and one ITEM_PRICE edge per basket (members deduplicated).
    """
    baskets = list(train_baskets)
    if not baskets:
        raise EmptyTrainSet("cannot build a hypergraph from zero baskets")

    edges = []
    seen_items = sorted({code for b in baskets for code in b.item_codes})
    for code in seen_items:
        edges.append(
            Hyperedge(
                EdgeType.ITEM_FEATURE,
                (
                    NodeRef(NodeType.ID, code),
                    NodeRef(NodeType.CATEGORY, int(vocab.item_category[code])),
                    NodeRef(NodeType.PRICE, int(vocab.item_level[code])),
                ),
            )
        )
    for basket in sorted(baskets, key=lambda b: (b.user, b.seq_index)):
        ids = sorted(set(basket.item_codes))
        levels = sorted({int(vocab.item_level[c]) for c in ids})
        edges.append(
            Hyperedge(EdgeType.ITEM_ID, tuple(NodeRef(NodeType.ID, c) for c in ids))
        )
        edges.append(
            Hyperedge(EdgeType.ITEM_PRICE, tuple(NodeRef(NodeType.PRICE, p) for p in levels))
        )

    incidence = {}
    for edge_index, edge in enumerate(edges):
        for member in edge.members:
            incidence.setdefault(member, []).append(edge_index)

    return HeteroHypergraph(
        m_d=vocab.m_d,
        m_p=vocab.m_p,
        m_c=vocab.m_c,
        hyperedges=edges,
        incidence=incidence,
    )
