"""Graph data model, JSON serialization, and label-distribution utilities."""

from dataclasses import dataclass, field

import json

import numpy as np


class GraphError(ValueError):
    """Invalid graph construction or query."""


class GraphFormatError(ValueError):
    """Malformed graph file contents."""


def canonical_edge(u, v):
    return (u, v) if u < v else (v, u)


class Graph:
    """An undirected graph with dense integer node ids and optional categorical labels.

    Edges are stored once as sorted (u, v) tuples; self-loops are rejected.
    Instances are immutable by convention: nothing mutates them after __init__,
    so they are safe to share across parallel workers.
    """

    def __init__(self, node_count, edges, node_labels=None, edge_labels=None,
                 num_node_labels=None, num_edge_labels=None):
        if node_count < 0:
            raise GraphError("node_count must be non-negative")
        self.node_count = int(node_count)
        seen = set()
        canon = []
        for u, v in edges:
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise GraphError(f"edge ({u}, {v}) references node outside 0..{node_count - 1}")
            if u == v:
                raise GraphError(f"self-loop on node {u}")
            e = canonical_edge(u, v)
            if e in seen:
                raise GraphError(f"duplicate edge {e}")
            seen.add(e)
            canon.append(e)
        order = sorted(range(len(canon)), key=lambda i: canon[i])
        self.edges = tuple(canon[i] for i in order)
        self._edge_index = {e: i for i, e in enumerate(self.edges)}
        if edge_labels is not None:
            raw = list(edge_labels)
            if len(raw) != len(self.edges):
                raise GraphError("edge_labels must cover every edge")
            edge_labels = [raw[i] for i in order]

        if node_labels is not None:
            node_labels = tuple(int(l) for l in node_labels)
            if len(node_labels) != node_count:
                raise GraphError("node_labels must cover every node")
            if node_labels and min(node_labels) < 0:
                raise GraphError("negative node label id")
        self.node_labels = node_labels

        if edge_labels is not None:
            edge_labels = tuple(int(l) for l in edge_labels)
            if len(edge_labels) != len(self.edges):
                raise GraphError("edge_labels must cover every edge")
            if edge_labels and min(edge_labels) < 0:
                raise GraphError("negative edge label id")
        self.edge_labels = edge_labels

        if num_node_labels is None and node_labels is not None:
            num_node_labels = max(node_labels) + 1 if node_labels else 0
        if num_edge_labels is None and edge_labels is not None:
            num_edge_labels = max(edge_labels) + 1 if edge_labels else 0
        self.num_node_labels = num_node_labels
        self.num_edge_labels = num_edge_labels

        adj = [[] for _ in range(self.node_count)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        self._adjacency = tuple(tuple(sorted(a)) for a in adj)

    @property
    def edge_count(self):
        return len(self.edges)

    def neighbors(self, u):
        return self._adjacency[u]

    def degree(self, u):
        return len(self._adjacency[u])

    def has_edge(self, u, v):
        return canonical_edge(u, v) in self._edge_index

    def edge_label(self, u, v):
        if self.edge_labels is None:
            raise GraphError("graph has no edge labels")
        return self.edge_labels[self._edge_index[canonical_edge(u, v)]]

    def incident_edges(self, u):
        """Edge indices touching node u."""
        return [self._edge_index[canonical_edge(u, v)] for v in self._adjacency[u]]

    def adjacency_matrix(self):
        """Dense 0/1 adjacency, float64, zero diagonal."""
        a = np.zeros((self.node_count, self.node_count))
        for u, v in self.edges:
            a[u, v] = 1.0
            a[v, u] = 1.0
        return a

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.node_count == other.node_count and self.edges == other.edges
                and self.node_labels == other.node_labels
                and self.edge_labels == other.edge_labels)

    def __hash__(self):
        return hash((self.node_count, self.edges, self.node_labels, self.edge_labels))

    def __repr__(self):
        return f"Graph(nodes={self.node_count}, edges={self.edge_count})"

    def to_json_dict(self):
        d = {"nodes": self.node_count, "edges": [list(e) for e in self.edges]}
        if self.node_labels is not None:
            d["node_labels"] = list(self.node_labels)
        if self.edge_labels is not None:
            d["edge_labels"] = [[u, v, l] for (u, v), l in zip(self.edges, self.edge_labels)]
        return d

    @classmethod
    def from_json_dict(cls, d):
        try:
            node_count = d["nodes"]
            edges = [tuple(e) for e in d["edges"]]
        except (KeyError, TypeError) as exc:
            raise GraphFormatError(f"graph JSON missing required field: {exc}") from exc
        node_labels = d.get("node_labels")
        edge_labels = None
        if "edge_labels" in d:
            by_edge = {canonical_edge(u, v): l for u, v, l in d["edge_labels"]}
            ordered = sorted(canonical_edge(u, v) for u, v in edges)
            missing = [e for e in ordered if e not in by_edge]
            if missing:
                raise GraphFormatError(f"edge_labels missing entry for edge {missing[0]}")
            edge_labels = [by_edge[e] for e in ordered]
        return cls(node_count, edges, node_labels=node_labels, edge_labels=edge_labels)


def save_graph_json(g, path):
    with open(path, "w") as f:
        json.dump(g.to_json_dict(), f)


def load_graph_json(path):
    with open(path) as f:
        return Graph.from_json_dict(json.load(f))


@dataclass(frozen=True)
class LabelVocabulary:
    """Ordered names for node or edge label ids."""
    kind: str  # "node" or "edge"
    names: tuple

    def __post_init__(self):
        if self.kind not in ("node", "edge"):
            raise GraphError(f"bad vocabulary kind {self.kind!r}")
        if len(set(self.names)) != len(self.names):
            raise GraphError("vocabulary names must be unique")

    @property
    def size(self):
        return len(self.names)


@dataclass
class GraphDataset:
    """A list of graphs with one class id per graph and shared label vocabularies."""
    graphs: list
    graph_classes: list
    node_vocab: LabelVocabulary = None
    edge_vocab: LabelVocabulary = None
    class_names: tuple = field(default=None)

    def __post_init__(self):
        if len(self.graphs) != len(self.graph_classes):
            raise GraphError("graphs and graph_classes must have equal length")
        if self.graph_classes:
            ks = sorted(set(self.graph_classes))
            if ks != list(range(len(ks))):
                raise GraphError("class ids must be dense from 0")

    def __len__(self):
        return len(self.graphs)

    @property
    def num_classes(self):
        return len(set(self.graph_classes))


# --- label distribution utilities -------------------------------------------
#
# These back the attribute-consistency regularizers. Every function returns a
# probability vector over the relevant vocabulary; degenerate cases (no
# incident edges, empty neighborhood) fall back to uniform so downstream
# cross-entropies stay finite.

def _require_node_labels(g):
    if g.node_labels is None:
        raise GraphError("graph has no node labels")


def _require_edge_labels(g):
    if g.edge_labels is None:
        raise GraphError("graph has no edge labels")


def _uniform(k):
    return np.full(k, 1.0 / k)


def node_attr_observed(g, u):
    """One-hot distribution on node u's label."""
    _require_node_labels(g)
    dist = np.zeros(g.num_node_labels)
    dist[g.node_labels[u]] = 1.0
    return dist


def edge_attr_observed(g, u):
    """Label frequencies among edges incident to u, normalized by degree."""
    _require_edge_labels(g)
    if g.degree(u) == 0:
        return _uniform(g.num_edge_labels)
    dist = np.zeros(g.num_edge_labels)
    for idx in g.incident_edges(u):
        dist[g.edge_labels[idx]] += 1.0
    return dist / dist.sum()


def neighborhood_attr_observed(g, u, kind):
    """Label frequencies over u's neighborhood.

    kind="node": labels of the neighbors of u.
    kind="edge": labels of edges with at least one endpoint in N(u), i.e. the
    edges reachable within two hops of u.
    """
    if kind == "node":
        _require_node_labels(g)
        nbrs = g.neighbors(u)
        if not nbrs:
            return _uniform(g.num_node_labels)
        dist = np.zeros(g.num_node_labels)
        for v in nbrs:
            dist[g.node_labels[v]] += 1.0
        return dist / dist.sum()
    if kind == "edge":
        _require_edge_labels(g)
        nbrs = set(g.neighbors(u))
        idxs = {i for (i, (a, b)) in enumerate(g.edges) if a in nbrs or b in nbrs}
        if not idxs:
            return _uniform(g.num_edge_labels)
        dist = np.zeros(g.num_edge_labels)
        for i in idxs:
            dist[g.edge_labels[i]] += 1.0
        return dist / dist.sum()
    raise GraphError(f"kind must be 'node' or 'edge', got {kind!r}")


def save_dataset_json(dataset, path):
    d = {"graphs": [g.to_json_dict() for g in dataset.graphs],
         "classes": list(dataset.graph_classes)}
    if dataset.node_vocab:
        d["node_label_names"] = list(dataset.node_vocab.names)
    if dataset.edge_vocab:
        d["edge_label_names"] = list(dataset.edge_vocab.names)
    with open(path, "w") as f:
        json.dump(d, f)


def load_dataset_json(path):
    with open(path) as f:
        d = json.load(f)
    try:
        graphs = [Graph.from_json_dict(gd) for gd in d["graphs"]]
        classes = list(d["classes"])
    except (KeyError, TypeError) as exc:
        raise GraphFormatError(f"dataset JSON missing required field: {exc}") from exc
    node_vocab = edge_vocab = None
    # align per-graph vocab sizes so attribute distributions are comparable
    if any(g.node_labels is not None for g in graphs):
        if d.get("node_label_names"):
            node_vocab = LabelVocabulary("node", tuple(d["node_label_names"]))
            k = node_vocab.size
        else:
            k = max(g.num_node_labels or 0 for g in graphs)
        graphs = [Graph(g.node_count, g.edges, node_labels=g.node_labels,
                        edge_labels=g.edge_labels, num_node_labels=k,
                        num_edge_labels=g.num_edge_labels) for g in graphs]
    if any(g.edge_labels is not None for g in graphs):
        if d.get("edge_label_names"):
            edge_vocab = LabelVocabulary("edge", tuple(d["edge_label_names"]))
            k = edge_vocab.size
        else:
            k = max(g.num_edge_labels or 0 for g in graphs)
        graphs = [Graph(g.node_count, g.edges, node_labels=g.node_labels,
                        edge_labels=g.edge_labels, num_node_labels=g.num_node_labels,
                        num_edge_labels=k) for g in graphs]
    return GraphDataset(graphs, classes, node_vocab=node_vocab, edge_vocab=edge_vocab)


def node_label_onehot(g):
    """|V| x K one-hot matrix of node labels."""
    _require_node_labels(g)
    m = np.zeros((g.node_count, g.num_node_labels))
    m[np.arange(g.node_count), list(g.node_labels)] = 1.0
    return m


def edge_attr_matrix(g):
    """|V| x K matrix; row u is edge_attr_observed(g, u)."""
    return np.stack([edge_attr_observed(g, u) for u in range(g.node_count)])


def neighborhood_attr_matrix(g, kind):
    """|V| x K matrix; row u is neighborhood_attr_observed(g, u, kind)."""
    return np.stack([neighborhood_attr_observed(g, u, kind) for u in range(g.node_count)])
