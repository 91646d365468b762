"""Per-graph structure encoder: one-hot node in, neighbor scores out.

Training minimizes full binary cross-entropy against the adjacency matrix
(non-neighbors count as negative targets, including the self column).
Divergence scoring uses only the positive edge terms; see positive_log_loss.
"""

import hashlib
import json
from dataclasses import dataclass, asdict

import numpy as np

from . import nn
from .nn import DenseLayer


class TrainingFault(RuntimeError):
    pass


class ContractViolation(RuntimeError):
    pass


@dataclass
class TrainConfig:
    embed_dim: int = 8
    encoder_layers: int = 2
    attention_layers: int = 0  # 0 = plain linear attention matrices
    learning_rate: float = 1e-2
    encoding_epochs: int = 300
    scoring_epochs: int = 300
    node_reg_coef: float = 1.0
    edge_reg_coef: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.embed_dim <= 0 or self.encoder_layers <= 0:
            raise ValueError("embed_dim and encoder_layers must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.encoding_epochs < 0 or self.scoring_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.node_reg_coef < 0 or self.edge_reg_coef < 0:
            raise ValueError("regularizer coefficients must be >= 0")

    def hash(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def derive_seed(*parts):
    """Stable 64-bit seed from arbitrary string/int parts."""
    h = hashlib.blake2b(":".join(str(p) for p in parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


class SourceEncoder:
    """Embedding table + relu hidden stack + linear output over |V| logits."""

    def __init__(self, graph, graph_id, embedding, hidden, output):
        self.graph = graph
        self.graph_id = graph_id
        self.embedding = embedding      # |V| x d
        self.hidden = hidden            # list of DenseLayer (relu)
        self.output = output            # DenseLayer to |V| logits
        self.trained = False
        self.loss_trace = []

    @property
    def node_count(self):
        return self.graph.node_count

    @property
    def embed_dim(self):
        return self.embedding.shape[1]

    @property
    def layers(self):
        return self.hidden + [self.output]

    def params(self):
        p = {"embedding": self.embedding}
        for k, layer in enumerate(self.hidden):
            p[f"hidden{k}.weight"] = layer.weight
            p[f"hidden{k}.bias"] = layer.bias
        p["output.weight"] = self.output.weight
        p["output.bias"] = self.output.bias
        return p

    def copy_params(self):
        return {k: v.copy() for k, v in self.params().items()}


def build_encoder(graph, cfg, graph_id=0):
    """Seeded random init; deterministic for a given (graph_id, cfg)."""
    if graph.node_count == 0:
        raise ValueError("cannot build an encoder for an empty graph")
    rng = np.random.default_rng(derive_seed("encoder", graph_id, cfg.rng_seed))
    d = cfg.embed_dim
    n = graph.node_count
    bound = 1.0 / np.sqrt(n)
    embedding = rng.uniform(-bound, bound, size=(n, d))
    hidden = [nn.init_dense(d, d, "relu", rng) for _ in range(cfg.encoder_layers)]
    output = nn.init_dense(n, d, "identity", rng)
    return SourceEncoder(graph, graph_id, embedding, hidden, output)


def _forward_all(enc):
    """Logits for every node at once (rows follow node ids)."""
    return nn.forward(enc.layers, enc.embedding)


def encode_node(enc, v):
    """Neighbor logits for node v; sigmoid of these are neighbor probabilities."""
    if not (0 <= v < enc.node_count):
        raise ValueError(f"node id {v} out of range 0..{enc.node_count - 1}")
    out, _ = nn.forward(enc.layers, enc.embedding[v])
    return out[0]


def encoder_loss_and_grads(enc):
    """Full-batch BCE against the adjacency matrix, with analytic gradients."""
    adjacency = enc.graph.adjacency_matrix()
    logits, tape = _forward_all(enc)
    loss, g_logits = nn.multilabel_bce_loss(logits, adjacency)
    layer_grads, g_input = nn.backward(enc.layers, tape, g_logits)
    grads = {"embedding": g_input}
    for k in range(len(enc.hidden)):
        grads[f"hidden{k}.weight"], grads[f"hidden{k}.bias"] = layer_grads[k]
    grads["output.weight"], grads["output.bias"] = layer_grads[-1]
    return loss, grads


def encoder_loss(enc, graph=None):
    """Multilabel BCE of the encoder on a graph (defaults to its own)."""
    target = enc.graph if graph is None else graph
    if target.node_count != enc.node_count:
        raise nn.ShapeError("graph node count does not match encoder output width")
    logits, _ = _forward_all(enc)
    loss, _ = nn.multilabel_bce_loss(logits, target.adjacency_matrix())
    return loss


def positive_log_loss(enc, graph=None):
    """-sum log sigma(logit) over directed edge occurrences (both orientations).

    On the encoder's own graph this is the self-divergence baseline, which is
    strictly positive for any finite parameters.
    """
    g = enc.graph if graph is None else graph
    if g.node_count != enc.node_count:
        raise nn.ShapeError("graph node count does not match encoder output width")
    logits, _ = _forward_all(enc)
    total = 0.0
    for u, v in g.edges:
        total += nn.softplus(-logits[u, v]) + nn.softplus(-logits[v, u])
    return float(total)


def fit_encoder(enc, cfg):
    """Run encoding_epochs of full-batch Adam; returns the per-epoch loss trace."""
    if enc.trained:
        raise ContractViolation("encoder is already trained and frozen")
    params = enc.params()
    state = nn.AdamState()
    trace = []
    for epoch in range(cfg.encoding_epochs):
        loss, grads = encoder_loss_and_grads(enc)
        if not np.isfinite(loss):
            raise TrainingFault(f"encoder loss diverged (non-finite) at epoch {epoch}")
        trace.append(loss)
        nn.adam_step(params, grads, state, cfg.learning_rate)
    enc.trained = True
    enc.loss_trace = trace
    return trace


def train_encoder(graph, cfg, graph_id=0):
    enc = build_encoder(graph, cfg, graph_id=graph_id)
    fit_encoder(enc, cfg)
    return enc


# --- checkpointing -----------------------------------------------------------

def encoder_to_checkpoint(enc, cfg):
    meta = {"graph_id": str(enc.graph_id), "config_hash": cfg.hash(),
            "node_count": enc.node_count, "embed_dim": enc.embed_dim,
            "hidden_layers": len(enc.hidden), "trained": enc.trained,
            "graph": enc.graph.to_json_dict()}
    return nn.params_to_checkpoint(enc.params(), meta=meta)


def encoder_from_checkpoint(ckpt):
    from .graphs import Graph
    params = nn.params_from_checkpoint(ckpt)
    meta = ckpt["meta"]
    graph = Graph.from_json_dict(meta["graph"])
    hidden = [DenseLayer(params[f"hidden{k}.weight"], params[f"hidden{k}.bias"], "relu")
              for k in range(meta["hidden_layers"])]
    output = DenseLayer(params["output.weight"], params["output.bias"], "identity")
    enc = SourceEncoder(graph, meta["graph_id"], params["embedding"], hidden, output)
    enc.trained = bool(meta["trained"])
    return enc


def save_encoder(enc, cfg, path):
    with open(path, "w") as f:
        json.dump(encoder_to_checkpoint(enc, cfg), f)


def load_encoder(path):
    with open(path) as f:
        return encoder_from_checkpoint(json.load(f))
