"""Cross-graph attention: align target nodes onto a frozen source encoder.

The forward map sends each target node to a softmax distribution over source
nodes and takes the matching mixture of the frozen source's neighbor
probabilities (a differentiable relaxation of routing each target node to one
source node); a row-stochastic reverse map then carries those source-neighbor
probabilities back to target-neighbor probabilities. Every augmented
prediction is a convex mixture of the source's own predictions, so the
augmented encoder can never predict sharper than the source it wraps.
Label-consistency penalties (node and edge, on both maps) pull the alignment
toward label-preserving ones.
"""

import numpy as np

from . import nn
from .encoder import ContractViolation, TrainingFault, derive_seed
from .graphs import (GraphError, edge_attr_matrix, neighborhood_attr_matrix,
                     node_label_onehot)

_LOG_FLOOR = 1e-12
_PROB_FLOOR = 1e-9


class AttentionPair:
    """Logit matrices of the two alignment maps for one (target, source) pair."""

    def __init__(self, forward, reverse):
        # forward: |V_S| x |V_T|; column u is the logit vector of target node u
        # reverse: |V_T| x |V_S|; row j holds the mixture logits of target node j
        if forward.shape != reverse.shape[::-1]:
            raise nn.ShapeError(f"forward {forward.shape} incompatible with reverse {reverse.shape}")
        self.forward = forward
        self.reverse = reverse

    @property
    def source_nodes(self):
        return self.forward.shape[0]

    @property
    def target_nodes(self):
        return self.forward.shape[1]

    def params(self):
        return {"forward": self.forward, "reverse": self.reverse}


class AugmentedEncoder:
    """A frozen source encoder wrapped by an attention pair for one target graph."""

    def __init__(self, source, attention, target_graph, target_graph_id=None):
        if attention.source_nodes != source.node_count:
            raise nn.ShapeError("attention rows do not match source node count")
        if attention.target_nodes != target_graph.node_count:
            raise nn.ShapeError("attention cols do not match target node count")
        self.source = source
        self.attention = attention
        self.target_graph = target_graph
        self.target_graph_id = target_graph_id
        self.loss_trace = []


def init_attention(source, target_graph, rng, scale=1e-2):
    """Near-uniform start by default: tiny noise breaks symmetric-node ties."""
    n_s, n_t = source.node_count, target_graph.node_count
    fwd = rng.uniform(-1, 1, size=(n_s, n_t)) * scale
    rev = rng.uniform(-1, 1, size=(n_t, n_s)) * scale
    return AttentionPair(fwd, rev)


# (init scale, learning-rate multiplier) cycled over restarts; the mix of
# near-uniform and spread-out starts escapes collapsed many-to-one alignments
_RESTART_SCHEDULE = ((1e-2, 1.0), (0.3, 3.0), (1e-2, 3.0), (0.3, 1.0), (0.1, 2.0))


def attention_matrix(pair):
    """Column-stochastic alignment: entry (v, u) = Pr(source v | target u)."""
    return nn.softmax(pair.forward, axis=0)


def attention_dist(pair, u):
    if not (0 <= u < pair.target_nodes):
        raise ValueError(f"target node {u} out of range")
    return nn.softmax(pair.forward[:, u], axis=-1)


def reverse_attention_matrix(pair):
    """Column-stochastic reverse alignment: entry (u, v) = Pr(target u | source v)."""
    return nn.softmax(pair.reverse, axis=0)


def reverse_mixture_matrix(pair):
    """Row-stochastic mixture weights: row j mixes source predictions into the
    prediction for target node j. Keeps augmented outputs inside [0, 1]."""
    return nn.softmax(pair.reverse, axis=1)


def source_prob_matrix(source):
    """The frozen source's own neighbor probabilities, |V_S| x |V_S|."""
    scores, _ = nn.forward(source.layers, source.embedding)
    return nn.sigmoid(scores)


def augmented_neighbor_probs(ae):
    """Target neighbor probabilities for every target node (row u = node u).

    Row u is the attention mixture of source prediction rows, mapped back to
    target nodes by the reverse mixture; every entry is a convex combination
    of frozen source probabilities, so the augmented encoder cannot predict
    any edge more confidently than the source itself does.
    """
    p = attention_matrix(ae.attention)
    s = source_prob_matrix(ae.source)
    w = reverse_mixture_matrix(ae.attention)
    return (p.T @ s) @ w.T


def augmented_logits_all(ae):
    """Same predictions in logit form: sigmoid of these recovers the probs."""
    p = np.clip(augmented_neighbor_probs(ae), _PROB_FLOOR, 1.0 - _PROB_FLOOR)
    return np.log(p) - np.log1p(-p)


def augmented_forward(ae, u):
    if not (0 <= u < ae.target_graph.node_count):
        raise ValueError(f"target node {u} out of range")
    return augmented_logits_all(ae)[u]


def _bce_probs(pred, target):
    """Full BCE on probabilities with a clip floor; gradient is masked where
    the clip is active so it stays the exact derivative of the clipped loss."""
    p = np.clip(pred, _PROB_FLOOR, 1.0 - _PROB_FLOOR)
    loss = float(-np.sum(target * np.log(p) + (1.0 - target) * np.log1p(-p)))
    inside = (pred > _PROB_FLOOR) & (pred < 1.0 - _PROB_FLOOR)
    grad = np.where(inside, (p - target) / (p * (1.0 - p)), 0.0)
    return loss, grad


def _check_shared_node_vocab(ae):
    s, t = ae.source.graph, ae.target_graph
    if s.node_labels is None or t.node_labels is None:
        raise GraphError("both graphs must have node labels")
    if s.num_node_labels != t.num_node_labels:
        raise GraphError("node label vocabularies differ between the pair")


def _check_shared_edge_vocab(ae):
    s, t = ae.source.graph, ae.target_graph
    if s.edge_labels is None or t.edge_labels is None:
        raise GraphError("both graphs must have edge labels")
    if s.num_edge_labels != t.num_edge_labels:
        raise GraphError("edge label vocabularies differ between the pair")


def node_attr_inferred(ae, u):
    """Label distribution of target node u as routed through the alignment."""
    _check_shared_node_vocab(ae)
    return node_label_onehot(ae.source.graph).T @ attention_dist(ae.attention, u)


def _avg_cross_entropy(observed, inferred):
    """Mean over rows of CE(observed row || inferred row), with a log floor."""
    q = np.maximum(inferred, _LOG_FLOOR)
    return float(-np.sum(observed * np.log(q)) / observed.shape[0])


def attr_reg_loss(ae, kind, side):
    """One of the four label-consistency penalties, from the current attention."""
    if kind not in ("node", "edge") or side not in ("forward", "reverse"):
        raise ValueError(f"bad regularizer selector ({kind!r}, {side!r})")
    s, t = ae.source.graph, ae.target_graph
    if kind == "node":
        _check_shared_node_vocab(ae)
    else:
        _check_shared_edge_vocab(ae)
    if side == "forward":
        p = attention_matrix(ae.attention)
        source_feats = node_label_onehot(s) if kind == "node" else edge_attr_matrix(s)
        observed = node_label_onehot(t) if kind == "node" else edge_attr_matrix(t)
        return _avg_cross_entropy(observed, p.T @ source_feats)
    p = reverse_attention_matrix(ae.attention)
    target_feats = neighborhood_attr_matrix(t, kind)
    observed = neighborhood_attr_matrix(s, kind)
    return _avg_cross_entropy(observed, p.T @ target_feats)


def _reg_terms(ae, cfg):
    """Active (side, coef, source-side features, observed) tuples for training."""
    s, t = ae.source.graph, ae.target_graph
    terms = []
    if cfg.node_reg_coef > 0 and s.node_labels is not None and t.node_labels is not None:
        _check_shared_node_vocab(ae)
        terms.append(("forward", cfg.node_reg_coef, node_label_onehot(s), node_label_onehot(t)))
        terms.append(("reverse", cfg.node_reg_coef,
                      neighborhood_attr_matrix(t, "node"), neighborhood_attr_matrix(s, "node")))
    if cfg.edge_reg_coef > 0 and s.edge_labels is not None and t.edge_labels is not None:
        _check_shared_edge_vocab(ae)
        terms.append(("forward", cfg.edge_reg_coef, edge_attr_matrix(s), edge_attr_matrix(t)))
        terms.append(("reverse", cfg.edge_reg_coef,
                      neighborhood_attr_matrix(t, "edge"), neighborhood_attr_matrix(s, "edge")))
    return terms


def _ce_loss_and_gq(observed, q, coef, rows):
    qc = np.maximum(q, _LOG_FLOOR)
    loss = -coef * np.sum(observed * np.log(qc)) / rows
    gq = np.where(q > _LOG_FLOOR, -(coef / rows) * observed / qc, 0.0)
    return loss, gq


def attention_loss_and_grads(ae, cfg, reg_terms=None):
    """Total training loss and analytic gradients wrt the two attention matrices.

    Total = structural BCE on the target adjacency + weighted label penalties.
    The source encoder is a constant here; nothing propagates into it.
    """
    source, pair, target = ae.source, ae.attention, ae.target_graph
    if reg_terms is None:
        reg_terms = _reg_terms(ae, cfg)
    n_t = target.node_count

    # structural path; s is constant because the source is frozen
    p = nn.softmax(pair.forward, axis=0)
    s = getattr(ae, "_source_probs", None)
    if s is None:
        s = ae._source_probs = source_prob_matrix(source)
    w = nn.softmax(pair.reverse, axis=1)
    mixrows = p.T @ s
    pred = mixrows @ w.T
    loss, g_pred = _bce_probs(pred, target.adjacency_matrix())
    g_w = g_pred.T @ mixrows
    g_reverse = w * (g_w - np.sum(w * g_w, axis=1, keepdims=True))
    g_p = s @ (g_pred @ w).T

    # forward-side penalties act on the softmax alignment p
    p_rev = None
    g_p_rev = np.zeros_like(pair.reverse)
    for side, coef, feats, observed in reg_terms:
        if side == "forward":
            term, gq = _ce_loss_and_gq(observed, p.T @ feats, coef, n_t)
            loss += term
            g_p += feats @ gq.T
        else:
            if p_rev is None:
                p_rev = nn.softmax(pair.reverse, axis=0)
            term, gq = _ce_loss_and_gq(observed, p_rev.T @ feats, coef, source.node_count)
            loss += term
            g_p_rev += feats @ gq.T

    # softmax (per column) backward for both maps
    g_forward = p * (g_p - np.sum(p * g_p, axis=0, keepdims=True))
    if p_rev is not None:
        g_reverse = g_reverse + p_rev * (g_p_rev - np.sum(p_rev * g_p_rev, axis=0, keepdims=True))

    return float(loss), {"forward": g_forward, "reverse": g_reverse}


def structural_loss(ae):
    """Target BCE under the augmented encoder, without penalties."""
    pred = augmented_neighbor_probs(ae)
    loss, _ = _bce_probs(pred, ae.target_graph.adjacency_matrix())
    return loss


def _fit_attention_once(source, target_graph, cfg, target_graph_id, restart):
    scale, lr_mult = _RESTART_SCHEDULE[restart % len(_RESTART_SCHEDULE)]
    rng = np.random.default_rng(
        derive_seed("attention", source.graph_id, target_graph_id, cfg.rng_seed, restart))
    pair = init_attention(source, target_graph, rng, scale=scale)
    ae = AugmentedEncoder(source, pair, target_graph, target_graph_id=target_graph_id)
    reg_terms = _reg_terms(ae, cfg)

    params = pair.params()
    state = nn.AdamState()
    lr = cfg.learning_rate * lr_mult
    trace = []
    for epoch in range(cfg.scoring_epochs):
        loss, grads = attention_loss_and_grads(ae, cfg, reg_terms=reg_terms)
        if not np.isfinite(loss):
            raise TrainingFault(f"attention loss diverged (non-finite) at epoch {epoch}")
        trace.append(loss)
        nn.adam_step(params, grads, state, lr)
    ae.loss_trace = trace
    return ae


def train_attention(source, target_graph, cfg, target_graph_id=None, restarts=1):
    """Fit the attention pair against a frozen source encoder.

    Runs scoring_epochs of full-batch Adam on the attention matrices only.
    The alignment objective is non-convex; with restarts > 1 several seeded
    inits are trained and the one with the lowest final training loss wins.
    Deterministic given (source.graph_id, target_graph_id, cfg.rng_seed).
    """
    if not source.trained:
        raise ContractViolation("source encoder must be trained and frozen before alignment")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for restart in range(restarts):
        ae = _fit_attention_once(source, target_graph, cfg, target_graph_id, restart)
        final = ae.loss_trace[-1] if ae.loss_trace else float("inf")
        if best is None or final < best[0]:
            best = (final, ae)
    return best[1]


def argmax_alignment(ae):
    """Hard alignment: for each target node, its strongest source node."""
    return np.argmax(attention_matrix(ae.attention), axis=0)
