"""Divergence scores, the pairwise embedding table, and kernel/distance matrices.

Row j of the table is the embedding of target graph j: its normalized
divergence against every source graph. Cells are independent jobs, each
seeded from (source id, target id, base seed), so results are identical
regardless of worker count and the table is resumable cell by cell.
"""

import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .attention import augmented_neighbor_probs, train_attention
from .encoder import train_encoder, positive_log_loss


@dataclass
class DivergenceTable:
    source_ids: list
    target_ids: list
    values: np.ndarray          # M x N, row j = embedding of target j
    self_losses: np.ndarray     # N, positive self log-loss of each source encoder
    errors: dict = field(default_factory=dict)  # (target_idx, source_idx) -> message

    def embedding(self, target_idx):
        return self.values[target_idx]


def raw_divergence(ae, target=None):
    """Positive-edge log-loss of the target graph under the augmented encoder.

    -sum log p(u, v) over both orientations of every target edge; nonnegative
    because the predictions are probabilities.
    """
    g = ae.target_graph if target is None else target
    p = np.maximum(augmented_neighbor_probs(ae), 1e-300)
    total = 0.0
    for u, v in g.edges:
        total -= np.log(p[u, v]) + np.log(p[v, u])
    return float(total)


def normalized_divergence(raw, self_loss):
    """Subtract the source's own log-loss; zero for the source on itself, and
    deliberately allowed to go negative."""
    return raw - self_loss


def symmetric_divergence(d_ts, d_st):
    return d_ts + d_st


def kernel_value(psi_a, psi_b):
    """Squared Euclidean distance between two embeddings."""
    a = np.asarray(psi_a, dtype=float)
    b = np.asarray(psi_b, dtype=float)
    if a.shape != b.shape:
        raise nn.ShapeError(f"embedding lengths differ: {a.shape} vs {b.shape}")
    diff = a - b
    return float(diff @ diff)


def distance_matrix(embeddings):
    """Pairwise squared Euclidean distances between embedding rows."""
    x = np.asarray(embeddings, dtype=float)
    sq = np.sum(x * x, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    d = np.maximum(d, 0.0)
    # clear float residue so exact symmetry/zero-diagonal checks hold downstream
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    return d


def unit_rows(embeddings):
    """Scale each embedding row to unit norm (zero rows pass through).

    Raw divergences grow with the target graph's size, so distances between
    raw rows mostly measure size; unit rows compare the divergence profile
    shape instead, which is what family clustering needs.
    """
    x = np.asarray(embeddings, dtype=float)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norms > 0, norms, 1.0)


def rbf_kernel_matrix(embeddings, gamma=1.0):
    return np.exp(-gamma * distance_matrix(embeddings))


def _score_cell(source_enc, target, cfg, source_id, target_id, restarts):
    """One (target, source) cell with a single reseeded retry on failure."""
    try:
        ae = train_attention(source_enc, target, cfg, target_graph_id=target_id,
                             restarts=restarts)
        return raw_divergence(ae), None
    except Exception as first:
        try:
            ae = train_attention(source_enc, target, cfg,
                                 target_graph_id=f"{target_id}#retry", restarts=restarts)
            return raw_divergence(ae), None
        except Exception as second:
            return float("nan"), f"{first}; retry: {second}"


def _score_chunk(args):
    source_enc, jobs, cfg, restarts = args
    out = []
    for target, source_id, target_id, ti, si in jobs:
        raw, err = _score_cell(source_enc, target, cfg, source_id, target_id, restarts)
        out.append((ti, si, raw, err))
    return out


def _atomic_write_json(path, payload):
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            json.dump(payload, f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell_path(cell_dir, cfg, source_id, target_id):
    return os.path.join(cell_dir, f"cell_{cfg.hash()}_t{target_id}_s{source_id}.json")


def train_source_encoders(sources, cfg, source_ids=None, workers=1):
    """Stage 1: one encoder per source graph, trainable in parallel."""
    if source_ids is None:
        source_ids = list(range(len(sources)))
    args = list(zip(sources, [cfg] * len(sources), source_ids))
    if workers > 1 and len(sources) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_train_one_encoder, args))
    return [_train_one_encoder(a) for a in args]


def _train_one_encoder(args):
    graph, cfg, graph_id = args
    return train_encoder(graph, cfg, graph_id=graph_id)


def embed_all(sources, targets, cfg, *, source_ids=None, target_ids=None,
              workers=1, cell_dir=None, encoders=None, restarts=3):
    """Train N source encoders, then score all M x N pairs.

    Deterministic given ids and cfg.rng_seed; a failing cell is retried once
    and otherwise recorded in table.errors (value NaN) without aborting the
    rest. With cell_dir set, completed cells are persisted and reused.
    Each cell keeps the best of `restarts` attention fits (non-convex).
    """
    if not sources or not targets:
        raise ValueError("sources and targets must be nonempty")
    if source_ids is None:
        source_ids = list(range(len(sources)))
    if target_ids is None:
        target_ids = list(range(len(targets)))

    if encoders is None:
        encoders = train_source_encoders(sources, cfg, source_ids=source_ids, workers=workers)
    self_losses = np.array([positive_log_loss(enc) for enc in encoders])

    values = np.full((len(targets), len(sources)), np.nan)
    errors = {}

    done = set()
    if cell_dir is not None:
        os.makedirs(cell_dir, exist_ok=True)
        for ti, tid in enumerate(target_ids):
            for si, sid in enumerate(source_ids):
                path = _cell_path(cell_dir, cfg, sid, tid)
                if os.path.isfile(path):
                    with open(path) as f:
                        cell = json.load(f)
                    values[ti, si] = cell["raw"] - self_losses[si]
                    if cell.get("error"):
                        errors[(ti, si)] = cell["error"]
                    done.add((ti, si))

    jobs_by_source = {si: [] for si in range(len(sources))}
    for ti, target in enumerate(targets):
        for si in range(len(sources)):
            if (ti, si) not in done:
                jobs_by_source[si].append((target, source_ids[si], target_ids[ti], ti, si))
    chunks = [(encoders[si], jobs, cfg, restarts) for si, jobs in jobs_by_source.items() if jobs]

    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = ex.map(_score_chunk, chunks)
    else:
        results = map(_score_chunk, chunks)

    for chunk_result in results:
        for ti, si, raw, err in chunk_result:
            values[ti, si] = normalized_divergence(raw, self_losses[si])
            if err is not None:
                errors[(ti, si)] = err
            if cell_dir is not None:
                _atomic_write_json(_cell_path(cell_dir, cfg, source_ids[si], target_ids[ti]),
                                   {"source_id": source_ids[si], "target_id": target_ids[ti],
                                    "raw": raw, "error": err})

    return DivergenceTable(list(source_ids), list(target_ids), values, self_losses, errors)


def symmetrize(table):
    """D(S,T) = D(T||S) + D(S||T); requires sources == targets."""
    if list(table.source_ids) != list(table.target_ids):
        raise ValueError("symmetric divergence needs sources == targets")
    sym = table.values + table.values.T
    return DivergenceTable(list(table.source_ids), list(table.target_ids), sym,
                           table.self_losses.copy(), dict(table.errors))


# --- CSV output --------------------------------------------------------------

def _fmt(x):
    return repr(float(x))


def table_to_csv(table):
    """Embeddings CSV: header of source ids, one row per target graph."""
    lines = ["graph_id," + ",".join(str(s) for s in table.source_ids)]
    for ti, tid in enumerate(table.target_ids):
        lines.append(f"{tid}," + ",".join(_fmt(v) for v in table.values[ti]))
    return "\n".join(lines) + "\n"


def table_from_csv(text):
    lines = [l for l in text.strip().splitlines() if l]
    source_ids = lines[0].split(",")[1:]
    target_ids, rows = [], []
    for line in lines[1:]:
        parts = line.split(",")
        target_ids.append(parts[0])
        rows.append([float(x) for x in parts[1:]])
    values = np.array(rows)
    return DivergenceTable(source_ids, target_ids, values, np.full(len(source_ids), np.nan))


def distance_csv(ids, dist):
    lines = ["graph_id," + ",".join(str(i) for i in ids)]
    for i, gid in enumerate(ids):
        lines.append(f"{gid}," + ",".join(_fmt(v) for v in dist[i]))
    return "\n".join(lines) + "\n"
