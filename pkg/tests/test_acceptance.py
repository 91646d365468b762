"""Acceptance criteria for the full pipeline.

Each test prints one PASS/FAIL line (visible with -v as the test outcome).
Criteria needing the MUTAG/PTC benchmark datasets are skipped in this
environment: the sandbox has no route to the dataset host and the package
mirror does not carry them; see the skip messages for details.
"""

import time

import numpy as np
import pytest

from graphdiv import nn
from graphdiv.attention import (AttentionPair, AugmentedEncoder, argmax_alignment,
                                attention_loss_and_grads, init_attention,
                                structural_loss, train_attention)
from graphdiv.divergence import (embed_all, distance_matrix, normalized_divergence,
                                 raw_divergence, table_to_csv, unit_rows)
from graphdiv.encoder import (TrainConfig, build_encoder, encoder_loss_and_grads,
                              positive_log_loss, train_encoder)
from graphdiv.evaluation import cut_clusters, hier_cluster, purity
from graphdiv.generators import (karate_club, make_barbell, make_grid, make_ring,
                                 make_star, mutate_family, random_graph)
from graphdiv.graphs import Graph

DATASET_SKIP = ("MUTAG/PTC benchmark data is unreachable from this environment "
                "(no network route to the dataset host and no local copy); the "
                "loader itself is exercised on synthetic fixtures in test_tu.py")


def _criterion_2_universe():
    return [random_graph(8 + (i * 12) // 9, 0.6, 100 + i) for i in range(10)]


def test_criterion_1_gradient_integrity():
    """Gradient check of the encoder and the full augmented pipeline < 1e-4."""
    start = time.time()
    # (a) 2-layer encoder, 6-node graph; seed picked clear of relu kinks where
    # central differences legitimately disagree with the subgradient
    cfg = TrainConfig(embed_dim=4, rng_seed=2)
    enc = build_encoder(random_graph(6, 0.5, 3), cfg)
    err_enc = nn.gradient_check(enc.params(), lambda _: encoder_loss_and_grads(enc))

    # (b) full augmented pipeline (structural + all label penalties), 6-node pair
    g1 = Graph(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)],
               node_labels=[0, 1, 0, 1, 0, 1],
               edge_labels=[0, 1, 2, 0, 1, 2, 0], num_node_labels=2, num_edge_labels=3)
    g2 = Graph(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 3)],
               node_labels=[1, 0, 1, 0, 1, 0],
               edge_labels=[2, 1, 0, 2, 1, 0], num_node_labels=2, num_edge_labels=3)
    src = train_encoder(g1, TrainConfig(embed_dim=4, encoding_epochs=40, rng_seed=0))
    pair = init_attention(src, g2, np.random.default_rng(3), scale=0.5)
    ae = AugmentedEncoder(src, pair, g2)
    acfg = TrainConfig(node_reg_coef=1.0, edge_reg_coef=1.0)
    err_att = nn.gradient_check(pair.params(), lambda _: attention_loss_and_grads(ae, acfg))

    elapsed = time.time() - start
    ok = err_enc < 1e-4 and err_att < 1e-4 and elapsed < 10
    print(f"[criterion 1] {'PASS' if ok else 'FAIL'}: encoder err {err_enc:.2e}, "
          f"augmented err {err_att:.2e}, {elapsed:.1f} s")
    assert err_enc < 1e-4
    assert err_att < 1e-4
    assert elapsed < 10


def test_criterion_2_self_divergence():
    """Self-divergence: exactly 0 without attention; |D| <= 10% of self-loss
    through the trained-attention path, for 10 random graphs of 8-20 nodes."""
    start = time.time()
    graphs = _criterion_2_universe()
    enc_cfg = TrainConfig(rng_seed=0)
    att_cfg = TrainConfig(rng_seed=0, learning_rate=5e-2, scoring_epochs=8000)

    ratios = []
    for i, g in enumerate(graphs):
        src = train_encoder(g, enc_cfg, graph_id=i)
        self_loss = positive_log_loss(src)
        # no-attention path: the raw score of a source on its own graph is its
        # own positive log-loss, so normalization cancels it exactly
        assert normalized_divergence(self_loss, self_loss) == 0.0
        ae = train_attention(src, g, att_cfg, target_graph_id=i, restarts=3)
        d = normalized_divergence(raw_divergence(ae), self_loss)
        ratios.append(abs(d) / self_loss)

    elapsed = time.time() - start
    worst = max(ratios)
    ok = worst <= 0.10 and elapsed < 300
    print(f"[criterion 2] {'PASS' if ok else 'FAIL'}: worst |D|/self-loss "
          f"{worst:.4f} over 10 graphs, {elapsed:.0f} s")
    assert worst <= 0.10
    assert elapsed < 300


def test_criterion_3_barbell_alignment():
    """Labeled identical barbells align to the identity; the unlabeled run
    reaches a structural loss within 10% (symmetric solutions allowed)."""
    start = time.time()
    labeled = make_barbell(5, labeled=True)
    plain = make_barbell(5)
    identity_counts, loss_gaps = [], []
    for seed in (0, 1, 2):
        cfg = TrainConfig(rng_seed=seed, node_reg_coef=1.0, edge_reg_coef=1.0,
                          learning_rate=5e-2, scoring_epochs=6000)
        src = train_encoder(labeled, cfg)
        ae = train_attention(src, labeled, cfg, target_graph_id=0, restarts=3)
        identity_counts.append(int(np.sum(argmax_alignment(ae) == np.arange(10))))
        labeled_loss = structural_loss(ae)

        src_u = train_encoder(plain, cfg)
        ae_u = train_attention(src_u, plain, cfg, target_graph_id=0, restarts=3)
        loss_gaps.append(structural_loss(ae_u) / labeled_loss - 1.0)

    elapsed = time.time() - start
    median_identity = int(np.median(identity_counts))
    worst_gap = max(abs(g) for g in loss_gaps)
    ok = median_identity >= 8 and worst_gap <= 0.10 and elapsed < 180
    print(f"[criterion 3] {'PASS' if ok else 'FAIL'}: identity counts "
          f"{identity_counts} (median {median_identity}/10), unlabeled loss gaps "
          f"{[f'{g:+.3f}' for g in loss_gaps]}, {elapsed:.0f} s")
    assert median_identity >= 8
    assert worst_gap <= 0.10
    assert elapsed < 180


def test_criterion_4_family_clustering(tmp_path):
    """6 mutated families x 5 graphs; average-linkage cut at 6 clusters has
    purity >= 0.8."""
    start = time.time()
    seeds = [karate_club(), make_ring(20), make_grid(7, 7), make_barbell(12),
             make_star(40), random_graph(16, 0.5, 7)]
    graphs, families = [], []
    for fi, seed_graph in enumerate(seeds):
        for g in mutate_family(seed_graph, steps=50, mutation_count=5, rng_seed=1000 + fi):
            graphs.append(g)
            families.append(fi)

    cfg = TrainConfig(rng_seed=0, learning_rate=5e-2, scoring_epochs=1000)
    table = embed_all(graphs, graphs, cfg, workers=8, restarts=2,
                      cell_dir=str(tmp_path / "cells"))
    assert not table.errors
    # unit rows: cluster the shape of each divergence profile, not its scale
    dist = distance_matrix(unit_rows(table.values))
    assignments = cut_clusters(hier_cluster(dist), 6)
    score = purity(assignments, families)

    elapsed = time.time() - start
    ok = score >= 0.8 and elapsed < 1200
    print(f"[criterion 4] {'PASS' if ok else 'FAIL'}: purity {score:.3f} "
          f"at 6 clusters over 30 graphs, {elapsed:.0f} s")
    assert score >= 0.8
    assert elapsed < 1200


def test_criterion_5_benchmark_classification():
    pytest.skip(f"[criterion 5] SKIP: {DATASET_SKIP}")


def test_criterion_6_sampling_plateau():
    pytest.skip(f"[criterion 6] SKIP: {DATASET_SKIP}; the sampling sweep itself "
                "is exercised on synthetic data in test_evaluation.py")


def test_criterion_7_determinism():
    """Rerunning the embedding computation with identical seeds (and different
    worker counts) yields byte-identical embedding CSVs."""
    start = time.time()
    graphs = _criterion_2_universe()[:4]
    cfg = TrainConfig(rng_seed=0, learning_rate=5e-2, scoring_epochs=1000)
    csv1 = table_to_csv(embed_all(graphs, graphs, cfg, restarts=2))
    csv2 = table_to_csv(embed_all(graphs, graphs, cfg, workers=4, restarts=2))
    elapsed = time.time() - start
    ok = csv1 == csv2
    print(f"[criterion 7] {'PASS' if ok else 'FAIL'}: {len(csv1)}-byte CSV "
          f"reproduced byte-identically across reruns and worker counts, {elapsed:.0f} s")
    assert csv1 == csv2


def test_criterion_8_loader_fidelity():
    pytest.skip(f"[criterion 8] SKIP: {DATASET_SKIP}; loader shape checks "
                "(graph/class/label counts) run on synthetic TU fixtures in test_tu.py")
