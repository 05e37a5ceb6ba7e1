"""Smoke tests for the python bindings: build a small graph, score it,
train briefly, and rank targets."""

import math

import pytest

import rex


@pytest.fixture()
def toy_graph():
    triples = [
        ("aspirin", "binds", "ptgs2"),
        ("ptgs2", "assoc", "fever"),
        ("aspirin", "binds", "braf"),
        ("braf", "assoc", "melanoma"),
        ("ibuprofen", "binds", "ptgs2"),
    ]
    return rex.KnowledgeGraph.from_triples(triples)


def test_graph_indexing(toy_graph):
    kg = toy_graph
    assert kg.num_triples() == 5
    assert kg.num_entities() == 6
    assert kg.num_relations() == 2
    ptgs2 = kg.entity_id("ptgs2")
    assert kg.degree(ptgs2) == 3
    assert kg.degree_by_relation(ptgs2, kg.relation_id("binds")) == 2
    neighbors = kg.neighbors(kg.entity_id("aspirin"))
    assert len(neighbors) == 2


def test_inverse_augmentation(toy_graph):
    augmented = rex.add_inverse_edges(toy_graph)
    assert augmented.num_triples() == 10
    assert augmented.num_relations() == 4
    again = rex.add_inverse_edges(augmented)
    assert again.num_triples() == 10


def test_information_content(toy_graph):
    kg = toy_graph
    table = rex.compute_ic_table(kg, rex.ICMode.IC)
    ptgs2 = kg.entity_id("ptgs2")
    expected = -math.log(kg.degree(ptgs2) / kg.num_triples())
    assert rex.node_ic(kg, ptgs2) == pytest.approx(expected, abs=1e-12)
    assert table.raw(ptgs2) == pytest.approx(expected, abs=1e-12)
    assert 0.0 <= table.normalized(ptgs2) <= 1.0


def test_clustering_pipeline(toy_graph):
    kg = toy_graph
    emb = rex.fallback_embeddings(kg, 4, seed=5)
    assert emb.dim == 4
    clusters = rex.kmeans_cluster(emb, 2, seed=5)
    assert sorted(set(clusters.cluster_of)) == [0, 1]
    clustered = rex.build_clustered_graph(kg, clusters)
    assert clustered.num_entities() == 2
    assert clustered.num_triples() <= kg.num_triples()


def test_train_and_beam_search():
    triples = [("drug", "targets", "gene"), ("gene", "assoc", "disease")]
    for k in range(3):
        triples.append(("drug", "noise", f"x{k}"))
        triples.append(("gene", "noise", f"y{k}"))
    kg = rex.KnowledgeGraph.from_triples(triples)
    table = rex.compute_ic_table(kg, rex.ICMode.IC)

    cfg = rex.RewardConfig()
    cfg.max_len = 2
    cfg.rollouts = 20
    cfg.epochs = 60
    cfg.batch_size = 1
    cfg.entity_dim = 8
    cfg.relation_dim = 8
    cfg.hidden_dim = 16
    cfg.mlp_hidden_dim = 16
    cfg.learning_rate = 0.1
    cfg.seed = 3

    hypothesis = rex.Hypothesis(
        kg.entity_id("drug"), kg.relation_id("targets"), kg.entity_id("disease")
    )
    result = rex.train(kg, [hypothesis], cfg, table)
    assert result.epochs_done == 60
    assert len(result.log) == 60
    assert result.log[-1].mean_fidelity > result.log[0].mean_fidelity

    ranked = rex.beam_search_infer(
        kg, result.params, kg.entity_id("drug"), kg.relation_id("targets"), 10, 2
    )
    assert ranked[0].entity == kg.entity_id("disease")
    path = ranked[0].path
    assert len(path) == 2
    assert path.source == kg.entity_id("drug")


def test_metrics():
    ranks = [1, 2, 4]
    assert rex.hits_at_k(ranks, 3) == pytest.approx(2.0 / 3.0)
    assert rex.mrr(ranks) == pytest.approx(0.5833333333, abs=1e-9)
    assert rex.mrr([rex.RANK_NOT_FOUND]) == 0.0


def test_metapath(toy_graph):
    kg = toy_graph
    kg.apply_entity_types(
        {"aspirin": "Compound", "ptgs2": "Gene", "fever": "Disease"}
    )
    path = rex.Path()
    path.source = kg.entity_id("aspirin")
    path.target = kg.entity_id("fever")
    path.triples = [
        rex.Triple(
            kg.entity_id("aspirin"), kg.relation_id("binds"), kg.entity_id("ptgs2")
        ),
        rex.Triple(
            kg.entity_id("ptgs2"), kg.relation_id("assoc"), kg.entity_id("fever")
        ),
    ]
    mp = rex.metapath_of(path, kg)
    assert str(mp) == "Compound|binds|Gene|assoc|Disease"


def test_errors_are_python_exceptions(toy_graph):
    with pytest.raises(rex.RexError):
        toy_graph.entity_id("nonexistent")
