import math

import numpy as np
import pytest

from pieclam import geometry
from pieclam.anomaly import (AnomalyConfig, AnomalyResult, detect,
                             plant_rewired_anomalies, score_prior,
                             score_prior_star, score_star)
from pieclam.flow import identity_flow
from pieclam.graphs import build_graph, sample_sbm, two_block_assortative_sbm
from pieclam.trainer import AFFILIATIONS, PRIOR, Phase, Schedule


def path_graph(n):
    return build_graph(n, [[i, i + 1] for i in range(n - 1)])


def test_star_score_hand_value():
    # Two nodes joined by one edge at pairing exactly 1.
    graph = build_graph(2, [[0, 1]])
    sig = geometry.euclidean(1)
    f = np.ones((2, 1))
    scores = score_star(f, graph, sig)
    expected = -math.log(1.0 - math.exp(-1.0))
    assert scores[0] == pytest.approx(expected, rel=1e-12)
    assert scores[1] == pytest.approx(expected, rel=1e-12)


def test_star_score_sums_over_neighbors():
    graph = path_graph(3)
    sig = geometry.euclidean(1)
    f = np.array([[1.0], [2.0], [0.5]])
    scores = score_star(f, graph, sig)
    term = lambda x: -math.log(1.0 - math.exp(-x))
    assert scores[1] == pytest.approx(term(2.0) + term(1.0), rel=1e-12)
    assert scores[0] == pytest.approx(term(2.0), rel=1e-12)


def test_star_score_saturated_edges_vanish():
    graph = build_graph(2, [[0, 1]])
    sig = geometry.euclidean(1)
    scores = score_star(np.full((2, 1), 40.0), graph, sig)
    assert np.abs(scores).max() <= 1e-12


def test_star_score_isolated_node_is_zero():
    graph = build_graph(3, [[0, 1]])
    sig = geometry.euclidean(2)
    scores = score_star(np.ones((3, 2)), graph, sig)
    assert scores[2] == 0.0
    assert scores[0] > 0.0


def test_prior_score_identity_flow():
    flow = identity_flow(2)
    scores = score_prior(np.zeros((3, 2)), flow)
    assert np.allclose(scores, math.log(2 * math.pi), atol=1e-12)
    # Mass further from the origin is more surprising.
    far = score_prior(np.full((1, 2), 3.0), flow)
    assert far[0] > scores[0]


def test_prior_star_is_exact_sum():
    graph = path_graph(5)
    sig = geometry.lorentz(1)
    rng = np.random.default_rng(0)
    f = geometry.random_affiliations(5, sig, rng)
    flow = identity_flow(sig.dim)
    combined = score_prior_star(f, graph, sig, flow)
    assert np.array_equal(combined,
                          score_star(f, graph, sig) + score_prior(f, flow))


def test_config_validation():
    AnomalyConfig(criterion="S", model="bigclam")
    AnomalyConfig(criterion="PS", model="pieclam")
    with pytest.raises(ValueError, match="criterion"):
        AnomalyConfig(criterion="SP")
    with pytest.raises(ValueError, match="model"):
        AnomalyConfig(model="gclam")
    with pytest.raises(ValueError, match="prior-bearing"):
        AnomalyConfig(criterion="P", model="ieclam")
    with pytest.raises(ValueError, match="prior-bearing"):
        AnomalyConfig(criterion="PS", model="bigclam")


def test_config_dict_roundtrip():
    schedule = Schedule((Phase(AFFILIATIONS, 10, 1e-4),
                         Phase(PRIOR, 5, 1e-3, 0.05)),
                        halve_learning_rates=True)
    config = AnomalyConfig(criterion="PS", model="pieclam", n_communities=2,
                           densify=True, schedule=schedule, threshold=1.5,
                           seed=7)
    back = AnomalyConfig.from_dict(config.to_dict())
    assert back == config
    assert back.schedule == schedule
    plain = AnomalyConfig.from_dict(AnomalyConfig().to_dict())
    assert plain.schedule is None


def two_clique_graph():
    edges = []
    for base in (0, 5):
        for i in range(5):
            for j in range(i + 1, 5):
                edges.append([base + i, base + j])
    edges.append([0, 5])
    return edges


def test_detect_star_pipeline():
    labels = np.zeros(11, dtype=int)
    labels[10] = 1
    graph = build_graph(11, two_clique_graph(), labels=labels)
    config = AnomalyConfig(criterion="S", model="ieclam", n_communities=2,
                           n_iter=300, learning_rate=1e-2, seed=0)
    result = detect(graph, config)
    assert isinstance(result, AnomalyResult)
    assert result.scores.shape == (11,)
    assert result.isolated.tolist() == [False] * 10 + [True]
    # An isolated node has no edge terms, so its star score is zero.
    assert result.scores[10] == 0.0
    assert result.auc is not None
    assert result.flags is None
    assert result.config["criterion"] == "S"


def test_detect_without_labels_has_no_auc():
    graph = build_graph(11, two_clique_graph())
    config = AnomalyConfig(criterion="S", model="ieclam", n_communities=2,
                           n_iter=100, learning_rate=1e-2)
    result = detect(graph, config)
    assert result.auc is None


def test_detect_is_seed_reproducible():
    graph = build_graph(11, two_clique_graph())
    config = AnomalyConfig(criterion="S", model="ieclam", n_communities=2,
                           n_iter=200, learning_rate=1e-2, seed=3)
    a = detect(graph, config)
    b = detect(graph, config)
    assert np.array_equal(a.scores, b.scores)


def test_detect_threshold_flags():
    graph = build_graph(11, two_clique_graph())
    config = AnomalyConfig(criterion="S", model="ieclam", n_communities=2,
                           n_iter=200, learning_rate=1e-2, threshold=0.0)
    result = detect(graph, config)
    assert result.flags is not None
    assert np.array_equal(result.flags, result.scores >= 0.0)


def test_detect_densify_changes_fit_graph():
    # A path densifies into triangles, changing degrees and hence scores.
    graph = build_graph(6, [[i, i + 1] for i in range(5)])
    base = AnomalyConfig(criterion="S", model="ieclam", n_communities=1,
                         n_iter=200, learning_rate=1e-2, seed=1)
    dense = AnomalyConfig(criterion="S", model="ieclam", n_communities=1,
                          n_iter=200, learning_rate=1e-2, seed=1, densify=True)
    r_base = detect(graph, base)
    r_dense = detect(graph, dense)
    assert not np.allclose(r_base.scores, r_dense.scores)


def test_detect_prior_star_with_prior_model():
    graph = build_graph(11, two_clique_graph())
    schedule = Schedule((Phase(AFFILIATIONS, 50, 1e-3),
                         Phase(PRIOR, 20, 1e-3, 0.01)))
    config = AnomalyConfig(criterion="PS", model="pieclam", n_communities=2,
                           schedule=schedule, n_blocks=2, hidden=8, seed=0)
    result = detect(graph, config)
    model = result.model_
    expected = score_prior_star(model.affiliations_, graph, model.signature_,
                                model.prior_)
    assert np.array_equal(result.scores, expected)


def test_detect_can_ignore_features():
    features = np.random.default_rng(2).standard_normal((11, 3))
    graph = build_graph(11, two_clique_graph(), features=features)
    schedule = Schedule((Phase(AFFILIATIONS, 30, 1e-3),
                         Phase(PRIOR, 10, 1e-3)))
    with_features = AnomalyConfig(criterion="P", model="pieclam",
                                  n_communities=1, schedule=schedule,
                                  n_blocks=2, hidden=8, seed=0)
    without = AnomalyConfig(criterion="P", model="pieclam", n_communities=1,
                            schedule=schedule, n_blocks=2, hidden=8, seed=0,
                            use_features=False)
    r_with = detect(graph, with_features)
    r_without = detect(graph, without)
    assert r_with.model_.prior_.dim == 2 + 3
    assert r_without.model_.prior_.dim == 2


def test_plant_rewired_anomalies_invariants():
    spec = two_block_assortative_sbm()
    graph, classes = sample_sbm(spec, 60, np.random.default_rng(4))
    planted = np.array([3, 17, 40])
    degrees_before = graph.degrees.copy()
    rewired = plant_rewired_anomalies(graph, planted, np.random.default_rng(5))

    assert rewired.labels is not None
    assert rewired.labels.sum() == 3
    assert np.array_equal(np.nonzero(rewired.labels)[0], planted)
    # Rewiring preserves each planted node's degree by default.
    for node in planted:
        assert rewired.degrees[node] == degrees_before[node]
    # No self-loops or duplicates survive graph construction.
    assert (rewired.edges[:, 0] != rewired.edges[:, 1]).all()
    as_pairs = {tuple(e) for e in rewired.edges.tolist()}
    assert len(as_pairs) == rewired.edges.shape[0]
    # Planted-to-planted edges from the original graph are gone.
    for e in rewired.edges:
        assert not (e[0] in planted and e[1] in planted)


def test_plant_rewired_anomalies_class_restriction():
    spec = two_block_assortative_sbm()
    graph, classes = sample_sbm(spec, 60, np.random.default_rng(6))
    planted = np.array([0, 30])
    rewired = plant_rewired_anomalies(graph, planted, np.random.default_rng(7),
                                      n_edges=5, classes=classes)
    for node in planted:
        for other in rewired.neighbors(node):
            assert classes[other] != classes[node]
        assert rewired.degrees[node] == 5


def test_plant_rewired_anomalies_fixed_edge_count():
    graph = build_graph(20, [[i, (i + 1) % 20] for i in range(20)])
    rewired = plant_rewired_anomalies(graph, [2], np.random.default_rng(8),
                                      n_edges=7)
    assert rewired.degrees[2] == 7
