import math

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from pieclam import geometry
from pieclam.clam import (BigClam, IeClam, encode_bipartite_bigclam_noselfloop,
                          encode_bipartite_ieclam, fit_affiliations)
from pieclam.errors import NumericalError
from pieclam.graphs import (bipartite_prob_matrix, build_graph,
                            sample_bernoulli_graph)


def two_cliques(size=10):
    edges = []
    for block in (range(size), range(size, 2 * size)):
        block = list(block)
        edges.extend((block[i], block[j])
                     for i in range(size) for j in range(i + 1, size))
    return build_graph(2 * size, edges)


def test_fit_trace_starts_at_init_and_improves():
    g = two_cliques(6)
    sig = geometry.euclidean(2)
    rng = np.random.default_rng(0)
    f, trace = fit_affiliations(g, sig, n_iter=300, learning_rate=5e-3, rng=rng)
    assert trace.shape == (301,)
    assert trace[-1] > trace[0]
    assert (f >= 0).all()


def test_fit_loss_trace_mostly_monotone():
    # Projection can cause small dips; demand near-monotone ascent.
    g = two_cliques(6)
    sig = geometry.lorentz(2)
    _, trace = fit_affiliations(g, sig, n_iter=300, learning_rate=2e-3,
                                rng=np.random.default_rng(1))
    drops = np.diff(trace) < -1e-8
    assert drops.mean() < 0.05


def test_fit_separates_two_cliques():
    g = two_cliques(10)
    sig = geometry.euclidean(2)
    f, _ = fit_affiliations(g, sig, n_iter=800, learning_rate=5e-3,
                            rng=np.random.default_rng(2))
    p = geometry.decode(f, sig)
    inside = np.r_[p[:10, :10][np.triu_indices(10, 1)],
                   p[10:, 10:][np.triu_indices(10, 1)]]
    across = p[:10, 10:].ravel()
    assert inside.mean() - across.mean() >= 0.5


def test_fit_complete_graph_saturates():
    n = 5
    g = build_graph(n, [[i, j] for i in range(n) for j in range(i + 1, n)])
    sig = geometry.euclidean(1)
    f, _ = fit_affiliations(g, sig, n_iter=3000, learning_rate=1e-2,
                            rng=np.random.default_rng(3))
    p = geometry.decode(f, sig)
    off = p[~np.eye(n, dtype=bool)]
    assert off.min() >= 0.9


def test_lorentz_fit_suppresses_within_part_probability():
    target = bipartite_prob_matrix(30, 1.5)
    g = sample_bernoulli_graph(target, np.random.default_rng(4))
    sig = geometry.lorentz(1)
    f, _ = fit_affiliations(g, sig, n_iter=1500, learning_rate=1e-3,
                            rng=np.random.default_rng(5))
    p = geometry.decode(f, sig)
    within = np.r_[p[:30, :30][np.triu_indices(30, 1)],
                   p[30:, 30:][np.triu_indices(30, 1)]]
    assert within.mean() <= 0.1


def test_fit_validates_arguments():
    g = two_cliques(3)
    sig = geometry.euclidean(2)
    with pytest.raises(ValueError):
        fit_affiliations(g, sig, n_iter=10, learning_rate=0.0, rng=0)
    with pytest.raises(ValueError):
        fit_affiliations(g, sig, n_iter=10, learning_rate=1e-3, rng=0,
                         init=np.zeros((2, 2)))


def test_fit_warm_start_continues_from_init():
    g = two_cliques(5)
    sig = geometry.euclidean(2)
    f1, t1 = fit_affiliations(g, sig, n_iter=100, learning_rate=2e-3,
                              rng=np.random.default_rng(6))
    f2, t2 = fit_affiliations(g, sig, n_iter=50, learning_rate=2e-3,
                              rng=np.random.default_rng(7), init=f1)
    assert t2[0] == pytest.approx(t1[-1], rel=1e-12)


def test_divergence_raises_numerical_error():
    from pieclam.graphs import sample_sbm, three_class_off_diagonal_sbm

    g, _ = sample_sbm(three_class_off_diagonal_sbm(), 210,
                      np.random.default_rng(0))
    sig = geometry.lorentz(2)
    # The fixed-rate ascent has no safeguards; an excessive rate must abort
    # with a diagnostic rather than return garbage.
    with pytest.raises(NumericalError, match="non-finite objective"):
        fit_affiliations(g, sig, n_iter=2000, learning_rate=1e-2,
                         rng=np.random.default_rng(8))


def test_estimators_follow_sklearn_conventions():
    model = BigClam(n_communities=3, n_iter=50, learning_rate=1e-3, random_state=0)
    params = model.get_params()
    assert params["n_communities"] == 3
    model.set_params(n_iter=60)
    assert model.n_iter == 60
    with pytest.raises(NotFittedError):
        model.decode()
    g = two_cliques(4)
    fitted = model.fit(g)
    assert fitted is model
    assert model.affiliations_.shape == (8, 3)
    assert model.loss_trace_.shape == (61,)
    assert model.decode().shape == (8, 8)
    assert np.isfinite(model.log_likelihood(g))


def test_ieclam_estimator_dim_doubles():
    g = two_cliques(4)
    model = IeClam(n_communities=2, n_iter=40, learning_rate=1e-3,
                   random_state=1).fit(g)
    assert model.affiliations_.shape == (8, 4)
    assert model.signature_.is_lorentz


def test_estimator_refit_same_seed_reproducible():
    g = two_cliques(4)
    a = BigClam(n_communities=2, n_iter=80, learning_rate=1e-3, random_state=5).fit(g)
    b = BigClam(n_communities=2, n_iter=80, learning_rate=1e-3, random_state=5).fit(g)
    assert np.array_equal(a.affiliations_, b.affiliations_)


def test_encode_bipartite_ieclam_exact():
    for a in (0.5, 1.0, 2.0):
        for n in (1, 5, 20):
            f, sig = encode_bipartite_ieclam(n, a)
            assert geometry.in_cone(f, sig)
            p = geometry.decode(f, sig)
            target = bipartite_prob_matrix(n, math.sqrt(2.0) * a)
            assert np.abs(p - target).max() <= 1e-12


def test_encode_bipartite_ieclam_zero_amplitude():
    f, sig = encode_bipartite_ieclam(3, 0.0)
    assert not geometry.decode(f, sig).any()


def test_encode_bipartite_bigclam_uses_self_loop_blindness():
    n, a = 4, 1.2
    f, sig = encode_bipartite_bigclam_noselfloop(n, a)
    assert sig.dim == n * n
    assert (f >= 0).all()
    p = geometry.decode(f, sig)
    assert np.abs(p - bipartite_prob_matrix(n, a)).max() <= 1e-12
    # The construction only works because decode drops self-pairings.
    x = geometry.pairing_matrix(f, sig)
    assert np.allclose(np.diagonal(x), n * a * a, atol=1e-12)
