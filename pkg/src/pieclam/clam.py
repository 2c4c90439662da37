"""Community-affiliation graph models fit by projected gradient ascent.

BigClam places affiliations in the non-negative orthant with the ordinary
dot product; IeClam pairs inclusive against exclusive community weights
with the signature metric, which lets two nodes share a strong inclusive
channel yet repel through an exclusive one (heterophily). Both maximize the
same Bernoulli-Poisson likelihood by ascending its sparse gradient and
projecting every row back onto the feasible cone after each step.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import geometry
from .errors import NumericalError
from .graphs import as_rng
from .likelihood import (LOG_EPS, log_likelihood_grad, log_likelihood_sparse)


def fit_affiliations(graph, signature, n_iter, learning_rate, rng, init=None,
                     log_eps=LOG_EPS, prior_grad=None, prior_loss=None):
    """Projected gradient ascent on the affiliation log-likelihood.

    prior_grad/prior_loss, when given, add a node-wise prior term to the
    gradient and to the recorded objective (used by the alternating trainer).
    Returns (F, trace); trace[0] is the objective at the initial point and
    trace[i] the objective after update i. A non-finite objective aborts.
    """
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    rng = as_rng(rng)
    if init is None:
        f = geometry.random_affiliations(graph.n_nodes, signature, rng)
    else:
        f = np.array(init, dtype=np.float64)
        if f.shape != (graph.n_nodes, signature.dim):
            raise ValueError(
                f"init must have shape ({graph.n_nodes}, {signature.dim}), got {f.shape}")

    def objective(f):
        loss = log_likelihood_sparse(f, graph, signature, log_eps=log_eps)
        if prior_loss is not None:
            loss += prior_loss(f)
        return loss

    trace = np.empty(n_iter + 1)
    # Divergence shows up as overflow before the finiteness check catches it;
    # silence the intermediate warnings and report the diagnostic instead.
    with np.errstate(over="ignore", invalid="ignore"):
        trace[0] = objective(f)
        for i in range(n_iter):
            grad = log_likelihood_grad(f, graph, signature, log_eps=log_eps)
            if prior_grad is not None:
                grad = grad + prior_grad(f)
            f = geometry.project_to_cone(f + learning_rate * grad, signature)
            trace[i + 1] = objective(f)
            if not np.isfinite(trace[i + 1]):
                raise NumericalError(
                    f"non-finite objective {trace[i + 1]:g} at iteration {i + 1}; "
                    f"max |F| = {np.abs(f).max():g}, learning_rate = {learning_rate:g}")
    return f, trace


class _AffiliationModel(BaseEstimator):
    """Shared estimator plumbing for the plain (prior-free) models."""

    def __init__(self, n_communities, n_iter, learning_rate, log_eps, random_state):
        self.n_communities = n_communities
        self.n_iter = n_iter
        self.learning_rate = learning_rate
        self.log_eps = log_eps
        self.random_state = random_state

    def _signature(self):
        raise NotImplementedError

    def fit(self, graph, init=None):
        signature = self._signature()
        f, trace = fit_affiliations(
            graph, signature, n_iter=self.n_iter,
            learning_rate=self.learning_rate, rng=as_rng(self.random_state),
            init=init, log_eps=self.log_eps)
        self.signature_ = signature
        self.affiliations_ = f
        self.loss_trace_ = trace
        return self

    def _check_fitted(self):
        if not hasattr(self, "affiliations_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def decode(self):
        """Edge-probability matrix of the fitted affiliations (zero diagonal)."""
        self._check_fitted()
        return geometry.decode(self.affiliations_, self.signature_)

    def log_likelihood(self, graph):
        self._check_fitted()
        return log_likelihood_sparse(
            self.affiliations_, graph, self.signature_, log_eps=self.log_eps)


class BigClam(_AffiliationModel):
    """Non-negative (Euclidean) community-affiliation model."""

    def __init__(self, n_communities=24, n_iter=2200, learning_rate=1e-6,
                 log_eps=LOG_EPS, random_state=None):
        super().__init__(n_communities, n_iter, learning_rate, log_eps, random_state)

    def _signature(self):
        return geometry.euclidean(self.n_communities)


class IeClam(_AffiliationModel):
    """Inclusive/exclusive (Lorentz) community-affiliation model.

    n_communities counts inclusive/exclusive channel pairs, so the code
    dimension is 2 * n_communities.
    """

    def __init__(self, n_communities=15, n_iter=2500, learning_rate=1e-6,
                 log_eps=LOG_EPS, random_state=None):
        super().__init__(n_communities, n_iter, learning_rate, log_eps, random_state)

    def _signature(self):
        return geometry.lorentz(self.n_communities)


def encode_bipartite_ieclam(nodes_per_side, a):
    """Exact 1-pair-of-channels code for a bipartite target.

    Side-1 rows are (a, a), side-2 rows are (a, -a): same-side pairings cancel
    to 0 while cross pairings add to 2 a^2, so the decode equals
    bipartite_prob_matrix(nodes_per_side, sqrt(2) * a) exactly.
    """
    n = int(nodes_per_side)
    if n < 1:
        raise ValueError("nodes_per_side must be >= 1")
    a = float(a)
    f = np.empty((2 * n, 2))
    f[:, 0] = a
    f[:n, 1] = a
    f[n:, 1] = -a
    return f, geometry.lorentz(1)


def encode_bipartite_bigclam_noselfloop(nodes_per_side, a):
    """Non-negative code that is bipartite only thanks to the no-self-loop decoder.

    Channels are indexed by ordered pairs (i, j) of side indices: side-1 node
    n loads a on its row {(n, j)}, side-2 node m on its column {(i, m)}. Two
    same-side supports are disjoint (pairing 0); node n and side-2 node m
    share exactly the channel (n, m) (pairing a^2). Each row pairs with
    itself at N a^2, visible only through self-loops, which the decoder
    drops. Uses N^2 channels.
    """
    n = int(nodes_per_side)
    if n < 1:
        raise ValueError("nodes_per_side must be >= 1")
    a = float(a)
    f = np.zeros((2 * n, n * n))
    for i in range(n):
        f[i, i * n:(i + 1) * n] = a           # side 1: row i of the channel grid
        f[n + i, i::n] = a                    # side 2: column i
    return f, geometry.euclidean(n * n)
