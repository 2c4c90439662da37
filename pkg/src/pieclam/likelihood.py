"""Bernoulli-Poisson log-likelihood of a graph under affiliation codes.

With pairing x_nm = <f_n, f_m> the model declares P(n ~ m) = 1 - exp(-x_nm)
independently per dyad (no self-loops). The log-likelihood is

    l(F) = 1/2 sum_n [ sum_{m in N(n)} log(1 - e^{-x_nm})
                       - sum_{m not in N(n), m != n} x_nm ].

Rearranging the non-edge sum gives an O(|E| d + N d) form,

    2 l(F) = sum_n [ sum_{m in N(n)} log(e^{x_nm} - 1)
                     - <f_n, sum_m f_m> + <f_n, f_n> ],

used by the fitting loop. Edge pairings are clamped below at `log_eps`
inside the logs; the clamp also bounds the gradient factor 1/(1 - e^{-x}),
which would otherwise blow up as an edge pairing approaches zero.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix

from .geometry import pairing_matrix

LOG_EPS = 1e-10


def log1mexp(x):
    """log(1 - exp(-x)) for x > 0, stable across magnitudes."""
    x = np.asarray(x, dtype=np.float64)
    small = x < np.log(2.0)
    out = np.empty_like(x)
    out[small] = np.log(-np.expm1(-x[small]))
    out[~small] = np.log1p(-np.exp(-x[~small]))
    return out


def _edge_pairings(f, graph, signature):
    fl = f * signature.metric()
    return np.einsum("ij,ij->i", fl[graph.edge_row], f[graph.indices])


def log_likelihood_dense(f, graph, signature, log_eps=LOG_EPS):
    """O(N^2) reference likelihood; edge pairings clamped below at log_eps."""
    f = np.asarray(f, dtype=np.float64)
    x = pairing_matrix(f, signature)
    edge_x = x[graph.edge_row, graph.indices]
    edge_term = log1mexp(np.maximum(edge_x, log_eps)).sum()
    off_total = x.sum() - np.trace(x)
    nonedge_term = off_total - edge_x.sum()
    return 0.5 * (edge_term - nonedge_term)


def log_likelihood_sparse(f, graph, signature, log_eps=LOG_EPS):
    """O(|E| d + N d) likelihood, equal to the dense form up to the clamp."""
    f = np.asarray(f, dtype=np.float64)
    metric = signature.metric()
    x = np.maximum(_edge_pairings(f, graph, signature), log_eps)
    edge_term = (x + log1mexp(x)).sum()
    total = f.sum(axis=0)
    global_term = float(np.dot(total * metric, total))
    self_term = float((f * metric * f).sum())
    return 0.5 * (edge_term - global_term + self_term)


def log_likelihood_grad(f, graph, signature, log_eps=LOG_EPS):
    """Gradient of the sparse likelihood with respect to each row, stacked.

    Row n equals L [ sum_{m in N(n)} f_m / (1 - e^{-x_nm}) - sum_m f_m + f_n ]
    with L the signature metric. Edge pairings are clamped below at log_eps in
    the weight, matching the clamped objective away from the clamp region.
    """
    f = np.asarray(f, dtype=np.float64)
    n = graph.n_nodes
    x = np.maximum(_edge_pairings(f, graph, signature), log_eps)
    w = 1.0 / (-np.expm1(-x))
    adj = csr_matrix((w, graph.indices, graph.indptr), shape=(n, n))
    pull = adj @ f
    v = pull - f.sum(axis=0) + f
    return v * signature.metric()
