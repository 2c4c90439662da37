"""Cut norms, log cut distances between edge-probability matrices, and AUC.

The cut norm of an N1 x N2 matrix X is

    ||X||_cut = (1/(N1 N2)) * sup_{U, V} | sum_{i in U, j in V} x_ij |.

For a fixed row set U the optimal column set is closed-form (take the
columns whose U-restricted sums share the chosen sign), so the exact value
is found by enumerating row subsets of the smaller dimension. Above the
enumeration limit a seeded alternating local search provides a lower bound
together with a verifiable witness.

Log cut distances compare edge-probability matrices through the transform
m -> -log(1 - (1 - d) m), which turns Bernoulli-Poisson decoders back into
pairing space; the scalars d (and e) act as regularizers that are traded
off against the transformed cut norm. Matrices are compared entrywise as
given; callers modeling self-loop-free graphs pass zero-diagonal matrices
(the decoder already zeroes its own diagonal).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

logger = logging.getLogger(__name__)

EXACT_MAX_N = 22
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class CutWitness:
    """Row/column subsets certifying a cut-norm lower bound."""

    rows: np.ndarray
    cols: np.ndarray
    value: float
    estimator: str = "exact"

    def to_dict(self):
        return {
            "rows": [int(i) for i in self.rows],
            "cols": [int(j) for j in self.cols],
            "value": float(self.value),
            "estimator": self.estimator,
        }


def evaluate_witness(x, witness):
    """Re-evaluate |block sum| / (N1 N2) for a stored witness."""
    x = np.asarray(x, dtype=np.float64)
    block = x[np.ix_(witness.rows, witness.cols)]
    return abs(block.sum()) / (x.shape[0] * x.shape[1])


def _as_matrix(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise ValueError(f"cut norm needs a non-empty 2-D matrix, got shape {x.shape}")
    return x


def cut_norm_exact(x, chunk_bits=16):
    """Exact cut norm by enumerating subsets of the smaller dimension.

    Feasible up to 22 rows (2^22 subsets); larger inputs are rejected.
    Returns (value, CutWitness).
    """
    x = _as_matrix(x)
    transposed = x.shape[0] > x.shape[1]
    w = x.T if transposed else x
    m, n_cols = w.shape
    if m > EXACT_MAX_N:
        raise ValueError(f"exact cut norm enumerates min-side subsets; {m} > {EXACT_MAX_N}")
    total = 1 << m
    shifts = np.arange(m, dtype=np.uint32)
    best_val = -1.0
    best_id = 0
    best_sign = 1.0
    chunk = 1 << min(chunk_bits, m)
    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total), dtype=np.uint32)
        bits = ((ids[:, None] >> shifts) & 1).astype(np.float64)
        colsums = bits @ w
        pos = np.maximum(colsums, 0.0).sum(axis=1)
        neg = np.maximum(-colsums, 0.0).sum(axis=1)
        for vals, sign in ((pos, 1.0), (neg, -1.0)):
            k = int(np.argmax(vals))
            if vals[k] > best_val:
                best_val = float(vals[k])
                best_id = int(ids[k])
                best_sign = sign
    rows = np.nonzero((best_id >> shifts) & 1)[0]
    colsums = w[rows].sum(axis=0) if rows.size else np.zeros(n_cols)
    cols = np.nonzero(best_sign * colsums > 0)[0]
    if transposed:
        rows, cols = cols, rows
    value = best_val / (x.shape[0] * x.shape[1])
    return value, CutWitness(rows=rows, cols=cols, value=value, estimator="exact")


def cut_norm_local_search(x, restarts=50, rng=None, max_rounds=200):
    """Lower bound on the cut norm via alternating row/column optimization.

    From a random (U, V) pair, alternately replace V by the closed-form
    optimum for U and vice versa until no single membership flip improves
    the signed block sum; both signs are explored from every restart.
    Deterministic for a seeded generator. Returns (value, CutWitness).
    """
    from .graphs import as_rng

    x = _as_matrix(x)
    rng = as_rng(rng)
    n1, n2 = x.shape
    best_val = -1.0
    best_uv = (np.zeros(n1), np.zeros(n2))
    for _ in range(int(restarts)):
        u0 = (rng.random(n1) < 0.5).astype(np.float64)
        v0 = (rng.random(n2) < 0.5).astype(np.float64)
        for sign in (1.0, -1.0):
            u, v = u0, v0
            current = sign * float(u @ x @ v)
            for _ in range(max_rounds):
                # Each half-step is the closed-form optimum given the other
                # side, so the signed block sum never decreases.
                v = (sign * (u @ x) > 0).astype(np.float64)
                u = (sign * (x @ v) > 0).astype(np.float64)
                value = sign * float(u @ x @ v)
                if value <= current:
                    current = max(current, value)
                    break
                current = value
            if current > best_val:
                best_val = float(current)
                best_uv = (u, v)
    rows = np.nonzero(best_uv[0])[0]
    cols = np.nonzero(best_uv[1])[0]
    value = max(best_val, 0.0) / (n1 * n2)
    return value, CutWitness(rows=rows, cols=cols, value=value, estimator="local-search")


def cut_norm(x, restarts=200, rng=None, exact_max_n=EXACT_MAX_N):
    """Exact cut norm when the smaller dimension allows enumeration, else local search."""
    x = _as_matrix(x)
    if min(x.shape) <= exact_max_n:
        return cut_norm_exact(x)
    logger.info(
        "cut norm: matrix %s exceeds exact limit %d, using local-search lower bound "
        "(%d restarts)", x.shape, exact_max_n, restarts,
    )
    return cut_norm_local_search(x, restarts=restarts, rng=rng)


def validate_prob_matrix(p, name="matrix"):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(p, p.T, rtol=0, atol=1e-12):
        raise ValueError(f"{name} must be symmetric within 1e-12")
    if (p < 0).any() or (p > 1).any():
        raise ValueError(f"{name} entries must lie in [0, 1]")
    return p


def log_transform(m, d):
    """Entrywise -log(1 - (1 - d) m) for a [0, 1]-valued matrix and 0 < d <= 1."""
    m = np.asarray(m, dtype=np.float64)
    if not 0.0 < d <= 1.0:
        raise ValueError(f"d must lie in (0, 1], got {d!r}")
    if (m < 0).any() or (m > 1).any():
        raise ValueError("log_transform expects entries in [0, 1]")
    return -np.log1p(-(1.0 - d) * m)


def _neg_log1m(p):
    return -np.log1p(-p)


@dataclass
class DistanceResult:
    value: float
    witness: CutWitness
    d: float | None = None
    e: float | None = None


def _cut(diff, restarts, rng):
    # Matrices are compared as given; self-loop-free inputs (decoders zero
    # their own diagonal) therefore contribute nothing on the diagonal.
    return cut_norm(diff, restarts=restarts, rng=rng)


def log_cut_distance_zero(p, q, restarts=200, rng=None):
    """Unregularized log cut distance; both matrices must stay strictly below 1."""
    p = validate_prob_matrix(p, "P")
    q = validate_prob_matrix(q, "Q")
    if p.shape != q.shape:
        raise ValueError("P and Q must share a shape")
    if p.max(initial=0.0) >= 1.0 or q.max(initial=0.0) >= 1.0:
        raise ValueError("log cut distance at zero regularization needs entries < 1")
    value, witness = _cut(_neg_log1m(p) - _neg_log1m(q), restarts, rng)
    return DistanceResult(value=value, witness=witness)


def _golden_min(fun, lo, hi, iters=20):
    """Golden-section minimization of a scalar function on [lo, hi]."""
    a, b = float(lo), float(hi)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc[0] <= fd[0]:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
    return fc if fc[0] <= fd[0] else fd


def log_cut_distance_pa_from_pairings(p_tilde, a, restarts=200, rng=None,
                                      max_exponent=30, refine=True, extra_d=()):
    """Same as log_cut_distance_pa but starting from pairings -log(1 - P).

    Accepts pairing matrices directly, so decoders whose weights leave [0, 1)
    (negative pairings) can still be measured against a target.
    """
    p_tilde = np.asarray(p_tilde, dtype=np.float64)
    a = validate_prob_matrix(a, "A")
    if p_tilde.shape != a.shape:
        raise ValueError("P and A must share a shape")

    def objective(d):
        value, witness = _cut(p_tilde - log_transform(a, d), restarts, rng)
        return d + value, witness, d

    evals = [objective(2.0 ** -k) for k in range(max_exponent + 1)]
    evals.extend(objective(float(d)) for d in extra_d)
    best = min(evals, key=lambda t: t[0])
    if refine:
        k_best = -np.log2(best[2])
        lo, hi = max(k_best - 1.0, 0.0), min(k_best + 1.0, float(max_exponent))
        refined = _golden_min(lambda k: objective(2.0 ** -k), lo, hi)
        if refined[0] < best[0]:
            best = refined
    return DistanceResult(value=best[0], witness=best[1], d=best[2])


def log_cut_distance_pa(p, a, restarts=200, rng=None, max_exponent=30,
                        refine=True, extra_d=()):
    """Log cut distance of a probability matrix from a (possibly 0/1) target.

    Minimizes d + || -log(1-P) - (-log(1-(1-d)A)) ||_cut over the dyadic grid
    d in {2^-k : k = 0..max_exponent} (plus any extra_d), with golden-section
    refinement of the exponent around the grid minimizer. The target A may
    contain exact ones. Returns the value and the minimizing d.
    """
    p = validate_prob_matrix(p, "P")
    if p.max(initial=0.0) >= 1.0:
        raise ValueError("P entries must stay strictly below 1")
    return log_cut_distance_pa_from_pairings(
        _neg_log1m(p), a, restarts=restarts, rng=rng,
        max_exponent=max_exponent, refine=refine, extra_d=extra_d)


def log_cut_distance_pq(p, q, restarts=200, rng=None, max_exponent=30,
                        scan_restarts=30, refine=True):
    """Log cut distance between two probability matrices.

    Minimizes e + d + cut-norm of the difference of the two log transforms
    over the 2-D dyadic grid, scanning with a lighter local search and then
    refining each scalar around the best cell at full strength.
    """
    p = validate_prob_matrix(p, "P")
    q = validate_prob_matrix(q, "Q")
    if p.shape != q.shape:
        raise ValueError("P and Q must share a shape")

    def objective(e, d, r):
        value, witness = _cut(log_transform(p, e) - log_transform(q, d), r, rng)
        return e + d + value, witness, e, d

    grid = [2.0 ** -k for k in range(max_exponent + 1)]
    best = None
    for e in grid:
        for d in grid:
            cand = objective(e, d, scan_restarts)
            if best is None or cand[0] < best[0]:
                best = cand
    best = objective(best[2], best[3], restarts)
    if refine:
        for _ in range(2):
            ke = -np.log2(best[2])
            r = _golden_min(
                lambda k: objective(2.0 ** -k, best[3], restarts),
                max(ke - 1.0, 0.0), min(ke + 1.0, float(max_exponent)))
            if r[0] < best[0]:
                best = r
            kd = -np.log2(best[3])
            r = _golden_min(
                lambda k: objective(best[2], 2.0 ** -k, restarts),
                max(kd - 1.0, 0.0), min(kd + 1.0, float(max_exponent)))
            if r[0] < best[0]:
                best = r
    return DistanceResult(value=best[0], witness=best[1], e=best[2], d=best[3])


def l2_distance(p, q, mean_normalized=True):
    """Frobenius distance, by default divided by N (matching the cut scaling)."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("P and Q must share a shape")
    value = float(np.linalg.norm(p - q))
    if mean_normalized:
        value /= p.shape[0]
    return value


def auc_roc(scores, labels):
    """Rank-based ROC-AUC (Mann-Whitney with average ranks for ties).

    Higher scores should indicate the positive class. Requires at least one
    positive and one negative label.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    pos = labels == 1
    neg = labels == 0
    if not pos.any() or not neg.any():
        raise ValueError("AUC needs at least one positive and one negative label")
    if pos.sum() + neg.sum() != labels.size:
        raise ValueError("labels must be 0 or 1")
    ranks = rankdata(scores)
    n_pos, n_neg = int(pos.sum()), int(neg.sum())
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
