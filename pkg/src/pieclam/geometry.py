"""Affiliation geometry: Euclidean and Lorentz pairings and cone projections.

A model signature fixes the code space of node affiliations. With C
communities the Euclidean signature uses R_+^C with the ordinary dot product.
The Lorentz signature uses R^{2C}: the first C coordinates t are inclusive
community weights, the last C coordinates s are exclusive weights, and rows
are paired with

    <f, g> = sum_c t_f^c t_g^c - s_f^c s_g^c.

Rows constrained to the pairwise cone T = {(t, s): -t^c <= s^c <= t^c for
all c} pair non-negatively with each other, so 1 - exp(-<f, g>) is a valid
edge probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EUCLIDEAN = "euclidean"
LORENTZ = "lorentz"


@dataclass(frozen=True)
class Signature:
    """Code-space geometry: `euclidean` (dim C) or `lorentz` (dim 2C)."""

    geometry: str
    n_communities: int

    def __post_init__(self):
        if self.geometry not in (EUCLIDEAN, LORENTZ):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.n_communities < 1:
            raise ValueError("n_communities must be >= 1")

    @property
    def dim(self):
        return self.n_communities * (2 if self.geometry == LORENTZ else 1)

    @property
    def is_lorentz(self):
        return self.geometry == LORENTZ

    def metric(self):
        """Diagonal of the pairing form: +1 on t coordinates, -1 on s."""
        c = self.n_communities
        if self.is_lorentz:
            return np.concatenate([np.ones(c), -np.ones(c)])
        return np.ones(c)

    def to_dict(self):
        return {"geometry": self.geometry, "n_communities": self.n_communities}

    @classmethod
    def from_dict(cls, d):
        return cls(d["geometry"], int(d["n_communities"]))


def euclidean(n_communities):
    return Signature(EUCLIDEAN, n_communities)


def lorentz(n_communities):
    return Signature(LORENTZ, n_communities)


def _check_dim(f, signature):
    if f.shape[-1] != signature.dim:
        raise ValueError(
            f"affiliation dim {f.shape[-1]} does not match signature dim {signature.dim}"
        )


def pairing(f, g, signature):
    """Signature pairing of two affiliation vectors (or row batches)."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    _check_dim(f, signature)
    _check_dim(g, signature)
    return (f * signature.metric() * g).sum(axis=-1)


def pairing_matrix(f, signature):
    """All-pairs pairing matrix F L F^T for a row-stacked affiliation matrix."""
    f = np.asarray(f, dtype=np.float64)
    _check_dim(f, signature)
    return (f * signature.metric()) @ f.T


def edge_probability(f, g, signature):
    """Edge probability 1 - exp(-<f, g>); a negative pairing is a contract error."""
    x = pairing(f, g, signature)
    if np.any(x < 0):
        raise ValueError(f"negative pairing {np.min(x)!r}: rows leave the feasible cone")
    return -np.expm1(-x)


def in_cone(f, signature, atol=0.0):
    """True when every row is feasible: non-negative (Euclidean) or in T (Lorentz)."""
    f = np.asarray(f, dtype=np.float64)
    _check_dim(f, signature)
    if not signature.is_lorentz:
        return bool((f >= -atol).all())
    c = signature.n_communities
    t, s = f[..., :c], f[..., c:]
    return bool((np.abs(s) <= t + atol).all())


def project_to_cone(f, signature):
    """Euclidean projection of each row onto the feasible cone.

    Lorentz rows project channel-wise onto {(t, s): |s| <= t} in the plane;
    Euclidean rows clamp at zero.
    """
    f = np.asarray(f, dtype=np.float64)
    _check_dim(f, signature)
    if not signature.is_lorentz:
        return np.maximum(f, 0.0)
    c = signature.n_communities
    t = f[..., :c].copy()
    s = f[..., c:].copy()
    upper = (s > t) & (t >= -s)        # above the s = t face
    lower = (-s > t) & (t >= s)        # below the s = -t face
    dead = t < -np.abs(s)              # behind the apex
    mid = 0.5 * (t + s)
    t[upper], s[upper] = mid[upper], mid[upper]
    mid = 0.5 * (t - s)
    t[lower], s[lower] = mid[lower], -mid[lower]
    t[dead], s[dead] = 0.0, 0.0
    return np.concatenate([t, s], axis=-1)


def decode(f, signature, validate_cone=True):
    """Edge-probability matrix 1 - exp(-pairing) with zero diagonal.

    With validate_cone=True a pairing below -1e-9 raises (the rows are
    expected to be feasible) and tiny negative round-off is clamped to zero.
    validate_cone=False permits negative pairings, yielding signed weights;
    useful for encoders whose rows intentionally leave the cone.
    """
    x = pairing_matrix(f, signature)
    if validate_cone:
        off = ~np.eye(x.shape[0], dtype=bool)
        low = x[off].min() if x.shape[0] > 1 else 0.0
        if low < -1e-9:
            raise ValueError(f"negative pairing {low!r}: rows leave the feasible cone")
        np.clip(x, 0.0, None, out=x)
    p = -np.expm1(-x)
    np.fill_diagonal(p, 0.0)
    return p


def random_affiliations(n_nodes, signature, rng):
    """Random feasible initialization.

    Euclidean entries are uniform in (0, 1). Lorentz rows draw t uniform in
    (0, 1) and s uniform in (-t, t) per channel, strictly inside the cone so
    every channel carries gradient signal.
    """
    c = signature.n_communities
    if not signature.is_lorentz:
        return rng.random((n_nodes, c))
    t = rng.random((n_nodes, c))
    s = t * (2.0 * rng.random((n_nodes, c)) - 1.0)
    return np.concatenate([t, s], axis=-1)
