"""Node anomaly scoring from fitted affiliation models.

Three criteria, all oriented so that higher means more anomalous:

* star (S): minus the summed log-probability of the node's observed edges
  under the decoded model. Isolated nodes have an empty product, score 0,
  and are flagged separately.
* prior (P): minus the prior log-density of the node's code (with reduced
  features appended when present). Requires a prior-bearing model.
* prior-star (PS): the exact sum of the two, i.e. the joint log-score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clam import BigClam, IeClam
from .graphs import as_rng, build_graph, densify_two_hop
from .likelihood import LOG_EPS, log1mexp
from .metrics import auc_roc
from .trainer import PClam, PieClam, Schedule, _prior_input

STAR = "S"
PRIOR = "P"
PRIOR_STAR = "PS"

_PLAIN_MODELS = {"bigclam": BigClam, "ieclam": IeClam}
_PRIOR_MODELS = {"pclam": PClam, "pieclam": PieClam}


def score_star(f, graph, signature, log_eps=LOG_EPS):
    """Star scores: -sum_{m in N(n)} log(1 - exp(-<f_n, f_m>)) per node."""
    f = np.asarray(f, dtype=np.float64)
    fl = f * signature.metric()
    x = np.einsum("ij,ij->i", fl[graph.edge_row], f[graph.indices])
    vals = log1mexp(np.maximum(x, log_eps))
    return -np.bincount(graph.edge_row, weights=vals, minlength=graph.n_nodes)


def score_prior(f, flow, features=None):
    """Prior scores: -log p(f_n (+) x_n)."""
    return -flow.log_density(_prior_input(np.asarray(f, dtype=np.float64), features))


def score_prior_star(f, graph, signature, flow, features=None, log_eps=LOG_EPS):
    """Joint scores; exactly score_star + score_prior."""
    return (score_star(f, graph, signature, log_eps=log_eps)
            + score_prior(f, flow, features=features))


@dataclass
class AnomalyConfig:
    """End-to-end detection settings.

    model is one of bigclam/ieclam (criterion S only) or pclam/pieclam (any
    criterion). n_communities of None keeps the model's default. For plain
    models n_iter/learning_rate configure the fit; prior models take a
    Schedule. threshold, when set, marks scores >= threshold as flagged.
    """

    criterion: str = STAR
    model: str = "ieclam"
    n_communities: int | None = None
    densify: bool = False
    use_features: bool = True
    feature_target_dim: int = 100
    n_iter: int | None = None
    learning_rate: float | None = None
    schedule: Schedule | None = None
    n_blocks: int = 6
    hidden: int = 64
    prior_optimizer: str = "sgd"
    threshold: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.criterion not in (STAR, PRIOR, PRIOR_STAR):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.model not in _PLAIN_MODELS and self.model not in _PRIOR_MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.criterion in (PRIOR, PRIOR_STAR) and self.model in _PLAIN_MODELS:
            raise ValueError(
                f"criterion {self.criterion} needs a prior-bearing model "
                f"(pclam or pieclam), got {self.model!r}")

    def to_dict(self):
        out = {
            "criterion": self.criterion,
            "model": self.model,
            "n_communities": self.n_communities,
            "densify": self.densify,
            "use_features": self.use_features,
            "feature_target_dim": self.feature_target_dim,
            "n_iter": self.n_iter,
            "learning_rate": self.learning_rate,
            "schedule": self.schedule.to_dict() if self.schedule is not None else None,
            "n_blocks": self.n_blocks,
            "hidden": self.hidden,
            "prior_optimizer": self.prior_optimizer,
            "threshold": self.threshold,
            "seed": self.seed,
        }
        return out

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("schedule") is not None:
            d["schedule"] = Schedule.from_dict(d["schedule"])
        return cls(**d)


@dataclass
class AnomalyResult:
    scores: np.ndarray
    isolated: np.ndarray
    auc: float | None
    flags: np.ndarray | None
    config: dict
    model_: object = field(repr=False, default=None)


def _build_model(config):
    if config.model in _PLAIN_MODELS:
        cls = _PLAIN_MODELS[config.model]
        kwargs = {"random_state": config.seed}
        if config.n_communities is not None:
            kwargs["n_communities"] = config.n_communities
        if config.n_iter is not None:
            kwargs["n_iter"] = config.n_iter
        if config.learning_rate is not None:
            kwargs["learning_rate"] = config.learning_rate
        return cls(**kwargs)
    cls = _PRIOR_MODELS[config.model]
    kwargs = {
        "random_state": config.seed,
        "schedule": config.schedule,
        "n_blocks": config.n_blocks,
        "hidden": config.hidden,
        "feature_target_dim": config.feature_target_dim,
        "prior_optimizer": config.prior_optimizer,
    }
    if config.n_communities is not None:
        kwargs["n_communities"] = config.n_communities
    return cls(**kwargs)


def detect(graph, config=None):
    """Preprocess, fit the configured model, and score every node.

    Densification (when enabled) only changes the graph seen by the fit;
    scores are computed on the fitted graph as well. AUC is reported when
    the input graph carries 0/1 labels. Returns an AnomalyResult.
    """
    config = config or AnomalyConfig()
    fit_graph = graph
    if not config.use_features and graph.features is not None:
        fit_graph = build_graph(graph.n_nodes, graph.edges, labels=graph.labels)
    if config.densify:
        fit_graph = densify_two_hop(fit_graph)
    model = _build_model(config).fit(fit_graph)
    f = model.affiliations_
    signature = model.signature_
    if config.criterion == STAR:
        scores = score_star(f, fit_graph, signature)
    elif config.criterion == PRIOR:
        scores = score_prior(f, model.prior_, features=model.features_)
    else:
        scores = score_prior_star(f, fit_graph, signature, model.prior_,
                                  features=model.features_)
    isolated = fit_graph.degrees == 0
    auc = None
    if graph.labels is not None:
        auc = auc_roc(scores, graph.labels)
    flags = None
    if config.threshold is not None:
        flags = scores >= config.threshold
    return AnomalyResult(scores=scores, isolated=isolated, auc=auc, flags=flags,
                         config=config.to_dict(), model_=model)


def plant_rewired_anomalies(graph, nodes, rng, n_edges=None, classes=None):
    """Rewire chosen nodes to random targets and label them anomalous.

    Every edge touching a planted node is removed; each planted node then
    connects to n_edges targets (its original degree when None) drawn
    without replacement from the non-planted nodes, restricted to other
    classes when `classes` is given. Returns the labeled graph.
    """
    rng = as_rng(rng)
    nodes = np.asarray(nodes, dtype=np.int64)
    planted = np.zeros(graph.n_nodes, dtype=bool)
    planted[nodes] = True
    degrees = graph.degrees
    keep = ~(planted[graph.edges[:, 0]] | planted[graph.edges[:, 1]])
    new_edges = [graph.edges[keep]]
    for node in nodes:
        pool = np.nonzero(~planted)[0]
        if classes is not None:
            pool = pool[classes[pool] != classes[node]]
        count = int(degrees[node]) if n_edges is None else int(n_edges)
        count = min(count, pool.size)
        targets = rng.choice(pool, size=count, replace=False)
        new_edges.append(np.column_stack([np.full(count, node), targets]))
    labels = planted.astype(np.int64)
    return build_graph(graph.n_nodes, np.concatenate(new_edges),
                       features=graph.features, labels=labels)
