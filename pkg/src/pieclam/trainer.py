"""Alternating training of affiliations and a flow prior.

The joint objective adds a node-wise prior term to the structural
likelihood,

    l(F) = sum_n log p(f_n (+) x_n) + l_structural(F),

where x_n are (reduced) node features entering the prior input only; they
stay constant while F moves. Training alternates phases: an affiliation
phase ascends the joint objective in F with the prior frozen (the prior's
input gradient is pulled back onto the affiliation coordinates), and a
prior phase trains the flow on the current, noise-perturbed rows with F
frozen. Later rounds can halve learning rates and noise amplitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import geometry
from .clam import fit_affiliations
from .features import reduce_features
from .flow import RealNvpFlow, train_prior
from .graphs import as_rng, sample_bernoulli_graph
from .likelihood import LOG_EPS, log_likelihood_sparse

AFFILIATIONS = "affiliations"
PRIOR = "prior"


@dataclass(frozen=True)
class Phase:
    target: str                    # "affiliations" or "prior"
    steps: int
    learning_rate: float
    noise_amplitude: float = 0.0

    def __post_init__(self):
        if self.target not in (AFFILIATIONS, PRIOR):
            raise ValueError(f"unknown phase target {self.target!r}")
        if self.steps < 0 or self.learning_rate <= 0 or self.noise_amplitude < 0:
            raise ValueError("invalid phase parameters")


@dataclass(frozen=True)
class Schedule:
    phases: tuple
    halve_learning_rates: bool = False
    halve_noise: bool = False

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))

    def resolved_phases(self):
        """Phases with halving applied: rates shrink by 2 after each prior phase."""
        out = []
        factor = 1.0
        for phase in self.phases:
            lr = phase.learning_rate * (factor if self.halve_learning_rates else 1.0)
            noise = phase.noise_amplitude * (factor if self.halve_noise else 1.0)
            out.append(Phase(phase.target, phase.steps, lr, noise))
            if phase.target == PRIOR:
                factor *= 0.5
        return out

    def to_dict(self):
        return {
            "phases": [
                {"target": p.target, "steps": p.steps,
                 "learning_rate": p.learning_rate,
                 "noise_amplitude": p.noise_amplitude}
                for p in self.phases
            ],
            "halve_learning_rates": self.halve_learning_rates,
            "halve_noise": self.halve_noise,
        }

    @classmethod
    def from_dict(cls, d):
        phases = tuple(
            Phase(p["target"], int(p["steps"]), float(p["learning_rate"]),
                  float(p.get("noise_amplitude", 0.0)))
            for p in d["phases"]
        )
        return cls(phases, bool(d.get("halve_learning_rates", False)),
                   bool(d.get("halve_noise", False)))


def default_schedule(rounds=2, f_steps=500, p_steps=1300, f_lr=2e-6, p_lr=1e-6,
                     noise=0.01):
    """Alternate affiliation and prior phases with fixed rates."""
    phases = []
    for _ in range(rounds):
        phases.append(Phase(AFFILIATIONS, f_steps, f_lr))
        phases.append(Phase(PRIOR, p_steps, p_lr, noise))
    return Schedule(tuple(phases))


def three_round_schedule(f_lr=3e-6, p_lr=2e-6, noise=0.05):
    """Three rounds with learning rates and noise halved after every round."""
    phases = []
    for _ in range(3):
        phases.append(Phase(AFFILIATIONS, 500, f_lr))
        phases.append(Phase(PRIOR, 1300, p_lr, noise))
    return Schedule(tuple(phases), halve_learning_rates=True, halve_noise=True)


@dataclass
class PhaseTrace:
    index: int
    target: str
    learning_rate: float
    noise_amplitude: float
    losses: np.ndarray = field(repr=False)


def _prior_input(f, features):
    if features is None:
        return f
    return np.concatenate([f, features], axis=1)


def joint_log_likelihood(f, graph, signature, flow, features=None, log_eps=LOG_EPS):
    """Structural likelihood plus the summed prior log-density of all rows."""
    structural = log_likelihood_sparse(f, graph, signature, log_eps=log_eps)
    prior = float(flow.log_density(_prior_input(f, features)).sum())
    return structural + prior


def alternating_fit(graph, signature, schedule, flow, rng, features=None,
                    init=None, log_eps=LOG_EPS, prior_optimizer="sgd"):
    """Run the phase schedule; mutates `flow`, returns (F, flow, phase traces).

    features must already be reduced to the prior's trailing input block:
    flow.dim == signature.dim + features.shape[1]. With flow=None the prior
    term is dropped entirely and only affiliation phases run (plain fits).
    Each phase trace records the joint objective, entry 0 before the phase's
    first update.
    """
    rng = as_rng(rng)
    feat_dim = 0 if features is None else features.shape[1]
    if flow is not None and flow.dim != signature.dim + feat_dim:
        raise ValueError(
            f"flow dim {flow.dim} != affiliation dim {signature.dim} + feature dim {feat_dim}")
    f = geometry.random_affiliations(graph.n_nodes, signature, rng) if init is None \
        else np.array(init, dtype=np.float64)
    traces = []
    for index, phase in enumerate(schedule.resolved_phases()):
        if phase.target == AFFILIATIONS:
            if flow is None:
                prior_grad = prior_loss = None
            else:
                def prior_grad(fv):
                    g = flow.grad_log_density(_prior_input(fv, features))
                    return g[:, :signature.dim]

                def prior_loss(fv):
                    return float(flow.log_density(_prior_input(fv, features)).sum())

            f, losses = fit_affiliations(
                graph, signature, n_iter=phase.steps,
                learning_rate=phase.learning_rate, rng=rng, init=f,
                log_eps=log_eps, prior_grad=prior_grad, prior_loss=prior_loss)
        else:
            if flow is None:
                raise ValueError("prior phase scheduled but no flow given")
            samples = _prior_input(f, features)
            structural = log_likelihood_sparse(f, graph, signature, log_eps=log_eps)
            losses = np.empty(phase.steps + 1)
            losses[0] = structural + float(flow.log_density(samples).sum())

            def record(step):
                losses[step + 1] = structural + float(flow.log_density(samples).sum())

            train_prior(flow, samples, phase.steps, phase.learning_rate,
                        noise_amplitude=phase.noise_amplitude, rng=rng,
                        optimizer=prior_optimizer, callback=record)
        traces.append(PhaseTrace(index, phase.target, phase.learning_rate,
                                 phase.noise_amplitude, losses))
    return f, flow, traces


def generate_graph(flow, signature, n_nodes, rng):
    """Sample affiliation rows from the prior, project, decode, draw edges.

    When the prior was trained on concatenated features, only the leading
    affiliation block of each sampled row is used.
    """
    rng = as_rng(rng)
    rows = flow.sample(n_nodes, rng)
    aff = geometry.project_to_cone(rows[:, :signature.dim], signature)
    probs = geometry.decode(aff, signature)
    return sample_bernoulli_graph(probs, rng)


class _PriorAffiliationModel(BaseEstimator):
    """Shared plumbing for the prior-bearing models."""

    def __init__(self, n_communities, schedule, n_blocks, hidden,
                 feature_target_dim, prior_optimizer, log_eps, random_state):
        self.n_communities = n_communities
        self.schedule = schedule
        self.n_blocks = n_blocks
        self.hidden = hidden
        self.feature_target_dim = feature_target_dim
        self.prior_optimizer = prior_optimizer
        self.log_eps = log_eps
        self.random_state = random_state

    def _signature(self):
        raise NotImplementedError

    def fit(self, graph, init=None):
        rng = as_rng(self.random_state)
        signature = self._signature()
        features = None
        if graph.features is not None:
            features = reduce_features(graph.features, self.feature_target_dim)
        feat_dim = 0 if features is None else features.shape[1]
        flow = RealNvpFlow.build(signature.dim + feat_dim, n_blocks=self.n_blocks,
                                 hidden=self.hidden, rng=rng)
        schedule = self.schedule if self.schedule is not None else default_schedule()
        f, flow, traces = alternating_fit(
            graph, signature, schedule, flow, rng, features=features, init=init,
            log_eps=self.log_eps, prior_optimizer=self.prior_optimizer)
        self.signature_ = signature
        self.affiliations_ = f
        self.prior_ = flow
        self.features_ = features
        self.phase_traces_ = traces
        self.schedule_ = schedule
        return self

    def _check_fitted(self):
        if not hasattr(self, "affiliations_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def decode(self):
        self._check_fitted()
        return geometry.decode(self.affiliations_, self.signature_)

    def joint_log_likelihood(self, graph):
        self._check_fitted()
        return joint_log_likelihood(self.affiliations_, graph, self.signature_,
                                    self.prior_, features=self.features_,
                                    log_eps=self.log_eps)

    def generate(self, n_nodes, rng=None):
        """Sample a new graph of n_nodes nodes from the learned prior."""
        self._check_fitted()
        return generate_graph(self.prior_, self.signature_, n_nodes, as_rng(rng))


class PieClam(_PriorAffiliationModel):
    """Lorentz community-affiliation model with a learned flow prior."""

    def __init__(self, n_communities=15, schedule=None, n_blocks=6, hidden=64,
                 feature_target_dim=100, prior_optimizer="sgd", log_eps=LOG_EPS,
                 random_state=None):
        super().__init__(n_communities, schedule, n_blocks, hidden,
                         feature_target_dim, prior_optimizer, log_eps, random_state)

    def _signature(self):
        return geometry.lorentz(self.n_communities)


class PClam(_PriorAffiliationModel):
    """Euclidean community-affiliation model with a learned flow prior."""

    def __init__(self, n_communities=24, schedule=None, n_blocks=6, hidden=64,
                 feature_target_dim=100, prior_optimizer="sgd", log_eps=LOG_EPS,
                 random_state=None):
        super().__init__(n_communities, schedule, n_blocks, hidden,
                         feature_target_dim, prior_optimizer, log_eps, random_state)

    def _signature(self):
        return geometry.euclidean(self.n_communities)
