"""Overlapping community-affiliation graph autoencoders.

Nodes carry nonnegative affiliation vectors; an inner product (Euclidean or
Lorentz-style, which admits exclusion as well as attraction) maps each node
pair to an edge probability through 1 - exp(-pairing). Plain models fit
affiliations by projected gradient ascent; prior-bearing variants alternate
that with a realNVP density over the rows, enabling generation and
likelihood-based anomaly criteria. Cut-norm based log distances measure how
close a decoded model is to a target graph or probability matrix.
"""

from .anomaly import (AnomalyConfig, AnomalyResult, detect,
                      plant_rewired_anomalies, score_prior, score_prior_star,
                      score_star)
from .clam import (BigClam, IeClam, encode_bipartite_bigclam_noselfloop,
                   encode_bipartite_ieclam, fit_affiliations)
from sklearn.exceptions import NotFittedError

from .errors import NumericalError
from .experiments import EXPERIMENT_NAMES, experiment_defaults, run_experiment
from .flow import RealNvpFlow, identity_flow, train_prior
from .geometry import (Signature, decode, euclidean, lorentz, pairing_matrix,
                       project_to_cone, random_affiliations)
from .graphs import (Graph, SbmSpec, bipartite_prob_matrix, build_graph,
                     densify_two_hop, sample_bernoulli_graph, sample_sbm,
                     sbm_prob_matrix, three_class_off_diagonal_sbm,
                     two_block_assortative_sbm)
from .likelihood import (log_likelihood_dense, log_likelihood_grad,
                         log_likelihood_sparse)
from .metrics import (CutWitness, DistanceResult, auc_roc, cut_norm,
                      cut_norm_exact, cut_norm_local_search, l2_distance,
                      log_cut_distance_pa, log_cut_distance_pq,
                      log_cut_distance_zero, log_transform)
from .trainer import (PClam, Phase, PieClam, Schedule, alternating_fit,
                      default_schedule, generate_graph, three_round_schedule)
from .universality import (BlockModel, Icg, bipartite_block_witness,
                           bipartite_lower_bound, block_model_to_cone_features,
                           empirical_block_model, encode_via_block_model,
                           encode_via_intersecting_communities, fit_icg,
                           icg_to_lorentz_features)

__version__ = "0.1.0"

__all__ = [
    "AnomalyConfig", "AnomalyResult", "BigClam", "BlockModel", "CutWitness",
    "DistanceResult", "EXPERIMENT_NAMES", "Graph", "Icg", "IeClam",
    "NotFittedError", "NumericalError", "PClam", "Phase", "PieClam",
    "RealNvpFlow", "SbmSpec", "Schedule", "Signature", "alternating_fit",
    "auc_roc", "bipartite_block_witness", "bipartite_lower_bound",
    "bipartite_prob_matrix", "block_model_to_cone_features", "build_graph",
    "cut_norm", "cut_norm_exact", "cut_norm_local_search", "decode",
    "default_schedule", "densify_two_hop", "detect", "empirical_block_model",
    "encode_bipartite_bigclam_noselfloop", "encode_bipartite_ieclam",
    "encode_via_block_model", "encode_via_intersecting_communities",
    "euclidean", "experiment_defaults", "fit_affiliations", "fit_icg",
    "generate_graph", "icg_to_lorentz_features", "identity_flow",
    "l2_distance", "log_cut_distance_pa", "log_cut_distance_pq",
    "log_cut_distance_zero", "log_likelihood_dense", "log_likelihood_grad",
    "log_likelihood_sparse", "log_transform", "lorentz", "pairing_matrix",
    "plant_rewired_anomalies", "project_to_cone", "random_affiliations",
    "run_experiment", "sample_bernoulli_graph", "sample_sbm",
    "sbm_prob_matrix", "score_prior", "score_prior_star", "score_star",
    "three_class_off_diagonal_sbm", "three_round_schedule", "train_prior",
    "two_block_assortative_sbm",
]
