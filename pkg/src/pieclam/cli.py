"""Command-line surface: every pipeline behind one `pieclam` executable.

Subcommands: fit, distance, experiment, anomaly, generate, sample-sbm. Each
run is deterministic under --seed, echoes its fully-resolved configuration
to resolved_config.json next to its outputs, and exits 0 on success, 2 on
input errors, 3 on numerical failure.
"""

import os
import sys

import click
import numpy as np

from . import anomaly as anomaly_mod
from . import experiments, figures, io, metrics
from .clam import BigClam, IeClam
from .errors import NumericalError
from .geometry import decode
from .graphs import (build_graph, sample_sbm, sbm_prob_matrix, SbmSpec,
                     three_class_off_diagonal_sbm, two_block_assortative_sbm)
from .trainer import PClam, PieClam, Schedule, generate_graph

FORMATS = ("csv", "json", "svg")

_PLAIN = {"bigclam": BigClam, "ieclam": IeClam}
_PRIOR = {"pclam": PClam, "pieclam": PieClam}

_format_option = click.option(
    "--format", "formats", multiple=True, type=click.Choice(FORMATS),
    default=FORMATS, show_default=True,
    help="Output kinds to write; repeat to select several.")


def _read_config(path):
    return io.read_json(path) if path else {}


def _resolve(flag, config, key, default):
    """Explicit flag wins, then the config file, then the default."""
    if flag is not None:
        return flag
    if key in config and config[key] is not None:
        return config[key]
    return default


def _load_graph(path, features_path=None, labels_path=None):
    graph = io.read_edge_list(path)
    if features_path is None and labels_path is None:
        return graph
    features = (io.read_features_csv(features_path, graph.n_nodes)
                if features_path else None)
    labels = (io.read_labels_csv(labels_path, graph.n_nodes)
              if labels_path else None)
    return build_graph(graph.n_nodes, graph.edges, features=features,
                       labels=labels)


def _echo_config(out_dir, payload):
    io.write_json(os.path.join(out_dir, "resolved_config.json"), payload)


def _distance_dict(result):
    out = {"value": result.value, "witness": result.witness.to_dict()}
    if result.d is not None:
        out["d"] = result.d
    if result.e is not None:
        out["e"] = result.e
    return out


@click.group()
def cli():
    """Community-affiliation graph autoencoders with flow priors."""


@cli.command()
@click.argument("graph_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--features", "features_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Optional node-feature CSV.")
@click.option("--model", type=click.Choice(sorted(_PLAIN | _PRIOR)), default=None)
@click.option("--communities", type=int, default=None)
@click.option("--iterations", type=int, default=None,
              help="Gradient-ascent iterations (plain models).")
@click.option("--learning-rate", type=float, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_format_option
def fit(graph_path, features_path, model, communities, iterations,
        learning_rate, config_path, seed, out_dir, formats):
    """Fit an affiliation model to an edge-list graph."""
    config = _read_config(config_path)
    model = _resolve(model, config, "model", "bigclam")
    seed = int(_resolve(seed, config, "seed", 0))
    io.ensure_dir(out_dir)
    graph = _load_graph(graph_path, features_path)

    kwargs = {"random_state": seed}
    if _resolve(communities, config, "communities", None) is not None:
        kwargs["n_communities"] = int(_resolve(communities, config, "communities", None))
    resolved = {"command": "fit", "graph": graph_path, "features": features_path,
                "model": model, "seed": seed, "format": list(formats)}
    if model in _PLAIN:
        if _resolve(iterations, config, "iterations", None) is not None:
            kwargs["n_iter"] = int(_resolve(iterations, config, "iterations", None))
        if _resolve(learning_rate, config, "learning_rate", None) is not None:
            kwargs["learning_rate"] = float(
                _resolve(learning_rate, config, "learning_rate", None))
        estimator = _PLAIN[model](**kwargs).fit(graph)
        resolved.update({
            "communities": estimator.n_communities,
            "iterations": estimator.n_iter,
            "learning_rate": estimator.learning_rate,
        })
        if "csv" in formats:
            io.write_trace_csv(os.path.join(out_dir, "loss_trace.csv"),
                               estimator.loss_trace_)
    else:
        if config.get("schedule") is not None:
            kwargs["schedule"] = Schedule.from_dict(config["schedule"])
        for key in ("n_blocks", "hidden", "prior_optimizer", "feature_target_dim"):
            if config.get(key) is not None:
                kwargs[key] = config[key]
        estimator = _PRIOR[model](**kwargs).fit(graph)
        resolved.update({
            "communities": estimator.n_communities,
            "schedule": estimator.schedule_.to_dict(),
            "n_blocks": estimator.n_blocks,
            "hidden": estimator.hidden,
            "prior_optimizer": estimator.prior_optimizer,
            "feature_target_dim": estimator.feature_target_dim,
        })
        if "csv" in formats:
            io.write_phase_traces_csv(os.path.join(out_dir, "phase_traces.csv"),
                                      estimator.phase_traces_)
        if "json" in formats:
            io.save_flow(os.path.join(out_dir, "prior"), estimator.prior_)
    if "csv" in formats:
        io.save_affiliations(os.path.join(out_dir, "affiliations"),
                             estimator.affiliations_, estimator.signature_)
    _echo_config(out_dir, resolved)
    click.echo(f"fitted {model} on {graph.n_nodes} nodes; artifacts in {out_dir}")


@cli.command()
@click.argument("target_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("model_base", type=click.Path(exists=False))
@click.option("--restarts", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_format_option
def distance(target_path, model_base, restarts, config_path, seed, out_dir, formats):
    """Distances between a saved model's decode and a target graph or matrix.

    TARGET_PATH is a probability-matrix CSV (.csv) or an edge list (anything
    else). MODEL_BASE is the affiliation artifact base path, or the directory
    a fit run wrote.
    """
    config = _read_config(config_path)
    restarts = int(_resolve(restarts, config, "restarts", 200))
    seed = int(_resolve(seed, config, "seed", 0))
    io.ensure_dir(out_dir)
    if os.path.isdir(model_base):
        model_base = os.path.join(model_base, "affiliations")
    f, signature = io.load_affiliations(model_base)
    if target_path.endswith(".csv"):
        target = io.read_matrix_csv(target_path)
    else:
        target = io.read_edge_list(target_path).adjacency()
    p = decode(f, signature)
    if p.shape != target.shape:
        raise ValueError(
            f"decode shape {p.shape} does not match target {target.shape}")

    rng = np.random.default_rng(seed)
    cut_value, cut_witness = metrics.cut_norm(p - target, restarts=restarts, rng=rng)
    report = {
        "nodes": p.shape[0],
        "l2": metrics.l2_distance(p, target),
        "cut_norm": {"value": cut_value, "witness": cut_witness.to_dict()},
    }
    if p.max(initial=0.0) < 1.0 and target.max(initial=0.0) < 1.0:
        report["d0"] = _distance_dict(
            metrics.log_cut_distance_zero(p, target, restarts=restarts, rng=rng))
    else:
        report["d0"] = None
    binary = np.isin(target, (0.0, 1.0)).all()
    if binary:
        report["pa"] = _distance_dict(
            metrics.log_cut_distance_pa(p, target, restarts=restarts, rng=rng))
    else:
        report["pa"] = None
    report["pq"] = _distance_dict(
        metrics.log_cut_distance_pq(p, target, restarts=restarts, rng=rng))
    if "json" in formats:
        io.write_json(os.path.join(out_dir, "metrics.json"), report)
    _echo_config(out_dir, {"command": "distance", "target": target_path,
                           "model": model_base, "restarts": restarts,
                           "seed": seed, "format": list(formats)})
    click.echo(f"l2 {report['l2']:.6g}, cut {cut_value:.6g}; metrics in {out_dir}")


@cli.command()
@click.argument("name", type=click.Choice(experiments.EXPERIMENT_NAMES))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON file overriding experiment parameters.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_format_option
def experiment(name, config_path, seed, out_dir, formats):
    """Run a named end-to-end experiment."""
    config = _read_config(config_path)
    seed = int(_resolve(seed, config, "seed", 0))
    overrides = {k: v for k, v in config.items() if k != "seed"}
    summary = experiments.run_experiment(name, out_dir, seed=seed,
                                         overrides=overrides, formats=formats)
    _echo_config(out_dir, {"command": "experiment", "name": name, "seed": seed,
                           "format": list(formats), **summary["params"]})
    click.echo(f"experiment {name} done; artifacts in {out_dir}")


@cli.command()
@click.argument("graph_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--labels", "labels_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="node,label CSV enabling AUC.")
@click.option("--features", "features_path", type=click.Path(exists=True, dir_okay=False),
              default=None)
@click.option("--criterion", type=click.Choice(["S", "P", "PS"]), default=None)
@click.option("--model", type=click.Choice(sorted(_PLAIN | _PRIOR)), default=None)
@click.option("--communities", type=int, default=None)
@click.option("--iterations", type=int, default=None)
@click.option("--learning-rate", type=float, default=None)
@click.option("--densify/--no-densify", default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON with AnomalyConfig fields.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_format_option
def anomaly(graph_path, labels_path, features_path, criterion, model,
            communities, iterations, learning_rate, densify, threshold,
            config_path, seed, out_dir, formats):
    """Score nodes of a graph for anomalies."""
    fields = _read_config(config_path)
    for key, value in (("criterion", criterion), ("model", model),
                       ("n_communities", communities), ("n_iter", iterations),
                       ("learning_rate", learning_rate), ("densify", densify),
                       ("threshold", threshold), ("seed", seed)):
        if value is not None:
            fields[key] = value
    if "model" not in fields or fields["model"] is None:
        fields["model"] = ("ieclam" if fields.get("criterion", "S") == "S"
                           else "pieclam")
    cfg = anomaly_mod.AnomalyConfig.from_dict(fields)
    io.ensure_dir(out_dir)
    graph = _load_graph(graph_path, features_path, labels_path)
    result = anomaly_mod.detect(graph, cfg)
    if "csv" in formats:
        io.write_scores_csv(os.path.join(out_dir, "scores.csv"),
                            result.scores, flags=result.flags)
    summary = {
        "auc": result.auc,
        "isolated": [int(i) for i in np.nonzero(result.isolated)[0]],
        "n_flagged": None if result.flags is None else int(result.flags.sum()),
        "config": result.config,
    }
    if "json" in formats:
        io.write_json(os.path.join(out_dir, "summary.json"), summary)
    _echo_config(out_dir, {"command": "anomaly", "graph": graph_path,
                           "labels": labels_path, "features": features_path,
                           "format": list(formats), **result.config})
    auc_text = "n/a" if result.auc is None else f"{result.auc:.4f}"
    click.echo(f"scored {graph.n_nodes} nodes (criterion {cfg.criterion}, "
               f"AUC {auc_text}); outputs in {out_dir}")


@cli.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--nodes", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_format_option
def generate(run_dir, nodes, seed, out_dir, formats):
    """Sample a graph from a fitted prior-bearing model's artifacts."""
    _, signature = io.load_affiliations(os.path.join(run_dir, "affiliations"))
    flow = io.load_flow(os.path.join(run_dir, "prior"))
    io.ensure_dir(out_dir)
    graph = generate_graph(flow, signature, int(nodes),
                           np.random.default_rng(seed))
    if "csv" in formats:
        io.write_edge_list(os.path.join(out_dir, "edges.txt"), graph)
    _echo_config(out_dir, {"command": "generate", "run_dir": run_dir,
                           "nodes": int(nodes), "seed": int(seed),
                           "format": list(formats)})
    click.echo(f"sampled {graph.n_nodes} nodes, {graph.n_edges} edges into {out_dir}")


@cli.command("sample-sbm")
@click.option("--preset", type=click.Choice(["three-class-off-diagonal",
                                             "two-block-assortative"]),
              default="three-class-off-diagonal", show_default=True)
@click.option("--nodes", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON with class_probs/block_probs overriding the preset.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_format_option
def sample_sbm_cmd(preset, nodes, config_path, seed, out_dir, formats):
    """Sample a stochastic block model graph and its class assignment."""
    config = _read_config(config_path)
    nodes = int(_resolve(nodes, config, "nodes", 210))
    seed = int(_resolve(seed, config, "seed", 0))
    if "class_probs" in config or "block_probs" in config:
        if not ("class_probs" in config and "block_probs" in config):
            raise ValueError("custom SBM config needs both class_probs and block_probs")
        spec = SbmSpec(np.asarray(config["class_probs"], dtype=np.float64),
                       np.asarray(config["block_probs"], dtype=np.float64))
    elif preset == "three-class-off-diagonal":
        spec = three_class_off_diagonal_sbm()
    else:
        spec = two_block_assortative_sbm()
    io.ensure_dir(out_dir)
    graph, classes = sample_sbm(spec, nodes, np.random.default_rng(seed))
    if "csv" in formats:
        io.write_edge_list(os.path.join(out_dir, "edges.txt"), graph)
        io.write_class_csv(os.path.join(out_dir, "classes.csv"), classes)
    if "svg" in formats:
        order = np.argsort(classes, kind="stable")
        probs = sbm_prob_matrix(spec, classes)[np.ix_(order, order)]
        figures.svg_heatmap(os.path.join(out_dir, "block_probabilities.svg"),
                            probs, title="block probabilities (nodes sorted by class)")
    _echo_config(out_dir, {"command": "sample-sbm", "preset": preset,
                           "nodes": nodes, "seed": seed,
                           "class_probs": [float(x) for x in spec.class_probs],
                           "block_probs": [[float(x) for x in row]
                                           for row in spec.block_probs],
                           "format": list(formats)})
    click.echo(f"sampled {graph.n_nodes} nodes, {graph.n_edges} edges into {out_dir}")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.Abort:
        sys.exit(2)
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(3)
    except (ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
