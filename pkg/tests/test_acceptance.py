"""Acceptance gate: eleven end-to-end checks, one pass/fail line each.

Every check prints `criterion NN <name>: PASS|FAIL` (visible under
`pytest -s`) and then asserts, so the suite fails loudly on any regression.
Tolerances and fit settings are pinned; they are part of the contract.
"""

import math

import numpy as np
import pytest

from pieclam import geometry
from pieclam.anomaly import AnomalyConfig, detect, plant_rewired_anomalies
from pieclam.clam import encode_bipartite_ieclam
from pieclam.cli import main as cli_main
from pieclam.experiments import (best_gaussian_log_density, mixture_sample,
                                 run_experiment)
from pieclam.flow import RealNvpFlow, train_prior
from pieclam.graphs import (bipartite_prob_matrix, build_graph,
                            sample_bernoulli_graph, sample_sbm,
                            two_block_assortative_sbm)
from pieclam.io import write_edge_list, write_json
from pieclam.likelihood import (log_likelihood_dense, log_likelihood_grad,
                                log_likelihood_sparse)
from pieclam.metrics import cut_norm_exact, cut_norm_local_search
from pieclam.trainer import (AFFILIATIONS, PRIOR, Phase, Schedule)
from pieclam.universality import (BlockModel, Icg, block_model_to_cone_features,
                                  icg_to_lorentz_features)


def report(number, name, ok):
    print(f"criterion {number:02d} {name}: {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {number:02d} {name} failed"


def random_graph(n, signature, rng):
    f = geometry.random_affiliations(n, signature, rng)
    probs = geometry.decode(0.6 * f, signature)
    return sample_bernoulli_graph(probs, rng)


def test_criterion_01_bipartite_code_is_exact():
    worst = 0.0
    feasible = True
    for a in (0.5, 1.0, 2.0):
        for n in (1, 5, 20):
            f, sig = encode_bipartite_ieclam(n, a)
            decoded = geometry.decode(f, sig)
            target = bipartite_prob_matrix(n, math.sqrt(2.0) * a)
            worst = max(worst, float(np.abs(decoded - target).max()))
            feasible &= bool(geometry.in_cone(f, sig, atol=1e-12))
    report(1, "exact bipartite code (err <= 1e-12, in cone)",
           worst <= 1e-12 and feasible)


def test_criterion_02_bipartite_separates_geometries(tmp_path):
    summary = run_experiment("bipartite-counterexample", str(tmp_path),
                             seed=0, formats=())
    ok = (summary["all_euclidean_above_bound"]
          and summary["min_euclidean_distance"] >= 0.25
          and summary["lorentz_distance"] <= 1e-9)
    report(2, "bipartite floor 0.25 for Euclidean fits, 0 for the code", ok)


def test_criterion_03_exclusive_channels_win_on_off_diagonal_blocks(tmp_path):
    summary = run_experiment("sbm-recon", str(tmp_path), seed=0, formats=())
    med = {r["geometry"]: r["median_final_distance"]
           for r in summary["results"]}
    ok = med["lorentz"] <= 0.05 and med["euclidean"] - med["lorentz"] >= 0.02
    report(3, "off-diagonal SBM: lorentz <= 0.05, gap >= 0.02 "
              f"(lorentz {med['lorentz']:.4f}, euclidean {med['euclidean']:.4f})",
           ok)


def test_criterion_04_gradient_matches_finite_differences():
    rng = np.random.default_rng(10)
    step = 1e-5
    worst = 0.0
    for sig in (geometry.euclidean(3), geometry.lorentz(2)):
        for _ in range(20):
            n = int(rng.integers(3, 16))
            graph = random_graph(n, sig, rng)
            f = geometry.random_affiliations(n, sig, rng) + 0.3
            grad = log_likelihood_grad(f, graph, sig)
            fd = np.zeros_like(f)
            for i in range(n):
                for j in range(sig.dim):
                    up = f.copy()
                    up[i, j] += step
                    down = f.copy()
                    down[i, j] -= step
                    fd[i, j] = (log_likelihood_dense(up, graph, sig)
                                - log_likelihood_dense(down, graph, sig)) / (2 * step)
            worst = max(worst, float(np.abs(grad - fd).max()))
    report(4, f"analytic gradient vs finite differences (max err {worst:.2e})",
           worst <= 1e-5)


def test_criterion_05_sparse_objective_matches_dense():
    rng = np.random.default_rng(11)
    worst = 0.0
    for trial in range(50):
        sig = geometry.euclidean(4) if trial % 2 else geometry.lorentz(2)
        n = int(rng.integers(2, 31))
        graph = random_graph(n, sig, rng)
        f = geometry.random_affiliations(n, sig, rng)
        dense = log_likelihood_dense(f, graph, sig)
        sparse = log_likelihood_sparse(f, graph, sig)
        worst = max(worst, abs(dense - sparse) / max(1.0, abs(dense)))
    report(5, f"sparse vs dense objective (max rel err {worst:.2e})",
           worst <= 1e-8)


def test_criterion_06_flow_integrity():
    rng = np.random.default_rng(12)
    ok = True
    # Invertibility after training, any depth.
    flow = RealNvpFlow.build(4, n_blocks=4, rng=rng)
    train_prior(flow, rng.standard_normal((64, 4)) + 1.5, steps=60,
                learning_rate=1e-2, rng=rng)
    x = rng.standard_normal((50, 4))
    z, _ = flow.forward(x)
    back, _ = flow.inverse(z)
    ok &= float(np.abs(back - x).max()) <= 1e-6
    # Volume bookkeeping against a numerical Jacobian.
    for dim in (2, 4):
        small = RealNvpFlow.build(dim, n_blocks=3, rng=rng)
        train_prior(small, rng.standard_normal((32, dim)), steps=40,
                    learning_rate=1e-2, rng=rng)
        for point in rng.standard_normal((4, dim)):
            jac = np.zeros((dim, dim))
            for j in range(dim):
                up = point.copy()
                up[j] += 1e-6
                down = point.copy()
                down[j] -= 1e-6
                jac[:, j] = (small.forward(up[None])[0][0]
                             - small.forward(down[None])[0][0]) / 2e-6
            _, fd_logdet = np.linalg.slogdet(jac)
            ok &= abs(small.forward(point[None])[1][0] - fd_logdet) <= 1e-4
    # The density must integrate to one.
    flow2 = RealNvpFlow.build(2, n_blocks=4, rng=rng)
    train_prior(flow2, 0.8 * rng.standard_normal((128, 2)), steps=60,
                learning_rate=1e-2, rng=rng)
    step = 0.05
    axis = np.arange(-6.0, 6.0, step) + step / 2
    xx, yy = np.meshgrid(axis, axis)
    mass = float(np.exp(flow2.log_density(
        np.column_stack([xx.ravel(), yy.ravel()]))).sum() * step * step)
    ok &= abs(mass - 1.0) <= 0.02
    report(6, f"flow invertibility, log-det, normalization (mass {mass:.4f})",
           ok)


def test_criterion_07_constructive_codes_are_exact():
    rng = np.random.default_rng(13)
    worst_icg = 0.0
    for _ in range(25):
        n, k = int(rng.integers(2, 21)), int(rng.integers(1, 9))
        icg = Icg((rng.random((n, k)) < 0.5).astype(float),
                  rng.uniform(-3.0, 3.0, size=k))
        f, sig = icg_to_lorentz_features(icg)
        pairings = geometry.pairing_matrix(f, sig)
        worst_icg = max(worst_icg,
                        float(np.abs(pairings - icg.reconstruct()).max()))
    worst_bm = 0.0
    feasible = True
    for _ in range(25):
        k = int(rng.integers(1, 5))
        values = rng.uniform(0.0, 2.0, size=(k, k))
        bm = BlockModel(rng.integers(0, k, size=12), (values + values.T) / 2)
        f, sig = block_model_to_cone_features(bm)
        pairings = geometry.pairing_matrix(f, sig)
        worst_bm = max(worst_bm,
                       float(np.abs(pairings - bm.reconstruct()).max()))
        feasible &= bool(geometry.in_cone(f, sig, atol=0))
    report(7, "community and block-model codes reproduce targets exactly",
           worst_icg <= 1e-12 and worst_bm <= 1e-12 and feasible)


def test_criterion_08_local_search_tracks_exact_cut_norm():
    rng = np.random.default_rng(14)
    hits = 0
    sound = True
    for _ in range(100):
        n1 = int(rng.integers(2, 15))
        n2 = int(rng.integers(2, 15))
        x = rng.standard_normal((n1, n2))
        exact, _ = cut_norm_exact(x)
        approx, _ = cut_norm_local_search(x, restarts=50, rng=rng)
        sound &= approx <= exact + 1e-12
        hits += int(abs(approx - exact) <= 1e-9)
    report(8, f"local-search cut norm: lower bound, {hits}/100 exact",
           sound and hits >= 95)


def _planted_anomaly_graph(seed):
    spec = two_block_assortative_sbm()
    graph, _ = sample_sbm(spec, 200, np.random.default_rng((seed, 0)))
    planted = np.random.default_rng((seed, 1)).choice(200, size=10,
                                                      replace=False)
    return plant_rewired_anomalies(graph, planted,
                                   np.random.default_rng((seed, 2)))


def _ps_schedule():
    phases = []
    for _ in range(2):
        phases.append(Phase(AFFILIATIONS, 500, 1e-4))
        phases.append(Phase(PRIOR, 300, 1e-3, 0.05))
    return Schedule(tuple(phases), halve_learning_rates=True, halve_noise=True)


def test_criterion_09_planted_anomalies_are_ranked_high():
    star_aucs = []
    joint_aucs = []
    for seed in range(5):
        graph = _planted_anomaly_graph(seed)
        star = detect(graph, AnomalyConfig(
            criterion="S", model="ieclam", n_communities=2, n_iter=2000,
            learning_rate=3e-4, seed=seed))
        joint = detect(graph, AnomalyConfig(
            criterion="PS", model="pieclam", n_communities=2,
            schedule=_ps_schedule(), prior_optimizer="adam", seed=seed))
        star_aucs.append(star.auc)
        joint_aucs.append(joint.auc)
    star_med = float(np.median(star_aucs))
    joint_med = float(np.median(joint_aucs))
    ok = star_med >= 0.7 and joint_med >= star_med - 0.05
    report(9, f"planted anomalies: star AUC {star_med:.3f} >= 0.7, "
              f"joint {joint_med:.3f} within 0.05", ok)


def test_criterion_10_flow_prior_beats_gaussian_on_mixture():
    margins = []
    for seed in range(3):
        train = mixture_sample(2000, np.random.default_rng((seed, 0)),
                               nonnegative=True)
        held = mixture_sample(1000, np.random.default_rng((seed, 1)),
                              nonnegative=True)
        flow = RealNvpFlow.build(2, n_blocks=6, hidden=64,
                                 rng=np.random.default_rng((seed, 2)))
        train_prior(flow, train, steps=2000, learning_rate=1e-3,
                    rng=np.random.default_rng((seed, 3)), optimizer="adam",
                    batch_size=256)
        learned = float(flow.log_density(held).mean())
        gaussian = float(best_gaussian_log_density(train, held).mean())
        margins.append(learned - gaussian)
    margin = float(np.median(margins))
    report(10, f"learned prior beats Gaussian MLE by {margin:.3f} nats "
               "(>= 0.3)", margin >= 0.3)


def test_criterion_11_cli_runs_are_byte_reproducible(tmp_path):
    edges = [[i, j] for i in range(8) for j in range(i + 1, 8)
             if (i < 4) == (j < 4)] + [[0, 4]]
    graph_path = tmp_path / "graph.txt"
    write_edge_list(graph_path, build_graph(8, edges))
    cfg = tmp_path / "cfg.json"
    write_json(cfg, {
        "model": "pieclam", "communities": 2, "n_blocks": 2, "hidden": 8,
        "seed": 3,
        "schedule": {"phases": [
            {"target": "affiliations", "steps": 40, "learning_rate": 1e-3},
            {"target": "prior", "steps": 20, "learning_rate": 1e-3,
             "noise_amplitude": 0.01},
        ]},
    })
    identical = True
    for args, names in (
        (["fit", str(graph_path), "--config", str(cfg)],
         ("affiliations.csv", "affiliations.json", "phase_traces.csv",
          "prior.json", "prior.bin", "resolved_config.json")),
        (["sample-sbm", "--nodes", "60", "--seed", "5"],
         ("edges.txt", "classes.csv", "block_probabilities.svg",
          "resolved_config.json")),
    ):
        dirs = []
        for run in ("a", "b"):
            out = tmp_path / f"{args[0]}-{run}"
            assert cli_main(args + ["--out", str(out)]) == 0
            dirs.append(out)
        for name in names:
            identical &= ((dirs[0] / name).read_bytes()
                          == (dirs[1] / name).read_bytes())
    report(11, "identical seeds give byte-identical CLI artifacts", identical)
