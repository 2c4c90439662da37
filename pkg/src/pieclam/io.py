"""File formats: edge lists, CSV matrices, model artifacts, and canonical JSON.

All floats are written with 17 significant digits, enough to round-trip
IEEE doubles, so reruns under a fixed seed produce byte-identical files.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .flow import Mlp, CouplingBlock, RealNvpFlow
from .geometry import Signature
from .graphs import build_graph


def format_float(x):
    return f"{float(x):.17g}"


def _to_json(obj, indent=0):
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for key in obj:
            items.append(f'{pad}  {json.dumps(str(key))}: {_to_json(obj[key], indent + 1)}')
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{pad}  {_to_json(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (float, np.floating)):
        if not np.isfinite(obj):
            raise ValueError(f"cannot serialize non-finite float {obj!r}")
        return format_float(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return json.dumps(obj)


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(_to_json(obj) + "\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class EdgeListParseError(ValueError):
    pass


def write_edge_list(path, graph):
    """One `u v` pair per line; a leading comment records the node count."""
    with open(path, "w") as fh:
        fh.write(f"# nodes: {graph.n_nodes}\n")
        for u, v in graph.edges:
            fh.write(f"{u} {v}\n")


def read_edge_list(path, n_nodes=None):
    """Parse an edge list; `#` starts a comment. Malformed lines report numbers.

    The node count comes from an explicit argument, a `# nodes: N` comment,
    or the largest endpoint plus one.
    """
    edges = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)
            if len(line) == 2 and n_nodes is None:
                comment = line[1].strip()
                if comment.startswith("nodes:"):
                    try:
                        n_nodes = int(comment[len("nodes:"):].strip())
                    except ValueError as exc:
                        raise EdgeListParseError(
                            f"{path}: line {lineno}: bad node count {comment!r}") from exc
            body = line[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 2:
                raise EdgeListParseError(
                    f"{path}: line {lineno}: expected 'u v', got {raw.strip()!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError as exc:
                raise EdgeListParseError(
                    f"{path}: line {lineno}: non-integer endpoint in {raw.strip()!r}") from exc
    edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
    if n_nodes is None:
        n_nodes = int(edges.max()) + 1 if edges.size else 0
    try:
        return build_graph(n_nodes, edges)
    except ValueError as exc:
        raise EdgeListParseError(f"{path}: {exc}") from exc


def write_matrix_csv(path, m):
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    with open(path, "w") as fh:
        for row in m:
            fh.write(",".join(format_float(x) for x in row) + "\n")


def read_matrix_csv(path):
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: not a numeric CSV matrix: {exc}") from exc


def read_features_csv(path, n_nodes):
    x = read_matrix_csv(path)
    if x.shape[0] != n_nodes:
        raise ValueError(f"{path}: {x.shape[0]} feature rows for {n_nodes} nodes")
    return x


def read_labels_csv(path, n_nodes):
    y = read_matrix_csv(path).reshape(-1)
    if y.shape[0] != n_nodes:
        raise ValueError(f"{path}: {y.shape[0]} labels for {n_nodes} nodes")
    out = y.astype(np.int64)
    if not np.isin(out, (0, 1)).all() or (out != y).any():
        raise ValueError(f"{path}: labels must be 0 or 1")
    return out


def save_affiliations(base_path, f, signature):
    """Write <base>.csv (rows) and <base>.json (geometry, communities, nodes)."""
    f = np.asarray(f, dtype=np.float64)
    write_matrix_csv(base_path + ".csv", f)
    header = signature.to_dict()
    header["n_nodes"] = int(f.shape[0])
    write_json(base_path + ".json", header)


def load_affiliations(base_path):
    header = read_json(base_path + ".json")
    signature = Signature.from_dict(header)
    f = read_matrix_csv(base_path + ".csv")
    if f.shape != (header["n_nodes"], signature.dim):
        raise ValueError(
            f"{base_path}.csv: shape {f.shape} does not match header "
            f"({header['n_nodes']}, {signature.dim})")
    return f, signature


def save_flow(base_path, flow):
    """Write <base>.json (manifest) and <base>.bin (little-endian float64).

    The binary holds every parameter array flattened in C order,
    concatenated block by block; within a block the scale net's
    [w1, b1, w2, b2, w3, b3] precede the shift net's.
    """
    manifest = {
        "dim": flow.dim,
        "hidden": flow.hidden,
        "scale_squash": flow.scale_squash,
        "n_blocks": len(flow.blocks),
        "permutations": [[int(i) for i in p] for p in flow.permutations()],
    }
    write_json(base_path + ".json", manifest)
    params = flow.parameters()
    flat = (np.concatenate([p.reshape(-1) for p in params])
            if params else np.zeros(0))
    flat.astype("<f8").tofile(base_path + ".bin")


def load_flow(base_path):
    manifest = read_json(base_path + ".json")
    dim = int(manifest["dim"])
    hidden = int(manifest["hidden"])
    squash = manifest["scale_squash"]
    k = dim // 2
    blocks = []
    for perm in manifest["permutations"]:
        scale = Mlp([np.zeros((hidden, k)), np.zeros((hidden, hidden)),
                     np.zeros((dim - k, hidden))],
                    [np.zeros(hidden), np.zeros(hidden), np.zeros(dim - k)],
                    out_squash=squash)
        shift = Mlp([np.zeros((hidden, k)), np.zeros((hidden, hidden)),
                     np.zeros((dim - k, hidden))],
                    [np.zeros(hidden), np.zeros(hidden), np.zeros(dim - k)])
        blocks.append(CouplingBlock(np.array(perm, dtype=np.int64), scale, shift))
    flow = RealNvpFlow(dim, blocks, hidden, squash)
    params = flow.parameters()
    flat = np.fromfile(base_path + ".bin", dtype="<f8")
    expected = sum(p.size for p in params)
    if flat.size != expected:
        raise ValueError(
            f"{base_path}.bin: {flat.size} parameters, manifest implies {expected}")
    offset = 0
    for p in params:
        p[...] = flat[offset:offset + p.size].reshape(p.shape)
        offset += p.size
    return flow


def write_trace_csv(path, trace):
    """Plain fit trace: step,loss with step 0 the initial objective."""
    with open(path, "w") as fh:
        fh.write("step,loss\n")
        for step, loss in enumerate(np.asarray(trace)):
            fh.write(f"{step},{format_float(loss)}\n")


def write_phase_traces_csv(path, traces):
    """Alternating fit traces: phase,target,learning_rate,noise,step,loss."""
    with open(path, "w") as fh:
        fh.write("phase,target,learning_rate,noise_amplitude,step,loss\n")
        for tr in traces:
            for step, loss in enumerate(np.asarray(tr.losses)):
                fh.write(f"{tr.index},{tr.target},{format_float(tr.learning_rate)},"
                         f"{format_float(tr.noise_amplitude)},{step},{format_float(loss)}\n")


def write_scores_csv(path, scores, flags=None):
    with open(path, "w") as fh:
        if flags is None:
            fh.write("node,score\n")
            for node, score in enumerate(scores):
                fh.write(f"{node},{format_float(score)}\n")
        else:
            fh.write("node,score,flag\n")
            for node, (score, flag) in enumerate(zip(scores, flags)):
                fh.write(f"{node},{format_float(score)},{int(flag)}\n")


def write_class_csv(path, classes):
    with open(path, "w") as fh:
        fh.write("node,class\n")
        for node, cls in enumerate(classes):
            fh.write(f"{node},{int(cls)}\n")


def write_table_csv(path, header, rows):
    """Generic CSV: floats get the deterministic 17-digit formatting."""
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return format_float(v)
        return str(v)

    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(cell(v) for v in row) + "\n")


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
