"""Reading and writing datasets, chains and JSON artifacts.

Dataset directory layout (all delimited text, one header line, comma or
whitespace separated):

``y.csv``       N rows, one column
``W.csv``       N x Q covariates (optional; intercept-only when absent)
``X.csv``       N x P node features
``Z.csv``       either N*P rows of P columns (stacked blocks, subject-major)
                or N rows of P(P-1)/2 columns (upper triangle, row-major over k < l)
``coords.csv``  P x 3 node coordinates (optional)

Numbers are written with 17 significant digits so a save/load round trip is
exact.
"""

import json
import math
import os
from pathlib import Path

import numpy as np

from .exceptions import InputError
from .model import Dataset

FLOAT_FMT = "%.17g"
Z_LAYOUTS = ("stacked", "upper")


def _read_table(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: file not found")
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = [ln for ln in lines[1:] if ln.strip()]
    if not body:
        return np.zeros((0, 0))
    delim = "," if "," in body[0] else None
    rows = []
    for i, ln in enumerate(body):
        parts = [p.strip() for p in ln.split(delim)]
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise InputError(f"{path}: row {i}: cannot parse number ({exc})") from None
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise InputError(f"{path}: rows have differing column counts {sorted(width)}")
    arr = np.array(rows, dtype=float)
    bad = ~np.isfinite(arr)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise InputError(f"{path}: non-finite value at row {i}, column {j}")
    return arr


def _write_table(path, arr, header):
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    np.savetxt(path, arr, fmt=FLOAT_FMT, delimiter=",", header=",".join(header), comments="")


def expand_upper(rows, p):
    """Rebuild (N, P, P) symmetric zero-diagonal matrices from upper-triangle rows."""
    iu = np.triu_indices(p, 1)
    Z = np.zeros((rows.shape[0], p, p))
    Z[:, iu[0], iu[1]] = rows
    Z[:, iu[1], iu[0]] = rows
    return Z


def _load_connectivity(path, n, p):
    table = _read_table(path)
    m = p * (p - 1) // 2
    if table.shape == (n * p, p):
        return table.reshape(n, p, p)
    if table.shape == (n, m):
        return expand_upper(table, p)
    raise InputError(f"{path}: shape {table.shape} matches neither stacked ({n * p}, {p}) "
                     f"nor upper-triangle ({n}, {m}) layout")


def load_dataset(path):
    """Load a dataset directory (see module docstring)."""
    root = Path(path)
    if not root.is_dir():
        raise InputError(f"{root}: dataset directory not found")
    y = _read_table(root / "y.csv")
    if y.ndim != 2 or y.shape[1] != 1:
        raise InputError(f"{root / 'y.csv'}: expected a single column")
    y = y[:, 0]
    n = y.shape[0]
    X = _read_table(root / "X.csv")
    if X.shape[0] != n:
        raise InputError(f"{root / 'X.csv'}: has {X.shape[0]} rows, y has {n}")
    p = X.shape[1]
    W = _read_table(root / "W.csv") if (root / "W.csv").exists() else None
    coords = _read_table(root / "coords.csv") if (root / "coords.csv").exists() else None
    Z = _load_connectivity(root / "Z.csv", n, p)
    try:
        return Dataset.from_arrays(y, X, Z, W=W, coords=coords)
    except InputError as exc:
        raise InputError(f"{root}: {exc}") from exc


def save_dataset(dataset, path, z_layout="stacked"):
    """Write ``dataset`` to directory ``path``; returns the list of files written."""
    if z_layout not in Z_LAYOUTS:
        raise InputError(f"z_layout must be one of {Z_LAYOUTS}")
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    n, p, q = dataset.n_subjects, dataset.n_nodes, dataset.n_covariates
    files = []

    def put(name, arr, header):
        _write_table(root / name, arr, header)
        files.append(root / name)

    put("y.csv", dataset.y.reshape(n, 1), ["y"])
    put("W.csv", dataset.W, [f"w{j}" for j in range(q)])
    put("X.csv", dataset.X, [f"x{j}" for j in range(p)])
    if z_layout == "stacked":
        put("Z.csv", dataset.Z.reshape(n * p, p), [f"z{j}" for j in range(p)])
    else:
        iu = np.triu_indices(p, 1)
        put("Z.csv", dataset.Z[:, iu[0], iu[1]], [f"z{k}_{l}" for k, l in zip(*iu)])
    if dataset.coords is not None:
        put("coords.csv", dataset.coords, ["s1", "s2", "s3"])
    return files


# ---------------------------------------------------------------------------
# JSON


def _to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(obj):
    # JSON has no NaN/inf; map them to null
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(x) for k, x in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(x) for x in obj]
    return obj


def write_json(path, obj):
    text = json.dumps(_clean(json.loads(json.dumps(obj, default=_to_jsonable))), indent=2,
                      sort_keys=True)
    Path(path).write_text(text + "\n")
    return Path(path)


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: file not found")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


# ---------------------------------------------------------------------------
# chains


def chain_columns(q, p, R):
    """Column names of the chain file, in storage order."""
    cols = [f"eta_{j}" for j in range(q)]
    cols += [f"beta_tilde_{j}" for j in range(p)]
    cols += [f"gamma_{j}" for j in range(p)]
    cols += [f"theta_{j}" for j in range(p)]
    cols += [f"theta_r{r}_{j}" for r in range(R) for j in range(p)]
    cols += [f"alpha_tilde_r{r}_{j}" for r in range(R) for j in range(p)]
    cols += ["s_beta", "s_alpha", "s_theta", "s_eps", "sigma", "rho", "lambda"]
    cols += [f"node_ind_{j}" for j in range(p)]
    cols += [f"net_ind_r{r}_{j}" for r in range(R) for j in range(p)]
    return cols


def chain_matrix(chain):
    T = chain.n_draws
    return np.column_stack([
        chain.eta, chain.beta_tilde, chain.gamma, chain.theta,
        chain.theta_r.reshape(T, -1), chain.alpha_tilde.reshape(T, -1), chain.variances,
        chain.rho, chain.lam, chain.node_indicator, chain.network_indicator.reshape(T, -1),
    ]) if T else np.zeros((0, len(chain_columns(chain.n_covariates, chain.n_nodes,
                                                   chain.n_components))))


def write_chain(chain, path, config=None):
    """Write the chain table to ``path`` and its JSON sidecar to ``path + '.json'``."""
    path = Path(path)
    q, p, R = chain.n_covariates, chain.n_nodes, chain.n_components
    cols = chain_columns(q, p, R)
    mat = chain_matrix(chain)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        if mat.size:
            np.savetxt(fh, mat, fmt=FLOAT_FMT, delimiter=",")
    sidecar = {"columns": cols, "n_draws": chain.n_draws, "n_covariates": q, "n_nodes": p,
               "n_components": R, "meta": chain.meta, "accept_rate": chain.accept_rate,
               "final_steps": chain.final_steps, "config": config}
    side = write_json(str(path) + ".json", sidecar)
    return [path, side]


def read_chain(path):
    from .sampler import PosteriorChain

    path = Path(path)
    side = read_json(str(path) + ".json")
    q, p, R = side["n_covariates"], side["n_nodes"], side["n_components"]
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header != chain_columns(q, p, R):
        raise InputError(f"{path}: column header does not match its sidecar")
    mat = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2) if side["n_draws"] else \
        np.zeros((0, len(header)))
    T = mat.shape[0]
    if T != side["n_draws"]:
        raise InputError(f"{path}: {T} rows, sidecar says {side['n_draws']}")
    k = 0

    def take(width, shape, dtype=float):
        nonlocal k
        block = mat[:, k:k + width]
        k += width
        return block.reshape((T,) + shape).astype(dtype)

    fields = dict(eta=take(q, (q,)), beta_tilde=take(p, (p,)), gamma=take(p, (p,)),
                  theta=take(p, (p,)), theta_r=take(R * p, (R, p)),
                  alpha_tilde=take(R * p, (R, p)), variances=take(5, (5,)))
    fields["rho"] = take(1, ())
    fields["lam"] = take(1, ())
    fields["node_indicator"] = take(p, (p,), np.int8)
    fields["network_indicator"] = take(R * p, (R, p), np.int8)
    return PosteriorChain(**fields, accept_rate=side.get("accept_rate", {}),
                          final_steps=side.get("final_steps", {}), meta=side.get("meta", {}))


def write_trace(path, name, chains, start=0):
    """Iteration/value table of one monitored scalar, one value column per chain."""
    values = np.column_stack([c.scalar(name) for c in chains])
    it = np.arange(start, start + values.shape[0], dtype=float)[:, None]
    _write_table(path, np.hstack([it, values]), ["iteration"] +
                 [f"chain{k}" for k in range(len(chains))])
    return Path(path)


def write_matrix(path, arr, prefix="c"):
    arr = np.atleast_2d(arr)
    _write_table(path, arr, [f"{prefix}{j}" for j in range(arr.shape[1])])
    return Path(path)


def remove_quietly(paths):
    for p in reversed(list(paths)):
        try:
            if os.path.isdir(p):
                os.rmdir(p)
            else:
                os.remove(p)
        except OSError:
            pass
