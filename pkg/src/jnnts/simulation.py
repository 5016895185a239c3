"""Synthetic scenarios with known node and sub-network signals, rank tuning and scoring."""

import csv
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .exceptions import ConfigurationError, InputError, JNNTsError
from .model import Dataset, coefficient_matrix, predict_from_matrix

SCENARIOS = ("S1-coupled", "S2-decoupled", "S3-edge-removed", "S4-mixed-highdim", "custom")
DEFAULT_CANDIDATE_R = (2, 3, 4, 5)


@dataclass(frozen=True)
class ScenarioSpec:
    """Geometry and sizes of one simulated design.

    Node indices are 0-based.  ``N`` counts training subjects before the
    validation split.  ``x_correlation`` > 0 gives equicorrelated node
    features (the correlated-design variant).
    """

    scenario: str = "S1-coupled"
    P: int = 20
    N: int = 200
    sigma_eps: float = 2.0
    seed: int = 0
    true_node_set: tuple = ()
    true_subnetworks: tuple = ()
    removed_edges: tuple = ()
    n_test: int = 100
    validation_fraction: float = 0.1
    x_correlation: float = 0.0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.scenario!r}")
        fix = {"true_node_set": tuple(sorted(int(i) for i in self.true_node_set)),
               "true_subnetworks": tuple(tuple(sorted(int(i) for i in s))
                                         for s in self.true_subnetworks),
               "removed_edges": tuple(tuple(sorted(int(i) for i in e))
                                      for e in self.removed_edges)}
        for k, v in fix.items():
            object.__setattr__(self, k, v)
        if self.P < 2 or self.N < 2 or self.n_test < 1:
            raise ConfigurationError("need P >= 2, N >= 2 and n_test >= 1")
        if not (self.sigma_eps >= 0 and math.isfinite(self.sigma_eps)):
            raise ConfigurationError("sigma_eps must be a finite non-negative std")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigurationError("validation_fraction must lie in [0, 1)")
        if not 0.0 <= self.x_correlation < 1.0:
            raise ConfigurationError("x_correlation must lie in [0, 1)")
        nodes = list(self.true_node_set) + [i for s in self.true_subnetworks for i in s] + \
            [i for e in self.removed_edges for i in e]
        if any(not 0 <= i < self.P for i in nodes):
            raise ConfigurationError(f"node index outside 0..{self.P - 1}")
        if any(len(e) != 2 or e[0] == e[1] for e in self.removed_edges):
            raise ConfigurationError("removed edges must be pairs of distinct nodes")
        if self.scenario != "custom" and len(self.true_subnetworks) != 2:
            raise ConfigurationError("built-in scenarios have exactly 2 sub-networks")

    @property
    def n_validation(self):
        return int(round(self.validation_fraction * self.N))

    def to_dict(self):
        d = asdict(self)
        for k in ("true_node_set", "true_subnetworks", "removed_edges"):
            d[k] = [list(x) if isinstance(x, tuple) else x for x in d[k]]
        return d


def default_spec(scenario="S1-coupled", **overrides):
    """Built-in geometry: two disjoint 5-node cliques and 10 signal nodes."""
    cliques = (tuple(range(0, 5)), tuple(range(5, 10)))
    base = {"S1-coupled": dict(P=20, N=200, true_node_set=tuple(range(10))),
            "S2-decoupled": dict(P=20, N=200, true_node_set=tuple(range(10, 20))),
            "S3-edge-removed": dict(P=20, N=200, true_node_set=tuple(range(10)),
                                    removed_edges=((0, 1), (2, 3))),
            "S4-mixed-highdim": dict(P=100, N=1000,
                                     true_node_set=tuple(range(5)) + tuple(range(10, 15)))}
    if scenario not in base:
        raise ConfigurationError(f"no default geometry for scenario {scenario!r}")
    kw = dict(scenario=scenario, true_subnetworks=cliques, **base[scenario])
    kw.update(overrides)
    return ScenarioSpec(**kw)


def grid_coords(P, spacing=1.0):
    """First ``P`` points of a cubic lattice with unit spacing."""
    k = max(1, math.ceil(round(P ** (1.0 / 3.0), 12)))
    while k ** 3 < P:
        k += 1
    axes = np.arange(k, dtype=float) * spacing
    pts = np.stack(np.meshgrid(axes, axes, axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return pts[:P].copy()


@dataclass
class GroundTruth:
    eta: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray  # (2, P)
    A: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    true_nodes: list
    true_subnetworks: list
    true_edges: list
    noise: dict = field(default_factory=dict)

    def to_dict(self):
        return {"eta": self.eta.tolist(), "beta": self.beta.tolist(),
                "alpha": self.alpha.tolist(), "A": self.A.tolist(),
                "gamma": self.gamma.tolist(), "theta": self.theta.tolist(),
                "true_nodes": self.true_nodes, "true_subnetworks": self.true_subnetworks,
                "true_edges": [list(e) for e in self.true_edges],
                "noise": {k: v.tolist() for k, v in self.noise.items()}}

    @classmethod
    def from_dict(cls, d):
        return cls(eta=np.asarray(d["eta"], float), beta=np.asarray(d["beta"], float),
                   alpha=np.asarray(d["alpha"], float), A=np.asarray(d["A"], float),
                   gamma=np.asarray(d["gamma"], float), theta=np.asarray(d["theta"], float),
                   true_nodes=[int(i) for i in d["true_nodes"]],
                   true_subnetworks=[[int(i) for i in s] for s in d["true_subnetworks"]],
                   true_edges=[tuple(int(i) for i in e) for e in d["true_edges"]],
                   noise={k: np.asarray(v, float) for k, v in d.get("noise", {}).items()})


def clique_edges(nodes):
    nodes = sorted(nodes)
    return [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]]


def _features(rng, n, p, corr):
    X = rng.standard_normal((n, p))
    if corr > 0:
        X = math.sqrt(1.0 - corr) * X + math.sqrt(corr) * rng.standard_normal((n, 1))
    return X


def _connectivity(rng, n, p):
    iu = np.triu_indices(p, 1)
    Z = np.zeros((n, p, p))
    vals = rng.standard_normal((n, iu[0].size))
    Z[:, iu[0], iu[1]] = vals
    Z[:, iu[1], iu[0]] = vals
    return Z


def generate_scenario(spec):
    """Simulate ``(train, validation, test, truth)`` for ``spec``.

    Returns datasets whose outcomes are exactly
    ``W eta + X beta + <A, Z_i> + noise`` with the stored truth and noise.
    ``validation`` is ``None`` when the split is empty.
    """
    rng = np.random.default_rng(spec.seed)
    P = spec.P
    gamma = rng.normal(0.0, math.sqrt(2.0), P)
    theta = rng.normal(0.0, math.sqrt(2.0), P)
    beta = np.zeros(P)
    nodes = list(spec.true_node_set)
    beta[nodes] = rng.normal(gamma[nodes], 1.0)
    alpha = np.zeros((len(spec.true_subnetworks), P))
    for r, members in enumerate(spec.true_subnetworks):
        m = list(members)
        alpha[r, m] = rng.normal(theta[m], math.sqrt(2.0))
    A = coefficient_matrix(alpha)
    for k, l in spec.removed_edges:
        A[k, l] = A[l, k] = 0.0
    eta = np.ones(1)

    edges = set()
    for members in spec.true_subnetworks:
        edges.update(clique_edges(members))
    edges -= set(spec.removed_edges)

    coords = grid_coords(P)
    n_total = spec.N + spec.n_test
    X = _features(rng, n_total, P, spec.x_correlation)
    Z = _connectivity(rng, n_total, P)
    W = np.ones((n_total, 1))
    noise = spec.sigma_eps * rng.standard_normal(n_total)
    full = Dataset(y=np.zeros(n_total), W=W, X=X, Z=Z, coords=coords)
    y = predict_from_matrix(full, eta, beta, A) + noise
    full = replace(full, y=y)

    n_val = spec.n_validation
    n_fit = spec.N - n_val
    parts = {"train": np.arange(n_fit), "validation": np.arange(n_fit, spec.N),
             "test": np.arange(spec.N, n_total)}
    truth = GroundTruth(eta=eta, beta=beta, alpha=alpha, A=A, gamma=gamma, theta=theta,
                        true_nodes=sorted(nodes),
                        true_subnetworks=[list(s) for s in spec.true_subnetworks],
                        true_edges=sorted(edges),
                        noise={k: noise[v] for k, v in parts.items()})
    train = full.subset(parts["train"])
    validation = full.subset(parts["validation"]) if n_val else None
    test = full.subset(parts["test"])
    return train, validation, test, truth


# ---------------------------------------------------------------------------
# scoring


def r_squared(y, y_hat):
    """``1 - SSE/SST``; undefined (raises) when ``y`` has zero variance."""
    y = np.asarray(y, dtype=float)
    sst = float(np.sum((y - y.mean()) ** 2))
    if y.size < 2 or sst == 0.0:
        raise InputError("R^2 is undefined for an outcome with zero variance")
    return 1.0 - float(np.sum((y - np.asarray(y_hat)) ** 2)) / sst


def _sens_spec(selected, truth, universe):
    selected, truth = set(selected), set(truth)
    negatives = set(universe) - truth
    sens = len(selected & truth) / len(truth) if truth else None
    spec = len(negatives - selected) / len(negatives) if negatives else None
    return sens, spec


@dataclass
class FitMetrics:
    """Selection accuracy and test R^2.  ``None`` marks an undefined rate."""

    node_sens: float | None
    node_spec: float | None
    edge_sens: float | None
    edge_spec: float | None
    r2_test: float
    chosen_R: int

    def to_dict(self):
        return asdict(self)


def score(fit, test, truth):
    """Score a fit against ground truth.

    ``fit`` is a fitted :class:`~jnnts.estimator.JNNTsRegressor` or a
    :class:`~jnnts.inference.SelectionSummary`.  Selected edges are the union
    over sub-networks of edges with MPP above the cutoff, as unordered pairs.
    """
    summary = getattr(fit, "summary_", fit)
    P = test.n_nodes
    if summary.beta_hat.shape != (P,):
        raise ConfigurationError(f"fit has {summary.beta_hat.size} nodes, test set has {P}")
    node_sens, node_spec = _sens_spec(summary.selected_nodes, truth.true_nodes, range(P))
    pairs = clique_edges(range(P))
    edge_sens, edge_spec = _sens_spec([tuple(e) for e in summary.selected_edges],
                                      [tuple(e) for e in truth.true_edges], pairs)
    y_hat = predict_from_matrix(test, summary.eta_hat, summary.beta_hat, summary.A_hat)
    return FitMetrics(node_sens=node_sens, node_spec=node_spec, edge_sens=edge_sens,
                      edge_spec=edge_spec, r2_test=r_squared(test.y, y_hat),
                      chosen_R=len(summary.selected_subnetworks))


# ---------------------------------------------------------------------------
# rank tuning


@dataclass
class TuneResult:
    chosen_R: int
    validation_r2: dict
    fits: dict = field(repr=False, default_factory=dict)

    @property
    def best(self):
        return self.fits.get(self.chosen_R)

    def to_dict(self):
        return {"chosen_R": self.chosen_R,
                "validation_r2": {str(k): v for k, v in self.validation_r2.items()}}


def tune_rank(train, validation, candidate_R=DEFAULT_CANDIDATE_R, estimator=None,
              keep_fits=True):
    """Fit one model per candidate rank on ``train``; pick the best validation R^2.

    Ties go to the smaller rank.  A single candidate is returned without
    fitting when ``keep_fits`` is false.
    """
    from sklearn.base import clone

    from .estimator import JNNTsRegressor

    cands = sorted({int(r) for r in candidate_R})
    if not cands:
        raise ConfigurationError("candidate_R must not be empty")
    if len(cands) == 1 and not keep_fits:
        return TuneResult(chosen_R=cands[0], validation_r2={})
    if validation is None:
        raise InputError("rank tuning needs a validation set")
    base = estimator if estimator is not None else JNNTsRegressor()
    scores, fits = {}, {}
    for R in cands:
        model = clone(base).set_params(n_components=R)
        try:
            model.fit_dataset(train)
            scores[R] = r_squared(validation.y, model.predict_dataset(validation))
        except JNNTsError as exc:
            raise type(exc)(f"candidate R={R}: {exc}") from exc
        if keep_fits:
            fits[R] = model
    best = max(cands, key=lambda r: (scores[r], -r))
    return TuneResult(chosen_R=best, validation_r2=scores, fits=fits)


# ---------------------------------------------------------------------------
# benchmark table

BENCHMARK_COLUMNS = ("scenario", "sigma_eps", "seed", "method", "chosen_R", "node_sens",
                     "node_spec", "edge_sens", "edge_spec", "r2_test")


def write_benchmark(rows, path):
    """CSV with one row per (scenario, seed, method); undefined rates written as ``NA``."""
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCHMARK_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: ("NA" if row.get(k) is None else row.get(k))
                        for k in BENCHMARK_COLUMNS})
