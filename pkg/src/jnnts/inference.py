"""Selection probabilities, posterior summaries and convergence diagnostics."""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import DiagnosticError
from .model import verify_clique_uniqueness

DEFAULT_MONITORED = ("log_s_eps", "lam", "rho")
EDGE_QUANTILES = (0.99, 0.98, 0.97)


def _require_draws(chain):
    if chain.n_draws == 0:
        raise DiagnosticError("chain has no retained draws")


def compute_node_mpp(chain):
    """Fraction of retained draws in which each node passes its threshold."""
    _require_draws(chain)
    return chain.node_indicator.mean(axis=0)


def _jaccard(a, b):
    inter = (a[:, None, :] & b[None, :, :]).sum(-1)
    union = (a[:, None, :] | b[None, :, :]).sum(-1)
    return np.where(union > 0, inter / np.maximum(union, 1), 1.0)


def align_components(indicator, n_rounds=3):
    """Per-draw permutation of the R sub-network labels.

    Each draw's support sets are matched to a reference by maximum total
    Jaccard overlap.  The reference starts as the first draw (a majority vote
    over unaligned draws can be empty under heavy switching) and is then
    re-estimated as the majority support of the aligned draws.

    Returns an integer array ``perm`` of shape (T, R) such that
    ``indicator[t, perm[t]]`` is the aligned draw.
    """
    ind = np.asarray(indicator).astype(bool)
    T, R = ind.shape[:2]
    perm = np.tile(np.arange(R), (T, 1))
    if R < 2 or T == 0:
        return perm
    ref = ind[0]
    for _ in range(n_rounds):
        new = np.empty_like(perm)
        for t in range(T):
            score = _jaccard(ref, ind[t])  # (reference r, draw k)
            _, cols = linear_sum_assignment(-score)
            new[t] = cols
        done = np.array_equal(new, perm)
        perm = new
        aligned = np.take_along_axis(ind, perm[:, :, None], axis=1)
        ref = aligned.mean(axis=0) > 0.5
        if done:
            break
    return perm


def _aligned(chain):
    perm = align_components(chain.network_indicator)
    ind = np.take_along_axis(chain.network_indicator, perm[:, :, None], axis=1)
    return perm, ind


def compute_edge_mpp(chain, aligned=True):
    """Per-sub-network edge MPP matrices, shape (R, P, P), zero diagonal.

    With ``aligned=False`` the raw component labels are used.
    """
    _require_draws(chain)
    ind = _aligned(chain)[1] if aligned else chain.network_indicator
    ind = ind.astype(float)
    mpp = np.einsum("trk,trl->rkl", ind, ind) / chain.n_draws
    idx = np.arange(chain.n_nodes)
    mpp[:, idx, idx] = 0.0
    return mpp


def compute_union_edge_mpp(chain):
    """Label-free edge MPP: an edge counts when any sub-network contains both ends."""
    _require_draws(chain)
    ind = chain.network_indicator.astype(bool)
    hit = (ind[:, :, :, None] & ind[:, :, None, :]).any(axis=1)
    mpp = hit.mean(axis=0)
    np.fill_diagonal(mpp, 0.0)
    return mpp


def _edge_list(mask):
    k, l = np.nonzero(np.triu(mask, 1))
    return [(int(a), int(b)) for a, b in zip(k, l)]


def quantile_edge_lists(edge_mpp, quantiles=EDGE_QUANTILES):
    """Edges whose MPP reaches each upper quantile of the off-diagonal MPP values."""
    iu = np.triu_indices(edge_mpp.shape[0], 1)
    values = edge_mpp[iu]
    out = {}
    for q in quantiles:
        cut = float(np.quantile(values, q)) if values.size else 1.0
        out[f"{round(q * 100)}%"] = {"threshold": cut,
                                    "edges": _edge_list((edge_mpp >= cut) & (edge_mpp > 0))}
    return out


@dataclass
class SelectionSummary:
    node_mpp: np.ndarray
    edge_mpp: np.ndarray
    union_edge_mpp: np.ndarray
    membership_mpp: np.ndarray
    cutoff: float
    selected_nodes: list
    selected_subnetworks: list
    selected_edges: list
    beta_hat: np.ndarray
    eta_hat: np.ndarray
    subnetwork_effects: np.ndarray
    A_hat: np.ndarray
    uniqueness_verdict: str
    quantile_edges: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "cutoff": self.cutoff,
            "selected_nodes": self.selected_nodes,
            "selected_subnetworks": self.selected_subnetworks,
            "selected_edges": self.selected_edges,
            "uniqueness_verdict": self.uniqueness_verdict,
            "node_mpp": self.node_mpp.tolist(),
            "edge_mpp": self.edge_mpp.tolist(),
            "union_edge_mpp": self.union_edge_mpp.tolist(),
            "membership_mpp": self.membership_mpp.tolist(),
            "beta_hat": self.beta_hat.tolist(),
            "eta_hat": self.eta_hat.tolist(),
            "subnetwork_effects": self.subnetwork_effects.tolist(),
            "A_hat": self.A_hat.tolist(),
            "quantile_edges": self.quantile_edges,
        }

    @classmethod
    def from_dict(cls, d):
        arr = {k: np.asarray(d[k], dtype=float) for k in
               ("node_mpp", "edge_mpp", "union_edge_mpp", "membership_mpp", "beta_hat",
                "eta_hat", "subnetwork_effects", "A_hat")}
        return cls(**arr, cutoff=float(d["cutoff"]),
                   selected_nodes=[int(i) for i in d["selected_nodes"]],
                   selected_subnetworks=d["selected_subnetworks"],
                   selected_edges=[tuple(int(i) for i in e) for e in d["selected_edges"]],
                   uniqueness_verdict=d["uniqueness_verdict"],
                   quantile_edges=d.get("quantile_edges", {}))


def summarize(chain, cutoff=0.5):
    """Median-probability-model selection and posterior-mean effects.

    Effects average the masked draws, so an iteration in which a feature is
    not selected contributes zero.  Sub-network effects are reported as
    posterior means of ``alpha_r alpha_r'`` after label alignment, which makes
    them invariant to the sign of each factor.
    """
    if not 0.0 < cutoff < 1.0:
        raise DiagnosticError("cutoff must lie in (0, 1)")
    _require_draws(chain)
    node_mpp = compute_node_mpp(chain)
    perm, ind = _aligned(chain)
    indf = ind.astype(float)
    T, R, P = indf.shape
    edge_mpp = np.einsum("trk,trl->rkl", indf, indf) / T
    idx = np.arange(P)
    edge_mpp[:, idx, idx] = 0.0
    membership = indf.mean(axis=0)
    alpha = np.take_along_axis(chain.alpha, perm[:, :, None], axis=1)
    effects = np.einsum("trk,trl->rkl", alpha, alpha) / T

    subnets = []
    edges = set()
    for r in range(R):
        nodes = np.flatnonzero(membership[r] > cutoff).tolist()
        e = _edge_list(edge_mpp[r] > cutoff)
        edges.update(e)
        subnets.append({"nodes": nodes, "edges": [list(x) for x in e]})
    supports = [s["nodes"] for s in subnets if s["nodes"]]
    verdict = verify_clique_uniqueness(supports)
    union = compute_union_edge_mpp(chain)
    return SelectionSummary(
        node_mpp=node_mpp, edge_mpp=edge_mpp, union_edge_mpp=union, membership_mpp=membership,
        cutoff=float(cutoff), selected_nodes=np.flatnonzero(node_mpp > cutoff).tolist(),
        selected_subnetworks=subnets, selected_edges=sorted(edges),
        beta_hat=chain.beta.mean(axis=0), eta_hat=chain.eta.mean(axis=0),
        subnetwork_effects=effects, A_hat=effects.sum(axis=0), uniqueness_verdict=verdict,
        quantile_edges=quantile_edge_lists(union))


def merge_chains(chains):
    """Concatenate retained draws of several chains of identical dimensions."""
    from .sampler import PosteriorChain, _ARRAY_FIELDS

    if not chains:
        raise DiagnosticError("no chains to merge")
    fields = {f: np.concatenate([getattr(c, f) for c in chains]) for f in _ARRAY_FIELDS}
    meta = dict(chains[0].meta)
    meta["n_chains"] = len(chains)
    return PosteriorChain(**fields, meta=meta)


# ---------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceReport:
    gr_statistics: dict
    trace_summaries: dict
    accept_rates: list
    n_chains: int
    n_draws: int

    def converged(self, threshold=1.1):
        return all(np.isfinite(v) and v < threshold for v in self.gr_statistics.values())

    def to_dict(self):
        return {"gr_statistics": self.gr_statistics, "trace_summaries": self.trace_summaries,
                "accept_rates": self.accept_rates, "n_chains": self.n_chains,
                "n_draws": self.n_draws}


def potential_scale_reduction(draws):
    """Gelman-Rubin factor for an (m chains, n draws) array.

    Uses ``V = (n-1)/n W + (m+1)/(m n) B`` and returns ``sqrt(V / W)``.
    """
    x = np.asarray(draws, dtype=float)
    m, n = x.shape
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    V = (n - 1) / n * W + (m + 1) / (m * n) * B
    if W == 0.0:
        return 1.0 if B == 0.0 else float("inf")
    return float(np.sqrt(V / W))


def gelman_rubin(chains, monitored=DEFAULT_MONITORED):
    """Potential scale reduction factors for the monitored scalars."""
    if len(chains) < 2:
        raise DiagnosticError("Gelman-Rubin needs at least two chains")
    lengths = {c.n_draws for c in chains}
    if len(lengths) != 1:
        raise DiagnosticError(f"chains differ in retained length: {sorted(lengths)}")
    n = lengths.pop()
    if n < 10:
        raise DiagnosticError("chains need at least 10 retained draws")
    gr, summaries = {}, {}
    for name in monitored:
        x = np.stack([c.scalar(name) for c in chains])
        gr[name] = potential_scale_reduction(x)
        summaries[name] = {"chain_means": x.mean(axis=1).tolist(),
                           "chain_vars": x.var(axis=1, ddof=1).tolist()}
    return ConvergenceReport(gr_statistics=gr, trace_summaries=summaries,
                             accept_rates=[dict(c.accept_rate) for c in chains],
                             n_chains=len(chains), n_draws=n)
