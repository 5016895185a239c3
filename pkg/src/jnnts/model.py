"""Deterministic pieces of the node + network regression model.

The outcome for subject ``i`` is

    y_i = eta' w_i + beta' x_i + sum_r alpha_r' Z_i alpha_r + noise,

with ``beta`` and each ``alpha_r`` obtained by masking latent effects with
threshold indicators of latent Gaussian fields.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _validation as v
from .exceptions import ConfigurationError


@dataclass(frozen=True)
class Dataset:
    """Outcome, covariates, node features, connectivity and node coordinates.

    Use :meth:`from_arrays` to build one from raw arrays; it enforces the
    symmetric zero-diagonal layout of ``Z`` and the intercept column of ``W``.
    """

    y: np.ndarray
    W: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    coords: np.ndarray | None = None

    @classmethod
    def from_arrays(cls, y, X, Z, W=None, coords=None):
        y = v.check_outcome(y)
        n = y.shape[0]
        X = v.check_node_features(X, n)
        p = X.shape[1]
        W = v.check_covariates(W, n)
        Z = v.check_connectivity(Z, n, p)
        coords = v.check_coords(coords, p)
        return cls(y=y, W=np.ascontiguousarray(W), X=np.ascontiguousarray(X), Z=Z,
                   coords=coords)

    @property
    def n_subjects(self):
        return self.y.shape[0]

    @property
    def n_nodes(self):
        return self.X.shape[1]

    @property
    def n_covariates(self):
        return self.W.shape[1]

    def subset(self, rows):
        rows = np.asarray(rows)
        return Dataset(y=self.y[rows], W=self.W[rows], X=self.X[rows], Z=self.Z[rows],
                       coords=self.coords)


@dataclass
class LatentState:
    """Latent effects, selection fields and the shared threshold."""

    beta_tilde: np.ndarray
    alpha_tilde: np.ndarray  # (R, P)
    gamma: np.ndarray
    theta: np.ndarray
    theta_r: np.ndarray  # (R, P)
    lam: float


@dataclass
class CoefficientSet:
    eta: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray  # (R, P)
    A: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.A is None:
            self.A = coefficient_matrix(self.alpha)


def threshold_node(gamma, lam):
    """Indicator ``|gamma_p| > lam`` (strict) as a 0/1 integer vector."""
    return (np.abs(np.asarray(gamma, dtype=float)) > lam).astype(np.int8)


def threshold_network(theta, theta_r, lam):
    """Indicator that both the global and the sub-network field exceed ``lam``."""
    theta = np.abs(np.asarray(theta, dtype=float))
    theta_r = np.abs(np.asarray(theta_r, dtype=float))
    return ((theta > lam) & (theta_r > lam)).astype(np.int8)


def effective_coefficients(state, eta=None):
    """Masked node effects ``beta`` and sub-network factors ``alpha``."""
    p = np.size(state.gamma)
    beta = np.asarray(state.beta_tilde, dtype=float) * threshold_node(state.gamma, state.lam)
    theta_r = np.asarray(state.theta_r, dtype=float).reshape(-1, p)
    alpha_tilde = np.asarray(state.alpha_tilde, dtype=float).reshape(-1, p)
    alpha = alpha_tilde * threshold_network(state.theta, theta_r, state.lam)
    if eta is None:
        eta = np.zeros(0)
    return CoefficientSet(eta=np.asarray(eta, dtype=float), beta=beta, alpha=alpha)


def coefficient_matrix(alpha):
    """Sum of outer products ``alpha_r alpha_r'``; symmetric by construction."""
    alpha = np.asarray(alpha, dtype=float)
    alpha = alpha.reshape(-1, alpha.shape[-1]) if alpha.ndim else alpha.reshape(0, 0)
    A = np.zeros((alpha.shape[1], alpha.shape[1]))
    for a in alpha:
        A += np.outer(a, a)
    return A


def network_term(Z, alpha):
    """Per-subject ``sum_r alpha_r' Z_i alpha_r`` evaluated factor-wise."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size == 0:
        return np.zeros(Z.shape[0])
    alpha = alpha.reshape(-1, Z.shape[1])
    return np.einsum("rk,ikl,rl->i", alpha, Z, alpha)


def predict(dataset, coeffs):
    """Linear predictor for every subject in ``dataset``."""
    n, p, q = dataset.n_subjects, dataset.n_nodes, dataset.n_covariates
    beta = np.asarray(coeffs.beta, dtype=float)
    eta = np.asarray(coeffs.eta, dtype=float)
    alpha = np.asarray(coeffs.alpha, dtype=float)
    if beta.shape != (p,):
        raise ConfigurationError(f"beta has shape {beta.shape}, dataset has {p} nodes")
    if eta.size and eta.shape != (q,):
        raise ConfigurationError(f"eta has shape {eta.shape}, dataset has {q} covariates")
    if alpha.size and alpha.shape[-1] != p:
        raise ConfigurationError(f"alpha has shape {alpha.shape}, dataset has {p} nodes")
    out = dataset.X @ beta + network_term(dataset.Z, alpha)
    if eta.size:
        out = out + dataset.W @ eta
    assert out.shape == (n,)
    return out


def predict_from_matrix(dataset, eta, beta, A):
    """Same predictor using the inner product ``<A, Z_i>`` instead of factors."""
    out = dataset.X @ beta + np.einsum("kl,ikl->i", A, dataset.Z)
    if np.size(eta):
        out = out + dataset.W @ eta
    return out


def verify_clique_uniqueness(supports):
    """Check that every support set owns a node no other set contains.

    Returns ``"unique"`` when it does (the clique set is then the unique,
    minimal support-consistent one), ``"degenerate"`` if any set is empty and
    ``"not-verifiable"`` otherwise.
    """
    sets = [frozenset(int(i) for i in s) for s in supports]
    if not sets or any(len(s) == 0 for s in sets):
        return "degenerate"
    for r, s in enumerate(sets):
        others = frozenset().union(*(t for k, t in enumerate(sets) if k != r))
        if not (s - others):
            return "not-verifiable"
    return "unique"


def supports_of(alpha, tol=0.0):
    """Node-index support of each factor."""
    return [set(np.flatnonzero(np.abs(a) > tol).tolist()) for a in np.atleast_2d(alpha)]
