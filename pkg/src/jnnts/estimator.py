"""Scikit-learn style front end to the sampler."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigurationError
from .inference import gelman_rubin, merge_chains, summarize
from .kernel import KernelSpec, PriorStructure
from .model import Dataset, predict_from_matrix
from .sampler import HyperPriors, ModelConfig, MhTuning, chain_seeds, run_chain
from .simulation import r_squared


class JNNTsRegressor(RegressorMixin, BaseEstimator):
    """Joint node and network thresholded regression.

    Regresses ``y`` on covariates ``W``, node features ``X`` (N x P) and
    symmetric connectivity matrices ``Z`` (N x P x P).  Selection is by
    the median probability model on the pooled retained draws.

    Parameters
    ----------
    n_components : int
        Number of sub-networks R.
    kernel : {"squared-exponential", "marginal-identity", "hemisphere-symmetric"}
    pair_correlation, pairs : hemisphere-symmetric kernel settings.
    coord_scale : float
        Coordinates are divided by this before entering the kernel.
    ablation : {"full", "node-only", "network-only"}
    delta : float, optional
        Divisor of the cross-field covariance; chosen from the kernel if None.
    hyperpriors : HyperPriors, optional
    tuning : MhTuning, optional
    n_iter, n_burn : int
    n_chains : int
        Independent chains; their draws are pooled for the summary.
    random_state : int
    cutoff : float
        MPP cutoff for selection.

    Attributes
    ----------
    chains_ : list of PosteriorChain
    summary_ : SelectionSummary
    convergence_ : ConvergenceReport or None
        Present when ``n_chains >= 2``.
    coef_ : ndarray (P,)
        Posterior mean of the masked node effects.
    eta_ : ndarray (Q,)
    network_coef_ : ndarray (P, P)
        Posterior mean of the coefficient matrix.
    node_mpp_, edge_mpp_ : selection probabilities.
    prior_ : PriorStructure
    """

    def __init__(self, n_components=2, kernel="squared-exponential", pair_correlation=0.2,
                 pairs=(), coord_scale=1.0, ablation="full", delta=None, hyperpriors=None,
                 tuning=None, n_iter=10_000, n_burn=5_000, n_chains=1, random_state=0,
                 cutoff=0.5):
        self.n_components = n_components
        self.kernel = kernel
        self.pair_correlation = pair_correlation
        self.pairs = pairs
        self.coord_scale = coord_scale
        self.ablation = ablation
        self.delta = delta
        self.hyperpriors = hyperpriors
        self.tuning = tuning
        self.n_iter = n_iter
        self.n_burn = n_burn
        self.n_chains = n_chains
        self.random_state = random_state
        self.cutoff = cutoff

    def model_config(self):
        spec = KernelSpec(kind=self.kernel, pair_correlation=self.pair_correlation,
                          pairs=tuple(self.pairs), coord_scale=self.coord_scale)
        return ModelConfig(n_components=self.n_components, kernel=spec,
                           ablation=self.ablation, delta=self.delta)

    def fit(self, X, y, Z, W=None, coords=None):
        return self.fit_dataset(Dataset.from_arrays(y, X, Z, W=W, coords=coords))

    def fit_dataset(self, dataset):
        config = self.model_config()
        hyper = self.hyperpriors or HyperPriors()
        tuning = self.tuning or MhTuning()
        if int(self.n_chains) < 1:
            raise ConfigurationError("n_chains must be at least 1")
        prior = PriorStructure.build(dataset.coords, config.kernel, n_nodes=dataset.n_nodes,
                                     delta=config.delta)
        self.chains_ = [run_chain(dataset, config, hyper, tuning, seed=s, n_iter=self.n_iter,
                                  n_burn=self.n_burn, prior=prior)
                        for s in chain_seeds(self.random_state, int(self.n_chains))]
        pooled = self.chains_[0] if len(self.chains_) == 1 else merge_chains(self.chains_)
        self.summary_ = summarize(pooled, cutoff=self.cutoff)
        self.convergence_ = gelman_rubin(self.chains_) if len(self.chains_) > 1 else None
        self.prior_ = prior
        self.coef_ = self.summary_.beta_hat
        self.eta_ = self.summary_.eta_hat
        self.network_coef_ = self.summary_.A_hat
        self.node_mpp_ = self.summary_.node_mpp
        self.edge_mpp_ = self.summary_.edge_mpp
        self.n_features_in_ = dataset.n_nodes
        self.n_covariates_ = dataset.n_covariates
        return self

    def _check_dims(self, dataset):
        if dataset.n_nodes != self.n_features_in_:
            raise ConfigurationError(f"fitted on {self.n_features_in_} nodes, "
                                     f"got {dataset.n_nodes}")
        if dataset.n_covariates != self.n_covariates_:
            raise ConfigurationError(f"fitted with {self.n_covariates_} covariates, "
                                     f"got {dataset.n_covariates}")

    def predict_dataset(self, dataset):
        check_is_fitted(self, "chains_")
        self._check_dims(dataset)
        return predict_from_matrix(dataset, self.eta_, self.coef_, self.network_coef_)

    def predict(self, X, Z, W=None):
        """Posterior-mean prediction for new subjects."""
        X = np.asarray(X, dtype=float)
        ds = Dataset.from_arrays(np.zeros(X.shape[0]), X, Z, W=W)
        return self.predict_dataset(ds)

    def score(self, X, y, Z, W=None):
        """Coefficient of determination on ``(X, Z, W)`` against ``y``."""
        return r_squared(y, self.predict(X, Z, W=W))
