"""Gibbs / Metropolis-Hastings posterior sampler.

The numerical work lives in :mod:`jnnts._gibbs`; this module owns the
configuration objects, initialization, the random streams, burn-in step-size
adaptation and chain storage.
"""

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _gibbs
from ._validation import check_positive, check_probability_open
from .exceptions import ConfigurationError, NumericalError
from .kernel import KernelSpec, PriorStructure
from .model import LatentState

ABLATIONS = ("full", "node-only", "network-only")
VARIANCE_NAMES = ("s_beta", "s_alpha", "s_theta", "s_eps", "sigma")
RECOMPUTE_EVERY = 100


@dataclass(frozen=True)
class HyperPriors:
    """Fixed prior constants. Variances are parameterized as variances, IG(shape, rate)."""

    sigma_eta: float = 10.0
    lambda_max: float = 1.5
    a_beta: float = 0.1
    b_beta: float = 0.1
    a_alpha: float = 0.1
    b_alpha: float = 0.1
    a_theta: float = 0.1
    b_theta: float = 0.1
    a_eps: float = 0.1
    b_eps: float = 0.1
    a_sigma: float = 0.1
    b_sigma: float = 0.1

    def __post_init__(self):
        for name, value in asdict(self).items():
            check_positive(value, name)

    def to_array(self):
        return np.array([self.sigma_eta, self.lambda_max, self.a_beta, self.b_beta,
                         self.a_alpha, self.b_alpha, self.a_theta, self.b_theta,
                         self.a_eps, self.b_eps, self.a_sigma, self.b_sigma])


@dataclass(frozen=True)
class MhTuning:
    step_rho: float = 0.5
    step_lambda: float = 0.1
    adapt: bool = True
    adapt_window: int = 50
    target_accept: float = 0.234

    def __post_init__(self):
        check_positive(self.step_rho, "step_rho")
        check_positive(self.step_lambda, "step_lambda")
        check_probability_open(self.target_accept, "target_accept")
        if int(self.adapt_window) < 1:
            raise ConfigurationError("adapt_window must be a positive integer")


@dataclass(frozen=True)
class ModelConfig:
    n_components: int = 2
    kernel: KernelSpec = field(default_factory=KernelSpec)
    ablation: str = "full"
    delta: float | None = None

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ConfigurationError(f"ablation must be one of {ABLATIONS}")
        if int(self.n_components) != self.n_components or self.n_components < 0:
            raise ConfigurationError("n_components must be a non-negative integer")
        if self.ablation != "node-only" and self.n_components < 1:
            raise ConfigurationError(f"ablation {self.ablation!r} needs n_components >= 1")

    @property
    def use_node(self):
        return self.ablation != "network-only"

    @property
    def use_network(self):
        return self.ablation != "node-only"


@dataclass
class ParameterState:
    """One point of the parameter space."""

    eta: np.ndarray
    beta_tilde: np.ndarray
    alpha_tilde: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    theta_r: np.ndarray
    s_beta: float = 1.0
    s_alpha: float = 1.0
    s_theta: float = 1.0
    s_eps: float = 1.0
    sigma: float = 1.0
    rho: float = 0.0
    lam: float = 0.75

    @property
    def latent(self):
        return LatentState(beta_tilde=self.beta_tilde, alpha_tilde=self.alpha_tilde,
                           gamma=self.gamma, theta=self.theta, theta_r=self.theta_r,
                           lam=self.lam)

    def scalars(self):
        return np.array([self.s_beta, self.s_alpha, self.s_theta, self.s_eps, self.sigma,
                         self.rho, self.lam])

    def copy(self):
        return replace(self, **{k: np.array(getattr(self, k), dtype=float)
                                for k in ("eta", "beta_tilde", "alpha_tilde", "gamma",
                                          "theta", "theta_r")})

    @classmethod
    def initial(cls, rng, n_covariates, n_nodes, n_components, hyper):
        """Random start: N(0, 1) effects and fields, unit variances, rho = 0, mid threshold."""
        q, p, r = n_covariates, n_nodes, n_components
        return cls(eta=rng.standard_normal(q), beta_tilde=rng.standard_normal(p),
                   alpha_tilde=rng.standard_normal((r, p)), gamma=rng.standard_normal(p),
                   theta=rng.standard_normal(p), theta_r=rng.standard_normal((r, p)),
                   lam=hyper.lambda_max / 2.0)


class ChainEngine:
    """Mutable sampler state bound to one dataset.

    Holds the parameter arrays together with the cached residual and factor
    products the compiled updates rely on.
    """

    def __init__(self, dataset, state, prior, config=None, hyper=None):
        self.config = config or ModelConfig()
        self.hyper = hyper or HyperPriors()
        self.prior = prior
        n, p, q = dataset.n_subjects, dataset.n_nodes, dataset.n_covariates
        R = self.config.n_components
        if prior.n_nodes != p:
            raise ConfigurationError(f"prior has {prior.n_nodes} nodes, dataset has {p}")
        _check_state_shapes(state, q, p, R)
        if not prior.feasible(state.rho):
            raise ConfigurationError(f"rho={state.rho} violates the positive-definiteness bound")
        if not 0.0 <= state.lam <= self.hyper.lambda_max:
            raise ConfigurationError(f"lambda={state.lam} outside [0, lambda_max]")
        self.dataset = dataset
        y = np.array(dataset.y, dtype=float)
        self.data = (y, dataset.W, dataset.X, dataset.Z,
                     dataset.W.T @ dataset.W, dataset.X.T @ dataset.X)
        self.st = (np.array(state.eta, dtype=float), np.array(state.beta_tilde, dtype=float),
                   np.array(state.alpha_tilde, dtype=float).reshape(R, p),
                   np.array(state.gamma, dtype=float), np.array(state.theta, dtype=float),
                   np.array(state.theta_r, dtype=float).reshape(R, p), state.scalars())
        self.cache = (np.zeros(p), np.zeros((R, p)), np.zeros((R, n, p)), np.zeros((R, n)),
                      np.zeros(n), np.zeros(n), np.zeros(n), np.zeros((p, p)), np.zeros((p, p)))
        self.prior_arrays = (prior.U, prior.d, prior.delta)
        self.hp = self.hyper.to_array()
        self.use_node = self.config.use_node
        self.use_net = self.config.use_network
        self.shapes = _gibbs.variance_shapes(self.hp, n, p, R)
        self.recompute()

    # -- bookkeeping -------------------------------------------------------
    def recompute(self):
        _gibbs.recompute(self.data, self.st, self.cache, self.prior_arrays,
                         self.use_node, self.use_net)

    def set_outcome(self, y):
        self.data[0][:] = y
        self.recompute()

    @property
    def residual(self):
        return self.cache[6]

    @property
    def node_mask(self):
        return self.cache[0].astype(np.int8)

    @property
    def network_mask(self):
        return (self.cache[1] != 0.0).astype(np.int8) if self.use_net else \
            np.zeros_like(self.cache[1], dtype=np.int8)

    def network_indicator(self):
        """Threshold indicators of the network fields (independent of alpha values)."""
        eta, bt, at, gam, th, thr, sc = self.st
        if not self.use_net:
            return np.zeros(thr.shape, dtype=np.int8)
        lam = sc[_gibbs.LAM]
        return ((np.abs(th) > lam)[None, :] & (np.abs(thr) > lam)).astype(np.int8)

    def node_indicator(self):
        eta, bt, at, gam, th, thr, sc = self.st
        if not self.use_node:
            return np.zeros(gam.shape, dtype=np.int8)
        return (np.abs(gam) > sc[_gibbs.LAM]).astype(np.int8)

    def state(self):
        eta, bt, at, gam, th, thr, sc = self.st
        return ParameterState(eta=eta.copy(), beta_tilde=bt.copy(), alpha_tilde=at.copy(),
                              gamma=gam.copy(), theta=th.copy(), theta_r=thr.copy(),
                              s_beta=sc[0], s_alpha=sc[1], s_theta=sc[2], s_eps=sc[3],
                              sigma=sc[4], rho=sc[5], lam=sc[6])

    def snapshot(self):
        return tuple(a.copy() for a in self.st), tuple(a.copy() for a in self.cache)

    def restore(self, snap):
        for dst, src in zip(self.st, snap[0]):
            dst[...] = src
        for dst, src in zip(self.cache, snap[1]):
            dst[...] = src

    # -- single updates ------------------------------------------------------
    def update_eta(self, z):
        _gibbs.update_eta(self.data, self.st, self.cache, self.hp, np.asarray(z, dtype=float))
        return self.st[0].copy()

    def update_beta_tilde(self, z):
        _gibbs.update_beta_tilde(self.data, self.st, self.cache, np.asarray(z, dtype=float))
        return self.st[1].copy()

    def update_alpha_tilde_element(self, r, p, u):
        _gibbs.update_alpha_tilde_element(self.data, self.st, self.cache, self.use_net, r, p, u)
        return self.st[2][r, p]

    def update_theta_r_element(self, r, p, u):
        _gibbs.update_theta_r_element(self.data, self.st, self.cache, self.use_net, r, p, u)
        return self.st[5][r, p]

    def update_gamma_element(self, p, u):
        _gibbs.update_gamma_element(self.data, self.st, self.cache, self.prior_arrays,
                                    self.use_node, p, u)
        return self.st[3][p]

    def update_theta_element(self, p, u):
        _gibbs.update_theta_element(self.data, self.st, self.cache, self.prior_arrays,
                                    self.use_net, p, u)
        return self.st[4][p]

    def update_variances(self, g):
        _gibbs.update_variances(self.data, self.st, self.cache, self.prior_arrays, self.hp,
                                np.asarray(g, dtype=float))
        return self.st[6][:5].copy()

    def mh_rho(self, z, u, step):
        accepted = _gibbs.mh_rho(self.st, self.cache, self.prior_arrays, z, u, step)
        return self.st[6][_gibbs.RHO], bool(accepted)

    def mh_lambda(self, z, u, step):
        accepted = _gibbs.mh_lambda(self.data, self.st, self.cache, self.prior_arrays, self.hp,
                                    self.use_node, self.use_net, z, u, step)
        return self.st[6][_gibbs.LAM], bool(accepted)

    def conditional_draws(self, kind, index, uniforms):
        """Repeated draws of one element update from a frozen state.

        ``kind`` is one of ``"alpha_tilde"``, ``"theta_r"`` (index ``(r, p)``),
        ``"gamma"`` or ``"theta"`` (index ``p``).  The state is restored after
        every draw.
        """
        update = {"alpha_tilde": self.update_alpha_tilde_element,
                  "theta_r": self.update_theta_r_element,
                  "gamma": self.update_gamma_element,
                  "theta": self.update_theta_element}[kind]
        index = tuple(np.atleast_1d(index))
        snap = self.snapshot()
        out = np.empty(len(uniforms))
        for k, u in enumerate(uniforms):
            out[k] = update(*index, float(u))
            self.restore(snap)
        return out

    # -- the sweep -----------------------------------------------------------
    def n_uniforms(self):
        R, p = self.st[2].shape
        return 2 * R * p + 2 * p + 2

    def sweep(self, rng, steps):
        q, p = self.st[0].shape[0], self.st[1].shape[0]
        normals = rng.standard_normal(q + p + 2)
        uniforms = rng.random(self.n_uniforms())
        gammas = rng.standard_gamma(self.shapes)
        accepted = np.zeros(2, dtype=np.bool_)
        _gibbs.sweep(self.data, self.st, self.cache, self.prior_arrays, self.hp,
                     self.use_node, self.use_net, normals, uniforms, gammas,
                     np.asarray(steps, dtype=float), accepted)
        return accepted


def _check_state_shapes(state, q, p, R):
    expect = {"eta": (q,), "beta_tilde": (p,), "gamma": (p,), "theta": (p,),
              "alpha_tilde": (R, p), "theta_r": (R, p)}
    for name, shape in expect.items():
        arr = np.asarray(getattr(state, name))
        if arr.size != math.prod(shape):
            raise ConfigurationError(f"{name} has shape {arr.shape}, expected {shape}")


# ---------------------------------------------------------------------------
# public single-update wrappers


def _engine(state, dataset, prior, config, hyper):
    return ChainEngine(dataset, state, prior, config=config, hyper=hyper)


def _uniform(rng, u):
    if u is not None:
        return float(u)
    return float((rng or np.random.default_rng()).random())


def update_eta(state, dataset, prior, config=None, hyper=None, rng=None, z=None):
    """Conjugate Normal draw of the covariate effects."""
    eng = _engine(state, dataset, prior, config, hyper)
    if z is None:
        z = (rng or np.random.default_rng()).standard_normal(dataset.n_covariates)
    return eng.update_eta(z)


def update_beta_tilde(state, dataset, prior, config=None, hyper=None, rng=None, z=None):
    """Joint Normal draw of the latent node effects."""
    eng = _engine(state, dataset, prior, config, hyper)
    if z is None:
        z = (rng or np.random.default_rng()).standard_normal(dataset.n_nodes)
    return eng.update_beta_tilde(z)


def update_alpha_tilde_element(state, dataset, prior, r, p, config=None, hyper=None,
                               rng=None, u=None):
    eng = _engine(state, dataset, prior, config, hyper)
    return eng.update_alpha_tilde_element(r, p, _uniform(rng, u))


def update_theta_r_element(state, dataset, prior, r, p, config=None, hyper=None,
                           rng=None, u=None):
    eng = _engine(state, dataset, prior, config, hyper)
    return eng.update_theta_r_element(r, p, _uniform(rng, u))


def update_gamma_element(state, dataset, prior, p, config=None, hyper=None, rng=None, u=None):
    eng = _engine(state, dataset, prior, config, hyper)
    return eng.update_gamma_element(p, _uniform(rng, u))


def update_theta_element(state, dataset, prior, p, config=None, hyper=None, rng=None, u=None):
    eng = _engine(state, dataset, prior, config, hyper)
    return eng.update_theta_element(p, _uniform(rng, u))


def update_variances(state, dataset, prior, config=None, hyper=None, rng=None):
    """Draw (s_beta, s_alpha, s_theta, s_eps, sigma) from their Inverse-Gamma conditionals."""
    eng = _engine(state, dataset, prior, config, hyper)
    g = (rng or np.random.default_rng()).standard_gamma(eng.shapes)
    return eng.update_variances(g)


def mh_update_rho(state, dataset, prior, tuning=None, config=None, hyper=None, rng=None):
    tuning = tuning or MhTuning()
    rng = rng or np.random.default_rng()
    eng = _engine(state, dataset, prior, config, hyper)
    return eng.mh_rho(rng.standard_normal(), rng.random(), tuning.step_rho)


def mh_update_lambda(state, dataset, prior, tuning=None, config=None, hyper=None, rng=None):
    tuning = tuning or MhTuning()
    rng = rng or np.random.default_rng()
    eng = _engine(state, dataset, prior, config, hyper)
    return eng.mh_lambda(rng.standard_normal(), rng.random(), tuning.step_lambda)


# ---------------------------------------------------------------------------
# chains


@dataclass
class PosteriorChain:
    """Retained draws of one chain plus per-iteration selection indicators."""

    eta: np.ndarray
    beta_tilde: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    theta_r: np.ndarray
    alpha_tilde: np.ndarray
    variances: np.ndarray
    rho: np.ndarray
    lam: np.ndarray
    node_indicator: np.ndarray
    network_indicator: np.ndarray
    accept_rate: dict = field(default_factory=dict)
    final_steps: dict = field(default_factory=dict)
    trace: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self):
        return self.rho.shape[0]

    @property
    def n_nodes(self):
        return self.beta_tilde.shape[1]

    @property
    def n_components(self):
        return self.theta_r.shape[1]

    @property
    def n_covariates(self):
        return self.eta.shape[1]

    @property
    def beta(self):
        """Masked node effects per draw."""
        return self.beta_tilde * self.node_indicator

    @property
    def alpha(self):
        """Masked sub-network factors per draw, shape (T, R, P)."""
        return self.alpha_tilde * self.network_indicator

    def scalar(self, name):
        """A monitored scalar trace over retained draws."""
        if name in VARIANCE_NAMES:
            return self.variances[:, VARIANCE_NAMES.index(name)]
        if name.startswith("log_") and name[4:] in VARIANCE_NAMES:
            return np.log(self.variances[:, VARIANCE_NAMES.index(name[4:])])
        if name in ("rho", "lam", "lambda"):
            return self.rho if name == "rho" else self.lam
        raise KeyError(f"unknown scalar {name!r}")

    def thin(self, k):
        sl = slice(None, None, int(k))
        fields = {f: getattr(self, f)[sl] for f in _ARRAY_FIELDS}
        return PosteriorChain(**fields, accept_rate=dict(self.accept_rate),
                              final_steps=dict(self.final_steps), meta=dict(self.meta))


_ARRAY_FIELDS = ("eta", "beta_tilde", "gamma", "theta", "theta_r", "alpha_tilde", "variances",
                 "rho", "lam", "node_indicator", "network_indicator")


def _empty_chain(T, q, p, R):
    return dict(eta=np.empty((T, q)), beta_tilde=np.empty((T, p)), gamma=np.empty((T, p)),
                theta=np.empty((T, p)), theta_r=np.empty((T, R, p)),
                alpha_tilde=np.empty((T, R, p)), variances=np.empty((T, 5)), rho=np.empty(T),
                lam=np.empty(T), node_indicator=np.empty((T, p), dtype=np.int8),
                network_indicator=np.empty((T, R, p), dtype=np.int8))


def _record(store, t, eng):
    eta, bt, at, gam, th, thr, sc = eng.st
    store["eta"][t] = eta
    store["beta_tilde"][t] = bt
    store["gamma"][t] = gam
    store["theta"][t] = th
    store["theta_r"][t] = thr
    store["alpha_tilde"][t] = at
    store["variances"][t] = sc[:5]
    store["rho"][t] = sc[5]
    store["lam"][t] = sc[6]
    store["node_indicator"][t] = eng.node_indicator()
    store["network_indicator"][t] = eng.network_indicator()


def check_run_lengths(n_iter, n_burn):
    if int(n_iter) != n_iter or n_iter < 1:
        raise ConfigurationError("n_iter must be a positive integer")
    if int(n_burn) != n_burn or n_burn < 0 or n_burn > n_iter:
        raise ConfigurationError("n_burn must be an integer in [0, n_iter]")


def run_chain(dataset, config=None, hyper=None, tuning=None, seed=0, n_iter=10_000,
              n_burn=5_000, prior=None, init=None, callback=None):
    """Run one chain and return its retained draws.

    Parameters
    ----------
    dataset : Dataset
    config, hyper, tuning : ModelConfig, HyperPriors, MhTuning
    seed : int or numpy.random.SeedSequence
        The whole chain is a deterministic function of this seed.
    n_iter, n_burn : int
        Total iterations and the number discarded; ``n_iter == n_burn``
        returns an empty chain.
    prior : PriorStructure, optional
        Built from ``config.kernel`` and ``dataset.coords`` when omitted.
    init : ParameterState, optional
        Starting point; random when omitted.
    callback : callable, optional
        Called as ``callback(iteration, engine)`` after every sweep.
    """
    config = config or ModelConfig()
    hyper = hyper or HyperPriors()
    tuning = tuning or MhTuning()
    check_run_lengths(n_iter, n_burn)
    if prior is None:
        prior = PriorStructure.build(dataset.coords, config.kernel, n_nodes=dataset.n_nodes,
                                     delta=config.delta)
    rng = np.random.default_rng(seed)
    q, p, R = dataset.n_covariates, dataset.n_nodes, config.n_components
    if init is None:
        init = ParameterState.initial(rng, q, p, R, hyper)
    eng = ChainEngine(dataset, init, prior, config=config, hyper=hyper)

    steps = np.array([tuning.step_rho, tuning.step_lambda])
    window = int(tuning.adapt_window)
    win_acc = np.zeros(2)
    kept_acc = np.zeros(2)
    n_keep = n_iter - n_burn
    store = _empty_chain(n_keep, q, p, R)
    trace = {"log_s_eps": np.empty(n_iter), "lam": np.empty(n_iter), "rho": np.empty(n_iter)}

    for it in range(n_iter):
        accepted = eng.sweep(rng, steps)
        if (it + 1) % RECOMPUTE_EVERY == 0:
            eng.recompute()
        sc = eng.st[6]
        if not np.all(np.isfinite(sc)) or not np.all(np.isfinite(eng.residual)):
            raise NumericalError(f"non-finite state at iteration {it}")
        trace["log_s_eps"][it] = math.log(sc[_gibbs.S_EPS])
        trace["lam"][it] = sc[_gibbs.LAM]
        trace["rho"][it] = sc[_gibbs.RHO]
        if it < n_burn:
            win_acc += accepted
            if tuning.adapt and (it + 1) % window == 0:
                steps *= np.exp(win_acc / window - tuning.target_accept)
                win_acc[:] = 0.0
        else:
            kept_acc += accepted
            _record(store, it - n_burn, eng)
        if callback is not None:
            callback(it, eng)

    rate = kept_acc / n_keep if n_keep else np.full(2, np.nan)
    meta = {"n_iter": int(n_iter), "n_burn": int(n_burn), "seed": _seed_repr(seed),
            "n_nodes": p, "n_covariates": q, "n_subjects": dataset.n_subjects,
            "n_components": R, "ablation": config.ablation, "delta": prior.delta,
            "hyperpriors": asdict(hyper), "tuning": asdict(tuning),
            "kernel": asdict(config.kernel)}
    return PosteriorChain(**store, accept_rate={"rho": float(rate[0]), "lam": float(rate[1])},
                          final_steps={"rho": float(steps[0]), "lam": float(steps[1])},
                          trace=trace, meta=meta)


def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": int(seed.entropy), "spawn_key": [int(k) for k in seed.spawn_key]}
    return seed if seed is None else int(seed)


def chain_seeds(seed, n_chains):
    """Independent per-chain seed sequences derived from one integer seed."""
    return np.random.SeedSequence(seed).spawn(n_chains)
