"""Grid-integration oracles for one-dimensional full conditionals.

The log joint is written directly from the model definition, so it shares no
code with the compiled updates.
"""

import numpy as np

from jnnts.model import effective_coefficients, predict


def log_joint_grid(ds, st, prior, kind, idx, xs):
    """Unnormalized log joint with one element set to each grid value.

    Written from the model definition, vectorized over the grid.
    """
    G = xs.size
    gamma = np.repeat(st.gamma[None], G, 0)
    theta = np.repeat(st.theta[None], G, 0)
    theta_r = np.repeat(st.theta_r[None], G, 0)
    alpha_t = np.repeat(st.alpha_tilde[None], G, 0)
    target = {"gamma": gamma, "theta": theta, "theta_r": theta_r, "alpha_tilde": alpha_t}[kind]
    target[(slice(None),) + tuple(np.atleast_1d(idx))] = xs
    lam = st.lam
    beta = st.beta_tilde[None] * (np.abs(gamma) > lam)
    alpha = alpha_t * ((np.abs(theta) > lam)[:, None, :] & (np.abs(theta_r) > lam))
    net = np.einsum("grk,ikl,grl->gi", alpha, ds.Z, alpha)
    mean = ds.W @ st.eta + beta @ ds.X.T + net
    resid = ds.y[None] - mean
    out = -0.5 * np.sum(resid ** 2, axis=1) / st.s_eps
    out -= 0.5 * np.sum((st.beta_tilde[None] - gamma) ** 2, axis=1) / st.s_beta
    out -= 0.5 * np.sum((alpha_t - theta[:, None]) ** 2, axis=(1, 2)) / st.s_alpha
    out -= 0.5 * np.sum((theta_r - theta[:, None]) ** 2, axis=(1, 2)) / st.s_theta
    quad = np.array([prior.quadratic_form(g, t, st.rho) for g, t in zip(gamma, theta)])
    return out - 0.5 * quad / st.sigma


def with_value(st, kind, idx, x):
    s = st.copy()
    getattr(s, kind)[idx] = x
    return s


def log_joint(ds, st, prior):
    resid = ds.y - predict(ds, effective_coefficients(st.latent, st.eta))
    return (-0.5 * resid @ resid / st.s_eps
            - 0.5 * np.sum((st.beta_tilde - st.gamma) ** 2) / st.s_beta
            - 0.5 * np.sum((st.alpha_tilde - st.theta) ** 2) / st.s_alpha
            - 0.5 * np.sum((st.theta_r - st.theta) ** 2) / st.s_theta
            - 0.5 * prior.quadratic_form(st.gamma, st.theta, st.rho) / st.sigma)


def oracle_cdf(ds, st, prior, kind, idx):
    coarse = np.linspace(-40.0, 40.0, 4001)
    lc = log_joint_grid(ds, st, prior, kind, idx, coarse)
    keep = coarse[lc > lc.max() - 60.0]
    lo, hi = keep.min() - 0.04, keep.max() + 0.04
    edges = [v for c in (-st.lam, st.lam) if lo < c < hi for v in (c - 1e-9, c + 1e-9)]
    xs = np.unique(np.concatenate([np.linspace(lo, hi, 20001), edges]))
    lp = log_joint_grid(ds, st, prior, kind, idx, xs)
    dens = np.exp(lp - lp.max())
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
    return xs, cdf / cdf[-1]


def sup_cdf_distance(draws, xs, cdf):
    """Kolmogorov distance between the empirical CDF of ``draws`` and a tabulated CDF."""
    draws = np.sort(draws)
    n = draws.size
    F = np.interp(draws, xs, cdf)
    return float(max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n)))
