"""Compiled full-conditional updates and the per-iteration sweep.

State is kept in flat arrays grouped into tuples:

* ``data  = (y, W, X, Z, WtW, XtX)``
* ``st    = (eta, beta_tilde, alpha_tilde, gamma, theta, theta_r, scalars)``
  where ``scalars = [s_beta, s_alpha, s_theta, s_eps, sigma, rho, lam]``
* ``cache = (node_mask, alpha_masked, G, netc, nodec, wc, resid, K1, K2)``
  with ``G[r, i] = Z_i @ alpha_masked[r]``, ``netc[r, i]`` the quadratic form
  of factor ``r`` for subject ``i`` and ``resid`` the full residual.
* ``prior = (U, d, delta)``
* ``hp    = [s_eta, lam_max, a_beta, b_beta, a_alpha, b_alpha, a_theta,
  b_theta, a_eps, b_eps, a_sigma, b_sigma]``

All randomness is passed in (uniforms, standard normals, standard gammas) so
every update is a deterministic function of its inputs.
"""

import math

import numba
import numpy as np

from ._special import mixture_ppf, ndtri

S_BETA, S_ALPHA, S_THETA, S_EPS, SIGMA, RHO, LAM = range(7)
H_SETA, H_LMAX, H_AB, H_BB, H_AA, H_BA, H_AT, H_BT, H_AE, H_BE, H_AS, H_BS = range(12)


@numba.njit(cache=True)
def precision_blocks(U, d, delta, rho, K1, K2):
    c = rho / delta
    p = d.shape[0]
    w1 = np.empty(p)
    w2 = np.empty(p)
    for k in range(p):
        inv = 1.0 / (d[k] * d[k] - c * c)
        w1[k] = d[k] * inv
        w2[k] = inv
    for i in range(p):
        for j in range(i, p):
            s1 = 0.0
            s2 = 0.0
            for k in range(p):
                uu = U[k, i] * U[k, j]
                s1 += uu * w1[k]
                s2 += uu * w2[k]
            K1[i, j] = s1
            K1[j, i] = s1
            K2[i, j] = s2
            K2[j, i] = s2


@numba.njit(cache=True)
def field_quadratic(U, d, delta, rho, gam, th):
    """``sigma`` times the joint-prior quadratic form of (gamma, theta)."""
    c = rho / delta
    g = U @ gam
    t = U @ th
    q = 0.0
    for k in range(d.shape[0]):
        q += (d[k] * (g[k] * g[k] + t[k] * t[k]) - 2.0 * c * g[k] * t[k]) / (d[k] * d[k] - c * c)
    return q


@numba.njit(cache=True)
def log_f_rho(U, d, delta, rho, gam, th, sigma):
    c = rho / delta
    ld = 0.0
    for k in range(d.shape[0]):
        ld += math.log(d[k] * d[k] - c * c)
    return -field_quadratic(U, d, delta, rho, gam, th) / (2.0 * sigma) - 0.5 * ld


@numba.njit(cache=True)
def masks_for(lam, gam, th, thr, at, use_node, use_net, m, am):
    for p in range(gam.shape[0]):
        m[p] = 1.0 if (use_node and abs(gam[p]) > lam) else 0.0
    for r in range(thr.shape[0]):
        for p in range(th.shape[0]):
            on = use_net and abs(th[p]) > lam and abs(thr[r, p]) > lam
            am[r, p] = at[r, p] if on else 0.0


@numba.njit(cache=True)
def factor_products(Z, a, G_r, netc_r):
    n, p = Z.shape[0], Z.shape[1]
    for i in range(n):
        q = 0.0
        for k in range(p):
            s = 0.0
            for j in range(p):
                s += Z[i, k, j] * a[j]
            G_r[i, k] = s
            q += a[k] * s
        netc_r[i] = q


@numba.njit(cache=True)
def recompute(data, st, cache, prior, use_node, use_net):
    """Rebuild every cached quantity from the parameter state."""
    y, W, X, Z, WtW, XtX = data
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    U, d, delta = prior
    masks_for(sc[LAM], gam, th, thr, at, use_node, use_net, m, am)
    for r in range(am.shape[0]):
        factor_products(Z, am[r], G[r], netc[r])
    nodec[:] = X @ (bt * m)
    wc[:] = W @ eta
    for i in range(y.shape[0]):
        v = y[i] - wc[i] - nodec[i]
        for r in range(am.shape[0]):
            v -= netc[r, i]
        resid[i] = v
    precision_blocks(U, d, delta, sc[RHO], K1, K2)


@numba.njit(cache=True)
def mvn_from_precision(prec, rhs, z):
    """Draw from N(prec^-1 rhs, prec^-1) using standard normals ``z``."""
    k = rhs.shape[0]
    L = np.linalg.cholesky(prec)
    # L w = rhs
    w = np.empty(k)
    for i in range(k):
        s = rhs[i]
        for j in range(i):
            s -= L[i, j] * w[j]
        w[i] = s / L[i, i]
    # L' x = w + z
    x = np.empty(k)
    for i in range(k - 1, -1, -1):
        s = w[i] + z[i]
        for j in range(i + 1, k):
            s -= L[j, i] * x[j]
        x[i] = s / L[i, i]
    return x


@numba.njit(cache=True)
def update_eta(data, st, cache, hp, z):
    y, W, X, Z, WtW, XtX = data
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    q = eta.shape[0]
    s_eps = sc[S_EPS]
    prec = WtW / s_eps
    for j in range(q):
        prec[j, j] += 1.0 / hp[H_SETA]
    target = resid + wc
    rhs = (W.T @ target) / s_eps
    eta[:] = mvn_from_precision(prec, rhs, z)
    wc[:] = W @ eta
    resid[:] = target - wc


@numba.njit(cache=True)
def update_beta_tilde(data, st, cache, z):
    y, W, X, Z, WtW, XtX = data
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    p = bt.shape[0]
    s_eps = sc[S_EPS]
    s_beta = sc[S_BETA]
    target = resid + nodec
    xty = X.T @ target
    prec = np.empty((p, p))
    rhs = np.empty(p)
    for i in range(p):
        for j in range(p):
            prec[i, j] = m[i] * m[j] * XtX[i, j] / s_eps
        prec[i, i] += 1.0 / s_beta
        rhs[i] = m[i] * xty[i] / s_eps + gam[i] / s_beta
    bt[:] = mvn_from_precision(prec, rhs, z)
    nodec[:] = X @ (bt * m)
    resid[:] = target - nodec


@numba.njit(cache=True)
def apply_alpha(Z, cache, r, p, new_value):
    """Set the masked factor entry ``alpha[r, p]`` and update caches."""
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    delta_a = new_value - am[r, p]
    if delta_a == 0.0:
        return
    n, np_ = Z.shape[0], Z.shape[1]
    for i in range(n):
        b = G[r, i, p]
        netc[r, i] += 2.0 * delta_a * b
        resid[i] -= 2.0 * delta_a * b
        for j in range(np_):
            G[r, i, j] += delta_a * Z[i, p, j]
    am[r, p] = new_value


@numba.njit(cache=True)
def update_alpha_tilde_element(data, st, cache, use_net, r, p, u):
    y, W, X, Z, WtW, XtX = data
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    lam = sc[LAM]
    s_alpha = sc[S_ALPHA]
    if use_net and abs(th[p]) > lam and abs(thr[r, p]) > lam:
        s_eps = sc[S_EPS]
        sbb = 0.0
        sxb = 0.0
        cur = am[r, p]
        for i in range(y.shape[0]):
            b = G[r, i, p]
            xi = resid[i] + 2.0 * cur * b
            sbb += b * b
            sxb += xi * b
        prec = 1.0 / s_alpha + 4.0 * sbb / s_eps
        mean = (th[p] / s_alpha + 2.0 * sxb / s_eps) / prec
        new = mean + ndtri(u) / math.sqrt(prec)
        at[r, p] = new
        apply_alpha(Z, cache, r, p, new)
    else:
        at[r, p] = th[p] + math.sqrt(s_alpha) * ndtri(u)


@numba.njit(cache=True)
def update_theta_r_element(data, st, cache, use_net, r, p, u):
    y, W, X, Z, WtW, XtX = data
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    lam = sc[LAM]
    s_theta = sc[S_THETA]
    if use_net and abs(th[p]) > lam:
        s_eps = sc[S_EPS]
        cur = am[r, p]
        a = at[r, p]
        diff = 0.0
        for i in range(y.shape[0]):
            b = G[r, i, p]
            xi = resid[i] + 2.0 * cur * b
            h = 2.0 * a * b
            diff += h * h - 2.0 * h * xi
        new = mixture_ppf(u, th[p], s_theta, lam, -diff / (2.0 * s_eps), 0.0)
        thr[r, p] = new
        apply_alpha(Z, cache, r, p, a if abs(new) > lam else 0.0)
    else:
        thr[r, p] = th[p] + math.sqrt(s_theta) * ndtri(u)


@numba.njit(cache=True)
def gamma_prior_moments(st, cache, prior, p):
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    U, d, delta = prior
    c = sc[RHO] / delta
    sigma = sc[SIGMA]
    s_beta = sc[S_BETA]
    cross = 0.0
    own = 0.0
    for j in range(gam.shape[0]):
        cross += K2[p, j] * th[j]
        if j != p:
            own += K1[p, j] * gam[j]
    prec = 1.0 / s_beta + K1[p, p] / sigma
    lin = bt[p] / s_beta + (c * cross - own) / sigma
    return lin / prec, 1.0 / prec


@numba.njit(cache=True)
def update_gamma_element(data, st, cache, prior, use_node, p, u):
    y, W, X, Z, WtW, XtX = data
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    lam = sc[LAM]
    mu, var = gamma_prior_moments(st, cache, prior, p)
    ll_on = 0.0
    if use_node:
        diff = 0.0
        for i in range(y.shape[0]):
            h = X[i, p] * bt[p]
            xi = resid[i] + m[p] * h
            diff += h * h - 2.0 * h * xi
        ll_on = -diff / (2.0 * sc[S_EPS])
    new = mixture_ppf(u, mu, var, lam, ll_on, 0.0)
    gam[p] = new
    new_m = 1.0 if (use_node and abs(new) > lam) else 0.0
    dm = new_m - m[p]
    if dm != 0.0:
        for i in range(y.shape[0]):
            h = dm * X[i, p] * bt[p]
            nodec[i] += h
            resid[i] -= h
        m[p] = new_m


@numba.njit(cache=True)
def theta_prior_moments(st, cache, prior, p):
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    U, d, delta = prior
    R = at.shape[0]
    c = sc[RHO] / delta
    sigma = sc[SIGMA]
    cross = 0.0
    own = 0.0
    for j in range(th.shape[0]):
        cross += K2[p, j] * gam[j]
        if j != p:
            own += K1[p, j] * th[j]
    sa = 0.0
    stt = 0.0
    for r in range(R):
        sa += at[r, p]
        stt += thr[r, p]
    prec = R / sc[S_ALPHA] + R / sc[S_THETA] + K1[p, p] / sigma
    lin = sa / sc[S_ALPHA] + stt / sc[S_THETA] + (c * cross - own) / sigma
    return lin / prec, 1.0 / prec


@numba.njit(cache=True)
def update_theta_element(data, st, cache, prior, use_net, p, u):
    y, W, X, Z, WtW, XtX = data
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    lam = sc[LAM]
    R = at.shape[0]
    mu, var = theta_prior_moments(st, cache, prior, p)
    ll_on = 0.0
    if use_net and R > 0:
        diff = 0.0
        for i in range(y.shape[0]):
            h = 0.0
            cur = 0.0
            for r in range(R):
                b = G[r, i, p]
                if abs(thr[r, p]) > lam:
                    h += 2.0 * at[r, p] * b
                cur += 2.0 * am[r, p] * b
            xi = resid[i] + cur
            diff += h * h - 2.0 * h * xi
        ll_on = -diff / (2.0 * sc[S_EPS])
    new = mixture_ppf(u, mu, var, lam, ll_on, 0.0)
    th[p] = new
    on = use_net and abs(new) > lam
    for r in range(R):
        apply_alpha(Z, cache, r, p, at[r, p] if (on and abs(thr[r, p]) > lam) else 0.0)


@numba.njit(cache=True)
def variance_shapes(hp, n, p, R):
    out = np.empty(5)
    out[0] = hp[H_AB] + p / 2.0
    out[1] = hp[H_AA] + p * R / 2.0
    out[2] = hp[H_AT] + p * R / 2.0
    out[3] = hp[H_AE] + n / 2.0
    out[4] = hp[H_AS] + p
    return out


@numba.njit(cache=True)
def update_variances(data, st, cache, prior, hp, g):
    """Inverse-Gamma draws ``rate / g`` with ``g`` standard gammas of fixed shapes."""
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    U, d, delta = prior
    R = at.shape[0]
    rb = 0.0
    for j in range(bt.shape[0]):
        rb += (bt[j] - gam[j]) ** 2
    ra = 0.0
    rt = 0.0
    for r in range(R):
        for j in range(th.shape[0]):
            ra += (at[r, j] - th[j]) ** 2
            rt += (thr[r, j] - th[j]) ** 2
    re = 0.0
    for i in range(resid.shape[0]):
        re += resid[i] * resid[i]
    rs = field_quadratic(U, d, delta, sc[RHO], gam, th)
    sc[S_BETA] = (hp[H_BB] + 0.5 * rb) / g[0]
    sc[S_ALPHA] = (hp[H_BA] + 0.5 * ra) / g[1]
    sc[S_THETA] = (hp[H_BT] + 0.5 * rt) / g[2]
    sc[S_EPS] = (hp[H_BE] + 0.5 * re) / g[3]
    sc[SIGMA] = (hp[H_BS] + 0.5 * rs) / g[4]


@numba.njit(cache=True)
def mh_rho(st, cache, prior, z, u, step):
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    U, d, delta = prior
    rho = sc[RHO]
    prop = rho + step * z
    if abs(prop) >= 1.0 or abs(prop) / delta >= d[d.shape[0] - 1]:
        return False
    log_ratio = (log_f_rho(U, d, delta, prop, gam, th, sc[SIGMA])
                 - log_f_rho(U, d, delta, rho, gam, th, sc[SIGMA]))
    if u == 0.0 or math.log(u) < log_ratio:
        sc[RHO] = prop
        precision_blocks(U, d, delta, prop, K1, K2)
        return True
    return False


@numba.njit(cache=True)
def lambda_log_ratio(data, st, cache, use_node, use_net, prop, m_new, am_new, netc_new):
    """Log acceptance ratio of threshold ``prop``; fills the proposed masks."""
    y, W, X, Z, WtW, XtX = data
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    masks_for(prop, gam, th, thr, at, use_node, use_net, m_new, am_new)
    R = am.shape[0]
    n = y.shape[0]
    changed = False
    for p in range(m.shape[0]):
        if m_new[p] != m[p]:
            changed = True
    G_tmp = np.empty((n, Z.shape[1]))
    for r in range(R):
        same = True
        for p in range(am.shape[1]):
            if am_new[r, p] != am[r, p]:
                same = False
        if same:
            netc_new[r, :] = netc[r]
        else:
            changed = True
            factor_products(Z, am_new[r], G_tmp, netc_new[r])
    if not changed:
        return 0.0, False
    nodec_new = X @ (bt * m_new)
    old = 0.0
    new = 0.0
    for i in range(n):
        v = y[i] - wc[i] - nodec_new[i]
        for r in range(R):
            v -= netc_new[r, i]
        new += v * v
        old += resid[i] * resid[i]
    return -(new - old) / (2.0 * sc[S_EPS]), True


@numba.njit(cache=True)
def mh_lambda(data, st, cache, prior, hp, use_node, use_net, z, u, step):
    eta, bt, at, gam, th, thr, sc = st
    m, am, G, netc, nodec, wc, resid, K1, K2 = cache
    prop = sc[LAM] + step * z
    if prop < 0.0 or prop > hp[H_LMAX]:
        return False
    m_new = np.empty_like(m)
    am_new = np.empty_like(am)
    netc_new = np.empty_like(netc)
    log_ratio, changed = lambda_log_ratio(data, st, cache, use_node, use_net, prop,
                                          m_new, am_new, netc_new)
    if u > 0.0 and math.log(u) >= log_ratio:
        return False
    sc[LAM] = prop
    if changed:
        recompute(data, st, cache, prior, use_node, use_net)
    return True


@numba.njit(cache=True)
def sweep(data, st, cache, prior, hp, use_node, use_net, normals, uniforms, gammas,
          steps, accepted):
    """One full iteration: eta, beta_tilde, alpha_tilde, theta_r, gamma, theta,
    the five variances, then the rho and lambda Metropolis steps."""
    eta, bt, at, gam, th, thr, sc = st
    q = eta.shape[0]
    p = bt.shape[0]
    R = at.shape[0]
    update_eta(data, st, cache, hp, normals[:q])
    update_beta_tilde(data, st, cache, normals[q:q + p])
    k = 0
    for r in range(R):
        for j in range(p):
            update_alpha_tilde_element(data, st, cache, use_net, r, j, uniforms[k])
            k += 1
    for r in range(R):
        for j in range(p):
            update_theta_r_element(data, st, cache, use_net, r, j, uniforms[k])
            k += 1
    for j in range(p):
        update_gamma_element(data, st, cache, prior, use_node, j, uniforms[k])
        k += 1
    for j in range(p):
        update_theta_element(data, st, cache, prior, use_net, j, uniforms[k])
        k += 1
    update_variances(data, st, cache, prior, hp, gammas)
    accepted[0] = mh_rho(st, cache, prior, normals[q + p], uniforms[k], steps[0])
    accepted[1] = mh_lambda(data, st, cache, prior, hp, use_node, use_net,
                            normals[q + p + 1], uniforms[k + 1], steps[1])
