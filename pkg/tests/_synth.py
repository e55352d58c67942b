"""Synthetic data and independent oracles shared by the test modules."""

import numpy as np

from dimv.core import MaskedMatrix


def equicorrelated(p, rho, sd=None):
    c = np.full((p, p), rho)
    np.fill_diagonal(c, 1.0)
    sd = np.ones(p) if sd is None else np.asarray(sd, dtype=float)
    return c * np.outer(sd, sd)


def random_spd(rng, p, jitter=0.5):
    a = rng.normal(size=(p, p))
    return a @ a.T + jitter * np.eye(p)


def mvn_split(seed, mu, sigma, n_train, n_test, rate):
    """Draw train/test from N(mu, sigma) and MCAR-mask both with ``rate``."""
    rng = np.random.default_rng(seed)
    x = rng.multivariate_normal(mu, sigma, size=n_train + n_test)
    tr, te = x[:n_train], x[n_train:]
    mtr = rng.random(tr.shape) >= rate
    mte = rng.random(te.shape) >= rate
    # every column keeps an observation so estimation is defined
    mtr[0] = True
    return tr, te, MaskedMatrix(tr, mtr), MaskedMatrix(te, mte)


def oracle_conditional_mean(x_nan, mu, sigma):
    """Per-row conditional mean of the missing block given all observed entries."""
    out = np.array(x_nan, dtype=float)
    for i, row in enumerate(out):
        m = np.flatnonzero(np.isnan(row))
        o = np.flatnonzero(~np.isnan(row))
        if m.size == 0:
            continue
        if o.size == 0:
            out[i, m] = mu[m]
            continue
        inv = np.linalg.inv(sigma[np.ix_(o, o)])
        out[i, m] = mu[m] + sigma[np.ix_(m, o)] @ inv @ (row[o] - mu[o])
    return out


def grid_eta_max(stats, s11, s22, points=100_000):
    """Maximum of the profiled likelihood over an evenly spaced open grid."""
    t = np.sqrt(s11 * s22)
    g = np.linspace(-t, t, points + 2)[1:-1]
    cond = s22 - g**2 / s11
    quad = stats.s22 - 2 * g / s11 * stats.s12 + g**2 / s11**2 * stats.s11
    eta = -0.5 * stats.m * np.log(cond) - 0.5 * quad / cond
    k = int(np.argmax(eta))
    return float(eta[k]), float(g[k])


def random_pair_instance(rng):
    """A random bivariate sample with missing entries, returned centered."""
    from dimv.core import available_moments
    from dimv.dper import case_deletion_cov, pair_stats

    n = int(rng.integers(6, 80))
    rho = rng.uniform(-0.98, 0.98)
    scale = rng.uniform(0.1, 10.0, size=2)
    x = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=n) * scale
    keep = rng.random((n, 2)) >= rng.uniform(0.0, 0.6)
    keep[:2] = True
    xm = MaskedMatrix(x, keep)
    mu, var = available_moments(xm)
    xc = MaskedMatrix(x - mu, keep)
    return pair_stats(xc, 0, 1), var[0], var[1], case_deletion_cov(xc, 0, 1)
