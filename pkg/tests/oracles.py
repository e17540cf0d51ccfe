"""Closed-form Gaussian values for the unconstrained scalar OU dX = w X dt + dW."""

import math

import numpy as np


def ou_mean_var(x, w, t):
    m = math.exp(w * t)
    v = t if w == 0 else math.expm1(2 * w * t) / (2 * w)
    return x * m, v


def ou_exp_linear(x, w, t, lam):
    """P_t exp(lam .)(x) = exp(lam x e^{wt} + lam^2 v_t / 2)."""
    mu, v = ou_mean_var(x, w, t)
    return math.exp(lam * mu + 0.5 * lam ** 2 * v)


def ou_log_exp_linear(x, w, t, lam):
    mu, v = ou_mean_var(x, w, t)
    return lam * mu + 0.5 * lam ** 2 * v


def gauss_hermite_expect(fn, mu, var, n=80):
    """E fn(N(mu, var)) by Gauss-Hermite quadrature."""
    nodes, weights = np.polynomial.hermite.hermgauss(n)
    return float(np.sum(weights * fn(mu + math.sqrt(2 * var) * nodes)) / math.sqrt(math.pi))
