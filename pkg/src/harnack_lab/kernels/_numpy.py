"""Pure-numpy fallback for the compiled kernels.

Same signatures as :mod:`._numba`. Batched kernels vectorize across paths and
loop over time steps in Python, so they are slower but exact mirrors of the
compiled arithmetic up to summation order. This backend also serves
``callback`` operators, which have no compiled form.
"""

from __future__ import annotations

import numpy as np

from ..operators import resolvent
from ..scenario import Scenario


def _predict(sc: Scenario, x, h, z, extra=None):
    dw = np.sqrt(h) * z
    p = x + h * sc.drift(x) + dw @ sc.diffusion.matrix.T
    if extra is not None:
        p = p + h * extra
    return p, dw


def path(sc: Scenario, x0, z, hs, extra):
    n, d = z.shape
    states = np.empty((n + 1, d))
    dk = np.empty((n, d))
    dws = np.empty((n, d))
    states[0] = x0
    for k in range(n):
        p, dws[k] = _predict(sc, states[k], hs[k], z[k], extra[k])
        states[k + 1] = resolvent(sc.operator, hs[k], p)
        dk[k] = p - states[k + 1]
    return states, dk, dws


def terminal(sc: Scenario, x0, z, hs):
    m = z.shape[0]
    x = np.tile(np.asarray(x0, dtype=np.float64), (m, 1))
    for k in range(hs.shape[0]):
        p, _ = _predict(sc, x, hs[k], z[:, k, :])
        x = resolvent(sc.operator, hs[k], p)
    return x


def segment(sc: Scenario, x, z, h, rec_idx):
    x = np.array(x, dtype=np.float64)
    out = np.empty((len(rec_idx), sc.dim))
    ptr = 0
    for k in range(z.shape[0]):
        p, _ = _predict(sc, x, h, z[k])
        x = resolvent(sc.operator, h, p)
        if ptr < len(rec_idx) and rec_idx[ptr] == k:
            out[ptr] = x
            ptr += 1
    return x, out


def coupled(sc: Scenario, x0, y0, z, hs, times, scale, power, eps, record):
    m, n, d = z.shape
    op = sc.operator
    sinv = sc.diffusion.inverse()
    x = np.tile(np.asarray(x0, dtype=np.float64), (m, 1))
    y = np.tile(np.asarray(y0, dtype=np.float64), (m, 1))
    live = np.linalg.norm(x - y, axis=1) > eps
    tau = np.where(live, np.inf, times[0])
    y[~live] = x[~live]
    n_t = np.zeros(m)
    qv_t = np.zeros(m)
    if record:
        rx = np.empty((n + 1, d))
        ry = np.empty((n + 1, d))
        rkx = np.empty((n, d))
        rky = np.empty((n, d))
        ru = np.empty(n)
        rn = np.zeros(n + 1)
        rqv = np.zeros(n + 1)
        rx[0], ry[0] = x[0], y[0]
    for k in range(n):
        h = hs[k]
        gap = x - y
        g = np.linalg.norm(gap, axis=1, keepdims=True)
        u = np.where(live[:, None], scale[k] * gap / np.where(live[:, None], g, 1.0) ** power, 0.0)
        theta = u @ sinv.T
        dw = np.sqrt(h) * z[:, k, :]
        n_t += np.where(live, np.einsum("ij,ij->i", theta, dw), 0.0)
        qv_t += np.where(live, np.einsum("ij,ij->i", theta, theta) * h, 0.0)
        px, _ = _predict(sc, x, h, z[:, k, :], -u)
        py, _ = _predict(sc, y, h, z[:, k, :])
        xn = resolvent(op, h, px)
        yn = resolvent(op, h, py)
        yn[~live] = xn[~live]
        py[~live] = px[~live]
        if record:
            rkx[k], rky[k] = px[0] - xn[0], py[0] - yn[0]
            ru[k] = np.linalg.norm(u[0])
        x, y = xn, yn
        hit = live & (np.linalg.norm(x - y, axis=1) <= eps)
        tau[hit] = times[k + 1]
        y[hit] = x[hit]
        live &= ~hit
        if record:
            rx[k + 1], ry[k + 1] = x[0], y[0]
            rn[k + 1], rqv[k + 1] = n_t[0], qv_t[0]
    out = dict(x_T=x, y_T=y, tau=tau, n_T=n_t, qv_T=qv_t)
    if record:
        out.update(x=rx, y=ry, kx=rkx, ky=rky, u_norm=ru, n=rn, qv=rqv)
    return out
