"""Numba-compiled inner loops.

Operators and drifts are flattened into plain arrays, and the per-kind code
(resolvent, drift) is spliced into the kernel source before compilation.
Each (operator kind, drift kind) pair therefore gets its own kernel with
no calls or branches on the kind inside the time loop. Calling a helper
per step, even an inlined one, cost 10-15x in refcount traffic on the
array arguments. Kernels are compiled on first use and memoized for the
life of the process. All are ``nogil`` so the thread pool in
:mod:`harnack_lab.parallel` can overlap them.
"""

from __future__ import annotations

import functools
import math
import re
import textwrap

import numpy as np
from numba import njit

from ..operators import MonotoneOperator
from ..scenario import Scenario

# Snippets write into ``{out}`` from ``{src}``; ``d`` is the dimension,
# ``{lam}`` the step size and ``{which}`` selects the precomputed inverse
# for linear operators (0 regular step, 1 truncated last step).
_RESOLVENT = {
    "zero": """
        for i in range(d):
            {out}[i] = {src}[i]
    """,
    "halfspace": """
        dot_ = 0.0
        for i in range(d):
            dot_ += ov1[i] * {src}[i]
        gap_ = os_ - dot_
        step_ = gap_ / onn if gap_ > 0.0 else 0.0
        for i in range(d):
            {out}[i] = {src}[i] + step_ * ov1[i]
    """,
    "box": """
        for i in range(d):
            {out}[i] = min(max({src}[i], ov1[i]), ov2[i])
    """,
    "ball": """
        nrm2_ = 0.0
        for i in range(d):
            nrm2_ += ({src}[i] - ov1[i]) ** 2
        nrm_ = math.sqrt(nrm2_)
        sc_ = os_ / nrm_ if nrm_ > os_ else 1.0
        for i in range(d):
            {out}[i] = ov1[i] + ({src}[i] - ov1[i]) * sc_
    """,
    "linear": """
        for i in range(d):
            acc_ = 0.0
            for j in range(d):
                acc_ += ores[{which}, i, j] * {src}[j]
            tmp[i] = acc_
        for i in range(d):
            {out}[i] = tmp[i]
    """,
    "soft": """
        thr_ = {lam} * os_
        for i in range(d):
            a_ = abs({src}[i]) - thr_
            if a_ > 0.0:
                {out}[i] = a_ if {src}[i] > 0.0 else -a_
            else:
                {out}[i] = 0.0
    """,
}

_DRIFT = {
    "affine": """
        for i in range(d):
            acc_ = dsh[i]
            for j in range(d):
                acc_ += dm[i, j] * {src}[j]
            {out}[i] = acc_
    """,
    "power": """
        nrm2_ = 0.0
        for i in range(d):
            nrm2_ += {src}[i] * {src}[i]
        if de == 2.0:
            fac_ = -dg
        elif nrm2_ > 0.0:
            fac_ = -dg * math.pow(nrm2_, 0.5 * (de - 2.0))
        else:
            fac_ = 0.0
        for i in range(d):
            {out}[i] = fac_ * {src}[i]
    """,
}

# p = x + h b + sigma dw + h extra, with dw = sqrt(h) z
_PREDICT = """
    for i in range(d):
        {dw}[i] = sqh * {z}[i]
    for i in range(d):
        acc_ = 0.0
        for j in range(d):
            acc_ += sigma[i, j] * {dw}[j]
        {out}[i] = {x}[i] + h * {b}[i] + acc_ + h * {extra}[i]
"""

_OPARGS = "ov1, ov2, os_, onn, ores, dm, dsh, dg, de"

_PATH = """
def path_kernel(x0, z, hs, sigma, extra, OPARGS, states, dk, dws):
    n = hs.shape[0]
    d = x0.shape[0]
    bx = np.empty(d)
    p = np.empty(d)
    tmp = np.empty(d)
    for i in range(d):
        states[0, i] = x0[i]
    for k in range(n):
        h = hs[k]
        sqh = math.sqrt(h)
        xk = states[k]
        xn = states[k + 1]
        w = 1 if k == n - 1 else 0
        @drift(src=xk, out=bx)
        @predict(x=xk, b=bx, z=z[k], extra=extra[k], dw=dws[k], out=p)
        @resolvent(src=p, out=xn, lam=h, which=w)
        for i in range(d):
            dk[k, i] = p[i] - xn[i]
"""

_TERMINAL = """
def terminal_kernel(x0, z, hs, sigma, OPARGS, out):
    m = z.shape[0]
    n = hs.shape[0]
    d = x0.shape[0]
    x = np.empty(d)
    bx = np.empty(d)
    p = np.empty(d)
    dw = np.empty(d)
    tmp = np.empty(d)
    zero = np.zeros(d)
    for r in range(m):
        for i in range(d):
            x[i] = x0[i]
        for k in range(n):
            h = hs[k]
            sqh = math.sqrt(h)
            w = 1 if k == n - 1 else 0
            zk = z[r, k]
            @drift(src=x, out=bx)
            @predict(x=x, b=bx, z=zk, extra=zero, dw=dw, out=p)
            @resolvent(src=p, out=x, lam=h, which=w)
        for i in range(d):
            out[r, i] = x[i]
"""

_SEGMENT = """
def segment_kernel(x, z, h, rec_idx, sigma, OPARGS, out):
    n = z.shape[0]
    d = x.shape[0]
    bx = np.empty(d)
    p = np.empty(d)
    dw = np.empty(d)
    tmp = np.empty(d)
    zero = np.zeros(d)
    sqh = math.sqrt(h)
    ptr = 0
    nrec = rec_idx.shape[0]
    for k in range(n):
        zk = z[k]
        @drift(src=x, out=bx)
        @predict(x=x, b=bx, z=zk, extra=zero, dw=dw, out=p)
        @resolvent(src=p, out=x, lam=h, which=0)
        if ptr < nrec and rec_idx[ptr] == k:
            for i in range(d):
                out[ptr, i] = x[i]
            ptr += 1
"""

_COUPLED = """
def coupled_kernel(x0, y0, z, hs, times, sigma, sigma_inv, scale, power, eps, OPARGS,
                   xt, yt, tau, n_t, qv_t, record, rx, ry, rkx, rky, ru, rn, rqv):
    m = z.shape[0]
    n = hs.shape[0]
    d = x0.shape[0]
    x = np.empty(d)
    y = np.empty(d)
    bx = np.empty(d)
    by = np.empty(d)
    px = np.empty(d)
    py = np.empty(d)
    dw = np.empty(d)
    u = np.empty(d)
    mu = np.empty(d)
    zero = np.zeros(d)
    xn = np.empty(d)
    yn = np.empty(d)
    tmp = np.empty(d)
    eps2 = eps * eps
    for r in range(m):
        g2 = 0.0
        for i in range(d):
            x[i] = x0[i]
            y[i] = y0[i]
            g2 += (x[i] - y[i]) ** 2
        coupled = g2 <= eps2
        tau[r] = times[0] if coupled else np.inf
        if coupled:
            for i in range(d):
                y[i] = x[i]
        nn = 0.0
        qv = 0.0
        rec = record and r == 0
        if rec:
            for i in range(d):
                rx[0, i] = x[i]
                ry[0, i] = y[i]
            rn[0] = 0.0
            rqv[0] = 0.0
        for k in range(n):
            h = hs[k]
            sqh = math.sqrt(h)
            w = 1 if k == n - 1 else 0
            zk = z[r, k]
            if coupled:
                for i in range(d):
                    u[i] = 0.0
            else:
                g2 = 0.0
                for i in range(d):
                    g2 += (x[i] - y[i]) ** 2
                # generic pow costs ~50 ns; the usual powers have exact shortcuts
                if power == 0.5:
                    coef = scale[k] / math.sqrt(math.sqrt(g2))
                elif power == 1.0:
                    coef = scale[k] / math.sqrt(g2)
                else:
                    coef = scale[k] / math.sqrt(g2) ** power
                for i in range(d):
                    u[i] = coef * (x[i] - y[i])
                th2 = 0.0
                thdw = 0.0
                for i in range(d):
                    acc = 0.0
                    for j in range(d):
                        acc += sigma_inv[i, j] * u[j]
                    th2 += acc * acc
                    thdw += acc * sqh * zk[i]
                nn += thdw
                qv += th2 * h
            for i in range(d):
                mu[i] = -u[i]
            @drift(src=x, out=bx)
            @predict(x=x, b=bx, z=zk, extra=mu, dw=dw, out=px)
            @resolvent(src=px, out=xn, lam=h, which=w)
            if coupled:
                for i in range(d):
                    yn[i] = xn[i]
                    py[i] = px[i]
            else:
                @drift(src=y, out=by)
                @predict(x=y, b=by, z=zk, extra=zero, dw=dw, out=py)
                @resolvent(src=py, out=yn, lam=h, which=w)
            if rec:
                u2 = 0.0
                for i in range(d):
                    rkx[k, i] = px[i] - xn[i]
                    rky[k, i] = py[i] - yn[i]
                    u2 += u[i] * u[i]
                ru[k] = math.sqrt(u2)
            for i in range(d):
                x[i] = xn[i]
                y[i] = yn[i]
            if not coupled:
                g2 = 0.0
                for i in range(d):
                    g2 += (x[i] - y[i]) ** 2
                if g2 <= eps2:
                    coupled = True
                    tau[r] = times[k + 1]
                    for i in range(d):
                        y[i] = x[i]
            if rec:
                for i in range(d):
                    rx[k + 1, i] = x[i]
                    ry[k + 1, i] = y[i]
                rn[k + 1] = nn
                rqv[k + 1] = qv
        for i in range(d):
            xt[r, i] = x[i]
            yt[r, i] = y[i]
        n_t[r] = nn
        qv_t[r] = qv
"""

_TEMPLATES = {"path": _PATH, "terminal": _TERMINAL, "segment": _SEGMENT, "coupled": _COUPLED}
_MACRO = re.compile(r"^(\s*)@(drift|predict|resolvent)\((.*)\)\s*$")


def _expand(template: str, op_kind: str, drift_kind: str) -> str:
    snippets = {"drift": _DRIFT[drift_kind], "resolvent": _RESOLVENT[op_kind], "predict": _PREDICT}
    lines = []
    for line in template.replace("OPARGS", _OPARGS).splitlines():
        m = _MACRO.match(line)
        if m is None:
            lines.append(line)
            continue
        indent, name, argstr = m.groups()
        subs = dict(kv.split("=", 1) for kv in (a.strip() for a in argstr.split(",")))
        body = textwrap.dedent(snippets[name]).strip("\n").format(**subs)
        lines.append(textwrap.indent(body, indent))
    return "\n".join(lines)


@functools.lru_cache(maxsize=None)
def kernel(name: str, op_kind: str, drift_kind: str):
    """Compiled kernel ``name`` specialized to one operator and drift kind."""
    src = _expand(_TEMPLATES[name], op_kind, drift_kind)
    ns = {"np": np, "math": math}
    exec(compile(src, f"<harnack_lab {name}/{op_kind}/{drift_kind}>", "exec"), ns)
    return njit(nogil=True, fastmath=False)(ns[f"{name}_kernel"])


def encode_operator(op: MonotoneOperator, hs: np.ndarray):
    """``(kind, ov1, ov2, os_, onn, ores)`` for the compiled resolvent."""
    d = op.dim
    v1 = np.zeros(d)
    v2 = np.zeros(d)
    s = 0.0
    res = np.zeros((2, d, d))
    if op.kind == "zero":
        kind = "zero"
    elif op.kind == "normal_cone":
        st = op.set
        kind = st.kind
        v1[:] = st.vec_a
        if st.vec_b is not None:
            v2[:] = st.vec_b
        s = st.scalar
    elif op.kind == "linear_psd":
        kind = "linear"
        h0 = hs[0] if len(hs) else 1.0
        h1 = hs[-1] if len(hs) else 1.0
        res[0] = np.linalg.inv(np.eye(d) + h0 * op.matrix)
        res[1] = np.linalg.inv(np.eye(d) + h1 * op.matrix)
    elif op.kind == "scaled_subgradient_abs":
        kind = "soft"
        s = op.weight
    else:
        raise TypeError("callback operators have no compiled kernel")
    return kind, v1, v2, float(s), float(v1 @ v1), res


def encode_drift(sc: Scenario):
    """``(kind, dm, dsh, dg, de)`` for the compiled drift."""
    dr = sc.drift
    d = dr.dim
    mat = np.zeros((d, d))
    shift = np.zeros(d)
    if dr.kind == "power_dissipative":
        return "power", mat, shift, float(dr.gain), float(dr.exponent)
    mat[:] = dr.matrix
    if dr.kind == "affine":
        shift[:] = dr.shift
    return "affine", mat, shift, 0.0, 2.0


def _setup(name: str, sc: Scenario, hs):
    op_kind, *op_args = encode_operator(sc.operator, hs)
    dr_kind, *dr_args = encode_drift(sc)
    return kernel(name, op_kind, dr_kind), (*op_args, *dr_args)


def _f64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def path(sc: Scenario, x0, z, hs, extra):
    n, d = z.shape
    states = np.empty((n + 1, d))
    dk = np.empty((n, d))
    dws = np.empty((n, d))
    fn, args = _setup("path", sc, hs)
    fn(_f64(x0), _f64(z), _f64(hs), _f64(sc.diffusion.matrix), _f64(extra), *args, states, dk, dws)
    return states, dk, dws


def terminal(sc: Scenario, x0, z, hs):
    out = np.empty((z.shape[0], sc.dim))
    fn, args = _setup("terminal", sc, hs)
    fn(_f64(x0), _f64(z), _f64(hs), _f64(sc.diffusion.matrix), *args, out)
    return out


def segment(sc: Scenario, x, z, h, rec_idx):
    x = np.array(x, dtype=np.float64)
    out = np.empty((len(rec_idx), sc.dim))
    fn, args = _setup("segment", sc, np.array([h]))
    fn(x, _f64(z), float(h), np.asarray(rec_idx, dtype=np.int64), _f64(sc.diffusion.matrix), *args, out)
    return x, out


def coupled(sc: Scenario, x0, y0, z, hs, times, scale, power, eps, record):
    m, n, d = z.shape
    xt = np.empty((m, d))
    yt = np.empty((m, d))
    tau = np.empty(m)
    n_t = np.empty(m)
    qv_t = np.empty(m)
    rn_ = n + 1 if record else 1
    rx = np.empty((rn_, d))
    ry = np.empty((rn_, d))
    rkx = np.empty((max(rn_ - 1, 1), d))
    rky = np.empty((max(rn_ - 1, 1), d))
    ru = np.empty(max(rn_ - 1, 1))
    rnn = np.empty(rn_)
    rqv = np.empty(rn_)
    fn, args = _setup("coupled", sc, hs)
    fn(_f64(x0), _f64(y0), _f64(z), _f64(hs), _f64(times), _f64(sc.diffusion.matrix),
       _f64(sc.diffusion.inverse()), _f64(scale), float(power), float(eps), *args,
       xt, yt, tau, n_t, qv_t, bool(record), rx, ry, rkx, rky, ru, rnn, rqv)
    out = dict(x_T=xt, y_T=yt, tau=tau, n_T=n_t, qv_T=qv_t)
    if record:
        out.update(x=rx, y=ry, kx=rkx, ky=rky, u_norm=ru, n=rnn, qv=rqv)
    return out
