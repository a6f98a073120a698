"""numba-compiled kernels; same contracts as :mod:`clschrod.kernels.numpy_impl`."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

OK, NODE, OUTSIDE = 0, 1, 2
_TWO_PI = 2.0 * math.pi


@njit(cache=True)
def _wrap(d):
    w = (d + math.pi) % _TWO_PI - math.pi
    if w == -math.pi and d > 0:
        return math.pi
    return w


@njit(cache=True)
def unwrap_line(phase, valid, seed, seed_value):
    n = phase.shape[0]
    out = np.full(n, np.nan)
    start = phase[seed] if valid[seed] else seed_value
    ref_phase = start
    acc = seed_value
    for i in range(seed, n):
        if valid[i]:
            acc = acc + _wrap(phase[i] - ref_phase)
            ref_phase = phase[i]
            out[i] = acc
    ref_phase = start
    acc = seed_value
    for i in range(seed, -1, -1):
        if valid[i]:
            acc = acc + _wrap(phase[i] - ref_phase)
            ref_phase = phase[i]
            out[i] = acc
    return out


# The advance kernels sweep every particle once per RK4 stage (instead of
# carrying one particle through the whole series) and compute the node flag
# without branching, so the inner loops vectorize.


@njit(cache=True, inline="always")
def _cell(u, n, periodic):
    # lower sample, upper sample, fraction, outside flag
    if periodic:
        fi = math.floor(u)
        i = int(fi)
        if i < 0 or i >= n:
            i = i % n
        j = i + 1
        if j == n:
            j = 0
        return i, j, u - fi, False
    if not (u >= 0.0 and u <= n - 1):
        return 0, 1, 0.0, True
    i = min(int(u), n - 2)
    return i, i + 1, u - i, False


@njit(cache=True, inline="always")
def _interp1(vel, nodes, k, x, xmin, dx, periodic):
    i, j, f, out = _cell((x - xmin) / dx, vel.shape[1], periodic)
    if out:
        return 0.0, OUTSIDE
    bad = nodes[k, i] | nodes[k, j]
    return vel[k, i] * (1.0 - f) + vel[k, j] * f, NODE * bad


@njit(cache=True)
def _stage1(vel, nodes, k, theta, x, xmin, dx, periodic, out, status):
    for p in range(x.shape[0]):
        va, sa = _interp1(vel, nodes, k, x[p], xmin, dx, periodic)
        if theta == 0.0:
            out[p] = va if sa == OK else 0.0
            status[p] = max(status[p], sa)
        else:
            vb, sb = _interp1(vel, nodes, k + 1, x[p], xmin, dx, periodic)
            out[p] = (1.0 - theta) * va + theta * vb
            status[p] = max(status[p], max(sa, sb))


@njit(cache=True)
def _kill(alive, code, status):
    for p in range(alive.shape[0]):
        if alive[p] and status[p] != OK:
            alive[p] = False
            code[p] = status[p]


@njit(cache=True)
def advance_1d(x0, alive0, times, vel, nodes, xmin, dx, periodic, h_max):
    K = times.shape[0]
    N = x0.shape[0]
    pos = np.empty((K, N))
    vout = np.empty((K, N))
    amask = np.empty((K, N), dtype=np.bool_)
    x = x0.copy()
    alive = alive0.copy()
    code = np.zeros(N, dtype=np.int8)
    for p in range(N):
        if not alive[p]:
            code[p] = NODE
    y = np.empty(N)
    k1 = np.empty(N)
    k2 = np.empty(N)
    k3 = np.empty(N)
    k4 = np.empty(N)
    status = np.zeros(N, dtype=np.int64)
    _stage1(vel, nodes, 0, 0.0, x, xmin, dx, periodic, k1, status)
    _kill(alive, code, status)
    for p in range(N):
        pos[0, p] = x[p]
        vout[0, p] = k1[p] if alive[p] else 0.0
        amask[0, p] = alive[p]
    for k in range(K - 1):
        span = times[k + 1] - times[k]
        nsub = max(1, int(math.ceil(span / h_max - 1e-12)))
        h = span / nsub
        for s in range(nsub):
            status[:] = OK
            _stage1(vel, nodes, k, s / nsub, x, xmin, dx, periodic, k1, status)
            for p in range(N):
                y[p] = x[p] + 0.5 * h * k1[p]
            _stage1(vel, nodes, k, (s + 0.5) / nsub, y, xmin, dx, periodic, k2, status)
            for p in range(N):
                y[p] = x[p] + 0.5 * h * k2[p]
            _stage1(vel, nodes, k, (s + 0.5) / nsub, y, xmin, dx, periodic, k3, status)
            for p in range(N):
                y[p] = x[p] + h * k3[p]
            _stage1(vel, nodes, k, (s + 1.0) / nsub, y, xmin, dx, periodic, k4, status)
            _kill(alive, code, status)
            for p in range(N):
                if alive[p]:
                    x[p] = x[p] + (h / 6.0) * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p])
        status[:] = OK
        _stage1(vel, nodes, k + 1, 0.0, x, xmin, dx, periodic, k1, status)
        _kill(alive, code, status)
        for p in range(N):
            pos[k + 1, p] = x[p]
            vout[k + 1, p] = k1[p] if alive[p] else 0.0
            amask[k + 1, p] = alive[p]
    return pos, vout, amask, code


@njit(cache=True, inline="always")
def _interp2(vel, nodes, k, x, y, mins, dx, periodic):
    n0 = nodes.shape[1]
    n1 = nodes.shape[2]
    i, ip, fu, out_u = _cell((x - mins[0]) / dx[0], n0, periodic)
    j, jp, fw, out_w = _cell((y - mins[1]) / dx[1], n1, periodic)
    if out_u or out_w:
        return 0.0, 0.0, OUTSIDE
    bad = nodes[k, i, j] | nodes[k, ip, j] | nodes[k, i, jp] | nodes[k, ip, jp]
    a = (1 - fu) * (1 - fw)
    b = fu * (1 - fw)
    c = (1 - fu) * fw
    d = fu * fw
    vx = vel[k, 0, i, j] * a + vel[k, 0, ip, j] * b + vel[k, 0, i, jp] * c + vel[k, 0, ip, jp] * d
    vy = vel[k, 1, i, j] * a + vel[k, 1, ip, j] * b + vel[k, 1, i, jp] * c + vel[k, 1, ip, jp] * d
    return vx, vy, NODE * bad


@njit(cache=True)
def _stage2(vel, nodes, k, theta, px, py, mins, dx, periodic, ox, oy, status):
    for p in range(px.shape[0]):
        ax, ay, sa = _interp2(vel, nodes, k, px[p], py[p], mins, dx, periodic)
        if theta == 0.0:
            ok = sa == OK
            ox[p] = ax if ok else 0.0
            oy[p] = ay if ok else 0.0
            status[p] = max(status[p], sa)
        else:
            bx, by, sb = _interp2(vel, nodes, k + 1, px[p], py[p], mins, dx, periodic)
            ox[p] = (1.0 - theta) * ax + theta * bx
            oy[p] = (1.0 - theta) * ay + theta * by
            status[p] = max(status[p], max(sa, sb))


@njit(cache=True)
def advance_2d(x0, alive0, times, vel, nodes, mins, dx, periodic, h_max):
    K = times.shape[0]
    N = x0.shape[0]
    pos = np.empty((K, N, 2))
    vout = np.empty((K, N, 2))
    amask = np.empty((K, N), dtype=np.bool_)
    px = x0[:, 0].copy()
    py = x0[:, 1].copy()
    alive = alive0.copy()
    code = np.zeros(N, dtype=np.int8)
    for p in range(N):
        if not alive[p]:
            code[p] = NODE
    qx = np.empty(N)
    qy = np.empty(N)
    k1x, k1y = np.empty(N), np.empty(N)
    k2x, k2y = np.empty(N), np.empty(N)
    k3x, k3y = np.empty(N), np.empty(N)
    k4x, k4y = np.empty(N), np.empty(N)
    status = np.zeros(N, dtype=np.int64)

    _stage2(vel, nodes, 0, 0.0, px, py, mins, dx, periodic, k1x, k1y, status)
    _kill(alive, code, status)
    for p in range(N):
        pos[0, p, 0] = px[p]
        pos[0, p, 1] = py[p]
        vout[0, p, 0] = k1x[p] if alive[p] else 0.0
        vout[0, p, 1] = k1y[p] if alive[p] else 0.0
        amask[0, p] = alive[p]
    for k in range(K - 1):
        span = times[k + 1] - times[k]
        nsub = max(1, int(math.ceil(span / h_max - 1e-12)))
        h = span / nsub
        for s in range(nsub):
            status[:] = OK
            _stage2(vel, nodes, k, s / nsub, px, py, mins, dx, periodic, k1x, k1y, status)
            for p in range(N):
                qx[p] = px[p] + 0.5 * h * k1x[p]
                qy[p] = py[p] + 0.5 * h * k1y[p]
            _stage2(vel, nodes, k, (s + 0.5) / nsub, qx, qy, mins, dx, periodic, k2x, k2y,
                    status)
            for p in range(N):
                qx[p] = px[p] + 0.5 * h * k2x[p]
                qy[p] = py[p] + 0.5 * h * k2y[p]
            _stage2(vel, nodes, k, (s + 0.5) / nsub, qx, qy, mins, dx, periodic, k3x, k3y,
                    status)
            for p in range(N):
                qx[p] = px[p] + h * k3x[p]
                qy[p] = py[p] + h * k3y[p]
            _stage2(vel, nodes, k, (s + 1.0) / nsub, qx, qy, mins, dx, periodic, k4x, k4y,
                    status)
            _kill(alive, code, status)
            for p in range(N):
                if alive[p]:
                    px[p] = px[p] + (h / 6.0) * (k1x[p] + 2.0 * k2x[p] + 2.0 * k3x[p] + k4x[p])
                    py[p] = py[p] + (h / 6.0) * (k1y[p] + 2.0 * k2y[p] + 2.0 * k3y[p] + k4y[p])
        status[:] = OK
        _stage2(vel, nodes, k + 1, 0.0, px, py, mins, dx, periodic, k1x, k1y, status)
        _kill(alive, code, status)
        for p in range(N):
            pos[k + 1, p, 0] = px[p]
            pos[k + 1, p, 1] = py[p]
            vout[k + 1, p, 0] = k1x[p] if alive[p] else 0.0
            vout[k + 1, p, 1] = k1y[p] if alive[p] else 0.0
            amask[k + 1, p] = alive[p]
    return pos, vout, amask, code
