"""Pure-numpy kernels. Reference path, and the fallback when numba is off."""

from __future__ import annotations

import math

import numpy as np

OK, NODE, OUTSIDE = 0, 1, 2


def wrap_angle(d):
    """Map phase differences into [-pi, pi], same convention as ``np.unwrap``."""
    d = np.asarray(d, dtype=float)
    w = np.mod(d + np.pi, 2 * np.pi) - np.pi
    return np.where((w == -np.pi) & (d > 0), np.pi, w)


def unwrap_line(phase, valid, seed, seed_value):
    """Unwrap ``phase`` outward from index ``seed``; invalid samples come back NaN.

    ``seed_value`` fixes the branch at the seed. If the seed itself is invalid
    the first valid neighbour on each side is attached to ``seed_value``.
    """
    phase = np.asarray(phase, dtype=float)
    valid = np.asarray(valid, dtype=bool)
    n = phase.size
    out = np.full(n, np.nan)
    ref_phase = phase[seed] if valid[seed] else seed_value
    for idx in (np.arange(seed, n), np.arange(seed, -1, -1)):
        idx = idx[valid[idx]]
        if idx.size == 0:
            continue
        steps = wrap_angle(np.diff(np.concatenate(([ref_phase], phase[idx]))))
        out[idx] = seed_value + np.cumsum(steps)
    return out


def interp1(field, nodes, x, xmin, dx, periodic):
    n = field.shape[-1]
    u = (x - xmin) / dx
    status = np.zeros(x.shape, dtype=np.int8)
    if periodic:
        i = np.floor(u)
        f = u - i
        i = i.astype(np.int64) % n
        j = (i + 1) % n
    else:
        outside = (u < 0) | (u > n - 1) | ~np.isfinite(u)
        status[outside] = OUTSIDE
        uc = np.clip(np.where(outside, 0.0, u), 0, n - 1)
        i = np.minimum(np.floor(uc).astype(np.int64), n - 2)
        f = uc - i
        j = i + 1
    hit = (nodes[i] | nodes[j]) & (status == OK)
    status[hit] = NODE
    val = field[i] * (1.0 - f) + field[j] * f
    return np.where(status == OK, val, 0.0), status


def interp2(field, nodes, x, y, mins, dx, periodic):
    n0, n1 = nodes.shape
    u = (x - mins[0]) / dx[0]
    w = (y - mins[1]) / dx[1]
    status = np.zeros(x.shape, dtype=np.int8)
    if periodic:
        i = np.floor(u)
        fu = u - i
        i = i.astype(np.int64) % n0
        ip = (i + 1) % n0
        j = np.floor(w)
        fw = w - j
        j = j.astype(np.int64) % n1
        jp = (j + 1) % n1
    else:
        outside = (u < 0) | (u > n0 - 1) | (w < 0) | (w > n1 - 1) | ~np.isfinite(u + w)
        status[outside] = OUTSIDE
        uc = np.clip(np.where(outside, 0.0, u), 0, n0 - 1)
        wc = np.clip(np.where(outside, 0.0, w), 0, n1 - 1)
        i = np.minimum(np.floor(uc).astype(np.int64), n0 - 2)
        j = np.minimum(np.floor(wc).astype(np.int64), n1 - 2)
        fu = uc - i
        fw = wc - j
        ip = i + 1
        jp = j + 1
    hit = (nodes[i, j] | nodes[ip, j] | nodes[i, jp] | nodes[ip, jp]) & (status == OK)
    status[hit] = NODE
    comps = []
    for c in range(field.shape[0]):
        fc = field[c]
        val = (fc[i, j] * (1 - fu) * (1 - fw) + fc[ip, j] * fu * (1 - fw)
               + fc[i, jp] * (1 - fu) * fw + fc[ip, jp] * fu * fw)
        comps.append(np.where(status == OK, val, 0.0))
    return comps, status


def advance_1d(x0, alive0, times, vel, nodes, xmin, dx, periodic, h_max):
    """RK4 particle advance through a velocity snapshot series (1D).

    ``vel``/``nodes`` have shape (K, n). Velocity is linear in time between
    snapshots and linear in space between samples. Returns positions,
    velocities and alive flags at every snapshot, plus the first failure code
    per particle.
    """
    K = times.shape[0]
    x = np.array(x0, dtype=float)
    alive = np.array(alive0, dtype=bool)
    code = np.where(alive, OK, NODE).astype(np.int8)
    pos = np.empty((K, x.size))
    vout = np.empty((K, x.size))
    amask = np.empty((K, x.size), dtype=bool)

    def velocity(xq, k, theta):
        va, sa = interp1(vel[k], nodes[k], xq, xmin, dx, periodic)
        if theta == 0.0:
            return va, sa
        vb, sb = interp1(vel[k + 1], nodes[k + 1], xq, xmin, dx, periodic)
        return (1.0 - theta) * va + theta * vb, np.maximum(sa, sb)

    def kill(status):
        bad = alive & (status != OK)
        code[bad] = status[bad]
        alive[bad] = False

    v, st = velocity(x, 0, 0.0)
    kill(st)
    pos[0], vout[0], amask[0] = x, np.where(alive, v, 0.0), alive
    for k in range(K - 1):
        span = times[k + 1] - times[k]
        nsub = max(1, int(math.ceil(span / h_max - 1e-12)))
        h = span / nsub
        for s in range(nsub):
            th0 = s / nsub
            thm = (s + 0.5) / nsub
            th1 = (s + 1) / nsub
            k1, s1 = velocity(x, k, th0)
            k2, s2 = velocity(x + 0.5 * h * k1, k, thm)
            k3, s3 = velocity(x + 0.5 * h * k2, k, thm)
            k4, s4 = velocity(x + h * k3, k, th1)
            status = np.maximum(np.maximum(s1, s2), np.maximum(s3, s4))
            kill(status)
            x = np.where(alive, x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), x)
        v, st = velocity(x, k + 1, 0.0)
        kill(st)
        pos[k + 1], vout[k + 1], amask[k + 1] = x, np.where(alive, v, 0.0), alive
    return pos, vout, amask, code


def advance_2d(x0, alive0, times, vel, nodes, mins, dx, periodic, h_max):
    """2D counterpart of :func:`advance_1d`; ``x0`` is (N, 2), ``vel`` is (K, 2, n0, n1)."""
    K = times.shape[0]
    N = x0.shape[0]
    px = np.array(x0[:, 0], dtype=float)
    py = np.array(x0[:, 1], dtype=float)
    alive = np.array(alive0, dtype=bool)
    code = np.where(alive, OK, NODE).astype(np.int8)
    pos = np.empty((K, N, 2))
    vout = np.empty((K, N, 2))
    amask = np.empty((K, N), dtype=bool)

    def velocity(xq, yq, k, theta):
        (ax, ay), sa = interp2(vel[k], nodes[k], xq, yq, mins, dx, periodic)
        if theta == 0.0:
            return ax, ay, sa
        (bx, by), sb = interp2(vel[k + 1], nodes[k + 1], xq, yq, mins, dx, periodic)
        return ((1 - theta) * ax + theta * bx, (1 - theta) * ay + theta * by,
                np.maximum(sa, sb))

    def kill(status):
        bad = alive & (status != OK)
        code[bad] = status[bad]
        alive[bad] = False

    def record(k, vx, vy):
        pos[k, :, 0], pos[k, :, 1] = px, py
        vout[k, :, 0] = np.where(alive, vx, 0.0)
        vout[k, :, 1] = np.where(alive, vy, 0.0)
        amask[k] = alive

    vx, vy, st = velocity(px, py, 0, 0.0)
    kill(st)
    record(0, vx, vy)
    for k in range(K - 1):
        span = times[k + 1] - times[k]
        nsub = max(1, int(math.ceil(span / h_max - 1e-12)))
        h = span / nsub
        for s in range(nsub):
            th0, thm, th1 = s / nsub, (s + 0.5) / nsub, (s + 1) / nsub
            k1x, k1y, s1 = velocity(px, py, k, th0)
            k2x, k2y, s2 = velocity(px + 0.5 * h * k1x, py + 0.5 * h * k1y, k, thm)
            k3x, k3y, s3 = velocity(px + 0.5 * h * k2x, py + 0.5 * h * k2y, k, thm)
            k4x, k4y, s4 = velocity(px + h * k3x, py + h * k3y, k, th1)
            kill(np.maximum(np.maximum(s1, s2), np.maximum(s3, s4)))
            px = np.where(alive, px + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x), px)
            py = np.where(alive, py + (h / 6.0) * (k1y + 2 * k2y + 2 * k3y + k4y), py)
        vx, vy, st = velocity(px, py, k + 1, 0.0)
        kill(st)
        record(k + 1, vx, vy)
    return pos, vout, amask, code
