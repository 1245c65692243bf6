"""Pure-Python/numpy implementations of the hot kernels.

This module mirrors the API of the compiled extension ``mclab._core``.
The SDE and Loewner kernels are bit-compatible with the compiled ones
(same counter-based RNG streams, same update order); the lattice kernels
are distribution-equivalent but use numpy's RNG internally.

Everything here is deliberately simple and slow; the compiled backend is
preferred at import time when available.
"""

from __future__ import annotations

import math

import numpy as np

MASK = (1 << 64) - 1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK


class Xoshiro:
    """xoshiro256++ with Box-Muller normals; mirrors the C implementation."""

    __slots__ = ("s", "_spare", "_has_spare")

    def __init__(self, key):
        self.s = [int(k) & MASK for k in key]
        if not any(self.s):
            self.s = [0x9E3779B97F4A7C15, 1, 2, 3]
        self._spare = 0.0
        self._has_spare = False

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[0] + s[3]) & MASK, 23) + s[0]) & MASK
        t = (s[1] << 17) & MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        # in (0, 1]
        return ((self.next_u64() >> 11) + 1) * (2.0**-53)

    def normal(self) -> float:
        if self._has_spare:
            self._has_spare = False
            return self._spare
        u1 = self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare = r * math.sin(2.0 * math.pi * u2)
        self._has_spare = True
        return r * math.cos(2.0 * math.pi * u2)


# ---------------------------------------------------------------------------
# SDE stepping


def _drift(theta, kind, a, b, core):
    n = theta.size
    out = np.zeros(n)
    for j in range(n):
        s = 0.0
        for k in range(n):
            if k != j:
                s += 1.0 / math.tan(theta[j] - theta[k])
        if kind == 0:
            out[j] = 2.0 * a * s
        elif kind == 1:
            out[j] = (a - 2.0 * b) * s
        else:
            out[j] = a * s
    if kind in (2, 3):
        out += _pure2_gradient(theta, a, b, core, far=(kind == 3))
    return out


def _pure2_gradient(theta, a, b, core, far):
    """d_j log of the two-chord pure partition function, all four j."""
    z_lo, z_hi, sp_grid = core
    c = 0.5 * (theta[0] + theta[3])
    w = np.tan(theta - c)
    s = 1.0 + w * w
    z = (w[1] - w[0]) * (w[3] - w[2]) / ((w[2] - w[0]) * (w[3] - w[1]))
    grad = 2.0 * b * w
    grad[0] += 2.0 * b * s[0] / (w[2] - w[0])
    grad[2] -= 2.0 * b * s[2] / (w[2] - w[0])
    grad[1] += 2.0 * b * s[1] / (w[3] - w[1])
    grad[3] -= 2.0 * b * s[3] / (w[3] - w[1])
    dz = np.zeros(4)
    for (u, v, sign) in ((0, 1, 1.0), (2, 3, 1.0), (0, 2, -1.0), (1, 3, -1.0)):
        dz[u] -= sign / (w[v] - w[u])
        dz[v] += sign / (w[v] - w[u])
    dz *= s * z
    if far:
        grad += _dlog_core(1.0 - z, z_lo, z_hi, sp_grid, a, b) * (-dz)
    else:
        grad += _dlog_core(z, z_lo, z_hi, sp_grid, a, b) * dz
    return grad


def _dlog_core(z, z_lo, z_hi, sp_grid, a, b):
    zc = min(max(z, z_lo), z_hi)
    x = (zc - z_lo) / (z_hi - z_lo) * (sp_grid.size - 1)
    i = min(int(x), sp_grid.size - 2)
    f = x - i
    sp = sp_grid[i] * (1.0 - f) + sp_grid[i + 1] * f
    return -2.0 * b / max(z, z_lo) - a / max(1.0 - z, 1.0 - z_hi) + sp


def sde_ensemble(kind, a, b, theta0, dt, eps_coll, t_max, keys,
                 rec_times=None, core=None):
    """Euler-Maruyama ensembles of the interacting angle SDEs.

    kind: 0 radial Bessel, 1 chordal one-chord, 2 chordal two-chord
    (near pattern), 3 chordal two-chord (far pattern).  ``theta0`` is
    (2N,) or (n_paths, 2N); ``keys`` is (n_paths, 4) uint64.  Returns
    (T, status, rec) where status is 0 for censored-alive and 1 for
    collision, and rec[(i, m)] holds theta at rec_times[m] (nan once the
    path has died).
    """
    keys = np.asarray(keys, dtype=np.uint64)
    n_paths = keys.shape[0]
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.ndim == 1:
        theta0 = np.broadcast_to(theta0, (n_paths, theta0.size))
    n = theta0.shape[1]
    rec_times = np.asarray(rec_times, dtype=float) if rec_times is not None else np.empty(0)
    T = np.empty(n_paths)
    status = np.zeros(n_paths, dtype=np.int8)
    rec = np.full((n_paths, rec_times.size, n), np.nan)

    for i in range(n_paths):
        rng = Xoshiro(keys[i])
        th = theta0[i].copy()
        t = 0.0
        m = 0
        while True:
            gaps = np.diff(np.concatenate([th, [th[0] + math.pi]]))
            mgap = gaps.min()
            if mgap < eps_coll:
                T[i] = t
                status[i] = 1
                break
            while m < rec_times.size and t >= rec_times[m] - 1e-12:
                rec[i, m] = th
                m += 1
            if t >= t_max - 1e-15:
                T[i] = t_max
                break
            dt_eff = min(dt, mgap * mgap / 4.0, t_max - t)
            if m < rec_times.size:
                dt_eff = min(dt_eff, rec_times[m] - t)
            drift = _drift(th, kind, a, b, core)
            cap = mgap / (4.0 * dt_eff)
            np.clip(drift, -cap, cap, out=drift)
            for j in range(n):
                th[j] += drift[j] * dt_eff + math.sqrt(dt_eff) * rng.normal()
            t += dt_eff
    return T, status, rec


# ---------------------------------------------------------------------------
# radial slit maps


def backward_map(z, xi, s):
    """Inverse elementary map (adds the slit of capacity parameter s = a*delta
    at driving angle xi); works on complex arrays strictly inside the disk."""
    z = np.asarray(z, dtype=complex)
    rot = np.exp(-2j * xi)
    v = z * rot
    Q = math.exp(2.0 * s) * (v + 1.0) ** 2 / v
    d = np.sqrt((Q - 2.0) ** 2 - 4.0)
    r = 0.5 * ((Q - 2.0) + d)
    big = np.abs(r) > 1.0
    r = np.where(big, ((Q - 2.0) - d) * 0.5, r)
    return r / rot


def forward_map(z, xi, s):
    """Forward elementary map (removes the slit); complex arrays in the
    slit-complement."""
    z = np.asarray(z, dtype=complex)
    rot = np.exp(-2j * xi)
    v = z * rot
    Q = math.exp(-2.0 * s) * (v + 1.0) ** 2 / v
    d = np.sqrt((Q - 2.0) ** 2 - 4.0)
    r = 0.5 * ((Q - 2.0) + d)
    big = np.abs(r) > 1.0
    r = np.where(big, ((Q - 2.0) - d) * 0.5, r)
    return r / rot


def backward_eval(centers, caps, z):
    """Image of z under the inverse of the composed chain (newest map first)."""
    out = np.asarray(z, dtype=complex).copy()
    for i in range(len(centers) - 1, -1, -1):
        out = backward_map(out, centers[i], caps[i])
    return out


def forward_eval(centers, caps, z):
    out = np.asarray(z, dtype=complex).copy()
    for i in range(len(centers)):
        out = forward_map(out, centers[i], caps[i])
    return out


def transport_angle(phi, xi, s):
    """Forward boundary (covering) map of an angle, and its derivative.

    Returns the transported angle (mod pi representative near xi) and the
    boundary derivative, which lies in (0, 1].
    """
    E = math.exp(-s)
    d = phi - xi
    d = (d + 0.5 * math.pi) % math.pi - 0.5 * math.pi  # wrap to [-pi/2, pi/2)
    c = E * math.cos(d)
    h = math.copysign(math.acos(max(-1.0, min(1.0, c))), d if d != 0 else 1.0)
    sq = math.sqrt(max(1e-300, 1.0 - c * c))
    deriv = E * abs(math.sin(d)) / sq
    out = xi + h
    # keep the representative closest to the original unwrapped angle
    out += math.pi * round((phi - out) / math.pi)
    return out, deriv


def green_trace(a, b, theta0, dt, eps_coll, t_max, rmin_stop, keys,
                trace_every=1, max_steps=200000):
    """Fused chordal one-chord driver + trace min-distance kernel.

    Simulates the two-angle chordal driving SDE, grows both curve tips as
    a radial Loewner chain (round-robin sub-steps of dt/2), samples both
    tip positions every ``trace_every`` steps by backward composition and
    records the minimum distance to the origin.  Stops at collision, at
    t_max, or once the minimum drops below rmin_stop.

    Returns (T, status, min_dist); status 0 = reached t_max, 1 = collision
    (tips met, chord complete), 2 = stopped after diving below rmin_stop.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    n_paths = keys.shape[0]
    theta0 = np.asarray(theta0, dtype=float)
    T = np.empty(n_paths)
    status = np.zeros(n_paths, dtype=np.int8)
    min_dist = np.ones(n_paths)

    for i in range(n_paths):
        rng = Xoshiro(keys[i])
        th = theta0.copy()
        t = 0.0
        centers: list[float] = []
        caps: list[float] = []
        md = 1.0
        step = 0
        while True:
            gap = min(th[1] - th[0], th[0] + math.pi - th[1])
            if gap < eps_coll:
                status[i] = 1
                break
            if md <= rmin_stop:
                status[i] = 2
                break
            if t >= t_max - 1e-15 or step >= max_steps:
                break
            dt_eff = min(dt, gap * gap / 4.0, t_max - t)
            # loewner growth at current angles: 2N rounds of dt/2N each
            sub = dt_eff / 2.0
            loc = th.copy()
            for _ in range(2):
                for j in range(2):
                    centers.append(loc[j])
                    caps.append(a * sub)
                    k = 1 - j
                    loc[k], _d = transport_angle(loc[k], loc[j], a * sub)
            # driving update
            cot = 1.0 / math.tan(th[0] - th[1])
            drift0 = (a - 2.0 * b) * cot
            drift1 = -(a - 2.0 * b) * cot
            cap = gap / (4.0 * dt_eff)
            drift0 = max(-cap, min(cap, drift0))
            drift1 = max(-cap, min(cap, drift1))
            th[0] += drift0 * dt_eff + math.sqrt(dt_eff) * rng.normal()
            th[1] += drift1 * dt_eff + math.sqrt(dt_eff) * rng.normal()
            t += dt_eff
            step += 1
            if step % trace_every == 0:
                tips = (1.0 - 1e-12) * np.exp(2j * th)
                pts = backward_eval(centers, caps, tips)
                md = min(md, float(np.min(np.abs(pts))))
        T[i] = min(t, t_max)
        min_dist[i] = md
    return T, status, min_dist


# ---------------------------------------------------------------------------
# lattice kernels (numpy; distribution-equivalent to the compiled ones)


def sw_sweep(spin, site_kind, er, eu, p_open, rng):
    """One Swendsen-Wang sweep respecting clamped sites.

    site_kind: 0 = free spin, 1 = clamped, 2 = absent.  er/eu mark the
    presence of the couplings to the right/up neighbor.  Clusters
    containing a clamped site keep their spin; the rest flip with
    probability 1/2.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    H, W = spin.shape
    n = H * W
    idx = np.arange(n).reshape(H, W)
    act = site_kind != 2

    bonds_r = (er == 1) & (spin[:, :-1] == spin[:, 1:])
    bonds_u = (eu == 1) & (spin[:-1, :] == spin[1:, :])
    bonds_r &= rng.random(bonds_r.shape) < p_open
    bonds_u &= rng.random(bonds_u.shape) < p_open

    src = np.concatenate([idx[:, :-1][bonds_r], idx[:-1, :][bonds_u]])
    dst = np.concatenate([idx[:, 1:][bonds_r], idx[1:, :][bonds_u]])
    g = coo_matrix((np.ones(src.size, dtype=np.int8), (src, dst)), shape=(n, n))
    ncomp, labels = connected_components(g, directed=False)

    clamped_labels = np.unique(labels.reshape(H, W)[site_kind == 1])
    flip_lab = rng.random(ncomp) < 0.5
    flip_lab[clamped_labels] = False
    flip = flip_lab[labels].reshape(H, W) & act
    spin[flip] = -spin[flip]


def heatbath_sweep(spin, site_kind, er, eu, beta, rng):
    """One raster-order single-site heat-bath sweep."""
    H, W = spin.shape
    u = rng.random((H, W))
    for y in range(H):
        for x in range(W):
            if site_kind[y, x] != 0:
                continue
            field = 0
            if x > 0 and er[y, x - 1] and site_kind[y, x - 1] != 2:
                field += spin[y, x - 1]
            if x < W - 1 and er[y, x] and site_kind[y, x + 1] != 2:
                field += spin[y, x + 1]
            if y > 0 and eu[y - 1, x] and site_kind[y - 1, x] != 2:
                field += spin[y - 1, x]
            if y < H - 1 and eu[y, x] and site_kind[y + 1, x] != 2:
                field += spin[y + 1, x]
            p_up = 1.0 / (1.0 + math.exp(-2.0 * beta * field))
            spin[y, x] = 1 if u[y, x] < p_up else -1


# interface tracing works on the primal corner lattice; vertices are
# (y, x) corners of the face grid, faces are indexed by their lower-left
# corner.  Directions: 0=+x, 1=+y, 2=-x, 3=-y.
_DX = (1, 0, -1, 0)
_DY = (0, 1, 0, -1)


def _face_left(y, x, d):
    # face on the left of the directed edge from (y,x) in direction d
    if d == 0:
        return (y, x)
    if d == 1:
        return (y, x - 1)
    if d == 2:
        return (y - 1, x - 1)
    return (y - 1, x)


def _face_right(y, x, d):
    if d == 0:
        return (y - 1, x)
    if d == 1:
        return (y, x)
    if d == 2:
        return (y, x - 1)
    return (y - 1, x - 1)


def trace_interface(spin, site_kind, start, start_dir, want_left,
                    vertex_mark, max_steps=4_000_000):
    """Deterministic interface walk on primal edges.

    Walks from ``start`` in direction ``start_dir`` keeping spin
    ``want_left`` on the left.  At an ambiguous corner turn preference is
    left for want_left=+1 walks and right for want_left=-1 (the odd/even
    start-point convention).  Stops at a vertex with vertex_mark >= 0 (a
    marked point) or when the next edge would border a missing face (the
    free inner hole).  Returns (path_vertices, end_tag) with end_tag the
    mark index, or -1 for the inner boundary.
    """
    H, W = spin.shape

    def face_spin(f):
        y, x = f
        if y < 0 or x < 0 or y >= H or x >= W:
            return 0  # outside the arrays: nothing there
        if site_kind[y, x] == 2:
            return 0  # hole
        return spin[y, x]

    y, x = start
    d = start_dir
    path = [(y, x)]
    for _ in range(max_steps):
        y += _DY[d]
        x += _DX[d]
        path.append((y, x))
        tag = vertex_mark[y, x]
        if tag >= 0 and len(path) > 1:
            return path, int(tag)
        # candidate continuations in turn preference order
        if want_left > 0:
            turns = (1, 0, 3)  # left, straight, right
        else:
            turns = (3, 0, 1)
        chosen = -1
        hole_hit = False
        for turn in turns:
            nd = (d + turn) % 4
            lf = face_spin(_face_left(y, x, nd))
            rf = face_spin(_face_right(y, x, nd))
            if lf == 0 and rf == 0:
                continue
            if lf == 0 or rf == 0:
                hole_hit = hole_hit or (lf == want_left or rf == -want_left)
                continue
            if lf == want_left and rf == -want_left:
                chosen = nd
                break
        if chosen < 0:
            return path, -1 if hole_hit else -2
        d = chosen
    raise RuntimeError("interface walk exceeded max_steps")
