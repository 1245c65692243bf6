# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: interacting-angle SDE ensembles, radial slit-map
evaluation, the fused chordal trace driver, and critical Ising sweeps.

Bit-compatible with mclab._fallback for the SDE/Loewner entry points
(same RNG streams, same operation order).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport (M_PI, acos, atan, ceil, cos, exp, fabs, log, round,
                        sin, sqrt, tan)
from libc.stdint cimport int8_t, int32_t, uint8_t, uint64_t

cnp.import_array()

cdef extern from "complex.h" nogil:
    double complex csqrt(double complex)
    double complex cexp(double complex)
    double cabs(double complex)
    double creal(double complex)
    double cimag(double complex)


# ---------------------------------------------------------------------------
# RNG: xoshiro256++ with Box-Muller normals

cdef struct RngState:
    uint64_t s0, s1, s2, s3
    double spare
    int has_spare


cdef inline uint64_t _rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline void rng_init(RngState* r, uint64_t k0, uint64_t k1,
                          uint64_t k2, uint64_t k3) nogil:
    if k0 == 0 and k1 == 0 and k2 == 0 and k3 == 0:
        k0 = <uint64_t>0x9E3779B97F4A7C15
        k1 = 1; k2 = 2; k3 = 3
    r.s0 = k0; r.s1 = k1; r.s2 = k2; r.s3 = k3
    r.spare = 0.0
    r.has_spare = 0


cdef inline uint64_t rng_u64(RngState* r) nogil:
    cdef uint64_t result = _rotl(r.s0 + r.s3, 23) + r.s0
    cdef uint64_t t = r.s1 << 17
    r.s2 ^= r.s0
    r.s3 ^= r.s1
    r.s1 ^= r.s2
    r.s0 ^= r.s3
    r.s2 ^= t
    r.s3 = _rotl(r.s3, 45)
    return result


DEF UNIT53 = 1.1102230246251565404236316680908203125e-16  # 2^-53


cdef inline double rng_uniform(RngState* r) nogil:
    return <double>((rng_u64(r) >> 11) + 1) * UNIT53


cdef inline double rng_normal(RngState* r) nogil:
    cdef double u1, u2, rad
    if r.has_spare:
        r.has_spare = 0
        return r.spare
    u1 = rng_uniform(r)
    u2 = rng_uniform(r)
    rad = sqrt(-2.0 * log(u1))
    r.spare = rad * sin(2.0 * M_PI * u2)
    r.has_spare = 1
    return rad * cos(2.0 * M_PI * u2)


# ---------------------------------------------------------------------------
# elementary radial slit maps

cdef inline double complex _slit_root(double complex Q) nogil:
    cdef double complex d = csqrt((Q - 2.0) * (Q - 2.0) - 4.0)
    cdef double complex r = 0.5 * ((Q - 2.0) + d)
    if cabs(r) > 1.0:
        r = 0.5 * ((Q - 2.0) - d)
    return r


cdef inline double complex map_backward(double complex z, double xi, double s) nogil:
    cdef double complex rot = cexp(-2j * xi)
    cdef double complex v = z * rot
    cdef double complex Q = exp(2.0 * s) * (v + 1.0) * (v + 1.0) / v
    return _slit_root(Q) / rot


cdef inline double complex map_forward(double complex z, double xi, double s) nogil:
    cdef double complex rot = cexp(-2j * xi)
    cdef double complex v = z * rot
    cdef double complex Q = exp(-2.0 * s) * (v + 1.0) * (v + 1.0) / v
    return _slit_root(Q) / rot


cdef inline double transport(double phi, double xi, double s, double* deriv) nogil:
    cdef double E = exp(-s)
    cdef double d = phi - xi
    cdef double c, h, sq, out
    d = (d + 0.5 * M_PI) % M_PI
    if d < 0:
        d += M_PI
    d -= 0.5 * M_PI
    c = E * cos(d)
    if c > 1.0:
        c = 1.0
    elif c < -1.0:
        c = -1.0
    h = acos(c)
    if d < 0:
        h = -h
    sq = sqrt(1.0 - c * c)
    if sq < 1e-150:
        sq = 1e-150
    deriv[0] = E * fabs(sin(d)) / sq
    out = xi + h
    out += M_PI * round((phi - out) / M_PI)
    return out


def backward_eval(double[::1] centers, double[::1] caps, z):
    """Image of z under the inverse of the composed chain (newest map first)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = \
        np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=complex)))
    out = out.copy()
    cdef double complex[::1] ov = out
    cdef Py_ssize_t i, j, K = centers.shape[0], M = ov.shape[0]
    with nogil:
        for j in range(M):
            for i in range(K - 1, -1, -1):
                ov[j] = map_backward(ov[j], centers[i], caps[i])
    return out


def forward_eval(double[::1] centers, double[::1] caps, z):
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = \
        np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=complex)))
    out = out.copy()
    cdef double complex[::1] ov = out
    cdef Py_ssize_t i, j, K = centers.shape[0], M = ov.shape[0]
    with nogil:
        for j in range(M):
            for i in range(K):
                ov[j] = map_forward(ov[j], centers[i], caps[i])
    return out


def transport_angle(double phi, double xi, double s):
    cdef double deriv
    cdef double out = transport(phi, xi, s, &deriv)
    return out, deriv


# ---------------------------------------------------------------------------
# SDE drifts

cdef inline double _interp_sp(double z, double z_lo, double z_hi,
                              double[::1] sp) nogil:
    cdef double zc = z
    cdef double x
    cdef Py_ssize_t i
    cdef double f
    if zc < z_lo:
        zc = z_lo
    elif zc > z_hi:
        zc = z_hi
    x = (zc - z_lo) / (z_hi - z_lo) * (sp.shape[0] - 1)
    i = <Py_ssize_t>x
    if i > sp.shape[0] - 2:
        i = sp.shape[0] - 2
    f = x - i
    return sp[i] * (1.0 - f) + sp[i + 1] * f


cdef inline double _dlog_core(double z, double z_lo, double z_hi,
                              double[::1] sp, double a, double b) nogil:
    cdef double zm = z if z > z_lo else z_lo
    cdef double um = 1.0 - z
    cdef double um_min = 1.0 - z_hi
    if um < um_min:
        um = um_min
    return -2.0 * b / zm - a / um + _interp_sp(z, z_lo, z_hi, sp)


cdef void _drift(double* th, int n, int kind, double a, double b,
                 double z_lo, double z_hi, double[::1] sp, double* out) nogil:
    cdef int j, k
    cdef double s
    cdef double w[4]
    cdef double sj[4]
    cdef double dz[4]
    cdef double c, z, dl
    for j in range(n):
        s = 0.0
        for k in range(n):
            if k != j:
                s += 1.0 / tan(th[j] - th[k])
        if kind == 0:
            out[j] = 2.0 * a * s
        elif kind == 1:
            out[j] = (a - 2.0 * b) * s
        else:
            out[j] = a * s
    if kind == 2 or kind == 3:
        c = 0.5 * (th[0] + th[3])
        for j in range(4):
            w[j] = tan(th[j] - c)
            sj[j] = 1.0 + w[j] * w[j]
        z = (w[1] - w[0]) * (w[3] - w[2]) / ((w[2] - w[0]) * (w[3] - w[1]))
        for j in range(4):
            out[j] += 2.0 * b * w[j]
        out[0] += 2.0 * b * sj[0] / (w[2] - w[0])
        out[2] -= 2.0 * b * sj[2] / (w[2] - w[0])
        out[1] += 2.0 * b * sj[1] / (w[3] - w[1])
        out[3] -= 2.0 * b * sj[3] / (w[3] - w[1])
        for j in range(4):
            dz[j] = 0.0
        dz[0] -= 1.0 / (w[1] - w[0]); dz[1] += 1.0 / (w[1] - w[0])
        dz[2] -= 1.0 / (w[3] - w[2]); dz[3] += 1.0 / (w[3] - w[2])
        dz[0] += 1.0 / (w[2] - w[0]); dz[2] -= 1.0 / (w[2] - w[0])
        dz[1] += 1.0 / (w[3] - w[1]); dz[3] -= 1.0 / (w[3] - w[1])
        for j in range(4):
            dz[j] *= sj[j] * z
        if kind == 3:
            dl = _dlog_core(1.0 - z, z_lo, z_hi, sp, a, b)
            for j in range(4):
                out[j] += dl * (-dz[j])
        else:
            dl = _dlog_core(z, z_lo, z_hi, sp, a, b)
            for j in range(4):
                out[j] += dl * dz[j]


def sde_ensemble(int kind, double a, double b, theta0, double dt,
                 double eps_coll, double t_max, keys, rec_times=None,
                 core=None):
    """See mclab._fallback.sde_ensemble (identical semantics and streams)."""
    cdef cnp.ndarray[cnp.uint64_t, ndim=2] K = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Py_ssize_t n_paths = K.shape[0]
    th0 = np.asarray(theta0, dtype=float)
    if th0.ndim == 1:
        th0 = np.broadcast_to(th0, (n_paths, th0.size))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] TH0 = np.ascontiguousarray(th0)
    cdef int n = <int>TH0.shape[1]
    rt = np.asarray(rec_times, dtype=float) if rec_times is not None else np.empty(0)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] RT = np.ascontiguousarray(rt)
    cdef Py_ssize_t n_rec = RT.shape[0]

    cdef cnp.ndarray[cnp.float64_t, ndim=1] T = np.empty(n_paths)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] status = np.zeros(n_paths, dtype=np.int8)
    cdef cnp.ndarray[cnp.float64_t, ndim=3] rec = np.full((n_paths, n_rec, n), np.nan)

    cdef double z_lo = 0.0, z_hi = 1.0
    cdef double[::1] sp
    if core is not None:
        z_lo, z_hi = core[0], core[1]
        sp = np.ascontiguousarray(core[2], dtype=float)
    else:
        sp = np.zeros(2)

    cdef double[:, ::1] th0v = TH0
    cdef double[:, :, ::1] recv = rec
    cdef double[::1] Tv = T
    cdef int8_t[::1] stv = status
    cdef double[::1] rtv = RT
    cdef uint64_t[:, ::1] kv = K

    cdef RngState rng
    cdef Py_ssize_t i, m
    cdef int j, k
    cdef double th[16]
    cdef double drift[16]
    cdef double t, mgap, g, dt_eff, cap
    with nogil:
        for i in range(n_paths):
            rng_init(&rng, kv[i, 0], kv[i, 1], kv[i, 2], kv[i, 3])
            for j in range(n):
                th[j] = th0v[i, j]
            t = 0.0
            m = 0
            while True:
                mgap = th[0] + M_PI - th[n - 1]
                for j in range(n - 1):
                    g = th[j + 1] - th[j]
                    if g < mgap:
                        mgap = g
                if mgap < eps_coll:
                    Tv[i] = t
                    stv[i] = 1
                    break
                while m < n_rec and t >= rtv[m] - 1e-12:
                    for j in range(n):
                        recv[i, m, j] = th[j]
                    m += 1
                if t >= t_max - 1e-15:
                    Tv[i] = t_max
                    break
                dt_eff = dt
                if mgap * mgap / 4.0 < dt_eff:
                    dt_eff = mgap * mgap / 4.0
                if t_max - t < dt_eff:
                    dt_eff = t_max - t
                if m < n_rec and rtv[m] - t < dt_eff:
                    dt_eff = rtv[m] - t
                _drift(th, n, kind, a, b, z_lo, z_hi, sp, drift)
                cap = mgap / (4.0 * dt_eff)
                for j in range(n):
                    if drift[j] > cap:
                        drift[j] = cap
                    elif drift[j] < -cap:
                        drift[j] = -cap
                for j in range(n):
                    th[j] += drift[j] * dt_eff + sqrt(dt_eff) * rng_normal(&rng)
                t += dt_eff
    return T, status, rec


def green_trace(double a, double b, theta0, double dt, double eps_coll,
                double t_max, double rmin_stop, keys, int trace_every=1,
                int max_steps=200000):
    """See mclab._fallback.green_trace (identical semantics and streams)."""
    cdef cnp.ndarray[cnp.uint64_t, ndim=2] K = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Py_ssize_t n_paths = K.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] TH0 = np.ascontiguousarray(theta0, dtype=float)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] T = np.empty(n_paths)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] status = np.zeros(n_paths, dtype=np.int8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] min_dist = np.ones(n_paths)

    cdef cnp.ndarray[cnp.float64_t, ndim=1] centers_a = np.empty(4 * max_steps)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] caps_a = np.empty(4 * max_steps)
    cdef double[::1] centers = centers_a
    cdef double[::1] caps = caps_a
    cdef double[::1] Tv = T
    cdef int8_t[::1] stv = status
    cdef double[::1] mdv = min_dist
    cdef double[::1] th0v = TH0
    cdef uint64_t[:, ::1] kv = K

    cdef RngState rng
    cdef Py_ssize_t i
    cdef int step, top, r, j, k, q
    cdef double th[2]
    cdef double loc[2]
    cdef double t, gap, dt_eff, sub, cot, drift0, drift1, cap, md, dval, dist
    cdef double complex tip
    with nogil:
        for i in range(n_paths):
            rng_init(&rng, kv[i, 0], kv[i, 1], kv[i, 2], kv[i, 3])
            th[0] = th0v[0]
            th[1] = th0v[1]
            t = 0.0
            top = 0
            md = 1.0
            step = 0
            stv[i] = 0
            while True:
                gap = th[1] - th[0]
                if th[0] + M_PI - th[1] < gap:
                    gap = th[0] + M_PI - th[1]
                if gap < eps_coll:
                    stv[i] = 1
                    break
                if md <= rmin_stop:
                    stv[i] = 2
                    break
                if t >= t_max - 1e-15 or step >= max_steps:
                    break
                dt_eff = dt
                if gap * gap / 4.0 < dt_eff:
                    dt_eff = gap * gap / 4.0
                if t_max - t < dt_eff:
                    dt_eff = t_max - t
                sub = dt_eff / 2.0
                loc[0] = th[0]
                loc[1] = th[1]
                for r in range(2):
                    for j in range(2):
                        centers[top] = loc[j]
                        caps[top] = a * sub
                        top += 1
                        k = 1 - j
                        loc[k] = transport(loc[k], loc[j], a * sub, &dval)
                cot = 1.0 / tan(th[0] - th[1])
                drift0 = (a - 2.0 * b) * cot
                drift1 = -(a - 2.0 * b) * cot
                cap = gap / (4.0 * dt_eff)
                if drift0 > cap:
                    drift0 = cap
                elif drift0 < -cap:
                    drift0 = -cap
                if drift1 > cap:
                    drift1 = cap
                elif drift1 < -cap:
                    drift1 = -cap
                th[0] += drift0 * dt_eff + sqrt(dt_eff) * rng_normal(&rng)
                th[1] += drift1 * dt_eff + sqrt(dt_eff) * rng_normal(&rng)
                t += dt_eff
                step += 1
                if step % trace_every == 0:
                    for j in range(2):
                        tip = (1.0 - 1e-12) * cexp(2j * th[j])
                        for q in range(top - 1, -1, -1):
                            tip = map_backward(tip, centers[q], caps[q])
                        dist = cabs(tip)
                        if dist < md:
                            md = dist
            Tv[i] = t if t < t_max else t_max
            mdv[i] = md
    return T, status, min_dist


# ---------------------------------------------------------------------------
# Ising kernels

cdef inline int32_t uf_find(int32_t[::1] parent, int32_t x) nogil:
    cdef int32_t root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        x, parent[x] = parent[x], root
    return root


def sw_sweep(int8_t[:, ::1] spin, int8_t[:, ::1] kind,
             uint8_t[:, ::1] er, uint8_t[:, ::1] eu,
             double p_open, key):
    """One Swendsen-Wang sweep; clamped clusters keep their spin.

    Deterministic given ``key`` (uint64[4]): bond uniforms are consumed in
    raster order (right edge then up edge per site), flip uniforms at the
    minimal site index of each unclamped cluster, ascending.
    """
    cdef Py_ssize_t H = spin.shape[0], W = spin.shape[1]
    cdef cnp.ndarray[cnp.int32_t, ndim=1] parent_a = np.arange(H * W, dtype=np.int32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] cl_a = np.zeros(H * W, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] flip_a = np.zeros(H * W, dtype=np.int8)
    cdef int32_t[::1] parent = parent_a
    cdef uint8_t[::1] clamped = cl_a
    cdef int8_t[::1] flip = flip_a
    cdef RngState rng
    cdef uint64_t[::1] kv = np.ascontiguousarray(key, dtype=np.uint64)
    rng_init(&rng, kv[0], kv[1], kv[2], kv[3])

    cdef Py_ssize_t y, x, i, j2
    cdef int32_t ra, rb, rmin, rmax
    with nogil:
        for y in range(H):
            for x in range(W):
                i = y * W + x
                if kind[y, x] == 1:
                    clamped[i] = 1
        for y in range(H):
            for x in range(W):
                i = y * W + x
                if kind[y, x] == 2:
                    continue
                if x < W - 1 and er[y, x] and kind[y, x + 1] != 2 \
                        and spin[y, x] == spin[y, x + 1]:
                    if rng_uniform(&rng) < p_open:
                        ra = uf_find(parent, <int32_t>i)
                        rb = uf_find(parent, <int32_t>(i + 1))
                        if ra != rb:
                            rmin = ra if ra < rb else rb
                            rmax = rb if ra < rb else ra
                            parent[rmax] = rmin
                            if clamped[rmax]:
                                clamped[rmin] = 1
                if y < H - 1 and eu[y, x] and kind[y + 1, x] != 2 \
                        and spin[y, x] == spin[y + 1, x]:
                    if rng_uniform(&rng) < p_open:
                        ra = uf_find(parent, <int32_t>i)
                        rb = uf_find(parent, <int32_t>(i + W))
                        if ra != rb:
                            rmin = ra if ra < rb else rb
                            rmax = rb if ra < rb else ra
                            parent[rmax] = rmin
                            if clamped[rmax]:
                                clamped[rmin] = 1
        # roots are minimal site indices by construction (union by min)
        for i in range(H * W):
            if parent[i] == i:
                if clamped[i]:
                    flip[i] = 0
                else:
                    flip[i] = 1 if rng_uniform(&rng) < 0.5 else 0
        for y in range(H):
            for x in range(W):
                i = y * W + x
                if kind[y, x] == 0 and flip[uf_find(parent, <int32_t>i)]:
                    spin[y, x] = -spin[y, x]


def heatbath_sweep(int8_t[:, ::1] spin, int8_t[:, ::1] kind,
                   uint8_t[:, ::1] er, uint8_t[:, ::1] eu,
                   double beta, key):
    """One raster-order single-site heat-bath sweep."""
    cdef Py_ssize_t H = spin.shape[0], W = spin.shape[1]
    cdef RngState rng
    cdef uint64_t[::1] kv = np.ascontiguousarray(key, dtype=np.uint64)
    rng_init(&rng, kv[0], kv[1], kv[2], kv[3])
    cdef Py_ssize_t y, x
    cdef int field
    cdef double p_up
    with nogil:
        for y in range(H):
            for x in range(W):
                if kind[y, x] != 0:
                    continue
                field = 0
                if x > 0 and er[y, x - 1] and kind[y, x - 1] != 2:
                    field += spin[y, x - 1]
                if x < W - 1 and er[y, x] and kind[y, x + 1] != 2:
                    field += spin[y, x + 1]
                if y > 0 and eu[y - 1, x] and kind[y - 1, x] != 2:
                    field += spin[y - 1, x]
                if y < H - 1 and eu[y, x] and kind[y + 1, x] != 2:
                    field += spin[y + 1, x]
                p_up = 1.0 / (1.0 + exp(-2.0 * beta * field))
                spin[y, x] = 1 if rng_uniform(&rng) < p_up else -1


def trace_interface(int8_t[:, ::1] spin, int8_t[:, ::1] kind,
                    start, int start_dir, int want_left,
                    int32_t[:, ::1] vertex_mark, int max_steps=4000000):
    """Deterministic interface walk; see mclab._fallback.trace_interface."""
    cdef Py_ssize_t H = spin.shape[0], W = spin.shape[1]
    cdef int y = start[0], x = start[1]
    cdef int d = start_dir
    cdef cnp.ndarray[cnp.int32_t, ndim=2] path = np.empty((max_steps + 1, 2), dtype=np.int32)
    cdef int32_t[:, ::1] pv = path
    cdef int n_pts = 0
    cdef int step, turn, nd, chosen, tag, hole_hit
    cdef int lf, rf, fy, fx
    cdef int dx[4]
    cdef int dy[4]
    dx[0] = 1; dx[1] = 0; dx[2] = -1; dx[3] = 0
    dy[0] = 0; dy[1] = 1; dy[2] = 0; dy[3] = -1
    cdef int end_tag = -3

    pv[0, 0] = y; pv[0, 1] = x
    n_pts = 1
    for step in range(max_steps):
        y += dy[d]
        x += dx[d]
        pv[n_pts, 0] = y; pv[n_pts, 1] = x
        n_pts += 1
        tag = vertex_mark[y, x]
        if tag >= 0:
            end_tag = tag
            break
        chosen = -1
        hole_hit = 0
        for turn in range(3):
            if want_left > 0:
                nd = (d + (1 if turn == 0 else (0 if turn == 1 else 3))) % 4
            else:
                nd = (d + (3 if turn == 0 else (0 if turn == 1 else 1))) % 4
            # faces left/right of the directed edge from (y, x) along nd
            if nd == 0:
                fy = y; fx = x
            elif nd == 1:
                fy = y; fx = x - 1
            elif nd == 2:
                fy = y - 1; fx = x - 1
            else:
                fy = y - 1; fx = x
            lf = 0
            if 0 <= fy < H and 0 <= fx < W and kind[fy, fx] != 2:
                lf = spin[fy, fx]
            if nd == 0:
                fy = y - 1; fx = x
            elif nd == 1:
                fy = y; fx = x
            elif nd == 2:
                fy = y; fx = x - 1
            else:
                fy = y - 1; fx = x - 1
            rf = 0
            if 0 <= fy < H and 0 <= fx < W and kind[fy, fx] != 2:
                rf = spin[fy, fx]
            if lf == 0 and rf == 0:
                continue
            if lf == 0 or rf == 0:
                if lf == want_left or rf == -want_left:
                    hole_hit = 1
                continue
            if lf == want_left and rf == -want_left:
                chosen = nd
                break
        if chosen < 0:
            end_tag = -1 if hole_hit else -2
            break
        d = chosen
    else:
        raise RuntimeError("interface walk exceeded max_steps")
    return np.asarray(path[:n_pts]).copy(), end_tag
