# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: kernel power series, nearest neighbours, projection sampler."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, atan2, cos, exp, floor, isinf, log, sin, sqrt

from .errors import EnvelopeError

cnp.import_array()

# terms below max - _SKIP contribute < 1e-17 relative
cdef double _SKIP = 40.0


def log_kernel_series(const double[::1] log_abs_w, const double[::1] arg_w,
                      const double[::1] log_c):
    """Log-modulus and phase of ``sum_n w**n / c_n`` for each ``w``.

    Two passes per point: the first finds the largest term, the second sums
    the rescaled terms so nothing overflows.
    """
    cdef Py_ssize_t m = log_abs_w.shape[0], N = log_c.shape[0], i, n
    cdef double law, th, t, top, re, im, mag
    out_mod = np.empty(m)
    out_arg = np.empty(m)
    cdef double[::1] om = out_mod, oa = out_arg
    with nogil:
        for i in range(m):
            law = log_abs_w[i]
            if isinf(law) and law < 0:
                om[i] = -log_c[0]
                oa[i] = 0.0
                continue
            th = arg_w[i]
            top = -INFINITY
            for n in range(N):
                t = n * law - log_c[n]
                if t > top:
                    top = t
            re = 0.0
            im = 0.0
            for n in range(N):
                t = n * law - log_c[n] - top
                if t < -_SKIP:
                    continue
                mag = exp(t)
                re += mag * cos(n * th)
                im += mag * sin(n * th)
            om[i] = top + 0.5 * log(re * re + im * im)
            oa[i] = atan2(im, re)
    return out_mod, out_arg


def nn_distances(x_in, y_in):
    """Nearest-neighbour distance and index for each planar point.

    Points are bucketed on a square grid with about one point per cell.  For
    each point, rings of cells at growing Chebyshev distance ``k`` are scanned
    until the best distance found is at most ``k`` cell widths, which
    guarantees that no unscanned cell can hold a closer point.
    """
    cdef double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    dist = np.full(n, np.inf)
    idx = np.full(n, -1, dtype=np.intp)
    if n < 2:
        return dist, idx
    cdef double xmin = np.min(x_in), ymin = np.min(y_in)
    cdef double xmax = np.max(x_in), ymax = np.max(y_in)
    cdef double span = max(xmax - xmin, ymax - ymin)
    if span == 0:
        dist[:] = 0.0
        idx[:] = np.r_[1, np.zeros(n - 1, dtype=np.intp)]
        return dist, idx
    cdef double area = max((xmax - xmin) * (ymax - ymin), span * span / n)
    cdef double h = sqrt(area / n)
    cdef Py_ssize_t nx = <Py_ssize_t>((xmax - xmin) / h) + 1
    cdef Py_ssize_t ny = <Py_ssize_t>((ymax - ymin) / h) + 1
    cdef cnp.intp_t[::1] cx = np.empty(n, dtype=np.intp)
    cdef cnp.intp_t[::1] cy = np.empty(n, dtype=np.intp)
    cdef cnp.intp_t[::1] start = np.zeros(nx * ny + 1, dtype=np.intp)
    cdef cnp.intp_t[::1] order = np.empty(n, dtype=np.intp)
    cdef cnp.intp_t[::1] fill
    cdef double[::1] dv = dist
    cdef cnp.intp_t[::1] iv = idx
    cdef Py_ssize_t i, j, c, k, a, b, p, kmax
    cdef double best, dx, dy, d2
    cdef cnp.intp_t bj
    for i in range(n):
        cx[i] = min(<Py_ssize_t>((x[i] - xmin) / h), nx - 1)
        cy[i] = min(<Py_ssize_t>((y[i] - ymin) / h), ny - 1)
        start[cy[i] * nx + cx[i] + 1] += 1
    for c in range(nx * ny):
        start[c + 1] += start[c]
    fill = np.array(start[:nx * ny], dtype=np.intp)
    for i in range(n):
        c = cy[i] * nx + cx[i]
        order[fill[c]] = i
        fill[c] += 1
    kmax = max(nx, ny)
    with nogil:
        for i in range(n):
            best = INFINITY
            bj = -1
            for k in range(kmax + 1):
                for b in range(cy[i] - k, cy[i] + k + 1):
                    if b < 0 or b >= ny:
                        continue
                    for a in range(cx[i] - k, cx[i] + k + 1):
                        if a < 0 or a >= nx:
                            continue
                        if b != cy[i] - k and b != cy[i] + k and a != cx[i] - k and a != cx[i] + k:
                            continue
                        c = b * nx + a
                        for p in range(start[c], start[c + 1]):
                            j = order[p]
                            if j == i:
                                continue
                            dx = x[j] - x[i]
                            dy = y[j] - y[i]
                            d2 = dx * dx + dy * dy
                            if d2 < best or (d2 == best and j < bj):
                                best = d2
                                bj = j
                if bj >= 0 and sqrt(best) <= k * h:
                    break
            dv[i] = sqrt(best)
            iv[i] = bj
    return dist, idx


def hkpv_first_accept(const double[::1] log_r, const double[::1] theta,
                      const double[::1] half_log_mu, const double[::1] bound,
                      const double[::1] u, const double[::1] log_c,
                      const double complex[:, ::1] V, Py_ssize_t k):
    """First proposal accepted by the projection sampler at step ``k``.

    See the numpy fallback for the exact contract.  Features are built by
    the recurrence ``g_n = g_{n-1} z exp(-(log c_n - log c_{n-1}) / 2)``,
    restarted from the closed form while they are below the underflow range.
    """
    cdef Py_ssize_t B = log_r.shape[0], N = log_c.shape[0], b, n, j
    gr_arr = np.empty(N)
    gi_arr = np.empty(N)
    cdef double[::1] gr = gr_arr, gi = gi_arr
    cdef double lg, p, ph, wr, wi, step, ar, ai, qr, qi, tr, ti
    cdef int violated = 0, live
    cdef Py_ssize_t hit = -1
    with nogil:
        for b in range(B):
            wr = cos(theta[b])
            wi = sin(theta[b])
            lg = half_log_mu[b] - 0.5 * log_c[0]
            live = 0
            for n in range(N):
                if n > 0:
                    step = log_r[b] - 0.5 * (log_c[n] - log_c[n - 1])
                    lg = lg + step
                if lg < -700.0:
                    gr[n] = 0.0
                    gi[n] = 0.0
                    live = 0
                elif live:
                    step = exp(step)
                    tr = gr[n - 1] * step
                    ti = gi[n - 1] * step
                    gr[n] = tr * wr - ti * wi
                    gi[n] = tr * wi + ti * wr
                else:
                    ph = n * theta[b]
                    step = exp(lg)
                    gr[n] = step * cos(ph)
                    gi[n] = step * sin(ph)
                    live = 1
            for j in range(k):
                # a = <v_j, g>, then g -= a v_j
                ar = 0.0
                ai = 0.0
                for n in range(N):
                    qr = V[j, n].real
                    qi = V[j, n].imag
                    ar = ar + qr * gr[n] + qi * gi[n]
                    ai = ai + qr * gi[n] - qi * gr[n]
                for n in range(N):
                    qr = V[j, n].real
                    qi = V[j, n].imag
                    gr[n] = gr[n] - (qr * ar - qi * ai)
                    gi[n] = gi[n] - (qr * ai + qi * ar)
            p = 0.0
            for n in range(N):
                p += gr[n] * gr[n] + gi[n] * gi[n]
            if p > bound[b] * (1.0 + 1e-9):
                violated = 1
                break
            if u[b] * bound[b] <= p:
                hit = b
                break
    if violated:
        raise EnvelopeError("conditional density exceeds the rejection envelope")
    if hit < 0:
        return -1, None
    return hit, gr_arr + 1j * gi_arr
