# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled integration kernel (hot lane).

Mirrors ``fdext._kernels_py`` step for step: identical Dormand-Prince 5(4)
tableau, factored right-hand sides, error control and dense-output event
localization. Only the execution speed differs.
"""
import numpy as np

from libc.math cimport sqrt, pow, hypot, fabs, isfinite
from libc.stdlib cimport malloc, realloc, free

from . import _dp5_tableau as _tab

BACKEND_NAME = "compiled"

cdef enum:
    C_SYSTEM_PHASE = 0
    C_SYSTEM_PROFILE = 1
    C_EV_LINEAR = 1
    C_EV_REGION_R = 2
    C_EV_REGION_R0 = 3
    C_EV_NEAR_YZ = 4
    C_EV_NEAR_XYZ = 5

SYSTEM_PHASE = C_SYSTEM_PHASE
SYSTEM_PROFILE = C_SYSTEM_PROFILE

EV_LINEAR = C_EV_LINEAR
EV_REGION_R = C_EV_REGION_R
EV_REGION_R0 = C_EV_REGION_R0
EV_NEAR_YZ = C_EV_NEAR_YZ
EV_NEAR_XYZ = C_EV_NEAR_XYZ

STATUS_DONE = 0
STATUS_TERMINAL = 1
STATUS_UNDERFLOW = 2
STATUS_STEP_CAP = 3

cdef double SAFETY = 0.9
cdef double MIN_FACTOR = 0.2
cdef double MAX_FACTOR = 10.0

cdef double C_NODES[6]
cdef double A_TAB[5][5]
cdef double B_TAB[6]
cdef double E_TAB[7]
cdef double P_TAB[7][4]

def _load_tableau():
    cdef int i, j
    for i in range(6):
        C_NODES[i] = _tab.C[i]
        B_TAB[i] = _tab.B[i]
    for i in range(5):
        for j in range(5):
            A_TAB[i][j] = _tab.A[i][j] if j < len(_tab.A[i]) else 0.0
    for i in range(7):
        E_TAB[i] = _tab.E[i]
        for j in range(4):
            P_TAB[i][j] = _tab.P[i][j]

_load_tableau()


cdef inline bint _rhs(int kind, double* c, double t, double* u,
                      double* out) noexcept nogil:
    cdef double m = c[0]
    cdef double p = c[1]
    cdef double N = c[2]
    cdef double x, y, z, sigma, y_strip, y_q3, z0, f, g, brack
    if kind == C_SYSTEM_PHASE:
        x = u[0]; y = u[1]; z = u[2]
        sigma = c[3]; y_strip = c[4]; y_q3 = c[5]; z0 = c[6]
        out[0] = (1.0 - m) * x * (y - y_strip)
        out[1] = (z - z0) - (y - y_q3) * (
            (N - 2.0) + m * (y + y_q3) + (p - m) / (sigma + 2.0) * x)
        out[2] = (p - m) * z * (y - y_q3)
        return True
    f = u[0]; g = u[1]
    if f <= 0.0 or t <= 0.0:
        return False
    sigma = c[3]
    brack = pow(t, sigma) * pow(f, p) - c[7] * f - c[8] * t * g
    out[0] = g
    out[1] = (1.0 - m) * g * g / f - (N - 1.0) * g / t \
        + brack * pow(f, 1.0 - m) / m
    return True


cdef inline double _event_value(int kind, double* pp, double* u,
                                int dim) noexcept nogil:
    cdef double g
    if kind == C_EV_LINEAR:
        g = pp[0] + pp[1] * u[0] + pp[2] * u[1]
        if dim > 2:
            g += pp[3] * u[2]
        return g
    if kind == C_EV_REGION_R:
        g = u[1] - pp[0]
        if u[2] - pp[1] < g:
            g = u[2] - pp[1]
        return g
    if kind == C_EV_REGION_R0:
        g = u[1]
        if u[2] - u[0] < g:
            g = u[2] - u[0]
        return g
    if kind == C_EV_NEAR_YZ:
        return pp[0] - hypot(u[1] - pp[1], u[2] - pp[2])
    return pp[0] - sqrt((u[0] - pp[1]) * (u[0] - pp[1])
                        + (u[1] - pp[2]) * (u[1] - pp[2])
                        + (u[2] - pp[3]) * (u[2] - pp[3]))


cdef inline bint _crossed(double g_old, double g_new, int direction) noexcept nogil:
    if g_old < 0.0 < g_new:
        return direction >= 0
    if g_old > 0.0 > g_new:
        return direction <= 0
    return False


cdef inline void _dense_coeffs(int dim, double h, double K[7][3],
                               double coef[3][4]) noexcept nogil:
    cdef int d, j, st
    cdef double s
    for d in range(dim):
        for j in range(4):
            s = 0.0
            for st in range(7):
                s += K[st][d] * P_TAB[st][j]
            coef[d][j] = h * s


cdef inline void _dense_eval(double* y_old, double coef[3][4], int dim,
                             double theta, double* out) noexcept nogil:
    cdef int d
    for d in range(dim):
        out[d] = y_old[d] + theta * (
            coef[d][0] + theta * (coef[d][1] + theta * (
                coef[d][2] + theta * coef[d][3])))


def integrate_system(int kind, coeffs, y0, double t0, double t_max,
                     double rtol, double atol, double max_step=1e308,
                     double first_step=0.0, events=None, t_eval=None,
                     long max_steps=5_000_000):
    """Adaptive Dormand-Prince 5(4) integration with dense-output event
    localization. Same contract as the pure-Python lane."""
    cdef double c[16]
    cdef int n_coeff = len(coeffs)
    cdef int i, j, d, st
    if n_coeff > 16:
        raise ValueError("too many coefficients")
    for i in range(n_coeff):
        c[i] = coeffs[i]
    cdef int dim = 3 if kind == C_SYSTEM_PHASE else 2

    cdef double y[3]
    cdef double y_new[3]
    cdef double y_star[3]
    cdef double y_fin[3]
    cdef double stage_y[3]
    cdef double err[3]
    cdef double f0v[3]
    cdef double f1v[3]
    cdef double K[7][3]
    cdef double coef[3][4]
    for d in range(dim):
        y[d] = y0[d]
    cdef double t = t0
    if not t_max > t:
        raise ValueError(f"t_max must exceed t0, got t0={t} t_max={t_max}")

    cdef double[:, ::1] ev
    cdef int n_ev = 0
    if events is not None:
        ev = np.ascontiguousarray(np.atleast_2d(np.asarray(events, dtype=np.float64)))
        n_ev = ev.shape[0]
    else:
        ev = np.empty((0, 7))
    if n_ev > 16:
        raise ValueError("at most 16 event rows supported")
    cdef double g_old[16]

    cdef double[::1] te
    cdef int n_te = 0
    if t_eval is not None:
        te = np.ascontiguousarray(np.asarray(t_eval, dtype=np.float64))
        n_te = te.shape[0]
    else:
        te = np.empty(0)
    y_eval_arr = np.empty((n_te, dim))
    cdef double[:, ::1] y_eval = y_eval_arr
    cdef int te_ptr = 0

    cdef long cap = 4096
    cdef long n_samp = 0
    cdef double* tmp_p
    cdef double* buf_t = <double*> malloc(cap * sizeof(double))
    cdef double* buf_y = <double*> malloc(cap * dim * sizeof(double))
    if buf_t == NULL or buf_y == NULL:
        free(buf_t); free(buf_y)
        raise MemoryError()

    out_events = []
    cdef int status = STATUS_DONE
    cdef long nfev = 0, naccept = 0, nreject = 0
    cdef double h = 0.0
    cdef double h0, h1, d0, d1, d2, dm, s0, s1, s2, sc, q
    cdef double err_norm = 0.0
    cdef double factor, acc
    cdef double t_new = t0
    cdef double t_fin, t_star, theta, lo, hi, mid, g_lo, gm, g_new
    cdef double cut_t = 0.0
    cdef double cut_theta = 0.0
    cdef bint bad, terminal_hit
    cdef bint rejected = False
    cdef int n_fired, cut_idx, ei
    cdef double[::1] ts_v
    cdef double[:, ::1] ys_v
    ts_arr = None
    ys_arr = None

    try:
        if not _rhs(kind, c, t, y, f0v):
            raise ValueError("right-hand side undefined at the initial state")
        nfev += 1

        buf_t[0] = t
        for d in range(dim):
            buf_y[d] = y[d]
        n_samp = 1

        while te_ptr < n_te and te[te_ptr] <= t:
            for d in range(dim):
                y_eval[te_ptr, d] = y[d]
            te_ptr += 1

        for i in range(n_ev):
            g_old[i] = _event_value(<int> ev[i, 0], &ev[i, 3], y, dim)

        if first_step > 0.0:
            h = first_step
        else:
            s0 = 0.0; s1 = 0.0
            for d in range(dim):
                sc = atol + rtol * fabs(y[d])
                s0 += (y[d] / sc) * (y[d] / sc)
                s1 += (f0v[d] / sc) * (f0v[d] / sc)
            d0 = sqrt(s0 / dim)
            d1 = sqrt(s1 / dim)
            h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
            for d in range(dim):
                stage_y[d] = y[d] + h0 * f0v[d]
            if _rhs(kind, c, t + h0, stage_y, f1v):
                nfev += 1
                s2 = 0.0
                for d in range(dim):
                    sc = atol + rtol * fabs(y[d])
                    s2 += ((f1v[d] - f0v[d]) / sc) * ((f1v[d] - f0v[d]) / sc)
                d2 = sqrt(s2 / dim) / h0
                dm = d1 if d1 > d2 else d2
                h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 else pow(0.01 / dm, 0.2)
                h = min(100.0 * h0, h1)
            else:
                h = h0
        h = min(h, max_step, t_max - t)

        for d in range(dim):
            K[0][d] = f0v[d]

        while t < t_max:
            if t_max - t <= 1e-14 * max(1.0, fabs(t_max)):
                break
            if naccept + nreject >= max_steps:
                status = STATUS_STEP_CAP
                break
            h = min(h, max_step, t_max - t)
            if h < 1e-15 * max(1.0, fabs(t)):
                status = STATUS_UNDERFLOW
                break

            bad = False
            for st in range(1, 6):
                for d in range(dim):
                    acc = 0.0
                    for j in range(st):
                        acc += A_TAB[st - 1][j] * K[j][d]
                    stage_y[d] = y[d] + h * acc
                if not _rhs(kind, c, t + C_NODES[st] * h, stage_y, K[st]):
                    bad = True
                    break
                nfev += 1
            if not bad:
                for d in range(dim):
                    acc = 0.0
                    for j in range(6):
                        acc += B_TAB[j] * K[j][d]
                    y_new[d] = y[d] + h * acc
                t_new = t + h
                if not _rhs(kind, c, t_new, y_new, K[6]):
                    bad = True
                else:
                    nfev += 1
                    for d in range(dim):
                        acc = 0.0
                        for j in range(7):
                            acc += E_TAB[j] * K[j][d]
                        err[d] = h * acc
                    s0 = 0.0
                    for d in range(dim):
                        sc = atol + rtol * max(fabs(y[d]), fabs(y_new[d]))
                        q = err[d] / sc
                        s0 += q * q
                    err_norm = sqrt(s0 / dim)
                    if not isfinite(err_norm):
                        bad = True

            if bad or err_norm > 1.0:
                nreject += 1
                rejected = True
                if bad:
                    factor = MIN_FACTOR
                else:
                    factor = SAFETY * pow(err_norm, -0.2)
                    if factor < MIN_FACTOR:
                        factor = MIN_FACTOR
                h *= factor
                continue

            naccept += 1
            t_fin = t_new
            for d in range(dim):
                y_fin[d] = y_new[d]
            terminal_hit = False
            fired = []
            n_fired = 0
            for i in range(n_ev):
                g_new = _event_value(<int> ev[i, 0], &ev[i, 3], y_new, dim)
                if _crossed(g_old[i], g_new, <int> ev[i, 1]):
                    if n_fired == 0:
                        _dense_coeffs(dim, h, K, coef)
                    n_fired += 1
                    lo = 0.0; hi = 1.0
                    g_lo = g_old[i]
                    for j in range(80):
                        if (hi - lo) * fabs(h) < 1e-13 * max(1.0, fabs(t_new)):
                            break
                        mid = 0.5 * (lo + hi)
                        _dense_eval(y, coef, dim, mid, y_star)
                        gm = _event_value(<int> ev[i, 0], &ev[i, 3], y_star, dim)
                        if ((g_lo < 0.0) == (gm < 0.0)) and gm != 0.0:
                            lo = mid; g_lo = gm
                        else:
                            hi = mid
                    theta = hi
                    fired.append((t + theta * h, theta, i))
            if n_fired > 0:
                fired.sort()
                cut_idx = -1
                for item in fired:
                    ei = <int> item[2]
                    if <int> ev[ei, 2]:
                        cut_idx = ei
                        cut_t = item[0]
                        cut_theta = item[1]
                        break
                for item in fired:
                    t_star = item[0]
                    theta = item[1]
                    ei = <int> item[2]
                    if cut_idx >= 0 and t_star > cut_t:
                        break
                    _dense_eval(y, coef, dim, theta, y_star)
                    if dim == 3:
                        out_events.append(
                            (ei, t_star, (y_star[0], y_star[1], y_star[2])))
                    else:
                        out_events.append((ei, t_star, (y_star[0], y_star[1])))
                    if cut_idx >= 0 and ei == cut_idx:
                        break
                if cut_idx >= 0:
                    terminal_hit = True
                    t_fin = cut_t
                    _dense_eval(y, coef, dim, cut_theta, y_fin)

            if n_te:
                while te_ptr < n_te and te[te_ptr] <= t_fin:
                    if n_fired == 0:
                        _dense_coeffs(dim, h, K, coef)
                        n_fired = -1
                    theta = (te[te_ptr] - t) / h
                    _dense_eval(y, coef, dim, theta, y_star)
                    for d in range(dim):
                        y_eval[te_ptr, d] = y_star[d]
                    te_ptr += 1

            if n_samp >= cap:
                cap *= 2
                tmp_p = <double*> realloc(buf_t, cap * sizeof(double))
                if tmp_p == NULL:
                    raise MemoryError()
                buf_t = tmp_p
                tmp_p = <double*> realloc(buf_y, cap * dim * sizeof(double))
                if tmp_p == NULL:
                    raise MemoryError()
                buf_y = tmp_p
            buf_t[n_samp] = t_fin
            for d in range(dim):
                buf_y[n_samp * dim + d] = y_fin[d]
            n_samp += 1

            if terminal_hit:
                status = STATUS_TERMINAL
                break

            t = t_new
            for d in range(dim):
                y[d] = y_new[d]
                K[0][d] = K[6][d]
            for i in range(n_ev):
                g_old[i] = _event_value(<int> ev[i, 0], &ev[i, 3], y, dim)

            if err_norm == 0.0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * pow(err_norm, -0.2)
                if factor > MAX_FACTOR:
                    factor = MAX_FACTOR
            if rejected:
                if factor > 1.0:
                    factor = 1.0
                rejected = False
            h *= factor

        ts_arr = np.empty(n_samp)
        ys_arr = np.empty((n_samp, dim))
        ts_v = ts_arr
        ys_v = ys_arr
        for i in range(<int> n_samp):
            ts_v[i] = buf_t[i]
            for d in range(dim):
                ys_v[i, d] = buf_y[i * dim + d]
    finally:
        free(buf_t)
        free(buf_y)

    return {
        "t": ts_arr,
        "y": ys_arr,
        "events": out_events,
        "status": status,
        "nfev": nfev,
        "naccept": naccept,
        "nreject": nreject,
        "y_eval": y_eval_arr,
        "n_eval": te_ptr,
    }
