"""Pure-Python integration kernel (fallback lane).

Mirrors ``fdext._kernels`` step for step: same Dormand-Prince 5(4) tableau,
same factored right-hand sides, same error control and event localization,
so the two lanes agree to floating-point roundoff and either can back the
public API. This lane is selected by ``fdext.backend`` when the compiled
extension is unavailable (or when FDEXT_BACKEND=python is set).
"""
from __future__ import annotations

import math

import numpy as np

from ._dp5_tableau import A, B, C, E, P

BACKEND_NAME = "python"

SYSTEM_PHASE = 0
SYSTEM_PROFILE = 1

# event functional kinds (shared numbering with the compiled lane)
EV_LINEAR = 1      # g = p0 + p1*u0 + p2*u1 + p3*u2
EV_REGION_R = 2    # g = min(u1 - p0, u2 - p1)
EV_REGION_R0 = 3   # g = min(u1, u2 - u0)
EV_NEAR_YZ = 4     # g = p0 - hypot(u1 - p1, u2 - p2)
EV_NEAR_XYZ = 5    # g = p0 - |u - (p1,p2,p3)|

STATUS_DONE = 0
STATUS_TERMINAL = 1
STATUS_UNDERFLOW = 2
STATUS_STEP_CAP = 3

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ORDER_EXP = -0.2  # 1/5 for the embedded pair


def _rhs(kind, c, t, u, out):
    """Factored right-hand sides; returns False when the state left the
    domain of definition (stepper then rejects the step)."""
    m = c[0]
    p = c[1]
    N = c[2]
    if kind == SYSTEM_PHASE:
        x, y, z = u[0], u[1], u[2]
        y_strip, y_q3, z0 = c[4], c[5], c[6]
        sigma = c[3]
        out[0] = (1.0 - m) * x * (y - y_strip)
        out[1] = (z - z0) - (y - y_q3) * (
            (N - 2.0) + m * (y + y_q3) + (p - m) / (sigma + 2.0) * x
        )
        out[2] = (p - m) * z * (y - y_q3)
        return True
    # profile system in (f, f'); singular at f = 0 which the floor event
    # cuts off before the state can reach it
    f, g = u[0], u[1]
    if f <= 0.0 or t <= 0.0:
        return False
    sigma, alpha, beta = c[3], c[7], c[8]
    brack = math.pow(t, sigma) * math.pow(f, p) - alpha * f - beta * t * g
    out[0] = g
    out[1] = (1.0 - m) * g * g / f - (N - 1.0) * g / t \
        + brack * math.pow(f, 1.0 - m) / m
    return True


def _event_value(kind, pp, u):
    if kind == EV_LINEAR:
        g = pp[0] + pp[1] * u[0] + pp[2] * u[1]
        if len(u) > 2:
            g += pp[3] * u[2]
        return g
    if kind == EV_REGION_R:
        return min(u[1] - pp[0], u[2] - pp[1])
    if kind == EV_REGION_R0:
        return min(u[1], u[2] - u[0])
    if kind == EV_NEAR_YZ:
        return pp[0] - math.hypot(u[1] - pp[1], u[2] - pp[2])
    if kind == EV_NEAR_XYZ:
        return pp[0] - math.sqrt(
            (u[0] - pp[1]) ** 2 + (u[1] - pp[2]) ** 2 + (u[2] - pp[3]) ** 2
        )
    raise ValueError(f"unknown event kind {kind}")


def _crossed(g_old, g_new, direction):
    if g_old < 0.0 < g_new:
        return direction >= 0
    if g_old > 0.0 > g_new:
        return direction <= 0
    return False


def _dense_coeffs(dim, h, K):
    # y(theta) = y_old + sum_j coef[d][j] * theta^(j+1)
    coef = [[0.0] * 4 for _ in range(dim)]
    for d in range(dim):
        for j in range(4):
            s = 0.0
            for st in range(7):
                s += K[st][d] * P[st][j]
            coef[d][j] = h * s
    return coef


def _dense_eval(y_old, coef, dim, theta):
    out = [0.0] * dim
    for d in range(dim):
        c = coef[d]
        out[d] = y_old[d] + theta * (
            c[0] + theta * (c[1] + theta * (c[2] + theta * c[3]))
        )
    return out


def _rms_err(dim, err, y_old, y_new, rtol, atol):
    s = 0.0
    for d in range(dim):
        sc = atol + rtol * max(abs(y_old[d]), abs(y_new[d]))
        q = err[d] / sc
        s += q * q
    return math.sqrt(s / dim)


def integrate_system(kind, coeffs, y0, t0, t_max, rtol, atol,
                     max_step=math.inf, first_step=0.0, events=None,
                     t_eval=None, max_steps=5_000_000):
    """Adaptive Dormand-Prince 5(4) integration with dense-output event
    localization.

    events: float array of rows (kind, direction, terminal, p0, p1, p2, p3).
    t_eval: sorted increasing times at which dense-output values are wanted.
    Returns a dict with the accepted-step samples, localized events,
    dense evaluations and a status code.
    """
    c = tuple(float(v) for v in coeffs)
    dim = 3 if kind == SYSTEM_PHASE else 2
    y = [float(v) for v in y0]
    t = float(t0)
    t_max = float(t_max)
    if not t_max > t:
        raise ValueError(f"t_max must exceed t0, got t0={t} t_max={t_max}")

    ev_rows = []
    if events is not None:
        for row in np.atleast_2d(np.asarray(events, dtype=float)):
            ev_rows.append((int(row[0]), int(row[1]), int(row[2]),
                            tuple(row[3:7])))
    te = np.asarray(t_eval, dtype=float) if t_eval is not None else None
    n_te = 0 if te is None else len(te)
    te_ptr = 0
    y_eval = np.empty((n_te, dim)) if n_te else np.empty((0, dim))

    ts = [t]
    ys = [tuple(y)]
    out_events = []
    status = STATUS_DONE
    nfev = 0
    naccept = 0
    nreject = 0

    f0 = [0.0] * dim
    if not _rhs(kind, c, t, y, f0):
        raise ValueError("right-hand side undefined at the initial state")
    nfev += 1

    while te_ptr < n_te and te[te_ptr] <= t:
        y_eval[te_ptr, :] = y
        te_ptr += 1

    g_old = [_event_value(k, pp, y) for (k, d_, tm, pp) in ev_rows]

    # initial step selection (deterministic, scipy-style)
    if first_step > 0.0:
        h = float(first_step)
    else:
        s0 = 0.0
        s1 = 0.0
        for d in range(dim):
            sc = atol + rtol * abs(y[d])
            s0 += (y[d] / sc) ** 2
            s1 += (f0[d] / sc) ** 2
        d0 = math.sqrt(s0 / dim)
        d1 = math.sqrt(s1 / dim)
        h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        y1 = [y[d] + h0 * f0[d] for d in range(dim)]
        f1 = [0.0] * dim
        if _rhs(kind, c, t + h0, y1, f1):
            nfev += 1
            s2 = 0.0
            for d in range(dim):
                sc = atol + rtol * abs(y[d])
                s2 += ((f1[d] - f0[d]) / sc) ** 2
            d2 = math.sqrt(s2 / dim) / h0
            dm = max(d1, d2)
            h1 = max(1e-6, h0 * 1e-3) if dm <= 1e-15 \
                else (0.01 / dm) ** 0.2
            h = min(100.0 * h0, h1)
        else:
            h = h0
    h = min(h, max_step, t_max - t)

    K = [[0.0] * dim for _ in range(7)]
    K[0][:] = f0
    rejected = False
    stage_y = [0.0] * dim
    err = [0.0] * dim

    while t < t_max:
        if t_max - t <= 1e-14 * max(1.0, abs(t_max)):
            break  # within rounding of the end point
        if naccept + nreject >= max_steps:
            status = STATUS_STEP_CAP
            break
        h = min(h, max_step, t_max - t)
        if h < 1e-15 * max(1.0, abs(t)):
            status = STATUS_UNDERFLOW
            break

        bad = False
        for st in range(1, 6):
            for d in range(dim):
                acc = 0.0
                arow = A[st - 1]
                for j in range(st):
                    acc += arow[j] * K[j][d]
                stage_y[d] = y[d] + h * acc
            if not _rhs(kind, c, t + C[st] * h, stage_y, K[st]):
                bad = True
                break
            nfev += 1
        if not bad:
            y_new = [0.0] * dim
            for d in range(dim):
                acc = 0.0
                for j in range(6):
                    acc += B[j] * K[j][d]
                y_new[d] = y[d] + h * acc
            t_new = t + h
            if not _rhs(kind, c, t_new, y_new, K[6]):
                bad = True
            else:
                nfev += 1
                for d in range(dim):
                    acc = 0.0
                    for j in range(7):
                        acc += E[j] * K[j][d]
                    err[d] = h * acc
                err_norm = _rms_err(dim, err, y, y_new, rtol, atol)
                if not math.isfinite(err_norm):
                    bad = True

        if bad or err_norm > 1.0:
            nreject += 1
            rejected = True
            factor = _MIN_FACTOR if bad else max(
                _MIN_FACTOR, _SAFETY * err_norm ** _ORDER_EXP)
            h *= factor
            continue

        # accepted step; localize any event crossings on it
        naccept += 1
        coef = None
        t_fin = t_new
        y_fin = y_new
        terminal_hit = False
        fired = []
        for i, (ek, edir, eterm, pp) in enumerate(ev_rows):
            g_new = _event_value(ek, pp, y_new)
            if _crossed(g_old[i], g_new, edir):
                if coef is None:
                    coef = _dense_coeffs(dim, h, K)
                lo, hi = 0.0, 1.0
                g_lo = g_old[i]
                for _ in range(80):
                    if (hi - lo) * abs(h) < 1e-13 * max(1.0, abs(t_new)):
                        break
                    mid = 0.5 * (lo + hi)
                    gm = _event_value(ek, pp, _dense_eval(y, coef, dim, mid))
                    if (g_lo < 0.0) == (gm < 0.0) and gm != 0.0:
                        lo, g_lo = mid, gm
                    else:
                        hi = mid
                theta = hi
                fired.append((t + theta * h, theta, i))
        if fired:
            fired.sort()
            cut = None
            for t_star, theta, i in fired:
                if ev_rows[i][2]:  # terminal
                    cut = (t_star, theta, i)
                    break
            for t_star, theta, i in fired:
                if cut is not None and t_star > cut[0]:
                    break
                y_star = _dense_eval(y, coef, dim, theta)
                out_events.append((i, t_star, tuple(y_star)))
                if cut is not None and i == cut[2]:
                    break
            if cut is not None:
                terminal_hit = True
                t_fin = cut[0]
                y_fin = _dense_eval(y, coef, dim, cut[1])

        if n_te:
            while te_ptr < n_te and te[te_ptr] <= t_fin:
                if coef is None:
                    coef = _dense_coeffs(dim, h, K)
                theta = (te[te_ptr] - t) / h
                y_eval[te_ptr, :] = _dense_eval(y, coef, dim, theta)
                te_ptr += 1

        ts.append(t_fin)
        ys.append(tuple(y_fin))

        if terminal_hit:
            status = STATUS_TERMINAL
            t, y = t_fin, list(y_fin)
            break

        t = t_new
        y = y_new
        K[0][:] = K[6]
        for i, (ek, edir, eterm, pp) in enumerate(ev_rows):
            g_old[i] = _event_value(ek, pp, y)

        if err_norm == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(_MAX_FACTOR, _SAFETY * err_norm ** _ORDER_EXP)
        if rejected:
            factor = min(1.0, factor)
            rejected = False
        h *= factor

    return {
        "t": np.asarray(ts),
        "y": np.asarray(ys),
        "events": out_events,
        "status": status,
        "nfev": nfev,
        "naccept": naccept,
        "nreject": nreject,
        "y_eval": y_eval,
        "n_eval": te_ptr,
    }
