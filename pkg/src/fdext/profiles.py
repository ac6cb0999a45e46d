"""Shooting integration of the self-similar profile equation.

Profiles solve (f^m)'' + (N-1)/xi (f^m)' + alpha f + beta xi f' = xi^sigma f^p
with f(0) = A, f'(0) = 0. Integration runs in the (f, f') variables, which
are regular while f > 0; floor/ceiling events terminate the run before the
degeneracy at f = 0 or the vertical asymptote can stall the stepper.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .core import Params, derive_constants, field_coeffs

__all__ = [
    "WindowTooShort",
    "TerminalEvent",
    "ProfileSolution",
    "TailFit",
    "VanishSlope",
    "BlowupFit",
    "series_start",
    "default_xi_init",
    "integrate_profile",
    "tail_power_fit",
    "vanish_slope_check",
    "blowup_exponent_fit",
    "residual_check",
    "stationary_profile",
    "stationary_residual",
    "profile_to_csv",
    "terminal_to_json",
]


class WindowTooShort(ValueError):
    """Fit window does not cover the required xi range."""


@dataclass(frozen=True)
class TerminalEvent:
    kind: str  # HitZero | MinThenGrowth | ReachedXiMax | SuspectedBlowUp | StiffnessFailure
    xi0: float | None = None          # extrapolated zero radius (HitZero)
    slope_fm: float | None = None     # limiting (f^m)' at the zero (HitZero)
    xi_min: float | None = None       # minimum location (MinThenGrowth)
    f_min: float | None = None        # minimum value (MinThenGrowth)
    xi1_est: float | None = None      # asymptote estimate (SuspectedBlowUp)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for k in ("xi0", "slope_fm", "xi_min", "f_min", "xi1_est"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out


@dataclass
class ProfileSolution:
    params: Params
    A: float
    xi: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    terminal: TerminalEvent
    stats: dict = field(default_factory=dict)

    def fm_slope(self) -> np.ndarray:
        """(f^m)' along the samples."""
        m = self.params.m
        return m * self.f ** (m - 1.0) * self.fp


def series_start(params: Params, A: float, xi_init: float) -> tuple[float, float]:
    """Second-order series expansion of the profile about xi = 0:
    f = A - alpha*A^(2-m)/(2 m N) * xi^2 + O(xi^4)."""
    if A <= 0.0:
        raise ValueError(f"A must be positive, got {A}")
    if xi_init < 0.0:
        raise ValueError(f"xi_init must be nonnegative, got {xi_init}")
    d = derive_constants(params)
    coef = d.alpha * A ** (2.0 - params.m) / (params.m * params.N)
    return A - 0.5 * coef * xi_init * xi_init, -coef * xi_init


def default_xi_init(params: Params, A: float) -> float:
    """Starting radius where the quartic series error is at roundoff level:
    1e-4 of the curvature scale sqrt(2 m N / (alpha A^(1-m)))."""
    d = derive_constants(params)
    scale = math.sqrt(2.0 * params.m * params.N / (d.alpha * A ** (1.0 - params.m)))
    return 1e-4 * scale


def integrate_profile(params: Params, A: float, xi_max: float, *,
                      xi_init: float | None = None, rtol: float = 1e-10,
                      atol: float | None = None, f_floor_rel: float = 1e-10,
                      f_ceil_rel: float = 1e8, stop: str = "auto",
                      recovery_factor: float = 1.0, max_step: float = 1e308,
                      t_eval=None, max_steps: int = 5_000_000) -> ProfileSolution:
    """Shoot the profile from its series start and classify the outcome.

    stop="auto" terminates at the first of: f reaching the floor (HitZero),
    f recovering to recovery_factor*A after an interior minimum
    (MinThenGrowth), or xi_max (ReachedXiMax). stop="blowup" instead runs
    growing solutions to the ceiling 1e8*A and reports SuspectedBlowUp with
    an asymptote estimate. Step-size underflow yields a flagged partial
    solution (StiffnessFailure), not an exception.
    """
    if A <= 0.0:
        raise ValueError(f"A must be positive, got {A}")
    if stop not in ("auto", "blowup"):
        raise ValueError(f"stop must be 'auto' or 'blowup', got {stop!r}")
    if xi_init is None:
        xi_init = default_xi_init(params, A)
    if not xi_max > xi_init:
        raise ValueError(
            f"xi_max must exceed xi_init, got xi_max={xi_max} xi_init={xi_init}")
    if atol is None:
        atol = 1e-12 * max(1.0, A)
    f0, fp0 = series_start(params, A, xi_init)
    f_floor = f_floor_rel * A
    f_ceil = f_ceil_rel * A

    b = backend
    rows = [
        (b.EV_LINEAR, -1, 1, -f_floor, 1.0, 0.0, 0.0),   # 0: floor, terminal
        (b.EV_LINEAR, +1, 1, -f_ceil, 1.0, 0.0, 0.0),    # 1: ceiling, terminal
        (b.EV_LINEAR, +1, 0, 0.0, 0.0, 1.0, 0.0),        # 2: f' upward (minimum)
    ]
    if stop == "auto":
        rows.append((b.EV_LINEAR, +1, 1, -recovery_factor * A, 1.0, 0.0, 0.0))
    table = np.array([[float(v) for v in r] for r in rows])

    res = b.integrate_system(
        b.SYSTEM_PROFILE, field_coeffs(params), (f0, fp0), xi_init, xi_max,
        rtol, atol, max_step=max_step, events=table, t_eval=t_eval,
        max_steps=max_steps,
    )

    xi = res["t"]
    f = res["y"][:, 0]
    fp = res["y"][:, 1]
    minima = [(t, s) for i, t, s in res["events"] if i == 2]
    diagnostics: dict = {}
    if minima:
        diagnostics["n_minima"] = len(minima)

    status = res["status"]
    m = params.m
    if status == b.STATUS_TERMINAL:
        idx = res["events"][-1][0]
        if idx == 0:
            fe, fpe = f[-1], fp[-1]
            xi0 = xi[-1] + fe / (m * abs(fpe))
            slope = m * fe ** (m - 1.0) * fpe
            terminal = TerminalEvent(kind="HitZero", xi0=float(xi0),
                                     slope_fm=float(slope),
                                     diagnostics=diagnostics)
        elif idx == 1:
            xi1, fit = _asymptote_estimate(xi, f, fp, A)
            diagnostics.update(fit)
            if minima:
                t_min, s_min = minima[0]
                diagnostics["xi_min"] = float(t_min)
                diagnostics["f_min"] = float(s_min[0])
            terminal = TerminalEvent(kind="SuspectedBlowUp", xi1_est=xi1,
                                     diagnostics=diagnostics)
        elif minima:
            t_min, s_min = minima[0]
            terminal = TerminalEvent(kind="MinThenGrowth", xi_min=float(t_min),
                                     f_min=float(s_min[0]),
                                     diagnostics=diagnostics)
        else:
            diagnostics["anomaly"] = "recovery crossing without recorded minimum"
            terminal = TerminalEvent(kind="StiffnessFailure",
                                     diagnostics=diagnostics)
    elif status == b.STATUS_DONE:
        if minima:
            t_min, s_min = minima[0]
            diagnostics["xi_min"] = float(t_min)
            diagnostics["f_min"] = float(s_min[0])
        terminal = TerminalEvent(kind="ReachedXiMax", diagnostics=diagnostics)
    else:
        terminal = TerminalEvent(kind="StiffnessFailure", diagnostics=diagnostics)

    stats = {k: res[k] for k in ("nfev", "naccept", "nreject")}
    if t_eval is not None:
        stats["y_eval"] = res["y_eval"]
        stats["n_eval"] = res["n_eval"]
    return ProfileSolution(params=params, A=A, xi=xi, f=f, fp=fp,
                           terminal=terminal, stats=stats)


def _asymptote_estimate(xi, f, fp, A):
    """Estimate the vertical-asymptote location from the growing tail:
    for f ~ C (xi1 - xi)^(-q), the inverse logarithmic slope f/f' equals
    (xi1 - xi)/q, so a linear fit of f/f' against xi gives both."""
    mask = f >= 1e2 * A
    if mask.sum() < 8:
        mask = f >= 10.0 * A
    if mask.sum() < 4:
        return None, {"asymptote_fit": "insufficient points"}
    u = f[mask] / fp[mask]
    s, b = np.polyfit(xi[mask], u, 1)
    if s >= 0.0:
        return None, {"asymptote_fit": "non-negative slope"}
    q = -1.0 / s
    xi1 = float(-b / s)
    resid = float(np.max(np.abs(np.polyval([s, b], xi[mask]) - u)))
    return xi1, {"asymptote_q": float(q), "asymptote_fit_residual": resid}


@dataclass(frozen=True)
class TailFit:
    q_est: float
    window: tuple[float, float]
    n_points: int
    max_residual: float  # in ln f
    rms_residual: float


def tail_power_fit(sol: ProfileSolution, window: tuple[float, float]) -> TailFit:
    """Least-squares slope of -d ln f / d ln xi over the window.

    Requires the solution samples to span at least one decade inside the
    window (WindowTooShort otherwise).
    """
    xi_a, xi_b = window
    mask = (sol.xi >= xi_a) & (sol.xi <= xi_b) & (sol.f > 0.0)
    pts = mask.sum()
    if pts < 8 or sol.xi[mask].max() < 9.99 * sol.xi[mask].min():
        raise WindowTooShort(
            f"samples cover [{sol.xi[mask].min() if pts else math.nan:.3g}, "
            f"{sol.xi[mask].max() if pts else math.nan:.3g}] inside {window}; "
            "need at least one decade")
    lx = np.log(sol.xi[mask])
    lf = np.log(sol.f[mask])
    slope, intercept = np.polyfit(lx, lf, 1)
    resid = lf - (slope * lx + intercept)
    return TailFit(q_est=float(-slope), window=(float(xi_a), float(xi_b)),
                   n_points=int(pts), max_residual=float(np.max(np.abs(resid))),
                   rms_residual=float(np.sqrt(np.mean(resid ** 2))))


@dataclass(frozen=True)
class VanishSlope:
    xi0: float
    slope_fm: float
    slope_predicted: float
    rel_deviation: float
    within_5pct: bool
    local_exponent: float | None
    prefactor_linear: float | None   # lim f^m/(xi0-xi)
    prefactor_power: float | None    # K in f ~ K (xi0-xi)^(1/m)


def vanish_slope_check(sol: ProfileSolution) -> VanishSlope:
    """Compare the limiting (f^m)' against the closed-form slope law.

    The law's xi0-dependence is structural; its prefactor stems from a
    first-approximation argument and is observed to differ by a constant
    factor shared by every vanishing profile, so the 5% agreement flag is
    reported rather than asserted.
    """
    if sol.terminal.kind != "HitZero":
        raise ValueError(f"terminal is {sol.terminal.kind}, need HitZero")
    m = sol.params.m
    d = derive_constants(sol.params)
    xi0 = sol.terminal.xi0
    slope_fm = sol.terminal.slope_fm
    predicted = -m * (d.alpha / m) ** (m / (m - 1.0)) \
        * xi0 ** ((m + 1.0) / (m - 1.0))
    rel = abs(slope_fm - predicted) / abs(predicted)

    local_exp = None
    pref_lin = None
    pref_pow = None
    tail = sol.f <= sol.f[0] * 1e-4
    if tail.sum() >= 6:
        dxi = xi0 - sol.xi[tail]
        good = dxi > 0
        if good.sum() >= 6:
            lx = np.log(dxi[good])
            lf = np.log(sol.f[tail][good])
            local_exp = float(np.polyfit(lx, lf, 1)[0])
            pref_lin = float(np.mean(sol.f[tail][good] ** m / dxi[good]))
            pref_pow = float(np.mean(sol.f[tail][good] / dxi[good] ** (1.0 / m)))
    return VanishSlope(xi0=xi0, slope_fm=slope_fm, slope_predicted=predicted,
                       rel_deviation=float(rel), within_5pct=bool(rel < 0.05),
                       local_exponent=local_exp, prefactor_linear=pref_lin,
                       prefactor_power=pref_pow)


@dataclass(frozen=True)
class BlowupFit:
    q_blow: float
    xi1_est: float
    fit_residual: float
    candidates: dict
    closest: str


def blowup_exponent_fit(sol: ProfileSolution) -> BlowupFit:
    """Exploratory fit f ~ C (xi1 - xi)^(-q) on a SuspectedBlowUp solution;
    reports q against the two candidate exponents without asserting either."""
    if sol.terminal.kind != "SuspectedBlowUp":
        raise ValueError(f"terminal is {sol.terminal.kind}, need SuspectedBlowUp")
    diag = sol.terminal.diagnostics
    if "asymptote_q" not in diag:
        raise ValueError(f"asymptote fit unavailable: {diag}")
    p, m = sol.params.p, sol.params.m
    candidates = {"2/(p-m)": 2.0 / (p - m), "1/(p-1)": 1.0 / (p - 1.0)}
    q = diag["asymptote_q"]
    closest = min(candidates, key=lambda k: abs(candidates[k] - q))
    return BlowupFit(q_blow=float(q), xi1_est=sol.terminal.xi1_est,
                     fit_residual=diag.get("asymptote_fit_residual", math.nan),
                     candidates=candidates, closest=closest)


def residual_check(sol: ProfileSolution) -> float:
    """Max normalized residual of the profile equation on interior samples.

    (f^m)' is known exactly at samples; its derivative is taken by centered
    differences, so the estimate carries an O(h^2) differentiation error on
    top of the integration error.
    """
    par = sol.params
    m, p, N, sigma = par.m, par.p, par.N, par.sigma
    d = derive_constants(par)
    xi, f, fp = sol.xi, sol.f, sol.fp
    w_p = m * f ** (m - 1.0) * fp
    w_pp = (w_p[2:] - w_p[:-2]) / (xi[2:] - xi[:-2])
    i = slice(1, -1)
    terms = np.stack([
        w_pp,
        (N - 1.0) / xi[i] * w_p[i],
        d.alpha * f[i],
        d.beta * xi[i] * fp[i],
        -xi[i] ** sigma * f[i] ** p,
    ])
    resid = np.abs(terms.sum(axis=0))
    scale = np.max(np.abs(terms), axis=0)
    return float(np.max(resid / scale))


def stationary_profile(params: Params, xi) -> np.ndarray:
    """The exact stationary solution C0 * xi^(-q_tail)."""
    d = derive_constants(params)
    return d.C0 * np.asarray(xi, dtype=float) ** (-d.q_tail)


def stationary_residual(params: Params, xi) -> np.ndarray:
    """Residual of the profile operator on the exact stationary solution,
    evaluated from closed-form derivatives (oracle for the integrator)."""
    d = derive_constants(params)
    m, p, N, sigma = params.m, params.p, params.N, params.sigma
    q = d.q_tail
    xi = np.asarray(xi, dtype=float)
    f = d.C0 * xi ** (-q)
    fp = -q * d.C0 * xi ** (-q - 1.0)
    c0m = d.C0 ** m
    w_p = -m * q * c0m * xi ** (-m * q - 1.0)
    w_pp = m * q * (m * q + 1.0) * c0m * xi ** (-m * q - 2.0)
    return (w_pp + (N - 1.0) / xi * w_p + d.alpha * f + d.beta * xi * fp
            - xi ** sigma * f ** p)


def profile_to_csv(sol: ProfileSolution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["xi", "f", "fprime"])
        for i in range(len(sol.xi)):
            w.writerow([repr(float(sol.xi[i])), repr(float(sol.f[i])),
                        repr(float(sol.fp[i]))])


def terminal_to_json(sol: ProfileSolution, path) -> None:
    doc = {
        "params": sol.params.to_dict(),
        "A": sol.A,
        "terminal": sol.terminal.to_dict(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
