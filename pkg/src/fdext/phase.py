"""Phase-space trajectories for the (x, y, z) autonomous system.

Provides the profile <-> phase change of variables, unstable-manifold
launches near the origin equilibrium, the C <-> A parameter bijection
(evaluated in log space; the constants underflow otherwise), and adaptive
integration with plane-crossing / region-entry / proximity event logging.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .core import Params, PhasePoint, derive_constants, field_coeffs

__all__ = [
    "NonpositiveProfile",
    "ZeroX",
    "Event",
    "PhaseTrajectory",
    "profile_to_phase",
    "phase_to_profile",
    "launch_lC",
    "launch_from_profile",
    "bij_C_to_A",
    "bij_A_to_C",
    "integrate_phase",
    "distance_to_q3",
    "trajectory_to_csv",
    "events_to_json",
]


class NonpositiveProfile(ValueError):
    """Profile value must be positive to map into phase coordinates."""


class ZeroX(ValueError):
    """Profile is not recoverable from the invariant plane x = 0."""


@dataclass(frozen=True)
class Event:
    kind: str
    eta: float
    state: PhasePoint

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "eta": self.eta,
            "state": {"x": self.state.x, "y": self.state.y, "z": self.state.z},
        }


@dataclass
class PhaseTrajectory:
    params: Params
    C: float | None
    eta: np.ndarray
    xyz: np.ndarray
    events: list[Event]
    status: str
    stats: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.xyz[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.xyz[:, 1]

    @property
    def z(self) -> np.ndarray:
        return self.xyz[:, 2]

    def last_state(self) -> PhasePoint:
        return PhasePoint(*self.xyz[-1])

    def events_of(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]


def profile_to_phase(params: Params, xi: float, f: float, fp: float):
    """Map a profile point (xi, f, f') to (eta, PhasePoint)."""
    if xi <= 0.0:
        raise ValueError(f"xi must be positive, got {xi}")
    if f <= 0.0:
        raise NonpositiveProfile(f"profile value must be positive, got f={f}")
    d = derive_constants(params)
    m = params.m
    x = d.alpha / m * xi * xi * f ** (1.0 - m)
    y = xi * fp / f
    z = xi ** (params.sigma + 2.0) * f ** (params.p - m) / m
    return math.log(xi), PhasePoint(x, y, z)


def phase_to_profile(params: Params, eta: float, point) -> tuple[float, float, float]:
    """Invert the change of variables; the z-coordinate is redundant and is
    not consulted (tests use it as an overdetermination check)."""
    if isinstance(point, PhasePoint):
        x, y, _ = point.x, point.y, point.z
    else:
        x, y = float(point[0]), float(point[1])
    if x == 0.0:
        raise ZeroX("x = 0 lies in the invariant plane; no profile corresponds")
    if x < 0.0:
        raise ValueError(f"x must be nonnegative, got {x}")
    d = derive_constants(params)
    m = params.m
    xi = math.exp(eta)
    f = (m * x / (d.alpha * xi * xi)) ** (1.0 / (1.0 - m))
    fp = y * f / xi
    return xi, f, fp


def launch_lC(params: Params, C: float, x0: float) -> PhasePoint:
    """First-order unstable-manifold launch point for the trajectory with
    manifold parameter C; C = math.inf selects the launch inside the plane
    x = 0 along the remaining unstable eigendirection (x0 is then reused as
    the small z offset)."""
    if C < 0.0:
        raise ValueError(f"C must be nonnegative, got {C}")
    if not 0.0 < x0 < 1.0:
        raise ValueError(f"launch offset must be in (0, 1), got {x0}")
    N, sigma = params.N, params.sigma
    if math.isinf(C):
        z0 = x0
        return PhasePoint(0.0, z0 / (N + sigma), z0)
    return PhasePoint(x0, -x0 / N, C * x0 ** ((sigma + 2.0) / 2.0))


def launch_from_profile(params: Params, A: float, x0: float = 1e-6):
    """Launch point obtained by mapping the series-expanded profile with
    f(0) = A through the change of variables at the radius where the first
    phase coordinate equals x0. Accurate to O(xi^4), unlike the first-order
    manifold form, so it realizes the trajectory of f(.; A) to roundoff."""
    from .profiles import series_start

    d = derive_constants(params)
    xi0 = math.sqrt(params.m * x0 / (d.alpha * A ** (1.0 - params.m)))
    f0, fp0 = series_start(params, A, xi0)
    return profile_to_phase(params, xi0, f0, fp0)


def _bij_exponents(params: Params):
    d = derive_constants(params)
    denom = (1.0 - params.m) * (d.sigma_star - params.sigma)
    return denom, math.log(d.alpha / params.m)


def bij_C_to_A(params: Params, C: float) -> float:
    """Profile height A = f(0) of the manifold trajectory with parameter C;
    strictly decreasing in C (the exponents are negative)."""
    if C <= 0.0:
        raise ValueError(f"C must be positive, got {C}")
    denom, log_am = _bij_exponents(params)
    log_a = (2.0 * math.log(C * params.m) + (params.sigma + 2.0) * log_am) / denom
    return math.exp(log_a)


def bij_A_to_C(params: Params, A: float) -> float:
    """Inverse of bij_C_to_A, also evaluated in log space."""
    if A <= 0.0:
        raise ValueError(f"A must be positive, got {A}")
    denom, log_am = _bij_exponents(params)
    log_c = (denom * math.log(A) - (params.sigma + 2.0) * log_am) / 2.0 \
        - math.log(params.m)
    return math.exp(log_c)


def distance_to_q3(params: Params, xyz, metric: str = "yz") -> np.ndarray:
    """Distance of state(s) to the tail equilibrium Q3.

    metric="yz" measures in the (y, z) coordinates only (the pair that
    characterizes locking onto the tail behavior; the x coordinate relaxes
    at the slow rate and dominates the full metric for a long while),
    metric="xyz" is the full Euclidean distance.
    """
    d = derive_constants(params)
    a = np.atleast_2d(np.asarray(xyz, dtype=float))
    dy = a[:, 1] - d.y_Q3
    dz = a[:, 2] - d.Z0
    if metric == "yz":
        out = np.hypot(dy, dz)
    elif metric == "xyz":
        out = np.sqrt(a[:, 0] ** 2 + dy ** 2 + dz ** 2)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return out if np.ndim(xyz) > 1 else out[0]


# event-row indices into the table built by _event_table
_EV_KINDS = (
    "CrossPlaneYQ3",
    "CrossPlaneY0",
    "CrossZ0",
    "EnterR",
    "EnterR0",
    "NearQ3",
    "NearQ5Escape",
)


def _event_table(params: Params, y_escape: float, tol_q3: float,
                 q3_metric: str, stop_on: set[str]) -> np.ndarray:
    d = derive_constants(params)
    b = backend
    near_kind = b.EV_NEAR_YZ if q3_metric == "yz" else b.EV_NEAR_XYZ
    near_p = (tol_q3, d.y_Q3, d.Z0, 0.0) if q3_metric == "yz" \
        else (tol_q3, 0.0, d.y_Q3, d.Z0)
    rows = [
        (b.EV_LINEAR, 0, "CrossPlaneYQ3" in stop_on, -d.y_Q3, 0.0, 1.0, 0.0),
        (b.EV_LINEAR, 0, False, 0.0, 0.0, 1.0, 0.0),
        (b.EV_LINEAR, 0, False, -d.Z0, 0.0, 0.0, 1.0),
        (b.EV_REGION_R, 1, False, d.y_Q3, d.Z0, 0.0, 0.0),
        (b.EV_REGION_R0, 1, "EnterR0" in stop_on, 0.0, 0.0, 0.0, 0.0),
        (near_kind, 1, "NearQ3" in stop_on) + near_p,
        (b.EV_LINEAR, -1, "NearQ5Escape" in stop_on, -y_escape, 0.0, 1.0, 0.0),
    ]
    return np.array([[float(v) for v in r] for r in rows])


def integrate_phase(params: Params, start, eta_max: float, *,
                    eta0: float = 0.0, C: float | None = None,
                    rtol: float = 1e-10, atol: float = 1e-12,
                    max_step: float = 0.5, first_step: float = 0.0,
                    y_escape: float | None = None, tol_q3: float = 1e-3,
                    q3_metric: str = "yz",
                    stop_on: set[str] | None = None,
                    t_eval=None, max_steps: int = 5_000_000) -> PhaseTrajectory:
    """Integrate the system from ``start`` up to eta_max, recording plane
    crossings, region entries and proximity events.

    stop_on selects which recorded kinds terminate the run (default:
    NearQ5Escape only; the escape threshold defaults to 10x the tail-plane
    level, far past the no-return plane). Step-size underflow is recorded
    as a StepFailure event and the partial trajectory is returned.
    """
    if stop_on is None:
        stop_on = {"NearQ5Escape"}
    unknown = stop_on - set(_EV_KINDS)
    if unknown:
        raise ValueError(f"unknown stop kinds {sorted(unknown)}")
    d = derive_constants(params)
    if y_escape is None:
        y_escape = 10.0 * d.y_Q3
    if isinstance(start, PhasePoint):
        u0 = (start.x, start.y, start.z)
    else:
        u0 = tuple(float(v) for v in start)
    if u0[0] < 0.0 or u0[2] < 0.0:
        raise ValueError(f"start must satisfy x >= 0 and z >= 0, got {u0}")

    table = _event_table(params, y_escape, tol_q3, q3_metric, stop_on)
    res = backend.integrate_system(
        backend.SYSTEM_PHASE, field_coeffs(params), u0, eta0, eta0 + eta_max,
        rtol, atol, max_step=max_step, first_step=first_step, events=table,
        t_eval=t_eval, max_steps=max_steps,
    )

    events = [Event(_EV_KINDS[i], t, PhasePoint(*s)) for i, t, s in res["events"]]
    status_code = res["status"]
    if status_code == backend.STATUS_DONE:
        status = "ReachedEtaMax"
    elif status_code == backend.STATUS_TERMINAL:
        status = events[-1].kind
    elif status_code == backend.STATUS_UNDERFLOW:
        status = "StepFailure"
        events.append(Event("StepFailure", float(res["t"][-1]),
                            PhasePoint(*res["y"][-1])))
    else:
        status = "StepBudgetExhausted"

    stats = {k: res[k] for k in ("nfev", "naccept", "nreject")}
    if t_eval is not None:
        stats["y_eval"] = res["y_eval"]
        stats["n_eval"] = res["n_eval"]
    return PhaseTrajectory(params=params, C=C, eta=res["t"], xyz=res["y"],
                           events=events, status=status, stats=stats)


def trajectory_to_csv(traj: PhaseTrajectory, path, cls: str | None = None) -> None:
    """Write samples as CSV (columns eta,x,y,z); when a class label is given
    it is carried as a constant extra column."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["eta", "x", "y", "z"] + (["cls"] if cls is not None else [])
        w.writerow(header)
        for i in range(len(traj.eta)):
            row = [repr(float(traj.eta[i])), repr(float(traj.xyz[i, 0])),
                   repr(float(traj.xyz[i, 1])), repr(float(traj.xyz[i, 2]))]
            if cls is not None:
                row.append(cls)
            w.writerow(row)


def events_to_json(traj: PhaseTrajectory, path) -> None:
    doc = {
        "params": traj.params.to_dict(),
        "C": traj.C,
        "status": traj.status,
        "events": [e.to_dict() for e in traj.events],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
