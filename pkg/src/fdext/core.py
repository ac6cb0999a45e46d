"""Exponent validation, derived constants and the phase-space vector field.

Everything downstream (trajectory integration, profile shooting, region
audits, the radial PDE solver) checks itself against the closed forms in
this module, so all formulas here are evaluated in cancellation-aware
factored form rather than as naive sums of terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InvalidParams",
    "DegenerateDimension",
    "Params",
    "Derived",
    "PhasePoint",
    "Equilibrium",
    "validate_params",
    "derive_constants",
    "vector_field",
    "analytic_jacobian",
    "numeric_jacobian",
    "equilibria",
    "equilibrium_spectrum",
]


class InvalidParams(ValueError):
    """Exponent combination outside the admissible open range.

    ``code`` names the first violated inequality: BelowCritical, NotFast,
    WeakAbsorption, SigmaTooSmall or BadDimension.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class DegenerateDimension(ValueError):
    """Raised when an equilibrium degenerates for N <= 2."""


@dataclass(frozen=True)
class Params:
    """Validated exponents (m, p, N, sigma). Construct via validate_params."""

    m: float
    p: float
    N: int
    sigma: float

    @property
    def m_c(self) -> float:
        return max(self.N - 2, 0) / self.N

    @property
    def sigma_star(self) -> float:
        return 2.0 * (self.p - 1.0) / (1.0 - self.m)

    def to_dict(self) -> dict:
        return {"m": self.m, "p": self.p, "N": self.N, "sigma": self.sigma}


@dataclass(frozen=True)
class Derived:
    """Closed-form constants attached to a valid parameter set."""

    sigma_star: float
    alpha: float
    beta: float
    Z0: float
    L: float
    C0: float
    q_tail: float
    y_Q2: float
    y_Q3: float
    y_strip: float

    def to_dict(self) -> dict:
        return {
            "sigma_star": self.sigma_star,
            "alpha": self.alpha,
            "beta": self.beta,
            "Z0": self.Z0,
            "L": self.L,
            "C0": self.C0,
            "q_tail": self.q_tail,
            "y_Q2": self.y_Q2,
            "y_Q3": self.y_Q3,
            "y_strip": self.y_strip,
        }


@dataclass(frozen=True)
class PhasePoint:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class Equilibrium:
    label: str
    location: PhasePoint
    jacobian: np.ndarray = field(repr=False)
    eigenvalues: tuple
    eigenvectors: tuple


def validate_params(m: float, p: float, N, sigma: float) -> Params:
    """Check the strict admissibility inequalities and return Params.

    The model requires m_c < m < 1, p > 1 and sigma > sigma_* = 2(p-1)/(1-m)
    with integer N >= 1; boundary values are rejected (the theory is stated
    on open ranges, so no epsilon slack is applied).
    """
    for name, v, code in (
        ("m", m, "NotFast"),
        ("p", p, "WeakAbsorption"),
        ("sigma", sigma, "SigmaTooSmall"),
    ):
        if not math.isfinite(v):
            raise InvalidParams(code, f"{name} must be finite, got {v!r}")
    if isinstance(N, bool) or not (
        isinstance(N, int) or (isinstance(N, float) and float(N).is_integer())
    ):
        raise InvalidParams("BadDimension", f"N must be a positive integer, got {N!r}")
    N = int(N)
    if N < 1:
        raise InvalidParams("BadDimension", f"N must be >= 1, got {N}")
    if m >= 1.0:
        raise InvalidParams("NotFast", f"m must satisfy m < 1, got m={m}")
    m_c = max(N - 2, 0) / N
    if m <= m_c:
        raise InvalidParams(
            "BelowCritical", f"m must satisfy m > (N-2)+/N = {m_c}, got m={m}"
        )
    if p <= 1.0:
        raise InvalidParams("WeakAbsorption", f"p must satisfy p > 1, got p={p}")
    sigma_star = 2.0 * (p - 1.0) / (1.0 - m)
    if sigma <= sigma_star:
        raise InvalidParams(
            "SigmaTooSmall",
            f"sigma must satisfy sigma > 2(p-1)/(1-m) = {sigma_star}, got sigma={sigma}",
        )
    return Params(m=float(m), p=float(p), N=N, sigma=float(sigma))


def derive_constants(params: Params) -> Derived:
    """Evaluate every closed-form constant of the model.

    alpha and beta are the self-similarity exponents; Z0 is the third
    coordinate of the tail equilibrium; L = C0 = (m Z0)^{1/(p-m)} is the
    tail constant of both the critical profile and the exact stationary
    solution C0 * xi^{-q_tail}.
    """
    m, p, N, sigma = params.m, params.p, params.N, params.sigma
    sigma_star = params.sigma_star
    gap = (1.0 - m) * (sigma - sigma_star)
    alpha = (sigma + 2.0) / gap
    beta = (p - m) / gap
    Z0 = (sigma + 2.0) * (m * (N + sigma) - p * (N - 2.0)) / (p - m) ** 2
    L = (m * Z0) ** (1.0 / (p - m))
    q_tail = (sigma + 2.0) / (p - m)
    return Derived(
        sigma_star=sigma_star,
        alpha=alpha,
        beta=beta,
        Z0=Z0,
        L=L,
        C0=L,
        q_tail=q_tail,
        y_Q2=-(N - 2.0) / m,
        y_Q3=-q_tail,
        y_strip=-2.0 / (1.0 - m),
    )


def field_coeffs(params: Params) -> np.ndarray:
    """Coefficient vector consumed by the integration kernels.

    Layout: (m, p, N, sigma, y_strip, y_Q3, Z0, alpha, beta). The kernels
    evaluate the factored right-hand side below from exactly these values,
    so all backends see bit-identical constants.
    """
    d = derive_constants(params)
    return np.array(
        [params.m, params.p, float(params.N), params.sigma,
         d.y_strip, d.y_Q3, d.Z0, d.alpha, d.beta]
    )


def vector_field(params: Params, point) -> tuple[float, float, float]:
    """Right-hand side of the autonomous system for (x, y, z).

    Evaluated in the algebraically equivalent factored form

        dx = (1-m) * x * (y - y_strip)
        dy = (z - Z0) - (y - y_Q3) * [(N-2) + m*(y + y_Q3) + (p-m)/(sigma+2) * x]
        dz = (p-m) * z * (y - y_Q3)

    which vanishes exactly (in floating point) on the equilibrium Q3 and on
    the invariant line {y = y_Q3, z = Z0}, and keeps the planes x = 0 and
    z = 0 invariant without clamping.
    """
    m, p, N, sigma = params.m, params.p, params.N, params.sigma
    d = derive_constants(params)
    x, y, z = _point_xyz(point)
    dx = (1.0 - m) * x * (y - d.y_strip)
    dy = (z - d.Z0) - (y - d.y_Q3) * (
        (N - 2.0) + m * (y + d.y_Q3) + (p - m) / (sigma + 2.0) * x
    )
    dz = (p - m) * z * (y - d.y_Q3)
    return (dx, dy, dz)


def _point_xyz(point):
    if isinstance(point, PhasePoint):
        return point.x, point.y, point.z
    x, y, z = point
    return float(x), float(y), float(z)


def analytic_jacobian(params: Params, point) -> np.ndarray:
    """Jacobian of vector_field, in the same factored form."""
    m, p, N, sigma = params.m, params.p, params.N, params.sigma
    d = derive_constants(params)
    x, y, z = _point_xyz(point)
    return np.array(
        [
            [(1.0 - m) * (y - d.y_strip), (1.0 - m) * x, 0.0],
            [
                -(p - m) / (sigma + 2.0) * (y - d.y_Q3),
                -(N - 2.0) - 2.0 * m * y - (p - m) / (sigma + 2.0) * x,
                1.0,
            ],
            [0.0, (p - m) * z, (p - m) * (y - d.y_Q3)],
        ]
    )


def numeric_jacobian(params: Params, point, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of vector_field; cross-check of the
    hand-coded Jacobian."""
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    x0 = np.asarray(_point_xyz(point))
    J = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fp = np.asarray(vector_field(params, x0 + e))
        fm = np.asarray(vector_field(params, x0 - e))
        J[:, j] = (fp - fm) / (2.0 * h)
    return J


def equilibria(params: Params) -> dict[str, PhasePoint]:
    """The three finite equilibria Q1, Q2, Q3 of the system."""
    d = derive_constants(params)
    return {
        "Q1": PhasePoint(0.0, 0.0, 0.0),
        "Q2": PhasePoint(0.0, d.y_Q2, 0.0),
        "Q3": PhasePoint(0.0, d.y_Q3, d.Z0),
    }


def equilibrium_spectrum(params: Params, label: str) -> Equilibrium:
    """Closed-form eigenvalues/eigenvectors of the linearization at Q1..Q3.

    Q1 is a saddle (one-dimensional stable manifold along the y-axis);
    Q2 is an unstable node for N >= 3 and degenerates for N <= 2;
    Q3 is a saddle whose 2x2 (y,z) block is solved by the quadratic formula
    in a cancellation-safe arrangement (the stable root is recovered from
    the eigenvalue product, which equals -(p-m) Z0).
    """
    m, p, N, sigma = params.m, params.p, float(params.N), params.sigma
    d = derive_constants(params)
    loc = equilibria(params)[label]
    J = analytic_jacobian(params, loc)
    if label == "Q1":
        lams = (2.0, -(N - 2.0), sigma + 2.0)
        vecs = ((N, -1.0, 0.0), (0.0, 1.0, 0.0), (0.0, 1.0, N + sigma))
    elif label == "Q2":
        if params.N <= 2:
            raise DegenerateDimension(
                f"Q2 degenerates for N={params.N}: it merges with Q1 (N=2) "
                "or moves to y > 0 (N=1)"
            )
        a = (m * N - N + 2.0) / m
        c = N - 2.0
        dd = (m * (N + sigma) - p * (N - 2.0)) / m
        b = (p - m) * (N - 2.0) / (m * (sigma + 2.0)) - 1.0
        lams = (a, c, dd)
        vecs = ((a - c, b, 0.0), (0.0, 1.0, 0.0), (0.0, 1.0, dd - c))
    elif label == "Q3":
        lam1 = (1.0 - m) * (d.sigma_star - sigma) / (p - m)
        tr = (m * (N + 2.0 * sigma + 2.0) - p * (N - 2.0)) / (p - m)
        det = -(p - m) * d.Z0
        lam2 = 0.5 * (tr + math.sqrt(tr * tr - 4.0 * det))
        lam3 = det / lam2
        lams = (lam1, lam2, lam3)
        vecs = ((1.0, 0.0, 0.0), (0.0, 1.0, lam2 - tr), (0.0, 1.0, lam3 - tr))
    else:
        raise ValueError(f"unknown equilibrium label {label!r}")
    return Equilibrium(
        label=label,
        location=loc,
        jacobian=J,
        eigenvalues=lams,
        eigenvectors=vecs,
    )
