"""Closed-form quantities: capacity, rate-distortion, dispersions, predictions.

All logarithms are natural, so rates are in nats.  Second-order and moderate
deviations predictions are the pure normal approximation: the O(log n)
corrections are not modelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainError, NumericalError

CODEBOOK_KINDS = ("spherical", "iid")


def _kind(kind: str) -> str:
    aliases = {"sp": "spherical", "spherical": "spherical", "iid": "iid"}
    try:
        return aliases[kind]
    except KeyError:
        raise DomainError(f"codebook kind must be 'spherical' or 'iid', got {kind!r}") from None


def qfunc(x):
    """Standard normal tail probability Q(x) = P(N(0,1) > x)."""
    out = ndtr(-np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def qfunc_inv(p):
    """Inverse of :func:`qfunc` on (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise DomainError(f"qfunc_inv needs p in (0, 1), got {p!r}")
    out = -ndtri(arr)
    return float(out) if np.ndim(out) == 0 else out


def capacity(P: float) -> float:
    """Gaussian capacity 0.5 ln(1 + P) in nats per channel use."""
    if P < 0:
        raise DomainError(f"power must be >= 0, got {P}")
    return 0.5 * math.log1p(P)


def rate_distortion(sigma2: float, D: float) -> float:
    """Gaussian rate-distortion function max(0.5 ln(sigma2/D), 0)."""
    if sigma2 <= 0 or D <= 0:
        raise DomainError(f"sigma2 and D must be > 0, got sigma2={sigma2}, D={D}")
    return max(0.5 * math.log(sigma2 / D), 0.0)


def bandwidth_ratio(P: float, sigma2: float, D: float) -> float:
    """First-order source symbols per channel use, C(P) / R(sigma2, D)."""
    R = rate_distortion(sigma2, D)
    if R == 0:
        raise DomainError(f"bandwidth ratio undefined for D={D} >= sigma2={sigma2}")
    return capacity(P) / R


def v_source(zeta_s: float, sigma2: float) -> float:
    if sigma2 <= 0:
        raise DomainError(f"sigma2 must be > 0, got {sigma2}")
    s4 = sigma2 * sigma2
    if zeta_s < s4 * (1 - 1e-14):
        raise DomainError(f"fourth moment {zeta_s} is below sigma2^2 = {s4}")
    return max(zeta_s - s4, 0.0) / (4.0 * s4)


def v_channel(zeta_c: float, P: float, kind: str) -> float:
    """Mismatched channel dispersion for a spherical or i.i.d. codebook."""
    kind = _kind(kind)
    if P <= 0:
        raise DomainError(f"power must be > 0, got {P}")
    if zeta_c < 1 - 1e-14:
        raise DomainError(f"noise fourth moment must be >= 1, got {zeta_c}")
    shift = -1.0 if kind == "spherical" else 1.0
    return (P * P * (zeta_c + shift) + 4.0 * P) / (4.0 * (P + 1.0) ** 2)


def v_joint(zeta_s: float, sigma2: float, zeta_c: float, P: float, D: float, kind: str) -> float:
    """Joint source-channel dispersion (squared source symbols per channel use).

    Evaluated in two algebraically equivalent forms; a disagreement beyond
    1e-12 relative raises :class:`NumericalError`.
    """
    if not 0 < D < sigma2:
        raise DomainError(f"D must lie in (0, sigma2), got D={D}, sigma2={sigma2}")
    vs = v_source(zeta_s, sigma2)
    vc = v_channel(zeta_c, P, kind)
    C = capacity(P)
    R = rate_distortion(sigma2, D)
    via_ratio = (C / R * vs + vc) / R**2
    via_cube = (C * vs + R * vc) / R**3
    if abs(via_ratio - via_cube) > 1e-12 * max(abs(via_ratio), abs(via_cube)):
        raise NumericalError(f"dispersion forms disagree: {via_ratio!r} vs {via_cube!r}")
    return via_ratio


@dataclass(frozen=True)
class DispersionReport:
    """First- and second-order constants of one operating point.

    Predictions derived from this report are normal approximations.
    """

    P: float
    sigma2: float
    D: float
    zeta_s: float
    zeta_c: float
    capacity: float
    rate_distortion: float
    rho_star: float
    v_s: float
    v_c_sp: float
    v_c_iid: float
    v_joint_sp: float
    v_joint_iid: float
    nu_star_sp: float
    nu_star_iid: float

    def v_channel(self, kind: str) -> float:
        return self.v_c_sp if _kind(kind) == "spherical" else self.v_c_iid

    def v_joint(self, kind: str) -> float:
        return self.v_joint_sp if _kind(kind) == "spherical" else self.v_joint_iid

    def k_star_prediction(self, n: int, eps: float, kind: str = "spherical") -> float:
        return second_order_k(n, eps, self, kind)

    def as_dict(self) -> dict:
        out = {name: getattr(self, name) for name in self.__dataclass_fields__}
        out["approximation"] = "normal approximation (O(log n) terms dropped)"
        return out


def dispersion_report(zeta_s: float, sigma2: float, zeta_c: float, P: float, D: float) -> DispersionReport:
    C = capacity(P)
    R = rate_distortion(sigma2, D)
    vj_sp = v_joint(zeta_s, sigma2, zeta_c, P, D, "spherical")
    vj_iid = v_joint(zeta_s, sigma2, zeta_c, P, D, "iid")
    return DispersionReport(
        P=P, sigma2=sigma2, D=D, zeta_s=zeta_s, zeta_c=zeta_c,
        capacity=C, rate_distortion=R, rho_star=bandwidth_ratio(P, sigma2, D),
        v_s=v_source(zeta_s, sigma2),
        v_c_sp=v_channel(zeta_c, P, "spherical"), v_c_iid=v_channel(zeta_c, P, "iid"),
        v_joint_sp=vj_sp, v_joint_iid=vj_iid,
        nu_star_sp=1.0 / (2.0 * vj_sp), nu_star_iid=1.0 / (2.0 * vj_iid),
    )


def second_order_k(n: int, eps: float, report: DispersionReport, kind: str = "spherical") -> float:
    """Normal-approximation source length n rho* - sqrt(n V) Q^{-1}(eps), unrounded."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return n * report.rho_star - math.sqrt(n * report.v_joint(kind)) * qfunc_inv(eps)


def predicted_eps(n: int, k: float, report: DispersionReport, kind: str = "spherical") -> float:
    """Excess-distortion probability predicted for (k, n): Q((nC - kR) / sqrt(n V R^2))."""
    R = report.rate_distortion
    return qfunc((n * report.capacity - k * R) / (R * math.sqrt(n * report.v_joint(kind))))


def md_constant(report: DispersionReport, kind: str = "spherical") -> float:
    v = report.v_joint(kind)
    if v <= 0:
        raise DomainError("moderate deviations constant needs a positive joint dispersion")
    return 1.0 / (2.0 * v)


def _golden_min(f, lo: float, hi: float, tol: float, max_iter: int = 500):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            x = 0.5 * (a + b)
            return x, f(x)
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    raise NumericalError(f"golden-section search did not converge: bracket [{a}, {b}], width {b - a}")


def separate_split(eps: float, report: DispersionReport, kind: str = "spherical") -> tuple[float, float]:
    """Best (value, eps1) of the separate-coding two-term backoff, eps2 = eps - eps1."""
    if not 0 < eps < 0.5:
        raise DomainError(f"eps must lie in (0, 0.5), got {eps}")
    R = report.rate_distortion
    a = math.sqrt(report.rho_star * report.v_s) / R
    b = math.sqrt(report.v_channel(kind)) / R
    if a == 0:
        return b * qfunc_inv(eps), 0.0
    if b == 0:
        return a * qfunc_inv(eps), eps

    def backoff(u):
        return a * qfunc_inv(eps * u) + b * qfunc_inv(eps * (1.0 - u))

    # objective is convex in u on (0, 1): Q^{-1} is convex below 1/2
    u, value = _golden_min(backoff, 1e-15, 1.0 - 1e-15, tol=1e-8)
    return value, eps * u


def separate_second_order(eps: float, report: DispersionReport, kind: str = "spherical") -> float:
    return separate_split(eps, report, kind)[0]


def separate_md(report: DispersionReport, kind: str = "spherical") -> float:
    """Moderate-deviations constant quoted for separate source-channel coding."""
    R2 = report.rate_distortion**2
    vs = report.rho_star * report.v_s
    vc = report.v_channel(kind)
    if vs == 0 and vc == 0:
        raise DomainError("both dispersions vanish")
    branches = [R2 / (2.0 * v) for v in (vs, vc) if v > 0]
    return min(branches)
