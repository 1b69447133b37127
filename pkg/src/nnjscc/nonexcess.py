"""Probability that a random Gaussian codeword covers a source sequence.

``psi_sp`` / ``psi_iid`` give the exact probability that one codeword of the
spherical / i.i.d. Gaussian source codebook lies within distortion D of a
fixed sequence of power p.  The exponent functions ``r_sp``, ``r_iid`` and the
closed-form bounds ``psi_sp_lower`` / ``psi_sp_upper`` describe their decay in k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, gammainc, gammaln
from scipy.stats import poisson

from .errors import DomainError, NumericalError


@dataclass(frozen=True)
class PsiContext:
    """Source power sigma2 and distortion D, with the radii of the covering annulus."""

    sigma2: float
    D: float

    def __post_init__(self):
        if not 0 < self.D < self.sigma2:
            raise DomainError(f"need 0 < D < sigma2, got D={self.D}, sigma2={self.sigma2}")

    @property
    def r1sq(self) -> float:
        return (math.sqrt(self.sigma2 - self.D) - math.sqrt(self.D)) ** 2

    @property
    def r2sq(self) -> float:
        return (math.sqrt(self.sigma2 - self.D) + math.sqrt(self.D)) ** 2

    def inside(self, p: float) -> bool:
        return self.r1sq < p < self.r2sq


def _one_minus_t2(p: float, ctx: PsiContext) -> float:
    # 1 - t^2 factorised through the annulus radii; avoids cancellation near the edges
    return (p - ctx.r1sq) * (ctx.r2sq - p) / (4.0 * p * (ctx.sigma2 - ctx.D))


def cap_cosine(p: float, ctx: PsiContext) -> float:
    """Minimum cosine between s and a codeword that still meets distortion D."""
    return (p + ctx.sigma2 - 2.0 * ctx.D) / (2.0 * math.sqrt(p * (ctx.sigma2 - ctx.D)))


def cap_tail(dim: int, t):
    """P(<U, e> >= t) for U uniform on the unit sphere of R^dim.

    Uses (1 + <U, e>)/2 ~ Beta((dim-1)/2, (dim-1)/2) and the reflection
    P(c >= t) = P(c <= -t), which keeps precision for t close to 1.
    """
    t = np.asarray(t, dtype=float)
    if dim == 1:
        out = np.where(t <= -1, 1.0, np.where(t <= 1, 0.5, 0.0))
    else:
        a = 0.5 * (dim - 1)
        out = betainc(a, a, np.clip((1.0 - t) / 2.0, 0.0, 1.0))
    return float(out) if out.ndim == 0 else out


def psi_sp(k: int, p: float, ctx: PsiContext) -> float:
    """Exact covering probability of one spherical codeword of radius sqrt(k(sigma2-D))."""
    if k < 1 or p <= 0:
        raise DomainError(f"need k >= 1 and p > 0, got k={k}, p={p}")
    if not ctx.inside(p):
        return 0.0
    if k == 1:
        return 0.5
    t = cap_cosine(p, ctx)
    half = 0.5 * float(betainc(0.5 * (k - 1), 0.5, _one_minus_t2(p, ctx)))
    if not math.isfinite(half):
        raise NumericalError(f"incomplete beta failed at k={k}, p={p}")
    return half if t >= 0 else 1.0 - half


def r_sp(p: float, ctx: PsiContext) -> float:
    if not ctx.inside(p):
        raise DomainError(f"r_sp needs p in ({ctx.r1sq}, {ctx.r2sq}), got {p}")
    return -0.5 * math.log(_one_minus_t2(p, ctx))


def _check_lower(k: int, p: float, ctx: PsiContext):
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if not ctx.inside(p):
        raise DomainError(f"bound needs p in ({ctx.r1sq}, {ctx.r2sq}), got {p}")


def log_psi_sp_lower(k: int, p: float, ctx: PsiContext) -> float:
    _check_lower(k, p, ctx)
    return (gammaln((k + 2) / 2) - gammaln((k + 1) / 2) - 0.5 * math.log(math.pi)
            - math.log(k) - (k - 1) * r_sp(p, ctx))


def log_psi_sp_upper(k: int, p: float, ctx: PsiContext) -> float:
    _check_lower(k, p, ctx)
    if k < 2:
        raise DomainError("upper bound needs k >= 2")
    if p + ctx.sigma2 - 2 * ctx.D < 0:
        raise DomainError(f"upper bound needs p + sigma2 - 2D >= 0, got p={p}")
    return (gammaln(k / 2) - gammaln((k - 1) / 2) - 0.5 * math.log(math.pi)
            - (k - 3) * r_sp(p, ctx))


def psi_sp_lower(k: int, p: float, ctx: PsiContext) -> float:
    return math.exp(log_psi_sp_lower(k, p, ctx))


def psi_sp_upper(k: int, p: float, ctx: PsiContext) -> float:
    return math.exp(log_psi_sp_upper(k, p, ctx))


def s_star(p: float, ctx: PsiContext) -> float:
    """Maximiser over s >= 0 of the exponent defining :func:`r_iid`."""
    if p < 0:
        raise DomainError(f"p must be >= 0, got {p}")
    s2, D = ctx.sigma2, ctx.D
    return max(0.0, (s2 - 3 * D + math.sqrt((s2 - D) ** 2 + 4 * p * D)) / (4 * D))


def r_iid_exponent(s: float, p: float, ctx: PsiContext) -> float:
    c = ctx.sigma2 - ctx.D
    return 0.5 * math.log1p(2 * s) + s * p / ((1 + 2 * s) * c) - s * ctx.D / c


def r_iid(p: float, ctx: PsiContext) -> float:
    return r_iid_exponent(s_star(p, ctx), p, ctx)


def kappa(s: float, p: float, ctx: PsiContext) -> float:
    if s < 0:
        raise DomainError(f"s must be >= 0, got {s}")
    c = ctx.sigma2 - ctx.D
    return (c * (1 + 2 * s) + 2 * p) ** 2 / (c * (1 + 2 * s) ** 3)


def tilted_variance(s: float, p: float, ctx: PsiContext) -> float:
    """Per-symbol variance factor of the exponentially tilted distortion at slope s.

    Equals 2((sigma2-D)(1+2s) + 2p) / ((sigma2-D)(1+2s)^3); this is the
    quantity that makes the Bahadur-Rao refinement of the i.i.d. covering
    probability exact to first order.  It differs from :func:`kappa` by the
    factor ((sigma2-D)(1+2s) + 2p) / 2.
    """
    if s < 0:
        raise DomainError(f"s must be >= 0, got {s}")
    c = ctx.sigma2 - ctx.D
    return 2.0 * (c * (1 + 2 * s) + 2 * p) / (c * (1 + 2 * s) ** 3)


def log_psi_iid_asymptotic(k: int, p: float, ctx: PsiContext, variance: str = "tilted") -> float:
    """log of exp(-k R_iid(p)) / (s* sqrt(2 pi k v)) with v = tilted_variance (default) or kappa."""
    s = s_star(p, ctx)
    if s <= 0:
        raise DomainError(f"asymptotic form needs s*(p) > 0, got p={p}")
    if variance == "tilted":
        v = tilted_variance(s, p, ctx)
    elif variance == "kappa":
        v = kappa(s, p, ctx)
    else:
        raise DomainError(f"variance must be 'tilted' or 'kappa', got {variance!r}")
    return -k * r_iid(p, ctx) - math.log(s) - 0.5 * math.log(2 * math.pi * k * v)


def psi_iid_asymptotic(k: int, p: float, ctx: PsiContext, variance: str = "tilted") -> float:
    return math.exp(log_psi_iid_asymptotic(k, p, ctx, variance))


def _log_gammainc_lower(a: np.ndarray, x: float) -> np.ndarray:
    """log P(a, x), falling back to a log-domain series where P underflows."""
    direct = gammainc(a, x)
    out = np.log(np.where(direct > 1e-290, direct, 1.0))
    small = direct <= 1e-290
    if np.any(small):
        for idx in np.flatnonzero(small):
            ai = float(a[idx])
            # P(a,x) = x^a e^{-x} / Gamma(a+1) * sum_n x^n / ((a+1)...(a+n)), valid for all x
            term, total, n = 1.0, 1.0, 0
            while term > 1e-17 * total:
                n += 1
                term *= x / (ai + n)
                total += term
                if n > 100000:
                    raise NumericalError("incomplete gamma series did not converge")
            out[idx] = ai * math.log(x) - x - gammaln(ai + 1) + math.log(total)
    return out


def log_psi_iid(k: int, p: float, ctx: PsiContext, rtol: float = 1e-12, max_terms: int = 10**6) -> float:
    """log of :func:`psi_iid`; stays finite where the probability underflows."""
    if k < 1 or p < 0:
        raise DomainError(f"need k >= 1 and p >= 0, got k={k}, p={p}")
    c = ctx.sigma2 - ctx.D
    half_lam = 0.5 * k * p / c
    half_x = 0.5 * k * ctx.D / c
    jmax = max(16, int(half_lam + 10 * math.sqrt(half_lam + 1)))
    while True:
        if jmax > max_terms:
            raise NumericalError(f"noncentral chi-square series exceeded {max_terms} terms")
        j = np.arange(jmax + 1)
        log_w = (poisson.logpmf(j, half_lam) if half_lam > 0
                 else np.where(j == 0, 0.0, -np.inf))
        log_c = _log_gammainc_lower(0.5 * k + j, half_x)
        terms = log_w + log_c
        log_sum = float(np.logaddexp.reduce(terms))
        # remaining terms: Poisson tail weight times a decreasing chi-square cdf
        tail = poisson.logsf(jmax, half_lam) + log_c[-1] if half_lam > 0 else -np.inf
        if tail - log_sum < math.log(rtol):
            return log_sum
        jmax *= 2


def psi_iid(k: int, p: float, ctx: PsiContext) -> float:
    """Exact covering probability of one i.i.d. N(0, sigma2 - D) codeword.

    Equals the CDF at kD/(sigma2-D) of a noncentral chi-square with k degrees
    of freedom and noncentrality kp/(sigma2-D), summed as a Poisson mixture of
    central chi-square CDFs.
    """
    return math.exp(log_psi_iid(k, p, ctx))


def psi(kind: str, k: int, p: float, ctx: PsiContext) -> float:
    return psi_sp(k, p, ctx) if kind in ("spherical", "sp") else psi_iid(k, p, ctx)


def log_psi(kind: str, k: int, p: float, ctx: PsiContext) -> float:
    if kind in ("spherical", "sp"):
        value = psi_sp(k, p, ctx)
        if value > 0:
            return math.log(value)
        if ctx.inside(p):
            raise NumericalError(f"spherical covering probability underflows at k={k}, p={p}")
        return -math.inf
    return log_psi_iid(k, p, ctx)
