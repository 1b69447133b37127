"""Memoryless source and additive-noise laws with exact moments.

Every law is described by a ``kind`` plus a small parameter dictionary.  The
second, fourth and sixth moments are computed in closed form (finite sums for
discrete PMFs) so that dispersion formulas never see estimation noise.

Supported kinds and their parameters::

    gaussian            sigma2
    uniform             a | sigma2          (support [-a, a])
    laplace             b | sigma2          (scale b, variance 2 b^2)
    rademacher_scaled   a | sigma2          (+-a equiprobable)
    discrete_pmf        atoms, probs [, sigma2]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigurationError

KINDS = ("gaussian", "uniform", "laplace", "rademacher_scaled", "discrete_pmf")

_ALLOWED = {
    "gaussian": {"sigma2"},
    "uniform": {"a", "sigma2"},
    "laplace": {"b", "sigma2"},
    "rademacher_scaled": {"a", "sigma2"},
    "discrete_pmf": {"atoms", "probs", "sigma2"},
}


@dataclass(frozen=True)
class _Law:
    """A resolved distribution: natural parameters only, no ambiguity."""

    kind: str
    scale: float = 1.0  # gaussian std, uniform a, laplace b, rademacher a
    atoms: tuple = ()
    probs: tuple = ()

    def moments(self) -> tuple[float, float, float]:
        c = self.scale
        if self.kind == "gaussian":
            return c**2, 3.0 * c**4, 15.0 * c**6
        if self.kind == "uniform":
            return c**2 / 3.0, c**4 / 5.0, c**6 / 7.0
        if self.kind == "laplace":
            return 2.0 * c**2, 24.0 * c**4, 720.0 * c**6
        if self.kind == "rademacher_scaled":
            return c**2, c**4, c**6
        a = np.asarray(self.atoms, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        return float(p @ a**2), float(p @ a**4), float(p @ a**6)

    def scaled(self, factor: float) -> "_Law":
        if self.kind == "discrete_pmf":
            return _Law(self.kind, 1.0, tuple(factor * x for x in self.atoms), self.probs)
        return _Law(self.kind, self.scale * factor)

    def draw(self, size, rng: np.random.Generator) -> np.ndarray:
        c = self.scale
        if self.kind == "gaussian":
            return c * rng.standard_normal(size)
        if self.kind == "uniform":
            return rng.uniform(-c, c, size)
        if self.kind == "laplace":
            return rng.laplace(0.0, c, size)
        if self.kind == "rademacher_scaled":
            return c * (2.0 * rng.integers(0, 2, size) - 1.0)
        return rng.choice(np.asarray(self.atoms, dtype=float), size=size,
                          p=np.asarray(self.probs, dtype=float))


def _resolve(kind: str, params: Mapping) -> _Law:
    if kind not in KINDS:
        raise ConfigurationError(f"unknown distribution kind {kind!r}; expected one of {KINDS}")
    params = dict(params or {})
    unknown = set(params) - _ALLOWED[kind]
    if unknown:
        raise ConfigurationError(f"unknown parameter(s) {sorted(unknown)} for kind {kind!r}")

    def positive(name):
        value = float(params[name])
        if not math.isfinite(value) or value <= 0:
            raise ConfigurationError(f"{kind}: parameter {name} must be finite and > 0, got {value}")
        return value

    if kind == "discrete_pmf":
        if "atoms" not in params or "probs" not in params:
            raise ConfigurationError("discrete_pmf needs both 'atoms' and 'probs'")
        atoms = np.asarray(params["atoms"], dtype=float)
        probs = np.asarray(params["probs"], dtype=float)
        if atoms.ndim != 1 or atoms.shape != probs.shape or atoms.size == 0:
            raise ConfigurationError("discrete_pmf: atoms and probs must be equal-length 1-D lists")
        if np.any(probs < 0) or not np.all(np.isfinite(atoms)):
            raise ConfigurationError("discrete_pmf: probabilities must be >= 0 and atoms finite")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"discrete_pmf: probabilities sum to {probs.sum()!r}, not 1")
        law = _Law(kind, 1.0, tuple(atoms.tolist()), tuple(probs.tolist()))
        if law.moments()[0] <= 0:
            raise ConfigurationError("discrete_pmf: distribution is degenerate at 0")
        if "sigma2" in params:
            law = law.scaled(math.sqrt(positive("sigma2") / law.moments()[0]))
        return law

    natural = {"gaussian": None, "uniform": "a", "laplace": "b", "rademacher_scaled": "a"}[kind]
    if natural is not None and natural in params:
        if "sigma2" in params:
            raise ConfigurationError(f"{kind}: give either {natural!r} or 'sigma2', not both")
        return _Law(kind, positive(natural))
    sigma2 = positive("sigma2") if "sigma2" in params else 1.0
    unit = _Law(kind, 1.0)
    return unit.scaled(math.sqrt(sigma2 / unit.moments()[0]))


@dataclass(frozen=True)
class SourceModel:
    """Memoryless source law with exact moments E[S^2], E[S^4], E[S^6]."""

    kind: str
    params: Mapping
    sigma2: float
    zeta_s: float
    m6: float
    _law: _Law = field(repr=False, compare=False)

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        return self._law.draw(size, rng)


@dataclass(frozen=True)
class NoiseModel:
    """Additive noise law, always normalised so that E[Z^2] = 1.

    ``params`` keeps the raw (pre-normalisation) parameters and ``scale`` is
    the factor that was applied to reach unit power.
    """

    kind: str
    params: Mapping
    zeta_c: float
    m6: float
    scale: float
    _law: _Law = field(repr=False, compare=False)

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        return self._law.draw(size, rng)


def make_source(kind: str, params: Mapping | None = None) -> SourceModel:
    """Build a source model; raises ConfigurationError on invalid parameters."""
    law = _resolve(kind, params or {})
    m2, m4, m6 = law.moments()
    if params and "sigma2" in params:
        # pin E[S^2] to the requested value exactly; higher moments follow by ratio
        target = float(params["sigma2"])
        m4, m6 = m4 / m2**2 * target**2, m6 / m2**3 * target**3
        m2 = target
    return SourceModel(kind, dict(params or {}), m2, m4, m6, law)


def make_noise(kind: str, params: Mapping | None = None) -> NoiseModel:
    """Build a unit-power noise model from any parameterisation of ``kind``."""
    raw = _resolve(kind, params or {})
    scale = 1.0 / math.sqrt(raw.moments()[0])
    law = raw.scaled(scale)
    # standardized moments from the raw law avoid re-rounding through scale**4
    m2_raw, m4_raw, m6_raw = raw.moments()
    return NoiseModel(kind, dict(params or {}),
                      m4_raw / m2_raw**2, m6_raw / m2_raw**3, scale, law)


def sample_source(model: SourceModel, k: int, rng: np.random.Generator) -> np.ndarray:
    if k < 1:
        raise ConfigurationError(f"source length must be >= 1, got {k}")
    return model.sample(k, rng)


def sample_noise(model: NoiseModel, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ConfigurationError(f"noise length must be >= 1, got {n}")
    return model.sample(n, rng)


@dataclass(frozen=True)
class SystemConfig:
    """Operating point: power P, distortion D, lengths (k, n), codebook kinds."""

    P: float
    D: float
    k: int
    n: int
    sigma2: float
    src_codebook: str = "spherical"
    ch_codebook: str = "spherical"

    def __post_init__(self):
        if not self.P > 0:
            raise ConfigurationError(f"P must be > 0, got {self.P}")
        if not 0 < self.D < self.sigma2:
            raise ConfigurationError(f"D must lie in (0, sigma2={self.sigma2}), got {self.D}")
        if self.k < 1 or self.n < 1:
            raise ConfigurationError(f"k and n must be >= 1, got k={self.k}, n={self.n}")
        for name in ("src_codebook", "ch_codebook"):
            # "cross" is a finite-support law on the sphere, used for enumeration tests
            if getattr(self, name) not in ("spherical", "iid", "cross"):
                raise ConfigurationError(f"{name} must be 'spherical' or 'iid', got {getattr(self, name)!r}")
