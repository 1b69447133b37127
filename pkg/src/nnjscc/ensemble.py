"""Power-type partition, subcodebook sizing and random codebook generation."""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, ResourceError
from .nonexcess import PsiContext, log_psi

ATYPICAL = 0
DEFAULT_CODEWORD_CAP = 10**7
CODEBOOK_LAWS = ("spherical", "iid", "cross")


def codeword_cap_from_env(default: int = DEFAULT_CODEWORD_CAP) -> int:
    raw = os.environ.get("NNJSCC_CODEWORD_CAP")
    if raw is None:
        return default
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigurationError(f"NNJSCC_CODEWORD_CAP must be an integer, got {raw!r}") from None
    if cap < 1:
        raise ConfigurationError("NNJSCC_CODEWORD_CAP must be >= 1")
    return cap


def xi_second_order(k: int) -> float:
    """Quantization half-range sqrt(ln k / k) used for the second-order regime."""
    if k < 2:
        raise DomainError(f"xi_second_order needs k >= 2, got {k}")
    return math.sqrt(math.log(k) / k)


def xi_moderate(eta_n: float) -> float:
    """Quantization half-range eta^(3/4) used for the moderate deviations regime."""
    if not 0 < eta_n <= 1:
        raise DomainError(f"eta_n must lie in (0, 1], got {eta_n}")
    return eta_n**0.75


@dataclass(frozen=True)
class TypePartition:
    """Cells [levels[i-1], levels[i]) of the per-symbol power ||s||^2 / k, i = 1..N."""

    k: int
    xi: float
    sigma2: float
    N: int
    levels: np.ndarray = field(repr=False)

    def level(self, i: int) -> float:
        return float(self.levels[i])


def build_partition(k: int, xi: float, sigma2: float) -> TypePartition:
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    if not 0 < xi < 1:
        raise ConfigurationError(f"xi must lie in (0, 1) so that the lowest level is positive, got {xi}")
    if sigma2 <= 0:
        raise ConfigurationError(f"sigma2 must be > 0, got {sigma2}")
    N = math.ceil(2 * k * xi)
    i = np.arange(N + 1)
    levels = (1.0 - xi + i / k) * sigma2
    levels[0] = (1.0 - xi) * sigma2
    levels.setflags(write=False)
    return TypePartition(k, xi, sigma2, N, levels)


def classify_power(power, partition: TypePartition):
    """Type index (1..N) of each per-symbol power, ATYPICAL (0) outside the cells."""
    power = np.asarray(power, dtype=float)
    idx = np.searchsorted(partition.levels, power, side="right")
    out = np.where((idx >= 1) & (idx <= partition.N), idx, ATYPICAL)
    return int(out) if out.ndim == 0 else out


def classify(s_vec, partition: TypePartition) -> int:
    s_vec = np.asarray(s_vec, dtype=float)
    if s_vec.shape != (partition.k,):
        raise ConfigurationError(f"expected a length-{partition.k} source vector, got shape {s_vec.shape}")
    return classify_power(float(s_vec @ s_vec) / partition.k, partition)


def minimal_clear_k(k: int, xi_rule: Callable[[int], float], sigma2: float, ctx: PsiContext,
                    k_limit: int = 10**7) -> int | None:
    """Smallest k' >= k whose partition keeps every level strictly inside the covering annulus."""
    def clear(kk):
        part = build_partition(kk, xi_rule(kk), sigma2)
        return ctx.r1sq < part.level(1) and part.level(part.N) < ctx.r2sq

    kk = k
    while kk <= k_limit and not clear(kk):
        kk = max(kk + 1, int(kk * 1.25))
    if kk > k_limit:
        return None
    lo = max(k, kk // 2)
    # clearance is monotone once xi(k) is decreasing; refine linearly from below
    for cand in range(lo, kk + 1):
        if clear(cand):
            return cand
    return kk


def subcodebook_size(k: int, log_psi_value: float, type_index: int | None = None) -> int:
    """ceil(k / Psi) from log Psi, as an exact Python integer.

    The quotient is snapped to an integer when it lies within a few ulps of
    one, so that e.g. Psi = k/1000 gives 1000 rather than 1001.
    """
    log_m = math.log(k) - log_psi_value
    if log_m > 700:
        where = f"type {type_index}: " if type_index is not None else ""
        raise ResourceError(f"{where}subcodebook size exp({log_m:.1f}) is not representable")
    x = k / math.exp(log_psi_value) if log_psi_value > -700 else math.exp(log_m)
    nearest = round(x)
    if abs(x - nearest) <= 4 * math.ulp(x):
        return max(1, int(nearest))
    return max(1, math.ceil(x))


def choose_M(k: int, partition: TypePartition, src_kind: str, ctx: PsiContext,
             truncate_types: bool = False, xi_rule: Callable[[int], float] | None = None) -> list[int]:
    """Subcodebook sizes M_i = ceil(k / Psi(k, level_i)).

    Levels where a codeword can never cover the source (Psi = 0) are rejected
    with a ConfigurationError, or given M_i = 0 when ``truncate_types`` is set;
    sources falling in such a cell count as encoder failures.
    """
    if src_kind not in ("spherical", "iid"):
        raise ConfigurationError(f"source codebook must be 'spherical' or 'iid', got {src_kind!r}")
    M = []
    bad = []
    for i in range(1, partition.N + 1):
        lp = log_psi(src_kind, k, partition.level(i), ctx)
        if lp == -math.inf:
            bad.append(i)
            M.append(0)
            continue
        M.append(subcodebook_size(k, lp, type_index=i))
    if bad and not truncate_types:
        hint = ""
        if xi_rule is not None:
            kmin = minimal_clear_k(k, xi_rule, partition.sigma2, ctx)
            hint = f"; smallest k clearing it is {kmin}" if kmin else ""
        levels = ", ".join(f"{i} (level {partition.level(i):.6g})" for i in bad)
        raise ConfigurationError(
            f"covering probability is zero at type(s) {levels}: levels must lie inside "
            f"({ctx.r1sq:.6g}, {ctx.r2sq:.6g}){hint}; pass truncate_types to drop them")
    return M


def sample_spherical(dim: int, radius_sq: float, rng: np.random.Generator, size=()) -> np.ndarray:
    """Uniform draws on the sphere of squared radius ``radius_sq`` in R^dim.

    ``size`` prepends batch dimensions; the last axis has length ``dim``.
    """
    if dim < 1 or radius_sq <= 0:
        raise DomainError(f"need dim >= 1 and radius_sq > 0, got {dim}, {radius_sq}")
    shape = tuple(np.atleast_1d(size)) if size != () else ()
    g = rng.standard_normal(shape + (dim,))
    norm2 = np.einsum("...i,...i->...", g, g)
    zero = norm2 == 0
    while np.any(zero):
        g[zero] = rng.standard_normal((int(zero.sum()), dim))
        norm2 = np.einsum("...i,...i->...", g, g)
        zero = norm2 == 0
    return g * np.sqrt(radius_sq / norm2)[..., None]


def sample_iid_gaussian(dim: int, variance: float, rng: np.random.Generator, size=()) -> np.ndarray:
    if variance <= 0:
        raise DomainError(f"variance must be > 0, got {variance}")
    shape = tuple(np.atleast_1d(size)) if size != () else ()
    return math.sqrt(variance) * rng.standard_normal(shape + (dim,))


def sample_cross(dim: int, radius_sq: float, rng: np.random.Generator, size=()) -> np.ndarray:
    """Uniform over the 2*dim signed axis points of the sphere (finite-support test law)."""
    shape = tuple(np.atleast_1d(size)) if size != () else ()
    axis = rng.integers(0, dim, shape)
    sign = 2.0 * rng.integers(0, 2, shape) - 1.0
    out = np.zeros(shape + (dim,))
    np.put_along_axis(out, axis[..., None], (sign * math.sqrt(radius_sq))[..., None], axis=-1)
    return out


def sample_codewords(law: str, dim: int, power: float, rng: np.random.Generator, size=()) -> np.ndarray:
    """Codewords of per-symbol power ``power`` (sphere radius^2 dim*power, or variance power)."""
    if law == "spherical":
        return sample_spherical(dim, dim * power, rng, size)
    if law == "iid":
        return sample_iid_gaussian(dim, power, rng, size)
    if law == "cross":
        return sample_cross(dim, dim * power, rng, size)
    raise ConfigurationError(f"unknown codebook law {law!r}")


@dataclass(frozen=True)
class CodeEnsemble:
    """One realisation of all source and channel subcodebooks.

    Codewords are stored flat in type-major, index-major order:
    ``src[offsets[i-1] + j - 1]`` is source codeword (i, j).
    """

    partition: TypePartition
    M: tuple
    src_kind: str
    ch_kind: str
    src: np.ndarray = field(repr=False)
    ch: np.ndarray = field(repr=False)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.M)]).astype(np.int64)

    @property
    def total(self) -> int:
        return int(sum(self.M))

    @property
    def k(self) -> int:
        return self.src.shape[-1]

    @property
    def n(self) -> int:
        return self.ch.shape[-1]

    def src_book(self, i: int) -> np.ndarray:
        o = self.offsets
        return self.src[o[i - 1]:o[i]]

    def ch_book(self, i: int) -> np.ndarray:
        o = self.offsets
        return self.ch[o[i - 1]:o[i]]

    @property
    def index_set(self) -> list[tuple[int, int]]:
        return [(i, j) for i, m in enumerate(self.M, start=1) for j in range(1, m + 1)]

    def flat_types(self) -> np.ndarray:
        return np.repeat(np.arange(1, len(self.M) + 1), self.M)

    def flat_index(self) -> np.ndarray:
        return np.concatenate([np.arange(1, m + 1) for m in self.M]) if self.total else np.zeros(0, int)

    def penalties(self) -> np.ndarray:
        """2 ln M_i for every stored channel codeword."""
        m = np.asarray(self.M, dtype=float)
        per_type = 2.0 * np.log(np.where(m > 0, m, 1.0))
        return np.repeat(per_type, self.M)


def check_cap(M: Sequence[int], cap: int):
    total = int(sum(M))
    if total > cap:
        raise ResourceError(f"ensemble needs {total} codewords per codebook, above the cap of {cap}")


def build_ensemble(sigma2: float, D: float, P: float, k: int, n: int, partition: TypePartition,
                   M: Sequence[int], rng: np.random.Generator, src_kind: str = "spherical",
                   ch_kind: str = "spherical", cap: int = DEFAULT_CODEWORD_CAP) -> CodeEnsemble:
    """Draw independent source codewords (power sigma2 - D) and channel codewords (power P)."""
    M = tuple(int(m) for m in M)
    if len(M) != partition.N:
        raise ConfigurationError(f"need {partition.N} subcodebook sizes, got {len(M)}")
    if any(m < 0 for m in M):
        raise ConfigurationError("subcodebook sizes must be >= 0")
    check_cap(M, cap)
    total = sum(M)
    src = sample_codewords(src_kind, k, sigma2 - D, rng, (total,))
    ch = sample_codewords(ch_kind, n, P, rng, (total,))
    return CodeEnsemble(partition, M, src_kind, ch_kind, src, ch)


_MAGIC = b"NNJSCC1"
_LAW_CODES = {name: code for code, name in enumerate(CODEBOOK_LAWS)}


def dump_ensemble(ens: CodeEnsemble, path) -> None:
    """Write the ensemble as little-endian binary.

    Layout: magic ``NNJSCC1``, then uint64 k, n, N, uint8 source law, uint8
    channel law, float64 xi, float64 sigma2, N x uint64 M, then all source
    codewords and all channel codewords as float64, type-major then index-major.
    """
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQQBBdd", ens.k, ens.n, len(ens.M), _LAW_CODES[ens.src_kind],
                             _LAW_CODES[ens.ch_kind], ens.partition.xi, ens.partition.sigma2))
        fh.write(np.asarray(ens.M, dtype="<u8").tobytes())
        fh.write(np.ascontiguousarray(ens.src, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ens.ch, dtype="<f8").tobytes())


def load_ensemble(path) -> CodeEnsemble:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ConfigurationError(f"{path}: not an ensemble dump")
        k, n, N, sk, ck, xi, sigma2 = struct.unpack("<QQQBBdd", fh.read(struct.calcsize("<QQQBBdd")))
        M = tuple(int(m) for m in np.frombuffer(fh.read(8 * N), dtype="<u8"))
        total = sum(M)
        src = np.frombuffer(fh.read(8 * total * k), dtype="<f8").reshape(total, k).copy()
        ch = np.frombuffer(fh.read(8 * total * n), dtype="<f8").reshape(total, n).copy()
    partition = build_partition(k, xi, sigma2)
    return CodeEnsemble(partition, M, CODEBOOK_LAWS[sk], CODEBOOK_LAWS[ck], src, ch)
