"""Monte Carlo estimation of the ensemble excess-distortion probability.

Trials are grouped in fixed-size blocks.  Block ``b`` draws all of its
randomness from ``Philox(key=(master_seed, b))``, a counter-based generator,
so any block can be produced independently and results do not depend on how
blocks are scheduled across worker processes.

Two samplers are available:

``explicit``
    Materialises every source and channel codeword and runs the encoder and
    decoder literally.  Fresh codebooks per trial by default, or one shared
    draw with ``fixed_ensemble``.

``extremal``
    Exact in distribution for the fresh-codebook ensemble, without storing
    codebooks.  Given the source and the channel output, only the best
    codeword of each subcodebook matters, and its distance is drawn directly
    from the minimum-of-M law (inverse incomplete beta for spherical
    codebooks, inverse noncentral chi-square for i.i.d. ones).  This is what
    makes realistic subcodebook sizes (10^10 and beyond) tractable.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import betainc, betaincinv
from scipy.stats import ncx2, norm

from .analytic import DispersionReport
from .codec import batch_decode, batch_encode, batch_sq_distances
from .ensemble import (
    ATYPICAL,
    DEFAULT_CODEWORD_CAP,
    TypePartition,
    build_partition,
    check_cap,
    choose_M,
    classify_power,
    sample_codewords,
)
from .errors import ConfigurationError, DomainError
from .model import NoiseModel, SourceModel, SystemConfig
from .nonexcess import PsiContext

CATEGORIES = ("Success", "Atypical", "E1", "E2", "E3")
SUCCESS, ATYP, E1, E2, E3 = range(5)
SAMPLERS = ("explicit", "extremal")
_FIXED_ENSEMBLE_BLOCK = 2**64 - 1
_MEMORY_FLOATS = 1 << 23


@dataclass(frozen=True)
class Scheme:
    """Everything a trial needs: operating point, laws, partition and sizes."""

    system: SystemConfig
    source: SourceModel
    noise: NoiseModel
    partition: TypePartition
    M: tuple
    sampler: str = "explicit"
    fixed_ensemble: bool = False
    codeword_cap: int = DEFAULT_CODEWORD_CAP
    block_size: int = 4096

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise ConfigurationError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        if self.sampler == "extremal":
            if self.fixed_ensemble:
                raise ConfigurationError("the extremal sampler only supports fresh codebooks per trial")
            if "cross" in (self.system.src_codebook, self.system.ch_codebook):
                raise ConfigurationError("the extremal sampler supports spherical and iid codebooks only")
            if self.system.k < 2 or self.system.n < 2:
                raise ConfigurationError("the extremal sampler needs k >= 2 and n >= 2")
        elif sum(self.M) > self.codeword_cap:
            check_cap(self.M, self.codeword_cap)
        if len(self.M) != self.partition.N:
            raise ConfigurationError(f"{self.partition.N} types but {len(self.M)} subcodebook sizes")
        if self.block_size < 1:
            raise ConfigurationError("block_size must be >= 1")

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.M)]).astype(np.int64)

    @property
    def log_M(self) -> np.ndarray:
        m = np.asarray(self.M, dtype=float)
        return np.log(np.where(m > 0, m, 1.0))


def prepare_scheme(system: SystemConfig, source: SourceModel, noise: NoiseModel, xi: float,
                   M: Sequence[int] | None = None, truncate_types: bool = False,
                   xi_rule: Callable[[int], float] | None = None, **kwargs) -> Scheme:
    """Build the partition and (unless given) size the subcodebooks from the covering probability."""
    if abs(system.sigma2 - source.sigma2) > 1e-12 * source.sigma2:
        raise ConfigurationError(f"system sigma2={system.sigma2} differs from source E[S^2]={source.sigma2}")
    partition = build_partition(system.k, xi, source.sigma2)
    if M is None:
        ctx = PsiContext(source.sigma2, system.D)
        M = choose_M(system.k, partition, system.src_codebook, ctx, truncate_types, xi_rule)
    return Scheme(system, source, noise, partition, tuple(int(m) for m in M), **kwargs)


@dataclass
class TrialBatch:
    """Column arrays for a batch of trials (indices 1-based, 0 when undefined)."""

    category: np.ndarray
    I: np.ndarray
    J: np.ndarray
    Ihat: np.ndarray
    Jhat: np.ndarray
    distortion: np.ndarray

    def __len__(self):
        return len(self.category)

    @classmethod
    def concat(cls, parts):
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                     ("category", "I", "J", "Ihat", "Jhat", "distortion")))


@dataclass(frozen=True)
class TrialOutcome:
    category: str
    I: int
    J: int
    Ihat: int
    Jhat: int
    final_distortion: float


def categorize(active, type_ok, index_ok, dist, D) -> np.ndarray:
    """Category codes from the encoder-success mask, decoder-correctness masks and distortion."""
    cat = np.full(len(active), SUCCESS, dtype=np.int8)
    excess = active & (dist > D)
    cat[excess & type_ok & index_ok] = E1
    cat[excess & ~type_ok] = E2
    cat[excess & type_ok & ~index_ok] = E3
    cat[~active] = ATYP
    return cat


def _active_types(scheme, I):
    has = np.array([m > 0 for m in scheme.M])
    return (I > 0) & has[np.maximum(I - 1, 0)]


def _explicit_chunk(scheme: Scheme, rng, t, ensemble=None) -> TrialBatch:
    sys_ = scheme.system
    k, n = sys_.k, sys_.n
    total = int(sum(scheme.M))
    offsets = scheme.offsets
    S = scheme.source.sample((t, k), rng)
    I = classify_power(np.einsum("ij,ij->i", S, S) / k, scheme.partition).astype(np.int64)
    if ensemble is None:
        src = sample_codewords(sys_.src_codebook, k, sys_.sigma2 - sys_.D, rng, (t, total))
        ch = sample_codewords(sys_.ch_codebook, n, sys_.P, rng, (t, total))
    else:
        src, ch = ensemble
    Z = scheme.noise.sample((t, n), rng)

    src_dist = batch_sq_distances(src, S)
    J, flatJ = batch_encode(src_dist, I, offsets)
    active = flatJ >= 0
    rows = np.arange(t)
    X = ch[rows, np.maximum(flatJ, 0)] if ch.ndim == 3 else ch[np.maximum(flatJ, 0)]
    Y = X + Z
    penalties = np.repeat(2.0 * scheme.log_M, scheme.M)
    flat_hat = batch_decode(batch_sq_distances(ch, Y), penalties)
    types = np.repeat(np.arange(1, len(scheme.M) + 1), scheme.M)
    index = np.arange(total) - offsets[types - 1] + 1
    Ihat, Jhat = types[flat_hat], index[flat_hat]
    dist = src_dist[rows, flat_hat] / k

    I = np.where(active, I, 0)
    Ihat, Jhat = np.where(active, Ihat, 0), np.where(active, Jhat, 0)
    dist = np.where(active, dist, np.nan)
    cat = categorize(active, Ihat == I, Jhat == J, dist, sys_.D)
    return TrialBatch(cat, I, J, Ihat, Jhat, dist)


def _min_quantile(u, m):
    """Law of the smallest of m i.i.d. Uniform(0,1): 1 - u^(1/m), stable for huge m."""
    return -np.expm1(np.log(u) / m)


class _DistanceLaw:
    """Squared distance from a fixed point to one random codeword, by quantile.

    ``quantile(q)`` returns the squared distance d with P(distance <= d) = q,
    vectorised over q and over per-row point norms.
    """

    def __init__(self, law: str, dim: int, power: float):
        self.law, self.dim, self.power = law, dim, power
        self.a = 0.5 * (dim - 1)

    def quantile(self, q, point_sq):
        if self.law == "spherical":
            r2 = self.dim * self.power
            cos = 1.0 - 2.0 * betaincinv(self.a, self.a, q)
            return r2 + point_sq - 2.0 * np.sqrt(r2 * point_sq) * cos
        return self.power * ncx2.ppf(q, self.dim, point_sq / self.power)

    def cdf(self, d, point_sq):
        if self.law == "spherical":
            r2 = self.dim * self.power
            denom = 2.0 * np.sqrt(r2 * point_sq)
            cos = np.where(denom > 0, (r2 + point_sq - d) / np.where(denom > 0, denom, 1.0), 0.0)
            return betainc(self.a, self.a, np.clip((1.0 - cos) / 2.0, 0.0, 1.0))
        return ncx2.cdf(d / self.power, self.dim, point_sq / self.power)


def _index_from_uniform(u, high, exclude=None):
    """Map Uniform(0,1) draws to a uniform integer in [1, high], optionally skipping ``exclude``.

    Indices beyond 2^62 cannot be held in int64; they are returned as float64
    (rounded to 53 bits), which only affects the reported index value.
    """
    high = np.asarray(high, dtype=np.float64)
    span = high if exclude is None else high - 1
    draw = np.floor(u * np.maximum(span, 1)) + 1
    if np.all(high < 2.0**62):
        draw = draw.astype(np.int64)
    if exclude is not None:
        draw = np.where(draw >= exclude, draw + 1, draw)
    return draw


def _extremal_chunk(scheme: Scheme, rng, t) -> TrialBatch:
    sys_ = scheme.system
    k, n = sys_.k, sys_.n
    N = len(scheme.M)
    Mf = np.asarray(scheme.M, dtype=np.float64)
    logM = scheme.log_M
    src_law = _DistanceLaw(sys_.src_codebook, k, sys_.sigma2 - sys_.D)
    ch_law = _DistanceLaw(sys_.ch_codebook, n, sys_.P)

    # fixed draw order: S, U_enc, U_J, X, Z, U_comp, U_jhat, U_repro
    S = scheme.source.sample((t, k), rng)
    u_enc = rng.random(t)
    s_sq = np.einsum("ij,ij->i", S, S)
    I = classify_power(s_sq / k, scheme.partition).astype(np.int64)
    active = _active_types(scheme, I)
    MI = np.where(active, Mf[np.maximum(I - 1, 0)], 1.0)
    J = np.where(active, _index_from_uniform(rng.random(t), MI), 0)
    X = sample_codewords(sys_.ch_codebook, n, sys_.P, rng, (t,))
    Z = scheme.noise.sample((t, n), rng)
    u_comp = rng.random((t, N))
    u_jhat = rng.random(t)
    u_repro = rng.random(t)

    q_enc = _min_quantile(u_enc, MI)
    enc_d = src_law.quantile(q_enc, s_sq)

    Y = X + Z
    y_sq = np.einsum("ij,ij->i", Y, Y)
    diff = Y - X
    true_score = np.einsum("ij,ij->i", diff, diff) + 2.0 * logM[np.maximum(I - 1, 0)]
    others = np.broadcast_to(Mf, (t, N)) - (np.arange(1, N + 1)[None, :] == I[:, None])
    has = others > 0
    q_comp = _min_quantile(u_comp, np.where(has, others, 1.0))
    comp_d = ch_law.quantile(q_comp, np.broadcast_to(y_sq[:, None], (t, N)))
    comp_score = np.where(has, comp_d + 2.0 * logM[None, :], np.inf)
    best = np.argmin(comp_score, axis=1)
    best_score = comp_score[np.arange(t), best]
    correct = true_score <= best_score
    Ihat = np.where(correct, I, best + 1)
    same = ~correct & (Ihat == I)
    # by exchangeability the winning competitor's index is uniform over its candidates
    high = Mf[np.maximum(Ihat - 1, 0)]
    Jhat = np.where(correct, J,
                    np.where(same, _index_from_uniform(u_jhat, high, exclude=J),
                             _index_from_uniform(u_jhat, high)))

    # reproduction: the encoder's codeword, a non-minimal one of the same type, or a fresh one
    q_repro = np.where(same, q_enc + (1.0 - q_enc) * u_repro, u_repro)
    repro_d = np.where(correct, enc_d, src_law.quantile(np.where(correct, 0.5, q_repro), s_sq))
    dist = repro_d / k

    I = np.where(active, I, 0)
    Ihat, Jhat = np.where(active, Ihat, 0), np.where(active, Jhat, 0)
    dist = np.where(active, dist, np.nan)
    return TrialBatch(categorize(active, correct | same, correct, dist, sys_.D), I, J, Ihat, Jhat, dist)


def _fixed_ensemble(scheme: Scheme, master_seed: int):
    rng = block_rng(master_seed, _FIXED_ENSEMBLE_BLOCK)
    sys_ = scheme.system
    total = int(sum(scheme.M))
    src = sample_codewords(sys_.src_codebook, sys_.k, sys_.sigma2 - sys_.D, rng, (total,))
    ch = sample_codewords(sys_.ch_codebook, sys_.n, sys_.P, rng, (total,))
    return src, ch


def run_batch(scheme: Scheme, rng: np.random.Generator, size: int, ensemble=None) -> TrialBatch:
    """Run ``size`` trials with randomness drawn from ``rng``."""
    if size < 1:
        raise ConfigurationError("batch size must be >= 1")
    if scheme.sampler == "extremal":
        per_trial = 8 * (len(scheme.M) + scheme.system.k + scheme.system.n)
    elif ensemble is None:
        per_trial = int(sum(scheme.M)) * (scheme.system.k + scheme.system.n + 2)
    else:
        per_trial = int(sum(scheme.M)) * 3 + scheme.system.k + scheme.system.n
    chunk = max(1, min(size, _MEMORY_FLOATS // max(per_trial, 1)))
    parts = []
    for start in range(0, size, chunk):
        t = min(chunk, size - start)
        if scheme.sampler == "extremal":
            parts.append(_extremal_chunk(scheme, rng, t))
        else:
            parts.append(_explicit_chunk(scheme, rng, t, ensemble))
    return parts[0] if len(parts) == 1 else TrialBatch.concat(parts)


def block_rng(master_seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for one trial block."""
    if not 0 <= master_seed < 2**64:
        raise ConfigurationError(f"master seed must fit in an unsigned 64-bit integer, got {master_seed}")
    return np.random.Generator(np.random.Philox(key=np.array([master_seed, block], dtype=np.uint64)))


def run_trial(scheme: Scheme, rng: np.random.Generator) -> TrialOutcome:
    """One complete pass: source, encoder, channel, decoder, reproduction."""
    b = run_batch(scheme, rng, 1)
    return TrialOutcome(CATEGORIES[int(b.category[0])], int(b.I[0]), int(b.J[0]), int(b.Ihat[0]),
                        int(b.Jhat[0]), float(b.distortion[0]))


BatchFn = Callable[[Scheme, np.random.Generator, int], TrialBatch]


def _run_block(args):
    scheme, master_seed, block, size, batch_fn, keep_records = args
    rng = block_rng(master_seed, block)
    if batch_fn is not None:
        batch = batch_fn(scheme, rng, size)
    elif scheme.fixed_ensemble and scheme.sampler == "explicit":
        batch = run_batch(scheme, rng, size, ensemble=_fixed_ensemble(scheme, master_seed))
    else:
        batch = run_batch(scheme, rng, size)
    N = len(scheme.M)
    counts = np.bincount(batch.category, minlength=5).astype(np.int64)
    typed = batch.I > 0
    occupancy = np.bincount(batch.I[typed] - 1, minlength=N).astype(np.int64)
    failed = typed & (batch.category != SUCCESS)
    errors = np.bincount(batch.I[failed] - 1, minlength=N).astype(np.int64)
    return counts, occupancy, errors, (batch if keep_records else None)


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials <= 0:
        raise DomainError("Wilson interval needs at least one trial")
    z = float(norm.ppf(0.5 + level / 2))
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


@dataclass
class SimulationSummary:
    trials: int
    counts: dict
    p_e_hat: float
    wilson_ci: tuple
    per_type: list
    master_seed: int
    config: dict = field(default_factory=dict)
    records: TrialBatch | None = field(default=None, repr=False)

    @property
    def atypical_rate(self) -> float:
        return self.counts["Atypical"] / self.trials

    def decomposition(self) -> float:
        """Atypical rate plus sum over types of conditional error rate times occupancy."""
        total = self.atypical_rate
        for row in self.per_type:
            if row["occupancy"]:
                total += row["conditional_error_rate"] * (row["occupancy"] / self.trials)
        return total

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("records")
        out["wilson_ci"] = list(self.wilson_ci)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False)

    def records_csv(self) -> str:
        if self.records is None:
            raise ConfigurationError("per-trial records were not kept for this run")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "category", "I", "J", "Ihat", "Jhat", "distortion"])
        r = self.records
        for t in range(len(r)):
            d = r.distortion[t]
            w.writerow([t, CATEGORIES[r.category[t]], int(r.I[t]), int(r.J[t]), int(r.Ihat[t]), int(r.Jhat[t]),
                        "" if math.isnan(d) else format(d, ".17g")])
        return buf.getvalue()


def estimate_pe(scheme: Scheme, trials: int, master_seed: int, workers: int = 1,
                config_echo: dict | None = None, keep_records: bool = False,
                batch_fn: BatchFn | None = None) -> SimulationSummary:
    """Estimate the ensemble excess-distortion probability over ``trials`` trials.

    The result depends only on (scheme, trials, master_seed); ``workers`` only
    changes wall-clock time.
    """
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")
    B = scheme.block_size
    jobs = [(scheme, master_seed, b, min(B, trials - b * B), batch_fn, keep_records)
            for b in range(math.ceil(trials / B))]
    if workers == 1 or len(jobs) == 1:
        results = [_run_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    N = len(scheme.M)
    counts = np.zeros(5, dtype=np.int64)
    occupancy = np.zeros(N, dtype=np.int64)
    errors = np.zeros(N, dtype=np.int64)
    for c, o, e, _ in results:
        counts += c
        occupancy += o
        errors += e
    failures = int(counts[1:].sum())
    per_type = []
    for i in range(N):
        occ, err = int(occupancy[i]), int(errors[i])
        per_type.append({
            "type": i + 1, "level": float(scheme.partition.levels[i + 1]), "M": int(scheme.M[i]),
            "occupancy": occ, "errors": err,
            "conditional_error_rate": err / occ if occ else None,
        })
    records = TrialBatch.concat([r[3] for r in results]) if keep_records else None
    return SimulationSummary(
        trials=trials,
        counts={name: int(c) for name, c in zip(CATEGORIES, counts)},
        p_e_hat=failures / trials,
        wilson_ci=wilson_interval(failures, trials),
        per_type=per_type,
        master_seed=master_seed,
        config=dict(config_echo or {}),
        records=records,
    )


# decoder error bounds for a single type ------------------------------------------

@dataclass(frozen=True)
class BoundEstimate:
    value: float
    stderr: float

    def ci(self, level: float = 0.95) -> tuple[float, float]:
        z = float(norm.ppf(0.5 + level / 2))
        return self.value - z * self.stderr, self.value + z * self.stderr


def _outer_draws(scheme, samples, rng):
    sys_ = scheme.system
    X = sample_codewords(sys_.ch_codebook, sys_.n, sys_.P, rng, (samples,))
    Z = scheme.noise.sample((samples, sys_.n), rng)
    Y = X + Z
    return np.einsum("ij,ij->i", Y, Y), np.einsum("ij,ij->i", Z, Z)


def _pairwise(scheme, threshold, y_sq, rng, inner, inner_samples):
    """P(||Xbar - y||^2 <= threshold) for a fresh channel codeword Xbar, per row."""
    sys_ = scheme.system
    if inner == "analytic" and sys_.ch_codebook in ("spherical", "iid"):
        law = _DistanceLaw(sys_.ch_codebook, sys_.n, sys_.P)
        return np.where(threshold >= 0, law.cdf(np.maximum(threshold, 0.0), y_sq), 0.0)
    if inner != "sample" and inner != "analytic":
        raise ConfigurationError(f"inner must be 'analytic' or 'sample', got {inner!r}")
    # inner Monte Carlo; by rotation invariance place y on the first axis
    out = np.empty(len(y_sq))
    y_norm = np.sqrt(y_sq)
    for r in range(len(y_sq)):
        Xb = sample_codewords(sys_.ch_codebook, sys_.n, sys_.P, rng, (inner_samples,))
        d = np.einsum("ij,ij->i", Xb, Xb) - 2 * Xb[:, 0] * y_norm[r] + y_sq[r]
        out[r] = np.mean(d <= threshold[r])
    return out


def rcu_bounds(scheme: Scheme, i: int, samples: int, rng: np.random.Generator,
               inner: str = "analytic", inner_samples: int = 1000) -> tuple[BoundEstimate, BoundEstimate]:
    """Nested Monte Carlo estimates of the upper and lower decoder-error bounds for type ``i``.

    Upper: min{1, E[sum_t M_t P(||Xbar - Y||^2 + 2 ln M_t <= ||Z||^2 + 2 ln M_i | X, Y)]},
    the union of pairwise events in which a competitor of type t beats the
    transmitted codeword.  Lower: 1 - (1 - E[P(||Xbar - Y||^2 <= ||Z||^2)])^(M_i - 1).
    """
    if not 1 <= i <= len(scheme.M) or scheme.M[i - 1] < 1:
        raise ConfigurationError(f"type {i} is not an active type")
    if samples < 2:
        raise ConfigurationError("need at least two outer samples")
    y_sq, z_sq = _outer_draws(scheme, samples, rng)
    logM = scheme.log_M
    union = np.zeros(samples)
    for t, m in enumerate(scheme.M):
        if m == 0:
            continue
        thr = z_sq + 2.0 * logM[i - 1] - 2.0 * logM[t]
        union += m * _pairwise(scheme, thr, y_sq, rng, inner, inner_samples)
    upper = BoundEstimate(min(1.0, float(union.mean())), float(union.std(ddof=1) / math.sqrt(samples)))

    pair = _pairwise(scheme, z_sq, y_sq, rng, inner, inner_samples)
    p_bar = float(pair.mean())
    se_p = float(pair.std(ddof=1) / math.sqrt(samples))
    m1 = scheme.M[i - 1] - 1
    lower_val = 1.0 - (1.0 - p_bar) ** m1
    lower_se = m1 * (1.0 - p_bar) ** max(m1 - 1, 0) * se_p
    return upper, BoundEstimate(lower_val, lower_se)


def rcu_upper(scheme: Scheme, i: int, samples: int, rng: np.random.Generator, **kw) -> float:
    return rcu_bounds(scheme, i, samples, rng, **kw)[0].value


def rcu_lower(scheme: Scheme, i: int, samples: int, rng: np.random.Generator, **kw) -> float:
    return rcu_bounds(scheme, i, samples, rng, **kw)[1].value


def conditional_decoder_errors(scheme: Scheme, i: int, trials: int, rng: np.random.Generator) -> int:
    """Number of decoding errors over ``trials`` transmissions of a type-``i`` message.

    Each trial draws a fresh channel codebook, a uniform codeword index and noise.
    """
    sys_ = scheme.system
    total = int(sum(scheme.M))
    offsets = scheme.offsets
    penalties = np.repeat(2.0 * scheme.log_M, scheme.M)
    chunk = max(1, _MEMORY_FLOATS // max(total * sys_.n, 1))
    errors = 0
    for start in range(0, trials, chunk):
        t = min(chunk, trials - start)
        ch = sample_codewords(sys_.ch_codebook, sys_.n, sys_.P, rng, (t, total))
        j = rng.integers(0, scheme.M[i - 1], t)
        sent = offsets[i - 1] + j
        Y = ch[np.arange(t), sent] + scheme.noise.sample((t, sys_.n), rng)
        errors += int(np.count_nonzero(batch_decode(batch_sq_distances(ch, Y), penalties) != sent))
    return errors


# moderate deviations schedule ------------------------------------------------------

@dataclass(frozen=True)
class MDSchedule:
    eta_n: float
    k_n: int


def md_schedule(n: int, eta_n: float, report: DispersionReport) -> MDSchedule:
    """Source length floor(n (rho* - eta_n)) for a backoff eta_n below rho*."""
    if not 0 < eta_n < report.rho_star:
        raise DomainError(f"eta_n must lie in (0, rho*={report.rho_star}), got {eta_n}")
    k = math.floor(n * (report.rho_star - eta_n))
    if k < 1:
        raise DomainError(f"backoff eta_n={eta_n} leaves no source symbols at n={n}")
    return MDSchedule(eta_n, k)
