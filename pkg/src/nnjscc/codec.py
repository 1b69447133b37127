"""Modified minimum-distance encoder and modified nearest-neighbour decoder.

Type and codeword indices in results are 1-based, matching the pair set
{(i, j): 1 <= i <= N, 1 <= j <= M_i}; a type index of 0 means the source
was atypical.  Ties go to the smallest (i, j) in lexicographic order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import capacity
from .ensemble import ATYPICAL, CodeEnsemble, classify
from .errors import ConfigurationError

_CHUNK = 1 << 15


@dataclass(frozen=True)
class EncodeResult:
    type_index: int
    codeword_index: int
    encoder_distortion: float

    @property
    def atypical(self) -> bool:
        return self.type_index == ATYPICAL


@dataclass(frozen=True)
class DecodeResult:
    type_index: int
    codeword_index: int
    score: float


def distortion(x_vec, y_vec) -> float:
    x = np.asarray(x_vec, dtype=float)
    y = np.asarray(y_vec, dtype=float)
    if x.shape != y.shape:
        raise ConfigurationError(f"length mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    return float(diff @ diff) / x.size


def sq_distances(book: np.ndarray, y: np.ndarray) -> np.ndarray:
    """||book[m] - y||^2 for every row, in fixed row order and fixed summation order."""
    out = np.empty(book.shape[0])
    for start in range(0, book.shape[0], _CHUNK):
        diff = book[start:start + _CHUNK] - y
        out[start:start + _CHUNK] = np.einsum("ij,ij->i", diff, diff)
    return out


def encode(s_vec, ensemble: CodeEnsemble) -> EncodeResult:
    """Classify the source power, then pick the closest codeword of that type."""
    s = np.asarray(s_vec, dtype=float)
    i = classify(s, ensemble.partition)
    if i == ATYPICAL or ensemble.M[i - 1] == 0:
        return EncodeResult(ATYPICAL, 0, math.nan)
    d = sq_distances(ensemble.src_book(i), s)
    j = int(np.argmin(d))
    return EncodeResult(i, j + 1, float(d[j]) / s.size)


def _locate(ensemble: CodeEnsemble, flat: int) -> tuple[int, int]:
    offsets = ensemble.offsets
    i = int(np.searchsorted(offsets, flat, side="right"))
    return i, flat - int(offsets[i - 1]) + 1


def decode(y_vec, ensemble: CodeEnsemble) -> DecodeResult:
    """Minimise ||X(i, j) - y||^2 + 2 ln M_i over every stored channel codeword."""
    y = np.asarray(y_vec, dtype=float)
    if y.shape != (ensemble.n,):
        raise ConfigurationError(f"expected a length-{ensemble.n} channel output")
    score = sq_distances(ensemble.ch, y) + ensemble.penalties()
    flat = int(np.argmin(score))
    return DecodeResult(*_locate(ensemble, flat), float(score[flat]))


def mismatched_density(x_vec, y_vec, P: float) -> float:
    """n C(P) + ||y||^2 / (2(P+1)) - ||y - x||^2 / 2."""
    x = np.asarray(x_vec, dtype=float)
    y = np.asarray(y_vec, dtype=float)
    if x.shape != y.shape:
        raise ConfigurationError(f"length mismatch: {x.shape} vs {y.shape}")
    diff = y - x
    return x.size * capacity(P) + float(y @ y) / (2 * (P + 1)) - float(diff @ diff) / 2


def decode_via_density(y_vec, ensemble: CodeEnsemble, P: float) -> DecodeResult:
    """Maximise the mismatched information density minus ln M_i.

    Returns the same pair as :func:`decode`; ``score`` holds the maximised
    density-minus-log-size value rather than the distance objective.
    """
    y = np.asarray(y_vec, dtype=float)
    if y.shape != (ensemble.n,):
        raise ConfigurationError(f"expected a length-{ensemble.n} channel output")
    const = ensemble.n * capacity(P) + float(y @ y) / (2 * (P + 1))
    # density minus ln M_i, grouped so both decoders round the same sum d + 2 ln M
    metric = const - (sq_distances(ensemble.ch, y) + ensemble.penalties()) / 2
    flat = int(np.argmax(metric))
    return DecodeResult(*_locate(ensemble, flat), float(metric[flat]))


# batched kernels used by the Monte Carlo engine -------------------------------

def batch_sq_distances(books: np.ndarray, points: np.ndarray) -> np.ndarray:
    """books (T, C, d) or (C, d); points (T, d) -> (T, C) squared distances."""
    if books.ndim == 2:
        books = books[None]
    diff = books - points[:, None, :]
    return np.einsum("tcd,tcd->tc", diff, diff)


def batch_encode(src_dist: np.ndarray, I: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Per-trial argmin (1-based) over the source distances of the trial's own type.

    ``src_dist`` is (T, C); rows with I == 0 get J = 0.
    """
    T, C = src_dist.shape
    cols = np.arange(C)
    lo = offsets[np.maximum(I - 1, 0)]
    hi = offsets[np.maximum(I, 1)]
    masked = np.where((cols >= lo[:, None]) & (cols < hi[:, None]), src_dist, np.inf)
    flat = np.argmin(masked, axis=1)
    J = flat - lo + 1
    ok = (I > 0) & (hi > lo)
    return np.where(ok, J, 0), np.where(ok, flat, -1)


def batch_decode(ch_dist: np.ndarray, penalties: np.ndarray) -> np.ndarray:
    """Flat argmin of distance + penalty per trial; first index wins ties."""
    return np.argmin(ch_dist + penalties, axis=1)
