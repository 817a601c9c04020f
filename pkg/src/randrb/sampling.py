"""Data-driven probability distributions over the time grid.

A data matrix holds one column per time point (load vectors or cell-wise
coefficient values).  Time points are drawn from uniform, squared-norm or
rank-``r`` leverage-score distributions built from such matrices.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .linalg import ZeroMatrix, svd
from .timestep import Discretization


class RankTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DataMatrix:
    B: np.ndarray
    source: str
    description: str = ""


@dataclass(frozen=True, eq=False)
class TimeSamplingDist:
    p: np.ndarray
    recipe: str

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("not a probability vector")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def n_times(self) -> int:
        return self.p.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_index", "probability"])
            for i, pi in enumerate(self.p):
                w.writerow([i, f"{pi:.17g}"])


def _normalized(w: np.ndarray) -> np.ndarray:
    p = w / w.sum()
    # absorb the rounding residue so the vector sums to one to machine precision
    k = int(np.argmax(p))
    p[k] += 1.0 - p.sum()
    return np.clip(p, 0.0, None)


def build_data_matrix(disc: Discretization, kind: str) -> DataMatrix:
    """Columns are the load vectors (``kind='rhs'``) or the cell values of the
    diffusion coefficient (``kind='kappa'``) at every time point."""
    p = disc.problem
    if kind == "rhs":
        B = np.column_stack([disc.rhs(l) for l in range(p.n_times)])
        return DataMatrix(B, "rhs", "load vectors F_l")
    if kind == "kappa":
        B = np.column_stack([p.kappa.cell_values(p.grid, l, p.time(l)) for l in range(p.n_times)])
        return DataMatrix(B, "coefficient", "cell values of kappa")
    raise ValueError(f"unknown data kind {kind!r}")


def uniform_dist(n_times: int) -> TimeSamplingDist:
    return TimeSamplingDist(np.full(n_times, 1.0 / n_times), "uniform")


def squared_norm_dist(B) -> TimeSamplingDist:
    B = B.B if isinstance(B, DataMatrix) else np.asarray(B, dtype=float)
    w = np.einsum("ij,ij->j", B, B)
    if w.sum() == 0.0:
        raise ZeroMatrix("squared-norm sampling needs a nonzero data matrix")
    return TimeSamplingDist(_normalized(w), "squared_norm")


def _right_singular_vectors(B, r, randomized, rng, oversample=10, power_iters=2):
    if not randomized:
        _, sigma, Vt = svd(B)
        return sigma, Vt
    # Gaussian sketch of the row space, a few power iterations, then a small SVD
    rng = np.random.default_rng(rng)
    k = min(r + oversample, min(B.shape))
    Y = B.T @ rng.standard_normal((B.shape[0], k))
    Q, _ = np.linalg.qr(Y)
    for _ in range(power_iters):
        Q, _ = np.linalg.qr(B @ Q)
        Q, _ = np.linalg.qr(B.T @ Q)
    _, sigma, Wt = svd(B @ Q)
    return sigma, Wt @ Q.T


def leverage_score_dist(B, r: int, randomized: bool = False, rng=None) -> TimeSamplingDist:
    """Rank-``r`` leverage scores ``p_i = (1/r) sum_{j<=r} V[i, j]**2``.

    ``randomized=True`` estimates the leading right singular vectors with a
    sketched SVD instead of a full dense one.
    """
    B = B.B if isinstance(B, DataMatrix) else np.asarray(B, dtype=float)
    if r < 1:
        raise RankTooLarge("r must be at least 1")
    sigma, Vt = _right_singular_vectors(B, r, randomized, rng)
    if sigma.size == 0 or sigma[0] == 0.0:
        raise ZeroMatrix("leverage scores need a nonzero data matrix")
    rank = int(np.count_nonzero(sigma > max(B.shape) * np.finfo(float).eps * sigma[0]))
    if r > rank:
        raise RankTooLarge(f"r = {r} exceeds the numerical rank {rank}")
    w = np.sum(Vt[:r] ** 2, axis=0) / r
    return TimeSamplingDist(_normalized(w), f"leverage({r})")


def draw_time_indices(dists: Iterable, n_t: int, rng, dedupe: bool = False) -> list:
    """Draw ``count`` indices from each ``(dist, count)`` pair with replacement,
    concatenate, and drop every index ``<= n_t``.

    Duplicates are kept unless ``dedupe`` is set (first occurrence wins).
    """
    rng = np.random.default_rng(rng)
    drawn = []
    for dist, count in dists:
        if count < 0:
            raise ValueError("negative draw count")
        if count:
            drawn.extend(int(i) for i in rng.choice(dist.n_times, size=count, p=dist.p))
    kept = [i for i in drawn if i > n_t]
    if dedupe:
        kept = list(dict.fromkeys(kept))
    return kept


def column_subset_error(B, cols: Sequence[int]) -> float:
    """``||B - C C^+ B||_F`` for the selected columns ``C = B[:, cols]``."""
    B = B.B if isinstance(B, DataMatrix) else np.asarray(B, dtype=float)
    if len(cols) == 0:
        raise ValueError("need at least one column")
    C = B[:, list(cols)]
    U, s, _ = svd(C)
    if s.size == 0 or s[0] == 0.0:
        return float(np.linalg.norm(B))
    Q = U[:, s > max(C.shape) * np.finfo(float).eps * s[0]]
    return float(np.linalg.norm(B - Q @ (Q.T @ B)))


def best_rank_error(B, r: int) -> float:
    """``||B - B_r||_F`` from the trailing singular values."""
    s = svd(np.asarray(B, dtype=float))[1]
    return float(np.sqrt(np.sum(s[r:] ** 2)))
