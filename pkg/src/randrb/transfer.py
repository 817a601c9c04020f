"""Discrete transfer operators between two time indices.

``T_{i->j}`` maps a state at ``t_i`` to the source-free solution at ``t_j``.
Its leading left singular vectors give the best ``n``-dimensional space for
the states reachable at ``t_j``; a randomized range sketch approximates that
space from a handful of local solves.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .linalg import factorize, orthonormalize, svd
from .timestep import Discretization, propagate_block, solve_trajectory

DEFAULT_CAP = 5000


class CapExceeded(RuntimeError):
    pass


class InsufficientN(ValueError):
    pass


class RankDeficient(UserWarning):
    """Randomized images were numerically dependent; fewer columns returned."""


@dataclass(frozen=True, eq=False)
class TransferHandle:
    disc: Discretization
    i: int
    j: int

    def __post_init__(self):
        if not 0 <= self.i < self.j <= self.disc.n_times - 1:
            raise ValueError(f"need 0 <= i < j <= {self.disc.n_times - 1}")

    @property
    def n_dofs(self) -> int:
        return self.disc.n_dofs


@dataclass(frozen=True, eq=False)
class LocalSpace:
    basis: np.ndarray
    singular_values: Optional[np.ndarray]
    origin: str
    rank_deficient: bool = False

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def apply_transfer(h: TransferHandle, xi: np.ndarray) -> np.ndarray:
    return solve_trajectory(h.disc, h.i, h.j, xi, with_source=False).last


def materialize_transfer(h: TransferHandle, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Dense matrix of ``T_{i->j}``; column ``k`` is the image of ``e_k``."""
    if h.n_dofs > cap:
        raise CapExceeded(f"N_D = {h.n_dofs} exceeds the materialization cap {cap}")
    return propagate_block(h.disc, h.i, h.j, np.eye(h.n_dofs))


def optimal_space(h: TransferHandle, n: int, cap: int = DEFAULT_CAP,
                  T: Optional[np.ndarray] = None) -> LocalSpace:
    """Span of the ``n`` leading left singular vectors of the transfer operator.

    ``singular_values`` holds the leading ``n + 1`` values, so the last entry
    is the projection error of the space.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if T is None:
        T = materialize_transfer(h, cap)
    U, sigma, _ = svd(T)
    sv = np.zeros(n + 1)
    m = min(n + 1, sigma.size)
    sv[:m] = sigma[:m]
    return LocalSpace(U[:, :n].copy(), sv, "optimal")


def transfer_singular_values(h: TransferHandle, cap: int = DEFAULT_CAP) -> np.ndarray:
    return scipy.linalg.svdvals(materialize_transfer(h, cap))


def draw_random_initial(A_i, rng, factorization=None) -> np.ndarray:
    """Sample ``x ~ N(0, (A^T A)^{-1})`` as ``x = A^{-1} g`` with ``g`` standard normal.

    Pass ``factorization`` to reuse existing LU factors of ``A_i``.
    """
    rng = np.random.default_rng(rng)
    if factorization is None:
        factorization = factorize(A_i)
    g = rng.standard_normal(factorization.shape[0])
    return factorization.solve(g)


def task_rngs(seed, n: int) -> list:
    """Independent generators for ``n`` parallel tasks, derived from one seed."""
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def randomized_range(h: TransferHandle, n: int, seed, executor=None) -> LocalSpace:
    """Orthonormal basis of the images of ``n`` random initial conditions.

    Each image uses its own random stream derived from ``seed`` and the task
    index, so the result does not depend on how the tasks are scheduled.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    lu = h.disc.stiffness_factorization(h.i)
    rngs = task_rngs(seed, n)

    def task(k):
        return apply_transfer(h, draw_random_initial(None, rngs[k], lu))

    if executor is None:
        images = [task(k) for k in range(n)]
    else:
        images = list(executor.map(task, range(n)))
    Q = orthonormalize(np.column_stack(images))
    deficient = Q.shape[1] < n
    if deficient:
        warnings.warn(RankDeficient(f"images span only {Q.shape[1]} of {n} dimensions"),
                      stacklevel=2)
    return LocalSpace(Q, None, "randomized", deficient)


def projection_error(T: np.ndarray, space) -> float:
    """Spectral norm of ``(I - B B^T) T`` for the orthonormal basis ``B``."""
    B = space.basis if isinstance(space, LocalSpace) else np.asarray(space)
    if B.shape[0] != T.shape[0]:
        raise ValueError("basis and operator dimensions disagree")
    R = T - B @ (B.T @ T) if B.shape[1] else T
    return float(scipy.linalg.svdvals(R)[0])


def apriori_bound(sigma: Sequence[float], n: int, kappa_const: float) -> float:
    """Expected-error bound for a randomized space of dimension ``n``.

    Minimizes over all splits ``n = m + s`` with ``m, s >= 2`` of::

        kappa_const * ((1 + sqrt(m / (s - 1))) * sigma[m]
                       + e * sqrt(n) / s * sqrt(sum_{l > m} sigma_l**2))

    where ``sigma`` holds the singular values in non-increasing order and
    missing trailing values count as zero.
    """
    if n < 4:
        raise InsufficientN(f"the bound needs n >= 4, got {n}")
    s_all = np.asarray(sigma, dtype=float)
    best = math.inf
    for m in range(2, n - 1):
        s = n - m
        lead = s_all[m] if m < s_all.size else 0.0
        tail = math.sqrt(float(np.sum(s_all[m:] ** 2)))
        val = (1 + math.sqrt(m / (s - 1))) * lead + math.e * math.sqrt(n) / s * tail
        best = min(best, val)
    return kappa_const * best


def kappa_constant(disc: Discretization, i: int, cap: int = 3000) -> Optional[float]:
    """``sigma_max(A_i) lambda_max(M) / (sigma_min(A_i) lambda_min(M))`` computed
    densely, or ``None`` when ``N_D`` exceeds ``cap`` (bound not evaluated)."""
    if disc.n_dofs > cap:
        return None
    sa = scipy.linalg.svdvals(disc.stiffness(i).toarray())
    lm = scipy.linalg.eigvalsh(disc.M.toarray())
    return float(sa[0] * lm[-1] / (sa[-1] * lm[0]))
