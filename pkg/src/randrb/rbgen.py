"""Randomized reduced basis generation from short local-in-time solves.

Time points are drawn from data-driven distributions; each drawn point
``idx`` starts a local solve on ``[t_{idx - n_t}, t_idx]`` from a random
initial condition, and the states at local steps ``k..n_t`` are collected.
Together with the first ``n_t`` steps of the initial-condition evolution the
snapshots are compressed by a truncated SVD.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .linalg import truncated_svd
from .sampling import draw_time_indices
from .timestep import Discretization, solve_trajectory
from .transfer import draw_random_initial


class EmptySampling(RuntimeError):
    pass


@dataclass(frozen=True)
class RbParams:
    """Parameters of one basis generation run.

    ``n_ic`` random initial conditions are used per drawn time point.  With
    ``separate_source`` the source is solved once from a zero initial state
    and the random initial conditions without source.
    """

    n_t: int = 15
    k: int = 13
    tol: float = 1e-8
    n_ic: int = 1
    separate_source: bool = False
    seed: int = 0
    dedupe: bool = False

    def __post_init__(self):
        if self.n_t < 1:
            raise ValueError("n_t must be at least 1")
        if not 1 <= self.k <= self.n_t:
            raise ValueError(f"need 1 <= k <= n_t, got k={self.k}, n_t={self.n_t}")
        if not 0 < self.tol <= 1:
            raise ValueError("tol must lie in (0, 1]")
        if self.n_ic < 1:
            raise ValueError("n_ic must be at least 1")

    @classmethod
    def default(cls, advection_dominated: bool = False, **kw) -> "RbParams":
        n_t = kw.pop("n_t", 15)
        k = kw.pop("k", n_t - (6 if advection_dominated else 2))
        return cls(n_t=n_t, k=k, **kw)


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """Column-stacked snapshots; ``meta[c] = (origin, end_index, offset)``."""

    columns: np.ndarray
    meta: tuple


@dataclass(frozen=True, eq=False)
class ReducedBasis:
    U: np.ndarray
    singular_values: np.ndarray
    params: dict = field(default_factory=dict)
    windows: tuple = ()
    n_steps: int = 0

    @property
    def dim(self) -> int:
        return self.U.shape[1]

    @property
    def n_dofs(self) -> int:
        return self.U.shape[0]


def window_rng(seed: int, window: int, ic: int) -> np.random.Generator:
    return np.random.default_rng([seed, 1, window, ic])


def draw_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, 0])


def _window_snapshots(disc: Discretization, params: RbParams, w: int, idx: int):
    """Snapshots and executed step count of window ``w`` ending at ``idx``."""
    start = idx - params.n_t
    lu = disc.stiffness_factorization(start)
    blocks = []
    steps = 0
    if params.separate_source:
        zero = np.zeros(disc.n_dofs)
        tr = solve_trajectory(disc, start, idx, zero, with_source=True)
        blocks.append(tr.states[:, params.k:])
        steps += params.n_t
    for ic in range(params.n_ic):
        x = draw_random_initial(None, window_rng(params.seed, w, ic), lu)
        tr = solve_trajectory(disc, start, idx, x, with_source=not params.separate_source)
        blocks.append(tr.states[:, params.k:])
        steps += params.n_t
    return blocks, steps


def collect_snapshots(disc: Discretization, params: RbParams, indices: Sequence[int],
                      executor=None):
    """Snapshot set for the given window end indices plus the initial-state
    evolution; returns ``(SnapshotSet, executed implicit Euler steps)``."""
    if params.n_t >= disc.n_times:
        raise ValueError("n_t must be smaller than the number of time points")

    def task(item):
        return _window_snapshots(disc, params, *item)

    items = list(enumerate(indices))
    results = map(task, items) if executor is None else executor.map(task, items)
    blocks, meta = [], []
    steps = 0
    for (w, idx), (wblocks, wsteps) in zip(items, results):
        for blk in wblocks:
            blocks.append(blk)
            meta.extend(("window", idx, off) for off in range(params.k, params.n_t + 1))
        steps += wsteps
    tr0 = solve_trajectory(disc, 0, params.n_t, disc.u0, with_source=True)
    blocks.append(tr0.states)
    meta.extend(("u0_evolution", params.n_t, off) for off in range(params.n_t + 1))
    steps += params.n_t
    return SnapshotSet(np.concatenate(blocks, axis=1), tuple(meta)), steps


def generate(disc: Discretization, params: RbParams, dists: Sequence, executor=None) -> ReducedBasis:
    """Reduced basis from randomly placed local solves.

    ``dists`` is a list of ``(TimeSamplingDist, count)`` pairs drawn from
    simultaneously.  Raises :class:`EmptySampling` when points were drawn but
    all of them fell into the first ``n_t`` steps.
    """
    requested = sum(c for _, c in dists)
    indices = draw_time_indices(dists, params.n_t, draw_rng(params.seed), params.dedupe)
    if requested and not indices:
        raise EmptySampling(
            f"all {requested} drawn time points lie in the first n_t={params.n_t} steps"
        )
    snaps, steps = collect_snapshots(disc, params, indices, executor)
    U, sigma = truncated_svd(snaps.columns, params.tol, return_singular_values=True)
    return ReducedBasis(U, sigma, asdict(params), tuple(indices), steps)


def pod_baseline(disc: Discretization, n_steps: int, tol: float) -> ReducedBasis:
    """Truncated SVD of the first ``n_steps`` steps of the global solution,
    initial state included."""
    if not 1 <= n_steps <= disc.n_times - 1:
        raise ValueError(f"n_steps must lie in [1, {disc.n_times - 1}]")
    tr = solve_trajectory(disc, 0, n_steps, disc.u0, with_source=True)
    U, sigma = truncated_svd(tr.states, tol, return_singular_values=True)
    return ReducedBasis(U, sigma, {"method": "pod", "n_steps": n_steps, "tol": tol},
                        n_steps=n_steps)
