"""Implicit Euler propagation, global and local in time.

A :class:`Discretization` lazily assembles and caches everything a problem
needs per time index: stiffness matrices, load vectors and the factorized
step matrices ``M + dt * A_l``.  Caches are filled once per index under a
lock and read freely afterwards.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Hashable

import numpy as np

from . import fem
from .linalg import Factorization, factorize


class IndexOutOfRange(IndexError):
    pass


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``u_start .. u_end`` stored column-wise, shape ``(N_D, end - start + 1)``."""

    start: int
    end: int
    states: np.ndarray

    def __post_init__(self):
        if self.states.shape[1] != self.end - self.start + 1:
            raise ValueError("number of states does not match the index range")

    def __len__(self):
        return self.states.shape[1]

    def at(self, l: int) -> np.ndarray:
        if not self.start <= l <= self.end:
            raise IndexOutOfRange(l)
        return self.states[:, l - self.start]

    @property
    def last(self) -> np.ndarray:
        return self.states[:, -1]


class _OnceCache:
    """Map of keys to values computed at most once, safe under threads."""

    def __init__(self, build: Callable, key: Callable = lambda l: l):
        self._build = build
        self._key = key
        self._data: dict = {}
        self._lock = threading.Lock()

    def __getitem__(self, l):
        k = self._key(l)
        try:
            return self._data[k]
        except KeyError:
            pass
        with self._lock:
            if k not in self._data:
                self._data[k] = self._build(l)
            return self._data[k]

    def __len__(self):
        return len(self._data)

    def __contains__(self, l):
        return self._key(l) in self._data


class StepCache(_OnceCache):
    """Factorizations of ``M + dt * A_l`` keyed by time index.

    For problems whose stiffness does not depend on time every index shares
    one factorization.
    """

    def __init__(self, disc: "Discretization"):
        key: Callable[[int], Hashable] = (
            (lambda l: 0) if disc.problem.stiffness_time_independent else (lambda l: l)
        )
        super().__init__(lambda l: factorize(disc.M + disc.dt * disc.stiffness(l)), key)

    def factorization(self, l: int) -> Factorization:
        return self[l]


class Discretization:
    """Assembled full-order model of a :class:`~randrb.fem.ProblemSpec`."""

    def __init__(self, problem: fem.ProblemSpec):
        self.problem = problem
        self.grid = problem.grid
        self.dofmap = fem.DofMap.interior(problem.grid)
        p = problem
        key = (lambda l: 0) if p.stiffness_time_independent else (lambda l: l)
        self._stiffness = _OnceCache(
            lambda l: fem.assemble_stiffness(self.grid, self.dofmap, p.kappa, p.b_x,
                                             p.b_y, p.c, l, p.time(l)), key)
        self._rhs = _OnceCache(
            lambda l: fem.assemble_rhs(self.grid, self.dofmap, p.f, p.g_N, l, p.time(l)),
            (lambda l: 0) if p.rhs_time_independent else (lambda l: l))
        self._stiffness_lu = _OnceCache(lambda l: factorize(self.stiffness(l)), key)
        self.step_cache = StepCache(self)

    @property
    def n_dofs(self) -> int:
        return self.dofmap.n_dofs

    @property
    def n_times(self) -> int:
        return self.problem.n_times

    @property
    def dt(self) -> float:
        return self.problem.dt

    @cached_property
    def M(self):
        return fem.assemble_mass(self.grid, self.dofmap)

    @cached_property
    def H1(self):
        return fem.h1_product(self.grid, self.dofmap)

    def stiffness(self, l: int):
        self._check(l)
        return self._stiffness[l]

    def rhs(self, l: int) -> np.ndarray:
        self._check(l)
        return self._rhs[l]

    def stiffness_factorization(self, l: int) -> Factorization:
        self._check(l)
        return self._stiffness_lu[l]

    @cached_property
    def u0(self) -> np.ndarray:
        u0 = self.problem.u0
        if callable(u0):
            return self.dofmap.interpolate(u0)
        u0 = np.asarray(u0, dtype=float)
        if u0.ndim == 0:
            return np.full(self.n_dofs, float(u0))
        if u0.shape != (self.n_dofs,):
            raise ValueError(f"u0 has shape {u0.shape}, expected ({self.n_dofs},)")
        return u0.copy()

    def _check(self, l: int):
        if not 0 <= l < self.n_times:
            raise IndexOutOfRange(f"time index {l} outside [0, {self.n_times - 1}]")


def step(cache: StepCache, M, F_l, dt: float, u_prev: np.ndarray, l: int) -> np.ndarray:
    """One implicit Euler step: solve ``(M + dt A_l) u_l = dt F_l + M u_prev``.

    ``F_l`` may be ``None`` for a source-free step.  ``u_prev`` may hold
    several states column-wise.
    """
    rhs = M @ u_prev
    if F_l is not None:
        rhs = rhs + (dt * F_l if rhs.ndim == 1 else dt * F_l[:, None])
    return cache.factorization(l).solve(rhs)


def solve_trajectory(disc: Discretization, i: int, j: int, u_init: np.ndarray,
                     with_source: bool = True) -> Trajectory:
    """Propagate ``u_init`` from time index ``i`` to ``j``.

    With ``with_source=False`` every load vector is taken as zero, which is
    the action of the transfer operator on ``u_init``.
    """
    if not 0 <= i < j <= disc.n_times - 1:
        raise IndexOutOfRange(f"need 0 <= i < j <= {disc.n_times - 1}, got i={i}, j={j}")
    u = np.asarray(u_init, dtype=float)
    if u.shape != (disc.n_dofs,):
        raise ValueError(f"initial state has shape {u.shape}, expected ({disc.n_dofs},)")
    states = np.empty((disc.n_dofs, j - i + 1))
    states[:, 0] = u
    for l in range(i + 1, j + 1):
        F = disc.rhs(l) if with_source else None
        u = step(disc.step_cache, disc.M, F, disc.dt, u, l)
        states[:, l - i] = u
    return Trajectory(i, j, states)


def propagate_block(disc: Discretization, i: int, j: int, X: np.ndarray) -> np.ndarray:
    """Source-free propagation of every column of ``X`` from ``i`` to ``j``."""
    if not 0 <= i < j <= disc.n_times - 1:
        raise IndexOutOfRange(f"need 0 <= i < j <= {disc.n_times - 1}, got i={i}, j={j}")
    X = np.array(X, dtype=float)
    for l in range(i + 1, j + 1):
        X = step(disc.step_cache, disc.M, None, disc.dt, X, l)
    return X
