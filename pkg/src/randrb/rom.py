"""Galerkin reduced-order model on a reduced basis and its error metrics."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linalg import SingularMatrix
from .timestep import Discretization, Trajectory


class ZeroDenominator(ZeroDivisionError):
    pass


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """Projected matrices; ``A`` has one entry per time index, or a single
    entry when the stiffness does not depend on time."""

    U: np.ndarray
    M: np.ndarray
    A: list
    F: np.ndarray
    u0: np.ndarray
    dt: float

    @property
    def dim(self) -> int:
        return self.U.shape[1]

    def stiffness(self, l: int) -> np.ndarray:
        return self.A[0] if len(self.A) == 1 else self.A[l]


@dataclass(frozen=True, eq=False)
class ErrorReport:
    rel_l2h1: float
    rel_l2t: np.ndarray
    dim: int

    def to_csv(self, path, times=None) -> None:
        """Rows ``record,time_index,time,value``: one ``rel_l2t`` row per time
        index, then ``rel_l2h1`` and ``dimension`` summary rows."""
        times = np.arange(self.rel_l2t.size) if times is None else times
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["record", "time_index", "time", "value"])
            for l, (t, e) in enumerate(zip(times, self.rel_l2t)):
                w.writerow(["rel_l2t", l, f"{t:.17g}", f"{e:.17g}"])
            w.writerow(["rel_l2h1", "", "", f"{self.rel_l2h1:.17g}"])
            w.writerow(["dimension", "", "", self.dim])


def project(disc: Discretization, U: np.ndarray) -> ReducedSystem:
    U = np.asarray(U, dtype=float)
    MU = disc.M @ U
    Mr = U.T @ MU
    if disc.problem.stiffness_time_independent:
        A = [U.T @ (disc.stiffness(0) @ U)]
    else:
        A = [U.T @ (disc.stiffness(l) @ U) for l in range(disc.n_times)]
    F = np.column_stack([U.T @ disc.rhs(l) for l in range(disc.n_times)])
    u0 = scipy.linalg.solve(Mr, MU.T @ disc.u0, assume_a="pos")
    return ReducedSystem(U, Mr, A, F, u0, disc.dt)


def solve_reduced(system: ReducedSystem, n_times: int):
    """Reduced implicit Euler trajectory and its lift to the full space.

    Returns ``(reduced, lifted)`` with reduced states of shape ``(N, n_times)``
    and a lifted :class:`Trajectory`.
    """
    N = system.dim
    red = np.empty((N, n_times))
    red[:, 0] = system.u0
    dt = system.dt
    lu = None
    if len(system.A) == 1:
        lu = scipy.linalg.lu_factor(system.M + dt * system.A[0], check_finite=False)
        if np.any(np.diag(lu[0]) == 0):
            raise SingularMatrix("reduced step matrix is singular")
    for l in range(1, n_times):
        rhs = dt * system.F[:, l] + system.M @ red[:, l - 1]
        if lu is not None:
            red[:, l] = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
        else:
            try:
                red[:, l] = np.linalg.solve(system.M + dt * system.stiffness(l), rhs)
            except np.linalg.LinAlgError as exc:
                raise SingularMatrix(f"reduced step matrix at index {l}") from exc
    return red, Trajectory(0, n_times - 1, system.U @ red)


def _states(tr) -> np.ndarray:
    return tr.states if isinstance(tr, Trajectory) else np.asarray(tr)


def _sq_norms(X: np.ndarray, G) -> np.ndarray:
    return np.einsum("ij,ij->j", X, G @ X)


def rel_l2h1_error(full, lifted, H1, dt: float) -> float:
    """Relative space-time error, rectangle rule over all time points ``l = 0..``."""
    U, V = _states(full), _states(lifted)
    if U.shape != V.shape:
        raise ValueError("trajectories differ in shape")
    den = dt * _sq_norms(U, H1).sum()
    if den <= 0:
        raise ZeroDenominator("reference trajectory has zero norm")
    return float(np.sqrt(dt * _sq_norms(U - V, H1).sum() / den))


def rel_l2t_error(full, lifted, M) -> np.ndarray:
    """Per-time relative error ``||e_l||_M / ||u_l||_M``; NaN where ``u_l = 0``."""
    U, V = _states(full), _states(lifted)
    if U.shape != V.shape:
        raise ValueError("trajectories differ in shape")
    num = np.sqrt(np.maximum(_sq_norms(U - V, M), 0.0))
    den = np.sqrt(np.maximum(_sq_norms(U, M), 0.0))
    out = np.full(U.shape[1], np.nan)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def evaluate(disc: Discretization, U: np.ndarray, full: Trajectory) -> ErrorReport:
    """Project, solve and compare against the full trajectory."""
    system = project(disc, U)
    _, lifted = solve_reduced(system, disc.n_times)
    return ErrorReport(rel_l2h1_error(full, lifted, disc.H1, disc.dt),
                       rel_l2t_error(full, lifted, disc.M), system.dim)
