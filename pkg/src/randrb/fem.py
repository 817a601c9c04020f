"""Structured quadrilateral grids and bilinear (Q1) finite elements.

Vertices are numbered ``v = j * (nx + 1) + i`` and cells ``e = j * nx + i``
with ``i`` running in x.  Every integral uses 2x2 Gauss quadrature per cell
(2-point Gauss on boundary edges), which is exact for products of Q1
functions on rectangles.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from . import kernels
from .linalg import canonical

SIDES = ("bottom", "right", "top", "left")

_G = 0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)
# reference quadrature points (xi, eta) on the unit square, q = 2 * qy + qx
_QP = np.array([(_G[qx], _G[qy]) for qy in range(2) for qx in range(2)])
# local vertex a sits at reference corner (_CORNER[a, 0], _CORNER[a, 1])
_CORNER = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)


class NonpositiveDiffusion(ValueError):
    pass


def _shape_tables(hx: float, hy: float):
    xi, eta = _QP[:, 0], _QP[:, 1]
    cx, cy = _CORNER[:, 0], _CORNER[:, 1]
    fx = np.where(cx[None, :] == 1, xi[:, None], 1 - xi[:, None])
    fy = np.where(cy[None, :] == 1, eta[:, None], 1 - eta[:, None])
    dfx = np.where(cx[None, :] == 1, 1.0, -1.0) * np.ones_like(fx)
    dfy = np.where(cy[None, :] == 1, 1.0, -1.0) * np.ones_like(fy)
    N = fx * fy
    Dx = dfx * fy / hx
    Dy = fx * dfy / hy
    W = np.full(4, 0.25 * hx * hy)
    return (np.ascontiguousarray(N), np.ascontiguousarray(Dx),
            np.ascontiguousarray(Dy), W)


@dataclass(frozen=True, eq=False)
class StructuredGrid:
    """Rectangle ``(x0, x1) x (y0, y1)`` split into ``nx x ny`` equal cells.

    ``neumann`` maps a side name to a boolean array with one flag per edge
    segment on that side (segments ordered by increasing coordinate).  Sides
    that are missing are Dirichlet everywhere.
    """

    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int
    neumann: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 cells per direction")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("empty domain")
        tags = {}
        for side in SIDES:
            n = self.nx if side in ("bottom", "top") else self.ny
            flags = np.zeros(n, dtype=bool)
            if side in self.neumann:
                flags = np.asarray(self.neumann[side], dtype=bool).copy()
                if flags.shape != (n,):
                    raise ValueError(f"side {side!r} needs {n} edge tags, got {flags.shape}")
            flags.setflags(write=False)
            tags[side] = flags
        unknown = set(self.neumann) - set(SIDES)
        if unknown:
            raise ValueError(f"unknown sides {sorted(unknown)}")
        object.__setattr__(self, "neumann", tags)
        if all(tags[s].all() for s in SIDES):
            raise ValueError("the Dirichlet boundary must have positive measure")

    @classmethod
    def rectangle(cls, x0, x1, y0, y1, nx, ny, neumann_sides: Sequence[str] = (),
                  neumann_where: Optional[Callable] = None):
        """Grid with whole sides tagged Neumann, optionally filtered by a predicate
        on the edge midpoints ``neumann_where(x, y) -> bool array``."""
        g = cls(x0, x1, y0, y1, nx, ny)
        tags = {}
        for side in neumann_sides:
            xm, ym = g.side_midpoints(side)
            flags = np.ones(xm.shape, dtype=bool)
            if neumann_where is not None:
                flags &= np.asarray(neumann_where(xm, ym), dtype=bool)
            tags[side] = flags
        return cls(x0, x1, y0, y1, nx, ny, tags)

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def n_vertices(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    def vertex(self, i, j):
        return np.asarray(j) * (self.nx + 1) + np.asarray(i)

    @cached_property
    def vertex_coords(self):
        x = self.x0 + self.hx * np.arange(self.nx + 1)
        y = self.y0 + self.hy * np.arange(self.ny + 1)
        X, Y = np.meshgrid(x, y)
        return X.ravel(), Y.ravel()

    @cached_property
    def cell_vertices(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        i, j = i.ravel(), j.ravel()
        return np.stack([self.vertex(i, j), self.vertex(i + 1, j),
                         self.vertex(i + 1, j + 1), self.vertex(i, j + 1)], axis=1)

    @cached_property
    def cell_centers(self):
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        return (self.x0 + (i.ravel() + 0.5) * self.hx,
                self.y0 + (j.ravel() + 0.5) * self.hy)

    @cached_property
    def quadrature_points(self):
        """Physical coordinates ``(x, y)`` of shape ``(n_cells, 4)``."""
        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        xq = self.x0 + (i.ravel()[:, None] + _QP[None, :, 0]) * self.hx
        yq = self.y0 + (j.ravel()[:, None] + _QP[None, :, 1]) * self.hy
        return xq, yq

    @cached_property
    def shape_tables(self):
        return _shape_tables(self.hx, self.hy)

    def side_vertices(self, side: str) -> np.ndarray:
        """Vertices along a side in increasing coordinate order."""
        if side == "bottom":
            return self.vertex(np.arange(self.nx + 1), 0)
        if side == "top":
            return self.vertex(np.arange(self.nx + 1), self.ny)
        if side == "left":
            return self.vertex(0, np.arange(self.ny + 1))
        if side == "right":
            return self.vertex(self.nx, np.arange(self.ny + 1))
        raise ValueError(f"unknown side {side!r}")

    def side_midpoints(self, side: str):
        X, Y = self.vertex_coords
        v = self.side_vertices(side)
        return 0.5 * (X[v[:-1]] + X[v[1:]]), 0.5 * (Y[v[:-1]] + Y[v[1:]])

    @cached_property
    def neumann_edges(self):
        """``(v0, v1, length)`` arrays for every Neumann-tagged boundary edge."""
        v0, v1, length = [], [], []
        for side in SIDES:
            v = self.side_vertices(side)
            flags = self.neumann[side]
            v0.append(v[:-1][flags])
            v1.append(v[1:][flags])
            h = self.hx if side in ("bottom", "top") else self.hy
            length.append(np.full(int(flags.sum()), h))
        return np.concatenate(v0), np.concatenate(v1), np.concatenate(length)

    @cached_property
    def dirichlet_vertices(self) -> np.ndarray:
        marked = np.zeros(self.n_vertices, dtype=bool)
        for side in SIDES:
            v = self.side_vertices(side)
            d = ~self.neumann[side]
            marked[v[:-1][d]] = True
            marked[v[1:][d]] = True
        return marked


@dataclass(frozen=True, eq=False)
class DofMap:
    """Vertex to degree-of-freedom numbering; eliminated vertices map to -1."""

    grid: StructuredGrid
    vertex_to_dof: np.ndarray
    n_dofs: int

    @classmethod
    def interior(cls, grid: StructuredGrid) -> "DofMap":
        """Eliminate the Dirichlet vertices (homogeneous Dirichlet data)."""
        free = ~grid.dirichlet_vertices
        v2d = np.full(grid.n_vertices, -1, dtype=np.int64)
        v2d[free] = np.arange(int(free.sum()))
        v2d.setflags(write=False)
        return cls(grid, v2d, int(free.sum()))

    @classmethod
    def full(cls, grid: StructuredGrid) -> "DofMap":
        """Keep every vertex; gives the pre-elimination matrices."""
        v2d = np.arange(grid.n_vertices, dtype=np.int64)
        v2d.setflags(write=False)
        return cls(grid, v2d, grid.n_vertices)

    @cached_property
    def dof_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.vertex_to_dof >= 0)

    @cached_property
    def dof_coords(self):
        X, Y = self.grid.vertex_coords
        return X[self.dof_vertices], Y[self.dof_vertices]

    @cached_property
    def cell_dofs(self) -> np.ndarray:
        return self.vertex_to_dof[self.grid.cell_vertices]

    @cached_property
    def pattern(self):
        """CSR pattern ``(indptr, indices)`` and per-cell scatter positions."""
        cd = self.cell_dofs
        rows = np.repeat(cd[:, :, None], 4, axis=2)
        cols = np.repeat(cd[:, None, :], 4, axis=1)
        keep = (rows >= 0) & (cols >= 0)
        n = self.n_dofs
        keys = np.unique(rows[keep] * n + cols[keep])
        indptr = np.searchsorted(keys // n, np.arange(n + 1)).astype(np.int64)
        indices = (keys % n).astype(np.int64)
        scatter = np.full(rows.shape, -1, dtype=np.int64)
        scatter[keep] = np.searchsorted(keys, rows[keep] * n + cols[keep])
        return indptr, indices, np.ascontiguousarray(scatter)

    def interpolate(self, func: Callable) -> np.ndarray:
        """Nodal interpolant of ``func(x, y)`` on the degrees of freedom."""
        x, y = self.dof_coords
        return np.asarray(func(x, y), dtype=float) * np.ones_like(x)


# -- coefficient fields ------------------------------------------------------

SpatialField = Union[np.ndarray, Callable]


def _spatial_at_quadrature(h: SpatialField, grid: StructuredGrid) -> np.ndarray:
    if callable(h):
        xq, yq = grid.quadrature_points
        return np.asarray(h(xq, yq), dtype=float) * np.ones_like(xq)
    h = np.asarray(h, dtype=float).reshape(-1)
    if h.shape[0] != grid.n_cells:
        raise ValueError(f"cell field has {h.shape[0]} values, grid has {grid.n_cells} cells")
    return np.repeat(h[:, None], 4, axis=1)


def _spatial_at_points(h: SpatialField, x, y) -> np.ndarray:
    if not callable(h):
        raise TypeError("boundary data needs callable spatial parts")
    return np.asarray(h(x, y), dtype=float) * np.ones_like(x)


class CoefficientField:
    """A scalar data function of time and space."""

    time_independent: bool = False

    def at_quadrature(self, grid: StructuredGrid, l: int, t: float) -> np.ndarray:
        raise NotImplementedError

    def at_points(self, x, y, l: int, t: float) -> np.ndarray:
        raise NotImplementedError

    def cell_values(self, grid: StructuredGrid, l: int, t: float) -> np.ndarray:
        """Per-cell mean over the quadrature points."""
        return self.at_quadrature(grid, l, t).mean(axis=1)


@dataclass(frozen=True)
class Constant(CoefficientField):
    value: float = 0.0
    time_independent = True

    def at_quadrature(self, grid, l, t):
        return np.full((grid.n_cells, 4), float(self.value))

    def at_points(self, x, y, l, t):
        return np.full(np.shape(x), float(self.value))

    @property
    def is_zero(self) -> bool:
        return self.value == 0.0


@dataclass(frozen=True)
class SeparableSum(CoefficientField):
    """``sum_i g_i(t) h_i(x)``.

    Each term is ``(g, h)`` with ``g`` a callable of the time value (``None``
    for a constant factor 1) and ``h`` either a cell-wise array or a callable
    ``h(x, y)``.
    """

    terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(tuple(t) for t in self.terms))

    @property
    def time_independent(self) -> bool:
        return all(g is None for g, _ in self.terms)

    def time_factors(self, t: float) -> list:
        return [1.0 if g is None else float(g(t)) for g, _ in self.terms]

    def at_quadrature(self, grid, l, t):
        out = np.zeros((grid.n_cells, 4))
        for w, (_, h) in zip(self.time_factors(t), self.terms):
            if w != 0.0:
                out += w * _spatial_at_quadrature(h, grid)
        return out

    def at_points(self, x, y, l, t):
        out = np.zeros(np.shape(x))
        for w, (_, h) in zip(self.time_factors(t), self.terms):
            if w != 0.0:
                out += w * _spatial_at_points(h, x, y)
        return out


@dataclass(frozen=True, eq=False)
class GriddedTimeSeries(CoefficientField):
    """Piecewise-constant cell values, one row per time index."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("values must have shape (n_t, n_cells)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def time_independent(self) -> bool:
        return self.values.shape[0] == 1

    def row(self, l: int) -> np.ndarray:
        return self.values[0 if self.values.shape[0] == 1 else l]

    def at_quadrature(self, grid, l, t):
        return _spatial_at_quadrature(self.row(l), grid)

    def cell_values(self, grid, l, t):
        return self.row(l).copy()


def load_gridded_csv(path) -> tuple[int, int, GriddedTimeSeries]:
    """Read a cell-wise time series: a header line ``nx,ny,n_t`` followed by
    ``n_t`` rows of ``nx * ny`` cell values (x fastest).

    The header may optionally be preceded by the literal column-name line
    ``nx,ny,n_t``.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if [c.strip() for c in rows[0]] == ["nx", "ny", "n_t"]:
        rows = rows[1:]
    nx, ny, n_t = (int(c) for c in rows[0])
    values = np.array([[float(c) for c in r] for r in rows[1:]])
    if values.shape != (n_t, nx * ny):
        raise ValueError(f"expected {n_t} rows of {nx * ny} values, got {values.shape}")
    return nx, ny, GriddedTimeSeries(values)


def save_gridded_csv(path, nx: int, ny: int, series: GriddedTimeSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["nx", "ny", "n_t"])
        w.writerow([nx, ny, series.values.shape[0]])
        for row in series.values:
            w.writerow([f"{v:.17g}" for v in row])


# -- problem definition ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Space-time advection-diffusion-reaction problem on a structured grid.

    ``n_times`` equidistant time points ``t_l = l * T / (n_times - 1)``.
    ``u0`` is either a callable ``u0(x, y)`` (interpolated at the vertices)
    or a coefficient vector over the degrees of freedom.
    """

    grid: StructuredGrid
    T: float
    n_times: int
    kappa: CoefficientField = Constant(1.0)
    b_x: CoefficientField = Constant(0.0)
    b_y: CoefficientField = Constant(0.0)
    c: CoefficientField = Constant(0.0)
    f: CoefficientField = Constant(0.0)
    g_N: CoefficientField = Constant(0.0)
    u0: Union[Callable, np.ndarray, float] = 0.0
    name: str = "custom"

    def __post_init__(self):
        if self.n_times < 2:
            raise ValueError("need at least two time points")
        if not self.T > 0:
            raise ValueError("T must be positive")

    @property
    def dt(self) -> float:
        return self.T / (self.n_times - 1)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_times)

    def time(self, l: int) -> float:
        return l * self.dt

    @property
    def stiffness_time_independent(self) -> bool:
        return all(fld.time_independent for fld in (self.kappa, self.b_x, self.b_y, self.c))

    @property
    def rhs_time_independent(self) -> bool:
        return self.f.time_independent and self.g_N.time_independent


# -- assembly ----------------------------------------------------------------

def _empty_csr(dofmap: DofMap):
    indptr, indices, scatter = dofmap.pattern
    return indptr, indices, scatter, np.zeros(indices.shape[0])


def _finish(dofmap, indptr, indices, data) -> sp.csr_matrix:
    n = dofmap.n_dofs
    return canonical(sp.csr_matrix((data, indices, indptr), shape=(n, n)))


def assemble_operator(dofmap: DofMap, kappa_q, bx_q, by_q, c_q) -> sp.csr_matrix:
    """Assemble ``(k grad u, grad v) + (b . grad u, v) + (c u, v)`` from
    quadrature-point coefficient arrays of shape ``(n_cells, 4)``."""
    indptr, indices, scatter, data = _empty_csr(dofmap)
    N, Dx, Dy, W = dofmap.grid.shape_tables
    args = [np.ascontiguousarray(a, dtype=np.float64) for a in (kappa_q, bx_q, by_q, c_q)]
    kernels.assemble_cells(data, scatter, *args, N, Dx, Dy, W)
    return _finish(dofmap, indptr, indices, data)


def assemble_mass(grid: StructuredGrid, dofmap: DofMap) -> sp.csr_matrix:
    z = np.zeros((grid.n_cells, 4))
    return assemble_operator(dofmap, z, z, z, np.ones_like(z))


def assemble_stiffness(grid: StructuredGrid, dofmap: DofMap, kappa: CoefficientField,
                       b_x: CoefficientField, b_y: CoefficientField,
                       c: CoefficientField, l: int, t: float = 0.0) -> sp.csr_matrix:
    """Stiffness matrix ``A_l`` with all coefficients evaluated at time ``t``."""
    kq = kappa.at_quadrature(grid, l, t)
    if np.any(kq <= 0.0):
        raise NonpositiveDiffusion(f"diffusion coefficient has minimum {kq.min():.3e} at index {l}")
    return assemble_operator(dofmap, kq, b_x.at_quadrature(grid, l, t),
                             b_y.at_quadrature(grid, l, t), c.at_quadrature(grid, l, t))


def assemble_rhs(grid: StructuredGrid, dofmap: DofMap, f: CoefficientField,
                 g_N: CoefficientField, l: int, t: float = 0.0) -> np.ndarray:
    """Load vector: volume source plus Neumann edge integrals."""
    out = np.zeros(dofmap.n_dofs)
    if not (isinstance(f, Constant) and f.is_zero):
        N, _, _, W = grid.shape_tables
        fq = np.ascontiguousarray(f.at_quadrature(grid, l, t))
        kernels.assemble_load(out, np.ascontiguousarray(dofmap.cell_dofs), fq, N, W)
    if not (isinstance(g_N, Constant) and g_N.is_zero):
        v0, v1, length = grid.neumann_edges
        if v0.size:
            X, Y = grid.vertex_coords
            for s in _G:
                x = (1 - s) * X[v0] + s * X[v1]
                y = (1 - s) * Y[v0] + s * Y[v1]
                g = g_N.at_points(x, y, l, t) * 0.5 * length
                for v, phi in ((v0, 1 - s), (v1, s)):
                    d = dofmap.vertex_to_dof[v]
                    keep = d >= 0
                    np.add.at(out, d[keep], (g * phi)[keep])
    return out


def h1_product(grid: StructuredGrid, dofmap: DofMap) -> sp.csr_matrix:
    """Matrix of the H1 inner product ``(u, v) + (grad u, grad v)``."""
    one = np.ones((grid.n_cells, 4))
    z = np.zeros_like(one)
    return assemble_operator(dofmap, one, z, z, one)
