"""Built-in benchmark problems.

Mesh resolution is given as cells per unit length; defaults are desk-scale.
Where only a plotted profile is available (stove power profiles, inflow
switching times, the advection pulse) the values below are reconstructions chosen to
reproduce the plotted shapes and leverage-score levels.
"""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from . import fem
from .fem import Constant, ProblemSpec, SeparableSum, StructuredGrid

_EPS = 1e-9


class UnknownProblem(KeyError):
    pass


def pulse(a: float, b: float, amplitude: float = 1.0) -> Callable[[float], float]:
    """``amplitude`` on the closed interval ``[a, b]``, zero elsewhere."""
    def g(t):
        return amplitude if a - _EPS <= t <= b + _EPS else 0.0
    g.__qualname__ = f"pulse({a}, {b}, {amplitude})"
    return g


def trapezoid(a: float, b: float, ramp: float, amplitude: float = 1.0) -> Callable[[float], float]:
    """Zero outside ``(a, b)``, linear ramps of width ``ramp`` at both ends and
    ``amplitude`` in between."""
    if ramp <= 0 or 2 * ramp > b - a:
        raise ValueError("need 0 < ramp <= (b - a) / 2")

    def g(t):
        if t <= a or t >= b:
            return 0.0
        return amplitude * min(1.0, (t - a) / ramp, (b - t) / ramp)
    g.__qualname__ = f"trapezoid({a}, {b}, {ramp}, {amplitude})"
    return g


def box(x0: float, x1: float, y0: float, y1: float) -> Callable:
    """Indicator of a closed axis-aligned rectangle."""
    def h(x, y):
        return ((x >= x0 - _EPS) & (x <= x1 + _EPS) & (y >= y0 - _EPS) & (y <= y1 + _EPS)).astype(float)
    return h


def cell_box(grid: StructuredGrid, x0, x1, y0, y1) -> np.ndarray:
    """Cell-wise indicator of a rectangle: the covered fraction of each cell's
    area, so the field integrates to the rectangle's area on any mesh."""
    xc, yc = grid.cell_centers
    hx, hy = grid.hx, grid.hy
    ox = np.clip(np.minimum(xc + hx / 2, x1) - np.maximum(xc - hx / 2, x0), 0, None) / hx
    oy = np.clip(np.minimum(yc + hy / 2, y1) - np.maximum(yc - hy / 2, y0), 0, None) / hy
    return ox * oy


def sine_modes(x, y):
    return sum(np.sin(i * np.pi * x) * np.sin(i * np.pi * y) for i in (1, 2, 3))


def _cells(length: float, mesh: int) -> int:
    return max(2, int(round(length * mesh)))


def example1(mesh: int = 40, variant: str = "a") -> ProblemSpec:
    """Two spatially disjoint heat sources with different amplitudes (variant
    ``a``) or different temporal scales (variant ``b``)."""
    grid = StructuredGrid(0, 1, 0, 1, _cells(1, mesh), _cells(1, mesh))
    s1 = cell_box(grid, 0.2, 0.3, 0.2, 0.3)
    s2 = cell_box(grid, 0.7, 0.8, 0.7, 0.8)
    if variant == "a":
        terms = [(pulse(1, 4, 4.0), s1), (pulse(6, 9), s2)]
    elif variant == "b":
        terms = [(pulse(1, 7), s1), (pulse(9, 9.2), s2)]
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return ProblemSpec(grid, 10.0, 301, f=SeparableSum(terms), u0=0.0,
                       name=f"example1{variant}")


STOVES = ((0.2, 0.3, 0.2, 0.3), (0.45, 0.55, 0.45, 0.55), (0.65, 0.8, 0.65, 0.8))
STOVE_TIMES = ((0.3, 3.2), (3.3, 6.2), (6.3, 9.2))
STOVE_RAMP = 1.0
STOVE_POWER = 30.0


def example2(mesh: int = 40) -> ProblemSpec:
    """Heat equation with three stoves heated up and cooled down one after
    another (trapezoidal power profiles)."""
    grid = StructuredGrid(0, 1, 0, 1, _cells(1, mesh), _cells(1, mesh))
    terms = [(trapezoid(a, b, STOVE_RAMP, STOVE_POWER), cell_box(grid, *rect))
             for (a, b), rect in zip(STOVE_TIMES, STOVES)]
    return ProblemSpec(grid, 10.0, 301, f=SeparableSum(terms), u0=sine_modes,
                       name="example2")


def example3a(mesh: int = 100, b1: float = 10.0) -> ProblemSpec:
    """Advection-diffusion on a thin strip without source."""
    grid = StructuredGrid(0, 1, 0, 0.3, _cells(1, mesh), _cells(0.3, mesh))
    return ProblemSpec(grid, 5.0, 501, kappa=Constant(1.0), b_x=Constant(b1),
                       u0=sine_modes, name=f"example3a(b1={b1:g})")


EX3B_PULSE = (0.2, 1.05, 40.0)


def example3b(mesh: int = 100) -> ProblemSpec:
    """Slowly diffusing pulse transported to the right by a constant wind."""
    grid = StructuredGrid(0, 1, 0, 0.3, _cells(1, mesh), _cells(0.3, mesh))
    f = SeparableSum([(pulse(*EX3B_PULSE), cell_box(grid, 0.1, 0.2, 0.1, 0.2))])
    return ProblemSpec(grid, 5.0, 501, kappa=Constant(0.01), b_x=Constant(0.3),
                       f=f, u0=sine_modes, name="example3b")


CHANNELS_1 = ((0.5, 0.6, 0.2, 0.6), (1.0, 1.1, 0.2, 0.6))
CHANNELS_2 = ((1.6, 1.7, 0.2, 0.6),)
CHANNEL_VALUE = 1e3
CHANNEL_TIMES = ((2.0, 5.0), (8.0, 9.5))
INFLOW_TIMES = ((0.5, 3.5), (6.0, 7.5))


def layered_field(grid: StructuredGrid, seed: int = 0, log_range=(-1.0, 1.0),
                  roughness: float = 0.5) -> np.ndarray:
    """Cell-wise positive field: log-uniform value per horizontal layer of
    cells plus log-uniform cell-to-cell roughness."""
    rng = np.random.default_rng(seed)
    layer = rng.uniform(*log_range, size=grid.ny)
    jitter = rng.uniform(-roughness, roughness, size=(grid.ny, grid.nx))
    return 10.0 ** (layer[:, None] + jitter).ravel()


def example4_synthetic(mesh: int = 20, seed: int = 0) -> ProblemSpec:
    """Heat flow through a rough layered medium with switched high-conductivity
    channels and a switched inflow through part of the top boundary.

    Top and right sides are Neumann, left and bottom Dirichlet.
    """
    grid = StructuredGrid.rectangle(0, 2.2, 0, 0.6, _cells(2.2, mesh), _cells(0.6, mesh),
                                    neumann_sides=("top", "right"))
    k0 = layered_field(grid, seed)
    k1 = CHANNEL_VALUE * sum(cell_box(grid, *r) for r in CHANNELS_1)
    k2 = CHANNEL_VALUE * sum(cell_box(grid, *r) for r in CHANNELS_2)
    kappa = SeparableSum([(None, k0), (pulse(*CHANNEL_TIMES[0]), k1),
                          (pulse(*CHANNEL_TIMES[1]), k2)])

    def inflow(t):
        return 1.0 if any(a - _EPS <= t <= b + _EPS for a, b in INFLOW_TIMES) else 0.0

    top_strip = box(0.4, 1.8, 0.6, 0.6)
    g_N = SeparableSum([(inflow, top_strip)])
    u0 = box(0.5, 0.7, 0.3, 0.4)
    return ProblemSpec(grid, 10.0, 501, kappa=kappa, g_N=g_N, u0=u0,
                       name="example4_synthetic")


def heat_square(mesh: int = 20, T: float = 1.0, n_times: int = 31) -> ProblemSpec:
    """Source-free unit-square heat problem used for operator studies."""
    grid = StructuredGrid(0, 1, 0, 1, _cells(1, mesh), _cells(1, mesh))
    return ProblemSpec(grid, T, n_times, u0=sine_modes, name="heat_square")


REGISTRY = {
    "example1": (lambda mesh=40, **kw: example1(mesh, **kw), "two sources, amplitude contrast"),
    "example1b": (lambda mesh=40, **kw: example1(mesh, variant="b"), "two sources, time-scale contrast"),
    "example2": (example2, "stove problem: heat equation with three switched sources"),
    "example3a": (example3a, "advection-diffusion, b=(b1,0), kappa=1, no source"),
    "example3b": (example3b, "advection-diffusion, b=(0.3,0), kappa=0.01, pulsed source"),
    "example4_synthetic": (example4_synthetic, "layered medium, switched channels and inflow"),
    "heat_square": (heat_square, "source-free heat equation on the unit square"),
}


def builtin_problem(name: str, mesh: Optional[int] = None, **params) -> ProblemSpec:
    try:
        factory = REGISTRY[name][0]
    except KeyError:
        raise UnknownProblem(f"unknown problem {name!r}; choose from {sorted(REGISTRY)}") from None
    if mesh is not None:
        params["mesh"] = mesh
    return factory(**params)
