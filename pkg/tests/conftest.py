import numpy as np
import pytest
from hypothesis import settings

from randrb import _assembly_py, kernels

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

BACKENDS = ["python"]
try:
    from randrb import _assembly as _assembly_cy
    BACKENDS.append("cython")
except ImportError:
    _assembly_cy = None


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per available assembly backend."""
    mod = _assembly_py if request.param == "python" else _assembly_cy
    monkeypatch.setattr(kernels, "assemble_cells", mod.assemble_cells)
    monkeypatch.setattr(kernels, "assemble_load", mod.assemble_load)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def heat_disc(mesh=8, T=0.5, n_times=16, kappa=None, **kw):
    """Small source-free heat problem on the unit square."""
    from randrb.fem import Constant, ProblemSpec, StructuredGrid
    from randrb.problems import sine_modes
    from randrb.timestep import Discretization
    grid = StructuredGrid(0, 1, 0, 1, mesh, mesh)
    kw.setdefault("u0", sine_modes)
    p = ProblemSpec(grid, T, n_times, kappa=kappa or Constant(1.0), **kw)
    return Discretization(p)
