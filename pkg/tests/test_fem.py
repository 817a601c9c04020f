import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from randrb import _assembly_py, problems
from randrb.fem import (Constant, DofMap, GriddedTimeSeries, NonpositiveDiffusion,
                        ProblemSpec, SeparableSum, StructuredGrid, assemble_mass,
                        assemble_rhs, assemble_stiffness, h1_product, load_gridded_csv,
                        save_gridded_csv)

ZERO, ONE = Constant(0.0), Constant(1.0)


def _bilinear(grid, e, a, x, y):
    """Value and gradient of local basis function ``a`` of cell ``e`` from
    its defining corner formula, independent of the library tables."""
    i, j = e % grid.nx, e // grid.nx
    xl, yl = grid.x0 + i * grid.hx, grid.y0 + j * grid.hy
    sx = (x - xl) / grid.hx
    sy = (y - yl) / grid.hy
    cx, cy = [(0, 0), (1, 0), (1, 1), (0, 1)][a]
    fx, dfx = (sx, 1.0) if cx else (1 - sx, -1.0)
    fy, dfy = (sy, 1.0) if cy else (1 - sy, -1.0)
    return fx * fy, dfx * fy / grid.hx, fx * dfy / grid.hy


def _gauss(n):
    p, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (p + 1), 0.5 * w


def brute_force_operator(grid, dm, kappa, bx, by, c, order=3):
    """Loop over cells, basis pairs and a tensor Gauss rule."""
    pts, wts = _gauss(order)
    A = np.zeros((dm.n_dofs, dm.n_dofs))
    for e in range(grid.n_cells):
        i, j = e % grid.nx, e // grid.nx
        dofs = dm.cell_dofs[e]
        for px, wx in zip(pts, wts):
            for py, wy in zip(pts, wts):
                x = grid.x0 + (i + px) * grid.hx
                y = grid.y0 + (j + py) * grid.hy
                w = wx * wy * grid.hx * grid.hy
                vals = [_bilinear(grid, e, a, x, y) for a in range(4)]
                for a in range(4):
                    for b in range(4):
                        if dofs[a] < 0 or dofs[b] < 0:
                            continue
                        Na, Dxa, Dya = vals[a]
                        Nb, Dxb, Dyb = vals[b]
                        A[dofs[a], dofs[b]] += w * (kappa * (Dxa * Dxb + Dya * Dyb)
                                                    + bx * Na * Dxb + by * Na * Dyb + c * Na * Nb)
    return A


def test_mass_full_sums_to_area(backend):
    g = StructuredGrid(0, 1, 0, 1, 5, 7)
    M = assemble_mass(g, DofMap.full(g))
    assert M.sum() == pytest.approx(1.0, abs=1e-14)


def test_mass_interior_diagonal_hand_quadrature(backend):
    g = StructuredGrid(0, 1, 0, 1, 3, 3)
    h = 1 / 3
    M = assemble_mass(g, DofMap.interior(g)).toarray()
    np.testing.assert_allclose(np.diag(M), 4 * h * h / 9, rtol=1e-14)


def test_example2_grid_dimensions():
    g = StructuredGrid(0, 1, 0, 1, 100, 100)
    assert g.n_vertices == 101 ** 2
    assert DofMap.interior(g).n_dofs == 99 ** 2


def test_mass_spd_and_symmetric(backend):
    g = StructuredGrid(0, 2, 0, 1, 6, 4)
    M = assemble_mass(g, DofMap.interior(g)).toarray()
    np.testing.assert_allclose(M, M.T, atol=0)
    assert np.linalg.eigvalsh(M).min() > 0


def test_laplacian_spd(backend):
    g = StructuredGrid(0, 1, 0, 1, 6, 6)
    A = assemble_stiffness(g, DofMap.interior(g), ONE, ZERO, ZERO, ZERO, 0).toarray()
    np.testing.assert_allclose(A, A.T, atol=1e-14)
    assert np.linalg.eigvalsh(A).min() > 0


def test_reaction_adds_mass(backend):
    g = StructuredGrid(0, 1, 0, 1, 5, 5)
    dm = DofMap.interior(g)
    K = assemble_stiffness(g, dm, ONE, ZERO, ZERO, ZERO, 0)
    A = assemble_stiffness(g, dm, ONE, ZERO, ZERO, ONE, 0)
    np.testing.assert_allclose(A.toarray(), (K + assemble_mass(g, dm)).toarray(), rtol=0, atol=1e-15)


def test_advection_matches_brute_force(backend):
    g = StructuredGrid(0, 1, 0, 1, 8, 8)
    dm = DofMap.interior(g)
    A = assemble_stiffness(g, dm, ONE, Constant(10.0), ZERO, ZERO, 0).toarray()
    oracle = brute_force_operator(g, dm, 1.0, 10.0, 0.0, 0.0)
    assert np.max(np.abs(A - oracle)) <= 1e-12 * np.max(np.abs(oracle))


def test_full_operator_matches_brute_force_with_neumann(backend):
    g = StructuredGrid.rectangle(0, 1.5, 0, 0.5, 4, 3, neumann_sides=("top",))
    dm = DofMap.interior(g)
    A = assemble_stiffness(g, dm, Constant(0.7), Constant(-2.0), Constant(1.5),
                           Constant(0.3), 0).toarray()
    oracle = brute_force_operator(g, dm, 0.7, -2.0, 1.5, 0.3)
    np.testing.assert_allclose(A, oracle, rtol=0, atol=1e-12 * np.abs(oracle).max())


def test_nonpositive_diffusion_rejected():
    g = StructuredGrid(0, 1, 0, 1, 3, 3)
    with pytest.raises(NonpositiveDiffusion):
        assemble_stiffness(g, DofMap.interior(g), Constant(0.0), ZERO, ZERO, ZERO, 0)


def test_rhs_zero_data():
    g = StructuredGrid(0, 1, 0, 1, 4, 4)
    assert not np.any(assemble_rhs(g, DofMap.interior(g), ZERO, ZERO, 0))


def test_rhs_constant_integrates_to_area(backend):
    g = StructuredGrid(0, 2, 0, 0.5, 6, 3)
    F = assemble_rhs(g, DofMap.full(g), ONE, ZERO, 0)
    assert F.sum() == pytest.approx(1.0, abs=1e-14)


def test_rhs_neumann_integrates_edge_length():
    g = StructuredGrid.rectangle(0, 1, 0, 1, 5, 5, neumann_sides=("top",))
    F = assemble_rhs(g, DofMap.full(g), ZERO, ONE, 0)
    assert F.sum() == pytest.approx(1.0, abs=1e-14)


def test_inflow_strip_support():
    p = problems.example4_synthetic(mesh=10)
    dm = DofMap.interior(p.grid)
    F = assemble_rhs(p.grid, dm, p.f, p.g_N, 30, 1.0)
    x, y = dm.dof_coords
    nz = np.flatnonzero(F)
    assert nz.size > 0
    h = p.grid.hx
    assert np.all(np.isclose(y[nz], 0.6))
    assert np.all((x[nz] >= 0.4 - h - 1e-12) & (x[nz] <= 1.8 + h + 1e-12))
    assert not np.any(assemble_rhs(p.grid, dm, p.f, p.g_N, 100, 5.0))


def test_h1_product_definition(backend):
    g = StructuredGrid(0, 1, 0, 1, 5, 4)
    dm = DofMap.interior(g)
    H = h1_product(g, dm)
    ref = assemble_mass(g, dm) + assemble_stiffness(g, dm, ONE, ZERO, ZERO, ZERO, 0)
    np.testing.assert_allclose(H.toarray(), ref.toarray(), rtol=0, atol=1e-15)


def test_h1_norm_of_interior_constant_matches_quadrature():
    g = StructuredGrid(0, 1, 0, 0.8, 4, 5)
    dm = DofMap.interior(g)
    v = np.full(dm.n_dofs, 2.5)
    oracle = brute_force_operator(g, dm, 1.0, 0.0, 0.0, 1.0, order=4)
    assert v @ (h1_product(g, dm) @ v) == pytest.approx(v @ oracle @ v, rel=1e-13)


@given(st.integers(0, 2**32 - 1), st.floats(-20, 20), st.floats(-20, 20))
def test_coercive_for_constant_advection(seed, bx, by):
    g = StructuredGrid(0, 1, 0, 1, 5, 5)
    x = np.random.default_rng(seed).standard_normal(16)
    A = assemble_stiffness(g, DofMap.interior(g), ONE, Constant(bx), Constant(by), ZERO, 0)
    assert x @ (A @ x) >= -1e-12 * np.abs(A).sum() * (x @ x)


@given(st.integers(0, 2**32 - 1))
def test_symmetric_without_advection(seed):
    g = StructuredGrid(0, 1, 0, 1, 4, 6)
    kappa = SeparableSum([(None, np.exp(np.random.default_rng(seed).standard_normal(g.n_cells)))])
    A = assemble_stiffness(g, DofMap.interior(g), kappa, ZERO, ZERO, ONE, 0)
    assert sp.linalg.norm(A - A.T) <= 1e-13 * sp.linalg.norm(A)


def test_assembly_bit_identical():
    p = problems.example4_synthetic(mesh=5)
    dm = DofMap.interior(p.grid)
    A1 = assemble_stiffness(p.grid, dm, p.kappa, p.b_x, p.b_y, p.c, 70, 2.5)
    A2 = assemble_stiffness(p.grid, dm, p.kappa, p.b_x, p.b_y, p.c, 70, 2.5)
    assert A1.data.tobytes() == A2.data.tobytes()
    assert np.array_equal(A1.indices, A2.indices)


def test_backends_agree(rng):
    pytest.importorskip("randrb._assembly")
    from randrb import _assembly
    g = StructuredGrid(0, 1, 0, 1, 7, 5)
    dm = DofMap.interior(g)
    _, indices, scatter = dm.pattern
    N, Dx, Dy, W = g.shape_tables
    coeffs = [rng.standard_normal((g.n_cells, 4)) for _ in range(4)]
    d1, d2 = np.zeros(indices.size), np.zeros(indices.size)
    _assembly_py.assemble_cells(d1, scatter, *coeffs, N, Dx, Dy, W)
    _assembly.assemble_cells(d2, scatter, *coeffs, N, Dx, Dy, W)
    np.testing.assert_allclose(d1, d2, rtol=1e-13, atol=1e-15)
    f1, f2 = np.zeros(dm.n_dofs), np.zeros(dm.n_dofs)
    cd = np.ascontiguousarray(dm.cell_dofs)
    _assembly_py.assemble_load(f1, cd, coeffs[0], N, W)
    _assembly.assemble_load(f2, cd, coeffs[0], N, W)
    np.testing.assert_allclose(f1, f2, rtol=1e-13, atol=1e-15)


def test_gridded_csv_round_trip(tmp_path, rng):
    series = GriddedTimeSeries(rng.random((3, 12)))
    path = tmp_path / "k.csv"
    save_gridded_csv(path, 4, 3, series)
    nx, ny, back = load_gridded_csv(path)
    assert (nx, ny) == (4, 3)
    np.testing.assert_array_equal(back.values, series.values)


def test_gridded_csv_shape_checked(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("nx,ny,n_t\n2,2,2\n1,2,3,4\n")
    with pytest.raises(ValueError):
        load_gridded_csv(path)


def test_gridded_coefficient_is_cellwise():
    g = StructuredGrid(0, 1, 0, 1, 2, 2)
    series = GriddedTimeSeries(np.array([[1.0, 2, 3, 4], [5, 6, 7, 8]]))
    np.testing.assert_array_equal(series.at_quadrature(g, 1, 0.0)[:, 0], [5, 6, 7, 8])


def test_grid_invariants():
    with pytest.raises(ValueError):
        StructuredGrid(0, 1, 0, 1, 1, 4)
    with pytest.raises(ValueError):
        StructuredGrid.rectangle(0, 1, 0, 1, 3, 3, neumann_sides=("top", "bottom", "left", "right"))
    g = StructuredGrid.rectangle(0, 1, 0, 1, 3, 3, neumann_sides=("top",))
    assert DofMap.interior(g).n_dofs == 2 * 2 + 2


def test_problem_time_grid():
    p = ProblemSpec(StructuredGrid(0, 1, 0, 1, 2, 2), 10.0, 301)
    assert p.dt == pytest.approx(1 / 30)
    np.testing.assert_allclose(p.times[[0, -1]], [0, 10])
    with pytest.raises(ValueError):
        ProblemSpec(StructuredGrid(0, 1, 0, 1, 2, 2), 1.0, 1)
