import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darcy_benard.dofs import (
    FieldVector, build_dof_map, dirichlet_dofs, interpolate, l2_project, mass_matrix,
)
from darcy_benard.element import gauss_rule
from darcy_benard.mesh import BoundaryTag, build_unit_square
from darcy_benard.postprocess import integral

Q4 = gauss_rule(4)


def space(n, order):
    return build_dof_map(build_unit_square(n), order)


def test_dof_counts_n128():
    mesh = build_unit_square(128)
    assert 2 * build_dof_map(mesh, 2).n_dofs == 132098
    assert build_dof_map(mesh, 1).n_dofs == 16641


@pytest.mark.parametrize("n", [1, 3, 8])
def test_dof_counts(n):
    assert space(n, 1).n_dofs == (n + 1) ** 2
    assert space(n, 2).n_dofs == (2 * n + 1) ** 2


def test_single_cell_q2():
    assert space(1, 2).n_dofs == 9


@pytest.mark.parametrize("order", [1, 2])
def test_shared_nodes_map_to_one_index(order):
    V = space(4, order)
    # distinct global indices have distinct coordinates, and each appears in some cell
    assert np.unique(V.cell_to_global).size == V.n_dofs
    assert np.unique(np.round(V.dof_coords, 12), axis=0).shape[0] == V.n_dofs
    # every local node's coordinate matches its global coordinate
    mesh = V.mesh
    local = mesh.cell_origins()[:, None, :] + mesh.cell_size_h * V.element.node_coords[None]
    assert np.allclose(local, V.dof_coords[V.cell_to_global])


def test_dirichlet_dof_examples():
    all_tags = list(BoundaryTag)
    assert len(dirichlet_dofs(space(2, 1), all_tags)) == 8
    bottom = dirichlet_dofs(space(2, 2), [BoundaryTag.Bottom])
    assert len(bottom) == 5 and all(c[1] == 0.0 for _, c in bottom)
    assert len(dirichlet_dofs(space(4, 2), [BoundaryTag.Left, BoundaryTag.Right])) == 18


def test_dirichlet_dofs_listed_once():
    ids = [i for i, _ in dirichlet_dofs(space(3, 2), list(BoundaryTag))]
    assert len(ids) == len(set(ids)) == 4 * 6


def test_interpolate_constant_and_linear(rng):
    V = space(3, 2)
    assert np.array_equal(interpolate(V, lambda x, z: 1.0).values, np.ones(V.n_dofs))
    f = interpolate(V, lambda x, z: 1 - z)
    pts = rng.random((50, 2))
    assert np.allclose(V.evaluate(f.values, pts), 1 - pts[:, 1], atol=1e-14)


def test_interpolate_sine_at_center():
    V = space(2, 2)
    f = interpolate(V, lambda x, z: np.sin(np.pi * x + np.pi * z))
    center = np.flatnonzero(np.all(V.dof_coords == 0.5, axis=1))[0]
    assert abs(f.values[center]) <= 1e-15


@pytest.mark.parametrize("order", [1, 2])
def test_interpolation_reproduces_space_members(order, rng):
    V = space(4, order)
    c = rng.standard_normal(V.n_dofs)
    pts = V.dof_coords
    assert np.allclose(V.evaluate(c, pts), c, atol=1e-13)
    # interpolating a member (as a pointwise function) gives back its coefficients
    g = interpolate(V, lambda x, z: V.evaluate(c, np.column_stack([x, z])))
    assert np.allclose(g.values, c, atol=1e-13)


def test_l2_project_constant():
    V = space(4, 2)
    assert np.allclose(l2_project(V, lambda x, z: np.ones_like(x), Q4).values, 1.0, atol=1e-12)


def test_l2_project_linear_equals_interpolation():
    V = space(4, 2)
    f = lambda x, z: 3 * x - 1
    assert np.allclose(l2_project(V, f, Q4).values, interpolate(V, f).values, atol=1e-12)


def test_l2_project_preserves_mean():
    V = space(5, 2)
    c = l2_project(V, lambda x, z: np.sign(x - 0.5), Q4)
    assert abs(integral(c, V)) <= 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), order=st.sampled_from([1, 2]))
def test_l2_projection_idempotent(seed, order):
    V = space(3, order)
    c = np.random.default_rng(seed).standard_normal(V.n_dofs)
    proj = l2_project(V, lambda x, z: V.evaluate(c, np.column_stack([x.ravel(), z.ravel()])).reshape(x.shape), Q4)
    assert np.allclose(proj.values, c, atol=1e-10)


def test_mass_matrix_sums_to_area():
    assert abs(mass_matrix(space(3, 2), Q4).sum() - 1.0) < 1e-14


def test_field_vector_checks_length_and_role():
    V = space(2, 1)
    with pytest.raises(ValueError):
        FieldVector(np.zeros(3), "pressure", V)
    with pytest.raises(ValueError):
        FieldVector(np.zeros(V.n_dofs), "salinity", V)
    f = FieldVector(np.arange(V.n_dofs), "pressure", V)
    g = f.copy()
    g.values[0] = 42.0
    assert f.values[0] == 0.0
    assert np.asarray(f).shape == (9,)
