import math

import numpy as np
import pytest

from asymtensor import fields, mesh, tensor as tz


def test_abc_traceless_everywhere():
    recipe = fields.FieldRecipe(
        kind="abc", dims=(4, 4, 4),
        bounds=((0, 2 * math.pi),) * 3,
    )
    f = fields.generate(recipe)
    assert np.abs(tz.trace(f.tensors)).max() == 0.0
    assert f.periods == (2 * math.pi,) * 3


def test_abc_center_point_planar_balanced():
    b, c = math.sqrt(2.0 / 3.0), math.sqrt(1.0 / 3.0)
    j = fields.abc_jacobian(np.array([math.pi, math.pi, math.pi]), 1.0, b, c)
    expected = np.array([[0.0, 0.0, -1.0], [-b, 0.0, 0.0], [0.0, -c, 0.0]])
    np.testing.assert_allclose(j, expected, atol=1e-12)
    inv = tz.invariants(j)
    assert inv.minor == pytest.approx(0.0, abs=1e-12)
    assert inv.det == pytest.approx(-b * c, abs=1e-12)
    m = tz.mode(j)
    assert m.mu == math.inf and m.sign_p == 0 and m.sign_q == -1


def test_lorenz_jacobian_origin_eigenvalues():
    j = fields.lorenz_jacobian(np.zeros(3))
    # quadratic-formula oracle on the upper 2x2 block plus the -beta entry
    tr = -10.0 - 1.0
    dt = (-10.0) * (-1.0) - 10.0 * 28.0
    disc = math.sqrt(tr * tr - 4 * dt)
    lams = sorted([(tr + disc) / 2, (tr - disc) / 2, -8.0 / 3.0], reverse=True)
    got = sorted(np.linalg.eigvals(j).real, reverse=True)
    np.testing.assert_allclose(got, lams, atol=1e-9)
    assert lams[0] == pytest.approx(11.83, abs=0.01)
    assert tz.discriminant(j) > 0  # real domain


def test_lorenz_conjugation_symmetry():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-20, 20, (10000, 3))
    mirrored = pts * np.array([-1.0, -1.0, 1.0])
    j = fields.lorenz_jacobian(pts)
    jm = fields.lorenz_jacobian(mirrored)
    s = np.diag([-1.0, -1.0, 1.0])
    np.testing.assert_allclose(jm, np.einsum("ij,njk,kl->nil", s, j, s), atol=1e-12)
    # invariant fields are even under the symmetry
    for arr, arr_m in ((j, jm),):
        a = tz.deviator_part(arr)
        am = tz.deviator_part(arr_m)
        np.testing.assert_allclose(tz.minor(a), tz.minor(am), atol=1e-12)
        np.testing.assert_allclose(tz.det(a), tz.det(am), atol=1e-12)


def test_affine_field_exact():
    rng = np.random.default_rng(1)
    t0, tx, ty, tz_ = rng.uniform(-1, 1, (4, 3, 3))
    recipe = fields.FieldRecipe(
        kind="affine", dims=(3, 3, 3), bounds=((-1, 1), (-1, 1), (-1, 1)),
        params=(t0, tx, ty, tz_),
    )
    f = fields.generate(recipe)
    for ti in (0, 7, len(f.tets) - 1):
        lin = mesh.tet_linear(f, ti)
        np.testing.assert_allclose(lin.t0, t0, atol=1e-12)
        np.testing.assert_allclose(lin.tx, tx, atol=1e-12)
        np.testing.assert_allclose(lin.ty, ty, atol=1e-12)
        np.testing.assert_allclose(lin.tz, tz_, atol=1e-12)


def test_schur_recipe_field():
    recipe = fields.FieldRecipe(
        kind="schur", dims=(2, 2, 2), bounds=((0, 1),) * 3, params=(0.5, -0.2),
    )
    f = fields.generate(recipe)
    inv = tz.invariants(f.tensors[0])
    assert abs(inv.minor) < 1e-12
    assert abs(inv.tau_r - inv.tau_s) < 1e-12


@pytest.mark.parametrize("tpc", [5, 6])
def test_grid_tets_positive_and_conforming(tpc):
    verts, tets = fields.tetrahedral_grid((3, 2, 2), ((0, 3), (0, 2), (0, 2)), tpc)
    f = mesh.TetField(
        vertices=verts, tets=tets,
        tensors=np.broadcast_to(np.eye(3), (len(verts), 3, 3)).copy(),
    )
    vols = f.signed_volumes()
    assert (vols > 0).all()
    # volumes tile the box exactly
    assert vols.sum() == pytest.approx(3 * 2 * 2, rel=1e-12)
    # interior faces are shared by exactly two tets
    faces = {}
    for tet in tets:
        for k in range(4):
            face = tuple(sorted(np.delete(tet, k)))
            faces[face] = faces.get(face, 0) + 1
    assert set(faces.values()) <= {1, 2}


def test_five_tet_grid_mirror_symmetric():
    # the 5-tet decomposition is invariant under (x, y) -> (-x, -y) about the
    # grid center; tet corner sets map onto tet corner sets
    verts, tets = fields.tetrahedral_grid((4, 4, 3), ((-2, 2), (-2, 2), (0, 1)), 5)
    pos = {tuple(np.round(v, 12)): i for i, v in enumerate(verts)}
    mirrored = verts * np.array([-1.0, -1.0, 1.0])
    perm = np.array([pos[tuple(np.round(p, 12))] for p in mirrored])
    tet_set = {frozenset(t) for t in tets.tolist()}
    for t in tets:
        assert frozenset(perm[t].tolist()) in tet_set


def test_symmetric_axis_coords_bitwise():
    c = fields._axis_coords(-7.0, 7.0, 9)
    assert np.array_equal(c, -c[::-1])
