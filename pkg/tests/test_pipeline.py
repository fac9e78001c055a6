import math

import numpy as np
import pytest

from asymtensor import fields, mesh, pipeline, tensor as tz
from asymtensor.errors import CurveOffSurface, InvalidSpec
from asymtensor.geometry import FeatureCurve, FeatureSurface, MeshAccumulator, watertight_report
from asymtensor.mesh import TetField
from asymtensor.pipeline import FeatureRequest, PipelineOptions


def abc_field(n=6):
    return fields.generate(fields.FieldRecipe(
        kind="abc", dims=(n, n, n), bounds=((0, 2 * math.pi),) * 3))


def sphere_magnitude_field(center=(0.0, 0.0, 0.0)):
    """Single large tet; ||T(x)||^2 - s^2 = |x - c|^2 - s^2."""
    c = np.asarray(center, dtype=float)
    t0 = np.diag(-c)
    tx = np.diag([1.0, 0.0, 0.0])
    ty = np.diag([0.0, 1.0, 0.0])
    tz_ = np.diag([0.0, 0.0, 1.0])
    verts = np.array([
        [-2.0, -2.0, -2.0], [6.0, -2.0, -2.0], [-2.0, 6.0, -2.0], [-2.0, -2.0, 6.0]])
    tensors = fields.affine_tensor_map(verts, t0, tx, ty, tz_)
    return TetField(vertices=verts, tets=np.array([[0, 1, 2, 3]]), tensors=tensors), c


def schur_cylinder_field(c0=0.5, n=5):
    """Affine Schur-form field: balanced surface = elliptic cylinder
    x^2 + x y + y^2 = c0^2; TDC = the two vertical lines (+-c0, -+c0, z)."""
    t0 = np.array([[0.0, -c0, 0.3], [c0, 0.0, 0.2], [0.0, 0.0, 0.0]])
    tx = np.zeros((3, 3)); tx[0, 0] = 1.0; tx[2, 2] = -1.0
    ty = np.zeros((3, 3)); ty[1, 1] = 1.0; ty[2, 2] = -1.0
    tzm = np.zeros((3, 3))
    recipe = fields.FieldRecipe(
        kind="affine", dims=(n, n, n), bounds=((-1.2, 1.2), (-1.2, 1.2), (0, 1)),
        params=(t0, tx, ty, tzm))
    return fields.generate(recipe)


def degenerate_plane_field(a=0.4, n=4):
    """T(x) = [[2,0,0],[0,-1,-(x+a)],[0,x-a,-1]]: discriminant changes sign
    across the planes x = +-a; linear degenerate there (q = 2 > 0)."""
    t0 = np.array([[2.0, 0, 0], [0, -1.0, -a], [0, -a, -1.0]])
    tx = np.zeros((3, 3)); tx[1, 2] = -1.0; tx[2, 1] = 1.0
    recipe = fields.FieldRecipe(
        kind="affine", dims=(n, n, n), bounds=((-1, 1), (-1, 1), (-1, 1)),
        params=(t0, tx, np.zeros((3, 3)), np.zeros((3, 3))))
    return fields.generate(recipe)


# ---------------------------------------------------------------------------


def test_resolve_request_validation():
    with pytest.raises(InvalidSpec):
        pipeline.resolve_request(FeatureRequest(kind="magnitude", value=-1.0))
    with pytest.raises(InvalidSpec):
        pipeline.resolve_request(FeatureRequest(kind="isotropicity", eta=1.5))
    # q = 0 with p < 0 forces mu = 0
    with pytest.raises(InvalidSpec):
        pipeline.resolve_request(FeatureRequest(kind="mode", mu=2.0, sign_p=-1, sign_q=0))
    # p > 0 admits any finite mu >= 0
    feat, params, split = pipeline.resolve_request(
        FeatureRequest(kind="mode", mu=0.5, sign_p=1, sign_q=1))
    assert feat == "mode_pos" and params == (0.5,)
    # balanced via mode mu = inf
    feat, _, _ = pipeline.resolve_request(
        FeatureRequest(kind="mode", mu=math.inf, sign_p=0, sign_q=-1))
    assert feat == "minor"
    with pytest.raises(InvalidSpec):
        pipeline.resolve_request(FeatureRequest(kind="mode", mu=1.0, sign_p=0, sign_q=1))


def test_magnitude_sphere_inside_tet():
    field, c = sphere_magnitude_field()
    opts = PipelineOptions(arc_step=0.1)
    surfs = pipeline.extract(field, FeatureRequest(kind="magnitude", value=0.5), opts)
    assert len(surfs) == 1
    s = surfs[0]
    assert s.n_triangles > 0
    # closed genus-0 patch
    assert len(s.boundary_edges()) == 0
    assert s.euler_characteristic() == 2
    r = np.linalg.norm(s.vertices - c, axis=1)
    np.testing.assert_allclose(r, 0.5, atol=1e-9)


def test_magnitude_sphere_clipped_by_face():
    # sphere pokes through the oblique face: full-window chart path
    field, c = sphere_magnitude_field(center=(0.4, 0.4, 0.4))
    opts = PipelineOptions(arc_step=0.1)
    surfs = pipeline.extract(field, FeatureRequest(kind="magnitude", value=0.5), opts)
    s = surfs[0]
    assert s.n_triangles > 0
    r = np.linalg.norm(s.vertices - c, axis=1)
    np.testing.assert_allclose(r, 0.5, atol=1e-9)
    # all vertices stay inside the tet (clipped at x + y + z = 2)
    assert (s.vertices.sum(axis=1) <= 2.0 + 1e-9).all()
    # boundary edges only on the clipping face
    for a, b in s.boundary_edges():
        assert abs(s.vertices[a].sum() - 2.0) < 1e-9
        assert abs(s.vertices[b].sum() - 2.0) < 1e-9
    # covers most of the sphere: area close to full sphere minus the cap
    tri = s.vertices[s.triangles]
    area = 0.5 * np.linalg.norm(
        np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1).sum()
    h = 0.5 - (2.0 - c.sum()) / math.sqrt(3.0)  # cap height
    expected = 4 * math.pi * 0.25 - 2 * math.pi * 0.5 * h
    assert abs(area - expected) / expected < 0.05


def test_magnitude_empty_when_level_too_high():
    field, _ = sphere_magnitude_field()
    surfs = pipeline.extract(
        field, FeatureRequest(kind="magnitude", value=1000.0), PipelineOptions())
    assert all(s.is_empty() for s in surfs)


def test_magnitude_abc_watertight_and_residual():
    field = abc_field(5)
    opts = PipelineOptions(threads=1)
    surfs = pipeline.extract(field, FeatureRequest(kind="magnitude", value=1.2), opts)
    s = surfs[0]
    assert s.n_triangles > 100
    res = pipeline.residual_report(s, field, "magnitude_sq", (1.2,))
    assert res.max() <= 1e-6
    lo, hi = field.bbox
    unmatched, nonmanifold = watertight_report(s, lo, hi)
    assert unmatched == 0
    assert nonmanifold == 0


def test_balanced_cylinder_field():
    field = schur_cylinder_field(c0=0.5)
    opts = PipelineOptions(split_parts=False)
    surfs = pipeline.extract(field, FeatureRequest(kind="balanced"), opts)
    s = surfs[0]
    assert s.n_triangles > 0
    # vertices on x^2 + xy + y^2 = c0^2
    v = s.vertices
    g = v[:, 0] ** 2 + v[:, 0] * v[:, 1] + v[:, 1] ** 2
    np.testing.assert_allclose(g, 0.25, atol=2e-6)
    res = pipeline.residual_report(s, field, "minor")
    assert res.max() <= 2e-6
    lo, hi = field.bbox
    unmatched, nonmanifold = watertight_report(s, lo, hi)
    assert unmatched == 0 and nonmanifold == 0


def test_tdc_straight_lines():
    field = schur_cylinder_field(c0=0.5)
    curve = pipeline.extract_tdc(field, PipelineOptions())
    assert curve.n_vertices > 0
    # TDC = lines (x, y) = (c0/sqrt3?, ...): solutions of x=-y, x^2 = c0^2
    v = curve.vertices
    d1 = np.abs(v[:, 0] - 0.5) + np.abs(v[:, 1] + 0.5)
    d2 = np.abs(v[:, 0] + 0.5) + np.abs(v[:, 1] - 0.5)
    assert (np.minimum(d1, d2) < 1e-5).all()
    assert curve.vertex_attrs["p_residual"].max() < 1e-8
    assert curve.vertex_attrs["q_residual"].max() < 1e-8


def test_degenerate_surface_planes_and_parts():
    field = degenerate_plane_field(a=0.4)
    opts = PipelineOptions(max_depth=4)
    surfs = pipeline.extract(field, FeatureRequest(kind="degenerate"), opts)
    assert surfs
    allv = np.concatenate([s.vertices for s in surfs])
    # vertices near the planes x = +-0.4
    d = np.minimum(np.abs(allv[:, 0] - 0.4), np.abs(allv[:, 0] + 0.4))
    assert d.max() < 5e-3
    assert np.quantile(d, 0.95) < 1e-4
    # q = 2 > 0 everywhere: linear part only
    parts = {s.part for s in surfs}
    assert parts == {"linear"}
    # catalog: mu = 1 on the degenerate surface
    mu = np.concatenate([s.vertex_attrs["mu"] for s in surfs])
    assert np.quantile(np.abs(mu - 1.0), 0.95) < 1e-3


def test_neutral_surface_residual():
    rng = np.random.default_rng(4)
    t0, tx, ty, tzm = rng.uniform(-1, 1, (4, 3, 3))
    field = fields.generate(fields.FieldRecipe(
        kind="affine", dims=(3, 3, 3), bounds=((-1, 1),) * 3,
        params=(t0, tx, ty, tzm)))
    surfs = pipeline.extract(
        field, FeatureRequest(kind="neutral"), PipelineOptions(max_depth=4))
    s_all = [s for s in surfs if not s.is_empty()]
    assert s_all
    for s in s_all:
        res = pipeline.residual_report(s, field, "det")
        assert np.quantile(res, 0.999) <= 1e-4


def test_isotropicity_parts_trace_signs():
    field = abc_field(4)
    # shift tensors to create nonzero traces
    shifted = TetField(
        vertices=field.vertices, tets=field.tets,
        tensors=field.tensors + 0.4 * np.eye(3), periods=field.periods)
    surfs = pipeline.extract(
        shifted, FeatureRequest(kind="isotropicity", eta=0.3, part="both"),
        PipelineOptions())
    parts = {s.part for s in surfs if not s.is_empty()}
    assert "positive" in parts
    for s in surfs:
        if s.is_empty():
            continue
        owner = pipeline.vertex_tet_map(s)
        tr, _ = pipeline.evaluate_exact(shifted, s.vertices, owner, "trace")
        if s.part == "positive":
            assert (tr >= -1e-9).all()
        else:
            assert (tr <= 1e-9).all()


def test_symmetric_field_has_no_complex_domain():
    rng = np.random.default_rng(5)
    sym = rng.uniform(-1, 1, (4, 3, 3))
    sym = 0.5 * (sym + sym.transpose(0, 2, 1))
    field = fields.generate(fields.FieldRecipe(
        kind="affine", dims=(3, 3, 3), bounds=((-1, 1),) * 3,
        params=tuple(sym)))
    # discriminant of the deviator >= 0 at vertices
    a = tz.deviator_part(field.tensors)
    delta = -27 * tz.det(a) ** 2 - 4 * tz.minor(a) ** 3
    assert delta.min() >= -1e-10
    surfs = pipeline.extract(
        field, FeatureRequest(kind="balanced"), PipelineOptions(split_parts=False))
    # balanced surface empty up to tolerance-level tangency
    assert sum(s.n_triangles for s in surfs) == 0


def test_split_by_curve_hemispheres():
    # synthetic: spherical cap band around the equator
    thetas = np.linspace(0, 2 * np.pi, 33)[:-1]
    phis = np.linspace(0.2, np.pi - 0.2, 17)
    acc = MeshAccumulator()
    for i in range(len(phis) - 1):
        for j in range(len(thetas)):
            jn = (j + 1) % len(thetas)
            def pt(ph, th):
                return (math.sin(ph) * math.cos(th), math.sin(ph) * math.sin(th),
                        math.cos(ph))
            a = pt(phis[i], thetas[j]); b = pt(phis[i], thetas[jn])
            c = pt(phis[i + 1], thetas[j]); d = pt(phis[i + 1], thetas[jn])
            acc.add_triangle(a, b, c)
            acc.add_triangle(b, d, c)
    surf = acc.build(feature="synthetic")
    eq = np.stack([np.cos(thetas), np.sin(thetas), np.zeros_like(thetas)], axis=1)
    lines = [list(range(len(eq))) + [0]]
    curve = FeatureCurve(vertices=eq, polylines=lines)
    parts = pipeline.split_by_curve(
        surf, curve, lambda p: p[:, 2], tol_split=0.05, labels=("north", "south"))
    north = next(p for p in parts if p.part == "north")
    south = next(p for p in parts if p.part == "south")
    assert north.n_triangles > 0 and south.n_triangles > 0
    assert north.vertices[:, 2].min() > -0.05
    assert south.vertices[:, 2].max() < 0.05

    far_curve = FeatureCurve(vertices=eq * 3.0, polylines=lines)
    with pytest.raises(CurveOffSurface):
        pipeline.split_by_curve(surf, far_curve, lambda p: p[:, 2], tol_split=0.05)


def test_determinism_across_threads():
    field = abc_field(4)
    s1 = pipeline.extract(field, FeatureRequest(kind="magnitude", value=1.2),
                          PipelineOptions(threads=1))[0]
    s2 = pipeline.extract(field, FeatureRequest(kind="magnitude", value=1.2),
                          PipelineOptions(threads=3))[0]
    assert np.array_equal(s1.vertices, s2.vertices)
    assert np.array_equal(s1.triangles, s2.triangles)
