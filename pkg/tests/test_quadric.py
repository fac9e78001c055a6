import math

import numpy as np
import pytest

from asymtensor import bernstein, quadric
from asymtensor.errors import LoopChainFailure

BIG_TET = np.array([
    [-3.0, -3.0, -3.0],
    [9.0, -3.0, -3.0],
    [-3.0, 9.0, -3.0],
    [-3.0, -3.0, 9.0],
])


def poly_coeffs(fn, corners):
    nodes = bernstein.node_barycentrics(2)
    pts = nodes @ np.asarray(corners, dtype=float)
    return bernstein.values_to_coeffs(fn(pts), 2)


def test_classify_sphere():
    fn = lambda p: np.sum(p * p, axis=-1) - 1.0
    q = quadric.classify_quadric(poly_coeffs(fn, BIG_TET), BIG_TET)
    assert q.kind == "ellipsoid"
    np.testing.assert_allclose(q.center, 0.0, atol=1e-9)
    np.testing.assert_allclose(q.scales, 1.0, atol=1e-9)
    # K-form evaluation matches the function
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, (20, 3))
    np.testing.assert_allclose(q.evaluate(pts), fn(pts), atol=1e-10)


def test_classify_hyperboloids():
    fn1 = lambda p: p[..., 0] ** 2 + p[..., 1] ** 2 - p[..., 2] ** 2 - 1.0
    q = quadric.classify_quadric(poly_coeffs(fn1, BIG_TET), BIG_TET)
    assert q.kind == "hyperboloid1"

    fn2 = lambda p: p[..., 0] ** 2 - p[..., 1] ** 2 - p[..., 2] ** 2 - 1.0
    q = quadric.classify_quadric(poly_coeffs(fn2, BIG_TET), BIG_TET)
    assert q.kind == "hyperboloid2"


def test_classify_cone_degenerate():
    fn = lambda p: p[..., 0] ** 2 + p[..., 1] ** 2 - p[..., 2] ** 2
    q = quadric.classify_quadric(poly_coeffs(fn, BIG_TET), BIG_TET)
    assert q.kind == "degenerate"
    assert q.subkind == "cone"


def test_chart_roundtrip():
    for fn, kind in (
        (lambda p: p[..., 0] ** 2 / 4 + p[..., 1] ** 2 + p[..., 2] ** 2 - 1.0, "ellipsoid"),
        (lambda p: p[..., 0] ** 2 + p[..., 1] ** 2 - p[..., 2] ** 2 - 1.0, "hyperboloid1"),
        (lambda p: p[..., 0] ** 2 - p[..., 1] ** 2 - p[..., 2] ** 2 - 1.0, "hyperboloid2"),
    ):
        q = quadric.classify_quadric(poly_coeffs(fn, BIG_TET), BIG_TET)
        assert q.kind == kind
        rng = np.random.default_rng(1)
        uv = rng.uniform(-0.8, 0.8, (50, 2))
        for sheet in (1.0, -1.0):
            pts = q.chart_point(uv, sheet)
            np.testing.assert_allclose(fn(pts), 0.0, atol=1e-9)
            uv2, sheet2 = q.chart_coords(pts)
            pts2 = q.chart_point(uv2, sheet if sheet2 is None else sheet2)
            np.testing.assert_allclose(pts2, pts, atol=1e-9)
            if kind != "hyperboloid2":
                break


def test_quadratic_roots_unit():
    # f(s) = (s - .25)(s - .75) scaled: values at 0, .5, 1
    f = lambda s: (s - 0.25) * (s - 0.75)
    roots = quadric.quadratic_roots_unit([f(0)], [f(0.5)], [f(1)])[0]
    np.testing.assert_allclose(roots, [0.25, 0.75], atol=1e-12)
    # no roots
    roots = quadric.quadratic_roots_unit([1.0], [2.0], [1.5])[0]
    assert len(roots) == 0
    # linear
    f = lambda s: s - 0.5
    roots = quadric.quadratic_roots_unit([f(0)], [f(0.5)], [f(1)])[0]
    np.testing.assert_allclose(roots, [0.5], atol=1e-12)


def _edge_roots_for(fn, corners):
    """Canonical edge-root table for a synthetic face of global ids 0,1,2."""
    out = {}
    ids = (0, 1, 2)
    for loc, (i, j) in ((((0, 1)), (0, 1)), ((0, 2), (0, 2)), ((1, 2), (1, 2))):
        a, b = corners[i], corners[j]
        f0, fh, f1 = fn(a[None])[0], fn((0.5 * (a + b))[None])[0], fn(b[None])[0]
        roots = quadric.quadratic_roots_unit([f0], [fh], [f1])[0]
        pts = [(1 - s) * a + s * b for s in roots]
        out[loc] = ((ids[i], ids[j]), np.asarray(roots), pts)
    return out


def face_arcs_for(fn, corners, step=0.05):
    nodes = bernstein.node_barycentrics(2, dim=2)
    pts = nodes @ np.asarray(corners, dtype=float)
    coeffs = bernstein.values_to_coeffs(fn(pts), 2, dim=2)
    return quadric.face_conic_arcs(corners, coeffs, _edge_roots_for(fn, corners), step)


def test_face_conic_closed_circle():
    corners = np.array([[0.0, 0, 0], [4.0, 0, 0], [0.0, 4, 0]])
    centroid = corners.mean(axis=0)
    fn = lambda p: np.sum((p - centroid) ** 2, axis=-1) - 0.25
    arcs = face_arcs_for(fn, corners)
    assert len(arcs) == 1
    assert arcs[0].end_keys is None  # closed loop
    np.testing.assert_allclose(fn(arcs[0].points), 0.0, atol=1e-9)


def test_face_conic_empty():
    corners = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0]])
    fn = lambda p: np.sum(p * p, axis=-1) + 1.0
    assert face_arcs_for(fn, corners) == []


def test_face_conic_line():
    corners = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0]])
    fn = lambda p: p[..., 0] - 0.5
    arcs = face_arcs_for(fn, corners)
    assert len(arcs) == 1
    np.testing.assert_allclose(arcs[0].points[:, 0], 0.5, atol=1e-10)
    # straight segment within residual
    np.testing.assert_allclose(fn(arcs[0].points), 0.0, atol=1e-9)


def test_face_conic_hyperbola_arcs():
    corners = np.array([[-1.0, -1, 0], [3.0, -1, 0], [-1.0, 3, 0]])
    fn = lambda p: p[..., 0] * p[..., 1] - 0.02
    arcs = face_arcs_for(fn, corners, step=0.1)
    assert len(arcs) >= 1
    for arc in arcs:
        np.testing.assert_allclose(fn(arc.points), 0.0, atol=1e-8)
        assert arc.end_keys is not None
