"""Planar constrained triangulation.

Delaunay triangulation (scipy/Qhull) followed by constraint-edge recovery
via flips, with an ear-clipping fallback for plain polygons.  Point inputs
are normalized internally so chart regions of any scale triangulate with the
same robustness.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .errors import LoopChainFailure


class TriangulationFailure(LoopChainFailure):
    pass


def _orient(pa, pb, pc):
    return (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])


def _segments_cross(p, q, a, b):
    """Proper crossing test (shared endpoints do not count)."""
    d1 = _orient(p, q, a)
    d2 = _orient(p, q, b)
    d3 = _orient(a, b, p)
    d4 = _orient(a, b, q)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0


class _EdgeMesh:
    """Light triangle soup with edge->triangle adjacency for flip recovery."""

    def __init__(self, points, triangles):
        self.points = points
        self.tris = [tuple(t) for t in triangles]
        self.edge_tris = {}
        for idx, t in enumerate(self.tris):
            self._index(idx, t)

    @staticmethod
    def _edges(t):
        return (
            (min(t[0], t[1]), max(t[0], t[1])),
            (min(t[1], t[2]), max(t[1], t[2])),
            (min(t[0], t[2]), max(t[0], t[2])),
        )

    def _index(self, idx, t):
        for key in self._edges(t):
            self.edge_tris.setdefault(key, []).append(idx)

    def _unindex(self, idx, t):
        for key in self._edges(t):
            lst = self.edge_tris.get(key)
            if lst is not None:
                try:
                    lst.remove(idx)
                except ValueError:
                    pass
                if not lst:
                    del self.edge_tris[key]

    def has_edge(self, a, b):
        return (min(a, b), max(a, b)) in self.edge_tris

    def flip(self, a, b):
        """Flip edge (a, b) if its two adjacent triangles form a convex quad;
        returns the new opposite edge or None."""
        key = (min(a, b), max(a, b))
        tris = list(self.edge_tris.get(key, ()))
        if len(tris) != 2:
            return None
        t1, t2 = tris
        c = [v for v in self.tris[t1] if v not in key][0]
        d = [v for v in self.tris[t2] if v not in key][0]
        pa, pb = self.points[key[0]], self.points[key[1]]
        pc, pd = self.points[c], self.points[d]
        # convexity: c and d on opposite sides and the new edge crosses (a, b)
        if not _segments_cross(pc, pd, pa, pb):
            return None
        self._unindex(t1, self.tris[t1])
        self._unindex(t2, self.tris[t2])
        self.tris[t1] = (c, d, key[0])
        self.tris[t2] = (c, d, key[1])
        self._index(t1, self.tris[t1])
        self._index(t2, self.tris[t2])
        return (c, d)

    def triangles(self):
        return [t for t in self.tris if t is not None]


def constrained_delaunay(points, constraints, max_flip_rounds=200):
    """Delaunay triangulation of ``points`` containing every constraint edge.

    points: (n, 2); constraints: iterable of index pairs.  Returns an (m, 3)
    int array.  Raises TriangulationFailure when edge recovery stalls.
    """
    points = np.asarray(points, dtype=float)
    if len(points) < 3:
        raise TriangulationFailure("fewer than 3 points")
    span = points.max(axis=0) - points.min(axis=0)
    scale = max(float(span.max()), 1e-300)
    norm = (points - points.min(axis=0)) / scale
    try:
        dela = Delaunay(norm)
    except Exception as exc:  # qhull degeneracy
        raise TriangulationFailure(f"qhull failed: {exc}") from exc
    mesh = _EdgeMesh(norm, dela.simplices)

    pending = [tuple(c) for c in constraints if c[0] != c[1]]
    rounds = 0
    while pending:
        a, b = pending.pop()
        if mesh.has_edge(a, b):
            continue
        recovered = False
        for _ in range(max_flip_rounds):
            rounds += 1
            crossing = _find_crossing_edge(mesh, norm, a, b)
            if crossing is None:
                recovered = mesh.has_edge(a, b)
                break
            if mesh.flip(*crossing) is None:
                # not flippable right now: try another crossing edge first
                other = _find_crossing_edge(mesh, norm, a, b, skip=crossing)
                if other is None or mesh.flip(*other) is None:
                    break
        if not (recovered or mesh.has_edge(a, b)):
            raise TriangulationFailure(f"could not recover constraint {(a, b)}")
    tris = np.array(mesh.triangles(), dtype=np.int64).reshape(-1, 3)
    if len(tris):
        # qhull emits zero-area triangles on collinear inputs (e.g. chart
        # meridians); they would sit on both sides of a constraint chain
        p = norm[tris]
        area2 = np.abs(
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
        e2 = np.maximum.reduce([
            np.sum((p[:, 1] - p[:, 0]) ** 2, axis=1),
            np.sum((p[:, 2] - p[:, 1]) ** 2, axis=1),
            np.sum((p[:, 2] - p[:, 0]) ** 2, axis=1),
        ])
        tris = tris[area2 > 1e-11 * e2]
    return tris


def _find_crossing_edge(mesh, points, a, b, skip=None):
    pa, pb = points[a], points[b]
    for (i, j) in mesh.edge_tris:
        if a in (i, j) or b in (i, j):
            continue
        if skip is not None and (i, j) == (min(skip), max(skip)):
            continue
        if _segments_cross(points[i], points[j], pa, pb):
            return (i, j)
    return None


def ear_clip(points, ring):
    """Triangulate a simple polygon (vertex index ring, ccw or cw)."""
    ring = list(ring)
    if len(ring) < 3:
        return []
    pts = np.asarray(points, dtype=float)
    area = 0.0
    for i in range(len(ring)):
        a, b = pts[ring[i]], pts[ring[(i + 1) % len(ring)]]
        area += a[0] * b[1] - b[0] * a[1]
    if area < 0:
        ring = ring[::-1]
    tris = []
    guard = 0
    while len(ring) > 3 and guard < 10 * len(ring) ** 2:
        guard += 1
        n = len(ring)
        clipped = False
        for i in range(n):
            ia, ib, ic = ring[(i - 1) % n], ring[i], ring[(i + 1) % n]
            pa, pb, pc = pts[ia], pts[ib], pts[ic]
            if _orient(pa, pb, pc) <= 0:
                continue
            ok = True
            for j in ring:
                if j in (ia, ib, ic):
                    continue
                p = pts[j]
                if (_orient(pa, pb, p) >= 0 and _orient(pb, pc, p) >= 0
                        and _orient(pc, pa, p) >= 0):
                    ok = False
                    break
            if ok:
                tris.append((ia, ib, ic))
                ring.pop(i)
                clipped = True
                break
        if not clipped:
            # tolerate slightly degenerate polygons: clip the sharpest convex
            # corner even if containment failed
            best, best_val = None, -1.0
            for i in range(len(ring)):
                ia, ib, ic = ring[(i - 1) % len(ring)], ring[i], ring[(i + 1) % len(ring)]
                v = _orient(pts[ia], pts[ib], pts[ic])
                if v > best_val:
                    best, best_val = i, v
            if best is None or best_val <= 0:
                break
            i = best
            ia, ib, ic = ring[(i - 1) % len(ring)], ring[i], ring[(i + 1) % len(ring)]
            tris.append((ia, ib, ic))
            ring.pop(i)
    if len(ring) == 3:
        tris.append(tuple(ring))
    return tris


def filter_steiner_near_constraints(steiner, constraint_points, min_dist):
    """Drop candidate interior points closer than min_dist to any constraint
    sample; returns the boolean keep mask."""
    if len(steiner) == 0 or len(constraint_points) == 0:
        return np.ones(len(steiner), dtype=bool)
    tree = cKDTree(np.asarray(constraint_points, dtype=float))
    d, _ = tree.query(np.asarray(steiner, dtype=float))
    return d >= min_dist
