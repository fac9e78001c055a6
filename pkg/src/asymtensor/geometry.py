"""Attributed geometry containers produced by the extractors."""
from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np


@dataclass
class FeatureSurface:
    """Indexed triangle mesh with per-vertex attributes.

    ``provenance`` holds the source tet index per triangle; ``part`` labels
    the sign-split component ('linear', 'planar', 'real', 'complex',
    'positive', 'negative' or 'none').
    """

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_attrs: dict = dfield(default_factory=dict)
    provenance: np.ndarray | None = None
    part: str = "none"
    feature: str = ""
    params: tuple = ()

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def is_empty(self):
        return len(self.triangles) == 0

    def edge_incidence(self):
        """Map sorted vertex-index pair -> number of incident triangles."""
        counts = {}
        for tri in self.triangles:
            a, b, c = int(tri[0]), int(tri[1]), int(tri[2])
            for e in ((a, b), (b, c), (a, c)):
                key = (min(e), max(e))
                counts[key] = counts.get(key, 0) + 1
        return counts

    def boundary_edges(self):
        return [e for e, n in self.edge_incidence().items() if n == 1]

    def euler_characteristic(self):
        v = len(self.vertices)
        f = len(self.triangles)
        e = len(self.edge_incidence())
        return v - e + f


@dataclass
class FeatureCurve:
    """Polylines with per-vertex attributes (vertex indices per polyline)."""

    vertices: np.ndarray
    polylines: list
    vertex_attrs: dict = dfield(default_factory=dict)
    feature: str = "triple_degenerate"

    @property
    def n_vertices(self):
        return len(self.vertices)

    def is_empty(self):
        return len(self.polylines) == 0

    def segments(self):
        segs = []
        for line in self.polylines:
            for a, b in zip(line[:-1], line[1:]):
                segs.append((int(a), int(b)))
        return segs

    def total_length(self):
        acc = 0.0
        for a, b in self.segments():
            acc += float(np.linalg.norm(self.vertices[a] - self.vertices[b]))
        return acc


class MeshAccumulator:
    """Builds an indexed triangle mesh, welding vertices whose coordinates
    are bitwise identical (the canonical-face rule makes shared boundary
    samples agree exactly across tets)."""

    def __init__(self):
        self._index = {}
        self.vertices = []
        self.triangles = []
        self.provenance = []

    def vertex(self, p):
        key = (float(p[0]), float(p[1]), float(p[2]))
        i = self._index.get(key)
        if i is None:
            i = len(self.vertices)
            self._index[key] = i
            self.vertices.append(key)
        return i

    def add_triangle(self, p0, p1, p2, tet_index=-1):
        i0, i1, i2 = self.vertex(p0), self.vertex(p1), self.vertex(p2)
        if i0 == i1 or i1 == i2 or i0 == i2:
            return  # collapsed by welding
        self.triangles.append((i0, i1, i2))
        self.provenance.append(tet_index)

    def build(self, feature="", params=(), part="none") -> FeatureSurface:
        verts = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        tris = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        return FeatureSurface(
            vertices=verts,
            triangles=tris,
            provenance=np.asarray(self.provenance, dtype=np.int64),
            feature=feature,
            params=tuple(params),
            part=part,
        )


def orient_triangles(surface: FeatureSurface, gradient_fn):
    """Flip triangles so their normals align with the gradient of the
    implicit function (outward to the positive side)."""
    tris = surface.triangles
    if len(tris) == 0:
        return surface
    v = surface.vertices
    cent = v[tris].mean(axis=1)
    normals = np.cross(v[tris[:, 1]] - v[tris[:, 0]], v[tris[:, 2]] - v[tris[:, 0]])
    grads = gradient_fn(cent, surface.provenance)
    flip = np.einsum("ij,ij->i", normals, grads) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return surface


def watertight_report(surface: FeatureSurface, domain_lo, domain_hi, tol=1e-9):
    """Count patch-border edges that are not on the domain boundary and
    non-manifold edges (incidence > 2)."""
    lo = np.asarray(domain_lo, dtype=float)
    hi = np.asarray(domain_hi, dtype=float)
    scale = float(np.max(hi - lo))
    unmatched = 0
    nonmanifold = 0
    for (a, b), n in surface.edge_incidence().items():
        if n == 2:
            continue
        if n > 2:
            nonmanifold += 1
            continue
        pa, pb = surface.vertices[a], surface.vertices[b]
        on_boundary = False
        for axis in range(3):
            for bound in (lo[axis], hi[axis]):
                if (abs(pa[axis] - bound) <= tol * scale
                        and abs(pb[axis] - bound) <= tol * scale):
                    on_boundary = True
        if not on_boundary:
            unmatched += 1
    return unmatched, nonmanifold
