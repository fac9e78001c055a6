"""Tetrahedral-mesh tensor field container and per-tet polynomial builders.

Inside every tet the field is the affine interpolant of the corner tensors,
T(x, y, z) = T0 + x*Tx + y*Ty + z*Tz.  Every feature function used by the
extraction pipeline is an exact polynomial of that affine map; builders
produce its Bernstein-Bezier coefficients by interpolation at a unisolvent
barycentric lattice (10 / 20 / 84 nodes for degrees 2 / 3 / 6).
"""
from __future__ import annotations

from dataclasses import dataclass, field as dfield

import numpy as np

from . import bernstein
from .errors import DegenerateTet
from .tensor import det as _det, minor as _minor, trace as _trace

# feature name -> polynomial degree in (x, y, z)
FEATURE_DEGREES = {
    "magnitude_sq": 2,
    "isotropicity_sq": 2,
    "trace": 2,  # affine, carried in degree-2 form for the quadric pipeline
    "minor": 2,
    "det": 3,
    "discriminant": 6,
    "mode_neg": 6,  # 27 q^2 + 4 mu^2 p^3  (p < 0 branch)
    "mode_pos": 6,  # 27 q^2 - 4 mu^2 p^3  (p > 0 branch)
}


@dataclass
class TetField:
    """Piecewise-linear tensor field on a tetrahedral mesh.

    vertices: (n, 3) float64; tets: (m, 4) indices, positively oriented;
    tensors: (n, 3, 3) float64 per vertex; periods: optional per-axis period
    lengths (None entries for non-periodic axes).
    """

    vertices: np.ndarray
    tets: np.ndarray
    tensors: np.ndarray
    periods: tuple | None = None
    _cache: dict = dfield(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.tets = np.ascontiguousarray(self.tets, dtype=np.int64)
        self.tensors = np.ascontiguousarray(self.tensors, dtype=np.float64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must have shape (n, 3)")
        if self.tets.ndim != 2 or self.tets.shape[1] != 4:
            raise ValueError("tets must have shape (m, 4)")
        if self.tensors.shape != (len(self.vertices), 3, 3):
            raise ValueError("need one 3x3 tensor per vertex")
        if len(self.tets) and (self.tets.min() < 0 or self.tets.max() >= len(self.vertices)):
            raise ValueError("tet indices out of range")
        # enforce positive orientation by swapping the last two corners
        vol = self.signed_volumes()
        flip = vol < 0
        if np.any(flip):
            self.tets[flip, 2], self.tets[flip, 3] = (
                self.tets[flip, 3].copy(), self.tets[flip, 2].copy())

    def signed_volumes(self):
        v = self.vertices
        t = self.tets
        a = v[t[:, 1]] - v[t[:, 0]]
        b = v[t[:, 2]] - v[t[:, 0]]
        c = v[t[:, 3]] - v[t[:, 0]]
        return np.einsum("ij,ij->i", np.cross(a, b), c) / 6.0

    @property
    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def bbox_diag(self) -> float:
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    def mean_edge_length(self) -> float:
        key = "mean_edge"
        if key not in self._cache:
            v = self.vertices[self.tets]
            acc = 0.0
            n = 0
            for i in range(4):
                for j in range(i + 1, 4):
                    acc += float(np.linalg.norm(v[:, i] - v[:, j], axis=1).sum())
                    n += len(v)
            self._cache[key] = acc / max(n, 1)
        return self._cache[key]

    # -- per-tet affine representation ------------------------------------

    def affine_coefficients(self):
        """(m, 4, 3, 3) array: [T0, Tx, Ty, Tz] per tet; cached."""
        if "affine" not in self._cache:
            vol = self.signed_volumes()
            eps = 1e-14 * max(self.bbox_diag, 1.0) ** 3
            bad = np.where(np.abs(vol) <= eps)[0]
            if len(bad):
                raise DegenerateTet(f"tet {bad[0]} has near-zero volume {vol[bad[0]]:g}")
            pts = self.vertices[self.tets]  # (m, 4, 3)
            m = np.concatenate([np.ones(pts.shape[:2] + (1,)), pts], axis=2)
            rhs = self.tensors[self.tets].reshape(len(self.tets), 4, 9)
            coef = np.linalg.solve(m, rhs)
            self._cache["affine"] = np.ascontiguousarray(coef.reshape(-1, 4, 3, 3))
        return self._cache["affine"]

    def tensor_at(self, tet_index, points):
        """Evaluate the affine map of one tet at (..., 3) points."""
        c = self.affine_coefficients()[tet_index]
        pts = np.asarray(points, dtype=float)
        return (
            c[0]
            + pts[..., 0, None, None] * c[1]
            + pts[..., 1, None, None] * c[2]
            + pts[..., 2, None, None] * c[3]
        )

    # -- adjacency / point location ----------------------------------------

    def face_neighbors(self):
        """(m, 4) array: neighbor tet across the face opposite each corner,
        -1 on the boundary."""
        if "neighbors" not in self._cache:
            faces = {}
            neigh = np.full((len(self.tets), 4), -1, dtype=np.int64)
            for ti, tet in enumerate(self.tets):
                for k in range(4):
                    face = tuple(sorted(np.delete(tet, k)))
                    if face in faces:
                        tj, kj = faces.pop(face)
                        neigh[ti, k] = tj
                        neigh[tj, kj] = ti
                    else:
                        faces[face] = (ti, k)
            self._cache["neighbors"] = neigh
        return self._cache["neighbors"]

    def barycentric(self, tet_index, point):
        tet = self.tets[tet_index]
        p = self.vertices[tet]
        m = np.column_stack([p[1] - p[0], p[2] - p[0], p[3] - p[0]])
        loc = np.linalg.solve(m, np.asarray(point, dtype=float) - p[0])
        return np.array([1.0 - loc.sum(), loc[0], loc[1], loc[2]])

    def locate(self, point, hint=None, max_steps=None):
        """Walk to the tet containing the point; returns (tet index, bary)
        or (None, None) when the point is outside the mesh."""
        if "kdtree" not in self._cache:
            from scipy.spatial import cKDTree

            cent = self.vertices[self.tets].mean(axis=1)
            self._cache["kdtree"] = cKDTree(cent)
        neigh = self.face_neighbors()
        if hint is None:
            hint = int(self._cache["kdtree"].query(point)[1])
        cur = hint
        seen = set()
        steps = max_steps or 4 * int(np.ceil(len(self.tets) ** (1 / 3))) + 64
        for _ in range(steps):
            b = self.barycentric(cur, point)
            worst = int(np.argmin(b))
            if b[worst] >= -1e-12:
                return cur, b
            seen.add(cur)
            nxt = neigh[cur, worst]
            if nxt < 0 or nxt in seen:
                # restart from the globally nearest centroid once
                near = int(self._cache["kdtree"].query(point)[1])
                if near in seen:
                    return None, None
                cur = near
                continue
            cur = nxt
        return None, None


# ---------------------------------------------------------------------------
# feature polynomials


@dataclass(frozen=True)
class TetLinearTensor:
    """Affine tensor map inside one tet: T(x) = t0 + x*tx + y*ty + z*tz."""

    t0: np.ndarray
    tx: np.ndarray
    ty: np.ndarray
    tz: np.ndarray

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        return (
            self.t0
            + pts[..., 0, None, None] * self.tx
            + pts[..., 1, None, None] * self.ty
            + pts[..., 2, None, None] * self.tz
        )


def tet_linear(field: TetField, tet_index: int) -> TetLinearTensor:
    c = field.affine_coefficients()[tet_index]
    return TetLinearTensor(t0=c[0], tx=c[1], ty=c[2], tz=c[3])


@dataclass(frozen=True)
class PolyTet:
    """Bernstein form of a feature function over one tet."""

    degree: int
    coeffs: np.ndarray
    corners: np.ndarray  # (4, 3) tet corner positions
    feature: str
    params: tuple = ()
    tet_index: int = -1

    def evaluate(self, points):
        """Evaluate at (..., 3) physical points (inside or outside the tet)."""
        bary = physical_to_barycentric(self.corners, points)
        return bernstein.evaluate(self.coeffs, bary, self.degree)

    @property
    def coeff_scale(self) -> float:
        return float(np.max(np.abs(self.coeffs)))


def physical_to_barycentric(corners, points):
    c = np.asarray(corners, dtype=float)
    m = np.column_stack([c[1] - c[0], c[2] - c[0], c[3] - c[0]])
    loc = np.linalg.solve(m, (np.asarray(points, dtype=float) - c[0]).T).T
    first = 1.0 - loc.sum(axis=-1)
    return np.concatenate([first[..., None], loc], axis=-1)


def feature_values(tensors, feature: str, params=()):
    """Evaluate a feature function on tensors of shape (..., 3, 3).

    minor / det / discriminant / mode branches are taken on the deviator;
    magnitude and isotropicity use the full tensor.
    """
    t = np.asarray(tensors, dtype=float)
    if feature == "magnitude_sq":
        (s,) = params
        return np.sum(t * t, axis=(-2, -1)) - s * s
    if feature == "isotropicity_sq":
        (eta,) = params
        tr = _trace(t)
        return tr * tr - 3.0 * eta * eta * np.sum(t * t, axis=(-2, -1))
    if feature == "trace":
        return _trace(t)

    tr3 = _trace(t) / 3.0
    a = t.copy()
    for i in range(3):
        a[..., i, i] -= tr3
    if feature == "minor":
        return _minor(a)
    if feature == "det":
        return _det(a)
    p = _minor(a)
    q = _det(a)
    if feature == "discriminant":
        return -27.0 * q * q - 4.0 * p ** 3
    if feature == "mode_neg":
        (mu,) = params
        return 27.0 * q * q + 4.0 * mu * mu * p ** 3
    if feature == "mode_pos":
        (mu,) = params
        return 27.0 * q * q - 4.0 * mu * mu * p ** 3
    raise ValueError(f"unknown feature {feature!r}")


def feature_coeffs_batch(field: TetField, feature: str, params=(), tet_indices=None,
                         chunk=20000):
    """Bernstein coefficients of a feature for many tets at once.

    Returns (indices, coeffs) with coeffs of shape (len(indices), N).
    """
    degree = FEATURE_DEGREES[feature]
    if tet_indices is None:
        tet_indices = np.arange(len(field.tets))
    tet_indices = np.asarray(tet_indices, dtype=np.int64)
    nodes = bernstein.node_barycentrics(degree)  # (N, 4)
    coef = field.affine_coefficients()
    out = np.empty((len(tet_indices), len(nodes)))
    for lo in range(0, len(tet_indices), chunk):
        idx = tet_indices[lo:lo + chunk]
        pts = np.einsum("nk,mkd->mnd", nodes, field.vertices[field.tets[idx]])
        c = coef[idx]
        tens = (
            c[:, None, 0]
            + pts[..., 0, None, None] * c[:, None, 1]
            + pts[..., 1, None, None] * c[:, None, 2]
            + pts[..., 2, None, None] * c[:, None, 3]
        )
        vals = feature_values(tens, feature, params)
        out[lo:lo + len(idx)] = bernstein.values_to_coeffs(vals, degree)
    return tet_indices, out


def build_polynomial(field: TetField, tet_index: int, feature: str, params=()) -> PolyTet:
    """Exact Bernstein form of one feature function on one tet."""
    _, coeffs = feature_coeffs_batch(field, feature, params, np.array([tet_index]))
    return PolyTet(
        degree=FEATURE_DEGREES[feature],
        coeffs=coeffs[0],
        corners=field.vertices[field.tets[tet_index]].astype(float),
        feature=feature,
        params=tuple(params),
        tet_index=tet_index,
    )
