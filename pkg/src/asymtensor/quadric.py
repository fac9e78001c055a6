"""Zero-set extraction for per-tet quadratic polynomials.

The per-tet surface is recovered from its quadric classification: boundary
curves on the four faces (conic arcs, computed once per mesh face so
adjacent tets share bit-identical samples) are chained into loops, mapped to
the parameter domain of the quadric (sphere angles for ellipsoids, a
cylinder chart for one-sheet hyperboloids, per-sheet graph charts for
two-sheet hyperboloids), triangulated there with the loops as constraints,
and mapped back.  Chart seams are cut along paths through existing loop
samples so boundary polylines are never resampled.  Degenerate quadrics go
through a fallback that fills the chained loops directly and marches closed
interior components.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np

from . import bernstein, marching
from .errors import LoopChainFailure
from .triangulate import (
    TriangulationFailure,
    constrained_delaunay,
    ear_clip,
    filter_steiner_near_constraints,
)

TWO_PI = 2.0 * math.pi


@dataclass
class QuadricOptions:
    max_arc_step: float
    eps_quad: float = 1e-9
    eps_res: float = 1e-6
    fallback_depth: int = 3
    max_arc_samples: int = 512


@dataclass(frozen=True)
class QuadricForm:
    """f(x) = [x, 1]^T K [x, 1] with a principal frame for parameterization.

    kinds: ellipsoid, hyperboloid1, hyperboloid2, cylinder_e (elliptic),
    cylinder_h (hyperbolic), paraboloid, parab_cylinder, plane (one or two
    parallel planes), degenerate (cones/points/empty: no chart).
    Charts are periodic in the first coordinate for ellipsoid /
    hyperboloid1 / cylinder_e; multi-sheet for hyperboloid2 / cylinder_h /
    plane pairs; seamless single charts otherwise.
    """

    k4: np.ndarray
    kind: str
    subkind: str = ""
    center: np.ndarray | None = None
    axes: np.ndarray | None = None  # columns: principal directions (permuted)
    scales: np.ndarray | None = None
    aux: tuple = ()

    def evaluate(self, pts):
        p = np.asarray(pts, dtype=float)
        ph = np.concatenate([p, np.ones(p.shape[:-1] + (1,))], axis=-1)
        return np.einsum("...i,ij,...j->...", ph, self.k4, ph)

    def gradient(self, pts):
        p = np.asarray(pts, dtype=float)
        q = self.k4[:3, :3]
        b = self.k4[:3, 3]
        return 2.0 * (p @ q.T + b)

    # -- charts -----------------------------------------------------------

    def local(self, pts):
        return ((np.asarray(pts, dtype=float) - self.center) @ self.axes) / self.scales

    def chart_coords(self, pts):
        xi = self.local(pts)
        k = self.kind
        if k == "ellipsoid":
            theta = np.arctan2(xi[..., 1], xi[..., 0])
            phi = np.arccos(np.clip(xi[..., 2], -1.0, 1.0))
            return np.stack([theta, phi], axis=-1), None
        if k == "hyperboloid1":
            theta = np.arctan2(xi[..., 1], xi[..., 0])
            return np.stack([theta, xi[..., 2]], axis=-1), None
        if k == "cylinder_e":
            theta = np.arctan2(xi[..., 1], xi[..., 0])
            return np.stack([theta, xi[..., 2]], axis=-1), None
        if k == "hyperboloid2":
            sheet = np.where(xi[..., 0] >= 0.0, 1.0, -1.0)
            return np.stack([xi[..., 1], xi[..., 2]], axis=-1), sheet
        if k == "cylinder_h":
            sheet = np.where(xi[..., 0] >= 0.0, 1.0, -1.0)
            u = np.arcsinh(xi[..., 1])
            return np.stack([u, xi[..., 2]], axis=-1), sheet
        if k == "paraboloid":
            return np.stack([xi[..., 0], xi[..., 1]], axis=-1), None
        if k == "parab_cylinder":
            return np.stack([xi[..., 0], xi[..., 2]], axis=-1), None
        if k == "plane":
            offsets = np.asarray(self.aux[0])
            if len(offsets) == 2:
                d = np.abs(xi[..., 0, None] - offsets)
                sheet = np.where(d[..., 0] <= d[..., 1], 1.0, -1.0)
            else:
                sheet = np.ones(xi.shape[:-1])
            return np.stack([xi[..., 1], xi[..., 2]], axis=-1), sheet
        raise ValueError(f"no chart for kind {k!r}")

    def chart_point(self, uv, sheet=1.0):
        uv = np.asarray(uv, dtype=float)
        u, v = uv[..., 0], uv[..., 1]
        k = self.kind
        if k == "ellipsoid":
            sp = np.sin(v)
            xi = np.stack([sp * np.cos(u), sp * np.sin(u), np.cos(v)], axis=-1)
        elif k == "hyperboloid1":
            r = np.sqrt(1.0 + v * v)
            xi = np.stack([r * np.cos(u), r * np.sin(u), v], axis=-1)
        elif k == "cylinder_e":
            xi = np.stack([np.cos(u), np.sin(u), v], axis=-1)
        elif k == "hyperboloid2":
            x0 = sheet * np.sqrt(1.0 + u * u + v * v)
            xi = np.stack([x0, u, v], axis=-1)
        elif k == "cylinder_h":
            x0 = sheet * np.sqrt(1.0 + u * u)
            xi = np.stack([x0, u, v], axis=-1)
        elif k == "paraboloid":
            a1, a2 = self.aux
            xi = np.stack([u, v, a1 * u * u + a2 * v * v], axis=-1)
        elif k == "parab_cylinder":
            a1, a2, a0 = self.aux
            xi = np.stack([u, a1 * u * u + a2 * v + a0, v], axis=-1)
        elif k == "plane":
            offsets = np.asarray(self.aux[0])
            off = offsets[0] if len(offsets) == 1 else np.where(
                np.asarray(sheet) >= 0, offsets[0], offsets[1])
            xi = np.stack([off * np.ones_like(u), u, v], axis=-1)
        else:
            raise ValueError(f"no chart for kind {k!r}")
        return self.center + (xi * self.scales) @ self.axes.T

    @property
    def has_seam(self):
        return self.kind in ("ellipsoid", "hyperboloid1", "cylinder_e")

    @property
    def has_chart(self):
        return self.kind != "degenerate"


def quadric_k4(coeffs, corners):
    """4x4 symmetric matrix of a degree-2 Bernstein polynomial over a tet,
    in homogeneous physical coordinates."""
    lam = bernstein.lattice(2)
    kb = np.zeros((4, 4))
    for c, l in zip(coeffs, lam):
        nz = np.nonzero(l)[0]
        if len(nz) == 1:
            kb[nz[0], nz[0]] = c
        else:
            i, j = nz
            kb[i, j] = kb[j, i] = c
    cmat = np.vstack([np.asarray(corners, dtype=float).T, np.ones(4)])
    g = np.linalg.inv(cmat)
    k = g.T @ kb @ g
    return 0.5 * (k + k.T)


def classify_quadric(coeffs, corners, eps_quad=1e-9) -> QuadricForm:
    """Classify the quadric and build its parameterization frame.

    Every kind with a real two-dimensional zero set gets a chart; only
    cones, points, lines and empty sets stay 'degenerate'.
    """
    k = quadric_k4(coeffs, corners)
    knorm = float(np.abs(k).max())
    if knorm == 0.0:
        return QuadricForm(k4=k, kind="degenerate", subkind="zero")
    q = k[:3, :3]
    b = k[:3, 3]
    f0 = float(k[3, 3])
    w, rot = np.linalg.eigh(q)
    wmax = float(np.abs(w).max())
    # geometric scale of the tet keeps the rank tests dimensionally sane
    span = float(np.linalg.norm(np.ptp(np.asarray(corners, dtype=float), axis=0)))
    live = np.abs(w) > eps_quad * max(wmax, knorm / max(span * span, 1e-300))
    rank = int(live.sum())

    if rank == 3:
        center = np.linalg.solve(q, -b)
        kred = float(f0 + b @ center)
        if abs(kred) <= eps_quad * knorm * (1.0 + float(center @ center)):
            sub = "point" if (w > 0).all() or (w < 0).all() else "cone"
            return QuadricForm(k4=k, kind="degenerate", subkind=sub, center=center)
        m = w / (-kred)
        pos = int((m > 0).sum())
        if pos == 0:
            return QuadricForm(k4=k, kind="degenerate", subkind="empty", center=center)
        if pos == 3:
            kind, order = "ellipsoid", np.argsort(-m, kind="stable")
        elif pos == 2:  # negative axis last
            kind, order = "hyperboloid1", np.argsort(-np.sign(m), kind="stable")
        else:  # positive axis first
            kind, order = "hyperboloid2", np.argsort(-np.sign(m), kind="stable")
        order = np.asarray(order)
        scales = 1.0 / np.sqrt(np.abs(m[order]))
        return QuadricForm(
            k4=k, kind=kind, center=center, axes=rot[:, order], scales=scales)

    bp = rot.T @ b
    lin_scale = max(wmax * span, knorm / max(span, 1e-300))
    if rank == 2:
        null = int(np.argmin(np.abs(w)))
        i1, i2 = [i for i in range(3) if i != null]
        axes = rot[:, [i1, i2, null]]
        if abs(bp[null]) > eps_quad * lin_scale:
            # paraboloid (elliptic or hyperbolic): graph along the null axis
            c12 = -bp[[i1, i2]] / w[[i1, i2]]
            fv = f0 + float(bp[[i1, i2]] @ c12) + float(
                w[[i1, i2]] @ (c12 * c12)) - float(bp[[i1, i2]] @ c12)
            fv = f0 - float(w[[i1, i2]] @ (c12 * c12))  # value at in-plane center
            x3 = -fv / (2.0 * bp[null])
            center = axes @ np.array([c12[0], c12[1], x3])
            a1 = -w[i1] / (2.0 * bp[null])
            a2 = -w[i2] / (2.0 * bp[null])
            return QuadricForm(
                k4=k, kind="paraboloid", center=center, axes=axes,
                scales=np.ones(3), aux=(a1, a2))
        # cylinder: 2D conic cross-section swept along the null axis
        w2 = w[[i1, i2]]
        b2 = bp[[i1, i2]]
        c2 = -b2 / w2
        k2 = f0 + float(b2 @ c2)
        center = axes @ np.array([c2[0], c2[1], 0.0])
        if abs(k2) <= eps_quad * knorm * (1.0 + float(c2 @ c2)):
            sub = "line" if w2[0] * w2[1] > 0 else "crossing_planes"
            return QuadricForm(k4=k, kind="degenerate", subkind=sub, center=center)
        m2 = w2 / (-k2)
        if (m2 <= 0).all():
            return QuadricForm(k4=k, kind="degenerate", subkind="empty", center=center)
        if (m2 > 0).all():
            order2 = np.argsort(-m2, kind="stable")
            scales = np.array([
                1.0 / math.sqrt(m2[order2[0]]), 1.0 / math.sqrt(m2[order2[1]]), 1.0])
            axes = axes[:, [int(order2[0]), int(order2[1]), 2]]
            return QuadricForm(
                k4=k, kind="cylinder_e", center=center, axes=axes, scales=scales)
        ipos = int(np.argmax(m2))
        ineg = 1 - ipos
        scales = np.array([
            1.0 / math.sqrt(m2[ipos]), 1.0 / math.sqrt(-m2[ineg]), 1.0])
        axes = axes[:, [ipos, ineg, 2]]
        return QuadricForm(
            k4=k, kind="cylinder_h", center=center, axes=axes, scales=scales)

    if rank == 1:
        i1 = int(np.argmax(np.abs(w)))
        nulls = [i for i in range(3) if i != i1]
        bn = bp[nulls]
        if np.abs(bn).max() > eps_quad * lin_scale:
            # parabolic cylinder: graph along the strongest null gradient
            g = nulls[int(np.argmax(np.abs(bn)))]
            o = nulls[0] if g != nulls[0] else nulls[1]
            axes = rot[:, [i1, g, o]]
            # w1 u^2 + 2 bg xi_g + 2 bo v + f0 = 0, u along i1, v along o
            c1 = -bp[i1] / w[i1]
            fv = f0 - w[i1] * c1 * c1
            a1 = -w[i1] / (2.0 * bp[g])
            a2 = -bp[o] / bp[g]
            a0 = -fv / (2.0 * bp[g])
            center = axes @ np.array([c1, 0.0, 0.0])
            return QuadricForm(
                k4=k, kind="parab_cylinder", center=center, axes=axes,
                scales=np.ones(3), aux=(a1, a2, a0))
        # parallel planes: w1 (u - c)^2 = r
        c1 = -bp[i1] / w[i1]
        fv = f0 - w[i1] * c1 * c1
        r2 = -fv / w[i1]
        axes = rot[:, [i1, nulls[0], nulls[1]]]
        center = axes @ np.array([c1, 0.0, 0.0])
        if r2 < -eps_quad * max(span * span, 1e-300):
            return QuadricForm(k4=k, kind="degenerate", subkind="empty")
        if r2 <= eps_quad * max(span * span, 1e-300):
            offsets = (0.0,)
        else:
            r = math.sqrt(r2)
            offsets = (r, -r)
        return QuadricForm(
            k4=k, kind="plane", center=center, axes=axes, scales=np.ones(3),
            aux=(offsets,))

    # rank 0: linear function
    bn = np.linalg.norm(b)
    if bn <= eps_quad * knorm / max(span, 1e-300):
        return QuadricForm(k4=k, kind="degenerate", subkind="zero")
    n = b / bn
    center = -f0 / (2.0 * bn) * n
    k_dir = int(np.argmin(np.abs(n)))
    t1 = np.zeros(3)
    t1[k_dir] = 1.0
    t1 -= (t1 @ n) * n
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    axes = np.stack([n, t1, t2], axis=1)
    return QuadricForm(
        k4=k, kind="plane", center=center, axes=axes, scales=np.ones(3),
        aux=((0.0,),))


# ---------------------------------------------------------------------------
# canonical edge roots


def quadratic_roots_unit(f0, fh, f1, eps=1e-13):
    """Roots in (0, 1) of the quadratics with values f0, fh, f1 at
    s = 0, 1/2, 1, batched.  Returns a list of sorted root arrays."""
    f0 = np.asarray(f0, dtype=float)
    fh = np.asarray(fh, dtype=float)
    f1 = np.asarray(f1, dtype=float)
    a = 2.0 * f0 - 4.0 * fh + 2.0 * f1
    b = -3.0 * f0 + 4.0 * fh - f1
    c = f0
    scale = np.maximum(np.maximum(np.abs(f0), np.abs(fh)), np.abs(f1))
    out = []
    for ai, bi, ci, si in zip(a, b, c, scale):
        roots = []
        if si == 0.0:
            out.append(np.empty(0))
            continue
        if abs(ai) <= eps * si:
            if abs(bi) > eps * si:
                roots.append(-ci / bi)
        else:
            disc = bi * bi - 4.0 * ai * ci
            if disc >= 0.0:
                sq = math.sqrt(disc)
                qq = -0.5 * (bi + (sq if bi >= 0 else -sq))
                r1 = qq / ai
                r2 = ci / qq if qq != 0.0 else r1
                roots.extend([r1, r2])
        roots = sorted(r for r in roots if 1e-12 < r < 1.0 - 1e-12)
        # dedupe tangential double roots
        dedup = []
        for r in roots:
            if not dedup or r - dedup[-1] > 1e-12:
                dedup.append(r)
        out.append(np.array(dedup))
    return out


# ---------------------------------------------------------------------------
# conics on faces


@dataclass
class ConicArc:
    """Sampled piece of the zero set on one face.

    ``points`` are canonical 3D samples (endpoints are the exact edge-root
    positions).  ``end_keys`` are (edge_key, root_index) pairs identifying
    the endpoints on tet edges, or None for a closed loop.
    """

    points: np.ndarray
    end_keys: tuple | None
    face: tuple


class _Conic:
    """Conic g(a, b) = [a, b, 1] C [a, b, 1]^T in face-affine coordinates."""

    def __init__(self, cmat):
        s = float(np.abs(cmat).max())
        self.zero = s == 0.0
        self.c = cmat / s if s > 0 else cmat
        a2 = self.c[:2, :2]
        self.bv = self.c[:2, 2]
        self.f = self.c[2, 2]
        w, v = np.linalg.eigh(a2)
        self.w, self.v = w, v
        eps = 1e-11
        wmax = float(np.abs(w).max())
        if self.zero or wmax <= eps:
            self.type = "linear"  # possibly empty / everything
            return
        if np.abs(w).min() <= eps * wmax:
            big = int(np.argmax(np.abs(w)))
            self.big = big
            bp = v.T @ self.bv
            if abs(bp[1 - big]) > eps:
                self.type = "parabola"
            else:
                self.type = "parallel_lines"
            return
        center = np.linalg.solve(a2, -self.bv)
        self.center = center
        self.kred = float(self.f + self.bv @ center)
        if abs(self.kred) <= 1e-13 * (1.0 + float(center @ center)):
            self.type = "crossing_lines" if w[0] * w[1] < 0 else "point"
            return
        m = w / (-self.kred)
        if (m > 0).all():
            self.type = "ellipse"
            self.axes_len = 1.0 / np.sqrt(m)
        elif (m < 0).all():
            self.type = "empty"
        else:
            self.type = "hyperbola"
            self.ipos = int(np.argmax(m))
            self.ineg = 1 - self.ipos
            self.apos = 1.0 / math.sqrt(m[self.ipos])
            self.aneg = 1.0 / math.sqrt(-m[self.ineg])

    # parameter handling: every branch exposes param_of(points2) -> (branch,t)
    # and point_at(branch, t) -> 2d point

    def param_of(self, pt):
        if self.type == "ellipse":
            d = self.v.T @ (pt - self.center) / self.axes_len
            return 0, math.atan2(d[1], d[0])
        if self.type == "hyperbola":
            d = self.v.T @ (pt - self.center)
            branch = 1 if d[self.ipos] >= 0 else -1
            return branch, math.asinh(d[self.ineg] / self.aneg)
        if self.type == "parabola":
            d = self.v.T @ pt
            return 0, d[self.big]
        if self.type in ("parallel_lines", "crossing_lines", "linear"):
            # branch = line id resolved by caller; param = coordinate along
            raise ValueError("line params handled separately")
        raise ValueError(f"no parameterization for {self.type}")

    def point_at(self, branch, t):
        if self.type == "ellipse":
            d = np.array([math.cos(t) * self.axes_len[0], math.sin(t) * self.axes_len[1]])
            return self.center + self.v @ d
        if self.type == "hyperbola":
            d = np.empty(2)
            d[self.ipos] = branch * self.apos * math.cosh(t)
            d[self.ineg] = self.aneg * math.sinh(t)
            return self.center + self.v @ d
        if self.type == "parabola":
            big = self.big
            bp = self.v.T @ self.bv
            wb = self.w[big]
            other = -(wb * t * t + 2.0 * bp[big] * t + self.f) / (2.0 * bp[1 - big])
            d = np.empty(2)
            d[big] = t
            d[1 - big] = other
            return self.v @ d
        raise ValueError(f"no parameterization for {self.type}")

    def lines(self):
        """Degenerate conics as a list of (origin, direction) lines."""
        out = []
        if self.type == "linear":
            # g(x) = 2 b.x + f
            n = self.bv
            if np.linalg.norm(n) > 1e-12:
                p0 = -self.f * n / (2.0 * (n @ n))
                d = np.array([-n[1], n[0]])
                out.append((p0, d / np.linalg.norm(d)))
            return out
        if self.type == "parallel_lines":
            big = self.big
            bp = self.v.T @ self.bv
            wb = self.w[big]
            disc = bp[big] ** 2 - wb * self.f
            if disc >= 0:
                for s in (1, -1) if disc > 0 else (1,):
                    xi_big = (-bp[big] + s * math.sqrt(disc)) / wb
                    d = np.zeros(2)
                    d[big] = xi_big
                    origin = self.v @ d
                    direction = self.v[:, 1 - big]
                    out.append((origin, direction))
            return out
        if self.type == "crossing_lines":
            w0, w1 = self.w
            # directions d with w0 d0^2 + w1 d1^2 = 0
            r = math.sqrt(-w0 / w1)
            for s in (1, -1):
                d = self.v @ np.array([1.0, s * r])
                out.append((self.center, d / np.linalg.norm(d)))
            return out
        return out


def face_conic_arcs(face_verts, conic_coeffs, edge_roots, max_step, max_samples=512):
    """Arcs of the conic inside one triangle face.

    face_verts: (3, 3) canonical (sorted-id) corner positions.
    conic_coeffs: 6 Bernstein (degree 2, dim 2) coefficients on the face.
    edge_roots: dict local edge (0,1)/(0,2)/(1,2) -> (edge_key, roots array,
        root positions (n, 3)); roots are parameters from the lower to the
        higher global id.
    Returns a list of ConicArc.
    """
    p0, p1, p2 = np.asarray(face_verts, dtype=float)
    d1, d2 = p1 - p0, p2 - p0

    lam = bernstein.lattice(2, dim=2)
    kb = np.zeros((3, 3))
    for c, l in zip(conic_coeffs, lam):
        nz = np.nonzero(l)[0]
        if len(nz) == 1:
            kb[nz[0], nz[0]] = c
        else:
            i, j = nz
            kb[i, j] = kb[j, i] = c
    g3 = np.array([[-1.0, -1.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    cmat = g3.T @ kb @ g3
    cmat = 0.5 * (cmat + cmat.T)
    conic = _Conic(cmat)
    if conic.type in ("empty", "point"):
        return []
    if conic.zero:
        return []

    # boundary crossings in (alpha, beta) coordinates
    crossings = []  # (2d point, end_key)
    for local, (alpha_of, beta_of) in (
        ((0, 1), (lambda s: s, lambda s: 0.0 * s)),
        ((0, 2), (lambda s: 0.0 * s, lambda s: s)),
        ((1, 2), (lambda s: 1.0 - s, lambda s: s)),
    ):
        key, roots, pts3 = edge_roots[local]
        for ridx, s in enumerate(roots):
            crossings.append((
                np.array([float(alpha_of(s)), float(beta_of(s))]),
                (key, ridx),
                pts3[ridx],
            ))

    def inside(ab):
        return ab[0] >= -1e-12 and ab[1] >= -1e-12 and ab[0] + ab[1] <= 1.0 + 1e-12

    def to3d(ab):
        return p0 + ab[..., 0, None] * d1 + ab[..., 1, None] * d2

    arcs = []

    def sample_arc(point_fn, t0, t1, end0, end1, p3_0, p3_1):
        n_est = 16
        ts = np.linspace(t0, t1, n_est)
        pts = np.stack([point_fn(t) for t in ts])
        seg3 = to3d(pts)
        length = float(np.linalg.norm(np.diff(seg3, axis=0), axis=1).sum())
        n = int(min(max(math.ceil(length / max_step), 1), max_samples))
        ts = np.linspace(t0, t1, n + 1)
        pts3 = to3d(np.stack([point_fn(t) for t in ts]))
        if p3_0 is not None:
            pts3[0] = p3_0
        if p3_1 is not None:
            pts3[-1] = p3_1
        arcs.append(ConicArc(points=pts3, end_keys=(end0, end1), face=None))

    if conic.type in ("ellipse", "hyperbola", "parabola"):
        # group crossings by branch
        by_branch = {}
        for ab, key, p3 in crossings:
            br, t = conic.param_of(ab)
            by_branch.setdefault(br, []).append((t, key, p3))
        if conic.type == "ellipse" and not crossings:
            # fully inside or fully outside
            probe = conic.point_at(0, 0.0)
            if inside(probe):
                n_est = 32
                ts = np.linspace(0, TWO_PI, n_est)
                seg3 = to3d(np.stack([conic.point_at(0, t) for t in ts]))
                length = float(np.linalg.norm(np.diff(seg3, axis=0), axis=1).sum())
                n = int(min(max(math.ceil(length / max_step), 8), max_samples))
                ts = np.linspace(0.0, TWO_PI, n + 1)[:-1]
                pts3 = to3d(np.stack([conic.point_at(0, t) for t in ts]))
                arcs.append(ConicArc(points=pts3, end_keys=None, face=None))
            return arcs
        for br, items in by_branch.items():
            items.sort(key=lambda x: x[0])
            if conic.type == "ellipse":
                pairs = []
                for i in range(len(items)):
                    t0, k0, q0 = items[i]
                    t1, k1, q1 = items[(i + 1) % len(items)]
                    if i == len(items) - 1:
                        t1 += TWO_PI
                    pairs.append((t0, t1, k0, k1, q0, q1))
            else:
                pairs = [
                    (items[i][0], items[i + 1][0], items[i][1], items[i + 1][1],
                     items[i][2], items[i + 1][2])
                    for i in range(len(items) - 1)
                ]
            for t0, t1, k0, k1, q0, q1 in pairs:
                if t1 - t0 <= 1e-14:
                    continue
                mid = conic.point_at(br, 0.5 * (t0 + t1))
                if inside(mid):
                    sample_arc(lambda t, b=br: conic.point_at(b, t),
                               t0, t1, k0, k1, q0, q1)
        return arcs

    # line-type conics
    for origin, direction in conic.lines():
        items = []
        for ab, key, p3 in crossings:
            d = ab - origin
            off = abs(d[0] * direction[1] - d[1] * direction[0])
            if off <= 1e-8 * (1.0 + np.linalg.norm(d)):
                items.append((float(d @ direction), key, p3))
        items.sort(key=lambda x: x[0])
        for i in range(len(items) - 1):
            t0, k0, q0 = items[i]
            t1, k1, q1 = items[i + 1]
            if t1 - t0 <= 1e-14:
                continue
            mid = origin + direction * (0.5 * (t0 + t1))
            if inside(mid):
                sample_arc(lambda t: origin + direction * t, t0, t1, k0, k1, q0, q1)
    return arcs


# ---------------------------------------------------------------------------
# loop chaining


def chain_loops(arcs):
    """Chain open arcs into closed 3D loops via their shared endpoint keys.

    Returns a list of (n, 3) arrays (closed: last point != first point).
    Raises LoopChainFailure when endpoints cannot be paired.
    """
    loops = []
    open_arcs = []
    for arc in arcs:
        if arc.end_keys is None:
            loops.append(arc.points)
        else:
            open_arcs.append(arc)
    by_key = {}
    for i, arc in enumerate(open_arcs):
        for side in (0, 1):
            by_key.setdefault(arc.end_keys[side], []).append((i, side))
    for key, ends in by_key.items():
        if len(ends) != 2:
            raise LoopChainFailure(f"endpoint key {key} appears {len(ends)} times")
    used = [False] * len(open_arcs)
    for start in range(len(open_arcs)):
        if used[start]:
            continue
        pts = [open_arcs[start].points]
        used[start] = True
        tail_key = open_arcs[start].end_keys[1]
        start_key = open_arcs[start].end_keys[0]
        while tail_key != start_key:
            nxt = [e for e in by_key[tail_key] if not used[e[0]]]
            if not nxt:
                raise LoopChainFailure("open chain: no matching arc")
            ai, side = nxt[0]
            used[ai] = True
            seg = open_arcs[ai].points
            if side == 1:
                seg = seg[::-1]
                tail_key = open_arcs[ai].end_keys[0]
            else:
                tail_key = open_arcs[ai].end_keys[1]
            pts.append(seg[1:])
        loop = np.concatenate(pts, axis=0)
        loops.append(loop[:-1] if len(loop) > 1 else loop)
    return [l for l in loops if len(l) >= 3]


# ---------------------------------------------------------------------------
# patch extraction in the chart


def _bary_inside(corners, pts, tol=1e-9):
    c = np.asarray(corners, dtype=float)
    m = np.column_stack([c[1] - c[0], c[2] - c[0], c[3] - c[0]])
    loc = np.linalg.solve(m, (np.atleast_2d(pts) - c[0]).T).T
    first = 1.0 - loc.sum(axis=1)
    bary = np.column_stack([first, loc])
    return (bary >= -tol).all(axis=1)


def _bary_margin(corners, pts):
    """Smallest barycentric coordinate (signed inside margin) per point."""
    c = np.asarray(corners, dtype=float)
    m = np.column_stack([c[1] - c[0], c[2] - c[0], c[3] - c[0]])
    loc = np.linalg.solve(m, (np.atleast_2d(pts) - c[0]).T).T
    first = 1.0 - loc.sum(axis=1)
    bary = np.column_stack([first, loc])
    return bary.min(axis=1)


def _unwrap_theta(theta):
    out = np.array(theta, dtype=float)
    for i in range(1, len(out)):
        d = out[i] - out[i - 1]
        out[i] = out[i - 1] + (d - TWO_PI * round(d / TWO_PI))
    return out


def _points_in_polygon(pts, poly):
    """Even-odd membership of many points in one polygon, vectorized."""
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    n = len(poly)
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        cond = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = (xj - xi) * (y - yi) / (yj - yi) + xi
        inside ^= cond & (x < np.where(cond, xcross, 0.0))
        j = i
    return inside


class _ChartRegion:
    """Accumulates chart points/constraints; boundary points keep their
    canonical 3D coordinates, interior points are mapped through the chart.

    Region membership of a chart point is decided topologically: the
    registered filter polygons (the boundary loops) are the complete
    boundary of the in-tet set in the chart, so membership equals that of a
    decisively-probed reference point XORed with the crossing parity.
    """

    def __init__(self, qform, sheet=1.0):
        self.q = qform
        self.sheet = sheet
        self.pts2 = []
        self.pts3 = []
        self.constraints = []
        self.filter_polys = []
        self.constraint_loop = {}  # sorted edge -> (loop id, a, b as oriented)
        self.loop_samples = set()

    def add_boundary(self, uv, xyz):
        idx = len(self.pts2)
        self.pts2.append(np.asarray(uv, dtype=float))
        self.pts3.append(np.asarray(xyz, dtype=float))
        return idx

    def add_interior(self, uv):
        idx = len(self.pts2)
        uv = np.asarray(uv, dtype=float)
        self.pts2.append(uv)
        self.pts3.append(self.q.chart_point(uv, self.sheet))
        return idx

    def add_loop_constraints(self, idxs, closed=True):
        n = len(idxs)
        rng = range(n) if closed else range(n - 1)
        for i in rng:
            self.constraints.append((idxs[i], idxs[(i + 1) % n]))

    def add_loop(self, idxs, closed=True):
        """Constraint chain that is also a region boundary loop."""
        loop_id = len(self.filter_polys)
        self.filter_polys.append(np.stack([self.pts2[i] for i in idxs]))
        n = len(idxs)
        rng = range(n) if closed else range(n - 1)
        for k in rng:
            a, b = idxs[k], idxs[(k + 1) % n]
            self.constraints.append((a, b))
            self.constraint_loop[(min(a, b), max(a, b))] = (loop_id, a, b)
        self.loop_samples.update(int(i) for i in idxs)
        return loop_id

    def _parity(self, pts):
        par = np.zeros(len(pts), dtype=bool)
        for poly in self.filter_polys:
            par ^= _points_in_polygon(pts, poly)
        return par

    def _reference_membership(self, corners, margin=1e-4):
        """(parity, in_tet) of a decisively probed chart point."""
        pts2 = np.asarray(self.pts2)
        lo, hi = pts2.min(axis=0), pts2.max(axis=0)
        span = np.maximum(hi - lo, 1e-12)
        candidates = [
            lo + span * f for f in
            ((0.03, 0.04), (0.97, 0.05), (0.5, 0.5), (0.06, 0.93),
             (0.94, 0.96), (0.51, 0.07), (0.07, 0.52), (0.53, 0.95))
        ]
        for uv in candidates:
            uv = np.asarray(uv)
            xyz = self.q.chart_point(uv, self.sheet)
            bary = _bary_margin(corners, xyz[None])[0]
            if abs(bary) >= margin:
                return bool(self._parity(uv[None])[0]), bool(bary > 0)
        return None, None

    def triangulate(self, corners, step_uv):
        pts2 = np.asarray(self.pts2)
        if len(pts2) < 3:
            return []
        # interior sampling grid matched to the boundary density
        lo = pts2.min(axis=0)
        hi = pts2.max(axis=0)
        span = hi - lo
        n_steiner_before = len(pts2)
        steiner = []
        if step_uv is not None and (span > 0).all():
            nu = int(min(max(span[0] / step_uv[0], 0), 64))
            nv = int(min(max(span[1] / step_uv[1], 0), 64))
            if nu >= 2 and nv >= 2:
                us = lo[0] + (np.arange(1, nu) / nu) * span[0]
                vs = lo[1] + (np.arange(1, nv) / nv) * span[1]
                grid = np.stack(np.meshgrid(us, vs, indexing="ij"), axis=-1).reshape(-1, 2)
                keep = filter_steiner_near_constraints(
                    grid, pts2, 0.7 * min(step_uv[0], step_uv[1]))
                grid = grid[keep]
                if len(grid):
                    xyz = self.q.chart_point(grid, self.sheet)
                    inside = _bary_inside(corners, xyz)
                    for uv, p3, ok in zip(grid, xyz, inside):
                        if ok:
                            idx = len(self.pts2)
                            self.pts2.append(uv)
                            self.pts3.append(p3)
                            steiner.append(idx)
        pts2 = np.asarray(self.pts2)
        try:
            tris = constrained_delaunay(pts2, self.constraints)
        except TriangulationFailure:
            if steiner:
                # retry without interior points
                self.pts2 = self.pts2[:n_steiner_before]
                self.pts3 = self.pts3[:n_steiner_before]
                pts2 = np.asarray(self.pts2)
                tris = constrained_delaunay(pts2, self.constraints)
            else:
                raise
        if len(tris) == 0:
            return []
        cent_uv = pts2[tris].mean(axis=1)
        cent_xyz = self.q.chart_point(cent_uv, self.sheet)
        decided = False
        if self.filter_polys:
            # probe both flanks of each loop's longest edge: membership
            # flips across the loop, and both flanks are decisively in/out
            # of the tet, which anchors the parity reference exactly
            loop_left = [None] * len(self.filter_polys)
            ref_par = None
            for lid, poly in enumerate(self.filter_polys):
                nxt = np.roll(poly, -1, axis=0)
                d = nxt - poly
                k = int(np.argmax(np.einsum("ij,ij->i", d, d)))
                mid = 0.5 * (poly[k] + nxt[k])
                normal = np.array([-d[k, 1], d[k, 0]]) * 0.25
                flank = np.stack([mid + normal, mid - normal])
                margins = _bary_margin(
                    corners, self.q.chart_point(flank, self.sheet))
                if margins[0] > 1e-7 and margins[1] < -1e-7:
                    loop_left[lid] = True
                    inside_pt = flank[0]
                elif margins[0] < -1e-7 and margins[1] > 1e-7:
                    loop_left[lid] = False
                    inside_pt = flank[1]
                else:
                    continue
                if ref_par is None:
                    ref_par = bool(self._parity(inside_pt[None])[0])
            if ref_par is not None:
                def member(pts):
                    # same parity as a known inside point -> inside
                    return ~(self._parity(pts) ^ ref_par)

                keep = member(cent_uv)
                keep &= _bary_inside(corners, cent_xyz, tol=0.05)
                for n_t, t in enumerate(tris):
                    # triangles on a loop constraint: exact side-of-edge test
                    # (cyclically invariant, so multiple edges always agree)
                    for e in ((t[0], t[1]), (t[1], t[2]), (t[0], t[2])):
                        info = self.constraint_loop.get((min(e), max(e)))
                        if info is None:
                            continue
                        lid, a, b = info
                        if loop_left[lid] is None:
                            continue
                        c = [v for v in t if v != a and v != b][0]
                        pa, pb, pc = pts2[a], pts2[b], pts2[c]
                        left = ((pb[0] - pa[0]) * (pc[1] - pa[1])
                                - (pb[1] - pa[1]) * (pc[0] - pa[0])) > 0
                        keep[n_t] = left == loop_left[lid]
                        break
                decided = True
        if not decided:
            keep = _bary_inside(corners, cent_xyz, tol=1e-9)
        out = []
        pts3 = self.pts3
        for t in tris[keep]:
            out.append((pts3[t[0]], pts3[t[1]], pts3[t[2]]))
        return out


def _project_quadric(qform, p, iters=6):
    """Newton projection of a 3D point onto the quadric along its gradient;
    chart-free, so adjacent tets project chord centroids identically."""
    x = np.array(p, dtype=float)
    for _ in range(iters):
        f = float(qform.evaluate(x[None])[0])
        g = qform.gradient(x[None])[0]
        g2 = float(g @ g)
        if g2 <= 1e-300:
            break
        x = x - f * g / g2
    return x


def _chart_step(qform, uv_center, sheet, step3d):
    """Chart-space steps matching a 3D arc step, from the local jacobian."""
    eps = 1e-4
    base = qform.chart_point(uv_center, sheet)
    du = qform.chart_point(uv_center + np.array([eps, 0.0]), sheet) - base
    dv = qform.chart_point(uv_center + np.array([0.0, eps]), sheet) - base
    ju = np.linalg.norm(du) / eps
    jv = np.linalg.norm(dv) / eps
    return (step3d / max(ju, 1e-12), step3d / max(jv, 1e-12))


def extract_patch(qform: QuadricForm, loops, corners, opts: QuadricOptions):
    """Triangulate the quadric piece inside a tet bounded by chained loops.

    Returns a list of (3, 3)-point triangles.  Raises LoopChainFailure for
    configurations the chart pipeline cannot handle (caller falls back).
    """
    if qform.kind == "degenerate":
        raise LoopChainFailure("degenerate quadric has no chart")
    if not loops:
        return _closed_component(qform, corners, opts)

    if qform.kind == "hyperboloid2":
        groups = {}
        for loop in loops:
            uv, sheet = qform.chart_coords(loop)
            s = 1.0 if np.mean(sheet) >= 0 else -1.0
            groups.setdefault(s, []).append((uv, loop))
        tris = []
        for s, items in sorted(groups.items()):
            region = _ChartRegion(qform, sheet=s)
            for uv, loop in items:
                idxs = [region.add_boundary(uv[i], loop[i]) for i in range(len(loop))]
                region.add_loop(idxs)
            all_uv = np.concatenate([uv for uv, _ in items])
            step_uv = _chart_step(qform, all_uv.mean(axis=0), s, opts.max_arc_step)
            tris.extend(region.triangulate(corners, step_uv))
        return tris

    # theta-periodic charts
    loop_uv = []
    windings = []
    for loop in loops:
        uv, _ = qform.chart_coords(loop)
        theta = _unwrap_theta(uv[:, 0])
        closing = theta[0] - theta[-1]
        w = -round((closing - (closing - TWO_PI * round(closing / TWO_PI))) / TWO_PI)
        uv = uv.copy()
        uv[:, 0] = theta
        loop_uv.append(uv)
        windings.append(int(w))

    if all(w == 0 for w in windings):
        theta_c = _gap_theta(loop_uv)
        if theta_c is None:
            raise LoopChainFailure("loops cover the full period without winding")
        for uv in loop_uv:
            # place the loop inside the window (theta_c, theta_c + 2 pi)
            shift = TWO_PI * math.floor((uv[:, 0].min() - theta_c) / TWO_PI)
            uv[:, 0] -= shift
        if _region_touches_window_border(qform, loop_uv, theta_c, corners):
            return _full_window_patch(qform, loops, loop_uv, theta_c, corners, opts)
        region = _ChartRegion(qform)
        for uv, loop in zip(loop_uv, loops):
            idxs = [region.add_boundary(uv[i], loop[i]) for i in range(len(loop))]
            region.add_loop(idxs)
        all_uv = np.concatenate(loop_uv)
        step_uv = _chart_step(qform, all_uv.mean(axis=0), 1.0, opts.max_arc_step)
        return region.triangulate(corners, step_uv)

    winding_ids = [i for i, w in enumerate(windings) if w != 0]
    if any(abs(windings[i]) > 1 for i in winding_ids):
        raise LoopChainFailure("loop winds more than once")
    if len(winding_ids) == 2:
        return _banded_patch(qform, loops, loop_uv, windings, winding_ids,
                             corners, opts)
    if len(winding_ids) == 1 and qform.kind == "ellipsoid":
        return _polar_cap_patch(qform, loops, loop_uv, winding_ids[0],
                                corners, opts)
    raise LoopChainFailure(f"unsupported winding configuration {windings}")


def _gap_theta(loop_uv, n_scan=720):
    """An angle not covered by any loop's theta interval (mod 2 pi)."""
    covered = np.zeros(n_scan, dtype=bool)
    for uv in loop_uv:
        lo, hi = float(uv[:, 0].min()), float(uv[:, 0].max())
        if hi - lo >= TWO_PI - 1e-9:
            return None
        a = int(math.floor(lo / TWO_PI * n_scan)) - 1
        b = int(math.ceil(hi / TWO_PI * n_scan)) + 1
        idx = np.arange(a, b + 1) % n_scan
        covered[idx] = True
    free = np.where(~covered)[0]
    if len(free) == 0:
        return None
    return (free[0] + 0.5) / n_scan * TWO_PI


def _window_t_range(qform, loop_uv, corners):
    ts = np.concatenate([uv[:, 1] for uv in loop_uv])
    if qform.kind == "ellipsoid":
        return 0.0, math.pi
    xi = qform.local(corners)
    lo = min(float(ts.min()), float(xi[:, 2].min()))
    hi = max(float(ts.max()), float(xi[:, 2].max()))
    pad = 0.05 * (hi - lo) + 1e-9
    return lo - pad, hi + pad


def _region_touches_window_border(qform, loop_uv, theta_c, corners):
    """True when the in-tet part of the quadric reaches the chart seam or
    (for ellipsoids) the poles, i.e. the loops do not bound it in the
    chart plane."""
    t_lo, t_hi = _window_t_range(qform, loop_uv, corners)
    ts = np.linspace(t_lo, t_hi, 17)
    probes = np.stack([np.full_like(ts, theta_c), ts], axis=1)
    pts = qform.chart_point(probes)
    if _bary_inside(corners, pts).any():
        return True
    if qform.kind == "ellipsoid":
        poles = np.stack([
            qform.chart_point(np.array([0.0, 0.0])),
            qform.chart_point(np.array([0.0, math.pi])),
        ])
        if _bary_inside(corners, poles).any():
            return True
    return False


def _full_window_patch(qform, loops, loop_uv, theta_c, corners, opts):
    """Triangulate over the whole chart window [theta_c, theta_c + 2 pi] with
    the loops as holes; the seam columns share 3D positions bitwise."""
    region = _ChartRegion(qform)
    all_uv = np.concatenate(loop_uv)
    t_lo, t_hi = _window_t_range(qform, loop_uv, corners)
    mid_uv = np.array([theta_c + math.pi, 0.5 * (t_lo + t_hi)])
    step_uv = _chart_step(qform, mid_uv, 1.0, opts.max_arc_step)

    for uv, loop in zip(loop_uv, loops):
        idxs = [region.add_boundary(uv[i], loop[i]) for i in range(len(loop))]
        region.add_loop(idxs)

    m = int(np.clip(math.ceil((t_hi - t_lo) / max(step_uv[1], 1e-12)), 4, 128))
    t_samples = np.linspace(t_lo, t_hi, m + 1)
    col_uv = np.stack([np.full(m + 1, theta_c), t_samples], axis=1)
    col_3d = qform.chart_point(col_uv)
    left = [region.add_boundary(col_uv[i], col_3d[i]) for i in range(m + 1)]
    right = [region.add_boundary(col_uv[i] + [TWO_PI, 0.0], col_3d[i])
             for i in range(m + 1)]
    region.add_loop_constraints(left, closed=False)
    region.add_loop_constraints(right, closed=False)
    return region.triangulate(corners, step_uv)


def _cut_path_samples(uv0, uv1, step_uv):
    d = np.asarray(uv1, dtype=float) - np.asarray(uv0, dtype=float)
    n = int(min(max(math.ceil(max(abs(d[0]) / step_uv[0], abs(d[1]) / step_uv[1])), 1), 256))
    ts = np.arange(1, n) / n
    return np.asarray(uv0) + ts[:, None] * d


def _banded_patch(qform, loops, loop_uv, windings, winding_ids, corners, opts):
    ia, ib = winding_ids
    uva, uvb = loop_uv[ia], loop_uv[ib]
    # orient both to wind +1
    if windings[ia] < 0:
        uva = uva[::-1].copy()
        loops[ia] = loops[ia][::-1]
    if windings[ib] < 0:
        uvb = uvb[::-1].copy()
        loops[ib] = loops[ib][::-1]
    # cut at sample 0 of loop a; nearest-in-theta sample of loop b
    theta0 = uva[0, 0]
    shift_b = TWO_PI * round((theta0 - uvb[:, 0].mean()) / TWO_PI)
    uvb = uvb.copy()
    uvb[:, 0] += shift_b
    jb = int(np.argmin(np.abs(((uvb[:, 0] - theta0 + math.pi) % TWO_PI) - math.pi)))
    uvb = np.concatenate([uvb[jb:], uvb[:jb]])
    loop_b = np.concatenate([loops[ib][jb:], loops[ib][:jb]])
    shift_b0 = TWO_PI * round((theta0 - uvb[0, 0]) / TWO_PI)
    uvb[:, 0] = _unwrap_theta(uvb[:, 0]) + shift_b0

    region = _ChartRegion(qform)
    all_uv = np.concatenate([uva, uvb])
    step_uv = _chart_step(qform, all_uv.mean(axis=0), 1.0, opts.max_arc_step)

    ia_idx = [region.add_boundary(uva[i], loops[ia][i]) for i in range(len(uva))]
    ia_idx.append(region.add_boundary(uva[0] + [TWO_PI, 0.0], loops[ia][0]))
    ib_idx = [region.add_boundary(uvb[i], loop_b[i]) for i in range(len(uvb))]
    ib_idx.append(region.add_boundary(uvb[0] + [TWO_PI, 0.0], loop_b[0]))

    cut = _cut_path_samples(uva[0], uvb[0], step_uv)
    cut_idx = [region.add_interior(uv) for uv in cut]
    cut3 = [region.pts3[i] for i in cut_idx]
    cutp_idx = [region.add_boundary(uv + [TWO_PI, 0.0], p3)
                for uv, p3 in zip(cut, cut3)]

    # polygon: a0 .. a0', cut' down, b0' .. b0 (reversed loop), cut up
    ring = (
        ia_idx
        + cutp_idx
        + list(reversed(ib_idx))
        + list(reversed(cut_idx))
    )
    region.add_loop(ring, closed=True)

    # island loops (non-winding) shifted into the window
    for li, (uv, loop) in enumerate(zip(loop_uv, loops)):
        if li in (ia, ib):
            continue
        m = float(np.mean(uv[:, 0]))
        shift = TWO_PI * round((theta0 + math.pi - m) / TWO_PI)
        uv = uv.copy()
        uv[:, 0] += shift
        idxs = [region.add_boundary(uv[i], loop[i]) for i in range(len(loop))]
        region.add_loop(idxs)

    return region.triangulate(corners, step_uv)


def _polar_cap_patch(qform, loops, loop_uv, iw, corners, opts):
    uvw = loop_uv[iw]
    all_pts3 = loops[iw]
    # candidate poles: phi = 0 (north) and pi (south)
    tris_for = None
    for phi_pole in (0.0, math.pi):
        pole3 = qform.chart_point(np.array([0.0, phi_pole]))
        if not _bary_inside(corners, pole3[None])[0]:
            continue
        # region side check: probe halfway between loop and pole
        probe_uv = np.array([uvw[0, 0], 0.5 * (uvw[:, 1].mean() + phi_pole)])
        probe3 = qform.chart_point(probe_uv)
        if not _bary_inside(corners, probe3[None])[0]:
            continue
        region = _ChartRegion(qform)
        step_uv = _chart_step(
            qform, np.array([uvw[0, 0], uvw[:, 1].mean()]), 1.0, opts.max_arc_step)
        w_idx = [region.add_boundary(uvw[i], all_pts3[i]) for i in range(len(uvw))]
        w_idx.append(region.add_boundary(uvw[0] + [TWO_PI, 0.0], all_pts3[0]))
        theta0 = uvw[0, 0]
        cut = _cut_path_samples(uvw[0], [theta0, phi_pole], step_uv)
        cut_idx = [region.add_interior(uv) for uv in cut]
        cut3 = [region.pts3[i] for i in cut_idx]
        cutp_idx = [region.add_boundary(uv + [TWO_PI, 0.0], p3)
                    for uv, p3 in zip(cut, cut3)]
        # pole line: both ends share the same 3D point
        pole_a = region.add_boundary([theta0, phi_pole], pole3)
        pole_b = region.add_boundary([theta0 + TWO_PI, phi_pole], pole3)
        ring = w_idx + cutp_idx + [pole_b, pole_a] + list(reversed(cut_idx))
        region.add_loop(ring, closed=True)
        # islands
        for li, (uv, loop) in enumerate(zip(loop_uv, loops)):
            if li == iw:
                continue
            m = float(np.mean(uv[:, 0]))
            shift = TWO_PI * round((theta0 + math.pi - m) / TWO_PI)
            uv = uv.copy()
            uv[:, 0] += shift
            idxs = [region.add_boundary(uv[i], loop[i]) for i in range(len(loop))]
            region.add_loop(idxs)
        tris_for = region.triangulate(corners, step_uv)
        break
    if tris_for is None:
        raise LoopChainFailure("winding loop without reachable pole")
    return tris_for


def _closed_component(qform, corners, opts):
    """Surface component with no face intersections (entirely inside the
    tet); only bounded quadrics qualify."""
    if qform.kind != "ellipsoid":
        return []
    # extremal points of the ellipsoid along its axes
    ext = qform.center + (qform.axes * qform.scales).T
    ext = np.concatenate([ext, qform.center - (qform.axes * qform.scales).T])
    if not _bary_inside(corners, ext).all():
        return []
    # uv-sphere triangulation; seam and poles share vertices exactly
    circ = TWO_PI * float(np.max(qform.scales))
    n_theta = int(np.clip(math.ceil(circ / opts.max_arc_step), 8, 128))
    n_phi = max(n_theta // 2, 4)
    thetas = np.arange(n_theta) / n_theta * TWO_PI
    phis = np.arange(1, n_phi) / n_phi * math.pi
    ring_pts = [
        qform.chart_point(np.stack([thetas, np.full(n_theta, phi)], axis=1))
        for phi in phis
    ]
    north = qform.chart_point(np.array([0.0, 0.0]))
    south = qform.chart_point(np.array([0.0, math.pi]))
    tris = []
    for j in range(n_theta):
        jn = (j + 1) % n_theta
        tris.append((north, ring_pts[0][j], ring_pts[0][jn]))
        tris.append((south, ring_pts[-1][jn], ring_pts[-1][j]))
    for r in range(len(phis) - 1):
        a, b = ring_pts[r], ring_pts[r + 1]
        for j in range(n_theta):
            jn = (j + 1) % n_theta
            tris.append((a[j], b[j], b[jn]))
            tris.append((a[j], b[jn], a[jn]))
    return tris


# ---------------------------------------------------------------------------
# fallback for degenerate quadrics / failed chains


def fallback_patch(eval_bary, grad_fn, loops, corners, opts: QuadricOptions,
                   coeff_has_sign_change=True):
    """Fill chained loops directly (best-fit-plane constrained triangulation
    plus midpoint refinement projected back to the surface); when no loops
    exist, march closed interior components.  The boundary samples pass
    through untouched so cross-tet stitching is preserved."""
    corners = np.asarray(corners, dtype=float)
    if not loops:
        if not coeff_has_sign_change:
            return []
        return marching.marching_on_tet(eval_bary, corners, opts.fallback_depth)

    all_pts = np.concatenate(loops)
    origin = all_pts.mean(axis=0)
    u, s, vt = np.linalg.svd(all_pts - origin, full_matrices=False)
    e1, e2 = vt[0], vt[1]

    pts3 = []
    pts2 = []
    constraints = []
    for loop in loops:
        base = len(pts3)
        for p in loop:
            pts3.append(np.asarray(p, dtype=float))
            d = p - origin
            pts2.append((float(d @ e1), float(d @ e2)))
        n = len(loop)
        for i in range(n):
            constraints.append((base + i, base + (i + 1) % n))
    try:
        tris = constrained_delaunay(np.asarray(pts2), constraints)
    except TriangulationFailure:
        if len(loops) == 1:
            tris = np.array(ear_clip(np.asarray(pts2), list(range(len(pts2)))),
                            dtype=np.int64).reshape(-1, 3)
        else:
            raise LoopChainFailure("fallback triangulation failed")

    if len(tris) == 0:
        return []
    # drop triangles whose centroid leaves the tet (concave multi-loop cases)
    pts3_arr = np.asarray(pts3)
    cent = pts3_arr[tris].mean(axis=1)
    keep = _bary_inside(corners, cent, tol=1e-6)
    tris = tris[keep]

    triangles = [tuple(pts3_arr[i] for i in t) for t in tris]
    # midpoint refinement with projection back onto the zero set
    for _ in range(2):
        triangles, changed = _refine_project(
            triangles, eval_bary, grad_fn, corners, opts)
        if not changed:
            break
    return triangles


def _project_to_surface(p, eval_bary, grad_fn, corners, iters=8):
    c = corners
    m = np.column_stack([c[1] - c[0], c[2] - c[0], c[3] - c[0]])
    minv = np.linalg.inv(m)
    x = np.array(p, dtype=float)
    for _ in range(iters):
        loc = minv @ (x - c[0])
        bary = np.array([1.0 - loc.sum(), loc[0], loc[1], loc[2]])
        f = float(eval_bary(bary[None])[0])
        g = grad_fn(x[None])[0]
        g2 = float(g @ g)
        if g2 <= 1e-30:
            break
        x = x - f * g / g2
    return x


def _refine_project(triangles, eval_bary, grad_fn, corners, opts):
    """Split interior edges longer than twice the arc step, projecting new
    vertices to the surface; boundary (canonical) edges never split."""
    edge_count = {}
    for tri in triangles:
        for i in range(3):
            a = tuple(tri[i])
            b = tuple(tri[(i + 1) % 3])
            key = (min(a, b), max(a, b))
            edge_count[key] = edge_count.get(key, 0) + 1
    limit = 2.0 * opts.max_arc_step
    midpoint = {}
    for key, cnt in edge_count.items():
        if cnt != 2:
            continue  # boundary edge: keep canonical samples intact
        a, b = np.array(key[0]), np.array(key[1])
        if np.linalg.norm(a - b) > limit:
            mid = _project_to_surface(0.5 * (a + b), eval_bary, grad_fn, corners)
            midpoint[key] = mid
    if not midpoint:
        return triangles, False
    out = []
    for tri in triangles:
        corners_t = [np.asarray(p) for p in tri]
        mids = []
        for i in range(3):
            a = tuple(corners_t[i])
            b = tuple(corners_t[(i + 1) % 3])
            mids.append(midpoint.get((min(a, b), max(a, b))))
        n_split = sum(m is not None for m in mids)
        if n_split == 0:
            out.append(tri)
        elif n_split == 1:
            i = next(i for i, m in enumerate(mids) if m is not None)
            m = mids[i]
            a, b, c = corners_t[i], corners_t[(i + 1) % 3], corners_t[(i + 2) % 3]
            out.append((a, m, c))
            out.append((m, b, c))
        else:
            # split at all marked edges via centroid fan
            cen = _project_to_surface(
                np.mean(corners_t, axis=0), eval_bary, grad_fn, corners)
            for i in range(3):
                a, b = corners_t[i], corners_t[(i + 1) % 3]
                m = mids[i]
                if m is None:
                    out.append((a, b, cen))
                else:
                    out.append((a, m, cen))
                    out.append((m, b, cen))
    return out, True
