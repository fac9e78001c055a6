"""Whole-mesh feature extraction.

Routes degree-2 features (magnitude, isotropicity, traceless, balanced)
through the quadric extractor and degree-3/6 features (neutral, degenerate,
mode surfaces) through the recursive subdivision extractor; splits surfaces
into their sign parts along the triple degenerate curve; attaches exact
per-vertex attributes evaluated from the per-tet affine tensors.

Stage order is fixed and results merge in tet-index order, so output is
independent of thread count.
"""
from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, replace

import numpy as np

from . import apatch, bernstein, quadric, tensor as tz
from .errors import CurveOffSurface, InvalidSpec, LoopChainFailure
from .geometry import FeatureCurve, FeatureSurface, MeshAccumulator, orient_triangles
from .mesh import FEATURE_DEGREES, TetField, feature_coeffs_batch, feature_values
from .triangulate import ear_clip


@dataclass(frozen=True)
class FeatureRequest:
    """User-facing feature specification.

    kind: magnitude | isotropicity | traceless | balanced | neutral |
          degenerate | mode | tdc
    """

    kind: str
    value: float | None = None  # magnitude level s
    eta: float | None = None
    mu: float | None = None
    sign_p: int = 0
    sign_q: int = 0
    part: str = "both"


@dataclass
class PipelineOptions:
    # Boundary sampling: absolute step, or per-face circumradius / divisor.
    # The face-conic primitive documents /32; the pipeline default of /8
    # keeps whole-mesh extractions tractable at equal robustness.
    arc_step: float | None = None
    arc_divisor: float = 8.0
    eps_res: float = 1e-6
    eps_res_deg3: float = 1e-6
    eps_res_deg6: float = 1e-4
    eps_quad: float = 1e-9
    sign_tol: float = 1e-9
    max_depth: int = 6
    guide_depth: int = 0  # extra forced depth near the TDC (0 = off)
    threads: int = 1
    split_parts: bool = True
    polish_tdc: bool = True
    fallback_depth: int = 3


PART_BY_INVARIANT = {
    "det": (("linear", 1), ("planar", -1)),
    "minor": (("complex", 1), ("real", -1)),
}


def resolve_request(req: FeatureRequest):
    """Validate a request; returns (feature, params, splitter) where splitter
    is the complementary invariant used for part separation (or None)."""
    kind = req.kind.lower()
    if kind == "magnitude":
        if req.value is None or req.value <= 0:
            raise InvalidSpec("magnitude surface needs a level s > 0")
        return "magnitude_sq", (float(req.value),), None
    if kind == "isotropicity":
        if req.eta is None or not -1.0 < req.eta < 1.0:
            raise InvalidSpec("isotropicity surface needs eta in (-1, 1)")
        if req.eta == 0.0:
            return "trace", (), None
        return "isotropicity_sq", (float(req.eta),), None
    if kind == "traceless":
        return "trace", (), None
    if kind == "balanced":
        return "minor", (), "det"
    if kind == "neutral":
        return "det", (), "minor"
    if kind == "degenerate":
        return "mode_neg", (1.0,), "det"
    if kind == "tdc":
        return "minor", (), "det"
    if kind == "mode":
        mu, sp, sq = req.mu, int(req.sign_p), int(req.sign_q)
        if mu is None or mu < 0:
            raise InvalidSpec("mode surface needs mu >= 0")
        if sp == 0:
            if math.isinf(mu) and sq != 0:
                return "minor", (), "det"  # balanced surface
            raise InvalidSpec(
                "sign_p = 0 requires mu = inf with sign_q != 0 (balanced surface); "
                "p = q = 0 is the triple degenerate curve")
        if math.isinf(mu):
            raise InvalidSpec("mu = inf requires sign_p = 0")
        if mu == 0.0:
            if sq != 0:
                raise InvalidSpec("mu = 0 forces q = 0 (neutral surface)")
            return "det", (), "minor"
        if sq == 0:
            raise InvalidSpec("q = 0 with p != 0 forces mu = 0")
        feature = "mode_neg" if sp < 0 else "mode_pos"
        return feature, (float(mu),), "det"
    raise InvalidSpec(f"unknown feature kind {req.kind!r}")


def extract(field: TetField, req: FeatureRequest, opts: PipelineOptions | None = None):
    """Extract a feature; returns a list of FeatureSurface (one per part) or
    a FeatureCurve for kind='tdc'."""
    opts = opts or PipelineOptions()
    feature, params, splitter = resolve_request(req)
    kind = req.kind.lower()

    if kind == "tdc":
        return extract_tdc(field, opts)

    trace_sign = None
    if kind == "isotropicity" and feature == "isotropicity_sq":
        trace_sign = {"positive": 1, "negative": -1, "both": None}.get(req.part)

    degree = FEATURE_DEGREES[feature]
    if degree == 2:
        surface = _quadratic_surface(field, feature, params, opts, trace_sign)
    else:
        surface = _apatch_surface(field, feature, params, opts, splitter)
    surface.feature = kind
    surface.params = tuple(params)
    attach_attributes(surface, field, opts.sign_tol)

    if kind == "isotropicity" and feature == "isotropicity_sq":
        parts = _split_by_scalar_sign(
            surface, field, "trace", ("positive", "negative"), opts)
        wanted = {"positive": ["positive"], "negative": ["negative"],
                  "both": ["positive", "negative"]}[req.part or "both"]
        return [p for p in parts if p.part in wanted]

    if splitter is None or not opts.split_parts:
        return [surface]

    parts = split_parts(surface, field, splitter, opts)
    sel = req.part or "both"
    if sel != "both":
        parts = [p for p in parts if p.part == sel]
    return parts


# ---------------------------------------------------------------------------
# quadratic route


def _face_circumradius(p0, p1, p2):
    a = np.linalg.norm(p1 - p2, axis=-1)
    b = np.linalg.norm(p0 - p2, axis=-1)
    c = np.linalg.norm(p0 - p1, axis=-1)
    area2 = np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=-1)
    return a * b * c / np.maximum(2.0 * area2, 1e-300)


_FACE_LOCAL = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
_EDGE_LOCAL = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_FACE_EDGE_LOCAL = ((0, 1), (0, 2), (1, 2))  # edges of a sorted face triple


def _quadratic_surface(field, feature, params, opts, trace_sign=None):
    idx, coeffs = feature_coeffs_batch(field, feature, params)
    scale = np.abs(coeffs).max(axis=1)
    active_mask = (coeffs.min(axis=1) <= 0.0) & (coeffs.max(axis=1) >= 0.0) & (scale > 0)
    active = idx[active_mask]
    acc = MeshAccumulator()
    if len(active) == 0:
        return acc.build(feature=feature, params=params)
    coeffs_by_tet = {int(t): c for t, c in zip(active, coeffs[active_mask])}

    # canonical edge roots (computed once per mesh edge)
    tets = field.tets[active]
    edge_pairs = np.sort(
        np.concatenate([tets[:, list(e)] for e in _EDGE_LOCAL]), axis=1)
    edge_pairs = np.unique(edge_pairs, axis=0)
    t0 = field.tensors[edge_pairs[:, 0]]
    t1 = field.tensors[edge_pairs[:, 1]]
    f0 = feature_values(t0, feature, params)
    f1 = feature_values(t1, feature, params)
    fh = feature_values(0.5 * (t0 + t1), feature, params)
    roots_per_edge = quadric.quadratic_roots_unit(f0, fh, f1)
    v = field.vertices
    edge_data = {}
    for (a, b), roots in zip(edge_pairs, roots_per_edge):
        pa, pb = v[a], v[b]
        pts = [(1.0 - s) * pa + s * pb for s in roots]
        edge_data[(int(a), int(b))] = (list(roots), pts)

    # canonical face conics
    face_triples = np.sort(
        np.concatenate([tets[:, list(f)] for f in _FACE_LOCAL]), axis=1)
    face_triples = np.unique(face_triples, axis=0)
    nodes2 = bernstein.node_barycentrics(2, dim=2)  # (6, 3)
    ft = field.tensors[face_triples]  # (nf, 3, 3, 3)
    node_tensors = np.einsum("nk,fkab->fnab", nodes2, ft)
    node_vals = feature_values(node_tensors, feature, params)
    face_coeffs = bernstein.values_to_coeffs(node_vals, 2, dim=2)
    fr = _face_circumradius(
        v[face_triples[:, 0]], v[face_triples[:, 1]], v[face_triples[:, 2]])

    face_arcs = {}
    had_arcs = set()
    for fi, tri in enumerate(face_triples):
        a, b, c = (int(x) for x in tri)
        er = {
            loc: (key, np.array(dat[0]), dat[1])
            for loc, (key, dat) in (
                ((0, 1), ((a, b), edge_data[(a, b)])),
                ((0, 2), ((a, c), edge_data[(a, c)])),
                ((1, 2), ((b, c), edge_data[(b, c)])),
            )
        }
        step = opts.arc_step if opts.arc_step is not None else fr[fi] / opts.arc_divisor
        arcs = quadric.face_conic_arcs(v[tri], face_coeffs[fi], er, step)
        if arcs:
            had_arcs.add((a, b, c))
        if trace_sign is not None and arcs:
            arcs = _filter_arcs_by_trace(arcs, field, tri, trace_sign)
        face_arcs[(a, b, c)] = arcs

    qopts = quadric.QuadricOptions(
        max_arc_step=1.0, eps_quad=opts.eps_quad, eps_res=opts.eps_res,
        fallback_depth=opts.fallback_depth)

    tet_faces = {}
    for ti in active:
        tet = field.tets[ti]
        tet_faces[int(ti)] = [
            tuple(int(x) for x in np.sort(tet[list(f)])) for f in _FACE_LOCAL
        ]

    jobs = [int(t) for t in active]
    results = _map_ordered(
        _QuadTetWorker(field, coeffs_by_tet, face_arcs, had_arcs, tet_faces,
                       qopts, opts, trace_sign, fr, face_triples),
        jobs, opts.threads)

    for ti, tris in zip(jobs, results):
        for tri in tris:
            acc.add_triangle(tri[0], tri[1], tri[2], tet_index=ti)
    return acc.build(feature=feature, params=params)


class _QuadTetWorker:
    """Per-tet quadric extraction; pure function of canonical inputs."""

    def __init__(self, field, coeffs_by_tet, face_arcs, had_arcs, tet_faces,
                 qopts, opts, trace_sign, face_radius, face_triples):
        self.field = field
        self.coeffs = coeffs_by_tet
        self.face_arcs = face_arcs
        self.had_arcs = had_arcs
        self.tet_faces = tet_faces
        self.qopts = qopts
        self.opts = opts
        self.trace_sign = trace_sign
        self.radius_by_face = {
            tuple(int(x) for x in t): float(r)
            for t, r in zip(face_triples, face_radius)
        }

    def __call__(self, ti):
        field = self.field
        corners = field.vertices[field.tets[ti]].astype(float)
        coeffs = self.coeffs[ti]
        arcs = []
        any_prefilter = False
        radii = []
        for fkey in self.tet_faces[ti]:
            arcs.extend(self.face_arcs.get(fkey, ()))
            if fkey in self.had_arcs:
                any_prefilter = True
            radii.append(self.radius_by_face.get(fkey, 1.0))
        step = (self.opts.arc_step if self.opts.arc_step is not None
                else min(radii) / self.opts.arc_divisor)
        qopts = replace(self.qopts, max_arc_step=step)

        def eval_bary(bary):
            return bernstein.evaluate(coeffs, bary, 2)

        qform = quadric.classify_quadric(coeffs, corners, qopts.eps_quad)

        def grad_fn(pts):
            return qform.gradient(pts)

        try:
            loops = quadric.chain_loops(arcs)
        except LoopChainFailure:
            tris = quadric.fallback_patch(
                eval_bary, grad_fn, [], corners, qopts,
                coeff_has_sign_change=not any_prefilter)
            return _orient(tris, qform)

        if not loops:
            # closed interior component (or nothing)
            if qform.kind == "ellipsoid":
                tris = quadric._closed_component(qform, corners, qopts)
            elif qform.kind == "degenerate" and not any_prefilter:
                tris = quadric.fallback_patch(eval_bary, grad_fn, [], corners, qopts)
            else:
                tris = []
            if tris and self.trace_sign is not None:
                tr = tz.trace(field.tensor_at(ti, np.asarray([tris[0][0]])))[0]
                if (1 if tr >= 0 else -1) != self.trace_sign:
                    tris = []
            return _orient(tris, qform)

        if qform.kind == "degenerate":
            tris = quadric.fallback_patch(eval_bary, grad_fn, loops, corners, qopts)
            return _orient(tris, qform)
        try:
            tris = quadric.extract_patch(qform, loops, corners, qopts)
        except LoopChainFailure:
            tris = quadric.fallback_patch(eval_bary, grad_fn, loops, corners, qopts)
        return _orient(tris, qform)


def _orient(tris, qform):
    """Flip triangles so normals align with the quadric gradient."""
    if not tris:
        return tris
    pts = np.stack([np.stack(t) for t in tris])
    cent = pts.mean(axis=1)
    normals = np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])
    grads = qform.gradient(cent)
    flip = np.einsum("ij,ij->i", normals, grads) < 0
    return [
        (t[0], t[2], t[1]) if f else tuple(t)
        for t, f in zip(tris, flip)
    ]


def _filter_arcs_by_trace(arcs, field, tri, want_sign):
    """Keep conic arcs on the requested trace-sign side (the generalized
    isotropicity surface carries both signs)."""
    p0, p1, p2 = field.vertices[tri]
    tr = [float(np.trace(field.tensors[i])) for i in tri]
    m = np.column_stack([p1 - p0, p2 - p0])
    # least squares barycentric for points on the face plane
    mtm = np.linalg.inv(m.T @ m) @ m.T
    out = []
    for arc in arcs:
        mid = arc.points[len(arc.points) // 2]
        ab = mtm @ (mid - p0)
        tval = (1 - ab.sum()) * tr[0] + ab[0] * tr[1] + ab[1] * tr[2]
        if (1 if tval >= 0 else -1) == want_sign:
            out.append(arc)
    return out


# ---------------------------------------------------------------------------
# degree-3/6 route


def _apatch_surface(field, feature, params, opts, splitter):
    degree = FEATURE_DEGREES[feature]
    eps_res = opts.eps_res_deg3 if degree == 3 else opts.eps_res_deg6
    aopts = apatch.APatchOptions(
        max_depth=opts.max_depth, eps_res=eps_res,
        guide_depth=opts.guide_depth)
    guide = splitter if opts.guide_depth > 0 else None
    tris, prov, _ = apatch.extract_surface(
        field, feature, params, aopts, guide_feature=guide)
    acc = MeshAccumulator()
    for t, p in zip(tris, prov):
        acc.add_triangle(t[0], t[1], t[2], tet_index=p)
    surface = acc.build(feature=feature, params=params)

    def grad(points, prov_arr):
        out = np.empty((len(points), 3))
        h = 1e-6 * max(field.bbox_diag, 1.0)
        pts = np.asarray(points, dtype=float)
        ids = np.asarray(prov_arr, dtype=np.int64)
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            fp, _ = evaluate_exact(field, pts + dp, ids, feature, params)
            fm, _ = evaluate_exact(field, pts - dp, ids, feature, params)
            out[:, k] = (fp - fm) / (2 * h)
        return out

    return orient_triangles(surface, grad)


# ---------------------------------------------------------------------------
# attributes


def vertex_tet_map(surface: FeatureSurface):
    """Provenance tet per vertex (from any incident triangle)."""
    owner = np.full(surface.n_vertices, -1, dtype=np.int64)
    for tri, tet in zip(surface.triangles, surface.provenance):
        for vi in tri:
            if owner[vi] < 0:
                owner[vi] = tet
    return owner


def evaluate_exact(field, points, tet_ids, feature, params=()):
    """Feature values at points using each point's own tet affine map."""
    pts = np.asarray(points, dtype=float)
    coef = field.affine_coefficients()[np.asarray(tet_ids, dtype=np.int64)]
    tens = (
        coef[:, 0]
        + pts[:, 0, None, None] * coef[:, 1]
        + pts[:, 1, None, None] * coef[:, 2]
        + pts[:, 2, None, None] * coef[:, 3]
    )
    return feature_values(tens, feature, params), tens


def attach_attributes(surface: FeatureSurface, field: TetField, sign_tol=1e-9):
    if surface.n_vertices == 0:
        return surface
    owner = vertex_tet_map(surface)
    _, tens = evaluate_exact(field, surface.vertices, owner, "trace")
    a = tz.deviator_part(tens)
    nrm = tz.magnitude(a)
    p = tz.minor(a)
    q = tz.det(a)
    delta = -27.0 * q * q - 4.0 * p ** 3
    sp = np.where(p > sign_tol * nrm**2, 1.0, np.where(p < -sign_tol * nrm**2, -1.0, 0.0))
    sq = np.where(q > sign_tol * nrm**3, 1.0, np.where(q < -sign_tol * nrm**3, -1.0, 0.0))
    mu = tz.mode_mu_batch(p, q)
    mu = np.minimum(mu, 1e30)
    eta = np.where(
        tz.magnitude(tens) > 0,
        tz.trace(tens) / (math.sqrt(3.0) * np.maximum(tz.magnitude(tens), 1e-300)),
        0.0,
    )
    domain = np.where(
        delta < -sign_tol * np.maximum(nrm, 1e-300) ** 6,
        np.where(sp >= 0, 2.0, 1.0),
        0.0,
    )
    surface.vertex_attrs.update({
        "mu": mu, "sign_p": sp, "sign_q": sq, "eta": eta,
        "magnitude": tz.magnitude(tens), "domain": domain,
    })
    return surface


def residual_report(surface: FeatureSurface, field: TetField, feature, params=()):
    """|f| / scale(f) at every surface vertex, with scale the max Bernstein
    coefficient magnitude of its provenance tet."""
    if surface.n_vertices == 0:
        return np.zeros(0)
    owner = vertex_tet_map(surface)
    vals, _ = evaluate_exact(field, surface.vertices, owner, feature, params)
    uniq = np.unique(owner)
    _, coeffs = feature_coeffs_batch(field, feature, params, uniq)
    scale_by_tet = {int(t): max(float(np.abs(c).max()), 1e-300)
                    for t, c in zip(uniq, coeffs)}
    scales = np.array([scale_by_tet[int(t)] for t in owner])
    return np.abs(vals) / scales


# ---------------------------------------------------------------------------
# part splitting


def split_parts(surface: FeatureSurface, field: TetField, splitter: str,
                opts: PipelineOptions):
    """Split a surface into its two sign parts along the zero curve of the
    complementary invariant (the triple degenerate curve for the paper's
    feature surfaces)."""
    labels = PART_BY_INVARIANT[splitter]
    if surface.is_empty():
        return [replace_part(surface, labels[0][0])]
    result = apatch.extract_curve_on_mesh(surface, field, splitter)
    return _split_with_chains(surface, field, splitter, labels, result, opts)


def replace_part(surface, part):
    surface.part = part
    return surface


def _split_with_chains(surface, field, splitter, labels, curve_result, opts):
    owner = vertex_tet_map(surface)
    vvals, _ = evaluate_exact(field, surface.vertices, owner, splitter)
    accs = {name: MeshAccumulator() for name, _ in labels}
    chains = _chains_by_triangle(curve_result)

    for ti, (tri, tet) in enumerate(zip(surface.triangles, surface.provenance)):
        tri_pts = surface.vertices[tri]
        chain_list = chains.get(ti)
        if chain_list:
            polys = _subdivide_triangle(tri_pts, chain_list, curve_result.points)
        else:
            polys = [tri_pts]
        for poly in polys:
            cen = np.mean(poly, axis=0)
            val = float(evaluate_exact(field, cen[None], [tet], splitter)[0][0])
            name = labels[0][0] if val >= 0 else labels[1][0]
            accq = accs[name]
            for k in range(1, len(poly) - 1):
                accq.add_triangle(poly[0], poly[k], poly[k + 1], tet_index=int(tet))
    out = []
    for name, _ in labels:
        s = accs[name].build(feature=surface.feature, params=surface.params, part=name)
        if not s.is_empty():
            attach_attributes(s, field, opts.sign_tol)
            out.append(s)
    if not out:
        out = [replace_part(surface, "none")]
    return out


def _chains_by_triangle(curve_result):
    """Triangle index -> list of point-index chains (consecutive segments)."""
    chains = {}
    for ti, segs in curve_result.tri_chains.items():
        # chain the per-triangle segments into paths
        adj = {}
        for si, (a, b) in enumerate(segs):
            adj.setdefault(a, []).append((si, b))
            adj.setdefault(b, []).append((si, a))
        used = [False] * len(segs)
        paths = []
        for start in sorted(adj):
            if sum(1 for si, _ in adj[start] if not used[si]) == 1:
                path = [start]
                cur = start
                while True:
                    nxt = [(si, o) for si, o in adj[cur] if not used[si]]
                    if not nxt:
                        break
                    si, o = nxt[0]
                    used[si] = True
                    path.append(o)
                    cur = o
                paths.append(path)
        for si, (a, b) in enumerate(segs):
            if not used[si]:
                used[si] = True
                paths.append([a, b])
        chains[ti] = paths
    return chains


def _subdivide_triangle(tri_pts, chains, curve_points, tol=1e-7):
    """Cut a triangle along point chains whose endpoints lie on its border;
    returns a list of polygons (3D point arrays).  Falls back to the intact
    triangle when the configuration is not a clean border-to-border cut."""
    p0 = tri_pts[0]
    e1 = tri_pts[1] - p0
    e2 = tri_pts[2] - p0
    m = np.column_stack([e1, e2])
    proj = np.linalg.inv(m.T @ m) @ m.T

    def to2(p):
        return proj @ (np.asarray(p) - p0)

    scale = max(np.linalg.norm(e1), np.linalg.norm(e2))

    def edge_of(pt2):
        # border edge containing the 2D point, or None
        a, b = pt2
        if abs(b) <= tol:
            return 0, a  # edge v0-v1, parameter a
        if abs(a) <= tol:
            return 2, 1.0 - b  # edge v2-v0 traversed v2->v0
        if abs(a + b - 1.0) <= tol:
            return 1, b  # edge v1-v2
        return None, None

    polys = [[to2(p) for p in tri_pts]]
    polys3 = [[np.asarray(p, dtype=float) for p in tri_pts]]

    for chain in chains:
        pts3 = [curve_points[i] for i in chain]
        pts2 = [to2(p) for p in pts3]
        placed = False
        for pi, (poly2, poly3) in enumerate(zip(polys, polys3)):
            cut = _cut_polygon(poly2, poly3, pts2, pts3, tol)
            if cut is not None:
                polys.pop(pi)
                polys3.pop(pi)
                for c2, c3 in cut:
                    polys.append(c2)
                    polys3.append(c3)
                placed = True
                break
        if not placed:
            return [np.asarray(tri_pts)]  # unclean cut: keep whole triangle
    out = []
    for poly2, poly3 in zip(polys, polys3):
        if len(poly3) < 3:
            continue
        tris = ear_clip(np.asarray(poly2), list(range(len(poly2))))
        for (a, b, c) in tris:
            out.append(np.stack([poly3[a], poly3[b], poly3[c]]))
    if not out:
        return [np.asarray(tri_pts)]
    return out


def _cut_polygon(poly2, poly3, chain2, chain3, tol):
    """Split a polygon along a chain whose two endpoints lie on its border.
    Returns [(poly2_a, poly3_a), (poly2_b, poly3_b)] or None."""
    n = len(poly2)

    def locate(pt):
        for i in range(n):
            a = np.asarray(poly2[i])
            b = np.asarray(poly2[(i + 1) % n])
            ab = b - a
            l2 = float(ab @ ab)
            if l2 <= 0:
                continue
            t = float((np.asarray(pt) - a) @ ab / l2)
            if -1e-9 <= t <= 1 + 1e-9:
                d = np.asarray(pt) - (a + t * ab)
                if float(d @ d) <= (tol * math.sqrt(l2) + tol) ** 2:
                    return i, min(max(t, 0.0), 1.0)
        return None, None

    i0, t0 = locate(chain2[0])
    i1, t1 = locate(chain2[-1])
    if i0 is None or i1 is None:
        return None
    if i0 == i1 and abs(t0 - t1) < 1e-12:
        return None

    def build(start_edge, start_t, end_edge, end_t, chain_fwd2, chain_fwd3):
        # walk border from the end of the chain around to its start
        p2 = list(chain_fwd2)
        p3 = list(chain_fwd3)
        e = end_edge
        te = end_t
        while True:
            nxt = (e + 1) % n
            # append corner at end of edge e
            if e == start_edge and (te <= start_t + 1e-12):
                break
            p2.append(poly2[nxt])
            p3.append(poly3[nxt])
            e = nxt
            te = -1.0
            if e == start_edge and start_t >= -1e-12:
                break
        return p2, p3

    side_a = build(i0, t0, i1, t1, chain2, chain3)
    side_b = build(i1, t1, i0, t0, list(reversed(chain2)), list(reversed(chain3)))
    # reject slivers / failed walks
    if len(side_a[0]) < 3 or len(side_b[0]) < 3:
        return None
    return [side_a, side_b]


def split_by_curve(surface: FeatureSurface, curve: FeatureCurve, scalar_fn,
                   tol_split, labels=("positive", "negative")):
    """Split a surface along an externally supplied curve.

    scalar_fn(points) gives the signed splitting invariant.  Raises
    CurveOffSurface when any curve vertex is farther than tol_split from the
    surface.
    """
    if curve.n_vertices:
        d = point_mesh_distance(curve.vertices, surface)
        if d.max() > tol_split:
            raise CurveOffSurface(
                f"curve is {d.max():g} from the surface (tol {tol_split:g})")
    # assign curve segments to closest triangles
    tri_cent = surface.vertices[surface.triangles].mean(axis=1)
    from scipy.spatial import cKDTree

    chains = {}
    if curve.n_vertices:
        tree = cKDTree(tri_cent)
        for line in curve.polylines:
            for a, b in zip(line[:-1], line[1:]):
                mid = 0.5 * (curve.vertices[a] + curve.vertices[b])
                ti = int(tree.query(mid)[1])
                chains.setdefault(ti, []).append((int(a), int(b)))

    class _R:
        tri_chains = chains
        points = curve.vertices

    accs = {name: MeshAccumulator() for name in labels}
    per_tri_chains = _chains_by_triangle(_R)
    for ti, tri in enumerate(surface.triangles):
        tri_pts = surface.vertices[tri]
        chain_list = per_tri_chains.get(ti)
        if chain_list:
            polys = _subdivide_triangle(tri_pts, chain_list, curve.vertices)
        else:
            polys = [tri_pts]
        tet = surface.provenance[ti] if surface.provenance is not None else -1
        for poly in polys:
            cen = np.mean(poly, axis=0)
            name = labels[0] if float(scalar_fn(cen[None])[0]) >= 0 else labels[1]
            for k in range(1, len(poly) - 1):
                accs[name].add_triangle(poly[0], poly[k], poly[k + 1], tet_index=int(tet))
    return [accs[name].build(feature=surface.feature, part=name) for name in labels]


def _split_by_scalar_sign(surface, field, feature, labels, opts):
    owner = vertex_tet_map(surface)
    if surface.n_vertices == 0:
        return [replace_part(surface, labels[0])]
    accs = {name: MeshAccumulator() for name in labels}
    for tri, tet in zip(surface.triangles, surface.provenance):
        cen = surface.vertices[tri].mean(axis=0)
        val = float(evaluate_exact(field, cen[None], [tet], feature)[0][0])
        name = labels[0] if val >= 0 else labels[1]
        pts = surface.vertices[tri]
        accs[name].add_triangle(pts[0], pts[1], pts[2], tet_index=int(tet))
    out = []
    for name in labels:
        s = accs[name].build(feature=surface.feature, params=surface.params, part=name)
        if not s.is_empty():
            attach_attributes(s, field, opts.sign_tol)
            out.append(s)
    return out


# ---------------------------------------------------------------------------
# triple degenerate curve


def extract_tdc(field: TetField, opts: PipelineOptions | None = None):
    """Balanced surface, then the det zero curve on it, Gauss-Newton
    polished onto {p = 0, q = 0}."""
    opts = opts or PipelineOptions()
    balanced = _quadratic_surface(field, "minor", (), opts)
    if balanced.is_empty():
        return FeatureCurve(vertices=np.zeros((0, 3)), polylines=[])
    result = apatch.extract_curve_on_mesh(balanced, field, "det")
    curve = result.curve
    if curve.n_vertices == 0:
        return curve
    # provenance per curve vertex: nearest balanced triangle's tet
    from scipy.spatial import cKDTree

    tri_cent = balanced.vertices[balanced.triangles].mean(axis=1)
    tree = cKDTree(tri_cent)
    owner = balanced.provenance[tree.query(curve.vertices)[1]]
    pts = curve.vertices.copy()
    if opts.polish_tdc:
        pts = _polish_tdc(pts, owner, field)
    p_res, _ = evaluate_exact(field, pts, owner, "minor")
    q_res, _ = evaluate_exact(field, pts, owner, "det")
    curve.vertices = pts
    curve.vertex_attrs.update({"p_residual": np.abs(p_res), "q_residual": np.abs(q_res)})
    return curve


def _polish_tdc(points, tet_ids, field, iters=12):
    pts = np.array(points, dtype=float)
    h = 1e-6 * max(field.bbox_diag, 1.0)
    for it in range(iters):
        p, _ = evaluate_exact(field, pts, tet_ids, "minor")
        q, _ = evaluate_exact(field, pts, tet_ids, "det")
        if max(np.abs(p).max(), np.abs(q).max()) < 1e-14:
            break
        grads = np.empty((len(pts), 2, 3))
        for k in range(3):
            dp = np.zeros(3)
            dp[k] = h
            pp, _ = evaluate_exact(field, pts + dp, tet_ids, "minor")
            pm, _ = evaluate_exact(field, pts - dp, tet_ids, "minor")
            qp, _ = evaluate_exact(field, pts + dp, tet_ids, "det")
            qm, _ = evaluate_exact(field, pts - dp, tet_ids, "det")
            grads[:, 0, k] = (pp - pm) / (2 * h)
            grads[:, 1, k] = (qp - qm) / (2 * h)
        f = np.stack([p, q], axis=1)
        for i in range(len(pts)):
            j = grads[i]
            try:
                step = np.linalg.lstsq(j, f[i], rcond=None)[0]
            except np.linalg.LinAlgError:
                continue
            pts[i] -= step
    return pts


# ---------------------------------------------------------------------------
# utilities


def point_mesh_distance(points, surface: FeatureSurface, k_candidates=8):
    """Distance from points to the triangle mesh (exact point-triangle
    distance over KD-tree candidates)."""
    from scipy.spatial import cKDTree

    tris = surface.vertices[surface.triangles]
    cent = tris.mean(axis=1)
    tree = cKDTree(cent)
    k = min(k_candidates, len(cent))
    _, cand = tree.query(points, k=k)
    cand = np.atleast_2d(cand)
    if k == 1:
        cand = cand.reshape(-1, 1)
    out = np.empty(len(points))
    for i, p in enumerate(np.asarray(points, dtype=float)):
        best = math.inf
        for t in cand[i]:
            best = min(best, _point_triangle_distance(p, tris[int(t)]))
        out[i] = best
    return out


def _point_triangle_distance(p, tri):
    a, b, c = tri
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = ab @ ap, ac @ ap
    if d1 <= 0 and d2 <= 0:
        return float(np.linalg.norm(ap))
    bp = p - b
    d3, d4 = ab @ bp, ac @ bp
    if d3 >= 0 and d4 <= d3:
        return float(np.linalg.norm(bp))
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        t = d1 / (d1 - d3) if d1 != d3 else 0.0
        return float(np.linalg.norm(ap - t * ab))
    cp = p - c
    d5, d6 = ab @ cp, ac @ cp
    if d6 >= 0 and d5 <= d6:
        return float(np.linalg.norm(cp))
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        t = d2 / (d2 - d6) if d2 != d6 else 0.0
        return float(np.linalg.norm(ap - t * ac))
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return float(np.linalg.norm(p - (b + t * (c - b))))
    denom = va + vb + vc
    v = vb / denom
    w = vc / denom
    return float(np.linalg.norm(p - (a + ab * v + ac * w)))


# ---------------------------------------------------------------------------
# ordered parallel map

_WORKER_FN = None


def _pool_call(arg):
    return _WORKER_FN(arg)


def _map_ordered(fn, items, threads):
    """Apply fn to items preserving order; workers inherit fn through fork
    so large read-only state is shared, never pickled."""
    if threads <= 1 or len(items) < 4:
        return [fn(x) for x in items]
    global _WORKER_FN
    _WORKER_FN = fn
    try:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(threads) as pool:
            return pool.map(
                _pool_call, items, chunksize=max(1, len(items) // (threads * 8)))
    finally:
        _WORKER_FN = None
