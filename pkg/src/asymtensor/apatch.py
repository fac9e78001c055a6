"""Zero-set extraction for degree-3 and degree-6 per-tet polynomials.

Recursive midpoint subdivision of the Bernstein coefficient lattice with
sign pruning (convex-hull property), a layered single-sign-change acceptance
test, and marching-tet leaf extraction with roots polished on the original
per-tet polynomial.  Cell corners are tracked as exact dyadic rationals so
roots on shared sub-edges are computed once per tet.  The same machinery in
its triangular form extracts curves of a scalar field on a surface mesh.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np

from . import bernstein, marching
from .geometry import FeatureCurve


@dataclass
class APatchOptions:
    max_depth: int = 6
    eps_coeff: float = 0.0
    eps_res: float = 1e-4  # residual target relative to max |coeff|
    refine_iters: int = 46
    guide_depth: int = 0  # force subdivision near guide zero set to this depth


@dataclass
class APatchStats:
    cells_visited: int = 0
    depth_exhausted: int = 0
    leaves: int = 0


def _layered_single_sign_change(coeffs, degree, dim=3):
    """True for cells whose coefficient layers along some barycentric
    direction are strictly signed with exactly one sign change."""
    n = coeffs.shape[0]
    ok = np.zeros(n, dtype=bool)
    for layers in bernstein.direction_layers(degree, dim):
        signs = np.zeros((n, len(layers)), dtype=np.int8)
        for k, idx in enumerate(layers):
            sub = coeffs[:, idx]
            pos = (sub > 0).all(axis=1)
            neg = (sub < 0).all(axis=1)
            signs[:, k] = np.where(pos, 1, np.where(neg, -1, 0))
        strict = (signs != 0).all(axis=1)
        changes = (signs[:, 1:] != signs[:, :-1]).sum(axis=1)
        ok |= strict & (changes == 1)
        if ok.all():
            break
    return ok


class _RootCache:
    """Roots on sub-edges keyed by (tet, integer endpoints) so neighboring
    leaf cells of one tet share vertices exactly."""

    def __init__(self):
        self.data = {}

    def key(self, tet, a_int, b_int):
        ka, kb = tuple(int(x) for x in a_int), tuple(int(x) for x in b_int)
        if ka > kb:
            ka, kb = kb, ka
        return (int(tet), ka, kb)


def extract_surface(field, feature, params=(), opts: APatchOptions | None = None,
                    tet_indices=None, guide_feature=None):
    """Extract the zero set of a degree-3/6 feature over the mesh.

    Returns (triangles, provenance, stats): triangles as a list of (3, 3)
    point arrays and the source tet index per triangle.
    """
    from .mesh import FEATURE_DEGREES, feature_coeffs_batch

    opts = opts or APatchOptions()
    degree = FEATURE_DEGREES[feature]
    idx, coeffs = feature_coeffs_batch(field, feature, params, tet_indices)
    scale = np.abs(coeffs).max(axis=1)
    active = (coeffs.min(axis=1) <= opts.eps_coeff * scale) & (
        coeffs.max(axis=1) >= -opts.eps_coeff * scale)
    idx = idx[active]
    coeffs = coeffs[active]
    if len(idx) == 0:
        return [], [], APatchStats()

    guide_coeffs = None
    guide_degree = 0
    if guide_feature is not None and opts.guide_depth > 0:
        _, guide_coeffs = feature_coeffs_batch(field, guide_feature, (), idx)
        guide_degree = FEATURE_DEGREES[guide_feature]

    root_scale = {int(t): float(s) for t, s in zip(idx, np.abs(coeffs).max(axis=1))}
    root_coeffs = {int(t): c for t, c in zip(idx, coeffs)}

    stats = APatchStats()
    subj, children_bary = bernstein.subdivision_maps(degree)
    guide_maps = (
        bernstein.subdivision_maps(guide_degree)[0] if guide_coeffs is not None else None
    )
    # integer corner coordinates stay exact through midpoint (/2) and
    # centroid (/4) splits when the scale is a high enough power of four
    max_total = max(opts.max_depth, opts.guide_depth) + 1
    int_scale = 1 << (2 * max_total + 2)

    cell_tet = idx.copy()
    cell_coeffs = coeffs
    cell_guide = guide_coeffs
    n0 = len(idx)
    corners0 = np.zeros((n0, 4, 4), dtype=np.int64)
    for i in range(4):
        corners0[:, i, i] = int_scale
    cell_corners = corners0

    leaf_tet = []
    leaf_coeffs = []
    leaf_corners = []

    depth = 0
    while len(cell_tet):
        stats.cells_visited += len(cell_tet)
        scale_cells = np.array([root_scale[int(t)] for t in cell_tet])
        eps = opts.eps_coeff * scale_cells
        keep = (cell_coeffs.min(axis=1) <= eps) & (cell_coeffs.max(axis=1) >= -eps)
        cell_tet = cell_tet[keep]
        cell_coeffs = cell_coeffs[keep]
        cell_corners = cell_corners[keep]
        if cell_guide is not None:
            cell_guide = cell_guide[keep]
        if len(cell_tet) == 0:
            break

        sheet_ok = _layered_single_sign_change(cell_coeffs, degree)
        force = np.zeros(len(cell_tet), dtype=bool)
        if cell_guide is not None and depth < opts.guide_depth:
            g_change = (cell_guide.min(axis=1) <= 0) & (cell_guide.max(axis=1) >= 0)
            force = g_change
        max_depth_here = opts.max_depth if cell_guide is None else max(
            opts.max_depth, opts.guide_depth)
        if depth >= max_depth_here:
            is_leaf = np.ones(len(cell_tet), dtype=bool)
            stats.depth_exhausted += int((~sheet_ok).sum())
        elif depth >= opts.max_depth:
            is_leaf = ~force
            stats.depth_exhausted += int((is_leaf & ~sheet_ok).sum())
        else:
            is_leaf = sheet_ok & ~force

        if is_leaf.any():
            leaf_tet.append(cell_tet[is_leaf])
            leaf_coeffs.append(cell_coeffs[is_leaf])
            leaf_corners.append(cell_corners[is_leaf])
            stats.leaves += int(is_leaf.sum())

        sub = ~is_leaf
        cell_tet_s = cell_tet[sub]
        if len(cell_tet_s) == 0:
            break
        cc = cell_coeffs[sub]
        corners_s = cell_corners[sub]
        cell_coeffs = np.einsum("kij,nj->nki", subj, cc).reshape(-1, cc.shape[1])
        cb2 = (children_bary * 4.0).astype(np.int64)  # exact: entries in {0,1,2,4}
        new_corners = np.einsum("kij,njc->nkic", cb2, corners_s) // 4
        cell_corners = new_corners.reshape(-1, 4, 4)
        cell_tet = np.repeat(cell_tet_s, len(subj))
        if cell_guide is not None:
            gg = cell_guide[sub]
            cell_guide = np.einsum("kij,nj->nki", guide_maps, gg).reshape(-1, gg.shape[1])
        depth += 1

    if not leaf_tet:
        return [], [], stats

    leaf_tet = np.concatenate(leaf_tet)
    leaf_coeffs = np.concatenate(leaf_coeffs)
    leaf_corners = np.concatenate(leaf_corners)
    tris, prov = _extract_leaves(
        field, degree, leaf_tet, leaf_coeffs, leaf_corners, int_scale,
        root_coeffs, opts)
    return tris, prov, stats


def _extract_leaves(field, degree, leaf_tet, leaf_coeffs, leaf_corners,
                    int_scale, root_coeffs, opts):
    corner_idx = bernstein.corner_indices(degree)
    corner_vals = leaf_coeffs[:, corner_idx]
    signs = corner_vals >= 0
    case_ids = (
        signs[:, 0].astype(int) + 2 * signs[:, 1].astype(int)
        + 4 * signs[:, 2].astype(int) + 8 * signs[:, 3].astype(int)
    )
    active = np.where((case_ids != 0) & (case_ids != 15))[0]
    if len(active) == 0:
        return [], []

    cache = _RootCache()
    # gather unique brackets
    jobs = []  # (cache_key, leaf, edge_slot)
    for li in active:
        for tri in marching.CASE_TABLE[case_ids[li]]:
            for e in tri:
                i, j = marching.TET_EDGES[e]
                key = cache.key(leaf_tet[li], leaf_corners[li, i], leaf_corners[li, j])
                if key not in cache.data:
                    cache.data[key] = None
                    jobs.append((key, li, e))
    a_pts = np.empty((len(jobs), 4))
    b_pts = np.empty((len(jobs), 4))
    fa = np.empty(len(jobs))
    fb = np.empty(len(jobs))
    tet_rows = np.empty(len(jobs), dtype=np.int64)
    for n, (key, li, e) in enumerate(jobs):
        i, j = marching.TET_EDGES[e]
        a_pts[n] = leaf_corners[li, i] / int_scale
        b_pts[n] = leaf_corners[li, j] / int_scale
        fa[n] = corner_vals[li, i]
        fb[n] = corner_vals[li, j]
        tet_rows[n] = leaf_tet[li]

    # bisection on the original per-tet polynomial
    coeff_rows = np.stack([root_coeffs[int(t)] for t in tet_rows]) if len(jobs) else None

    def eval_rows(bary):
        basis = bernstein.basis_at(degree, bary)
        return np.sum(coeff_rows * basis, axis=1)

    roots = marching.refine_roots(eval_rows, a_pts, b_pts, fa, fb,
                                  iters=opts.refine_iters)
    tet_pts = field.vertices[field.tets]
    for n, (key, li, e) in enumerate(jobs):
        xyz = roots[n] @ tet_pts[leaf_tet[li]]
        cache.data[key] = xyz

    tris = []
    prov = []
    for li in active:
        for tri in marching.CASE_TABLE[case_ids[li]]:
            pts = []
            for e in tri:
                i, j = marching.TET_EDGES[e]
                key = cache.key(leaf_tet[li], leaf_corners[li, i], leaf_corners[li, j])
                pts.append(cache.data[key])
            pts = np.stack(pts)
            if marching._area2(pts) > 0:
                tris.append(pts)
                prov.append(int(leaf_tet[li]))
    return tris, prov


# ---------------------------------------------------------------------------
# curves on a surface mesh (2D triangular variant)


@dataclass
class CurveOnMeshResult:
    curve: FeatureCurve
    tri_chains: dict  # triangle index -> list of point-index chains
    points: np.ndarray


def extract_curve_on_mesh(surface, field, feature="det", opts: APatchOptions | None = None):
    """Zero set of a scalar feature restricted to a surface mesh.

    The restriction of the (tri)cubic feature to a flat triangle is a
    bivariate cubic, captured exactly by interpolation at 10 nodes with the
    provenance tet's affine tensor map.  Edge roots are computed once per
    mesh edge (canonical triangle = lowest incident triangle index) so
    chains connect exactly across triangles.
    """
    from .mesh import FEATURE_DEGREES, feature_values

    opts = opts or APatchOptions(max_depth=5)
    degree = FEATURE_DEGREES[feature]
    verts = surface.vertices
    tris = surface.triangles
    prov = surface.provenance
    if len(tris) == 0:
        return CurveOnMeshResult(
            curve=FeatureCurve(vertices=np.zeros((0, 3)), polylines=[]),
            tri_chains={}, points=np.zeros((0, 3)))

    nodes = bernstein.node_barycentrics(degree, dim=2)  # (N2, 3)
    coef = field.affine_coefficients()
    pts = np.einsum("nk,mkd->mnd", nodes, verts[tris])
    c = coef[prov]
    tens = (
        c[:, None, 0]
        + pts[..., 0, None, None] * c[:, None, 1]
        + pts[..., 1, None, None] * c[:, None, 2]
        + pts[..., 2, None, None] * c[:, None, 3]
    )
    vals = feature_values(tens, feature)
    coeffs = bernstein.values_to_coeffs(vals, degree, dim=2)
    scale = np.abs(coeffs).max(axis=1)
    active = np.where(
        (coeffs.min(axis=1) <= 0) & (coeffs.max(axis=1) >= 0) & (scale > 0))[0]

    # canonical edge roots keyed by sorted vertex pair
    edge_owner = {}
    for ti in active:
        a, b, cc = (int(v) for v in tris[ti])
        for e in ((a, b), (b, cc), (a, cc)):
            key = (min(e), max(e))
            if key not in edge_owner or ti < edge_owner[key]:
                edge_owner[key] = ti

    sub_corners = {  # local edge -> restriction corners in barycentric rows
        (0, 1): ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
        (1, 2): ((0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
        (0, 2): ((1.0, 0.0, 0.0), (0.0, 0.0, 1.0)),
    }
    edge_roots = {}
    for key, ti in sorted(edge_owner.items()):
        tri = [int(v) for v in tris[ti]]
        la, lb = tri.index(key[0]), tri.index(key[1])
        loc = (min(la, lb), max(la, lb))
        ecoef = bernstein.restrict(coeffs[ti], degree, sub_corners[loc], dim=2)
        if (la, lb) != loc:
            ecoef = ecoef[::-1]
        roots = _poly_roots_unit(ecoef, degree)
        pts3 = [(1 - s) * verts[key[0]] + s * verts[key[1]] for s in roots]
        edge_roots[key] = (roots, pts3)

    # per-triangle recursive extraction
    point_index = {}
    points = []
    segments = []
    tri_chain_pts = {}

    def add_point(xyz):
        k = (float(xyz[0]), float(xyz[1]), float(xyz[2]))
        i = point_index.get(k)
        if i is None:
            i = len(points)
            point_index[k] = i
            points.append(k)
        return i

    tri_maps, tri_children = bernstein.subdivision_maps(degree, dim=2)

    for ti in active:
        tri = [int(v) for v in tris[ti]]
        tv = verts[tris[ti]]
        segs = _curve_in_triangle(
            coeffs[ti], degree, tv, tri, edge_roots, tri_maps, tri_children,
            opts, float(scale[ti]))
        if segs:
            idx_segs = [(add_point(a), add_point(b)) for a, b in segs]
            segments.extend(idx_segs)
            tri_chain_pts[int(ti)] = idx_segs

    pts_arr = np.asarray(points, dtype=float).reshape(-1, 3)
    polylines = _chain_segments(segments)
    curve = FeatureCurve(vertices=pts_arr, polylines=polylines)
    return CurveOnMeshResult(curve=curve, tri_chains=tri_chain_pts, points=pts_arr)


def _poly_roots_unit(bern_coeffs, degree):
    """Real roots in (0, 1) of a univariate polynomial in Bernstein form."""
    # convert to monomial by collocation
    ts = np.linspace(0.0, 1.0, degree + 1)
    bary = np.stack([1.0 - ts, ts], axis=1)
    vals = bernstein.evaluate(np.asarray(bern_coeffs), bary, degree, dim=1)
    mono = np.polyfit(ts, vals, degree)
    roots = np.roots(mono) if np.abs(mono).max() > 0 else np.empty(0)
    out = []
    for r in roots:
        if abs(r.imag) < 1e-9 and 1e-12 < r.real < 1 - 1e-12:
            out.append(float(r.real))
    out = sorted(out)
    dedup = []
    for r in out:
        if not dedup or r - dedup[-1] > 1e-10:
            dedup.append(r)
    if not dedup:
        return dedup
    # polish by bisection where a sign change brackets the root
    def f(t):
        return bernstein.evaluate(
            np.asarray(bern_coeffs), np.array([1.0 - t, t]), degree, dim=1)
    polished = []
    for r in dedup:
        lo, hi = max(r - 1e-3, 0.0), min(r + 1e-3, 1.0)
        flo, fhi = f(lo), f(hi)
        if flo * fhi < 0:
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                fm = f(mid)
                if (fm <= 0) == (flo <= 0):
                    lo, flo = mid, fm
                else:
                    hi, fhi = mid, fm
            polished.append(0.5 * (lo + hi))
        else:
            polished.append(r)
    return polished


def _curve_in_triangle(coeffs, degree, tri_verts, tri_ids, edge_roots,
                       tri_maps, tri_children, opts, scale):
    """Segments (pairs of 3D points) of the zero set inside one triangle."""
    TRI_EDGE_LOCAL = ((0, 1), (1, 2), (0, 2))
    segs = []

    def boundary_point(loc_edge, s):
        (i, j) = loc_edge
        a, b = tri_ids[i], tri_ids[j]
        if a <= b:
            key, sr = (a, b), s
        else:
            key, sr = (b, a), 1.0 - s
        roots, pts3 = edge_roots.get(key, ([], []))
        if roots:
            k = int(np.argmin([abs(r - sr) for r in roots]))
            if abs(roots[k] - sr) < 0.5 / (1 << opts.max_depth):
                return pts3[k]
        return (1 - s) * tri_verts[i] + s * tri_verts[j]

    def eval_b(bary):
        return bernstein.evaluate(coeffs, bary, degree, dim=2)

    def rec(c, corners_bary, depth):
        cmax, cmin = c.max(), c.min()
        if cmin > 0 or cmax < 0:
            return
        if depth < opts.max_depth and not _layered_single_sign_change(
                c[None], degree, dim=2)[0]:
            for cm, sub in zip(tri_maps, tri_children):
                rec(cm @ c, sub @ corners_bary, depth + 1)
            return
        # leaf: corner signs -> 0 or 2 crossing edges
        cidx = bernstein.corner_indices(degree, dim=2)
        cv = c[cidx]
        pos = cv >= 0
        crossing = [e for e in TRI_EDGE_LOCAL if pos[e[0]] != pos[e[1]]]
        if len(crossing) != 2:
            return
        pts = []
        for (i, j) in crossing:
            a_b, b_b = corners_bary[i], corners_bary[j]
            fa, fb = cv[i], cv[j]
            lo, hi = 0.0, 1.0
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                fm = eval_b((1 - mid) * a_b + mid * b_b)
                if (fm <= 0) == (fa <= 0):
                    lo, fa2 = mid, fm
                    fa = fm
                else:
                    hi = mid
            s = 0.5 * (lo + hi)
            bary = (1 - s) * a_b + s * b_b
            # snap to canonical root when the crossing lies on an original edge
            zero_coord = [k for k in range(3) if bary[k] <= 1e-12]
            if len(zero_coord) == 1:
                k = zero_coord[0]
                i0, j0 = [m for m in range(3) if m != k]
                s_orig = bary[j0] / (bary[i0] + bary[j0])
                pts.append(boundary_point((i0, j0), s_orig))
            else:
                pts.append(bary @ tri_verts)
        if np.linalg.norm(np.asarray(pts[0]) - np.asarray(pts[1])) > 0:
            segs.append((np.asarray(pts[0]), np.asarray(pts[1])))

    rec(np.asarray(coeffs, dtype=float), np.eye(3), 0)
    return segs


def _chain_segments(segments):
    """Chain index segments into polylines (open paths first, then loops)."""
    adj = {}
    for si, (a, b) in enumerate(segments):
        adj.setdefault(a, []).append((si, b))
        adj.setdefault(b, []).append((si, a))
    used = [False] * len(segments)
    polylines = []

    def walk(start):
        line = [start]
        cur = start
        while True:
            nxt = [(si, other) for si, other in adj.get(cur, []) if not used[si]]
            if not nxt:
                break
            si, other = nxt[0]
            used[si] = True
            line.append(other)
            cur = other
        return line

    # open paths from odd-degree endpoints
    for v in sorted(adj):
        deg = sum(1 for si, _ in adj[v] if not used[si])
        if deg == 1:
            polylines.append(walk(v))
    # remaining loops
    for si, (a, b) in enumerate(segments):
        if not used[si]:
            used[si] = True
            line = [a, b]
            cur = b
            while True:
                nxt = [(sj, other) for sj, other in adj.get(cur, []) if not used[sj]]
                if not nxt:
                    break
                sj, other = nxt[0]
                used[sj] = True
                line.append(other)
                cur = other
            polylines.append(line)
    return polylines
