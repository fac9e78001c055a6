"""Marching-tetrahedra connectivity and bracketed root refinement.

Used for leaf-cell extraction by the recursive subdivision extractor, as the
interior net of the quadric fallback, and as a brute-force oracle in tests.
Triangle orientation is arbitrary here; callers align normals with the field
gradient afterwards.
"""
from __future__ import annotations

import numpy as np

from . import bernstein

TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
TRI_EDGES = ((0, 1), (0, 2), (1, 2))


def _build_case_table():
    """case index = bitmask of nonnegative corners -> triangles as triples of
    crossing-edge slots."""
    table = []
    for case in range(16):
        signs = [(case >> i) & 1 for i in range(4)]
        crossing = [k for k, (i, j) in enumerate(TET_EDGES) if signs[i] != signs[j]]
        if len(crossing) == 3:
            table.append([tuple(crossing)])
        elif len(crossing) == 4:
            cyc = [crossing[0]]
            rest = list(crossing[1:])
            while rest:
                last = set(TET_EDGES[cyc[-1]])
                for e in rest:
                    if set(TET_EDGES[e]) & last:
                        cyc.append(e)
                        rest.remove(e)
                        break
                else:  # pragma: no cover - cannot happen for tet edges
                    cyc.append(rest.pop())
            table.append([(cyc[0], cyc[1], cyc[2]), (cyc[0], cyc[2], cyc[3])])
        else:
            table.append([])
    return table


CASE_TABLE = _build_case_table()


def refine_roots(eval_fn, a, b, fa, fb, iters=46):
    """Vectorized bisection on brackets a..b (rows); eval_fn maps an (n, d)
    array of points to (n,) values.  Returns the refined points."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    fa = np.array(fa, dtype=float)
    if len(a) == 0:
        return a
    for _ in range(iters):
        mid = 0.5 * (a + b)
        fm = eval_fn(mid)
        left = (fa <= 0) == (fm <= 0)
        a = np.where(left[:, None], mid, a)
        fa = np.where(left, fm, fa)
        b = np.where(left[:, None], b, mid)
    return 0.5 * (a + b)


def subdivide_reference_tet(depth: int):
    """Corner barycentrics (n_cells, 4, 4) of the uniform midpoint
    subdivision of the reference tet."""
    _, children = bernstein.subdivision_maps(1)
    cells = [np.eye(4)]
    for _ in range(depth):
        cells = [child @ cell for cell in cells for child in children]
    return np.stack(cells)


def marching_on_tet(eval_bary, corners, depth: int, refine_iters=46):
    """Extract the zero set of a scalar function over one tet by uniform
    subdivision plus per-cell marching.

    eval_bary: maps (n, 4) barycentric points to (n,) values (exact field).
    corners: (4, 3) physical tet corners.
    Returns a list of triangles, each a (3, 3) array of physical points.
    """
    cells = subdivide_reference_tet(depth)
    corner_vals = eval_bary(cells.reshape(-1, 4)).reshape(len(cells), 4)
    signs = corner_vals >= 0
    case_ids = (
        signs[:, 0].astype(int)
        + 2 * signs[:, 1].astype(int)
        + 4 * signs[:, 2].astype(int)
        + 8 * signs[:, 3].astype(int)
    )
    active = np.where((case_ids != 0) & (case_ids != 15))[0]
    if len(active) == 0:
        return []

    # collect crossing edges over all active cells
    rows = []  # (cell, edge_slot)
    for ci in active:
        for tri in CASE_TABLE[case_ids[ci]]:
            for e in tri:
                rows.append((ci, e))
    rows = sorted(set(rows))
    a_pts = np.empty((len(rows), 4))
    b_pts = np.empty((len(rows), 4))
    fa = np.empty(len(rows))
    fb = np.empty(len(rows))
    for n, (ci, e) in enumerate(rows):
        i, j = TET_EDGES[e]
        a_pts[n] = cells[ci, i]
        b_pts[n] = cells[ci, j]
        fa[n] = corner_vals[ci, i]
        fb[n] = corner_vals[ci, j]
    roots = refine_roots(eval_bary, a_pts, b_pts, fa, fb, iters=refine_iters)
    root_xyz = roots @ corners
    lookup = {key: root_xyz[n] for n, key in enumerate(rows)}

    tris = []
    for ci in active:
        for tri in CASE_TABLE[case_ids[ci]]:
            pts = np.stack([lookup[(ci, e)] for e in tri])
            if _area2(pts) > 0:
                tris.append(pts)
    return tris


def _area2(pts):
    return float(np.sum(np.cross(pts[1] - pts[0], pts[2] - pts[0]) ** 2))
