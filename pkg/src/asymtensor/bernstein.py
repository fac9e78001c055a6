"""Bernstein-Bezier form of polynomials over simplices.

Coefficients live on the barycentric lattice {lam / n : |lam| = n}. All
change-of-basis operations (interpolation from nodal values, restriction to
a sub-simplex) are realized as fixed matrices computed once per degree and
cached; this gives one exact code path for every degree used by the feature
builders (2, 3 and 6).
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def lattice(degree: int, dim: int = 3):
    """Multi-indices of the barycentric lattice, shape (N, dim+1), in a fixed
    lexicographic order."""
    idx = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            idx.append(prefix + (remaining,))
            return
        for k in range(remaining, -1, -1):
            rec(prefix + (k,), remaining - k, slots - 1)

    rec((), degree, dim + 1)
    return np.array(idx, dtype=np.int64)


@lru_cache(maxsize=None)
def multinomials(degree: int, dim: int = 3):
    lam = lattice(degree, dim)
    out = np.empty(len(lam), dtype=float)
    for i, row in enumerate(lam):
        c = math.factorial(degree)
        for k in row:
            c //= math.factorial(int(k))
        out[i] = float(c)
    return out


def basis_at(degree: int, bary, dim: int = 3):
    """Bernstein basis values, shape bary.shape[:-1] + (N,)."""
    lam = lattice(degree, dim)
    coef = multinomials(degree, dim)
    b = np.asarray(bary, dtype=float)
    # product over barycentric coordinates of b_i ** lam_i
    powers = b[..., None, :] ** lam[None, :, :]
    return coef * np.prod(powers, axis=-1)


@lru_cache(maxsize=None)
def node_barycentrics(degree: int, dim: int = 3):
    return lattice(degree, dim).astype(float) / degree


@lru_cache(maxsize=None)
def interpolation_inverse(degree: int, dim: int = 3):
    """Inverse of the Bernstein collocation matrix at the lattice nodes.

    Multiplying nodal values by this matrix yields Bernstein coefficients;
    exact for polynomials of the given degree.
    """
    m = basis_at(degree, node_barycentrics(degree, dim), dim)
    return np.linalg.inv(m)


def values_to_coeffs(values, degree: int, dim: int = 3):
    """Nodal values at the lattice (last axis) -> Bernstein coefficients."""
    minv = interpolation_inverse(degree, dim)
    return np.asarray(values, dtype=float) @ minv.T


def evaluate(coeffs, bary, degree: int, dim: int = 3):
    """Evaluate a Bernstein polynomial; coeffs (..., N), bary (..., dim+1)."""
    basis = basis_at(degree, bary, dim)
    return np.sum(np.asarray(coeffs) * basis, axis=-1)


@lru_cache(maxsize=None)
def restriction_matrix(degree: int, sub_corners_key, dim: int = 3):
    """Matrix mapping parent coefficients to the coefficients of the
    restriction to the sub-simplex whose corners (rows, in parent
    barycentrics) are given by ``sub_corners_key``.

    The sub-simplex may have lower dimension (e.g. a triangle face of a
    tet); ``sub_corners_key`` is a tuple of corner tuples.
    """
    sub = np.array(sub_corners_key, dtype=float)
    sub_dim = len(sub) - 1
    nodes = node_barycentrics(degree, sub_dim)  # (Nsub, sub_dim+1)
    parent_nodes = nodes @ sub  # positions in parent barycentrics
    collocation = basis_at(degree, parent_nodes, dim)
    return interpolation_inverse(degree, sub_dim) @ collocation


def restrict(coeffs, degree: int, sub_corners, dim: int = 3):
    key = tuple(tuple(float(x) for x in row) for row in sub_corners)
    m = restriction_matrix(degree, key, dim)
    return np.asarray(coeffs) @ m.T


# ---------------------------------------------------------------------------
# subdivision


def _tet_children_barycentric():
    """Corner barycentrics of the 12 children of the midpoint subdivision:
    4 corner tets plus the central octahedron split into 8 tets around its
    centroid.  The split is choice-free, so subdivision commutes with any
    relabeling or isometry of the parent."""
    e = np.eye(4)
    mid = {(i, j): 0.5 * (e[i] + e[j]) for i in range(4) for j in range(i + 1, 4)}
    center = np.full(4, 0.25)
    children = []
    for a in range(4):
        rest = [i for i in range(4) if i != a]
        children.append(np.stack([e[a]] + [mid[tuple(sorted((a, b)))] for b in rest]))
    for a in range(4):
        rest = [i for i in range(4) if i != a]
        near = [mid[tuple(sorted((a, b)))] for b in rest]
        children.append(np.stack(near + [center]))
        far = [
            mid[tuple(sorted((rest[0], rest[1])))],
            mid[tuple(sorted((rest[0], rest[2])))],
            mid[tuple(sorted((rest[1], rest[2])))],
        ]
        children.append(np.stack(far + [center]))
    return children


def _tri_children_barycentric():
    e = np.eye(3)
    m01, m02, m12 = 0.5 * (e[0] + e[1]), 0.5 * (e[0] + e[2]), 0.5 * (e[1] + e[2])
    return [
        np.stack([e[0], m01, m02]),
        np.stack([e[1], m01, m12]),
        np.stack([e[2], m02, m12]),
        np.stack([m01, m12, m02]),
    ]


@lru_cache(maxsize=None)
def subdivision_maps(degree: int, dim: int = 3):
    """Per-child coefficient maps (stacked, shape (n_children, N, N)) and the
    child corner barycentrics (n_children, dim+1, dim+1)."""
    children = _tet_children_barycentric() if dim == 3 else _tri_children_barycentric()
    minv = interpolation_inverse(degree, dim)
    nodes = node_barycentrics(degree, dim)
    maps = []
    for sub in children:
        parent_nodes = nodes @ sub
        maps.append(minv @ basis_at(degree, parent_nodes, dim))
    return np.stack(maps), np.stack(children)


@lru_cache(maxsize=None)
def corner_indices(degree: int, dim: int = 3):
    """Indices of the coefficients sitting at the simplex corners."""
    lam = lattice(degree, dim)
    out = []
    for i in range(dim + 1):
        target = np.zeros(dim + 1, dtype=np.int64)
        target[i] = degree
        out.append(int(np.where((lam == target).all(axis=1))[0][0]))
    return tuple(out)


@lru_cache(maxsize=None)
def direction_layers(degree: int, dim: int = 3):
    """For each barycentric direction, the coefficient index lists layered by
    that exponent (layer k holds multi-indices with lam_dir == k)."""
    lam = lattice(degree, dim)
    layers = []
    for d in range(dim + 1):
        per_dir = []
        for k in range(degree + 1):
            per_dir.append(np.where(lam[:, d] == k)[0])
        layers.append(per_dir)
    return layers
