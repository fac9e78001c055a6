"""Benchmark tensor fields sampled from analytic velocity-gradient formulas.

Gradient convention: entry (i, j) = d v_i / d x_j.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np

from .mesh import TetField

# 6-tet Kuhn split: every tet shares the main diagonal (0,0,0)-(1,1,1), so
# the decomposition is translation invariant and face-compatible.
_UNIT = np.eye(3)
_KUHN6 = []
for a in range(3):
    for b in range(3):
        if b == a:
            continue
        c = 3 - a - b
        _KUHN6.append(
            np.array([
                [0.0, 0.0, 0.0],
                _UNIT[a],
                _UNIT[a] + _UNIT[b],
                [1.0, 1.0, 1.0],
            ])
        )

# 5-tet split (even parity): central tet on alternating corners plus four
# corner tets; odd-parity cubes use the x-mirrored set so shared faces agree.
_FIVE_EVEN = [
    np.array([[0, 0, 0], [1, 1, 0], [1, 0, 1], [0, 1, 1]], dtype=float),
    np.array([[1, 0, 0], [0, 0, 0], [1, 1, 0], [1, 0, 1]], dtype=float),
    np.array([[0, 1, 0], [0, 0, 0], [1, 1, 0], [0, 1, 1]], dtype=float),
    np.array([[0, 0, 1], [0, 0, 0], [1, 0, 1], [0, 1, 1]], dtype=float),
    np.array([[1, 1, 1], [1, 1, 0], [1, 0, 1], [0, 1, 1]], dtype=float),
]
_FIVE_ODD = [np.abs(c - np.array([1.0, 0.0, 0.0])) for c in _FIVE_EVEN]


@dataclass(frozen=True)
class FieldRecipe:
    """Recipe for a sampled analytic field.

    kind: 'lorenz' | 'abc' | 'affine' | 'schur'
    params: kind-specific parameter tuple/dict (see the jacobian functions)
    dims: cells per axis (>= 2 each)
    bounds: ((xlo, xhi), (ylo, yhi), (zlo, zhi))
    tets_per_cube: 5 or 6
    """

    kind: str
    dims: tuple
    bounds: tuple
    params: tuple = ()
    tets_per_cube: int = 6


def lorenz_jacobian(points, sigma=10.0, rho=28.0, beta=8.0 / 3.0):
    """Velocity-gradient of the Lorenz system at (..., 3) points."""
    p = np.asarray(points, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    j = np.zeros(p.shape[:-1] + (3, 3))
    j[..., 0, 0] = -sigma
    j[..., 0, 1] = sigma
    j[..., 1, 0] = rho - z
    j[..., 1, 1] = -1.0
    j[..., 1, 2] = -x
    j[..., 2, 0] = y
    j[..., 2, 1] = x
    j[..., 2, 2] = -beta
    return j


def abc_jacobian(points, a=1.0, b=math.sqrt(2.0 / 3.0), c=math.sqrt(1.0 / 3.0)):
    """Velocity-gradient of the Arnold-Beltrami-Childress flow
    v = (a sin z + c cos y, b sin x + a cos z, c sin y + b cos x);
    identically traceless."""
    p = np.asarray(points, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    j = np.zeros(p.shape[:-1] + (3, 3))
    j[..., 0, 1] = -c * np.sin(y)
    j[..., 0, 2] = a * np.cos(z)
    j[..., 1, 0] = b * np.cos(x)
    j[..., 1, 2] = -a * np.sin(z)
    j[..., 2, 0] = -b * np.sin(x)
    j[..., 2, 1] = c * np.cos(y)
    return j


def affine_tensor_map(points, t0, tx, ty, tz):
    p = np.asarray(points, dtype=float)
    return (
        np.asarray(t0, dtype=float)
        + p[..., 0, None, None] * np.asarray(tx, dtype=float)
        + p[..., 1, None, None] * np.asarray(ty, dtype=float)
        + p[..., 2, None, None] * np.asarray(tz, dtype=float)
    )


def balanced_schur_tensor(a, b, d=0.0, e=0.0, sign=1.0, rotation=None):
    """Constant balanced tensor from the Schur recipe c^2 = a^2 + a*b + b^2,
    optionally conjugated by an orthogonal matrix."""
    c = sign * math.sqrt(a * a + a * b + b * b)
    m = np.array([[a, -c, d], [c, b, e], [0.0, 0.0, -a - b]])
    if rotation is not None:
        r = np.asarray(rotation, dtype=float)
        m = r @ m @ r.T
    return m


def _axis_coords(lo, hi, cells):
    c = lo + (hi - lo) * (np.arange(cells + 1) / cells)
    c[-1] = hi
    if lo == -hi:
        # exact antisymmetry so mirror-symmetric fields sample symmetrically
        c = 0.5 * (c - c[::-1])
    return c


def tetrahedral_grid(dims, bounds, tets_per_cube=6):
    """Vertices and tets of a structured grid; dims are cells per axis."""
    dims = tuple(int(d) for d in dims)
    if min(dims) < 2:
        raise ValueError("need at least 2 cells per axis")
    axes = [_axis_coords(b[0], b[1], d) for b, d in zip(bounds, dims)]
    nx, ny, nz = (d + 1 for d in dims)
    xs, ys, zs = np.meshgrid(*axes, indexing="ij")
    vertices = np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)

    def vid(i, j, k):
        return (i * ny + j) * nz + k

    corner_id = np.empty((2, 2, 2), dtype=np.int64)
    tets = []
    for i in range(dims[0]):
        for j in range(dims[1]):
            for k in range(dims[2]):
                for di in range(2):
                    for dj in range(2):
                        for dk in range(2):
                            corner_id[di, dj, dk] = vid(i + di, j + dj, k + dk)
                if tets_per_cube == 6:
                    cells = _KUHN6
                else:
                    cells = _FIVE_EVEN if (i + j + k) % 2 == 0 else _FIVE_ODD
                for cell in cells:
                    ids = [
                        corner_id[int(p[0]), int(p[1]), int(p[2])] for p in cell
                    ]
                    tets.append(ids)
    return vertices, np.array(tets, dtype=np.int64)


def generate(recipe: FieldRecipe) -> TetField:
    vertices, tets = tetrahedral_grid(recipe.dims, recipe.bounds, recipe.tets_per_cube)
    kind = recipe.kind.lower()
    if kind == "lorenz":
        tensors = lorenz_jacobian(vertices, *recipe.params)
        periods = None
    elif kind == "abc":
        tensors = abc_jacobian(vertices, *recipe.params)
        periods = (2.0 * math.pi,) * 3
    elif kind == "affine":
        t0, tx, ty, tz = (np.asarray(p, dtype=float).reshape(3, 3) for p in recipe.params)
        tensors = affine_tensor_map(vertices, t0, tx, ty, tz)
        periods = None
    elif kind == "schur":
        t = balanced_schur_tensor(*recipe.params)
        tensors = np.broadcast_to(t, (len(vertices), 3, 3)).copy()
        periods = None
    else:
        raise ValueError(f"unknown field kind {recipe.kind!r}")
    return TetField(vertices=vertices, tets=tets, tensors=tensors, periods=periods)
