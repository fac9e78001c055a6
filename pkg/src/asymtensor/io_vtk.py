"""Readers and writers.

Primary interchange is VTK legacy ASCII: unstructured grids carry the input
tensor fields (POINT_DATA FIELD array named "tensor", 9 components,
row-major) and polydata carries extracted surfaces/curves with per-vertex
attributes.  A compact .npz container serves as the private binary format
for large fields.  Floats are written with 17 significant digits so a
save/load round trip is bit exact.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ParseError, UnsupportedFormat
from .geometry import FeatureCurve, FeatureSurface
from .mesh import TetField

_FMT = "%.17g"


def _fmt_row(values):
    return " ".join(_FMT % v for v in values)


# ---------------------------------------------------------------------------
# field I/O


def save_field(field: TetField, path):
    path = str(path)
    if path.endswith(".npz"):
        periods = (
            np.array([p if p is not None else np.nan for p in field.periods])
            if field.periods is not None
            else np.array([])
        )
        np.savez_compressed(
            path,
            vertices=field.vertices,
            tets=field.tets,
            tensors=field.tensors,
            periods=periods,
        )
        return
    if not path.endswith(".vtk"):
        raise UnsupportedFormat(f"cannot write field to {path!r} (use .vtk or .npz)")
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("asymtensor field")
        if field.periods is not None:
            fh.write(" periods=" + ",".join(_FMT % p for p in field.periods))
        fh.write("\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(field.vertices)} double\n")
        for p in field.vertices:
            fh.write(_fmt_row(p) + "\n")
        m = len(field.tets)
        fh.write(f"CELLS {m} {5 * m}\n")
        for t in field.tets:
            fh.write("4 %d %d %d %d\n" % tuple(t))
        fh.write(f"CELL_TYPES {m}\n")
        for _ in range(m):
            fh.write("10\n")
        fh.write(f"POINT_DATA {len(field.vertices)}\n")
        fh.write("FIELD FieldData 1\n")
        fh.write(f"tensor 9 {len(field.vertices)} double\n")
        for t in field.tensors:
            fh.write(_fmt_row(t.reshape(9)) + "\n")


class _TokenStream:
    """Whitespace token stream that remembers line numbers for errors."""

    def __init__(self, path):
        self.path = path
        self.tokens = []
        with open(path, "r") as fh:
            for lineno, line in enumerate(fh, start=1):
                for tok in line.split():
                    self.tokens.append((tok, lineno))
        self.pos = 0

    def next(self, what="token"):
        if self.pos >= len(self.tokens):
            raise ParseError(f"{self.path}: unexpected end of file while reading {what}")
        tok, line = self.tokens[self.pos]
        self.pos += 1
        return tok, line

    def expect(self, literal):
        tok, line = self.next(literal)
        if tok.upper() != literal.upper():
            raise ParseError(f"{self.path}:{line}: expected {literal!r}, found {tok!r}")

    def next_int(self, what="integer"):
        tok, line = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise ParseError(f"{self.path}:{line}: expected {what}, found {tok!r}") from None

    def next_float(self, what="number"):
        tok, line = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"{self.path}:{line}: expected {what}, found {tok!r}") from None

    def peek(self):
        if self.pos >= len(self.tokens):
            return None
        return self.tokens[self.pos][0]


def load_field(path) -> TetField:
    path = str(path)
    if path.endswith(".npz"):
        data = np.load(path)
        periods = None
        if len(data["periods"]):
            periods = tuple(
                None if math.isnan(p) else float(p) for p in data["periods"]
            )
        return TetField(
            vertices=data["vertices"], tets=data["tets"],
            tensors=data["tensors"], periods=periods,
        )
    if not path.endswith(".vtk"):
        raise UnsupportedFormat(f"cannot read field from {path!r} (use .vtk or .npz)")

    # header: two lines of free text, second may carry periods=...
    periods = None
    with open(path, "r") as fh:
        header = fh.readline()
        title = fh.readline()
    if not header.startswith("# vtk DataFile"):
        raise ParseError(f"{path}:1: not a VTK legacy file")
    for word in title.split():
        if word.startswith("periods="):
            periods = tuple(float(x) for x in word[len("periods="):].split(","))

    ts = _TokenStream(path)
    # skip the header comment tokens up to ASCII
    while True:
        tok, line = ts.next("ASCII marker")
        if tok.upper() == "ASCII":
            break
        if tok.upper() == "BINARY":
            raise UnsupportedFormat(f"{path}:{line}: binary VTK is not supported")
    ts.expect("DATASET")
    tok, line = ts.next("dataset type")
    if tok.upper() != "UNSTRUCTURED_GRID":
        raise UnsupportedFormat(f"{path}:{line}: dataset {tok!r} is not UNSTRUCTURED_GRID")

    vertices = tets = tensors = None
    npoints = 0
    while ts.peek() is not None:
        section, line = ts.next("section")
        s = section.upper()
        if s == "POINTS":
            npoints = ts.next_int("point count")
            ts.next("point dtype")
            vertices = np.empty((npoints, 3))
            for i in range(npoints):
                for j in range(3):
                    vertices[i, j] = ts.next_float(f"coordinate of point {i}")
        elif s == "CELLS":
            m = ts.next_int("cell count")
            ts.next_int("cell list size")
            tets = np.empty((m, 4), dtype=np.int64)
            for i in range(m):
                n = ts.next_int(f"cell {i} size")
                if n != 4:
                    raise ParseError(f"{path}: cell {i} has {n} vertices, expected 4 (tet)")
                for j in range(4):
                    tets[i, j] = ts.next_int(f"cell {i} index")
        elif s == "CELL_TYPES":
            m = ts.next_int("cell type count")
            for i in range(m):
                ct = ts.next_int(f"cell {i} type")
                if ct != 10:
                    raise UnsupportedFormat(f"{path}: cell {i} has type {ct}, expected 10")
        elif s == "POINT_DATA":
            n = ts.next_int("point data count")
            if n != npoints:
                raise ParseError(f"{path}: POINT_DATA count {n} != POINTS {npoints}")
        elif s == "FIELD":
            ts.next("field data name")
            narr = ts.next_int("array count")
            for _ in range(narr):
                name, line = ts.next("array name")
                comps = ts.next_int("component count")
                tuples = ts.next_int("tuple count")
                ts.next("array dtype")
                vals = np.empty(comps * tuples)
                for i in range(comps * tuples):
                    vals[i] = ts.next_float(f"record {i // comps} of array {name!r}")
                if name == "tensor":
                    if comps != 9:
                        raise ParseError(
                            f"{path}:{line}: array 'tensor' has {comps} components, expected 9")
                    tensors = vals.reshape(tuples, 3, 3)
        else:
            raise ParseError(f"{path}:{line}: unexpected section {section!r}")

    if vertices is None or tets is None:
        raise ParseError(f"{path}: missing POINTS or CELLS section")
    if tensors is None:
        raise ParseError(f"{path}: missing 9-component point FIELD array 'tensor'")
    if len(tensors) != len(vertices):
        raise ParseError(f"{path}: tensor record count {len(tensors)} != point count")
    return TetField(vertices=vertices, tets=tets, tensors=tensors, periods=periods)


# ---------------------------------------------------------------------------
# geometry output


def _write_attr_field(fh, name, values):
    fh.write(f"{name} 1 {len(values)} double\n")
    for lo in range(0, len(values), 9):
        fh.write(_fmt_row(values[lo:lo + 9]) + "\n")


def save_geometry(obj, path, format=None):
    """Write surfaces/curves (or a list of same-kind parts) to .vtk or .obj."""
    path = str(path)
    fmt = format or ("obj" if path.endswith(".obj") else "vtk")
    parts = obj if isinstance(obj, (list, tuple)) else [obj]
    if not parts:
        raise ValueError("nothing to write")
    if fmt == "obj":
        _save_obj(parts, path)
    elif fmt == "vtk":
        if isinstance(parts[0], FeatureSurface):
            _save_surface_vtk(parts, path)
        elif isinstance(parts[0], FeatureCurve):
            _save_curve_vtk(parts, path)
        else:
            raise UnsupportedFormat(f"cannot write {type(parts[0]).__name__}")
    else:
        raise UnsupportedFormat(f"unknown geometry format {fmt!r}")


PART_IDS = {
    "none": 0, "linear": 1, "planar": 2, "real": 3, "complex": 4,
    "positive": 5, "negative": 6,
}


def _save_surface_vtk(parts, path):
    nv = sum(p.n_vertices for p in parts)
    nt = sum(p.n_triangles for p in parts)
    attr_names = sorted({k for p in parts for k in p.vertex_attrs})
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        feat = parts[0].feature or "surface"
        fh.write(f"asymtensor surface {feat}\nASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {nv} double\n")
        for p in parts:
            for v in p.vertices:
                fh.write(_fmt_row(v) + "\n")
        fh.write(f"POLYGONS {nt} {4 * nt}\n")
        off = 0
        for p in parts:
            for t in p.triangles:
                fh.write("3 %d %d %d\n" % (t[0] + off, t[1] + off, t[2] + off))
            off += p.n_vertices
        if nv and attr_names:
            fh.write(f"POINT_DATA {nv}\n")
            fh.write(f"FIELD FeatureAttributes {len(attr_names)}\n")
            for name in attr_names:
                vals = np.concatenate([
                    np.asarray(p.vertex_attrs.get(name, np.zeros(p.n_vertices)), dtype=float)
                    for p in parts
                ]) if nv else np.empty(0)
                _write_attr_field(fh, name, vals)
        if nt:
            fh.write(f"CELL_DATA {nt}\n")
            fh.write("SCALARS part int 1\nLOOKUP_TABLE default\n")
            for p in parts:
                pid = PART_IDS.get(p.part, 0)
                for _ in range(p.n_triangles):
                    fh.write(f"{pid}\n")


def _save_curve_vtk(parts, path):
    nv = sum(p.n_vertices for p in parts)
    lines = []
    off = 0
    for p in parts:
        for line in p.polylines:
            lines.append([int(i) + off for i in line])
        off += p.n_vertices
    size = sum(len(l) + 1 for l in lines)
    attr_names = sorted({k for p in parts for k in p.vertex_attrs})
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"asymtensor curve {parts[0].feature}\nASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {nv} double\n")
        for p in parts:
            for v in p.vertices:
                fh.write(_fmt_row(v) + "\n")
        fh.write(f"LINES {len(lines)} {size}\n")
        for line in lines:
            fh.write(str(len(line)) + " " + " ".join(str(i) for i in line) + "\n")
        if nv and attr_names:
            fh.write(f"POINT_DATA {nv}\n")
            fh.write(f"FIELD FeatureAttributes {len(attr_names)}\n")
            for name in attr_names:
                vals = np.concatenate([
                    np.asarray(p.vertex_attrs.get(name, np.zeros(p.n_vertices)), dtype=float)
                    for p in parts
                ])
                _write_attr_field(fh, name, vals)


def _save_obj(parts, path):
    with open(path, "w") as fh:
        off = 1
        for p in parts:
            for v in p.vertices:
                fh.write("v " + _fmt_row(v) + "\n")
        for p in parts:
            if isinstance(p, FeatureSurface):
                for t in p.triangles:
                    fh.write("f %d %d %d\n" % (t[0] + off, t[1] + off, t[2] + off))
            else:
                for line in p.polylines:
                    fh.write("l " + " ".join(str(int(i) + off) for i in line) + "\n")
            off += p.n_vertices
