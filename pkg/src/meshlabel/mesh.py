"""Triangle mesh with per-facet geometry, edge adjacency and PLY I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEGENERATE_AREA = 1e-12


class PlyError(ValueError):
    """Malformed or unsupported PLY input."""


@dataclass(frozen=True)
class ClassSet:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 2:
            raise ValueError("a class set needs at least two classes")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate class names in {self.names}")

    @classmethod
    def generic(cls, count: int) -> "ClassSet":
        return cls(tuple(f"class{k}" for k in range(count)))

    @property
    def count(self) -> int:
        return len(self.names)

    def __len__(self):
        return len(self.names)


@dataclass
class LoadReport:
    path: str = ""
    n_vertices: int = 0
    n_faces_read: int = 0
    dropped_degenerate: list[int] = field(default_factory=list)

    @property
    def n_dropped(self) -> int:
        return len(self.dropped_degenerate)


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _cross_area(vertices, facets):
    p0, p1, p2 = (vertices[facets[:, k]] for k in range(3))
    cross = np.cross(p1 - p0, p2 - p0)
    return cross, 0.5 * np.linalg.norm(cross, axis=1)


class Mesh:
    """Indexed triangle mesh.

    Derived per-facet quantities (normals, centroids, areas) and the
    edge-adjacency pairs are computed once at construction; all arrays are
    read-only afterwards.

    Parameters
    ----------
    vertices : (V, 3) float array
    facets : (F, 3) int array
        Vertex indices, counter-clockwise winding gives the outward normal
        by the right-hand rule.
    drop_degenerate : bool
        Silently remove facets with area below ``DEGENERATE_AREA``. When
        False such facets raise.
    """

    def __init__(self, vertices, facets, drop_degenerate=True):
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        facets = np.asarray(facets, dtype=np.int64).reshape(-1, 3)
        if facets.size and (facets.min() < 0 or facets.max() >= len(vertices)):
            bad = int(np.nonzero((facets < 0) | (facets >= len(vertices)))[0][0])
            raise PlyError(f"face {bad}: vertex index out of range "
                           f"(have {len(vertices)} vertices)")

        cross, area = _cross_area(vertices, facets)
        distinct = ((facets[:, 0] != facets[:, 1]) & (facets[:, 1] != facets[:, 2])
                    & (facets[:, 0] != facets[:, 2]))
        keep = distinct & (area >= DEGENERATE_AREA)
        self.dropped = np.nonzero(~keep)[0]
        if len(self.dropped) and not drop_degenerate:
            raise ValueError(f"degenerate facets: {self.dropped.tolist()}")
        facets, cross, area = facets[keep], cross[keep], area[keep]

        self.vertices = _readonly(vertices)
        self.facets = _readonly(facets)
        self.facet_areas = _readonly(area)
        self.facet_normals = _readonly(cross / (2.0 * area[:, None]) if len(area)
                                       else np.zeros((0, 3)))
        self.facet_centroids = _readonly(vertices[facets].mean(axis=1) if len(facets)
                                         else np.zeros((0, 3)))
        self.adjacency = _readonly(_edge_adjacency(facets))

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def bounds(self):
        """Axis-aligned bounding box (min, max) of the vertices used by facets."""
        used = self.vertices[np.unique(self.facets)]
        return used.min(axis=0), used.max(axis=0)

    def diameter(self) -> float:
        lo, hi = self.bounds()
        return float(np.linalg.norm(hi - lo))

    def __repr__(self):
        return f"Mesh(vertices={self.n_vertices}, facets={self.n_facets})"


def facet_normal(mesh: Mesh, f: int) -> np.ndarray:
    return mesh.facet_normals[f].copy()


def adjacency_pairs(mesh: Mesh) -> np.ndarray:
    """(P, 2) array of facet pairs sharing a full edge, ``f < h``, sorted."""
    return mesh.adjacency


def _edge_adjacency(facets):
    n = len(facets)
    if n == 0:
        return np.zeros((0, 2), dtype=np.int64)
    edges = np.concatenate([facets[:, [0, 1]], facets[:, [1, 2]], facets[:, [2, 0]]])
    edges.sort(axis=1)
    owner = np.tile(np.arange(n), 3)
    _, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    order = np.lexsort((owner, inv))
    inv, owner = inv[order], owner[order]
    starts = np.flatnonzero(np.r_[True, inv[1:] != inv[:-1]])
    sizes = np.diff(np.r_[starts, len(inv)])

    pairs = []
    two = starts[sizes == 2]
    pairs.append(np.stack([owner[two], owner[two + 1]], axis=1))
    # non-manifold edges: every pairwise combination of incident facets
    for s, k in zip(starts[sizes > 2], sizes[sizes > 2]):
        group = owner[s:s + k]
        iu = np.triu_indices(k, 1)
        pairs.append(np.stack([group[iu[0]], group[iu[1]]], axis=1))
    pairs = np.concatenate(pairs)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs.sort(axis=1)
    return np.unique(pairs, axis=0).astype(np.int64).reshape(-1, 2)


# --------------------------------------------------------------------------
# PLY

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_header(fh, path):
    magic = fh.readline().strip()
    if magic != b"ply":
        raise PlyError(f"{path}: line 1: not a PLY file")
    fmt = None
    elements = []
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise PlyError(f"{path}: header not terminated by end_header")
        tok = raw.decode("ascii", errors="replace").split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "end_header":
            break
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] not in ("ascii", "binary_little_endian"):
                raise PlyError(f"{path}: line {lineno}: unsupported format {' '.join(tok[1:])}")
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3 or not tok[2].isdigit():
                raise PlyError(f"{path}: line {lineno}: bad element declaration")
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise PlyError(f"{path}: line {lineno}: property before any element")
            if tok[1] == "list":
                if len(tok) != 5 or tok[2] not in _PLY_TYPES or tok[3] not in _PLY_TYPES:
                    raise PlyError(f"{path}: line {lineno}: bad list property")
                elements[-1][2].append((tok[4], _PLY_TYPES[tok[2]], _PLY_TYPES[tok[3]]))
            else:
                if len(tok) != 3 or tok[1] not in _PLY_TYPES:
                    raise PlyError(f"{path}: line {lineno}: bad property")
                elements[-1][2].append((tok[2], _PLY_TYPES[tok[1]], None))
        else:
            raise PlyError(f"{path}: line {lineno}: unexpected header keyword {tok[0]!r}")
    if fmt is None:
        raise PlyError(f"{path}: missing format line")
    return fmt, elements


def _read_ascii(lines, name, count, props, path):
    scalar_rows, lists = [], {p[0]: [] for p in props if p[2] is not None}
    for i in range(count):
        try:
            tok = next(lines)
        except StopIteration:
            raise PlyError(f"{path}: {name} {i}: unexpected end of file") from None
        row, pos = [], 0
        try:
            for pname, t, item in props:
                if item is None:
                    row.append(float(tok[pos]))
                    pos += 1
                else:
                    k = int(tok[pos])
                    lists[pname].append([float(x) for x in tok[pos + 1:pos + 1 + k]])
                    if len(lists[pname][-1]) != k:
                        raise IndexError
                    pos += 1 + k
        except (IndexError, ValueError):
            raise PlyError(f"{path}: {name} {i}: malformed element") from None
        scalar_rows.append(row)
    return scalar_rows, lists


def _read_binary(buf, offset, name, count, props, path):
    if all(p[2] is None for p in props):
        dt = np.dtype([(p[0], "<" + p[1]) for p in props])
        need = dt.itemsize * count
        if offset + need > len(buf):
            raise PlyError(f"{path}: {name}: unexpected end of file")
        arr = np.frombuffer(buf, dtype=dt, count=count, offset=offset)
        return arr, {}, offset + need
    # fast path: every list holds exactly three items
    fields = []
    for pname, t, item in props:
        if item is None:
            fields.append((pname, "<" + t))
        else:
            fields += [(pname + "#n", "<" + t), (pname, "<" + item, (3,))]
    dt = np.dtype(fields)
    if offset + dt.itemsize * count <= len(buf):
        arr = np.frombuffer(buf, dtype=dt, count=count, offset=offset)
        if all((arr[p[0] + "#n"] == 3).all() for p in props if p[2] is not None):
            rows = [[float(v) for v in r] for r in
                    zip(*(arr[p[0]] for p in props if p[2] is None))] or [[]] * count
            lists = {p[0]: arr[p[0]].tolist() for p in props if p[2] is not None}
            return rows, lists, offset + dt.itemsize * count
    # general case: walk elements one at a time
    rows, lists = [], {p[0]: [] for p in props if p[2] is not None}
    for i in range(count):
        row = []
        for pname, t, item in props:
            dt = np.dtype("<" + t)
            if offset + dt.itemsize > len(buf):
                raise PlyError(f"{path}: {name} {i}: unexpected end of file")
            val = np.frombuffer(buf, dtype=dt, count=1, offset=offset)[0]
            offset += dt.itemsize
            if item is None:
                row.append(float(val))
            else:
                idt = np.dtype("<" + item)
                k = int(val)
                if offset + k * idt.itemsize > len(buf):
                    raise PlyError(f"{path}: {name} {i}: unexpected end of file")
                lists[pname].append(np.frombuffer(buf, dtype=idt, count=k, offset=offset).tolist())
                offset += k * idt.itemsize
        rows.append(row)
    return rows, lists, offset


def read_ply(path):
    """Parse a PLY file into ``(vertices, faces, face_properties)``.

    Only the ``vertex`` (x, y, z) and ``face`` (vertex_indices/vertex_index)
    elements are interpreted; other elements are skipped. ``face_properties``
    maps any extra scalar face property name (e.g. ``label``) to an array.
    """
    path = str(path)
    with open(path, "rb") as fh:
        fmt, elements = _parse_header(fh, path)
        body = fh.read()

    data = {}
    if fmt == "ascii":
        lines = (ln.split() for ln in body.decode("ascii", errors="replace").splitlines() if ln.strip())
        for name, count, props in elements:
            data[name] = _read_ascii(lines, name, count, props, path)[:2] + (props,)
    else:
        offset = 0
        for name, count, props in elements:
            rows, lists, offset = _read_binary(body, offset, name, count, props, path)
            data[name] = (rows, lists, props)

    if "vertex" not in data:
        raise PlyError(f"{path}: no vertex element")
    rows, _, props = data["vertex"]
    names = [p[0] for p in props if p[2] is None]
    for axis in "xyz":
        if axis not in names:
            raise PlyError(f"{path}: vertex element lacks property {axis!r}")
    if isinstance(rows, np.ndarray):
        vertices = np.stack([rows[a].astype(np.float64) for a in "xyz"], axis=1)
    else:
        arr = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(names))
        vertices = arr[:, [names.index(a) for a in "xyz"]]

    faces = np.zeros((0, 3), dtype=np.int64)
    face_props = {}
    if "face" in data:
        rows, lists, props = data["face"]
        key = "vertex_indices" if "vertex_indices" in lists else "vertex_index"
        if key not in lists:
            raise PlyError(f"{path}: face element lacks a vertex_indices list")
        idx = lists[key]
        for i, f in enumerate(idx):
            if len(f) != 3:
                raise PlyError(f"{path}: face {i}: expected 3 vertex indices, got {len(f)}")
        faces = np.asarray(idx, dtype=np.int64).reshape(-1, 3)
        bad = np.nonzero((faces < 0) | (faces >= len(vertices)))[0]
        if len(bad):
            raise PlyError(f"{path}: face {int(bad[0])}: vertex index out of range "
                           f"(have {len(vertices)} vertices)")
        scalar_names = [p[0] for p in props if p[2] is None]
        if scalar_names:
            arr = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(scalar_names))
            for j, n in enumerate(scalar_names):
                face_props[n] = arr[:, j]
    return vertices, faces, face_props


def load_mesh(path, with_report=False):
    """Load a triangle mesh from PLY, dropping zero-area facets.

    Returns the mesh, or ``(mesh, LoadReport)`` when ``with_report`` is set.
    """
    vertices, faces, _ = read_ply(path)
    mesh = Mesh(vertices, faces)
    if with_report:
        report = LoadReport(str(path), len(vertices), len(faces), mesh.dropped.tolist())
        return mesh, report
    return mesh


def load_labeled_mesh(path):
    """Load a PLY written by ``save_ply`` and return ``(mesh, labels)``."""
    vertices, faces, props = read_ply(path)
    if "label" not in props:
        raise PlyError(f"{path}: face element has no 'label' property")
    mesh = Mesh(vertices, faces)
    labels = np.delete(props["label"].astype(np.int64), mesh.dropped)
    return mesh, labels


DEFAULT_PALETTE = np.array([
    [128, 64, 128], [220, 20, 60], [107, 142, 35], [70, 130, 180],
    [250, 170, 30], [190, 153, 153], [0, 0, 142], [255, 255, 0],
], dtype=np.uint8)


def save_ply(path, mesh: Mesh, labels=None, palette=DEFAULT_PALETTE, binary=True):
    """Write ``mesh`` to PLY, optionally with per-face ``label`` and RGB color."""
    nf = mesh.n_facets
    header = ["ply",
              f"format {'binary_little_endian' if binary else 'ascii'} 1.0",
              f"element vertex {mesh.n_vertices}",
              "property double x", "property double y", "property double z",
              f"element face {nf}",
              "property list uchar int vertex_indices"]
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (nf,):
            raise ValueError(f"expected {nf} labels, got shape {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() > 255):
            raise ValueError("labels must fit in an unsigned byte")
        header.append("property uchar label")
        if palette is not None:
            header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(mesh.vertices.astype("<f8").tobytes())
            fields = [("n", "u1"), ("idx", "<i4", (3,))]
            if labels is not None:
                fields.append(("label", "u1"))
                if palette is not None:
                    fields.append(("rgb", "u1", (3,)))
            rec = np.zeros(nf, dtype=fields)
            rec["n"] = 3
            rec["idx"] = mesh.facets
            if labels is not None:
                rec["label"] = labels
                if palette is not None:
                    rec["rgb"] = palette[labels % len(palette)]
            fh.write(rec.tobytes())
        else:
            out = [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
            for i, f in enumerate(mesh.facets):
                row = [3, *f.tolist()]
                if labels is not None:
                    row.append(int(labels[i]))
                    if palette is not None:
                        row += palette[labels[i] % len(palette)].tolist()
                out.append(" ".join(map(str, row)))
            fh.write(("\n".join(out) + "\n").encode("ascii"))

