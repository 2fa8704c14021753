"""Pinhole cameras, z-buffered facet rasterization and label rendering.

Image coordinates follow the usual 3x4 projection convention: a world point
``X`` maps to ``P @ [X, 1] = (x, y, w)`` and lands at column ``x / w``, row
``y / w``. Pixel ``(row r, col c)`` is sampled at its center ``(c, r)``;
``w`` is the homogeneous depth used by the z-buffer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pgm import read_pgm, write_pgm

BACKGROUND = -1
VOID = 255
NEAR = 1e-6
DEPTH_TIE = 1e-9
_CHUNK = 1 << 21


@dataclass
class CameraView:
    """One calibrated image: projection matrix plus per-class likelihoods.

    ``likelihoods`` has shape (classes, height, width) with values in [0, 1],
    or is None for views used only for rendering/evaluation.
    """
    projection: np.ndarray
    width: int
    height: int
    likelihoods: np.ndarray | None = None
    id: int = 0

    def __post_init__(self):
        self.projection = np.asarray(self.projection, dtype=np.float64).reshape(3, 4)
        if np.linalg.matrix_rank(self.projection) < 3:
            raise ValueError(f"view {self.id}: projection matrix is rank deficient")
        if self.likelihoods is not None:
            lik = np.asarray(self.likelihoods, dtype=np.float64)
            if lik.ndim != 3 or lik.shape[1:] != (self.height, self.width):
                raise ValueError(f"view {self.id}: likelihood raster shape {lik.shape} "
                                 f"does not match {self.height}x{self.width}")
            if lik.size and (lik.min() < 0 or lik.max() > 1):
                raise ValueError(f"view {self.id}: likelihoods must lie in [0, 1]")
            self.likelihoods = lik

    def project(self, points):
        """Project (N, 3) world points; returns (N, 2) pixel coords and (N,) depth."""
        h = np.asarray(points, dtype=np.float64) @ self.projection[:, :3].T + self.projection[:, 3]
        return h[:, :2] / h[:, 2:3], h[:, 2]

    def center(self):
        """Camera center in world coordinates (right null vector of P)."""
        m, p4 = self.projection[:, :3], self.projection[:, 3]
        return -np.linalg.solve(m, p4)


@dataclass
class VisibilityMap:
    owner: np.ndarray   # (H, W) facet index or BACKGROUND
    depth: np.ndarray   # (H, W) homogeneous depth, inf on background

    def footprint(self, f: int) -> np.ndarray:
        return facet_footprint(self, f)

    def pixel_counts(self, n_facets: int) -> np.ndarray:
        own = self.owner.ravel()
        return np.bincount(own[own >= 0], minlength=n_facets)


def look_at(eye, target, up, focal, width, height, principal=None):
    """Projection matrix of a camera at ``eye`` looking at ``target``.

    Camera axes: x right, y down in the image, z forward; ``focal`` in pixels.
    """
    eye, target, up = (np.asarray(a, dtype=np.float64) for a in (eye, target, up))
    fwd = target - eye
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-12:
        raise ValueError("up vector is parallel to the viewing direction")
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd])
    if principal is None:
        principal = ((width - 1) / 2.0, (height - 1) / 2.0)
    k = np.array([[focal, 0, principal[0]], [0, focal, principal[1]], [0, 0, 1.0]])
    return k @ np.hstack([rot, (-rot @ eye)[:, None]])


# --------------------------------------------------------------------------
# rasterization

def _clip_near(hv):
    """Clip one homogeneous triangle (3, 3) against w >= NEAR; returns polygon."""
    out = []
    for i in range(3):
        a, b = hv[i], hv[(i + 1) % 3]
        ina, inb = a[2] >= NEAR, b[2] >= NEAR
        if ina:
            out.append(a)
        if ina != inb:
            t = (NEAR - a[2]) / (b[2] - a[2])
            p = a + t * (b - a)
            p[2] = NEAR
            out.append(p)
    return out


def _screen_triangles(mesh, view):
    """Screen-space triangles (T, 3, 2), inverse depths (T, 3) and facet ids."""
    hom = mesh.vertices @ view.projection[:, :3].T + view.projection[:, 3]
    tri = hom[mesh.facets]                     # (F, 3, 3)
    w = tri[:, :, 2]
    front = (w >= NEAR).all(axis=1)
    mixed = ~front & (w >= NEAR).any(axis=1)

    ids = [np.nonzero(front)[0]]
    verts = [tri[front]]
    for f in np.nonzero(mixed)[0]:
        poly = _clip_near(tri[f].copy())
        for k in range(1, len(poly) - 1):
            verts.append(np.stack([poly[0], poly[k], poly[k + 1]])[None])
            ids.append(np.array([f]))
    verts = np.concatenate(verts) if verts else np.zeros((0, 3, 3))
    ids = np.concatenate(ids).astype(np.int64)
    inv_w = 1.0 / verts[:, :, 2]
    xy = verts[:, :, :2] * inv_w[:, :, None]
    return xy, inv_w, ids


def _edge_values(a, b, px, py):
    """Edge function of directed edge a->b at (px, py).

    Evaluated from the lexicographically smaller endpoint so that the two
    triangles sharing an edge get exactly negated values.
    """
    swap = (a[:, 0] > b[:, 0]) | ((a[:, 0] == b[:, 0]) & (a[:, 1] > b[:, 1]))
    p = np.where(swap[:, None], b, a)
    q = np.where(swap[:, None], a, b)
    e = (q[:, 0] - p[:, 0]) * (py - p[:, 1]) - (q[:, 1] - p[:, 1]) * (px - p[:, 0])
    return np.where(swap, -e, e)


def _is_top_left(a, b):
    ex, ey = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    return (ey < 0) | ((ey == 0) & (ex > 0))


def _fragments(xy, inv_w, ids, width, height):
    """Yield (pixel index, depth, facet) for covered pixel centers, chunked."""
    area2 = ((xy[:, 1, 0] - xy[:, 0, 0]) * (xy[:, 2, 1] - xy[:, 0, 1])
             - (xy[:, 1, 1] - xy[:, 0, 1]) * (xy[:, 2, 0] - xy[:, 0, 0]))
    flip = area2 < 0
    xy[flip] = xy[flip][:, [0, 2, 1]]
    inv_w[flip] = inv_w[flip][:, [0, 2, 1]]
    area2 = np.abs(area2)

    with np.errstate(invalid="ignore"):
        x0 = np.clip(np.ceil(xy[:, :, 0].min(axis=1)), 0, width)
        x1 = np.clip(np.floor(xy[:, :, 0].max(axis=1)), -1, width - 1)
        y0 = np.clip(np.ceil(xy[:, :, 1].min(axis=1)), 0, height)
        y1 = np.clip(np.floor(xy[:, :, 1].max(axis=1)), -1, height - 1)
    ok = (area2 > 0) & np.isfinite(area2) & (x1 >= x0) & (y1 >= y0)
    tri_idx = np.nonzero(ok)[0]
    nx = (x1 - x0 + 1)[tri_idx].astype(np.int64)
    ny = (y1 - y0 + 1)[tri_idx].astype(np.int64)
    counts = nx * ny

    start = 0
    while start < len(tri_idx):
        csum = np.cumsum(counts[start:])
        stop = start + max(1, int(np.searchsorted(csum, _CHUNK, side="right")))
        sel = tri_idx[start:stop]
        cnt = counts[start:stop]
        t = np.repeat(sel, cnt)
        off = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        nxs = np.repeat(nx[start:stop], cnt)
        px = x0[t] + off % nxs
        py = y0[t] + off // nxs

        v = xy[t]
        inside = np.ones(len(t), dtype=bool)
        bary = []
        for i in range(3):
            a, b = v[:, i], v[:, (i + 1) % 3]
            e = _edge_values(a, b, px, py)
            inside &= (e > 0) | ((e == 0) & _is_top_left(a, b))
            bary.append(e)
        # edge i is opposite vertex (i + 2) % 3
        iw = (bary[1] * inv_w[t, 0] + bary[2] * inv_w[t, 1] + bary[0] * inv_w[t, 2]) / area2[t]
        inside &= iw > 0
        pix = py[inside].astype(np.int64) * width + px[inside].astype(np.int64)
        yield pix, 1.0 / iw[inside], ids[t[inside]]
        start = stop


def rasterize(mesh, view: CameraView) -> VisibilityMap:
    """Z-buffer the mesh into ``view``.

    Each pixel center is owned by the front-most covering facet; pixels
    within ``DEPTH_TIE`` of the front depth go to the lowest facet index.
    Triangles crossing the near plane are clipped in homogeneous space.
    """
    n_pix = view.width * view.height
    if mesh.n_facets == 0:
        return VisibilityMap(np.full((view.height, view.width), BACKGROUND, dtype=np.int64),
                             np.full((view.height, view.width), np.inf))
    xy, inv_w, ids = _screen_triangles(mesh, view)
    frags = list(_fragments(xy, inv_w, ids, view.width, view.height))
    pix = np.concatenate([f[0] for f in frags]) if frags else np.zeros(0, np.int64)
    depth = np.concatenate([f[1] for f in frags]) if frags else np.zeros(0)
    fid = np.concatenate([f[2] for f in frags]) if frags else np.zeros(0, np.int64)

    front = np.full(n_pix, np.inf)
    np.minimum.at(front, pix, depth)
    near = depth <= front[pix] + DEPTH_TIE
    owner = np.full(n_pix, np.iinfo(np.int64).max)
    np.minimum.at(owner, pix[near], fid[near])
    owned = owner != np.iinfo(np.int64).max
    owner[~owned] = BACKGROUND

    zbuf = np.full(n_pix, np.inf)
    mine = near & (fid == owner[pix])
    np.minimum.at(zbuf, pix[mine], depth[mine])
    shape = (view.height, view.width)
    return VisibilityMap(owner.reshape(shape), zbuf.reshape(shape))


def facet_footprint(vis: VisibilityMap, f: int) -> np.ndarray:
    """(N, 2) array of (row, col) pixels owned by facet ``f``."""
    return np.argwhere(vis.owner == f)


def render_labels(mesh, labels, view: CameraView, vis: VisibilityMap | None = None):
    """Per-pixel class of the owning facet; background pixels are ``VOID``."""
    labels = np.asarray(labels)
    if labels.shape != (mesh.n_facets,):
        raise ValueError(f"expected {mesh.n_facets} labels, got shape {labels.shape}")
    if vis is None:
        vis = rasterize(mesh, view)
    out = np.full(vis.owner.shape, VOID, dtype=np.uint8)
    owned = vis.owner >= 0
    out[owned] = labels[vis.owner[owned]]
    return out


# --------------------------------------------------------------------------
# file formats

def write_cameras(path, views):
    lines = []
    for v in views:
        lines.append(f"{v.id} {v.width} {v.height}")
        for row in v.projection:
            lines.append(" ".join(repr(float(x)) for x in row))
        lines.append("")
    Path(path).write_text("\n".join(lines))


def read_cameras(path):
    """Parse a camera file: per block ``id width height`` then 12 floats."""
    text = Path(path).read_text()
    tokens = []
    for ln in text.splitlines():
        tokens += ln.split("#", 1)[0].split()
    if len(tokens) % 15:
        raise ValueError(f"{path}: expected blocks of 15 values, got {len(tokens)} tokens")
    views = []
    for b in range(0, len(tokens), 15):
        blk = tokens[b:b + 15]
        try:
            vid, w, h = int(blk[0]), int(blk[1]), int(blk[2])
            proj = np.array([float(x) for x in blk[3:]]).reshape(3, 4)
        except ValueError:
            raise ValueError(f"{path}: camera block {b // 15}: malformed number") from None
        if w <= 0 or h <= 0:
            raise ValueError(f"{path}: camera {vid}: non-positive image size")
        views.append(CameraView(proj, w, h, id=vid))
    ids = [v.id for v in views]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate view ids")
    return views


def likelihood_name(view_id, k):
    return f"view{view_id}_class{k}.pgm"


def gt_name(view_id):
    return f"view{view_id}_gt.pgm"


def save_likelihoods(directory, view_id, likelihoods):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, lik in enumerate(likelihoods):
        g = np.rint(np.clip(lik, 0, 1) * 65535).astype(np.uint16)
        write_pgm(directory / likelihood_name(view_id, k), g, maxval=65535)


def count_classes(directory):
    """Number of classes present in a likelihood directory (max K + 1)."""
    ks = [int(m.group(2)) for p in Path(directory).glob("view*_class*.pgm")
          if (m := re.fullmatch(r"view(-?\d+)_class(\d+)\.pgm", p.name))]
    if not ks:
        raise FileNotFoundError(f"{directory}: no view*_class*.pgm likelihood files")
    return max(ks) + 1


def load_likelihoods(directory, view: CameraView, n_classes: int):
    """Attach the likelihood rasters of ``view`` read from ``directory``."""
    rasters = []
    for k in range(n_classes):
        p = Path(directory) / likelihood_name(view.id, k)
        if not p.exists():
            raise FileNotFoundError(f"missing likelihood raster {p}")
        img, maxval = read_pgm(p)
        if img.shape != (view.height, view.width):
            raise ValueError(f"{p}: size {img.shape[::-1]} does not match camera "
                             f"{view.width}x{view.height}")
        rasters.append(img.astype(np.float64) / maxval)
    return CameraView(view.projection, view.width, view.height, np.stack(rasters), view.id)


def save_gt(directory, view_id, raster):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_pgm(directory / gt_name(view_id), np.asarray(raster, dtype=np.uint8), maxval=255)


def load_gt(directory, view: CameraView):
    p = Path(directory) / gt_name(view.id)
    if not p.exists():
        raise FileNotFoundError(f"missing ground-truth image {p}")
    img, _ = read_pgm(p)
    if img.shape != (view.height, view.width):
        raise ValueError(f"{p}: size does not match camera {view.id}")
    return img.astype(np.uint8)
