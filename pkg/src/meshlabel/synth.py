"""Deterministic synthetic scenes for exercising the labeling pipeline.

A scene is a union of axis-aligned rectangles, each carrying a class. The
mesh is the welded triangulation of the rectangles; ground-truth images are
ray-cast against the rectangles directly, so they do not depend on the
rasterizer they are used to check.

Kinds:

``box-on-plane``
    A box standing on a ground plane. Two classes (up-facing vs. side) or
    four (ground, box x-walls, box y-walls, box top).
``step-pyramid``
    Two stacked boxes on a plane.
``fig2-toy``
    A trench: two plateaus separated by a lower floor. Up-facing surfaces
    are one class, the two inward-facing walls the other; the left wall
    faces +x and the right wall -x.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .camera import VOID, CameraView, look_at, save_gt, save_likelihoods, write_cameras
from .mesh import Mesh, save_ply

KINDS = ("box-on-plane", "step-pyramid", "fig2-toy")
TWO_CLASS = ("ground", "wall")
FOUR_CLASS = ("ground", "wall", "vegetation", "other")
TOY_CLASSES = ("top", "side")


@dataclass
class SceneSpec:
    kind: str = "box-on-plane"
    resolution: float = 4.0       # facet grid subdivisions per scene unit
    n_views: int = 6
    width: int = 160
    height: int = 120
    p_flip: float = 0.0
    tau: float = 0.0              # likelihood left on the non-winning classes
    noise_block: int = 1          # flips are drawn per block x block pixel tile
    n_classes: int = 2
    elevation_deg: float = 40.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}; expected one of {KINDS}")
        if not 0 <= self.p_flip < 0.5:
            raise ValueError("p_flip must lie in [0, 0.5)")
        if not 0 <= self.tau < 1:
            raise ValueError("tau must lie in [0, 1)")
        if self.n_classes not in (2, 4) or (self.n_classes == 4 and self.kind != "box-on-plane"):
            raise ValueError("four classes are only defined for box-on-plane")


@dataclass
class Rect:
    """Axis-aligned rectangle ``x[axis] == coord`` spanning ``lo..hi`` in the
    other two axes (in increasing axis order), facing ``sign`` along ``axis``."""
    axis: int
    coord: float
    lo: tuple
    hi: tuple
    sign: int
    cls: int


@dataclass
class Scene:
    spec: SceneSpec
    mesh: Mesh
    class_names: tuple
    gt_labels: np.ndarray
    views: list
    gt_images: list
    rects: list = field(repr=False, default_factory=list)


def _ring(z, outer, inner, sign, cls, center=(0.0, 0.0)):
    """Horizontal square annulus split in 3x3 blocks (center block omitted)."""
    cx, cy = center
    xs = [cx - outer, cx - inner, cx + inner, cx + outer]
    ys = [cy - outer, cy - inner, cy + inner, cy + outer]
    out = []
    for i in range(3):
        for j in range(3):
            if i == 1 and j == 1:
                continue
            out.append(Rect(2, z, (xs[i], ys[j]), (xs[i + 1], ys[j + 1]), sign, cls))
    return out


def _box_sides(half, z0, z1, classes):
    """Four outward walls of a box centred on the z axis; ``classes`` = (x, y)."""
    cx, cy = classes
    return [
        Rect(0, half, (-half, z0), (half, z1), +1, cx),
        Rect(0, -half, (-half, z0), (half, z1), -1, cx),
        Rect(1, half, (-half, z0), (half, z1), +1, cy),
        Rect(1, -half, (-half, z0), (half, z1), -1, cy),
    ]


def scene_rects(kind, n_classes=2):
    if kind == "box-on-plane":
        if n_classes == 4:
            ground, xwall, ywall, top = 0, 1, 2, 3
        else:
            ground, xwall, ywall, top = 0, 1, 1, 0
        return (_ring(0.0, 3.0, 1.0, +1, ground) + _box_sides(1.0, 0.0, 1.0, (xwall, ywall))
                + [Rect(2, 1.0, (-1.0, -1.0), (1.0, 1.0), +1, top)])
    if kind == "step-pyramid":
        # whole-unit dimensions keep the tiers welded at any integer resolution
        return (_ring(0.0, 4.0, 2.0, +1, 0) + _box_sides(2.0, 0.0, 1.0, (1, 1))
                + _ring(1.0, 2.0, 1.0, +1, 0) + _box_sides(1.0, 1.0, 2.0, (1, 1))
                + [Rect(2, 2.0, (-1.0, -1.0), (1.0, 1.0), +1, 0)])
    if kind == "fig2-toy":
        return [
            Rect(2, 1.0, (-2.5, -1.5), (-1.0, 1.5), +1, 0),
            Rect(0, -1.0, (-1.5, 0.0), (1.5, 1.0), +1, 1),
            Rect(2, 0.0, (-1.0, -1.5), (1.0, 1.5), +1, 0),
            Rect(0, 1.0, (-1.5, 0.0), (1.5, 1.0), -1, 1),
            Rect(2, 1.0, (1.0, -1.5), (2.5, 1.5), +1, 0),
        ]
    raise ValueError(f"unknown scene kind {kind!r}")


def _triangulate(rect, resolution):
    a, b = [d for d in range(3) if d != rect.axis]
    nu = max(1, int(round((rect.hi[0] - rect.lo[0]) * resolution)))
    nv = max(1, int(round((rect.hi[1] - rect.lo[1]) * resolution)))
    u = np.linspace(rect.lo[0], rect.hi[0], nu + 1)
    v = np.linspace(rect.lo[1], rect.hi[1], nv + 1)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    verts = np.zeros((uu.size, 3))
    verts[:, rect.axis] = rect.coord
    verts[:, a] = uu.ravel()
    verts[:, b] = vv.ravel()
    idx = np.arange(uu.size).reshape(nu + 1, nv + 1)
    p00, p10 = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    p01, p11 = idx[:-1, 1:].ravel(), idx[1:, 1:].ravel()
    tris = np.concatenate([np.stack([p00, p10, p11], 1), np.stack([p00, p11, p01], 1)])
    # (p10 - p00) x (p01 - p00) points along +axis iff (a, b, axis) is cyclic
    positive = (a, b, rect.axis) in ((0, 1, 2), (1, 2, 0), (2, 0, 1))
    if positive != (rect.sign > 0):
        tris = tris[:, ::-1]
    return verts, tris


def build_mesh(rects, resolution):
    """Weld the triangulated rectangles; returns ``(mesh, facet classes)``."""
    verts, tris, cls = [], [], []
    offset = 0
    for r in rects:
        v, t = _triangulate(r, resolution)
        verts.append(v)
        tris.append(t + offset)
        cls.append(np.full(len(t), r.cls))
        offset += len(v)
    verts = np.concatenate(verts)
    key = np.round(verts, 9)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    faces = inv.ravel()[np.concatenate(tris)]
    return Mesh(uniq, faces, drop_degenerate=False), np.concatenate(cls).astype(np.int64)


def normal_rule_labels(mesh, threshold=0.7):
    """Class 0 for up/down-facing facets (|n_z| > threshold), else class 1."""
    return np.where(np.abs(mesh.facet_normals[:, 2]) > threshold, 0, 1).astype(np.int64)


def raycast_rects(rects, view: CameraView):
    """Ground-truth class image by casting one ray per pixel center at the rectangles."""
    h, w = view.height, view.width
    rows, cols = np.mgrid[0:h, 0:w]
    pix = np.stack([cols.ravel(), rows.ravel(), np.ones(h * w)], axis=1).astype(np.float64)
    m = view.projection[:, :3]
    origin = view.center()
    dirs = np.linalg.solve(m, pix.T).T          # scaled so homogeneous depth == t
    best_t = np.full(h * w, np.inf)
    best_c = np.full(h * w, VOID, dtype=np.int64)
    for r in rects:
        a, b = [d for d in range(3) if d != r.axis]
        d = dirs[:, r.axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (r.coord - origin[r.axis]) / d
        pa = origin[a] + t * dirs[:, a]
        pb = origin[b] + t * dirs[:, b]
        hit = ((t > 0) & (pa >= r.lo[0]) & (pa <= r.hi[0]) & (pb >= r.lo[1]) & (pb <= r.hi[1])
               & (t < best_t))
        best_t[hit] = t[hit]
        best_c[hit] = r.cls
    return best_c.reshape(h, w).astype(np.uint8)


def orbit_cameras(mesh, n_views, width, height, elevation_deg=40.0, rng=None, margin=4):
    """Cameras on a ring around the scene, each framing every mesh vertex."""
    lo, hi = mesh.bounds()
    center = 0.5 * (lo + hi)
    radius = 0.5 * np.linalg.norm(hi - lo)
    views = []
    for i in range(n_views):
        az = 2 * np.pi * i / n_views + 0.3
        el = np.radians(elevation_deg)
        if rng is not None:
            az += rng.uniform(-0.15, 0.15)
            el += rng.uniform(-0.08, 0.08)
        eye = center + 2.5 * radius * np.array([np.cos(el) * np.cos(az),
                                                np.cos(el) * np.sin(az), np.sin(el)])
        p1 = look_at(eye, center, (0, 0, 1), 1.0, width, height, principal=(0.0, 0.0))
        uv, _ = CameraView(p1, width, height).project(mesh.vertices)
        f = min((width / 2 - margin) / np.abs(uv[:, 0]).max(),
                (height / 2 - margin) / np.abs(uv[:, 1]).max())
        views.append(CameraView(look_at(eye, center, (0, 0, 1), f, width, height), width, height,
                                id=i))
    return views


def noisy_likelihoods(gt, n_classes, p_flip, tau, rng, block=1):
    """Softened one-hot likelihoods of ``gt`` with random label flips.

    A flipped pixel (or ``block`` x ``block`` tile) moves its winning mass to
    a uniformly drawn wrong class. Void pixels get all-zero likelihoods.
    Returns ``(likelihoods, noisy_label_image)``.
    """
    h, w = gt.shape
    bh, bw = -(-h // block), -(-w // block)
    flip = rng.random((bh, bw)) < p_flip
    shift = rng.integers(1, n_classes, size=(bh, bw)) if n_classes > 1 else np.zeros((bh, bw), int)
    flip = np.kron(flip, np.ones((block, block), bool))[:h, :w]
    shift = np.kron(shift, np.ones((block, block), int))[:h, :w]
    valid = gt != VOID
    label = gt.astype(np.int64)
    label[valid & flip] = (label[valid & flip] + shift[valid & flip]) % n_classes
    lik = np.full((n_classes, h, w), tau / max(1, n_classes - 1))
    for k in range(n_classes):
        lik[k][label == k] = 1.0 - tau
    lik[:, ~valid] = 0.0
    return lik, np.where(valid, label, VOID)


def generate(spec: SceneSpec, out_dir=None) -> Scene:
    """Build the scene in memory and, with ``out_dir``, write all artifacts."""
    rng = np.random.default_rng(spec.seed)
    rects = scene_rects(spec.kind, spec.n_classes)
    mesh, gt_labels = build_mesh(rects, spec.resolution)
    names = (FOUR_CLASS if spec.n_classes == 4 else
             TOY_CLASSES if spec.kind == "fig2-toy" else TWO_CLASS)
    views = orbit_cameras(mesh, spec.n_views, spec.width, spec.height, spec.elevation_deg, rng)
    gts, out_views = [], []
    for v in views:
        gt = raycast_rects(rects, v)
        lik, _ = noisy_likelihoods(gt, spec.n_classes, spec.p_flip, spec.tau, rng, spec.noise_block)
        lik = np.rint(lik * 65535) / 65535      # same values the PGM round trip gives
        out_views.append(CameraView(v.projection, v.width, v.height, lik, v.id))
        gts.append(gt)
    scene = Scene(spec, mesh, names, gt_labels, out_views, gts, rects)
    if out_dir is not None:
        write_scene(scene, out_dir)
    return scene


def write_scene(scene: Scene, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_ply(out / "mesh.ply", scene.mesh)
    save_ply(out / "gt_mesh.ply", scene.mesh, scene.gt_labels)
    write_cameras(out / "cameras.txt", scene.views)
    for v, gt in zip(scene.views, scene.gt_images):
        save_likelihoods(out / "likelihoods", v.id, v.likelihoods)
        save_gt(out / "gt", v.id, gt)
    np.savetxt(out / "gt_labels.txt", scene.gt_labels, fmt="%d")
    (out / "scene.cfg").write_text(f"classes={','.join(scene.class_names)}\n")
    manifest = {
        "spec": asdict(scene.spec),
        "classes": list(scene.class_names),
        "n_facets": scene.mesh.n_facets,
        "mesh": "mesh.ply",
        "gt_mesh": "gt_mesh.ply",
        "cameras": "cameras.txt",
        "likelihoods": "likelihoods",
        "gt": "gt",
        "gt_labels": "gt_labels.txt",
        "config": "scene.cfg",
        "files": sorted(str(p.relative_to(out)) for p in out.rglob("*")
                        if p.is_file() and p.name != "manifest.json"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def flip_coarse_side(mesh, labels, fraction=0.1, side="left", seed=0):
    """Adversarially corrupt a coarse labeling on one half of the scene.

    ``fraction`` of the facets whose centroid lies on ``side`` (x below or
    above the scene center) are flipped, choosing first the side-class
    facets closest to the top of their wall so the damage forms one band.
    """
    labels = np.array(labels, dtype=np.int64)
    c = mesh.facet_centroids
    lo, hi = mesh.bounds()
    mid = 0.5 * (lo[0] + hi[0])
    on_side = c[:, 0] < mid if side == "left" else c[:, 0] >= mid
    idx = np.nonzero(on_side)[0]
    k = int(round(fraction * len(idx)))
    # walls (class 1) sorted by height, highest first; then anything else
    rng = np.random.default_rng(seed)
    tiebreak = rng.random(len(idx))
    order = np.lexsort((tiebreak, -c[idx, 2], labels[idx] != 1))
    chosen = idx[order[:k]]
    labels[chosen] = 1 - labels[chosen]
    return labels, chosen
