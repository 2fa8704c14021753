"""Data, smoothness and discontinuity terms of the facet labeling energy."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

LIKELIHOOD_FLOOR = 1e-6
DISC_SIGMA = np.pi / 2


def data_term(mesh, views, vis, classes, norm="normalized"):
    """Unary table (F, L) of negative log image evidence per facet and label.

    Each facet pools the likelihoods of every pixel it owns across views.
    With ``norm="normalized"`` the pooled sum is divided by the facet's
    visible pixel count (an average likelihood); ``norm="raw"`` keeps the
    bare sum. Facets seen by no view get the uniform cost ``log(L)``.
    """
    n_classes = classes if isinstance(classes, (int, np.integer)) else len(classes)
    if len(views) != len(vis):
        raise ValueError(f"{len(views)} views but {len(vis)} visibility maps")
    if norm not in ("normalized", "raw"):
        raise ValueError(f"unknown data normalization {norm!r}")
    n = mesh.n_facets
    sums = np.zeros((n, n_classes))
    pixels = np.zeros(n)
    for view, vm in zip(views, vis):
        if view.likelihoods is None or len(view.likelihoods) != n_classes:
            raise ValueError(f"view {view.id}: expected {n_classes} likelihood rasters")
        own = vm.owner.ravel()
        sel = own >= 0
        own = own[sel]
        pixels += np.bincount(own, minlength=n)
        for k in range(n_classes):
            sums[:, k] += np.bincount(own, weights=view.likelihoods[k].ravel()[sel], minlength=n)

    seen = pixels > 0
    if norm == "normalized":
        sums[seen] /= pixels[seen, None]
    table = np.empty((n, n_classes))
    table[seen] = -np.log(np.maximum(LIKELIHOOD_FLOOR, sums[seen]))
    table[~seen] = np.log(n_classes)
    return table


def smooth_term(lf, lh):
    return 1.0 if lf != lh else 0.0


def normal_angle(n1, n2):
    """Angle in [0, pi] between unit vectors (broadcasts over leading axes)."""
    dot = np.clip(np.sum(np.asarray(n1) * np.asarray(n2), axis=-1), -1.0, 1.0)
    return np.arccos(dot)


def disc_weight(n1, n2):
    """Gaussian weight exp(-theta^2 / (2 (pi/2)^2)) of the normal angle theta."""
    theta = normal_angle(n1, n2)
    return np.exp(-theta ** 2 / (2 * DISC_SIGMA ** 2))


@dataclass
class EdgeSet:
    """Pairwise edges over adjacent facets, one per adjacency pair."""
    pairs: np.ndarray       # (E, 2), f < h
    theta: np.ndarray       # (E,) angle between facet normals
    weight_disc: np.ndarray  # (E,) in [exp(-2), 1]

    def __len__(self):
        return len(self.pairs)


def build_edges(mesh) -> EdgeSet:
    pairs = mesh.adjacency
    n = mesh.facet_normals
    theta = normal_angle(n[pairs[:, 0]], n[pairs[:, 1]])
    return EdgeSet(pairs, theta, np.exp(-theta ** 2 / (2 * DISC_SIGMA ** 2)))


def dump_unary_csv(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["facet", "class", "energy"])
        for f, row in enumerate(table):
            for k, e in enumerate(row):
                w.writerow([f, k, repr(float(e))])


def dump_edges_csv(path, edges: EdgeSet):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f", "h", "theta", "weight_disc"])
        for (f, h), t, wd in zip(edges.pairs, edges.theta, edges.weight_disc):
            w.writerow([int(f), int(h), repr(float(t)), repr(float(wd))])
