"""Local per-class histograms of facet-normal directions.

Space is cut into a lattice of axis-aligned cubes. Inside every cube, the
facets of each coarse class contribute their normal's azimuth and
inclination to two 1-D histograms. A facet is then scored for class ``l`` by
how common its own direction is among class-``l`` facets of its cube:

    E_norm(f, l) = -log(hist_azim[k, l](az(n_f)) * hist_incl[k, l](inc(n_f)))

Histograms are mixed with a uniform floor (every bin >= ``eps``) so the log
stays finite; a (cube, class) pair with no facets is exactly uniform.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_BINS_AZIM = 16
DEFAULT_BINS_INCL = 8
DEFAULT_EPS = 1e-3


def to_spherical(n):
    """Azimuth in [-pi, pi) and inclination in [0, pi] of unit vectors.

    Works on a single 3-vector or an (N, 3) array. Azimuth is
    ``atan2(y, x)``; at the poles it is defined as 0.
    """
    n = np.asarray(n, dtype=np.float64)
    x, y, z = n[..., 0], n[..., 1], n[..., 2]
    az = np.arctan2(y, x)
    az = np.where((x == 0) & (y == 0), 0.0, az)
    az = np.where(az >= np.pi, -np.pi, az)
    inc = np.arccos(np.clip(z, -1.0, 1.0))
    if az.ndim == 0:
        return float(az), float(inc)
    return az, inc


def from_spherical(az, inc):
    az, inc = np.asarray(az, dtype=np.float64), np.asarray(inc, dtype=np.float64)
    s = np.sin(inc)
    return np.stack([s * np.cos(az), s * np.sin(az), np.cos(inc)], axis=-1)


def azimuth_bin(az, bins):
    b = np.floor((np.asarray(az) + np.pi) / (2 * np.pi) * bins).astype(np.int64)
    return np.clip(b, 0, bins - 1)


def inclination_bin(inc, bins):
    b = np.floor(np.asarray(inc) / np.pi * bins).astype(np.int64)
    return np.clip(b, 0, bins - 1)


@dataclass
class HistogramGrid:
    """Lattice of per-class azimuth/inclination histograms.

    Only occupied cells are stored; ``cell_ids`` holds their flat (C-order)
    indices, sorted, and ``hist_azim``/``hist_incl`` their histograms with
    shape (cells, classes, bins). Every other cell is uniform.
    """
    origin: np.ndarray
    cell_size: float
    dims: tuple[int, int, int]
    n_classes: int
    bins_azim: int
    bins_incl: int
    eps: float
    cell_ids: np.ndarray
    hist_azim: np.ndarray
    hist_incl: np.ndarray

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.dims))

    def cell_of(self, points):
        """Integer lattice coordinates (N, 3) of points, clamped to the grid."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if math.isinf(self.cell_size):
            return np.zeros((len(p), 3), dtype=np.int64)
        ijk = np.floor((p - self.origin) / self.cell_size).astype(np.int64)
        return np.clip(ijk, 0, np.asarray(self.dims) - 1)

    def flat_cell(self, points):
        return np.ravel_multi_index(self.cell_of(points).T, self.dims)

    def histograms(self, flat_cell):
        """(hist_azim, hist_incl) for given flat cells; uniform when unoccupied."""
        flat_cell = np.atleast_1d(flat_cell)
        ha = np.full((len(flat_cell), self.n_classes, self.bins_azim), 1.0 / self.bins_azim)
        hi = np.full((len(flat_cell), self.n_classes, self.bins_incl), 1.0 / self.bins_incl)
        if len(self.cell_ids) == 0:
            return ha, hi
        pos = np.searchsorted(self.cell_ids, flat_cell)
        pos = np.minimum(pos, len(self.cell_ids) - 1)
        hit = self.cell_ids[pos] == flat_cell
        ha[hit] = self.hist_azim[pos[hit]]
        hi[hit] = self.hist_incl[pos[hit]]
        return ha, hi


def _smoothed(counts, eps):
    """Normalize counts along the last axis and mix with a uniform floor."""
    bins = counts.shape[-1]
    total = counts.sum(axis=-1, keepdims=True)
    p = np.where(total > 0, counts / np.where(total > 0, total, 1.0), 1.0 / bins)
    return eps + (1.0 - bins * eps) * p


def build_grid(mesh, coarse, cell_size, classes, bins_azim=DEFAULT_BINS_AZIM,
               bins_incl=DEFAULT_BINS_INCL, eps=DEFAULT_EPS, area_weighted=False):
    """Accumulate per-cell, per-class normal histograms from a coarse labeling.

    The lattice starts at the mesh bounding-box minimum and has
    ``ceil(extent / cell_size)`` cubes per axis (at least one). Pass
    ``cell_size=math.inf`` for a single cell spanning the whole mesh.
    """
    if not cell_size > 0:
        raise ValueError(f"cell_size must be positive, got {cell_size}")
    n_classes = classes if isinstance(classes, (int, np.integer)) else len(classes)
    for b in (bins_azim, bins_incl):
        if b < 1 or b * eps >= 1:
            raise ValueError(f"need bins >= 1 and bins * eps < 1 (bins={b}, eps={eps})")
    coarse = np.asarray(coarse, dtype=np.int64)
    if coarse.shape != (mesh.n_facets,):
        raise ValueError("coarse labeling must cover every facet")
    if coarse.size and (coarse.min() < 0 or coarse.max() >= n_classes):
        raise ValueError("coarse label out of range")

    lo, hi = mesh.bounds()
    extent = hi - lo
    if math.isinf(cell_size):
        dims = (1, 1, 1)
    else:
        dims = tuple(int(max(1, math.ceil(e / cell_size))) for e in extent)
    grid = HistogramGrid(lo, float(cell_size), dims, n_classes, bins_azim, bins_incl, eps,
                         np.zeros(0, np.int64), np.zeros((0, n_classes, bins_azim)),
                         np.zeros((0, n_classes, bins_incl)))

    flat = grid.flat_cell(mesh.facet_centroids)
    cell_ids, row = np.unique(flat, return_inverse=True)
    az, inc = to_spherical(mesh.facet_normals)
    w = mesh.facet_areas if area_weighted else None
    n_rows = len(cell_ids)

    def counts(bin_idx, bins):
        key = (row * n_classes + coarse) * bins + bin_idx
        c = np.bincount(key, weights=w, minlength=n_rows * n_classes * bins)
        return c.reshape(n_rows, n_classes, bins)

    grid.cell_ids = cell_ids
    grid.hist_azim = _smoothed(counts(azimuth_bin(az, bins_azim), bins_azim), eps)
    grid.hist_incl = _smoothed(counts(inclination_bin(inc, bins_incl), bins_incl), eps)
    return grid


def norm_energy(grid: HistogramGrid, centroid, n, l):
    """Orientation cost of a facet at ``centroid`` with normal ``n`` for class ``l``."""
    ha, hi = grid.histograms(grid.flat_cell(centroid))
    az, inc = to_spherical(n)
    a = ha[0, l, azimuth_bin(az, grid.bins_azim)]
    b = hi[0, l, inclination_bin(inc, grid.bins_incl)]
    return float(-np.log(a * b))


def fill_unary(grid: HistogramGrid, mesh):
    """Table (F, L) of orientation costs for every facet and class."""
    ha, hi = grid.histograms(grid.flat_cell(mesh.facet_centroids))
    az, inc = to_spherical(mesh.facet_normals)
    f = np.arange(mesh.n_facets)
    a = ha[f, :, azimuth_bin(az, grid.bins_azim)]
    b = hi[f, :, inclination_bin(inc, grid.bins_incl)]
    return -np.log(a * b)


def dump_grid_csv(path, grid: HistogramGrid):
    """Write occupied-cell histograms as (i, j, k, class, kind, bin, value) rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "k", "class", "bin_kind", "bin_index", "value"])
        for r, cid in enumerate(grid.cell_ids):
            i, j, k = np.unravel_index(cid, grid.dims)
            for c in range(grid.n_classes):
                for kind, h in (("azim", grid.hist_azim), ("incl", grid.hist_incl)):
                    for b, v in enumerate(h[r, c]):
                        w.writerow([int(i), int(j), int(k), c, kind, b, repr(float(v))])
