"""Slow, independent reference implementations used only by the tests."""

import itertools

import numpy as np


def icosphere(subdivisions=2):
    """Unit icosphere; 20 * 4**subdivisions outward-wound faces."""
    t = (1 + 5 ** 0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return np.array(verts), np.array(faces)


def shared_edge_pairs(facets):
    """O(F^2) scan for facet pairs sharing exactly two vertices."""
    sets = [set(map(int, f)) for f in facets]
    out = []
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            if len(sets[i] & sets[j]) == 2:
                out.append((i, j))
    return out


def cut_by_enumeration(n, edges, source, sink):
    """Exact s-t min cut over all 2^(n-2) partitions; ``edges`` = (u, v, cap)."""
    others = [v for v in range(n) if v not in (source, sink)]
    best = np.inf
    for bits in itertools.product((0, 1), repeat=len(others)):
        side = np.zeros(n, bool)
        side[source] = True
        side[others] = np.array(bits, bool) if others else []
        value = sum(c for u, v, c in edges if side[u] and not side[v])
        best = min(best, value)
    return best


def best_expansion_energy(model, labels, alpha, energy_fn):
    """Minimum energy over every keep-or-switch-to-alpha assignment."""
    labels = np.asarray(labels)
    free = np.nonzero(labels != alpha)[0]
    best = energy_fn(model, labels)
    for bits in itertools.product((0, 1), repeat=len(free)):
        cand = labels.copy()
        cand[free[np.array(bits, bool)]] = alpha
        best = min(best, energy_fn(model, cand))
    return best


def raycast_owner(mesh, view, near=1e-6):
    """Per-pixel owning facet by Moller-Trumbore ray casting.

    The ray through pixel center (c, r) is C + t d with P(C + t d) = t (c, r, 1),
    so ``t`` equals the homogeneous depth. Ties within 1e-9 pick the lowest index.
    """
    m = view.projection[:, :3]
    center = view.center()
    minv = np.linalg.inv(m)
    rr, cc = np.mgrid[0:view.height, 0:view.width]
    pix = np.stack([cc.ravel(), rr.ravel(), np.ones(cc.size)], axis=1).astype(float)
    dirs = pix @ minv.T

    tri = mesh.vertices[mesh.facets]
    v0, e1, e2 = tri[:, 0], tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]
    owner = np.full(len(dirs), -1, dtype=np.int64)
    for start in range(0, len(dirs), 256):
        d = dirs[start:start + 256][:, None, :]
        p = np.cross(d, e2[None])
        det = np.einsum("ij,pij->pi", e1, p)
        ok = np.abs(det) > 1e-15
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        s = center - v0
        u = np.einsum("ij,pij->pi", s, p) * inv
        q = np.cross(s, e1)
        v = np.einsum("pxj,ij->pi", d, q) * inv
        t = np.einsum("ij,ij->i", e2, q)[None, :] * inv
        hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t >= near)
        t = np.where(hit, t, np.inf)
        front = t.min(axis=1)
        close = hit & (t <= front[:, None] + 1e-9)
        first = np.where(close.any(axis=1), close.argmax(axis=1), -1)
        owner[start:start + 256] = first
    return owner.reshape(view.height, view.width)


def energies_of(model, assignments):
    """Total energy of each row of ``assignments`` (vectorized)."""
    a = np.asarray(assignments, dtype=np.int64)
    e = model.unary[np.arange(model.n_facets), a].sum(axis=1)
    if len(model.pairs):
        cut = a[:, model.pairs[:, 0]] != a[:, model.pairs[:, 1]]
        e = e + cut.astype(float) @ model.weights
    return e


def best_expansion_energy_vec(model, labels, alpha):
    """Same as ``best_expansion_energy`` with all 2^k candidates evaluated at once."""
    labels = np.asarray(labels)
    free = np.nonzero(labels != alpha)[0]
    if len(free) == 0:
        return float(energies_of(model, labels[None])[0])
    bits = np.array(list(itertools.product((0, 1), repeat=len(free))), dtype=bool)
    cand = np.repeat(labels[None], len(bits), axis=0)
    cand[:, free] = np.where(bits, alpha, labels[free])
    return float(energies_of(model, cand).min())
