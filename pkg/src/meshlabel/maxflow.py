"""Exact s-t minimum cut by Dinic's blocking-flow algorithm.

Capacities are floats; the implementation is pure Python over flat edge
arrays, which is fast enough for expansion graphs of a few 10^4 nodes.
"""

from __future__ import annotations

from collections import deque

import numpy as np


class FlowGraph:
    """Capacitated directed graph with implicit source and sink terminals.

    Nodes are ``0 .. n-1``. ``add_edge(u, v, cap, rev_cap)`` adds the arc
    u->v (and v->u with ``rev_cap``); ``add_tedge(u, cap_source, cap_sink)``
    adds terminal arcs source->u and u->sink. After ``maxflow()``,
    ``source_side()`` gives the source set of a minimum cut.
    """

    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.source = n_nodes
        self.sink = n_nodes + 1
        self._to = []
        self._cap = []
        self._adj = [[] for _ in range(n_nodes + 2)]
        self._tsrc = [0.0] * n_nodes
        self._tsnk = [0.0] * n_nodes
        self._flow = None
        self._cut = None

    def add_edge(self, u, v, cap, rev_cap=0.0):
        if cap < 0 or rev_cap < 0:
            raise ValueError("capacities must be non-negative")
        e = len(self._to)
        self._to += [v, u]
        self._cap += [float(cap), float(rev_cap)]
        self._adj[u].append(e)
        self._adj[v].append(e + 1)

    def add_edges(self, us, vs, caps, rev_caps):
        for u, v, c, r in zip(np.asarray(us).tolist(), np.asarray(vs).tolist(),
                              np.asarray(caps, float).tolist(),
                              np.asarray(rev_caps, float).tolist()):
            self.add_edge(u, v, c, r)

    def add_tedge(self, u, cap_source, cap_sink):
        if cap_source < 0 or cap_sink < 0:
            raise ValueError("capacities must be non-negative")
        self._tsrc[u] += float(cap_source)
        self._tsnk[u] += float(cap_sink)

    def add_tedges(self, nodes, cap_source, cap_sink):
        cs = np.asarray(cap_source, float)
        ck = np.asarray(cap_sink, float)
        if (cs < 0).any() or (ck < 0).any():
            raise ValueError("capacities must be non-negative")
        for u, a, b in zip(np.asarray(nodes).tolist(), cs.tolist(), ck.tolist()):
            self._tsrc[u] += a
            self._tsnk[u] += b

    def maxflow(self) -> float:
        to, cap, adj = self._to, self._cap, self._adj
        s, t = self.source, self.sink
        flow = 0.0
        # route s->u->t directly, then wire what is left as terminal arcs
        for u in range(self.n):
            a, b = self._tsrc[u], self._tsnk[u]
            m = a if a < b else b
            flow += m
            if a - m > 0:
                e = len(to)
                to += [u, s]
                cap += [a - m, 0.0]
                adj[s].append(e)
                adj[u].append(e + 1)
            if b - m > 0:
                e = len(to)
                to += [t, u]
                cap += [b - m, 0.0]
                adj[u].append(e)
                adj[t].append(e + 1)

        n_all = self.n + 2
        while True:
            level = [-1] * n_all
            level[s] = 0
            q = deque([s])
            while q:
                u = q.popleft()
                for e in adj[u]:
                    v = to[e]
                    if level[v] < 0 and cap[e] > 0:
                        level[v] = level[u] + 1
                        q.append(v)
            if level[t] < 0:
                break
            it = [0] * n_all
            while True:
                pushed = self._augment(level, it)
                if pushed <= 0:
                    break
                flow += pushed
        self._flow = flow
        self._cut = level  # reachable from s in the final residual graph
        return flow

    def _augment(self, level, it):
        """Find one augmenting path in the level graph (iterative DFS)."""
        to, cap, adj = self._to, self._cap, self._adj
        s, t = self.source, self.sink
        path = []
        u = s
        while True:
            if u == t:
                f = min(cap[e] for e in path)
                for e in path:
                    cap[e] -= f
                    cap[e ^ 1] += f
                return f
            au = adj[u]
            i = it[u]
            while i < len(au):
                e = au[i]
                v = to[e]
                if cap[e] > 0 and level[v] == level[u] + 1:
                    break
                i += 1
            it[u] = i
            if i < len(au):
                path.append(e)
                u = v
            else:
                if u == s:
                    return 0.0
                level[u] = -1  # dead end, prune
                e = path.pop()
                u = to[e ^ 1]
                it[u] += 1

    def source_side(self) -> np.ndarray:
        """Boolean mask over the ``n`` nodes: True where the node is on the source side."""
        if self._cut is None:
            raise RuntimeError("call maxflow() first")
        return np.array([lv >= 0 for lv in self._cut[:self.n]], dtype=bool)


def min_cut(graph: FlowGraph):
    """Return ``(cut value, source-side mask)`` of an exact minimum s-t cut."""
    value = graph.maxflow()
    return value, graph.source_side()
