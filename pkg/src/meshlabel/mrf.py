"""Weighted-Potts MRF over facets: energy, alpha-expansion and exact oracle."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .maxflow import FlowGraph

CONVERGENCE_TOL = 1e-9
BRUTE_FORCE_LIMIT = 2 ** 20


class InvariantError(RuntimeError):
    """An internal invariant of the optimizer was violated."""


@dataclass
class EnergyModel:
    """Unary costs plus weighted Potts edges: sum U[f, l_f] + sum w_fh [l_f != l_h]."""
    unary: np.ndarray
    pairs: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.unary = np.asarray(self.unary, dtype=np.float64)
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.unary.ndim != 2 or self.unary.shape[1] < 2:
            raise ValueError("unary table must be (facets, classes>=2)")
        if not np.isfinite(self.unary).all():
            raise ValueError("unary energies must be finite")
        if len(self.weights) != len(self.pairs):
            raise ValueError("one weight per edge required")
        if not np.isfinite(self.weights).all() or (self.weights < 0).any():
            raise InvariantError("Potts edge weights must be finite and non-negative")
        if len(self.pairs) and (self.pairs.min() < 0 or self.pairs.max() >= self.n_facets):
            raise ValueError("edge references a facet out of range")

    @property
    def n_facets(self) -> int:
        return self.unary.shape[0]

    @property
    def n_classes(self) -> int:
        return self.unary.shape[1]

    def check_labels(self, labels):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (self.n_facets,):
            raise ValueError(f"expected {self.n_facets} labels, got shape {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValueError("label out of range")
        return labels


def total_energy(model: EnergyModel, labels) -> float:
    labels = model.check_labels(labels)
    e = model.unary[np.arange(model.n_facets), labels].sum()
    if len(model.pairs):
        cut = labels[model.pairs[:, 0]] != labels[model.pairs[:, 1]]
        e += model.weights[cut].sum()
    return float(e)


def expand(model: EnergyModel, labels, alpha: int) -> np.ndarray:
    """Optimal alpha-expansion move from ``labels``.

    Every facet either keeps its label or switches to ``alpha``; the best
    such assignment is found with one minimum cut. Facets on the sink side
    switch. An edge whose two endpoints carry different non-alpha labels
    gets an auxiliary node.
    """
    labels = model.check_labels(labels)
    active = np.nonzero(labels != alpha)[0]
    if len(active) == 0:
        return labels.copy()
    node = np.full(model.n_facets, -1, dtype=np.int64)
    node[active] = np.arange(len(active))

    keep_cost = model.unary[active, labels[active]].copy()
    move_cost = model.unary[active, alpha].copy()

    f, h = model.pairs[:, 0], model.pairs[:, 1]
    w = model.weights
    af, ah = node[f] >= 0, node[h] >= 0
    # one endpoint already alpha: keeping the other costs w
    np.add.at(keep_cost, node[f[af & ~ah]], w[af & ~ah])
    np.add.at(keep_cost, node[h[ah & ~af]], w[ah & ~af])

    both = af & ah & (w > 0)
    same = both & (labels[f] == labels[h])
    diff = both & ~same
    n_aux = int(diff.sum())

    g = FlowGraph(len(active) + n_aux)
    g.add_tedges(np.arange(len(active)), move_cost, keep_cost)
    g.add_edges(node[f[same]], node[h[same]], w[same], w[same])
    aux = len(active) + np.arange(n_aux)
    g.add_edges(node[f[diff]], aux, w[diff], w[diff])
    g.add_edges(aux, node[h[diff]], w[diff], w[diff])
    g.add_tedges(aux, np.zeros(n_aux), w[diff])
    g.maxflow()

    switch = ~g.source_side()[:len(active)]
    out = labels.copy()
    out[active[switch]] = alpha
    return out


@dataclass
class SolveResult:
    labels: np.ndarray
    energy: float
    cycle_energies: list = field(default_factory=list)
    # (cycle, alpha, energy_before, energy_after, n_flipped) per move
    trace: list = field(default_factory=list)


def unary_argmin(model: EnergyModel) -> np.ndarray:
    return np.argmin(model.unary, axis=1).astype(np.int64)


def solve(model: EnergyModel, init=None, max_cycles=100) -> SolveResult:
    """Alpha-expansion over classes in ascending order until a full cycle
    lowers the energy by no more than ``CONVERGENCE_TOL``."""
    labels = unary_argmin(model) if init is None else model.check_labels(init).copy()
    energy = total_energy(model, labels)
    result = SolveResult(labels, energy, [energy])
    for cycle in range(max_cycles):
        start = energy
        for alpha in range(model.n_classes):
            cand = expand(model, labels, alpha)
            e_new = total_energy(model, cand)
            if e_new > energy + CONVERGENCE_TOL:
                raise InvariantError(f"expansion move raised energy {energy} -> {e_new}")
            flipped = 0
            if e_new < energy:
                flipped = int((cand != labels).sum())
                labels, e_prev, energy = cand, energy, e_new
            else:
                e_prev = energy
            result.trace.append((cycle, alpha, e_prev, energy, flipped))
        result.cycle_energies.append(energy)
        if start - energy <= CONVERGENCE_TOL:
            break
    result.labels, result.energy = labels, energy
    return result


def brute_force(model: EnergyModel) -> np.ndarray:
    """Global minimizer by enumeration; ties go to the lexicographically smallest."""
    n, k = model.n_facets, model.n_classes
    if k ** n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{k}^{n} assignments exceed the brute-force limit")
    best, best_e = None, np.inf
    chunk = 1 << 14
    combos = itertools.product(range(k), repeat=n)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64).reshape(-1, n)
        if len(block) == 0:
            break
        e = model.unary[np.arange(n), block].sum(axis=1)
        if len(model.pairs):
            cut = block[:, model.pairs[:, 0]] != block[:, model.pairs[:, 1]]
            e = e + cut.astype(np.float64) @ model.weights
        i = int(np.argmin(e))
        if e[i] < best_e:
            best, best_e = block[i].copy(), e[i]
    return best


def write_trace(path, result: SolveResult):
    with open(path, "w") as fh:
        fh.write("cycle alpha energy_before energy_after flipped\n")
        for cycle, alpha, eb, ea, nf in result.trace:
            fh.write(f"{cycle} {alpha} {eb!r} {ea!r} {nf}\n")
