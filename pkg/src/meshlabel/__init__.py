"""Semantic labeling of triangle meshes from per-view class likelihoods.

Facets get labels by minimizing a Potts MRF energy that combines image
evidence, local orientation statistics of a first-pass labeling, and a
normal-aware smoothness term.
"""

from .camera import CameraView, VisibilityMap, look_at, rasterize, render_labels
from .energy import EdgeSet, build_edges, data_term
from .evaluation import ConfusionMatrix, metrics
from .mesh import ClassSet, Mesh, PlyError, load_labeled_mesh, load_mesh, save_ply
from .mrf import EnergyModel, InvariantError, brute_force, expand, solve, total_energy
from .normal_prior import HistogramGrid, build_grid, fill_unary
from .pipeline import LabelingResult, PipelineConfig, coarse_label, full_label, label_scene

__version__ = "0.1.0"

__all__ = [
    "CameraView", "VisibilityMap", "look_at", "rasterize", "render_labels",
    "EdgeSet", "build_edges", "data_term",
    "ConfusionMatrix", "metrics",
    "ClassSet", "Mesh", "PlyError", "load_labeled_mesh", "load_mesh", "save_ply",
    "EnergyModel", "InvariantError", "brute_force", "expand", "solve", "total_energy",
    "HistogramGrid", "build_grid", "fill_unary",
    "LabelingResult", "PipelineConfig", "coarse_label", "full_label", "label_scene",
]
