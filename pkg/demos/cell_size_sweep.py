"""IoU as the histogram cell size grows.

Small cells have few facets each, so their histograms are noisy. Very large
cells mix every part of the scene together. Once a cell is as big as the
whole scene there is a single global histogram per class, and the result is
exactly that of a run with one global cell.

    python3 demos/cell_size_sweep.py
"""

import math

from meshlabel import cli, synth
from meshlabel.pipeline import PipelineConfig, diameter_cell, full_label, visibility
from meshlabel.evaluation import evaluate_views, metrics

scene = synth.generate(synth.SceneSpec("step-pyramid", resolution=6, n_views=6, width=160,
                                       height=120, p_flip=0.25, tau=0.2, seed=3))
mesh = scene.mesh
diam = diameter_cell(mesh)
values = [0.25, 0.5, 1.0, 2.0, 4.0, diam]

rows = cli.sweep(mesh, scene.views, scene.gt_images, 2, PipelineConfig(), "cell_size", values)
print(f"{mesh.n_facets} facets, scene diameter {diam:.3f}\n")
print("cell_size      IoU     final energy")
for r in rows:
    print(f"{r['value']:9.3f}  {r['iou']:.5f}  {r['final_energy']:14.4f}")

vis = visibility(mesh, scene.views)
glob = full_label(mesh, scene.views, vis, 2, PipelineConfig(cell_size=math.inf))
iou = metrics(evaluate_views(mesh, glob.labels, scene.views, scene.gt_images, 2, vis))["iou"]
print(f"\none global cell:  IoU {iou:.5f}, final energy {glob.solve.energy:.4f}")
print("matches the largest cell size:", abs(iou - rows[-1]["iou"]) <= 1e-9)
