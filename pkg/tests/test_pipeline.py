import math

import numpy as np
import pytest

from meshlabel import synth
from meshlabel.camera import CameraView
from meshlabel.energy import build_edges, data_term
from meshlabel.mrf import EnergyModel, solve, total_energy
from meshlabel.pipeline import (PipelineConfig, coarse_label, diameter_cell, full_label,
                                label_scene, parse_config_text, visibility)


@pytest.fixture(scope="module")
def noisy_box():
    s = synth.generate(synth.SceneSpec("box-on-plane", resolution=4, n_views=4, width=100,
                                       height=75, p_flip=0.2, seed=2))
    return s, visibility(s.mesh, s.views)


def test_noise_free_coarse_matches_gt():
    s = synth.generate(synth.SceneSpec("box-on-plane", resolution=3, n_views=6, width=120, height=90))
    vis = visibility(s.mesh, s.views)
    res = coarse_label(s.mesh, s.views, vis, 2, PipelineConfig())
    assert (res.labels == s.gt_labels).mean() >= 0.99


def test_uniform_likelihoods_give_constant_labels(toy_scene):
    views = [CameraView(v.projection, v.width, v.height, np.full_like(v.likelihoods, 0.5), v.id)
             for v in toy_scene.views]
    vis = visibility(toy_scene.mesh, views)
    res = coarse_label(toy_scene.mesh, views, vis, 2, PipelineConfig())
    assert len(np.unique(res.labels)) == 1


def test_coarse_beats_argmin_under_noise(noisy_box):
    s, vis = noisy_box
    unary = data_term(s.mesh, s.views, vis, 2)
    argmin_acc = (unary.argmin(1) == s.gt_labels).mean()
    coarse_acc = (coarse_label(s.mesh, s.views, vis, 2, PipelineConfig()).labels == s.gt_labels).mean()
    assert coarse_acc > argmin_acc


def test_baseline_is_single_stage_without_norm(noisy_box):
    s, vis = noisy_box
    cfg = PipelineConfig(mu1=0.0)
    res = full_label(s.mesh, s.views, vis, 2, cfg)
    assert res.mode == "baseline" and res.grid is None
    edges = build_edges(s.mesh)
    model = EnergyModel(data_term(s.mesh, s.views, vis, 2), edges.pairs,
                        cfg.mu2 * edges.weight_disc + cfg.mu3)
    np.testing.assert_array_equal(res.labels, solve(model).labels)


def test_zero_priors_equal_coarse(noisy_box):
    s, vis = noisy_box
    cfg = PipelineConfig(mu1=0.0, mu2=0.0)
    full = full_label(s.mesh, s.views, vis, 2, cfg)
    coarse = coarse_label(s.mesh, s.views, vis, 2, cfg)
    np.testing.assert_array_equal(full.labels, coarse.labels)


def test_report_energies_and_monotone(noisy_box):
    s, vis = noisy_box
    res = full_label(s.mesh, s.views, vis, 2, PipelineConfig())
    rep = res.report()
    assert rep["mode"] == "proposed"
    assert rep["final_energy"] <= rep["stage2_initial_energy"]
    assert rep["final_energy"] == pytest.approx(total_energy(res.model, res.labels), rel=1e-6)
    assert rep["coarse_energy"] == pytest.approx(total_energy(res.coarse_model, res.coarse_labels),
                                                 rel=1e-6)
    assert rep["label_changes"] == int((res.labels != res.coarse_labels).sum())
    assert {"data_term", "coarse", "histograms", "solve"} <= set(res.timings)
    assert "timings" not in rep


def test_fig2_recovery_from_seeded_errors():
    s = synth.generate(synth.SceneSpec("fig2-toy", resolution=6, n_views=6, width=160, height=120,
                                       p_flip=0.2, tau=0.3, noise_block=6, seed=0))
    vis = visibility(s.mesh, s.views)
    cfg = PipelineConfig(cell_size=2.5)
    good = coarse_label(s.mesh, s.views, vis, 2, cfg).labels
    bad, _ = synth.flip_coarse_side(s.mesh, good, 0.1, "left")
    res = full_label(s.mesh, s.views, vis, 2, cfg, coarse=bad)
    side, top = s.class_names.index("side"), s.class_names.index("top")
    walls = np.abs(s.mesh.facet_normals[:, 2]) < 0.5
    assert (res.labels[walls] == side).all()
    assert (res.labels[~walls] == top).all()


def test_deterministic_rerun(toy_scene):
    a = label_scene(toy_scene.mesh, toy_scene.views, 2, PipelineConfig())
    b = label_scene(toy_scene.mesh, toy_scene.views, 2, PipelineConfig())
    np.testing.assert_array_equal(a.labels, b.labels)
    assert a.report() == b.report()


def test_one_cell_equals_global(toy_scene):
    vis = visibility(toy_scene.mesh, toy_scene.views)
    a = full_label(toy_scene.mesh, toy_scene.views, vis, 2, PipelineConfig(cell_size=math.inf))
    b = full_label(toy_scene.mesh, toy_scene.views, vis, 2,
                   PipelineConfig(cell_size=diameter_cell(toy_scene.mesh)))
    assert b.grid.n_cells == 1
    np.testing.assert_array_equal(a.labels, b.labels)
    np.testing.assert_array_equal(a.model.unary, b.model.unary)


def test_config_parsing():
    text = "# weights\nmu1 = 0.5\ncell-size=2 # inline\nclasses = ground, wall\ndata_norm=raw\n"
    cfg = PipelineConfig.from_mapping(parse_config_text(text))
    assert cfg.mu1 == 0.5 and cfg.cell_size == 2.0 and cfg.classes == ("ground", "wall")
    assert cfg.data_norm == "raw" and cfg.mu3 == 1.0
    assert cfg.smoothing == 1.0 and cfg.replace(coarse_smoothing=0.3).smoothing == 0.3


@pytest.mark.parametrize("text", ["mu1 0.2", "nope=1", "mu1=-1", "cell_size=0", "data_norm=sum",
                                  "bins_azim=x"])
def test_config_errors(text):
    with pytest.raises(ValueError):
        PipelineConfig.from_mapping(parse_config_text(text))


def test_defaults():
    cfg = PipelineConfig()
    assert (cfg.mu1, cfg.mu2, cfg.mu3, cfg.bins_azim, cfg.bins_incl) == (0.2, 0.2, 1.0, 16, 8)
