import numpy as np
import pytest

from meshlabel import camera, synth
from meshlabel.camera import (BACKGROUND, VOID, CameraView, facet_footprint, look_at, rasterize,
                              render_labels)
from meshlabel.mesh import Mesh
from meshlabel.pgm import read_pgm, write_pgm
from oracles import raycast_owner


def ortho_view(width, height, scale=1.0):
    """Affine camera: pixel (c, r) = scale * (x, y), depth w = 1 everywhere."""
    p = np.array([[scale, 0, 0, 0], [0, scale, 0, 0], [0, 0, 0, 1.0]])
    return CameraView(p, width, height)


def plane_mesh(x0, x1, y0, y1, z=0.0):
    v = [[x0, y0, z], [x1, y0, z], [x1, y1, z], [x0, y1, z]]
    return Mesh(v, [[0, 1, 2], [0, 2, 3]])


def test_full_frustum_facet_owns_every_pixel():
    m = Mesh([[-1, -1, 0], [20, -1, 0], [-1, 20, 0]], [[0, 1, 2]])
    vis = rasterize(m, ortho_view(4, 4))
    assert (vis.owner == 0).all()
    assert len(facet_footprint(vis, 0)) == 16


def test_nearer_facet_wins():
    # pinhole camera at the origin looking down +z
    p = np.array([[10, 0, 4.5, 0], [0, 10, 4.5, 0], [0, 0, 1, 0.0]])
    view = CameraView(p, 10, 10)
    near = [[-5, -5, 1], [5, -5, 1], [0, 5, 1]]
    far = [[-10, -10, 2], [10, -10, 2], [0, 10, 2]]
    for order in (0, 1):
        tris = [far, near] if order == 0 else [near, far]
        m = Mesh(np.array(tris[0] + tris[1], float), [[0, 1, 2], [3, 4, 5]])
        vis = rasterize(m, view)
        near_id = 1 - order
        both = vis.owner >= 0
        assert (vis.owner[both] == near_id).sum() > 0
        np.testing.assert_allclose(vis.depth[vis.owner == near_id], 1.0)
        assert not (vis.owner == 1 - near_id).any()


def test_depth_tie_goes_to_lowest_index():
    m = Mesh([[-1, -1, 0], [20, -1, 0], [-1, 20, 0], [-1, -1, 0.0], [20, -1, 0], [-1, 20, 0]],
             [[0, 1, 2], [3, 4, 5]], drop_degenerate=False)
    vis = rasterize(m, ortho_view(4, 4))
    assert (vis.owner == 0).all()


def test_top_left_rule_partitions_shared_edge():
    # the square's diagonal passes exactly through pixel centers
    m = plane_mesh(0, 4, 0, 4)
    vis = rasterize(m, ortho_view(6, 6))
    owned = vis.owner >= 0
    # pixel centers on the closed square [0, 4]^2 minus the right/bottom edges
    assert owned.sum() == 16
    assert set(np.unique(vis.owner[owned])) == {0, 1}
    # every diagonal pixel owned exactly once
    diag = [vis.owner[k, k] for k in range(4)]
    assert all(d in (0, 1) for d in diag)


def test_adjacent_squares_tile_without_gaps_or_overlap():
    a = plane_mesh(0, 3, 0, 5)
    b = plane_mesh(3, 7, 0, 5)
    m = Mesh(np.vstack([a.vertices, b.vertices]), np.vstack([a.facets, b.facets + 4]))
    vis = rasterize(m, ortho_view(9, 7))
    counts = vis.pixel_counts(m.n_facets)
    assert counts.sum() == 7 * 5


def test_behind_camera_culled():
    p = np.array([[10, 0, 4.5, 0], [0, 10, 4.5, 0], [0, 0, 1, 0.0]])
    m = Mesh([[-5, -5, -1], [5, -5, -1], [0, 5, -1]], [[0, 1, 2]])
    vis = rasterize(m, CameraView(p, 10, 10))
    assert (vis.owner == BACKGROUND).all()
    assert np.isinf(vis.depth).all()


def test_near_plane_clipping_matches_oracle(box_scene):
    m = box_scene.mesh
    view = CameraView(look_at([0.3, -2.0, 0.4], [0.0, 3.0, 0.2], [0, 0, 1], 30, 64, 48), 64, 48)
    h = np.c_[m.vertices, np.ones(m.n_vertices)] @ view.projection.T
    w = h[:, 2][m.facets]
    assert ((w.min(1) < 0) & (w.max(1) > 0)).any()
    assert (rasterize(m, view).owner == raycast_owner(m, view)).mean() >= 0.995


def test_box_scene_matches_oracle(box_scene):
    for v in box_scene.views[:2]:
        assert (rasterize(box_scene.mesh, v).owner == raycast_owner(box_scene.mesh, v)).mean() >= 0.995


def test_partition_property(box_scene):
    for v in box_scene.views:
        vis = rasterize(box_scene.mesh, v)
        sizes = sum(len(facet_footprint(vis, f)) for f in np.unique(vis.owner[vis.owner >= 0]))
        assert sizes + (vis.owner == BACKGROUND).sum() == v.width * v.height
        assert vis.pixel_counts(box_scene.mesh.n_facets).sum() == (vis.owner >= 0).sum()


def test_occluded_footprint_empty():
    p = np.array([[10, 0, 4.5, 0], [0, 10, 4.5, 0], [0, 0, 1, 0.0]])
    small = [[-0.1, -0.1, 5], [0.1, -0.1, 5], [0, 0.1, 5]]
    big = [[-5, -5, 1], [5, -5, 1], [0, 5, 1]]
    m = Mesh(np.array(small + big, float), [[0, 1, 2], [3, 4, 5]])
    vis = rasterize(m, CameraView(p, 10, 10))
    assert len(facet_footprint(vis, 0)) == 0


def test_render_labels(box_scene):
    m = box_scene.mesh
    v = box_scene.views[0]
    vis = rasterize(m, v)
    uni = render_labels(m, np.ones(m.n_facets, int), v, vis)
    assert (uni[vis.owner >= 0] == 1).all() and (uni[vis.owner < 0] == VOID).all()
    out = render_labels(m, box_scene.gt_labels, v, vis)
    owned = vis.owner >= 0
    np.testing.assert_array_equal(out[owned], box_scene.gt_labels[vis.owner[owned]])
    # generator's analytic raster
    gt = box_scene.gt_images[0]
    fg = gt != VOID
    assert (out[fg] == gt[fg]).mean() >= 0.99


def test_square_labels_split_on_diagonal(square):
    vis = rasterize(square, ortho_view(12, 12, scale=10.0))
    out = render_labels(square, np.array([0, 1]), ortho_view(12, 12, scale=10.0), vis)
    r, c = np.mgrid[0:12, 0:12]
    inside = out != VOID
    assert (out[inside & (c > r)] == 0).all()
    assert (out[inside & (c < r)] == 1).all()


def test_camera_file_round_trip(tmp_path, box_scene):
    p = tmp_path / "cams.txt"
    camera.write_cameras(p, box_scene.views)
    text = "# comment line\n" + p.read_text()
    p.write_text(text)
    views = camera.read_cameras(p)
    assert [v.id for v in views] == [v.id for v in box_scene.views]
    for a, b in zip(views, box_scene.views):
        np.testing.assert_array_equal(a.projection, b.projection)


def test_camera_file_errors(tmp_path):
    p = tmp_path / "c.txt"
    p.write_text("0 10 10\n1 2 3\n")
    with pytest.raises(ValueError, match="blocks of 15"):
        camera.read_cameras(p)
    p.write_text("0 10 10 " + " ".join(["0"] * 12))
    with pytest.raises(ValueError, match="rank"):
        camera.read_cameras(p)


def test_likelihood_validation():
    p = np.hstack([np.eye(3), np.zeros((3, 1))])
    with pytest.raises(ValueError):
        CameraView(p, 4, 3, np.zeros((2, 4, 3)))
    with pytest.raises(ValueError):
        CameraView(p, 4, 3, np.full((2, 3, 4), 1.5))


def test_likelihood_files_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    lik = np.rint(rng.random((3, 5, 7)) * 65535) / 65535
    camera.save_likelihoods(tmp_path, 4, lik)
    assert camera.count_classes(tmp_path) == 3
    assert (tmp_path / "view4_class2.pgm").exists()
    view = CameraView(np.hstack([np.eye(3), np.zeros((3, 1))]), 7, 5, id=4)
    got = camera.load_likelihoods(tmp_path, view, 3)
    np.testing.assert_array_equal(got.likelihoods, lik)
    with pytest.raises(FileNotFoundError, match="view4_class3"):
        camera.load_likelihoods(tmp_path, view, 4)


def test_pgm_round_trip(tmp_path):
    img = np.arange(12, dtype=np.uint16).reshape(3, 4) * 5000
    write_pgm(tmp_path / "a.pgm", img, maxval=65535)
    back, maxval = read_pgm(tmp_path / "a.pgm")
    assert maxval == 65535
    np.testing.assert_array_equal(back, img)
    small = np.array([[0, 255], [7, 9]], np.uint8)
    write_pgm(tmp_path / "b.pgm", small, maxval=255)
    back, maxval = read_pgm(tmp_path / "b.pgm")
    assert maxval == 255 and back.tolist() == small.tolist()
