import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from meshlabel import Mesh, synth  # noqa: E402


def write_ascii_ply(path, vertices, faces, extra_face_lines=None):
    lines = ["ply", "format ascii 1.0", f"element vertex {len(vertices)}",
             "property float x", "property float y", "property float z",
             f"element face {len(faces) if faces is not None else len(extra_face_lines)}", "property list uchar int vertex_indices",
             "end_header"]
    lines += [" ".join(str(c) for c in v) for v in vertices]
    lines += extra_face_lines if extra_face_lines is not None else \
        [" ".join(str(x) for x in [len(f), *f]) for f in faces]
    Path(path).write_text("\n".join(lines) + "\n")
    return path


_CRITERIA = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _CRITERIA.append(("PASS" if rep.passed else "FAIL", marker.args[0], detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for status, name, detail in _CRITERIA:
        terminalreporter.write_line(f"{status}  {name}" + (f"  ({detail})" if detail else ""))


@pytest.fixture
def square():
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float)
    return Mesh(v, [[0, 1, 2], [0, 2, 3]])


@pytest.fixture
def tetrahedron():
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float)
    return Mesh(v, [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])


@pytest.fixture(scope="session")
def toy_scene():
    return synth.generate(synth.SceneSpec("fig2-toy", resolution=3, n_views=4, width=80, height=60,
                                          p_flip=0.1, tau=0.2, seed=3))


@pytest.fixture(scope="session")
def box_scene():
    return synth.generate(synth.SceneSpec("box-on-plane", resolution=3, n_views=4, width=80,
                                          height=60, p_flip=0.2, tau=0.2, seed=1))
