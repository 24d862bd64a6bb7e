import acceptance_log
import numpy as np
import pytest
from scipy import ndimage

from occgeo import synth


def boundary_band(gt):
    """Pixels within one pixel (8-neighbourhood) of a visible/occluded boundary."""
    st = np.ones((3, 3), dtype=bool)
    return ndimage.binary_dilation(gt == 0, st) & ndimage.binary_dilation(gt == 1, st)


class Frame:
    def __init__(self, scene, cam_t, cam_s):
        self.scene, self.cam_t, self.cam_s = scene, cam_t, cam_s
        self.K = cam_t.K
        self.T = synth.relative_pose(cam_t, cam_s)
        self.img_t, self.depth_t = synth.render(scene, cam_t)
        self.img_s, self.depth_s = synth.render(scene, cam_s)
        self.gt_occ = synth.gt_occlusion(scene, cam_t, cam_s)
        self.gt_flow, self.gt_flow_valid = synth.gt_flow(scene, cam_t, cam_s)


@pytest.fixture(scope="session")
def suite():
    return [Frame(*member) for member in synth.random_suite(0, 10)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
