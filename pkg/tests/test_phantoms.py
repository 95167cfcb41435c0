import numpy as np
import pytest

from core.phantoms import PHANTOM_KINDS, grain_count, make_phantom
from utils.errors import ConfigError


@pytest.mark.parametrize("kind", sorted(PHANTOM_KINDS))
def test_range_and_shape(kind):
    phantom = make_phantom(kind, 32, seed=3)
    assert phantom.pixels.shape == (32, 32)
    assert phantom.size == 32
    assert phantom.pixels.min() >= 0.0
    assert phantom.pixels.max() <= 1.0


@pytest.mark.parametrize("kind", sorted(PHANTOM_KINDS))
def test_deterministic(kind):
    assert np.array_equal(make_phantom(kind, 32, seed=11).pixels, make_phantom(kind, 32, seed=11).pixels)


def test_grains_cells():
    pixels = make_phantom("grains", 128, seed=7).pixels
    assert len(np.unique(pixels)) == grain_count(128)


def test_grains_depend_on_seed():
    assert not np.array_equal(make_phantom("grains", 32, seed=1).pixels, make_phantom("grains", 32, seed=2).pixels)


def test_shepp_logan_levels():
    pixels = make_phantom("shepplogan", 128).pixels
    assert pixels[0, 0] == 0.0
    assert pixels[-1, -1] == 0.0
    assert pixels.max() == pytest.approx(1.0)


def test_phase_levels():
    assert set(np.unique(make_phantom("binary", 64, seed=0).pixels)) <= {0.0, 1.0}
    allowed = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])
    for value in np.unique(make_phantom("fourphases", 64, seed=0).pixels):
        assert np.min(np.abs(allowed - value)) < 1e-12


def test_smooth_phases_are_blurred():
    smooth = make_phantom("threephasessmooth", 64, seed=0).pixels
    sharp = make_phantom("threephases", 64, seed=0).pixels
    assert len(np.unique(smooth)) > len(np.unique(sharp))


def test_invalid_requests():
    with pytest.raises(ConfigError):
        make_phantom("walnut", 64)
    with pytest.raises(ConfigError):
        make_phantom("grains", 8)
