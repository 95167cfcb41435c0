import math

import numpy as np
import pytest

from core.phantoms import make_phantom
from core.tomo import Geometry, add_noise, build_matrix, estimate_sigma, image_from_vector, make_problem
from utils.errors import ConfigError, DegenerateDataError
from utils.helpers import parse_angles


def square_chord(half: float, theta_deg: float, s: float) -> float:
    """Length of the line at signed distance s and angle theta inside [-half, half]^2"""
    theta = math.radians(theta_deg)
    c, d = abs(math.cos(theta)), abs(math.sin(theta))
    c, d = max(c, d), min(c, d)
    s = abs(s)
    if s <= half * (c - d):
        return 2.0 * half / c
    if s <= half * (c + d):
        return (half * (c + d) - s) / (c * d)
    return 0.0


def test_axis_aligned_rays_through_row_centres():
    g = Geometry(image_size=2, angles=(0.0,), n_rays=2, detector_span=0.5)
    A = build_matrix(g)
    assert A.shape == (2, 4)
    for j in range(2):
        cols, vals = A.row(j)
        assert len(cols) == 2
        np.testing.assert_allclose(vals, [1.0, 1.0], rtol=1e-14)


def test_entries_positive_and_bounded(small_geometry):
    A = build_matrix(small_geometry)
    assert np.all(A.values > 0)
    row_sums = np.asarray(A.csr.sum(axis=1)).ravel()
    assert np.all(row_sums <= small_geometry.image_size * math.sqrt(2.0) + 1e-9)


def test_chord_lengths_match_analytic_formula():
    g = Geometry(image_size=8, angles=tuple(parse_angles("0:15:165")), n_rays=11)
    A = build_matrix(g)
    sums = A.matvec(np.ones(g.n_pixels))

    expected = [square_chord(4.0, theta, s) for theta in g.angles for s in g.ray_offsets()]
    np.testing.assert_allclose(sums, expected, rtol=1e-10, atol=1e-9)


def test_quarter_turn_permutes_ray_sums():
    N = 16
    rr, cc = np.mgrid[0:N, 0:N]
    centre = (N - 1) / 2.0
    disk = (((rr - centre) ** 2 + (cc - centre) ** 2) <= 36.0).astype(float)
    assert np.array_equal(disk, np.rot90(disk))
    x = disk.flatten(order="F")

    sums = {}
    for theta in (0.0, 90.0):
        A = build_matrix(Geometry(image_size=N, angles=(theta,), n_rays=25))
        sums[theta] = A.matvec(x)
    np.testing.assert_allclose(np.sort(sums[0.0]), np.sort(sums[90.0]), atol=1e-10)


def test_single_ray_passes_through_centre():
    g = Geometry(image_size=4, angles=(0.0,), n_rays=1)
    assert g.ray_offsets().tolist() == [0.0]


@pytest.mark.parametrize("kwargs", [
    dict(image_size=1, angles=(0.0,), n_rays=3),
    dict(image_size=8, angles=(), n_rays=3),
    dict(image_size=8, angles=(180.0,), n_rays=3),
    dict(image_size=8, angles=(0.0,), n_rays=0),
])
def test_invalid_geometry(kwargs):
    with pytest.raises(ConfigError):
        Geometry(**kwargs)


def test_noise_free():
    b_star = np.array([1.0, 2.0, 3.0])
    b, sigma = add_noise(b_star, 0.0, seed=1)
    assert np.array_equal(b, b_star)
    assert sigma == 0.0


def test_noise_errors():
    with pytest.raises(DegenerateDataError):
        add_noise(np.zeros(5), 8e-3, seed=0)
    with pytest.raises(ConfigError):
        add_noise(np.ones(5), -1.0, seed=0)


def test_noise_level_in_expectation(rng):
    eta = 8e-3
    b_star = rng.random(500) + 0.1
    ratios = []
    for seed in range(200):
        b, sigma = add_noise(b_star, eta, seed=seed)
        ratios.append(np.sum((b - b_star) ** 2) / np.sum(b_star ** 2))
    assert np.mean(ratios) == pytest.approx(eta ** 2, rel=0.05)
    assert sigma == pytest.approx(eta * np.linalg.norm(b_star) / math.sqrt(500))


def test_noise_is_seeded():
    b_star = np.linspace(1.0, 2.0, 50)
    assert np.array_equal(add_noise(b_star, 1e-2, seed=3)[0], add_noise(b_star, 1e-2, seed=3)[0])
    assert not np.array_equal(add_noise(b_star, 1e-2, seed=3)[0], add_noise(b_star, 1e-2, seed=4)[0])


def test_make_problem(small_geometry):
    phantom = make_phantom("shepplogan", 16)
    problem = make_problem(small_geometry, phantom, 8e-3, noise_seed=5)
    np.testing.assert_allclose(problem.b_star, problem.A.matvec(problem.x_star))
    assert problem.image_size == 16
    assert problem.sigma > 0

    reused = make_problem(small_geometry, phantom, 8e-3, noise_seed=5, A=problem.A)
    assert reused.A is problem.A
    assert np.array_equal(reused.b, problem.b)


def test_make_problem_size_mismatch(small_geometry):
    with pytest.raises(ConfigError):
        make_problem(small_geometry, make_phantom("grains", 32), 8e-3)


def test_column_major_layout():
    image = image_from_vector(np.arange(4.0), 2)
    assert image.tolist() == [[0.0, 2.0], [1.0, 3.0]]


def test_estimate_sigma(small_geometry):
    problem = make_problem(small_geometry, make_phantom("smooth", 16), 0.0)
    assert estimate_sigma(problem.A, problem.b, problem.x_star) == pytest.approx(0.0, abs=1e-12)
