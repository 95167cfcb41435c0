import json

import numpy as np
import pytest

from core.kaczmarz import sweep_in_place
from core.sparse import from_dense, from_triplets
from core.spectral import (build_lab, eigen_report, neumann_deviation, parse_sizes, polynomial_check,
                           proportionality_constant, random_matrix, spectral_suite, verify_upsweep_transpose)
from utils.errors import (ConfigError, DegenerateComponent, DegenerateRowError, MultipleLeadingEigenvalue,
                          TooLargeError)
from utils.helpers import make_rng


def identity(n):
    return from_dense(np.eye(n))


def test_identity_operators():
    lab = build_lab(identity(2), 1.0)
    np.testing.assert_array_equal(lab.L, np.eye(2))
    np.testing.assert_array_equal(lab.G, np.zeros((2, 2)))

    lab = build_lab(identity(2), 0.5)
    np.testing.assert_allclose(lab.L, 2.0 * np.eye(2))
    np.testing.assert_allclose(lab.G, 0.5 * np.eye(2))


def test_dense_sweep_matches_sparse_sweep(rng):
    A = random_matrix(rng, 8, 6)
    lab = build_lab(A, 1.3)
    b = rng.standard_normal(8)
    x = rng.standard_normal(6)
    np.testing.assert_allclose(sweep_in_place(A, b, x.copy(), 1.3), lab.sweep(x, b), rtol=1e-10, atol=1e-10)


def test_consistency_identity(rng):
    for omega in (0.3, 1.0, 1.8):
        assert build_lab(random_matrix(rng, 9, 7), omega).consistency_deviation() <= 1e-12


def test_lab_guards():
    with pytest.raises(DegenerateRowError):
        build_lab(from_dense(np.array([[1.0, 0.0], [0.0, 0.0]])))
    with pytest.raises(TooLargeError):
        build_lab(from_triplets(1001, 1000, [(i, i, 1.0) for i in range(1000)]))
    with pytest.raises(ConfigError):
        build_lab(identity(2), 2.0)


def test_transpose_identity_for_identity():
    assert verify_upsweep_transpose(identity(4)) == 0.0


def test_transpose_identity_for_symmetric_matrix(rng):
    A = random_matrix(rng, 6, 6, symmetric=True)
    dense = A.to_dense()
    assert np.allclose(dense, dense.T)
    G = build_lab(A).G
    assert not np.allclose(G, G.T)
    assert verify_upsweep_transpose(A) <= 1e-12


def test_transpose_identity_over_random_matrices(rng):
    omegas = (0.25, 1.0, 1.75)
    for i in range(50):
        n = int(rng.integers(2, 11))
        A = random_matrix(rng, n, n, symmetric=True) if i % 5 == 0 else random_matrix(rng, n + int(rng.integers(0, 6)), n)
        assert verify_upsweep_transpose(A, omegas[i % 3]) <= 1e-11


def test_twin_has_the_same_spectrum(rng):
    A = random_matrix(rng, 9, 7)
    ours = np.array(eigen_report(build_lab(A)).eigenvalues)
    twins = np.array(eigen_report(build_lab(A.row_reversed())).eigenvalues)
    for z in ours:
        assert np.min(np.abs(twins - z)) <= 1e-9


def test_identity_spectrum():
    report = eigen_report(build_lab(identity(3)))
    assert report.rho == 0.0
    assert all(z == 0 for z in report.eigenvalues)
    assert report.kappa_1 is None
    with pytest.raises(MultipleLeadingEigenvalue):
        eigen_report(build_lab(identity(3)), strict=True)


def test_spectral_radius_below_one(rng):
    for _ in range(100):
        n = int(rng.integers(2, 13))
        A = random_matrix(rng, n + int(rng.integers(0, 11)), n)
        for omega in np.linspace(0.1, 1.9, 10):
            assert eigen_report(build_lab(A, float(omega))).rho < 1.0


def test_leading_eigenvalue_is_nonnormal():
    for seed in range(20):
        report = eigen_report(build_lab(random_matrix(make_rng(seed), 8, 6)))
        if report.simple:
            assert report.kappa_1 > 1.0 + 1e-9
            return
    pytest.fail("no instance with a simple leading eigenvalue")


def test_report_json(tmp_path, rng):
    report = eigen_report(build_lab(random_matrix(rng, 5, 4)))
    path = report.write_json(tmp_path / "eig.json")
    saved = json.loads(path.read_text())
    assert type(report.simple) is bool
    assert saved["simple_leading"] is report.simple
    assert saved["rho"] == pytest.approx(report.rho)
    assert report.to_dict()["shape"] == [5, 4]
    assert len(report.to_dict()["eigenvalues"]) == 4


def test_polynomials_low_degree(rng):
    A = random_matrix(rng, 8, 6)
    lab = build_lab(A)
    b = rng.standard_normal(8)
    assert polynomial_check(lab, b, None, 0) == (0.0, 0.0)
    dev_q, _ = polynomial_check(lab, b, None, 1)
    assert dev_q <= 1e-12


def test_polynomials_up_to_degree_twenty(rng):
    for _ in range(20):
        A = random_matrix(rng, 8, 6)
        omega = float(rng.uniform(0.25, 1.75))
        lab = build_lab(A, omega)
        b = rng.standard_normal(8)
        x0 = rng.standard_normal(6)
        for k in (5, 12, 20):
            dev_q, dev_p = polynomial_check(lab, b, x0, k)
            assert dev_q <= 1e-8
            assert dev_p <= 1e-8


def test_polynomial_degree_range(rng):
    lab = build_lab(random_matrix(rng, 4, 3))
    with pytest.raises(ConfigError):
        polynomial_check(lab, np.ones(4), None, 51)


def test_neumann_series_converges():
    for seed in range(50):
        lab = build_lab(random_matrix(make_rng(seed), 12, 6))
        if eigen_report(lab).rho <= 0.9:
            assert neumann_deviation(lab, 500) <= 1e-8
            assert neumann_deviation(lab, 1) > neumann_deviation(lab, 500)
            return
    pytest.fail("no instance with rho <= 0.9")


def test_proportionality_constant():
    for seed in range(50):
        rng = make_rng(seed)
        lab = build_lab(random_matrix(rng, 8, 6))
        report = eigen_report(lab)
        if not report.simple or report.eigenvalues[0].imag != 0.0:
            continue
        x_star = rng.standard_normal(6)
        assert proportionality_constant(lab, x_star, report=report) > 0.0
        with pytest.raises(DegenerateComponent):
            proportionality_constant(lab, x_star, x0=x_star, report=report)
        return
    pytest.fail("no instance with a simple real leading eigenvalue")


def test_parse_sizes():
    assert parse_sizes("8x6,12X10") == [(8, 6), (12, 10)]
    with pytest.raises(ConfigError):
        parse_sizes("8by6")
    with pytest.raises(ConfigError):
        parse_sizes("0x3")


def test_empty_suite_passes():
    report = spectral_suite([(8, 6)], [1.0], trials=0)
    assert report["entries"] == []
    assert report["passed"]


def test_suite_with_identity():
    report = spectral_suite([(8, 6)], [1.0], trials=1, include_identity=True)
    assert report["entries"][0]["instance"] == "identity"
    assert report["entries"][0]["rho"] == 0.0
    assert report["passed"]


def test_default_suite_passes():
    report = spectral_suite(parse_sizes("8x6,12x10,20x15"), [0.25, 1.0, 1.75], trials=2, seed=0)
    assert len(report["entries"]) == 18
    assert report["violations"] == 0
    assert all(entry["rho"] < 1.0 for entry in report["entries"])
