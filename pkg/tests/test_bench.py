import asyncio

import numpy as np
import pytest

import core.bench
from core.bench import (BenchSpec, RunRecord, award_points, build_score_table, cmd_bench, cmd_phantom, cmd_run,
                        compare_rules, histogram_rows, noise_study, parse_method, solve)
from core.gauge import TwinConfig, twin_algorithm
from core.kaczmarz import run as kaczmarz_run
from core.phantoms import PHANTOM_KINDS, make_phantom
from core.tomo import Geometry, build_matrix, make_problem
from utils.errors import ConfigError
from utils.helpers import load_jsonl, parse_angles, read_csv, read_pgm

SMALL = dict(size=16, angles="0:12:168", n_rays=23, maxits=40)


def small_spec(**overrides):
    settings = dict(SMALL, runs=2)
    settings.update(overrides)
    return BenchSpec(**settings)


def test_award_points():
    assert award_points([0.3, 0.1, 0.2]) == [0.0, 1.0, 0.5]
    assert sorted(award_points([0.5, 0.4, 0.6])) == [0.0, 0.5, 1.0]
    assert award_points([0.1, 0.2]) == [1.0, 0.5]


def test_parse_method():
    assert parse_method("msa") == ("msa", None)
    assert parse_method("kaczmarz") == ("kaczmarz", "none")
    assert parse_method("kaczmarz+gcv") == ("kaczmarz", "gcv")
    for bad in ("lsqr", "twin+gcv", "kaczmarz+lcurve"):
        with pytest.raises(ConfigError):
            parse_method(bad)


def test_bench_spec_validation():
    with pytest.raises(ConfigError):
        BenchSpec(runs=0)
    with pytest.raises(ConfigError):
        BenchSpec(kinds=["walnut"])
    with pytest.raises(ConfigError):
        BenchSpec(methods=[])
    with pytest.raises(ConfigError):
        BenchSpec(methods=["twin"])
    with pytest.raises(ConfigError):
        BenchSpec(eta=-1.0)
    assert len(BenchSpec().geometry().angles) == 120


def test_score_table_excludes_failed_runs():
    spec = small_spec(methods=("twin", "msa", "kaczmarz+oracle"), runs=3)
    records = []
    for run, errors in enumerate([(0.2, 0.1, 0.3), (0.1, 0.2, 0.3), (0.2, 0.1, 0.3)]):
        for method, error in zip(spec.methods, errors):
            records.append(RunRecord("grains", run, run, method, "ok", error, 2.0, 10))
    records[-1] = RunRecord("grains", 2, 2, "kaczmarz+oracle", "failed", message="boom")

    table = build_score_table(spec, records)
    twin, msa, oracle = (table.row("grains", m) for m in spec.methods)
    assert (twin.score, msa.score, oracle.score) == (1.5, 1.5, 0.0)
    assert twin.completed == 2 and twin.failed == 1
    assert msa.mean_error == pytest.approx(0.15)
    assert sum(r.score for r in table.rows) == 1.5 * twin.completed


def test_histogram_shares_edges():
    records = [RunRecord("grains", i, i, m, "ok", e, 1.0, 1)
               for i, (m, e) in enumerate([("twin", 0.2), ("msa", 0.1), ("twin", 0.3), ("msa", 0.15)])]
    rows = histogram_rows(records, ["grains"], ["twin", "msa"], bins=4)
    assert len(rows) == 4
    assert rows[0][1] == 0.1 and rows[-1][2] == pytest.approx(0.3)
    assert sum(r[3] for r in rows) == 2 and sum(r[4] for r in rows) == 2


def test_cmd_phantom(tmp_path):
    first = cmd_phantom("grains", 128, 7, tmp_path / "a.pgm")
    second = cmd_phantom("grains", 128, 7, tmp_path / "b.pgm")
    assert first.read_bytes().startswith(b"P5\n128 128\n255\n")
    assert first.read_bytes() == second.read_bytes()
    assert read_pgm(cmd_phantom("shepplogan", 64, 0, tmp_path / "s.pgm")).max() == 255


def test_cmd_run_consistent_kaczmarz(tmp_path):
    geometry = Geometry(image_size=16, angles=tuple(parse_angles("0:12:168")), n_rays=23)
    summary = cmd_run(geometry, "smooth", "kaczmarz", rule="none", eta=0.0, maxits=50, output_dir=tmp_path)

    rows = read_csv(tmp_path / "history.csv")
    errors = [float(r["true_error"]) for r in rows]
    assert len(rows) == 50
    assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))
    assert summary["k_stop"] == 50
    assert summary["method"] == "kaczmarz+none"
    assert read_pgm(tmp_path / "reconstruction.pgm").shape == (16, 16)
    assert (tmp_path / "summary.json").exists()
    assert summary["wall_time_s"] >= 0


@pytest.mark.parametrize("method", ["twin", "msa", "kaczmarz+gcv"])
def test_cmd_run_methods(tmp_path, method):
    geometry = Geometry(image_size=16, angles=tuple(parse_angles("0:12:168")), n_rays=23)
    summary = cmd_run(geometry, "grains", method, maxits=60, output_dir=tmp_path, sigma=0.01)
    assert summary["sigma"] == 0.01
    assert summary["relative_error"] > 0
    assert summary["work_units"] > 0
    assert len(read_csv(tmp_path / "history.csv")) > 0


def test_solve_rejects_unknown_method(small_geometry):
    problem = make_problem(small_geometry, make_phantom("grains", 16), 8e-3, noise_seed=0)
    with pytest.raises(ConfigError):
        solve(problem, "cgls")


def test_bench_single_run_scores(tmp_path):
    table = asyncio.run(cmd_bench(small_spec(runs=1), tmp_path))
    assert sorted(r.score for r in table.rows) == [0.0, 0.5, 1.0]


def test_numerical_failure_is_recorded_not_raised(tmp_path, monkeypatch):
    real_solve = core.bench.solve

    def solve_or_fail(problem, name, **kwargs):
        if name == "msa":
            raise np.linalg.LinAlgError("singular step system")
        return real_solve(problem, name, **kwargs)

    monkeypatch.setattr(core.bench, "solve", solve_or_fail)
    asyncio.run(cmd_bench(small_spec(runs=1), tmp_path))
    records = {r["method"]: r for r in load_jsonl(tmp_path / "runs.jsonl")}
    assert records["msa"]["status"] == "failed"
    assert "singular" in records["msa"]["message"]
    assert records["twin"]["status"] == "ok"


def test_bench_outputs_and_determinism(tmp_path):
    spec = small_spec(kinds=["grains", "binary"], runs=3)
    table = asyncio.run(cmd_bench(spec, tmp_path / "first", max_concurrent=2))
    asyncio.run(cmd_bench(spec, tmp_path / "second", max_concurrent=3))

    for name in ("scores.csv", "histogram.csv", "runs.jsonl"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()

    records = load_jsonl(tmp_path / "first" / "runs.jsonl")
    assert len(records) == 2 * 3 * len(spec.methods)
    assert [(r["kind"], r["run"]) for r in records] == sorted(
        ((r["kind"], r["run"]) for r in records), key=lambda kr: (spec.kinds.index(kr[0]), kr[1]))
    assert [r["noise_seed"] for r in records if r["method"] == "twin"] == [0, 1, 2, 0, 1, 2]

    for kind in spec.kinds:
        rows = [r for r in table.rows if r.kind == kind]
        assert sum(r.score for r in rows) == 1.5 * rows[0].completed


def test_noise_study(small_geometry):
    study = noise_study(small_geometry, make_phantom("grains", 16), [1e-3, 1e-2], maxits=30)
    assert set(study.errors) == {1e-3, 1e-2}
    assert all(len(e) == 30 for e in study.errors.values())
    assert study.minima()[1e-3][1] <= study.minima()[1e-2][1]
    with pytest.raises(ConfigError):
        noise_study(small_geometry, make_phantom("grains", 16), [])


def test_compare_rules(tmp_path, small_geometry):
    problem = make_problem(small_geometry, make_phantom("grains", 16, seed=3), 8e-3, noise_seed=3)
    result = compare_rules(problem, maxits=80, slack=10)
    assert set(result.stops) == {"upre", "gcv", "cdp", "oracle", "twin"}
    assert result.stop_errors["oracle"] == min(result.true_error)
    rows = read_csv(result.write_csv(tmp_path / "comparison.csv"))
    assert len(rows) == 80
    assert result.to_dict()["oracle_minimum"] == min(result.true_error)


def is_unimodal(errors, window=5):
    smooth = np.convolve(errors, np.ones(window) / window, mode="valid")
    k = int(np.argmin(smooth))
    return bool(np.all(np.diff(smooth[:k + 1]) <= 0) and np.all(np.diff(smooth[k:]) >= 0))


@pytest.mark.slow
def test_desk_scale_semi_convergence():
    geometry = Geometry(image_size=64, angles=tuple(parse_angles("0:3:177")), n_rays=91)
    A = build_matrix(geometry)
    phantom = make_phantom("grains", 64, seed=0)
    unimodal = close_stops = good_errors = 0
    for seed in range(20):
        problem = make_problem(geometry, phantom, 8e-3, noise_seed=seed, A=A)
        _, history = kaczmarz_run(A, problem.b, n_sweeps=300, x_star=problem.x_star)
        errors = np.asarray(history.true_error)
        twin = twin_algorithm(A, problem.b, TwinConfig(maxits=300, slack=10), x_star=problem.x_star)

        unimodal += is_unimodal(errors)
        close_stops += abs(twin.k_stop - (int(np.argmin(errors)) + 1)) <= 15
        good_errors += twin.relative_error <= 1.25 * errors.min()

    assert unimodal >= 18
    assert close_stops >= 15
    assert good_errors >= 18


TABLE_ERRORS = {"twin": 0.17, "msa": 0.11, "kaczmarz+oracle": 0.21}


def test_full_scale_grains(tmp_path, full_scale):
    table = asyncio.run(cmd_bench(BenchSpec(kinds=["grains"], runs=20), tmp_path))
    for method, expected in TABLE_ERRORS.items():
        assert table.row("grains", method).mean_error == pytest.approx(expected, abs=0.06)
    assert table.row("grains", "msa").mean_error < table.row("grains", "kaczmarz+oracle").mean_error


def test_full_scale_all_phantoms(tmp_path, full_scale):
    table = asyncio.run(cmd_bench(BenchSpec(kinds=list(PHANTOM_KINDS), runs=20), tmp_path))
    wins = sum(table.row(kind, "msa").mean_error <= table.row(kind, "kaczmarz+oracle").mean_error
               for kind in PHANTOM_KINDS)
    assert wins >= 5


def test_full_scale_rule_overshoot(full_scale):
    geometry = BenchSpec().geometry()
    A = build_matrix(geometry)
    phantom = make_phantom("grains", 128, seed=0)
    late = {"gcv": 0, "upre": 0}
    silent_cdp = 0
    runs = 20
    for seed in range(runs):
        problem = make_problem(geometry, phantom, 8e-3, noise_seed=seed, A=A)
        result = compare_rules(problem, maxits=300, seed=seed)
        for rule in late:
            late[rule] += result.stops[rule] >= result.stops["oracle"]
        silent_cdp += result.stops["cdp"] is None
    assert all(count >= 0.8 * runs for count in late.values())
    assert silent_cdp > runs / 2
