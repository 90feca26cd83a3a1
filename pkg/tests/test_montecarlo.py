import numpy as np
import pytest
from scipy import stats

from rmsgof.models import contingency2x2, poisson, zipf
from rmsgof.montecarlo import (
    SimulationConfig,
    SimulationReport,
    ks_distance,
    qq_export,
    read_qq,
    run_simulations,
    sample_multinomial,
    uniform_grid,
)


def test_sample_multinomial_degenerate():
    rng = np.random.default_rng(0)
    counts = sample_multinomial([0.0, 1.0, 0.0], 500, rng)
    assert counts.counts.tolist() == [0, 500, 0]


def test_sample_multinomial_mean():
    rng = np.random.default_rng(1)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    m = 200_000
    y = sample_multinomial(p, m, rng).counts / m
    # four standard errors
    assert np.all(np.abs(y - p) < 4 * np.sqrt(p * (1 - p) / m))


def test_sample_multinomial_seeded():
    a = sample_multinomial([0.5, 0.5], 1000, np.random.default_rng(9))
    b = sample_multinomial([0.5, 0.5], 1000, np.random.default_rng(9))
    assert a.counts.tolist() == b.counts.tolist()


def test_sample_multinomial_rejects_empty():
    with pytest.raises(ValueError):
        sample_multinomial([1.0], 0, np.random.default_rng(0))


def test_uniform_grid():
    np.testing.assert_allclose(uniform_grid(2), [0.25, 0.75])
    assert uniform_grid(1).tolist() == [0.5]


def test_ks_distance_matches_scipy():
    rng = np.random.default_rng(2)
    for j in (1, 7, 100, 999):
        u = np.sort(rng.random(j))
        assert ks_distance(u) == pytest.approx(stats.kstest(u, "uniform").statistic, abs=1e-15)


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(contingency2x2(), 0.3, 1000, 0, 0)
    with pytest.raises(ValueError):
        SimulationConfig(zipf(100), 1.0, 50, 10, 0)
    with pytest.raises(ValueError):
        SimulationConfig(contingency2x2(), 0.3, 1000, 10, -1)


def test_single_simulation():
    report = run_simulations(SimulationConfig(contingency2x2(), 0.3, 2000, 1, 11))
    assert report.j == 1
    assert report.grid.tolist() == [0.5]
    assert 0 <= report.sorted_levels[0] <= 1
    assert report.ks_distance == pytest.approx(abs(report.sorted_levels[0] - 0.5) + 0.5)


def test_qq_export_two_points(tmp_path):
    report = SimulationReport(
        sorted_levels=np.array([0.2, 0.8]),
        grid=uniform_grid(2),
        ks_distance=ks_distance(np.array([0.2, 0.8])),
        max_nodes=0,
        elapsed_quadrature_s=0.0,
        elapsed_simulation_s=0.0,
    )
    path = tmp_path / "qq.csv"
    qq_export(report, path)
    assert path.read_text() == "grid,level\n0.25,0.2\n0.75,0.8\n"


def test_qq_round_trip(tmp_path):
    report = run_simulations(SimulationConfig(zipf(8), 1.0, 3000, 25, 4))
    path = tmp_path / "qq.csv"
    qq_export(report, path)
    grid, levels = read_qq(path)
    assert np.array_equal(grid, report.grid)
    assert np.array_equal(levels, report.sorted_levels)


def test_qq_export_empty_path():
    report = SimulationReport(np.array([0.5]), uniform_grid(1), 0.5, 0, 0.0, 0.0)
    with pytest.raises(FileNotFoundError):
        qq_export(report, "")


def test_worker_count_does_not_change_results():
    config = SimulationConfig(zipf(10), 0.8, 2000, 12, 77)
    a = run_simulations(config, workers=1)
    b = run_simulations(config, workers=3)
    assert np.array_equal(a.sorted_levels, b.sorted_levels)


def test_poisson_simulation_runs():
    report = run_simulations(SimulationConfig(poisson(), 10.3, 5000, 20, 5))
    assert report.j + sum(report.excluded.values()) == 20
    assert np.all(np.diff(report.sorted_levels) >= 0)


def test_boundary_draws_are_excluded():
    # theta so small that many draws leave bins 1 and 3 empty
    report = run_simulations(SimulationConfig(contingency2x2(), 1e-4, 1000, 30, 3))
    assert report.excluded.get("boundary", 0) > 0
    assert report.j + sum(report.excluded.values()) == 30


@pytest.mark.slow
def test_disjoint_seeds_agree_in_distribution():
    config = dict(model=contingency2x2(), theta_true=0.5, m=5000, j=300)
    a = run_simulations(SimulationConfig(seed=1, **config)).sorted_levels
    b = run_simulations(SimulationConfig(seed=2, **config)).sorted_levels
    assert stats.ks_2samp(a, b).pvalue > 0.001
