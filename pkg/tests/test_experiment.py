import json

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from hartree_lab import experiment, plots
from hartree_lab.errors import ConfigError, InvalidArgumentError


def small_config(tmp_path=None, **overrides):
    raw = {
        "grid": {"length": 6.283185307179586, "points": 6},
        "particles": 2,
        "interaction": {"profile": "box", "amplitude": 1.0, "width": 1.0},
        "trap": {"kind": "constant", "amplitude": 1.0},
        "initial": {"state": "product", "orbital": {"momentum": 1.0}},
        "r_values": [1, 2],
        "time": {"dt": 0.05, "t_final": 0.5},
        "output": str(tmp_path / "run") if tmp_path is not None else "runs/x",
    }
    for key, value in overrides.items():
        raw[key] = value
    return experiment.ExperimentConfig.from_dict(raw)


def test_config_round_trip(tmp_path):
    cfg = small_config(tmp_path, weights=[{"family": "linear"}, {"family": "truncated", "gamma": 0.5}])
    assert experiment.ExperimentConfig.from_yaml(cfg.to_yaml()) == cfg
    path = tmp_path / "c.yaml"
    path.write_text(cfg.to_yaml())
    assert experiment.ExperimentConfig.load(path) == cfg


@settings(max_examples=30, deadline=None)
@given(
    points=st.integers(2, 12), n=st.one_of(st.integers(1, 5), st.lists(st.integers(1, 5), min_size=1, max_size=4)),
    amp=st.floats(-3, 3, allow_nan=False), beta=st.floats(0, 1), dt=st.sampled_from([0.01, 0.02, 0.05]),
    kind=st.sampled_from(["constant", "linear-ramp-off", "quench"]), seed=st.integers(0, 2**31),
    profile=st.sampled_from(["box", "gaussian", "cosine-bump"]),
)
def test_config_round_trip_property(points, n, amp, beta, dt, kind, seed, profile):
    raw = {"grid": {"length": 3.5, "points": points}, "particles": n,
           "interaction": {"profile": profile, "amplitude": amp, "width": 0.7, "beta": beta},
           "trap": {"kind": kind, "amplitude": 0.5, "ramp_time": 0.3}, "time": {"dt": dt, "t_final": 1.0},
           "seed": seed}
    cfg = experiment.ExperimentConfig.from_dict(raw)
    assert experiment.ExperimentConfig.from_yaml(cfg.to_yaml()) == cfg


@pytest.mark.parametrize("raw, match", [
    ({"particles": 2}, "grid"),
    ({"grid": {"length": 1.0, "points": 4}, "bogus": 1}, "unknown"),
    ({"grid": {"length": 1.0, "points": 1}}, "points"),
    ({"grid": {"length": 1.0, "points": 4}, "particles": []}, "empty"),
    ({"grid": {"length": 1.0, "points": 4}, "interaction": {"profile": "square"}}, "profile"),
    ({"grid": {"length": 1.0, "points": 4}, "time": {"dt": 0.3, "t_final": 1.0}}, "multiple"),
    ({"grid": {"length": 1.0, "points": 4}, "initial": {"state": "custom"}}, "file"),
    ({"grid": {"length": 1.0, "points": 4}, "weights": [{"family": "power", "exponent": -1}]}, "exponent"),
    ({"grid": {"length": 1.0, "points": 4, "spacing": 0.25}}, "malformed"),
])
def test_config_errors(raw, match):
    with pytest.raises(ConfigError, match=match):
        experiment.ExperimentConfig.from_dict(raw)


def test_config_invalid_yaml():
    with pytest.raises(ConfigError):
        experiment.ExperimentConfig.from_yaml("grid: [unclosed")


def test_free_evolution_keeps_alpha(tmp_path):
    cfg = small_config(tmp_path, interaction={"profile": "box", "amplitude": 0.0, "width": 1.0},
                       initial={"state": "one-defect"})
    report = experiment.simulate(cfg)
    assert report.passed
    np.testing.assert_allclose(report.alpha_series, report.alpha_series[0], atol=1e-9)
    assert report.alpha_series[0] == pytest.approx(0.5, abs=1e-12)


def test_product_run_within_gronwall_bound(tmp_path):
    cfg = small_config(tmp_path, particles=3)
    report = experiment.simulate(cfg)
    assert report.passed
    for r in report.r_values:
        assert np.all(report.alpha_series <= report.gronwall_bound_series[r] + 1e-6)
    names = {c.name for c in report.bound_checks}
    assert {"lemma2[r=1]", "theorem1[r=2]", "lemma1a_operator", "energy", "nbody_norm"} <= names


def test_ramp_trap_skips_energy_check(tmp_path):
    cfg = small_config(tmp_path, trap={"kind": "linear-ramp-off", "amplitude": 1.0, "ramp_time": 0.3})
    report = experiment.simulate(cfg)
    assert not report.time_independent
    assert "energy" not in {c.name for c in report.bound_checks}
    assert report.passed


def test_extra_weights_and_random_states(tmp_path):
    cfg = small_config(tmp_path, weights=[{"family": "linear"}, {"family": "power", "exponent": 2}],
                       checks={"random_states": 4})
    report = experiment.simulate(cfg)
    assert "power2" in report.weight_alpha_series
    assert np.all(report.weight_alpha_series["power2"] <= report.alpha_series + 1e-12)
    assert sum(c.name.startswith("random:") for c in report.bound_checks) == 4 * (2 + 2)


def test_custom_orbital_file(tmp_path):
    g = small_config(tmp_path)
    vals = np.exp(-np.linspace(-2, 2, 6) ** 2)
    np.savetxt(tmp_path / "orb.txt", np.column_stack([vals, np.zeros(6)]))
    raw = g.to_dict()
    raw["initial"] = {"state": "custom", "file": "orb.txt"}
    (tmp_path / "c.yaml").write_text(yaml.safe_dump(raw))
    cfg = experiment.ExperimentConfig.load(tmp_path / "c.yaml")
    system = experiment.build_system(cfg)
    np.testing.assert_allclose(np.abs(system.phi0.values), vals / np.sqrt(g.grid.length / 6 * np.sum(vals**2)))
    np.savetxt(tmp_path / "bad.txt", np.ones(4))
    cfg.initial.file = str(tmp_path / "bad.txt")
    with pytest.raises(ConfigError):
        experiment.build_system(cfg)


def test_defect_parallel_to_orbital_rejected(tmp_path):
    cfg = small_config(tmp_path, initial={"state": "one-defect", "orbital": {"profile": "flat"},
                                          "defect": {"profile": "flat"}})
    with pytest.raises(ConfigError):
        experiment.build_system(cfg)


def test_persisted_outputs_are_deterministic(tmp_path):
    cfg = small_config(tmp_path, checks={"random_states": 2})
    a = experiment.write_report(experiment.simulate(cfg), tmp_path / "a")
    b = experiment.write_report(experiment.simulate(cfg), tmp_path / "b")
    for name in ("timeseries.csv", "report.json", "config.yaml"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "timeseries.csv").read_text().splitlines()[0].split(",")
    for col in experiment.TIMESERIES_COLUMNS:
        assert col in header
    assert "c_t_r1" in header and "c_t_r2" in header


def test_recheck_matches_live_checks(tmp_path):
    report = experiment.simulate(small_config(tmp_path))
    out = experiment.write_report(report, tmp_path / "r")
    rechecked = experiment.recheck(out)
    assert all(c.passed for c in rechecked)
    series = experiment.read_timeseries(out)
    np.testing.assert_array_equal(series["alpha"], report.alpha_series)


def test_sweep_aggregates(tmp_path):
    cfg = small_config(tmp_path, particles=[2, 3, 4])
    result = experiment.sweep(cfg, tmp_path / "sweep")
    assert [e["particles"] for e in result.entries] == [2, 3, 4]
    assert result.passed
    maxima = [e["max_alpha"] for e in result.entries]
    assert maxima[0] > maxima[1] > maxima[2]
    assert result.slope_band[0] <= result.slope <= result.slope_band[1]
    data = json.loads((tmp_path / "sweep" / "sweep.json").read_text())
    assert data["slope"] == pytest.approx(result.slope)
    assert (tmp_path / "sweep" / "N3" / "timeseries.csv").exists()


def test_sweep_repeat_is_identical(tmp_path):
    cfg = small_config(tmp_path, particles=[2, 2])
    experiment.sweep(cfg, tmp_path / "s1")
    experiment.sweep(cfg, tmp_path / "s2")
    assert (tmp_path / "s1" / "sweep.json").read_bytes() == (tmp_path / "s2" / "sweep.json").read_bytes()
    e = json.loads((tmp_path / "s1" / "sweep.json").read_text())["entries"]
    assert e[0] == e[1]


def test_sweep_parallel_matches_serial(tmp_path):
    cfg = small_config(tmp_path, particles=[2, 3])
    serial = experiment.sweep(cfg, tmp_path / "a", jobs=1)
    parallel = experiment.sweep(cfg, tmp_path / "b", jobs=2)
    assert serial.entries == parallel.entries


def test_sweep_empty_list(tmp_path):
    cfg = small_config(tmp_path)
    cfg.particles = []
    with pytest.raises(InvalidArgumentError):
        experiment.sweep(cfg, tmp_path / "s")


def test_sweep_records_failed_runs(tmp_path):
    cfg = small_config(tmp_path, particles=[2, 3])
    cfg.grid.points = 40  # N=3 at M=40 is fine, so force the cap through a large N instead
    cfg.particles = [2, 12]
    result = experiment.sweep(cfg, tmp_path / "s")
    assert not result.passed
    bad = [e for e in result.entries if "error" in e]
    assert bad and bad[0]["error"] == "capacity"
    assert (tmp_path / "s" / "N12" / "error.json").exists()


def test_fit_slope_exact_power_law():
    ns = np.array([2, 3, 4, 5, 6])
    slope, stderr, band = experiment.fit_loglog_slope(ns, 0.3 / ns)
    assert slope == pytest.approx(-1.0, abs=1e-12) and stderr <= 1e-6


def test_plots(tmp_path):
    report = experiment.simulate(small_config(tmp_path))
    paths = plots.plot_run(report.columns(), tmp_path / "p", report.particles)
    assert len(paths) == 3 and all(p.exists() and p.suffix == ".svg" for p in paths)
    sweep_plot = plots.plot_sweep([2, 3, 4], [0.1, 0.07, 0.05], tmp_path / "p")
    assert "1/N guide" in sweep_plot.read_text()
    with pytest.raises(InvalidArgumentError, match="empty"):
        plots.plot_run({"time": np.array([])}, tmp_path / "e", 2)
    with pytest.raises(InvalidArgumentError, match="empty"):
        plots.plot_sweep([], [], tmp_path / "e")


def test_plots_are_reproducible(tmp_path):
    report = experiment.simulate(small_config(tmp_path))
    a = plots.plot_run(report.columns(), tmp_path / "a", 2)
    b = plots.plot_run(report.columns(), tmp_path / "b", 2)
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]


def test_interaction_profiles_are_even():
    cfg = small_config()
    g = experiment.build_system(cfg).grid
    for profile in experiment.INTERACTION_PROFILES:
        v = experiment.interaction_profile(g, experiment.InteractionConfig(profile, 2.0, 1.5))
        assert v.is_even()
