import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcv2x.analytic import AnalyticModel, coverage_probability
from mcv2x.channel import NetworkParams, db_to_linear
from mcv2x.montecarlo import SimulationConfig, coverage_from_sinr, simulate_drops
from mcv2x.errors import ConfigError, ValidationError
from mcv2x.experiments import (
    DEFAULT_THRESHOLDS_DB,
    NOISE_ONLY_PRESET,
    OUTPUT_DIR_ENV,
    CoverageCurve,
    SweepSpec,
    curve_to_csv,
    default_output_dir,
    dump_config,
    emit_csv,
    figure_presets,
    gnuplot_script,
    is_unimodal,
    load_config,
    marginal_of_joint,
    noise_only_oracle,
    parse_config,
    read_csv,
    run_sweep,
    saturates,
    validate,
)
from mcv2x.analytic import nth_nearest_pdf

from oracles import REFERENCE_DEFAULTS


def data_lines(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


# --- configuration --------------------------------------------------------------------------


def test_empty_config_gives_table_defaults():
    params, spec = parse_config("")
    assert params == NetworkParams()
    for key, value in REFERENCE_DEFAULTS.items():
        assert getattr(params, key) == value
    assert spec.kind == "threshold" and spec.grid == DEFAULT_THRESHOLDS_DB


def test_alpha_below_two_is_rejected_with_field_and_line():
    text = "lambda_d = 5.0\nalpha_d = 1.5\n"
    with pytest.raises(ValidationError) as exc:
        parse_config(text)
    assert exc.value.field == "alpha_d" and exc.value.line == 2
    assert "alpha_d > 2" in str(exc.value)


def test_config_file_round_trip(tmp_path):
    params = NetworkParams(lambda_d=3.25, alpha_d=3.5, shadow_std_db=4.0, m=2, noise_dbm=-90.5)
    spec = SweepSpec(kind="alpha", orders=(1, 3), methods=("analytic", "simulation"), trials=2000, seed=9)
    path = tmp_path / "run.toml"
    path.write_text(dump_config(params, spec))
    p2, s2 = load_config(path)
    assert (p2, s2) == (params, spec)
    assert dump_config(p2, s2) == dump_config(params, spec)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.01, 100), st.floats(2.01, 8), st.floats(-50, 50), st.floats(0, 20),
    st.floats(-150, 0), st.integers(1, 6), st.floats(0.05, 10),
)
def test_round_trip_property(lam, alpha, p_d, std, noise, m, mu):
    params = NetworkParams(lambda_d=lam, alpha_d=alpha, p_d=p_d, shadow_std_db=std, noise_dbm=noise, m=m, mu=mu)
    again, _ = parse_config(dump_config(params))
    assert again == params


BAD_VALUES = {
    "lambda_d": [0.0, -1.0, "5", True, math.inf],
    "lambda_v": [-1.0, "x"],
    "p_d": ["23", math.nan],
    "alpha_d": [2.0, 1.5, -4.0, "4"],
    "mu": [0.0, -0.5],
    "shadow_mean_db": [math.inf, [0.0]],
    "shadow_std_db": [-0.5, "2"],
    "noise_dbm": [math.nan, False],
    "road_length_km": [0.0, -300.0],
    "m": [0, -1, 1.5, "1"],
}


def _toml(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, list):
        return "[" + ", ".join(map(str, value)) + "]"
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


@settings(max_examples=120, deadline=None)
@given(st.sampled_from(sorted(BAD_VALUES)).flatmap(lambda k: st.tuples(st.just(k), st.sampled_from(BAD_VALUES[k]))),
       st.integers(0, 4))
def test_config_fuzz_names_the_field(bad, padding):
    key, value = bad
    lines = ["# scenario"] * padding + ["lambda_d = 5.0" if key != "lambda_d" else "mu = 1.0"]
    lines.append(f"{key} = {_toml(value)}")
    with pytest.raises(ConfigError) as exc:
        parse_config("\n".join(lines) + "\n")
    assert exc.value.field == key
    assert exc.value.line == padding + 2
    assert key in str(exc.value)


def test_unknown_key_and_tables_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config("lambda_d = 5.0\nlamda = 4.0\n")
    assert exc.value.field == "lamda" and exc.value.line == 2
    with pytest.raises(ConfigError):
        parse_config("[network]\nlambda_d = 5.0\n")


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("lambda_d = 5.0\nalpha_d = = 4\n")
    assert exc.value.line == 2


def test_override_precedence(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("lambda_d = 7.0\nseed = 3\n")
    params, spec = load_config(path, {"lambda_d": 9.0})
    assert params.lambda_d == 9.0 and spec.seed == 3


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")


@pytest.mark.parametrize("kw,field", [
    (dict(kind="heatmap"), "kind"),
    (dict(grid=(0.0, 0.0, 1.0)), "grid"),
    (dict(orders=(1, 7)), "orders"),
    (dict(orders=(2, 2)), "orders"),
    (dict(methods=("analytic", "guess")), "methods"),
    (dict(kind="connectivity-diff", orders=(1,)), "orders"),
    (dict(trials=10), "trials"),
    (dict(kind="alpha", grid=(2.0, 3.0)), "grid"),
    (dict(baseline_lambda=0.0), "baseline_lambda"),
])
def test_sweep_spec_invariants(kw, field):
    with pytest.raises(ValidationError) as exc:
        SweepSpec(**kw)
    assert exc.value.field == field


# --- sweeps ------------------------------------------------------------------------------------


def test_smallest_threshold_sweep(params):
    curve = run_sweep(SweepSpec(grid=(-5.0, 0.0, 5.0), orders=(1,)), params)
    assert list(curve.series) == ["m1_analytic_coverage"]
    assert len(curve.series["m1_analytic_coverage"]) == 3
    assert not any(name.endswith("ci95") for name in curve.series)
    assert curve.variable == "threshold_db"


def test_density_sweep_saturates(params):
    curve = run_sweep(SweepSpec(kind="density"), params)
    for m in (1, 2, 3):
        assert saturates(curve.series[f"m{m}_analytic_coverage"])


def test_density_sweep_noise_limited_shape():
    # with metre units noise matters and the rise-then-flatten shape is visible
    params = NetworkParams(pathloss_unit_km=1e-3)
    curve = run_sweep(SweepSpec(kind="density", orders=(1,)), params)
    series = curve.series["m1_analytic_coverage"]
    steps = np.diff(series)
    assert np.all(steps >= 0) and steps[0] > 0.01 and steps[-1] < 0.1 * steps[0]


def test_connectivity_diff_is_unimodal(params):
    curve = run_sweep(SweepSpec(kind="connectivity-diff", orders=(1, 2, 3)), params)
    diff = curve.series["m2_minus_m1_analytic_coverage_diff"]
    assert is_unimodal(diff)
    np.testing.assert_allclose(diff, curve.series["m2_analytic_coverage"] - curve.series["m1_analytic_coverage"])


def test_alpha_sweep_with_simulation(params):
    spec = SweepSpec(kind="alpha", grid=(3.0, 4.0), orders=(1, 2), methods=("analytic", "simulation"), trials=4000)
    curve = run_sweep(spec, params)
    assert list(curve.series) == [
        "m1_analytic_coverage", "m2_analytic_coverage",
        "m1_simulation_coverage", "m1_simulation_ci95", "m2_simulation_coverage", "m2_simulation_ci95",
    ]
    for m in (1, 2):
        gap = np.abs(curve.series[f"m{m}_analytic_coverage"] - curve.series[f"m{m}_simulation_coverage"])
        assert np.all(gap <= np.maximum(0.01, 3 * curve.series[f"m{m}_simulation_ci95"]))


def test_baseline_series(params):
    spec = SweepSpec(grid=(0.0, 10.0), orders=(2,), baseline_lambda=10.0)
    curve = run_sweep(spec, params)
    assert np.all(curve.series["m2_analytic_coverage"] > curve.series["m1_baseline_analytic_coverage"])


def test_figure_presets():
    presets = figure_presets(trials=2000, seed=4)
    assert sorted(presets) == ["fig2", "fig3", "fig4", "fig5"]
    assert presets["fig2"].baseline_lambda == 10.0
    assert presets["fig3"].grid == (2.5, 3.0, 3.5, 4.0, 4.5)
    assert presets["fig5"].grid == tuple(float(d) for d in range(1, 21))
    assert all(p.trials == 2000 and p.seed == 4 for p in presets.values())


# --- CSV ----------------------------------------------------------------------------------------


def test_emit_csv_structure_and_determinism(tmp_path, params):
    curve = run_sweep(SweepSpec(grid=(-5.0, 0.0, 5.0), orders=(1,)), params)
    a = emit_csv(curve, tmp_path / "a.csv")
    b = emit_csv(curve, tmp_path / "b.csv")
    text = a.read_text()
    assert len(data_lines(text)) == 4
    assert data_lines(text)[0] == "threshold_db,m1_analytic_coverage"
    assert a.read_bytes() == b.read_bytes()
    assert any(line.startswith("# params: ") for line in text.splitlines())


def test_csv_round_trip(tmp_path, params):
    curve = run_sweep(SweepSpec(grid=(-5.0, 0.0, 5.0), orders=(1, 2)), params)
    path = emit_csv(curve, tmp_path / "c.csv")
    back = read_csv(path)
    assert back.variable == curve.variable
    assert back.provenance == curve.provenance
    for name, series in curve.series.items():
        np.testing.assert_array_equal(back.series[name], [float(f"{v:.9g}") for v in series])
    assert curve_to_csv(back) == path.read_text()


def test_emit_csv_reports_path_on_failure(tmp_path, params):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    curve = CoverageCurve("threshold_db", [0.0], {"m1_analytic_coverage": [0.5]})
    with pytest.raises(OSError) as exc:
        emit_csv(curve, blocker / "out.csv")
    assert str(blocker / "out.csv") in str(exc.value)


def test_curve_rejects_ragged_series():
    with pytest.raises(ValueError):
        CoverageCurve("threshold_db", [0.0, 1.0], {"m1_analytic_coverage": [0.5]})


def test_sweep_csv_identical_across_workers(tmp_path, params):
    spec = SweepSpec(grid=(-4.0, 0.0, 8.0), orders=(1, 2), methods=("analytic", "simulation"), trials=5000, seed=2)
    blobs = {curve_to_csv(run_sweep(spec, params, workers=w)) for w in (1, 4, 8)}
    assert len(blobs) == 1


def test_gnuplot_script(params):
    spec = SweepSpec(grid=(0.0, 4.0), orders=(1,), methods=("analytic", "simulation"), trials=1000)
    script = gnuplot_script(run_sweep(spec, params), "fig.csv")
    assert script.count("'fig.csv' using") == 2
    assert "using 1:4" not in script  # CI column is not drawn as a curve


def test_default_output_dir(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    assert default_output_dir() == tmp_path
    monkeypatch.delenv(OUTPUT_DIR_ENV)
    assert str(default_output_dir()) == "."


# --- shape helpers and validation -------------------------------------------------------------


def test_shape_helpers():
    assert is_unimodal([0, 0.1, 0.3, 0.2, 0.05])
    assert is_unimodal([0, 0.1, 0.1005, 0.1, 0.05])  # sub-slack wiggle ignored
    assert not is_unimodal([0, 0.2, 0.1, 0.3, 0.0])
    assert not is_unimodal([0.3, 0.1, 0.2])
    assert saturates([0.1, 0.3, 0.4, 0.41])
    assert not saturates([0.1, 0.2, 0.3, 0.4])
    assert not saturates([0.1, 0.3, 0.2, 0.21])


@pytest.mark.parametrize("n", [2, 3])
def test_marginal_of_joint(n):
    for x in (0.05, 0.2, 0.6):
        assert marginal_of_joint(x, n, 5.0) == pytest.approx(nth_nearest_pdf(x, n, 5.0), abs=1e-8)


@pytest.mark.slow
def test_noise_only_preset_within_half_percent(params):
    quiet = params.with_(**NOISE_ONLY_PRESET)
    model = replace(AnalyticModel.from_params(quiet, m=1), interference=False)
    drops = simulate_drops(quiet, 10**5, 11, (1,), SimulationConfig(interference=False))
    for e in coverage_from_sinr(drops.for_order(1), DEFAULT_THRESHOLDS_DB):
        t = db_to_linear(e.threshold_db)
        assert coverage_probability(t, model) == pytest.approx(noise_only_oracle(t, model), abs=1e-6)
        assert abs(coverage_probability(t, model) - e.probability) <= 0.005


def test_validate_requires_budget(params):
    with pytest.raises(ValidationError):
        validate(params, trials=5000)


@pytest.mark.slow
def test_validate_passes_and_canary_fails(params):
    report = validate(params, trials=10_000, seed=1)
    assert report.passed, [c for c in report.checks if not c.passed]
    assert report.to_csv().splitlines()[0] == "check,value_a,value_b,tolerance,verdict"
    broken = validate(params, trials=10_000, seed=1, analytic_lambda_scale=2.0)
    assert not broken.passed
    mid = [c for c in broken.checks if c.name.startswith("agreement") and any(f"t={t}dB" in c.name for t in (0, 2, 4, 6, 8, 10))]
    assert max(abs(c.value_a - c.value_b) for c in mid) > 0.05
    assert all(not c.passed for c in mid if c.name.startswith("agreement m=1"))
