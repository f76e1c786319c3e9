"""Configuration, figure sweeps, analytic-vs-simulation validation and CSV output."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy import integrate, stats

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .analytic import (
    AnalyticModel,
    QuadratureSpec,
    coverage_probability,
    interference_laplace,
    joint_distance_pdf,
    nth_nearest_pdf,
)
from .channel import SINGLE_CONNECTIVITY_DENSITY, NetworkParams, db_to_linear, sample_shadowing_linear
from .errors import ConfigError, ValidationError
from .montecarlo import (
    SimulationConfig,
    coverage_from_sinr,
    displaced_distances,
    estimate_laplace,
    simulate_drops,
    trial_rng,
)
from .point_process import check_road_length, transformed_intensity

OUTPUT_DIR_ENV = "MCV2X_OUTPUT_DIR"
FIGURE_TRIALS = 10_000
VALIDATION_TRIALS = 100_000
DEFAULT_THRESHOLDS_DB = tuple(float(t) for t in range(-10, 21, 2))
DEFAULT_ALPHAS = (2.5, 3.0, 3.5, 4.0, 4.5)
DEFAULT_DENSITIES = tuple(float(d) for d in range(1, 21))
SWEEP_KINDS = ("threshold", "alpha", "density", "connectivity-diff")
METHODS = ("analytic", "simulation")
MAX_ORDER = 6
LAPLACE_GUARD_KM = 0.1
LAPLACE_J_GRID = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)
UNIMODAL_SLACK = 0.002
# the Laplace estimate is a mean of a [0, 1] variable with O(0.3) spread
LAPLACE_TRIAL_FACTOR = 10

_VARIABLE_COLUMNS = {
    "threshold": "threshold_db",
    "connectivity-diff": "threshold_db",
    "alpha": "alpha_d",
    "density": "lambda_d_per_km",
}


@dataclass(frozen=True)
class SweepSpec:
    kind: str = "threshold"
    grid: tuple = ()
    orders: tuple = (1, 2, 3)
    methods: tuple = ("analytic",)
    trials: int = VALIDATION_TRIALS
    seed: int = 1
    threshold_db: float = 0.0
    baseline_lambda: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(g) for g in (self.grid or self.default_grid())))
        object.__setattr__(self, "orders", tuple(int(m) for m in self.orders))
        object.__setattr__(self, "methods", tuple(self.methods))
        self.validate()

    def default_grid(self):
        if self.kind == "alpha":
            return DEFAULT_ALPHAS
        if self.kind == "density":
            return DEFAULT_DENSITIES
        return DEFAULT_THRESHOLDS_DB

    def validate(self):
        if self.kind not in SWEEP_KINDS:
            raise ValidationError(f"must be one of {SWEEP_KINDS}, got {self.kind!r}", field="kind")
        g = np.asarray(self.grid, dtype=float)
        if g.size == 0 or not np.all(np.isfinite(g)) or np.any(np.diff(g) <= 0):
            raise ValidationError("grid must be non-empty, finite and strictly increasing", field="grid")
        if not self.orders or any(m < 1 or m > MAX_ORDER for m in self.orders):
            raise ValidationError(f"orders must lie in 1..{MAX_ORDER}", field="orders")
        if len(set(self.orders)) != len(self.orders):
            raise ValidationError("orders must be distinct", field="orders")
        if self.kind == "connectivity-diff" and len(self.orders) < 2:
            raise ValidationError("connectivity-diff needs at least two orders", field="orders")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ValidationError(f"methods must be a non-empty subset of {METHODS}", field="methods")
        if self.trials < 1000:
            raise ValidationError("trials must be >= 1000", field="trials")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0", field="seed")
        if not math.isfinite(self.threshold_db):
            raise ValidationError("threshold must be finite", field="threshold_db")
        if self.kind == "alpha" and np.any(g <= 2):
            raise ValidationError("alpha grid values must be > 2", field="grid")
        if self.kind == "density" and np.any(g <= 0):
            raise ValidationError("density grid values must be > 0", field="grid")
        if self.baseline_lambda is not None and not self.baseline_lambda > 0:
            raise ValidationError("baseline density must be > 0", field="baseline_lambda")


# --- configuration -----------------------------------------------------------------

_PARAM_FIELDS = {f.name for f in fields(NetworkParams)}
_SWEEP_FIELDS = {f.name for f in fields(SweepSpec)}
_INT_FIELDS = {"m", "trials", "seed"}
_LIST_FIELDS = {"grid", "orders", "methods"}
_STR_FIELDS = {"kind"}


def _line_of(text: str, key: str):
    for n, line in enumerate(text.splitlines(), start=1):
        if re.match(rf"\s*{re.escape(key)}\s*=", line):
            return n
    return None


def _coerce(key, value, text):
    line = _line_of(text, key)
    if key in _STR_FIELDS:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", field=key, line=line)
        return value
    if key in _LIST_FIELDS:
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {value!r}", field=key, line=line)
        want = str if key == "methods" else (int if key == "orders" else (int, float))
        for v in value:
            if isinstance(v, bool) or not isinstance(v, want):
                raise ConfigError(f"bad list element {v!r}", field=key, line=line)
        return tuple(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=key, line=line)
    if key in _INT_FIELDS:
        if isinstance(value, float):
            raise ConfigError(f"expected an integer, got {value!r}", field=key, line=line)
        return int(value)
    return float(value)


def parse_config(text: str, overrides: dict | None = None):
    """Parse flat TOML text into ``(NetworkParams, SweepSpec)``.

    Precedence: ``overrides`` > file > built-in defaults.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", line=int(m.group(1)) if m else None) from exc
    raw.update(overrides or {})
    params_kw, sweep_kw = {}, {}
    for key, value in raw.items():
        if isinstance(value, dict):
            raise ConfigError("config must be flat; tables are not allowed", field=key, line=_line_of(text, key))
        if key in _PARAM_FIELDS:
            params_kw[key] = _coerce(key, value, text)
        elif key in _SWEEP_FIELDS:
            sweep_kw[key] = _coerce(key, value, text)
        else:
            raise ConfigError("unknown key", field=key, line=_line_of(text, key))
    try:
        params = NetworkParams(**params_kw)
        spec = SweepSpec(**sweep_kw)
    except ValidationError as exc:
        raise ValidationError(str(exc).split(" (field")[0], field=exc.field, line=_line_of(text, exc.field)) from exc
    return params, spec


def load_config(path, overrides: dict | None = None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, overrides)


def _toml_value(v):
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(params: NetworkParams, spec: SweepSpec | None = None) -> str:
    items = list(asdict(params).items())
    if spec is not None:
        items += [(k, v) for k, v in asdict(spec).items() if v is not None]
    return "".join(f"{k} = {_toml_value(v)}\n" for k, v in items)


# --- sweeps --------------------------------------------------------------------------


@dataclass
class CoverageCurve:
    variable: str
    values: np.ndarray
    series: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        for name, s in self.series.items():
            if len(s) != len(self.values):
                raise ValueError(f"series {name} has length {len(s)}, grid has {len(self.values)}")


def _coverage_column(m, method, baseline=False):
    return f"m{m}_{'baseline_' if baseline else ''}{method}_coverage"


def _analytic(params, m, thresholds_db, quad):
    model = AnalyticModel.from_params(params, m=m)
    return np.array([coverage_probability(db_to_linear(t), model, quad) for t in thresholds_db])


def _simulated(params, orders, thresholds_db, spec, workers, sim):
    drops = simulate_drops(params, spec.trials, spec.seed, orders, sim, workers)
    return {m: coverage_from_sinr(drops.for_order(m), thresholds_db) for m in orders}


def _add_threshold_series(series, params, spec, orders, quad, workers, sim, baseline=False):
    grid = spec.grid
    if "analytic" in spec.methods:
        for m in orders:
            series[_coverage_column(m, "analytic", baseline)] = _analytic(params, m, grid, quad)
    if "simulation" in spec.methods:
        est = _simulated(params, orders, grid, spec, workers, sim)
        for m in orders:
            series[_coverage_column(m, "simulation", baseline)] = np.array([e.probability for e in est[m]])
            series[f"m{m}_{'baseline_' if baseline else ''}simulation_ci95"] = np.array(
                [e.ci_half_width for e in est[m]]
            )


def _parameter_sweep(params, spec, quad, workers, sim):
    key = "alpha_d" if spec.kind == "alpha" else "lambda_d"
    series = {}
    cols = {}
    for value in spec.grid:
        p = params.with_(**{key: value})
        if "analytic" in spec.methods:
            for m in spec.orders:
                model = AnalyticModel.from_params(p, m=m)
                cols.setdefault(_coverage_column(m, "analytic"), []).append(
                    coverage_probability(db_to_linear(spec.threshold_db), model, quad)
                )
        if "simulation" in spec.methods:
            est = _simulated(p, spec.orders, [spec.threshold_db], spec, workers, sim)
            for m in spec.orders:
                cols.setdefault(_coverage_column(m, "simulation"), []).append(est[m][0].probability)
                cols.setdefault(f"m{m}_simulation_ci95", []).append(est[m][0].ci_half_width)
    for name in _ordered_columns(cols, spec):
        series[name] = np.asarray(cols[name])
    return series


def _ordered_columns(cols, spec):
    order = []
    for method in METHODS:
        for m in spec.orders:
            for name in (_coverage_column(m, method), f"m{m}_{method}_ci95"):
                if name in cols:
                    order.append(name)
    return order


def run_sweep(spec: SweepSpec, params: NetworkParams, quad: QuadratureSpec | None = None,
              workers: int = 1, sim: SimulationConfig | None = None) -> CoverageCurve:
    """Evaluate one figure-style sweep; every series spans the whole grid."""
    quad = quad or QuadratureSpec()
    sim = sim or SimulationConfig()
    if "simulation" in spec.methods:
        check_road_length(params)
    if spec.kind in ("threshold", "connectivity-diff"):
        series = {}
        _add_threshold_series(series, params, spec, spec.orders, quad, workers, sim)
        if spec.baseline_lambda is not None:
            _add_threshold_series(
                series, params.with_(lambda_d=spec.baseline_lambda), spec, (1,), quad, workers, sim, baseline=True
            )
        if spec.kind == "connectivity-diff":
            base = spec.orders[0]
            diffs = {}
            for method in spec.methods:
                for m in spec.orders[1:]:
                    diffs[f"m{m}_minus_m{base}_{method}_coverage_diff"] = (
                        series[_coverage_column(m, method)] - series[_coverage_column(base, method)]
                    )
            series = {**series, **diffs}
    else:
        series = _parameter_sweep(params, spec, quad, workers, sim)
    provenance = {
        "tool": f"mcv2x {__version__}",
        "kind": spec.kind,
        "params": asdict(params),
        "sweep": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(spec).items()},
        "simulation": asdict(sim),
    }
    return CoverageCurve(_VARIABLE_COLUMNS[spec.kind], np.asarray(spec.grid), series, provenance)


# --- CSV -------------------------------------------------------------------------------


def _fmt(v) -> str:
    return f"{float(v):.9g}"


def curve_to_csv(curve: CoverageCurve) -> str:
    buf = io.StringIO()
    for key in sorted(curve.provenance):
        buf.write(f"# {key}: {json.dumps(curve.provenance[key], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    names = list(curve.series)
    w.writerow([curve.variable, *names])
    for i, v in enumerate(curve.values):
        w.writerow([_fmt(v), *(_fmt(curve.series[n][i]) for n in names)])
    return buf.getvalue()


def emit_csv(curve: CoverageCurve, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(curve_to_csv(curve))
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
    return path


def read_csv(path) -> CoverageCurve:
    """Load a curve written by :func:`emit_csv` (the plotting-side reader)."""
    provenance = {}
    rows = []
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(": ")
                provenance[key] = json.loads(value)
            else:
                rows.append(line)
    table = list(csv.reader(rows))
    header, body = table[0], table[1:]
    data = np.array([[float(x) for x in r] for r in body], dtype=float).reshape(len(body), len(header))
    series = {name: data[:, k + 1] for k, name in enumerate(header[1:])}
    return CoverageCurve(header[0], data[:, 0], series, provenance)


def gnuplot_script(curve: CoverageCurve, csv_name: str) -> str:
    xlabel = {"threshold_db": "Threshold t (dB)", "alpha_d": "Path-loss exponent", "lambda_d_per_km": "DBS density (nodes/km)"}
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set xlabel '{xlabel.get(curve.variable, curve.variable)}'",
        "set ylabel 'Coverage probability'",
        "set grid",
    ]
    plots = []
    for k, name in enumerate(curve.series, start=2):
        if name.endswith("_ci95"):
            continue
        style = "points pt 7" if "simulation" in name else "lines dt 2"
        plots.append(f"'{csv_name}' using 1:{k} with {style}")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


# --- figure presets ----------------------------------------------------------------------


def figure_presets(trials: int = FIGURE_TRIALS, seed: int = 1) -> dict:
    both = METHODS
    return {
        "fig2": SweepSpec("threshold", DEFAULT_THRESHOLDS_DB, (1, 2, 3), both, trials, seed,
                          baseline_lambda=SINGLE_CONNECTIVITY_DENSITY),
        "fig3": SweepSpec("alpha", DEFAULT_ALPHAS, (1, 2, 3), both, trials, seed, threshold_db=0.0),
        "fig4": SweepSpec("connectivity-diff", DEFAULT_THRESHOLDS_DB, (1, 2, 3), both, trials, seed),
        "fig5": SweepSpec("density", DEFAULT_DENSITIES, (1, 2, 3), ("analytic",), trials, seed, threshold_db=0.0),
    }


# --- shape checks shared by validate and the acceptance suite ---------------------------


def is_unimodal(series, slack: float = UNIMODAL_SLACK) -> bool:
    """Rises to one maximum then falls; steps smaller than ``slack`` are ignored."""
    steps = np.diff(np.asarray(series, dtype=float))
    signs = [np.sign(s) for s in steps if abs(s) >= slack]
    changes = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    if changes == 0:
        return True
    return changes == 1 and signs[0] > 0


def saturates(series) -> bool:
    steps = np.diff(np.asarray(series, dtype=float))
    return bool(np.all(steps >= 0) and steps[-1] < 0.1 * steps[0])


# --- validation ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    value_a: float
    value_b: float
    tolerance: float
    passed: bool


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "value_a", "value_b", "tolerance", "verdict"])
        for c in self.checks:
            w.writerow([c.name, _fmt(c.value_a), _fmt(c.value_b), _fmt(c.tolerance), "PASS" if c.passed else "FAIL"])
        return buf.getvalue()

    def lines(self):
        for c in self.checks:
            yield (f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value_a:.6g} vs {c.value_b:.6g} "
                   f"(tol {c.tolerance:.3g})")


def _agreement(name, analytic, estimate):
    tol = max(0.01, 3.0 * estimate.ci_half_width)
    return Check(name, analytic, estimate.probability, tol, abs(analytic - estimate.probability) <= tol)


def noise_only_oracle(t: float, model: AnalyticModel) -> float:
    """Interference-free coverage for one server by adaptive 1-D quadrature."""
    rate = 2.0 * model.lambda_t
    k = model.mu * t * model.noise_watts / model.effective_power

    def f(x):
        return math.exp(-k * x**model.alpha) * rate * math.exp(-rate * x)

    return integrate.quad(f, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)[0]


# noise strong enough that the interference-free link is not trivially covered
NOISE_ONLY_PRESET = {"noise_dbm": 49.0}


def validate(params: NetworkParams, trials: int = VALIDATION_TRIALS, seed: int = 1,
             workers: int = 1, quad: QuadratureSpec | None = None,
             analytic_lambda_scale: float = 1.0) -> ValidationReport:
    """Run the analytic-vs-simulation agreement suite.

    ``analytic_lambda_scale`` multiplies the interferer density seen by the
    analytic side only; values other than 1 deliberately break agreement
    (sensitivity canary). Scaling every density at once would not: without
    noise the coverage is invariant to density.
    """
    if trials < 10_000:
        raise ValidationError("validation needs at least 10^4 trials", field="trials")
    quad = quad or QuadratureSpec()
    checks = []
    grid = DEFAULT_THRESHOLDS_DB
    orders = (1, 2, 3)

    def model_for(p, m, **kw):
        model = AnalyticModel.from_params(p, m=m, **kw)
        if analytic_lambda_scale == 1.0:
            return model
        return replace(model, interferer_lambda=model.lambda_t * analytic_lambda_scale)

    analytic = {m: np.array([coverage_probability(db_to_linear(t), model_for(params, m), quad) for t in grid])
                for m in orders}
    drops = simulate_drops(params, trials, seed, orders, workers=workers)
    for m in orders:
        for t, a, e in zip(grid, analytic[m], coverage_from_sinr(drops.for_order(m), grid)):
            checks.append(_agreement(f"agreement m={m} t={t:g}dB", a, e))

    for t, a1, a2, a3 in zip(grid, analytic[1], analytic[2], analytic[3]):
        checks.append(Check(f"ordering m3>=m2>=m1 t={t:g}dB", a3 - a2, a2 - a1, 0.0, a3 >= a2 >= a1))
    baseline = params.with_(lambda_d=SINGLE_CONNECTIVITY_DENSITY)
    for t, a2 in zip(grid, analytic[2]):
        b = coverage_probability(db_to_linear(t), model_for(baseline, 1), quad)
        checks.append(Check(f"dual(lambda_d) > single(lambda_c) t={t:g}dB", a2, b, 0.0, a2 > b))

    alpha_curves = {m: [] for m in orders}
    for a in DEFAULT_ALPHAS:
        p = params.with_(alpha_d=a)
        alpha_drops = simulate_drops(p, trials, seed, orders, workers=workers)
        for m in orders:
            alpha_curves[m].append(coverage_probability(1.0, model_for(p, m), quad))
            est = coverage_from_sinr(alpha_drops.for_order(m), [0.0])[0]
            checks.append(_agreement(f"alpha agreement m={m} alpha={a:g}", alpha_curves[m][-1], est))
    for m in orders:
        steps = np.diff(alpha_curves[m])
        checks.append(Check(f"alpha trend increasing m={m}", float(steps.min()), 0.0, 0.0, bool(np.all(steps > 0))))

    diff = analytic[2] - analytic[1]
    checks.append(Check("difference m2-m1 unimodal", float(diff.max()), float(grid[int(diff.argmax())]),
                        UNIMODAL_SLACK, is_unimodal(diff)))

    for m in orders:
        dens = [coverage_probability(1.0, model_for(params.with_(lambda_d=d), m), quad) for d in DEFAULT_DENSITIES]
        steps = np.diff(dens)
        checks.append(Check(f"density saturation m={m}", float(steps[-1]), float(steps[0]), 0.1, saturates(dens)))

    lam_t = transformed_intensity(params.lambda_d, params.shadow_mean_db, params.shadow_std_db, params.alpha_d)
    for n in (1, 2, 3):
        total = _joint_pdf_mass(n, lam_t)
        checks.append(Check(f"joint pdf normalization n={n}", total, 1.0, 1e-6, abs(total - 1.0) <= 1e-6))
    for n in (2, 3):
        err = _marginal_error(n, lam_t)
        checks.append(Check(f"joint pdf marginal vs Erlang n={n}", err, 0.0, 1e-6, err <= 1e-6))
    dist = serving_distances(params, orders, trials, seed)
    for k, m in enumerate(orders):
        pval = float(stats.kstest(dist[:, k], stats.gamma(a=m, scale=1.0 / (2.0 * lam_t)).cdf).pvalue)
        checks.append(Check(f"KS m-th serving distance m={m}", pval, 0.01, 0.01, pval > 0.01))

    moment = _shadow_moment(params, 10**6, seed)
    factor = lam_t / params.lambda_d
    checks.append(Check("displacement moment", moment, factor, 1e-3, abs(moment / factor - 1.0) <= 1e-3))

    lap_model = model_for(params, 1)
    pairs, stderr = estimate_laplace(params, LAPLACE_J_GRID, LAPLACE_GUARD_KM, LAPLACE_TRIAL_FACTOR * trials, seed,
                                     conditional=True, workers=workers, return_stderr=True)
    for (j, emp), se in zip(pairs, stderr):
        a = interference_laplace(j, LAPLACE_GUARD_KM, lap_model, quad.inner_nodes)
        tol = max(1e-3, 3.0 * float(se))
        checks.append(Check(f"Laplace x_m={LAPLACE_GUARD_KM} j={j:g}", a, emp, tol, abs(a - emp) <= tol))

    quiet = params.with_(**NOISE_ONLY_PRESET)
    quiet_drops = simulate_drops(quiet, trials, seed, (1,), SimulationConfig(interference=False), workers)
    for t, e in zip(grid, coverage_from_sinr(quiet_drops.for_order(1), grid)):
        model = model_for(quiet, 1, interference=False)
        a = coverage_probability(db_to_linear(t), model, quad)
        oracle = noise_only_oracle(db_to_linear(t), model)
        tol = max(0.005, 3.0 * e.ci_half_width)
        ok = abs(a - oracle) <= 1e-6 and abs(a - e.probability) <= tol
        checks.append(Check(f"noise-only m=1 t={t:g}dB", a, e.probability, tol, ok))
    return ValidationReport(checks)


def _joint_pdf_mass(n: int, lam: float) -> float:
    if n == 1:
        f = lambda x1: joint_distance_pdf([x1], lam)
        return integrate.quad(f, 0, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
    if n == 2:
        f = lambda x2, x1: joint_distance_pdf([x1, x2], lam)
        return integrate.dblquad(f, 0, np.inf, lambda x1: x1, lambda x1: np.inf, epsabs=1e-12, epsrel=1e-11)[0]
    f = lambda x3, x2, x1: joint_distance_pdf([x1, x2, x3], lam)
    return integrate.tplquad(f, 0, np.inf, lambda x1: x1, lambda x1: np.inf,
                             lambda x1, x2: x2, lambda x1, x2: np.inf, epsabs=1e-10, epsrel=1e-10)[0]


def marginal_of_joint(x: float, n: int, lam: float) -> float:
    """Integrate the joint density over ``0 < x_1 < ... < x_{n-1} < x``."""
    if n == 1:
        return joint_distance_pdf([x], lam)
    if n == 2:
        return integrate.quad(lambda x1: joint_distance_pdf([x1, x], lam), 0, x, epsabs=1e-13, epsrel=1e-12)[0]
    if n == 3:
        f = lambda x2, x1: joint_distance_pdf([x1, x2, x], lam) if x1 < x2 < x else 0.0
        return integrate.dblquad(f, 0, x, lambda x1: x1, lambda x1: x, epsabs=1e-13, epsrel=1e-12)[0]
    raise ValueError("marginal oracle implemented for n <= 3")


def marginal_grid(lam: float, points: int = 50) -> np.ndarray:
    """Grid spanning the bulk of the Erlang mass for orders up to 3."""
    return np.linspace(0.02, 8.0, points) / (2.0 * lam)


def _marginal_error(n: int, lam: float) -> float:
    xs = marginal_grid(lam)
    return float(max(abs(marginal_of_joint(x, n, lam) - nth_nearest_pdf(x, n, lam)) for x in xs))


def serving_distances(params: NetworkParams, orders, trials: int, seed: int) -> np.ndarray:
    """Displaced distance of the m-th nearest station per deployment, one column per order."""
    idx = np.asarray(orders, dtype=int) - 1
    out = np.empty((trials, len(idx)))
    kmax = int(idx.max()) + 1
    for k in range(trials):
        y = displaced_distances(params, trial_rng(seed, k))
        out[k] = np.sort(np.partition(y, kmax - 1)[:kmax])[idx]
    return out


def _shadow_moment(params: NetworkParams, draws: int, seed: int) -> float:
    chi = sample_shadowing_linear(params.shadow_mean_db, params.shadow_std_db, trial_rng(seed, 0), size=draws)
    # chi^(+1/alpha): its mean is the factor for a general omega (equal to chi^(-1/alpha) at omega = 0)
    return float(np.mean(np.asarray(chi) ** (1.0 / params.alpha_d)))
