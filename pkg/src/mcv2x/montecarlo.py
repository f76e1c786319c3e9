"""Monte Carlo estimation of downlink coverage on a finite road.

Each trial ("drop") samples a fresh deployment, shadowing marks and fading
gains from its own counter-based stream keyed by ``(seed, trial)``, so the
result of a trial never depends on how trials are split across workers.
All connectivity orders and thresholds are evaluated on the same drops.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import NetworkParams, db_to_linear, linear_to_db, sample_rayleigh_power
from .errors import InsufficientDeploymentError, InvalidArgumentError
from .point_process import transformed_intensity

Z_95 = 1.959963984540054
CHUNK_TRIALS = 2000
MAX_RESAMPLES = 3
FADING_MODES = ("common", "independent")
DOMAINS = ("displaced", "raw", "transformed")
DROP_CSV_COLUMNS = ("trial", "sinr_db", "serving_sum_dbm", "interference_dbm")
_LN10_OVER_10 = math.log(10.0) / 10.0


@dataclass(frozen=True)
class DropResult:
    sinr_linear: float
    serving_sum_watts: float
    interference_watts: float
    serving_count: int


@dataclass(frozen=True)
class CoverageEstimate:
    probability: float
    ci_half_width: float
    trials: int
    threshold_db: float
    successes: int


@dataclass(frozen=True)
class SimulationConfig:
    """How a drop is simulated.

    fading: ``common`` shares one Rayleigh gain across the serving set (the
        law the closed-form coverage integral evaluates); ``independent``
        gives every serving station its own gain. Interferers always carry
        independent gains.
    domain: ``displaced`` samples positions and shadowing and works with
        displaced distances; ``raw`` keeps original positions and explicit
        shadowing gains; ``transformed`` samples the displaced PPP directly
        at the transformed density.
    """

    fading: str = "common"
    domain: str = "displaced"
    interference: bool = True

    def __post_init__(self):
        if self.fading not in FADING_MODES:
            raise InvalidArgumentError(f"fading must be one of {FADING_MODES}, got {self.fading!r}")
        if self.domain not in DOMAINS:
            raise InvalidArgumentError(f"domain must be one of {DOMAINS}, got {self.domain!r}")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent Philox stream for one trial; the key packs seed and index."""
    if seed < 0 or trial < 0:
        raise InvalidArgumentError("seed and trial index must be non-negative")
    return np.random.Generator(np.random.Philox(key=(int(trial) << 64) | (int(seed) & (2**64 - 1))))


def wilson_half_width(successes: int, trials: int, z: float = Z_95) -> float:
    p = successes / trials
    denom = 1.0 + z * z / trials
    return z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denom


def ci_half_width(successes: int, trials: int, z: float = Z_95) -> float:
    """Normal-approximation 95% half-width; Wilson when fewer than 5
    successes or failures make the normal approximation unreliable."""
    if trials < 1:
        raise InvalidArgumentError("need at least one trial")
    if successes < 5 or trials - successes < 5:
        return wilson_half_width(successes, trials, z)
    p = successes / trials
    return z * math.sqrt(p * (1.0 - p) / trials)


def _displaced(params: NetworkParams, rng, lam=None):
    """Unsorted positions and shadowing in dB, drawn in the same order as
    :func:`sample_deployment` but without building a sorted Deployment."""
    lam = params.lambda_d if lam is None else lam
    half = 0.5 * params.road_length_km
    x = rng.uniform(-half, half, size=rng.poisson(lam * params.road_length_km))
    zero = x == 0.0
    while zero.any():
        x[zero] = rng.uniform(-half, half, size=int(zero.sum()))
        zero = x == 0.0
    if params.shadow_std_db > 0:
        shadow_db = rng.normal(params.shadow_mean_db, params.shadow_std_db, size=len(x))
    else:
        shadow_db = np.full(len(x), float(params.shadow_mean_db))
    return x, shadow_db


def displaced_distances(params: NetworkParams, rng) -> np.ndarray:
    """Unsorted ``chi**(-1/alpha) |x|`` for one fresh deployment."""
    x, shadow_db = _displaced(params, rng)
    return np.abs(x) * np.exp(shadow_db * (-_LN10_OVER_10 / params.alpha_d))


def _station_path_gains(params: NetworkParams, rng, domain):
    """Mean received power (no fast fading) of every station, unsorted."""
    p_eff = params.effective_power_watts
    a = params.alpha_d
    if domain == "transformed":
        lam_t = transformed_intensity(params.lambda_d, params.shadow_mean_db, params.shadow_std_db, a)
        x, _ = _displaced(params.with_(shadow_std_db=0.0, shadow_mean_db=0.0), rng, lam=lam_t)
        return p_eff * np.abs(x) ** (-a)
    if domain == "raw":
        x, shadow_db = _displaced(params, rng)
        chi = 10.0 ** (shadow_db / 10.0)
        return p_eff * chi * np.abs(x) ** (-a)
    x, shadow_db = _displaced(params, rng)
    y = np.abs(x) * np.exp(shadow_db * (-_LN10_OVER_10 / a))
    return p_eff * y ** (-a)


def _draw(params: NetworkParams, rng, need: int, domain: str):
    for _ in range(1 + MAX_RESAMPLES):
        h = _station_path_gains(params, rng, domain)
        if len(h) >= need:
            break
    else:
        raise InsufficientDeploymentError(
            f"fewer than {need} base stations after {MAX_RESAMPLES} resamples "
            f"(lambda_d={params.lambda_d}, road={params.road_length_km} km)"
        )
    g = sample_rayleigh_power(params.mu, rng, size=len(h))
    g_common = sample_rayleigh_power(params.mu, rng)
    return h, g, g_common


def _powers_for_orders(h, g, g_common, orders, sim: SimulationConfig):
    """Serving and interference power for each order; the strongest mean
    powers (smallest displaced distances) are served."""
    top_k = max(orders)
    if len(h) > top_k:
        top = np.argpartition(-h, top_k - 1)[:top_k]
    else:
        top = np.arange(len(h))
    top = top[np.argsort(-h[top], kind="stable")]
    rest = np.ones(len(h), dtype=bool)
    rest[top] = False
    beyond = float(np.dot(g[rest], h[rest]))
    h_top = h[top]
    rec_top = g[top] * h_top
    serving_terms = h_top * g_common if sim.fading == "common" else rec_top
    serving = np.empty(len(orders))
    interference = np.empty(len(orders))
    for k, m in enumerate(orders):
        serving[k] = serving_terms[:m].sum()
        interference[k] = (beyond + rec_top[m:].sum()) if sim.interference else 0.0
    return serving, interference


def run_drop(params: NetworkParams, rng: np.random.Generator, sim: SimulationConfig | None = None) -> DropResult:
    """One realization of the SINR at the typical vehicle for ``params.m`` servers."""
    sim = sim or SimulationConfig()
    m = int(params.m)
    h, g, g_common = _draw(params, rng, m, sim.domain)
    serving, interference = _powers_for_orders(h, g, g_common, [m], sim)
    s, i = float(serving[0]), float(interference[0])
    return DropResult(s / (i + params.noise_watts), s, i, m)


@dataclass
class DropSamples:
    """Per-drop serving and interference powers, shape ``(trials, len(orders))``."""

    orders: tuple
    serving: np.ndarray
    interference: np.ndarray
    noise_watts: float

    @property
    def sinr(self) -> np.ndarray:
        return self.serving / (self.interference + self.noise_watts)

    def for_order(self, m: int) -> np.ndarray:
        return self.sinr[:, self.orders.index(m)]


def _simulate_chunk(args):
    params, orders, seed, start, stop, sim = args
    need = max(orders)
    serving = np.empty((stop - start, len(orders)))
    interference = np.empty_like(serving)
    for row, trial in enumerate(range(start, stop)):
        rng = trial_rng(seed, trial)
        h, g, g_common = _draw(params, rng, need, sim.domain)
        serving[row], interference[row] = _powers_for_orders(h, g, g_common, orders, sim)
    return start, serving, interference


def simulate_drops(params: NetworkParams, trials: int, seed: int, orders=None,
                   sim: SimulationConfig | None = None, workers: int = 1) -> DropSamples:
    sim = sim or SimulationConfig()
    orders = tuple(int(m) for m in (orders if orders is not None else [params.m]))
    if not orders or min(orders) < 1:
        raise InvalidArgumentError(f"connectivity orders must be >= 1, got {orders}")
    if trials < 1:
        raise InvalidArgumentError("need at least one trial")
    jobs = [
        (params, orders, seed, s, min(s + CHUNK_TRIALS, trials), sim)
        for s in range(0, trials, CHUNK_TRIALS)
    ]
    serving = np.empty((trials, len(orders)))
    interference = np.empty_like(serving)
    if workers <= 1 or len(jobs) == 1:
        results = map(_simulate_chunk, jobs)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_simulate_chunk, jobs)
    try:
        for start, s, i in results:
            serving[start : start + len(s)] = s
            interference[start : start + len(i)] = i
    finally:
        if workers > 1 and len(jobs) > 1:
            pool.shutdown()
    return DropSamples(orders, serving, interference, params.noise_watts)


def coverage_from_sinr(sinr_linear, thresholds_db) -> list[CoverageEstimate]:
    """Fraction of drops whose SINR strictly exceeds each threshold."""
    sinr_linear = np.asarray(sinr_linear, dtype=float)
    n = len(sinr_linear)
    out = []
    for t_db in np.atleast_1d(np.asarray(thresholds_db, dtype=float)):
        k = int(np.count_nonzero(sinr_linear > db_to_linear(float(t_db))))
        out.append(CoverageEstimate(k / n, ci_half_width(k, n), n, float(t_db), k))
    return out


def estimate_coverage(params: NetworkParams, thresholds_db, trials: int, seed: int,
                      sim: SimulationConfig | None = None, workers: int = 1,
                      orders=None):
    """Coverage estimates over a threshold grid.

    Returns a list of :class:`CoverageEstimate` for ``params.m``, or a dict
    keyed by order when ``orders`` is given (all orders share the drops).
    """
    if trials < 1000:
        raise InvalidArgumentError(f"need at least 1000 trials, got {trials}")
    thresholds_db = np.atleast_1d(np.asarray(thresholds_db, dtype=float))
    if not np.all(np.isfinite(thresholds_db)):
        raise InvalidArgumentError("thresholds must be finite")
    use = tuple(orders) if orders is not None else (int(params.m),)
    drops = simulate_drops(params, trials, seed, use, sim, workers)
    per_order = {m: coverage_from_sinr(drops.for_order(m), thresholds_db) for m in use}
    return per_order if orders is not None else per_order[use[0]]


def _laplace_chunk(args):
    params, j_grid, x_m_mode, seed, start, stop, conditional = args
    a, mu, p_eff = params.alpha_d, params.mu, params.effective_power_watts
    acc = np.zeros(len(j_grid))
    acc_sq = np.zeros(len(j_grid))
    for trial in range(start, stop):
        rng = trial_rng(seed, trial)
        y = displaced_distances(params, rng)
        if x_m_mode == "serving":
            if len(y) <= params.m:
                h = np.empty(0)
            else:
                h = p_eff * np.partition(y, params.m - 1)[params.m :] ** (-a)
        else:
            h = p_eff * y[y > x_m_mode] ** (-a)
        if conditional:
            # fading averaged exactly per station: E[e^{-j g h}] = mu / (mu + j h)
            v = np.exp(-np.sum(np.log1p(np.outer(j_grid, h) / mu), axis=1))
        else:
            interference = float(np.dot(sample_rayleigh_power(mu, rng, size=len(h)), h))
            v = np.exp(-j_grid * interference)
        acc += v
        acc_sq += v * v
    return acc, acc_sq


def estimate_laplace(params: NetworkParams, j_grid, x_m_mode, trials: int, seed: int,
                     conditional: bool = False, workers: int = 1, return_stderr: bool = False):
    """Empirical Laplace transform ``E[exp(-j I)]`` of the interference.

    ``x_m_mode`` is either a fixed guard distance in km (interferers are the
    displaced stations beyond it) or ``"serving"`` (everything beyond the
    ``params.m`` nearest). ``conditional=True`` averages the fading in closed
    form for each drop, leaving only the point process to be simulated.
    """
    j_grid = np.atleast_1d(np.asarray(j_grid, dtype=float))
    if np.any(j_grid < 0) or not np.all(np.isfinite(j_grid)):
        raise InvalidArgumentError("Laplace arguments must be finite and >= 0")
    if x_m_mode != "serving" and not (isinstance(x_m_mode, (int, float)) and x_m_mode > 0):
        raise InvalidArgumentError(f"x_m_mode must be 'serving' or a positive distance, got {x_m_mode!r}")
    jobs = [
        (params, j_grid, x_m_mode, seed, s, min(s + CHUNK_TRIALS, trials), conditional)
        for s in range(0, trials, CHUNK_TRIALS)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_laplace_chunk, jobs))
    else:
        parts = [_laplace_chunk(job) for job in jobs]
    total = np.sum([p[0] for p in parts], axis=0)
    total_sq = np.sum([p[1] for p in parts], axis=0)
    mean = total / trials
    pairs = list(zip(j_grid.tolist(), mean.tolist()))
    if not return_stderr:
        return pairs
    var = np.maximum(total_sq / trials - mean**2, 0.0)
    return pairs, np.sqrt(var / max(trials - 1, 1))


def write_drops_csv(drops: DropSamples, path, order: int | None = None) -> None:
    order = order if order is not None else drops.orders[0]
    k = drops.orders.index(order)
    s = drops.serving[:, k]
    i = drops.interference[:, k]
    sinr_db = linear_to_db(s / (i + drops.noise_watts))
    with np.errstate(divide="ignore"):
        s_dbm = 10.0 * np.log10(s) + 30.0
        i_dbm = 10.0 * np.log10(i) + 30.0
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DROP_CSV_COLUMNS)
        for trial in range(len(s)):
            w.writerow([trial, f"{sinr_db[trial]:.9g}", f"{s_dbm[trial]:.9g}", f"{i_dbm[trial]:.9g}"])
