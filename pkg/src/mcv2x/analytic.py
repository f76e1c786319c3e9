"""Quadrature evaluation of the multi-connectivity coverage expressions.

Ordered serving distances ``0 < x_1 < ... < x_m`` of a 1-D PPP with density
``lam`` have joint density ``(2 lam)**m exp(-2 lam x_m)``, which factorizes
into i.i.d. Exp(2 lam) gaps ``x_i - x_{i-1}``. The outer m-fold integral is
an expectation over that law. The default rule integrates the farthest
serving distance (Erlang) with composite Gauss-Legendre and the remaining
distance ratios (i.i.d. uniform) with Gauss-Legendre; the ``gaps`` rule uses
tensor Gauss-Laguerre over the exponential gaps instead. Both refine by node
doubling.

The interference Laplace transform reduces, after ``x = x_m v``, to
``exp(-2 lam x_m F(c))`` with ``F(c) = int_1^inf dv / (1 + c v**alpha)`` and
``c = mu x_m**alpha / (j P)``; ``F`` is evaluated on ``(0, 1]`` with
geometrically graded Gauss-Legendre panels.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial.laguerre import laggauss
from numpy.polynomial.legendre import leggauss
from scipy import stats
from scipy.stats import qmc

from .channel import NetworkParams, db_to_linear
from .errors import AccuracyError, InvalidArgumentError, OrderingError
from .point_process import transformed_intensity

_CHUNK = 1 << 15
RADIAL_PANELS = 8
ERLANG_TAIL = 1e-16


@dataclass(frozen=True)
class QuadratureSpec:
    gap_nodes: int = 16
    inner_nodes: int = 16
    rel_tol: float = 1e-6
    max_refinements: int = 5
    abs_tol: float = 1e-9
    max_tensor_order: int = 6
    outer: str = "radial"
    max_nodes: int = 256
    qmc_points: int = 1 << 14
    qmc_replicates: int = 16
    qmc_seed: int = 20230901

    def __post_init__(self):
        if self.gap_nodes < 8:
            raise InvalidArgumentError(f"gap_nodes must be >= 8, got {self.gap_nodes}")
        if self.inner_nodes < 16:
            raise InvalidArgumentError(f"inner_nodes must be >= 16, got {self.inner_nodes}")
        if not 0 < self.rel_tol < 0.1:
            raise InvalidArgumentError(f"rel_tol must lie in (0, 0.1), got {self.rel_tol}")
        if self.max_refinements < 1:
            raise InvalidArgumentError("max_refinements must be >= 1")
        if self.outer not in ("radial", "gaps"):
            raise InvalidArgumentError(f"outer rule must be 'radial' or 'gaps', got {self.outer!r}")


@dataclass(frozen=True)
class AnalyticModel:
    """Parameters of the closed-form model, all in linear units.

    ``lambda_t`` is the displaced density in nodes/km. Distances are in km;
    the path-loss law is evaluated in units of ``pathloss_unit_km``. With
    ``interference=False`` the Laplace factor is dropped (noise-only link).
    ``interferer_lambda`` overrides the density of the interfering field only;
    by default it equals ``lambda_t``.
    """

    lambda_t: float
    p_d_watts: float
    alpha: float
    mu: float
    noise_watts: float
    m: int
    pathloss_unit_km: float = 1.0
    interference: bool = True
    interferer_lambda: float | None = None

    def __post_init__(self):
        if not self.alpha > 2:
            raise InvalidArgumentError(f"alpha must be > 2, got {self.alpha}")
        for name in ("lambda_t", "p_d_watts", "mu", "pathloss_unit_km"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.noise_watts < 0:
            raise InvalidArgumentError("noise power must be >= 0")
        if self.interferer_lambda is not None and not self.interferer_lambda >= 0:
            raise InvalidArgumentError(f"interferer_lambda must be >= 0, got {self.interferer_lambda}")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidArgumentError(f"m must be an integer >= 1, got {self.m}")

    @classmethod
    def from_params(cls, params: NetworkParams, m: int | None = None, **overrides) -> "AnalyticModel":
        lam_t = transformed_intensity(
            params.lambda_d, params.shadow_mean_db, params.shadow_std_db, params.alpha_d
        )
        model = cls(
            lambda_t=lam_t,
            p_d_watts=params.p_d_watts,
            alpha=float(params.alpha_d),
            mu=float(params.mu),
            noise_watts=params.noise_watts,
            m=int(params.m if m is None else m),
            pathloss_unit_km=float(params.pathloss_unit_km),
        )
        return replace(model, **overrides) if overrides else model

    @property
    def effective_power(self) -> float:
        """Transmit power folded with the path-loss unit: ``P * unit**alpha``."""
        return self.p_d_watts * self.pathloss_unit_km ** self.alpha

    @property
    def lambda_i(self) -> float:
        return self.lambda_t if self.interferer_lambda is None else self.interferer_lambda


# --- distance distributions ----------------------------------------------------------


def _check_ordered(xs):
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 0:
        xs = xs[None]
    if xs.shape[-1] < 1:
        raise InvalidArgumentError("need at least one distance")
    if np.any(xs <= 0):
        raise InvalidArgumentError("distances must be > 0")
    if xs.shape[-1] > 1 and np.any(np.diff(xs, axis=-1) <= 0):
        raise OrderingError("distances must be strictly ascending")
    return xs


def joint_distance_pdf(xs, lambda_t: float):
    """Joint density of the n nearest distances on the ordered region."""
    xs = _check_ordered(xs)
    if not lambda_t > 0:
        raise InvalidArgumentError("density must be > 0")
    n = xs.shape[-1]
    out = (2.0 * lambda_t) ** n * np.exp(-2.0 * lambda_t * xs[..., -1])
    return float(out) if np.ndim(out) == 0 else out


def nth_nearest_pdf(x, n: int, lambda_t: float):
    """Erlang(n, 2 lambda_t) density of the n-th nearest distance."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"order must be an integer >= 1, got {n}")
    if not lambda_t > 0:
        raise InvalidArgumentError("density must be > 0")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise InvalidArgumentError("distance must be finite and > 0")
    rate = 2.0 * lambda_t
    logf = n * np.log(rate * x) - np.log(x) - math.lgamma(n) - rate * x
    out = np.exp(logf)
    return float(out) if out.ndim == 0 else out


# --- Interference Laplace transform -----------------------------------------------


@lru_cache(maxsize=64)
def _graded_rule(alpha: float, nodes: int):
    """Gauss-Legendre nodes on (0, 1] refined geometrically toward 0.

    ``u**(alpha-2)`` is non-smooth at the origin for non-even alpha, so
    panels halve in width down to ``2**-K`` with ``2**(-K(alpha-1))`` below
    double precision.
    """
    k = int(math.ceil(53.0 / (alpha - 1.0))) + 1
    edges = np.concatenate([[0.0], 2.0 ** -np.arange(k, -1, -1, dtype=float)])
    z, w = leggauss(nodes)
    a, b = edges[:-1, None], edges[1:, None]
    u = (0.5 * (b - a) * z + 0.5 * (a + b)).ravel()
    wu = (0.5 * (b - a) * w).ravel() * u ** (alpha - 2.0)
    return u ** alpha, wu


def _tail_integral_rule(c, alpha, nodes):
    ua, wu = _graded_rule(float(alpha), int(nodes))
    out = np.empty_like(c)
    flat_c, flat_out = c.ravel(), out.ravel()
    step = max(1, _CHUNK // 4)
    for s in range(0, flat_c.size, step):
        cc = flat_c[s : s + step, None]
        flat_out[s : s + step] = (wu / (ua + cc)).sum(axis=1)
    return flat_out.reshape(c.shape)


def tail_integral(c, alpha: float, nodes: int = 16, rel_tol: float = 1e-12, max_doublings: int = 4):
    """``int_1^inf dv / (1 + c v**alpha)`` for ``c >= 0`` (inf allowed), vectorized.

    Adaptive in the node count: the rule is doubled until the last two
    estimates agree to ``rel_tol`` everywhere.
    """
    c = np.asarray(c, dtype=float)
    if np.any(c < 0) or np.any(np.isnan(c)):
        raise InvalidArgumentError("tail parameter must be >= 0")
    if alpha <= 1:
        raise InvalidArgumentError(f"tail integral diverges for alpha <= 1, got {alpha}")
    finite = np.isfinite(c) & (c > 0)
    out = np.zeros_like(c)
    if np.any(c == 0):
        out[c == 0] = np.inf
    if not np.any(finite):
        return float(out) if out.ndim == 0 else out
    cf = c[finite]
    n = max(8, int(nodes) // 2)
    prev = _tail_integral_rule(cf, alpha, n)
    for _ in range(max_doublings):
        n *= 2
        cur = _tail_integral_rule(cf, alpha, n)
        if np.all(np.abs(cur - prev) <= rel_tol * np.abs(cur)):
            break
        prev = cur
    else:
        raise AccuracyError("tail integral did not converge", (float(np.max(prev)), float(np.max(cur))))
    out[finite] = cur
    return float(out) if out.ndim == 0 else out


def interference_laplace(j, x_m, model: AnalyticModel, inner_nodes: int = 16):
    """``E[exp(-j I)]`` for interferers beyond the guard distance ``x_m`` (km).

    Evaluates ``exp(-2 lam int_{x_m}^inf jPx^-a / (jPx^-a + mu) dx)``.
    """
    j = np.asarray(j, dtype=float)
    x_m = np.asarray(x_m, dtype=float)
    if np.any(j < 0) or np.any(np.isnan(j)):
        raise InvalidArgumentError("Laplace argument must be >= 0")
    if np.any(x_m <= 0):
        raise InvalidArgumentError("guard distance must be > 0")
    if not model.interference:
        out = np.ones(np.broadcast(j, x_m).shape)
        return float(out) if out.ndim == 0 else out
    with np.errstate(divide="ignore"):
        c = model.mu * x_m ** model.alpha / (j * model.effective_power)
    out = _laplace_from_c(c, x_m, model, inner_nodes)
    return float(out) if out.ndim == 0 else out


def _laplace_from_c(c, x_m, model, inner_nodes):
    c, x_m = np.broadcast_arrays(np.asarray(c, dtype=float), np.asarray(x_m, dtype=float))
    tail = np.asarray(tail_integral(c, model.alpha, nodes=inner_nodes))
    return np.exp(-2.0 * model.lambda_i * x_m * tail)


# --- Coverage ----------------------------------------------------------------------


def _kernel_sorted(xs, t, model: AnalyticModel, inner_nodes: int = 16):
    """Conditional coverage for ordered distance tuples along the last axis."""
    p_eff = model.effective_power
    path = xs ** (-model.alpha)
    s = p_eff * path.sum(axis=-1)
    noise = np.exp(-model.mu * t * model.noise_watts / s)
    if not model.interference:
        return noise
    x_m = xs[..., -1]
    # c = mu x_m^a / (j P) with j = mu t / S, written without P or mu
    c = (path * x_m[..., None] ** model.alpha).sum(axis=-1) / t
    return noise * _laplace_from_c(c, x_m, model, inner_nodes)


def conditional_coverage_kernel(xs, t: float, model: AnalyticModel, inner_nodes: int = 16):
    """Coverage given the serving distances: noise term times interference Laplace."""
    xs = _check_ordered(xs)
    if not t > 0:
        raise InvalidArgumentError(f"threshold must be > 0 (linear), got {t}")
    out = _kernel_sorted(xs, float(t), model, inner_nodes)
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=32)
def _laguerre(n):
    return laggauss(n)


@lru_cache(maxsize=32)
def _radial_rule(n, order, panels=RADIAL_PANELS):
    """Composite Gauss-Legendre rule against the Erlang(order, 1) density.

    Support is truncated where the tail mass drops below ``ERLANG_TAIL``.
    Unlike a Laguerre rule this resolves the sharp ``exp(-k r**alpha)``
    cut-off of noise-limited links.
    """
    upper = stats.gamma(order).isf(ERLANG_TAIL)
    edges = np.linspace(0.0, upper, panels + 1)
    z, w = leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    x = (0.5 * (b - a) * z + 0.5 * (a + b)).ravel()
    return x, (0.5 * (b - a) * w).ravel() * stats.gamma(order).pdf(x)


@lru_cache(maxsize=32)
def _unit_legendre(n):
    z, w = leggauss(n)
    return 0.5 * (z + 1.0), 0.5 * w


def _tensor_points(n, dims):
    """Yield chunks of flat multi-indices into an ``n**dims`` tensor grid."""
    total = n**dims
    for start in range(0, total, _CHUNK):
        yield np.unravel_index(np.arange(start, min(start + _CHUNK, total)), (n,) * dims)


def _symmetric_points(n, dims):
    """Yield chunks ``(idx, multiplicity)`` of sorted multi-indices.

    A tensor sum of a function symmetric in its arguments equals the sum over
    sorted index tuples weighted by the number of their permutations, which
    is ``dims! / prod(run lengths!)``; this cuts the work by about ``dims!``.
    """
    combos = itertools.combinations_with_replacement(range(n), dims)
    while True:
        block = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, _CHUNK)), dtype=np.int64)
        if block.size == 0:
            return
        block = block.reshape(-1, dims)
        run = np.ones(len(block))
        denom = np.ones(len(block))
        for j in range(1, dims):
            run = np.where(block[:, j] == block[:, j - 1], run + 1.0, 1.0)
            denom *= run
        yield tuple(block.T), math.factorial(dims) / denom


def _outer_gaps(t, model, n, inner_nodes):
    nodes, weights = _laguerre(n)
    rate = 2.0 * model.lambda_t
    acc = 0.0
    for idx in _tensor_points(n, model.m):
        gaps = np.stack([nodes[i] for i in idx], axis=-1) / rate
        w = np.prod(np.stack([weights[i] for i in idx], axis=-1), axis=-1)
        acc += float(np.dot(w, _kernel_sorted(np.cumsum(gaps, axis=-1), t, model, inner_nodes)))
    return acc


def _outer_radial(t, model, n, inner_nodes):
    """Farthest serving distance ``r ~ Erlang(m, 2 lam)``; given ``r`` the
    other m-1 distances are i.i.d. uniform on (0, r) and the kernel is
    symmetric in them, so only sorted index tuples are visited.
    """
    m, a = model.m, model.alpha
    xr, wr = _radial_rule(n, m)
    r = xr / (2.0 * model.lambda_t)
    # chunks of the (m-1)-dim ratio grid keep memory bounded for large n
    ra = r**a
    scale = model.mu * t * model.noise_watts / model.effective_power
    acc = 0.0
    if m == 1:
        chunks = [(np.ones(1), np.ones(1))]
    else:
        s, ws = _unit_legendre(n)
        chunks = []
        for idx, mult in _symmetric_points(n, m - 1):
            # sum_i (x_m / x_i)^a including the farthest station itself
            ratio = 1.0 + np.sum(np.stack([s[i] ** (-a) for i in idx], axis=0), axis=0)
            w = mult * np.prod(np.stack([ws[i] for i in idx], axis=0), axis=0)
            chunks.append((ratio, w))
    for ratio, w in chunks:
        noise = np.exp(-scale * ra[:, None] / ratio[None, :])
        if model.interference:
            # the tail integral depends on the ratios only, not on r
            tail = np.asarray(tail_integral(ratio / t, model.alpha, nodes=inner_nodes))
            noise = noise * np.exp(-2.0 * model.lambda_i * r[:, None] * tail[None, :])
        acc += float(wr @ noise @ w)
    return acc


_OUTER_RULES = {"radial": _outer_radial, "gaps": _outer_gaps}


def _qmc_gaps(t, model, quad):
    means = []
    for r in range(quad.qmc_replicates):
        sampler = qmc.Sobol(d=model.m, scramble=True, seed=quad.qmc_seed + r)
        u = sampler.random(quad.qmc_points)
        gaps = -np.log1p(-u) / (2.0 * model.lambda_t)
        xs = np.cumsum(gaps, axis=-1)
        means.append(float(np.mean(_kernel_sorted(xs, t, model, quad.inner_nodes))))
    means = np.asarray(means)
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(len(means)))


def coverage_probability(t: float, model: AnalyticModel, quad: QuadratureSpec | None = None,
                         return_error: bool = False):
    """P(SINR > t) for linear threshold ``t``.

    Orders up to ``quad.max_tensor_order`` use a tensor product rule refined
    by node doubling until two successive estimates agree; higher orders fall
    back to randomized Sobol sampling of the gaps. With ``return_error`` a
    ``(value, error_estimate)`` pair is returned (difference of the last two
    refinements, or the QMC standard error).
    """
    quad = quad or QuadratureSpec()
    if not t > 0 or not math.isfinite(t):
        raise InvalidArgumentError(f"threshold must be finite and > 0 (linear), got {t}")
    t = float(t)
    if model.m > quad.max_tensor_order:
        value, err = _qmc_gaps(t, model, quad)
        value = min(max(value, 0.0), 1.0)
        return (value, err) if return_error else value

    rule = _OUTER_RULES[quad.outer]
    n = quad.gap_nodes
    cur = rule(t, model, n, quad.inner_nodes)
    for _ in range(quad.max_refinements):
        prev = cur
        n = min(2 * n, quad.max_nodes)
        cur = rule(t, model, n, quad.inner_nodes)
        err = abs(cur - prev)
        if err <= quad.rel_tol * abs(cur) + quad.abs_tol:
            value = min(max(cur, 0.0), 1.0)
            return (value, err) if return_error else value
        if n == quad.max_nodes:
            break
    raise AccuracyError(
        f"coverage quadrature did not reach rel_tol={quad.rel_tol} at t={t}", (prev, cur)
    )


def coverage_curve(thresholds_db, model: AnalyticModel, quad: QuadratureSpec | None = None) -> np.ndarray:
    """Analytic coverage over a grid of thresholds given in dB."""
    ts = db_to_linear(np.atleast_1d(np.asarray(thresholds_db, dtype=float)))
    return np.array([coverage_probability(float(t), model, quad) for t in np.atleast_1d(ts)])
