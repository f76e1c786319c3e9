"""1-D Poisson deployments, shadowing displacement and nearest-k association.

The typical vehicle sits at the origin of a road window ``[-L/2, L/2]``.
Shadowing is absorbed into the geometry through ``y = chi**(-1/alpha) * |x|``,
after which max-received-power association is simply "take the m smallest y".
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import NetworkParams, sample_shadowing_linear
from .errors import InsufficientDeploymentError, InvalidArgumentError, OrderingError

EDGE_TOLERANCE = 1e-6
DEPLOYMENT_CSV_COLUMNS = ("position_km", "shadow_mark", "transformed_distance_km")


@dataclass(frozen=True)
class Deployment:
    """One sampled realization, stored in ascending transformed-distance order.

    Row ``i`` of the three arrays describes the same base station.
    """

    positions: np.ndarray
    shadow_marks: np.ndarray
    transformed_distances: np.ndarray

    def __post_init__(self):
        n = len(self.positions)
        if len(self.shadow_marks) != n or len(self.transformed_distances) != n:
            raise InvalidArgumentError("deployment arrays must have equal length")

    def __len__(self):
        return len(self.positions)


@dataclass(frozen=True)
class ServingSet:
    serving_distances: np.ndarray
    boundary: float
    interferer_distances: np.ndarray

    @property
    def m(self) -> int:
        return len(self.serving_distances)


def sample_ppp_1d(lam: float, length: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous PPP on ``[-length/2, length/2]`` sorted by distance to the origin.

    Points landing exactly on the origin are redrawn (a probability-zero event
    that would otherwise give infinite received power).
    """
    if not lam > 0 or not length > 0:
        raise InvalidArgumentError(f"density and length must be > 0, got {lam}, {length}")
    n = rng.poisson(lam * length)
    half = 0.5 * length
    x = rng.uniform(-half, half, size=n)
    zero = x == 0.0
    while np.any(zero):
        x[zero] = rng.uniform(-half, half, size=int(zero.sum()))
        zero = x == 0.0
    return x[np.argsort(np.abs(x), kind="stable")]


def transformed_intensity(lam: float, omega_db: float, delta_db: float, alpha: float) -> float:
    """Density of the displaced process ``y = chi**(-1/alpha) |x|``.

    A station lands within ``r`` of the origin when ``|x| < r chi**(1/alpha)``,
    so the 1-D density is ``E[chi**(1/alpha)] * lam``. With
    ``10 log10 chi ~ N(omega, delta**2)`` this is the log-normal mgf at
    ``ln(10)/(10 alpha)``. For omega = 0 it equals ``E[chi**(-1/alpha)] * lam``.
    """
    if not alpha > 2:
        raise InvalidArgumentError(f"alpha must be > 2, got {alpha}")
    if not delta_db >= 0:
        raise InvalidArgumentError(f"shadowing std must be >= 0 dB, got {delta_db}")
    if not lam >= 0:
        raise InvalidArgumentError(f"density must be >= 0, got {lam}")
    a = math.log(10.0) / (10.0 * alpha)
    return math.exp(omega_db * a + 0.5 * (delta_db * a) ** 2) * lam


def displacement_factors(shadow_marks, alpha):
    marks = np.asarray(shadow_marks, dtype=float)
    if np.any(marks <= 0):
        raise InvalidArgumentError("shadowing marks must be > 0")
    if not alpha > 2:
        raise InvalidArgumentError(f"alpha must be > 2, got {alpha}")
    return marks ** (-1.0 / alpha)


def apply_displacement(positions, shadow_marks, alpha) -> np.ndarray:
    """Return ``chi**(-1/alpha) * |x|`` sorted ascending."""
    y = displacement_factors(shadow_marks, alpha) * np.abs(np.asarray(positions, dtype=float))
    return np.sort(y)


def sample_deployment(params: NetworkParams, rng: np.random.Generator) -> Deployment:
    x = sample_ppp_1d(params.lambda_d, params.road_length_km, rng)
    chi = np.asarray(
        sample_shadowing_linear(params.shadow_mean_db, params.shadow_std_db, rng, size=len(x)),
        dtype=float,
    )
    y = displacement_factors(chi, params.alpha_d) * np.abs(x)
    order = np.argsort(y, kind="stable")
    return Deployment(x[order], chi[order], y[order])


def select_serving_set(transformed_distances, m: int) -> ServingSet:
    d = np.asarray(transformed_distances, dtype=float)
    if m < 1:
        raise InvalidArgumentError(f"connectivity order must be >= 1, got {m}")
    if len(d) > 1 and np.any(np.diff(d) < 0):
        raise OrderingError("transformed distances must be sorted ascending")
    if len(d) < m:
        raise InsufficientDeploymentError(f"need {m} base stations, deployment has {len(d)}")
    return ServingSet(d[:m], float(d[m - 1]), d[m:])


def edge_effect_probability(lam: float, length: float) -> float:
    """Probability that one half of the road window holds no point at all."""
    return math.exp(-lam * length / 2.0)


def check_road_length(params: NetworkParams) -> bool:
    ok = edge_effect_probability(params.lambda_d, params.road_length_km) < EDGE_TOLERANCE
    if not ok:
        warnings.warn(
            f"road of {params.road_length_km} km at {params.lambda_d} nodes/km is short "
            f"enough for window truncation to bias results",
            RuntimeWarning,
            stacklevel=2,
        )
    return ok


def write_deployment_csv(deployment: Deployment, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DEPLOYMENT_CSV_COLUMNS)
        for row in zip(deployment.positions, deployment.shadow_marks, deployment.transformed_distances):
            w.writerow([repr(float(v)) for v in row])


def read_deployment_csv(path) -> Deployment:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != DEPLOYMENT_CSV_COLUMNS:
            raise InvalidArgumentError(f"unexpected deployment header {header}")
        rows = np.array([[float(v) for v in r] for r in reader], dtype=float).reshape(-1, 3)
    return Deployment(rows[:, 0], rows[:, 1], rows[:, 2])
