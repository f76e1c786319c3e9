"""Unit conversions, channel primitives and SINR arithmetic.

Everything downstream works in linear units (watts, linear gains). dB and
dBm values only appear at the configuration and reporting boundary.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import DivisionGuardError, InvalidArgumentError, SingularityError, ValidationError

SINGLE_CONNECTIVITY_DENSITY = 10.0  # nodes/km, single-connectivity reference deployment


@dataclass(frozen=True)
class NetworkParams:
    """Physical and deployment constants of the 1-D downlink scenario.

    Defaults reproduce the reference system parameters:
    densities in nodes/km, powers in dBm, shadowing moments in dB.
    ``pathloss_unit_km`` is the length unit (in km) in which the power law
    ``|x|**-alpha`` is evaluated; 1.0 uses km directly, 0.001 uses metres.
    """

    lambda_d: float = 5.0
    lambda_v: float = 20.0
    p_d: float = 23.0
    alpha_d: float = 4.0
    mu: float = 1.0
    shadow_mean_db: float = 0.0
    shadow_std_db: float = 2.0
    noise_dbm: float = -96.0
    road_length_km: float = 300.0
    m: int = 1
    pathloss_unit_km: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
                raise ValidationError(f"expected a number, got {value!r}", field=f.name)
            if not math.isfinite(value):
                raise ValidationError(f"must be finite, got {value!r}", field=f.name)
        if self.alpha_d <= 2:
            raise ValidationError(
                f"path-loss exponent must satisfy alpha_d > 2 for the interference "
                f"integral to converge, got {self.alpha_d}",
                field="alpha_d",
            )
        for name in ("lambda_d", "mu", "road_length_km", "pathloss_unit_km"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"must be > 0, got {getattr(self, name)}", field=name)
        if self.lambda_v < 0:
            raise ValidationError(f"must be >= 0, got {self.lambda_v}", field="lambda_v")
        if self.shadow_std_db < 0:
            raise ValidationError(f"must be >= 0, got {self.shadow_std_db}", field="shadow_std_db")
        if int(self.m) != self.m or self.m < 1:
            raise ValidationError(f"must be an integer >= 1, got {self.m}", field="m")

    @property
    def p_d_watts(self) -> float:
        return dbm_to_watts(self.p_d)

    @property
    def noise_watts(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    @property
    def effective_power_watts(self) -> float:
        """Transmit power folded with the path-loss unit: ``P * unit**alpha``."""
        return self.p_d_watts * self.pathloss_unit_km ** self.alpha_d

    def with_(self, **changes) -> "NetworkParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


def _require_finite(value, name):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be finite, got {value!r}")
    return arr


def dbm_to_watts(p):
    arr = _require_finite(p, "power (dBm)")
    out = 10.0 ** ((arr - 30.0) / 10.0)
    return float(out) if out.ndim == 0 else out


def watts_to_dbm(w):
    arr = _require_finite(w, "power (W)")
    if np.any(arr <= 0):
        raise InvalidArgumentError(f"power must be > 0 W to express in dBm, got {w!r}")
    out = 10.0 * np.log10(arr) + 30.0
    return float(out) if out.ndim == 0 else out


def db_to_linear(x_db):
    arr = _require_finite(x_db, "value (dB)")
    out = 10.0 ** (arr / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(x):
    arr = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(arr)
    return float(out) if out.ndim == 0 else out


def pathloss_gain(x, alpha):
    """Power-law path gain ``|x| ** -alpha``; negative distances are mirrored.

    Any positive exponent is accepted here; the ``alpha > 2`` requirement
    belongs to the interference integral and is enforced on the model.
    """
    if not alpha > 0:
        raise InvalidArgumentError(f"path-loss exponent must be > 0, got {alpha}")
    d = np.abs(_require_finite(x, "distance"))
    if np.any(d == 0):
        raise SingularityError("zero distance gives unbounded path gain")
    out = d ** (-float(alpha))
    return float(out) if out.ndim == 0 else out


def sample_rayleigh_power(mu, rng: np.random.Generator, size=None):
    """Rayleigh fading power gain: exponential with rate ``mu`` (mean ``1/mu``)."""
    if not mu > 0:
        raise InvalidArgumentError(f"fading rate mu must be > 0, got {mu}")
    return rng.exponential(1.0 / mu, size=size)


def sample_shadowing_linear(omega_db, delta_db, rng: np.random.Generator, size=None):
    """Log-normal shadowing gain whose dB value is N(omega_db, delta_db**2)."""
    if not delta_db >= 0:
        raise InvalidArgumentError(f"shadowing std must be >= 0 dB, got {delta_db}")
    if delta_db == 0:
        # degenerate law: do not consume the stream, and return exactly 10**(omega/10)
        value = 10.0 ** (omega_db / 10.0)
        return value if size is None else np.full(size, value)
    return 10.0 ** (rng.normal(omega_db, delta_db, size=size) / 10.0)


def received_power(p_d, g, chi, x, alpha):
    """Received power ``p_d * g * chi * |x|**-alpha`` in watts."""
    out = np.asarray(p_d) * np.asarray(g) * np.asarray(chi) * pathloss_gain(x, alpha)
    return float(out) if np.ndim(out) == 0 else out


def sinr(serving_sum, interference, noise):
    if noise <= 0:
        if interference == 0:
            raise DivisionGuardError("noise must be > 0 when there is no interference")
        raise InvalidArgumentError(f"noise power must be > 0, got {noise}")
    if serving_sum < 0 or interference < 0:
        raise InvalidArgumentError("powers must be non-negative")
    return serving_sum / (interference + noise)
