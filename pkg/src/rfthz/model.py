"""Scenario description and link-level physics of the two-tier network.

Powers are in W, distances in m, intensities in BS per m^2.  Antenna gains
are configured in dB and converted to linear scale when a tier is built.
All link functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .absorption import (
    AbsorptionMedium, AmbientConditions, load_line_catalog,
    molecular_absorption_coefficient,
)

LIGHT_SPEED = 2.9979e8
BOLTZMANN = 1.380649e-23


class ScenarioError(ValueError):
    """Invalid scenario value; ``field`` names the offending key."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def _require(cond, name, message):
    if not cond:
        raise ScenarioError(name, message)


@dataclass(frozen=True)
class RfTier:
    tx_power: float = 2.0
    tx_gain_db: float = 0.0
    rx_gain_db: float = 0.0
    carrier: float = 2e9
    pathloss_exponent: float = 4.0
    intensity: float = 1e-5
    bandwidth: float = 40e6
    thermal_noise: float = BOLTZMANN * 290.0 * 40e6

    def __post_init__(self):
        _require(self.pathloss_exponent > 2, "rf.pathloss_exponent", "must exceed 2")
        _require(self.tx_power >= 0, "rf.tx_power_w", "must be non-negative")
        _require(self.intensity >= 0, "rf.intensity_per_m2", "must be non-negative")
        _require(self.carrier > 0, "rf.carrier_hz", "must be positive")
        _require(self.bandwidth > 0, "rf.bandwidth_hz", "must be positive")
        _require(self.thermal_noise >= 0, "rf.thermal_noise_w", "must be non-negative")

    @property
    def tx_gain(self):
        return db_to_linear(self.tx_gain_db)

    @property
    def rx_gain(self):
        return db_to_linear(self.rx_gain_db)


@dataclass(frozen=True)
class ThzTier:
    tx_power: float = 0.2
    max_gain_tx_db: float = 25.0
    max_gain_rx_db: float = 25.0
    min_gain_tx_db: float = -math.inf
    min_gain_rx_db: float = -math.inf
    # two-lobe pattern with negligible side lobes: G_max * w = 2*pi
    beamwidth_tx: float = 2.0 * math.pi / db_to_linear(25.0)
    beamwidth_rx: float = 2.0 * math.pi / db_to_linear(25.0)
    carrier: float = 3.0e12     # unstated in the reference setup; see README
    absorption: float | AbsorptionMedium = 0.05
    intensity: float = 1e-4
    bandwidth: float = 0.5e9
    thermal_noise: float = BOLTZMANN * 300.0 * 0.5e9

    def __post_init__(self):
        for name, value in (("thz.beamwidth_tx_rad", self.beamwidth_tx),
                            ("thz.beamwidth_rx_rad", self.beamwidth_rx)):
            _require(0 < value < 2 * math.pi, name, "must lie in (0, 2*pi)")
        _require(self.max_gain_tx_db >= self.min_gain_tx_db, "thz.min_gain_tx_db",
                 "must not exceed the main-lobe gain")
        _require(self.max_gain_rx_db >= self.min_gain_rx_db, "thz.min_gain_rx_db",
                 "must not exceed the main-lobe gain")
        _require(self.tx_power >= 0, "thz.tx_power_w", "must be non-negative")
        _require(self.intensity >= 0, "thz.intensity_per_m2", "must be non-negative")
        _require(self.carrier > 0, "thz.carrier_hz", "must be positive")
        _require(self.bandwidth > 0, "thz.bandwidth_hz", "must be positive")
        _require(self.thermal_noise >= 0, "thz.thermal_noise_w", "must be non-negative")
        if not isinstance(self.absorption, AbsorptionMedium):
            _require(self.absorption >= 0, "thz.absorption_per_m", "must be non-negative")

    @property
    def k_a(self):
        """Absorption coefficient in 1/m at the carrier frequency."""
        if isinstance(self.absorption, AbsorptionMedium):
            return molecular_absorption_coefficient(self.absorption, self.carrier)
        return float(self.absorption)

    @property
    def max_gain_tx(self):
        return db_to_linear(self.max_gain_tx_db)

    @property
    def max_gain_rx(self):
        return db_to_linear(self.max_gain_rx_db)

    @property
    def alignment_probability(self):
        return self.beamwidth_tx * self.beamwidth_rx / (4.0 * math.pi ** 2)


@dataclass(frozen=True)
class MobilityProfile:
    speed: float = 30.0        # displacement per movement period, m
    ho_cost: float = 0.5
    hysteresis: float = 1.0

    def __post_init__(self):
        _require(self.speed >= 0, "mobility.speed_m", "must be non-negative")
        _require(0.0 <= self.ho_cost <= 1.0, "mobility.ho_cost", "must lie in [0, 1]")
        _require(self.hysteresis >= 1.0, "mobility.hysteresis", "must be >= 1")


@dataclass(frozen=True)
class DerivedConstants:
    gamma_r: float
    gamma_t: float
    q: float
    f: float


@dataclass(frozen=True)
class Scenario:
    rf: RfTier = field(default_factory=RfTier)
    thz: ThzTier = field(default_factory=ThzTier)
    region_radius: float = 500.0
    rate_threshold: float = 1e9
    mobility: MobilityProfile = field(default_factory=MobilityProfile)

    def __post_init__(self):
        _require(self.region_radius > 0, "scenario.region_radius_m", "must be positive")
        _require(self.rate_threshold >= 0, "scenario.rate_threshold_bps",
                 "must be non-negative")
        d = derived_constants(self)
        _require(d.q > 0, "rf.tx_power_w", "RF and THz received powers must be positive")

    @property
    def derived(self):
        return derived_constants(self)

    @property
    def k_a(self):
        return self.thz.k_a

    def with_params(self, **changes):
        """Copy with flat overrides such as ``lambda_T=5e-4`` or ``ka=0.2``."""
        rf, thz, mob, top = {}, {}, {}, {}
        for key, value in changes.items():
            target, attr = _OVERRIDES[key]
            {"rf": rf, "thz": thz, "mobility": mob, "top": top}[target][attr] = value
        return replace(
            self,
            rf=replace(self.rf, **rf) if rf else self.rf,
            thz=replace(self.thz, **thz) if thz else self.thz,
            mobility=replace(self.mobility, **mob) if mob else self.mobility,
            **top,
        )


_OVERRIDES = {
    "lambda_T": ("thz", "intensity"),
    "lambda_R": ("rf", "intensity"),
    "ka": ("thz", "absorption"),
    "velocity": ("mobility", "speed"),
    "eta": ("mobility", "ho_cost"),
    "hysteresis": ("mobility", "hysteresis"),
    "rate_threshold": ("top", "rate_threshold"),
    "alpha": ("rf", "pathloss_exponent"),
    "P_T": ("thz", "tx_power"),
    "P_R": ("rf", "tx_power"),
    "N0": ("thz", "thermal_noise"),
}


def derived_constants(s):
    gamma_r = s.rf.tx_gain * s.rf.rx_gain * (LIGHT_SPEED / (4 * math.pi * s.rf.carrier)) ** 2
    gamma_t = (s.thz.max_gain_tx * s.thz.max_gain_rx
               * (LIGHT_SPEED / (4 * math.pi * s.thz.carrier)) ** 2)
    q = (s.rf.tx_power * gamma_r) / (s.thz.tx_power * gamma_t)
    return DerivedConstants(gamma_r, gamma_t, q, s.thz.alignment_probability)


def rf_received_power(s, r0):
    """Long-term RF power at distance ``r0`` (fading excluded)."""
    r0 = np.asarray(r0, dtype=float)
    if np.any(r0 <= 0):
        raise ValueError("distance must be positive")
    d = derived_constants(s)
    out = d.gamma_r * s.rf.tx_power / r0 ** s.rf.pathloss_exponent
    return out if out.ndim else float(out)


def thz_received_power(s, d0):
    """Line-of-sight THz power at distance ``d0`` with Beer-Lambert loss."""
    d0 = np.asarray(d0, dtype=float)
    if np.any(d0 <= 0):
        raise ValueError("distance must be positive")
    d = derived_constants(s)
    out = d.gamma_t * s.thz.tx_power * np.exp(-s.k_a * d0) / d0 ** 2
    return out if out.ndim else float(out)


def thz_sinr_margin(s, d0, tau):
    """Signal minus threshold-weighted absorption noise, ``S(d0)``.

    Coverage requires ``S(d0) > tau * (N0 + I)``; negative values mean the
    link cannot be covered whatever the interference.
    """
    d0 = np.asarray(d0, dtype=float)
    d = derived_constants(s)
    base = s.thz.tx_power * d.gamma_t / d0 ** 2
    out = base * ((1.0 + tau) * np.exp(-s.k_a * d0) - tau)
    return out if out.ndim else float(out)


def rate_to_sinr_threshold(rate, bandwidth):
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    return 2.0 ** (rate / bandwidth) - 1.0


def thz_total_noise(s, d0, interferer_distances=()):
    """Thermal plus molecular-absorption noise seen on a THz link."""
    d = derived_constants(s)
    pt = s.thz.tx_power
    ka = s.k_a
    d0 = float(d0)
    own = pt * d.gamma_t / d0 ** 2 * -math.expm1(-ka * d0)
    di = np.asarray(interferer_distances, dtype=float)
    if np.any(di <= 0):
        raise ValueError("distances must be positive")
    others = float(np.sum(d.gamma_t * d.f * pt / di ** 2 * -np.expm1(-ka * di)))
    return s.thz.thermal_noise + own + others


# --- scenario files -------------------------------------------------------
#
# One ``key = value`` pair per line, '#' starts a comment.  Keys mirror the
# dataclass fields with their unit as suffix.

_FILE_KEYS = (
    ("rf.tx_power_w", "rf", "tx_power"),
    ("rf.tx_gain_db", "rf", "tx_gain_db"),
    ("rf.rx_gain_db", "rf", "rx_gain_db"),
    ("rf.carrier_hz", "rf", "carrier"),
    ("rf.pathloss_exponent", "rf", "pathloss_exponent"),
    ("rf.intensity_per_m2", "rf", "intensity"),
    ("rf.bandwidth_hz", "rf", "bandwidth"),
    ("rf.thermal_noise_w", "rf", "thermal_noise"),
    ("thz.tx_power_w", "thz", "tx_power"),
    ("thz.max_gain_tx_db", "thz", "max_gain_tx_db"),
    ("thz.max_gain_rx_db", "thz", "max_gain_rx_db"),
    ("thz.min_gain_tx_db", "thz", "min_gain_tx_db"),
    ("thz.min_gain_rx_db", "thz", "min_gain_rx_db"),
    ("thz.beamwidth_tx_rad", "thz", "beamwidth_tx"),
    ("thz.beamwidth_rx_rad", "thz", "beamwidth_rx"),
    ("thz.carrier_hz", "thz", "carrier"),
    ("thz.absorption_per_m", "thz", "absorption"),
    ("thz.intensity_per_m2", "thz", "intensity"),
    ("thz.bandwidth_hz", "thz", "bandwidth"),
    ("thz.thermal_noise_w", "thz", "thermal_noise"),
    ("scenario.region_radius_m", "top", "region_radius"),
    ("scenario.rate_threshold_bps", "top", "rate_threshold"),
    ("mobility.speed_m", "mobility", "speed"),
    ("mobility.ho_cost", "mobility", "ho_cost"),
    ("mobility.hysteresis", "mobility", "hysteresis"),
)
_AMBIENT_KEYS = {
    "thz.ambient.pressure_atm": "pressure",
    "thz.ambient.reference_pressure_atm": "reference_pressure",
    "thz.ambient.temperature_k": "temperature",
    "thz.ambient.reference_temperature_k": "reference_temperature",
    "thz.ambient.standard_temperature_k": "standard_temperature",
}


def parse_scenario(text, base_dir="."):
    """Build a :class:`Scenario` from key-value text.

    Missing keys take their defaults.  ``thz.absorption_catalog`` (a CSV path,
    relative to ``base_dir``) may replace ``thz.absorption_per_m``.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        values[key] = value
    known = {k for k, _, _ in _FILE_KEYS} | set(_AMBIENT_KEYS) | {"thz.absorption_catalog"}
    for key in values:
        if key not in known:
            raise ScenarioError(key, "unknown key")
    parts = {"rf": {}, "thz": {}, "mobility": {}, "top": {}}
    for key, target, attr in _FILE_KEYS:
        if key in values:
            try:
                parts[target][attr] = float(values[key])
            except ValueError:
                raise ScenarioError(key, f"not a number: {values[key]!r}") from None
    if "thz.absorption_catalog" in values:
        if "thz.absorption_per_m" in values:
            raise ScenarioError("thz.absorption_catalog",
                                "give either a catalog or absorption_per_m, not both")
        ambient = {}
        for key, attr in _AMBIENT_KEYS.items():
            if key in values:
                ambient[attr] = float(values[key])
        path = Path(base_dir) / values["thz.absorption_catalog"]
        parts["thz"]["absorption"] = AbsorptionMedium(
            load_line_catalog(path), AmbientConditions(**ambient))
    return Scenario(
        rf=RfTier(**parts["rf"]),
        thz=ThzTier(**parts["thz"]),
        mobility=MobilityProfile(**parts["mobility"]),
        **parts["top"],
    )


def load_scenario(path):
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), base_dir=path.parent)


def format_scenario(s):
    """Serialise ``s``; ``parse_scenario(format_scenario(s)) == s``.

    Scenarios carrying an absorption medium cannot be written (the catalogue
    path is not part of the in-memory description).
    """
    if isinstance(s.thz.absorption, AbsorptionMedium):
        raise ValueError("scenarios with a line catalogue cannot be serialised")
    objs = {"rf": s.rf, "thz": s.thz, "mobility": s.mobility, "top": s}
    lines = []
    for key, target, attr in _FILE_KEYS:
        lines.append(f"{key} = {float(getattr(objs[target], attr))!r}")
    return "\n".join(lines) + "\n"


def scenario_fields(s):
    """Flat ``{file key: value}`` view, used for result-table headers."""
    objs = {"rf": s.rf, "thz": s.thz, "mobility": s.mobility, "top": s}
    out = {}
    for key, target, attr in _FILE_KEYS:
        value = getattr(objs[target], attr)
        out[key] = value if not isinstance(value, AbsorptionMedium) else s.k_a
    return out

