"""Molecular absorption coefficient from a spectral-line catalogue.

Frequencies are in Hz throughout.  The reference line used in the tests
(resonance 276 Hz, half-widths below 1 Hz) is kept exactly as tabulated even
though it is not a physical THz line; realistic catalogues are loaded with
:func:`load_line_catalog`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CATALOG_COLUMNS = ("f_c0_hz", "S", "alpha_air_hz", "alpha_0_hz", "delta_hz", "q", "gamma")


class CatalogError(ValueError):
    """Malformed line catalogue; ``line`` is the 1-based source line."""

    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


@dataclass(frozen=True)
class SpectralLine:
    f_c0: float
    intensity: float
    alpha_air: float
    alpha_0: float
    delta: float = 0.0
    mixing_ratio: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError("line intensity must be non-negative")
        if not 0.0 <= self.mixing_ratio <= 1.0:
            raise ValueError("mixing ratio must lie in [0, 1]")
        if self.alpha_air <= 0 or self.alpha_0 <= 0:
            raise ValueError("half-widths must be positive")


@dataclass(frozen=True)
class AmbientConditions:
    pressure: float = 1.0              # atm
    reference_pressure: float = 1.0    # atm
    temperature: float = 396.0         # K
    reference_temperature: float = 296.0
    standard_temperature: float = 273.15

    def __post_init__(self):
        for name in ("pressure", "reference_pressure", "temperature",
                     "reference_temperature", "standard_temperature"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class PhysicalConstants:
    avogadro: float = 6.0221e23
    planck: float = 6.6262e-34
    boltzmann: float = 1.3806e-23
    light_speed: float = 2.9979e8
    gas_constant: float = 8.2051e-5    # m^3 atm / (K mol)


TABLE_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class AbsorptionMedium:
    lines: tuple = ()
    conditions: AmbientConditions = field(default_factory=AmbientConditions)
    constants: PhysicalConstants = TABLE_CONSTANTS

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))

    def __add__(self, other):
        if other.conditions != self.conditions or other.constants != self.constants:
            raise ValueError("cannot merge media with different conditions")
        return AbsorptionMedium(self.lines + other.lines, self.conditions, self.constants)


def reference_line():
    """The single water-vapour line of the reference parameter table.

    The mixing ratio is tabulated as ``0.05 %`` and is stored as a fraction.
    """
    return SpectralLine(f_c0=276.0, intensity=2.66e-25, alpha_air=0.1117,
                        alpha_0=0.916, delta=0.0251, mixing_ratio=0.0005, gamma=0.83)


def lorentz_halfwidth(line, cond):
    mix = (1.0 - line.mixing_ratio) * line.alpha_air + line.mixing_ratio * line.alpha_0
    return (mix * (cond.pressure / cond.reference_pressure)
            * (cond.reference_temperature / cond.temperature) ** line.gamma)


def shifted_resonance(line, cond):
    return line.f_c0 + line.delta * (cond.pressure / cond.reference_pressure)


def line_shape(line, cond, f, constants=TABLE_CONSTANTS):
    """Van Vleck-Weisskopf line shape evaluated at frequency ``f``.

    Accepts scalars or arrays for ``f``.
    """
    f = np.asarray(f, dtype=float)
    fc = shifted_resonance(line, cond)
    hw = lorentz_halfwidth(line, cond)
    y = f + fc
    z = f - fc
    shape = (100.0 * constants.light_speed * hw * f / (math.pi * fc)
             * (1.0 / (y * y + hw * hw) + 1.0 / (z * z + hw * hw)))
    return shape if shape.ndim else float(shape)


def _line_strength(line, cond, f, constants):
    c = constants
    fc = shifted_resonance(line, cond)
    t = cond.temperature
    thermal = (np.tanh(c.planck * c.light_speed * f / (2.0 * c.boltzmann * t))
               / math.tanh(c.planck * c.light_speed * fc / (2.0 * c.boltzmann * t)))
    return (cond.pressure ** 2 * cond.standard_temperature * line.mixing_ratio
            * c.avogadro * line.intensity * f * thermal
            / (cond.reference_pressure * c.gas_constant * t * t * fc))


def molecular_absorption_coefficient(medium, f):
    """Absorption coefficient K_a(f) in 1/m, summed over all lines of ``medium``."""
    f_arr = np.asarray(f, dtype=float)
    if np.any(f_arr <= 0):
        raise ValueError("frequency must be positive")
    total = np.zeros_like(f_arr)
    for line in medium.lines:
        total = total + (_line_strength(line, medium.conditions, f_arr, medium.constants)
                         * line_shape(line, medium.conditions, f_arr, medium.constants))
    return total if total.ndim else float(total)


def parse_line_catalog(text):
    """Parse catalogue CSV text into a tuple of :class:`SpectralLine`."""
    rows = []
    header_seen = False
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = next(csv.reader([stripped]))
        fields = [x.strip() for x in fields]
        if not header_seen:
            if tuple(fields) != CATALOG_COLUMNS:
                raise CatalogError(
                    f"expected header {','.join(CATALOG_COLUMNS)}, got {stripped!r}", lineno)
            header_seen = True
            continue
        if len(fields) != len(CATALOG_COLUMNS):
            raise CatalogError(
                f"expected {len(CATALOG_COLUMNS)} columns, got {len(fields)}", lineno)
        try:
            values = [float(x) for x in fields]
        except ValueError as exc:
            raise CatalogError(str(exc), lineno) from None
        try:
            rows.append(SpectralLine(*values))
        except ValueError as exc:
            raise CatalogError(str(exc), lineno) from None
    if not header_seen:
        raise CatalogError("missing header row")
    return tuple(rows)


def load_line_catalog(path):
    return parse_line_catalog(Path(path).read_text(encoding="utf-8"))


def format_line_catalog(lines):
    out = io.StringIO()
    out.write(",".join(CATALOG_COLUMNS) + "\n")
    for ln in lines:
        out.write(",".join(repr(float(v)) for v in (
            ln.f_c0, ln.intensity, ln.alpha_air, ln.alpha_0, ln.delta,
            ln.mixing_ratio, ln.gamma)) + "\n")
    return out.getvalue()
