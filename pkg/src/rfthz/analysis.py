"""Tier association, serving-distance distributions and the correction factor.

The correction factor ``mu`` replaces the Beer-Lambert term ``exp(K_a r)`` by
the power law ``r**mu`` so that the THz tier can be mapped onto an equivalent
power-law tier; it is fitted by matching the RF association probability.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .model import derived_constants
from .numerics import (
    BracketError, DomainError, QuadratureSpec, erfcx, find_root, integrate,
    truncation_radius,
)

# tight tolerances: these quantities feed the mu root and the Monte-Carlo checks
ANALYSIS_QUADRATURE = QuadratureSpec(relative_tolerance=1e-10, absolute_tolerance=1e-13)


@dataclass(frozen=True)
class AssociationResult:
    a_t: float
    a_r: float
    mu: float


def _thz_exclusion_exponent(s, r):
    """``pi lambda_R (Q r^2 e^{K r})^{2/alpha}``: RBS void needed around a TBS at ``r``."""
    alpha = s.rf.pathloss_exponent
    q = derived_constants(s).q
    r = np.asarray(r, dtype=float)
    # log form avoids overflow of exp(K r) for large K r
    log_eq = (2.0 / alpha) * (math.log(q) + 2.0 * np.log(np.maximum(r, 1e-300)) + s.k_a * r)
    with np.errstate(over="ignore"):
        return math.pi * s.rf.intensity * np.where(r > 0, np.exp(log_eq), 0.0)


def _rf_exclusion_exponent(s, mu, r):
    alpha = s.rf.pathloss_exponent
    q = derived_constants(s).q
    r = np.asarray(r, dtype=float)
    return math.pi * s.thz.intensity * (r ** alpha / q) ** (2.0 / (2.0 + mu))


def _thz_radius_limit(s):
    return truncation_radius(s.thz.intensity)


def _rf_radius_limit(s):
    return truncation_radius(s.rf.intensity)


@functools.lru_cache(maxsize=512)
def association_prob_thz(s):
    """Probability that the strongest long-term power comes from a TBS."""
    if s.thz.intensity == 0:
        return 0.0
    if s.rf.intensity == 0:
        return 1.0
    lam_t = s.thz.intensity

    def integrand(r):
        return (2 * math.pi * lam_t * r
                * np.exp(-math.pi * lam_t * r * r - _thz_exclusion_exponent(s, r)))

    value = integrate(integrand, 0.0, _thz_radius_limit(s), ANALYSIS_QUADRATURE)
    return min(max(value, 0.0), 1.0)


def association_prob_rf(s):
    return 1.0 - association_prob_thz(s)


def association_prob_thz_closed_form_alpha4(s):
    """Closed form of the THz association probability for ``alpha = 4``.

    Absorption is ignored (``K_a -> 0`` limit).
    """
    if s.rf.pathloss_exponent != 4:
        raise DomainError("closed form requires a path-loss exponent of 4")
    q = derived_constants(s).q
    lam_r, lam_t = s.rf.intensity, s.thz.intensity
    x = 0.5 * lam_r * math.sqrt(math.pi * q / lam_t)
    # exp(x^2) erfc(x) evaluated as erfcx to stay finite for large x
    return 1.0 - 0.5 * math.pi * lam_r * math.sqrt(q / lam_t) * erfcx(x)


def conditional_distance_pdf_thz(s, r):
    """Serving-TBS distance density given THz association."""
    a_t = association_prob_thz(s)
    lam_t = s.thz.intensity
    r = np.asarray(r, dtype=float)
    out = (2 * math.pi * lam_t * r / a_t
           * np.exp(-math.pi * lam_t * r * r - _thz_exclusion_exponent(s, r)))
    return out if out.ndim else float(out)


def conditional_distance_pdf_rf(s, mu, r):
    """Serving-RBS distance density given RF association (power-law surrogate)."""
    a_r = association_prob_rf(s)
    lam_r = s.rf.intensity
    r = np.asarray(r, dtype=float)
    out = (2 * math.pi * lam_r * r / a_r
           * np.exp(-math.pi * lam_r * r * r - _rf_exclusion_exponent(s, mu, r)))
    return out if out.ndim else float(out)


def conditional_distance_pdf_rf_exact(s, r):
    """Serving-RBS distance density given RF association, without the power-law surrogate."""
    a_r = association_prob_rf(s)
    lam_r = s.rf.intensity
    r = np.asarray(r, dtype=float)
    d = exact_equivalent_distance_thz_of_rf(s, r)
    out = (2 * math.pi * lam_r * r / a_r
           * np.exp(-math.pi * lam_r * r * r - math.pi * s.thz.intensity * d * d))
    return out if out.ndim else float(out)


def equivalent_distance_rf_of_thz(s, r_t):
    """RF distance delivering the same long-term power as a TBS at ``r_t``."""
    alpha = s.rf.pathloss_exponent
    q = derived_constants(s).q
    r_t = np.asarray(r_t, dtype=float)
    out = np.exp(s.k_a * r_t / alpha) * (q * r_t * r_t) ** (1.0 / alpha)
    return out if out.ndim else float(out)


def equivalent_distance_thz_of_rf(s, mu, r_r):
    """THz distance matching an RBS at ``r_r`` under ``r**mu ~ exp(K_a r)``."""
    alpha = s.rf.pathloss_exponent
    q = derived_constants(s).q
    r_r = np.asarray(r_r, dtype=float)
    out = (r_r ** alpha / q) ** (1.0 / (2.0 + mu))
    return out if out.ndim else float(out)


def exact_equivalent_distance_thz_of_rf(s, r_r):
    """Exact inverse of the THz power law: solves ``d^2 e^{K d} = r_r^alpha / Q``.

    Uses the Lambert W function; reduces to ``sqrt(r_r^alpha / Q)`` at ``K = 0``.
    """
    alpha = s.rf.pathloss_exponent
    q = derived_constants(s).q
    ka = s.k_a
    r_r = np.asarray(r_r, dtype=float)
    root = np.sqrt(r_r ** alpha / q)
    # (2/K) W(x) with x = K root / 2 equals root * exp(-W(x)); the latter keeps
    # full precision as K -> 0
    out = root * np.exp(-special.lambertw(0.5 * ka * root).real)
    return out if np.ndim(out) else float(out)


def approx_association_prob_rf(s, mu):
    """RF association probability under the power-law surrogate with exponent ``2 + mu``."""
    if s.rf.intensity == 0:
        return 0.0
    lam_r = s.rf.intensity

    def integrand(r):
        return (2 * math.pi * lam_r * r
                * np.exp(-math.pi * lam_r * r * r - _rf_exclusion_exponent(s, mu, r)))

    return integrate(integrand, 0.0, _rf_radius_limit(s), ANALYSIS_QUADRATURE)


@functools.lru_cache(maxsize=512)
def solve_correction_factor(s, upper=10.0, tol=1e-11):
    """Smallest-residual ``mu >= 0`` with matching RF association probability.

    Bisection on ``[0, upper]``; the upper end is doubled (up to 2**8 times)
    when the residual does not change sign.
    """
    target = association_prob_rf(s)

    def residual(mu):
        return approx_association_prob_rf(s, mu) - target

    r0 = residual(0.0)
    if abs(r0) <= 1e-9:
        return 0.0
    hi = upper
    r_hi = residual(hi)
    doublings = 0
    while r0 * r_hi > 0 and doublings < 8:
        hi *= 2.0
        r_hi = residual(hi)
        doublings += 1
    if r0 * r_hi > 0:
        raise BracketError(f"no correction factor in [0, {hi}]", r0, r_hi)
    return find_root(residual, 0.0, hi, tol)


def association(s):
    a_t = association_prob_thz(s)
    return AssociationResult(a_t=a_t, a_r=1.0 - a_t, mu=solve_correction_factor(s))
