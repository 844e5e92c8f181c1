"""Handoff probabilities for a user taking one movement step of length ``v``.

Geometry: the user starts at the origin with its serving BS at distance ``r``
and moves ``v`` metres at angle ``theta`` measured from the direction pointing
away from the serving BS (``theta = 0`` moves straight away).  The new serving
distance is ``R = sqrt(r^2 + v^2 + 2 r v cos(theta))``.  No handoff happens when
the part of each competitor disc around the new position that was not already
known to be empty contains no BS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .analysis import (
    association_prob_thz, conditional_distance_pdf_rf, conditional_distance_pdf_rf_exact,
    conditional_distance_pdf_thz, equivalent_distance_rf_of_thz, equivalent_distance_thz_of_rf,
    exact_equivalent_distance_thz_of_rf, solve_correction_factor,
)
from .model import derived_constants
from .numerics import QuadratureSpec, integrate, truncation_radius

INNER_QUADRATURE = QuadratureSpec(relative_tolerance=1e-8, absolute_tolerance=1e-12)
OUTER_QUADRATURE = QuadratureSpec(relative_tolerance=1e-7, absolute_tolerance=1e-10)

RF_MAPPINGS = ("surrogate", "exact")


@dataclass(frozen=True)
class HandoffResult:
    p_ho_from_thz: float
    p_ho_from_rf: float
    p_overall: float
    a_t: float
    mu: float


def lens_area(r1, r2, d):
    """Area of the intersection of two discs with radii ``r1``, ``r2`` and centre gap ``d``."""
    r1, r2, d = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (r1, r2, d)))
    small = np.minimum(r1, r2)
    out = np.where(d <= np.abs(r1 - r2), math.pi * small * small, 0.0)
    partial = (d > np.abs(r1 - r2)) & (d < r1 + r2)
    if np.any(partial):
        a, b, c = r1[partial], r2[partial], d[partial]
        # half-chord h and the foot of the chord at distance x from the first
        # centre; atan2 stays accurate near tangency where arccos does not
        gap = np.abs(a - b)
        h = (0.5 * np.sqrt(np.maximum((a + b - c) * (a + b + c), 0.0))
             * np.sqrt(c - gap) * np.sqrt(c + gap) / c)
        x = 0.5 * c + (a - b) * (a + b) / (2 * c)
        out = out.copy()
        out[partial] = (a * a * np.arctan2(h, x) + b * b * np.arctan2(h, c - x)
                        - c * h)
    return out if out.ndim else float(out)


def _uncovered(new_radius, old_radius, v):
    """Area of the disc around the new position outside the known-empty old disc."""
    return math.pi * new_radius * new_radius - lens_area(new_radius, old_radius, v)


def moved_distance(r, v, theta):
    return np.sqrt(np.maximum(r * r + v * v + 2.0 * r * v * np.cos(theta), 0.0))


def thz_competitor_radius(s, big_r, hysteresis):
    """Radius within which a TBS beats a THz serving link at ``big_r`` biased by ``hysteresis``.

    Solves ``d^2 e^{K d} = big_r^2 e^{K big_r} / hysteresis`` via the Lambert W function.
    """
    big_r = np.asarray(big_r, dtype=float)
    if hysteresis == 1.0:
        return big_r
    ka = s.k_a
    scaled = big_r * np.exp(0.5 * ka * big_r) / math.sqrt(hysteresis)
    # (2/K) W(K scaled / 2) written as scaled * exp(-W) to stay exact as K -> 0
    return scaled * np.exp(-special.lambertw(0.5 * ka * scaled).real)


def _thz_integrand(s, r, theta):
    v = s.mobility.speed
    eta_h = s.mobility.hysteresis
    alpha = s.rf.pathloss_exponent
    big_r = moved_distance(r, v, theta)
    r_rf = equivalent_distance_rf_of_thz(s, r)
    big_r_rf = equivalent_distance_rf_of_thz(s, big_r) * eta_h ** (-1.0 / alpha)
    big_r_thz = thz_competitor_radius(s, big_r, eta_h)
    area_t = _uncovered(big_r_thz, r, v)
    area_r = _uncovered(big_r_rf, r_rf, v)
    return conditional_distance_pdf_thz(s, r) * np.exp(
        -s.thz.intensity * area_t - s.rf.intensity * area_r)


def _rf_integrand(s, mu, r, theta, mapping):
    v = s.mobility.speed
    eta_h = s.mobility.hysteresis
    alpha = s.rf.pathloss_exponent
    big_r = moved_distance(r, v, theta)
    big_r_rf = big_r * eta_h ** (-1.0 / alpha)
    if mapping == "exact":
        r_thz = exact_equivalent_distance_thz_of_rf(s, r)
        big_r_thz = exact_equivalent_distance_thz_of_rf(s, big_r_rf)
        pdf = conditional_distance_pdf_rf_exact(s, r)
    else:
        q = derived_constants(s).q
        r_thz = equivalent_distance_thz_of_rf(s, mu, r)
        big_r_thz = (big_r ** alpha / (q * eta_h)) ** (1.0 / (2.0 + mu))
        pdf = conditional_distance_pdf_rf(s, mu, r)
    area_r = _uncovered(big_r_rf, r, v)
    area_t = _uncovered(big_r_thz, r_thz, v)
    return pdf * np.exp(-s.rf.intensity * area_r - s.thz.intensity * area_t)


def _average(integrand, r_max, direction):
    def inner(theta):
        return integrate(lambda r: integrand(r, theta), 0.0, r_max, INNER_QUADRATURE)

    if direction is not None:
        value = inner(direction)
    else:
        value = integrate(lambda th: np.array([inner(t) for t in np.atleast_1d(th)]),
                          0.0, math.pi, OUTER_QUADRATURE) / math.pi
    return min(max(value, 0.0), 1.0)


def no_ho_prob_given_thz(s, direction=None):
    """No-handoff probability for a THz-associated user.

    Exact under the PPP model: the RF equivalent radii come straight from the
    power-match identity.  ``direction`` fixes ``theta``; by default it is
    uniform on ``[0, pi]``.
    """
    if s.mobility.speed == 0 or s.thz.intensity == 0:
        return 1.0
    r_max = truncation_radius(s.thz.intensity)
    return _average(lambda r, th: _thz_integrand(s, r, th), r_max, direction)


def no_ho_prob_given_rf(s, mu=None, direction=None, *, mapping="surrogate"):
    """No-handoff probability for an RF-associated user.

    ``mapping="surrogate"`` maps RF distances to THz distances with the
    power law ``r^(2 + mu)``; ``mapping="exact"`` inverts ``d^2 e^{K_a d}``
    exactly (Lambert W) and uses the matching exact serving-distance density.
    """
    if mapping not in RF_MAPPINGS:
        raise ValueError(f"mapping must be one of {RF_MAPPINGS}")
    if s.mobility.speed == 0 or s.rf.intensity == 0:
        return 1.0
    if mu is None and mapping == "surrogate":
        mu = solve_correction_factor(s)
    r_max = truncation_radius(s.rf.intensity)
    return _average(lambda r, th: _rf_integrand(s, mu, r, th, mapping), r_max, direction)


def no_ho_prob_straight_line_thz(s):
    return no_ho_prob_given_thz(s, direction=0.0)


def no_ho_prob_straight_line_rf(s, mu=None, *, mapping="surrogate"):
    return no_ho_prob_given_rf(s, mu, direction=0.0, mapping=mapping)


def overall_ho_probability(s, direction=None, *, mapping="surrogate"):
    a_t = association_prob_thz(s)
    a_r = 1.0 - a_t
    mu = solve_correction_factor(s)
    stay_t = no_ho_prob_given_thz(s, direction) if a_t > 0 else 1.0
    stay_r = no_ho_prob_given_rf(s, mu, direction, mapping=mapping) if a_r > 0 else 1.0
    p_overall = 1.0 - a_r * stay_r - a_t * stay_t
    return HandoffResult(p_ho_from_thz=1.0 - stay_t, p_ho_from_rf=1.0 - stay_r,
                         p_overall=min(max(p_overall, 0.0), 1.0), a_t=a_t, mu=mu)
