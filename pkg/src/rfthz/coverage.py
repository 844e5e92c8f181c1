"""Coverage probabilities of the static and the mobile user.

THz conditional coverage is obtained by Gil-Pelaez inversion of the
characteristic function of ``S(r0) - tau * I``, where ``S`` already contains the
desired-link absorption noise and ``I`` is the exponential-free aggregate of
interference plus interferer absorption noise.  All oscillatory integrals are
carried out in the dimensionless frequency ``u = omega * P_T gamma_T / r0^2``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .analysis import (
    association_prob_thz, conditional_distance_pdf_rf, conditional_distance_pdf_thz,
    solve_correction_factor,
)
from .handoff import overall_ho_probability
from .model import derived_constants, rate_to_sinr_threshold
from .numerics import (
    DomainError, QuadratureSpec, find_root, gauss_2f1_coverage_kernel, integrate,
    integrate_oscillatory_semiinfinite, truncation_radius,
)

INVERSION_QUADRATURE = QuadratureSpec(relative_tolerance=1e-7, absolute_tolerance=1e-9)
OUTER_QUADRATURE = QuadratureSpec(relative_tolerance=1e-6, absolute_tolerance=1e-9)

INDEX_MODES = ("fractional", "integer")


@dataclass(frozen=True)
class CoverageConfig:
    lt_series_terms: int = 3
    lt_epsilon: float = 0.01
    interference_limited_rf: bool = True
    lt_index_mode: str = "fractional"
    absorption_noise: bool = True

    def __post_init__(self):
        if self.lt_series_terms < 1:
            raise ValueError("lt_series_terms must be at least 1")
        if not 0.0 < self.lt_epsilon < 1.0:
            raise ValueError("lt_epsilon must lie in (0, 1)")
        if self.lt_index_mode not in INDEX_MODES:
            raise ValueError(f"lt_index_mode must be one of {INDEX_MODES}")

    def indices(self):
        """Series exponents ``l`` used in the interference transform."""
        if self.lt_index_mode == "fractional":
            return tuple(k + self.lt_epsilon for k in range(1, self.lt_series_terms + 1))
        # integer mode: l = 1 is the divergent mean of the d^-2 field and is dropped
        return tuple(range(2, self.lt_series_terms + 1))


DEFAULT_COVERAGE = CoverageConfig()


@dataclass(frozen=True)
class BlockageModel:
    blocker_intensity: float = 0.0
    mean_length: float = 0.0
    mean_width: float = 0.0

    def __post_init__(self):
        for name in ("blocker_intensity", "mean_length", "mean_width"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.p >= 1.0:
            raise DomainError(f"blocked area fraction p={self.p:.6g} must be below 1")

    @property
    def xi(self):
        return 2.0 * self.blocker_intensity * (self.mean_width + self.mean_length) / math.pi

    @property
    def p(self):
        return self.blocker_intensity * self.mean_width * self.mean_length

    def los_probability(self, r):
        r = np.asarray(r, dtype=float)
        out = np.exp(-(self.xi * r + self.p))
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class MisalignmentModel:
    """Multiplicative error ``chi`` on the desired-signal margin.

    ``lt`` is the Laplace transform ``E[exp(-z chi)]`` for complex ``z`` and
    ``sampler(rng, n)`` draws ``n`` realisations for the simulator.  A discrete
    ``chi`` also carries its ``atoms`` and ``weights``; coverage is then the
    weighted sum of single-margin inversions, which avoids inverting a
    multi-frequency characteristic function.
    """
    lt: Callable
    sampler: Optional[Callable] = field(default=None, compare=False)
    atoms: tuple = field(default=(), compare=False)
    weights: tuple = field(default=(), compare=False)

    @classmethod
    def point_mass(cls, value):
        return cls(lt=lambda z: np.exp(-np.asarray(z) * value),
                   sampler=lambda rng, n: np.full(n, float(value)),
                   atoms=(float(value),), weights=(1.0,))

    @classmethod
    def discrete(cls, values, weights):
        values = np.asarray(values, dtype=float)
        weights = np.asarray(weights, dtype=float) / np.sum(weights)

        def lt(z):
            z = np.asarray(z, dtype=complex)
            return np.sum(weights[:, None] * np.exp(-np.outer(values, z.ravel())),
                          axis=0).reshape(z.shape)

        def sampler(rng, n):
            return rng.choice(values, size=n, p=weights)

        keep = weights > 0
        return cls(lt=lt, sampler=sampler, atoms=tuple(values[keep].tolist()),
                   weights=tuple(weights[keep].tolist()))


def _series_coefficients(cfg):
    ls = np.array(cfg.indices(), dtype=float)
    return ls, 1.0 / ((2.0 * ls - 2.0) * special.gamma(ls + 1.0))


@functools.lru_cache(maxsize=64)
def series_validity_limit(cfg):
    """Largest ``y`` up to which the truncated series keeps decaying on the imaginary axis.

    The real part of the series exponent, as a function of ``y = u tau F``,
    eventually turns upward for the fractional index set; past its minimum the
    truncated series no longer represents a characteristic function and the
    transform is taken as zero there.
    """
    ls, coef = _series_coefficients(cfg)
    ys = np.logspace(-3, 12, 4001)
    re = np.sum(coef[:, None] * np.cos(0.5 * math.pi * ls)[:, None]
                * ys[None, :] ** ls[:, None], axis=0)
    rising = np.nonzero(np.diff(re) > 0)[0]
    return math.inf if len(rising) == 0 else float(ys[rising[0]])


def lt_aggregate_thz_interference(s, cfg, z, r0):
    """Series Laplace transform of the aggregate THz interference beyond ``r0``."""
    z = np.asarray(z, dtype=complex)
    if s.thz.intensity == 0:
        out = np.ones_like(z)
        return out if out.ndim else complex(out)
    d = derived_constants(s)
    scale = d.f * d.gamma_t * s.thz.tx_power
    ls, coef = _series_coefficients(cfg)
    base = -z * scale
    expo = np.zeros_like(z)
    for l, c in zip(ls, coef):
        expo = expo + c * np.power(base, l) * r0 ** (-(2.0 * l - 2.0))
    out = np.exp(2.0 * math.pi * s.thz.intensity * expo)
    out = np.where(z == 0, 1.0 + 0.0j, out)
    return out if out.ndim else complex(out)


def _series_lt_dimless(s, cfg, r0, y):
    """Transform at ``-j omega tau`` written in ``y = u tau F``."""
    ls, coef = _series_coefficients(cfg)
    y = np.asarray(y, dtype=float)
    valid = y <= series_validity_limit(cfg)
    yv = np.where(valid, y, 0.0)
    expo = np.zeros(y.shape, dtype=complex)
    for l, c in zip(ls, coef):
        expo = expo + c * np.exp(0.5j * math.pi * l) * yv ** l
    lt = np.exp(2.0 * math.pi * s.thz.intensity * r0 * r0 * expo)
    return np.where(valid, lt, 0.0)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _pgfl_lt_absorbing(s, r0, y):
    """Exact PGFL transform of ``sum F P gamma d^-2 e^{-K d}`` (interference without absorption noise)."""
    ka = s.k_a
    y = np.atleast_1d(np.asarray(y, dtype=float))
    # t = d / r0; integrand t (1 - exp(j y t^-2 e^{-K r0 t})) decays like e^{-K r0 t}
    t_max = 1.0 + 60.0 / (ka * r0)
    edges = np.geomspace(1.0, t_max, 41)
    lo, hi = edges[:-1, None], edges[1:, None]
    t = (0.5 * (hi - lo) * _GL_X[None, :] + 0.5 * (hi + lo)).ravel()
    w = (0.5 * (hi - lo) * _GL_W[None, :]).ravel()
    gain = t ** -2.0 * np.exp(-ka * r0 * t)
    phase = np.outer(y, gain)
    integral = (t * w)[None, :] * (-np.expm1(1j * phase))
    expo = -2.0 * math.pi * s.thz.intensity * r0 * r0 * integral.sum(axis=1)
    return np.exp(expo)


def thz_margin_dimless(s, cfg, tau, r0):
    """``S(r0) - tau N0`` in units of ``P_T gamma_T / r0^2``."""
    d = derived_constants(s)
    c = d.gamma_t * s.thz.tx_power
    r0 = np.asarray(r0, dtype=float)
    attenuation = np.exp(-s.k_a * r0)
    noise = tau * s.thz.thermal_noise * r0 * r0 / c
    if cfg.absorption_noise:
        return (1.0 + tau) * attenuation - tau - noise
    return attenuation - noise


def _transform(s, cfg, r0, y):
    if s.thz.intensity == 0 or s.thz.alignment_probability == 0:
        return np.ones(np.shape(y), dtype=complex)
    if cfg.absorption_noise or s.k_a == 0:
        return _series_lt_dimless(s, cfg, r0, y)
    return _pgfl_lt_absorbing(s, r0, y)


def _noise_dimless(s, tau, r0):
    d = derived_constants(s)
    return tau * s.thz.thermal_noise * r0 * r0 / (d.gamma_t * s.thz.tx_power)


def _inversion(s, cfg, tau, r0, chi_lt=None, margin=None):
    """Gil-Pelaez coverage at fixed ``r0``.

    ``chi_lt`` multiplies the desired signal by a random misalignment factor;
    ``margin`` replaces the dimensionless noise margin (used for a fixed factor).
    """
    if tau == 0:
        return 1.0
    f = s.thz.alignment_probability
    m = float(thz_margin_dimless(s, cfg, tau, r0)) if margin is None else float(margin)
    n = _noise_dimless(s, tau, r0)
    signal = m + n   # S(r0) alone, dimensionless
    if chi_lt is None and m <= 0:
        return 0.0   # interference is non-negative

    def g(u):
        u = np.asarray(u, dtype=float)
        lt = _transform(s, cfg, r0, u * tau * f)
        if chi_lt is None:
            desired = np.exp(-1j * u * m)
        else:
            desired = chi_lt(1j * u * signal) * np.exp(1j * u * n)
        return np.imag(desired * lt) / u

    scale = 20.0 / max(abs(m), 1e-6)
    integral = integrate_oscillatory_semiinfinite(g, INVERSION_QUADRATURE, scale=scale)
    return min(max(0.5 - integral / math.pi, 0.0), 1.0)


def _scaled_margin(s, cfg, tau, r0, c):
    """Noise margin when the desired signal is multiplied by ``c``."""
    n = _noise_dimless(s, tau, r0)
    return c * (float(thz_margin_dimless(s, cfg, tau, r0)) + n) - n


def _misaligned_conditional(s, cfg, tau, r0, mis):
    if not mis.atoms:
        return _inversion(s, cfg, tau, r0, mis.lt)
    return sum(w * _inversion(s, cfg, tau, r0, margin=_scaled_margin(s, cfg, tau, r0, c))
               for c, w in zip(mis.atoms, mis.weights))


def coverage_thz_conditional(s, cfg, tau, r0):
    """THz coverage given the serving distance ``r0``."""
    if r0 <= 0:
        raise DomainError("serving distance must be positive")
    return _inversion(s, cfg, tau, r0)


def _margin_root(s, cfg, tau, r_max):
    """Distance where the noise-only margin changes sign, or ``None``."""
    def margin(r):
        return float(thz_margin_dimless(s, cfg, tau, r))

    if margin(r_max) >= 0:
        return None
    return find_root(margin, 0.0, r_max, 1e-9 * r_max)


def _average_over_serving_distance(s, cfg, tau, conditional, standalone, extra_splits=()):
    lam_t = s.thz.intensity
    r_max = truncation_radius(lam_t)
    if standalone:
        def pdf(r):
            return 2 * math.pi * lam_t * r * np.exp(-math.pi * lam_t * r * r)
    else:
        def pdf(r):
            return conditional_distance_pdf_thz(s, r)

    def integrand(r):
        r = np.atleast_1d(r)
        vals = np.array([conditional(float(x)) if x > 0 else 1.0 for x in r])
        return vals * pdf(r)

    # conditional coverage is close to a step at the noise-margin root
    split = _margin_root(s, cfg, tau, r_max)
    inner = {x for x in extra_splits if 0.0 < x < r_max}
    if split is not None:
        inner.add(split)
    edges = [0.0, *sorted(inner), r_max]
    total = sum(integrate(integrand, a, b, OUTER_QUADRATURE)
                for a, b in zip(edges[:-1], edges[1:]) if b > a)
    return min(max(total, 0.0), 1.0)


def coverage_thz(s, cfg=DEFAULT_COVERAGE, tau=None, *, standalone=False):
    """THz coverage averaged over the serving distance.

    ``standalone`` averages over the nearest-TBS distance instead of the
    THz-associated serving distance.
    """
    if tau is None:
        tau = rate_to_sinr_threshold(s.rate_threshold, s.thz.bandwidth)
    if tau == 0:
        return 1.0
    return _average_over_serving_distance(
        s, cfg, tau, lambda r: _inversion(s, cfg, tau, r), standalone)


def coverage_thz_with_misalignment(s, cfg, tau, mis, *, standalone=False):
    """THz coverage with a random multiplicative error on the desired signal."""
    if tau is None:
        tau = rate_to_sinr_threshold(s.rate_threshold, s.thz.bandwidth)
    if tau == 0:
        return 1.0
    r_max = truncation_radius(s.thz.intensity)
    splits = []
    for c in mis.atoms:
        if c > 0 and _scaled_margin(s, cfg, tau, r_max, c) < 0:
            splits.append(find_root(lambda r, c=c: _scaled_margin(s, cfg, tau, r, c),
                                    0.0, r_max, 1e-9 * r_max))
    return _average_over_serving_distance(
        s, cfg, tau, lambda r: _misaligned_conditional(s, cfg, tau, r, mis), standalone,
        splits)


def coverage_thz_with_blockage(s, cfg, tau, blockage, *, standalone=False):
    if tau is None:
        tau = rate_to_sinr_threshold(s.rate_threshold, s.thz.bandwidth)
    if tau == 0:
        conditional = blockage.los_probability
    else:
        def conditional(r):
            return blockage.los_probability(r) * _inversion(s, cfg, tau, r)
    return _average_over_serving_distance(s, cfg, tau, conditional, standalone)


def coverage_thz_noise_limited(s, cfg=DEFAULT_COVERAGE, tau=None, *, standalone=True,
                               method="inversion"):
    """Coverage with interference neglected.

    ``method="inversion"`` evaluates the Dirichlet form of the inversion
    integral numerically; ``method="root"`` uses the equivalent indicator of a
    positive margin, i.e. the serving distance falling below the margin root.
    """
    if tau is None:
        tau = rate_to_sinr_threshold(s.rate_threshold, s.thz.bandwidth)
    if tau == 0:
        return 1.0
    if method == "inversion":
        def conditional(r):
            m = float(thz_margin_dimless(s, cfg, tau, r))
            if m == 0:
                return 0.5
            value = integrate_oscillatory_semiinfinite(
                lambda u: np.sin(np.asarray(u) * m) / np.asarray(u),
                INVERSION_QUADRATURE, scale=20.0 / abs(m))
            return min(max(0.5 + value / math.pi, 0.0), 1.0)
        return _average_over_serving_distance(s, cfg, tau, conditional, standalone)
    if method != "root":
        raise ValueError("method must be 'inversion' or 'root'")
    lam_t = s.thz.intensity
    r_max = truncation_radius(lam_t)
    split = _margin_root(s, cfg, tau, r_max)
    upper = r_max if split is None else split
    if standalone:
        return -math.expm1(-math.pi * lam_t * upper * upper)
    return integrate(lambda r: conditional_distance_pdf_thz(s, r), 0.0, upper, OUTER_QUADRATURE)


def coverage_rf(s, cfg=DEFAULT_COVERAGE, tau=None, mu=None):
    """RF coverage with Rayleigh fading and PPP interference beyond the serving RBS."""
    if tau is None:
        tau = rate_to_sinr_threshold(s.rate_threshold, s.rf.bandwidth)
    if tau == 0:
        return 1.0
    if s.rf.intensity == 0:
        return 0.0
    if mu is None:
        mu = solve_correction_factor(s)
    alpha = s.rf.pathloss_exponent
    kernel = gauss_2f1_coverage_kernel(tau, alpha)
    lam_r = s.rf.intensity
    d = derived_constants(s)
    noise_coef = 0.0 if cfg.interference_limited_rf else (
        tau * s.rf.thermal_noise / (s.rf.tx_power * d.gamma_r))

    def integrand(r):
        return (np.exp(-math.pi * r * r * lam_r * kernel - noise_coef * r ** alpha)
                * conditional_distance_pdf_rf(s, mu, r))

    value = integrate(integrand, 0.0, truncation_radius(lam_r), OUTER_QUADRATURE)
    return min(max(value, 0.0), 1.0)


@dataclass(frozen=True)
class CoverageResult:
    a_t: float
    c_t: float
    c_r: float
    c: float


def coverage_total(s, cfg=DEFAULT_COVERAGE):
    a_t = association_prob_thz(s)
    tau_t = rate_to_sinr_threshold(s.rate_threshold, s.thz.bandwidth)
    tau_r = rate_to_sinr_threshold(s.rate_threshold, s.rf.bandwidth)
    c_t = coverage_thz(s, cfg, tau_t) if a_t > 0 else 0.0
    c_r = coverage_rf(s, cfg, tau_r) if a_t < 1 else 0.0
    return CoverageResult(a_t=a_t, c_t=c_t, c_r=c_r, c=a_t * c_t + (1.0 - a_t) * c_r)


def coverage_with_mobility(s, cfg=DEFAULT_COVERAGE, *, coverage=None, handoff=None):
    """Mobility-aware coverage ``C (1 - eta P(H))``."""
    c = (coverage or coverage_total(s, cfg)).c
    eta = s.mobility.ho_cost
    if eta == 0:
        return c
    p_h = (handoff or overall_ho_probability(s)).p_overall
    return c * (1.0 - eta * p_h)
