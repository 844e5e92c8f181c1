"""Monte-Carlo simulator of the two-tier network.

Trials are processed in fixed-size blocks.  Each block draws from its own
Philox stream keyed by ``(seed, block index)``, so results do not depend on how
many worker threads run the blocks.  Base stations are dropped in a disc of
radius ``guard_factor * window_radius`` around the user at the origin.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import derived_constants, rate_to_sinr_threshold

RF, THZ = 0, 1
TIER_NAMES = {RF: "RF", THZ: "THZ"}
OUTCOME_COLUMNS = ("trial", "tier", "serving_distance_m", "ho", "sinr_db", "covered")


@dataclass(frozen=True)
class SimConfig:
    trials: int = 100_000
    seed: int = 0
    window_radius: float = 500.0
    guard_factor: float = 2.0
    block_size: int = 1000
    threads: int = 1
    include_rf_noise: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.window_radius <= 0:
            raise ValueError("window_radius must be positive")
        if self.guard_factor < 1:
            raise ValueError("guard_factor must be at least 1")
        if self.block_size < 1 or self.threads < 1:
            raise ValueError("block_size and threads must be positive")

    @property
    def drop_radius(self):
        return self.window_radius * self.guard_factor


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    associated_tier: int
    serving_distance: float
    ho_occurred: bool
    sinr: float
    covered: bool


@dataclass(frozen=True)
class Estimate:
    value: float
    successes: int
    n: int

    @property
    def stderr(self):
        if self.n == 0:
            return math.nan
        p = self.value
        return math.sqrt(max(p * (1 - p), 0.0) / self.n)

    def interval(self, z=1.96):
        """Wilson score interval."""
        if self.n == 0:
            return (0.0, 1.0)
        n, p = self.n, self.value
        centre = (p + z * z / (2 * n)) / (1 + z * z / n)
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
        return (max(centre - half, 0.0), min(centre + half, 1.0))


def _estimate(flags):
    flags = np.asarray(flags, dtype=bool)
    n = int(flags.size)
    k = int(flags.sum())
    return Estimate(value=k / n if n else math.nan, successes=k, n=n)


def sample_ppp(intensity, radius, rng):
    """Homogeneous PPP in a disc centred at the origin; returns an ``(n, 2)`` array."""
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    n = rng.poisson(intensity * math.pi * radius * radius) if intensity > 0 else 0
    rho = radius * np.sqrt(rng.random(n))
    phi = 2 * math.pi * rng.random(n)
    return np.column_stack((rho * np.cos(phi), rho * np.sin(phi)))


class _Ragged:
    """Points of many independent trials stored back to back."""

    def __init__(self, counts, x, y):
        self.counts = counts
        self.starts = np.concatenate(([0], np.cumsum(counts)[:-1])).astype(np.int64)
        self.owner = np.repeat(np.arange(len(counts)), counts)
        self.x = x
        self.y = y

    def segment_max(self, values):
        """Per-trial maximum and flat index of the maximum (``-inf``/-1 for empty trials)."""
        n = len(self.counts)
        best = np.full(n, -np.inf)
        where = np.full(n, -1, dtype=np.int64)
        if values.size == 0:
            return best, where
        nonempty = self.counts > 0
        best[nonempty] = np.maximum.reduceat(values, self.starts[nonempty])
        hit = np.flatnonzero(values == best[self.owner])
        owners = self.owner[hit]
        first = np.concatenate(([True], owners[1:] != owners[:-1]))
        where[owners[first]] = hit[first]
        return best, where


def _drop(rng, intensity, radius, counts):
    total = int(counts.sum())
    rho = radius * np.sqrt(rng.random(total))
    phi = 2 * math.pi * rng.random(total)
    return _Ragged(counts, rho * np.cos(phi), rho * np.sin(phi))


def _log_power_thz(s, logc, d):
    return logc - s.k_a * d - 2.0 * np.log(d)


def _log_power_rf(s, logc, d):
    return logc - s.rf.pathloss_exponent * np.log(d)


def _simulate_block(s, cfg, block, n, direction, coverage, extensions):
    rng = np.random.Generator(np.random.Philox(key=[cfg.seed & (2**64 - 1), block]))
    radius = cfg.drop_radius
    dc = derived_constants(s)
    log_ct = math.log(dc.gamma_t * s.thz.tx_power) if s.thz.tx_power > 0 else -np.inf
    log_cr = math.log(dc.gamma_r * s.rf.tx_power) if s.rf.tx_power > 0 else -np.inf
    mean_t = s.thz.intensity * math.pi * radius * radius
    mean_r = s.rf.intensity * math.pi * radius * radius

    counts_t = rng.poisson(mean_t, n)
    counts_r = rng.poisson(mean_r, n)
    redraws = 0
    empty = (counts_t == 0) & (counts_r == 0)
    while np.any(empty):
        if mean_t == 0 and mean_r == 0:
            raise ValueError("both tiers have zero intensity")
        k = int(empty.sum())
        redraws += k
        counts_t[empty] = rng.poisson(mean_t, k)
        counts_r[empty] = rng.poisson(mean_r, k)
        empty = (counts_t == 0) & (counts_r == 0)
    thz = _drop(rng, s.thz.intensity, radius, counts_t)
    rf = _drop(rng, s.rf.intensity, radius, counts_r)

    d_t = np.hypot(thz.x, thz.y)
    d_r = np.hypot(rf.x, rf.y)
    p_t, i_t = thz.segment_max(_log_power_thz(s, log_ct, d_t))
    p_r, i_r = rf.segment_max(_log_power_rf(s, log_cr, d_r))
    tier = np.where(p_t > p_r, THZ, RF)
    serving_distance = np.where(tier == THZ, d_t[np.maximum(i_t, 0)] if d_t.size else 0.0,
                                d_r[np.maximum(i_r, 0)] if d_r.size else 0.0)

    # single movement step
    ho = np.zeros(n, dtype=bool)
    v = s.mobility.speed
    if v > 0:
        bx = np.where(tier == THZ, thz.x[np.maximum(i_t, 0)] if d_t.size else 0.0,
                      rf.x[np.maximum(i_r, 0)] if d_r.size else 0.0)
        by = np.where(tier == THZ, thz.y[np.maximum(i_t, 0)] if d_t.size else 0.0,
                      rf.y[np.maximum(i_r, 0)] if d_r.size else 0.0)
        bearing = np.arctan2(by, bx)
        if direction is None:
            theta = math.pi * rng.random(n) * rng.choice((-1.0, 1.0), n)
        else:
            theta = np.full(n, float(direction))
        heading = bearing + math.pi + theta
        ux, uy = v * np.cos(heading), v * np.sin(heading)
        lp_t = _log_power_thz(s, log_ct, np.hypot(thz.x - ux[thz.owner], thz.y - uy[thz.owner]))
        lp_r = _log_power_rf(s, log_cr, np.hypot(rf.x - ux[rf.owner], rf.y - uy[rf.owner]))
        serving_t = (tier == THZ)
        serving_r = ~serving_t
        rows = np.arange(n)
        own = np.full(n, -np.inf)
        if lp_t.size:
            own[serving_t] = lp_t[i_t[serving_t]]
            lp_t = lp_t.copy()
            lp_t[i_t[serving_t]] = -np.inf
        if lp_r.size:
            own[serving_r] = lp_r[i_r[serving_r]]
            lp_r = lp_r.copy()
            lp_r[i_r[serving_r]] = -np.inf
        best_t, _ = thz.segment_max(lp_t)
        best_r, _ = rf.segment_max(lp_r)
        threshold = own[rows] + math.log(s.mobility.hysteresis)
        ho = np.maximum(best_t, best_r) > threshold

    sinr = np.full(n, np.nan)
    covered = np.zeros(n, dtype=bool)
    if coverage:
        sinr, covered = _coverage(s, cfg, rng, n, tier, serving_distance, thz, rf,
                                  d_t, d_r, i_t, i_r, extensions)
    return tier, serving_distance, ho, sinr, covered, redraws


def _coverage(s, cfg, rng, n, tier, serving_distance, thz, rf, d_t, d_r, i_t, i_r, ext):
    dc = derived_constants(s)
    tau_t = rate_to_sinr_threshold(s.rate_threshold, s.thz.bandwidth)
    tau_r = rate_to_sinr_threshold(s.rate_threshold, s.rf.bandwidth)
    sinr = np.full(n, np.nan)
    covered = np.zeros(n, dtype=bool)
    ka = s.k_a

    # THz: deterministic path loss, Bernoulli main-lobe alignment of interferers
    c = dc.gamma_t * s.thz.tx_power
    if d_t.size:
        aligned = rng.random(d_t.size) < dc.f
        is_serving = np.zeros(d_t.size, dtype=bool)
        is_serving[i_t[i_t >= 0]] = True
        contrib = np.where(aligned & ~is_serving, c / (d_t * d_t), 0.0)
        absorbed = np.exp(-ka * d_t)
        full = np.bincount(thz.owner, weights=contrib, minlength=n)
        visible = np.bincount(thz.owner, weights=contrib * absorbed, minlength=n)
        d0 = np.where(tier == THZ, serving_distance, 1.0)
        received = c * np.exp(-ka * d0) / (d0 * d0)
        if ext.get("absorption_noise", True):
            own_noise = c * (1.0 - np.exp(-ka * d0)) / (d0 * d0)
            denom = s.thz.thermal_noise + own_noise + full
        else:
            denom = s.thz.thermal_noise + visible
        thz_sinr = received / denom
        margin_ok = thz_sinr > tau_t
        chi_sampler = ext.get("misalignment")
        if chi_sampler is not None:
            chi = chi_sampler(rng, n)
            # margin form: chi * S(d0) > tau (N0 + I), S carrying the own absorption noise
            if ext.get("absorption_noise", True):
                s_margin = c / (d0 * d0) * ((1.0 + tau_t) * np.exp(-ka * d0) - tau_t)
                margin_ok = chi * s_margin > tau_t * (s.thz.thermal_noise + full)
            else:
                margin_ok = chi * received > tau_t * (s.thz.thermal_noise + visible)
        blockage = ext.get("blockage")
        if blockage is not None:
            margin_ok &= rng.random(n) < blockage.los_probability(d0)
        sel = tier == THZ
        sinr[sel] = thz_sinr[sel]
        covered[sel] = margin_ok[sel]

    # RF: Rayleigh fading on every link
    if d_r.size:
        fading = rng.exponential(1.0, d_r.size)
        gain = fading * d_r ** (-s.rf.pathloss_exponent)
        scale = dc.gamma_r * s.rf.tx_power
        is_serving = np.zeros(d_r.size, dtype=bool)
        is_serving[i_r[i_r >= 0]] = True
        total = np.bincount(rf.owner, weights=np.where(is_serving, 0.0, gain), minlength=n)
        own = np.bincount(rf.owner, weights=np.where(is_serving, gain, 0.0), minlength=n)
        noise = s.rf.thermal_noise / scale if cfg.include_rf_noise else 0.0
        with np.errstate(divide="ignore"):
            rf_sinr = own / (total + noise)
        sel = tier == RF
        sinr[sel] = rf_sinr[sel]
        covered[sel] = rf_sinr[sel] > tau_r
    return sinr, covered


@dataclass
class SimulationResult:
    tier: np.ndarray
    serving_distance: np.ndarray
    ho: np.ndarray
    sinr: np.ndarray
    covered: np.ndarray
    redraws: int
    killed: Optional[np.ndarray] = None

    @property
    def trials(self):
        return int(self.tier.size)

    def association(self):
        return _estimate(self.tier == THZ)

    def handoff(self):
        thz = self.tier == THZ
        return (_estimate(self.ho[thz]), _estimate(self.ho[~thz]), _estimate(self.ho))

    @property
    def covered_mobile(self):
        return self.covered if self.killed is None else self.covered & ~self.killed

    def coverage(self):
        """``(C, C_T, C_R)``; handoff-cost kills are applied when the run had mobility."""
        cov = self.covered_mobile
        thz = self.tier == THZ
        return _estimate(cov), _estimate(cov[thz]), _estimate(cov[~thz])

    def static_coverage(self):
        thz = self.tier == THZ
        return (_estimate(self.covered), _estimate(self.covered[thz]),
                _estimate(self.covered[~thz]))

    def outcomes(self):
        cov = self.covered_mobile
        for k in range(self.trials):
            yield TrialOutcome(k, int(self.tier[k]), float(self.serving_distance[k]),
                               bool(self.ho[k]), float(self.sinr[k]), bool(cov[k]))

    def to_csv(self):
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(OUTCOME_COLUMNS)
        with np.errstate(divide="ignore"):
            sinr_db = 10.0 * np.log10(self.sinr)
        cov = self.covered_mobile
        for k in range(self.trials):
            w.writerow((k, TIER_NAMES[int(self.tier[k])], f"{self.serving_distance[k]:.9g}",
                        int(self.ho[k]), f"{sinr_db[k]:.9g}", int(cov[k])))
        return out.getvalue()


def run_trials(s, cfg, *, direction=None, coverage=False, with_mobility=False,
               blockage=None, misalignment=None, absorption_noise=True):
    """Run ``cfg.trials`` independent trials and return the per-trial record."""
    ext = {"blockage": blockage, "absorption_noise": absorption_noise,
           "misalignment": None if misalignment is None else misalignment.sampler}
    if misalignment is not None and misalignment.sampler is None:
        raise ValueError("misalignment model has no sampler")
    blocks = []
    start = 0
    while start < cfg.trials:
        blocks.append((len(blocks), min(cfg.block_size, cfg.trials - start)))
        start += cfg.block_size

    def work(item):
        b, n = item
        return _simulate_block(s, cfg, b, n, direction, coverage, ext)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(item) for item in blocks]

    tier = np.concatenate([p[0] for p in parts])
    dist = np.concatenate([p[1] for p in parts])
    ho = np.concatenate([p[2] for p in parts])
    sinr = np.concatenate([p[3] for p in parts])
    covered = np.concatenate([p[4] for p in parts])
    killed = None
    if coverage and with_mobility and s.mobility.ho_cost > 0:
        # the coverage kill uses the handoff of the neighbouring (independent) trial in the
        # same block, so that the mean matches C (1 - eta P(H)) under independence
        kills = []
        for b, (_, n) in enumerate(blocks):
            hb = parts[b][2]
            rng = np.random.Generator(np.random.Philox(key=[cfg.seed & (2**64 - 1), b],
                                                       counter=[0, 0, 0, 1]))
            kills.append(np.roll(hb, -1) & (rng.random(n) < s.mobility.ho_cost))
        killed = np.concatenate(kills)
    return SimulationResult(tier, dist, ho, sinr, covered, sum(p[5] for p in parts), killed)


def simulate_association(s, cfg):
    return run_trials(s, cfg).association()


def simulate_handoff(s, cfg, direction=None):
    """Empirical ``(P(H_T), P(H_R), P(H))``."""
    return run_trials(s, cfg, direction=direction).handoff()


def simulate_coverage(s, cfg, with_mobility=False, *, blockage=None, misalignment=None,
                      absorption_noise=True):
    """Empirical ``(C, C_T, C_R)``; with mobility ``C`` becomes ``C_M``."""
    return run_trials(s, cfg, coverage=True, with_mobility=with_mobility, blockage=blockage,
                      misalignment=misalignment, absorption_noise=absorption_noise).coverage()
