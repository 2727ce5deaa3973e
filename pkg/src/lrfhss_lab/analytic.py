"""Closed-form outage chain for LR-FHSS and its D2D-aided variant.

Pipeline: per-fragment disconnection (noise) and capture failure
(sum-interference) probabilities, time-domain interference counting,
header/payload/packet loss composition, and location-averaged network
outage.  All dB quantities are converted to linear units exactly once at
this module's boundary; every internal expression is linear-unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .channel import ShadowedRiceParams, series_constants
from .specfun import (
    SeriesControl, DEFAULT_CONTROL, SeriesError, _KahanSum,
    regularized_lower_gamma, gauss_2f1,
)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DataRateProfile:
    """Per-data-rate LR-FHSS constants (US 902-928 MHz band)."""
    name: str
    n_hdr: int
    t_hdr_s: float
    n_pl: int
    t_pl_s: float
    code_rate: float
    groups: int = 52
    carriers_per_group: int = 60
    obw_hz: float = 488.0

    def toa_s(self) -> float:
        return self.n_hdr * self.t_hdr_s + self.n_pl * self.t_pl_s

    def omega(self) -> int:
        """Minimum lost-payload count that defeats the FEC."""
        return math.ceil((1.0 - self.code_rate) * self.n_pl)


DR5 = DataRateProfile("DR5", n_hdr=3, t_hdr_s=0.233, n_pl=5, t_pl_s=0.102,
                      code_rate=1.0 / 3.0)
DR6 = DataRateProfile("DR6", n_hdr=2, t_hdr_s=0.233, n_pl=5, t_pl_s=0.102,
                      code_rate=2.0 / 3.0)


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float = 30.0
    tx_gain_dbi: float = 2.5
    rx_gain_dbi: float = 22.6
    noise_figure_db: float = 6.0
    snr_threshold_db: float = 3.96
    sir_threshold_db: float = 6.0
    frequency_mhz: float = 905.4385

    @property
    def eirp_mw(self) -> float:
        """Effective power P (linear mW), transmit power plus both gains."""
        return 10.0 ** ((self.tx_power_dbm + self.tx_gain_dbi + self.rx_gain_dbi) / 10.0)

    @property
    def snr_threshold_linear(self) -> float:
        return 10.0 ** (self.snr_threshold_db / 10.0)

    @property
    def sir_threshold_linear(self) -> float:
        return 10.0 ** (self.sir_threshold_db / 10.0)


@dataclass(frozen=True)
class CaptureSeriesConfig:
    """Free-parameter and truncation settings for the capture series.

    ``alpha_factor`` scales min_i{b0·g_i} to form the series parameter;
    admissibility requires it in (0, 4).
    """
    alpha_factor: float = 3.9999
    i_series_ctl: SeriesControl = field(
        default_factory=lambda: SeriesControl(rel_tolerance=1e-8, max_terms=500))
    n_series_ctl: SeriesControl = field(default_factory=SeriesControl)

    def __post_init__(self):
        if not 0.0 < self.alpha_factor < 4.0:
            raise ValueError("alpha_factor must be in (0, 4)")


@dataclass(frozen=True)
class InterferenceCounts:
    """Time-domain interference statistics for one traffic configuration."""
    i_total: int
    _hdr_slope: float
    _pl_slope: float

    def i_hdr(self, i_prime: int) -> float:
        if i_prime < 1:
            raise ValueError("i_prime must be >= 1 (0 is the no-interference branch)")
        return self._hdr_slope * i_prime

    def i_pl(self, i_prime: int) -> float:
        if i_prime < 1:
            raise ValueError("i_prime must be >= 1 (0 is the no-interference branch)")
        return self._pl_slope * i_prime


# ---------------------------------------------------------------------------
# Per-fragment probabilities
# ---------------------------------------------------------------------------

def noise_power_dbm(nf_db: float, obw_hz: float) -> float:
    """Thermal noise power over the occupied bandwidth, in dBm."""
    return -174.0 + nf_db + 10.0 * math.log10(obw_hz)


def p_disc(p: ShadowedRiceParams, lb: LinkBudget, g0: float,
           ctl: SeriesControl = DEFAULT_CONTROL, obw_hz: float = 488.0) -> float:
    """Probability that a fragment's SNR falls below the receiver threshold,
    conditioned on the path gain g0."""
    if not 0.0 < g0 <= 1.0:
        raise ValueError("g0 must be a linear gain in (0, 1]")
    sc = series_constants(p)
    sigma2_mw = 10.0 ** (noise_power_dbm(lb.noise_figure_db, obw_hz) / 10.0)
    y = sc.b_const * lb.snr_threshold_linear * sigma2_mw / (lb.eirp_mw * g0)

    # term_n = A * (m)_n/n! * C(1)^n * B^-(n+1) * n! * P(n+1, y)
    #        = A/B * (m)_n/n! * (C(1)/B)^n * P(n+1, y)
    prefactor = sc.a_const / sc.b_const
    base = 1.0
    acc = _KahanSum()
    n_limit = ctl.fixed_terms if ctl.fixed_terms is not None else ctl.max_terms
    for n in range(n_limit):
        term = prefactor * base * regularized_lower_gamma(n + 1.0, y)
        acc.add(term)
        if ctl.fixed_terms is None and n > 0 and abs(term) <= ctl.rel_tolerance * abs(acc.total):
            break
        base *= (p.m + n) / (n + 1.0) * sc.convergence_ratio
    return min(max(acc.total, 0.0), 1.0)


class _CaptureSeries:
    """Incremental generator of the constant D and the power-series
    coefficients c_i for the CDF of the k-interferer aggregate power."""

    def __init__(self, k: int, interferer_gains, p: ShadowedRiceParams,
                 cfg: CaptureSeriesConfig):
        gains = list(interferer_gains)
        if len(gains) != k or k < 1:
            raise ValueError("interferer_gains must have length k >= 1")
        b = [p.b0 * g for g in gains]
        scale = [2.0 * bi + (p.omega * g / p.m if p.m > 0 else 0.0)
                 for bi, g in zip(b, gains)]
        self.alpha = cfg.alpha_factor * min(b)

        log_d = k * math.log(self.alpha)
        for bi, si in zip(b, scale):
            log_d += (p.m - 1.0) * math.log(2.0 * bi) - p.m * math.log(si)
        self.d_const = math.exp(log_d)

        self._m = p.m
        self._zeta = [1.0 - self.alpha / (2.0 * bi) for bi in b]
        self._delt = [1.0 - self.alpha / si for si in scale]
        self._zeta_pow = list(self._zeta)
        self._delt_pow = list(self._delt)
        self._p_sums: list[float] = []
        self.c = [1.0]

    def coefficient(self, i: int) -> float:
        """c_i, extending the log-derivative recurrence on demand."""
        while len(self.c) <= i:
            n = len(self.c)
            self._p_sums.append(sum(
                self._m * dp - (self._m - 1.0) * zp
                for zp, dp in zip(self._zeta_pow, self._delt_pow)))
            self._zeta_pow = [zp * z for zp, z in
                              zip(self._zeta_pow, self._zeta)]
            self._delt_pow = [dp * d for dp, d in
                              zip(self._delt_pow, self._delt)]
            ci = sum(self._p_sums[n - 1 - l] * self.c[l]
                     for l in range(n)) / n
            self.c.append(ci)
        return self.c[i]


def capture_coefficients(k: int, interferer_gains, p: ShadowedRiceParams,
                         cfg: CaptureSeriesConfig) -> tuple[float, list[float]]:
    """Constant D and power-series coefficients c_i for the CDF of the
    k-interferer aggregate power, truncated per the i-series control."""
    series = _CaptureSeries(k, interferer_gains, p, cfg)
    n_limit = (cfg.i_series_ctl.fixed_terms
               if cfg.i_series_ctl.fixed_terms is not None
               else cfg.i_series_ctl.max_terms)
    series.coefficient(n_limit - 1)
    return series.d_const, series.c[:n_limit]


def _capture_alpha(k: int, gains, p: ShadowedRiceParams,
                   cfg: CaptureSeriesConfig) -> float:
    return cfg.alpha_factor * min(p.b0 * g for g in gains)


def p_cap(k: int, g0: float, interferer_gains, p: ShadowedRiceParams,
          lb: LinkBudget, cfg: CaptureSeriesConfig | None = None) -> float:
    """Capture failure probability with k co-channel interferers,
    conditioned on all path gains."""
    if cfg is None:
        cfg = CaptureSeriesConfig()
    if k == 0:
        return 0.0
    gains = list(interferer_gains)
    if len(gains) != k:
        raise ValueError("interferer_gains must have length k")
    delta = lb.sir_threshold_linear
    if delta <= 0.0:
        return 0.0
    sc = series_constants(p)
    alpha = _capture_alpha(k, gains, p, cfg)
    ratio = g0 / (alpha * delta)
    b_prime = sc.b_const + ratio
    if abs(sc.c1 / b_prime) >= 1.0:
        raise ValueError("series argument C(1)/B' outside unit disk")

    series = _CaptureSeries(k, gains, p, cfg)
    d_const = series.d_const

    # integral (I) as a truncated n-series: sum_n (m)_n/n! (C1/B)^n / B
    nctl = cfg.n_series_ctl
    n_limit = nctl.fixed_terms if nctl.fixed_terms is not None else nctl.max_terms
    acc = _KahanSum()
    base = 1.0 / sc.b_const
    for n in range(n_limit):
        acc.add(base)
        if nctl.fixed_terms is None and n > 0 and abs(base) <= nctl.rel_tolerance * abs(acc.total):
            break
        base *= (p.m + n) * sc.convergence_ratio / (n + 1.0)
    integral_one = acc.total

    z = sc.c1 / b_prime
    # u-term of integral (II): Gamma(u+1)/u! cancels, leaving
    # ratio^u * B'^-(u+1) * 2F1(m, u+1; 1; z)
    i_ctl = cfg.i_series_ctl
    sum_c = _KahanSum()          # sum_i c_i
    sum_ct = _KahanSum()         # sum_i c_i * T_i
    t_partial = _KahanSum()      # T_i = sum_{u=0}^{k+i-1} u-term
    # ratio^u / B'^(u+1) = (ratio/B')^u / B' with ratio/B' < 1 by construction
    q = ratio / b_prime
    q_pow = 1.0 / b_prime
    for u in range(k):
        t_partial.add(q_pow * gauss_2f1(p.m, u + 1.0, 1.0, z))
        q_pow *= q
    i_limit = (i_ctl.fixed_terms if i_ctl.fixed_terms is not None
               else i_ctl.max_terms)
    for i in range(i_limit):
        ci = series.coefficient(i)
        if i > 0:
            u = k + i - 1
            t_partial.add(q_pow * gauss_2f1(p.m, u + 1.0, 1.0, z))
            q_pow *= q
        sum_c.add(ci)
        contribution = ci * t_partial.total
        sum_ct.add(contribution)
        if (i_ctl.fixed_terms is None and i > 2
                and abs(ci * (integral_one - t_partial.total))
                <= i_ctl.rel_tolerance * max(abs(sum_ct.total), 1e-300)):
            break

    value = (1.0
             - sc.a_const * d_const * sum_c.total * integral_one
             + sc.a_const * d_const * sum_ct.total)
    return min(max(value, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Interference counting and packet-level composition
# ---------------------------------------------------------------------------

def interference_counts(n_users: int, n_tx_per_slot: int, slot_s: float,
                        dr: DataRateProfile) -> InterferenceCounts:
    """Average time-domain interferer statistics for unslotted ALOHA traffic."""
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    toa = dr.toa_s()
    t_ave = slot_s / (n_tx_per_slot * n_users)
    i_total = max(math.ceil(2.0 * toa / t_ave) - 1, 0)
    hdr_slope = (2.0 * dr.t_hdr_s * dr.n_hdr
                 + (dr.t_hdr_s + dr.t_pl_s) * dr.n_pl) / (2.0 * toa)
    pl_slope = (2.0 * dr.t_pl_s * dr.n_pl
                + (dr.t_pl_s + dr.t_hdr_s) * dr.n_hdr) / (2.0 * toa)
    return InterferenceCounts(i_total=i_total, _hdr_slope=hdr_slope,
                              _pl_slope=pl_slope)


def _fragment_loss(k_ceil: int, s_carriers: int, p_disc_val: float,
                   capture_fn, k_cap: int | None = None) -> float:
    """Loss probability of one fragment facing k_ceil time-domain
    interferers that each pick this carrier with probability 1/S.

    When ``k_cap`` is given, capture failure is taken as certain for more
    than k_cap co-carrier interferers, so only the first k_cap binomial
    terms plus the upper tail are evaluated.
    """
    loss = p_disc_val
    collision = 0.0
    log_p = -math.log(s_carriers)
    log_q = math.log((s_carriers - 1.0) / s_carriers)
    k_stop = k_ceil if k_cap is None else min(k_ceil, k_cap)
    cdf = math.exp(k_ceil * log_q)      # Pr{X = 0}, accumulated upward
    for k in range(1, k_stop + 1):
        weight = math.exp(math.lgamma(k_ceil + 1) - math.lgamma(k + 1)
                          - math.lgamma(k_ceil - k + 1)
                          + k * log_p + (k_ceil - k) * log_q)
        cdf += weight
        collision += weight * capture_fn(k)
    if k_cap is not None and k_ceil > k_cap:
        collision += max(1.0 - cdf, 0.0)
    return min(loss + (1.0 - p_disc_val) * collision, 1.0)


def p_hdr(i_prime: int, dr: DataRateProfile, p_disc_val: float,
          capture_fn, counts: InterferenceCounts,
          k_cap: int | None = None) -> float:
    """Probability that all header replicas are lost given i_prime
    same-group interfering devices."""
    k_ceil = math.ceil(counts.i_hdr(i_prime))
    per_replica = _fragment_loss(k_ceil, dr.carriers_per_group, p_disc_val,
                                 capture_fn, k_cap)
    return per_replica ** dr.n_hdr


def p_spf(i_prime: int, dr: DataRateProfile, p_disc_val: float,
          capture_fn, counts: InterferenceCounts,
          k_cap: int | None = None) -> float:
    """Loss probability of a single payload fragment."""
    k_ceil = math.ceil(counts.i_pl(i_prime))
    return _fragment_loss(k_ceil, dr.carriers_per_group, p_disc_val,
                          capture_fn, k_cap)


def _binomial_tail(n: int, p: float, k_min: int) -> float:
    """Pr{X >= k_min}, X ~ Binomial(n, p)."""
    if p <= 0.0:
        return 0.0 if k_min > 0 else 1.0
    if p >= 1.0:
        return 1.0
    total = 0.0
    for m in range(k_min, n + 1):
        total += math.comb(n, m) * p ** m * (1.0 - p) ** (n - m)
    return min(total, 1.0)


def p_pl(i_prime: int, dr: DataRateProfile, p_spf_val: float) -> float:
    """Probability that payload FEC fails: at least omega fragments lost."""
    return _binomial_tail(dr.n_pl, p_spf_val, dr.omega())


def p_ni(dr: DataRateProfile, p_disc_val: float, counts: InterferenceCounts) -> float:
    """Packet loss in the no-interference branch (noise only)."""
    prefactor = ((dr.groups - 1.0) / dr.groups) ** counts.i_total
    hdr_all_lost = p_disc_val ** dr.n_hdr
    payload_fail = _binomial_tail(dr.n_pl, p_disc_val, dr.omega())
    return prefactor * (hdr_all_lost + (1.0 - hdr_all_lost) * payload_fail)


def _group_count_window(i_total: int, groups: int) -> range:
    """I' values whose binomial weight is non-negligible (±8 sigma guard
    for very large populations; tail mass below 1e-12)."""
    if i_total <= 10_000:
        return range(1, i_total + 1)
    mean = i_total / groups
    sd = math.sqrt(i_total * (1.0 / groups) * (1.0 - 1.0 / groups))
    lo = max(1, math.floor(mean - 8.0 * sd))
    hi = min(i_total, math.ceil(mean + 8.0 * sd))
    return range(lo, hi + 1)


def outage_lrfhss_conditional(dr: DataRateProfile, p_disc_val: float,
                              capture_fn, counts: InterferenceCounts,
                              k_cap: int | None = None) -> float:
    """LR-FHSS outage conditioned on one realization of path gains."""
    i_total, groups = counts.i_total, dr.groups
    total = _KahanSum()
    if i_total > 0:
        log_p = -math.log(groups)
        log_q = math.log((groups - 1.0) / groups)
        for i_prime in _group_count_window(i_total, groups):
            weight = math.exp(math.lgamma(i_total + 1) - math.lgamma(i_prime + 1)
                              - math.lgamma(i_total - i_prime + 1)
                              + i_prime * log_p + (i_total - i_prime) * log_q)
            if weight < 1e-14:
                continue
            ph = p_hdr(i_prime, dr, p_disc_val, capture_fn, counts, k_cap)
            spf = p_spf(i_prime, dr, p_disc_val, capture_fn, counts, k_cap)
            ppl = p_pl(i_prime, dr, spf)
            total.add(weight * (ph + (1.0 - ph) * ppl))
    total.add(p_ni(dr, p_disc_val, counts))
    return min(max(total.total, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Location averaging
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticScenario:
    """Inputs for location-averaged analytic outage evaluation."""
    geometry: geometry.SatelliteGeometry = field(default_factory=geometry.SatelliteGeometry)
    fading: ShadowedRiceParams = field(
        default_factory=lambda: ShadowedRiceParams(0.126, 10.1, 0.835))
    link: LinkBudget = field(default_factory=LinkBudget)
    slot_s: float = 291.1
    n_tx_per_slot: int = 1
    capture: CaptureSeriesConfig = field(default_factory=CaptureSeriesConfig)
    disc_ctl: SeriesControl = field(default_factory=SeriesControl)
    # capture probabilities for k beyond this are taken as 1 (they exceed
    # 0.999 well before; the weighted truncation error is < 1e-4)
    max_capture_k: int = 12


@dataclass(frozen=True)
class AnalyticResult:
    outage_estimate: float
    std_error: float
    trials: int


def _sample_visible_gain(rng: np.random.Generator, sc: AnalyticScenario) -> float:
    """Path gain of a device uniform over the instantaneous footprint disk."""
    r = sc.geometry.footprint_radius_km * math.sqrt(rng.uniform())
    elev = geometry.elevation_from_ground_distance(r, sc.geometry)
    return geometry.path_gain_linear(elev, sc.link.frequency_mhz, sc.geometry)


def _capture_table(rng: np.random.Generator, sc: AnalyticScenario,
                   g0: float) -> list[float]:
    """P_cap(k) for k = 0..max_capture_k at freshly drawn interferer gains."""
    gains = [_sample_visible_gain(rng, sc) for _ in range(sc.max_capture_k)]
    table = [0.0]
    for k in range(1, sc.max_capture_k + 1):
        table.append(p_cap(k, g0, gains[:k], sc.fading, sc.link, sc.capture))
    return table


def outage_lrfhss(sc: AnalyticScenario, dr: DataRateProfile, n_users: int,
                  realizations: int, rng: np.random.Generator) -> AnalyticResult:
    """Analytic LR-FHSS outage averaged over device-location realizations."""
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    counts = interference_counts(n_users, sc.n_tx_per_slot, sc.slot_s, dr)
    values = np.empty(realizations)
    for t in range(realizations):
        g0 = _sample_visible_gain(rng, sc)
        pd = p_disc(sc.fading, sc.link, g0, sc.disc_ctl, dr.obw_hz)
        table = _capture_table(rng, sc, g0)

        def capture_fn(k: int, _table=table) -> float:
            return _table[k] if k < len(_table) else 1.0

        values[t] = outage_lrfhss_conditional(dr, pd, capture_fn, counts,
                                              k_cap=sc.max_capture_k)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(realizations)) if realizations > 1 else 0.0
    return AnalyticResult(outage_estimate=mean, std_error=se, trials=realizations)


def outage_at_distance(sc: AnalyticScenario, dr: DataRateProfile, n_users: int,
                       distance_km: float, realizations: int,
                       rng: np.random.Generator) -> AnalyticResult:
    """LR-FHSS outage for a tagged device at a fixed slant distance,
    averaged over interferer locations only."""
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    elev = geometry.elevation_from_slant_distance(distance_km, sc.geometry)
    g0 = geometry.path_gain_linear(elev, sc.link.frequency_mhz, sc.geometry)
    counts = interference_counts(n_users, sc.n_tx_per_slot, sc.slot_s, dr)
    pd = p_disc(sc.fading, sc.link, g0, sc.disc_ctl, dr.obw_hz)
    values = np.empty(realizations)
    for t in range(realizations):
        table = _capture_table(rng, sc, g0)

        def capture_fn(k: int, _table=table) -> float:
            return _table[k] if k < len(_table) else 1.0

        values[t] = outage_lrfhss_conditional(dr, pd, capture_fn, counts,
                                              k_cap=sc.max_capture_k)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(realizations)) if realizations > 1 else 0.0
    return AnalyticResult(outage_estimate=mean, std_error=se, trials=realizations)


# ---------------------------------------------------------------------------
# D2D-aided outage
# ---------------------------------------------------------------------------

def p_neighbor(density_per_km2: float, d_max_km: float) -> float:
    """Probability of at least one other device within D2D range."""
    if density_per_km2 < 0.0 or d_max_km < 0.0:
        raise ValueError("density and range must be nonnegative")
    return 1.0 - math.exp(-density_per_km2 * math.pi * d_max_km ** 2)


def p_d2d(p_lora_success: float, p_ne: float) -> float:
    """Probability of a successful D2D exchange: a neighbor exists and the
    short-range link succeeds."""
    return p_lora_success * p_ne


def outage_d2d(o_l: float, p_d2d_val: float) -> float:
    """D2D-aided outage under the equal-per-packet-outage approximation:
    with cooperation, the tagged packet plus at least two of the other
    three cluster packets must be lost; without it, both retransmission
    copies must be lost."""
    if not 0.0 <= o_l <= 1.0 or not 0.0 <= p_d2d_val <= 1.0:
        raise ValueError("arguments must be probabilities")
    coop = o_l * (3.0 * o_l ** 2 - 2.0 * o_l ** 3)
    return p_d2d_val * coop + (1.0 - p_d2d_val) * o_l ** 2


def outage_d2d_literal(o_l: float, p_d2d_val: float) -> float:
    """Comparison-only evaluation of the unreduced cooperative expression
    (which omits one loss permutation and does not reduce to the
    approximation above under equal outage)."""
    term = (o_l * (1.0 - o_l) * (1.0 - o_l)
            + o_l * o_l * (1.0 - o_l)
            + o_l * o_l * o_l)
    return p_d2d_val * o_l * term + (1.0 - p_d2d_val) * o_l ** 2
