"""Coverage, percentile SNR, ergodic rate and Fresnel-ratio statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .propagation import RISUnit, fresnel_ratio, ris_power_mw
from .scene import SceneMap, candidate_arrays

FRESNEL_BINS = np.linspace(0.0, 4.0, 41)


@dataclass(frozen=True)
class SNRDistribution:
    """Sorted SNR samples in dB."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if s.size == 0:
            raise ValueError("empty SNR distribution")
        object.__setattr__(self, "samples", s)

    @property
    def count(self) -> int:
        return int(self.samples.size)

    def curve(self):
        """(snr_db, cdf, ccdf) at each distinct sample.

        ``cdf`` is P(SNR <= x) and ``ccdf`` is P(SNR >= x), so the two
        overlap by the mass sitting exactly at x.
        """
        x = np.unique(self.samples)
        le = np.searchsorted(self.samples, x, side="right") / self.count
        ge = 1.0 - np.searchsorted(self.samples, x, side="left") / self.count
        return x, le, ge


def _dist(d) -> SNRDistribution:
    return d if isinstance(d, SNRDistribution) else SNRDistribution(d)


def percentile_snr(dist, p: float) -> float:
    """Linearly interpolated empirical quantile, closest-rank endpoints."""
    dist = _dist(dist)
    if not 0 < p < 100:
        raise ValueError("percentile must lie in (0, 100)")
    s = dist.samples
    if np.isneginf(s).any():
        # np.percentile turns -inf - -inf into nan; interpolate by hand
        pos = (s.size - 1) * p / 100.0
        lo = int(math.floor(pos))
        hi = min(lo + 1, s.size - 1)
        if s[lo] == s[hi]:
            return float(s[lo])
        return float(s[lo] + (pos - lo) * (s[hi] - s[lo]))
    return float(np.percentile(s, p, method="linear"))


def ccdf_at(dist, threshold_db: float) -> float:
    """Fraction of samples at or above the threshold."""
    s = _dist(dist).samples
    return float(np.count_nonzero(s >= threshold_db)) / s.size


def cdf_strict(dist, threshold_db: float) -> float:
    s = _dist(dist).samples
    return float(np.count_nonzero(s < threshold_db)) / s.size


def shannon_rate(snr_db):
    """log2(1 + SNR) in bps/Hz; an SNR of -inf gives 0."""
    snr = np.asarray(snr_db, dtype=float)
    with np.errstate(over="ignore"):
        out = np.log1p(np.power(10.0, snr / 10.0)) / np.log(2.0)
    return float(out) if out.ndim == 0 else out


def snr_for_rate(rate_bps_hz: float) -> float:
    """Inverse of :func:`shannon_rate`."""
    if rate_bps_hz <= 0:
        return -math.inf
    return 10.0 * math.log10(2.0 ** rate_bps_hz - 1.0)


@dataclass(frozen=True)
class RateSummary:
    cell_edge: float
    median: float
    mean: float
    cell_edge_snr_db: float
    median_snr_db: float

    @classmethod
    def from_map(cls, snr_db) -> "RateSummary":
        d = _dist(snr_db)
        edge = percentile_snr(d, 5)
        med = percentile_snr(d, 50)
        return cls(shannon_rate(edge), shannon_rate(med), float(np.mean(shannon_rate(d.samples))),
                   edge, med)


def _factor(after: float, before: float) -> float:
    if before > 0:
        return after / before
    return 1.0 if after == before else math.inf


@dataclass(frozen=True)
class RateReport:
    """Rates before and after a deployment with their ratios.

    Cell-edge and median rates are evaluated at the 5th and 50th percentile
    SNR; the cell average is the mean of per-UE rates. Factors are after /
    before (infinite when the before-rate is zero).
    """

    before: RateSummary
    after: RateSummary

    @property
    def cell_edge_factor(self) -> float:
        return _factor(self.after.cell_edge, self.before.cell_edge)

    @property
    def median_factor(self) -> float:
        return _factor(self.after.median, self.before.median)

    @property
    def mean_factor(self) -> float:
        return _factor(self.after.mean, self.before.mean)

    @staticmethod
    def percent(factor: float) -> float:
        return (factor - 1.0) * 100.0

    def to_dict(self) -> dict:
        def side(s: RateSummary):
            return {"cell_edge_bps_hz": s.cell_edge, "median_bps_hz": s.median,
                    "cell_average_bps_hz": s.mean, "cell_edge_snr_db": s.cell_edge_snr_db,
                    "median_snr_db": s.median_snr_db}

        return {
            "before": side(self.before),
            "after": side(self.after),
            "improvement_pct": {
                "cell_edge": self.percent(self.cell_edge_factor),
                "median": self.percent(self.median_factor),
                "cell_average": self.percent(self.mean_factor),
            },
        }


def rate_report(before_map, after_map) -> RateReport:
    b = np.asarray(before_map, dtype=float).ravel()
    a = np.asarray(after_map, dtype=float).ravel()
    if b.shape != a.shape:
        raise ValueError(f"SNR maps cover different UE sets ({b.size} vs {a.size} UEs)")
    return RateReport(RateSummary.from_map(b), RateSummary.from_map(a))


@dataclass(frozen=True)
class FresnelHistogram:
    edges: np.ndarray
    counts: np.ndarray
    overflow: int
    ratios: np.ndarray

    @property
    def near_field_fraction(self) -> float:
        if not self.ratios.size:
            return 0.0
        return float(np.count_nonzero(self.ratios < 1.0)) / self.ratios.size


def fresnel_distribution(scene: SceneMap, deployment: Sequence[RISUnit], ue_samples,
                         bins: np.ndarray = FRESNEL_BINS) -> FresnelHistogram:
    """Fresnel ratio of every (RIS, UE) pair the RIS actually serves."""
    if not len(deployment):
        raise ValueError("deployment is empty")
    from .deployment import _as_positions

    ue = _as_positions(ue_samples)
    ratios = []
    for r in deployment:
        served = ris_power_mw(scene, [r.site], r.width_m, ue, reflection_loss_db=r.reflection_loss_db)[0] > 0
        if not served.any():
            continue
        pos, _, bs = candidate_arrays(scene, [r.site])
        d1 = max(float(np.linalg.norm(bs[0] - pos[0])), 1.0)
        d2 = np.maximum(np.linalg.norm(ue[served] - pos[0], axis=1), 1.0)
        ratios.append(fresnel_ratio(np.full(d2.shape, d1), d2, scene.band.carrier_hz, r.width_m))
    ratios = np.concatenate(ratios) if ratios else np.zeros(0)
    counts, _ = np.histogram(ratios[ratios < bins[-1]], bins=bins)
    return FresnelHistogram(np.asarray(bins), counts, int(np.count_nonzero(ratios >= bins[-1])),
                            ratios)
