"""Greedy RIS placement.

Each iteration scores every remaining candidate site by the number of UEs it
would lift to the SNR threshold, places the best one, and adds its power
contribution to the running SNR map. The loop stops once the covered
fraction reaches the band's target.

The RIS contribution of every candidate to every UE it can reach is computed
once per width and kept in a sparse row-major cache, so an iteration only
touches the non-zero entries.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_array, check_is_fitted

from . import _geometry
from .propagation import (RISUnit, best_direct_mw, lin_to_db, ris_power_mw, scene_noise_dbm,
                          snr_map)
from .scene import CandidateSite, SceneMap, UESample, positions, ris_candidates

log = logging.getLogger(__name__)

STOP_REASONS = ("target_met", "candidates_exhausted", "no_improvement", "max_ris_reached")
_CHUNK_ROWS = 256


def coverage_fraction(snr_db, threshold_db: float) -> float:
    """Fraction of UEs with SNR at or above the threshold."""
    snr = np.asarray(snr_db, dtype=float).ravel()
    if snr.size == 0:
        raise ValueError("empty SNR map")
    return float(np.count_nonzero(snr >= threshold_db)) / snr.size


# --------------------------------------------------------------------------
# sparse gain cache

@dataclass
class GainCache:
    """Row-compressed RIS power (mW) of each candidate at each UE.

    Power scales with the squared aperture area, so a cache built for one
    width converts to any other with :meth:`scaled`.
    """

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    n_ue: int
    width_m: float = 1.0

    @property
    def n_candidates(self) -> int:
        return len(self.indptr) - 1

    def row(self, i: int):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def dense_row(self, i: int) -> np.ndarray:
        out = np.zeros(self.n_ue)
        idx, val = self.row(i)
        out[idx] = val
        return out

    def scaled(self, width_m: float) -> "GainCache":
        if width_m == self.width_m:
            return self
        f = (width_m / self.width_m) ** 4
        return GainCache(self.indptr, self.indices, self.data * f, self.n_ue, float(width_m))

    @classmethod
    def from_dense(cls, gain: np.ndarray, width_m: float = 1.0) -> "GainCache":
        gain = np.asarray(gain, dtype=float)
        rows, cols = np.nonzero(gain)
        indptr = np.zeros(gain.shape[0] + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        return cls(np.cumsum(indptr), cols.astype(np.int64), gain[rows, cols], gain.shape[1],
                   width_m)


def _outdoor_mask(scene: SceneMap, ue_pos: np.ndarray) -> np.ndarray:
    """UEs not enclosed by any prism; only these can see an exterior RIS."""
    verts, starts, heights, _, bbox = scene._packed
    if not len(heights):
        return np.ones(len(ue_pos), dtype=bool)
    owner = _geometry.points_inside(np.ascontiguousarray(ue_pos[:, :2]), verts, starts, bbox, True)
    inside = owner >= 0
    inside[inside] = ue_pos[inside, 2] < heights[owner[inside]]
    return ~inside


def build_gain_cache(scene: SceneMap, candidates: Sequence[CandidateSite], width_m: float,
                     ue_pos: np.ndarray, workers: int = 1) -> GainCache:
    """Cache for ``width_m``, always derived from the unit-width cache.

    Every width goes through the same ``(w / 1 m)^4`` rescaling, so a sweep
    sharing one cache and a single-width run give bit-identical gains.
    """
    ue_pos = np.asarray(ue_pos, dtype=float).reshape(-1, 3)
    if scene.band.ris_wall_penetration:
        cols = np.arange(len(ue_pos))
    else:
        cols = np.flatnonzero(_outdoor_mask(scene, ue_pos))
    sub = ue_pos[cols]

    def block(lo):
        g = ris_power_mw(scene, candidates[lo:lo + _CHUNK_ROWS], 1.0, sub)
        r, c = np.nonzero(g)
        return r + lo, cols[c], g[r, c]

    starts = list(range(0, len(candidates), _CHUNK_ROWS))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(block, starts))
    else:
        parts = [block(lo) for lo in starts]
    if parts:
        rows = np.concatenate([p[0] for p in parts])
        idx = np.concatenate([p[1] for p in parts]).astype(np.int64)
        val = np.concatenate([p[2] for p in parts])
    else:
        rows = idx = np.zeros(0, dtype=np.int64)
        val = np.zeros(0)
    indptr = np.zeros(len(candidates) + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return GainCache(np.cumsum(indptr), idx, val, len(ue_pos), 1.0).scaled(float(width_m))


# --------------------------------------------------------------------------
# state

@dataclass
class TraceEntry:
    iteration: int
    coverage: float
    candidate: int
    score: int
    margin_db: float


@dataclass
class PlacementState:
    """Mutable greedy state over a fixed UE set and candidate list.

    ``power_mw`` is the total received power per UE; ``snr_db`` derives from
    it. ``remaining`` is a boolean mask over candidate indices.
    """

    candidates: list
    width_m: float
    power_mw: np.ndarray
    noise_dbm: float
    threshold_db: float
    remaining: np.ndarray
    gain: Optional[GainCache] = None
    placed_idx: list = field(default_factory=list)
    placed: list = field(default_factory=list)
    coverage_trace: list = field(default_factory=list)
    scene: Optional[SceneMap] = None
    ue_pos: Optional[np.ndarray] = None

    @property
    def snr_db(self) -> np.ndarray:
        return lin_to_db(self.power_mw) - self.noise_dbm

    @property
    def covered(self) -> np.ndarray:
        return self.snr_db >= self.threshold_db

    def coverage(self) -> float:
        return coverage_fraction(self.snr_db, self.threshold_db)


@dataclass
class DeploymentResult:
    state: PlacementState
    stop_reason: str
    baseline_snr_db: np.ndarray
    coverage_target: float

    @property
    def ris_count(self) -> int:
        return len(self.state.placed)

    @property
    def placed(self) -> list:
        return self.state.placed

    @property
    def coverage_trace(self) -> list:
        return self.state.coverage_trace

    @property
    def snr_db(self) -> np.ndarray:
        return self.state.snr_db

    @property
    def baseline_coverage(self) -> float:
        return coverage_fraction(self.baseline_snr_db, self.state.threshold_db)

    @property
    def final_coverage(self) -> float:
        return self.state.coverage()

    def coverage_after(self, k: int) -> float:
        """Covered fraction after the first ``k`` placements (clamped to the run)."""
        if k <= 0 or not self.coverage_trace:
            return self.baseline_coverage
        return self.coverage_trace[min(k, len(self.coverage_trace)) - 1].coverage

    def ris_per_bs(self) -> dict:
        out = {}
        for r in self.placed:
            out[r.site.feeding_bs] = out.get(r.site.feeding_bs, 0) + 1
        return out


# --------------------------------------------------------------------------
# scoring

def _score_rows(state, covered, lo, hi):
    """Newly covered UE count for candidate rows [lo, hi)."""
    g = state.gain
    a, b = g.indptr[lo], g.indptr[hi]
    idx = g.indices[a:b]
    new = lin_to_db(state.power_mw[idx] + g.data[a:b]) - state.noise_dbm
    hit = (new >= state.threshold_db) & ~covered[idx]
    rows = np.repeat(np.arange(lo, hi), np.diff(g.indptr[lo:hi + 1]))
    return np.bincount(rows[hit] - lo, minlength=hi - lo)


def score_all(state: PlacementState, workers: int = 1) -> np.ndarray:
    """Newly covered counts for every candidate; -1 for placed ones.

    Rows are split into contiguous blocks, one per worker; counts are
    integers so the result does not depend on the split.
    """
    n = state.gain.n_candidates
    covered = state.covered
    bounds = np.linspace(0, n, max(1, workers) + 1).astype(int)
    spans = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda s: _score_rows(state, covered, *s), spans))
    else:
        parts = [_score_rows(state, covered, lo, hi) for lo, hi in spans]
    counts = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    return np.where(state.remaining, counts, -1)


def _margin(state: PlacementState, i: int) -> float:
    """Summed SNR improvement (dB) over all UEs if candidate ``i`` is added."""
    idx, val = state.gain.row(i)
    before = lin_to_db(state.power_mw[idx])
    after = lin_to_db(state.power_mw[idx] + val)
    return float(np.sum(after - before))


def score_candidate(state: PlacementState, site, width_m: float | None = None):
    """Score one site without mutating ``state``.

    ``site`` is a candidate index or a :class:`CandidateSite` from the
    state's list. Returns ``(newly_covered_count, tie_break_key)`` where the
    key orders better candidates higher: larger summed SNR margin first, then
    lower candidate index.
    """
    if isinstance(site, CandidateSite):
        i = state.candidates.index(site)
    else:
        i = int(site)
    if not state.remaining[i]:
        raise ValueError(f"candidate {i} is already placed")
    if width_m is None or width_m == state.width_m:
        idx, val = state.gain.row(i)
    else:
        row = ris_power_mw(state.scene, [state.candidates[i]], width_m, state.ue_pos)[0]
        idx = np.flatnonzero(row)
        val = row[idx]
    before = state.snr_db[idx]
    after = lin_to_db(state.power_mw[idx] + val) - state.noise_dbm
    count = int(np.count_nonzero((after >= state.threshold_db) & (before < state.threshold_db)))
    return count, (float(np.sum(after - before)), -i)


def _pick(state: PlacementState, workers: int):
    counts = score_all(state, workers)
    best = int(counts.max())
    tied = np.flatnonzero(counts == best)
    if len(tied) == 1:
        i = int(tied[0])
        return i, best, _margin(state, i)
    margins = [_margin(state, int(i)) for i in tied]
    # max margin, then lowest index
    j = max(range(len(tied)), key=lambda k: (margins[k], -tied[k]))
    return int(tied[j]), best, margins[j]


def _place(state: PlacementState, i: int, score: int, margin: float):
    idx, val = state.gain.row(i)
    state.power_mw[idx] += val
    state.remaining[i] = False
    state.placed_idx.append(i)
    site = state.candidates[i]
    refl = state.scene.band.ris_reflection_loss_db if state.scene is not None else 0.0
    state.placed.append(RISUnit(site, state.width_m, refl, id=f"ris{len(state.placed) + 1}"))
    state.coverage_trace.append(
        TraceEntry(len(state.placed), state.coverage(), i, score, margin))


def greedy_loop(state: PlacementState, coverage_target: float, max_ris: int | None = None,
                workers: int = 1) -> str:
    """Run greedy iterations on ``state`` in place; returns the stop reason."""
    while True:
        if state.coverage() >= coverage_target:
            return "target_met"
        if max_ris is not None and len(state.placed) >= max_ris:
            return "max_ris_reached"
        if not state.remaining.any():
            return "candidates_exhausted"
        i, score, margin = _pick(state, workers)
        if score <= 0:
            return "no_improvement"
        _place(state, i, score, margin)
        log.debug("placed candidate %d: +%d UEs, coverage %.4f", i, score,
                  state.coverage_trace[-1].coverage)


def run_greedy(scene: SceneMap, ue_samples, candidates: Sequence[CandidateSite], width_m: float,
               max_ris: int | None = None, threshold_db: float | None = None,
               coverage_target: float | None = None, workers: int = 1,
               gain: GainCache | None = None) -> DeploymentResult:
    """Place RISs of one width until the coverage target is met.

    ``ue_samples`` may be a list of :class:`UESample` or an (n, 3) array.
    Beyond the target criterion the loop also stops when ``max_ris`` surfaces
    are placed, when no candidate covers an additional UE, or when the
    candidates run out.
    """
    ue_pos = _as_positions(ue_samples)
    band = scene.band
    threshold_db = band.snr_threshold_db if threshold_db is None else threshold_db
    coverage_target = band.coverage_target_fraction if coverage_target is None else coverage_target
    candidates = list(candidates)
    base, _ = best_direct_mw(scene, ue_pos)
    if gain is None:
        gain = build_gain_cache(scene, candidates, width_m, ue_pos, workers)
    else:
        gain = gain.scaled(width_m)
    state = PlacementState(
        candidates=candidates, width_m=float(width_m), power_mw=base.copy(),
        noise_dbm=scene_noise_dbm(scene), threshold_db=threshold_db,
        remaining=np.ones(len(candidates), dtype=bool), gain=gain, scene=scene, ue_pos=ue_pos,
    )
    baseline = state.snr_db.copy()
    reason = greedy_loop(state, coverage_target, max_ris, workers)
    return DeploymentResult(state, reason, baseline, coverage_target)


def check_coherence(scene: SceneMap, result: DeploymentResult) -> float:
    """Largest |incremental - recomputed| SNR gap in dB over all UEs."""
    fresh = snr_map(scene, result.state.ue_pos, result.placed)
    inc = result.snr_db
    both_inf = np.isneginf(fresh) & np.isneginf(inc)
    diff = np.abs(np.where(both_inf, 0.0, fresh - inc))
    return float(diff.max()) if diff.size else 0.0


def _as_positions(ue_samples) -> np.ndarray:
    if len(ue_samples) and isinstance(ue_samples[0], UESample):
        return positions(ue_samples)
    return np.asarray(ue_samples, dtype=float).reshape(-1, 3)


# --------------------------------------------------------------------------
# estimator

class RISDeployment(BaseEstimator):
    """Greedy RIS placement as a scikit-learn style estimator.

    ``fit`` takes UE positions (n, 3) and places square surfaces of
    ``width_m`` on the candidate grid of ``scene``; ``predict`` returns the
    SNR (dB) the fitted deployment delivers at arbitrary positions and
    ``score`` the covered fraction at the threshold.

    Parameters
    ----------
    scene : SceneMap
    width_m : float, optional
        Surface side. Defaults to the first width listed by the band.
    spacing_m, wall_heights_m, height_fraction :
        Candidate grid controls, see :func:`rissim.scene.ris_candidates`.
    max_ris : int, optional
        Hard cap on placements.
    threshold_db, coverage_target : float, optional
        Override the band's cell-edge SNR target and covered fraction.
    n_jobs : int
        Threads used to build the gain cache and score candidates. Results
        do not depend on it.

    Attributes
    ----------
    candidates_ : list of CandidateSite
    placed_ : list of RISUnit
    coverage_trace_ : list of TraceEntry
    stop_reason_ : str
    baseline_snr_ : ndarray
    snr_ : ndarray
        SNR map over the training UEs after placement.
    result_ : DeploymentResult
    """

    def __init__(self, scene=None, width_m=None, spacing_m=10.0, wall_heights_m=(3.0, 6.0),
                 height_fraction=0.8, max_ris=None, threshold_db=None, coverage_target=None,
                 n_jobs=1):
        self.scene = scene
        self.width_m = width_m
        self.spacing_m = spacing_m
        self.wall_heights_m = wall_heights_m
        self.height_fraction = height_fraction
        self.max_ris = max_ris
        self.threshold_db = threshold_db
        self.coverage_target = coverage_target
        self.n_jobs = n_jobs

    def _validate_params(self):
        if not isinstance(self.scene, SceneMap):
            raise TypeError("scene must be a SceneMap")
        width = self.scene.band.ris_widths_m[0] if self.width_m is None else float(self.width_m)
        if not width > 0:
            raise ValueError("width_m must be > 0")
        if self.max_ris is not None and self.max_ris < 0:
            raise ValueError("max_ris must be >= 0")
        if self.n_jobs is None or self.n_jobs < 1:
            raise ValueError("n_jobs must be >= 1")
        return width

    @staticmethod
    def _check_X(X):
        X = check_array(X, dtype=float)
        if X.shape[1] != 3:
            raise ValueError(f"expected UE positions of shape (n, 3), got {X.shape}")
        return X

    def fit(self, X, y=None, candidates=None, gain=None):
        """Run greedy placement over the UE positions ``X``.

        ``candidates`` overrides the generated site grid; ``gain`` passes a
        :class:`GainCache` already built for those sites and positions.
        """
        width = self._validate_params()
        X = self._check_X(X)
        if candidates is None:
            candidates = ris_candidates(self.scene, self.spacing_m, self.wall_heights_m,
                                        self.height_fraction)
        self.candidates_ = list(candidates)
        self.result_ = run_greedy(self.scene, X, self.candidates_, width, max_ris=self.max_ris,
                                  threshold_db=self.threshold_db,
                                  coverage_target=self.coverage_target, workers=self.n_jobs,
                                  gain=gain)
        self.width_ = width
        self.placed_ = self.result_.placed
        self.coverage_trace_ = self.result_.coverage_trace
        self.stop_reason_ = self.result_.stop_reason
        self.baseline_snr_ = self.result_.baseline_snr_db
        self.snr_ = self.result_.snr_db
        self.threshold_db_ = self.result_.state.threshold_db
        return self

    def predict(self, X):
        """SNR in dB at each position under the fitted deployment."""
        check_is_fitted(self, "placed_")
        return snr_map(self.scene, self._check_X(X), self.placed_)

    def score(self, X, y=None):
        """Covered fraction of ``X`` at the fitted threshold."""
        return coverage_fraction(self.predict(X), self.threshold_db_)


def sweep_sizes(scene: SceneMap, ue_samples=None, widths: Sequence[float] | None = None,
                candidates=None, estimator: RISDeployment | None = None, **params):
    """Independent greedy runs, one per surface width.

    Returns a list of ``(width_m, DeploymentResult)`` rows in input order.
    Extra keyword arguments set estimator parameters.
    """
    widths = list(scene.band.ris_widths_m if widths is None else widths)
    if not widths:
        raise ValueError("no RIS widths to sweep")
    ues = ue_samples if ue_samples is not None else _ue_default(scene)
    X = _as_positions(ues)
    base = estimator if estimator is not None else RISDeployment(scene=scene)
    base = clone(base).set_params(scene=scene, **params)
    if candidates is None:
        candidates = ris_candidates(scene, base.spacing_m, base.wall_heights_m, base.height_fraction)
    gain = build_gain_cache(scene, candidates, 1.0, X, base.n_jobs)
    rows = []
    for w in widths:
        est = clone(base).set_params(width_m=w).fit(X, candidates=candidates, gain=gain)
        rows.append((float(w), est.result_))
    return rows


def _ue_default(scene):
    from .scene import ue_grid
    return ue_grid(scene)


def required_ris(result: DeploymentResult) -> Optional[int]:
    """RIS count at which the target was met, or None if it never was."""
    return result.ris_count if result.stop_reason == "target_met" else None


def brute_force_best(base_mw: np.ndarray, gain: np.ndarray, noise_dbm: float,
                     threshold_db: float, k: int):
    """Exhaustive best covered count over all subsets of exactly ``k`` rows."""
    from itertools import combinations

    best, arg = -1, None
    for combo in combinations(range(gain.shape[0]), k):
        p = base_mw + gain[list(combo)].sum(axis=0) if combo else base_mw
        c = int(np.count_nonzero(lin_to_db(p) - noise_dbm >= threshold_db))
        if c > best:
            best, arg = c, combo
    return best, arg


__all__ = [
    "coverage_fraction", "GainCache", "build_gain_cache", "PlacementState", "DeploymentResult",
    "TraceEntry", "score_all", "score_candidate", "greedy_loop", "run_greedy",
    "check_coherence", "RISDeployment", "sweep_sizes", "required_ris", "brute_force_best",
    "STOP_REASONS",
]
