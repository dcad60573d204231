"""Link budgets: direct paths, cascaded RIS paths, noise floor, Fresnel ratio.

Powers are tracked in dBm at the API surface and summed in milliwatts when
paths combine. An RIS is an ideally steered anomalous reflector observed in
its far field, so its two-hop gain follows the flat-plate radar equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .scene import (SPEED_OF_LIGHT, CandidateSite, SceneMap, UESample, candidate_arrays,
                    clear_matrix, loss_matrix, trace)

THERMAL_DENSITY_DBM_HZ = -174.0
MIN_DISTANCE_M = 1.0
UNREACHABLE = -math.inf

PATH_KINDS = ("direct_los", "direct_nlos", "ris_cascaded")


def db_to_lin(x):
    return np.power(10.0, np.asarray(x, dtype=float) / 10.0)


def lin_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))


def noise_floor_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise over ``bandwidth_hz`` plus the receiver noise figure."""
    if not bandwidth_hz > 0:
        raise ValueError("bandwidth must be > 0")
    return THERMAL_DENSITY_DBM_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def fspl_db(distance_m, carrier_hz: float):
    """Free-space path loss 20 log10(4 pi d f / c)."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be > 0")
    out = 20.0 * np.log10(4.0 * math.pi * d * carrier_hz / SPEED_OF_LIGHT)
    return float(out) if out.ndim == 0 else out


def ris_path_gain_db(d1_m, d2_m, area_m2, incidence_cos, carrier_hz: float,
                     reflection_loss_db: float = 0.0):
    """Two-hop gain of a perfectly steered flat reflector, antennas excluded.

    ``20 log10(A cos(theta) / (4 pi d1 d2)) - reflection_loss_db``. This is the
    bistatic radar equation with the plate cross-section
    ``4 pi (A cos theta)^2 / lambda^2``; the wavelength cancels, so
    ``carrier_hz`` is only checked for sanity.
    """
    if not carrier_hz > 0:
        raise ValueError("carrier must be > 0")
    d1 = np.asarray(d1_m, dtype=float)
    d2 = np.asarray(d2_m, dtype=float)
    c = np.asarray(incidence_cos, dtype=float)
    if np.any(d1 <= 0) or np.any(d2 <= 0):
        raise ValueError("hop distances must be > 0")
    if np.any(c <= 0):
        raise ValueError("incidence_cos must be > 0: the BS is behind the surface")
    if np.any(c > 1 + 1e-12):
        raise ValueError("incidence_cos must be <= 1")
    out = 20.0 * np.log10(area_m2 * c / (4.0 * math.pi * d1 * d2)) - reflection_loss_db
    return float(out) if out.ndim == 0 else out


def fresnel_ratio(d1_m, d2_m, carrier_hz: float, width_m: float):
    """First-Fresnel-zone diameter at the surface divided by its width.

    Above 1 the surface is small enough for far-field anomalous reflection
    to be close to optimal.
    """
    d1 = np.asarray(d1_m, dtype=float)
    d2 = np.asarray(d2_m, dtype=float)
    if np.any(d1 <= 0) or np.any(d2 <= 0) or not carrier_hz > 0 or not width_m > 0:
        raise ValueError("fresnel_ratio needs positive distances, carrier and width")
    lam = SPEED_OF_LIGHT / carrier_hz
    out = 2.0 * np.sqrt(lam * d1 * d2 / (d1 + d2)) / width_m
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RISUnit:
    """A square surface of side ``width_m`` mounted at a candidate site."""

    site: CandidateSite
    width_m: float
    reflection_loss_db: float = 0.0
    id: Optional[str] = None

    def __post_init__(self):
        if not self.width_m > 0:
            raise ValueError("RIS width must be > 0")

    @property
    def area_m2(self) -> float:
        return self.width_m * self.width_m


@dataclass(frozen=True)
class LinkBudget:
    rx_power_dbm: float
    path_kind: str
    walls_crossed: int = 0
    via_ris: Optional[str] = None


@dataclass(frozen=True)
class SNRRecord:
    ue: int
    snr_db: float
    paths: tuple[LinkBudget, ...] = field(default_factory=tuple)


def _eirp_gain_db(scene: SceneMap) -> float:
    b = scene.band
    return b.bs_tx_power_dbm + b.bs_array_gain_dbi + b.ue_array_gain_dbi


def scene_noise_dbm(scene: SceneMap) -> float:
    return noise_floor_dbm(scene.band.bandwidth_hz, scene.band.ue_noise_figure_db)


def direct_link_dbm(scene: SceneMap, bs, ue) -> LinkBudget:
    """Received power on the direct path from one base station.

    ``bs`` may be a :class:`~rissim.scene.BaseStation`, an index or an id.
    """
    if isinstance(bs, (int, np.integer)):
        bs = scene.bs_sites[int(bs)]
    elif isinstance(bs, str):
        bs = scene.bs_sites[scene.bs_index(bs)]
    ue_pos = ue.position if isinstance(ue, UESample) else ue
    p, kind, walls = direct_power_dbm(scene, np.asarray(ue_pos, dtype=float).reshape(1, 3),
                                      np.asarray(bs.position, dtype=float).reshape(1, 3))
    return LinkBudget(float(p[0]), PATH_KINDS[int(kind[0])], int(walls[0]))


def direct_power_dbm(scene: SceneMap, ue_pos: np.ndarray, bs_pos: np.ndarray):
    """Direct-path power for each UE row against each BS row (broadcast).

    Returns (power dBm, kind index, walls crossed). NLOS paths lose the fixed
    excess plus the summed wall losses of every building crossed.
    """
    ue_pos = np.asarray(ue_pos, dtype=float).reshape(-1, 3)
    bs_pos = np.asarray(bs_pos, dtype=float).reshape(-1, 3)
    a, b = np.broadcast_arrays(bs_pos, ue_pos)
    blocked, walls, wall_loss = trace(scene, a, b)
    d = np.maximum(np.linalg.norm(b - a, axis=1), MIN_DISTANCE_M)
    p = _eirp_gain_db(scene) - fspl_db(d, scene.band.carrier_hz)
    p = np.where(blocked, p - wall_loss - scene.band.nlos_excess_db, p)
    kind = np.where(blocked, 1, 0)
    walls = np.where(blocked, walls, 0)
    return np.atleast_1d(p), kind, walls


def best_direct_mw(scene: SceneMap, ue_pos: np.ndarray):
    """Strongest single-BS direct power per UE, in mW, and the BS index."""
    ue_pos = np.asarray(ue_pos, dtype=float).reshape(-1, 3)
    best = np.full(len(ue_pos), -np.inf)
    arg = np.zeros(len(ue_pos), dtype=int)
    for j, s in enumerate(scene.bs_sites):
        p, _, _ = direct_power_dbm(scene, ue_pos, np.asarray(s.position).reshape(1, 3))
        better = p > best
        best = np.where(better, p, best)
        arg = np.where(better, j, arg)
    return db_to_lin(best), arg


def ris_geometry(pos, nrm, bs, ue):
    """Hop distances and cosines for surfaces (rows) against UEs (columns).

    Returns (d1 (k,), d2 (k, n), incidence cos (k,), front mask (k, n)).
    """
    inc = bs - pos
    d1_raw = np.linalg.norm(inc, axis=1)
    cos_in = np.einsum("ij,ij->i", inc, nrm) / np.where(d1_raw > 0, d1_raw, 1.0)
    out = ue[None, :, :] - pos[:, None, :]
    d2_raw = np.linalg.norm(out, axis=2)
    front = np.einsum("ijk,ik->ij", out, nrm) > 0
    return (np.maximum(d1_raw, MIN_DISTANCE_M), np.maximum(d2_raw, MIN_DISTANCE_M),
            np.clip(cos_in, -1.0, 1.0), front)


def ris_power_mw(scene: SceneMap, sites: Sequence[CandidateSite], width_m: float,
                 ue_pos: np.ndarray, reflection_loss_db: float | None = None,
                 visible: np.ndarray | None = None) -> np.ndarray:
    """Received power (mW) through each site (rows) at each UE (columns).

    Zero where the RIS-to-UE hop is blocked, the UE is behind the surface or
    the feeding BS illuminates it from behind. With the band's
    ``ris_wall_penetration`` set, a blocked hop is kept and pays its wall
    loss instead. ``visible`` may carry a precomputed clear-segment matrix
    for the same rows and columns (ignored when walls can be penetrated).
    """
    ue_pos = np.asarray(ue_pos, dtype=float).reshape(-1, 3)
    if not len(sites):
        return np.zeros((0, len(ue_pos)))
    loss = scene.band.ris_reflection_loss_db if reflection_loss_db is None else reflection_loss_db
    pos, nrm, bs = candidate_arrays(scene, sites)
    d1, d2, cos_in, front = ris_geometry(pos, nrm, bs, ue_pos)
    wall_loss = 0.0
    if scene.band.ris_wall_penetration:
        _, wall_loss = loss_matrix(scene, pos, ue_pos)
        visible = True
    elif visible is None:
        visible = clear_matrix(scene, pos, ue_pos)
    ok = visible & front & (cos_in[:, None] > 0)
    area = width_m * width_m
    safe_cos = np.where(cos_in > 0, cos_in, 1.0)
    gain_db = (20.0 * np.log10(area * safe_cos[:, None] / (4.0 * math.pi * d1[:, None] * d2))
               - loss - wall_loss)
    p = db_to_lin(_eirp_gain_db(scene) + gain_db)
    return np.where(ok, p, 0.0)


def ris_link_dbm(scene: SceneMap, ris: RISUnit, ue_pos) -> Optional[LinkBudget]:
    """Cascaded path through one RIS, or None when it cannot serve the UE."""
    p = ris_power_mw(scene, [ris.site], ris.width_m, np.asarray(ue_pos, dtype=float),
                     reflection_loss_db=ris.reflection_loss_db)[0, 0]
    if p <= 0:
        return None
    return LinkBudget(float(lin_to_db(p)), "ris_cascaded", 0, ris.id)


def ue_snr(scene: SceneMap, ue, deployment: Sequence[RISUnit] = (), ue_id: int = 0) -> SNRRecord:
    """SNR at one UE: strongest direct path plus every usable RIS path.

    Paths add in linear power (non-coherent combining).
    """
    ue_pos = np.asarray(ue.position if isinstance(ue, UESample) else ue, dtype=float)
    paths = []
    best = None
    for s in scene.bs_sites:
        lb = direct_link_dbm(scene, s, ue_pos)
        if best is None or lb.rx_power_dbm > best.rx_power_dbm:
            best = lb
    if best is not None and math.isfinite(best.rx_power_dbm):
        paths.append(best)
    for r in deployment:
        lb = ris_link_dbm(scene, r, ue_pos)
        if lb is not None:
            paths.append(lb)
    total = sum(10.0 ** (p.rx_power_dbm / 10.0) for p in paths)
    snr = UNREACHABLE if total <= 0 else 10.0 * math.log10(total) - scene_noise_dbm(scene)
    return SNRRecord(ue_id, snr, tuple(paths))


def snr_map(scene: SceneMap, ue_pos: np.ndarray, deployment: Sequence[RISUnit] = ()) -> np.ndarray:
    """Vectorized :func:`ue_snr` over many UE positions, recomputed from scratch."""
    ue_pos = np.asarray(ue_pos, dtype=float).reshape(-1, 3)
    total, _ = best_direct_mw(scene, ue_pos)
    for r in deployment:
        total = total + ris_power_mw(scene, [r.site], r.width_m, ue_pos,
                                     reflection_loss_db=r.reflection_loss_db)[0]
    return lin_to_db(total) - scene_noise_dbm(scene)
