"""Urban scene model: extruded building footprints, base stations, band.

A scene is 2.5-D. Every building is a vertical prism over a simple polygon,
from the ground up to its roof height. Geometry queries (line of sight,
wall counting, containment) run through the compiled kernels in
:mod:`rissim._geometry`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _geometry

UE_HEIGHT_M = 1.5
FLOOR_HEIGHT_M = 3.0
UE_GRID_STEP_M = 10.0
# RISs sit this far off the wall so their own building never shadows them.
MOUNT_OFFSET_M = 0.01

UE_PLACEMENTS = ("outdoor_only", "indoor_and_outdoor")
MOUNT_KINDS = ("wall", "roof", "corner")


class SceneError(ValueError):
    """Raised when a scene file cannot be read or parsed."""


class SceneValidationError(SceneError):
    """A scene object violates one of its invariants."""

    def __init__(self, invariant: str, obj: str):
        super().__init__(f"{obj}: violates '{invariant}'")
        self.invariant = invariant
        self.obj = obj


class Point3(NamedTuple):
    """Position in a local East-North-Up frame, meters."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class BandConfig:
    """Radio parameters for one carrier.

    Gains and powers are in dB units as named; frequencies in Hz. The NLOS
    excess and the default wall loss feed the direct-link model and may be
    overridden per building through ``BuildingPrism.wall_loss_db``.

    ``ris_wall_penetration`` lets the RIS-to-UE hop reach UEs behind walls,
    paying the same per-wall loss as the direct path (no NLOS excess, since
    the reflected beam is steered). Off, that hop must be unobstructed.
    """

    carrier_hz: float
    bandwidth_hz: float
    bs_tx_power_dbm: float
    bs_array_gain_dbi: float
    ue_array_gain_dbi: float
    ue_noise_figure_db: float
    ue_placement: str
    ris_widths_m: tuple[float, ...]
    ris_reflection_loss_db: float = 0.0
    snr_threshold_db: float = 10.0
    coverage_target_fraction: float = 0.95
    nlos_excess_db: float = 15.0
    default_wall_loss_db: float = 20.0
    ris_wall_penetration: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ris_widths_m", tuple(float(w) for w in self.ris_widths_m))
        if not self.carrier_hz > 0:
            raise SceneValidationError("carrier_hz > 0", "band")
        if not self.bandwidth_hz > 0:
            raise SceneValidationError("bandwidth > 0", "band")
        if not 0 < self.coverage_target_fraction <= 1:
            raise SceneValidationError("coverage_target_fraction in (0,1]", "band")
        if not self.ris_widths_m or any(not w > 0 for w in self.ris_widths_m):
            raise SceneValidationError("ris_widths_m all > 0", "band")
        if self.ue_placement not in UE_PLACEMENTS:
            raise SceneValidationError(f"ue_placement in {UE_PLACEMENTS}", "band")
        for name in ("bs_tx_power_dbm", "bs_array_gain_dbi", "ue_array_gain_dbi",
                     "ue_noise_figure_db", "ris_reflection_loss_db", "snr_threshold_db",
                     "nlos_excess_db", "default_wall_loss_db"):
            if not math.isfinite(getattr(self, name)):
                raise SceneValidationError(f"{name} finite", "band")
        if self.ris_reflection_loss_db < 0 or self.default_wall_loss_db < 0 or self.nlos_excess_db < 0:
            raise SceneValidationError("losses >= 0", "band")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["ris_widths_m"] = list(self.ris_widths_m)
        return d


SPEED_OF_LIGHT = 299_792_458.0

CBAND = BandConfig(
    carrier_hz=3.5e9, bandwidth_hz=200e6, bs_tx_power_dbm=50.0,
    bs_array_gain_dbi=23.0, ue_array_gain_dbi=3.0, ue_noise_figure_db=7.0,
    ue_placement="indoor_and_outdoor", ris_widths_m=(2.7, 3.8, 5.3),
    default_wall_loss_db=20.0,
)
MMWAVE = BandConfig(
    carrier_hz=28e9, bandwidth_hz=400e6, bs_tx_power_dbm=32.0,
    bs_array_gain_dbi=30.0, ue_array_gain_dbi=10.0, ue_noise_figure_db=10.0,
    ue_placement="outdoor_only", ris_widths_m=(0.33, 0.48, 0.67),
    default_wall_loss_db=40.0,
)


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return int(v > 0) - int(v < 0)

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


def _is_simple(poly: np.ndarray) -> bool:
    n = len(poly)
    for i in range(n):
        a1, a2 = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if _segments_cross(a1, a2, poly[j], poly[(j + 1) % n]):
                return False
    return True


@dataclass(frozen=True)
class BuildingPrism:
    """Vertical prism over a counter-clockwise simple footprint."""

    footprint: tuple[tuple[float, float], ...]
    height: float
    wall_loss_db: float

    def __post_init__(self):
        fp = tuple((float(x), float(y)) for x, y in self.footprint)
        object.__setattr__(self, "footprint", fp)
        if len(fp) < 3:
            raise SceneValidationError("footprint has >= 3 vertices", "building")
        arr = np.asarray(fp)
        if not np.all(np.isfinite(arr)):
            raise SceneValidationError("coordinates finite", "building")
        if not (math.isfinite(self.height) and self.height > 0):
            raise SceneValidationError("height > 0", f"building(height={self.height})")
        if not (math.isfinite(self.wall_loss_db) and self.wall_loss_db >= 0):
            raise SceneValidationError("wall_loss_db >= 0", "building")
        if _signed_area(arr) <= 0:
            raise SceneValidationError("footprint counter-clockwise", "building")
        if not _is_simple(arr):
            raise SceneValidationError("footprint non-self-intersecting", "building")

    @property
    def n_floors(self) -> int:
        return max(1, int(self.height // FLOOR_HEIGHT_M))


@dataclass(frozen=True)
class BaseStation:
    id: str
    position: Point3


@dataclass(frozen=True)
class SceneMap:
    """Immutable urban scene.

    The packed geometry arrays are built once at construction and shared
    read-only by every query.
    """

    extent: tuple[float, float]
    buildings: tuple[BuildingPrism, ...]
    bs_sites: tuple[BaseStation, ...]
    band: BandConfig
    _packed: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w, d = (float(v) for v in self.extent)
        object.__setattr__(self, "extent", (w, d))
        object.__setattr__(self, "buildings", tuple(self.buildings))
        object.__setattr__(self, "bs_sites", tuple(self.bs_sites))
        if not (w > 0 and d > 0 and math.isfinite(w) and math.isfinite(d)):
            raise SceneValidationError("extent positive and finite", "scene")
        if not self.bs_sites:
            raise SceneValidationError("at least one BS", "scene")
        for i, b in enumerate(self.buildings):
            arr = np.asarray(b.footprint)
            if arr[:, 0].min() < 0 or arr[:, 1].min() < 0 or arr[:, 0].max() > w or arr[:, 1].max() > d:
                raise SceneValidationError("building inside extent", f"buildings[{i}]")
        ids = set()
        for s in self.bs_sites:
            p = s.position
            if not all(math.isfinite(v) for v in p) or p.z < 0:
                raise SceneValidationError("BS position finite with z >= 0", f"bs[{s.id}]")
            if not (0 <= p.x <= w and 0 <= p.y <= d):
                raise SceneValidationError("BS inside extent", f"bs[{s.id}]")
            if s.id in ids:
                raise SceneValidationError("BS ids unique", f"bs[{s.id}]")
            ids.add(s.id)
        object.__setattr__(self, "_packed", _pack(self.buildings))

    @property
    def bs_positions(self) -> np.ndarray:
        return np.array([s.position for s in self.bs_sites], dtype=float).reshape(-1, 3)

    def bs_index(self, bs_id: str) -> int:
        for i, s in enumerate(self.bs_sites):
            if s.id == bs_id:
                return i
        raise KeyError(bs_id)

    def to_dict(self) -> dict:
        return {
            "extent": list(self.extent),
            "buildings": [
                {"footprint": [list(v) for v in b.footprint], "height": b.height,
                 "wall_loss_db": b.wall_loss_db}
                for b in self.buildings
            ],
            "bs": [{"x": s.position.x, "y": s.position.y, "z": s.position.z, "id": s.id}
                   for s in self.bs_sites],
            "band": self.band.to_dict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def with_band(self, band: BandConfig) -> "SceneMap":
        return SceneMap(self.extent, self.buildings, self.bs_sites, band)


def _pack(buildings: Sequence[BuildingPrism]):
    if not buildings:
        verts = np.zeros((0, 2))
    else:
        verts = np.concatenate([np.asarray(b.footprint, dtype=float) for b in buildings])
    starts = np.zeros(len(buildings) + 1, dtype=np.int64)
    starts[1:] = np.cumsum([len(b.footprint) for b in buildings])
    heights = np.array([b.height for b in buildings], dtype=float)
    losses = np.array([b.wall_loss_db for b in buildings], dtype=float)
    bbox = np.zeros((len(buildings), 4))
    for i, b in enumerate(buildings):
        a = np.asarray(b.footprint)
        bbox[i] = (a[:, 0].min(), a[:, 1].min(), a[:, 0].max(), a[:, 1].max())
    return verts, starts, heights, losses, bbox


# --------------------------------------------------------------------------
# scene file I/O

_TOP_KEYS = {"extent", "buildings", "bs", "band"}
_BUILDING_KEYS = {"footprint", "height", "wall_loss_db"}
_BS_KEYS = {"x", "y", "z", "id"}


def _reject_unknown(d: dict, allowed: set, where: str):
    if not isinstance(d, dict):
        raise SceneError(f"{where}: expected an object")
    extra = set(d) - allowed
    if extra:
        raise SceneError(f"{where}: unknown keys {sorted(extra)}")


def band_from_dict(d: dict) -> BandConfig:
    allowed = set(BandConfig.__dataclass_fields__)
    _reject_unknown(d, allowed, "band")
    try:
        return BandConfig(**d)
    except TypeError as exc:
        raise SceneError(f"band: {exc}") from None


def scene_from_dict(data: dict) -> SceneMap:
    _reject_unknown(data, _TOP_KEYS, "scene")
    missing = {"extent", "bs", "band"} - set(data)
    if missing:
        raise SceneError(f"scene: missing keys {sorted(missing)}")
    band = band_from_dict(data["band"])
    buildings = []
    for i, b in enumerate(data.get("buildings", [])):
        _reject_unknown(b, _BUILDING_KEYS, f"buildings[{i}]")
        try:
            buildings.append(BuildingPrism(
                footprint=tuple(tuple(v) for v in b["footprint"]),
                height=float(b["height"]),
                wall_loss_db=float(b.get("wall_loss_db", band.default_wall_loss_db)),
            ))
        except KeyError as exc:
            raise SceneError(f"buildings[{i}]: missing key {exc}") from None
        except SceneValidationError as exc:
            raise SceneValidationError(exc.invariant, f"buildings[{i}]") from None
        except (TypeError, ValueError) as exc:
            raise SceneError(f"buildings[{i}]: {exc}") from None
    sites = []
    for i, s in enumerate(data["bs"]):
        _reject_unknown(s, _BS_KEYS, f"bs[{i}]")
        try:
            sites.append(BaseStation(str(s["id"]), Point3(float(s["x"]), float(s["y"]), float(s["z"]))))
        except KeyError as exc:
            raise SceneError(f"bs[{i}]: missing key {exc}") from None
    extent = data["extent"]
    if not (isinstance(extent, (list, tuple)) and len(extent) == 2):
        raise SceneError("extent: expected [width_m, depth_m]")
    return SceneMap(tuple(extent), tuple(buildings), tuple(sites), band)


def load_scene(path) -> SceneMap:
    """Read and validate a JSON scene file.

    Raises
    ------
    SceneError
        The file is not valid JSON or does not follow the schema.
    SceneValidationError
        An object violates an invariant; the message names both.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: malformed JSON ({exc})") from None
    return scene_from_dict(data)


def save_scene(scene: SceneMap, path) -> None:
    Path(path).write_text(scene.dumps(), encoding="utf-8")


# --------------------------------------------------------------------------
# synthetic city

def generate_manhattan(extent_m, block_m: float, street_m: float, building_height_m: float,
                       seed: int = 0, *, height_spread: float = 0.5, band: BandConfig | None = None,
                       bs_sites: Iterable[BaseStation] | None = None,
                       wall_loss_db: float | None = None) -> SceneMap:
    """Rectangular grid of square blocks separated by streets.

    Each period of ``block_m + street_m`` holds one building centered in it,
    so streets of width ``street_m`` run between neighbours and half a street
    borders the extent. Heights are drawn uniformly from
    ``building_height_m * [1 - height_spread, 1 + height_spread]`` with a
    generator seeded by ``seed``.

    With no ``bs_sites`` a single 30 m mast sits at the street intersection
    nearest the scene center.
    """
    if np.isscalar(extent_m):
        extent_m = (extent_m, extent_m)
    w, d = (float(v) for v in extent_m)
    if not (block_m > 0 and street_m > 0):
        raise ValueError("block_m and street_m must be > 0")
    period = block_m + street_m
    nx, ny = int(w // period), int(d // period)
    if nx < 1 or ny < 1:
        raise ValueError(f"extent {w}x{d} m is smaller than one block+street period ({period} m)")
    band = band or CBAND
    loss = band.default_wall_loss_db if wall_loss_db is None else wall_loss_db
    rng = np.random.default_rng(seed)
    buildings = []
    for j in range(ny):
        for i in range(nx):
            x0 = i * period + street_m / 2
            y0 = j * period + street_m / 2
            x1, y1 = x0 + block_m, y0 + block_m
            h = building_height_m * rng.uniform(1 - height_spread, 1 + height_spread)
            h = max(round(float(h), 1), 0.1)
            buildings.append(BuildingPrism(((x0, y0), (x1, y0), (x1, y1), (x0, y1)), h, loss))
    if bs_sites is None:
        cx = round((w / 2) / period) * period
        cy = round((d / 2) / period) * period
        bs_sites = [BaseStation("bs0", Point3(float(min(cx, w)), float(min(cy, d)), 30.0))]
    return SceneMap((w, d), tuple(buildings), tuple(bs_sites), band)


# --------------------------------------------------------------------------
# UE grid

@dataclass(frozen=True)
class UESample:
    position: Point3
    indoor: bool
    floor_index: int = 0


def ue_grid(scene: SceneMap, step_m: float = UE_GRID_STEP_M, ue_height_m: float = UE_HEIGHT_M,
            floor_height_m: float = FLOOR_HEIGHT_M) -> list[UESample]:
    """One UE per ``step_m``² cell, at cell centers.

    Outdoor UEs stand ``ue_height_m`` above ground wherever the cell center
    is not inside (or on the edge of) a footprint. Indoor UEs, when the band
    places them, fill the cells strictly inside each building on every floor.
    """
    w, d = scene.extent
    xs = np.arange(step_m / 2, w, step_m)
    ys = np.arange(step_m / 2, d, step_m)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    verts, starts, heights, _, bbox = scene._packed
    if len(scene.buildings):
        owner_closed = _geometry.points_inside(pts, verts, starts, bbox, False)
        owner_open = _geometry.points_inside(pts, verts, starts, bbox, True)
    else:
        owner_closed = owner_open = np.full(len(pts), -1)
    out = [UESample(Point3(float(x), float(y), ue_height_m), False, 0)
           for (x, y), o in zip(pts, owner_closed) if o < 0]
    if scene.band.ue_placement == "indoor_and_outdoor":
        for (x, y), o in zip(pts, owner_open):
            if o < 0:
                continue
            b = scene.buildings[o]
            for f in range(b.n_floors):
                z = f * floor_height_m + ue_height_m
                if z < b.height:
                    out.append(UESample(Point3(float(x), float(y), z), True, f))
    if not out:
        raise ValueError("UE grid is empty: the scene is fully covered by buildings")
    return out


def positions(samples: Sequence[UESample]) -> np.ndarray:
    return np.array([s.position for s in samples], dtype=float).reshape(-1, 3)


# --------------------------------------------------------------------------
# line of sight

class LOSResult(NamedTuple):
    clear: bool
    exterior_walls_crossed: int


def los_trace(scene: SceneMap, a, b) -> LOSResult:
    """Trace the open segment between two points.

    Touching a wall or roof plane without entering a prism leaves the path
    clear. ``exterior_walls_crossed`` counts every passage through a prism
    boundary (walls and roof alike), so a segment that cuts straight through
    one building crosses 2 and one ending indoors crosses 1.
    """
    a = np.asarray(a, dtype=float).reshape(1, 3)
    b = np.asarray(b, dtype=float).reshape(1, 3)
    if np.array_equal(a, b):
        raise ValueError("segment endpoints coincide")
    blocked, walls, _ = trace(scene, a, b)
    return LOSResult(not bool(blocked[0]), int(walls[0]))


def trace(scene: SceneMap, a: np.ndarray, b: np.ndarray):
    """Vectorized trace of ``a[i] -> b[i]``: (blocked, crossings, wall loss dB)."""
    a = np.ascontiguousarray(a, dtype=float).reshape(-1, 3)
    b = np.ascontiguousarray(b, dtype=float).reshape(-1, 3)
    a, b = np.broadcast_arrays(a, b)
    verts, starts, heights, losses, bbox = scene._packed
    if not len(heights):
        n = len(a)
        return np.zeros(n, bool), np.zeros(n, np.int64), np.zeros(n)
    return _geometry.trace_segments(np.ascontiguousarray(a), np.ascontiguousarray(b),
                                    verts, starts, heights, losses, bbox)


def loss_matrix(scene: SceneMap, p: np.ndarray, q: np.ndarray):
    """(blocked, wall loss dB) matrices for every p[i] -> q[j] segment."""
    p = np.ascontiguousarray(p, dtype=float).reshape(-1, 3)
    q = np.ascontiguousarray(q, dtype=float).reshape(-1, 3)
    verts, starts, heights, losses, bbox = scene._packed
    if not len(heights):
        return np.zeros((len(p), len(q)), dtype=bool), np.zeros((len(p), len(q)))
    return _geometry.loss_matrix(p, q, verts, starts, heights, losses, bbox)


def clear_matrix(scene: SceneMap, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Boolean (len(p), len(q)) matrix of unobstructed segments."""
    p = np.ascontiguousarray(p, dtype=float).reshape(-1, 3)
    q = np.ascontiguousarray(q, dtype=float).reshape(-1, 3)
    verts, starts, heights, losses, bbox = scene._packed
    if not len(heights):
        return np.ones((len(p), len(q)), dtype=bool)
    return _geometry.clear_matrix(p, q, verts, starts, heights, losses, bbox)


# --------------------------------------------------------------------------
# candidate RIS sites

@dataclass(frozen=True)
class CandidateSite:
    position: Point3
    normal: tuple[float, float, float]
    mount: str
    feeding_bs: str
    bs_distance_m: float
    building: int = -1


def _edge_samples(length: float, spacing: float) -> np.ndarray:
    n = max(1, int(math.floor(length / spacing + 1e-9)))
    return (np.arange(n) + 0.5) * (length / n)


def _raw_sites(scene: SceneMap, spacing_m: float, wall_heights_m: Sequence[float],
               height_fraction: float | None):
    """Every mount point before the line-of-sight filter."""
    rows = []
    for bi, b in enumerate(scene.buildings):
        fp = np.asarray(b.footprint, dtype=float)
        n = len(fp)
        heights = sorted({h for h in wall_heights_m if 0 < h < b.height}
                         | ({round(height_fraction * b.height, 6)} if height_fraction else set()))
        outward = []
        for k in range(n):
            e = fp[(k + 1) % n] - fp[k]
            nrm = np.array([e[1], -e[0]]) / np.hypot(*e)  # CCW footprint: right side is outside
            outward.append(nrm)
        for k in range(n):
            p0, p1 = fp[k], fp[(k + 1) % n]
            e = p1 - p0
            length = float(np.hypot(*e))
            nrm = outward[k]
            for s in _edge_samples(length, spacing_m):
                xy = p0 + e * (s / length) + nrm * MOUNT_OFFSET_M
                for h in heights:
                    rows.append((xy[0], xy[1], h, nrm[0], nrm[1], 0.0, "wall", bi))
                tilt = np.array([nrm[0], nrm[1], 1.0]) / math.sqrt(2.0)
                rows.append((xy[0], xy[1], b.height + MOUNT_OFFSET_M, *tilt, "roof", bi))
        for k in range(n):
            bis = outward[k - 1] + outward[k]
            norm = np.hypot(*bis)
            if norm < 1e-9:
                continue
            bis = bis / norm
            xy = fp[k] + bis * MOUNT_OFFSET_M
            for h in heights:
                rows.append((xy[0], xy[1], h, bis[0], bis[1], 0.0, "corner", bi))
    return rows


def ris_candidates(scene: SceneMap, spacing_m: float = 10.0,
                   wall_heights_m: Sequence[float] = (3.0, 6.0),
                   height_fraction: float | None = 0.8) -> list[CandidateSite]:
    """Finite grid of RIS mount points in line of sight of a base station.

    Walls and roof edges are sampled every ``spacing_m``; wall and corner
    sites are repeated at each of ``wall_heights_m`` below the roof and at
    ``height_fraction`` of the building height. Each surviving site is fed by
    the nearest base station that sees it from the front.
    """
    if not spacing_m > 0:
        raise ValueError("spacing_m must be > 0")
    rows = _raw_sites(scene, spacing_m, wall_heights_m, height_fraction)
    if not rows:
        return []
    pos = np.array([r[:3] for r in rows], dtype=float)
    nrm = np.array([r[3:6] for r in rows], dtype=float)
    bs = scene.bs_positions
    vis = clear_matrix(scene, pos, bs)
    dist = np.linalg.norm(pos[:, None, :] - bs[None, :, :], axis=2)
    facing = np.einsum("ijk,ik->ij", bs[None, :, :] - pos[:, None, :], nrm) > 0
    ok = vis & facing
    out = []
    for i, r in enumerate(rows):
        if not ok[i].any():
            continue
        j = int(np.argmin(np.where(ok[i], dist[i], np.inf)))
        out.append(CandidateSite(
            position=Point3(float(pos[i, 0]), float(pos[i, 1]), float(pos[i, 2])),
            normal=tuple(float(v) for v in nrm[i]),
            mount=r[6], feeding_bs=scene.bs_sites[j].id, bs_distance_m=float(dist[i, j]),
            building=r[7],
        ))
    return out


def candidate_arrays(scene: SceneMap, candidates: Sequence[CandidateSite]):
    """(positions, normals, feeding BS positions) as float arrays."""
    pos = np.array([c.position for c in candidates], dtype=float).reshape(-1, 3)
    nrm = np.array([c.normal for c in candidates], dtype=float).reshape(-1, 3)
    idx = {s.id: i for i, s in enumerate(scene.bs_sites)}
    bs = scene.bs_positions[[idx[c.feeding_bs] for c in candidates]].reshape(-1, 3)
    return pos, nrm, bs
