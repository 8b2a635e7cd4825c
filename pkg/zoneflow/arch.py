"""Zoned architecture model: AOD/SLM arrays, zones, derived traps and Rydberg sites."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ArchitectureError

logger = logging.getLogger(__name__)

TOL = 1e-6
ZONE_KINDS = ("entanglement", "storage", "readout")

Point = Tuple[float, float]
TrapKey = Tuple[int, int, int]


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def coord_key(x: float, y: float) -> Tuple[float, float]:
    # Coordinates are µm-scale; four decimals is far coarser than TOL and far finer than any pitch.
    return (round(x + 0.0, 4), round(y + 0.0, 4))


@dataclass(frozen=True)
class AodSpec:
    aod_id: int
    max_num_col: int
    max_num_row: int
    min_sep: float


@dataclass(frozen=True)
class SlmSpec:
    slm_id: int
    num_col: int
    num_row: int
    sep: Tuple[float, float]
    offset: Tuple[float, float]

    def trap_position(self, row: int, col: int) -> Point:
        return (self.offset[0] + col * self.sep[0], self.offset[1] + row * self.sep[1])


@dataclass
class ZoneSpec:
    zone_id: int
    kind: str
    offset: Tuple[float, float]
    dimension: Tuple[float, float]
    slms: List[SlmSpec] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def slm_ids(self) -> List[int]:
        return [slm.slm_id for slm in self.slms]

    def bounds(self) -> Tuple[float, float, float, float]:
        x0, y0 = self.offset
        return (x0, y0, x0 + self.dimension[0], y0 + self.dimension[1])

    def contains(self, point: Point) -> bool:
        x0, y0, x1, y1 = self.bounds()
        return x0 - TOL <= point[0] <= x1 + TOL and y0 - TOL <= point[1] <= y1 + TOL


@dataclass(frozen=True, order=True)
class TrapRef:
    slm_id: int
    row: int
    col: int
    x: float = field(compare=False)
    y: float = field(compare=False)

    @property
    def key(self) -> TrapKey:
        return (self.slm_id, self.row, self.col)

    @property
    def position(self) -> Point:
        return (self.x, self.y)

    def __repr__(self) -> str:
        return f"TrapRef({self.slm_id},{self.row},{self.col}@{self.x:g},{self.y:g})"


@dataclass(frozen=True, order=True)
class RydbergSite:
    zone_id: int
    row: int
    col: int
    left: TrapRef = field(compare=False)
    right: TrapRef = field(compare=False)

    @property
    def key(self) -> Tuple[int, int, int]:
        return (self.zone_id, self.row, self.col)

    @property
    def position(self) -> Point:
        """Reference position: the left trap."""
        return self.left.position

    @property
    def traps(self) -> Tuple[TrapRef, TrapRef]:
        return (self.left, self.right)

    def __repr__(self) -> str:
        return f"Site(z{self.zone_id},{self.row},{self.col})"


def _rect_gap(a: ZoneSpec, b: ZoneSpec) -> Tuple[float, bool]:
    """Euclidean gap between two zone rectangles and whether they overlap with positive area."""
    ax0, ay0, ax1, ay1 = a.bounds()
    bx0, by0, bx1, by1 = b.bounds()
    dx = max(bx0 - ax1, ax0 - bx1)
    dy = max(by0 - ay1, ay0 - by1)
    overlap = dx < -TOL and dy < -TOL
    return math.hypot(max(dx, 0.0), max(dy, 0.0)), overlap


class Architecture:
    """Immutable zoned architecture with derived trap and site geometry."""

    def __init__(self, aods: Sequence[AodSpec], zones: Sequence[ZoneSpec], extra: Optional[Mapping[str, Any]] = None):
        self.aods: List[AodSpec] = list(aods)
        self.zones: List[ZoneSpec] = list(zones)
        self.extra: Dict[str, Any] = dict(extra or {})
        self.warnings: List[str] = []
        self._check_ids()

        self.slms: Dict[int, SlmSpec] = {}
        self._slm_zone: Dict[int, ZoneSpec] = {}
        for zone in self.zones:
            for slm in zone.slms:
                self.slms[slm.slm_id] = slm
                self._slm_zone[slm.slm_id] = zone

        self.traps: List[TrapRef] = []
        self._trap_index: Dict[TrapKey, TrapRef] = {}
        self._by_coord: Dict[Tuple[float, float], TrapRef] = {}
        for zone in self.zones:
            for slm in zone.slms:
                for row in range(slm.num_row):
                    for col in range(slm.num_col):
                        x, y = slm.trap_position(row, col)
                        trap = TrapRef(slm.slm_id, row, col, x, y)
                        if not zone.contains(trap.position):
                            raise ArchitectureError(
                                f"trap ({slm.slm_id},{row},{col}) at ({x:g},{y:g}) lies outside zone {zone.zone_id}",
                                context={"zone": zone.zone_id},
                            )
                        ck = coord_key(x, y)
                        if ck in self._by_coord:
                            raise ArchitectureError(f"two traps share position ({x:g},{y:g})")
                        self._by_coord[ck] = trap
                        self._trap_index[trap.key] = trap
                        self.traps.append(trap)

        self._check_zone_layout()

        self.storage_traps: List[TrapRef] = sorted(
            (t for t in self.traps if self.zone_of_trap(t).kind == "storage"),
            key=lambda t: (t.row, t.col, t.slm_id),
        )
        self.sites: List[RydbergSite] = []
        self._site_index: Dict[Tuple[int, int, int], RydbergSite] = {}
        self._site_of_trap: Dict[TrapKey, Tuple[RydbergSite, int]] = {}
        self._zone_shape: Dict[int, Tuple[int, int]] = {}
        self.site_pitch: Optional[float] = None
        self.site_clearance: Optional[float] = None
        for zone in self.entanglement_zones:
            self._pair_sites(zone)
        self.sites.sort(key=lambda s: (s.zone_id, s.row, s.col))

        self._storage_xy = np.array([t.position for t in self.storage_traps], dtype=float).reshape(-1, 2)
        self._site_xy = np.array([s.position for s in self.sites], dtype=float).reshape(-1, 2)
        self._nearest_site_cache: Dict[Tuple[Tuple[float, float], Optional[int]], RydbergSite] = {}
        self._nearest_storage_cache: Dict[Tuple[float, float], TrapRef] = {}
        self._check_separation()

    # -- validation -------------------------------------------------------

    def _check_ids(self) -> None:
        if not self.aods:
            raise ArchitectureError("architecture declares no AOD array")
        seen_aod = [a.aod_id for a in self.aods]
        if len(set(seen_aod)) != len(seen_aod):
            raise ArchitectureError("duplicate aod_id")
        seen_zone = [z.zone_id for z in self.zones]
        if len(set(seen_zone)) != len(seen_zone):
            raise ArchitectureError("duplicate zone_id")
        seen_slm = [s.slm_id for z in self.zones for s in z.slms]
        if len(set(seen_slm)) != len(seen_slm):
            raise ArchitectureError("duplicate slm_id")
        kinds = {z.kind for z in self.zones}
        if "storage" not in kinds or "entanglement" not in kinds:
            raise ArchitectureError("architecture needs at least one storage and one entanglement zone")

    def _check_zone_layout(self) -> None:
        for a, b in combinations(self.zones, 2):
            _, overlap = _rect_gap(a, b)
            if overlap:
                raise ArchitectureError(f"zones {a.zone_id} and {b.zone_id} overlap")

    def _pair_sites(self, zone: ZoneSpec) -> None:
        traps = sorted((t for t in self.traps if self._slm_zone[t.slm_id] is zone), key=lambda t: (t.y, t.x))
        rows: List[List[TrapRef]] = []
        for trap in traps:
            if rows and abs(rows[-1][0].y - trap.y) <= TOL:
                rows[-1].append(trap)
            else:
                rows.append([trap])
        max_cols = 0
        for r, row in enumerate(rows):
            if len(row) % 2:
                raise ArchitectureError(
                    f"unpaired trap in entanglement zone {zone.zone_id} at y={row[0].y:g}",
                    context={"zone": zone.zone_id},
                )
            for c in range(len(row) // 2):
                left, right = row[2 * c], row[2 * c + 1]
                site = RydbergSite(zone.zone_id, r, c, left, right)
                self.sites.append(site)
                self._site_index[site.key] = site
                self._site_of_trap[left.key] = (site, 0)
                self._site_of_trap[right.key] = (site, 1)
                pitch = right.x - left.x
                self.site_pitch = pitch if self.site_pitch is None else max(self.site_pitch, pitch)
                if c:
                    self._note_clearance(left.x - row[2 * c - 1].x)
            max_cols = max(max_cols, len(row) // 2)
            if r:
                self._note_clearance(row[0].y - rows[r - 1][0].y)
        self._zone_shape[zone.zone_id] = (len(rows), max_cols)

    def _note_clearance(self, gap: float) -> None:
        self.site_clearance = gap if self.site_clearance is None else min(self.site_clearance, gap)

    def _check_separation(self) -> None:
        if self.site_clearance is None:
            return
        for a, b in combinations(self.zones, 2):
            if a.kind == b.kind:
                continue
            gap, _ = _rect_gap(a, b)
            if gap + TOL < self.site_clearance:
                message = (
                    f"zones {a.zone_id} ({a.kind}) and {b.zone_id} ({b.kind}) are {gap:g} µm apart, "
                    f"closer than the site clearance {self.site_clearance:g} µm"
                )
                self.warnings.append(message)
                logger.warning("[WARN] %s", message)

    # -- lookups ----------------------------------------------------------

    @property
    def entanglement_zones(self) -> List[ZoneSpec]:
        return [z for z in self.zones if z.kind == "entanglement"]

    @property
    def storage_zones(self) -> List[ZoneSpec]:
        return [z for z in self.zones if z.kind == "storage"]

    def zone(self, zone_id: int) -> ZoneSpec:
        for zone in self.zones:
            if zone.zone_id == zone_id:
                return zone
        raise ArchitectureError(f"unknown zone_id {zone_id}")

    def aod(self, aod_id: int) -> AodSpec:
        for aod in self.aods:
            if aod.aod_id == aod_id:
                return aod
        raise ArchitectureError(f"unknown aod_id {aod_id}")

    def zone_of_trap(self, trap: TrapRef) -> ZoneSpec:
        return self._slm_zone[trap.slm_id]

    def is_storage(self, trap: TrapRef) -> bool:
        return self._slm_zone[trap.slm_id].kind == "storage"

    def has_trap(self, slm_id: int, row: int, col: int) -> bool:
        return (slm_id, row, col) in self._trap_index

    def trap(self, slm_id: int, row: int, col: int) -> TrapRef:
        try:
            return self._trap_index[(slm_id, row, col)]
        except KeyError:
            raise ArchitectureError(f"no trap ({slm_id},{row},{col})") from None

    def trap_at(self, x: float, y: float) -> Optional[TrapRef]:
        trap = self._by_coord.get(coord_key(x, y))
        if trap is not None and abs(trap.x - x) <= TOL and abs(trap.y - y) <= TOL:
            return trap
        return None

    def site_of(self, trap: TrapRef) -> Optional[Tuple[RydbergSite, int]]:
        """(site, side) for an entanglement trap, side 0 = left."""
        return self._site_of_trap.get(trap.key)

    def site(self, zone_id: int, row: int, col: int) -> Optional[RydbergSite]:
        return self._site_index.get((zone_id, row, col))

    def sites_in_zone(self, zone_id: int) -> List[RydbergSite]:
        return [s for s in self.sites if s.zone_id == zone_id]

    def zone_shape(self, zone_id: int) -> Tuple[int, int]:
        """(site rows, site columns) of an entanglement zone."""
        return self._zone_shape[zone_id]

    def storage_neighbors(self, trap: TrapRef, hops: int) -> List[TrapRef]:
        found = []
        for step in range(1, hops + 1):
            for dr, dc in ((step, 0), (-step, 0), (0, step), (0, -step)):
                key = (trap.slm_id, trap.row + dr, trap.col + dc)
                if key in self._trap_index:
                    found.append(self._trap_index[key])
        return found

    # -- nearest queries --------------------------------------------------

    def nearest_site(self, p: Sequence[float], zone_id: Optional[int] = None) -> RydbergSite:
        if not self.sites:
            raise ArchitectureError("architecture has no Rydberg site")
        cache_key = (coord_key(p[0], p[1]), zone_id)
        hit = self._nearest_site_cache.get(cache_key)
        if hit is not None:
            return hit
        candidates = self.sites if zone_id is None else self.sites_in_zone(zone_id)
        xy = self._site_xy if zone_id is None else np.array([s.position for s in candidates], dtype=float)
        best = _argmin_with_ties(xy, p, candidates, key=lambda s: (s.row, s.col, s.zone_id))
        self._nearest_site_cache[cache_key] = best
        return best

    def nearest_storage_trap(self, p: Sequence[float]) -> TrapRef:
        cache_key = coord_key(p[0], p[1])
        hit = self._nearest_storage_cache.get(cache_key)
        if hit is not None:
            return hit
        best = _argmin_with_ties(self._storage_xy, p, self.storage_traps, key=lambda t: (t.row, t.col, t.slm_id))
        self._nearest_storage_cache[cache_key] = best
        return best

    def storage_extent(self) -> Tuple[float, float, float, float]:
        xy = self._storage_xy
        return (float(xy[:, 0].min()), float(xy[:, 1].min()), float(xy[:, 0].max()), float(xy[:, 1].max()))

    def storage_in_box(self, x0: float, y0: float, x1: float, y1: float) -> List[TrapRef]:
        xy = self._storage_xy
        mask = (xy[:, 0] >= x0 - TOL) & (xy[:, 0] <= x1 + TOL) & (xy[:, 1] >= y0 - TOL) & (xy[:, 1] <= y1 + TOL)
        return [self.storage_traps[i] for i in np.flatnonzero(mask)]

    # -- derived architectures / serialisation -----------------------------

    def with_aods(self, count: int) -> "Architecture":
        """Copy of this architecture with `count` identical copies of its first AOD."""
        if count < 1:
            raise ArchitectureError("AOD count must be at least 1")
        base = self.aods[0]
        doc = self.to_dict()
        doc["aods"] = [
            {"aod_id": i, "max_num_col": base.max_num_col, "max_num_row": base.max_num_row, "min_sep": base.min_sep}
            for i in range(count)
        ]
        return parse_architecture(doc)

    def to_dict(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = dict(self.extra)
        doc["aods"] = [
            {"aod_id": a.aod_id, "max_num_col": a.max_num_col, "max_num_row": a.max_num_row, "min_sep": a.min_sep}
            for a in self.aods
        ]
        doc["zones"] = []
        for zone in self.zones:
            zdoc = dict(zone.extra)
            zdoc.update(
                {
                    "zone_id": zone.zone_id,
                    "kind": zone.kind,
                    "offset": list(zone.offset),
                    "dimension": list(zone.dimension),
                    "slms": [
                        {
                            "slm_id": s.slm_id,
                            "num_col": s.num_col,
                            "num_row": s.num_row,
                            "sep": list(s.sep),
                            "offset": list(s.offset),
                        }
                        for s in zone.slms
                    ],
                }
            )
            doc["zones"].append(zdoc)
        return doc

    def summary(self) -> Dict[str, Any]:
        return {
            "aods": len(self.aods),
            "storage_traps": len(self.storage_traps),
            "rydberg_sites": len(self.sites),
            "entanglement_zones": [
                {"zone_id": z.zone_id, "shape": list(self.zone_shape(z.zone_id))} for z in self.entanglement_zones
            ],
        }


def _argmin_with_ties(xy: np.ndarray, p: Sequence[float], items: Sequence[Any], key) -> Any:
    dists = np.hypot(xy[:, 0] - p[0], xy[:, 1] - p[1])
    best = float(dists.min())
    tied = np.flatnonzero(dists <= best + TOL)
    return min((items[i] for i in tied), key=key)


# -- parsing --------------------------------------------------------------


def _require(obj: Mapping[str, Any], name: str, where: str) -> Any:
    if name not in obj:
        raise ArchitectureError(f"missing field '{name}' in {where}")
    return obj[name]


def _pair(value: Any, name: str, where: str) -> Tuple[float, float]:
    try:
        x, y = value
        return (float(x), float(y))
    except (TypeError, ValueError):
        raise ArchitectureError(f"field '{name}' in {where} must be a pair of numbers") from None


def _number(value: Any, name: str, where: str) -> float:
    if isinstance(value, bool):
        raise ArchitectureError(f"field '{name}' in {where} must be a number")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ArchitectureError(f"field '{name}' in {where} must be a number, got {value!r}") from None


def _index(value: Any, name: str, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ArchitectureError(f"field '{name}' in {where} must be a non-negative integer, got {value!r}")
    return value


def _count(value: Any, name: str, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ArchitectureError(f"field '{name}' in {where} must be a positive integer")
    return value


def _parse_slm(doc: Mapping[str, Any], where: str) -> SlmSpec:
    sep = _pair(_require(doc, "sep", where), "sep", where)
    if sep[0] <= 0 or sep[1] <= 0:
        raise ArchitectureError(f"non-positive separation in {where}")
    return SlmSpec(
        slm_id=_index(_require(doc, "slm_id", where), "slm_id", where),
        num_col=_count(_require(doc, "num_col", where), "num_col", where),
        num_row=_count(_require(doc, "num_row", where), "num_row", where),
        sep=sep,
        offset=_pair(_require(doc, "offset", where), "offset", where),
    )


def _parse_aod(doc: Mapping[str, Any], where: str) -> AodSpec:
    min_sep = _number(_require(doc, "min_sep", where), "min_sep", where)
    if min_sep <= 0:
        raise ArchitectureError(f"min_sep must be positive in {where}")
    return AodSpec(
        aod_id=_index(_require(doc, "aod_id", where), "aod_id", where),
        max_num_col=_count(_require(doc, "max_num_col", where), "max_num_col", where),
        max_num_row=_count(_require(doc, "max_num_row", where), "max_num_row", where),
        min_sep=min_sep,
    )


_ZONE_FIELDS = {"zone_id", "kind", "offset", "dimension", "slms"}


def _parse_zone(doc: Mapping[str, Any], index: int) -> ZoneSpec:
    where = f"zones[{index}]"
    kind = _require(doc, "kind", where)
    if kind not in ZONE_KINDS:
        raise ArchitectureError(f"unknown zone kind '{kind}' in {where}")
    dimension = _pair(_require(doc, "dimension", where), "dimension", where)
    if dimension[0] < 0 or dimension[1] < 0:
        raise ArchitectureError(f"negative dimension in {where}")
    slms = [_parse_slm(s, f"{where}.slms[{i}]") for i, s in enumerate(doc.get("slms", []))]
    if kind != "readout" and not slms:
        raise ArchitectureError(f"{kind} zone in {where} has no SLM array")
    return ZoneSpec(
        zone_id=_index(_require(doc, "zone_id", where), "zone_id", where),
        kind=kind,
        offset=_pair(_require(doc, "offset", where), "offset", where),
        dimension=dimension,
        slms=slms,
        extra={k: v for k, v in doc.items() if k not in _ZONE_FIELDS},
    )


def parse_architecture(doc: Union[str, bytes, Mapping[str, Any]]) -> Architecture:
    """Parse an architecture JSON document (text or already-decoded mapping)."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ArchitectureError(f"architecture is not valid JSON: {exc}") from None
    if not isinstance(doc, Mapping):
        raise ArchitectureError("architecture document must be a JSON object")
    aods = [_parse_aod(a, f"aods[{i}]") for i, a in enumerate(_require(doc, "aods", "architecture"))]
    zones = [_parse_zone(z, i) for i, z in enumerate(_require(doc, "zones", "architecture"))]
    extra = {k: v for k, v in doc.items() if k not in ("aods", "zones")}
    return Architecture(aods, zones, extra)


def load_architecture(path) -> Architecture:
    target = Path(path)
    if not target.exists():
        raise ArchitectureError(f"architecture file not found: {target}")
    return parse_architecture(target.read_text(encoding="utf-8"))
