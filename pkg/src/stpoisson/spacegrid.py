"""Spatial discretizations: rectangular, hexagonal, Voronoi, and custom zones.

A discretization partitions a border region into indexed zones (0-based ids),
carries a neighbor graph, and supports cross-discretization intersection areas
and mass-conserving attribute reallocation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
import shapely.geometry as sgeom
from shapely.strtree import STRtree

from . import geometry
from .errors import (BorderMismatch, CoverageError, EmptyRegion, InputError,
                     MissingAttribute, OverlapError)
from .geometry import Point2, Polygon, Region, polygons_from_shapely

# Clipped parts smaller than this fraction of the border area are clipping noise.
SLIVER_FRACTION = 1e-12


@dataclass
class Zone:
    """One subregion of a discretization."""

    id: int
    geometry: list[Polygon]
    area: float
    centroid: Point2
    attributes: dict = field(default_factory=dict)

    def shape(self):
        if not hasattr(self, "_shape") or self._shape is None:
            parts = [p.to_shapely() for p in self.geometry]
            self._shape = parts[0] if len(parts) == 1 else shapely.union_all(parts)
        return self._shape


class SpatialDiscretization:
    """Zones partitioning a border, plus the zone adjacency graph.

    `neighbor_edges` holds unordered id pairs (i, j) with i < j.
    `grid_index` maps (row, col) to zone id for grid-based builders.
    """

    def __init__(self, zones, border: Region, neighbor_rule: str = "edge-only",
                 grid_index: dict | None = None):
        self.zones = list(zones)
        self.border = border
        self.neighbor_rule = neighbor_rule
        self.grid_index = grid_index
        self.neighbor_edges = neighbor_graph(self, neighbor_rule)

    @property
    def n_zones(self) -> int:
        return len(self.zones)

    def areas(self) -> np.ndarray:
        return np.array([z.area for z in self.zones])

    def zone_tree(self):
        """STRtree over zone parts; returns (tree, part->zone-id map)."""
        if not hasattr(self, "_tree") or self._tree is None:
            parts, owner = [], []
            for z in self.zones:
                for p in z.geometry:
                    parts.append(p.to_shapely())
                    owner.append(z.id)
            self._tree = (STRtree(parts), parts, np.array(owner))
        return self._tree

    def locate(self, x: float, y: float) -> int | None:
        """Zone containing (x, y); boundary ties go to the lowest zone id."""
        ids = self.locate_many(np.array([x]), np.array([y]))
        return None if ids[0] < 0 else int(ids[0])

    def locate_many(self, xs, ys) -> np.ndarray:
        """Zone ids for many points at once; -1 for points in no zone."""
        tree, parts, owner = self.zone_tree()
        points = shapely.points(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
        qi, ti = tree.query(points, predicate="covered_by")
        ids = np.full(len(points), -1, dtype=np.int64)
        if len(qi):
            order = np.lexsort((owner[ti], qi))  # lowest zone id wins boundary ties
            qi, zid = qi[order], owner[ti][order]
            first = np.ones(len(qi), dtype=bool)
            first[1:] = qi[1:] != qi[:-1]
            ids[qi[first]] = zid[first]
        return ids

    def __repr__(self):
        return f"SpatialDiscretization({self.n_zones} zones, rule={self.neighbor_rule!r})"


@dataclass
class IntersectionMatrix:
    """Sparse pairwise intersection areas between two discretizations."""

    entries: dict  # (i1, i2) -> area

    def row_sum(self, i1: int) -> float:
        return sum(a for (r, _), a in self.entries.items() if r == i1)


def _make_zone(zone_id: int, parts: list[Polygon], attributes=None) -> Zone:
    shapes = [p.to_shapely() for p in parts]
    merged = shapes[0] if len(shapes) == 1 else shapely.union_all(shapes)
    c = merged.centroid
    area = sum(geometry.polygon_area(p) for p in parts)
    return Zone(zone_id, parts, area, Point2(c.x, c.y), dict(attributes or {}))


def _clip_cells(cells, border: Region, neighbor_rule: str, keys=None):
    """Intersect candidate cells with the border, drop empties, compact ids."""
    border_shape = border.to_shapely()
    border_area = border.area()
    if border_area <= 0:
        raise EmptyRegion("border has zero area")
    zones = []
    grid_index = {}
    for pos, cell in enumerate(cells):
        inter = border_shape.intersection(cell)
        parts = [p for p in polygons_from_shapely(inter)
                 if geometry.polygon_area(p) >= SLIVER_FRACTION * border_area]
        if not parts:
            continue
        zid = len(zones)
        zones.append(_make_zone(zid, parts))
        if keys is not None:
            grid_index[keys[pos]] = zid
    if not zones:
        raise EmptyRegion("no cell intersects the border")
    return SpatialDiscretization(zones, border, neighbor_rule,
                                 grid_index if keys is not None else None)


def rect_discretize(border: Region, nx: int, ny: int,
                    neighbor_rule: str = "edge-only") -> SpatialDiscretization:
    """Split the border's bounding box into nx-by-ny cells clipped to the border.

    Ids run row-major from the bottom-left cell (left to right, bottom to top);
    cells with empty intersection are dropped and ids re-compacted.
    """
    if nx < 1 or ny < 1:
        raise InputError("nx and ny must be >= 1")
    xmin, ymin, xmax, ymax = border.bounds()
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    cells, keys = [], []
    for row in range(ny):
        for col in range(nx):
            cells.append(sgeom.box(xs[col], ys[row], xs[col + 1], ys[row + 1]))
            keys.append((row, col))
    return _clip_cells(cells, border, neighbor_rule, keys)


def hex_scale_radius(border: Region, scale: int) -> float:
    """Hexagon circumradius for an integer scale: each +2 shrinks cell area 9x."""
    return border.diagonal() / (2.0 * 3.0 ** ((scale - 1) / 2.0))


def hex_discretize(border: Region, scale: int,
                   neighbor_rule: str = "edge-only") -> SpatialDiscretization:
    """Tile the border with flat-top regular hexagons and clip to the border.

    The lattice is anchored so one hexagon is centered on the bounding-box
    center.  Vertices are computed on a shared half-radius lattice so adjacent
    hexagons share edges bit-exactly.
    """
    if not 1 <= scale <= 16:
        raise InputError("hex scale must be in [1, 16]")
    r = hex_scale_radius(border, scale)
    hx, hy = r / 2.0, r * math.sqrt(3.0) / 2.0
    xmin, ymin, xmax, ymax = border.bounds()
    cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    # Hexagon (q, row) has center (cx + 3*q*hx, cy + (2*row + q%2)*hy).
    q_lo = math.floor((xmin - cx - 2 * r) / (3 * hx))
    q_hi = math.ceil((xmax - cx + 2 * r) / (3 * hx))
    offsets = [(2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)]
    cells, keys = [], []
    for q in range(q_lo, q_hi + 1):
        parity = q & 1
        row_lo = math.floor((ymin - cy - 2 * r) / (2 * hy))
        row_hi = math.ceil((ymax - cy + 2 * r) / (2 * hy))
        for row in range(row_lo, row_hi + 1):
            verts = [(cx + (3 * q + dx) * hx, cy + (2 * row + parity + dy) * hy)
                     for dx, dy in offsets]
            cells.append(sgeom.Polygon(verts))
            keys.append((row, q))
    return _clip_cells(cells, border, neighbor_rule, keys)


def custom_discretize(border: Region, subregions, neighbor_rule: str = "edge-only",
                      attributes=None) -> SpatialDiscretization:
    """Zones from user polygons: checks pairwise overlap and border coverage."""
    subs = list(subregions)
    if not subs:
        raise InputError("no subregions given")
    shapes = [s.to_shapely() for s in subs]
    areas = [s.area for s in shapes]
    tree = STRtree(shapes)
    for i, shape in enumerate(shapes):
        for j in tree.query(shape, predicate="intersects"):
            j = int(j)
            if j <= i:
                continue
            overlap = shape.intersection(shapes[j]).area
            if overlap > 1e-6 * min(areas[i], areas[j]):
                raise OverlapError(f"subregions {i} and {j} overlap (area {overlap:.3g})")
    union = shapely.union_all(shapes)
    border_area = border.area()
    deficit = border.to_shapely().difference(union).area
    if deficit > 1e-3 * border_area:
        raise CoverageError(f"subregions leave {deficit:.3g} of the border uncovered")
    attrs = list(attributes) if attributes is not None else [None] * len(subs)
    border_shape = border.to_shapely()
    zones = []
    for k, shape in enumerate(shapes):
        parts = [p for p in polygons_from_shapely(border_shape.intersection(shape))
                 if geometry.polygon_area(p) >= SLIVER_FRACTION * border_area]
        if not parts:
            continue
        zones.append(_make_zone(len(zones), parts, attrs[k]))
    if not zones:
        raise EmptyRegion("no subregion intersects the border")
    return SpatialDiscretization(zones, border, neighbor_rule)


def voronoi_discretize(border: Region, sites,
                       neighbor_rule: str = "edge-only") -> SpatialDiscretization:
    """One zone per site: the points closest to that site, clipped to the border."""
    cells = geometry.voronoi_cells(sites, border)
    zones = [_make_zone(k, parts) for k, parts in enumerate(cells)]
    return SpatialDiscretization(zones, border, neighbor_rule)


def neighbor_graph(d: SpatialDiscretization, rule: str = "edge-only") -> set:
    """Unordered zone-id pairs that touch.

    "edge-only" requires a shared boundary of positive length; "edge-or-vertex"
    also accepts single-point contact.
    """
    if rule not in ("edge-only", "edge-or-vertex"):
        raise InputError(f"unknown neighbor rule {rule!r}")
    tree, parts, owner = d.zone_tree()
    length_tol = geometry.TAU_GEOM * d.border.diagonal()
    edges = set()
    left, right = tree.query(parts, predicate="intersects")
    for a, b in zip(left, right):
        i, j = int(owner[a]), int(owner[b])
        if i >= j or (i, j) in edges:
            continue
        contact = parts[a].intersection(parts[b])
        if contact.is_empty:
            continue
        if rule == "edge-only" and contact.length <= length_tol:
            continue
        edges.add((i, j))
    return edges


def intersection_matrix(d1: SpatialDiscretization,
                        d2: SpatialDiscretization) -> IntersectionMatrix:
    """Pairwise intersection areas between zones of two discretizations."""
    a1, a2 = d1.border.area(), d2.border.area()
    mismatch = d1.border.to_shapely().symmetric_difference(d2.border.to_shapely()).area
    if mismatch > 1e-6 * max(a1, a2):
        raise BorderMismatch("discretizations have different borders")
    tree, parts, owner = d2.zone_tree()
    entries: dict = {}
    for z1 in d1.zones:
        shape1 = z1.shape()
        for idx in tree.query(shape1, predicate="intersects"):
            i2 = int(owner[int(idx)])
            area = shape1.intersection(parts[int(idx)]).area
            if area > 0.0:
                key = (z1.id, i2)
                entries[key] = entries.get(key, 0.0) + area
    return IntersectionMatrix(entries)


def reallocate_attribute(d1: SpatialDiscretization, attr: str,
                         d2: SpatialDiscretization,
                         m: IntersectionMatrix | None = None) -> np.ndarray:
    """Transfer a zone attribute from d1 onto d2 assuming uniform density.

    Zone i2 receives sum over i1 of value[i1] * area(i1 & i2) / area(i1), which
    conserves total mass whenever d2 covers d1.
    """
    for z in d1.zones:
        if attr not in z.attributes:
            raise MissingAttribute(f"zone {z.id} lacks attribute {attr!r}")
    if m is None:
        m = intersection_matrix(d1, d2)
    values = np.array([float(z.attributes[attr]) for z in d1.zones])
    areas1 = d1.areas()
    out = np.zeros(d2.n_zones)
    for (i1, i2), area in m.entries.items():
        out[i2] += values[i1] * area / areas1[i1]
    return out


# -- JSON interchange ---------------------------------------------------------

def _polygons_from_geometry_json(g) -> list[Polygon]:
    gtype = g.get("type")
    if gtype == "Polygon":
        coord_sets = [g["coordinates"]]
    elif gtype == "MultiPolygon":
        coord_sets = g["coordinates"]
    else:
        raise InputError(f"unsupported geometry type {gtype!r}")
    polys = []
    for rings in coord_sets:
        polys.append(Polygon([[(float(x), float(y)) for x, y in ring] for ring in rings]))
    return polys


def load_features(path_or_doc):
    """Read a features document: list of (attributes, polygon parts)."""
    if isinstance(path_or_doc, (str,)):
        with open(path_or_doc) as fh:
            doc = json.load(fh)
    else:
        doc = path_or_doc
    if "features" not in doc:
        raise InputError("document has no 'features' key")
    out = []
    for feat in doc["features"]:
        out.append((dict(feat.get("properties") or {}),
                    _polygons_from_geometry_json(feat["geometry"])))
    return out


def region_from_features(path_or_doc) -> Region:
    polys = []
    for _, parts in load_features(path_or_doc):
        polys.extend(parts)
    return Region(polys)


def _rings_json(p: Polygon):
    return [[[float(x), float(y)] for x, y in ring] for ring in p.rings]


def discretization_to_json(d: SpatialDiscretization) -> dict:
    return {
        "zones": [
            {
                "id": z.id,
                "area": z.area,
                "centroid": [z.centroid.x, z.centroid.y],
                "attributes": z.attributes,
                "polygons": [_rings_json(p) for p in z.geometry],
            }
            for z in d.zones
        ],
        "adjacency": sorted([list(e) for e in d.neighbor_edges]),
        "neighbor_rule": d.neighbor_rule,
        "border": {
            "features": [
                {"properties": {}, "geometry": {"type": "Polygon", "coordinates": _rings_json(p)}}
                for p in d.border.polygons
            ]
        },
    }


def discretization_from_json(doc: dict) -> SpatialDiscretization:
    border = region_from_features(doc["border"])
    zones = []
    for zdoc in doc["zones"]:
        parts = [Polygon(rings) for rings in zdoc["polygons"]]
        zone = _make_zone(int(zdoc["id"]), parts, zdoc.get("attributes") or {})
        zones.append(zone)
    zones.sort(key=lambda z: z.id)
    d = SpatialDiscretization(zones, border, doc.get("neighbor_rule", "edge-only"))
    return d
