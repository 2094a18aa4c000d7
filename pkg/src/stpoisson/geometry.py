"""Planar polygon primitives: area, containment, clipping, hulls, Voronoi cells.

All coordinates are pre-projected planar map units; no geodesic arithmetic is
performed.  Regions are closed: boundary points count as inside.  Shapely
(GEOS) provides the boundary-traversal clipping kernel, which handles concave
polygons and holes; everything here is a thin, validated layer over it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely
import shapely.geometry as sgeom

from .errors import DegenerateGeometry, DuplicateSites, EmptyRegion, InputError

# Geometric tolerance, relative to the bounding-box diagonal of the inputs.
TAU_GEOM = 1e-9


@dataclass(frozen=True)
class Point2:
    """A point in the plane (map units)."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InputError(f"non-finite coordinates ({self.x}, {self.y})")

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


def _ring_signed_area(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _clean_ring(ring) -> np.ndarray:
    """Drop a closing duplicate vertex and consecutive duplicates."""
    arr = np.asarray([(p.x, p.y) if isinstance(p, Point2) else (p[0], p[1]) for p in ring],
                     dtype=float)
    if len(arr) >= 2 and np.array_equal(arr[0], arr[-1]):
        arr = arr[:-1]
    keep = np.ones(len(arr), dtype=bool)
    keep[1:] = np.any(arr[1:] != arr[:-1], axis=1)
    return arr[keep]


class Polygon:
    """A simple polygon: one outer ring plus optional holes.

    Rings are stored as (n, 2) float arrays.  The outer ring is normalized to
    counter-clockwise orientation and holes to clockwise.
    """

    __slots__ = ("rings", "_shapely")

    def __init__(self, rings):
        cleaned = []
        for k, ring in enumerate(rings):
            arr = _clean_ring(ring)
            if len(arr) < 3:
                raise DegenerateGeometry(f"ring {k} has fewer than 3 distinct vertices")
            if not np.all(np.isfinite(arr)):
                raise DegenerateGeometry(f"ring {k} has non-finite coordinates")
            signed = _ring_signed_area(arr)
            if signed == 0.0:
                raise DegenerateGeometry(f"ring {k} is collinear")
            want_ccw = k == 0
            if (signed > 0) != want_ccw:
                arr = arr[::-1].copy()
            cleaned.append(arr)
        if not cleaned:
            raise DegenerateGeometry("polygon has no rings")
        self.rings = cleaned
        self._shapely = None

    @property
    def outer(self) -> np.ndarray:
        return self.rings[0]

    @property
    def holes(self) -> list[np.ndarray]:
        return self.rings[1:]

    def to_shapely(self) -> sgeom.Polygon:
        if self._shapely is None:
            self._shapely = sgeom.Polygon(self.outer, [h for h in self.holes])
        return self._shapely

    def __repr__(self):
        return f"Polygon({len(self.rings)} rings, area={polygon_area(self):.6g})"


class Region:
    """A multi-part region (union of polygons) with positive total area."""

    __slots__ = ("polygons", "_shapely")

    def __init__(self, polygons):
        polys = list(polygons)
        if not polys:
            raise EmptyRegion("region has no polygons")
        self.polygons = polys
        self._shapely = None
        if self.area() <= 0.0:
            raise EmptyRegion("region has zero area")

    @classmethod
    def from_polygon(cls, poly: Polygon) -> "Region":
        return cls([poly])

    @classmethod
    def rectangle(cls, xmin: float, ymin: float, xmax: float, ymax: float) -> "Region":
        return cls([Polygon([[(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)]])])

    def to_shapely(self):
        if self._shapely is None:
            parts = [p.to_shapely() for p in self.polygons]
            self._shapely = parts[0] if len(parts) == 1 else shapely.union_all(parts)
        return self._shapely

    def area(self) -> float:
        return sum(polygon_area(p) for p in self.polygons)

    def bounds(self) -> tuple[float, float, float, float]:
        arrs = np.vstack([p.outer for p in self.polygons])
        return (float(arrs[:, 0].min()), float(arrs[:, 1].min()),
                float(arrs[:, 0].max()), float(arrs[:, 1].max()))

    def diagonal(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds()
        return math.hypot(xmax - xmin, ymax - ymin)

    def __repr__(self):
        return f"Region({len(self.polygons)} polygons, area={self.area():.6g})"


def polygons_from_shapely(geom) -> list[Polygon]:
    """Extract polygon parts from any shapely geometry, dropping lower-dimensional pieces."""
    out = []
    if geom.is_empty:
        return out
    if isinstance(geom, sgeom.Polygon):
        parts = [geom]
    elif isinstance(geom, (sgeom.MultiPolygon, sgeom.GeometryCollection)):
        parts = [g for g in geom.geoms if isinstance(g, sgeom.Polygon)]
        for g in geom.geoms:
            if isinstance(g, sgeom.MultiPolygon):
                parts.extend(g.geoms)
    else:
        return out
    for part in parts:
        if part.is_empty or part.area <= 0.0:
            continue
        rings = [np.asarray(part.exterior.coords)] + [np.asarray(r.coords) for r in part.interiors]
        out.append(Polygon(rings))
    return out


# -- operations --------------------------------------------------------------

def polygon_area(p: Polygon) -> float:
    """Shoelace area of the outer ring minus hole areas."""
    total = _ring_signed_area(p.outer)
    for hole in p.holes:
        total += _ring_signed_area(hole)  # holes are clockwise: negative
    return max(total, 0.0)


def polygon_centroid(p: Polygon) -> Point2:
    c = p.to_shapely().centroid
    return Point2(c.x, c.y)


def polygon_intersection(a: Polygon, b: Polygon) -> list[Polygon]:
    """Intersection of two polygons as a (possibly empty) list of polygon parts."""
    inter = a.to_shapely().intersection(b.to_shapely())
    return polygons_from_shapely(inter)


def point_in_region(pt: Point2, r: Region) -> bool:
    """Containment test; boundary points count as inside."""
    return bool(shapely.covers(r.to_shapely(), sgeom.Point(pt.x, pt.y)))


def convex_hull(points) -> Polygon:
    """Minimal convex polygon containing all input points."""
    coords = np.asarray([(p.x, p.y) if isinstance(p, Point2) else (p[0], p[1])
                         for p in points], dtype=float)
    if len(coords) < 3:
        raise DegenerateGeometry("convex hull needs at least 3 points")
    hull = sgeom.MultiPoint(coords).convex_hull
    if not isinstance(hull, sgeom.Polygon):
        raise DegenerateGeometry("input points are collinear")
    return polygons_from_shapely(hull)[0]


def _halfplane_patch(mid: np.ndarray, u: np.ndarray, reach: float) -> sgeom.Polygon:
    """Rectangle covering the half-plane {p : (p - mid)ยทu <= 0} out to `reach`."""
    v = np.array([-u[1], u[0]])
    a = mid + reach * v
    b = mid - reach * v
    return sgeom.Polygon([a, b, b - 2.0 * reach * u, a - 2.0 * reach * u])


def voronoi_cells(sites, clip: Region) -> list[list[Polygon]]:
    """Voronoi cell of each site, clipped to `clip`.

    Cells are built by half-plane intersection per site (O(k) clips per cell),
    which is exact for the small site counts this library targets.  Returns a
    list aligned with `sites`; each entry is the cell's polygon parts (more
    than one part can appear when `clip` is concave).
    """
    pts = np.asarray([(s.x, s.y) if isinstance(s, Point2) else (s[0], s[1])
                      for s in sites], dtype=float)
    if len(pts) < 2:
        raise InputError("need at least 2 sites")
    diag = clip.diagonal()
    tol = TAU_GEOM * diag
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if math.hypot(*(pts[i] - pts[j])) <= tol:
                raise DuplicateSites(f"sites {i} and {j} coincide")
    for k, p in enumerate(pts):
        if not point_in_region(Point2(p[0], p[1]), clip):
            raise InputError(f"site {k} lies outside the clip region")

    reach = 4.0 * diag
    clip_shape = clip.to_shapely()
    cells = []
    for k, site in enumerate(pts):
        cell = clip_shape
        for j, other in enumerate(pts):
            if j == k:
                continue
            d = other - site
            mid = 0.5 * (site + other)
            cell = cell.intersection(_halfplane_patch(mid, d / np.linalg.norm(d), reach))
            if cell.is_empty:
                break
        cells.append(polygons_from_shapely(cell))
    return cells
