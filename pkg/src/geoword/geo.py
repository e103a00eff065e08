"""Coordinate types, great-circle distance, local planar projection, voting grid.

All distances are in kilometres on a sphere of radius EARTH_RADIUS_KM
(IUGG mean Earth radius). The planar projection is a local equirectangular
map anchored at an origin point; it is only meant for working at country
scale (distortion grows with distance, hence the hard range limit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_KM = 6371.0088
KM_PER_DEGREE = math.pi * EARTH_RADIUS_KM / 180.0

# Maximum distance from the projection origin we accept before distortion
# of the equirectangular approximation becomes unbounded.
MAX_PROJECTION_RANGE_KM = 1500.0

# Points within this fraction of a cell of a grid line are treated as lying
# exactly on it (and therefore belong to the north/east cell, since cells
# are half-open with the south/west edge inclusive). Absorbs float noise
# when an edge coordinate is reconstructed as origin + k * step.
_EDGE_SNAP = 1e-9


class ProjectionRangeError(ValueError):
    """Point is too far from the projection origin to project faithfully."""


class OutsideGridError(ValueError):
    """Point does not fall inside the grid's bounding box."""


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude pair in degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class PlanarPoint:
    """Kilometres east (x) and north (y) of a projection origin."""

    x: float
    y: float


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in km."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def project(p: GeoPoint, origin: GeoPoint) -> PlanarPoint:
    """Map a point to local planar km coordinates around ``origin``.

    Equirectangular: one degree of latitude is KM_PER_DEGREE km everywhere,
    one degree of longitude is scaled by cos(origin latitude). Raises
    ProjectionRangeError beyond MAX_PROJECTION_RANGE_KM from the origin.
    """
    d = haversine(p, origin)
    if d > MAX_PROJECTION_RANGE_KM:
        raise ProjectionRangeError(
            f"point {d:.0f} km from origin exceeds {MAX_PROJECTION_RANGE_KM:.0f} km limit"
        )
    x = (p.lon - origin.lon) * math.cos(math.radians(origin.lat)) * KM_PER_DEGREE
    y = (p.lat - origin.lat) * KM_PER_DEGREE
    return PlanarPoint(x, y)


def unproject(p: PlanarPoint, origin: GeoPoint) -> GeoPoint:
    """Inverse of project for the same origin."""
    lat = origin.lat + p.y / KM_PER_DEGREE
    lon = origin.lon + p.x / (math.cos(math.radians(origin.lat)) * KM_PER_DEGREE)
    return GeoPoint(lat, lon)


@dataclass(frozen=True)
class Grid:
    """Rectangular voting grid of lat/lon-aligned cells.

    Cells are sized to cell_size_km at the grid's mean latitude, so a cell
    is roughly square in km. Rows count northward from the origin
    (southwest corner), columns eastward. Cell intervals are half-open:
    the south and west edges belong to the cell.
    """

    origin: GeoPoint
    cell_size_km: float
    n_rows: int
    n_cols: int

    def __post_init__(self) -> None:
        if self.cell_size_km <= 0:
            raise ValueError("cell_size_km must be positive")
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("grid must have at least one row and column")

    @property
    def lat_step_deg(self) -> float:
        return self.cell_size_km / KM_PER_DEGREE

    @property
    def lon_step_deg(self) -> float:
        mean_lat = self.origin.lat + self.n_rows * self.lat_step_deg / 2.0
        return self.cell_size_km / (KM_PER_DEGREE * math.cos(math.radians(mean_lat)))

    @classmethod
    def from_bbox(cls, southwest: GeoPoint, northeast: GeoPoint, cell_size_km: float = 50.0) -> "Grid":
        """Grid anchored at ``southwest`` covering the box, padded to whole cells."""
        if northeast.lat < southwest.lat or northeast.lon < southwest.lon:
            raise ValueError("northeast corner must be north and east of southwest corner")
        lat_step = cell_size_km / KM_PER_DEGREE
        n_rows = int(math.floor((northeast.lat - southwest.lat) / lat_step)) + 1
        mean_lat = southwest.lat + n_rows * lat_step / 2.0
        lon_step = cell_size_km / (KM_PER_DEGREE * math.cos(math.radians(mean_lat)))
        n_cols = int(math.floor((northeast.lon - southwest.lon) / lon_step)) + 1
        return cls(origin=southwest, cell_size_km=cell_size_km, n_rows=n_rows, n_cols=n_cols)

    def _axis_index(self, offset_deg: float, step_deg: float) -> int:
        q = offset_deg / step_deg
        nearest = round(q)
        if abs(q - nearest) < _EDGE_SNAP:
            return int(nearest)
        return int(math.floor(q))

    def cell_of(self, p: GeoPoint) -> tuple[int, int]:
        """Cell index (row, col) containing ``p``; OutsideGridError if out of box."""
        row = self._axis_index(p.lat - self.origin.lat, self.lat_step_deg)
        col = self._axis_index(p.lon - self.origin.lon, self.lon_step_deg)
        if not (0 <= row < self.n_rows and 0 <= col < self.n_cols):
            raise OutsideGridError(f"({p.lat}, {p.lon}) outside grid")
        return (row, col)

    def cell_center(self, idx: tuple[int, int]) -> GeoPoint:
        """Geometric center of the cell's lat/lon rectangle."""
        row, col = idx
        if not (0 <= row < self.n_rows and 0 <= col < self.n_cols):
            raise IndexError(f"cell index {idx} out of range")
        return GeoPoint(
            self.origin.lat + (row + 0.5) * self.lat_step_deg,
            self.origin.lon + (col + 0.5) * self.lon_step_deg,
        )

    def cell_bounds(self, idx: tuple[int, int]) -> tuple[GeoPoint, GeoPoint]:
        """(southwest, northeast) corners of a cell's rectangle."""
        row, col = idx
        if not (0 <= row < self.n_rows and 0 <= col < self.n_cols):
            raise IndexError(f"cell index {idx} out of range")
        sw = GeoPoint(self.origin.lat + row * self.lat_step_deg,
                      self.origin.lon + col * self.lon_step_deg)
        ne = GeoPoint(self.origin.lat + (row + 1) * self.lat_step_deg,
                      self.origin.lon + (col + 1) * self.lon_step_deg)
        return sw, ne
