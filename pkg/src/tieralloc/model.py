"""Core entities: grid map, cloud nodes, services, users, and mobility centers.

The service area is a rectangular grid of square cells. Local clouds sit in a
cell and cover a WiFi neighbourhood around it; the public cloud lives outside
the map. Users move over the grid and are summarized, for planning purposes,
by their center of mobility: the cell whose center is nearest to the
dwell-weighted mean of the positions they visit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidGroup, InvalidTrajectory

LOCAL = "local"
PUBLIC = "public"

WIFI = "wifi"
THREEG = "3g"


@dataclass(frozen=True)
class Cell:
    """One grid cell, identified by id, with its center in meters.

    wifi_covered_by holds the id of the local cloud whose access point serves
    this cell, or None when the cell has no WiFi coverage.
    """

    id: int
    center: tuple[float, float]
    wifi_covered_by: Optional[int] = None


class LocationMap:
    """Rectangular grid of square cells, row-major ids starting at 0."""

    def __init__(self, width: int, height: int, cell_size_m: float,
                 wifi: Optional[Mapping[int, int]] = None):
        if width <= 0 or height <= 0:
            raise ValueError("grid dimensions must be positive")
        if cell_size_m <= 0:
            raise ValueError("cell size must be positive")
        self.width = int(width)
        self.height = int(height)
        self.cell_size_m = float(cell_size_m)
        wifi = dict(wifi) if wifi else {}
        cells = []
        for row in range(self.height):
            for col in range(self.width):
                cid = row * self.width + col
                center = ((col + 0.5) * self.cell_size_m,
                          (row + 0.5) * self.cell_size_m)
                cells.append(Cell(cid, center, wifi.get(cid)))
        self.cells: tuple[Cell, ...] = tuple(cells)
        self._centers = np.array([c.center for c in cells], dtype=float)

    def __len__(self) -> int:
        return len(self.cells)

    def cell(self, cell_id: int) -> Cell:
        if not 0 <= cell_id < len(self.cells):
            raise KeyError(f"no cell with id {cell_id}")
        return self.cells[cell_id]

    def centers(self) -> np.ndarray:
        """(n, 2) array of cell centers in meters, indexed by cell id."""
        return self._centers

    def cell_at(self, x: float, y: float) -> Cell:
        """Cell containing the point (x, y); points on the far edge clamp in."""
        col = min(int(x / self.cell_size_m), self.width - 1)
        row = min(int(y / self.cell_size_m), self.height - 1)
        col = max(col, 0)
        row = max(row, 0)
        return self.cells[row * self.width + col]

    def nearest_cell(self, point: Sequence[float]) -> Cell:
        """Cell whose center is nearest to point; ties go to the lowest id."""
        d2 = np.sum((self._centers - np.asarray(point, dtype=float)) ** 2, axis=1)
        return self.cells[int(np.argmin(d2))]

    def with_wifi(self, wifi: Mapping[int, int]) -> "LocationMap":
        """Copy of this map with the given cell id -> cloud id coverage."""
        return LocationMap(self.width, self.height, self.cell_size_m, wifi)


@dataclass(frozen=True)
class CloudNode:
    """A cloud datacenter: local (in-grid, capacity-bound) or public.

    capacity is the number of users a local cloud can serve concurrently;
    None means unbounded (public tier). coverage_radius_m is the WiFi reach
    of a local cloud's access point.
    """

    id: int
    tier: str
    location: Optional[int] = None
    capacity: Optional[int] = None
    coverage_radius_m: float = 0.0

    def __post_init__(self):
        if self.tier not in (LOCAL, PUBLIC):
            raise ValueError(f"unknown tier {self.tier!r}")
        if self.tier == LOCAL:
            if self.location is None:
                raise ValueError("local cloud needs a grid cell location")
            if self.capacity is None or self.capacity < 0:
                raise ValueError("local cloud needs a non-negative capacity")
        if self.tier == PUBLIC and self.location is not None:
            raise ValueError("public cloud lives outside the grid")


@dataclass(frozen=True)
class Service:
    """A deployed instance of a function, hosted on a cloud node or a device.

    Exactly one of host_cloud / host_user is set. compute_ref keys into the
    cost tables for the per-service compute profile.
    """

    id: int
    function_id: str
    host_cloud: Optional[int] = None
    host_user: Optional[int] = None
    compute_ref: str = "none"

    def __post_init__(self):
        if (self.host_cloud is None) == (self.host_user is None):
            raise ValueError("service must be hosted on exactly one of cloud or device")

    @property
    def on_device(self) -> bool:
        return self.host_user is not None


@dataclass(frozen=True)
class TrajectoryEntry:
    cell_id: int
    dwell_s: float

    def __post_init__(self):
        if self.dwell_s <= 0:
            raise InvalidTrajectory(f"dwell must be positive, got {self.dwell_s}")


@dataclass(frozen=True)
class Trajectory:
    """Ordered (cell, dwell seconds) visits of one user."""

    entries: tuple[TrajectoryEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise InvalidTrajectory("trajectory has no entries")

    def __len__(self) -> int:
        return len(self.entries)

    def duration(self) -> float:
        return sum(e.dwell_s for e in self.entries)


def trajectory_from_pairs(pairs: Iterable[tuple[int, float]]) -> Trajectory:
    return Trajectory(tuple(TrajectoryEntry(c, d) for c, d in pairs))


@dataclass(frozen=True)
class MobileUser:
    """A device owner: trajectory plus the ids of services hosted on-device."""

    id: int
    trajectory: Trajectory
    device_services: frozenset[int] = field(default_factory=frozenset)


@dataclass(frozen=True)
class UserGroup:
    id: int
    members: frozenset[int]

    def __post_init__(self):
        if not self.members:
            raise InvalidGroup(f"group {self.id} has no members")


def mean_position(trajectory: Trajectory, grid: LocationMap) -> np.ndarray:
    """Dwell-weighted mean of the visited cell centers, in meters."""
    if not isinstance(trajectory, Trajectory) or not trajectory.entries:
        raise InvalidTrajectory("trajectory has no entries")
    centers = grid.centers()
    weights = np.array([e.dwell_s for e in trajectory.entries], dtype=float)
    points = centers[[e.cell_id for e in trajectory.entries]]
    return (weights[:, None] * points).sum(axis=0) / weights.sum()


def center_of_mobility(trajectory: Trajectory, grid: LocationMap) -> int:
    """Cell id nearest the user's dwell-weighted mean position.

    Distance ties resolve to the lowest cell id, so the result is unique.
    """
    return grid.nearest_cell(mean_position(trajectory, grid)).id


def center_of_group_mobility(group: UserGroup, users: Mapping[int, MobileUser],
                             grid: LocationMap) -> tuple[np.ndarray, int]:
    """Mean of the members' center-of-mobility cell centers, and its cell.

    Returns (mean position vector in meters, nearest cell id).
    """
    missing = [m for m in group.members if m not in users]
    if missing:
        raise InvalidGroup(f"group {group.id} references unknown users {sorted(missing)}")
    member_cells = [center_of_mobility(users[m].trajectory, grid)
                    for m in sorted(group.members)]
    pts = grid.centers()[member_cells]
    mean = pts.mean(axis=0)
    return mean, grid.nearest_cell(mean).id
