"""Spherical geometry and spatial search: unit-vector coordinates, cone and
convex-polygon regions, declination zones, a kd-tree index over 3-d unit
vectors, and the symmetric fixed-radius neighbors join.

All internal geometry lives in unit-vector space to avoid pole/RA-wrap
singularities; angles cross the API boundary in degrees or arcseconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .kdtree import KdTree

ARCSEC_PER_DEG = 3600.0


def radec_to_unit(ra_deg, dec_deg) -> np.ndarray:
    """Convert RA/Dec (degrees) to unit vectors, shape (..., 3)."""
    ra = np.asarray(ra_deg, dtype=np.float64)
    dec = np.asarray(dec_deg, dtype=np.float64)
    if np.any(dec < -90.0) or np.any(dec > 90.0):
        raise ValidationError("dec outside [-90, 90]")
    ra_r = np.radians(ra)
    dec_r = np.radians(dec)
    cos_dec = np.cos(dec_r)
    return np.stack([cos_dec * np.cos(ra_r), cos_dec * np.sin(ra_r), np.sin(dec_r)], axis=-1)


def unit_to_radec(vec) -> tuple[np.ndarray, np.ndarray]:
    """Convert unit vectors back to (RA, Dec) in degrees, RA in [0, 360)."""
    v = np.asarray(vec, dtype=np.float64)
    ra = np.degrees(np.arctan2(v[..., 1], v[..., 0])) % 360.0
    dec = np.degrees(np.arctan2(v[..., 2], np.hypot(v[..., 0], v[..., 1])))
    return ra, dec


def angle_between(u, v) -> np.ndarray:
    """Great-circle angle (radians) between unit vectors; atan2 of cross/dot
    magnitudes, stable near 0 and pi. Broadcasts."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    cross = np.cross(u, v)
    sin_a = np.sqrt(np.einsum("...i,...i->...", cross, cross))
    cos_a = np.einsum("...i,...i->...", u, v)
    return np.arctan2(sin_a, cos_a)


def angular_distance(ra1, dec1, ra2, dec2) -> float:
    """Great-circle angle (radians) between two RA/Dec positions (degrees)."""
    return float(angle_between(radec_to_unit(ra1, dec1), radec_to_unit(ra2, dec2)))


def chord_for_angle(theta_rad: float) -> float:
    """Euclidean chord length subtending a given angle on the unit sphere."""
    return 2.0 * np.sin(0.5 * theta_rad)


def angle_for_chord(chord: float) -> float:
    return 2.0 * np.arcsin(np.clip(0.5 * chord, -1.0, 1.0))


# ---------------------------------------------------------------------------
# regions

@dataclass(frozen=True)
class Cone:
    """Spherical cap: all points within `radius` radians of `center`."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        if c.shape != (3,) or abs(c @ c - 1.0) > 1e-9:
            raise ValidationError("cone center must be a 3-d unit vector")
        object.__setattr__(self, "center", c)
        if not 0.0 <= self.radius <= np.pi:
            raise ValidationError("cone radius must be in [0, pi]")

    def contains(self, points: np.ndarray) -> np.ndarray:
        return points @ self.center >= np.cos(self.radius)


@dataclass(frozen=True)
class ConvexPolygon:
    """Intersection of halfspaces: p inside iff normal.p >= offset for all."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        n = np.atleast_2d(np.asarray(self.normals, dtype=np.float64))
        off = np.atleast_1d(np.asarray(self.offsets, dtype=np.float64))
        if n.shape[1] != 3 or len(n) != len(off) or len(n) == 0:
            raise ValidationError("polygon needs matching (K,3) normals and K offsets")
        norms = np.linalg.norm(n, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValidationError("halfspace normals must be unit vectors")
        if np.any(np.abs(off) > 1.0):
            raise ValidationError("halfspace offsets must lie in [-1, 1]")
        object.__setattr__(self, "normals", n)
        object.__setattr__(self, "offsets", off)

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.all(points @ self.normals.T >= self.offsets, axis=-1)


Region = Cone | ConvexPolygon


def cone_from_radec(ra_deg: float, dec_deg: float, radius_deg: float) -> Cone:
    return Cone(radec_to_unit(ra_deg, dec_deg), np.radians(radius_deg))


def load_polygon(path) -> ConvexPolygon:
    """Read a polygon file: one `nx ny nz offset` halfspace per line,
    `#` comments."""
    normals, offsets = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 'nx ny nz offset'")
            normals.append([float(x) for x in parts[:3]])
            offsets.append(float(parts[3]))
    return ConvexPolygon(np.asarray(normals), np.asarray(offsets))


def region_dec_bounds(region: Region) -> tuple[float, float]:
    """Conservative [dec_min, dec_max] (degrees) containing the region; used
    for zone pre-filtering."""
    if isinstance(region, Cone):
        _, dec = unit_to_radec(region.center)
        r = np.degrees(region.radius)
        return max(-90.0, float(dec) - r), min(90.0, float(dec) + r)
    return -90.0, 90.0


# ---------------------------------------------------------------------------
# zones

def n_zones(zone_height_deg: float) -> int:
    if zone_height_deg <= 0:
        raise ValidationError("zone_height must be > 0")
    return int(np.ceil(180.0 / zone_height_deg))

def zone_of(dec_deg, zone_height_deg: float) -> np.ndarray:
    """Constant-height declination band id: floor((dec+90)/height), with the
    north pole clamped into the last band."""
    nz = n_zones(zone_height_deg)
    dec = np.asarray(dec_deg, dtype=np.float64)
    if np.any(dec < -90.0) or np.any(dec > 90.0):
        raise ValidationError("dec outside [-90, 90]")
    z = np.floor((dec + 90.0) / zone_height_deg).astype(np.int64)
    return np.minimum(z, nz - 1)


# ---------------------------------------------------------------------------
# spatial index

@dataclass
class SpatialIndex:
    """Immutable-after-build index over a position catalog: kd-tree over unit
    vectors plus a declination zone table. Safe for concurrent readers."""

    ids: np.ndarray
    unit: np.ndarray
    zone_height_deg: float = 1.0
    leaf_size: int = 32
    tree: KdTree = field(init=False, repr=False)
    zones: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.unit = np.asarray(self.unit, dtype=np.float64)
        if len(self.ids) != len(self.unit):
            raise ValidationError("ids and positions must align")
        self.tree = KdTree(self.unit, leaf_size=self.leaf_size)
        _, dec = unit_to_radec(self.unit) if len(self.unit) else (None, np.empty(0))
        self.zones = zone_of(dec, self.zone_height_deg)

    @classmethod
    def from_radec(cls, ids, ra_deg, dec_deg, **kw) -> "SpatialIndex":
        return cls(np.asarray(ids), radec_to_unit(ra_deg, dec_deg), **kw)

    def region_search(self, region: Region) -> np.ndarray:
        """Ids inside the region; kd pruning, identical to a linear scan."""
        rows = self._region_rows(region)
        return self.ids[rows]

    def _region_rows(self, region: Region) -> np.ndarray:
        if len(self.unit) == 0:
            return np.empty(0, dtype=np.int64)
        tree = self.tree
        out = []
        stack = [0]
        while stack:
            node = stack.pop()
            status = self._classify_node(node, region)
            if status < 0:
                continue
            if status > 0:
                out.append(tree.node_indices(node))
                continue
            if tree.is_leaf(node):
                idx = tree.node_indices(node)
                out.append(idx[region.contains(self.unit[idx])])
            else:
                stack.append(int(tree.node_left[node]))
                stack.append(int(tree.node_right[node]))
        if not out:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(out))

    def _classify_node(self, node: int, region: Region) -> int:
        """-1: no point can match, +1: all points match, 0: undecided."""
        if isinstance(region, Cone):
            lo, hi = self.tree.box_dot_bounds(node, region.center)
            cos_r = np.cos(region.radius)
            if hi < cos_r:
                return -1
            if lo >= cos_r:
                return 1
            return 0
        decided_in = True
        for normal, off in zip(region.normals, region.offsets):
            lo, hi = self.tree.box_dot_bounds(node, normal)
            if hi < off:
                return -1
            if lo < off:
                decided_in = False
        return 1 if decided_in else 0

    def brute_force_region(self, region: Region) -> np.ndarray:
        """Linear-scan oracle for region_search."""
        if len(self.unit) == 0:
            return np.empty(0, dtype=np.int64)
        return self.ids[region.contains(self.unit)]

    def dec_band(self, dec_lo: float, dec_hi: float) -> np.ndarray:
        """Ids with dec in [dec_lo, dec_hi), resolved through the zone table."""
        z_lo = zone_of(dec_lo, self.zone_height_deg)
        z_hi = zone_of(min(dec_hi, 90.0), self.zone_height_deg)
        cand = (self.zones >= z_lo) & (self.zones <= z_hi)
        _, dec = unit_to_radec(self.unit[cand])
        ok = (dec >= dec_lo) & (dec < dec_hi)
        return self.ids[np.flatnonzero(cand)[ok]]

    def within(self, center_unit: np.ndarray, radius_rad: float, counter=None) -> np.ndarray:
        """Row positions (not ids) within radius of a unit vector, inclusive."""
        return self.tree.query_radius(center_unit, chord_for_angle(radius_rad), counter=counter)

    def nearest(self, center_unit: np.ndarray, max_radius_rad: float = np.pi):
        """(row, angle_rad) of nearest indexed point within max_radius, or
        (-1, inf). Ties break to the lower row."""
        row, chord = self.tree.query_nearest(center_unit, chord_for_angle(max_radius_rad))
        if row < 0:
            return -1, np.inf
        return row, angle_for_chord(chord)


# ---------------------------------------------------------------------------
# neighbors join

def neighbors_join(ids, ra_deg, dec_deg, theta_max_arcsec: float,
                   index: SpatialIndex | None = None):
    """Symmetric table of ordered pairs (a, b), a != b, separated by at most
    theta_max (closed boundary). Duplicate positions pair at separation 0.

    Returns (structured array [id_a, id_b, separation_arcsec],
    distance_evaluations).
    """
    if theta_max_arcsec <= 0:
        raise ValidationError("theta_max must be > 0")
    ids = np.asarray(ids, dtype=np.int64)
    if index is None:
        index = SpatialIndex.from_radec(ids, ra_deg, dec_deg)
    theta = np.radians(theta_max_arcsec / ARCSEC_PER_DEG)
    counter = [0]
    out_a, out_b, out_sep = [], [], []
    for row in range(len(ids)):
        hits = index.within(index.unit[row], theta, counter=counter)
        hits = hits[hits != row]
        if not len(hits):
            continue
        sep = angle_between(index.unit[row], index.unit[hits])
        out_a.append(np.full(len(hits), ids[row], dtype=np.int64))
        out_b.append(ids[hits])
        out_sep.append(np.degrees(sep) * ARCSEC_PER_DEG)
    table = np.zeros(sum(map(len, out_a)) if out_a else 0,
                     dtype=[("id_a", "<i8"), ("id_b", "<i8"), ("separation_arcsec", "<f8")])
    if out_a:
        table["id_a"] = np.concatenate(out_a)
        table["id_b"] = np.concatenate(out_b)
        table["separation_arcsec"] = np.concatenate(out_sep)
        table = np.sort(table, order=["id_a", "id_b"])
    return table, counter[0]
