"""Partitioned detection store.

A store is a directory of fixed-width little-endian binary partition files
(`part-NNNN.det`) plus a `manifest.json` with counts, checksums, and index
summaries. Fixed 64-byte records keep sequential-scan rates meaningful and
make the format trivially seekable.
"""

from __future__ import annotations

import json
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import StoreIOError, ValidationError
from . import sphere

SCHEMA_VERSION = 1

DET_DTYPE = np.dtype([
    ("det_id", "<u8"),
    ("pass_id", "<u4"),
    ("mjd", "<f8"),
    ("ra", "<f8"),
    ("dec", "<f8"),
    ("flux", "<f4"),
    ("flux_err", "<f4"),
    ("flags", "<u4"),
    ("zone", "<u4"),
    ("master_id", "<u8"),
    ("pad", "<u4"),
])
RECORD_SIZE = DET_DTYPE.itemsize
assert RECORD_SIZE == 64

FIELD_NAMES = tuple(n for n in DET_DTYPE.names if n != "pad")

MASTER_DTYPE = np.dtype([
    ("master_id", "<u8"),
    ("ra", "<f8"),
    ("dec", "<f8"),
    ("n_detections", "<u4"),
    ("mean_flux", "<f8"),
    ("flux_variance", "<f8"),
    ("first_mjd", "<f8"),
    ("last_mjd", "<f8"),
])

MASTER_CLASSES = ("unclassified", "static", "variable", "transient",
                  "mover-candidate", "defect")


@dataclass
class PartitionInfo:
    name: str
    records: int
    crc32: int
    zone_histogram: dict = field(default_factory=dict)
    mjd_min: float | None = None
    mjd_max: float | None = None


@dataclass
class StoreManifest:
    schema_version: int = SCHEMA_VERSION
    record_size: int = RECORD_SIZE
    total_records: int = 0
    zone_height_deg: float | None = None
    partitions: list = field(default_factory=list)
    creation: dict = field(default_factory=dict)
    load_rate_bytes_per_s: float = 0.0
    index_overhead_fraction: float = 0.0

    def to_json(self) -> str:
        d = asdict(self)
        d["partitions"] = [asdict(p) for p in self.partitions]
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "StoreManifest":
        d = json.loads(text)
        parts = [PartitionInfo(**{**p, "zone_histogram": {int(k): v for k, v in p["zone_histogram"].items()}})
                 for p in d.pop("partitions")]
        m = cls(**d)
        m.partitions = parts
        return m


@dataclass
class ScanStats:
    bytes_read: int = 0
    records_scanned: int = 0
    records_matched: int = 0
    wall_seconds: float = 0.0
    effective_rate: float = 0.0
    workers: int = 1


def _manifest_path(store: Path) -> Path:
    return Path(store) / "manifest.json"


def read_manifest(store) -> StoreManifest:
    path = _manifest_path(Path(store))
    try:
        return StoreManifest.from_json(path.read_text())
    except FileNotFoundError as exc:
        raise StoreIOError(f"no manifest at {path}") from exc


def write_manifest(store, manifest: StoreManifest) -> None:
    _manifest_path(Path(store)).write_text(manifest.to_json())


def validate_records(records: np.ndarray) -> None:
    """Reject malformed input, reporting the first offending record ordinal."""
    if records.dtype != DET_DTYPE:
        raise ValidationError(f"records must use the {RECORD_SIZE}-byte detection layout")
    bad = np.flatnonzero(~(records["flux_err"] > 0))
    if len(bad):
        raise ValidationError(f"record {bad[0]}: flux_err must be > 0")
    bad = np.flatnonzero((records["dec"] < -90) | (records["dec"] > 90))
    if len(bad):
        raise ValidationError(f"record {bad[0]}: dec outside [-90, 90]")
    bad = np.flatnonzero(~np.isfinite(records["ra"]) | ~np.isfinite(records["mjd"]))
    if len(bad):
        raise ValidationError(f"record {bad[0]}: non-finite position or epoch")
    ids, counts = np.unique(records["det_id"], return_counts=True)
    if np.any(counts > 1):
        dup = ids[counts > 1][0]
        ordinal = np.flatnonzero(records["det_id"] == dup)[1]
        raise ValidationError(f"record {ordinal}: duplicate det_id {dup}")


def ingest_detections(records: np.ndarray, partition_count: int, out_dir) -> StoreManifest:
    """Distribute records round-robin (ordered by zone, then det_id) into
    fixed-width partition files and write the manifest."""
    if partition_count < 1:
        raise ValidationError("partition_count must be >= 1")
    records = np.asarray(records)
    validate_records(records)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StoreIOError(f"cannot create store at {out}: {exc}") from exc

    order = np.argsort(records, order=["zone", "det_id"], kind="stable")
    ordered = records[order]
    t0 = time.perf_counter()
    manifest = StoreManifest(total_records=len(records),
                             creation={"partition_count": partition_count})
    for p in range(partition_count):
        chunk = ordered[p::partition_count]
        name = f"part-{p:04d}.det"
        data = chunk.tobytes()
        try:
            (out / name).write_bytes(data)
        except OSError as exc:
            raise StoreIOError(f"cannot write {out / name}: {exc}") from exc
        manifest.partitions.append(PartitionInfo(name=name, records=len(chunk),
                                                 crc32=zlib.crc32(data)))
    wall = time.perf_counter() - t0
    manifest.load_rate_bytes_per_s = (len(records) * RECORD_SIZE / wall) if wall > 0 else 0.0
    write_manifest(out, manifest)
    return manifest


def read_partition(store, info: PartitionInfo, verify: bool = False) -> np.ndarray:
    path = Path(store) / info.name
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise StoreIOError(f"cannot read {path}: {exc}") from exc
    if len(data) != info.records * RECORD_SIZE:
        raise StoreIOError(f"{path}: expected {info.records} records, "
                           f"got {len(data)} bytes")
    if verify and zlib.crc32(data) != info.crc32:
        raise StoreIOError(f"{path}: checksum mismatch")
    return np.frombuffer(data, dtype=DET_DTYPE)


def read_all(store, verify: bool = False) -> np.ndarray:
    manifest = read_manifest(store)
    parts = [read_partition(store, p, verify=verify) for p in manifest.partitions]
    if not parts:
        return np.empty(0, dtype=DET_DTYPE)
    return np.concatenate(parts)


def _write_partition(store, info: PartitionInfo, records: np.ndarray) -> None:
    data = records.tobytes()
    (Path(store) / info.name).write_bytes(data)
    info.records = len(records)
    info.crc32 = zlib.crc32(data)


def build_indexes(store, zone_height_deg: float) -> StoreManifest:
    """Populate the zone field of every record and write per-partition zone
    histograms and epoch ranges into the manifest."""
    if zone_height_deg <= 0:
        raise ValidationError("zone_height must be > 0")
    manifest = read_manifest(store)
    data_bytes = 0
    for info in manifest.partitions:
        recs = read_partition(store, info).copy()
        if len(recs):
            recs["zone"] = sphere.zone_of(recs["dec"], zone_height_deg)
            zones, counts = np.unique(recs["zone"], return_counts=True)
            info.zone_histogram = {int(z): int(c) for z, c in zip(zones, counts)}
            info.mjd_min = float(recs["mjd"].min())
            info.mjd_max = float(recs["mjd"].max())
        else:
            info.zone_histogram = {}
            info.mjd_min = info.mjd_max = None
        _write_partition(store, info, recs)
        data_bytes += len(recs) * RECORD_SIZE
    manifest.zone_height_deg = zone_height_deg
    index_bytes = len(json.dumps([asdict(p) for p in manifest.partitions]))
    manifest.index_overhead_fraction = index_bytes / data_bytes if data_bytes else 0.0
    write_manifest(store, manifest)
    return manifest


# ---------------------------------------------------------------------------
# predicates

_OPS = {
    "<=": np.less_equal,
    ">=": np.greater_equal,
    "==": np.equal,
    "!=": np.not_equal,
    "<": np.less,
    ">": np.greater,
}


class Predicate:
    """Conjunction of comparisons over detection fields, e.g.
    'flux>10 and pass_id<=25'. 'true' and 'false' are accepted literals."""

    def __init__(self, text: str):
        self.text = text.strip()
        self.clauses: list[tuple[str, str, float]] = []
        self.constant: bool | None = None
        body = self.text.lower()
        if body in ("true", ""):
            self.constant = True
            return
        if body == "false":
            self.constant = False
            return
        for term in self.text.split(" and "):
            term = term.strip()
            for op in ("<=", ">=", "==", "!=", "<", ">"):
                if op in term:
                    name, _, value = term.partition(op)
                    name = name.strip()
                    if name not in FIELD_NAMES:
                        raise ValidationError(f"unknown field {name!r} in predicate")
                    try:
                        self.clauses.append((name, op, float(value)))
                    except ValueError as exc:
                        raise ValidationError(f"bad comparison value in {term!r}") from exc
                    break
            else:
                raise ValidationError(f"cannot parse predicate term {term!r}")

    def mask(self, records: np.ndarray) -> np.ndarray:
        if self.constant is not None:
            return np.full(len(records), self.constant, dtype=bool)
        m = np.ones(len(records), dtype=bool)
        for name, op, value in self.clauses:
            m &= _OPS[op](records[name], value)
        return m


# ---------------------------------------------------------------------------
# parallel sequential scan

def _scan_partition(store, info, predicate, region, zone_range):
    recs = read_partition(store, info)
    mask = predicate.mask(recs)
    if region is not None:
        cand = mask.copy()
        if zone_range is not None:
            z_lo, z_hi = zone_range
            cand &= (recs["zone"] >= z_lo) & (recs["zone"] <= z_hi)
        rows = np.flatnonzero(cand)
        if len(rows):
            unit = sphere.radec_to_unit(recs["ra"][rows], recs["dec"][rows])
            inside = region.contains(unit)
            mask = np.zeros(len(recs), dtype=bool)
            mask[rows[inside]] = True
        else:
            mask = np.zeros(len(recs), dtype=bool)
    return recs[mask], len(recs)


def scan(store, predicate: Predicate | str, region=None, workers: int = 1):
    """Full sequential scan with predicate pushdown and optional region
    filter. Results are ordered by (partition, offset) so the output is
    identical regardless of worker count.
    """
    if workers < 1:
        raise ValidationError("workers must be >= 1")
    if isinstance(predicate, str):
        predicate = Predicate(predicate)
    manifest = read_manifest(store)
    zone_range = None
    if region is not None and manifest.zone_height_deg:
        dec_lo, dec_hi = sphere.region_dec_bounds(region)
        zone_range = (int(sphere.zone_of(dec_lo, manifest.zone_height_deg)),
                      int(sphere.zone_of(dec_hi, manifest.zone_height_deg)))
    t0 = time.perf_counter()
    if workers == 1:
        results = [_scan_partition(store, info, predicate, region, zone_range)
                   for info in manifest.partitions]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_scan_partition, store, info, predicate,
                                   region, zone_range)
                       for info in manifest.partitions]
            results = [f.result() for f in futures]
    wall = time.perf_counter() - t0
    matched = (np.concatenate([r for r, _ in results])
               if results else np.empty(0, dtype=DET_DTYPE))
    scanned = sum(n for _, n in results)
    stats = ScanStats(
        bytes_read=scanned * RECORD_SIZE,
        records_scanned=scanned,
        records_matched=len(matched),
        wall_seconds=wall,
        effective_rate=(scanned * RECORD_SIZE / wall) if wall > 0 else 0.0,
        workers=workers,
    )
    return matched, stats


# ---------------------------------------------------------------------------
# master/summary cross-match

class _MasterGrid:
    """Incremental spatial hash over master unit vectors; cell edge equals the
    match chord so a radius query only touches the 27 neighboring cells."""

    def __init__(self, chord: float):
        self.edge = max(chord, 1e-9)
        self.cells: dict[tuple, list] = {}
        self.vecs: list[np.ndarray] = []
        self.keys: list[tuple] = []

    def _key(self, v: np.ndarray) -> tuple:
        return tuple(np.floor(v / self.edge).astype(np.int64))

    def add(self, v: np.ndarray) -> int:
        idx = len(self.vecs)
        self.vecs.append(v)
        key = self._key(v)
        self.keys.append(key)
        self.cells.setdefault(key, []).append(idx)
        return idx

    def update(self, idx: int, v: np.ndarray) -> None:
        self.vecs[idx] = v
        key = self._key(v)
        if key != self.keys[idx]:
            self.cells[self.keys[idx]].remove(idx)
            self.cells.setdefault(key, []).append(idx)
            self.keys[idx] = key

    def nearest_within(self, v: np.ndarray, chord: float) -> int:
        """Index of the nearest master within the chord radius (inclusive);
        equidistant candidates resolve to the lowest index. -1 if none."""
        kx, ky, kz = self._key(v)
        cand = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    cand.extend(self.cells.get((kx + dx, ky + dy, kz + dz), ()))
        if not cand:
            return -1
        cand = np.asarray(sorted(cand), dtype=np.int64)
        pts = np.asarray([self.vecs[i] for i in cand])
        diff = pts - v
        d2 = np.einsum("ij,ij->i", diff, diff)
        best = float(np.min(d2))
        if best > chord * chord:
            return -1
        # equidistant within ~1e-9 rad resolves to the lowest master index
        ties = cand[np.sqrt(d2) <= np.sqrt(best) + 1e-9]
        return int(ties[0])


def build_master(store, match_radius_arcsec: float):
    """Single-pass cross-match: detections in (pass, epoch) order either join
    the nearest existing master within the match radius or found a new one.
    Master positions are running normalized means of member unit vectors.

    Writes `masters.csv` into the store, assigns `master_id` on every record,
    and returns the master table as a structured array.
    """
    if match_radius_arcsec <= 0:
        raise ValidationError("match_radius must be > 0")
    records = read_all(store)
    manifest = read_manifest(store)
    order = np.lexsort((records["det_id"], records["mjd"], records["pass_id"]))
    unit = sphere.radec_to_unit(records["ra"], records["dec"])
    radius_rad = np.radians(match_radius_arcsec / sphere.ARCSEC_PER_DEG)
    chord = sphere.chord_for_angle(radius_rad)

    grid = _MasterGrid(chord)
    sums: list[np.ndarray] = []     # unnormalized member vector sums
    counts: list[int] = []
    flux_sum: list[float] = []
    flux_sq: list[float] = []
    first: list[float] = []
    last: list[float] = []
    assignment = np.zeros(len(records), dtype=np.uint64)

    for row in order:
        v = unit[row]
        m = grid.nearest_within(v, chord)
        if m < 0:
            m = grid.add(v)
            sums.append(v.copy())
            counts.append(0)
            flux_sum.append(0.0)
            flux_sq.append(0.0)
            first.append(np.inf)
            last.append(-np.inf)
        else:
            sums[m] += v
            grid.update(m, sums[m] / np.linalg.norm(sums[m]))
        counts[m] += 1
        f = float(records["flux"][row])
        flux_sum[m] += f
        flux_sq[m] += f * f
        mjd = float(records["mjd"][row])
        first[m] = min(first[m], mjd)
        last[m] = max(last[m], mjd)
        assignment[row] = m + 1  # master_id 0 means unassigned

    n_masters = len(counts)
    masters = np.zeros(n_masters, dtype=MASTER_DTYPE)
    masters["master_id"] = np.arange(1, n_masters + 1)
    if n_masters:
        pos = np.asarray([s / np.linalg.norm(s) for s in sums])
        ra, dec = sphere.unit_to_radec(pos)
        masters["ra"] = ra
        masters["dec"] = dec
        n = np.asarray(counts, dtype=np.float64)
        masters["n_detections"] = counts
        mean = np.asarray(flux_sum) / n
        masters["mean_flux"] = mean
        masters["flux_variance"] = np.maximum(np.asarray(flux_sq) / n - mean ** 2, 0.0)
        masters["first_mjd"] = first
        masters["last_mjd"] = last

    # write assignments back through the partitions
    offset = 0
    for info in manifest.partitions:
        recs = read_partition(store, info).copy()
        # records were concatenated in partition order, so assignment aligns
        recs["master_id"] = assignment[offset:offset + len(recs)]
        _write_partition(store, info, recs)
        offset += len(recs)
    write_manifest(store, manifest)
    write_masters(store, masters)
    return masters, assignment


def write_masters(store, masters: np.ndarray) -> None:
    lines = ["master_id,ra,dec,n_detections,mean_flux,flux_variance,first_mjd,last_mjd"]
    for m in masters:
        lines.append(f"{m['master_id']},{m['ra']:.9f},{m['dec']:.9f},"
                     f"{m['n_detections']},{m['mean_flux']:.6f},{m['flux_variance']:.6f},"
                     f"{m['first_mjd']:.6f},{m['last_mjd']:.6f}")
    (Path(store) / "masters.csv").write_text("\n".join(lines) + "\n")


def read_masters(store) -> np.ndarray:
    path = Path(store) / "masters.csv"
    try:
        text = path.read_text()
    except OSError as exc:
        raise StoreIOError(f"no master table at {path}; run the cross-match first") from exc
    rows = text.strip().splitlines()[1:]
    masters = np.zeros(len(rows), dtype=MASTER_DTYPE)
    for i, row in enumerate(rows):
        vals = row.split(",")
        masters[i] = (int(vals[0]), float(vals[1]), float(vals[2]), int(vals[3]),
                      float(vals[4]), float(vals[5]), float(vals[6]), float(vals[7]))
    return masters


def records_to_csv_lines(records: np.ndarray):
    """Stream detection records as CSV (header first)."""
    yield ",".join(FIELD_NAMES)
    for r in records:
        yield (f"{r['det_id']},{r['pass_id']},{r['mjd']:.6f},{r['ra']:.9f},"
               f"{r['dec']:.9f},{r['flux']:.6f},{r['flux_err']:.6f},{r['flags']},"
               f"{r['zone']},{r['master_id']}")
