"""Time-domain mining: light-curve model fits and classification, the
streaming transient trigger, and moving-object linking in motion-parameter
space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from . import sphere
from .sphere import ARCSEC_PER_DEG


@dataclass
class LightCurve:
    master_id: int
    epochs: np.ndarray
    fluxes: np.ndarray
    flux_errs: np.ndarray

    def __post_init__(self):
        self.epochs = np.asarray(self.epochs, dtype=np.float64)
        self.fluxes = np.asarray(self.fluxes, dtype=np.float64)
        self.flux_errs = np.asarray(self.flux_errs, dtype=np.float64)
        if not (len(self.epochs) == len(self.fluxes) == len(self.flux_errs)):
            raise ValidationError("light-curve arrays must have equal length")
        if len(self.epochs) < 1:
            raise ValidationError("light curve needs at least one point")
        if np.any(np.diff(self.epochs) <= 0):
            raise ValidationError("light-curve epochs must strictly increase")
        if np.any(self.flux_errs <= 0):
            raise ValidationError("flux errors must be > 0")

    def __len__(self):
        return len(self.epochs)


@dataclass
class LightCurveFit:
    chi2_const: float
    dof: int
    mean_flux: float
    best_frequency: float | None
    periodic_power: float
    amplitude_fraction: float
    classification: str


@dataclass(frozen=True)
class Thresholds:
    """Default classification cuts; all tunable via CLI flags."""

    variability_chi2_dof: float = 3.0
    periodic_power: float = 0.5
    transient_sigma: float = 5.0
    transient_min_run: int = 3
    # chains spanning less than this fraction of the survey count as bursts
    transient_span_fraction: float = 0.6
    # tracks faster than this rate (deg/day) get the debris-candidate flag
    debris_rate_cut: float = 1.0


DEFAULT_THRESHOLDS = Thresholds()


def _weighted_constant(lc: LightCurve):
    w = 1.0 / lc.flux_errs ** 2
    mean = float(np.sum(w * lc.fluxes) / np.sum(w))
    chi2 = float(np.sum(w * (lc.fluxes - mean) ** 2))
    return mean, chi2


def periodogram(lc: LightCurve, freqs: np.ndarray):
    """Floating-mean single-sinusoid least-squares power on a frequency grid.

    Power is the fraction of weighted variance explained by the best-fit
    sinusoid at each trial frequency, in [0, 1]. Also returns the fitted
    amplitude per frequency.
    """
    w = 1.0 / lc.flux_errs ** 2
    w = w / np.sum(w)
    t = lc.epochs
    y = lc.fluxes
    ybar = np.sum(w * y)
    yy = np.sum(w * (y - ybar) ** 2)
    if yy <= 0:
        return np.zeros(len(freqs)), np.zeros(len(freqs))
    omega_t = 2.0 * np.pi * freqs[:, None] * t[None, :]
    c = np.cos(omega_t)
    s = np.sin(omega_t)
    cbar = c @ w
    sbar = s @ w
    yc = (c * (w * y)) @ np.ones_like(t) - ybar * cbar
    ys = (s * (w * y)) @ np.ones_like(t) - ybar * sbar
    cc = (c * c) @ w - cbar ** 2
    ss = (s * s) @ w - sbar ** 2
    cs = (c * s) @ w - cbar * sbar
    d = cc * ss - cs ** 2
    safe = np.abs(d) > 1e-15
    power = np.zeros(len(freqs))
    amp = np.zeros(len(freqs))
    a = np.zeros(len(freqs))
    b = np.zeros(len(freqs))
    a[safe] = (yc[safe] * ss[safe] - ys[safe] * cs[safe]) / d[safe]
    b[safe] = (ys[safe] * cc[safe] - yc[safe] * cs[safe]) / d[safe]
    power[safe] = (ss[safe] * yc[safe] ** 2 + cc[safe] * ys[safe] ** 2
                   - 2.0 * cs[safe] * yc[safe] * ys[safe]) / (yy * d[safe])
    amp = np.hypot(a, b)
    return np.clip(power, 0.0, 1.0), amp


def _transient_shape(lc: LightCurve, thresholds: Thresholds) -> bool:
    """True when the significant points form one contiguous run and the rest
    of the series is consistent with zero flux."""
    sig = lc.fluxes > thresholds.transient_sigma * lc.flux_errs
    quiet = np.abs(lc.fluxes) < 2.0 * lc.flux_errs
    if not sig.any() or not (~sig).any():
        return False
    runs = np.flatnonzero(sig)
    contiguous = runs[-1] - runs[0] + 1 == len(runs)
    return bool(contiguous and len(runs) >= thresholds.transient_min_run
                and quiet[~sig].all())


def fit_lightcurve(lc: LightCurve, freq_grid: tuple[float, float, int] = (0.01, 2.0, 4000),
                   thresholds: Thresholds = DEFAULT_THRESHOLDS) -> LightCurveFit:
    """Weighted constant fit plus, for series of 3+ points, a floating-mean
    sinusoid search over a uniform frequency grid."""
    mean, chi2 = _weighted_constant(lc)
    dof = max(len(lc) - 1, 1)
    if len(lc) < 3:
        cls = "static" if chi2 / dof <= thresholds.variability_chi2_dof else "variable"
        return LightCurveFit(chi2, len(lc) - 1, mean, None, 0.0, 0.0, cls)
    f_min, f_max, n_steps = freq_grid
    if not (0 < f_min < f_max and n_steps >= 2):
        raise ValidationError("frequency grid must satisfy 0 < f_min < f_max, n_steps >= 2")
    freqs = np.linspace(f_min, f_max, int(n_steps))
    power, amp = periodogram(lc, freqs)
    best = int(np.argmax(power))
    best_frequency = float(freqs[best])
    periodic_power = float(power[best])
    amplitude_fraction = float(amp[best] / abs(mean)) if mean != 0 else 0.0

    if chi2 / dof <= thresholds.variability_chi2_dof:
        cls = "static"
    elif periodic_power > thresholds.periodic_power:
        cls = "variable"
    elif _transient_shape(lc, thresholds):
        cls = "transient"
    else:
        cls = "variable"
    return LightCurveFit(chi2, len(lc) - 1, mean, best_frequency, periodic_power,
                         amplitude_fraction, cls)


def classify_chain(n_detections: int, flags_any: bool, lc: LightCurve | None,
                   fit: LightCurveFit | None, survey_span_days: float | None = None,
                   thresholds: Thresholds = DEFAULT_THRESHOLDS) -> str:
    """Classify a master's detection chain.

    Single flagged detections are defects; single clean detections are
    mover candidates (nothing else revisits a location exactly once).
    Short contiguous chains against a known survey span are transients;
    everything else falls to the light-curve fit.
    """
    if n_detections == 1:
        return "defect" if flags_any else "mover-candidate"
    if lc is None or fit is None:
        raise ValidationError("multi-detection chains need a light curve and fit")
    if survey_span_days and survey_span_days > 0 and len(lc) >= 2:
        span = float(lc.epochs[-1] - lc.epochs[0])
        if span < thresholds.transient_span_fraction * survey_span_days:
            return "transient"
    if fit.classification == "static":
        return "static"
    return "variable" if fit.classification in ("variable",) else fit.classification


# ---------------------------------------------------------------------------
# streaming transient trigger

@dataclass
class Alert:
    kind: str               # new-source | flux-anomaly
    mjd: float
    ra: float
    dec: float
    flux: float
    deviation_sigmas: float
    nearest_master_id: int  # 0 for new-source alerts

    def csv(self) -> str:
        return (f"{self.kind},{self.mjd:.6f},{self.ra:.9f},{self.dec:.9f},"
                f"{self.flux:.6f},{self.deviation_sigmas:.3f},{self.nearest_master_id}")


ALERT_CSV_HEADER = "kind,mjd,ra,dec,flux,deviation_sigmas,nearest_master_id"


def run_trigger(stream: np.ndarray, masters: np.ndarray, match_radius_arcsec: float,
                k_sigma: float = 5.0) -> list[Alert]:
    """Match a (mjd, zone)-ordered detection stream against the predicted
    master catalog: unmatched positions raise new-source alerts, matched
    detections with flux deviating by more than k_sigma combined errors raise
    flux-anomaly alerts. Output order is input order.
    """
    if match_radius_arcsec <= 0:
        raise ValidationError("match_radius must be > 0")
    keys = np.stack([stream["mjd"], stream["zone"]], axis=1) if len(stream) else None
    if keys is not None:
        prev = keys[:-1]
        nxt = keys[1:]
        bad = (nxt[:, 0] < prev[:, 0]) | ((nxt[:, 0] == prev[:, 0]) & (nxt[:, 1] < prev[:, 1]))
        violations = np.flatnonzero(bad)
        if len(violations):
            raise ValidationError(
                f"stream not ordered by (mjd, zone) at record {violations[0] + 1}")

    det_unit = sphere.radec_to_unit(stream["ra"], stream["dec"])
    master_unit = sphere.radec_to_unit(masters["ra"], masters["dec"])
    cos_limit = np.cos(np.radians(match_radius_arcsec / ARCSEC_PER_DEG))

    alerts: list[Alert] = []
    if len(stream) == 0:
        return alerts
    if len(masters) == 0:
        return [Alert("new-source", float(d["mjd"]), float(d["ra"]), float(d["dec"]),
                      float(d["flux"]), 0.0, 0) for d in stream]

    # chunked dense nearest-neighbor: master tables at desk scale fit in memory
    chunk = max(1, int(4e6 / max(len(masters), 1)))
    for lo in range(0, len(stream), chunk):
        hi = min(lo + chunk, len(stream))
        dots = det_unit[lo:hi] @ master_unit.T
        best = np.argmax(dots, axis=1)
        best_dot = dots[np.arange(hi - lo), best]
        for i in range(hi - lo):
            d = stream[lo + i]
            if best_dot[i] < cos_limit:
                alerts.append(Alert("new-source", float(d["mjd"]), float(d["ra"]),
                                    float(d["dec"]), float(d["flux"]), 0.0, 0))
                continue
            m = masters[best[i]]
            combined = np.sqrt(float(d["flux_err"]) ** 2 + float(m["flux_variance"]))
            if combined <= 0:
                combined = float(d["flux_err"])
            dev = abs(float(d["flux"]) - float(m["mean_flux"])) / combined
            if dev > k_sigma:
                alerts.append(Alert("flux-anomaly", float(d["mjd"]), float(d["ra"]),
                                    float(d["dec"]), float(d["flux"]), float(dev),
                                    int(m["master_id"])))
    return alerts


# ---------------------------------------------------------------------------
# moving-object linking

@dataclass
class MoverTrack:
    track_id: int
    det_ids: np.ndarray
    ref_mjd: float
    ra: float
    dec: float
    rate_deg_day: float
    position_angle_deg: float
    rms_arcsec: float
    debris_candidate: bool = False


def fit_motion(mjds: np.ndarray, unit: np.ndarray):
    """Fit great-circle motion at constant angular rate.

    Returns (predicted unit positions, rate deg/day, position angle deg at the
    first epoch, rms residual arcsec). Exact great-circle constant-rate input
    fits with zero residual.
    """
    mjds = np.asarray(mjds, dtype=np.float64)
    unit = np.asarray(unit, dtype=np.float64)
    # best-fit plane through the origin; full SVD so vt is 3x3 and the last
    # row is the plane normal even for two-point input
    _, _, vt = np.linalg.svd(unit, full_matrices=True)
    normal = vt[-1]
    e1 = unit[0] - (unit[0] @ normal) * normal
    n1 = np.linalg.norm(e1)
    if n1 < 1e-12:
        e1 = np.array([1.0, 0.0, 0.0]) - normal[0] * normal
        e1 /= np.linalg.norm(e1)
    else:
        e1 /= n1
    e2 = np.cross(normal, e1)
    phase = np.unwrap(np.arctan2(unit @ e2, unit @ e1))
    t = mjds - mjds[0]
    if np.ptp(t) > 0:
        omega, phi0 = np.polyfit(t, phase, 1)
    else:
        omega, phi0 = 0.0, float(np.mean(phase))
    pred_phase = phi0 + omega * t
    pred = (np.cos(pred_phase)[:, None] * e1 + np.sin(pred_phase)[:, None] * e2)
    resid = sphere.angle_between(unit, pred)
    rms_arcsec = float(np.sqrt(np.mean(resid ** 2))) * np.degrees(1.0) * ARCSEC_PER_DEG

    p0 = pred[0]
    tangent = omega * (-np.sin(pred_phase[0]) * e1 + np.cos(pred_phase[0]) * e2)
    tn = np.linalg.norm(tangent)
    if tn > 0:
        tangent /= tn
        ra0, dec0 = sphere.unit_to_radec(p0)
        east = np.array([-np.sin(np.radians(ra0)), np.cos(np.radians(ra0)), 0.0])
        north = np.cross(p0, east)
        pa = float(np.degrees(np.arctan2(tangent @ east, tangent @ north))) % 360.0
    else:
        pa = 0.0
    return pred, float(np.degrees(abs(omega))), pa, rms_arcsec


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def link_movers(orphans: np.ndarray, rate_max_deg_day: float,
                residual_max_arcsec: float, min_track_length: int = 3,
                thresholds: Thresholds = DEFAULT_THRESHOLDS) -> list[MoverTrack]:
    """Link unmatched detections into constant-motion tracks.

    Pairs across adjacent passes define (rate, position angle) candidates;
    pairs sharing a detection merge when their motion parameters agree within
    a residual-scaled tolerance; merged candidates are refit on a great
    circle and kept when the rms residual and rate pass the cuts. Tracks are
    disjoint and the result is independent of input order.
    """
    if rate_max_deg_day <= 0 or residual_max_arcsec <= 0:
        raise ValidationError("rate_max and residual_max must be > 0")
    if min_track_length < 2:
        raise ValidationError("min_track_length must be >= 2")
    if len(orphans) == 0:
        return []
    orphans = np.sort(np.asarray(orphans), order=["det_id"])
    unit = sphere.radec_to_unit(orphans["ra"], orphans["dec"])
    passes = np.unique(orphans["pass_id"])
    by_pass = {int(p): np.flatnonzero(orphans["pass_id"] == p) for p in passes}
    residual_deg = residual_max_arcsec / ARCSEC_PER_DEG

    # candidate pairs across adjacent passes
    pair_rows = []
    pair_params = []
    for p_lo, p_hi in zip(passes[:-1], passes[1:]):
        rows_hi = by_pass[int(p_hi)]
        if not len(rows_hi):
            continue
        idx = sphere.SpatialIndex(np.arange(len(rows_hi)), unit[rows_hi])
        for row_a in by_pass[int(p_lo)]:
            dt = None
            hits = None
            mjd_a = orphans["mjd"][row_a]
            dts = orphans["mjd"][rows_hi] - mjd_a
            dt = float(np.min(dts)) if len(dts) else 0.0
            if dt <= 0:
                continue
            max_sep = np.radians(rate_max_deg_day * float(np.max(dts)))
            hits = idx.within(unit[row_a], max_sep)
            for h in hits:
                row_b = int(rows_hi[h])
                dt_ab = float(orphans["mjd"][row_b] - mjd_a)
                if dt_ab <= 0:
                    continue
                sep = float(sphere.angle_between(unit[row_a], unit[row_b]))
                rate = np.degrees(sep) / dt_ab
                if rate > rate_max_deg_day:
                    continue
                # oriented great-circle normal: constant along a track,
                # unlike the coordinate position angle
                normal = np.cross(unit[row_a], unit[row_b])
                nn = np.linalg.norm(normal)
                if nn < 1e-15:
                    continue
                pair_rows.append((row_a, row_b))
                pair_params.append((rate, normal / nn, dt_ab, sep))
    if not pair_rows:
        return []

    # merge pairs that share a detection and have compatible motion
    uf = _UnionFind(len(pair_rows))
    by_det: dict[int, list[int]] = {}
    for k, (a, b) in enumerate(pair_rows):
        by_det.setdefault(a, []).append(k)
        by_det.setdefault(b, []).append(k)
    for shared in by_det.values():
        for i in range(len(shared)):
            for j in range(i + 1, len(shared)):
                ki, kj = shared[i], shared[j]
                r1, n1, dt1, sep1 = pair_params[ki]
                r2, n2, dt2, sep2 = pair_params[kj]
                rate_tol = 4.0 * residual_deg / min(dt1, dt2)
                if abs(r1 - r2) > rate_tol:
                    continue
                # a position jitter of r shifts a pair's plane normal by
                # about r / separation; same orientation required
                tilt_tol = 4.0 * np.radians(residual_deg) / max(min(sep1, sep2), 1e-12)
                if float(n1 @ n2) < np.cos(min(tilt_tol, np.pi / 2)):
                    continue
                uf.union(ki, kj)

    groups: dict[int, set[int]] = {}
    for k, (a, b) in enumerate(pair_rows):
        root = uf.find(k)
        groups.setdefault(root, set()).update((a, b))

    tracks: list[MoverTrack] = []
    used_rows: set[int] = set()
    track_id = 1
    for root in sorted(groups, key=lambda r: min(groups[r])):
        rows = sorted(groups[root] - used_rows)
        if len(rows) < min_track_length:
            continue
        rows_arr = np.asarray(rows)
        order = np.argsort(orphans["mjd"][rows_arr], kind="stable")
        rows_arr = rows_arr[order]
        pred, rate, pa, rms = fit_motion(orphans["mjd"][rows_arr], unit[rows_arr])
        if rms > residual_max_arcsec or rate > rate_max_deg_day:
            continue
        ra0, dec0 = sphere.unit_to_radec(pred[0])
        tracks.append(MoverTrack(
            track_id=track_id,
            det_ids=orphans["det_id"][rows_arr].astype(np.int64),
            ref_mjd=float(orphans["mjd"][rows_arr][0]),
            ra=float(ra0), dec=float(dec0),
            rate_deg_day=rate,
            position_angle_deg=pa,
            rms_arcsec=rms,
            debris_candidate=rate > thresholds.debris_rate_cut,
        ))
        used_rows.update(int(r) for r in rows_arr)
        track_id += 1
    return tracks
