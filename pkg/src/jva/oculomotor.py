"""Fixation/saccade detection (I-VT) and the ambient-focal coefficient K.

K contrasts each fixation's duration with the amplitude of the saccade
that follows it, both as z-scores over the analysis window:

    K_i = (d_i - mean_d) / std_d  -  (a_{i+1} - mean_a) / std_a

Positive K indicates focal scanning (long dwells, short shifts), negative
K ambient scanning. Standard deviations are population (1/n) statistics;
a zero-variance term contributes 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    EmptySeries,
    InsufficientSamples,
    MixedUnits,
    TooFewEvents,
)
from .gaze_io import VALID, CameraIntrinsics, GazeSample, Pixel2

DEG_PER_SEC_DEFAULT = 30.0
PX_PER_INTERVAL_DEFAULT = 50.0


@dataclass(frozen=True)
class DetectorParams:
    """I-VT parameters.

    velocity_threshold semantics follow ``velocity_unit``:
      * "auto" (default): 30 deg/s when intrinsics are available, else
        50 px per median sample interval.
      * "deg/s", "px/s": the threshold value is used as-is.
      * "px/interval": pixels per median sample interval.
    """

    velocity_threshold: float | None = None
    velocity_unit: str = "auto"
    min_fixation_ms: float = 60.0
    max_gap_ms: float = 75.0


@dataclass(frozen=True)
class FixationEvent:
    start: int
    end: int
    duration_ms: float
    centroid: tuple[float, float]


@dataclass(frozen=True)
class SaccadeEvent:
    start: int
    end: int
    amplitude: float
    unit: str  # "deg" or "px"
    from_fixation: int
    to_fixation: int


@dataclass(frozen=True)
class WindowStats:
    mu_d: float
    sigma_d: float
    mu_a: float
    sigma_a: float
    n: int


@dataclass(frozen=True)
class KSeries:
    samples: list[tuple[int, float, int]]  # (fixation index, K, fixation start ns)
    window_stats: WindowStats


def detect_events(
    gaze: Sequence[GazeSample],
    params: DetectorParams = DetectorParams(),
    intrinsics: CameraIntrinsics | None = None,
) -> tuple[list[FixationEvent], list[SaccadeEvent]]:
    """Classify a pixel gaze stream into fixations and saccades (I-VT).

    Point-to-point velocity below the threshold links samples into a
    fixation cluster; above it starts a saccade. Sample gaps longer than
    max_gap_ms always break clusters. Clusters shorter than
    min_fixation_ms are discarded. One saccade connects each surviving
    fixation to the next; its amplitude is the centroid distance, in
    degrees of visual angle when intrinsics are given, else pixels.

    Raises
    ------
    InsufficientSamples
        Fewer than two valid Pixel2 samples.
    """
    pts: list[tuple[int, float, float]] = []
    for s in gaze:
        if s.validity != VALID or not isinstance(s.payload, Pixel2):
            continue
        pts.append((s.timestamp, s.payload.px, s.payload.py))
    if len(pts) < 2:
        raise InsufficientSamples(f"need >= 2 valid samples, got {len(pts)}")
    for (t0, *_), (t1, *_) in zip(pts, pts[1:]):
        if t1 <= t0:
            raise ValueError("timestamps must strictly increase")

    times = np.array([p[0] for p in pts], dtype=np.int64)
    xs = np.array([p[1] for p in pts])
    ys = np.array([p[2] for p in pts])

    dt_s = np.diff(times) / 1e9
    if intrinsics is not None:
        step = _angle_deg(
            _rays(xs[:-1], ys[:-1], intrinsics), _rays(xs[1:], ys[1:], intrinsics)
        )
        unit = "deg"
    else:
        step = np.hypot(np.diff(xs), np.diff(ys))
        unit = "px"
    velocity = step / dt_s

    threshold = _resolve_threshold(params, intrinsics, dt_s)
    gap_break = (np.diff(times) / 1e6) > params.max_gap_ms
    fix_link = (velocity < threshold) & ~gap_break

    fixations: list[FixationEvent] = []
    i = 0
    n = len(pts)
    while i < n:
        j = i
        while j + 1 < n and fix_link[j]:
            j += 1
        if j > i:
            start, end = int(times[i]), int(times[j])
            duration_ms = (end - start) / 1e6
            if duration_ms >= params.min_fixation_ms:
                centroid = (float(xs[i : j + 1].mean()), float(ys[i : j + 1].mean()))
                fixations.append(FixationEvent(start, end, duration_ms, centroid))
            i = j + 1
        else:
            i += 1

    saccades: list[SaccadeEvent] = []
    for k in range(len(fixations) - 1):
        a, b = fixations[k], fixations[k + 1]
        if intrinsics is not None:
            amp = float(
                _angle_deg(
                    _rays(np.array([a.centroid[0]]), np.array([a.centroid[1]]), intrinsics),
                    _rays(np.array([b.centroid[0]]), np.array([b.centroid[1]]), intrinsics),
                )[0]
            )
        else:
            amp = math.hypot(
                b.centroid[0] - a.centroid[0], b.centroid[1] - a.centroid[1]
            )
        saccades.append(
            SaccadeEvent(
                start=a.end,
                end=b.start,
                amplitude=amp,
                unit=unit,
                from_fixation=k,
                to_fixation=k + 1,
            )
        )
    return fixations, saccades


def _resolve_threshold(
    params: DetectorParams, intrinsics: CameraIntrinsics | None, dt_s: np.ndarray
) -> float:
    unit = params.velocity_unit
    if unit == "auto":
        if intrinsics is not None:
            return params.velocity_threshold or DEG_PER_SEC_DEFAULT
        value = params.velocity_threshold or PX_PER_INTERVAL_DEFAULT
        return value / float(np.median(dt_s))
    if unit in ("deg/s", "px/s"):
        if params.velocity_threshold is None:
            raise ValueError(f"velocity_threshold required for unit {unit!r}")
        expects_deg = unit == "deg/s"
        if expects_deg != (intrinsics is not None):
            raise MixedUnits(
                f"threshold unit {unit!r} inconsistent with intrinsics presence"
            )
        return params.velocity_threshold
    if unit == "px/interval":
        if intrinsics is not None:
            raise MixedUnits("px/interval threshold with intrinsics present")
        value = params.velocity_threshold
        if value is None:
            raise ValueError("velocity_threshold required for unit 'px/interval'")
        return value / float(np.median(dt_s))
    raise ValueError(f"unknown velocity_unit {unit!r}")


def _rays(px: np.ndarray, py: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    r = np.stack([(px - k.cx) / k.fx, (py - k.cy) / k.fy, np.ones_like(px)], axis=-1)
    return r / np.linalg.norm(r, axis=-1, keepdims=True)


def _angle_deg(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    cos = np.clip(np.sum(r1 * r2, axis=-1), -1.0, 1.0)
    return np.degrees(np.arccos(cos))


def coefficient_k(
    fixations: Sequence[FixationEvent], saccades: Sequence[SaccadeEvent]
) -> KSeries:
    """Compute K for every fixation with a following saccade.

    Requires len(saccades) == len(fixations) - 1 (saccade i connects
    fixation i to i+1). Statistics are population moments over exactly
    the events given.

    Raises
    ------
    TooFewEvents
        Fewer than two fixations.
    MixedUnits
        Saccade amplitudes in differing units.
    """
    n = len(fixations)
    if n < 2:
        raise TooFewEvents(f"need >= 2 fixations, got {n}")
    if len(saccades) != n - 1:
        raise ValueError(
            f"expected {n - 1} saccades for {n} fixations, got {len(saccades)}"
        )
    return k_series_for(fixations, saccades, range(n))


def k_series_for(
    fixations: Sequence[FixationEvent],
    saccades: Sequence[SaccadeEvent],
    indices,
) -> KSeries:
    """K over a selected subset of fixation indices.

    The window statistics cover exactly the selected fixations and the
    saccades connecting consecutive selected pairs; K samples exist for
    each selected fixation whose successor is also selected. This is the
    general form behind both whole-window K and scope-restricted epochs.
    """
    sel = sorted(set(int(i) for i in indices))
    sel_set = set(sel)
    durations = np.array([fixations[i].duration_ms for i in sel])
    pair_idx = [i for i in sel if i + 1 in sel_set and i < len(saccades)]
    units = {saccades[i].unit for i in pair_idx}
    if len(units) > 1:
        raise MixedUnits(f"saccade amplitudes mix units {sorted(units)}")
    amplitudes = np.array([saccades[i].amplitude for i in pair_idx])

    mu_d = float(durations.mean()) if durations.size else 0.0
    sigma_d = float(durations.std()) if durations.size else 0.0
    mu_a = float(amplitudes.mean()) if amplitudes.size else 0.0
    sigma_a = float(amplitudes.std()) if amplitudes.size else 0.0

    samples: list[tuple[int, float, int]] = []
    for i in pair_idx:
        zd = (fixations[i].duration_ms - mu_d) / sigma_d if sigma_d > 0 else 0.0
        za = (saccades[i].amplitude - mu_a) / sigma_a if sigma_a > 0 else 0.0
        samples.append((i, float(zd - za), fixations[i].start))
    return KSeries(
        samples=samples,
        window_stats=WindowStats(mu_d, sigma_d, mu_a, sigma_a, len(sel)),
    )


def mean_k(series: KSeries) -> float:
    """Arithmetic mean of the K samples; positive leans focal, negative ambient."""
    if not series.samples:
        raise EmptySeries("no K samples")
    return float(np.mean([k for _, k, _ in series.samples]))


def events_csv(
    fixations: Sequence[FixationEvent], saccades: Sequence[SaccadeEvent]
) -> str:
    """Diagnostic dump: kind,start_ns,end_ns,duration_ms,amplitude,unit,centroid_x,centroid_y."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(
        ["kind", "start_ns", "end_ns", "duration_ms", "amplitude", "unit",
         "centroid_x", "centroid_y"]
    )
    events: list[tuple[int, list]] = []
    for f in fixations:
        events.append(
            (f.start, ["fixation", f.start, f.end, _fmt(f.duration_ms), "", "",
                       _fmt(f.centroid[0]), _fmt(f.centroid[1])])
        )
    for s in saccades:
        events.append(
            (s.start, ["saccade", s.start, s.end, _fmt((s.end - s.start) / 1e6),
                       _fmt(s.amplitude), s.unit, "", ""])
        )
    for _, row in sorted(events, key=lambda e: (e[0], e[1][0])):
        w.writerow(row)
    return out.getvalue()


def _fmt(v: float) -> str:
    return format(v, ".6g")
