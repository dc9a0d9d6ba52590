"""Gaze stream ingestion, pinhole projection, and cross-stream time alignment.

Timestamps are integer nanoseconds since session start everywhere; keeping
them integral makes alignment exact and avoids float drift over long
recordings.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .errors import (
    MalformedRow,
    NonMonotonicTimestamp,
    UnknownFormat,
)

VALID = "valid"
MISSING = "missing"
OUT_OF_FRAME = "out_of_frame"

GAZE_CSV_HEADER = ["timestamp_ns", "participant", "dx", "dy", "dz", "px", "py"]


@dataclass(frozen=True)
class Direction3:
    """Camera-frame gaze direction; dz is the optical-axis component."""

    dx: float
    dy: float
    dz: float


@dataclass(frozen=True)
class Pixel2:
    px: float
    py: float


@dataclass(frozen=True)
class GazeSample:
    timestamp: int
    participant: str
    payload: Direction3 | Pixel2
    validity: str = VALID


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the frame")


@dataclass(frozen=True)
class AlignedPair:
    tsA: int
    tsB: int
    skew: int
    indexA: int
    indexB: int


def load_intrinsics(source) -> CameraIntrinsics:
    """Read a flat key-value intrinsics file (keys fx, fy, cx, cy, width, height)."""
    text = _as_text(source)
    values: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        if not _:
            key, _, value = line.partition(":")
        if not value:
            raise UnknownFormat(f"intrinsics line not key=value: {line!r}")
        values[key.strip()] = value.strip()
    try:
        return CameraIntrinsics(
            fx=float(values["fx"]),
            fy=float(values["fy"]),
            cx=float(values["cx"]),
            cy=float(values["cy"]),
            width=int(values["width"]),
            height=int(values["height"]),
        )
    except KeyError as exc:
        raise UnknownFormat(f"intrinsics file missing key {exc}") from exc


def parse_gaze_stream(source, format: str = "csv") -> list[GazeSample]:
    """Parse a gaze CSV into samples sorted by timestamp.

    The schema is ``timestamp_ns,participant,dx,dy,dz,px,py`` with a header
    row; each data row populates exactly one of (dx,dy,dz) or (px,py).
    Timestamps must strictly increase within each participant's stream.

    Raises
    ------
    MalformedRow
        Schema violation, with the 1-based line number.
    NonMonotonicTimestamp
        Duplicate or decreasing timestamp within one participant.
    UnknownFormat
        Unsupported ``format`` or wrong header.
    """
    if format != "csv":
        raise UnknownFormat(f"unsupported gaze format: {format!r}")
    text = _as_text(source)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise UnknownFormat("empty gaze stream (header required)") from None
    if [h.strip() for h in header] != GAZE_CSV_HEADER:
        raise UnknownFormat(f"unexpected gaze CSV header: {header}")

    samples: list[GazeSample] = []
    last_ts: dict[str, int] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 7:
            raise MalformedRow(line_no, f"expected 7 fields, got {len(row)}")
        ts_str, participant = row[0].strip(), row[1].strip()
        dir_fields = [f.strip() for f in row[2:5]]
        pix_fields = [f.strip() for f in row[5:7]]
        try:
            timestamp = int(ts_str)
        except ValueError:
            raise MalformedRow(line_no, f"bad timestamp {ts_str!r}") from None
        if timestamp < 0:
            raise MalformedRow(line_no, "negative timestamp")
        if not participant:
            raise MalformedRow(line_no, "empty participant")

        has_dir = any(dir_fields)
        has_pix = any(pix_fields)
        if has_dir == has_pix:
            raise MalformedRow(
                line_no, "exactly one of (dx,dy,dz) or (px,py) must be populated"
            )
        try:
            if has_dir:
                if not all(dir_fields):
                    raise MalformedRow(line_no, "incomplete direction (dx,dy,dz)")
                payload: Direction3 | Pixel2 = Direction3(*map(float, dir_fields))
            else:
                if not all(pix_fields):
                    raise MalformedRow(line_no, "incomplete pixel point (px,py)")
                payload = Pixel2(*map(float, pix_fields))
        except ValueError:
            raise MalformedRow(line_no, "non-numeric coordinate") from None

        prev = last_ts.get(participant)
        if prev is not None and timestamp <= prev:
            raise NonMonotonicTimestamp(line_no)
        last_ts[participant] = timestamp
        samples.append(GazeSample(timestamp, participant, payload))

    samples.sort(key=lambda s: s.timestamp)
    return samples


def write_gaze_csv(samples: Iterable[GazeSample]) -> str:
    """Inverse of parse_gaze_stream; used by the synthetic generator."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(GAZE_CSV_HEADER)
    for s in samples:
        if isinstance(s.payload, Direction3):
            row = [s.timestamp, s.participant, repr(float(s.payload.dx)),
                   repr(float(s.payload.dy)), repr(float(s.payload.dz)), "", ""]
        else:
            row = [s.timestamp, s.participant, "", "", "",
                   repr(float(s.payload.px)), repr(float(s.payload.py))]
        writer.writerow(row)
    return out.getvalue()


def project_gaze(sample: GazeSample, intrinsics: CameraIntrinsics) -> GazeSample:
    """Project a 3D gaze direction to 2D pixels with the pinhole model.

    px = fx * dx/dz + cx and py = fy * dy/dz + cy. Directions pointing
    behind the camera (dz <= 0) mark the sample ``missing`` rather than
    raising; projections landing outside the frame are kept but marked
    ``out_of_frame``. Pixel2 payloads pass through unchanged.
    """
    if isinstance(sample.payload, Pixel2):
        return sample
    d = sample.payload
    if d.dz <= 0:
        return replace(sample, validity=MISSING)
    px = intrinsics.fx * (d.dx / d.dz) + intrinsics.cx
    py = intrinsics.fy * (d.dy / d.dz) + intrinsics.cy
    inside = 0 <= px < intrinsics.width and 0 <= py < intrinsics.height
    validity = VALID if inside else OUT_OF_FRAME
    if not math.isfinite(px) or not math.isfinite(py):
        return replace(sample, validity=MISSING)
    return replace(sample, payload=Pixel2(px, py), validity=validity)


def project_stream(
    samples: Iterable[GazeSample], intrinsics: CameraIntrinsics
) -> list[GazeSample]:
    return [project_gaze(s, intrinsics) for s in samples]


def _pair_key(ts_a: int, ts_b: int, idx_a: int, idx_b: int):
    # Symmetric under swapping the streams so that align(a, b) and
    # align(b, a) pick identical pair sets (transposed).
    skew = abs(ts_a - ts_b)
    return (skew, min(ts_a, ts_b), max(ts_a, ts_b), min(idx_a, idx_b), max(idx_a, idx_b))


def align_streams(
    a: Sequence[GazeSample], b: Sequence[GazeSample], tolerance: int
) -> list[AlignedPair]:
    """Greedily pair the two streams by closest timestamps within tolerance.

    Candidate pairs are taken smallest skew first (ties broken on
    timestamps, then stream indices), each sample used at most once.
    Samples whose validity is not ``valid`` are excluded before matching.
    Index fields refer to positions in the lists passed in.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    a_idx = [(i, s.timestamp) for i, s in enumerate(a) if s.validity == VALID]
    b_idx = [(j, s.timestamp) for j, s in enumerate(b) if s.validity == VALID]
    if not a_idx or not b_idx:
        return []

    b_times = [ts for _, ts in b_idx]
    candidates: list[tuple[tuple, int, int, int, int]] = []
    for i, ts_a in a_idx:
        lo = bisect.bisect_left(b_times, ts_a - tolerance)
        hi = bisect.bisect_right(b_times, ts_a + tolerance)
        for k in range(lo, hi):
            j, ts_b = b_idx[k]
            candidates.append((_pair_key(ts_a, ts_b, i, j), i, j, ts_a, ts_b))

    candidates.sort(key=lambda c: c[0])
    used_a: set[int] = set()
    used_b: set[int] = set()
    pairs: list[AlignedPair] = []
    for _, i, j, ts_a, ts_b in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append(AlignedPair(ts_a, ts_b, abs(ts_a - ts_b), i, j))

    pairs.sort(key=lambda p: (p.tsA, p.tsB))
    return pairs


def _as_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data
