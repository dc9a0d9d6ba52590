"""Gaze-centered region extraction: frames in, fixed-size ROI tubes out.

A tube is the timestamp-ordered sequence of W x W windows cropped around
each gaze point. Near frame borders the window is shifted to stay fully
inside the frame instead of padding, so every slice holds real pixels.
"""

from __future__ import annotations

import logging
import math
import re
from bisect import bisect_left
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    GazeOutOfFrame,
    MissingTimestampInName,
    NoFramesFound,
    WindowTooLarge,
)
from .gaze_io import VALID, GazeSample, Pixel2
from .images import read_image

log = logging.getLogger("jva.tubes")

DEFAULT_WINDOW = 400

_FRAME_SUFFIXES = (".png", ".ppm")
_TS_NAME = re.compile(r"^\d+$")


@dataclass(frozen=True)
class Frame:
    timestamp: int
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) uint8, row-major


@dataclass(frozen=True)
class TubeSlice:
    timestamp: int
    window: np.ndarray  # (W, W, 3) uint8
    origin: tuple[int, int]  # top-left of the crop in frame coordinates
    gaze: tuple[float, float]  # the gaze point that centered it


def load_frame(source, timestamp: int | None = None) -> Frame:
    """Load one frame; the filename (zero-padded ns) carries the timestamp.

    A raw byte stream needs an explicit ``timestamp`` since it has no name.
    """
    if timestamp is None:
        name = getattr(source, "name", source)
        stem = Path(str(name)).stem
        if not _TS_NAME.match(stem):
            raise MissingTimestampInName(
                f"frame name {stem!r} is not a nanosecond timestamp"
            )
        timestamp = int(stem)
    pixels = read_image(source)
    h, w = pixels.shape[:2]
    return Frame(timestamp=timestamp, width=w, height=h, pixels=pixels)


def extract_roi(frame: Frame, gaze, window: int = DEFAULT_WINDOW) -> TubeSlice:
    """Crop the window x window region centered on the gaze point.

    The origin is round(gaze - window/2), then shift-clamped so the crop
    lies fully inside the frame; the gaze point always remains inside the
    emitted window.

    Raises
    ------
    GazeOutOfFrame
        Gaze point outside [0,width) x [0,height).
    WindowTooLarge
        window exceeds the frame's smaller dimension.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > min(frame.width, frame.height):
        raise WindowTooLarge(
            f"window {window} exceeds frame {frame.width}x{frame.height}"
        )
    px, py = (gaze.px, gaze.py) if isinstance(gaze, Pixel2) else (gaze[0], gaze[1])
    if not (0 <= px < frame.width and 0 <= py < frame.height):
        raise GazeOutOfFrame(f"gaze ({px}, {py}) outside {frame.width}x{frame.height}")

    x0 = _clamp(int(math.floor(px - window / 2 + 0.5)), 0, frame.width - window)
    y0 = _clamp(int(math.floor(py - window / 2 + 0.5)), 0, frame.height - window)
    crop = frame.pixels[y0 : y0 + window, x0 : x0 + window].copy()
    return TubeSlice(
        timestamp=frame.timestamp, window=crop, origin=(x0, y0), gaze=(px, py)
    )


def scan_frame_dir(directory) -> list[tuple[int, Path]]:
    """List (timestamp, path) for every frame image in a directory, sorted."""
    d = Path(directory)
    entries: list[tuple[int, Path]] = []
    for p in sorted(d.iterdir()) if d.is_dir() else []:
        if p.suffix.lower() not in _FRAME_SUFFIXES:
            continue
        if not _TS_NAME.match(p.stem):
            raise MissingTimestampInName(f"frame file {p.name!r} has no timestamp name")
        entries.append((int(p.stem), p))
    entries.sort(key=lambda e: e[0])
    return entries


def build_tube(
    frames,
    gaze: Sequence[GazeSample],
    window: int = DEFAULT_WINDOW,
    tolerance: int = 0,
    skips: list | None = None,
) -> list[TubeSlice]:
    """Extract one slice per valid gaze sample from matching frames.

    ``frames`` may be a frame directory, an iterable of Frame objects, or
    an iterable of image paths. Each valid gaze sample is matched to the
    nearest frame within ``tolerance`` nanoseconds (0 means exact).
    Skipped samples are logged with reasons; pass ``skips`` to also
    collect them as (timestamp, reason) tuples.

    Raises
    ------
    NoFramesFound
        The frame source yields no frames at all.
    """
    index = _frame_index(frames)
    if not index:
        raise NoFramesFound("no frames in source")
    times = [t for t, _ in index]

    out: list[TubeSlice] = []
    for sample in gaze:
        if sample.validity != VALID:
            _skip(skips, sample.timestamp, f"validity={sample.validity}")
            continue
        if not isinstance(sample.payload, Pixel2):
            raise ValueError(
                f"gaze sample at {sample.timestamp} not projected to pixels"
            )
        pos = _nearest(times, sample.timestamp)
        if abs(times[pos] - sample.timestamp) > tolerance:
            _skip(skips, sample.timestamp, "no frame within tolerance")
            continue
        frame = _materialize(index[pos][1])
        try:
            roi = extract_roi(frame, sample.payload, window)
        except GazeOutOfFrame:
            _skip(skips, sample.timestamp, "gaze out of frame")
            continue
        # Slices are keyed by the gaze timestamp so similarity pairing can
        # look them up from aligned gaze pairs directly.
        out.append(
            TubeSlice(sample.timestamp, roi.window, roi.origin, roi.gaze)
        )

    out.sort(key=lambda s: s.timestamp)
    return out


def _frame_index(frames) -> list[tuple[int, object]]:
    if isinstance(frames, (str, Path)):
        return [(t, p) for t, p in scan_frame_dir(frames)]
    index: list[tuple[int, object]] = []
    for item in frames:
        if isinstance(item, Frame):
            index.append((item.timestamp, item))
        else:
            stem = Path(str(item)).stem
            if not _TS_NAME.match(stem):
                raise MissingTimestampInName(f"frame file {item!r}")
            index.append((int(stem), item))
    index.sort(key=lambda e: e[0])
    return index


def _materialize(entry) -> Frame:
    if isinstance(entry, Frame):
        return entry
    return load_frame(entry)


def _nearest(times: list[int], ts: int) -> int:
    pos = bisect_left(times, ts)
    if pos == 0:
        return 0
    if pos == len(times):
        return len(times) - 1
    return pos if times[pos] - ts < ts - times[pos - 1] else pos - 1


def _skip(skips: list | None, ts: int, reason: str) -> None:
    log.info("skip %d: %s", ts, reason)
    if skips is not None:
        skips.append((ts, reason))


def _clamp(v: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, v))
