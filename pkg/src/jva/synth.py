"""Synthetic dyadic sessions with known joint-attention ground truth.

A scenario script places textured objects on a shared canvas and tells
each participant what to look at over time. Both participants see the
same canvas through slightly offset viewpoints, so frames overlap the
way two head-mounted cameras would. Rendering and gaze are driven by
seeded generators: the same spec and seed always produce byte-identical
output.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidSpec, SpanMismatch
from .gaze_io import GazeSample, Pixel2, write_gaze_csv
from .images import write_ppm

SCENARIO_VERSION = 1
TRUTH_HEADER = ["timestamp_ns", "shared_flag"]

_SPAN_TOL = 1e-9


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    shape: str  # "rect" | "disc"
    size: tuple[int, int]  # rect w,h; disc uses (2r+1, 2r+1)
    radius: int | None
    color: tuple[int, int, int]
    noise_seed: int | None
    noise_grain: int
    noise_amplitude: int
    path: list[tuple[float, tuple[float, float]]]  # (t_s, canvas center)


@dataclass(frozen=True)
class ScriptEntry:
    participant: str
    span: tuple[float, float]
    kind: str  # "target" | "scan" | "wander"
    target: str | None = None
    targets: tuple[str, ...] = ()
    seed: int | None = None
    dwell: tuple[float, float] = (0.4, 0.8)


@dataclass(frozen=True)
class ScenarioSpec:
    session_id: str
    activity_label: str
    duration_s: float
    frame_rate_hz: float
    frame_size: tuple[int, int]
    canvas_margin: int
    background: tuple[int, int, int]
    rng_seed: int
    gaze_jitter_px: float
    viewpoints: dict[str, tuple[int, int]]
    objects: list[ObjectSpec]
    script: list[ScriptEntry]
    emit_frames: bool = True


@dataclass(frozen=True)
class GroundTruth:
    rows: list[tuple[int, bool]]

    @property
    def shared_fraction(self) -> float:
        if not self.rows:
            return 0.0
        return sum(1 for _, f in self.rows if f) / len(self.rows)


@dataclass(frozen=True)
class GeneratedSession:
    out_dir: Path
    frames_a: Path
    frames_b: Path
    gaze_a: Path
    gaze_b: Path
    truth_path: Path
    truth: GroundTruth
    frame_timestamps: list[int]


@dataclass(frozen=True)
class ScoreResult:
    precision: float
    recall: float
    f1: float
    flags: tuple[str, ...] = ()


def load_scenario(source) -> ScenarioSpec:
    """Parse and validate a scenario spec from a dict, JSON text, or path."""
    raw = _load_raw(source)
    if not isinstance(raw, dict):
        raise InvalidSpec("scenario must be a JSON object")
    version = raw.get("version")
    if version != SCENARIO_VERSION:
        raise InvalidSpec(
            f"unsupported scenario version {version!r}, expected {SCENARIO_VERSION}"
        )
    duration = _number(raw, "duration_s")
    if duration <= 0:
        raise InvalidSpec("duration_s must be positive")
    rate = _number(raw, "frame_rate_hz")
    if rate <= 0:
        raise InvalidSpec("frame_rate_hz must be positive")
    size = raw.get("frame_size")
    if isinstance(size, (int, float)):
        size = [size, size]
    if (
        not isinstance(size, list)
        or len(size) != 2
        or any(int(v) != v or v < 16 for v in size)
    ):
        raise InvalidSpec("frame_size must be one or two integers >= 16")
    frame_size = (int(size[0]), int(size[1]))
    margin = int(raw.get("canvas_margin", 0))
    if margin < 0:
        raise InvalidSpec("canvas_margin must be >= 0")
    background = _color(raw.get("background", [0, 0, 0]), "background")
    jitter = float(raw.get("gaze_jitter_px", 0.0))
    if jitter < 0:
        raise InvalidSpec("gaze_jitter_px must be >= 0")
    emit_frames = raw.get("emit_frames", True)
    if not isinstance(emit_frames, bool):
        raise InvalidSpec("emit_frames must be a boolean")

    viewpoints = {}
    for part, off in (raw.get("viewpoints") or {"A": [0, 0], "B": [0, 0]}).items():
        if part not in ("A", "B"):
            raise InvalidSpec(f"viewpoint for unknown participant {part!r}")
        if not isinstance(off, list) or len(off) != 2:
            raise InvalidSpec(f"viewpoint offset for {part} must be [dx, dy]")
        ox, oy = int(off[0]), int(off[1])
        if abs(ox) > margin or abs(oy) > margin:
            raise InvalidSpec(
                f"viewpoint offset {off} for {part} exceeds canvas_margin {margin}"
            )
        viewpoints[part] = (ox, oy)
    viewpoints.setdefault("A", (0, 0))
    viewpoints.setdefault("B", (0, 0))

    canvas_w = frame_size[0] + 2 * margin
    canvas_h = frame_size[1] + 2 * margin
    objects = [
        _object_spec(o, i, duration, canvas_w, canvas_h)
        for i, o in enumerate(raw.get("objects") or [])
    ]
    names = [o.name for o in objects]
    if len(set(names)) != len(names):
        raise InvalidSpec("object names must be unique")
    if not objects:
        raise InvalidSpec("scenario needs at least one object")

    script = [
        _script_entry(e, i, set(names)) for i, e in enumerate(raw.get("script") or [])
    ]
    for part in ("A", "B"):
        _check_cover(
            sorted((e.span for e in script if e.participant == part)), part, duration
        )

    return ScenarioSpec(
        session_id=str(raw.get("session_id", "synthetic")),
        activity_label=str(raw.get("activity_label", "synthetic")),
        duration_s=duration,
        frame_rate_hz=rate,
        frame_size=frame_size,
        canvas_margin=margin,
        background=background,
        rng_seed=int(raw.get("rng_seed", 0)),
        gaze_jitter_px=jitter,
        viewpoints=viewpoints,
        objects=objects,
        script=script,
        emit_frames=emit_frames,
    )


def _load_raw(source):
    if isinstance(source, dict):
        return source
    if isinstance(source, (str, Path)) and "\n" not in str(source) and os.path.exists(source):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"scenario is not valid JSON: {exc}") from exc


def _number(raw: dict, key: str) -> float:
    v = raw.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise InvalidSpec(f"{key} must be a number")
    return float(v)


def _color(value, label: str) -> tuple[int, int, int]:
    if (
        not isinstance(value, list)
        or len(value) != 3
        or any(int(c) != c or not 0 <= c <= 255 for c in value)
    ):
        raise InvalidSpec(f"{label} must be three integers in 0..255")
    return (int(value[0]), int(value[1]), int(value[2]))


def _object_spec(raw, index: int, duration: float, cw: int, ch: int) -> ObjectSpec:
    where = f"objects[{index}]"
    if not isinstance(raw, dict):
        raise InvalidSpec(f"{where} must be an object")
    name = raw.get("name")
    if not name or not isinstance(name, str):
        raise InvalidSpec(f"{where} needs a string name")
    shape = raw.get("shape", "rect")
    radius = None
    if shape == "rect":
        size = raw.get("size")
        if (
            not isinstance(size, list)
            or len(size) != 2
            or any(int(v) != v or v < 1 for v in size)
        ):
            raise InvalidSpec(f"{where} rect needs size [w, h] of positive integers")
        w, h = int(size[0]), int(size[1])
    elif shape == "disc":
        r = raw.get("radius")
        if not isinstance(r, (int, float)) or int(r) != r or r < 1:
            raise InvalidSpec(f"{where} disc needs a positive integer radius")
        radius = int(r)
        w = h = 2 * radius + 1
    else:
        raise InvalidSpec(f"{where} shape must be rect or disc, got {shape!r}")

    color = _color(raw.get("color"), f"{where} color")
    texture = raw.get("texture", "solid")
    noise_seed = None
    grain = 1
    amplitude = 0
    if isinstance(texture, dict):
        noise = texture.get("noise")
        if not isinstance(noise, dict) or "seed" not in noise:
            raise InvalidSpec(f"{where} texture must be 'solid' or {{'noise': {{...}}}}")
        noise_seed = int(noise["seed"])
        grain = int(noise.get("grain", 1))
        amplitude = int(noise.get("amplitude", 48))
        if grain < 1 or not 0 <= amplitude <= 255:
            raise InvalidSpec(f"{where} noise grain must be >= 1, amplitude in 0..255")
    elif texture != "solid":
        raise InvalidSpec(f"{where} texture must be 'solid' or {{'noise': {{...}}}}")

    path_raw = raw.get("path")
    if not isinstance(path_raw, list) or not path_raw:
        raise InvalidSpec(f"{where} needs a non-empty path")
    path: list[tuple[float, tuple[float, float]]] = []
    last_t = None
    for j, wp in enumerate(path_raw):
        if not isinstance(wp, dict) or "pos" not in wp:
            raise InvalidSpec(f"{where} path[{j}] needs t and pos")
        t = float(wp.get("t", 0.0))
        pos = wp["pos"]
        if not isinstance(pos, list) or len(pos) != 2:
            raise InvalidSpec(f"{where} path[{j}] pos must be [x, y]")
        if last_t is not None and t <= last_t:
            raise InvalidSpec(f"{where} path times must be strictly increasing")
        last_t = t
        cx, cy = float(pos[0]), float(pos[1])
        # Extent check at waypoints covers the whole motion: linear
        # interpolation cannot leave the box its endpoints satisfy.
        if not (w / 2 <= cx <= cw - w / 2 and h / 2 <= cy <= ch - h / 2):
            raise InvalidSpec(
                f"{where} leaves the canvas at path[{j}] (center {pos}, size {w}x{h})"
            )
        path.append((t, (cx, cy)))

    return ObjectSpec(
        name=name,
        shape=shape,
        size=(w, h),
        radius=radius,
        color=color,
        noise_seed=noise_seed,
        noise_grain=grain,
        noise_amplitude=amplitude,
        path=path,
    )


def _script_entry(raw, index: int, names: set[str]) -> ScriptEntry:
    where = f"script[{index}]"
    if not isinstance(raw, dict):
        raise InvalidSpec(f"{where} must be an object")
    part = raw.get("participant")
    if part not in ("A", "B"):
        raise InvalidSpec(f"{where} participant must be A or B")
    span = raw.get("span")
    if (
        not isinstance(span, list)
        or len(span) != 2
        or not all(isinstance(v, (int, float)) for v in span)
        or not span[0] < span[1]
    ):
        raise InvalidSpec(f"{where} span must be [t0, t1] with t0 < t1")
    kinds = [k for k in ("target", "scan", "wander") if k in raw]
    if len(kinds) != 1:
        raise InvalidSpec(f"{where} needs exactly one of target, scan, wander")
    kind = kinds[0]
    entry = ScriptEntry(participant=part, span=(float(span[0]), float(span[1])), kind=kind)
    if kind == "target":
        target = raw["target"]
        if target not in names:
            raise InvalidSpec(f"{where} targets unknown object {target!r}")
        return ScriptEntry(**{**entry.__dict__, "target": target})
    body = raw[kind]
    if not isinstance(body, dict) or "seed" not in body:
        raise InvalidSpec(f"{where} {kind} needs a seed")
    seed = int(body["seed"])
    dwell = body.get("dwell", [0.4, 0.8])
    if (
        not isinstance(dwell, list)
        or len(dwell) != 2
        or not 0 < dwell[0] <= dwell[1]
    ):
        raise InvalidSpec(f"{where} dwell must be [min_s, max_s] with 0 < min <= max")
    if kind == "scan":
        targets = tuple(body.get("targets") or sorted(names))
        unknown = [t for t in targets if t not in names]
        if unknown:
            raise InvalidSpec(f"{where} scan lists unknown objects {unknown}")
        return ScriptEntry(
            **{
                **entry.__dict__,
                "targets": targets,
                "seed": seed,
                "dwell": (float(dwell[0]), float(dwell[1])),
            }
        )
    return ScriptEntry(
        **{**entry.__dict__, "seed": seed, "dwell": (float(dwell[0]), float(dwell[1]))}
    )


def _check_cover(spans: list[tuple[float, float]], part: str, duration: float) -> None:
    if not spans:
        raise InvalidSpec(f"participant {part} has no script entries")
    if abs(spans[0][0]) > _SPAN_TOL:
        raise InvalidSpec(f"participant {part} script starts at {spans[0][0]}, not 0")
    cursor = spans[0][1]
    for t0, t1 in spans[1:]:
        if t0 < cursor - _SPAN_TOL:
            raise InvalidSpec(f"participant {part} script spans overlap at {t0}")
        if t0 > cursor + _SPAN_TOL:
            raise InvalidSpec(f"participant {part} script has a gap at {cursor}")
        cursor = t1
    if abs(cursor - duration) > _SPAN_TOL:
        raise InvalidSpec(
            f"participant {part} script ends at {cursor}, not duration {duration}"
        )


def _object_texture(obj: ObjectSpec) -> np.ndarray:
    """Static per-object RGB patch; noise is anchored to the object."""
    w, h = obj.size
    base = np.full((h, w, 3), obj.color, dtype=np.float64)
    if obj.noise_seed is not None:
        rng = np.random.default_rng(obj.noise_seed)
        g = obj.noise_grain
        cells = rng.integers(
            -obj.noise_amplitude,
            obj.noise_amplitude + 1,
            size=(math.ceil(h / g), math.ceil(w / g), 3),
        ).astype(np.float64)
        noise = np.repeat(np.repeat(cells, g, axis=0), g, axis=1)[:h, :w]
        base += noise
    return np.clip(base, 0, 255).astype(np.uint8)


def _object_center(obj: ObjectSpec, t: float) -> tuple[float, float]:
    times = [wp[0] for wp in obj.path]
    xs = [wp[1][0] for wp in obj.path]
    ys = [wp[1][1] for wp in obj.path]
    # np.interp clamps outside the waypoint range, holding the endpoints.
    return float(np.interp(t, times, xs)), float(np.interp(t, times, ys))


def _paint(canvas: np.ndarray, obj: ObjectSpec, texture: np.ndarray, t: float) -> None:
    cx, cy = _object_center(obj, t)
    w, h = obj.size
    x0 = int(round(cx - w / 2))
    y0 = int(round(cy - h / 2))
    x0 = max(0, min(canvas.shape[1] - w, x0))
    y0 = max(0, min(canvas.shape[0] - h, y0))
    region = canvas[y0 : y0 + h, x0 : x0 + w]
    if obj.shape == "disc":
        r = obj.radius
        yy, xx = np.mgrid[0:h, 0:w]
        mask = (xx - w // 2) ** 2 + (yy - h // 2) ** 2 <= r * r
        region[mask] = texture[mask]
    else:
        region[:] = texture


def _expand_targets(
    entries: list[ScriptEntry], frame_times: list[float], rate: float
) -> list[tuple[str | None, tuple[float, float] | None]]:
    """Per-frame (object name, explicit position) for one participant.

    ``target`` and ``scan`` frames carry an object name; ``wander``
    frames carry a canvas-fraction position and no name.
    """
    out: list[tuple[str | None, tuple[float, float] | None]] = [
        (None, None)
    ] * len(frame_times)
    last_span_end = max(e.span[1] for e in entries)
    for entry in entries:
        t0, t1 = entry.span
        frame_ids = [
            i
            for i, t in enumerate(frame_times)
            if t0 - _SPAN_TOL <= t
            and (t < t1 - _SPAN_TOL or (t1 == last_span_end and t <= t1 + _SPAN_TOL))
        ]
        if entry.kind == "target":
            for i in frame_ids:
                out[i] = (entry.target, None)
            continue
        rng = np.random.default_rng(entry.seed)
        if entry.kind == "scan":
            cursor = t0
            prev = None
            while cursor < t1:
                pool = [n for n in entry.targets if n != prev] or list(entry.targets)
                pick = pool[int(rng.integers(0, len(pool)))]
                dwell = float(rng.uniform(entry.dwell[0], entry.dwell[1]))
                for i in frame_ids:
                    if cursor - _SPAN_TOL <= frame_times[i] < cursor + dwell - _SPAN_TOL:
                        out[i] = (pick, None)
                cursor += dwell
                prev = pick
            for i in frame_ids:  # dwell rounding can leave the last frame bare
                if out[i][0] is None:
                    out[i] = (prev, None)
            continue
        cursor = t0
        pos = (float(rng.uniform(0.15, 0.85)), float(rng.uniform(0.15, 0.85)))
        end = cursor + float(rng.uniform(entry.dwell[0], entry.dwell[1]))
        for i in frame_ids:
            while frame_times[i] >= end - _SPAN_TOL:
                pos = (float(rng.uniform(0.15, 0.85)), float(rng.uniform(0.15, 0.85)))
                end += float(rng.uniform(entry.dwell[0], entry.dwell[1]))
            out[i] = (None, pos)
    return out


def generate_session(spec: ScenarioSpec, out_dir) -> GeneratedSession:
    """Render frames, gaze CSVs, and the ground-truth table for a scenario."""
    out = Path(out_dir)
    frames_a = out / "frames_a"
    frames_b = out / "frames_b"
    frames_a.mkdir(parents=True, exist_ok=True)
    frames_b.mkdir(parents=True, exist_ok=True)

    fw, fh = spec.frame_size
    margin = spec.canvas_margin
    n_frames = max(1, round(spec.duration_s * spec.frame_rate_hz))
    frame_times = [k / spec.frame_rate_hz for k in range(n_frames)]
    timestamps = [round(k * 1e9 / spec.frame_rate_hz) for k in range(n_frames)]

    textures = {o.name: _object_texture(o) for o in spec.objects}
    centers = {o.name: o for o in spec.objects}
    plans = {
        part: _expand_targets(
            [e for e in spec.script if e.participant == part],
            frame_times,
            spec.frame_rate_hz,
        )
        for part in ("A", "B")
    }

    jitter_rng = np.random.default_rng(spec.rng_seed)
    gaze: dict[str, list[GazeSample]] = {"A": [], "B": []}
    truth_rows: list[tuple[int, bool]] = []

    for k, (t, ts) in enumerate(zip(frame_times, timestamps)):
        if spec.emit_frames:
            canvas = np.empty((fh + 2 * margin, fw + 2 * margin, 3), dtype=np.uint8)
            canvas[:] = spec.background
            for obj in spec.objects:
                _paint(canvas, obj, textures[obj.name], t)

        name_a = plans["A"][k][0]
        name_b = plans["B"][k][0]
        truth_rows.append((ts, name_a is not None and name_a == name_b))

        for part, frame_dir in (("A", frames_a), ("B", frames_b)):
            ox, oy = spec.viewpoints[part]
            if spec.emit_frames:
                view = canvas[
                    margin + oy : margin + oy + fh, margin + ox : margin + ox + fw
                ]
                write_ppm(frame_dir / f"{ts:019d}.ppm", view)

            name, pos = plans[part][k]
            if name is not None:
                cx, cy = _object_center(centers[name], t)
                px = cx - margin - ox
                py = cy - margin - oy
            else:
                px = pos[0] * (fw - 1)
                py = pos[1] * (fh - 1)
            jx, jy = jitter_rng.normal(0.0, spec.gaze_jitter_px or 1e-12, size=2)
            px = float(min(max(px + jx, 0.0), fw - 1e-6))
            py = float(min(max(py + jy, 0.0), fh - 1e-6))
            gaze[part].append(
                GazeSample(timestamp=ts, participant=part, payload=Pixel2(px, py))
            )

    gaze_a = out / "gaze_a.csv"
    gaze_b = out / "gaze_b.csv"
    gaze_a.write_text(write_gaze_csv(gaze["A"]), encoding="utf-8")
    gaze_b.write_text(write_gaze_csv(gaze["B"]), encoding="utf-8")

    truth_path = out / "truth.csv"
    with open(truth_path, "w", encoding="utf-8", newline="\n") as fh_out:
        fh_out.write(",".join(TRUTH_HEADER) + "\n")
        for ts, flag in truth_rows:
            fh_out.write(f"{ts},{1 if flag else 0}\n")

    return GeneratedSession(
        out_dir=out,
        frames_a=frames_a,
        frames_b=frames_b,
        gaze_a=gaze_a,
        gaze_b=gaze_b,
        truth_path=truth_path,
        truth=GroundTruth(rows=truth_rows),
        frame_timestamps=timestamps,
    )


def load_truth(source) -> GroundTruth:
    """Read a ground-truth table (timestamp_ns,shared_flag)."""
    text = Path(source).read_text(encoding="utf-8") if not hasattr(source, "read") else source.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or [c.strip() for c in lines[0].split(",")] != TRUTH_HEADER:
        raise InvalidSpec(f"truth table must start with header {','.join(TRUTH_HEADER)}")
    rows: list[tuple[int, bool]] = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 2:
            raise InvalidSpec(f"bad truth row: {ln!r}")
        try:
            ts = int(parts[0])
            flag = int(parts[1])
        except ValueError as exc:
            raise InvalidSpec(f"bad truth row: {ln!r}") from exc
        if flag not in (0, 1):
            raise InvalidSpec(f"shared_flag must be 0 or 1, got {parts[1]!r}")
        rows.append((ts, bool(flag)))
    return GroundTruth(rows=rows)


def score_against_truth(report, truth: GroundTruth) -> ScoreResult:
    """Precision/recall/F1 of detected JVA pairs against ground truth.

    The report's pairs must be the truth rows one for one; detected
    positives are the timestamps covered by its segments. Degenerate
    denominators score 0 and raise a flag instead of dividing by zero.
    """
    if report.total_pairs != len(truth.rows):
        raise SpanMismatch(
            f"report covers {report.total_pairs} pairs, truth has {len(truth.rows)} rows"
        )
    bounds = [(s.start_ts, s.end_ts) for s in report.segments]

    def predicted(ts: int) -> bool:
        return any(lo <= ts <= hi for lo, hi in bounds)

    tp = fp = fn = 0
    for ts, actual in truth.rows:
        pred = predicted(ts)
        if pred and actual:
            tp += 1
        elif pred:
            fp += 1
        elif actual:
            fn += 1

    flags: list[str] = []
    if tp + fp == 0:
        precision = 0.0
        flags.append("no_predicted_positives")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.append("no_positive_truth")
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return ScoreResult(precision=precision, recall=recall, f1=f1, flags=tuple(flags))
