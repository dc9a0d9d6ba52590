"""Command-line front end.

Subcommands: analyze (full session pipeline to a report), synth
(render a synthetic session), metrics (fixations, saccades, K for one
stream), and score (report vs ground truth). Failures print a single
machine-readable JSON record to stderr and exit nonzero; exit 0 means
the requested output was fully written.
"""

from __future__ import annotations

import argparse
import json
import shlex
import statistics
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from .analytics import (
    DEFAULT_EPOCHS,
    DEFAULT_THRESHOLD,
    Segment,
    SessionReport,
    detect_jva,
    emit_report,
    epoch_analysis,
    jva_percentage,
)
from .embedding import (
    BuiltinBackend,
    ExternalBackend,
    ImportBackend,
    SimilarityTimeline,
    read_embedding_table,
    similarity_timeline,
    write_embedding_table,
)
from .errors import (
    ConfigError,
    InsufficientSamples,
    InvalidSpec,
    JvaError,
    SerializationError,
)
from .gaze_io import (
    VALID,
    Pixel2,
    align_streams,
    load_intrinsics,
    parse_gaze_stream,
    project_stream,
)
from .oculomotor import DetectorParams, coefficient_k, detect_events, events_csv
from .synth import generate_session, load_scenario, load_truth, score_against_truth
from .tubes import DEFAULT_WINDOW, build_tube, scan_frame_dir


@dataclass
class RunConfig:
    gaze_a: str | None = None
    gaze_b: str | None = None
    frames_a: str | None = None
    frames_b: str | None = None
    intrinsics: str | None = None
    window: int = DEFAULT_WINDOW
    threshold: float = DEFAULT_THRESHOLD
    epochs: int = DEFAULT_EPOCHS
    k_scope: str = "epoch"
    backend: str = "builtin"
    external_cmd: list[str] | None = None
    embeddings_a: str | None = None
    embeddings_b: str | None = None
    smooth: int = 1
    align_tolerance_ns: int | None = None
    frame_tolerance_ns: int | None = None
    velocity_threshold: float | None = None
    velocity_unit: str = "auto"
    min_fixation_ms: float = 60.0
    max_gap_ms: float = 75.0
    session_id: str = "session"
    activity_label: str = ""
    annotations: str | None = None


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def build_config(args) -> RunConfig:
    """Merge defaults, config file, and flags (later wins) and validate."""
    merged = {f.name: f.default for f in fields(RunConfig)}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(raw) - _CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        merged.update(raw)
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if isinstance(merged["external_cmd"], str):
        merged["external_cmd"] = shlex.split(merged["external_cmd"])
    cfg = RunConfig(**merged)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    def need_path(label: str, value: str | None, required: bool) -> None:
        if value is None:
            if required:
                raise ConfigError(f"{label} is required")
            return
        if not Path(value).exists():
            raise ConfigError(f"{label} path does not exist: {value}")

    need_path("gaze_a", cfg.gaze_a, True)
    need_path("gaze_b", cfg.gaze_b, True)
    need_path("frames_a", cfg.frames_a, True)
    need_path("frames_b", cfg.frames_b, True)
    need_path("intrinsics", cfg.intrinsics, False)
    need_path("embeddings_a", cfg.embeddings_a, False)
    need_path("embeddings_b", cfg.embeddings_b, False)
    need_path("annotations", cfg.annotations, False)
    if not -1.0 < cfg.threshold <= 1.0:
        raise ConfigError(f"threshold must be in (-1, 1], got {cfg.threshold}")
    if int(cfg.window) != cfg.window or cfg.window < 16:
        raise ConfigError(f"window must be an integer >= 16, got {cfg.window}")
    if int(cfg.epochs) != cfg.epochs or cfg.epochs < 1:
        raise ConfigError(f"epochs must be an integer >= 1, got {cfg.epochs}")
    if cfg.k_scope not in ("jva", "epoch"):
        raise ConfigError(f"k_scope must be jva or epoch, got {cfg.k_scope!r}")
    if cfg.backend not in ("builtin", "import", "external"):
        raise ConfigError(f"unknown backend {cfg.backend!r}")
    if cfg.backend == "import" and not (cfg.embeddings_a and cfg.embeddings_b):
        raise ConfigError("import backend needs embeddings_a and embeddings_b")
    if cfg.backend == "external" and not cfg.external_cmd:
        raise ConfigError("external backend needs external_cmd")
    if int(cfg.smooth) != cfg.smooth or cfg.smooth < 1 or cfg.smooth % 2 == 0:
        raise ConfigError(f"smooth must be an odd integer >= 1, got {cfg.smooth}")
    if cfg.velocity_unit not in ("auto", "deg/s", "px/s", "px/interval"):
        raise ConfigError(f"unknown velocity_unit {cfg.velocity_unit!r}")
    if cfg.min_fixation_ms < 0 or cfg.max_gap_ms <= 0:
        raise ConfigError("min_fixation_ms must be >= 0 and max_gap_ms > 0")
    for label, tol in (
        ("align_tolerance_ns", cfg.align_tolerance_ns),
        ("frame_tolerance_ns", cfg.frame_tolerance_ns),
    ):
        if tol is not None and tol < 0:
            raise ConfigError(f"{label} must be >= 0")


def _config_echo(cfg: RunConfig) -> dict:
    # The echo is itself a valid config file: feeding it back reproduces
    # the report byte for byte. Output destination is deliberately not
    # part of it, so the rerun may write anywhere.
    echo = {name: getattr(cfg, name) for name in sorted(_CONFIG_KEYS)}
    return echo


def _half_median_interval(timestamps: list[int]) -> int:
    diffs = [b - a for a, b in zip(timestamps, timestamps[1:])]
    if not diffs:
        return 0
    return int(statistics.median(diffs)) // 2


def _single_participant(samples, label: str):
    names = {s.participant for s in samples}
    if len(names) > 1:
        raise ConfigError(
            f"{label} holds {len(names)} participants {sorted(names)}; one per file"
        )
    return samples


def _smooth_timeline(timeline: SimilarityTimeline, window: int) -> SimilarityTimeline:
    """Centered moving average over the score sequence."""
    if window <= 1 or not timeline.entries:
        return timeline
    half = (window - 1) // 2
    scores = [s for _, _, s in timeline.entries]
    entries = []
    for i, (ts_a, ts_b, _) in enumerate(timeline.entries):
        lo = max(0, i - half)
        seg = scores[lo : i + half + 1]
        entries.append((ts_a, ts_b, sum(seg) / len(seg)))
    return SimilarityTimeline(
        entries=entries, backend_id=timeline.backend_id, pair_count=len(entries)
    )


def _make_backends(cfg: RunConfig):
    if cfg.backend == "builtin":
        b = BuiltinBackend()
        return b, b
    if cfg.backend == "import":
        return (
            ImportBackend(read_embedding_table(cfg.embeddings_a)),
            ImportBackend(read_embedding_table(cfg.embeddings_b)),
        )
    return (
        ExternalBackend(cfg.external_cmd),
        ExternalBackend(cfg.external_cmd),
    )


def cmd_analyze(args, stage) -> int:
    stage.name = "config"
    cfg = build_config(args)
    annotations = None
    if cfg.annotations:
        try:
            raw = json.loads(Path(cfg.annotations).read_text(encoding="utf-8"))
            annotations = {int(k): str(v) for k, v in raw.items()}
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read annotations: {exc}") from exc

    stage.name = "gaze"
    streams = {}
    for label, path in (("A", cfg.gaze_a), ("B", cfg.gaze_b)):
        samples = _single_participant(
            parse_gaze_stream(Path(path).read_text(encoding="utf-8")), f"gaze_{label}"
        )
        intr = load_intrinsics(Path(cfg.intrinsics).read_text(encoding="utf-8")) if cfg.intrinsics else None
        if intr is not None:
            samples = project_stream(samples, intr)
        elif any(not isinstance(s.payload, Pixel2) for s in samples):
            raise ConfigError(
                f"gaze_{label} holds 3D directions; --intrinsics is required to project them"
            )
        streams[label] = (samples, intr)
    samples_a, intrinsics = streams["A"]
    samples_b, _ = streams["B"]
    valid_a = [s for s in samples_a if s.validity == VALID]
    valid_b = [s for s in samples_b if s.validity == VALID]

    stage.name = "alignment"
    align_tol = cfg.align_tolerance_ns
    if align_tol is None:
        align_tol = _half_median_interval([s.timestamp for s in valid_a])
    pairs = align_streams(valid_a, valid_b, align_tol)

    stage.name = "tubes"
    frame_tol = cfg.frame_tolerance_ns
    if frame_tol is None:
        frame_tol = _half_median_interval([t for t, _ in scan_frame_dir(cfg.frames_a)])
    skips: list = []
    paired_a = [valid_a[p.indexA] for p in pairs]
    paired_b = [valid_b[p.indexB] for p in pairs]
    tube_a = build_tube(cfg.frames_a, paired_a, int(cfg.window), frame_tol, skips)
    tube_b = build_tube(cfg.frames_b, paired_b, int(cfg.window), frame_tol, skips)
    have_a = {s.timestamp for s in tube_a}
    have_b = {s.timestamp for s in tube_b}
    scored_pairs = [p for p in pairs if p.tsA in have_a and p.tsB in have_b]

    stage.name = "similarity"
    backend_a, backend_b = _make_backends(cfg)
    timeline = similarity_timeline(
        tube_a, tube_b, scored_pairs, backend_a, backend_b=backend_b
    )
    timeline = _smooth_timeline(timeline, int(cfg.smooth))
    if args.dump_embeddings:
        dump_dir = Path(args.dump_embeddings)
        dump_dir.mkdir(parents=True, exist_ok=True)
        for name, tube, backend in (
            ("embeddings_a.jvae", tube_a, backend_a),
            ("embeddings_b.jvae", tube_b, backend_b),
        ):
            vecs = backend.embed_tube(tube)
            write_embedding_table(
                dump_dir / name, {t: v.values for t, v in vecs.items()}
            )

    stage.name = "jva"
    segments = detect_jva(timeline, cfg.threshold)
    percentage = jva_percentage(segments, timeline.pair_count)

    stage.name = "events"
    params = DetectorParams(
        velocity_threshold=cfg.velocity_threshold,
        velocity_unit=cfg.velocity_unit,
        min_fixation_ms=cfg.min_fixation_ms,
        max_gap_ms=cfg.max_gap_ms,
    )
    events = {}
    for label, samples in (("A", samples_a), ("B", samples_b)):
        try:
            events[label] = detect_events(samples, params, intrinsics)
        except InsufficientSamples:
            events[label] = ([], [])

    stage.name = "epochs"
    all_ts = [s.timestamp for s in valid_a] + [s.timestamp for s in valid_b]
    span = (min(all_ts), max(all_ts)) if all_ts else (0, 0)
    epochs = epoch_analysis(
        span,
        int(cfg.epochs),
        events["A"],
        events["B"],
        scope=cfg.k_scope,
        segments=segments,
        annotations=annotations,
    )

    stage.name = "report"
    report = SessionReport(
        session_id=cfg.session_id,
        activity_label=cfg.activity_label,
        total_pairs=timeline.pair_count,
        jva_pairs=sum(segments.frame_flags),
        jva_percentage=percentage,
        threshold=cfg.threshold,
        segments=segments.segments,
        epochs=epochs,
        diagnostics={
            "skipped_frames": len(skips),
            "unmatched_frames": (len(valid_a) - len(scored_pairs))
            + (len(valid_b) - len(scored_pairs)),
        },
        config_echo=_config_echo(cfg),
    )
    payload = emit_report(report, args.format)
    try:
        Path(args.out).write_bytes(payload)
    except OSError as exc:
        raise SerializationError(f"cannot write report to {args.out}: {exc}") from exc
    return 0


def cmd_synth(args, stage) -> int:
    stage.name = "scenario"
    spec = load_scenario(args.spec)
    stage.name = "render"
    session = generate_session(spec, args.out)
    print(
        json.dumps(
            {
                "out": str(session.out_dir),
                "frames": len(session.frame_timestamps),
                "shared_fraction": round(session.truth.shared_fraction, 6),
            }
        )
    )
    return 0


def cmd_metrics(args, stage) -> int:
    stage.name = "gaze"
    samples = parse_gaze_stream(Path(args.gaze).read_text(encoding="utf-8"))
    intr = (
        load_intrinsics(Path(args.intrinsics).read_text(encoding="utf-8"))
        if args.intrinsics
        else None
    )
    if intr is not None:
        samples = project_stream(samples, intr)
    elif any(not isinstance(s.payload, Pixel2) for s in samples):
        raise ConfigError("gaze holds 3D directions; --intrinsics is required")

    stage.name = "events"
    params = DetectorParams(
        velocity_threshold=args.velocity_threshold,
        velocity_unit=args.velocity_unit,
        min_fixation_ms=args.min_fixation_ms,
        max_gap_ms=args.max_gap_ms,
    )
    fixations, saccades = detect_events(samples, params, intr)

    stage.name = "report"
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "events.csv").write_text(events_csv(fixations, saccades), encoding="utf-8")
    note = None
    mean = None
    k_lines = ["fixation_index,k,start_ns"]
    try:
        from .oculomotor import mean_k

        series = coefficient_k(fixations, saccades)
        for idx, k, start in series.samples:
            k_lines.append(f"{idx},{format(k, '.6g')},{start}")
        mean = mean_k(series)
    except JvaError as exc:
        note = f"{type(exc).__name__}: {exc}"
    (out_dir / "k_series.csv").write_text("\n".join(k_lines) + "\n", encoding="utf-8")
    print(
        json.dumps(
            {
                "fixations": len(fixations),
                "saccades": len(saccades),
                "mean_k": mean,
                "note": note,
            }
        )
    )
    return 0


def cmd_score(args, stage) -> int:
    stage.name = "report"
    try:
        raw = json.loads(Path(args.report).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report {args.report}: {exc}") from exc
    try:
        view = SessionReport(
            session_id=raw.get("session_id", ""),
            activity_label=raw.get("activity_label", ""),
            total_pairs=int(raw["total_pairs"]),
            jva_pairs=int(raw.get("jva_pairs", 0)),
            jva_percentage=float(raw.get("jva_percentage", 0.0)),
            threshold=float(raw.get("threshold", DEFAULT_THRESHOLD)),
            segments=[
                Segment(int(s["start_ts"]), int(s["end_ts"]), int(s["pair_count"]))
                for s in raw.get("segments", [])
            ],
            epochs=[],
            diagnostics={},
            config_echo={},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"report is missing required fields: {exc}") from exc

    stage.name = "truth"
    truth = load_truth(args.truth)
    stage.name = "score"
    result = score_against_truth(view, truth)
    print(
        json.dumps(
            {
                "precision": result.precision,
                "recall": result.recall,
                "f1": result.f1,
                "flags": list(result.flags),
            }
        )
    )
    return 0


class _Stage:
    name = "startup"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jva",
        description="Dyadic joint visual attention analysis from egocentric video and gaze.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="run the full pipeline and write a report")
    pa.add_argument("--config", help="JSON config file; flags override its entries")
    pa.add_argument("--gaze-a", dest="gaze_a")
    pa.add_argument("--gaze-b", dest="gaze_b")
    pa.add_argument("--frames-a", dest="frames_a")
    pa.add_argument("--frames-b", dest="frames_b")
    pa.add_argument("--intrinsics")
    pa.add_argument("--roi", dest="window", type=int, help="ROI window side, default 400")
    pa.add_argument("--threshold", type=float, help="JVA similarity threshold, default 0.7")
    pa.add_argument("--epochs", type=int, help="epoch count, default 4")
    pa.add_argument("--k-scope", dest="k_scope", choices=["jva", "epoch"])
    pa.add_argument("--backend", choices=["builtin", "import", "external"])
    pa.add_argument("--external-cmd", dest="external_cmd")
    pa.add_argument("--embeddings-a", dest="embeddings_a")
    pa.add_argument("--embeddings-b", dest="embeddings_b")
    pa.add_argument("--smooth", type=int, help="moving-average window in pairs (odd)")
    pa.add_argument("--align-tolerance-ns", dest="align_tolerance_ns", type=int)
    pa.add_argument("--frame-tolerance-ns", dest="frame_tolerance_ns", type=int)
    pa.add_argument("--velocity-threshold", dest="velocity_threshold", type=float)
    pa.add_argument(
        "--velocity-unit",
        dest="velocity_unit",
        choices=["auto", "deg/s", "px/s", "px/interval"],
    )
    pa.add_argument("--min-fixation-ms", dest="min_fixation_ms", type=float)
    pa.add_argument("--max-gap-ms", dest="max_gap_ms", type=float)
    pa.add_argument("--session-id", dest="session_id")
    pa.add_argument("--activity-label", dest="activity_label")
    pa.add_argument("--annotations", help="JSON file mapping epoch index to label")
    pa.add_argument("--dump-embeddings", dest="dump_embeddings")
    pa.add_argument("--out", required=True)
    pa.add_argument("--format", choices=["json", "csv"], default="json")
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("synth", help="generate a synthetic session from a scenario")
    ps.add_argument("spec", help="scenario JSON file")
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_synth)

    pm = sub.add_parser("metrics", help="fixations, saccades, and K for one stream")
    pm.add_argument("--gaze", required=True)
    pm.add_argument("--intrinsics")
    pm.add_argument("--velocity-threshold", dest="velocity_threshold", type=float)
    pm.add_argument(
        "--velocity-unit",
        dest="velocity_unit",
        choices=["auto", "deg/s", "px/s", "px/interval"],
        default="auto",
    )
    pm.add_argument("--min-fixation-ms", dest="min_fixation_ms", type=float, default=60.0)
    pm.add_argument("--max-gap-ms", dest="max_gap_ms", type=float, default=75.0)
    pm.add_argument("--out", required=True, help="directory for events.csv and k_series.csv")
    pm.set_defaults(func=cmd_metrics)

    pc = sub.add_parser("score", help="precision/recall of a report against ground truth")
    pc.add_argument("--report", required=True)
    pc.add_argument("--truth", required=True)
    pc.set_defaults(func=cmd_score)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    stage = _Stage()
    try:
        return args.func(args, stage)
    except JvaError as exc:
        record = {
            "error": type(exc).__name__,
            "stage": stage.name,
            "message": str(exc),
        }
        print(json.dumps(record), file=sys.stderr)
        return 2 if isinstance(exc, (ConfigError, InvalidSpec)) else 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
