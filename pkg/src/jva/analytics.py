"""JVA segmentation, epoch-wise K convergence, and report serialization.

Similarity scores strictly above the threshold mark joint-attention
pairs; maximal runs of marked pairs form segments. The session span is
split into equal epochs and each participant's mean K is compared per
epoch: small |mean_K_A - mean_K_B| (convergence) indicates matching
attentional modes.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Sequence

from .embedding import SimilarityTimeline
from .errors import EmptySeries, SerializationError
from .oculomotor import (
    FixationEvent,
    KSeries,
    SaccadeEvent,
    k_series_for,
    mean_k,
)

DEFAULT_THRESHOLD = 0.7
DEFAULT_EPOCHS = 4


@dataclass(frozen=True)
class Segment:
    start_ts: int  # tsA of the first pair in the run
    end_ts: int  # tsA of the last pair in the run
    pair_count: int


@dataclass(frozen=True)
class JvaSegments:
    frame_flags: list[bool]
    segments: list[Segment]
    threshold: float


@dataclass(frozen=True)
class EpochReport:
    epoch_index: int  # 1-based
    start_ts: int
    end_ts: int
    mean_k_a: float | None
    mean_k_b: float | None
    convergence: float | None
    annotation: str | None = None
    k_trace_a: list[float] = field(default_factory=list)
    k_trace_b: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class SessionReport:
    session_id: str
    activity_label: str
    total_pairs: int
    jva_pairs: int
    jva_percentage: float
    threshold: float
    segments: list[Segment]
    epochs: list[EpochReport]
    diagnostics: dict
    config_echo: dict


def detect_jva(
    timeline: SimilarityTimeline, threshold: float = DEFAULT_THRESHOLD
) -> JvaSegments:
    """Flag pairs with score strictly above the threshold and segment runs."""
    if not (-1.0 < threshold <= 1.0):
        raise ValueError(f"threshold must be in (-1, 1], got {threshold}")
    flags = [score > threshold for _, _, score in timeline.entries]
    segments: list[Segment] = []
    run_start: int | None = None
    for i, flagged in enumerate(flags):
        if flagged and run_start is None:
            run_start = i
        elif not flagged and run_start is not None:
            segments.append(_segment(timeline, run_start, i - 1))
            run_start = None
    if run_start is not None:
        segments.append(_segment(timeline, run_start, len(flags) - 1))
    return JvaSegments(frame_flags=flags, segments=segments, threshold=threshold)


def _segment(timeline: SimilarityTimeline, first: int, last: int) -> Segment:
    return Segment(
        start_ts=timeline.entries[first][0],
        end_ts=timeline.entries[last][0],
        pair_count=last - first + 1,
    )


def jva_percentage(segments: JvaSegments, total_pairs: int) -> float:
    """100 * flagged pairs / total pairs; 0 for an empty session."""
    jva_pairs = sum(segments.frame_flags)
    if total_pairs < jva_pairs:
        raise ValueError("total_pairs smaller than flagged pair count")
    if total_pairs == 0:
        return 0.0
    return 100.0 * jva_pairs / total_pairs


def epoch_spans(start: int, end: int, epochs: int) -> list[tuple[int, int]]:
    """Partition [start, end] into equal spans (durations differ <= 1 ns).

    All spans are half-open except the last, which includes the session
    end.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if end < start:
        raise ValueError("end before start")
    total = end - start
    bounds = [start + (k * total) // epochs for k in range(epochs)] + [end]
    return [(bounds[k], bounds[k + 1]) for k in range(epochs)]


def epoch_analysis(
    span: tuple[int, int],
    epochs: int,
    events_a: tuple[Sequence[FixationEvent], Sequence[SaccadeEvent]],
    events_b: tuple[Sequence[FixationEvent], Sequence[SaccadeEvent]],
    scope: str = "epoch",
    segments: JvaSegments | None = None,
    annotations: dict[int, str] | None = None,
) -> list[EpochReport]:
    """Per-epoch mean K for both participants and their convergence.

    ``scope`` is ``epoch`` (all events in the epoch) or ``jva`` (only
    events inside detected JVA segments). A fixation belongs to an epoch
    or segment when its temporal midpoint does. Epochs with fewer than
    two usable fixations report an absent mean, and convergence is
    present only when both means are.
    """
    if scope not in ("epoch", "jva"):
        raise ValueError(f"unknown k scope {scope!r}")
    if scope == "jva" and segments is None:
        raise ValueError("jva scope requires segments")
    spans = epoch_spans(span[0], span[1], epochs)
    reports: list[EpochReport] = []
    for idx, (lo, hi) in enumerate(spans, start=1):
        last = idx == len(spans)
        mean_a, trace_a = _epoch_mean(events_a, lo, hi, last, scope, segments)
        mean_b, trace_b = _epoch_mean(events_b, lo, hi, last, scope, segments)
        conv = abs(mean_a - mean_b) if mean_a is not None and mean_b is not None else None
        reports.append(
            EpochReport(
                epoch_index=idx,
                start_ts=lo,
                end_ts=hi,
                mean_k_a=mean_a,
                mean_k_b=mean_b,
                convergence=conv,
                annotation=(annotations or {}).get(idx),
                k_trace_a=trace_a,
                k_trace_b=trace_b,
            )
        )
    return reports


def _epoch_mean(
    events: tuple[Sequence[FixationEvent], Sequence[SaccadeEvent]],
    lo: int,
    hi: int,
    inclusive_end: bool,
    scope: str,
    segments: JvaSegments | None,
) -> tuple[float | None, list[float]]:
    fixations, saccades = events
    selected = []
    for i, f in enumerate(fixations):
        mid = (f.start + f.end) // 2
        in_epoch = lo <= mid <= hi if inclusive_end else lo <= mid < hi
        if not in_epoch:
            continue
        if scope == "jva" and not _in_segments(mid, segments):
            continue
        selected.append(i)
    if len(selected) < 2:
        return None, []
    series: KSeries = k_series_for(fixations, saccades, selected)
    trace = [k for _, k, _ in series.samples]
    try:
        return mean_k(series), trace
    except EmptySeries:
        return None, []


def _in_segments(ts: int, segments: JvaSegments | None) -> bool:
    if segments is None:
        return False
    return any(s.start_ts <= ts <= s.end_ts for s in segments.segments)


def emit_report(report: SessionReport, format: str = "json") -> bytes:
    """Serialize the report canonically: fixed key order, 6-significant-digit
    reals, LF line endings. Identical reports serialize to identical bytes."""
    if format == "json":
        text = _json_value(_report_dict(report), indent=0) + "\n"
    elif format == "csv":
        text = _report_csv(report)
    else:
        raise SerializationError(f"unknown report format {format!r}")
    return text.encode("utf-8")


def _report_dict(report: SessionReport) -> dict:
    return {
        "session_id": report.session_id,
        "activity_label": report.activity_label,
        "total_pairs": report.total_pairs,
        "jva_pairs": report.jva_pairs,
        "jva_percentage": report.jva_percentage,
        "threshold": report.threshold,
        "segments": [
            {"start_ts": s.start_ts, "end_ts": s.end_ts, "pair_count": s.pair_count}
            for s in report.segments
        ],
        "epochs": [
            {
                "epoch_index": e.epoch_index,
                "start_ts": e.start_ts,
                "end_ts": e.end_ts,
                "mean_k_a": e.mean_k_a,
                "mean_k_b": e.mean_k_b,
                "convergence": e.convergence,
                "annotation": e.annotation,
                "k_trace_a": e.k_trace_a,
                "k_trace_b": e.k_trace_b,
            }
            for e in report.epochs
        ],
        "diagnostics": {
            "skipped_frames": report.diagnostics.get("skipped_frames", 0),
            "unmatched_frames": report.diagnostics.get("unmatched_frames", 0),
        },
        "config_echo": report.config_echo,
    }


def format_real(v: float) -> str:
    """Render a real with 6 significant digits (trailing zeros kept)."""
    if v != v or v in (float("inf"), float("-inf")):
        raise SerializationError(f"non-finite real in report: {v}")
    s = format(v, "#.6g")
    # '#' keeps the decimal point; strip a dangling one ('1.00000e+07' safe).
    if s.endswith("."):
        s += "0"
    return s


def _json_value(value, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        keys = value.keys()
        items = [
            f'{inner}{json.dumps(str(k))}: {_json_value(value[k], indent + 1)}'
            for k in keys
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(value, list):
        if not value:
            return "[]"
        items = [f"{inner}{_json_value(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_real(value)
    return json.dumps(value)


_CSV_HEADER = [
    "row_type", "session_id", "activity_label", "total_pairs", "jva_pairs",
    "jva_percentage", "threshold", "epoch_index", "start_ts", "end_ts",
    "mean_k_a", "mean_k_b", "convergence", "annotation",
]


def _report_csv(report: SessionReport) -> str:
    out = io.StringIO()

    def row(values):
        out.write(",".join(_csv_field(v) for v in values) + "\n")

    row(_CSV_HEADER)
    row([
        "summary", report.session_id, report.activity_label, report.total_pairs,
        report.jva_pairs, report.jva_percentage, report.threshold,
        "", "", "", "", "", "", "",
    ])
    for e in report.epochs:
        row([
            "epoch", report.session_id, "", "", "", "", "",
            e.epoch_index, e.start_ts, e.end_ts,
            e.mean_k_a, e.mean_k_b, e.convergence, e.annotation,
        ])
    return out.getvalue()


def _csv_field(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        return format_real(v)
    s = str(v)
    if any(c in s for c in ",\"\n"):
        s = '"' + s.replace('"', '""') + '"'
    return s
