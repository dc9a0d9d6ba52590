"""End-to-end command-line behavior for all four subcommands."""

import json
import subprocess
import sys

import pytest

from jva import cli
from jva.embedding import read_embedding_table

MS = 1_000_000

EXTERNAL_EMBEDDER = """
import struct, sys
import numpy as np
w = int(sys.argv[1])
data = sys.stdin.buffer.read()
rec = 8 + w * w * 3
pos = 0
out = sys.stdout.buffer
while pos < len(data):
    (ts,) = struct.unpack_from("<Q", data, pos)
    win = np.frombuffer(data[pos + 8 : pos + rec], dtype=np.uint8).reshape(w, w, 3)
    vec = win.mean(axis=(0, 1)).astype("<f4")
    out.write(struct.pack("<QI", ts, 3) + vec.tobytes())
    pos = rec + pos
out.flush()
"""


def analyze_args(tiny_session, out, extra=()):
    s = tiny_session["session"]
    return [
        "analyze",
        "--gaze-a", str(s.gaze_a),
        "--gaze-b", str(s.gaze_b),
        "--frames-a", str(s.frames_a),
        "--frames-b", str(s.frames_b),
        "--roi", "64",
        "--out", str(out),
        *extra,
    ]


def stderr_record(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return json.loads(err[0])


class TestAnalyze:
    def test_happy_path(self, tiny_session, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = cli.main(analyze_args(tiny_session, out, ["--session-id", "t1"]))
        assert code == 0
        report = json.loads(out.read_text())
        assert list(report) == [
            "session_id", "activity_label", "total_pairs", "jva_pairs",
            "jva_percentage", "threshold", "segments", "epochs",
            "diagnostics", "config_echo",
        ]
        assert report["session_id"] == "t1"
        assert report["total_pairs"] == 20
        assert report["threshold"] == 0.7
        assert len(report["epochs"]) == 4
        assert 0.0 <= report["jva_percentage"] <= 100.0
        assert report["jva_pairs"] == sum(
            s["pair_count"] for s in report["segments"]
        )
        capsys.readouterr()

    def test_config_file_and_flag_precedence(self, tiny_session, tmp_path):
        s = tiny_session["session"]
        cfg = {
            "gaze_a": str(s.gaze_a),
            "gaze_b": str(s.gaze_b),
            "frames_a": str(s.frames_a),
            "frames_b": str(s.frames_b),
            "window": 64,
            "threshold": 0.5,
            "epochs": 2,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "report.json"
        code = cli.main(
            ["analyze", "--config", str(cfg_path), "--threshold", "0.9",
             "--out", str(out)]
        )
        assert code == 0
        report = json.loads(out.read_text())
        # Flag overrides the file; file overrides the default.
        assert report["threshold"] == 0.9
        assert len(report["epochs"]) == 2
        assert report["config_echo"]["window"] == 64

    def test_echo_reproduces_report(self, tiny_session, tmp_path):
        out1 = tmp_path / "r1.json"
        assert cli.main(analyze_args(tiny_session, out1)) == 0
        echo = json.loads(out1.read_text())["config_echo"]
        echo_path = tmp_path / "echo.json"
        echo_path.write_text(json.dumps(echo))
        out2 = tmp_path / "r2.json"
        assert cli.main(["analyze", "--config", str(echo_path), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_csv_format(self, tiny_session, tmp_path):
        out = tmp_path / "report.csv"
        code = cli.main(analyze_args(tiny_session, out, ["--format", "csv"]))
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("row_type,")
        assert lines[1].startswith("summary,")
        assert len(lines) == 2 + 4

    def test_missing_input_exits_2(self, tmp_path, capsys):
        code = cli.main(["analyze", "--out", str(tmp_path / "r.json")])
        assert code == 2
        record = stderr_record(capsys)
        assert record["error"] == "ConfigError"
        assert record["stage"] == "config"
        assert "gaze_a" in record["message"]

    @pytest.mark.parametrize(
        "extra,fragment",
        [
            (["--threshold", "1.5"], "threshold"),
            (["--smooth", "2"], "smooth"),
            (["--epochs", "0"], "epochs"),
            (["--roi", "8"], "window"),
            (["--backend", "import"], "embeddings"),
            (["--backend", "external"], "external_cmd"),
            (["--k-scope", "epoch", "--velocity-unit", "auto",
              "--min-fixation-ms", "-1"], "min_fixation_ms"),
        ],
    )
    def test_invalid_config_exits_2(self, tiny_session, tmp_path, capsys, extra, fragment):
        out = tmp_path / "r.json"
        code = cli.main(analyze_args(tiny_session, out, extra))
        assert code == 2
        record = stderr_record(capsys)
        assert record["error"] == "ConfigError"
        assert fragment in record["message"]
        assert not out.exists()

    def test_unknown_config_key_exits_2(self, tiny_session, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"thresold": 0.7}))
        code = cli.main(
            analyze_args(tiny_session, tmp_path / "r.json", ["--config", str(cfg_path)])
        )
        assert code == 2
        assert "thresold" in stderr_record(capsys)["message"]

    def test_dump_embeddings(self, tiny_session, tmp_path):
        out = tmp_path / "report.json"
        dump = tmp_path / "emb"
        code = cli.main(
            analyze_args(tiny_session, out, ["--dump-embeddings", str(dump)])
        )
        assert code == 0
        for name in ("embeddings_a.jvae", "embeddings_b.jvae"):
            table = read_embedding_table(dump / name)
            assert len(table) == 20
            assert table.dim == 704

    def test_import_backend_round_trip(self, tiny_session, tmp_path):
        out1 = tmp_path / "builtin.json"
        dump = tmp_path / "emb"
        assert cli.main(
            analyze_args(tiny_session, out1, ["--dump-embeddings", str(dump)])
        ) == 0
        out2 = tmp_path / "imported.json"
        code = cli.main(
            analyze_args(
                tiny_session, out2,
                ["--backend", "import",
                 "--embeddings-a", str(dump / "embeddings_a.jvae"),
                 "--embeddings-b", str(dump / "embeddings_b.jvae")],
            )
        )
        assert code == 0
        r1 = json.loads(out1.read_text())
        r2 = json.loads(out2.read_text())
        assert r1["jva_percentage"] == pytest.approx(r2["jva_percentage"], abs=1e-4)
        assert r1["jva_pairs"] == r2["jva_pairs"]

    def test_external_backend(self, tiny_session, tmp_path):
        script = tmp_path / "embed.py"
        script.write_text(EXTERNAL_EMBEDDER)
        out = tmp_path / "report.json"
        cmd = f"{sys.executable} {script} 64"
        code = cli.main(
            analyze_args(tiny_session, out,
                         ["--backend", "external", "--external-cmd", cmd])
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["total_pairs"] == 20
        # Mean-color embeddings of mostly-background views stay similar.
        assert report["jva_percentage"] > 0.0

    def test_annotations_attach(self, tiny_session, tmp_path):
        # Keys are 1-based to match the emitted epoch_index.
        notes = tmp_path / "notes.json"
        notes.write_text(json.dumps({"1": "warmup", "4": "cooldown"}))
        out = tmp_path / "report.json"
        code = cli.main(
            analyze_args(tiny_session, out, ["--annotations", str(notes)])
        )
        assert code == 0
        epochs = json.loads(out.read_text())["epochs"]
        assert epochs[0]["epoch_index"] == 1
        assert epochs[0]["annotation"] == "warmup"
        assert epochs[1]["annotation"] is None
        assert epochs[3]["annotation"] == "cooldown"

    def test_smoothing_changes_timeline(self, tiny_session, tmp_path):
        out1 = tmp_path / "raw.json"
        out2 = tmp_path / "smooth.json"
        assert cli.main(analyze_args(tiny_session, out1)) == 0
        assert cli.main(analyze_args(tiny_session, out2, ["--smooth", "5"])) == 0
        r1 = json.loads(out1.read_text())
        r2 = json.loads(out2.read_text())
        assert r1["total_pairs"] == r2["total_pairs"]
        assert r2["config_echo"]["smooth"] == 5


class TestSynth:
    def test_generates_and_reports(self, tiny_session, tmp_path, capsys):
        code = cli.main(
            ["synth", str(tiny_session["spec_path"]), "--out", str(tmp_path / "s")]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out.strip())
        assert payload["frames"] == 20
        assert payload["shared_fraction"] == pytest.approx(0.5)

    def test_invalid_spec_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"version": 1}))
        code = cli.main(["synth", str(bad), "--out", str(tmp_path / "s")])
        assert code == 2
        record = stderr_record(capsys)
        assert record["error"] == "InvalidSpec"
        assert record["stage"] == "scenario"


def write_pixel_csv(path, rows):
    lines = ["timestamp_ns,participant,dx,dy,dz,px,py"]
    lines += [f"{ts},A,,,,{px},{py}" for ts, px, py in rows]
    path.write_text("\n".join(lines) + "\n")


class TestMetrics:
    def dwell_rows(self):
        rows = []
        ts = 0
        for cx, cy in ((100.0, 100.0), (300.0, 140.0), (120.0, 320.0)):
            for k in range(30):
                rows.append((ts, cx + (k % 3) * 0.5, cy - (k % 2) * 0.5))
                ts += 10 * MS
        return rows

    def test_dwell_stream(self, tmp_path, capsys):
        gaze = tmp_path / "gaze.csv"
        write_pixel_csv(gaze, self.dwell_rows())
        out = tmp_path / "metrics"
        code = cli.main(["metrics", "--gaze", str(gaze), "--out", str(out)])
        assert code == 0
        payload = json.loads(capsys.readouterr().out.strip())
        assert payload["fixations"] == 3
        assert payload["saccades"] == 2
        assert payload["mean_k"] is not None
        assert payload["note"] is None
        events = (out / "events.csv").read_text().splitlines()
        assert events[0].startswith("kind,start_ns,end_ns,")
        assert len(events) == 1 + 3 + 2
        k_lines = (out / "k_series.csv").read_text().splitlines()
        assert k_lines[0] == "fixation_index,k,start_ns"
        assert len(k_lines) == 1 + 2

    def test_single_fixation_notes_too_few(self, tmp_path, capsys):
        gaze = tmp_path / "gaze.csv"
        write_pixel_csv(gaze, [(k * 10 * MS, 50.0, 50.0) for k in range(20)])
        out = tmp_path / "metrics"
        code = cli.main(["metrics", "--gaze", str(gaze), "--out", str(out)])
        assert code == 0
        payload = json.loads(capsys.readouterr().out.strip())
        assert payload["fixations"] == 1
        assert payload["mean_k"] is None
        assert "TooFewEvents" in payload["note"]
        assert (out / "k_series.csv").read_text() == "fixation_index,k,start_ns\n"

    def test_empty_stream_exits_1(self, tmp_path, capsys):
        gaze = tmp_path / "gaze.csv"
        write_pixel_csv(gaze, [])
        code = cli.main(["metrics", "--gaze", str(gaze), "--out", str(tmp_path / "m")])
        assert code == 1
        record = stderr_record(capsys)
        assert record["error"] == "InsufficientSamples"
        assert record["stage"] == "events"


class TestScore:
    def run_analyze(self, tiny_session, tmp_path):
        out = tmp_path / "report.json"
        assert cli.main(analyze_args(tiny_session, out)) == 0
        return out

    def test_scores_own_session(self, tiny_session, tmp_path, capsys):
        report = self.run_analyze(tiny_session, tmp_path)
        truth = tiny_session["session"].truth_path
        code = cli.main(["score", "--report", str(report), "--truth", str(truth)])
        assert code == 0
        payload = json.loads(capsys.readouterr().out.strip())
        assert set(payload) == {"precision", "recall", "f1", "flags"}
        assert 0.0 <= payload["precision"] <= 1.0
        assert 0.0 <= payload["recall"] <= 1.0

    def test_span_mismatch_exits_1(self, tiny_session, tmp_path, capsys):
        report = self.run_analyze(tiny_session, tmp_path)
        truth = tmp_path / "truth.csv"
        truth.write_text("timestamp_ns,shared_flag\n0,1\n")
        code = cli.main(["score", "--report", str(report), "--truth", str(truth)])
        assert code == 1
        record = stderr_record(capsys)
        assert record["error"] == "SpanMismatch"
        assert record["stage"] == "score"

    def test_unreadable_report_exits_2(self, tmp_path, capsys):
        truth = tmp_path / "truth.csv"
        truth.write_text("timestamp_ns,shared_flag\n0,1\n")
        code = cli.main(
            ["score", "--report", str(tmp_path / "nope.json"), "--truth", str(truth)]
        )
        assert code == 2
        assert stderr_record(capsys)["error"] == "ConfigError"


def test_console_entry_point():
    proc = subprocess.run(
        ["jva", "--help"], capture_output=True, text=True, timeout=60
    )
    assert proc.returncode == 0
    for name in ("analyze", "synth", "metrics", "score"):
        assert name in proc.stdout
