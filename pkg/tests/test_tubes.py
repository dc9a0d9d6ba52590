"""ROI extraction and tube assembly."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jva.errors import (
    DecodeError,
    GazeOutOfFrame,
    MissingTimestampInName,
    NoFramesFound,
    WindowTooLarge,
)
from jva.gaze_io import MISSING, GazeSample, Pixel2
from jva.images import read_image, write_ppm
from jva.tubes import Frame, build_tube, extract_roi, load_frame, scan_frame_dir


def gradient_frame(ts=0, w=64, h=64):
    # Pixel value encodes position, so crops can be checked exactly.
    xs = np.arange(w, dtype=np.uint32)
    ys = np.arange(h, dtype=np.uint32)
    r = (ys[:, None] % 256).astype(np.uint8) * np.ones(w, dtype=np.uint8)
    g = np.ones((h, 1), dtype=np.uint8) * (xs % 256).astype(np.uint8)
    b = np.zeros((h, w), dtype=np.uint8)
    return Frame(ts, w, h, np.stack([r, g, b], axis=-1))


class TestExtractRoi:
    def test_centered_crop(self):
        frame = gradient_frame(w=100, h=100)
        roi = extract_roi(frame, Pixel2(50.0, 50.0), window=10)
        assert roi.origin == (45, 45)
        assert roi.window.shape == (10, 10, 3)
        assert roi.window[0, 0, 0] == 45 and roi.window[0, 0, 1] == 45

    def test_rounding_half_up(self):
        frame = gradient_frame(w=100, h=100)
        # 50 - 11/2 + 0.5 = 45.0 -> floor 45
        assert extract_roi(frame, Pixel2(50.0, 50.0), window=11).origin == (45, 45)
        assert extract_roi(frame, Pixel2(50.4, 50.0), window=10).origin == (45, 45)
        assert extract_roi(frame, Pixel2(50.5, 50.0), window=10).origin == (46, 45)

    def test_border_shift_clamp(self):
        frame = gradient_frame(w=100, h=100)
        lo = extract_roi(frame, Pixel2(0.0, 0.0), window=10)
        assert lo.origin == (0, 0)
        hi = extract_roi(frame, Pixel2(99.9, 99.9), window=10)
        assert hi.origin == (90, 90)

    def test_gaze_stays_inside_window(self):
        frame = gradient_frame(w=50, h=50)
        for px, py in [(0, 0), (49.9, 0), (0, 49.9), (25, 25), (49.9, 49.9)]:
            roi = extract_roi(frame, Pixel2(px, py), window=16)
            x0, y0 = roi.origin
            assert x0 <= px < x0 + 16 and y0 <= py < y0 + 16

    def test_out_of_frame_raises(self):
        frame = gradient_frame()
        for bad in [(-0.1, 0), (0, -0.1), (64.0, 0), (0, 64.0)]:
            with pytest.raises(GazeOutOfFrame):
                extract_roi(frame, Pixel2(*bad), window=8)

    def test_window_too_large(self):
        with pytest.raises(WindowTooLarge):
            extract_roi(gradient_frame(w=64, h=32), Pixel2(1, 1), window=33)

    def test_window_is_a_copy(self):
        frame = gradient_frame()
        roi = extract_roi(frame, Pixel2(10, 10), window=8)
        roi.window[0, 0, 0] = 255
        assert frame.pixels[roi.origin[1], roi.origin[0], 0] != 255

    @given(
        px=st.floats(0, 63.999),
        py=st.floats(0, 63.999),
        window=st.integers(1, 64),
    )
    @settings(max_examples=200)
    def test_containment_property(self, px, py, window):
        frame = gradient_frame()
        roi = extract_roi(frame, Pixel2(px, py), window)
        x0, y0 = roi.origin
        assert 0 <= x0 <= 64 - window and 0 <= y0 <= 64 - window
        assert x0 <= px < x0 + window or window == 64
        assert roi.window.shape == (window, window, 3)
        # Crop content matches the frame at the reported origin.
        assert (roi.window == frame.pixels[y0 : y0 + window, x0 : x0 + window]).all()


class TestFrameFiles:
    def test_ppm_roundtrip(self, tmp_path):
        frame = gradient_frame(ts=123)
        path = tmp_path / "0000000123.ppm"
        write_ppm(path, frame.pixels)
        again = load_frame(path)
        assert again.timestamp == 123
        assert (again.pixels == frame.pixels).all()

    def test_ppm_comment_and_whitespace(self, tmp_path):
        raw = b"P6 # inline\n# full line\n 2\t1 \n255\n" + bytes([1, 2, 3, 4, 5, 6])
        arr = read_image(raw)
        assert arr.shape == (1, 2, 3)
        assert arr[0, 0].tolist() == [1, 2, 3]

    def test_ppm_truncated(self):
        with pytest.raises(DecodeError):
            read_image(b"P6\n4 4\n255\n\x00\x00")

    def test_ppm_bad_maxval(self):
        with pytest.raises(DecodeError):
            read_image(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00")

    def test_name_must_be_timestamp(self, tmp_path):
        path = tmp_path / "frame_one.ppm"
        write_ppm(path, gradient_frame().pixels)
        with pytest.raises(MissingTimestampInName):
            load_frame(path)

    def test_explicit_timestamp_overrides_name(self, tmp_path):
        path = tmp_path / "not_a_ts.ppm"
        write_ppm(path, gradient_frame().pixels)
        assert load_frame(path, timestamp=77).timestamp == 77

    def test_scan_dir_sorted(self, tmp_path):
        for ts in (30, 10, 20):
            write_ppm(tmp_path / f"{ts:010d}.ppm", gradient_frame().pixels)
        (tmp_path / "notes.txt").write_text("ignored")
        assert [t for t, _ in scan_frame_dir(tmp_path)] == [10, 20, 30]


class TestBuildTube:
    def frames(self):
        return [gradient_frame(ts) for ts in (0, 100, 200, 300)]

    def gaze(self, entries):
        return [GazeSample(ts, "A", Pixel2(px, py)) for ts, px, py in entries]

    def test_exact_match_keys_by_gaze_timestamp(self):
        tube = build_tube(self.frames(), self.gaze([(100, 5, 5), (300, 8, 8)]), window=8)
        assert [x.timestamp for x in tube] == [100, 300]

    def test_nearest_within_tolerance(self):
        skips = []
        tube = build_tube(
            self.frames(),
            self.gaze([(104, 5, 5), (180, 5, 5), (260, 5, 5)]),
            window=8,
            tolerance=25,
            skips=skips,
        )
        # 104 -> frame 100, 260 -> nothing within 25, 180 -> frame 200.
        assert [x.timestamp for x in tube] == [104, 180]
        assert skips == [(260, "no frame within tolerance")]

    def test_invalid_and_out_of_frame_skipped(self):
        skips = []
        gaze = [
            GazeSample(0, "A", Pixel2(5, 5), validity=MISSING),
            GazeSample(100, "A", Pixel2(500.0, 5.0)),
            GazeSample(200, "A", Pixel2(5, 5)),
        ]
        tube = build_tube(self.frames(), gaze, window=8, skips=skips)
        assert [x.timestamp for x in tube] == [200]
        assert skips == [(0, "validity=missing"), (100, "gaze out of frame")]

    def test_unprojected_payload_rejected(self):
        from jva.gaze_io import Direction3

        with pytest.raises(ValueError):
            build_tube(self.frames(), [GazeSample(0, "A", Direction3(0, 0, 1))])

    def test_no_frames(self):
        with pytest.raises(NoFramesFound):
            build_tube([], self.gaze([(0, 1, 1)]))

    def test_from_directory(self, tmp_path):
        for ts in (0, 100):
            write_ppm(tmp_path / f"{ts:010d}.ppm", gradient_frame(ts).pixels)
        tube = build_tube(tmp_path, self.gaze([(0, 6, 6), (100, 6, 6)]), window=8)
        assert len(tube) == 2
        assert tube[0].window.shape == (8, 8, 3)
