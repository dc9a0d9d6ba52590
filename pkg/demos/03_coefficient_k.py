"""
Fixations, saccades, and the ambient-focal coefficient K
========================================================

A gaze stream alternates between dwelling on a spot (fixation) and
jumping to the next one (saccade). The coefficient K contrasts each
fixation's duration with the following saccade's amplitude, both as
z-scores over the analysis window:

    K_i = z(duration_i) - z(amplitude_i)

Positive K means long dwells with short jumps (focal scrutiny),
negative K means brief dwells with long jumps (ambient scanning). The
z-scores make K relative: a recording that is uniformly focal scores
near zero, and the statistic becomes informative when one window spans
both kinds of behavior.
"""

import numpy as np

from jva import DetectorParams, coefficient_k, detect_events, mean_k
from jva.gaze_io import VALID, GazeSample, Pixel2

MS = 1_000_000
rng = np.random.default_rng(17)


def dwell_stream(spots, dwell_ms, start_ns=0):
    """Samples every 10 ms, resting on each spot in turn with 1px jitter."""
    samples, ts = [], start_ns
    for (x, y), dwell in zip(spots, dwell_ms):
        for _ in range(int(dwell // 10)):
            jx, jy = rng.normal(0, 1.0, 2)
            samples.append(GazeSample(ts, "A", Pixel2(x + jx, y + jy), VALID))
            ts += 10 * MS
    return samples


# One recording, two phases. First the viewer inspects a small cluster
# of nearby spots with long dwells, then sweeps the corners of the
# scene with quick glances.
focal_phase = dwell_stream(
    [(200, 200), (230, 210), (215, 240), (240, 235)], [900, 800, 1000, 850]
)
ambient_phase = dwell_stream(
    [(60, 60), (700, 80), (120, 650), (680, 640)], [150, 120, 160, 130],
    start_ns=focal_phase[-1].timestamp + 10 * MS,
)
stream = focal_phase + ambient_phase

# I-VT classification: point-to-point velocity below the threshold links
# samples into a fixation, above it starts a saccade. With pixel data the
# threshold is expressed in pixels per sample interval.
params = DetectorParams(velocity_threshold=20.0, velocity_unit="px/interval")
fixations, saccades = detect_events(stream, params)
print(f"{len(fixations)} fixations, {len(saccades)} saccades")
for f in fixations:
    print(f"  fixation @ {f.start / 1e9:5.2f}s  {f.duration_ms:6.1f} ms "
          f"around ({f.centroid[0]:5.1f}, {f.centroid[1]:5.1f})")

# The K series has one sample per fixation that is followed by another.
# Watch the sign flip when the behavior changes.
series = coefficient_k(fixations, saccades)
print()
for idx, k, start in series.samples:
    bar = "#" * int(abs(k) * 4)
    side = f"{bar:>12s}|" if k < 0 else f"{'':>12s}|{bar}"
    print(f"  fixation {idx} @ {start / 1e9:5.2f}s  K = {k:+.3f}  {side}")

focal_ks = [k for i, k, _ in series.samples if i < 4]
ambient_ks = [k for i, k, _ in series.samples if i >= 4]
print()
print(f"mean K, focal phase:   {np.mean(focal_ks):+.3f}")
print(f"mean K, ambient phase: {np.mean(ambient_ks):+.3f}")
print(f"mean K, whole window:  {mean_k(series):+.3f}")
