"""
Projecting 3D gaze to pixels and aligning two recordings
========================================================

Two people wear eye trackers. Each device reports gaze either as a 3D
direction in its camera frame or directly as a pixel position, and the
two clocks never tick at exactly the same instants. This script walks
the first steps of the pipeline: parse, project, align.
"""

from jva import (
    CameraIntrinsics,
    align_streams,
    parse_gaze_stream,
    project_stream,
)

# A gaze CSV carries one sample per row. Each row fills either the
# direction columns (dx,dy,dz) or the pixel columns (px,py), never both.
STREAM_A = """timestamp_ns,participant,dx,dy,dz,px,py
0,A,0.10,0.00,1.0,,
33000000,A,0.10,0.01,1.0,,
66000000,A,0.00,0.00,-1.0,,
99000000,A,0.11,0.01,1.0,,
"""

STREAM_B = """timestamp_ns,participant,dx,dy,dz,px,py
5000000,B,,,,760.0,710.0
38000000,B,,,,770.2,705.5
71000000,B,,,,771.0,706.0
"""

samples_a = parse_gaze_stream(STREAM_A)
samples_b = parse_gaze_stream(STREAM_B)

# The pinhole model maps a direction to the image plane:
#   px = fx * dx/dz + cx,   py = fy * dy/dz + cy
# A direction with dz <= 0 points behind the camera and is marked
# missing instead of producing a bogus pixel.
intrinsics = CameraIntrinsics(fx=600.0, fy=600.0, cx=704.0, cy=704.0,
                              width=1408, height=1408)
projected_a = project_stream(samples_a, intrinsics)

for s in projected_a:
    where = f"({s.payload.px:.1f}, {s.payload.py:.1f})" if s.validity == "valid" else "-"
    print(f"A {s.timestamp:>11d} ns  {s.validity:<12s} {where}")

# Stream B is already in pixels, so it passes through unchanged.
# Alignment pairs each sample with its closest counterpart within a
# tolerance, greedily, smallest clock skew first. Every sample is used
# at most once; the behind-camera sample above never makes it in.
tolerance_ns = 16_000_000
pairs = align_streams(projected_a, samples_b, tolerance_ns)

print()
print(f"{len(pairs)} aligned pairs (tolerance {tolerance_ns / 1e6:.0f} ms):")
for p in pairs:
    print(f"  A@{p.tsA} ns <-> B@{p.tsB} ns, skew {p.skew / 1e6:.1f} ms")
