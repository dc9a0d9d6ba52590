import copy
import json

import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance pass/fail lines past pytest's output capture."""
    try:
        from test_acceptance import CRITERION_LINES
    except ImportError:
        return
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)

BASE_SCENARIO = {
    "version": 1,
    "session_id": "tiny",
    "activity_label": "toy",
    "duration_s": 4.0,
    "frame_rate_hz": 5.0,
    "frame_size": 128,
    "canvas_margin": 16,
    "background": [16, 16, 16],
    "rng_seed": 7,
    "gaze_jitter_px": 1.0,
    "viewpoints": {"A": [-2, 1], "B": [3, -2]},
    "objects": [
        {
            "name": "ball",
            "shape": "disc",
            "radius": 20,
            "color": [200, 40, 40],
            "texture": {"noise": {"seed": 3, "grain": 1, "amplitude": 50}},
            "path": [{"t": 0.0, "pos": [60, 60]}, {"t": 4.0, "pos": [100, 90]}],
        },
        {
            "name": "box",
            "shape": "rect",
            "size": [30, 24],
            "color": [40, 60, 200],
            "path": [{"t": 0.0, "pos": [110, 40]}],
        },
    ],
    "script": [
        {"span": [0.0, 2.0], "participant": "A", "target": "ball"},
        {"span": [2.0, 4.0], "participant": "A", "target": "box"},
        {"span": [0.0, 2.0], "participant": "B", "target": "ball"},
        {"span": [2.0, 4.0], "participant": "B", "wander": {"seed": 9}},
    ],
}


@pytest.fixture
def scenario():
    """Deep copy of the base scenario, safe to mutate per test."""

    def make(**overrides):
        spec = copy.deepcopy(BASE_SCENARIO)
        spec.update(overrides)
        return spec

    return make


@pytest.fixture(scope="session")
def tiny_session(tmp_path_factory):
    """One generated session shared by CLI-level tests."""
    from jva.synth import generate_session, load_scenario

    out = tmp_path_factory.mktemp("tiny_session")
    spec_path = out / "scenario.json"
    spec_path.write_text(json.dumps(BASE_SCENARIO))
    session = generate_session(load_scenario(copy.deepcopy(BASE_SCENARIO)), out / "data")
    return {"session": session, "spec_path": spec_path}
