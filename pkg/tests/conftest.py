from __future__ import annotations

import json

import pytest

from clips.world import parse_scenario


def make_scenario(grid, legend, goals, true_goal=None, cost_profiles=(0,),
                  name="test", script=(), items=None, max_steps=100,
                  annotations=None, true_profile=None):
    """Build a Scenario from inline rows, mirroring the JSON file format."""
    doc = {
        "name": name,
        "grid": list(grid),
        "legend": {k: list(v) for k, v in legend.items()},
        "goals": list(goals),
        "true_goal": true_goal if true_goal is not None else (goals[0] if goals else None),
        "cost_profiles": list(cost_profiles),
        "max_steps": max_steps,
    }
    if items:
        doc["items"] = {k: list(v) for k, v in items.items()}
    if script:
        doc["script"] = list(script)
    if annotations:
        doc["annotations"] = annotations
    if true_profile is not None:
        doc["true_profile"] = true_profile
    return parse_scenario(json.dumps(doc))


@pytest.fixture
def corridor():
    """Tiny corridor: human must cross a red door; key on the floor."""
    return make_scenario(
        grid=[
            "#########",
            "#h.k.D.g#",
            "#..r.#..#",
            "#########",
        ],
        legend={"k": ["key", "red"], "D": ["door", "red"], "g": ["gem", "blue"]},
        goals=["g"],
    )


@pytest.fixture
def two_gem():
    """Two gems behind one shared red door, plus an open blue gem."""
    return make_scenario(
        grid=[
            "##########",
            "#h....D.a#",
            "#.k...#..#",
            "#r....#.b#",
            "##########",
        ],
        legend={
            "k": ["key", "red"], "D": ["door", "red"],
            "a": ["gem", "blue"], "b": ["gem", "green"],
        },
        goals=["a", "b"],
        cost_profiles=(0, 2),
    )
