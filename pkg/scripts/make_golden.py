#!/usr/bin/env python3
"""Regenerate the golden artifacts for the 6x6 translation case.

The expected partition (dst/inp/trans/bg cell sets) is enumerated by hand in
tests/test_correspondence.py; this script freezes the serialized forms — the
canonical plan document and the region PPM — so the CLI, server, and UI can
be compared byte-for-byte against them.
"""

import json
from pathlib import Path

from dragfield.io_formats import (
    canonical_json,
    parse_drag_plan,
    write_region_viz,
)
from dragfield.pipeline import plan_correspondence, run_plan

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"

TRANSLATE6 = {
    "format_version": 1,
    "mode": "move",
    "grid": {"width": 6, "height": 6},
    "mask": [[0, 7], [1, 2], [0, 4], [1, 2], [0, 21]],
    "instructions": [{"handle": [1.5, 1.5], "target": [2.5, 1.5]}],
    "scale": [1.0, 1.0],
    "trans_width": 1,
    "noise_seed": 0,
}


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    request_text = canonical_json(TRANSLATE6)
    (GOLDEN / "translate6.json").write_text(request_text + "\n", encoding="ascii")

    plan = parse_drag_plan(request_text)
    doc = run_plan(plan)
    (GOLDEN / "translate6_plan.json").write_text(
        canonical_json(doc) + "\n", encoding="ascii"
    )

    _, _, partition = plan_correspondence(plan)
    write_region_viz(partition, GOLDEN / "translate6_regions.ppm")

    stats = doc["stats"]
    assert stats == {"bg": 16, "dst": 4, "inp": 2, "trans": 14}, stats
    print("golden files written to", GOLDEN)
    print("stats:", json.dumps(stats))


if __name__ == "__main__":
    main()
