#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerates stop_motion.json and its demo pose files."""
import json
import math
from pathlib import Path

HERE = Path(__file__).resolve().parent
HULK = (0.50, 0.05, 0.04)
LOKI = (0.45, -0.25, 0.04)
TOWER = (0.55, 0.30, 0.10)


def write_demo(name, path_fn, secs, hz=50):
    n = int(secs * hz) + 1
    lines = []
    for i in range(n):
        s = i / (n - 1)
        e = s * s * (3 - 2 * s)  # operator eases in and out
        x, y, z = path_fn(e)
        lines.append(json.dumps({"t": round(i / hz, 4), "x": round(x, 6), "y": round(y, 6), "z": round(z, 6),
                                 "qw": 1.0, "qx": 0.0, "qy": 0.0, "qz": 0.0}))
    (HERE / "demos" / name).write_text("\n".join(lines) + "\n")


def main():
    (HERE / "demos").mkdir(exist_ok=True)
    # Shallow lateral sweep over Hulk.
    write_demo("pan_hulk.jsonl", lambda e: (HULK[0] - 0.05 + 0.10 * e + 0.02 * math.sin(math.pi * e),
                                            HULK[1] - 0.15 + 0.30 * e, HULK[2] + 0.20 + 0.04 * e), 3.0)
    write_demo("zoom_loki.jsonl", lambda e: (LOKI[0] + 0.02 * e, LOKI[1] + 0.03 * e, LOKI[2] + 0.35 - 0.23 * e), 2.0)
    write_demo("track_tower.jsonl", lambda e: (TOWER[0] - 0.15 * math.cos(e * math.pi / 2),
                                               TOWER[1] + 0.15 * math.sin(e * math.pi / 2),
                                               TOWER[2] + 0.35 - 0.05 * e), 4.0)

    def obj(oid, desc, p):
        return {"id": oid, "description": desc, "pose": {"position": list(p)}, "rest_z": p[2]}

    scene = {"objects": [obj("loki", "A LEGO Loki minifigure", LOKI), obj("hulk", "A LEGO Hulk minifigure", HULK),
                         obj("tower", "A LEGO tower", TOWER)]}

    def say(text, after=2500):
        return {"after_ms": after, "type": "utterance", "text": text}

    def confirm(after=1500):
        return {"after_ms": after, "type": "confirm"}

    def demo(name):
        return {"after_ms": 3000, "type": "demo", "file": "demos/" + name}

    events = [
        say("go to the hulk"), confirm(),
        say("pan around the hulk"), demo("pan_hulk.jsonl"), confirm(),
        say("push in on the god of mischief"), demo("zoom_loki.jsonl"), confirm(),
        say("track around the tower"), demo("track_tower.jsonl"), confirm(),
        say("push in on the god of mischief and then track around the tower"), confirm(),
        say("pan around the hulk quickly"), confirm(),
        say("go home"), confirm(),
    ]
    config = {"scenario_kind": "stop_motion", "backend": "det", "seed": 3, "scene": scene,
              "groundings": [{"name": n, "object": n.lower(), "source": "model"} for n in ("LOKI", "HULK", "TOWER")]}
    doc = {"name": "stop_motion", "config": config, "events": events}
    (HERE / "stop_motion.json").write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
