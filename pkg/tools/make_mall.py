#!/usr/bin/env python3
"""Regenerate the bundled three-floor mall fixture (src/evacnav/data/mall.json).

Floor 0 is a 6 x 3 grid with exits at both ends of the middle row; floors 1
and 2 are 8 x 2 galleries. Stairs join floors 0-1 at both ends and 1-2 in
the middle. Stair landings on floor 1 are plain nodes (no landmark photo).

    python tools/make_mall.py                      # the bundled fixture
    python tools/make_mall.py --access-points spread --out /tmp/mall_aps.json
"""

import argparse
import json
from pathlib import Path

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "evacnav" / "data" / "mall.json"


def build(scale: float, access_points: str) -> dict:
    nodes, edges = [], []

    def add(x, y, floor, kind="landmark"):
        nodes.append({"id": len(nodes), "x_m": round(x, 2), "y_m": round(y, 2), "floor": floor, "kind": kind})
        return len(nodes) - 1

    def link(a, b):
        edges.append({"a": a, "b": b})

    g0 = {}
    for r, y in enumerate((0.0, 10.0, 20.0)):
        for c in range(6):
            kind = "exit" if r == 1 and c in (0, 5) else "landmark"
            g0[r, c] = add(scale * 12.0 * c, scale * y, 0, kind)
    up = {}
    for f in (1, 2):
        for r, y in enumerate((5.0, 15.0)):
            for c in range(8):
                up[f, r, c] = add(scale * 60.0 / 7 * c, scale * y, f)

    for (r, c), n in g0.items():
        if c + 1 < 6:
            link(n, g0[r, c + 1])
        if r + 1 < 3:
            link(n, g0[r + 1, c])
    for (f, r, c), n in up.items():
        if c + 1 < 8:
            link(n, up[f, r, c + 1])
        if r == 0:
            link(n, up[f, 1, c])
    link(g0[2, 1], up[1, 1, 1])
    link(g0[0, 4], up[1, 0, 6])
    link(up[1, 1, 3], up[2, 1, 3])
    link(up[1, 0, 4], up[2, 0, 4])
    for n in (up[1, 1, 1], up[1, 0, 6], up[1, 1, 3], up[1, 0, 4]):
        nodes[n]["kind"] = "plain"

    aps = [g0[1, 0], g0[1, 5]]
    if access_points == "spread":
        aps += [up[1, 0, 3], up[1, 1, 4], up[2, 0, 2], up[2, 1, 5]]
    return {"nodes": nodes, "edges": edges, "access_points": sorted(aps)}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=0.6, help="linear scale applied to every coordinate")
    ap.add_argument("--access-points", choices=("exits", "spread"), default="exits")
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args()
    doc = build(args.scale, args.access_points)
    args.out.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"{args.out}: {len(doc['nodes'])} nodes, {len(doc['edges'])} edges, access points {doc['access_points']}")


if __name__ == "__main__":
    main()
