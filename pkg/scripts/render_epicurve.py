#!/usr/bin/env python3
"""Render epipolar curves for a grid of query pixels between two random poses.

Writes one PPM per query into ``--out-dir`` and prints, for each, the distance
from the traced curve to both epipoles. Useful for eyeballing the seam wrap and
the behavior near the poles.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from panoepi.camera import EquirectGrid, Pose4DoF, pose4dof_to_se3
from panoepi.epipolar import curve_distance, epipolar_curve, epipolar_mask, epipoles, essential, relative_pose
from panoepi.io import write_ppm
from panoepi.render import RenderSpec, render_epipolar


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=EquirectGrid.parse, default=EquirectGrid(512, 128))
    ap.add_argument("--queries", type=int, default=6)
    ap.add_argument("--band", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", type=Path, default=Path("epicurves"))
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    grid = args.grid
    pm = pose4dof_to_se3(Pose4DoF((0.0, 0.0, 1.6), rng.uniform(-np.pi, np.pi)))
    pn = pose4dof_to_se3(Pose4DoF((*rng.uniform(-15, 15, 2), 1.6), rng.uniform(-np.pi, np.pi)))
    rel = relative_pose(pm, pn)
    E = essential(rel)
    epis = epipoles(rel, grid)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.queries):
        q = (rng.integers(grid.width) + 0.5, rng.integers(grid.height) + 0.5)
        curve = epipolar_curve(q, E, grid)
        mask = epipolar_mask(q, E, grid, args.band)
        path = args.out_dir / f"query{i:02d}.ppm"
        write_ppm(path, render_epipolar(grid, curve, mask, epis, RenderSpec(thickness=2)))
        dists = ", ".join(f"{curve_distance(curve, e, grid):.3f}" for e in epis)
        print(f"{path}: query ({q[0]:.1f}, {q[1]:.1f}), {mask.count} candidates, epipole distances {dists} px")


if __name__ == "__main__":
    main()
