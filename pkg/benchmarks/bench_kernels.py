"""Compiled vs pure-python geometry kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scenes 300]

Reports the best-of-N wall time per call for each kernel on both backends,
then the end-to-end cost of goal-point extraction (which is dominated by these
kernels) with the compiled backend enabled and disabled.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from trajgan import kernels


def star_polygon(rng, n):
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    r = rng.uniform(20.0, 60.0, n)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def workloads(rng):
    poly = star_polygon(rng, 64)
    pts = rng.uniform(-70, 70, (256, 2))
    line_pts = rng.normal(0, 20, (50, 2))
    mask = rng.random(50) < 0.5
    q = rng.uniform(-80, 80, 2)
    direction = np.array([0.6, 0.8])
    return {
        "points_in_polygon (256 pts, 64 verts)": lambda k: k.points_in_polygon(pts, poly),
        "clip_polygon_box (64 verts)": lambda k: k.clip_polygon_box(poly, -30, -25, 35, 40),
        "line_distances (50 pts)": lambda k: k.line_distances(line_pts, np.zeros(2), direction),
        "longest_run (50)": lambda k: k.longest_run(mask),
        "nearest_on_polygon (64 verts)": lambda k: k.nearest_on_polygon(q, poly),
    }


def time_call(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat=repeat, number=number)) / number


END_TO_END = """
import time, numpy as np
from trajgan.scene import SCENE_KINDS, generate_synthetic_scene
from trajgan.target_points import extract_target_points
from trajgan import kernels
scenes = [generate_synthetic_scene(i, SCENE_KINDS[i % 4]) for i in range({n})]
t = time.perf_counter()
for i, s in enumerate(scenes):
    extract_target_points(s, np.random.default_rng(i))
print(kernels.BACKEND_NAME, (time.perf_counter() - t) / len(scenes))
"""


def end_to_end(n, pure):
    env = dict(os.environ)
    env.pop("TRAJGAN_PUREPY", None)
    if pure:
        env["TRAJGAN_PUREPY"] = "1"
    out = subprocess.run([sys.executable, "-c", END_TO_END.format(n=n)], env=env,
                         capture_output=True, text=True, check=True).stdout.split()
    return out[0], float(out[1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scenes", type=int, default=300)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is timed "
              "(build with `pip install -e . --no-build-isolation`)")
    rng = np.random.default_rng(0)
    names = sorted(backends)
    print(f"{'kernel':42s}" + "".join(f"{n:>14s}" for n in names) + ("   speedup" if len(names) == 2 else ""))
    for label, fn in workloads(rng).items():
        times = {n: time_call(lambda: fn(backends[n]), args.repeat) for n in names}
        row = f"{label:42s}" + "".join(f"{times[n] * 1e6:12.2f}us" for n in names)
        if len(names) == 2:
            row += f"{times['python'] / times['compiled']:9.1f}x"
        print(row)

    print()
    results = [end_to_end(args.scenes, pure) for pure in (False, True)]
    for name, per_scene in results:
        print(f"goal-point extraction, {name:8s} backend: {per_scene * 1e3:8.3f} ms/scene")
    if results[0][0] == "compiled":
        print(f"end-to-end speedup: {results[1][1] / results[0][1]:.1f}x")


if __name__ == "__main__":
    main()
