"""Compare the compiled ray kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--rays 20000] [--prisms 50] [--repeat 3]

Both backends run the same queries over the same BVH; the script checks
that their answers are bit-identical before reporting timings.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from urbanray.geodesy import EnuPoint, GeoPoint, to_geo
from urbanray.kernels import compiled_backend
from urbanray.scene import Footprint, build_scene

ORIGIN = GeoPoint(41.9, 12.5)


def random_scene(rng: np.random.Generator, n: int, extent: float):
    fps = []
    for i in range(n):
        cx, cy = rng.uniform(-extent, extent, 2)
        wx, wy = rng.uniform(5, 40, 2)
        ring = [(cx - wx / 2, cy - wy / 2), (cx + wx / 2, cy - wy / 2), (cx + wx / 2, cy + wy / 2),
                (cx - wx / 2, cy + wy / 2)]
        fps.append(Footprint(f"b{i}", [to_geo(EnuPoint(x, y, 0.0), ORIGIN) for x, y in ring],
                             int(rng.integers(1, 8))))
    return build_scene(fps, ORIGIN)


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rays", type=int, default=20_000)
    ap.add_argument("--prisms", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if compiled_backend is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(args.seed)
    scene = random_scene(rng, args.prisms, 300.0)
    o = np.column_stack([rng.uniform(-320, 320, (args.rays, 2)), rng.uniform(0.5, 40.0, args.rays)])
    d = rng.normal(size=(args.rays, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    tmax = np.full(args.rays, 500.0)

    print(f"{scene.index.n_triangles} triangles, {scene.index.n_nodes} BVH nodes, {args.rays} rays")
    print(f"{'query':<12}{'backend':<10}{'seconds':>10}{'Mrays/s':>10}")
    for query in ("first_hits", "occluded"):
        results = {}
        for backend in ("compiled", "python"):
            idx = scene.index.with_backend(backend)
            fn = getattr(idx, query)
            secs, results[backend] = best_of(lambda: fn(o, d, tmax, scene.epsilon), args.repeat)
            print(f"{query:<12}{backend:<10}{secs:>10.4f}{args.rays / secs / 1e6:>10.3f}")
        a, b = results["compiled"], results["python"]
        same = all(np.array_equal(x, y) for x, y in zip(a, b)) if isinstance(a, tuple) else np.array_equal(a, b)
        if not same:
            raise SystemExit(f"{query}: backends disagree")
    print("outputs bit-identical across backends")


if __name__ == "__main__":
    main()
