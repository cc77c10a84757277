"""End-to-end smoke test of the Python bindings.

Build and install the extension first, e.g.

    cd crates/py && maturin build --release -o dist && pip install dist/*.whl
"""

import json
import math
import random
import sys
import tempfile
from pathlib import Path

import distidx_py as di


def check_exact_distances(g):
    # independent oracle: plain Bellman-Ford relaxation in Python
    src = 0
    dist = [math.inf] * g.n
    dist[src] = 0.0
    edges = g.edges()
    for _ in range(g.n):
        changed = False
        for u, v, w in edges:
            for a, b in ((u, v), (v, u)):
                if dist[a] + w < dist[b]:
                    dist[b] = dist[a] + w
                    changed = True
        if not changed:
            break
    got = g.sssp(src)
    for a, b in zip(got, dist):
        assert abs(a - b) <= 1e-9 * max(1.0, b), (a, b)
    assert g.distance(src, g.n - 1) == got[-1]


def main():
    g = di.RoadNetwork.grid(8, 9, seed=3)
    assert g.n == 72 and g.is_connected(), g
    check_exact_distances(g)

    tri = di.RoadNetwork([(0.0, 0.0), (0.0, 0.001), (0.001, 0.0)], [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0)])
    assert tri.ground_truth([(0, 2), (1, 2)]) == [2.0, 1.0]

    assert di.mre([9.0], [10.0]) == 0.1
    assert di.mre([12.0, 5.0], [10.0, 10.0]) == 0.35
    assert "gbdt" in di.model_names()

    index, test_mre, pt = di.train(g, "landmark_km", landmarks=8)
    assert 0.0 <= test_mre < 1.0 and pt >= 0.0
    rng = random.Random(0)
    pairs = [(rng.randrange(g.n), rng.randrange(g.n)) for _ in range(50)]
    preds = index.predict_many(pairs)
    assert preds == [index.predict(u, v) for u, v in pairs]
    truth = g.ground_truth(pairs)
    # landmark estimates are upper bounds
    assert all(p >= t - 1e-6 for p, t in zip(preds, truth))

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "lm.ckpt"
        index.save(str(path))
        again = di.DistanceIndex.load(str(path), g)
        assert again.predict_many(pairs) == preds
        assert index.index_bytes() == path.stat().st_size

        try:
            di.DistanceIndex.load(str(path), di.RoadNetwork.grid(3, 3))
        except ValueError:
            pass
        else:
            raise AssertionError("graph mismatch not detected")

    report = json.loads(di.run_benchmark(["manhattan", "gbdt"], grid=(6, 6), budget_secs=2.0))
    assert [r["status"] for r in report["reports"]] == ["ok", "ok"], report["reports"]
    print("smoke test passed:", {r["model"]: round(r["mre_percent"], 3) for r in report["reports"]})


if __name__ == "__main__":
    sys.exit(main())
