"""Smoke test for the neckscope Python extension.

Build first:
    cargo build --release -p neckscope-python
    cp target/release/libneckscope_py.so python/neckscope_py.so
"""

import math
import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, HERE)

import neckscope_py as ns  # noqa: E402

FIXTURES = os.path.join(HERE, "..", "crates", "core", "fixtures")


def main():
    d = ns.Decomposition.from_path(os.path.join(FIXTURES, "two_bubbles.json"))
    labels = [label for label, _ in d.pieces()]
    assert labels.count("neck-l") == 1 and d.ghosts() == ["g1"], labels
    assert d.tree_dot().count("->") == 3
    assert d.is_valid_at(20.0)

    prof = d.profile("neck-l", 20.0)
    assert len(prof) > 100 and all(f > 0 for f in prof)

    text, failed = d.verify("three-circle", seed=1)
    assert not failed, text
    assert "[generalized-three-circle] pass" in text

    vals = d.heatmap("omega", 20.0, 16)
    assert len(vals) == 256 and min(v for v in vals if not math.isnan(v)) >= 1.0

    sol = ns.OdeSolution(1.0, math.exp(20.0), 1.0, 10.0)
    assert abs(sol.g(0.0) - 1.0) < 1e-12
    sup, _, status = sol.lemma_check()
    assert sup <= 4.0 and status == "pass"

    assert abs(ns.annulus_distance(0.1, 0.0, 1e-3, 1.0) - math.log(10.0)) < 1e-12
    assert abs(ns.bubble_metric_f(0.5) - 1.0 / (1.0 + 0.25) ** 2) < 1e-12

    try:
        ns.Decomposition.from_json('{"bubbles": [{"id": "a"}]}')
    except ValueError:
        pass
    else:
        raise AssertionError("schema errors must raise ValueError")
    print("smoke test passed")


if __name__ == "__main__":
    main()
