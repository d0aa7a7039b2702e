#!/usr/bin/env python3
"""Smoke test for the lsa_py extension module.

Build the extension first:

    cargo build -p lsa-py --release

then run this script from the repository root:

    python3 python/smoke_test.py
"""

import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_lsa_py():
    try:
        import lsa_py  # already importable (e.g. installed)

        return lsa_py
    except ImportError:
        pass
    candidates = [
        REPO / "target" / "release" / "liblsa_py.so",
        REPO / "target" / "debug" / "liblsa_py.so",
        REPO / "target" / "release" / "liblsa_py.dylib",
        REPO / "target" / "debug" / "liblsa_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("lsa_py is not built; run: cargo build -p lsa-py --release")
    stage = Path(tempfile.mkdtemp(prefix="lsa_py_"))
    shutil.copy(built, stage / "lsa_py.so")
    sys.path.insert(0, str(stage))
    import lsa_py

    return lsa_py


def main():
    lsa = import_lsa_py()

    # Group algebra: solvability hierarchy.
    orders, cls = lsa.derived_series("S4")
    assert orders == [24, 12, 4, 1] and cls == "SolvableNonAbelian", (orders, cls)
    orders, cls = lsa.derived_series("A5")
    assert cls == "NonSolvable" and orders[-1] == 60, (orders, cls)
    orders, cls = lsa.derived_series("(0 1 2 3 4)")
    assert cls == "Abelian" and orders == [5, 1], (orders, cls)

    # Word problem.
    identity, product = lsa.word_eval("A5", "g0 g1 g1^-1 g0^-1")
    assert identity and product == "()", (identity, product)
    identity, _ = lsa.word_eval("icosahedral", "g1 g1")
    assert identity

    assert lsa.compose_cycles("(0 1)", "(1 2)") == "(0 1 2)"

    # Formula -> width-5 branching program.
    prog = lsa.compile_formula("(x0 & (x1 | !x2))")
    assert len(prog) == 4 ** prog.depth, (len(prog), prog.depth)
    for mask in range(2 ** prog.num_vars):
        bits = [(mask >> i) & 1 == 1 for i in range(prog.num_vars)]
        x0, x1, x2 = bits
        assert prog.decide(bits) == (x0 and (x1 or not x2)), bits
        assert prog.evaluate(bits) in ("()", prog.accept_cycle)

    # Benchmark generators carry the documented parameters.
    gens3 = lsa.level_generators(3)
    assert len(gens3) == 6
    assert gens3[0]["kind"] == "rotate3d" and gens3[0]["angle_deg"] == 30.0
    assert gens3[5]["v"] == [0.15, 0.15, 0.0]

    # Rendering: deterministic PGM frames.
    nv, nf = lsa.mesh_stats(0)
    assert nv == 162 and nf == 320, (nv, nf)
    frame_a = lsa.render_pose(0, 1, [0, 0])
    frame_b = lsa.render_pose(0, 1, [0, 0])
    assert frame_a == frame_b
    assert frame_a.startswith(b"P5\n224 224\n255\n")
    actions, frames = lsa.random_walk(0, 3, 5, seed=7)
    assert len(actions) == 5 and len(frames) == 6

    # Error compounding stays below the exponential envelope.
    eps = 0.01
    curve = lsa.compounding_curve(eps, 20, trials=200, seed=3)
    assert all(b >= a - 1e-12 for a, b in zip(curve, curve[1:])), "must be nondecreasing"
    assert all(v <= 2 * ((1 + eps) ** (t + 1) - 1) for t, v in enumerate(curve))

    print("lsa_py smoke test passed")


if __name__ == "__main__":
    main()
