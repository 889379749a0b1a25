#!/usr/bin/env python3
"""Smoke test for the formlab_py extension module.

Builds nothing itself: it locates the cdylib produced by
`cargo build -p formlab-py` (release preferred), copies it next to a
temporary directory under an importable name and drives the bindings
through the main surfaces.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO / "target" / "release" / "libformlab_py.so",
        REPO / "target" / "debug" / "libformlab_py.so",
        REPO / "target" / "release" / "libformlab_py.dylib",
        REPO / "target" / "debug" / "libformlab_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p formlab-py")
    workdir = Path(tempfile.mkdtemp(prefix="formlab-py-"))
    target = workdir / "formlab_py.so"
    shutil.copyfile(built, target)
    sys.path.insert(0, str(workdir))
    import formlab_py

    return formlab_py


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    lab = load_module()

    # domain constructors and scaling
    d = lab.Domain.interval(3, 1.0)
    assert d.n_nodes == 3
    assert d.boundary == [0, 2]
    assert d.masses == [0.25, 0.5, 0.25]
    assert all(close(w, 2.0) for (_, _, w) in d.edges)

    rect = lab.Domain.rectangle(3, 3, 1.0, 1.0)
    assert rect.interior == [4]

    path = lab.Domain.graph([(0, 1, 1.0), (1, 2, 1.0)], [0, 2])

    # form assembly against frozen matrices
    robin = lab.robin_form(path, [1.0, 2.0])
    assert robin.matrix == [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 3.0]]

    nl = lab.nonlocal_robin_form(path, [[1.0, 1.0], [1.0, 1.0]])
    assert nl.matrix == [[2.0, -1.0, 1.0], [-1.0, 2.0, -1.0], [1.0, -1.0, 2.0]]

    markovian, witness = lab.is_markovian(nl)
    assert not markovian and witness == (0, 2, 1.0)
    assert lab.is_markovian(robin)[0]

    # pinning through math.inf and measure recovery
    pinned = lab.robin_form(path, [math.inf, 2.0])
    assert pinned.pinned == [0]
    extraction = lab.extract_boundary_measure(pinned)
    assert extraction["verdict"] == "success"
    assert extraction["mu"][0] == math.inf and close(extraction["mu"][1], 2.0)

    bad = lab.extract_boundary_measure(nl)
    assert bad["verdict"] == "nonlocal_coupling" and (bad["i"], bad["j"]) == (0, 2)

    # decomposition round trip
    parts = lab.bdl_decompose(nl)
    assert parts.stencil_jump == [1.0, 1.0]
    assert parts.nonlocal_jump == {(0, 2): -1.0}
    assert parts.killing == [2.0, 0.0, 2.0]
    assert not parts.markovian
    rebuilt = lab.bdl_reconstruct(parts, path)
    assert rebuilt.matrix == nl.matrix
    assert lab.classify_locality(robin) is None
    assert lab.classify_locality(nl)[:2] == (0, 2)

    # semigroup surfaces
    snap0 = lab.expm(robin, 0.0)
    assert snap0 == [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    entry = lab.expm(nl, 0.01)[0][2]
    assert -0.011 < entry < -0.009, entry

    profile = lab.min_entry_profile(nl, [0.01])
    assert profile[0][1] < 0.0

    pos = lab.is_positivity_preserving(nl, [0.01, 0.1, 1.0])
    assert not pos["algebraic"] and not pos["numerical"] and pos["consistent"]

    dom = lab.dominates(robin, lab.neumann_form(path), [0.01, 0.1, 1.0])
    assert dom["verdict"] and dom["form_level"]

    sandwich = lab.check_sandwich(robin, [0.01, 0.1, 1.0])
    assert sandwich["verdict"]
    assert not lab.check_sandwich(nl, [0.01, 0.1, 1.0])["verdict"]

    gap, nonneg, _ = lab.ouhabaz_gap(robin, lab.neumann_form(path))
    assert nonneg and gap[0][0] == 1.0 and gap[2][2] == 2.0

    assert lab.cross_form_energy(lab.neumann_form(path), [1.0, -1.0, 1.0]) == -2.0

    loc = lab.locality_from_domination(robin, [0.01, 0.1, 1.0])
    assert loc["verdict"] == "local"

    # the counterexample harness end to end (scaled interval instance)
    rep = lab.example_aw45(3)
    assert rep["as_expected"]
    assert 0.2 < rep["eventual"]["t_star"] < 0.3
    ev = lab.eventually_positive(lab.nonlocal_robin_form(d, [[1.0, 1.0], [1.0, 1.0]]))
    assert ev["verdict"]

    # characterization and sweep
    ver = lab.verify_characterization(path, [1.0, math.inf], [0.01, 0.1, 1.0])
    assert ver["forward_sandwich"] and ver["reverse_recovered"]

    sweep = lab.sweep_random(10, 7, max_interval=9, max_side=4)
    assert sweep["passes"] == 10 and sweep["failures"] == []

    # continuum anchoring
    roots = lab.robin_reference_roots(1.0, 2)
    assert close(roots[0], 1.3065423741888062, 1e-10)
    table = lab.eigen_convergence("neumann", [9, 17, 33], 1)
    orders = [r["observed_order"] for r in table["rows"][1:]]
    assert all(1.8 <= o <= 2.2 for o in orders), orders

    print("smoke test passed")


if __name__ == "__main__":
    main()
