"""Smoke test for the asaw_py extension.

Build first:
    cargo build --release -p asaw-py --features extension-module
then run this script from the repository root. If `asaw_py` is not installed,
the freshly built library under target/ is loaded directly.
"""

import importlib.machinery
import importlib.util
import json
import pathlib
import sys


def load():
    try:
        import asaw_py

        return asaw_py
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for profile in ("release", "debug"):
        lib = root / "target" / profile / "libasaw_py.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("asaw_py", str(lib))
            spec = importlib.util.spec_from_file_location("asaw_py", lib, loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("asaw_py not found; build it with cargo first")


def main():
    a = load()
    p = a.ModelParams(2, "nn", "1/10")
    assert p.p1 == "1/4" and p.k0 == 4

    w = a.Walk("0,0;1,0;1,1")
    assert len(w) == 2 and w.is_self_avoiding()
    assert a.ModelParams(2, "nn", "0").weight(w) == "1/16"

    square = a.Walk("0,0;1,0;1,1;0,1;0,0")
    assert square.is_polygon() and square.adjacency() == (2, 1)
    assert p.interaction_product(square) == "0/1"

    edge = a.Walk("0,0;1,0")
    pl = a.Plaquette([0, 0])
    assert edge.is_flippable(pl)
    assert str(edge.flip(pl)) == "0,0;0,1;1,1;1,0"

    rows = a.ModelParams().masses(4)
    assert rows[4][1] == "25/64"

    assert a.distinct_partitions(6) == 4
    assert a.distinct_partitions(100) == 444793

    assert p.lace_residual_is_zero(6)

    code, out, _ = a.run_cli(["partitions", "--n", "6"])
    assert code == 0 and json.loads(out)["P"] == "4"
    code, _, err = a.run_cli(["enumerate", "--kappa", "x"])
    assert code == 2 and "malformed" in err

    try:
        a.Walk("0,0;0,0")
    except ValueError:
        pass
    else:
        raise AssertionError("repeated consecutive vertex accepted")

    print("asaw_py smoke test passed")


if __name__ == "__main__":
    main()
