"""Smoke test for the homact_py extension.

Uses an installed homact_py when there is one; otherwise builds the crate
with cargo and loads the shared library straight from target/.
"""

import importlib.machinery
import importlib.util
import json
import pathlib
import subprocess
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import homact_py

        return homact_py
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "homact-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libhomact_py.so"
    loader = importlib.machinery.ExtensionFileLoader("homact_py", str(lib))
    spec = importlib.util.spec_from_loader("homact_py", loader, origin=str(lib))
    module = importlib.util.module_from_spec(spec)
    loader.exec_module(module)
    return module


def main():
    h = load()

    assert h.adjacent("1", "3") is True
    assert h.adjacent("2", "3") is False
    assert h.enumerate(4) == ["0", "1", "2", "3"]
    assert h.property_r_witness(["1", "2"], ["3"]) == "6"
    assert h.enumerate(4, seed=(3, [(0, 1)])) == ["b0", "b1", "b2", "{b0}"]
    assert h.property_r_witness(["b0"], ["b1"], seed=(3, [(0, 1)])) == "{b0}"

    answers = dict(h.extend([("0", "2"), ("5", "7")], ["0", "5", "9"]))
    assert answers["0"] == "2" and answers["5"] == "7"

    edges = h.export("0..7").splitlines()
    assert len(edges) == 12 and json.loads(edges[0]) == {"u": "0", "v": "1"}

    report, code = h.run_suite("backends", "[budgets]\nwindow = 10\nr_universe = 5\n")
    assert code == 0 and json.loads(report)["status"] == "pass"

    try:
        h.run_suite("nope")
    except ValueError as e:
        assert "unknown suite" in str(e)
    else:
        raise AssertionError("unknown suite accepted")

    print("homact_py smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
