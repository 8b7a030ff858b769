"""Smoke test for the posmap Python extension.

Build first, e.g.

    cargo build --release -p posmap-python --features extension-module

then run `python3 python/smoke_test.py`. An installed `posmap` module is used
if present; otherwise the freshly built library under target/ is loaded.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys


def load_posmap():
    try:
        import posmap  # noqa: F401

        return posmap
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parent.parent
    for profile in ("release", "debug"):
        lib = root / "target" / profile / "libposmap.so"
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("posmap", str(lib))
            spec = importlib.util.spec_from_loader("posmap", loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            sys.modules["posmap"] = module
            return module
    sys.exit("posmap extension not found; build it with cargo first")


def close(a, b, tol=1e-12):
    return abs(a - b) <= tol


def main():
    pm = load_posmap()

    basis = pm.gellmann_basis()
    assert len(basis) == 9
    a = pm.Hermitian3.diag([1.0, 0.0, 0.0])
    v = pm.to_coherence(a)
    assert close(v.a0, 1 / math.sqrt(3))
    assert close(v.avec[2], 1 / math.sqrt(2)) and close(v.avec[7], 1 / math.sqrt(6))
    back = pm.from_coherence(v).entries()
    assert close(back[0][0].real, 1.0) and close(back[1][1].real, 0.0)

    x0 = pm.choi_matrix(0.0)
    assert close(x0.operator_norm(), 0.5)
    assert close(x0.rows()[2][7], -math.sqrt(3) / 4)
    y = pm.choi_map(1.0, 0.0, 1.0)
    assert max(abs(p - q) for r, s in zip(x0.rows(), y.rows()) for p, q in zip(r, s)) < 1e-12

    report = pm.is_positive(x0, seed=7)
    assert report["verdict"] == "NumericallyPositive", report
    assert abs(report["min_value"]) < 1e-8
    assert pm.is_positive(pm.MapMatrix.identity() * 1.2)["verdict"] == "NotPositive"

    e = pm.idempotent_of(pm.s0_matrix())
    assert e["canonical_class"] == "p1"
    d = pm.decompose(pm.s0_matrix())
    assert d["q_index"]["index"] == 0
    assert pm.q_index(pm.choi_matrix(0.5)) == 0

    tags = {
        "choi": pm.classify_candidate(pm.choi_matrix(0.25))["tag"],
        "s0": pm.classify_candidate(pm.s0_matrix())["tag"],
        "transpose": pm.classify_candidate(pm.transpose_matrix())["tag"],
        "adunitary": pm.classify_candidate(pm.adunitary(3))["tag"],
    }
    assert tags == {
        "choi": "StronglyErgodicHalf",
        "s0": "Q0P8Form",
        "transpose": "JordanIso",
        "adunitary": "JordanIso",
    }, tags

    r = pm.reduce_canonical(pm.s0_matrix())
    assert r["target_class"] == "p1"

    mid = (x0 + pm.MapMatrix.identity()) * 0.5
    ext = pm.extreme_in_lambda(mid, seed=1)
    assert ext["verdict"] == "NotExtreme", ext
    assert pm.extreme_in_lambda(x0, seed=1)["verdict"] != "NotExtreme"

    lam = pm.Hermitian3.diag([1.0, -1.0, 0.0])
    assert pm.kadison_schwarz_violation(pm.transpose_matrix(), lam) >= -1e-9

    record = pm.pipeline(pm.s0_matrix())
    assert record["idempotent"]["canonical_class"] == "p1"
    assert record["candidate"]["tag"] == "Q0P8Form"

    try:
        pm.MapMatrix([[1.0]])
    except ValueError:
        pass
    else:
        raise AssertionError("malformed matrix accepted")

    print("posmap smoke test passed")


if __name__ == "__main__":
    main()
