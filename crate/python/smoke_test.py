"""Smoke test for the levelstat extension module.

Build first, e.g. `maturin develop -m crates/python/Cargo.toml --features extension-module`,
then run `python python/smoke_test.py`.
"""

import json
import math
import pathlib
import sys
import tempfile

import levelstat


def check(name, ok, detail=""):
    print(f"{'ok' if ok else 'FAILED'}  {name} {detail}")
    return ok


def main():
    results = []

    levels = levelstat.sample_levels("semi-poisson", 20001, seed=7)
    spacings = [b - a for a, b in zip(levels, levels[1:])]
    eta, err = levelstat.fit_eta(spacings)
    results.append(check("fit_eta", abs(eta - 2.0) < 4 * err + 0.02, f"eta={eta:.4f} +- {err:.4f}"))

    p = levelstat.nnsd("semi-poisson", 1.0)
    results.append(check("nnsd", math.isclose(p, 4 * math.exp(-2.0), rel_tol=1e-12), f"P(1)={p:.6f}"))

    closed = levelstat.eef_theory(1.0)
    quad = levelstat.eef_theory(1.0, quadrature=True)
    results.append(check("eef_theory", abs(closed - quad) < 1e-10 and 2.5 < closed < 3.0, f"F(1)={closed:.10f}"))

    si, ci = levelstat.sici(1.0)
    results.append(check("sici", abs(si - (0.9460830703671830 - math.pi / 2)) < 1e-14 and abs(ci - 0.3374039229009681) < 1e-14))

    try:
        levelstat.fit_eta([1.0, 2.0])
        results.append(check("error mapping", False))
    except ValueError:
        results.append(check("error mapping", True))

    with tempfile.TemporaryDirectory() as tmp:
        cfg = pathlib.Path(tmp) / "config.toml"
        cfg.write_text("ensemble_sequences = 2\nensemble_levels = 300\n")
        out = pathlib.Path(levelstat.run("nnsd", config=str(cfg), out=str(pathlib.Path(tmp) / "out")))
        manifest = json.loads((out / "manifest.json").read_text())
        names = [t["name"] for t in manifest["tables"]]
        results.append(check("run", "histogram" in names and (out / "histogram.csv").exists(), str(names)))

    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
