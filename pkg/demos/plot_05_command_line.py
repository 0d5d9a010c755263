"""
The command-line workflow
=========================

Writes two CSV files, fits a model from them, predicts, and runs a short
simulation, all through the ``artlearn`` entry point.
"""

import tempfile
from pathlib import Path

import numpy as np

from artlearn.cli import main

work = Path(tempfile.mkdtemp())
rng = np.random.default_rng(0)
beta = np.array([1.0, -1.0, 0.5])


def write(name, n, shift):
    X = rng.normal(size=(n, 3))
    y = X @ (beta + shift) + rng.normal(size=n)
    rows = np.column_stack([y, X])
    np.savetxt(work / name, rows, delimiter=",", header="y,x0,x1,x2", comments="")
    return str(work / name)


primary = write("primary.csv", 40, 0.0)
near = write("near.csv", 80, 0.1)
far = write("far.csv", 80, 3.0)

# fit prints a weight report; the far sample should get little weight
main(["fit", "--primary", primary, "--aux", near, "--aux", far, "--response", "y", "--out", str(work / "model.json")])
main(["predict", "--model", str(work / "model.json"), "--data", primary, "--out", str(work / "pred.csv")])
print((work / "pred.csv").read_text().splitlines()[:4])

# a fast simulation run writes results, a summary and a manifest
main(["sim", "ex411", "--profile", "fast", "--out", str(work / "sim")])
print(sorted(p.name for p in (work / "sim").iterdir()))
