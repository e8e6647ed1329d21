#!/usr/bin/env python3
"""Brute-force feasible optima of the bundled synthetic problems.

Writes tests/fixtures/synthetic_optima.json. Independent of the C++ code: the
problem surfaces are restated here from their definitions.
"""
import json
import pathlib

import numpy as np

RESOLUTION = 1000


def gardner1(x, y):
    f = np.cos(2 * x) * np.cos(y) + np.sin(x)
    c = np.cos(x) * np.cos(y) - np.sin(x) * np.sin(y)
    return f, c <= 0.5, (0.0, 6.0)


def energy_tradeoff(x, y):
    f = 1.5 * (1 - x) + 0.5 * (y - 0.3) ** 2 - 0.5
    c = 2 * x + (y - 0.6) ** 2 - 1.2
    return f, c <= 0.0, (0.0, 1.0)


def solve(fn, box):
    g = np.linspace(box[0], box[1], RESOLUTION)
    X, Y = np.meshgrid(g, g, indexing="ij")
    f, feasible, _ = fn(X, Y)
    masked = np.where(feasible, f, np.inf)
    i = np.unravel_index(np.argmin(masked), masked.shape)
    return {"x": [float(X[i]), float(Y[i])], "objective": float(masked[i]),
            "resolution": RESOLUTION}


def main():
    out = {
        "gardner1": solve(gardner1, (0.0, 6.0)),
        "energy_tradeoff": solve(energy_tradeoff, (0.0, 1.0)),
    }
    path = pathlib.Path(__file__).resolve().parents[1] / "fixtures" / "synthetic_optima.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
