#!/usr/bin/env python3
"""Illustrative external trainer: ridge regression fitted by mini-batch SGD.

Reads hyperparameters from the JSON file named on the command line, trains on
a fixed synthetic dataset and prints {"metric": validation_rmse} as its last
line. Wallclock is measured by the caller.
"""
import json
import sys

import numpy as np


def make_data(n=20000, d=40, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    w = rng.normal(size=d) / np.sqrt(d)
    y = X @ w + 0.1 * rng.normal(size=n)
    split = int(0.8 * n)
    return X[:split], y[:split], X[split:], y[split:]


def main():
    with open(sys.argv[1]) as f:
        params = json.load(f)
    lr, l2 = params["learning_rate"], params["l2"]
    epochs, batch = int(params["epochs"]), int(params["batch_size"])

    X, y, Xv, yv = make_data()
    rng = np.random.default_rng(1)
    w = np.zeros(X.shape[1])
    for _ in range(epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), batch):
            idx = order[start:start + batch]
            grad = X[idx].T @ (X[idx] @ w - y[idx]) / len(idx) + l2 * w
            w -= lr * grad
    rmse = float(np.sqrt(np.mean((Xv @ w - yv) ** 2)))
    print(json.dumps({"metric": rmse if np.isfinite(rmse) else None}))


if __name__ == "__main__":
    main()
