#!/usr/bin/env python3
"""Illustrative external trainer: logistic regression fitted by mini-batch SGD.

Same protocol as linear_regressor.py, reporting validation accuracy.
"""
import json
import sys

import numpy as np


def make_data(n=20000, d=30, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    w = rng.normal(size=d)
    p = 1.0 / (1.0 + np.exp(-(X @ w) / 2.0))
    y = (rng.uniform(size=n) < p).astype(float)
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
    with np.errstate(over="ignore"):
        for _ in range(epochs):
            order = rng.permutation(len(y))
            for start in range(0, len(y), batch):
                idx = order[start:start + batch]
                p = 1.0 / (1.0 + np.exp(-(X[idx] @ w)))
                w -= lr * (X[idx].T @ (p - y[idx]) / len(idx) + l2 * w)
        accuracy = float(np.mean(((Xv @ w) > 0) == (yv > 0.5)))
    print(json.dumps({"metric": accuracy}))


if __name__ == "__main__":
    main()
