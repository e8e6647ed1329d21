import json
import math
import os
from pathlib import Path

import pytest

import cbopt

DATA = Path(os.environ.get("CBO_TEST_DATA_DIR", Path(__file__).resolve().parents[1] / "data"))
FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def test_search_space_round_trip():
    space = cbopt.SearchSpace([
        cbopt.ParamSpec.continuous("lr", 1e-4, 1e-1, cbopt.Scale.log),
        cbopt.ParamSpec.integer("depth", 1, 8),
        cbopt.ParamSpec.categorical("solver", ["sgd", "adam"]),
    ])
    values = {"lr": 0.01, "depth": 5, "solver": "adam"}
    back = space.decode(space.encode(values))
    assert back["depth"] == 5 and back["solver"] == "adam"
    assert back["lr"] == pytest.approx(0.01, rel=1e-12)
    assert all(0.0 <= u <= 1.0 for p in cbopt.sample(space, 16, 3) for u in p)
    assert cbopt.SearchSpace.from_json(space.to_json()).dim == 3


def test_acquisition_closed_forms():
    assert cbopt.expected_improvement(0.0, 1.0, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-15)
    assert cbopt.probability_of_feasibility(-1.96, 1.0) == pytest.approx(0.9750021048517796, abs=1e-12)
    assert cbopt.penalized_objective(0.3, -1.0, 5.0) == 0.3
    assert cbopt.penalized_objective(0.3, 0.5, 4.0) == pytest.approx(1.3)


def test_gp_fit_and_predict():
    X = [[i / 7] for i in range(8)]
    y = [math.sin(2 * math.pi * x[0]) for x in X]
    gp = cbopt.fit(X, y, seed=1)
    for x, t in zip(X, y):
        mean, var = gp.predict(x)
        assert abs(mean - t) / gp.y_std < 1e-6
        assert var >= 0.0
    p = cbopt.KernelParams(1.0, [1.0], 1e-3)
    assert cbopt.kernel_matern52([0.0], [1.0], p) == pytest.approx(0.5239941088318203, abs=1e-12)
    value, grad = cbopt.log_marginal_likelihood_with_gradient(X, y, p)
    assert value == pytest.approx(cbopt.log_marginal_likelihood(X, y, p))
    assert len(grad) == 3


def test_transforms():
    assert cbopt.transform_objective(2.5, 2.5) == 0.0
    assert cbopt.transform_constraint(cbopt.Task.regression, 0.5, 1.0) < 0.0
    assert cbopt.transform_constraint(cbopt.Task.classification, 0.5, 1.0) > 0.0
    assert cbopt.raw_feasible(cbopt.Task.classification, 0.9, 0.86)


def test_ask_tell_synthetic():
    space = cbopt.synthetic_space("energy_tradeoff")
    spec = cbopt.ProblemSpec(space, cbopt.Task.regression, 1.0, budget=10)
    opt = cbopt.Optimizer(spec, cbopt.Mode.cbo, seed=4)
    while not opt.done:
        proposal = opt.ask()
        opt.tell(proposal.values, cbopt.evaluate_synthetic("energy_tradeoff", proposal.values, 7))
    assert len(opt.observations) == 10
    assert opt.observations[0].values == space.default_config()
    restored = cbopt.Optimizer.restore(opt.snapshot())
    assert len(restored.observations) == 10
    best = opt.recommend()
    assert best is not None


def test_run_with_python_evaluator_survives_failures():
    space = cbopt.SearchSpace([cbopt.ParamSpec.continuous("x", 0.0, 1.0)])
    spec = cbopt.ProblemSpec(space, cbopt.Task.regression, 0.5, budget=8)

    def evaluator(values, iteration):
        if iteration % 3 == 2:
            return cbopt.EvaluationResult.failed("diverged")
        return cbopt.EvaluationResult(1.0 + values["x"], values["x"])

    records = cbopt.run(spec, cbopt.Mode.penalized_bo, 0, evaluator)
    assert len(records) == 8
    assert any(r.observation.failed for r in records)


def test_grid_optimum_matches_fixture():
    fixture = json.loads((FIXTURES / "synthetic_optima.json").read_text())
    for name in cbopt.synthetic_problems():
        x, objective, _ = cbopt.grid_optimum(name, fixture[name]["resolution"])
        assert objective == pytest.approx(fixture[name]["objective"], abs=1e-9)


def test_external_evaluator_override():
    result = cbopt.evaluate_external(f"sh {DATA}/reported_runtime.sh {{params_file}}", {"x": 1.0})
    assert result.ok and result.runtime_reported
    assert result.runtime_seconds == 3.25


def test_run_config(tmp_path):
    config = json.dumps({"problem": {"synthetic": "gardner1"}, "budget": 8, "seeds": [0]})
    summary, traces = cbopt.run_config(config, str(tmp_path))
    assert Path(summary).exists()
    assert len(traces) == 2
    with pytest.raises(cbopt.ConfigError):
        cbopt.run_config("{", str(tmp_path))
