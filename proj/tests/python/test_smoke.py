import math

import numpy as np
import pytest

import dias


def small_scenario(**overrides):
    doc = {
        "cluster": {"slots": 2},
        "classes": [
            {
                "name": "only",
                "setup": {"deterministic_s": 1.0},
                "stages": [
                    {"name": "map", "tasks": 3, "task_time": {"deterministic_s": 1.0}, "drop": "map"},
                    {"name": "reduce", "tasks": 1, "task_time": {"deterministic_s": 2.0}, "drop": "reduce"},
                ],
            }
        ],
        "arrivals": {"marked_poisson_per_s": [0.05]},
        "policy": {"kind": "non_preemptive"},
        "horizon_s": 4000.0,
        "seed": 9,
    }
    doc.update(overrides)
    return doc


def test_phase_type_moments_and_cdf():
    d = dias.erlang(3, 2.0)
    assert d.phases == 3
    assert d.mean() == pytest.approx(1.5, abs=1e-12)
    assert d.variance() == pytest.approx(0.75, abs=1e-12)
    t = 1.2
    tail = sum((2.0 * t) ** i / math.factorial(i) for i in range(3))
    assert d.cdf(t) == pytest.approx(1.0 - math.exp(-2.0 * t) * tail, abs=1e-9)
    s = dias.convolve(dias.exponential(1.0), dias.exponential(4.0))
    assert s.mean() == pytest.approx(1.25, abs=1e-12)


def test_phase_type_from_arrays_and_sampling():
    d = dias.PhaseType(np.array([1.0, 0.0]), np.array([[-2.0, 2.0], [0.0, -1.0]]))
    assert d.mean() == pytest.approx(1.5)
    draws = d.sample(40000, seed=3)
    assert draws.shape == (40000,)
    assert draws.mean() == pytest.approx(1.5, rel=0.03)
    assert np.array_equal(draws, d.sample(40000, seed=3))


def test_invalid_phase_type_raises_library_error():
    with pytest.raises(dias.Error) as info:
        dias.PhaseType(np.array([1.0]), np.array([[1.0]]))
    assert info.value.args[0].isupper()


def test_wave_helpers():
    assert dias.effective_tasks(50, 0.2) == 40
    q = dias.wave_probabilities([1.0 / 40] * 40, 0.2, 20)
    assert q == pytest.approx([0.625, 0.375])


def test_predict_and_simulate_deterministic_chain():
    p = dias.predict(small_scenario())
    assert p["classes"][0]["mean_processing_s"] == pytest.approx(5.0)
    m = dias.simulate(small_scenario(), runs=2)
    assert m["runs"] == 2
    assert m["classes"][0]["mean_execution_s"]["mean"] == pytest.approx(5.0)
    assert m == dias.simulate(small_scenario(), runs=2)


def test_schema_errors_carry_codes():
    bad = small_scenario(surprise=True)
    with pytest.raises(dias.SchemaError) as info:
        dias.validate(bad)
    assert info.value.args[0] == "SCHEMA_UNKNOWN_KEY"
    assert isinstance(info.value, dias.Error)


def test_presets_and_sweep():
    assert set(dias.preset_names()) >= {"reference_two_priority"}
    assert dias.preset("reference_two_priority")["cluster"]["slots"] == 20
    result = dias.sweep(small_scenario(), {"theta_map.only": [0.0, 0.5]}, runs=1)
    exec_rows = [r for r in result["rows"] if r["metric"] == "mean_execution_s"]
    assert [r["mean"] for r in exec_rows] == pytest.approx([5.0, 4.0])


def test_plan_document():
    targets = {"classes": {"only": {"max_relative_error_pct": 20.0}}, "theta_grid": [0.0, 0.1], "replications": 2}
    p = dias.plan(small_scenario(), targets)
    assert p["document"] == "dias.plan"
    assert p["feasible"]
