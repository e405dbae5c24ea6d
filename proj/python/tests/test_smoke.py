import json

import pytest

import rdos

SMALL = {
    "agent": {"seed": 7},
    "environment": "webshop",
    "tasks": 2,
    "seeds": [0],
    "stage1": {"max_iters": 100},
    "stage2": {"iterations": 3},
    "evaluation": {"episodes": 2},
}


def test_insertion_score_example():
    w = rdos.InsertionWeights(1.0, 1.0, 1.0)
    assert rdos.insertion_score(1, 0.5, 0.2, w, 2) == pytest.approx(1.7 / 3, abs=1e-12)
    assert rdos.insertion_score(1, 0.5, None, w, 2) == pytest.approx(1.5 / 3, abs=1e-12)


def test_payload_score_example():
    s = rdos.payload_score([2.0, 4.0, 6.0], [1, 1, 1])
    assert s["s_fid"] == 1
    assert s["s_stab"] == pytest.approx(-8.0 / 3)
    assert s["total"] == pytest.approx(7.0 / 3)
    assert rdos.s_stab([4.0, 4.0, 4.0]) == 0.0


def test_select_intervals_prefers_weight():
    got = rdos.select_intervals([(0, 2, 1.0), (1, 3, 2.0), (4, 5, 0.5)], 2)
    assert got == [(1, 3, 2.0), (4, 5, 0.5)]
    with pytest.raises(ValueError):
        rdos.select_intervals([(0, 1, 1.0)], 0)


def test_cost_arithmetic():
    assert rdos.rollout_count(25, 12, 3) == 900
    assert rdos.rollout_count(30, 12, 3) == 1080
    assert rdos.api_cost([(1_000_000, 1_000_000)]) == pytest.approx(2.0)
    assert rdos.e2e(0.9, 0.5) == pytest.approx(0.45)


def test_bootstrap_is_seeded():
    xs = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0]
    a = rdos.bootstrap_ci(xs, 0.95, 500, 3)
    assert a == rdos.bootstrap_ci(xs, 0.95, 500, 3)
    assert a[1] <= a[0] <= a[2]


def test_config_errors_name_the_key():
    with pytest.raises(rdos.ConfigError, match="agent.temperature"):
        rdos.effective_config({"agent": {"temperature": 1}})
    eff = rdos.effective_config(SMALL)
    assert eff["tasks"] == 2
    assert rdos.config_hash(SMALL) == rdos.config_hash(json.dumps(SMALL))


def test_run_experiment_round_trip(tmp_path):
    out = tmp_path / "run"
    res = rdos.run_experiment(SMALL, out_dir=str(out))
    assert len(res["records"]) == 2
    assert 0.0 <= res["report"]["asr_h"] <= 1.0
    again = rdos.run_experiment(SMALL)
    assert again["records"] == res["records"]
    text = rdos.report(out / "records.jsonl")
    assert res["config_hash"] in text
    csv = rdos.convergence_csv(out / "records.jsonl")
    assert csv.startswith("method,task,iteration,objective")
