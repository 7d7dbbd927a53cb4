import json

import numpy as np
import pytest

from stratnoise.channels import worst_case_infidelity
from stratnoise.cli import main
from stratnoise.experiment import (
    ConfigError, ExperimentConfig, build_protocol, channel_at, emit, from_json, plan_references, read_table,
    run_experiment, to_json, to_table,
)
from stratnoise.oracle import exact_expectation

FAST = {"relative": 0.3, "confidence": 0.99}

TOY = {
    "n": 3,
    "initial": ["+XII", "+IZI", "+IIZ"],
    "observables": ["+YXI", "+ZZI"],
    "ops": [["N", 0], ["G", "CX", [0, 1]], ["N", 1], ["G", "H", [2]], ["N", 2], ["G", "CX", [1, 2]],
            ["N", 2], ["G", "S", [0]], ["N", 1]],
}


def toy_config(**kw):
    base = dict(protocol="circuit", circuit=TOY, channel={"name": "amplitude_damping"}, epsilons=[0.05],
                precision=FAST)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize("bad", [
    {"epsilons": [-1e-3]},
    {"precision": {"relative": 1.5}},
    {"precision": {"relative": 0.1, "confidence": 1.0}},
    {"protocol": "toric"},
    {"channel": {"p": 0.1}},
    {"log_range": [0, 1e-3, 3]},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"colour": "red"})


def test_config_sweep_merges_log_range():
    cfg = ExperimentConfig(epsilons=[1e-3], log_range=[1e-5, 1e-3, 3])
    assert cfg.sweep == pytest.approx([1e-5, 1e-4, 1e-3])


@pytest.mark.parametrize("spec", [
    {"name": "depolarizing"}, {"name": "amplitude_damping"}, {"name": "z_rotation"},
    {"name": "random_unitary", "theta": 0.4, "phi": 1.1}, {"name": "worst_surface"},
    {"name": "random_nonunitary", "J": 3, "seed": 4},
])
@pytest.mark.parametrize("eps", [1e-5, 1e-3])
def test_channel_at_hits_infidelity(spec, eps):
    assert worst_case_infidelity(channel_at(spec, eps)) == pytest.approx(eps, rel=1e-3)


def test_plan_references_rules():
    eps = [1e-5, 1e-4, 1e-3]
    assert set(plan_references(eps, lambda r, e: 1.0).values()) == {1e-4}
    # coverage within a factor 2: every point needs its own reference
    near = lambda r, e: 1.0 if max(r, e) / min(r, e) <= 2 else 0.0
    assert plan_references(eps, near) == {e: e for e in eps}
    # an explicit candidate is used where it covers
    plan = plan_references(eps, near, candidates=[1.5e-3])
    assert plan[1e-3] == 1.5e-3 and plan[1e-5] == 1e-5


def test_empty_sweep_has_no_records():
    assert run_experiment(ExperimentConfig()).records == []


def test_custom_circuit_matches_dense_oracle():
    cfg = toy_config(precision={"relative": 0.05, "confidence": 0.99})
    rec = run_experiment(cfg).records[0]
    spec = build_protocol(cfg)
    exact = exact_expectation(spec, channel_at(cfg.channel, 0.05))
    assert np.all(np.abs(np.array(rec.f_hat) - exact) <= 3 * np.array(rec.f_std) + 1e-12)


def test_steane_sweep_deterministic_and_reuses_pools(tmp_path):
    cfg = ExperimentConfig(protocol="steane", epsilons=[1e-4, 1e-3], precision=FAST, seed=3,
                           pool_dir=str(tmp_path / "pools"))
    a = run_experiment(cfg)
    assert len(set(r.epsilon_ref for r in a.records)) == 1
    assert all(set(r.acceptance.values()) <= {1.0} for r in a.records)
    again = run_experiment(cfg)
    assert sum(r.simulations for r in again.records) == 0
    fresh = run_experiment(ExperimentConfig(**{**cfg.to_dict(), "pool_dir": str(tmp_path / "other")}))
    body = lambda res: {k: v for k, v in json.loads(to_json(res)).items() if k not in ("header", "config")}
    assert body(a) == body(fresh)
    assert [r.to_dict() for r in a.records] == [{**r.to_dict(), "simulations": s.simulations}
                                               for r, s in zip(again.records, a.records)]
    assert a.records[0].logical_infidelity < a.records[1].logical_infidelity


def test_emit_round_trips(tmp_path):
    res = run_experiment(toy_config(epsilons=[0.02, 0.05]))
    paths = emit(res, tmp_path, "both")
    assert [p.name for p in paths] == ["results.json", "results.csv"]
    back = from_json(paths[0].read_text())
    assert [r.to_dict(True) for r in back.records] == [r.to_dict(True) for r in res.records]
    assert back.config == res.config
    rows = read_table(paths[1].read_text())
    assert len(rows) == 2
    for row, r in zip(rows, res.records):
        assert row["epsilon"] == r.epsilon and row["logical_infidelity"] == r.logical_infidelity
    one = run_experiment(toy_config())
    assert len(to_table(one).strip().splitlines()) == 2
    with pytest.raises(ConfigError):
        emit(run_experiment(toy_config(epsilons=[])), tmp_path)


def test_cli_verbs(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(toy_config().to_dict()))
    assert main(["decompose", "--config", str(cfg)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep[0]["worst_infidelity"] == pytest.approx(0.05, rel=1e-6)
    out = tmp_path / "out"
    pools = tmp_path / "pools"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--format", "both", "--quiet",
                 "--pool-dir", str(pools)]) == 0
    assert (out / "results.json").exists() and (out / "results.csv").exists()
    capsys.readouterr()
    assert main(["pools", "--pool-dir", str(pools)]) == 0
    assert "k=1" in capsys.readouterr().out
    assert main(["oracle", "--config", str(cfg)]) == 0
    ora = json.loads(capsys.readouterr().out)
    assert len(ora[0]["readout"]) == 2
    assert main(["run", "--config", str(cfg), "--epsilon", "-1"]) == 2
