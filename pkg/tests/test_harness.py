"""Config parsing, scenarios, runner pipeline, CLI exit codes, determinism."""

import json
import os

import numpy as np
import pytest

from dilute_rls import model
from dilute_rls.errors import ConfigError, MissingArtifact
from dilute_rls.harness import cli, plots, runner, scenarios
from dilute_rls.harness.config import (
    ExperimentConfig,
    load_config,
    parse_config_text,
    validate,
)


def base_raw(out, **extra):
    raw = {
        "scenario": "exogenous_iid",
        "mode": "fixed_t",
        "n": "2",
        "beta": "2.0",
        "horizons": "4, 8",
        "seeds": "0, 1",
        "out": str(out),
        "graph.kind": "gossip_ring",
        "schedule.kind": "constant",
        "schedule.p": "3",
        "noise.kind": "gaussian",
        "noise.sigma": "0.1",
        "scenario.budget": "8",
    }
    raw.update({k: str(v) for k, v in extra.items()})
    return raw


# ---------------------------------------------------------------------------
# config parsing and validation
# ---------------------------------------------------------------------------

def test_parse_config_text_basics():
    raw = parse_config_text(
        """
        # comment
        scenario = exogenous_iid
        n = 3   # trailing comment
        horizons = 10, 100

        graph.kind = gossip_ring
        """
    )
    assert raw["scenario"] == "exogenous_iid"
    assert raw["n"] == "3"
    assert raw["horizons"] == "10, 100"
    assert raw["graph.kind"] == "gossip_ring"


def test_parse_config_rejects_bad_lines():
    with pytest.raises(ConfigError) as err:
        parse_config_text("just some words\n")
    assert "line 1" in err.value.keys
    with pytest.raises(ConfigError):
        parse_config_text("a = 1\na = 2\n")


def test_typed_accessors_and_sections(tmp_path):
    cfg = ExperimentConfig(raw=base_raw(tmp_path))
    assert cfg.get_int("n") == 2
    assert cfg.get_float("beta") == 2.0
    assert cfg.get_int_list("horizons") == [4, 8]
    assert cfg.get_str("missing", "fallback") == "fallback"
    assert cfg.section("schedule") == {"kind": "constant", "p": "3"}
    with pytest.raises(ConfigError) as err:
        cfg.get_int("beta")  # "2.0" is not an int
    assert err.value.keys == ("beta",)
    with pytest.raises(ConfigError):
        cfg.get_float("never-set")


def test_validate_lists_offending_keys(tmp_path):
    raw = base_raw(tmp_path)
    del raw["beta"]
    raw["horizons"] = "10, 10"       # not strictly increasing
    raw["graph.kind"] = "warp_drive"
    with pytest.raises(ConfigError) as err:
        validate(ExperimentConfig(raw=raw))
    assert set(err.value.keys) == {"beta", "horizons", "graph.kind"}


def test_validate_schedule_parameter_required(tmp_path):
    raw = base_raw(tmp_path)
    del raw["schedule.p"]
    with pytest.raises(ConfigError) as err:
        validate(ExperimentConfig(raw=raw))
    assert "schedule.p" in err.value.keys


def test_config_hash_excludes_output_keys(tmp_path):
    a = ExperimentConfig(raw=base_raw(tmp_path))
    b = ExperimentConfig(raw=base_raw("/somewhere/else", threads="7"))
    assert a.hash() == b.hash()
    c = ExperimentConfig(raw=base_raw(tmp_path, beta="3.0"))
    assert a.hash() != c.hash()


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "exp.cfg"
    lines = [f"{k} = {v}" for k, v in base_raw(tmp_path).items()]
    path.write_text("\n".join(lines) + "\n")
    cfg = load_config(str(path))
    validate(cfg)
    assert cfg.get_str("scenario") == "exogenous_iid"
    assert cfg.path == str(path)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def test_block_excitation_structure(tmp_path):
    cfg = ExperimentConfig(
        raw=base_raw(
            tmp_path,
            scenario="block_excitation",
            n="3",
            horizons="6, 12",
            **{"scenario.block_size": "2"},
        )
    )
    scn = scenarios.build_block_excitation(cfg, seed=0)
    comp = scn.traj.comp
    assert comp.shape == (13, 3, 6)
    for i in range(3):
        own = comp[:, i, 2 * i : 2 * i + 2]
        assert np.all(np.abs(own) == 1.0)
        foreign = np.delete(comp[:, i], [2 * i, 2 * i + 1], axis=1)
        assert np.all(foreign == 0.0)
    assert scn.theta.tail_norm(6) == 0.0
    assert scn.theta.tail_norm(5) > 0.0


def test_arx_geometric_scenario(tmp_path):
    cfg = ExperimentConfig(
        raw=base_raw(tmp_path, scenario="arx_geometric", horizons="5, 20")
    )
    scn = scenarios.build_arx_geometric(cfg, seed=1)
    assert scn.kind == "arx"
    assert scn.traj.T == 20
    # B_q = 0.5^q lives on even rows of the interleaved parameter field
    assert abs(np.linalg.norm(scn.theta.row(2)) - 0.5) < 1e-12
    assert np.linalg.norm(scn.theta.row(1)) == 0.0


def test_scenarios_deterministic(tmp_path):
    cfg = ExperimentConfig(raw=base_raw(tmp_path))
    a = scenarios.build_scenario(cfg, seed=3)
    b = scenarios.build_scenario(cfg, seed=3)
    assert np.array_equal(a.traj.y, b.traj.y)
    assert np.array_equal(a.traj.comp, b.traj.comp)
    c = scenarios.build_scenario(cfg, seed=4)
    assert not np.array_equal(a.traj.y, c.traj.y)


def test_random_instances_cover_agent_counts():
    ns = set()
    for seed in range(20):
        traj, theta, seq, beta, t, p = scenarios.random_instance(seed)
        assert seq.n == traj.n
        assert 1 <= t <= 30 and 1 <= p <= 8
        ns.add(traj.n)
    assert ns == {1, 2, 3, 4}


# ---------------------------------------------------------------------------
# runner pipeline
# ---------------------------------------------------------------------------

def test_pipeline_simulate_estimate_analyze(tmp_path):
    cfg = ExperimentConfig(raw=base_raw(tmp_path, seeds="0"))
    sim = runner.run_simulate(cfg)
    assert sim["exit"] == 0
    assert os.path.exists(runner.traj_path(cfg, 0))

    est = runner.run_estimate(cfg)
    assert est["exit"] == 0
    for t in (4, 8):
        assert os.path.exists(runner.record_path(cfg, 0, t))
        assert os.path.exists(runner.estimates_path(cfg, 0, t))

    ana = runner.run_analyze(cfg)
    assert ana["exit"] == 0
    mpath = runner.metrics_path(cfg, 0)
    assert os.path.exists(mpath)
    from dilute_rls.analysis import MetricsTable

    table = MetricsTable.from_csv(mpath)
    metrics = {r[2] for r in table.rows}
    assert {"error_sq", "r_t", "s_t", "gamma_t", "lambda_min_t",
            "avg_regret", "energy_audit_worst"} <= metrics
    summary = json.load(open(ana["summary"]))
    assert summary["audits_passed"] is True


def test_estimate_without_trajectory_is_dependency_error(tmp_path):
    cfg = ExperimentConfig(raw=base_raw(tmp_path, seeds="0"))
    with pytest.raises(MissingArtifact):
        runner.run_estimate(cfg)


def test_synchronized_mode_outputs(tmp_path):
    cfg = ExperimentConfig(
        raw=base_raw(tmp_path, seeds="0", mode="synchronized", horizons="3, 6")
    )
    runner.run_simulate(cfg)
    est = runner.run_estimate(cfg)
    assert est["exit"] == 0
    spath = runner.sync_path(cfg, 0)
    lines = open(spath).read().splitlines()
    assert lines[0] == "k,i,regret,dimension"
    assert len(lines) == 1 + 6 * 2
    ana = runner.run_analyze(cfg)
    assert ana["exit"] == 0


def test_sweep_thread_count_invariance(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cfg1 = ExperimentConfig(raw=base_raw(out1, threads="1"))
    cfg2 = ExperimentConfig(raw=base_raw(out2, threads="3"))
    runner.run_sweep(cfg1)
    runner.run_sweep(cfg2)
    b1 = open(runner.sweep_path(cfg1), "rb").read()
    b2 = open(runner.sweep_path(cfg2), "rb").read()
    assert b1 == b2
    header = b1.decode().splitlines()[0]
    assert header.split(",")[:4] == ["alpha", "seed", "t", "p"]


def test_sweep_alpha_grid(tmp_path):
    cfg = ExperimentConfig(
        raw=base_raw(
            tmp_path,
            seeds="0",
            **{"schedule.kind": "polylog", "schedule.alpha": "2.0",
               "sweep.alphas": "1.5, 2.0"},
        )
    )
    del cfg.raw["schedule.p"]
    res = runner.run_sweep(cfg)
    lines = open(res["outputs"][0]).read().splitlines()
    assert len(lines) == 1 + 2 * 1 * 2  # alphas x seeds x horizons
    alphas = {ln.split(",")[0] for ln in lines[1:]}
    assert alphas == {"1.5", "2.0"}


def test_check_graph_passes_for_gossip(tmp_path):
    cfg = ExperimentConfig(raw=base_raw(tmp_path, **{"graph.kind": "gossip_ring"}))
    res = runner.run_check_graph(cfg)
    assert res["exit"] == 0
    assert any("weight_balanced" in ln for ln in res["report_lines"])
    summary = json.load(open(res["summary"]))
    assert summary["all_pass"] is True
    assert summary["checks"]["product_floor"] is True


def test_verify_battery_passes(tmp_path):
    cfg = ExperimentConfig(raw=base_raw(tmp_path, seeds="0"))
    res = runner.run_verify(cfg)
    assert res["exit"] == 0
    summary = json.load(open(res["summary"]))
    assert summary["all_pass"] is True
    assert set(summary["results"]) == {
        "closed_form_equivalence",
        "single_agent_rls",
        "energy_inequality",
        "consensus_psd_order",
        "exact_recovery",
        "synchronized_replay",
    }


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def write_cfg(tmp_path, **extra):
    path = tmp_path / "exp.cfg"
    lines = [f"{k} = {v}" for k, v in base_raw(tmp_path / "runs", **extra).items()]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_cli_happy_path(tmp_path, capsys):
    cfg = write_cfg(tmp_path, seeds="0")
    assert cli.main(["simulate", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "summary_simulate" in out


def test_cli_positional_config(tmp_path, capsys):
    cfg = write_cfg(tmp_path, seeds="0")
    assert cli.main(["simulate", cfg]) == 0
    capsys.readouterr()


def test_cli_no_config_exit_1(capsys):
    assert cli.main(["simulate"]) == 1
    report = json.loads(capsys.readouterr().err)
    assert report["error"] == "validation"
    assert report["keys"] == ["config"]


def test_cli_validation_error_exit_1(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("scenario = exogenous_iid\n")
    assert cli.main(["simulate", "--config", str(path)]) == 1
    err = capsys.readouterr().err
    report = json.loads(err)
    assert report["error"] == "validation"
    assert "beta" in report["keys"]


def test_cli_missing_config_exit_1(tmp_path, capsys):
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "validation"


def test_cli_missing_trajectory_exit_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, seeds="0")
    assert cli.main(["estimate", "--config", cfg]) == 2
    report = json.loads(capsys.readouterr().err)
    assert report["error"] == "runtime"
    assert "simulate" in report["message"]


def test_cli_seed_override(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert cli.main(["simulate", "--config", cfg, "--seed-override", "9"]) == 0
    capsys.readouterr()
    files = os.listdir(tmp_path / "runs")
    assert any("_s9.csv" in f for f in files)
    assert not any("_s0.csv" in f for f in files)


def test_cli_out_override(tmp_path, capsys):
    cfg = write_cfg(tmp_path, seeds="0")
    target = tmp_path / "elsewhere"
    assert cli.main(["simulate", "--config", cfg, "--out", str(target)]) == 0
    capsys.readouterr()
    assert any(f.startswith("traj_") for f in os.listdir(target))


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------

def test_plot_bytes_deterministic(tmp_path):
    from dilute_rls.analysis import AGGREGATE, MetricsTable

    table = MetricsTable()
    for t, v in ((10, 0.5), (100, 0.1), (1000, 0.02)):
        table.add(t, AGGREGATE, "error_sq", v)
        table.add(t, AGGREGATE, "avg_regret", v / 2)
    first = plots.emit_plots(table, str(tmp_path / "p1"), "x")
    second = plots.emit_plots(table, str(tmp_path / "p2"), "x")
    assert len(first) == 2
    for a, b in zip(first, second):
        assert open(a, "rb").read() == open(b, "rb").read()


def test_plot_single_point_table(tmp_path):
    from dilute_rls.analysis import AGGREGATE, MetricsTable

    table = MetricsTable()
    table.add(10, AGGREGATE, "error_sq", 0.5)
    written = plots.emit_plots(table, str(tmp_path), "solo")
    assert len(written) == 1
    assert open(written[0]).read(5) == "<?xml"
