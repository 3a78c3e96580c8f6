"""Command implementations behind the CLI.

Artifacts are keyed by (config hash, seed) so identical experiments land on
identical file names; every float is written with shortest round-trip repr,
making byte-identical reruns the expected behavior rather than a surprise.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .. import analysis, estimator, graph, model
from ..errors import ConfigError, MissingArtifact
from .config import ExperimentConfig, validate
from .scenarios import build_scenario, random_instance, schedule_from_config
from . import plots


# ---------------------------------------------------------------------------
# artifact paths
# ---------------------------------------------------------------------------

def _outdir(cfg: ExperimentConfig) -> str:
    out = cfg.get_str("out")
    os.makedirs(out, exist_ok=True)
    return out


def traj_path(cfg: ExperimentConfig, seed: int) -> str:
    return os.path.join(cfg.get_str("out"), f"traj_{cfg.hash()}_s{seed}.csv")


def record_path(cfg: ExperimentConfig, seed: int, t: int) -> str:
    return os.path.join(cfg.get_str("out"), f"record_{cfg.hash()}_s{seed}_t{t}.csv")


def estimates_path(cfg: ExperimentConfig, seed: int, t: int) -> str:
    return os.path.join(cfg.get_str("out"), f"estimates_{cfg.hash()}_s{seed}_t{t}.csv")


def sync_path(cfg: ExperimentConfig, seed: int) -> str:
    return os.path.join(cfg.get_str("out"), f"sync_{cfg.hash()}_s{seed}.csv")


def metrics_path(cfg: ExperimentConfig, seed: int) -> str:
    return os.path.join(cfg.get_str("out"), f"metrics_{cfg.hash()}_s{seed}.csv")


def sweep_path(cfg: ExperimentConfig) -> str:
    return os.path.join(cfg.get_str("out"), f"sweep_{cfg.hash()}.csv")


def _write_summary(cfg: ExperimentConfig, command: str, payload: dict) -> str:
    path = os.path.join(cfg.get_str("out"), f"summary_{command}_{cfg.hash()}.json")
    body = {"command": command, "config_hash": cfg.hash(), **payload}
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _threads(cfg: ExperimentConfig) -> int:
    if cfg.has("threads"):
        return max(1, cfg.get_int("threads"))
    env = os.environ.get("DILUTE_RLS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("DILUTE_RLS_THREADS is not an integer", keys=["threads"])
    return 1


# ---------------------------------------------------------------------------
# simulate / estimate
# ---------------------------------------------------------------------------

def run_simulate(cfg: ExperimentConfig) -> dict:
    validate(cfg)
    _outdir(cfg)
    outputs = []
    for seed in cfg.get_int_list("seeds"):
        scn = build_scenario(cfg, seed)
        path = traj_path(cfg, seed)
        model.trajectory_to_csv(scn.traj, path)
        outputs.append(path)
    summary = _write_summary(cfg, "simulate", {"outputs": sorted(outputs)})
    return {"exit": 0, "summary": summary, "outputs": outputs}


def _load_dependencies(cfg: ExperimentConfig, seed: int):
    """Scenario pieces plus the persisted trajectory (which must exist)."""
    scn = build_scenario(cfg, seed)
    path = traj_path(cfg, seed)
    if not os.path.exists(path):
        raise MissingArtifact(f"trajectory not found: {path} (run simulate first)")
    traj = model.trajectory_from_csv(path, scn.kind)
    return scn, traj


def _sync_to_csv(sync: estimator.SynchronizedRun, n: int, out: str) -> None:
    with open(out, "w", newline="") as fh:
        fh.write("k,i,regret,dimension\n")
        for k in range(sync.t_max):
            dim = int(sync.dims[max(k, 1)])
            for i in range(n):
                reg = repr(float(sync.regret[k, i])) if sync.regret is not None else "nan"
                fh.write(f"{k},{i},{reg},{dim}\n")


def run_estimate(cfg: ExperimentConfig) -> dict:
    validate(cfg)
    _outdir(cfg)
    mode = cfg.get_str("mode")
    if mode == "sweep":
        raise ConfigError("mode=sweep belongs to the sweep command", keys=["mode"])
    sched = schedule_from_config(cfg)
    beta = cfg.get_float("beta")
    horizons = cfg.get_int_list("horizons")
    outputs = []
    for seed in cfg.get_int_list("seeds"):
        scn, traj = _load_dependencies(cfg, seed)
        if mode == "fixed_t":
            for t in horizons:
                rec = estimator.run_horizon(traj, scn.theta, scn.seq, sched, beta, t)
                rpath = record_path(cfg, seed, t)
                estimator.record_to_csv(rec, rpath)
                epath = estimates_path(cfg, seed, t)
                estimator.estimates_to_csv(rec, epath)
                outputs.extend([rpath, epath])
        else:
            sync = estimator.run_synchronized(
                traj, scn.theta, scn.seq, sched, beta, max(horizons)
            )
            spath = sync_path(cfg, seed)
            _sync_to_csv(sync, traj.n, spath)
            outputs.append(spath)
    summary = _write_summary(cfg, "estimate", {"outputs": sorted(outputs)})
    return {"exit": 0, "summary": summary, "outputs": outputs}


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _lag_window(cfg: ExperimentConfig, seq: graph.GraphSequence) -> int | None:
    if cfg.has("graph.L"):
        return cfg.get_int("graph.L")
    return seq.joint_window


def _collect_metrics(cfg: ExperimentConfig, scn, traj, sched, seed: int) -> analysis.MetricsTable:
    beta = cfg.get_float("beta")
    horizons = cfg.get_int_list("horizons")
    mode = cfg.get_str("mode")
    L = _lag_window(cfg, scn.seq)
    table = analysis.MetricsTable()
    agg = analysis.AGGREGATE

    for t in horizons:
        p = sched.evaluate(t)
        table.add(t, agg, "dimension", float(p))
        table.add(t, agg, "r_t", analysis.regressor_energy(traj, t, sched=sched))
        table.add(t, agg, "s_t", analysis.residual_energy(traj, scn.theta, t, sched=sched))
        table.add(t, agg, "gamma_t", analysis.tail_weight_sq(scn.theta, t, sched=sched))
        table.add(
            t, agg, "noise_envelope",
            analysis.noise_envelope_total(scn.noise, t, traj.n),
        )
        if L is not None:
            lam, empty = analysis.network_gram_min_eig(traj, t, L, beta, sched=sched)
            table.add(t, agg, "lambda_min_t", lam)
            if empty:
                table.add(t, agg, "gram_window_empty", 1.0)
            ratios = analysis.excitation_ratios(traj, t, L, beta, sched=sched)
            table.add(t, agg, "coop_ratio", ratios.cooperative)
            table.add(t, agg, "noncoop_ratio_max", float(np.max(ratios.noncooperative)))
            for i in range(traj.n):
                table.add(t, i, "noncoop_ratio", float(ratios.noncooperative[i]))

    if mode == "fixed_t":
        for t in horizons:
            rec = estimator.run_horizon(traj, scn.theta, scn.seq, sched, beta, t)
            errs = [
                analysis.estimation_error_sq(est, scn.theta) for est in rec.final
            ]
            for i, err in enumerate(errs):
                table.add(t, i, "error_sq", err)
            table.add(t, agg, "error_sq", float(np.mean(errs)))
            report = analysis.prediction_regret(traj, scn.theta, rec, mode="fixed_t")
            table.add(t, agg, "avg_regret", report.averaged)
            table.add(t, agg, "gain_bound", analysis.normalized_gain_bound(rec))
            if L is not None:
                lam, empty = analysis.network_gram_min_eig(traj, t, L, beta, sched=sched)
                if not empty and scn.seq.delta is not None:
                    gap = analysis.information_floor_gap(rec, lam, scn.seq.delta, L)
                    table.add(t, agg, "info_floor_gap", gap)
    else:
        t_max = max(horizons)
        sync = estimator.run_synchronized(
            traj, scn.theta, scn.seq, sched, beta, t_max
        )
        per_step = np.sum(sync.regret, axis=1)
        acc = np.cumsum(per_step)
        for t in horizons:
            table.add(t, agg, "sync_avg_regret", float(acc[t - 1] / t))
        for k in sorted(sync.thetas):
            if k in horizons:
                errs = [
                    analysis.estimation_error_sq(sync.thetas[k][i], scn.theta)
                    for i in range(traj.n)
                ]
                table.add(k, agg, "error_sq", float(np.mean(errs)))

    audit_t = cfg.get_int("analyze.audit_horizon", min(50, max(horizons)))
    audit_t = min(audit_t, traj.T)
    rec = estimator.run_horizon(
        traj, scn.theta, scn.seq, sched, beta, audit_t, keep_states=True
    )
    energy = analysis.energy_inequality_audit(rec, traj, scn.theta)
    table.add(audit_t, agg, "energy_audit_worst", energy.worst)
    psd = analysis.consensus_psd_audit(rec, traj, scn.seq)
    table.add(audit_t, agg, "psd_info_gap_min", float(np.min(psd.info_gap)))
    table.add(audit_t, agg, "psd_cov_gap_min", float(np.min(psd.cov_gap)))
    return table


def run_analyze(cfg: ExperimentConfig) -> dict:
    validate(cfg)
    _outdir(cfg)
    sched = schedule_from_config(cfg)
    outputs = []
    audit_flags = []
    for seed in cfg.get_int_list("seeds"):
        scn, traj = _load_dependencies(cfg, seed)
        table = _collect_metrics(cfg, scn, traj, sched, seed)
        mpath = metrics_path(cfg, seed)
        table.to_csv(mpath)
        outputs.append(mpath)
        outputs.extend(
            plots.emit_plots(table, cfg.get_str("out"), f"{cfg.hash()}_s{seed}")
        )
        _, worst = table.series("energy_audit_worst")
        _, info_gap = table.series("psd_info_gap_min")
        audit_flags.append(
            bool(worst.size and worst[0] >= -1e-7)
            and bool(info_gap.size and info_gap[0] >= -1e-9)
        )
    summary = _write_summary(
        cfg,
        "analyze",
        {"outputs": sorted(outputs), "audits_passed": all(audit_flags)},
    )
    return {"exit": 0, "summary": summary, "outputs": outputs}


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_cell(cfg, scn, traj, sched, beta, L, alpha, seed, t):
    rec = estimator.run_horizon(traj, scn.theta, scn.seq, sched, beta, t)
    errs = [analysis.estimation_error_sq(est, scn.theta) for est in rec.final]
    report = analysis.prediction_regret(traj, scn.theta, rec, mode="fixed_t")
    row = {
        "alpha": alpha,
        "seed": seed,
        "t": t,
        "p": rec.p,
        "error_sq": float(np.mean(errs)),
        "avg_regret": report.averaged,
        "r_t": analysis.regressor_energy(traj, t, dimension=rec.p),
        "s_t": analysis.residual_energy(traj, scn.theta, t, dimension=rec.p),
        "gamma_t": analysis.tail_weight_sq(scn.theta, t, dimension=rec.p),
    }
    if L is not None:
        lam, empty = analysis.network_gram_min_eig(traj, t, L, beta, dimension=rec.p)
        row["lambda_min_t"] = lam
        row["gram_window_empty"] = 1.0 if empty else 0.0
    else:
        row["lambda_min_t"] = float("nan")
        row["gram_window_empty"] = float("nan")
    return row


SWEEP_COLUMNS = [
    "alpha", "seed", "t", "p", "error_sq", "avg_regret",
    "r_t", "s_t", "gamma_t", "lambda_min_t", "gram_window_empty",
]


def run_sweep(cfg: ExperimentConfig) -> dict:
    validate(cfg)
    _outdir(cfg)
    beta = cfg.get_float("beta")
    horizons = cfg.get_int_list("horizons")
    seeds = cfg.get_int_list("seeds")
    base_kind = cfg.get_str("schedule.kind")
    if cfg.has("sweep.alphas"):
        if base_kind == "constant":
            raise ConfigError(
                "sweep.alphas requires a parametric schedule", keys=["sweep.alphas"]
            )
        alphas = cfg.get_float_list("sweep.alphas")
    elif base_kind == "constant":
        alphas = [float(cfg.get_int("schedule.p"))]
    else:
        alphas = [cfg.get_float("schedule.alpha")]

    def sched_for(alpha: float) -> model.DimensionSchedule:
        if base_kind == "constant":
            return model.constant_schedule(int(alpha))
        return model.SCHEDULES[base_kind](alpha)

    # one deterministic build per seed, shared read-only across cells
    built = {}
    for seed in seeds:
        scn = build_scenario(cfg, seed)
        built[seed] = (scn, scn.traj, _lag_window(cfg, scn.seq))

    cells = [
        (alpha, seed, t) for alpha in alphas for seed in seeds for t in horizons
    ]

    def work(cell):
        alpha, seed, t = cell
        scn, traj, L = built[seed]
        return _sweep_cell(cfg, scn, traj, sched_for(alpha), beta, L, alpha, seed, t)

    workers = _threads(cfg)
    if workers == 1:
        rows = [work(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(work, cells))

    rows.sort(key=lambda r: (r["alpha"], r["seed"], r["t"]))
    path = sweep_path(cfg)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            cols = []
            for col in SWEEP_COLUMNS:
                v = row[col]
                cols.append(str(v) if isinstance(v, int) else repr(float(v)))
            fh.write(",".join(cols) + "\n")
    summary = _write_summary(
        cfg, "sweep", {"outputs": [path], "cells": len(cells), "threads": workers}
    )
    return {"exit": 0, "summary": summary, "outputs": [path]}


# ---------------------------------------------------------------------------
# check-graph
# ---------------------------------------------------------------------------

def run_check_graph(cfg: ExperimentConfig) -> dict:
    validate(cfg)
    _outdir(cfg)
    from .scenarios import _graph_from_config

    seq = _graph_from_config(cfg)
    L = _lag_window(cfg, seq)
    window = max(12, 3 * (L or 1))
    checks: dict[str, bool] = {}
    details: dict[str, object] = {}

    checks["weight_balanced"] = all(
        graph.is_weight_balanced(seq.matrix(k)) for k in range(window)
    )
    if seq.delta is not None:
        checks["delta_nondegenerate"] = graph.is_delta_nondegenerate(
            seq, range(window), seq.delta
        )
        details["delta"] = seq.delta
    if L is not None:
        checks["jointly_connected"] = graph.is_jointly_connected(seq, L, range(3))
        details["joint_window"] = L
        delta = seq.delta if seq.delta is not None else 0.0
        if delta > 0:
            floor_ok = True
            worst = None
            for length in (2, 5, 12):
                report = graph.adjacency_product_floor_audit(
                    seq, delta, length - 1, 0
                )
                floor_ok = floor_ok and report.passed
                if report.violations:
                    worst = report.violations[0]
            checks["product_floor"] = floor_ok
            if worst is not None:
                details["first_floor_violation"] = str(worst)
    if seq.warning:
        details["warning"] = seq.warning

    all_pass = all(checks.values())
    lines = [f"{'PASS' if ok else 'FAIL'} {name}" for name, ok in sorted(checks.items())]
    summary = _write_summary(
        cfg,
        "check-graph",
        {
            "graph": seq.name,
            "checks": {k: bool(v) for k, v in checks.items()},
            "details": {k: str(v) for k, v in details.items()},
            "all_pass": all_pass,
        },
    )
    return {
        "exit": 0 if all_pass else 2,
        "summary": summary,
        "outputs": [],
        "report_lines": lines,
    }


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _verify_closed_form() -> tuple[bool, float]:
    worst = 0.0
    for seed in range(12):
        traj, theta, seq, beta, t, p = random_instance(seed)
        rec = estimator.run_horizon(traj, theta, seq, None, beta, t, dimension=p)
        for i in range(traj.n):
            target = estimator.closed_form_estimate(
                traj, seq, i, t, beta, dimension=p
            )
            dev = float(
                np.linalg.norm(rec.final[i].theta - target)
                / max(1.0, np.linalg.norm(target))
            )
            worst = max(worst, dev)
    return worst <= 1e-8, worst


def _verify_single_agent() -> tuple[bool, float]:
    worst = 0.0
    for seed in range(5):
        theta = model.GeometricField(1.0, 0.5, m=1, seed=seed)
        from ..streams import substream

        comp = substream(seed, "phi").normal(size=(13, 1, 8))
        noise = model.gaussian_noise(1, 0.1)
        traj = model.simulate_exogenous(comp, theta, noise, 1, 12, seed)
        p, beta = 4, 3.0
        rec = estimator.run_horizon(
            traj, theta, graph.identity_sequence(1), None, beta, 12, dimension=p
        )
        Phi = traj.regressors(p, 12)[:, 0]
        Y = traj.y[1:13, 0]
        target = np.linalg.solve(Phi.T @ Phi + np.eye(p) / beta, Phi.T @ Y)
        worst = max(worst, float(np.max(np.abs(rec.final[0].theta - target))))
    return worst <= 1e-10, worst


def _verify_audit_runs():
    shift = 0.5 * np.eye(3) + 0.5 * np.roll(np.eye(3), 1, axis=1)
    seqs = [
        graph.gossip_ring(3),
        graph.periodic_schedule([shift]),
        graph.complete_uniform(3),
    ]
    runs = []
    for idx, seq in enumerate(seqs):
        theta = model.GeometricField(1.0, 0.5, m=1, seed=idx)
        from ..streams import substream

        comp = substream(idx, "phi").normal(size=(16, 3, 8))
        noise = model.gaussian_noise(1, 0.2)
        traj = model.simulate_exogenous(comp, theta, noise, 3, 15, idx)
        rec = estimator.run_horizon(
            traj, theta, seq, None, 2.0, 15, dimension=4, keep_states=True
        )
        runs.append((rec, traj, theta, seq))
    return runs


def _verify_exact_recovery() -> tuple[bool, float]:
    from ..streams import substream

    rng = substream(404, "recovery-field")
    theta = model.FiniteSupportField([rng.normal(size=1) for _ in range(3)])
    comp = substream(404, "phi").normal(size=(201, 2, 3))
    traj = model.simulate_exogenous(comp, theta, model.zero_noise(1), 2, 200, 404)
    rec = estimator.run_horizon(
        traj, theta, graph.gossip_ring(2), None, 1e5, 200, dimension=3
    )
    err = max(
        np.sqrt(analysis.estimation_error_sq(est, theta)) for est in rec.final
    )
    return err < 1e-6, float(err)


def _verify_synchronized() -> tuple[bool, float]:
    from ..streams import substream

    theta = model.GeometricField(1.0, 0.5, m=1, seed=77)
    comp = substream(77, "phi").normal(size=(21, 2, 10))
    noise = model.gaussian_noise(1, 0.1)
    traj = model.simulate_exogenous(comp, theta, noise, 2, 20, 77)
    seq = graph.gossip_ring(2)
    sched = model.polylog_schedule(2.0)
    sync = estimator.run_synchronized(traj, theta, seq, sched, 2.0, 20)
    for k in range(1, 21):
        ref = estimator.run_horizon(traj, None, seq, sched, 2.0, k)
        if not np.array_equal(sync.thetas[k], np.stack([e.theta for e in ref.final])):
            return False, float(k)
    return True, 0.0


def run_verify(cfg: ExperimentConfig) -> dict:
    validate(cfg)
    _outdir(cfg)
    results: list[tuple[str, bool, float]] = []

    ok, val = _verify_closed_form()
    results.append(("closed_form_equivalence", ok, val))
    ok, val = _verify_single_agent()
    results.append(("single_agent_rls", ok, val))

    energy_worst = 0.0
    psd_worst = 0.0
    for rec, traj, theta, seq in _verify_audit_runs():
        audit = analysis.energy_inequality_audit(rec, traj, theta)
        energy_worst = min(energy_worst, audit.worst)
        psd = analysis.consensus_psd_audit(rec, traj, seq)
        psd_worst = min(psd_worst, float(np.min(psd.info_gap)), float(np.min(psd.cov_gap)))
    results.append(("energy_inequality", energy_worst >= -1e-7, energy_worst))
    results.append(("consensus_psd_order", psd_worst >= -1e-9, psd_worst))

    ok, val = _verify_exact_recovery()
    results.append(("exact_recovery", ok, val))
    ok, val = _verify_synchronized()
    results.append(("synchronized_replay", ok, val))

    results = [(name, bool(ok), float(value)) for name, ok, value in results]
    lines = [
        f"{'PASS' if ok else 'FAIL'} {name} ({value:.3e})"
        for name, ok, value in results
    ]
    all_pass = all(ok for _, ok, _ in results)
    summary = _write_summary(
        cfg,
        "verify",
        {
            "results": {name: {"passed": ok, "value": value} for name, ok, value in results},
            "all_pass": all_pass,
        },
    )
    return {
        "exit": 0 if all_pass else 2,
        "summary": summary,
        "outputs": [],
        "report_lines": lines,
    }
