"""Acceptance battery: headline guarantees at desk scale.

Each test pins one end-to-end claim with a hard tolerance (or hard ratio, or
byte identity) plus a wall-clock budget, and records a one-line verdict that
the terminal summary prints after the run.  The numbers here are contractual;
a failing test means the claim does not hold, not that the test needs a
looser knob.
"""

import time

import numpy as np

from dilute_rls import analysis, estimator, graph, model
from dilute_rls.harness import runner, scenarios
from dilute_rls.harness.config import ExperimentConfig, validate
from dilute_rls.streams import substream

from _support import iid_exogenous, record_acceptance, shift_mix, small_arx


def _verdict(tag: str, ok: bool, detail: str) -> None:
    record_acceptance(f"{tag} {'PASS' if ok else 'FAIL'} — {detail}")


def _graph_for(n: int, pick: int):
    if n == 1:
        return graph.identity_sequence(1)
    makers = [
        graph.gossip_ring,
        graph.complete_uniform,
        shift_mix,
        lambda n: graph.metropolis_static(n, [(i, i + 1) for i in range(n - 1)]),
    ]
    return makers[pick % 4](n)


# ---------------------------------------------------------------------------
# 1. the recursion IS the batch solution
# ---------------------------------------------------------------------------

def test_ac1_recursion_matches_batch_solution():
    t0 = time.perf_counter()
    worst = 0.0
    families = set()
    agent_counts = set()
    for seed in range(200):
        traj, theta, seq, beta, t, p = scenarios.random_instance(seed)
        families.add(seq.name.split("(")[0])
        agent_counts.add(traj.n)
        rec = estimator.run_horizon(traj, theta, seq, None, beta, t, dimension=p)
        for i in range(traj.n):
            target = estimator.closed_form_estimate(
                traj, seq, i, t, beta, dimension=p
            )
            dev = np.linalg.norm(rec.final[i].theta - target)
            worst = max(worst, dev / max(1.0, np.linalg.norm(target)))
    elapsed = time.perf_counter() - t0
    covered = len(families) == 5 and agent_counts == {1, 2, 3, 4}
    ok = worst <= 1e-8 and elapsed < 30.0 and covered
    _verdict(
        "AC1", ok,
        "distributed recursion equals weighted batch least squares on 200 "
        f"random instances: max rel dev {worst:.2e} (tol 1e-8), "
        f"{elapsed:.1f}s (budget 30s)",
    )
    assert worst <= 1e-8
    assert elapsed < 30.0
    assert covered, (sorted(families), sorted(agent_counts))


# ---------------------------------------------------------------------------
# 2. classical sanity anchors
# ---------------------------------------------------------------------------

def test_ac2_single_agent_solves_normal_equations():
    seq = graph.identity_sequence(1)
    worst = 0.0
    for trial in range(50):
        rng = substream(trial, "acc-single")
        p = int(rng.integers(1, 9))
        t = int(rng.integers(5, 31))
        m = int(rng.integers(1, 3))
        beta = float(rng.uniform(0.5, 20.0))
        sigma = float(rng.uniform(0.0, 0.5))
        traj, theta, _ = iid_exogenous(
            n=1, T=t, budget=p + 4, sigma=sigma, seed=100 + trial, m=m
        )
        rec = estimator.run_horizon(traj, theta, seq, None, beta, t, dimension=p)
        Phi = traj.regressors(p, t)[:, 0, :]
        Y = traj.y[1:t + 1, 0, :]
        target = np.linalg.solve(np.eye(p) / beta + Phi.T @ Phi, Phi.T @ Y)
        worst = max(worst, float(np.max(np.abs(rec.final[0].theta - target))))
    ok = worst <= 1e-10
    _verdict(
        "AC2a", ok,
        "single agent reduces to regularized least squares on 50 instances: "
        f"max abs dev {worst:.2e} (tol 1e-10)",
    )
    assert worst <= 1e-10


def test_ac2_finite_support_recovered_exactly_without_noise():
    # support 4 = run dimension, so the truncation terms must vanish exactly
    rng = substream(3, "acc-recovery")
    theta = model.FiniteSupportField([rng.normal(size=2) for _ in range(4)])
    comp = substream(5, "acc-recovery-phi").normal(size=(501, 2, 4))
    traj = model.simulate_exogenous(comp, theta, model.zero_noise(2), 2, 500, 0)

    eps = model.residual_block(traj, theta, 4, 500)
    s_t = analysis.residual_energy(traj, theta, 500, dimension=4)
    gamma_sq = analysis.tail_weight_sq(theta, 500, dimension=4)

    rec = estimator.run_horizon(
        traj, theta, graph.gossip_ring(2), None, 1e5, 500, dimension=4
    )
    err = max(
        float(np.sqrt(analysis.estimation_error_sq(est, theta)))
        for est in rec.final
    )
    ok = bool(np.all(eps == 0.0)) and s_t == 0.0 and gamma_sq == 0.0 and err < 1e-6
    _verdict(
        "AC2b", ok,
        "noise-free finite-support model is recovered: residual and tail "
        f"terms exactly 0, max Frobenius error {err:.2e} at t=500 (tol 1e-6)",
    )
    assert np.all(eps == 0.0)
    assert s_t == 0.0
    assert gamma_sq == 0.0
    assert err < 1e-6


# ---------------------------------------------------------------------------
# 3. combine step never loses information (matrix ordering audit)
# ---------------------------------------------------------------------------

def test_ac3_consensus_information_ordering():
    worst = np.inf
    for trial in range(20):
        rng = substream(trial, "acc-psd")
        n = int(rng.integers(2, 5))
        t = int(rng.integers(20, 101))
        p = int(rng.integers(1, 7))
        m = int(rng.integers(1, 3))
        beta = float(rng.uniform(0.5, 10.0))
        sigma = (0.0, 0.1, 0.3)[trial % 3]
        seq = _graph_for(n, trial)
        if trial % 5 == 0:
            traj, theta, _ = small_arx(n=n, T=t, sigma=max(sigma, 0.05), seed=trial)
        else:
            traj, theta, _ = iid_exogenous(
                n=n, T=t, budget=p + 4, sigma=sigma, seed=trial, m=m
            )
        rec = estimator.run_horizon(
            traj, theta, seq, None, beta, t, dimension=p, keep_states=True
        )
        audit = analysis.consensus_psd_audit(rec, traj, seq)
        worst = min(worst, float(audit.info_gap.min()), float(audit.cov_gap.min()))
        assert audit.passed, (trial, worst)
    ok = worst >= -1e-9
    _verdict(
        "AC3", ok,
        "information/covariance ordering holds at every step of 20 random "
        f"multi-agent runs: min eigenvalue gap {worst:.2e} (tol -1e-9)",
    )
    assert worst >= -1e-9


# ---------------------------------------------------------------------------
# 4. network energy balance
# ---------------------------------------------------------------------------

def test_ac4_network_energy_balance():
    worst = np.inf
    for trial in range(20):
        rng = substream(trial, "acc-energy")
        n = int(rng.integers(1, 5))
        p = int(rng.integers(1, 7))
        m = int(rng.integers(1, 3))
        beta = float(rng.uniform(0.5, 10.0))
        sigma = (0.0, 0.05, 0.2, 0.4)[trial % 4]
        seq = _graph_for(n, trial)
        traj, theta, _ = iid_exogenous(
            n=n, T=50, budget=p + 4, sigma=sigma, seed=200 + trial, m=m
        )
        rec = estimator.run_horizon(
            traj, theta, seq, None, beta, 50, dimension=p, keep_states=True
        )
        audit = analysis.energy_inequality_audit(rec, traj, theta, tol=1e-7)
        worst = min(worst, audit.worst)
        assert audit.passed, (trial, audit.worst)
    ok = worst >= -1e-7
    _verdict(
        "AC4", ok,
        "accumulated-gain energy bound holds on every prefix (t' <= 50) of 20 "
        f"random runs: worst normalized slack {worst:.2e} (tol -1e-7)",
    )
    assert worst >= -1e-7


# ---------------------------------------------------------------------------
# 5. certified ring: product floors and the information floor
# ---------------------------------------------------------------------------

def test_ac5_certified_ring_keeps_information_floor():
    ring = graph.gossip_ring(4)
    delta, L = ring.delta, ring.joint_window
    assert delta == 0.4 and L == 4

    floor_ok = True
    for s in (0, 3, 7):
        for k in range(s, s + 12):
            rep = graph.adjacency_product_floor_audit(ring, delta, k, s)
            floor_ok = floor_ok and rep.passed

    worst_gap = np.inf
    for trial in range(10):
        rng = substream(trial, "acc-floor")
        p = int(rng.integers(1, 5))
        beta = float(rng.uniform(1.0, 10.0))
        traj, theta, _ = iid_exogenous(
            n=4, T=30, budget=p + 4, sigma=0.1, seed=300 + trial
        )
        lam, empty = analysis.network_gram_min_eig(traj, 30, L, beta, dimension=p)
        assert not empty  # 30 > n*L + 2 = 18
        rec = estimator.run_horizon(traj, theta, ring, None, beta, 30, dimension=p)
        worst_gap = min(worst_gap, analysis.information_floor_gap(rec, lam, delta, L))
    ok = floor_ok and worst_gap >= -1e-9
    _verdict(
        "AC5", ok,
        "gossip ring (delta=0.4, L=4) passes product-floor audits up to "
        f"length 12 and the information floor on 10 runs: worst gap "
        f"{worst_gap:.2e} (tol -1e-9)",
    )
    assert floor_ok
    assert worst_gap >= -1e-9


# ---------------------------------------------------------------------------
# 6. cooperation pays: block excitation at T = 10^4
# ---------------------------------------------------------------------------

def _block_config() -> ExperimentConfig:
    return ExperimentConfig(raw={
        "scenario": "block_excitation", "mode": "fixed_t", "n": "4",
        "beta": "100.0", "horizons": "10000", "seeds": "0, 1, 2, 3, 4",
        "out": "unused", "graph.kind": "gossip_ring",
        "schedule.kind": "constant", "schedule.p": "8",
        "noise.kind": "gaussian", "noise.sigma": "0.1",
        "scenario.block_size": "2",
    })


def test_ac6_block_excitation_cooperation_beats_isolation():
    cfg = _block_config()
    validate(cfg)
    sched = scenarios.schedule_from_config(cfg)
    T, p, beta, L = 10_000, 8, 100.0, 4
    guide_margins, split_ratios, foreign_ratios, times = [], [], [], []
    for seed in range(5):
        t0 = time.perf_counter()
        scn = scenarios.build_scenario(cfg, seed)
        rec = estimator.run_horizon(scn.traj, scn.theta, scn.seq, sched, beta, T)
        lam, empty = analysis.network_gram_min_eig(scn.traj, T, L, beta, sched)
        assert not empty
        guide = p * np.log(float(T)) / lam
        guide_margins.append(float(np.max(rec.error_sq[-1])) / guide)

        ratios = analysis.excitation_ratios(scn.traj, T, L, beta, sched)
        split_ratios.append(float(ratios.noncooperative.min() / ratios.cooperative))

        # isolated agents never learn the blocks they cannot see
        rec_id = estimator.run_horizon(
            scn.traj, scn.theta, graph.identity_sequence(4), sched, beta, T
        )
        theta_full = scn.theta.rows(p)
        for i in range(4):
            mask = np.ones(p, dtype=bool)
            mask[2 * i: 2 * i + 2] = False
            init = float(np.linalg.norm(theta_full[mask]))
            stuck = float(
                np.linalg.norm(rec_id.final[i].theta[mask] - theta_full[mask])
            )
            foreign_ratios.append(stuck / init)
        times.append(time.perf_counter() - t0)

    ok = (
        max(guide_margins) <= 10.0
        and min(split_ratios) >= 100.0
        and min(foreign_ratios) >= 0.5
        and max(times) < 120.0
    )
    _verdict(
        "AC6", ok,
        "block excitation at T=1e4 over 5 seeds: error^2 <= "
        f"{max(guide_margins):.2e}x the p*log(T)/lambda_min guide (cap 10x), "
        f"isolated/cooperative excitation ratio >= {min(split_ratios):.0f} "
        f"(floor 100), foreign-block error stays {min(foreign_ratios):.2f}x "
        f"initial under the identity graph (floor 0.5), max "
        f"{max(times):.1f}s/seed (budget 120s)",
    )
    assert max(guide_margins) <= 10.0
    assert min(split_ratios) >= 100.0
    assert min(foreign_ratios) >= 0.5
    assert max(times) < 120.0


# ---------------------------------------------------------------------------
# 7/8. slowly growing dimension: convergence and per-round regret
# ---------------------------------------------------------------------------

def _arx_config() -> ExperimentConfig:
    return ExperimentConfig(raw={
        "scenario": "arx_geometric", "mode": "fixed_t", "n": "4",
        "beta": "100.0", "horizons": "1000, 10000", "seeds": "0, 1, 2, 3, 4",
        "out": "unused", "graph.kind": "gossip_ring",
        "schedule.kind": "polylog", "schedule.alpha": "2.0",
        "noise.kind": "gaussian", "noise.sigma": "0.1",
    })


def test_ac7_growing_dimension_drives_error_down():
    cfg = _arx_config()
    validate(cfg)
    sched = scenarios.schedule_from_config(cfg)
    t0 = time.perf_counter()
    errs_small, errs_big = [], []
    for seed in range(5):
        scn = scenarios.build_scenario(cfg, seed)
        for t, sink in ((1_000, errs_small), (10_000, errs_big)):
            rec = estimator.run_horizon(
                scn.traj, scn.theta, scn.seq, sched, 100.0, t
            )
            sink.append(float(np.mean(rec.error_sq[-1])))
    elapsed = time.perf_counter() - t0
    drop = float(np.median(errs_small) / np.median(errs_big))
    ok = drop >= 4.0 and elapsed < 300.0
    _verdict(
        "AC7", ok,
        "infinite-order model under log^2(t) dimensions: median error^2 over "
        f"5 seeds drops {drop:.1f}x from t=1e3 to t=1e4 (floor 4x), "
        f"{elapsed:.0f}s (budget 300s)",
    )
    assert drop >= 4.0
    assert elapsed < 300.0


def test_ac8_synchronized_replay_and_regret_decay():
    cfg = _arx_config()
    sched = scenarios.schedule_from_config(cfg)
    scn = scenarios.build_scenario(cfg, 0)
    t0 = time.perf_counter()
    sync = estimator.run_synchronized(
        scn.traj, scn.theta, scn.seq, sched, 100.0, 10_000
    )
    elapsed = time.perf_counter() - t0
    acc = np.cumsum(sync.regret.sum(axis=1))
    avg_small = float(acc[99]) / 100.0
    avg_big = float(acc[9_999]) / 10_000.0
    ratio = avg_big / avg_small

    # the epoch replay must agree with per-horizon recomputation bit for bit
    exact = True
    for k in range(1, 51):
        rec_k = estimator.run_horizon(scn.traj, scn.theta, scn.seq, sched, 100.0, k)
        exact = exact and np.array_equal(
            sync.thetas[k], np.stack([e.theta for e in rec_k.final])
        )
    ok = ratio <= 0.5 and exact and elapsed < 600.0
    _verdict(
        "AC8", ok,
        "synchronized replay: averaged regret falls from "
        f"{avg_small:.3f} at t=1e2 to {avg_big:.4f} at t=1e4 "
        f"(ratio {ratio:.3f}, cap 0.5), per-horizon recomputation identical "
        f"for t <= 50, {elapsed:.0f}s (budget 600s)",
    )
    assert ratio <= 0.5
    assert exact
    assert elapsed < 600.0


# ---------------------------------------------------------------------------
# 9. sweeps are reproducible across thread counts
# ---------------------------------------------------------------------------

def test_ac9_sweep_output_independent_of_thread_count(tmp_path):
    raw = {
        "scenario": "exogenous_iid", "mode": "sweep", "n": "2",
        "beta": "2.0", "horizons": "5, 9", "seeds": "0, 1, 2",
        "out": str(tmp_path / "a"), "graph.kind": "gossip_ring",
        "schedule.kind": "polylog", "schedule.alpha": "1.5",
        "noise.kind": "gaussian", "noise.sigma": "0.1",
        "scenario.budget": "8", "sweep.alphas": "1.5, 2.5",
        "threads": "1",
    }
    cfg1 = ExperimentConfig(raw=dict(raw))
    validate(cfg1)
    cfg2 = cfg1.with_overrides(out=str(tmp_path / "b"), threads="3")
    runner.run_sweep(cfg1)
    runner.run_sweep(cfg2)
    b1 = open(runner.sweep_path(cfg1), "rb").read()
    b2 = open(runner.sweep_path(cfg2), "rb").read()
    rows = b1.decode().splitlines()
    ok = b1 == b2 and len(rows) == 1 + 2 * 3 * 2
    _verdict(
        "AC9", ok,
        f"sweep CSV ({len(rows) - 1} cells) is byte-identical across thread "
        "counts 1 and 3",
    )
    assert b1 == b2
    assert len(rows) == 1 + 2 * 3 * 2  # header + alphas x seeds x horizons
