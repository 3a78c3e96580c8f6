"""Named experiment scenarios: parameter field + trajectory + graph + noise.

Builders are deterministic functions of (config, seed).  Scenario-specific
knobs live under ``scenario.`` keys in the config; the graph comes from the
``graph.`` section so the same data-generating process can be paired with
different communication patterns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import graph, model
from ..errors import ConfigError
from ..streams import substream
from .config import ExperimentConfig


@dataclass
class ScenarioInstance:
    theta: model.ParameterField
    traj: object            # ArxTrajectory | ExogenousTrajectory
    seq: graph.GraphSequence
    noise: model.NoiseModel
    kind: str               # trajectory store kind: "arx" | "exogenous"
    meta: dict = field(default_factory=dict)


def _graph_from_config(cfg: ExperimentConfig) -> graph.GraphSequence:
    kind = cfg.get_str("graph.kind")
    n = cfg.get_int("n")
    if kind == "metropolis_static":
        spec = cfg.get_str("graph.edges", "")
        edges = []
        for part in spec.split(";"):
            part = part.strip()
            if not part:
                continue
            a, b = part.split("-")
            edges.append((int(a), int(b)))
        if not edges:
            raise ConfigError("metropolis_static needs graph.edges", keys=["graph.edges"])
        return graph.metropolis_static(n, edges)
    if kind == "periodic_schedule":
        raise ConfigError(
            "periodic_schedule is not config-describable; use the library API",
            keys=["graph.kind"],
        )
    return graph.GENERATORS[kind](n)


def _noise_from_config(cfg: ExperimentConfig, m: int) -> model.NoiseModel:
    kind = cfg.get_str("noise.kind")
    if kind == "gaussian":
        return model.gaussian_noise(m, cfg.get_float("noise.sigma"))
    if kind == "uniform_bounded":
        return model.uniform_noise(m, cfg.get_float("noise.bound"))
    return model.zero_noise(m)


def schedule_from_config(cfg: ExperimentConfig) -> model.DimensionSchedule:
    kind = cfg.get_str("schedule.kind")
    if kind == "constant":
        return model.constant_schedule(cfg.get_int("schedule.p"))
    return model.SCHEDULES[kind](cfg.get_float("schedule.alpha"))


def _horizon_cap(cfg: ExperimentConfig) -> int:
    return max(cfg.get_int_list("horizons"))


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_block_excitation(cfg: ExperimentConfig, seed: int) -> ScenarioInstance:
    """Each agent excites only its own coordinate block.

    Agent i's regressor components are i.i.d. +-1 on coordinates
    i*block_size+1 .. (i+1)*block_size and exactly zero elsewhere, so the
    agent's own Gram matrix is singular on every foreign block while the
    pooled network Gram covers the union.  The parameter is finite-support
    across all n*block_size coordinates with deterministic rows.
    """
    n = cfg.get_int("n")
    m = cfg.get_int("m", 1)
    block = cfg.get_int("scenario.block_size", 2)
    T = _horizon_cap(cfg)
    total = n * block
    rows = [np.full(m, 1.0 + 0.5 * (q % 3)) for q in range(total)]
    theta = model.FiniteSupportField(rows)
    signs = substream(seed, "block-excitation").integers(0, 2, size=(T + 1, n, block))
    comp = np.zeros((T + 1, n, total))
    for i in range(n):
        comp[:, i, i * block : (i + 1) * block] = 2.0 * signs[:, i] - 1.0
    noise = _noise_from_config(cfg, m)
    traj = model.simulate_exogenous(comp, theta, noise, n, T, seed)
    return ScenarioInstance(
        theta=theta,
        traj=traj,
        seq=_graph_from_config(cfg),
        noise=noise,
        kind="exogenous",
        meta={"block_size": block, "total_support": total},
    )


def build_arx_geometric(cfg: ExperimentConfig, seed: int) -> ScenarioInstance:
    """Scalar ARX with geometrically decaying input coefficients.

    Defaults follow the convergence-trend setup: A_q = 0, B_q = 0.5^q,
    i.i.d. standard gaussian inputs, gaussian observation noise.
    """
    n = cfg.get_int("n")
    T = _horizon_cap(cfg)
    a_scale = cfg.get_float("scenario.a_scale", 0.0)
    b_scale = cfg.get_float("scenario.b_scale", 1.0)
    decay = cfg.get_float("scenario.decay", 0.5)
    coeffs = model.geometric_arx(1, 1, a_scale, b_scale, decay)
    u = substream(seed, "input").normal(size=(T + 1, n, 1))
    noise = _noise_from_config(cfg, 1)
    traj = model.simulate_arx(coeffs, u, noise, n, T, seed)
    return ScenarioInstance(
        theta=coeffs.parameter_field(),
        traj=traj,
        seq=_graph_from_config(cfg),
        noise=noise,
        kind="arx",
        meta={"decay": decay},
    )


def build_exact_recovery(cfg: ExperimentConfig, seed: int) -> ScenarioInstance:
    """Finite-support parameter, PE gaussian regressors, typically zero noise.

    With a constant dimension at or above the support, truncation vanishes
    identically and noise-free runs recover the parameter exactly (up to the
    vanishing prior term).
    """
    n = cfg.get_int("n")
    m = cfg.get_int("m", 1)
    support = cfg.get_int("scenario.support", 4)
    T = _horizon_cap(cfg)
    rng = substream(seed, "recovery-field")
    rows = [rng.normal(size=m) for _ in range(support)]
    theta = model.FiniteSupportField(rows)
    comp = substream(seed, "phi").normal(size=(T + 1, n, support))
    noise = _noise_from_config(cfg, m)
    traj = model.simulate_exogenous(comp, theta, noise, n, T, seed)
    return ScenarioInstance(
        theta=theta,
        traj=traj,
        seq=_graph_from_config(cfg),
        noise=noise,
        kind="exogenous",
        meta={"support": support},
    )


def build_exogenous_iid(cfg: ExperimentConfig, seed: int) -> ScenarioInstance:
    """Geometric parameter field with i.i.d. gaussian regressor components."""
    n = cfg.get_int("n")
    m = cfg.get_int("m", 1)
    lam = cfg.get_float("scenario.lam", 0.5)
    c = cfg.get_float("scenario.c", 1.0)
    budget = cfg.get_int("scenario.budget", 32)
    T = _horizon_cap(cfg)
    theta = model.GeometricField(c, lam, m=m, seed=seed)
    comp = substream(seed, "phi").normal(size=(T + 1, n, budget))
    noise = _noise_from_config(cfg, m)
    traj = model.simulate_exogenous(comp, theta, noise, n, T, seed)
    return ScenarioInstance(
        theta=theta,
        traj=traj,
        seq=_graph_from_config(cfg),
        noise=noise,
        kind="exogenous",
        meta={"budget": budget},
    )


SCENARIOS = {
    "block_excitation": build_block_excitation,
    "arx_geometric": build_arx_geometric,
    "exact_recovery": build_exact_recovery,
    "exogenous_iid": build_exogenous_iid,
}


def build_scenario(cfg: ExperimentConfig, seed: int) -> ScenarioInstance:
    name = cfg.get_str("scenario")
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}", keys=["scenario"])
    return SCENARIOS[name](cfg, seed)


# ---------------------------------------------------------------------------
# self-contained random instances (verification battery)
# ---------------------------------------------------------------------------

def random_instance(seed: int):
    """Small random estimation problem for oracle batteries.

    Returns (traj, theta, seq, beta, t, p).  Cycles agent counts, graph
    generators, field families and data kinds deterministically with the
    seed.
    """
    rng = substream(seed, "instance")
    n = int(rng.integers(1, 5))
    t = int(rng.integers(1, 31))
    p = int(rng.integers(1, 9))
    beta = float(rng.uniform(0.5, 20.0))
    makers = [
        lambda: graph.gossip_ring(n),
        lambda: graph.complete_uniform(n),
        lambda: graph.identity_sequence(n),
        lambda: graph.metropolis_static(
            n, [(i, i + 1) for i in range(n - 1)]
        ) if n > 1 else graph.identity_sequence(n),
        lambda: graph.periodic_schedule(
            [0.5 * np.eye(n) + 0.5 * np.roll(np.eye(n), 1, axis=1)]
        ),
    ]
    seq = makers[int(rng.integers(0, len(makers)))]()
    m = int(rng.integers(1, 3))
    if rng.random() < 0.5:
        theta = model.GeometricField(1.0, float(rng.uniform(0.3, 0.7)), m=m, seed=seed)
    else:
        support = int(rng.integers(1, 7))
        theta = model.FiniteSupportField(
            [rng.normal(size=m) for _ in range(support)]
        )
    budget = max(p + 4, 12)
    comp = rng.normal(size=(t + 1, n, budget))
    sigma = float(rng.uniform(0.0, 0.3))
    noise = model.gaussian_noise(m, sigma) if sigma > 0.01 else model.zero_noise(m)
    traj = model.simulate_exogenous(comp, theta, noise, n, t, seed)
    return traj, theta, seq, beta, t, p
