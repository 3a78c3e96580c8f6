"""Distributed least squares over a digraph sequence, information form.

Each agent keeps the truncated estimate Theta_{k,i} (p x m), the information
matrix P_{k,i}^{-1} and its cached inverse.  A step has two halves:

  local:    b = 1/(1 + phi^T P phi),
            Theta_bar = Theta + b * (P phi)(y^T - phi^T Theta),
            Pbar^{-1} = P^{-1} + phi phi^T;
  combine:  P_{k+1,i}^{-1} = sum_j a_ij Pbar_{k+1,j}^{-1},
            Theta_{k+1,i} = P_{k+1,i} sum_j a_ij Pbar_{k+1,j}^{-1} Theta_bar_j.

With zero initial estimates the recursion is algebraically identical to the
closed-form weighted regularized least squares built from adjacency products,
which this module also implements as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import numerics
from .errors import ContractViolation
from .graph import GraphSequence, adjacency_product
from .model import DimensionSchedule, ParameterField


@dataclass
class AgentEstimate:
    """One agent's state: estimate, information matrix, cached covariance."""

    theta: np.ndarray  # (p, m)
    info: np.ndarray   # (p, p), P^{-1}
    cov: np.ndarray    # (p, p), P

    @property
    def p(self) -> int:
        return self.theta.shape[0]

    @property
    def m(self) -> int:
        return self.theta.shape[1]


def initial_estimate(p: int, m: int, beta: float, theta0: np.ndarray | None = None) -> AgentEstimate:
    """Fresh state with P_0 = beta * I and a zero (or supplied) estimate."""
    if p < 1 or m < 1:
        raise ContractViolation(f"need p, m >= 1, got p = {p}, m = {m}")
    if beta <= 0:
        raise ContractViolation(f"need beta > 0, got {beta}")
    if theta0 is None:
        theta0 = np.zeros((p, m))
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (p, m):
        raise ContractViolation(f"theta0 must be {(p, m)}, got {theta0.shape}")
    return AgentEstimate(
        theta=theta0.copy(),
        info=np.eye(p) / beta,
        cov=beta * np.eye(p),
    )


def local_update(est: AgentEstimate, phi: np.ndarray, y_next: np.ndarray):
    """One agent's data step; returns (theta_bar, info_bar, b)."""
    phi = np.asarray(phi, dtype=float).reshape(-1)
    y_next = np.asarray(y_next, dtype=float).reshape(-1)
    if phi.shape[0] != est.p or y_next.shape[0] != est.m:
        raise ContractViolation(
            f"dimension mismatch: phi {phi.shape}, y {y_next.shape}, state ({est.p}, {est.m})"
        )
    v = est.cov @ phi
    b = 1.0 / (1.0 + float(phi @ v))
    innovation = y_next - est.theta.T @ phi
    if not np.all(np.isfinite(innovation)):
        raise ContractViolation("non-finite innovation")
    theta_bar = est.theta + b * np.outer(v, innovation)
    info_bar = est.info + np.outer(phi, phi)
    return theta_bar, info_bar, b


WEIGHT_SUM_TOL = 1e-12


def combine(neighbors: Sequence[tuple]) -> AgentEstimate:
    """Fuse neighbor data steps: ``neighbors`` is [(weight, theta_bar, info_bar), ...].

    Weights must be nonnegative and sum to one; the summation order is the
    caller's list order, which run_horizon fixes to ascending agent index so
    results are bit-reproducible.
    """
    if not neighbors:
        raise ContractViolation("combine needs at least one neighbor")
    total = 0.0
    info = None
    S = None
    for weight, theta_bar, info_bar in neighbors:
        if weight < 0:
            raise ContractViolation(f"negative weight {weight}")
        total += weight
        contrib_info = weight * info_bar
        contrib_S = weight * (info_bar @ theta_bar)
        if info is None:
            info = contrib_info
            S = contrib_S
        else:
            info = info + contrib_info
            S = S + contrib_S
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise ContractViolation(f"weights sum to {total!r}, expected 1")
    factor = numerics.spd_factor(info)
    cov = numerics.factor_solve(factor, np.eye(info.shape[0]))
    theta = numerics.factor_solve(factor, S)
    return AgentEstimate(theta=theta, info=info, cov=0.5 * (cov + cov.T))


def predict(est: AgentEstimate, phi: np.ndarray) -> np.ndarray:
    """One-step predictor phi^T Theta for the agent's current estimate."""
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.shape[0] != est.p:
        raise ContractViolation(f"phi has {phi.shape[0]} components, state has {est.p}")
    return est.theta.T @ phi


# ---------------------------------------------------------------------------
# whole-horizon runs
# ---------------------------------------------------------------------------

@dataclass
class StepState:
    """Post-combine network state after one step (or the initial state)."""

    theta: np.ndarray  # (n, p, m)
    info: np.ndarray   # (n, p, p)
    cov: np.ndarray    # (n, p, p)


@dataclass
class RunRecord:
    """Everything a fixed-horizon run reports.

    Per-step arrays are indexed by the step k = 0..t-1 that produced them;
    ``regret[k]`` uses the pre-step estimates Theta_{k,i}, ``error_sq[k]`` the
    post-step estimates Theta_{k+1,i}.  ``states[k]`` (when kept) is the
    network state holding Theta_k, so it has t+1 entries.
    """

    t: int
    n: int
    p: int
    m: int
    beta: float
    b: np.ndarray
    innovation_norm: np.ndarray
    final: list
    regret: np.ndarray | None = None
    error_sq: np.ndarray | None = None
    lambda_min_info: np.ndarray | None = None
    states: list | None = None
    captured: dict | None = None
    meta: dict = field(default_factory=dict)


def _resolve_dimension(sched: DimensionSchedule | None, t: int, dimension: int | None) -> int:
    if dimension is not None:
        if dimension < 1:
            raise ContractViolation(f"need dimension >= 1, got {dimension}")
        return int(dimension)
    if sched is None:
        raise ContractViolation("need a schedule or an explicit dimension")
    return sched.evaluate(t)


def run_horizon(
    traj,
    theta_true: ParameterField | None,
    seq: GraphSequence,
    sched: DimensionSchedule | None,
    beta: float,
    t: int,
    init_theta: np.ndarray | None = None,
    *,
    dimension: int | None = None,
    keep_states: bool = False,
    capture: tuple[int, int] | None = None,
    track_spectrum: bool = False,
) -> RunRecord:
    """Run the distributed recursion to horizon t at dimension p_t.

    The computation at step k depends on the horizon only through the
    truncation dimension, so runs at different horizons with the same
    dimension produce bit-identical prefixes.
    """
    if seq.n != traj.n:
        raise ContractViolation(f"graph has {seq.n} agents, trajectory {traj.n}")
    if not (1 <= t <= traj.T):
        raise ContractViolation(f"horizon {t} outside [1, {traj.T}]")
    if beta <= 0:
        raise ContractViolation(f"need beta > 0, got {beta}")
    n, m = traj.n, traj.m
    p = _resolve_dimension(sched, t, dimension)

    Phi = traj.regressors(p, t)          # (t, n, p)
    Y = traj.y[1 : t + 1]                # (t, n, m)
    theta_p = theta_true.rows(p) if theta_true is not None else None
    if theta_p is not None:
        # model decomposition shortcut for the truncation residual; the
        # analysis module recomputes residuals independently from the tail
        Eps = Y - traj.w[1 : t + 1] - np.einsum("knp,pm->knm", Phi, theta_p)

    ests = [initial_estimate(p, m, beta, init_theta) for _ in range(n)]
    b_rec = np.empty((t, n))
    innov_rec = np.empty((t, n))
    regret_rec = np.empty((t, n)) if theta_p is not None else None
    err_rec = np.empty((t, n)) if theta_p is not None else None
    spec_rec = np.empty((t, n)) if track_spectrum else None

    def snapshot():
        return StepState(
            theta=np.stack([e.theta for e in ests]),
            info=np.stack([e.info for e in ests]),
            cov=np.stack([e.cov for e in ests]),
        )

    states = [snapshot()] if keep_states else None
    captured: dict = {}
    if capture is not None:
        lo, hi = capture
        if lo == 0:
            captured[0] = np.stack([e.theta for e in ests])

    for k in range(t):
        A = seq.matrix(k)
        if theta_p is not None:
            for i in range(n):
                resid = Phi[k, i] @ (theta_p - ests[i].theta) + Eps[k, i]
                regret_rec[k, i] = float(resid @ resid)
        bars = []
        for i in range(n):
            theta_bar, info_bar, b = local_update(ests[i], Phi[k, i], Y[k, i])
            bars.append((theta_bar, info_bar))
            b_rec[k, i] = b
            innov = Y[k, i] - ests[i].theta.T @ Phi[k, i]
            innov_rec[k, i] = float(np.linalg.norm(innov))
        new_ests = []
        for i in range(n):
            neighbors = [
                (A[i, j], bars[j][0], bars[j][1]) for j in range(n) if A[i, j] > 0.0
            ]
            new_ests.append(combine(neighbors))
        ests = new_ests
        if theta_p is not None:
            for i in range(n):
                diff = ests[i].theta - theta_p
                err_rec[k, i] = float(np.sum(diff * diff))
        if track_spectrum:
            for i in range(n):
                spec_rec[k, i] = float(np.linalg.eigvalsh(ests[i].info)[0])
        if keep_states:
            states.append(snapshot())
        if capture is not None and capture[0] <= k + 1 <= capture[1]:
            captured[k + 1] = np.stack([e.theta for e in ests])

    return RunRecord(
        t=t,
        n=n,
        p=p,
        m=m,
        beta=beta,
        b=b_rec,
        innovation_norm=innov_rec,
        final=ests,
        regret=regret_rec,
        error_sq=err_rec,
        lambda_min_info=spec_rec,
        states=states,
        captured=captured if capture is not None else None,
        meta={"graph": seq.name, "schedule": getattr(sched, "kind", None), "dimension": p},
    )


def closed_form_estimate(
    traj,
    seq: GraphSequence,
    i: int,
    t: int,
    beta: float,
    sched: DimensionSchedule | None = None,
    dimension: int | None = None,
) -> np.ndarray:
    """Batch form of the zero-initialized recursion for agent i at horizon t.

    Theta_{t,i}(t) = P_{t,i} * sum_j sum_{l<t} a^(t-1,l)_{ij} phi_{l,j} y_{l+1,j}^T
    with P_{t,i}^{-1} the matching weighted Gram plus the prior floor I/beta,
    and a^(k,l) the entries of the adjacency product A_k ... A_l.
    """
    if not (0 <= i < traj.n):
        raise ContractViolation(f"agent {i} outside [0, {traj.n})")
    if not (1 <= t <= traj.T):
        raise ContractViolation(f"horizon {t} outside [1, {traj.T}]")
    if beta <= 0:
        raise ContractViolation(f"need beta > 0, got {beta}")
    p = _resolve_dimension(sched, t, dimension)
    Phi = traj.regressors(p, t)
    Y = traj.y[1 : t + 1]
    G = np.eye(p) / beta
    V = np.zeros((p, traj.m))
    M = None
    for l in range(t - 1, -1, -1):
        M = seq.matrix(l) if M is None else M @ seq.matrix(l)
        wrow = M[i]
        G += np.einsum("j,jp,jq->pq", wrow, Phi[l], Phi[l])
        V += np.einsum("j,jp,jm->pm", wrow, Phi[l], Y[l])
    return numerics.spd_solve(0.5 * (G + G.T), V)


# ---------------------------------------------------------------------------
# synchronized (per-step) estimation via epoch replay
# ---------------------------------------------------------------------------

@dataclass
class SynchronizedRun:
    """Per-step estimates Theta_{k,i}(k) for k = 1..t_max, epoch by epoch.

    Within an epoch of constant dimension the per-step estimates coincide with
    one fixed-dimension run, so each epoch is replayed once instead of once
    per k.  ``regret[k]`` holds the synchronized regret term at step k
    (k = 0 uses the first epoch's dimension).
    """

    t_max: int
    dims: np.ndarray          # dims[k] = p_k for k = 1..t_max (index 0 unused)
    epochs: list              # (dimension, first_k, last_k)
    thetas: dict              # k -> (n, p_k, m)
    regret: np.ndarray | None # (t_max, n) rows k = 0..t_max-1


def dimension_epochs(sched: DimensionSchedule, t_max: int) -> list[tuple[int, int, int]]:
    """Maximal runs [a, e] of constant p_k over k = 1..t_max."""
    if t_max < 1:
        raise ContractViolation(f"need t_max >= 1, got {t_max}")
    epochs = []
    start = 1
    cur = sched.evaluate(1)
    for k in range(2, t_max + 1):
        pk = sched.evaluate(k)
        if pk < cur:
            raise ContractViolation("schedule must be nondecreasing")
        if pk != cur:
            epochs.append((cur, start, k - 1))
            start, cur = k, pk
    epochs.append((cur, start, t_max))
    return epochs


def run_synchronized(
    traj,
    theta_true: ParameterField | None,
    seq: GraphSequence,
    sched: DimensionSchedule,
    beta: float,
    t_max: int,
    with_regret: bool = True,
) -> SynchronizedRun:
    if not (1 <= t_max <= traj.T):
        raise ContractViolation(f"t_max {t_max} outside [1, {traj.T}]")
    epochs = dimension_epochs(sched, t_max)
    dims = np.zeros(t_max + 1, dtype=int)
    for j, a, e in epochs:
        dims[a : e + 1] = j
    want_regret = with_regret and theta_true is not None
    regret = np.zeros((t_max, traj.n)) if want_regret else None
    thetas: dict = {}
    for idx, (j, a, e) in enumerate(epochs):
        # interior epochs run one extra step so the regret term at k = e
        # (which uses Theta_e at this dimension) is available
        horizon = e if e == t_max else min(e + 1, t_max)
        rec = run_horizon(
            traj,
            theta_true if want_regret else None,
            seq,
            None,
            beta,
            horizon,
            dimension=j,
            capture=(a, e),
        )
        for k in range(a, e + 1):
            thetas[k] = rec.captured[k]
        if want_regret:
            lo = 0 if idx == 0 else a
            hi = min(e, t_max - 1)
            regret[lo : hi + 1] = rec.regret[lo : hi + 1]
    return SynchronizedRun(t_max=t_max, dims=dims, epochs=epochs, thetas=thetas, regret=regret)


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def record_to_csv(record: RunRecord, out) -> None:
    """Per-step per-agent rows (k, i, frobenius_error, b, innovation_norm, lambda_min_info)."""
    close = False
    if isinstance(out, (str, bytes)):
        out = open(out, "w", newline="")
        close = True
    try:
        out.write("k,i,frobenius_error,b,innovation_norm,lambda_min_info\n")
        for k in range(record.t):
            for i in range(record.n):
                err = (
                    repr(float(np.sqrt(record.error_sq[k, i])))
                    if record.error_sq is not None
                    else "nan"
                )
                lam = (
                    repr(float(record.lambda_min_info[k, i]))
                    if record.lambda_min_info is not None
                    else "nan"
                )
                out.write(
                    f"{k},{i},{err},{repr(float(record.b[k, i]))},"
                    f"{repr(float(record.innovation_norm[k, i]))},{lam}\n"
                )
    finally:
        if close:
            out.close()


def estimates_to_csv(record: RunRecord, out) -> None:
    """Dump final (and any captured) estimates as (k, i, row, col, value) rows."""
    close = False
    if isinstance(out, (str, bytes)):
        out = open(out, "w", newline="")
        close = True
    try:
        out.write("k,i,row,col,value\n")
        blocks = dict(record.captured or {})
        blocks[record.t] = np.stack([e.theta for e in record.final])
        for k in sorted(blocks):
            stack = blocks[k]
            for i in range(record.n):
                for r in range(stack.shape[1]):
                    for c in range(stack.shape[2]):
                        out.write(f"{k},{i},{r},{c},{repr(float(stack[i, r, c]))}\n")
    finally:
        if close:
            out.close()
