"""Quantities the convergence and regret guarantees are stated in.

Everything here is recomputed from first principles (trajectory store, tail
formulas, kept run states) rather than read back from the estimator's own
bookkeeping, so these functions double as independent checks of the runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from . import numerics
from .errors import ContractViolation, MissingArtifact
from .estimator import RunRecord, SynchronizedRun
from .graph import GraphSequence
from .model import (
    DimensionSchedule,
    NoiseModel,
    ParameterField,
    residual_block,
    truncation_residual,
)


def _resolve_dimension(sched, t, dimension):
    if dimension is not None:
        if dimension < 1:
            raise ContractViolation(f"need dimension >= 1, got {dimension}")
        return int(dimension)
    if sched is None:
        raise ContractViolation("need a schedule or an explicit dimension")
    return sched.evaluate(t)


# ---------------------------------------------------------------------------
# error and excitation functionals
# ---------------------------------------------------------------------------

def estimation_error_sq(theta_est, theta: ParameterField, spectral: bool = False) -> float:
    """Squared distance from a truncated estimate to the full parameter.

    Frobenius route: ||est - Theta(p)||_F^2 + sum_{q>p} ||row_q||^2.
    Spectral route: lambda_max of the m x m Gram of the same difference,
    (est - Theta(p))^T (est - Theta(p)) + tail Gram.
    """
    est = theta_est.theta if hasattr(theta_est, "theta") else np.asarray(theta_est, dtype=float)
    p = est.shape[0]
    diff = est - theta.rows(p)
    if not spectral:
        return float(np.sum(diff * diff)) + theta.tail_sq(p)
    gram = diff.T @ diff + theta.tail_sq_matrix(p)
    _, top = numerics.sym_eigen_extremes(0.5 * (gram + gram.T))
    return top


def network_gram(
    traj,
    t: int,
    L: int,
    beta: float,
    sched: DimensionSchedule | None = None,
    dimension: int | None = None,
) -> tuple[np.ndarray, bool]:
    """Network information matrix with the connectivity-lag window.

    Sums phi phi^T over all agents and k <= t - n*L - 2, plus the prior floor
    I/beta.  For t <= n*L + 2 the window is treated as empty; the floor alone
    is returned with the flag set.
    """
    if L < 1 or beta <= 0:
        raise ContractViolation(f"need L >= 1 and beta > 0, got L = {L}, beta = {beta}")
    p = _resolve_dimension(sched, t, dimension)
    cutoff = t - traj.n * L - 2
    G = np.eye(p) / beta
    if t <= traj.n * L + 2:
        return G, True
    Phi = traj.regressors(p, cutoff + 1)
    G += np.einsum("knp,knq->pq", Phi, Phi)
    return 0.5 * (G + G.T), False


def network_gram_min_eig(
    traj,
    t: int,
    L: int,
    beta: float,
    sched: DimensionSchedule | None = None,
    dimension: int | None = None,
) -> tuple[float, bool]:
    """lambda_min of the windowed network Gram; flag marks an empty window."""
    G, empty = network_gram(traj, t, L, beta, sched=sched, dimension=dimension)
    low, _ = numerics.sym_eigen_extremes(G)
    return low, empty


def regressor_energy(
    traj, t: int, sched: DimensionSchedule | None = None, dimension: int | None = None
) -> float:
    """r_t = 1 + sum over agents and k < t of ||phi_{k,i}(t)||^2."""
    p = _resolve_dimension(sched, t, dimension)
    Phi = traj.regressors(p, t)
    return 1.0 + float(np.sum(Phi * Phi))


def residual_energy(
    traj,
    theta: ParameterField,
    t: int,
    sched: DimensionSchedule | None = None,
    dimension: int | None = None,
) -> float:
    """s_t = sum over agents and k < t of ||eps_{k,i}(t)||^2, tails summed honestly."""
    p = _resolve_dimension(sched, t, dimension)
    eps = residual_block(traj, theta, p, t)
    return float(np.sum(eps * eps))


def tail_weight_sq(
    theta: ParameterField,
    t: int,
    sched: DimensionSchedule | None = None,
    dimension: int | None = None,
) -> float:
    """gamma_t = (sum_{q > p_t} ||row_q||)^2, the squared truncated mass."""
    p = _resolve_dimension(sched, t, dimension)
    return theta.tail_norm(p) ** 2


def noise_envelope_total(noise: NoiseModel, t: int, n: int) -> float:
    """d(t) = sqrt(sum_i d_i(t)^2) for n agents sharing one noise family."""
    if n < 1:
        raise ContractViolation(f"need n >= 1, got {n}")
    return math.sqrt(n) * noise.envelope(t)


@dataclass
class ExcitationRatios:
    """p_t log t over the cooperative / per-agent information floors."""

    cooperative: float
    noncooperative: np.ndarray  # (n,)
    window_empty: bool
    t: int
    p: int


def excitation_ratios(
    traj,
    t: int,
    L: int,
    beta: float,
    sched: DimensionSchedule | None = None,
    dimension: int | None = None,
) -> ExcitationRatios:
    """Cooperative vs per-agent excitation: p_t log t / lambda_min(Gram).

    The cooperative Gram pools all agents over the lag window; each
    noncooperative Gram uses only the agent's own regressors over the whole
    horizon with the same regularization floor.
    """
    p = _resolve_dimension(sched, t, dimension)
    numer = p * math.log(t) if t > 1 else 0.0
    coop_eig, empty = network_gram_min_eig(traj, t, L, beta, dimension=p)
    Phi = traj.regressors(p, t)
    solo = np.empty(traj.n)
    for i in range(traj.n):
        G = np.einsum("kp,kq->pq", Phi[:, i], Phi[:, i]) + np.eye(p) / beta
        low, _ = numerics.sym_eigen_extremes(0.5 * (G + G.T))
        solo[i] = numer / low
    return ExcitationRatios(
        cooperative=numer / coop_eig,
        noncooperative=solo,
        window_empty=empty,
        t=t,
        p=p,
    )


def information_floor_gap(record: RunRecord, gram_min_eig: float, delta: float, L: int) -> float:
    """min_i lambda_min(P_{t,i}^{-1}) - delta^{nL} * lambda_min(network Gram).

    Nonnegative when the product-entry floor argument holds for the run.
    """
    if not (0 < delta <= 1) or L < 1:
        raise ContractViolation(f"need 0 < delta <= 1 and L >= 1, got {delta}, {L}")
    lows = []
    for est in record.final:
        low, _ = numerics.sym_eigen_extremes(est.info)
        lows.append(low)
    return min(lows) - delta ** (record.n * L) * gram_min_eig


def normalized_gain_bound(record: RunRecord) -> float:
    """max over steps and agents of phi^T P phi / p = (1/b - 1) / p."""
    g = 1.0 / record.b - 1.0
    return float(np.max(g)) / record.p


# ---------------------------------------------------------------------------
# regret
# ---------------------------------------------------------------------------

@dataclass
class RegretReport:
    rows: np.ndarray       # (t, n), term at step k for agent i
    accumulated: float     # sum over all rows and agents
    averaged: float        # accumulated / t
    mode: str


def _recompute_fixed_rows(traj, theta: ParameterField, record: RunRecord) -> np.ndarray:
    if record.states is None:
        raise MissingArtifact("recompute needs a run with keep_states=True")
    p = record.p
    theta_p = theta.rows(p)
    Phi = traj.regressors(p, record.t)
    Eps = residual_block(traj, theta, p, record.t)
    rows = np.empty((record.t, record.n))
    for k in range(record.t):
        for i in range(record.n):
            resid = Phi[k, i] @ (theta_p - record.states[k].theta[i]) + Eps[k, i]
            rows[k, i] = float(resid @ resid)
    return rows


def _recompute_sync_rows(traj, theta: ParameterField, run: SynchronizedRun) -> np.ndarray:
    rows = np.empty((run.t_max, traj.n))
    for k in range(run.t_max):
        p = int(run.dims[k]) if k >= 1 else int(run.dims[1])
        theta_p = theta.rows(p)
        thetas = run.thetas[k] if k >= 1 else np.zeros_like(run.thetas[1])
        Phi_k = traj.regressors(p, k + 1)[k]
        for i in range(traj.n):
            resid = (
                Phi_k[i] @ (theta_p - thetas[i])
                + truncation_residual(traj, theta, k, i, p)
            )
            rows[k, i] = float(resid @ resid)
    return rows


def prediction_regret(
    traj,
    theta: ParameterField,
    run,
    mode: str = "fixed_t",
    recompute: bool = False,
) -> RegretReport:
    """Accumulated squared prediction error against the full model.

    fixed_t: every term uses the horizon dimension of the given RunRecord.
    synchronized: term k uses the step's own dimension p_k and the estimate
    Theta_{k,i}(k), as produced by run_synchronized.
    With recompute=True the rows are rebuilt here from stored states and
    honest tail residuals instead of trusting the run's bookkeeping.
    """
    if mode == "fixed_t":
        if not isinstance(run, RunRecord):
            raise ContractViolation("fixed_t mode expects a RunRecord")
        rows = _recompute_fixed_rows(traj, theta, run) if recompute else run.regret
    elif mode == "synchronized":
        if not isinstance(run, SynchronizedRun):
            raise ContractViolation("synchronized mode expects a SynchronizedRun")
        rows = _recompute_sync_rows(traj, theta, run) if recompute else run.regret
    else:
        raise ContractViolation(f"unknown regret mode {mode!r}")
    if rows is None:
        raise MissingArtifact("run carries no regret rows (no true parameter given)")
    acc = float(np.sum(rows))
    return RegretReport(rows=rows, accumulated=acc, averaged=acc / rows.shape[0], mode=mode)


# ---------------------------------------------------------------------------
# structural audits
# ---------------------------------------------------------------------------

@dataclass
class EnergyAudit:
    """Prefix-sum check of the accumulated innovation-energy inequality.

    Per step and agent the data stage obeys the exact identity

        Vbar_i = V_i + ||w + eps||^2 - b * ||phi^T theta_err + w + eps||^2,

    and the combine stage can only shed stacked weighted error energy, so for
    every prefix t'

        V_{t'} + sum_{k<t'} sum_i b ||innovation||^2
            <= V_0 + sum_{k<t'} sum_i ||w + eps||^2.

    slack[t'-1] is RHS - LHS, normalized by scale; with a single agent (or an
    identity graph) the combine is lossless and slack stays at rounding level.
    Everything is rebuilt from kept states, the trajectory store and honest
    tail residuals; the run's own b and regret records are not consulted.
    """

    slack: np.ndarray
    scale: np.ndarray
    worst: float       # min of slack/scale
    passed: bool


def energy_inequality_audit(
    record: RunRecord,
    traj,
    theta: ParameterField,
    tol: float = 1e-8,
) -> EnergyAudit:
    if record.states is None:
        raise MissingArtifact("audit needs a run with keep_states=True")
    t, n, p = record.t, record.n, record.p
    theta_p = theta.rows(p)
    Phi = traj.regressors(p, t)
    W = traj.w[1 : t + 1]

    V = np.empty(t + 1)
    for k in range(t + 1):
        tot = 0.0
        st = record.states[k]
        for i in range(n):
            d = st.theta[i] - theta_p
            tot += float(np.sum(d * (st.info[i] @ d)))
        V[k] = tot

    Eps = residual_block(traj, theta, p, t)
    pred_term = np.empty(t)
    drive_term = np.empty(t)
    for k in range(t):
        st = record.states[k]
        pred = drive = 0.0
        for i in range(n):
            phi = Phi[k, i]
            b = 1.0 / (1.0 + float(phi @ (st.cov[i] @ phi)))
            z = phi @ (theta_p - st.theta[i])          # (m,)
            drive_i = W[k, i] + Eps[k, i]
            innov = z + drive_i
            pred += b * float(innov @ innov)
            drive += float(drive_i @ drive_i)
        pred_term[k] = pred
        drive_term[k] = drive

    slack = np.empty(t)
    scale = np.empty(t)
    lhs_acc = 0.0
    rhs_acc = V[0]
    for k in range(t):
        lhs_acc += pred_term[k]
        rhs_acc += drive_term[k]
        lhs = V[k + 1] + lhs_acc
        slack[k] = rhs_acc - lhs
        scale[k] = max(1.0, abs(lhs), abs(rhs_acc))
    worst = float(np.min(slack / scale))
    return EnergyAudit(slack=slack, scale=scale, worst=worst, passed=worst >= -tol)


@dataclass
class PsdAudit:
    """Step-wise semidefinite order checks for the combine stage.

    info_gap[k]: lambda_min( blkdiag(P^{-1}_{k+1}) - L^T blkdiag(Pbar^{-1}) L ),
                 L = A_k^T (x) I_p;
    cov_gap[k]:  lambda_min( blkdiag(Pbar_{k+1}) - M^T blkdiag(P_{k+1}) M ),
                 M = A_k (x) I_p.
    The lift orientations differ because the combine uses row weights over a
    digraph that is only weight-balanced, not symmetric.  Both gaps must be
    >= -tol at every step.
    """

    info_gap: np.ndarray
    cov_gap: np.ndarray
    passed: bool


def consensus_psd_audit(
    record: RunRecord,
    traj,
    seq: GraphSequence,
    tol: float = 1e-9,
) -> PsdAudit:
    if record.states is None:
        raise MissingArtifact("audit needs a run with keep_states=True")
    t, n, p = record.t, record.n, record.p
    Phi = traj.regressors(p, t)
    info_gap = np.empty(t)
    cov_gap = np.empty(t)
    eye_p = np.eye(p)
    for k in range(t):
        A = seq.matrix(k)
        lift_info = np.kron(A.T, eye_p)
        lift_cov = np.kron(A, eye_p)
        st, nxt = record.states[k], record.states[k + 1]
        bars = [st.info[i] + np.outer(Phi[k, i], Phi[k, i]) for i in range(n)]
        big_bar = block_diag(*bars)
        big_next = block_diag(*[nxt.info[i] for i in range(n)])
        diff = big_next - lift_info.T @ big_bar @ lift_info
        low, _ = numerics.sym_eigen_extremes(0.5 * (diff + diff.T))
        info_gap[k] = low
        bar_cov = [numerics.spd_inverse(b) for b in bars]
        big_bar_cov = block_diag(*bar_cov)
        big_next_cov = block_diag(*[nxt.cov[i] for i in range(n)])
        diff = big_bar_cov - lift_cov.T @ big_next_cov @ lift_cov
        low, _ = numerics.sym_eigen_extremes(0.5 * (diff + diff.T))
        cov_gap[k] = low
    passed = bool(np.min(info_gap) >= -tol and np.min(cov_gap) >= -tol)
    return PsdAudit(info_gap=info_gap, cov_gap=cov_gap, passed=passed)


# ---------------------------------------------------------------------------
# metrics table
# ---------------------------------------------------------------------------

AGGREGATE = "aggregate"


class MetricsTable:
    """Long-format metric rows (t, agent, metric, value) with CSV round-trip."""

    def __init__(self) -> None:
        self.rows: list[tuple[int, str, str, float]] = []

    def add(self, t: int, agent, metric: str, value: float) -> None:
        self.rows.append((int(t), str(agent), str(metric), float(value)))

    def series(self, metric: str, agent=AGGREGATE) -> tuple[np.ndarray, np.ndarray]:
        """(t, value) arrays for one metric/agent pair, in insertion order."""
        agent = str(agent)
        ts = [r[0] for r in self.rows if r[2] == metric and r[1] == agent]
        vals = [r[3] for r in self.rows if r[2] == metric and r[1] == agent]
        return np.asarray(ts, dtype=int), np.asarray(vals, dtype=float)

    def to_csv(self, out) -> None:
        close = False
        if isinstance(out, (str, bytes)):
            out = open(out, "w", newline="")
            close = True
        try:
            out.write("t,agent,metric,value\n")
            for t, agent, metric, value in self.rows:
                out.write(f"{t},{agent},{metric},{repr(value)}\n")
        finally:
            if close:
                out.close()

    @classmethod
    def from_csv(cls, path) -> "MetricsTable":
        table = cls()
        with open(path, "r", newline="") as fh:
            header = fh.readline().strip()
            if header != "t,agent,metric,value":
                raise ContractViolation(f"unexpected metrics header {header!r}")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                t, agent, metric, value = line.split(",")
                table.add(int(t), agent, metric, float(value))
        return table
