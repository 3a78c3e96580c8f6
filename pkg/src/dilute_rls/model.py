"""Observation models with infinitely many parameters and their truncations.

The unknown is a row-indexed parameter Theta with rows Theta^[q] in R^m,
q = 1, 2, ...; summable row norms make truncation meaningful.  Observations
follow y_{k+1,i}^T = phi_{k,i}^T Theta + w_{k+1,i}^T, and truncating the
regressor to its first p components leaves the residual
eps_{k,i}(p)^T = sum_{q>p} phi^[q]_{k,i} Theta^[q], so that

    y_{k+1,i}^T = phi_{k,i}(p)^T Theta(p) + w_{k+1,i}^T + eps_{k,i}(p)^T.

Two trajectory families are shipped: an ARX model whose regressor stacks
lagged outputs/inputs, and a purely exogenous model whose regressor components
are user-supplied streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractViolation, SimulationDivergence
from .streams import substream

DIVERGENCE_LIMIT = 1e12
# tail evaluation stops once the certified remainder is this small relative
# to the accumulated sum
TAIL_RTOL = 1e-16


# ---------------------------------------------------------------------------
# parameter fields
# ---------------------------------------------------------------------------

class ParameterField:
    """Row-indexed parameter with certified-summable row norms.

    Concrete fields implement ``row(q)`` (1-based) and tail evaluation; all of
    them expose ``rows(p)`` for the truncation Theta(p) (p x m, rows 1..p).
    """

    m: int

    def row(self, q: int) -> np.ndarray:
        raise NotImplementedError

    def rows(self, p: int) -> np.ndarray:
        if p < 0:
            raise ContractViolation(f"need p >= 0, got {p}")
        if p == 0:
            return np.zeros((0, self.m))
        return np.stack([self.row(q) for q in range(1, p + 1)])

    def tail_norm(self, p: int) -> float:
        """sum_{q > p} ||Theta^[q]||."""
        raise NotImplementedError

    def tail_sq(self, p: int) -> float:
        """sum_{q > p} ||Theta^[q]||^2."""
        raise NotImplementedError

    def tail_sq_matrix(self, p: int) -> np.ndarray:
        """sum_{q > p} Theta^[q] (Theta^[q])^T, an m x m matrix."""
        raise NotImplementedError


class GeometricField(ParameterField):
    """Theta^[q] = c * lam^q * v_q with unit directions v_q.

    Tail norms have closed forms; directions default to the first axis for
    m = 1 and to seeded random unit vectors otherwise.
    """

    def __init__(self, c: float, lam: float, m: int = 1, seed: int = 0):
        if not (0 < lam < 1):
            raise ContractViolation(f"need 0 < lam < 1 for summability, got {lam}")
        if c < 0:
            raise ContractViolation(f"need c >= 0, got {c}")
        if m < 1:
            raise ContractViolation(f"need m >= 1, got {m}")
        self.c = float(c)
        self.lam = float(lam)
        self.m = int(m)
        self._dirs = np.zeros((0, m))
        self._rng = substream(seed, "field-directions")

    def _direction(self, q: int) -> np.ndarray:
        if self.m == 1:
            return np.ones(1)
        while self._dirs.shape[0] < q:
            v = self._rng.normal(size=self.m)
            v /= np.linalg.norm(v)
            self._dirs = np.vstack([self._dirs, v])
        return self._dirs[q - 1]

    def row(self, q: int) -> np.ndarray:
        if q < 1:
            raise ContractViolation(f"rows are 1-based, got q = {q}")
        return self.c * self.lam**q * self._direction(q)

    def tail_norm(self, p: int) -> float:
        return self.c * self.lam ** (p + 1) / (1.0 - self.lam)

    def tail_sq(self, p: int) -> float:
        return self.c**2 * self.lam ** (2 * (p + 1)) / (1.0 - self.lam**2)

    def tail_sq_matrix(self, p: int) -> np.ndarray:
        if self.m == 1:
            return np.array([[self.tail_sq(p)]])
        out = np.zeros((self.m, self.m))
        q = p + 1
        acc = 0.0
        while self.c**2 * self.lam ** (2 * q) / (1.0 - self.lam**2) > TAIL_RTOL * (1.0 + acc):
            r = self.row(q)
            out += np.outer(r, r)
            acc += float(r @ r)
            q += 1
        return out


class FiniteSupportField(ParameterField):
    """Field with finitely many nonzero rows, given explicitly."""

    def __init__(self, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.ndim != 2:
            raise ContractViolation("rows must be a (support, m) array")
        if not np.all(np.isfinite(rows)):
            raise ContractViolation("rows must be finite")
        self._rows = rows
        self.support = rows.shape[0]
        self.m = rows.shape[1]
        norms = np.linalg.norm(rows, axis=1)
        self._tail_norm = np.concatenate([np.cumsum(norms[::-1])[::-1], [0.0]])
        self._tail_sq = np.concatenate([np.cumsum((norms**2)[::-1])[::-1], [0.0]])

    def row(self, q: int) -> np.ndarray:
        if q < 1:
            raise ContractViolation(f"rows are 1-based, got q = {q}")
        if q > self.support:
            return np.zeros(self.m)
        return self._rows[q - 1]

    def rows(self, p: int) -> np.ndarray:
        if p < 0:
            raise ContractViolation(f"need p >= 0, got {p}")
        out = np.zeros((p, self.m))
        take = min(p, self.support)
        out[:take] = self._rows[:take]
        return out

    def tail_norm(self, p: int) -> float:
        return float(self._tail_norm[min(p, self.support)])

    def tail_sq(self, p: int) -> float:
        return float(self._tail_sq[min(p, self.support)])

    def tail_sq_matrix(self, p: int) -> np.ndarray:
        tail = self._rows[p:] if p < self.support else np.zeros((0, self.m))
        return tail.T @ tail


class SeriesField(ParameterField):
    """Field defined by a row function with a certified geometric envelope.

    ``envelope = (C, lam)`` promises ||row(q)|| <= C * lam^q for all q >= 1;
    tails are evaluated by partial sums until the certified remainder is
    negligible next to the accumulated value.
    """

    def __init__(self, row_fn: Callable[[int], np.ndarray], m: int, envelope):
        C, lam = envelope
        if not (0 < lam < 1) or C < 0:
            raise ContractViolation(f"bad envelope (C, lam) = ({C}, {lam})")
        self.m = int(m)
        self._row_fn = row_fn
        self.envelope = (float(C), float(lam))
        self._cache = np.zeros((0, m))

    def _materialize(self, q: int) -> None:
        while self._cache.shape[0] < q:
            nxt = self._cache.shape[0] + 1
            r = np.asarray(self._row_fn(nxt), dtype=float).reshape(self.m)
            self._cache = np.vstack([self._cache, r])

    def row(self, q: int) -> np.ndarray:
        if q < 1:
            raise ContractViolation(f"rows are 1-based, got q = {q}")
        self._materialize(q)
        return self._cache[q - 1]

    def rows(self, p: int) -> np.ndarray:
        if p < 0:
            raise ContractViolation(f"need p >= 0, got {p}")
        self._materialize(p)
        return self._cache[:p].copy()

    def _tail_accumulate(self, p: int, term):
        C, lam = self.envelope
        acc = 0.0
        q = p + 1
        while C * lam**q / (1.0 - lam) > TAIL_RTOL * (1.0 + acc):
            acc += term(self.row(q))
            q += 1
        return acc, q

    def tail_norm(self, p: int) -> float:
        acc, _ = self._tail_accumulate(p, lambda r: float(np.linalg.norm(r)))
        return acc

    def tail_sq(self, p: int) -> float:
        acc, _ = self._tail_accumulate(p, lambda r: float(r @ r))
        return acc

    def tail_sq_matrix(self, p: int) -> np.ndarray:
        out = np.zeros((self.m, self.m))

        def term(r):
            out[:] += np.outer(r, r)
            return float(r @ r)

        self._tail_accumulate(p, term)
        return out


# ---------------------------------------------------------------------------
# ARX coefficients
# ---------------------------------------------------------------------------

@dataclass
class ArxCoefficients:
    """Lag coefficients A_q (m x m) and B_q (m x l), q = 1, 2, ...

    ``support`` caps the nonzero lags when finite; otherwise ``envelope``
    must certify ||A_q||_F + ||B_q||_F <= C * lam^q.
    """

    m: int
    l: int
    a_fn: Callable[[int], np.ndarray]
    b_fn: Callable[[int], np.ndarray]
    support: int | None = None
    envelope: tuple[float, float] | None = None
    _a_cache: np.ndarray = field(default=None, repr=False)
    _b_cache: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.support is None and self.envelope is None:
            raise ContractViolation("infinite coefficients need a geometric envelope")
        if self.envelope is not None:
            C, lam = self.envelope
            if not (0 < lam < 1) or C < 0:
                raise ContractViolation(f"bad envelope (C, lam) = ({C}, {lam})")
        self._a_cache = np.zeros((0, self.m, self.m))
        self._b_cache = np.zeros((0, self.m, self.l))

    def materialize(self, Q: int):
        """(A, B) arrays for lags 1..Q, shapes (Q, m, m) and (Q, m, l)."""
        while self._a_cache.shape[0] < Q:
            q = self._a_cache.shape[0] + 1
            if self.support is not None and q > self.support:
                a = np.zeros((self.m, self.m))
                b = np.zeros((self.m, self.l))
            else:
                a = np.asarray(self.a_fn(q), dtype=float).reshape(self.m, self.m)
                b = np.asarray(self.b_fn(q), dtype=float).reshape(self.m, self.l)
            self._a_cache = np.concatenate([self._a_cache, a[None]])
            self._b_cache = np.concatenate([self._b_cache, b[None]])
        return self._a_cache[:Q], self._b_cache[:Q]

    def lag_cap(self, T: int, truncation_tol: float | None):
        """Largest lag worth keeping for a horizon-T simulation.

        Finite support caps at the support; otherwise lags whose envelope
        falls below ``truncation_tol`` times the full tail bound are dropped.
        Returns (cap, recorded_tail_bound).
        """
        if self.support is not None:
            return min(self.support, T + 1), None
        C, lam = self.envelope
        tail_bound = C * lam / (1.0 - lam)
        if truncation_tol is None:
            return T + 1, tail_bound
        cap = 1
        while C * lam ** (cap + 1) >= truncation_tol * tail_bound and cap <= T:
            cap += 1
        return min(cap, T + 1), tail_bound

    def parameter_field(self) -> ParameterField:
        """The stacked parameter: row block q of Theta is [A_q, B_q]^T."""
        width = self.m + self.l

        def theta_row(qrow: int) -> np.ndarray:
            block = (qrow - 1) // width + 1
            r = (qrow - 1) % width
            A, B = self.materialize(block)
            if r < self.m:
                return A[block - 1][:, r]
            return B[block - 1][:, r - self.m]

        if self.support is not None:
            rows = np.stack([theta_row(q) for q in range(1, self.support * width + 1)])
            return FiniteSupportField(rows)
        C, lam = self.envelope
        # row q sits in block ceil(q/(m+l)) >= q/(m+l), so a row-indexed
        # envelope uses the diluted ratio lam^(1/(m+l))
        return SeriesField(theta_row, self.m, (C, lam ** (1 / width)))


def finite_arx(A_list, B_list, m: int, l: int) -> ArxCoefficients:
    A = [np.asarray(a, dtype=float).reshape(m, m) for a in A_list]
    B = [np.asarray(b, dtype=float).reshape(m, l) for b in B_list]
    support = max(len(A), len(B), 1)

    def a_fn(q):
        return A[q - 1] if q <= len(A) else np.zeros((m, m))

    def b_fn(q):
        return B[q - 1] if q <= len(B) else np.zeros((m, l))

    return ArxCoefficients(m=m, l=l, a_fn=a_fn, b_fn=b_fn, support=support)


def geometric_arx(m: int, l: int, a_scale: float, b_scale: float, decay: float) -> ArxCoefficients:
    """A_q = a_scale * decay^q * I, B_q = b_scale * decay^q * I (rectangular eye)."""
    if not (0 < decay < 1):
        raise ContractViolation(f"need 0 < decay < 1, got {decay}")
    eye_a = np.eye(m)
    eye_b = np.eye(m, l)
    C = abs(a_scale) * math.sqrt(m) + abs(b_scale) * math.sqrt(min(m, l))
    if C == 0.0:
        return finite_arx([np.zeros((m, m))], [np.zeros((m, l))], m, l)
    return ArxCoefficients(
        m=m,
        l=l,
        a_fn=lambda q: a_scale * decay**q * eye_a,
        b_fn=lambda q: b_scale * decay**q * eye_b,
        envelope=(C, decay),
    )


def snap_to_blocks(p: int, m: int, l: int) -> int:
    """Round p up to the next ARX block boundary (multiple of m + l)."""
    if p < 1:
        raise ContractViolation(f"need p >= 1, got {p}")
    width = m + l
    return ((p + width - 1) // width) * width


# ---------------------------------------------------------------------------
# dimension schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DimensionSchedule:
    """Nondecreasing integer truncation dimension p_t >= 1, with p_t = O(t)."""

    kind: str
    _raw: Callable[[int], float]
    clamp_linear: bool = True

    def evaluate(self, t: int) -> int:
        if t < 0:
            raise ContractViolation(f"need t >= 0, got {t}")
        raw = math.floor(self._raw(max(t, 1)))
        if self.clamp_linear:
            raw = min(raw, t + 1)
        return max(1, raw)


def constant_schedule(p: int) -> DimensionSchedule:
    if p < 1 or p != int(p):
        raise ContractViolation(f"need integer p >= 1, got {p}")
    return DimensionSchedule(kind=f"constant({p})", _raw=lambda t: int(p), clamp_linear=False)


def poly_schedule(alpha: float) -> DimensionSchedule:
    if alpha <= 0:
        raise ContractViolation(f"need alpha > 0, got {alpha}")
    return DimensionSchedule(kind=f"poly({alpha})", _raw=lambda t: t**alpha)


def polylog_schedule(alpha: float) -> DimensionSchedule:
    if alpha <= 0:
        raise ContractViolation(f"need alpha > 0, got {alpha}")
    return DimensionSchedule(kind=f"polylog({alpha})", _raw=lambda t: math.log(t) ** alpha)


SCHEDULES = {
    "constant": constant_schedule,
    "poly": poly_schedule,
    "polylog": polylog_schedule,
}


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean i.i.d. observation noise, one of gaussian/uniform_bounded/zero.

    ``envelope(t)`` is the per-agent deviation scale d_i(t) the analysis
    diagnostics use: log t (clamped at 1) for gaussian tails, 1 for bounded
    families.
    """

    kind: str
    m: int
    sigma: float = 0.0
    bound: float = 0.0

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.kind == "gaussian":
            return self.sigma * rng.standard_normal(size=(count, self.m))
        if self.kind == "uniform_bounded":
            return rng.uniform(-self.bound, self.bound, size=(count, self.m))
        if self.kind == "zero":
            return np.zeros((count, self.m))
        raise ContractViolation(f"unknown noise kind {self.kind!r}")

    def envelope(self, t: int) -> float:
        if t < 1:
            raise ContractViolation(f"need t >= 1, got {t}")
        if self.kind == "gaussian":
            return max(1.0, math.log(t))
        return 1.0


def gaussian_noise(m: int, sigma: float) -> NoiseModel:
    if sigma < 0:
        raise ContractViolation(f"need sigma >= 0, got {sigma}")
    return NoiseModel(kind="gaussian", m=m, sigma=float(sigma))


def uniform_noise(m: int, bound: float) -> NoiseModel:
    if bound < 0:
        raise ContractViolation(f"need bound >= 0, got {bound}")
    return NoiseModel(kind="uniform_bounded", m=m, bound=float(bound))


def zero_noise(m: int) -> NoiseModel:
    return NoiseModel(kind="zero", m=m)


NOISES = {"gaussian": gaussian_noise, "uniform_bounded": uniform_noise, "zero": zero_noise}


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

def _check_step_agent(traj, k: int, i: int) -> None:
    if not (0 <= k <= traj.T):
        raise ContractViolation(f"step {k} outside [0, {traj.T}]")
    if not (0 <= i < traj.n):
        raise ContractViolation(f"agent {i} outside [0, {traj.n})")


@dataclass(frozen=True)
class ArxTrajectory:
    """Simulated ARX path: regressors stack lagged outputs and inputs.

    phi_{k,i} = (y_{k,i}^T, u_{k,i}^T, y_{k-1,i}^T, u_{k-1,i}^T, ...)^T with
    zero history before step 0.
    """

    n: int
    m: int
    l: int
    T: int
    y: np.ndarray
    w: np.ndarray
    u: np.ndarray
    provenance: dict = field(default_factory=dict)

    kind = "arx"

    @property
    def block_width(self) -> int:
        return self.m + self.l

    def active_support(self, k: int) -> int:
        return self.block_width * (k + 1)

    def phi_component(self, k: int, i: int, q: int) -> float:
        _check_step_agent(self, k, i)
        if q < 1:
            raise ContractViolation(f"components are 1-based, got q = {q}")
        block = (q - 1) // self.block_width
        r = (q - 1) % self.block_width
        step = k - block
        if step < 0:
            return 0.0
        if r < self.m:
            return float(self.y[step, i, r])
        return float(self.u[step, i, r - self.m])

    def components_upto(self, k: int, S: int) -> np.ndarray:
        """First S regressor components for every agent at step k, (n, S)."""
        _check_step_agent(self, k, 0)
        blocks = (S + self.block_width - 1) // self.block_width
        width = self.block_width
        out = np.zeros((self.n, blocks * width))
        depth = min(blocks, k + 1)
        if depth > 0:
            hist_y = self.y[k - depth + 1 : k + 1][::-1]  # (depth, n, m), lag order
            hist_u = self.u[k - depth + 1 : k + 1][::-1]
            stacked = np.concatenate([hist_y, hist_u], axis=2)  # (depth, n, width)
            out[:, : depth * width] = np.transpose(stacked, (1, 0, 2)).reshape(self.n, -1)
        return out[:, :S]

    def regressors(self, p: int, t: int) -> np.ndarray:
        """Truncated regressors phi_{k,i}(p) for k < t, shape (t, n, p)."""
        if not (1 <= t <= self.T):
            raise ContractViolation(f"horizon {t} outside [1, {self.T}]")
        if p < 1:
            raise ContractViolation(f"need p >= 1, got {p}")
        width = self.block_width
        out = np.zeros((t, self.n, p))
        joint = np.concatenate([self.y, self.u], axis=2)
        for block in range((p + width - 1) // width):
            c0 = block * width
            cols = min(width, p - c0)
            if block >= t:
                break
            out[block:, :, c0 : c0 + cols] = joint[: t - block, :, :cols]
        return out


@dataclass(frozen=True)
class ExogenousTrajectory:
    """Path of the generic model: regressor components come from input streams."""

    n: int
    m: int
    T: int
    budget: int
    y: np.ndarray
    w: np.ndarray
    comp: np.ndarray  # (T+1, n, budget)
    provenance: dict = field(default_factory=dict)

    kind = "exogenous"

    @property
    def l(self) -> int:
        return self.budget

    def active_support(self, k: int) -> int:
        return self.budget

    def phi_component(self, k: int, i: int, q: int) -> float:
        _check_step_agent(self, k, i)
        if q < 1:
            raise ContractViolation(f"components are 1-based, got q = {q}")
        if q > self.budget:
            return 0.0
        return float(self.comp[k, i, q - 1])

    def components_upto(self, k: int, S: int) -> np.ndarray:
        _check_step_agent(self, k, 0)
        out = np.zeros((self.n, S))
        take = min(S, self.budget)
        out[:, :take] = self.comp[k, :, :take]
        return out

    def regressors(self, p: int, t: int) -> np.ndarray:
        if not (1 <= t <= self.T):
            raise ContractViolation(f"horizon {t} outside [1, {self.T}]")
        if p < 1:
            raise ContractViolation(f"need p >= 1, got {p}")
        out = np.zeros((t, self.n, p))
        take = min(p, self.budget)
        out[:, :, :take] = self.comp[:t, :, :take]
        return out


def _noise_matrix(noise: NoiseModel, n: int, T: int, seed: int) -> np.ndarray:
    w = np.empty((T + 1, n, noise.m))
    for i in range(n):
        w[:, i, :] = noise.sample(substream(seed, "noise", i), T + 1)
    return w


def _check_divergence(y_step: np.ndarray, k: int) -> None:
    peak = np.abs(y_step).max(initial=0.0)
    if not np.isfinite(peak) or peak > DIVERGENCE_LIMIT:
        raise SimulationDivergence(f"|y| reached {peak:g} at step {k}")


def simulate_arx(
    coeffs: ArxCoefficients,
    u: np.ndarray | None,
    noise: NoiseModel,
    n: int,
    T: int,
    seed: int,
    truncation_tol: float | None = 1e-16,
) -> ArxTrajectory:
    """Simulate y_{k+1,i} = sum_q (A_q y_{k+1-q,i} + B_q u_{k+1-q,i}) + w_{k+1,i}.

    History before step 0 is zero and y_0 = w_0.  The lag sum is exact for
    finite-support coefficients; infinite generators are capped at the lag
    where the certified envelope falls below ``truncation_tol`` times the
    recorded tail bound.
    """
    if T < 1 or n < 1:
        raise ContractViolation(f"need T >= 1 and n >= 1, got T = {T}, n = {n}")
    if noise.m != coeffs.m:
        raise ContractViolation(f"noise dimension {noise.m} != output dimension {coeffs.m}")
    m, l = coeffs.m, coeffs.l
    if u is None:
        u = np.zeros((T + 1, n, l))
    u = np.asarray(u, dtype=float)
    if u.shape != (T + 1, n, l):
        raise ContractViolation(f"u must have shape {(T + 1, n, l)}, got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ContractViolation("u has non-finite entries")

    cap, tail_bound = coeffs.lag_cap(T, truncation_tol)
    A, B = coeffs.materialize(cap)
    w = _noise_matrix(noise, n, T, seed)
    y = np.zeros((T + 1, n, m))
    y[0] = w[0]
    for k in range(T):
        depth = min(k + 1, cap)
        hist_y = y[k - depth + 1 : k + 1][::-1]  # index q-1 holds step k+1-q
        hist_u = u[k - depth + 1 : k + 1][::-1]
        step = w[k + 1].copy()
        step += np.einsum("qab,qnb->na", A[:depth], hist_y)
        step += np.einsum("qab,qnb->na", B[:depth], hist_u)
        y[k + 1] = step
        _check_divergence(step, k + 1)

    provenance = {"seed": seed, "lag_cap": cap}
    if tail_bound is not None:
        provenance["coefficient_tail_bound"] = tail_bound
        provenance["truncation_tol"] = truncation_tol
    return ArxTrajectory(n=n, m=m, l=l, T=T, y=y, w=w, u=u, provenance=provenance)


def simulate_exogenous(
    phi_stream,
    theta: ParameterField,
    noise: NoiseModel,
    n: int,
    T: int,
    seed: int,
    budget: int | None = None,
    component_bound: float | None = None,
) -> ExogenousTrajectory:
    """Simulate the generic model with exogenous regressor components.

    ``phi_stream`` is either an array of shape (T+1, n, Q) or a map
    (k, i, q) -> component with q 1-based.  A callable stream needs either a
    declared ``budget`` (finite active support) or a ``component_bound`` so
    the response can be evaluated to tail tolerance 1e-12 via the field's
    tail_norm.
    """
    if T < 1 or n < 1:
        raise ContractViolation(f"need T >= 1 and n >= 1, got T = {T}, n = {n}")
    if noise.m != theta.m:
        raise ContractViolation(f"noise dimension {noise.m} != output dimension {theta.m}")
    provenance: dict = {"seed": seed}
    if callable(phi_stream):
        if budget is None:
            if component_bound is None:
                raise ContractViolation("callable streams need a budget or a component_bound")
            budget = 1
            while component_bound * theta.tail_norm(budget) > 1e-12:
                budget += 1
            provenance["tail_tolerance"] = 1e-12
        comp = np.empty((T + 1, n, budget))
        for k in range(T + 1):
            for i in range(n):
                for q in range(1, budget + 1):
                    comp[k, i, q - 1] = phi_stream(k, i, q)
    else:
        comp = np.asarray(phi_stream, dtype=float)
        if comp.ndim != 3 or comp.shape[0] < T + 1 or comp.shape[1] != n:
            raise ContractViolation(
                f"stream array must be (>= T+1, n, Q), got {comp.shape}"
            )
        comp = comp[: T + 1]
        budget = comp.shape[2]
    if not np.all(np.isfinite(comp)):
        raise ContractViolation("regressor components must be finite")

    rows = theta.rows(budget)
    w = _noise_matrix(noise, n, T, seed)
    y = np.empty((T + 1, n, theta.m))
    y[0] = w[0]
    y[1:] = np.einsum("knq,qm->knm", comp[:T], rows) + w[1:]
    for k in range(1, T + 1):
        _check_divergence(y[k], k)
    provenance["budget"] = budget
    return ExogenousTrajectory(
        n=n, m=theta.m, T=T, budget=budget, y=y, w=w, comp=comp, provenance=provenance
    )


# ---------------------------------------------------------------------------
# truncation residuals and the decomposition
# ---------------------------------------------------------------------------

def truncation_residual(traj, theta: ParameterField, k: int, i: int, p: int) -> np.ndarray:
    """eps_{k,i}(p)^T = sum_{q>p} phi^[q]_{k,i} Theta^[q], exact over the active support."""
    _check_step_agent(traj, k, i)
    if p < 0:
        raise ContractViolation(f"need p >= 0, got {p}")
    S = traj.active_support(k)
    if S <= p:
        return np.zeros(theta.m)
    comps = traj.components_upto(k, S)[i]
    return comps[p:] @ theta.rows(S)[p:]


def residual_block(traj, theta: ParameterField, p: int, t: int) -> np.ndarray:
    """Residuals eps_{k,i}(p) for all k < t and agents, shape (t, n, m)."""
    if not (1 <= t <= traj.T):
        raise ContractViolation(f"horizon {t} outside [1, {traj.T}]")
    out = np.zeros((t, traj.n, theta.m))
    for k in range(t):
        S = traj.active_support(k)
        if S <= p:
            continue
        comps = traj.components_upto(k, S)
        out[k] = comps[:, p:] @ theta.rows(S)[p:]
    return out


def observe_truncated(traj, theta: ParameterField, k: int, i: int, p: int):
    """(phi_{k,i}(p), y_{k+1,i}, eps_{k,i}(p)) for one agent and step."""
    _check_step_agent(traj, k, i)
    if k >= traj.T:
        raise ContractViolation(f"need k < T = {traj.T} to observe y_(k+1)")
    if p < 1:
        raise ContractViolation(f"need p >= 1, got {p}")
    phi_p = traj.components_upto(k, p)[i]
    y_next = traj.y[k + 1, i].copy()
    eps = truncation_residual(traj, theta, k, i, p)
    return phi_p, y_next, eps


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def trajectory_to_csv(traj, out) -> None:
    """Write (k, i, component_kind, index, value) rows; exogenous components as 'u'."""
    close = False
    if isinstance(out, (str, bytes)):
        out = open(out, "w", newline="")
        close = True
    try:
        out.write("k,i,component_kind,index,value\n")
        inputs = traj.u if traj.kind == "arx" else traj.comp
        for k in range(traj.T + 1):
            for i in range(traj.n):
                for r in range(traj.m):
                    out.write(f"{k},{i},y,{r},{float(traj.y[k, i, r])!r}\n")
                for r in range(traj.m):
                    out.write(f"{k},{i},w,{r},{float(traj.w[k, i, r])!r}\n")
                for r in range(inputs.shape[2]):
                    out.write(f"{k},{i},u,{r},{float(inputs[k, i, r])!r}\n")
    finally:
        if close:
            out.close()


def trajectory_from_csv(path, kind: str):
    """Rebuild a trajectory written by :func:`trajectory_to_csv`.

    The caller states the model ``kind`` ('arx' or 'exogenous'); the CSV format
    itself stores exogenous components under 'u'.
    """
    if kind not in ("arx", "exogenous"):
        raise ContractViolation(f"unknown trajectory kind {kind!r}")
    data = {"y": {}, "w": {}, "u": {}}
    dims = {"y": 0, "w": 0, "u": 0}
    T = -1
    n = 0
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if header != "k,i,component_kind,index,value":
            raise ContractViolation(f"unexpected trajectory header {header!r}")
        for line in fh:
            k_s, i_s, ck, idx_s, val_s = line.rstrip("\n").split(",")
            k, i, idx = int(k_s), int(i_s), int(idx_s)
            if ck not in data:
                raise ContractViolation(f"unknown component kind {ck!r}")
            data[ck][(k, i, idx)] = float(val_s)
            dims[ck] = max(dims[ck], idx + 1)
            T = max(T, k)
            n = max(n, i + 1)
    if T < 0 or n < 1 or dims["y"] < 1:
        raise ContractViolation("trajectory CSV is empty or lacks outputs")
    m = dims["y"]

    def build(ck, width):
        arr = np.zeros((T + 1, n, width))
        for (k, i, idx), v in data[ck].items():
            arr[k, i, idx] = v
        return arr

    y = build("y", m)
    w = build("w", m)
    inputs = build("u", dims["u"]) if dims["u"] else np.zeros((T + 1, n, 0))
    if kind == "arx":
        return ArxTrajectory(n=n, m=m, l=inputs.shape[2], T=T, y=y, w=w, u=inputs,
                             provenance={"loaded_from": str(path)})
    return ExogenousTrajectory(n=n, m=m, T=T, budget=inputs.shape[2], y=y, w=w,
                               comp=inputs, provenance={"loaded_from": str(path)})
