"""Time-varying weighted digraph sequences and their excitation certificates.

A sequence assigns to each step k >= 0 an n x n adjacency matrix A_k with
nonnegative finite weights and a strictly positive diagonal (every agent
listens to itself).  Entry (i, j) is the weight agent i puts on agent j.
The estimation theory needs three structural properties, each with its own
checker: weight balance (rows and columns sum to one), delta-nondegeneracy
(positive weights exceed delta), and L-joint connectivity (the union digraph
over each window [tL, (t+1)L - 1] is strongly connected).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse.csgraph

from .errors import ContractViolation

BALANCE_TOL = 1e-9


def _validate_adjacency(a, n=None, name="adjacency") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation(f"{name} must be square, got shape {a.shape}")
    if n is not None and a.shape[0] != n:
        raise ContractViolation(f"{name} must be {n}x{n}, got {a.shape[0]}x{a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ContractViolation(f"{name} has non-finite weights")
    if (a < 0).any():
        raise ContractViolation(f"{name} has negative weights")
    if (np.diag(a) <= 0).any():
        raise ContractViolation(f"{name} needs a strictly positive diagonal")
    return a


@dataclass(frozen=True)
class GraphSequence:
    """Deterministic map step -> adjacency matrix, plus optional certificates.

    ``delta``/``joint_window`` record a nondegeneracy level and joint
    connectivity window the generator can vouch for; user-supplied sequences
    may leave them None.  ``warning`` flags generator-detected defects (e.g. a
    disconnected topology) without refusing construction.
    """

    n: int
    matrix_fn: Callable[[int], np.ndarray] = field(repr=False)
    name: str = "custom"
    delta: float | None = None
    joint_window: int | None = None
    warning: str | None = None

    def matrix(self, k: int) -> np.ndarray:
        if k < 0:
            raise ContractViolation(f"step index must be >= 0, got {k}")
        return _validate_adjacency(self.matrix_fn(int(k)), self.n, f"{self.name}[{k}]")


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def gossip_ring(n: int) -> GraphSequence:
    """Pairwise-averaging gossip around a ring; step k activates edge k mod n.

    The active pair (i, i+1 mod n) averages (weights 1/2), everyone else keeps
    their value.  Positive weights are 0.5 and 1, so delta = 0.4 is a valid
    certificate, and any n consecutive steps activate the whole ring (L = n).
    """
    if n < 1:
        raise ContractViolation(f"need n >= 1, got {n}")
    mats = []
    for e in range(n):
        W = np.eye(n)
        i, j = e, (e + 1) % n
        if i != j:
            W[i, i] = W[j, j] = W[i, j] = W[j, i] = 0.5
        mats.append(W)
    return GraphSequence(
        n=n,
        matrix_fn=lambda k: mats[k % n],
        name=f"gossip_ring({n})",
        delta=0.4,
        joint_window=n,
    )


def complete_uniform(n: int) -> GraphSequence:
    """Constant complete digraph with uniform weights 1/n.

    Nondegeneracy is strict, so the certificate is delta = 1/(2n); a single
    step is already strongly connected (L = 1).
    """
    if n < 1:
        raise ContractViolation(f"need n >= 1, got {n}")
    A = np.full((n, n), 1.0 / n)
    return GraphSequence(
        n=n,
        matrix_fn=lambda k: A,
        name=f"complete_uniform({n})",
        delta=1.0 / (2 * n),
        joint_window=1,
    )


def metropolis_static(n: int, edges: Sequence[tuple[int, int]]) -> GraphSequence:
    """Constant Metropolis-weight graph on an undirected edge set.

    Weight on edge {i, j} is 1 / (1 + max(deg_i, deg_j)); the diagonal absorbs
    the remainder, so the matrix is symmetric and doubly stochastic.  A
    disconnected edge set is allowed but flagged via ``warning`` (it can never
    be jointly connected).
    """
    if n < 1:
        raise ContractViolation(f"need n >= 1, got {n}")
    pairs = set()
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ContractViolation(f"bad edge ({i}, {j}) for n = {n}")
        pairs.add((min(i, j), max(i, j)))
    deg = np.zeros(n, dtype=int)
    for i, j in pairs:
        deg[i] += 1
        deg[j] += 1
    A = np.zeros((n, n))
    for i, j in pairs:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        A[i, j] = A[j, i] = w
    np.fill_diagonal(A, 1.0 - A.sum(axis=1))
    _validate_adjacency(A, n, "metropolis")
    connected = _strongly_connected(A > 0)
    positive = A[A > 0]
    return GraphSequence(
        n=n,
        matrix_fn=lambda k: A,
        name=f"metropolis_static({n})",
        delta=0.5 * positive.min(),
        joint_window=1 if connected else None,
        warning=None if connected else "edge set is disconnected",
    )


def periodic_schedule(matrices: Sequence[np.ndarray]) -> GraphSequence:
    """Cycle a user-supplied list of adjacency matrices.

    Certifies delta just below the smallest positive weight, and L equal to
    the period when the union over one period is strongly connected.
    """
    if not matrices:
        raise ContractViolation("periodic_schedule needs at least one matrix")
    mats = [np.array(m, dtype=float) for m in matrices]
    n = mats[0].shape[0]
    for idx, m in enumerate(mats):
        _validate_adjacency(m, n, f"matrix {idx}")
    union = sum(mats)
    connected = _strongly_connected(union > 0)
    min_pos = min(m[m > 0].min() for m in mats)
    period = len(mats)
    return GraphSequence(
        n=n,
        matrix_fn=lambda k: mats[k % period],
        name=f"periodic_schedule(n={n}, period={period})",
        delta=0.999 * min_pos,
        joint_window=period if connected else None,
        warning=None if connected else "union over one period is not strongly connected",
    )


def identity_sequence(n: int) -> GraphSequence:
    """No communication at all; useful as a non-cooperative baseline."""
    if n < 1:
        raise ContractViolation(f"need n >= 1, got {n}")
    A = np.eye(n)
    return GraphSequence(
        n=n,
        matrix_fn=lambda k: A,
        name=f"identity({n})",
        delta=0.9,
        joint_window=None,
        warning="agents never communicate" if n > 1 else None,
    )


GENERATORS = {
    "gossip_ring": gossip_ring,
    "complete_uniform": complete_uniform,
    "metropolis_static": metropolis_static,
    "periodic_schedule": periodic_schedule,
    "identity": identity_sequence,
}


# ---------------------------------------------------------------------------
# checkers
# ---------------------------------------------------------------------------

def is_weight_balanced(a, tol: float = BALANCE_TOL) -> bool:
    """True when every row and column of ``a`` sums to one within ``tol``."""
    a = _validate_adjacency(a)
    return bool(
        np.abs(a.sum(axis=1) - 1.0).max() <= tol
        and np.abs(a.sum(axis=0) - 1.0).max() <= tol
    )


def is_delta_nondegenerate(seq: GraphSequence, steps, delta: float) -> bool:
    """True when every strictly positive weight over ``steps`` exceeds ``delta``."""
    steps = list(steps)
    if not steps:
        raise ContractViolation("empty step range")
    if delta <= 0:
        raise ContractViolation(f"delta must be positive, got {delta}")
    for k in steps:
        a = seq.matrix(k)
        pos = a[a > 0]
        if pos.size and pos.min() <= delta:
            return False
    return True


def _strongly_connected(support: np.ndarray) -> bool:
    ncomp, _ = scipy.sparse.csgraph.connected_components(
        scipy.sparse.csr_matrix(support.astype(float)), directed=True, connection="strong"
    )
    return ncomp == 1


def union_digraph(seq: GraphSequence, start: int, stop: int) -> np.ndarray:
    """Union of the digraphs over steps [start, stop]: averaged weights."""
    if stop < start:
        raise ContractViolation(f"empty window [{start}, {stop}]")
    acc = np.zeros((seq.n, seq.n))
    for k in range(start, stop + 1):
        acc += seq.matrix(k)
    return acc / (stop - start + 1)


def is_jointly_connected(seq: GraphSequence, L: int, windows) -> bool:
    """True when each union over [tL, (t+1)L - 1], t in ``windows``, is strongly connected."""
    if L < 1:
        raise ContractViolation(f"window length must be >= 1, got {L}")
    windows = list(windows)
    if not windows:
        raise ContractViolation("empty window range")
    for t in windows:
        u = union_digraph(seq, t * L, (t + 1) * L - 1)
        if not _strongly_connected(u > 0):
            return False
    return True


def adjacency_product(seq: GraphSequence, k: int, l: int) -> np.ndarray:
    """Ordered product A_k A_{k-1} ... A_l (right factor has the lowest index)."""
    if k < l:
        raise ContractViolation(f"need k >= l, got k = {k}, l = {l}")
    out = seq.matrix(l)
    for idx in range(l + 1, k + 1):
        out = seq.matrix(idx) @ out
    return out


# ---------------------------------------------------------------------------
# product entry floors
# ---------------------------------------------------------------------------

@dataclass
class FloorAuditReport:
    """Outcome of the adjacency-product entry-floor audit for one window."""

    k: int
    s: int
    violations: list  # (rule, i, j, value, floor)
    notes: list

    @property
    def passed(self) -> bool:
        return not self.violations


def adjacency_product_floor_audit(seq: GraphSequence, delta: float, k: int, s: int) -> FloorAuditReport:
    """Audit entry lower bounds of A_k ... A_s for a delta-nondegenerate sequence.

    Checks, with floor delta^(k-s+1):
      (a) every diagonal entry of the product;
      (b) entry (i, j) whenever (i, j) is an edge of some step in [s, k];
      (c) entry (i, j) whenever some intermediate vertex v has (v, j) in the
          edge union over [s, r] and (i, v) in the union over [r+1, k] for a
          split point r in (s, k).
    Windows too short to admit a split point skip rule (c) and say so in the
    report notes.
    """
    if k < s:
        raise ContractViolation(f"need k >= s, got k = {k}, s = {s}")
    if delta <= 0:
        raise ContractViolation(f"delta must be positive, got {delta}")
    prod = adjacency_product(seq, k, s)
    floor = delta ** (k - s + 1)
    supports = [seq.matrix(r) > 0 for r in range(s, k + 1)]
    violations = []
    notes = []

    for i in range(seq.n):
        if prod[i, i] < floor:
            violations.append(("diagonal", i, i, prod[i, i], floor))

    edge_union = np.logical_or.reduce(supports)
    for i, j in zip(*np.nonzero(edge_union)):
        if prod[i, j] < floor:
            violations.append(("window_edge", int(i), int(j), prod[i, j], floor))

    if k - s + 1 < 3:
        notes.append(f"window [{s}, {k}] too short for a split point; two-hop rule skipped")
    else:
        # prefix[r] = union over [s, s+r]; suffix[r] = union over [s+r, k]
        prefix = np.empty((k - s + 1, seq.n, seq.n), dtype=bool)
        suffix = np.empty_like(prefix)
        prefix[0] = supports[0]
        for r in range(1, k - s + 1):
            prefix[r] = prefix[r - 1] | supports[r]
        suffix[-1] = supports[-1]
        for r in range(k - s - 1, -1, -1):
            suffix[r] = suffix[r + 1] | supports[r]
        required = np.zeros((seq.n, seq.n), dtype=bool)
        for r in range(s + 1, k):
            first = prefix[r - s]          # unions over [s, r]
            second = suffix[r + 1 - s]     # unions over [r+1, k]
            # exists v with second[i, v] and first[v, j]
            required |= (second.astype(int) @ first.astype(int)) > 0
        for i, j in zip(*np.nonzero(required)):
            if prod[i, j] < floor:
                violations.append(("two_hop", int(i), int(j), prod[i, j], floor))

    return FloorAuditReport(k=k, s=s, violations=violations, notes=notes)


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def adjacency_to_csv(a, out) -> None:
    """Write an adjacency matrix row-major as ``i,j,weight`` lines."""
    a = _validate_adjacency(a)
    close = False
    if isinstance(out, (str, bytes)):
        out = open(out, "w", newline="")
        close = True
    try:
        out.write("i,j,weight\n")
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                out.write(f"{i},{j},{float(a[i, j])!r}\n")
    finally:
        if close:
            out.close()


def adjacency_csv_string(a) -> str:
    buf = io.StringIO()
    adjacency_to_csv(a, buf)
    return buf.getvalue()
