import numpy as np
import pytest

from dilute_rls import graph
from dilute_rls.errors import ContractViolation


def test_gossip_ring_two_agents_step0():
    seq = graph.gossip_ring(2)
    np.testing.assert_allclose(seq.matrix(0), [[0.5, 0.5], [0.5, 0.5]])


def test_gossip_ring_cycles_edges():
    seq = graph.gossip_ring(4)
    # step k touches pair (k mod 4, k+1 mod 4) only
    for k in range(8):
        A = seq.matrix(k)
        i, j = k % 4, (k + 1) % 4
        assert A[i, j] == 0.5 and A[j, i] == 0.5
        off = A - np.eye(4)
        touched = {(i, i), (j, j), (i, j), (j, i)}
        for a, b in zip(*np.nonzero(off)):
            assert (int(a), int(b)) in touched


def test_complete_uniform_matrix():
    seq = graph.complete_uniform(3)
    np.testing.assert_allclose(seq.matrix(5), np.full((3, 3), 1 / 3))


def test_single_agent_sequences_are_trivial():
    for seq in (graph.gossip_ring(1), graph.complete_uniform(1)):
        np.testing.assert_array_equal(seq.matrix(0), [[1.0]])
        assert graph.is_weight_balanced(seq.matrix(0))


def test_metropolis_static_path_graph():
    seq = graph.metropolis_static(3, [(0, 1), (1, 2)])
    A = seq.matrix(0)
    np.testing.assert_allclose(A, A.T)
    assert graph.is_weight_balanced(A)
    # degree of 1 is 2, so both edges weigh 1/3
    assert A[0, 1] == pytest.approx(1 / 3)
    assert A[1, 2] == pytest.approx(1 / 3)
    assert A[0, 0] == pytest.approx(2 / 3)
    assert seq.joint_window == 1 and seq.warning is None


def test_metropolis_disconnected_is_flagged():
    seq = graph.metropolis_static(4, [(0, 1), (2, 3)])
    assert seq.warning is not None
    assert seq.joint_window is None
    assert not graph.is_jointly_connected(seq, 1, range(1, 4))


def test_periodic_schedule_cycles():
    m1 = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])
    m2 = np.array([[1.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.0, 0.5, 0.5]])
    seq = graph.periodic_schedule([m1, m2])
    np.testing.assert_array_equal(seq.matrix(0), m1)
    np.testing.assert_array_equal(seq.matrix(1), m2)
    np.testing.assert_array_equal(seq.matrix(2), m1)
    assert seq.joint_window == 2
    assert graph.is_jointly_connected(seq, 2, range(1, 5))


def test_weight_balance_checker():
    assert graph.is_weight_balanced(np.full((4, 4), 0.25))
    assert graph.is_weight_balanced(np.array([[0.9, 0.1], [0.1, 0.9]]))
    # row sums are 1 but column sums are not
    assert not graph.is_weight_balanced(np.array([[0.5, 0.5], [0.1, 0.9]]))


def test_nondegeneracy_thresholds():
    seq = graph.complete_uniform(4)
    assert graph.is_delta_nondegenerate(seq, range(5), 0.2)
    assert not graph.is_delta_nondegenerate(seq, range(5), 0.3)
    gossip = graph.gossip_ring(4)
    assert graph.is_delta_nondegenerate(gossip, range(8), 0.4)
    with pytest.raises(ContractViolation):
        graph.is_delta_nondegenerate(seq, [], 0.1)


def test_joint_connectivity_gossip_ring():
    seq = graph.gossip_ring(4)
    assert graph.is_jointly_connected(seq, 4, range(1, 6))
    # a single gossip step is never strongly connected for n = 4
    assert not graph.is_jointly_connected(seq, 1, range(1, 3))


def test_joint_connectivity_alternating_matchings():
    # two disjoint pair matchings on 4 nodes: each alone is disconnected,
    # their union is the 4-ring
    def matching(pairs):
        A = np.eye(4)
        for i, j in pairs:
            A[i, i] = A[j, j] = A[i, j] = A[j, i] = 0.5
        return A

    m1 = matching([(0, 1), (2, 3)])
    m2 = matching([(1, 2), (3, 0)])
    seq = graph.periodic_schedule([m1, m2])
    assert not graph.is_jointly_connected(seq, 1, range(1, 5))
    assert graph.is_jointly_connected(seq, 2, range(1, 5))


def test_adjacency_product_basics():
    seq = graph.complete_uniform(3)
    A = seq.matrix(0)
    np.testing.assert_array_equal(graph.adjacency_product(seq, 2, 2), A)
    # uniform matrix is idempotent
    np.testing.assert_allclose(graph.adjacency_product(seq, 5, 0), A)
    with pytest.raises(ContractViolation):
        graph.adjacency_product(seq, 1, 2)


def test_adjacency_product_left_multiply_recursion():
    seq = graph.gossip_ring(5)
    for k in range(1, 7):
        full = graph.adjacency_product(seq, k, 0)
        step = seq.matrix(k) @ graph.adjacency_product(seq, k - 1, 0)
        np.testing.assert_array_equal(full, step)


def test_products_of_balanced_matrices_stay_balanced():
    rng = np.random.default_rng(2)
    for name, seq in (
        ("gossip", graph.gossip_ring(4)),
        ("uniform", graph.complete_uniform(3)),
        ("metropolis", graph.metropolis_static(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])),
    ):
        k = int(rng.integers(3, 12))
        prod = graph.adjacency_product(seq, k, 0)
        assert np.abs(prod.sum(axis=0) - 1).max() < 1e-12, name
        assert np.abs(prod.sum(axis=1) - 1).max() < 1e-12, name


def test_floor_audit_uniform_equality_edge():
    # constant uniform 1/n graph audited at delta = 1/n: the one-step window
    # holds with equality
    seq = graph.complete_uniform(4)
    rep = graph.adjacency_product_floor_audit(seq, 0.25, k=3, s=3)
    assert rep.passed
    assert rep.notes  # too short for the two-hop rule


def test_floor_audit_gossip_window8_empty():
    seq = graph.gossip_ring(4)
    for s in range(4):
        rep = graph.adjacency_product_floor_audit(seq, 0.4, k=s + 7, s=s)
        assert rep.passed, rep.violations


def test_floor_audit_detects_violation():
    # delta above the true nondegeneracy level must produce violations
    seq = graph.gossip_ring(4)
    rep = graph.adjacency_product_floor_audit(seq, 0.7, k=3, s=0)
    assert not rep.passed


def test_generator_certificates_hold():
    for seq in (
        graph.gossip_ring(4),
        graph.complete_uniform(5),
        graph.metropolis_static(4, [(0, 1), (1, 2), (2, 3)]),
    ):
        steps = range(0, 3 * (seq.joint_window or 1))
        assert all(graph.is_weight_balanced(seq.matrix(k)) for k in steps)
        assert graph.is_delta_nondegenerate(seq, steps, seq.delta)
        assert graph.is_jointly_connected(seq, seq.joint_window, range(1, 4))


def test_validation_rejects_bad_matrices():
    with pytest.raises(ContractViolation):
        graph.periodic_schedule([np.array([[0.5, 0.5], [0.5, -0.5]])])
    with pytest.raises(ContractViolation):
        graph.periodic_schedule([np.array([[0.0, 1.0], [1.0, 0.0]])])  # zero diagonal
    seq = GraphSequenceWithNan()
    with pytest.raises(ContractViolation):
        seq.matrix(0)


def GraphSequenceWithNan():
    return graph.GraphSequence(n=2, matrix_fn=lambda k: np.full((2, 2), np.nan), name="bad")


def test_adjacency_csv_format():
    text = graph.adjacency_csv_string(np.array([[0.75, 0.25], [0.25, 0.75]]))
    lines = text.strip().split("\n")
    assert lines[0] == "i,j,weight"
    assert lines[1] == "0,0,0.75"
    assert len(lines) == 5
    # repr floats round-trip
    assert float(lines[2].split(",")[2]) == 0.25
