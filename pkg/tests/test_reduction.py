import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from sudregion.channel import InterferenceBudget, MisoNetwork
from sudregion.oracle import random_budget, random_network
from sudregion.reduction import householder_to_axis, lift_solution, reduce_user_problem


def hand_network():
    # user 2 (index 1): h_21 = (1, 0, 0), h_22 = (1, 1, 0)
    h = [[np.array([1.0]), np.array([0.3])],
         [np.array([1.0, 0.0, 0.0]), np.array([1.0, 1.0, 0.0])]]
    return MisoNetwork([1, 3], h, [1.0, 1.0])


def test_hand_rotation():
    red = reduce_user_problem(hand_network(), 1, InterferenceBudget.unconstrained(2))
    assert red.dim == 1
    np.testing.assert_allclose(red.h, [1.0], atol=1e-15)
    assert red.h_hat_norm2 == pytest.approx(1.0, rel=1e-15)
    np.testing.assert_allclose(red.hj, [[1.0]], atol=1e-15)


def test_identity_when_few_antennas(rng):
    net = random_network(rng, 3, [2, 2, 2])
    red = reduce_user_problem(net, 2, InterferenceBudget.unconstrained(3))
    assert red.dim == 2
    np.testing.assert_array_equal(red.lift, np.eye(2))
    np.testing.assert_array_equal(red.h, net.h[2][2])
    assert red.h_hat_norm2 == 0.0


def test_zero_cross_channels_keep_norm(rng):
    h = [[rng.standard_normal(4) for _ in range(3)] for _ in range(3)]
    h[0][1] = np.zeros(4)
    h[0][2] = np.zeros(4)
    net = MisoNetwork([4, 4, 4], h, [1, 1, 1])
    red = reduce_user_problem(net, 0, InterferenceBudget.unconstrained(3))
    np.testing.assert_array_equal(red.lift, np.eye(4))
    assert red.h @ red.h + red.h_hat_norm2 == pytest.approx(h[0][0] @ h[0][0], rel=1e-12)


def test_lift_zero_block_is_zero_forcing():
    red = reduce_user_problem(hand_network(), 1, InterferenceBudget.unconstrained(2))
    out = lift_solution(red, np.zeros((1, 1)))
    u = np.array([0.0, 1.0, 0.0])     # h_22 minus its projection on h_21, normalized
    np.testing.assert_allclose(out.S, np.outer(u, u), atol=1e-15)
    assert out.signal == pytest.approx(1.0, rel=1e-15)
    h21 = np.array([1.0, 0.0, 0.0])
    assert h21 @ out.S @ h21 == pytest.approx(0.0, abs=1e-15)
    assert out.case == "degenerate-x"


def test_lift_without_residual_is_block_diagonal(rng):
    net = random_network(rng, 3, [2, 2, 2])
    red = reduce_user_problem(net, 0, InterferenceBudget.unconstrained(3))
    S11 = np.array([[0.3, 0.1], [0.1, 0.2]])
    out = lift_solution(red, S11)
    np.testing.assert_allclose(out.S, S11, atol=1e-15)
    assert out.case == "zero-y"


def test_lift_rejects_infeasible():
    red = reduce_user_problem(hand_network(), 1, InterferenceBudget.unconstrained(2))
    with pytest.raises(ValueError):
        lift_solution(red, np.array([[2.0]]))
    with pytest.raises(ValueError):
        lift_solution(red, np.array([[0.5]]), power_used=0.4)


@given(hnp.arrays(float, st.integers(1, 6), elements=st.floats(-5, 5)))
def test_householder_maps_to_axis(v):
    U = householder_to_axis(v)
    np.testing.assert_allclose(U.T @ U, np.eye(v.size), atol=1e-12)
    w = U.T @ v
    scale = np.abs(v).max(initial=0.0)
    nv = scale * np.linalg.norm(v / scale) if scale > 0 else 0.0     # no underflow for tiny v
    assert w[0] >= 0
    assert w[0] == pytest.approx(nv, rel=1e-12, abs=1e-300)
    assert np.all(np.abs(w[1:]) <= 1e-12 * max(nv, 1e-300))


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4), st.integers(1, 7))
def test_reduction_invariants(seed, m, t):
    rng = np.random.default_rng(seed)
    ts = rng.integers(1, 6, size=m)
    ts[0] = t
    net = random_network(rng, m, ts)
    red = reduce_user_problem(net, 0, random_budget(rng, net))
    assert red.dim == min(t, m - 1)
    assert np.abs(red.lift.T @ red.lift - np.eye(t)).max() <= 1e-10
    n2 = net.h[0][0] @ net.h[0][0]
    assert abs(red.h @ red.h + red.h_hat_norm2 - n2) <= 1e-10 * max(n2, 1.0)
    # every constraint vector lives in the leading coordinates after rotation
    for j, other in enumerate(red.others):
        rotated = red.lift.T @ net.h[0][other]
        np.testing.assert_allclose(rotated[:red.dim], red.hj[j], atol=1e-10 * max(1, np.abs(rotated).max()))
        assert np.abs(rotated[red.dim:]).max(initial=0.0) <= 1e-10 * max(1, np.abs(rotated).max())
    # a random reduced block lifts to the same constraint values
    A = rng.standard_normal((red.dim, red.dim))
    S11 = A @ A.T
    S11 *= rng.uniform() * red.P / np.trace(S11)
    out = lift_solution(red, S11)
    for j, other in enumerate(red.others):
        want = red.hj[j] @ S11 @ red.hj[j]
        got = net.h[0][other] @ out.S @ net.h[0][other]
        assert abs(got - want) <= 1e-10 * max(abs(want), 1.0)
    assert np.trace(out.S) <= red.P + 1e-10
    w = np.linalg.eigvalsh(out.S)
    assert w[0] >= -1e-10 * max(w[-1], 1.0)
