import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from sudregion.completion import CompletionInput, complete_matrix, completion_bound, psd_sqrt_factor
from sudregion.oracle import random_completion, stream


def dense_bound_1x1(k11, P, x=1.0, y=1.0, n=801):
    """Max of [x; y]^T K [x; y] over K = [[k11, c], [c, d]] >= 0, k11 + d <= P."""
    best = -np.inf
    for d in np.linspace(0.0, P - k11, n):
        c = np.linspace(-np.sqrt(k11 * d), np.sqrt(k11 * d), n)
        best = max(best, float(np.max(x * x * k11 + 2 * x * y * c + y * y * d)))
    return best


def test_bound_scalar_example():
    inp = CompletionInput(x=[1.0], y=[1.0], K11=[[0.5]], P=1.0)
    assert completion_bound(inp) == pytest.approx(2.0, rel=1e-15)
    assert dense_bound_1x1(0.5, 1.0) == pytest.approx(2.0, rel=1e-12)


def test_bound_zero_y():
    K11 = np.array([[2.0, 0.5], [0.5, 1.0]])
    x = np.array([0.3, -1.2])
    inp = CompletionInput(x=x, y=np.zeros(2), K11=K11, P=5.0)
    assert completion_bound(inp) == pytest.approx(x @ K11 @ x, rel=1e-14)


def test_bound_zero_block():
    inp = CompletionInput(x=[1.0, 2.0], y=[0.6, 0.8], K11=np.zeros((2, 2)), P=1.0)
    assert completion_bound(inp) == pytest.approx(1.0, rel=1e-15)


def test_bound_rejects_over_budget():
    with pytest.raises(ValueError, match="trace"):
        completion_bound(CompletionInput(x=[1.0], y=[1.0], K11=[[2.0]], P=1.0))


def test_aligned_example():
    inp = CompletionInput(x=[1.0, 0.0], y=[2.0], K11=np.diag([1.0, 0.0]), P=2.0)
    res = complete_matrix(inp)
    np.testing.assert_allclose(res.K, [[1, 0, 1], [0, 0, 0], [1, 0, 1]], atol=1e-15)
    v = np.array([1.0, 0.0, 2.0])
    assert v @ res.K @ v == pytest.approx(9.0) and res.bound == pytest.approx(9.0)
    assert res.case == "aligned"
    assert np.linalg.matrix_rank(res.K) == 1
    rng = stream(0, "aligned_example")
    assert max(v @ random_completion(rng, inp) @ v for _ in range(2000)) <= 9.0 + 1e-12


def test_scalar_completion_matches_search():
    res = complete_matrix(CompletionInput(x=[1.0], y=[1.0], K11=[[0.5]], P=1.0))
    np.testing.assert_allclose(res.K, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)
    assert res.bound == pytest.approx(dense_bound_1x1(0.5, 1.0), rel=1e-9)


def test_zero_y_completion_is_block_diagonal():
    K11 = np.array([[2.0, 0.5], [0.5, 1.0]])
    res = complete_matrix(CompletionInput(x=[1.0, 1.0], y=[0.0, 0.0], K11=K11, P=4.0))
    want = np.zeros((4, 4))
    want[:2, :2] = K11
    np.testing.assert_array_equal(res.K, want)
    assert res.case == "zero-y"


def test_degenerate_x_uses_dominant_row():
    K11 = np.diag([4.0, 0.0])
    inp = CompletionInput(x=[0.0, 1.0], y=[1.0], K11=K11, P=5.0)
    res = complete_matrix(inp)
    assert res.case == "degenerate-x"
    assert res.bound == pytest.approx(1.0)
    np.testing.assert_allclose(res.K, [[4, 0, 2], [0, 0, 0], [2, 0, 1]], atol=1e-15)


class TestSqrtFactor:
    def test_identity(self):
        F = psd_sqrt_factor(np.eye(2))
        np.testing.assert_allclose(F.T @ F, np.eye(2), atol=1e-15)
        np.testing.assert_allclose(F @ F.T, np.eye(2), atol=1e-15)

    def test_diagonal(self):
        F = psd_sqrt_factor(np.diag([4.0, 0.0]))
        np.testing.assert_allclose(np.abs(F), [[2, 0], [0, 0]], atol=1e-15)

    def test_random_reconstruction(self, rng):
        A = rng.standard_normal((3, 3))
        K = A @ A.T
        F = psd_sqrt_factor(K)
        assert np.abs(F.T @ F - K).max() <= 1e-10 * np.abs(K).max()
        # descending rows, first nonzero entry positive
        norms = np.linalg.norm(F, axis=1)
        assert np.all(np.diff(norms) <= 1e-12)
        for row in F:
            nz = row[np.abs(row) > 1e-14]
            assert nz.size == 0 or nz[0] > 0

    def test_rank_deficient_rows_zero(self, rng):
        A = rng.standard_normal((4, 2))
        F = psd_sqrt_factor(A @ A.T)
        assert np.all(F[2:] == 0)

    def test_indefinite_raises(self):
        with pytest.raises(ValueError, match="indefinite"):
            psd_sqrt_factor(np.diag([1.0, -1.0]))


@st.composite
def completion_inputs(draw):
    t1 = draw(st.integers(1, 4))
    t2 = draw(st.integers(1, 3))
    r = draw(st.integers(0, t1))
    el = st.floats(-3, 3, allow_subnormal=False)
    A = draw(hnp.arrays(float, (t1, r), elements=el))
    x = draw(hnp.arrays(float, t1, elements=el))
    y = draw(hnp.arrays(float, t2, elements=el))
    K11 = A @ A.T
    P = float(np.trace(K11)) * draw(st.floats(1.0, 3.0)) + draw(st.floats(0.0, 2.0))
    if draw(st.booleans()) and r:
        x = x - A @ np.linalg.lstsq(A, x, rcond=None)[0]
    return CompletionInput(x=x, y=y, K11=K11, P=P)


@given(completion_inputs())
def test_completion_properties(inp):
    res = complete_matrix(inp)
    v = np.concatenate([inp.x, inp.y])
    form = float(v @ res.K @ v)
    assert abs(form - res.bound) <= 1e-10 * max(1.0, res.bound)
    np.testing.assert_array_equal(res.K[:inp.x.size, :inp.x.size], inp.K11)
    w = np.linalg.eigvalsh(res.K)
    tr = float(np.trace(res.K))
    assert w[0] >= -1e-10 * max(tr, 1e-300)
    assert tr <= inp.P + 1e-10
    w11 = np.linalg.eigvalsh(inp.K11)
    rank11 = int(np.sum(w11 > 1e-8 * max(w11[-1], 0.0)))
    assert int(np.sum(w > 1e-8 * max(w[-1], 0.0))) <= max(rank11, 1)


@given(completion_inputs(), st.integers(0, 2 ** 32 - 1))
def test_random_completions_never_beat_bound(inp, seed):
    bound = completion_bound(inp)
    rng = np.random.default_rng(seed)
    v = np.concatenate([inp.x, inp.y])
    for _ in range(20):
        assert v @ random_completion(rng, inp) @ v <= bound + 1e-8 * (1 + bound)
