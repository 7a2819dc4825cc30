import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from sudregion.channel import (Beamformer, InterferenceBudget, MisoNetwork, beamformer_to_covariance,
                               interference_map, load_network, network_to_dict, rate_vector,
                               rates_from_powers,
                               single_user_rates, validate_network)


def two_user():
    # h[j][i]: transmitter j -> receiver i
    h = [[np.array([1.0, 0.0]), np.array([1.0, 0.0])],
         [np.array([1.0, 0.0]), np.array([0.0, 1.0])]]
    return MisoNetwork([2, 2], h, [1.0, 1.0])


def test_three_user_network_is_valid(three_user_net):
    assert validate_network(three_user_net) == []
    assert list(three_user_net.t) == [5, 5, 5]
    np.testing.assert_allclose(three_user_net.P, [1.0, 1.5, 2.0])


def test_direct_channel_norms(three_user_net):
    norms = [float(three_user_net.h[i][i] @ three_user_net.h[i][i]) for i in range(3)]
    np.testing.assert_allclose(norms, [6.72, 9.55, 6.38], rtol=1e-12)


def test_dimension_mismatch_reported():
    net = two_user()
    h = [list(row) for row in net.h]
    h[0][1] = np.array([1.0, 0.0, 0.0])
    bad = MisoNetwork([2, 2], h, [1.0, 1.0])
    assert any("dimension mismatch" in v for v in validate_network(bad))


@pytest.mark.parametrize("P, message", [([1.0, 0.0], "non-positive power"),
                                        ([1.0, -2.0], "non-positive power"),
                                        ([1.0, np.nan], "non-finite")])
def test_power_violations_reported(P, message):
    net = two_user()
    bad = MisoNetwork([2, 2], net.h, P)
    assert any(message in v for v in validate_network(bad))


def test_non_finite_channel_reported():
    net = two_user()
    h = [list(row) for row in net.h]
    h[1][1] = np.array([np.inf, 0.0])
    assert any("non-finite" in v for v in validate_network(MisoNetwork([2, 2], h, [1, 1])))


def test_json_round_trip(tmp_path, three_user_net):
    path = tmp_path / "net.json"
    path.write_text(json.dumps(network_to_dict(three_user_net)))
    again = load_network(path)
    for j in range(3):
        np.testing.assert_array_equal(again.matrix(j), three_user_net.matrix(j))
    np.testing.assert_array_equal(again.P, three_user_net.P)


def test_load_rejects_inconsistent_header(tmp_path, three_user_net):
    doc = network_to_dict(three_user_net)
    doc["t"] = [5, 5, 4]
    path = tmp_path / "net.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError, match="dimension mismatch"):
        load_network(path)


class TestRates:
    def test_orthogonal_beam_at_receiver_one(self):
        net = two_user()
        cov = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
        # b_2 is orthogonal to h_21 but b_1 is aligned with h_12
        np.testing.assert_allclose(rate_vector(net, cov), [0.5, 0.5 * np.log2(1.5)], rtol=1e-15)

    def test_orthogonal_beams_both_ways(self):
        net = two_user()
        h = [[net.h[0][0], np.array([0.0, 1.0])], list(net.h[1])]
        net = MisoNetwork([2, 2], h, [1.0, 1.0])
        cov = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
        np.testing.assert_allclose(rate_vector(net, cov), [0.5, 0.5], rtol=1e-15)

    def test_interfering_beam(self):
        net = two_user()
        cov = [np.diag([1.0, 0.0]), np.diag([1.0, 0.0])]
        assert rate_vector(net, cov)[0] == pytest.approx(0.29248125036057804, rel=1e-12)

    def test_silence(self):
        net = two_user()
        assert np.all(rate_vector(net, [np.zeros((2, 2))] * 2) == 0)

    def test_wrong_shape_raises(self):
        with pytest.raises(ValueError, match="dimension"):
            rate_vector(two_user(), [np.eye(3), np.eye(2)])


@pytest.mark.parametrize("b, want", [
    ([1.0, 0.0], [[1, 0], [0, 0]]),
    ([0.0, 0.0], [[0, 0], [0, 0]]),
])
def test_beamformer_to_covariance(b, want):
    np.testing.assert_array_equal(beamformer_to_covariance(Beamformer(0, b)), want)


def test_beamformer_to_covariance_outer_product():
    b = np.array([0.5, np.sqrt(3) / 2])
    S = beamformer_to_covariance(Beamformer(0, b), P=1.0)
    # independent multiply
    want = np.array([[b[r] * b[c] for c in range(2)] for r in range(2)])
    np.testing.assert_allclose(S, want, rtol=1e-15)
    np.testing.assert_allclose(S, [[0.25, 0.4330127], [0.4330127, 0.75]], atol=1e-7)
    assert np.trace(S) == pytest.approx(1.0)


def test_beamformer_power_violation():
    with pytest.raises(ValueError, match="power"):
        beamformer_to_covariance(Beamformer(0, [2.0, 0.0]), P=1.0)


class TestInterferenceMap:
    def test_zero(self, three_user_net):
        cov = [np.zeros((5, 5))] * 3
        assert np.all(interference_map(three_user_net, cov) == 0)

    def test_orthogonal_beam(self):
        net = two_user()
        cov = [np.diag([0.0, 1.0]), np.zeros((2, 2))]    # b_1 orthogonal to h_12 = (1, 0)
        assert interference_map(net, cov)[0, 1] == 0.0

    def test_aligned_beam(self, three_user_net):
        net = three_user_net
        h12 = net.h[0][1]
        b = np.sqrt(net.P[0]) * h12 / np.linalg.norm(h12)
        cov = [np.outer(b, b), np.zeros((5, 5)), np.zeros((5, 5))]
        assert interference_map(net, cov)[0, 1] == pytest.approx(net.P[0] * h12 @ h12, rel=1e-12)


def test_single_user_corner_rates(three_user_net):
    np.testing.assert_allclose(single_user_rates(three_user_net), [1.4744, 1.9690, 1.8913], atol=1e-3)


class TestBudgetParsing:
    def test_pairs(self):
        b = InterferenceBudget.parse("z12=0.5,z31=inf, z23=0", 3)
        assert b.z2[0, 1] == 0.5 and b.z2[1, 2] == 0 and np.isinf(b.z2[2, 0])
        assert np.isinf(b.z2[0, 2])

    def test_bare_value(self):
        b = InterferenceBudget.parse("0", 3)
        assert np.all(b.for_user(1) == 0)

    def test_long_form(self):
        b = InterferenceBudget.parse("z10_2=1.5", 12)
        assert b.z2[9, 1] == 1.5

    @pytest.mark.parametrize("spec", ["z11=1", "z14=1", "q12=1", "z12=-1", "z12=nan"])
    def test_rejects(self, spec):
        with pytest.raises(ValueError):
            InterferenceBudget.parse(spec, 3)


small_net = st.integers(1, 3).flatmap(lambda m: st.tuples(
    st.just(m),
    st.lists(st.integers(1, 4), min_size=m, max_size=m),
    st.integers(0, 2 ** 32 - 1)))


def _build(spec):
    m, t, seed = spec
    rng = np.random.default_rng(seed)
    h = [[rng.standard_normal(t[j]) for _ in range(m)] for j in range(m)]
    net = MisoNetwork(t, h, rng.uniform(0.5, 2.0, size=m))
    cov = []
    for j in range(m):
        A = rng.standard_normal((t[j], t[j]))
        S = A @ A.T
        cov.append(S * rng.uniform() * net.P[j] / np.trace(S))
    return net, cov, rng


@given(small_net)
def test_rates_below_single_user_bound(spec):
    net, cov, _ = _build(spec)
    assert np.all(rate_vector(net, cov) <= single_user_rates(net) + 1e-9)
    assert np.all(rate_vector(net, cov) >= 0)


@given(small_net)
def test_rank_one_interference_two_paths(spec):
    net, _, rng = _build(spec)
    bs = [rng.standard_normal(t) * 0.3 for t in net.t]
    Z = interference_map(net, [np.outer(b, b) for b in bs])
    for i in range(net.m):
        for j in range(net.m):
            if i != j:
                direct = float(net.h[i][j] @ bs[i]) ** 2
                # relative to |h|^2 |b|^2: both paths cancel the same way
                scale = float(net.h[i][j] @ net.h[i][j]) * float(bs[i] @ bs[i])
                assert abs(Z[i, j] - direct) <= 1e-12 * max(scale, 1e-300)


@given(hnp.arrays(float, 3, elements=st.floats(0, 50)),
       hnp.arrays(float, 3, elements=st.floats(0, 50)),
       hnp.arrays(float, (3, 3), elements=st.floats(0, 10)))
def test_rate_monotone_in_signal(signal, extra, interference):
    lo = rates_from_powers(signal, interference)
    hi = rates_from_powers(signal + extra, interference)
    assert np.all(hi >= lo)


@given(hnp.arrays(float, st.integers(1, 5), elements=st.floats(-3, 3)))
def test_beamformer_covariance_properties(b):
    S = beamformer_to_covariance(Beamformer(0, b))
    assert np.allclose(S, S.T)
    assert np.trace(S) == pytest.approx(b @ b, rel=1e-12, abs=1e-300)
    w = np.linalg.eigvalsh(S)
    assert w[0] >= -1e-12 * max(w[-1], 1.0)
    if b.size > 1:
        assert w[-2] <= 1e-12 * max(w[-1], 1e-300)
