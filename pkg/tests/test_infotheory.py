import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from infocausality.infotheory import (
    DistributionError,
    JointDistribution,
    apply_local_channel,
    binary_entropy,
    bits_and_guesses,
    check_ic_proof_chain,
    conditional_entropy,
    ic_sum,
    ic_term,
    mutual_information,
    quadratic_bound,
    random_classical_strategy,
    shannon_entropy,
    tsirelson_threshold,
)

SQRT_HALF = 1 / math.sqrt(2)


# -- oracles ------------------------------------------------------------------------


def mp_ic_sum(n, E, dps=60):
    """2^n (1 - h((1+E^n)/2)) at high precision, straight from the definition."""
    with mp.workdps(dps):
        E = mp.mpf(E)
        p = (1 + E**n) / 2
        h = -p * mp.log(p, 2) - (1 - p) * mp.log(1 - p, 2)
        return 2**n * (1 - h)


def root_for_depth(n):
    """Bias at which depth n alone reaches IC sum 1, by bracketing root-find."""
    return brentq(lambda E: float(mp_ic_sum(n, E, dps=40)) - 1.0, 0.5, 0.99, xtol=1e-12)


def threshold_oracle(nmax):
    return min(root_for_depth(n) for n in range(1, nmax + 1))


def random_joint(rng, sizes):
    p = rng.dirichlet(np.ones(int(np.prod(sizes)))).reshape(sizes)
    names = tuple(f"v{i}" for i in range(len(sizes)))
    return JointDistribution(names, p)


# -- binary entropy -------------------------------------------------------------------


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0) == 0.0 and binary_entropy(1) == 0.0
    with mp.workdps(30):
        p = (2 + mp.sqrt(2)) / 4
        oracle = float(-p * mp.log(p, 2) - (1 - p) * mp.log(1 - p, 2))
    assert binary_entropy((2 + math.sqrt(2)) / 4) == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(0.60089, abs=1e-4)
    with pytest.raises(ValueError):
        binary_entropy(1.5)


# -- Shannon quantities --------------------------------------------------------------


def test_independent_and_correlated_bits():
    d = JointDistribution(("a", "b"), np.full((2, 2), 0.25))
    assert shannon_entropy(d, ["a", "b"]) == pytest.approx(2.0)
    assert mutual_information(d, "a", "b") == pytest.approx(0.0, abs=1e-15)
    d = JointDistribution(("a", "b"), np.array([[0.5, 0], [0, 0.5]]))
    assert mutual_information(d, "a", "b") == pytest.approx(1.0)


def test_guess_with_85_percent_accuracy():
    d = JointDistribution(("x", "g"), np.array([[0.425, 0.075], [0.075, 0.425]]))
    assert mutual_information(d, "x", "g") == pytest.approx(1 - binary_entropy(0.85), abs=1e-12)
    assert 1 - binary_entropy(0.85) == pytest.approx(0.39016, abs=1e-5)


def test_unknown_variable():
    d = JointDistribution(("a",), np.array([0.5, 0.5]))
    with pytest.raises(DistributionError):
        shannon_entropy(d, ["z"])


def test_distribution_validation():
    with pytest.raises(DistributionError):
        JointDistribution(("a",), np.array([0.5, 0.6]))
    with pytest.raises(DistributionError):
        JointDistribution(("a", "a"), np.full((2, 2), 0.25))
    with pytest.raises(DistributionError):
        JointDistribution(("a",), np.array([1.5, -0.5]))


def test_marginal_order_follows_request():
    rng = np.random.default_rng(0)
    d = random_joint(rng, (2, 3, 4))
    m = d.marginal(["v2", "v0"])
    assert m.sizes == (4, 2)
    assert np.allclose(m.probs, d.probs.sum(axis=1).T)


def test_json_round_trip():
    rng = np.random.default_rng(1)
    d = random_joint(rng, (2, 3))
    back = JointDistribution.from_json(d.to_json())
    assert back.names == d.names and np.array_equal(back.probs, d.probs)
    assert d.to_dict()["vars"] == [{"name": "v0", "size": 2}, {"name": "v1", "size": 3}]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.integers(2, 3), min_size=3, max_size=4))
def test_chain_rule(seed, sizes):
    d = random_joint(np.random.default_rng(seed), tuple(sizes))
    X, M, B = ["v0"], ["v1"], d.names[2:]
    lhs = mutual_information(d, X, M + list(B))
    rhs = mutual_information(d, X, B) + mutual_information(d, X, M, given=B)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert mutual_information(d, X, M + list(B)) >= -1e-12


def test_conditional_entropy_definition():
    d = random_joint(np.random.default_rng(4), (3, 2))
    p = d.probs
    brute = -sum(
        p[i, j] * math.log2(p[i, j] / p[:, j].sum()) for i in range(3) for j in range(2)
    )
    assert conditional_entropy(d, "v0", "v1") == pytest.approx(brute, abs=1e-12)


# -- channels -----------------------------------------------------------------------


def test_identity_channel():
    d = random_joint(np.random.default_rng(2), (2, 3))
    out = apply_local_channel(d, "v1", np.eye(3))
    assert np.allclose(out.probs, d.probs, atol=0)


def test_constant_channel_kills_information():
    d = random_joint(np.random.default_rng(3), (3, 3))
    const = np.zeros((3, 2))
    const[:, 1] = 1
    out = apply_local_channel(d, "v1", const)
    assert mutual_information(out, "v0", "v1") == pytest.approx(0.0, abs=1e-12)


def test_malformed_channel():
    d = random_joint(np.random.default_rng(3), (2, 2))
    with pytest.raises(DistributionError):
        apply_local_channel(d, "v1", [[0.5, 0.6], [1.0, 0.0]])
    with pytest.raises(DistributionError):
        apply_local_channel(d, "v1", np.eye(3))


def test_channel_matches_brute_force_pushforward():
    rng = np.random.default_rng(8)
    d = random_joint(rng, (2, 3))
    W = rng.dirichlet(np.ones(4), size=3)
    out = apply_local_channel(d, "v1", W)
    for i in range(2):
        for j in range(4):
            assert out.probs[i, j] == pytest.approx(
                sum(d.probs[i, k] * W[k, j] for k in range(3)), abs=1e-15
            )


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_data_processing(seed):
    rng = np.random.default_rng(seed)
    d = random_joint(rng, (3, 4, 2))
    W = rng.dirichlet(np.ones(3), size=4)
    out = apply_local_channel(d, "v1", W)
    assert mutual_information(out, ["v0", "v2"], "v1") <= (
        mutual_information(d, ["v0", "v2"], "v1") + 1e-9
    )


# -- the IC functional ----------------------------------------------------------------


def test_ic_sum_examples():
    ev = ic_sum(1, 1)
    assert ev.sum == 2.0 and ev.violated
    ev = ic_sum(3, 0.75)
    assert ev.sum == pytest.approx(float(mp_ic_sum(3, 0.75)), abs=1e-12)
    assert ev.sum == pytest.approx(1.059, abs=1e-3) and ev.violated
    ev = ic_sum(20, SQRT_HALF)
    assert not ev.violated
    assert ev.sum == pytest.approx(float(mp_ic_sum(20, mp.sqrt(2) / 2)), abs=1e-12)
    assert ev.sum == pytest.approx(1 / (2 * math.log(2)), abs=1e-6)


@pytest.mark.parametrize("n", [1, 2, 5, 17, 40, 60, 200])
@pytest.mark.parametrize("E", [0.1, 0.5, 0.7071, 0.72, 0.9])
def test_ic_sum_against_high_precision(n, E):
    # t^2 = E^(2n) must survive the subtraction 1 - h
    oracle = mp_ic_sum(n, E, dps=int(2 * n * -math.log10(E)) + 60)
    ev = ic_sum(n, E)
    assert ev.log_sum2 == pytest.approx(float(mp.log(oracle, 2)), rel=1e-9, abs=1e-9)


def test_ic_sum_underflow_regime():
    ev = ic_sum(10**6, 0.7072)
    assert ev.per_term == 0.0  # too small for a double
    assert math.isfinite(ev.log_sum2) and ev.violated
    expected = 10**6 * math.log2(2 * 0.7072**2) - math.log2(2 * math.log(2))
    assert ev.log_sum2 == pytest.approx(expected, rel=1e-12)


def test_ic_sum_input_checks():
    with pytest.raises(ValueError):
        ic_sum(0, 0.5)
    with pytest.raises(ValueError):
        ic_sum(2, 1.2)
    assert ic_sum(4, 0).sum == 0.0 and not ic_sum(4, 0).violated


def test_taylor_lower_bound():
    for E in np.linspace(0, 1, 101):
        for n in range(1, 31):
            t = E**n
            assert ic_term(t) >= t * t / (2 * math.log(2)) - 1e-12


def test_violation_pattern_up_to_depth_30():
    for E in np.linspace(0.72, 1.0, 29):
        assert any(ic_sum(n, E).violated for n in range(1, 31))
    for E in np.linspace(0.0, SQRT_HALF, 29):
        assert not any(ic_sum(n, E).violated for n in range(1, 31))


# -- threshold -------------------------------------------------------------------


@pytest.mark.parametrize("nmax", [1, 5, 20])
def test_threshold_against_root_finder(nmax):
    assert tsirelson_threshold(nmax) == pytest.approx(threshold_oracle(nmax), abs=2e-7)


def test_threshold_frozen_values():
    # frozen from the root-finding oracle above
    assert root_for_depth(1) == pytest.approx(0.7799442711, abs=1e-9)
    assert threshold_oracle(20) == pytest.approx(0.7129045, abs=1e-6)
    assert tsirelson_threshold(20) == pytest.approx(0.71290, abs=1e-5)


def test_threshold_large_depth():
    # for huge n the correction t^2/6 vanishes and (2E^2)^n = 2 ln 2 exactly
    n = 10**6
    analytic = math.sqrt((2 * math.log(2)) ** (1 / n) / 2)
    est = tsirelson_threshold(n)
    assert est == pytest.approx(analytic, abs=2e-7)
    assert est == pytest.approx(0.7071068, abs=1e-4)


def test_threshold_monotone():
    values = [tsirelson_threshold(n) for n in (1, 2, 5, 20, 100, 1000)]
    assert all(a >= b for a, b in zip(values, values[1:]))


# -- quadratic bound -----------------------------------------------------------------


def test_quadratic_bound_examples():
    q = quadratic_bound([1, 0])
    assert q.value == 1 and q.satisfied
    q = quadratic_bound([SQRT_HALF] * 3)
    assert q.value == pytest.approx(1.5) and not q.satisfied
    with pytest.raises(ValueError):
        quadratic_bound([1.1])


def test_quadratic_bound_on_concatenation_biases():
    for E in (0.3, 0.6, 0.7, 0.75):
        for n in range(1, 9):
            q = quadratic_bound([E**n] * 2**n)
            assert q.value == pytest.approx((2 * E * E) ** n, rel=1e-12)


# -- proof chain ------------------------------------------------------------------------


def test_classical_strategies_obey_every_step():
    rng = np.random.default_rng(123)
    for n_bits in (2, 3):
        for det in (False, True):
            for _ in range(5):
                d = random_classical_strategy(n_bits, rng, deterministic=det)
                bits, guesses = bits_and_guesses(n_bits)
                rep = check_ic_proof_chain(d, bits, guesses, "m", "lam", bound=1.0)
                assert rep.all_hold(), [c.to_dict() for c in rep.checks if not c.holds()]
                assert rep.ic_sum <= 1 + 1e-9


def test_guess_chain_tight_when_box_holds_the_inputs():
    # e = x itself (message carries both bits), guesses copy the bits
    p = np.zeros((2, 2, 4, 2, 2))
    for x0 in range(2):
        for x1 in range(2):
            p[x0, x1, 2 * x0 + x1, x0, x1] = 0.25
    d = JointDistribution(("x0", "x1", "m", "g0", "g1"), p)
    rep = check_ic_proof_chain(d, ["x0", "x1"], ["g0", "g1"], "m")
    assert rep.bound == pytest.approx(2.0)
    for i in range(2):
        assert rep[f"entropy_guess[{i}]"].slack == pytest.approx(0.0, abs=1e-12)
    # both summed forms coincide here: H(x_i|e) = 0
    assert rep["weighted"].lhs == pytest.approx(rep["entropy_sum"].lhs, abs=1e-12)
    assert rep["weighted"].rhs == pytest.approx(rep["entropy_sum"].rhs, abs=1e-12)


def test_unit_weights_reproduce_summed_form_lhs():
    rng = np.random.default_rng(77)
    d = random_classical_strategy(2, rng)
    rep = check_ic_proof_chain(d, *bits_and_guesses(2), "m", "lam", weights=[1, 1, 1])
    assert rep["weighted"].lhs == pytest.approx(rep["entropy_sum"].lhs, abs=1e-12)
    # sum_i H(x_i|e) >= H(x|e), so the weighted form is at least as demanding
    assert rep["weighted"].rhs >= rep["entropy_sum"].rhs - 1e-12


def test_dependent_inputs_rejected():
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[1, 1, 1] = 0.5
    d = JointDistribution(("x0", "x1", "m"), p)
    with pytest.raises(DistributionError):
        check_ic_proof_chain(d, ["x0", "x1"], ["x0", "x1"], "m")
    with pytest.raises(DistributionError):
        check_ic_proof_chain(d, ["x0"], ["x0", "x1"], "m", require_independent=False)


def test_independence_superadditivity():
    rng = np.random.default_rng(31)
    for _ in range(50):
        # independent uniform bits and a random channel e | x
        e_size = int(rng.integers(2, 5))
        W = rng.dirichlet(np.ones(e_size), size=8)
        p = (W / 8).reshape(2, 2, 2, e_size)
        d = JointDistribution(("x0", "x1", "x2", "e"), p)
        whole = mutual_information(d, ["x0", "x1", "x2"], "e")
        parts = sum(mutual_information(d, f"x{i}", "e") for i in range(3))
        assert whole >= parts - 1e-9
