import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brute import beta_by_enumeration
from hpforecast.errors import InvalidArgument
from hpforecast.switching import (ConstantRate, HarmonicRate, SwitchingState, best_switching_sequence,
                                  mix_loss, run_switching, sequence_loss, switch_set, switching_bound,
                                  switching_combine, switching_init, switching_prior, switching_update)


def test_combine_examples():
    s = switching_init(2, 1.0)
    assert switching_combine(s, [0.0, 1.0]) == 0.5
    s.log_beta = np.log([3.0, 1.0])
    assert switching_combine(s, [0.0, 1.0]) == 0.25
    assert switching_combine(s, [0.7, 0.7]) == pytest.approx(0.7)


def test_m_one_rejected():
    with pytest.raises(InvalidArgument):
        switching_init(1, 1.0)


def test_equal_losses_keep_uniform():
    s = switching_update(switching_init(2, 1.0), [0.0, 0.0])
    np.testing.assert_allclose(s.beta, [0.5, 0.5], rtol=1e-15)


def test_large_loss_on_second_expert():
    s = switching_update(switching_init(2, 1.0), [0.0, 50.0])
    assert s.beta[0] == pytest.approx(0.25, abs=1e-12)


def test_update_formula_matches_hand_evaluation():
    rng = np.random.default_rng(0)
    s = switching_init(4, 0.7)
    s.log_beta = np.log(rng.uniform(0.1, 1.0, 4))
    losses = rng.uniform(0, 2, 4)
    alpha = 0.3
    prev = s.beta
    e = prev * np.exp(-0.7 * losses)
    want = (1 - alpha) * e + alpha / 3 * (e.sum() - e)
    np.testing.assert_allclose(switching_update(s, losses, alpha).beta, want, rtol=1e-13)
    np.testing.assert_allclose(s.beta, prev)  # functional form copies


def test_rate_validation():
    with pytest.raises(InvalidArgument):
        ConstantRate(1.0)
    with pytest.raises(InvalidArgument):
        switching_init(2, 1.0).update([0.0, 0.0], alpha=0.0)


def test_prior_examples():
    assert switching_prior((0,), 2) == 0.5
    assert switching_prior((0, 0), 2, HarmonicRate()) == 0.25
    assert switching_prior((), 3) == 1.0


def test_prior_sums_to_one():
    total = math.fsum(switching_prior(seq, 3) for seq in product(range(3), repeat=4))
    assert total == pytest.approx(1.0, abs=1e-14)


def test_switch_set():
    assert switch_set((0, 0, 1, 1, 0)) == [2, 4]
    assert switch_set((2,)) == []


@pytest.mark.parametrize("T", [10, 100, 1000])
def test_bound_telescopes_without_switches(T):
    assert switching_bound(T, 2, (0,) * T, 1.0) == pytest.approx(math.log(2) + math.log(T), rel=1e-12)


def test_bound_constant_rate():
    assert switching_bound(2, 2, (1, 1), 1.0, ConstantRate(0.5)) == pytest.approx(2 * math.log(2), rel=1e-15)


def test_bound_single_round():
    assert switching_bound(1, 5, (3,), 2.0) == pytest.approx(math.log(5) / 2.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 200), st.integers(0, 2**32 - 1), st.floats(0.1, 4.0))
def test_binary_bound_within_corollary(T, seed, eta):
    rng = np.random.default_rng(seed)
    seq = tuple(int(v) for v in np.cumsum(rng.random(T) < 0.05) % 2)
    n = len(switch_set(seq))
    assert switching_bound(T, 2, seq, eta) <= (1 + (n + 1) * math.log(T)) / eta + 1e-12


def test_best_sequence_examples():
    seq, loss = best_switching_sequence(np.ones((4, 3)))
    assert seq == (0, 0, 0, 0) and loss == 4.0
    seq, loss = best_switching_sequence(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert seq == (0, 1) and loss == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_best_sequence_matches_brute_force(seed):
    L = np.random.default_rng(seed).uniform(0, 1, (6, 3))
    brute = min(sequence_loss(L, s) for s in product(range(3), repeat=6))
    assert best_switching_sequence(L)[1] == pytest.approx(brute, abs=1e-12)
    for k in range(6):
        seq, loss = best_switching_sequence(L, switches=k)
        want = min(sequence_loss(L, s) for s in product(range(3), repeat=6) if len(switch_set(s)) == k)
        assert len(switch_set(seq)) == k and loss == pytest.approx(want, abs=1e-12)


def test_constrained_sequence_infeasible():
    assert best_switching_sequence(np.zeros((3, 2)), switches=3) is None


@pytest.mark.parametrize("seed", range(3))
def test_beta_matches_prior_expectation(seed):
    rng = np.random.default_rng(seed)
    L = rng.uniform(0, 1, (6, 3))
    s = switching_init(3, 1.0)
    for t in range(1, 7):
        s.update(L[t - 1])
        want = beta_by_enumeration(L, 1.0, t, 3, HarmonicRate())
        np.testing.assert_allclose(s.beta, want, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(1, 60), st.integers(0, 2**32 - 1), st.floats(0.05, 3.0))
def test_total_weight_and_monotonicity(m, T, seed, eta):
    rng = np.random.default_rng(seed)
    L = rng.uniform(0, 3, (T, m))
    s = switching_init(m, eta)
    alg = 0.0
    potential = s.log_total()
    for t in range(T):
        before = s.copy()
        alg += mix_loss(s, L[t])
        s.update(L[t])
        want = math.log(np.sum(before.beta * np.exp(-eta * L[t])))
        assert s.log_total() == pytest.approx(want, rel=1e-12, abs=1e-12)
        nxt = s.log_total() + eta * alg
        assert math.exp(nxt - potential) <= 1 + 1e-12
        potential = nxt
        assert np.all(np.isfinite(s.log_beta))


def test_long_run_does_not_underflow():
    run = run_switching(np.full((5000, 3), 400.0), 1.0)
    assert np.all(np.isfinite(run.log_betas[-1]))
    assert math.isfinite(run.total_loss)


def test_combined_prediction_charge_obeys_bound():
    from hpforecast.streams import expert_stream
    from hpforecast.losses import squared
    preds, targets = expert_stream(40, 3, 0)
    fns = [squared(z, 0.0, 0.7) for z in targets]
    L = np.array([[fns[t](p) for p in preds[t]] for t in range(40)])
    run = run_switching(L, 1.0, predictions=preds, loss_fns=fns)
    seq, comp = best_switching_sequence(L)
    assert run.total_loss <= comp + switching_bound(40, 3, seq, 1.0) + 1e-9


def test_state_roundtrip():
    s = switching_init(3, 0.5, ConstantRate(0.2))
    s.update([0.1, 0.5, 0.9])
    back = SwitchingState.from_dict(s.to_dict())
    np.testing.assert_array_equal(back.log_beta, s.log_beta)
    assert back.rate == s.rate and back.t == s.t
