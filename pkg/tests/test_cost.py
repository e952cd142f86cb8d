import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from convlower import CostWeights, LayerConfig, OpCounter, Strategy, crossover_ratio, estimate, lower, lift, multiply, select_strategy
from convlower.bench import random_instance
from convlower.cost import DEFAULT_WEIGHTS, _type1_minus_type3, calibrate_weights, with_measured_efficiency

layers = st.builds(
    lambda n, kfrac, d, o, b: LayerConfig(n=n, k=max(1, round(kfrac * n)), d=d, o=o, b=b),
    st.integers(1, 60), st.floats(0.0, 1.0), st.integers(1, 400), st.integers(1, 400), st.integers(1, 64),
)


def test_unit_kernel_collapses_all_counts():
    layer = LayerConfig(n=9, k=1, d=7, o=5, b=3)
    ests = [estimate(s, layer) for s in Strategy]
    for e in ests[1:]:
        assert (e.lower_elements_written, e.gemm_flops, e.lift_adds, e.total_score) == (
            ests[0].lower_elements_written, ests[0].gemm_flops, ests[0].lift_adds, ests[0].total_score)
    assert ests[0].lift_adds == 0


def test_small_type1_counts_match_instrumentation():
    layer = LayerConfig(n=5, k=3, d=2, o=1, b=1)
    est = estimate(Strategy.TYPE1, layer)
    assert est.lower_elements_written == 162
    assert est.gemm_flops == 324
    assert est.lowered_bytes == 162 * 4
    counter = OpCounter()
    X, W = random_instance(layer, np.random.default_rng(0))
    lowered = lower(X, W, 1, counter)
    assert counter.lower_elements_written == 162
    assert 2 * lowered.Dhat.shape[0] * lowered.Dhat.shape[1] * lowered.Khat.shape[1] == 324


@settings(max_examples=40, deadline=None)
@given(layer=layers)
def test_type1_over_type3_flops_is_output_over_input_area(layer):
    e1 = estimate(Strategy.TYPE1, layer)
    e3 = estimate(Strategy.TYPE3, layer)
    assert e1.gemm_flops * layer.n ** 2 == e3.gemm_flops * layer.m ** 2


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 9), kfrac=st.floats(0, 1), d=st.integers(1, 5), o=st.integers(1, 5), b=st.integers(1, 3),
       seed=st.integers(0, 2**32 - 1))
def test_counts_equal_instrumented_runs(n, kfrac, d, o, b, seed):
    layer = LayerConfig(n=n, k=max(1, round(kfrac * n)), d=d, o=o, b=b)
    X, W = random_instance(layer, np.random.default_rng(seed))
    for s in Strategy:
        counter = OpCounter()
        lowered = lower(X, W, s, counter)
        Rhat = multiply(lowered.Dhat, lowered.Khat)
        lift(Rhat, s, layer, counter)
        est = estimate(s, layer)
        assert counter.lower_elements_written == est.lower_elements_written
        assert counter.lift_adds == est.lift_adds
        assert 2 * Rhat.shape[0] * lowered.Dhat.shape[1] * Rhat.shape[1] == est.gemm_flops


@settings(max_examples=80, deadline=None)
@given(layer=layers)
def test_type2_sits_between(layer):
    assume(layer.k >= 2)
    e1, e2, e3 = (estimate(s, layer) for s in Strategy)
    assert e1.lift_adds < e2.lift_adds < e3.lift_adds
    assert e3.lower_elements_written < e2.lower_elements_written
    # type 2 lowers less than type 1 only while m^2 k > n^2, i.e. the output is not tiny
    if layer.m ** 2 * layer.k > layer.n ** 2:
        assert e2.lower_elements_written < e1.lower_elements_written


@pytest.mark.parametrize("n,k", [(13, 3), (13, 5), (27, 3), (27, 5), (55, 11)])
def test_many_inputs_few_outputs_picks_type3(n, k):
    assert select_strategy(LayerConfig(n=n, k=k, d=384, o=3)).strategy is Strategy.TYPE3


@pytest.mark.parametrize("n,k", [(13, 3), (13, 5), (27, 3), (27, 5), (55, 11)])
def test_few_inputs_many_outputs_picks_type1(n, k):
    assert select_strategy(LayerConfig(n=n, k=k, d=3, o=384)).strategy is Strategy.TYPE1


@pytest.mark.parametrize("layer", [LayerConfig(15, 3, 384, 384, 1), LayerConfig(15, 3, 256, 384, 1),
                                   LayerConfig(15, 3, 384, 256, 1)])
def test_balanced_choice_stable_under_weight_perturbation(layer):
    base = select_strategy(layer).strategy
    for fa in (0.9, 1.0, 1.1):
        for fb in (0.9, 1.0, 1.1):
            assert select_strategy(layer, DEFAULT_WEIGHTS.scaled(fa, fb)).strategy is base


@settings(max_examples=60, deadline=None)
@given(layer=layers, scale=st.floats(1e-3, 1e3))
def test_choice_invariant_under_uniform_weight_scaling(layer, scale):
    assert select_strategy(layer).strategy is select_strategy(layer, DEFAULT_WEIGHTS.scaled(scale, scale)).strategy


def test_ties_break_toward_lower_type():
    choice = select_strategy(LayerConfig(n=8, k=1, d=4, o=4, b=2))
    assert choice.strategy is Strategy.TYPE1
    assert set(choice.estimates) == set(Strategy)
    assert choice.ratio == 1.0


@settings(max_examples=60, deadline=None)
@given(n=st.integers(3, 60), kfrac=st.floats(0, 1), b=st.integers(1, 32), log2_product=st.integers(2, 16))
def test_choice_monotone_in_ratio(n, kfrac, b, log2_product):
    k = max(1, round(kfrac * n))
    seen_type3 = False
    for i in range(log2_product + 1):
        layer = LayerConfig(n=n, k=k, d=2 ** i, o=2 ** (log2_product - i), b=b)
        choice = select_strategy(layer).strategy
        if seen_type3:
            assert choice is not Strategy.TYPE1
        seen_type3 |= choice is Strategy.TYPE3


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 60), kfrac=st.floats(0, 1), b=st.integers(1, 32), d=st.integers(1, 384), o=st.integers(1, 384))
def test_score_difference_crosses_at_most_once(n, kfrac, b, d, o):
    template = LayerConfig(n=n, k=max(2, round(kfrac * n)) if n >= 2 else 1, d=d, o=o, b=b)
    diffs = [_type1_minus_type3(template, r, DEFAULT_WEIGHTS) for r in np.geomspace(1 / 64, 64, 50)]
    signs = [np.sign(x) for x in diffs if x != 0]
    assert sum(1 for a, c in zip(signs, signs[1:]) if a != c) <= 1


def test_crossover_degenerate_kernel():
    assert crossover_ratio(LayerConfig(n=13, k=1, d=64, o=64, b=16)) is None


def test_crossover_exists_and_balances_scores():
    template = LayerConfig(n=13, k=3, d=64, o=64, b=16)
    ratio = crossover_ratio(template)
    assert ratio is not None and 1 / 64 < ratio < 64
    assert abs(_type1_minus_type3(template, ratio, DEFAULT_WEIGHTS)) < 1e-9
    below = _type1_minus_type3(template, ratio / 2, DEFAULT_WEIGHTS)
    above = _type1_minus_type3(template, ratio * 2, DEFAULT_WEIGHTS)
    assert below < 0 < above


def test_crossover_outside_range_reports_side():
    # a huge per-flop cost keeps type 1 (fewer flops) ahead everywhere
    assert crossover_ratio(LayerConfig(13, 3, 64, 64, 16), CostWeights(alpha=1e-12, beta=1.0)) == math.inf
    slow_type1 = CostWeights(alpha=1e-12, beta=1.0, efficiency={Strategy.TYPE1: 100.0})
    assert crossover_ratio(LayerConfig(13, 3, 64, 64, 16), slow_type1) == 0.0


def test_weights_validation_and_calibration():
    with pytest.raises(ValueError):
        CostWeights(alpha=0.0, beta=1.0)
    w = calibrate_weights(reps=2, copy_elements=1 << 16, cube=64)
    assert w.alpha > 0 and w.beta > 0


def test_measured_efficiency_hook_rescales_gemm_term():
    layer = LayerConfig(n=9, k=3, d=16, o=8, b=1)
    w = with_measured_efficiency(DEFAULT_WEIGHTS, layer, reps=1)
    for s in Strategy:
        assert w.gemm_factor(s) > 0
        plain = estimate(s, layer)
        refined = estimate(s, layer, w)
        gemm_part = plain.total_score - DEFAULT_WEIGHTS.alpha * (plain.lower_elements_written + plain.lift_adds)
        assert refined.total_score == pytest.approx(plain.total_score + gemm_part * (w.gemm_factor(s) - 1))
