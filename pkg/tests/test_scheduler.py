import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convlower import (
    ConfigurationError,
    DeviceProfile,
    LayerConfig,
    heuristic_gap,
    optimal_split_sweep,
    proportional_split,
    simulate_makespan,
)
from convlower.scheduler import (
    device_times,
    format_device_profiles,
    gap_audit,
    layer_work,
    load_device_profiles,
    make_plan,
    makespan_curve,
    parse_device_profiles,
    round_counts,
)

LAYER = LayerConfig(n=27, k=5, d=96, o=256, b=256)
CPU = DeviceProfile("cpu", 1e12)
GPU = DeviceProfile("gpu", 2e12)


def test_one_and_two_tflops_sends_a_third_to_cpu():
    plan = proportional_split([CPU, GPU], b=256)
    assert plan.fractions[0] == pytest.approx(1 / 3)
    assert plan.counts == (85, 171)


def test_single_and_identical_devices():
    assert proportional_split([CPU], b=10).fractions == (1.0,)
    assert proportional_split([CPU, CPU], b=10).fractions == (0.5, 0.5)
    with pytest.raises(ConfigurationError):
        proportional_split([])


@settings(max_examples=100, deadline=None)
@given(flops=st.lists(st.floats(1e6, 1e15), min_size=1, max_size=6), scale=st.floats(1e-3, 1e3),
       b=st.integers(0, 1000))
def test_proportional_split_scale_invariant_and_counts_sum(flops, scale, b):
    devices = [DeviceProfile(f"d{i}", f) for i, f in enumerate(flops)]
    scaled = [DeviceProfile(d.name, d.flops * scale) for d in devices]
    a = proportional_split(devices, b)
    c = proportional_split(scaled, b)
    np.testing.assert_allclose(a.fractions, c.fractions, rtol=1e-9, atol=1e-12)
    assert sum(a.counts) == b
    assert math.isclose(sum(a.fractions), 1.0)


def test_largest_remainder_rounding():
    assert round_counts((0.5, 0.25, 0.25), 3) == (1, 1, 1)
    assert round_counts((0.5, 0.25, 0.25), 2) == (1, 1, 0)
    assert round_counts((0.2, 0.2, 0.6), 7) == (2, 1, 4)


def test_all_work_on_fast_device():
    plan = make_plan((0.0, 1.0), LAYER.b)
    assert simulate_makespan(LAYER, plan, [CPU, GPU]) == pytest.approx(layer_work(LAYER) / GPU.flops)


def test_proportional_zero_overhead_finishes_together():
    times = device_times(LAYER, proportional_split([CPU, GPU], LAYER.b), [CPU, GPU])
    assert times[0] == pytest.approx(times[1], rel=1e-12)


def test_curve_is_u_shaped_with_interior_optimum():
    devices = [DeviceProfile("cpu", 0.25e12, 1e-3), DeviceProfile("gpu", 1.3e12, 2e-3)]
    curve = makespan_curve(LAYER, devices, 100)
    spans = [s for _, s in curve]
    best = int(np.argmin(spans))
    assert 0 < best < 100
    assert all(a >= b for a, b in zip(spans[:best], spans[1:best + 1]))
    assert all(a <= b for a, b in zip(spans[best:], spans[best + 1:]))
    # away from the optimum the hybrid run is slower than the fast device alone
    assert spans[20] > spans[100]


@settings(max_examples=100, deadline=None)
@given(f0=st.floats(1e9, 1e13), f1=st.floats(1e9, 1e13), g=st.integers(10, 400))
def test_sweep_matches_proportional_without_overheads(f0, f1, g):
    devices = [DeviceProfile("a", f0), DeviceProfile("b", f1)]
    best = optimal_split_sweep(LAYER, devices, g)
    assert abs(best.fractions[1] - proportional_split(devices).fractions[1]) <= 1 / g + 1e-12
    assert heuristic_gap(LAYER, devices, g) <= 1.0 + 1e-12


def test_huge_device_takes_everything():
    devices = [DeviceProfile("slow", 1e9), DeviceProfile("huge", 1e30)]
    assert optimal_split_sweep(LAYER, devices, 50).fractions == (0.0, 1.0)


def test_ties_go_to_smaller_second_fraction():
    # both devices pay an overhead far above any work time: every p in (0, 1) ties
    devices = [DeviceProfile("a", 1e30, 1.0), DeviceProfile("b", 1e30, 1.0)]
    assert optimal_split_sweep(LAYER, devices, 10).fractions[1] == 0.0


def test_slow_device_overhead_shifts_work_to_fast_device():
    rng = np.random.default_rng(3)
    work = layer_work(LAYER)
    for _ in range(200):
        slow_f, fast_f = sorted(np.exp(rng.uniform(np.log(1e9), np.log(1e13), 2)))
        base = [DeviceProfile("slow", slow_f), DeviceProfile("fast", fast_f)]
        overhead = rng.uniform(0.01, 0.5) * work / (slow_f + fast_f)
        loaded = [DeviceProfile("slow", slow_f, overhead), DeviceProfile("fast", fast_f)]
        assert optimal_split_sweep(LAYER, loaded, 200).fractions[1] >= optimal_split_sweep(LAYER, base, 200).fractions[1]


def test_identical_devices_gap_is_one():
    dev = DeviceProfile("x", 3e11, 1e-3)
    assert heuristic_gap(LAYER, [dev, dev], 100) == 1.0


def test_gap_small_with_small_overheads():
    gaps = gap_audit(LAYER, count=200, overhead_fraction=0.05, granularity=100, seed=11)
    assert max(gaps) <= 1.05
    zero = gap_audit(LAYER, count=200, overhead_fraction=0.0, granularity=100, seed=11)
    assert max(zero) <= 1.01


@settings(max_examples=60, deadline=None)
@given(f0=st.floats(1e9, 1e13), f1=st.floats(1e9, 1e13), boost=st.floats(1.0, 10.0),
       p=st.floats(0.0, 1.0), h0=st.floats(0, 1e-2), h1=st.floats(0, 1e-2))
def test_makespan_nonincreasing_in_flops(f0, f1, boost, p, h0, h1):
    plan = make_plan((1 - p, p))
    slow = simulate_makespan(LAYER, plan, [DeviceProfile("a", f0, h0), DeviceProfile("b", f1, h1)])
    fast = simulate_makespan(LAYER, plan, [DeviceProfile("a", f0 * boost, h0), DeviceProfile("b", f1, h1)])
    assert fast <= slow


def test_pair_only_operations_reject_other_counts():
    with pytest.raises(ConfigurationError):
        optimal_split_sweep(LAYER, [CPU, GPU, CPU], 10)
    with pytest.raises(ConfigurationError):
        heuristic_gap(LAYER, [CPU], 10)
    with pytest.raises(ConfigurationError):
        optimal_split_sweep(LAYER, [CPU, GPU], 5)
    with pytest.raises(ConfigurationError):
        simulate_makespan(LAYER, make_plan((1.0,)), [CPU, GPU])


def test_device_profile_validation():
    with pytest.raises(ConfigurationError):
        DeviceProfile("x", 0.0)
    with pytest.raises(ConfigurationError):
        DeviceProfile("x", 1.0, -1.0)
    with pytest.raises(ConfigurationError):
        make_plan((0.7, 0.7))


def test_profile_file_round_trip(tmp_path):
    path = tmp_path / "devices.txt"
    path.write_text("# name flops overhead\ncpu 1e12 0.001\n\ngpu 2e12   # no overhead\n")
    devices = load_device_profiles(path)
    assert devices == [DeviceProfile("cpu", 1e12, 0.001), DeviceProfile("gpu", 2e12, 0.0)]
    assert parse_device_profiles(format_device_profiles(devices).splitlines()) == devices


@pytest.mark.parametrize("text,line", [("cpu 1e12 0\ngpu fast 0\n", 2), ("\n\ncpu\n", 3), ("a -5 0\n", 1),
                                       ("a 1 2 3\n", 1)])
def test_profile_file_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigurationError, match=rf":{line}:"):
        parse_device_profiles(text.splitlines(), source="devices.txt")
