import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hasqoe.features import (
    FEATURE_COUNT,
    FEATURE_GROUPS,
    FeatureVector,
    PenaltyConfig,
    SegmentFeatures,
    assemble,
    csv_header,
    csv_row,
    penalty_buffering,
    penalty_switch,
    reward_resolution,
    switch_penalty_value,
)
from hasqoe.frames import GrayFrame
from hasqoe.session import Segment, SessionWindow


def make_segment(index, height=480, bitrate=3000.0, stall=0.0, width=640):
    return Segment(
        index=index, bitrate_kbps=bitrate, width=width, height=height, fps=30.0,
        duration_s=2.0, stall_s=stall, frame_refs=(f"f{index}.pgm",),
    )


def segment_features(r1=480.0, spa=(0.1, 0.2, 0.3, 0.4), r6=1.0):
    return SegmentFeatures(r1=r1, spatiotemporal=spa, r6=r6)


def test_reward_resolution_reads_height():
    assert reward_resolution(make_segment(1, height=1080)) == 1080.0
    assert reward_resolution(make_segment(1, height=360)) == 360.0
    a = reward_resolution(make_segment(1, height=720, bitrate=1000.0))
    b = reward_resolution(make_segment(2, height=720, bitrate=9000.0))
    assert a == b


def test_penalty_buffering_example():
    p1, p2 = penalty_buffering([1.2, 0.0, 0.5, 0.0, 2.0])
    assert p1 == 1.2
    assert p2 == pytest.approx(0.625, abs=0)


def test_penalty_buffering_single_segment():
    assert penalty_buffering([0.8]) == (0.8, 0.0)


def test_penalty_buffering_all_zero():
    assert penalty_buffering([0.0] * 6) == (0.0, 0.0)


def test_penalty_buffering_rejects_negative():
    with pytest.raises(ValueError):
        penalty_buffering([1.0, -0.1])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=0, max_value=10), min_size=2, max_size=12),
       st.integers(min_value=0, max_value=2**31 - 1))
def test_penalty_buffering_permutation_invariant_tail(stalls, seed):
    rng = np.random.default_rng(seed)
    tail = stalls[1:]
    shuffled = [stalls[0]] + list(rng.permutation(tail))
    assert penalty_buffering(shuffled) == pytest.approx(penalty_buffering(stalls), abs=1e-12)


def test_switch_penalty_formula():
    cfg = PenaltyConfig(c1_s=2.0, c2_kbps=2000.0)
    assert switch_penalty_value(2.0, 2000.0, 0.5, cfg) == pytest.approx(8.0, abs=1e-12)
    assert switch_penalty_value(0.0, 0.0, 1.0, cfg) == 1.0


def test_penalty_switch_neutral_when_nothing_happens():
    cfg = PenaltyConfig()
    frame = GrayFrame(np.full((32, 32), 128.0))
    p3 = penalty_switch(make_segment(1), make_segment(2), 0.0, frame, frame, cfg)
    assert p3 == pytest.approx(1.0, abs=1e-12)


def test_penalty_switch_upswitch_not_penalized():
    cfg = PenaltyConfig()
    frame = GrayFrame(np.full((32, 32), 128.0))
    up = penalty_switch(
        make_segment(1, bitrate=1000.0), make_segment(2, bitrate=3000.0), 0.0, frame, frame, cfg
    )
    assert up == pytest.approx(1.0, abs=1e-12)


def test_penalty_switch_at_least_one_and_monotone_in_next_bitrate():
    cfg = PenaltyConfig(c1_s=2.0, c2_kbps=1000.0)
    rng = np.random.default_rng(0)
    a = GrayFrame(rng.integers(0, 256, (48, 64)).astype(float))
    b = GrayFrame(np.clip(a.data + rng.normal(0, 25, a.data.shape), 0, 255))
    previous = np.inf
    for next_bitrate in (500.0, 1500.0, 2500.0, 3500.0):
        p3 = penalty_switch(
            make_segment(1, bitrate=3000.0), make_segment(2, bitrate=next_bitrate),
            1.0, a, b, cfg,
        )
        assert p3 >= 1.0
        assert p3 <= previous
        previous = p3


def test_penalty_config_validation():
    with pytest.raises(ValueError):
        PenaltyConfig(c1_s=0.0)
    with pytest.raises(ValueError):
        PenaltyConfig(c2_kbps=-5.0)
    with pytest.raises(ValueError):
        switch_penalty_value(0.0, 0.0, 0.0, PenaltyConfig())


def window_of(segments):
    return SessionWindow(segments=tuple(segments), session_initial_stall_s=segments[0].stall_s)


def test_assemble_neutral_window():
    window = window_of([make_segment(i) for i in range(1, 6)])
    vector = assemble(
        window, [segment_features() for _ in range(5)], [0.0] * 5, [1.0] * 4
    )
    assert vector[30] == 0.0 and vector[31] == 0.0
    assert list(vector.values[32:36]) == [1.0] * 4
    assert len(vector.values) == FEATURE_COUNT


def test_assemble_layout_is_segment_major():
    per_segment = [
        segment_features(r1=100.0 + i, spa=(i + 0.1, i + 0.2, i + 0.3, i + 0.4), r6=50.0 + i)
        for i in range(5)
    ]
    window = window_of([make_segment(i) for i in range(1, 6)])
    vector = assemble(window, per_segment, [1.0, 0.0, 0.5], [1.0, 2.0, 3.0, 4.0])
    assert list(vector.values[0:5]) == [100.0, 101.0, 102.0, 103.0, 104.0]
    # f6..f9 hold segment 1's r2..r5, f10..f13 segment 2's, ...
    assert list(vector.values[5:9]) == [0.1, 0.2, 0.3, 0.4]
    assert list(vector.values[9:13]) == [1.1, 1.2, 1.3, 1.4]
    assert list(vector.values[25:30]) == [50.0, 51.0, 52.0, 53.0, 54.0]
    assert vector[30] == 1.0
    assert vector[31] == pytest.approx(0.25)
    assert list(vector.values[32:36]) == [1.0, 2.0, 3.0, 4.0]


def test_assemble_differs_exactly_in_swapped_segment_slots():
    base = [
        segment_features(r1=100.0 + i, spa=(i, i, i, i), r6=float(i)) for i in range(5)
    ]
    swapped = list(base)
    swapped[1], swapped[2] = swapped[2], swapped[1]
    window = window_of([make_segment(i) for i in range(1, 6)])
    va = assemble(window, base, [0.0], [1.0] * 4).values
    vb = assemble(window, swapped, [0.0], [1.0] * 4).values
    diff = np.nonzero(va != vb)[0]
    expected_slots = {1, 2} | set(range(5 + 4 * 1, 5 + 4 * 3)) | {26, 27}
    assert set(diff.tolist()) == expected_slots


def test_assemble_size_checks():
    window = window_of([make_segment(i) for i in range(1, 6)])
    with pytest.raises(ValueError, match="exactly 5"):
        assemble(window, [segment_features()] * 4, [0.0], [1.0] * 4)
    with pytest.raises(ValueError, match="boundary"):
        assemble(window, [segment_features()] * 5, [0.0], [1.0] * 3)


def test_feature_vector_invariants():
    good = np.ones(36)
    good[30] = 0.0
    good[31] = 0.0
    FeatureVector(good)
    bad_length = np.ones(35)
    with pytest.raises(ValueError):
        FeatureVector(bad_length)
    negative_p1 = good.copy()
    negative_p1[30] = -0.5
    with pytest.raises(ValueError):
        FeatureVector(negative_p1)
    small_p3 = good.copy()
    small_p3[33] = 0.5
    with pytest.raises(ValueError):
        FeatureVector(small_p3)


def test_feature_groups_partition_the_vector():
    seen = sorted(i for idxs in FEATURE_GROUPS.values() for i in idxs)
    assert seen == list(range(36))


def test_csv_round_trip_shape():
    header = csv_header()
    assert header.startswith("f1,") and header.endswith(",f36")
    vector = assemble(
        window_of([make_segment(i) for i in range(1, 6)]),
        [segment_features() for _ in range(5)],
        [0.5, 0.25],
        [1.0, 1.5, 2.0, 1.0],
    )
    row = csv_row(vector)
    assert len(row.split(",")) == 36
    assert [float(v) for v in row.split(",")] == vector.values.tolist()
