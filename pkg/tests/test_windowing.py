"""Context extraction for single predictions and sliding windows."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textdiar import (
    ConfigError,
    MpmWindow,
    ValidationError,
    build_mpm_windows,
    build_spm_contexts,
)

from conftest import conv_from_labels


def _conv(n):
    return conv_from_labels(["A"] * n)


class TestSpmContexts:
    def test_interior_context_shape(self):
        # h sentences before the boundary pair's right element, k after
        contexts = build_spm_contexts(_conv(10), h=4, k=3)
        ctx = contexts[4]
        assert ctx.change_index == 4
        assert [s.index for s in ctx.sentences] == [1, 2, 3, 4, 5, 6, 7, 8]
        assert ctx.boundary_offset == 3

    def test_clipped_at_start(self):
        ctx = build_spm_contexts(_conv(10), h=4, k=3)[0]
        assert [s.index for s in ctx.sentences] == [0, 1, 2, 3, 4]
        assert ctx.boundary_offset == 0

    def test_clipped_at_end(self):
        ctx = build_spm_contexts(_conv(10), h=4, k=3)[-1]
        assert ctx.change_index == 8
        assert [s.index for s in ctx.sentences] == [5, 6, 7, 8, 9]
        assert ctx.boundary_offset == 3

    def test_one_context_per_boundary(self):
        assert len(build_spm_contexts(_conv(7))) == 6

    def test_short_conversations_have_no_boundaries(self):
        assert build_spm_contexts(_conv(1)) == []

    def test_pair_is_the_boundary_sentences(self):
        conv = _conv(12)
        for ctx in build_spm_contexts(conv, h=2, k=5):
            left, right = ctx.pair
            assert left.index == ctx.change_index
            assert right.index == ctx.change_index + 1

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            build_spm_contexts(_conv(5), h=0)
        with pytest.raises(ConfigError):
            build_spm_contexts(_conv(5), k=-1)
        # k=0 is legal: no right context beyond the pair
        ctx = build_spm_contexts(_conv(5), h=1, k=0)[2]
        assert [s.index for s in ctx.sentences] == [2, 3]


class TestMpmWindow:
    def test_window_too_short(self):
        with pytest.raises(ValidationError):
            MpmWindow(0, 3, 4)

    def test_change_points_are_internal_boundaries(self):
        assert list(MpmWindow(0, 2, 6).change_points) == [2, 3, 4]

    def test_sentences_slice(self):
        conv = _conv(8)
        got = MpmWindow(0, 3, 6).sentences(conv)
        assert [s.index for s in got] == [3, 4, 5]


class TestBuildMpmWindows:
    def test_strided_with_anchored_tail(self):
        ws = build_mpm_windows(11, window_len=4, stride=2)
        spans = [(w.start, w.stop) for w in ws.windows]
        # regular starts 0,2,4,6 leave sentence 10 uncovered; a final
        # window is anchored to the end
        assert spans == [(0, 4), (2, 6), (4, 8), (6, 10), (7, 11)]

    def test_exact_cover_needs_no_tail(self):
        ws = build_mpm_windows(10, window_len=4, stride=2)
        assert [(w.start, w.stop) for w in ws.windows] == \
            [(0, 4), (2, 6), (4, 8), (6, 10)]

    def test_short_conversation_single_window(self):
        ws = build_mpm_windows(5, window_len=8)
        assert [(w.start, w.stop) for w in ws.windows] == [(0, 5)]

    def test_degenerate_sizes(self):
        assert build_mpm_windows(0, 8).windows == ()
        assert build_mpm_windows(1, 8).windows == ()

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            build_mpm_windows(10, window_len=1)
        with pytest.raises(ConfigError):
            build_mpm_windows(10, window_len=4, stride=0)

    def test_stride_must_leave_overlap(self):
        # disjoint windows would leave their seam boundary unvoted
        with pytest.raises(ConfigError):
            build_mpm_windows(10, window_len=4, stride=4)
        with pytest.raises(ConfigError):
            build_mpm_windows(10, window_len=2, stride=5)
        build_mpm_windows(10, window_len=4, stride=3)

    def test_unit_stride_coverage_counts(self):
        ws = build_mpm_windows(6, window_len=4, stride=1)
        counts = [len(ws.coverage(p)) for p in range(5)]
        assert counts == [1, 2, 3, 2, 1]

    def test_coverage_bounds_checked(self):
        ws = build_mpm_windows(6, window_len=4)
        with pytest.raises(ValidationError):
            ws.coverage(-1)
        with pytest.raises(ValidationError):
            ws.coverage(5)

    def test_windows_covering_sentence(self):
        ws = build_mpm_windows(6, window_len=4, stride=1)
        # sentence 0 appears only in the first window
        assert ws.windows_covering_sentence(0) == (0,)
        assert ws.windows_covering_sentence(3) == (0, 1, 2)

    @given(st.data())
    @settings(max_examples=200, deadline=None)
    def test_partition_properties(self, data):
        n = data.draw(st.integers(2, 60))
        window_len = data.draw(st.integers(2, 12))
        stride = data.draw(st.integers(1, window_len - 1))
        ws = build_mpm_windows(n, window_len, stride)
        windows = ws.windows
        assert windows[0].start == 0
        assert windows[-1].stop == n
        # starts strictly increase and every width is min(window_len, n)
        starts = [w.start for w in windows]
        assert starts == sorted(set(starts))
        assert all(len(w) == min(window_len, n) for w in windows)
        # every change point is voted on at least once
        for p in range(n - 1):
            assert len(ws.coverage(p)) >= 1
