#!/usr/bin/env python3
"""
Unit tests for random_streams module.
"""

import numpy as np
import pytest

from error_handler import ValidationError
from random_streams import PURPOSES, default_threads, parallel_map, stream


def _square(x):
    return x * x


def _draw(key):
    seed, index = key
    return stream(seed, "init", index).standard_normal(3).tolist()


class TestStream:
    """Tests for keyed generators"""

    def test_same_key_same_numbers(self):
        np.testing.assert_array_equal(stream(7, "data", 3).random(5), stream(7, "data", 3).random(5))

    @pytest.mark.parametrize("other", [(8, "data", 3), (7, "init", 3), (7, "data", 4)])
    def test_different_keys_differ(self, other):
        assert not np.array_equal(stream(7, "data", 3).random(5), stream(*other).random(5))

    def test_purposes_are_distinct(self):
        assert len(set(PURPOSES.values())) == len(PURPOSES)

    def test_unknown_purpose(self):
        with pytest.raises(ValidationError):
            stream(0, "shuffle")

    @pytest.mark.parametrize("seed,index", [(-1, 0), (0, -1)])
    def test_negative_keys(self, seed, index):
        with pytest.raises(ValidationError):
            stream(seed, "init", index)


class TestParallelMap:
    """Tests for the process pool"""

    def test_order_preserved(self):
        assert parallel_map(_square, range(10), threads=3) == [x * x for x in range(10)]

    def test_in_process(self):
        assert parallel_map(_square, [4], threads=8) == [16]
        assert parallel_map(_square, [], threads=1) == []

    def test_worker_count_does_not_change_results(self):
        keys = [(11, i) for i in range(6)]
        assert parallel_map(_draw, keys, threads=1) == parallel_map(_draw, keys, threads=3)

    def test_default_threads(self, mocker):
        assert default_threads() >= 1
        mocker.patch("random_streams.psutil.cpu_count", return_value=None)
        assert default_threads() == 1
