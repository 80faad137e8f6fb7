import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from naive_mv.rng import (chunk_increments, normal_increments, path_generator,
                          stream_checksum)


class TestPathStreams:
    def test_same_key_reproduces(self):
        a = normal_increments(42, 7, 64)
        b = normal_increments(42, 7, 64)
        assert np.array_equal(a, b)

    def test_different_path_differs(self):
        a = normal_increments(42, 7, 64)
        b = normal_increments(42, 8, 64)
        assert not np.array_equal(a, b)

    def test_different_seed_differs(self):
        a = normal_increments(42, 7, 64)
        b = normal_increments(43, 7, 64)
        assert not np.array_equal(a, b)

    def test_shape(self):
        assert normal_increments(1, 2, 16, 3).shape == (16, 3)

    def test_prefix_stability(self):
        """A path's first n draws do not depend on how many are requested."""
        long = normal_increments(42, 7, 128)
        short = normal_increments(42, 7, 32)
        assert np.array_equal(long[:32], short)

    @settings(max_examples=20, deadline=None)
    @given(start=st.integers(0, 10_000), n=st.integers(1, 8))
    def test_chunk_rows_equal_per_path_streams(self, start, n):
        chunk = chunk_increments(42, start, n, 16, 2)
        for i in range(n):
            assert np.array_equal(chunk[i], normal_increments(42, start + i, 16, 2))

    def test_checksum_detects_seed_change(self):
        assert stream_checksum(42, 4, 16) == stream_checksum(42, 4, 16)
        assert stream_checksum(42, 4, 16) != stream_checksum(43, 4, 16)

    def test_moments_roughly_standard_normal(self):
        z = chunk_increments(0, 0, 256, 64).ravel()
        n = len(z)
        assert abs(z.mean()) < 4 / np.sqrt(n)
        assert abs(z.var() - 1.0) < 4 * np.sqrt(2.0 / n)

    def test_generator_is_philox(self):
        gen = path_generator(1, 2)
        assert type(gen.bit_generator).__name__ == "Philox"
