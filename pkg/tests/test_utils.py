"""
Tests for the shared helpers.
"""

import numpy as np
import pytest

from reach_avoid_rl.utils import (
    as_generator,
    parse_float_list,
    parse_slice_spec,
    rng_stream,
    rng_streams,
    validate_choice,
)


class TestRandomStreams:
    """Tests for named random sub-streams."""

    def test_same_name_same_stream(self):
        """Test: a (seed, name) pair always yields the same draws."""
        assert np.array_equal(rng_stream(4, "replay").random(5), rng_stream(4, "replay").random(5))

    def test_names_are_independent(self):
        """Test: different names and seeds give different draws."""
        base = rng_stream(4, "replay").random(5)
        assert not np.array_equal(base, rng_stream(4, "reset").random(5))
        assert not np.array_equal(base, rng_stream(5, "replay").random(5))

    def test_full_set(self):
        """Test: rng_streams builds one generator per stream name."""
        streams = rng_streams(0)
        assert set(streams) == {"reset", "exploration", "replay", "init", "pretrain", "validation"}

    def test_as_generator_passthrough(self):
        """Test: an existing generator is returned unchanged."""
        rng = np.random.default_rng(1)
        assert as_generator(rng) is rng


class TestParsing:
    """Tests for command line value parsing."""

    def test_float_list(self):
        """Test: comma separated floats with spaces."""
        assert parse_float_list("0.5, 0.9,0.99") == [0.5, 0.9, 0.99]

    @pytest.mark.parametrize("text", ["", " , ", "0.5,x"])
    def test_float_list_invalid(self, text):
        """Test: empty or non-numeric lists raise ValueError."""
        with pytest.raises(ValueError):
            parse_float_list(text)

    def test_slice_spec(self):
        """Test: DIM=VALUE pairs map dimensions to coordinates."""
        assert parse_slice_spec("2=0, 3=-0.5") == {2: 0.0, 3: -0.5}
        assert parse_slice_spec(None) == {}

    @pytest.mark.parametrize("text", ["2", "a=0", "2=zero", "2=0,2=1"])
    def test_slice_spec_invalid(self, text):
        """Test: malformed or repeated entries raise ValueError."""
        with pytest.raises(ValueError):
            parse_slice_spec(text)

    def test_validate_choice(self):
        """Test: names are normalised before matching."""
        assert validate_choice("Max_LG", ["max-lg", "g"], "init") == "max-lg"
        with pytest.raises(ValueError):
            validate_choice("zeros", ["g"], "init")
