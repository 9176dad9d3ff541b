import numpy as np
import pytest

from cbl.rng import name_key, stream


def test_same_key_same_stream():
    assert np.array_equal(stream(3, "a/b").random(8), stream(3, "a/b").random(8))


def test_names_and_seeds_separate_streams():
    a = stream(3, "a").random(8)
    assert not np.array_equal(a, stream(3, "b").random(8))
    assert not np.array_equal(a, stream(4, "a").random(8))


def test_generator_is_philox():
    assert isinstance(stream(0, "x").bit_generator, np.random.Philox)


def test_name_key_is_stable():
    assert name_key("verify-greens/identity") == name_key("verify-greens/identity")
    assert 0 <= name_key("") < 2**64


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        stream(-1, "x")
