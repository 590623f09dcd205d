import numpy as np
import pytest

from hendorse.tools import describe, format_measurement, significant_digits


def test_significant_digits():
    s = significant_digits(0.637282, 1e-3)
    assert s[0] == "0.6373"

    s = significant_digits(0.9837473385, 0.000065323)
    assert s[0] == "0.98375"
    assert s[1] == "0.00007"

    s = significant_digits(0.0338577, 0.0015473)
    assert s[0] == "0.0339"
    assert s[1] == "0.0015"

    s = significant_digits(0.0338577, 0.0015473, return_floats=True)
    assert s[0] == 0.0339
    assert s[1] == 0.0015

    s = significant_digits(1234.5, 56.7)
    assert s == ("1230", "60")


@pytest.mark.parametrize("error", [0.0, np.nan, np.inf])
def test_significant_digits_raises(error):
    with pytest.raises(ValueError, match="Input error of"):
        significant_digits(0.0338577, error)


def test_describe():
    mean, std, half_width = describe([1.0, 2.0, 3.0, 4.0, 5.0])
    assert mean == 3.0
    assert std == pytest.approx(np.sqrt(2.5))
    assert half_width == pytest.approx(1.963243, abs=1e-5)  # t(0.975, 4 dof) * std / sqrt(5)


def test_describe_wider_level_is_wider():
    samples = np.random.default_rng(5).normal(10, 2, 50)
    assert describe(samples, level=0.99)[2] > describe(samples, level=0.95)[2]


def test_describe_constant_samples():
    assert describe([2.0, 2.0, 2.0]) == (2.0, 0.0, 0.0)


def test_describe_needs_two_samples():
    with pytest.raises(ValueError, match="At least two samples"):
        describe([1.0])


def test_format_measurement():
    assert format_measurement(3.0, 1.963243) == "3.0 ± 2.0 ms"
    assert format_measurement(0.0338577, 0.0015473, unit="us") == "0.0339 ± 0.0015 us"


def test_format_measurement_zero_error():
    assert format_measurement(2.0, 0.0) == "2 ± 0 ms"
