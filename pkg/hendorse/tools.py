"""
Tools
-----

Statistics and formatting helpers for benchmark reports.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import numpy as np
from scipy import stats

from hendorse.constants import CONFIDENCE_LEVEL

if TYPE_CHECKING:
    from collections.abc import Sequence

LOGGER = logging.getLogger(__name__)


def significant_digits(
    value: float, error: float, return_floats: bool = False  # noqa: FBT001, FBT002
) -> tuple[str, str] | tuple[float, float]:
    """
    Computes `value` and its error properly rounded with respect to the size of `error`.

    Args:
        value (float): a number, for instance a mean latency.
        error (float): the uncertainty on the number, for instance a confidence half-width.
        return_floats (bool): if ``True``, returns the rounded numbers as floats. Otherwise as
            strings. Defaults to ``False``.

    Returns:
        A tuple of the rounded value and error with regards to the size of the error.

    Raises:
        ValueError: if the error is zero or not finite.
    """
    if error == 0 or not np.isfinite(error):
        errmsg = f"Input error of {error}. Cannot compute significant digits."
        raise ValueError(errmsg)
    digits = -int(np.floor(np.log10(abs(error))))
    if np.floor(abs(error) * 10**digits) == 1:  # leading 1 gets one more digit
        digits = digits + 1
    res = (
        f"{round(value, digits):.{max(digits, 0)}f}",
        f"{round(error, digits):.{max(digits, 0)}f}",
    )
    if return_floats:
        return tuple(float(val) for val in res)
    return res


def describe(samples: Sequence[float], level: float = CONFIDENCE_LEVEL) -> tuple[float, float, float]:
    """
    Mean, sample standard deviation and confidence half-width of `samples`, the half-width
    being taken from Student's t distribution with ``n - 1`` degrees of freedom.

    Args:
        samples (Sequence[float]): the measured values, at least two of them.
        level (float): the confidence level. Defaults to 0.95.

    Returns:
        A tuple ``(mean, std, half_width)``.
    """
    values = np.asarray(samples, dtype=float)
    if values.size < 2:  # noqa: PLR2004
        errmsg = "At least two samples are needed for a confidence interval."
        raise ValueError(errmsg)
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    half_width = float(stats.t.ppf((1 + level) / 2, df=values.size - 1) * std / np.sqrt(values.size))
    return mean, std, half_width


def format_measurement(value: float, error: float, unit: str = "ms") -> str:
    """Renders `value ± error unit`, rounded on the error, falling back to raw floats for a zero error."""
    try:
        rounded_value, rounded_error = significant_digits(value, error)
    except ValueError:
        LOGGER.debug(f"Could not round {value} on error {error}, using plain formatting")
        return f"{value:.6g} ± {error:.2g} {unit}"
    return f"{rounded_value} ± {rounded_error} {unit}"
