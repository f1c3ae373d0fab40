# arionet - self-supervised birdsong representation toolkit
# mlutils Library
# Copyright(C) 2026 arionet contributors
#
# Released under the MIT License - https://opensource.org/licenses/MIT
#

""" Common useful utilities for the training and evaluation modules
"""

import os

import numpy as np

from arionet.errors import DataError

# NOTE: percent_error is based on the following references.
# https://www.calculatorsoup.com/calculators/algebra/percent-difference-calculator.php
# https://en.wikipedia.org/wiki/Relative_change_and_difference


def percent_error(value1, value2, frac: bool = False):
    """ Return the percentage error |value2 - value1|/|value1|. The
        denominator or reference value is value1. A zero reference gives
        0 when both values are zero and inf otherwise.

        value1: float or np.ndarray, reference (original) value

        value2: float or np.ndarray, measured (predicted) value

        frac: bool, Default is False. Set to True returns a fraction
            instead of percentages.

        return: float or np.ndarray, percentage error value

        Usage
        -----
        >>> percent_error(-10, -6)
        40.0
        >>> percent_error(100, 101)
        1.0
    """
    ref = np.abs(np.asarray(value1, dtype=float))
    diff = np.abs(np.asarray(value2, dtype=float) - value1)
    with np.errstate(divide='ignore', invalid='ignore'):
        pererr = np.where(ref > 0, diff/np.where(ref > 0, ref, 1.0),
                          np.where(diff > 0, np.inf, 0.0))
    if frac is False:
        pererr = pererr * 100
    return pererr if np.ndim(pererr) else float(pererr)


def split_indices(count: int, fraction: float, rng: np.random.Generator):
    """ Seeded split of range(count) into (train, held_out) index arrays.
        The held-out part has round(fraction*count) items, at least one
        when fraction > 0, and never all of them.

        count: int, number of items

        fraction: float in [0, 1), held-out share

        rng: numpy Generator

        return: tuple of two sorted np.ndarray of int
    """
    if count < 2 and fraction > 0:
        raise DataError(f'cannot split {count} item(s) into two parts')
    order = rng.permutation(count)
    n_out = int(round(fraction * count))
    if fraction > 0:
        n_out = min(max(n_out, 1), count - 1)
    return np.sort(order[n_out:]), np.sort(order[:n_out])


def worker_count(requested=None) -> int:
    """ Number of worker threads, capped by the ARIONET_THREADS
        environment variable when it is set.
    """
    cap = os.environ.get('ARIONET_THREADS')
    workers = requested or os.cpu_count() or 1
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            pass  # ignore garbage, keep the requested count
    return max(1, int(workers))
