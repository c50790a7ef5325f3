"""Small shared helpers."""

import math


def round_half_away_from_zero(x: float) -> int:
    """Round to the nearest integer, with halves going away from zero.

    Python's built-in ``round`` uses banker's rounding, which would make
    budget arithmetic depend on parity; this fixed rule keeps every consumer
    of fraction-times-count budgets in agreement.
    """
    if x >= 0:
        return int(math.floor(x + 0.5))
    return -int(math.floor(-x + 0.5))
