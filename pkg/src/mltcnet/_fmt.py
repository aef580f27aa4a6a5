"""Rounding and number rendering shared by every emitter."""

from __future__ import annotations

import math
from decimal import ROUND_HALF_UP, Decimal


def round_half_up(x: float, ndigits: int = 2) -> float:
    """Round half away from zero, on the shortest repr of ``x``.

    ``round()`` uses banker's rounding on the binary value, so 2.675 -> 2.67.
    Reference tables round the printed decimal, which this reproduces.
    """
    if not math.isfinite(x):
        return x
    q = Decimal(1).scaleb(-ndigits)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def fmt2(x: float) -> str:
    return f"{round_half_up(x, 2):.2f}"


def pct(count: int, total: int) -> float:
    """Percentage ``100*count/total`` rounded to 2 decimals (0 for empty totals)."""
    if total <= 0:
        return 0.0
    return round_half_up(100.0 * count / total, 2)


def fmt_num(x: float) -> str:
    """Compact float for matrices and JSON-free text: up to 6 significant digits."""
    if x == 0:
        return "0"
    return f"{x:.6g}"


def mask_count(x: int) -> str:
    """Render a patient count, hiding 1-9 behind a dash (0 discloses nothing)."""
    x = int(x)
    return "-" if 1 <= x <= 9 else str(x)


def masked_int(x: int) -> int | str:
    """JSON-friendly variant of :func:`mask_count`."""
    x = int(x)
    return "-" if 1 <= x <= 9 else x
