"""
Calendar Service - DST transition dates and holiday flags.
"""
from datetime import date, timedelta
from functools import lru_cache
from typing import Dict, Iterable, Optional, Tuple
import logging

import holidays
import numpy as np

from app.core.config import settings
from app.schemas.data import HourlyGrid

logger = logging.getLogger(__name__)

SUNDAY = 6

# Energy Policy Act of 2005 rules apply from this year on.
US_DST_2007_RULE_YEAR = 2007


def _nth_weekday(year: int, month: int, weekday: int, nth: int) -> date:
    first = date(year, month, 1)
    offset = (weekday - first.weekday()) % 7
    return first + timedelta(days=offset + 7 * (nth - 1))


def _last_weekday(year: int, month: int, weekday: int) -> date:
    following = date(year + (month == 12), month % 12 + 1, 1)
    last = following - timedelta(days=1)
    return last - timedelta(days=(last.weekday() - weekday) % 7)


def us_dst_dates(year: int) -> Tuple[date, date]:
    """
    Spring-forward and fall-back dates under US federal rules.

    Returns:
        (spring_forward, fall_back) local dates
    """
    if year >= US_DST_2007_RULE_YEAR:
        return _nth_weekday(year, 3, SUNDAY, 2), _nth_weekday(year, 11, SUNDAY, 1)
    return _nth_weekday(year, 4, SUNDAY, 1), _last_weekday(year, 10, SUNDAY)


class DstCalendar:
    """DST transition dates, computed from US rules with per-year overrides."""

    def __init__(self, overrides: Optional[Dict[int, Tuple[date, date]]] = None):
        self.overrides = dict(overrides or {})

    def transitions(self, year: int) -> Tuple[date, date]:
        if year in self.overrides:
            return self.overrides[year]
        return us_dst_dates(year)

    def spring_forward(self, year: int) -> date:
        return self.transitions(year)[0]

    def fall_back(self, year: int) -> date:
        return self.transitions(year)[1]


# ============================================================================
# HOLIDAYS
# ============================================================================

@lru_cache(maxsize=32)
def _holiday_dates(country: str, subdivision: Optional[str], years: Tuple[int, ...]) -> frozenset:
    calendar = holidays.country_holidays(country, subdiv=subdivision, years=list(years))
    return frozenset(calendar.keys())


def holiday_flags(
    grid: HourlyGrid,
    extra_dates: Iterable[date] = (),
    country: Optional[str] = None,
) -> np.ndarray:
    """
    0/1 holiday flag per grid row.

    Args:
        grid: Timestamps to flag
        extra_dates: Additional dates treated as holidays
        country: Country code for the `holidays` package (default: settings.HOLIDAY_COUNTRY)

    Returns:
        float array with ones on holiday dates
    """
    if len(grid) == 0:
        return np.zeros(0)
    years = tuple(range(grid.first_date.year, grid.last_date.year + 1))
    observed = _holiday_dates(country or settings.HOLIDAY_COUNTRY, settings.HOLIDAY_SUBDIVISION, years)
    observed = observed | frozenset(extra_dates)
    marked = np.array(sorted(observed), dtype="datetime64[D]") if observed else np.array([], dtype="datetime64[D]")
    return np.isin(grid.dates, marked).astype(np.float64)
