"""
Dataset Service - CSV ingestion, DST normalization and aggregate zones.
"""
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.exceptions import (
    AlignmentError,
    DataQualityError,
    IngestError,
    NormalizationError,
    SchemaError,
)
from app.schemas.data import HOURS_PER_DAY, ColumnSchema, HourlyGrid, ZoneDataset
from app.services.calendar_service import DstCalendar, holiday_flags

logger = logging.getLogger(__name__)

FallbackConvention = Literal["duplicate_rows", "summed_row"]

# Hour ending that is double counted when clocks fall back.
FALL_BACK_HOUR = 2

# Header is line 1, so data row i sits on line i + 2.
_HEADER_LINES = 2

# Present (all ones) in dumps of DST-normalized data.
NORMALIZED_COLUMN = "dst_normalized"


# ============================================================================
# INGESTION
# ============================================================================

def _line(position: int) -> int:
    return int(position) + _HEADER_LINES


def _parse_numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column].astype(str).str.strip()
    values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
    unparsed = np.isnan(values)
    if unparsed.any():
        bad = _first_bad(unparsed)
        raise IngestError(f"row {_line(bad)}: non-numeric value {frame[column].iloc[bad]!r} in column '{column}'")
    if not np.all(np.isfinite(values)):
        bad = _first_bad(~np.isfinite(values))
        raise IngestError(f"row {_line(bad)}: non-finite value {frame[column].iloc[bad]!r} in column '{column}'")
    return values


def _first_bad(mask: np.ndarray) -> int:
    return int(np.flatnonzero(mask)[0])


def _parse_timestamps(frame: pd.DataFrame, schema: ColumnSchema) -> Tuple[np.ndarray, np.ndarray]:
    """Return (dates, hour-ending) arrays for every CSV row."""
    if schema.date and schema.hour:
        days = pd.to_datetime(frame[schema.date], errors="coerce", format="ISO8601")
        if days.isna().any():
            bad = _first_bad(days.isna().to_numpy())
            raise IngestError(f"row {_line(bad)}: unparseable date {frame[schema.date].iloc[bad]!r}")
        hours = pd.to_numeric(frame[schema.hour], errors="coerce")
        if hours.isna().any() or (hours % 1 != 0).any():
            bad = _first_bad((hours.isna() | (hours % 1 != 0)).to_numpy())
            raise IngestError(f"row {_line(bad)}: unparseable hour {frame[schema.hour].iloc[bad]!r}")
        hours = hours.astype(np.int64).to_numpy()
        if schema.hour_convention == "beginning":
            hours = hours + 1
        if ((hours < 1) | (hours > HOURS_PER_DAY)).any():
            bad = _first_bad((hours < 1) | (hours > HOURS_PER_DAY))
            raise IngestError(f"row {_line(bad)}: hour {frame[schema.hour].iloc[bad]!r} out of range")
        if days.dt.tz is not None:
            days = days.dt.tz_localize(None)
        return days.to_numpy().astype("datetime64[D]"), hours

    text = frame[schema.timestamp].astype(str).str.strip()
    # "24:00" closes the day; pandas only understands it as 00:00 of the next day.
    end_of_day = text.str.contains(r"[ T]24:00(?::00)?$", regex=True)
    text = text.str.replace(r"([ T])24:00((?::00)?)$", r"\g<1>00:00\g<2>", regex=True)
    stamps = pd.to_datetime(text, errors="coerce", format="ISO8601")
    if stamps.isna().any():
        bad = _first_bad(stamps.isna().to_numpy())
        raise IngestError(f"row {_line(bad)}: unparseable timestamp {frame[schema.timestamp].iloc[bad]!r}")
    if stamps.dt.tz is not None:
        stamps = stamps.dt.tz_localize(None)
    stamps = stamps + pd.to_timedelta(end_of_day.astype(int), unit="D")
    if ((stamps.dt.minute != 0) | (stamps.dt.second != 0)).any():
        bad = _first_bad(((stamps.dt.minute != 0) | (stamps.dt.second != 0)).to_numpy())
        raise IngestError(f"row {_line(bad)}: timestamp {frame[schema.timestamp].iloc[bad]!r} is not on the hour")
    if schema.hour_convention == "ending":
        stamps = stamps - pd.Timedelta(hours=1)
    return stamps.dt.normalize().to_numpy().astype("datetime64[D]"), stamps.dt.hour.to_numpy().astype(np.int64) + 1


def ingest_csv(
    path: Union[str, Path],
    schema: Optional[ColumnSchema] = None,
    zone_id: Optional[str] = None,
) -> ZoneDataset:
    """
    Read one zone's hourly CSV onto its raw (pre-DST-normalization) grid.

    Rows are sorted by timestamp; duplicated timestamps (fall-back days) are
    kept in file order.

    Args:
        path: CSV file with a header row
        schema: Column mapping (default: timestamp, load, temp_1, temp_2, holiday)
        zone_id: Zone identifier (default: file stem)

    Returns:
        ZoneDataset with dst_normalized=False, unless the file carries the
        normalized marker column written by write_dataset_csv

    Raises:
        IngestError: If the file is unreadable or a cell fails to parse
        SchemaError: If a mapped column is missing
        DataQualityError: If a file marked as normalized is not 24 hours per day
    """
    schema = schema or ColumnSchema()
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"input file not found: {path}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise IngestError(f"cannot read {path}: {e}")

    time_columns = [schema.date, schema.hour] if schema.date else [schema.timestamp]
    required = time_columns + [schema.load, *schema.temperatures] + ([schema.holiday] if schema.holiday else [])
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise SchemaError(f"{path.name}: missing mapped column(s) {', '.join(missing)}")
        raise IngestError(f"{path.name}: no data rows")

    dates, hours = _parse_timestamps(frame, schema)
    load = _parse_numeric(frame, schema.load)
    temperatures = np.column_stack([_parse_numeric(frame, column) for column in schema.temperatures])
    index = dates.astype(np.int64) * HOURS_PER_DAY + (hours - 1)
    order = np.argsort(index, kind="stable")
    grid = HourlyGrid(dates=dates[order], hours=hours[order])

    if schema.holiday:
        holiday = _parse_numeric(frame, schema.holiday)
        bad_flags = (holiday != 0.0) & (holiday != 1.0)
        if bad_flags.any():
            bad = _first_bad(bad_flags)
            raise IngestError(f"row {_line(bad)}: holiday flag must be 0 or 1, got {frame[schema.holiday].iloc[bad]!r}")
        holiday = holiday[order]
    else:
        holiday = holiday_flags(grid)

    normalized = False
    if NORMALIZED_COLUMN in frame.columns:
        normalized = bool(np.all(_parse_numeric(frame, NORMALIZED_COLUMN) == 1.0))
        if normalized and not (grid.is_contiguous() and grid.hours[0] == 1 and grid.hours[-1] == HOURS_PER_DAY):
            raise DataQualityError(f"{path.name}: marked DST-normalized but days are not 24 contiguous hours")

    dataset = ZoneDataset(
        zone_id=zone_id or path.stem,
        grid=grid,
        load=load[order],
        temperatures=temperatures[order],
        holiday=holiday,
        dst_normalized=normalized,
    )
    logger.info(f"Ingested {len(dataset)} rows for zone {dataset.zone_id} from {path.name}")
    return dataset


def write_dataset_csv(dataset: ZoneDataset, path: Union[str, Path]) -> Path:
    """
    Dump a dataset as timestamp, load, temp_1..temp_N, holiday, plus a
    ``dst_normalized`` column of ones when the data is already normalized.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"timestamp": dataset.grid.labels(), "load": dataset.load})
    for i, name in enumerate(dataset.channel_names):
        frame[name] = dataset.temperatures[:, i]
    frame["holiday"] = dataset.holiday.astype(np.int64)
    if dataset.dst_normalized:
        frame[NORMALIZED_COLUMN] = 1
    frame.to_csv(path, index=False)
    return path


# ============================================================================
# DST NORMALIZATION
# ============================================================================

@dataclass
class _DayFix:
    start: int
    end: int
    dates: np.ndarray
    hours: np.ndarray
    load: np.ndarray
    temperatures: np.ndarray
    holiday: np.ndarray


@dataclass
class NormalizationReport:
    inserted: List[date] = field(default_factory=list)
    merged: List[date] = field(default_factory=list)
    halved: List[date] = field(default_factory=list)


def _fix_day(
    raw: ZoneDataset,
    day: date,
    start: int,
    end: int,
    calendar: DstCalendar,
    halve_summed: bool,
    report: NormalizationReport,
) -> _DayFix:
    hours = raw.grid.hours[start:end]
    load = raw.load[start:end].copy()
    temperatures = raw.temperatures[start:end].copy()
    holiday = raw.holiday[start:end].copy()

    present, counts = np.unique(hours, return_counts=True)
    missing = sorted(set(range(1, HOURS_PER_DAY + 1)) - set(present.tolist()))
    duplicated = present[counts > 1].tolist()
    spring, fall = calendar.transitions(day.year)

    if missing and duplicated:
        raise NormalizationError(f"{day}: both missing hours {missing} and duplicated hours {duplicated}")

    if missing:
        if len(missing) > 1:
            raise NormalizationError(f"{day}: {len(missing)} missing hours {missing}, at most one allowed")
        hour = missing[0]
        if day != spring:
            raise DataQualityError(f"{day}: hour ending {hour} missing on a non-DST date")
        if hour in (1, HOURS_PER_DAY):
            raise DataQualityError(f"{day}: hour ending {hour} missing has no neighbours to average")
        before = int(np.flatnonzero(hours == hour - 1)[0])
        after = int(np.flatnonzero(hours == hour + 1)[0])
        load = np.insert(load, after, (load[before] + load[after]) / 2.0)
        temperatures = np.insert(temperatures, after, (temperatures[before] + temperatures[after]) / 2.0, axis=0)
        holiday = np.insert(holiday, after, holiday[before])
        hours = np.insert(hours, after, hour)
        report.inserted.append(day)

    elif duplicated:
        if len(duplicated) > 1 or counts.max() > 2:
            raise NormalizationError(f"{day}: duplicated hours {duplicated}, at most one double-counted hour allowed")
        if day != fall:
            raise DataQualityError(f"{day}: hour ending {duplicated[0]} duplicated on a non-DST date")
        rows = np.flatnonzero(hours == duplicated[0])
        keep, drop = int(rows[0]), int(rows[1])
        # Halving the double-counted total of the two rows.
        load[keep] = (load[keep] + load[drop]) / 2.0
        temperatures[keep] = (temperatures[keep] + temperatures[drop]) / 2.0
        load = np.delete(load, drop)
        temperatures = np.delete(temperatures, drop, axis=0)
        holiday = np.delete(holiday, drop)
        hours = np.delete(hours, drop)
        report.merged.append(day)

    elif halve_summed:
        row = int(np.flatnonzero(hours == FALL_BACK_HOUR)[0])
        load[row] = load[row] / 2.0
        report.halved.append(day)

    if not np.array_equal(hours, np.arange(1, HOURS_PER_DAY + 1)):
        raise DataQualityError(f"{day}: hours do not form a complete 1..24 sequence after normalization")

    return _DayFix(
        start=start,
        end=end,
        dates=np.full(HOURS_PER_DAY, np.datetime64(day, "D")),
        hours=hours,
        load=load,
        temperatures=temperatures,
        holiday=holiday,
    )


def normalize_dst(
    raw: ZoneDataset,
    calendar: Optional[DstCalendar] = None,
    passthrough_from_year: Optional[int] = None,
    fallback_convention: FallbackConvention = "duplicate_rows",
) -> ZoneDataset:
    """
    Force exactly 24 samples per day.

    Spring-forward days gain the missing hour as the mean of its neighbours;
    fall-back days replace the double-counted hour by half its summed value.
    Complete days pass through unchanged, except complete pre-passthrough
    fall-back days under the ``summed_row`` convention, whose 2AM load is halved.

    Raises:
        NormalizationError: More than one gap or duplicate on a day
        DataQualityError: Gaps or duplicates on non-DST dates, or missing days
    """
    if raw.dst_normalized:
        return raw
    if len(raw) == 0:
        raise DataQualityError(f"zone {raw.zone_id}: empty dataset")

    calendar = calendar or DstCalendar()
    passthrough = settings.DST_PASSTHROUGH_FROM_YEAR if passthrough_from_year is None else passthrough_from_year

    index = raw.grid.hour_index
    if np.any(np.diff(index) < 0):
        raw = raw.take(np.argsort(index, kind="stable"))

    days, starts, counts = np.unique(raw.grid.dates, return_index=True, return_counts=True)
    gaps = np.flatnonzero(np.diff(days.astype(np.int64)) != 1)
    if gaps.size:
        g = int(gaps[0])
        raise DataQualityError(f"zone {raw.zone_id}: no data between {days[g]} and {days[g + 1]}")

    # Rows whose hour does not match their position within the day.
    day_of_row = np.repeat(np.arange(days.size), counts)
    position = np.arange(len(raw)) - starts[day_of_row]
    misplaced = np.bincount(day_of_row, weights=(raw.grid.hours != position + 1).astype(np.float64), minlength=days.size)
    irregular = (counts != HOURS_PER_DAY) | (misplaced > 0)

    if fallback_convention == "summed_row":
        years = days.astype("datetime64[Y]").astype(np.int64) + 1970
        fall_backs = np.array(
            [np.datetime64(calendar.fall_back(int(y)), "D") for y in years], dtype="datetime64[D]"
        )
        summed_days = (days == fall_backs) & (years < passthrough) & ~irregular
    else:
        summed_days = np.zeros(days.size, dtype=bool)

    report = NormalizationReport()
    fixes = [
        _fix_day(
            raw,
            days[i].astype(date),
            int(starts[i]),
            int(starts[i] + counts[i]),
            calendar,
            bool(summed_days[i]),
            report,
        )
        for i in np.flatnonzero(irregular | summed_days)
    ]

    sources = {
        "dates": raw.grid.dates,
        "hours": raw.grid.hours,
        "load": raw.load,
        "temperatures": raw.temperatures,
        "holiday": raw.holiday,
    }
    pieces = {name: [] for name in sources}
    cursor = 0
    for fix in fixes:
        for name, source in sources.items():
            pieces[name].append(source[cursor:fix.start])
            pieces[name].append(getattr(fix, name))
        cursor = fix.end
    for name, source in sources.items():
        pieces[name].append(source[cursor:])

    normalized = ZoneDataset(
        zone_id=raw.zone_id,
        grid=HourlyGrid(dates=np.concatenate(pieces["dates"]), hours=np.concatenate(pieces["hours"])),
        load=np.concatenate(pieces["load"]),
        temperatures=np.concatenate(pieces["temperatures"], axis=0),
        holiday=np.concatenate(pieces["holiday"]),
        dst_normalized=True,
    )
    logger.info(
        f"Normalized zone {raw.zone_id}: {len(report.inserted)} spring-forward insertions, "
        f"{len(report.merged)} fall-back merges, {len(report.halved)} summed fall-back halvings"
    )
    return normalized


# ============================================================================
# AGGREGATES AND SLICES
# ============================================================================

def aggregate_zone(children: Sequence[ZoneDataset], zone_id: str) -> ZoneDataset:
    """
    Build an aggregate zone: summed load, concatenated temperature channels,
    elementwise-max holiday flags.

    Raises:
        AlignmentError: If the children do not share one timestamp grid
    """
    if not children:
        raise AlignmentError(f"aggregate {zone_id}: no child zones")
    grid = children[0].grid
    for child in children[1:]:
        if not child.grid.same_as(grid):
            raise AlignmentError(
                f"aggregate {zone_id}: zone {child.zone_id} is not on the grid of zone {children[0].zone_id}"
            )

    load = children[0].load.copy()
    holiday = children[0].holiday.copy()
    for child in children[1:]:
        load = load + child.load
        holiday = np.maximum(holiday, child.holiday)

    return ZoneDataset(
        zone_id=zone_id,
        grid=grid,
        load=load,
        temperatures=np.concatenate([child.temperatures for child in children], axis=1),
        holiday=holiday,
        dst_normalized=all(child.dst_normalized for child in children),
    )


def slice_dataset(dataset: ZoneDataset, start: Optional[date] = None, end: Optional[date] = None) -> ZoneDataset:
    """Rows with start <= date <= end (either bound optional)."""
    mask = np.ones(len(dataset), dtype=bool)
    if start is not None:
        mask &= dataset.grid.dates >= np.datetime64(start, "D")
    if end is not None:
        mask &= dataset.grid.dates <= np.datetime64(end, "D")
    return dataset.take(np.flatnonzero(mask))
