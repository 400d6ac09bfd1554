"""Weekly case-count ingestion, cumulative series, and outbreak-season segmentation."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError

DEFAULT_QUIET_WEEKS = 3
DEFAULT_QUIET_LEVEL = 0


@dataclass(frozen=True)
class IncidenceSeries:
    """New-case counts for consecutive epidemiological weeks.

    ``new_cases[i]`` is the count for week ``start_week + i``.
    """

    start_week: int
    new_cases: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.new_cases)
        if len(counts) < 1:
            raise DataError("series must contain at least one week")
        if any(c < 0 for c in counts):
            raise DataError("negative count")
        object.__setattr__(self, "new_cases", counts)

    def __len__(self) -> int:
        return len(self.new_cases)

    @property
    def end_week(self) -> int:
        return self.start_week + len(self.new_cases) - 1

    @property
    def weeks(self) -> range:
        return range(self.start_week, self.end_week + 1)

    @property
    def total(self) -> int:
        return sum(self.new_cases)

    def count_at(self, week: int) -> int:
        if not self.start_week <= week <= self.end_week:
            raise DataError(f"week {week} outside series [{self.start_week}, {self.end_week}]")
        return self.new_cases[week - self.start_week]

    def slice(self, first_week: int, last_week: int) -> "IncidenceSeries":
        """Restrict to [first_week, last_week]; both bounds must lie in the series."""
        if first_week > last_week:
            raise DataError("empty slice")
        lo = first_week - self.start_week
        hi = last_week - self.start_week
        if lo < 0 or hi >= len(self.new_cases):
            raise DataError(f"slice [{first_week}, {last_week}] outside series")
        return IncidenceSeries(first_week, self.new_cases[lo:hi + 1])


@dataclass(frozen=True)
class CumulativeSeries:
    """Running case totals; ``cumulative[i]`` includes week ``start_week + i``."""

    start_week: int
    cumulative: tuple[int, ...]

    def __post_init__(self):
        vals = tuple(int(v) for v in self.cumulative)
        if len(vals) < 1:
            raise DataError("series must contain at least one week")
        if vals[0] < 0 or any(b < a for a, b in zip(vals, vals[1:])):
            raise DataError("cumulative series must be non-decreasing and non-negative")
        object.__setattr__(self, "cumulative", vals)

    def __len__(self) -> int:
        return len(self.cumulative)

    @property
    def end_week(self) -> int:
        return self.start_week + len(self.cumulative) - 1

    @property
    def total(self) -> int:
        return self.cumulative[-1]

    def value_at(self, week: int) -> int:
        if not self.start_week <= week <= self.end_week:
            raise DataError(f"week {week} outside series [{self.start_week}, {self.end_week}]")
        return self.cumulative[week - self.start_week]


@dataclass(frozen=True)
class OutbreakSeason:
    """A maximal transmission stretch delimited by quiet periods."""

    first_week: int
    last_week: int
    series: IncidenceSeries

    def __post_init__(self):
        if self.first_week > self.last_week:
            raise DataError("season must span at least one week")
        if (self.series.start_week, self.series.end_week) != (self.first_week, self.last_week):
            raise DataError("season series must cover exactly [first_week, last_week]")
        if self.series.total == 0:
            raise DataError("season must contain at least one nonzero count")

    @property
    def total_cases(self) -> int:
        return self.series.total


def parse_weekly_csv(path) -> IncidenceSeries:
    """Read a two-column ``week,cases`` CSV, zero-filling any omitted weeks.

    Weeks must be strictly increasing integers and counts non-negative;
    surveillance exports commonly omit zero weeks, so gaps are filled with
    zero counts rather than rejected.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing file: {path}")
    rows: list[tuple[int, int]] = []
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [h.strip().lower() for h in header[:2]] != ["week", "cases"]:
            raise DataError(f"{path}: expected header 'week,cases', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{lineno}: malformed row {row!r}")
            try:
                week = int(row[0])
                cases = int(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed row {row!r}") from None
            if cases < 0:
                raise DataError(f"{path}:{lineno}: negative count for week {week}")
            if rows:
                if week == rows[-1][0]:
                    raise DataError(f"{path}:{lineno}: duplicate week {week}")
                if week < rows[-1][0]:
                    raise DataError(f"{path}:{lineno}: weeks must be strictly increasing")
            rows.append((week, cases))
    if not rows:
        raise DataError(f"{path}: no data rows")
    start = rows[0][0]
    counts = [0] * (rows[-1][0] - start + 1)
    for week, cases in rows:
        counts[week - start] = cases
    return IncidenceSeries(start, tuple(counts))


def cumulative(series: IncidenceSeries) -> CumulativeSeries:
    """Running sum of weekly counts; the final element is the season total."""
    return CumulativeSeries(series.start_week,
                            tuple(itertools.accumulate(series.new_cases)))


def segment_seasons(series: IncidenceSeries,
                    quiet_weeks: int = DEFAULT_QUIET_WEEKS,
                    quiet_level: int = DEFAULT_QUIET_LEVEL) -> list[OutbreakSeason]:
    """Split the record into outbreak seasons separated by quiet gaps.

    A new season starts at any week with count > quiet_level that follows at
    least ``quiet_weeks`` consecutive weeks at or below ``quiet_level``.  Each
    season runs from its first to its last active week; quiet stretches at
    either end of the record belong to no season.  Returns an empty list when
    no week rises above ``quiet_level``.
    """
    if quiet_weeks < 1:
        raise DataError("quiet_weeks must be >= 1")
    if quiet_level < 0:
        raise DataError("quiet_level must be >= 0")
    active = [i for i, c in enumerate(series.new_cases) if c > quiet_level]
    if not active:
        return []
    spans: list[tuple[int, int]] = []
    start = prev = active[0]
    for i in active[1:]:
        if i - prev - 1 >= quiet_weeks:
            spans.append((start, prev))
            start = i
        prev = i
    spans.append((start, prev))
    seasons = []
    for lo, hi in spans:
        first = series.start_week + lo
        last = series.start_week + hi
        seasons.append(OutbreakSeason(first, last, series.slice(first, last)))
    return seasons


def split_season(season: OutbreakSeason, week: int) -> list[OutbreakSeason]:
    """Split one season at a user-chosen week (the split week starts the second half).

    Back-to-back outbreaks with no quiet gap between them cannot be separated
    automatically; the boundary week comes from the caller.  Both halves must
    contain at least one nonzero count.
    """
    if not season.first_week < week <= season.last_week:
        raise DataError(
            f"split week {week} outside season ({season.first_week}, {season.last_week}]")
    left = season.series.slice(season.first_week, week - 1)
    right = season.series.slice(week, season.last_week)
    if left.total == 0 or right.total == 0:
        raise DataError(f"split at week {week} leaves a half with no cases")
    return [OutbreakSeason(left.start_week, left.end_week, left),
            OutbreakSeason(right.start_week, right.end_week, right)]


def apply_splits(seasons: list[OutbreakSeason], split_weeks) -> list[OutbreakSeason]:
    """Apply explicit split weeks to whichever seasons contain them."""
    out = list(seasons)
    for week in sorted(split_weeks):
        for idx, season in enumerate(out):
            if season.first_week < week <= season.last_week:
                out[idx:idx + 1] = split_season(season, week)
                break
        else:
            raise DataError(f"split week {week} falls in no season")
    return out


def seasons_to_dicts(seasons: list[OutbreakSeason]) -> list[dict]:
    return [{"first_week": s.first_week,
             "last_week": s.last_week,
             "total_cases": s.total_cases} for s in seasons]
