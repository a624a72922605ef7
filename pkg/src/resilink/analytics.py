"""Report queries over the integrated event set.

Every query reads only the aggregates' primary sources, so results are
stable across a serialize/reload round trip of the dataset. All functions
are read-only and may run concurrently.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import IO, Iterable, Mapping, Sequence

from .gazetteer import haversine_km
from .model import (
    AggregateEvent,
    CivilDate,
    Event,
    EventKey,
    GazetteerRef,
    GeoPoint,
    ResilinkError,
    validate_point,
)
from .rdf import (
    GEOSPARQL_NS,
    WKT_DATATYPE,
    Term,
    Triple,
    event_iri,
    events_from_triples,
    format_decimal,
)

logger = logging.getLogger(__name__)

DEFAULT_MONTHS = (
    "2022-02", "2022-03", "2022-04", "2022-05", "2022-06",
    "2022-07", "2022-08", "2022-09", "2022-10", "2022-11",
    "2022-12", "2023-01", "2023-02", "2023-03", "2023-04",
)

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


class ReportFormatError(ResilinkError):
    """An external report input file is malformed."""


@dataclass(frozen=True)
class MonthBucket:
    month_year: str
    count: int

    def __post_init__(self):
        m = _MONTH_RE.match(self.month_year)
        if m is None or not 1 <= int(m.group(2)) <= 12:
            raise ValueError(f"not a YYYY-MM month: {self.month_year!r}")
        if self.count < 0:
            raise ValueError("count must be non-negative")


@dataclass(frozen=True)
class WktPoint:
    """A `POINT(lng lat)` literal; longitude always precedes latitude."""

    wkt: str
    point: GeoPoint


@dataclass(frozen=True)
class RegionRank:
    region: str
    occurrences: int

    def __post_init__(self):
        if self.occurrences <= 0:
            raise ValueError("occurrences must be positive")


@dataclass(frozen=True)
class ShelterRecord:
    point: GeoPoint
    name: str | None = None


@dataclass(frozen=True)
class CityNamesRow:
    names: Mapping[str, str]
    occurrences: int

    def __post_init__(self):
        object.__setattr__(self, "names", MappingProxyType(dict(self.names)))


@dataclass(frozen=True)
class RatioRow:
    month_year: str
    attacks: int
    deaths: int
    ratio: float | None


@dataclass(frozen=True)
class GridCell:
    cell_lat: float
    cell_lon: float
    count: int


@dataclass(frozen=True)
class IntegratedDataset:
    """Aggregates plus the source events they point at."""

    aggregates: tuple[AggregateEvent, ...]
    events: Mapping[EventKey, Event]

    def __post_init__(self):
        object.__setattr__(self, "aggregates", tuple(self.aggregates))
        object.__setattr__(self, "events", MappingProxyType(dict(self.events)))
        for agg in self.aggregates:
            for member in agg.members:
                if member not in self.events:
                    raise ValueError(f"aggregate member has no event: {member}")

    def primary_events(self) -> list[tuple[AggregateEvent, Event]]:
        return [(agg, self.events[agg.primary]) for agg in self.aggregates]

    @classmethod
    def from_events(cls, events: Iterable[Event], aggregates: Iterable[AggregateEvent]) -> IntegratedDataset:
        return cls(aggregates=tuple(aggregates), events={ev.key: ev for ev in events})

    @classmethod
    def from_triples(cls, triples: Iterable[Triple]) -> IntegratedDataset:
        events, aggregates = events_from_triples(triples)
        return cls(aggregates=tuple(aggregates), events=events)


def _month_window(month: str) -> tuple[CivilDate, CivilDate]:
    """[first day of month, first day of next month) for exclusive-end filters."""
    m = _MONTH_RE.match(month)
    if m is None:
        raise ValueError(f"not a YYYY-MM month: {month!r}")
    y, mo = int(m.group(1)), int(m.group(2))
    nxt = (y + 1, 1) if mo == 12 else (y, mo + 1)
    return CivilDate(y, mo, 1), CivilDate(nxt[0], nxt[1], 1)


def uc1_event_points(
    dataset: IntegratedDataset,
    city: GazetteerRef | None,
    start: CivilDate,
    end: CivilDate,
) -> list[WktPoint]:
    """WKT points of primary events within [start, end], both ends inclusive."""
    if start > end:
        raise ValueError("start must not be after end")
    out = []
    for _, ev in dataset.primary_events():
        if not start <= ev.date <= end:
            continue
        if city is not None and (ev.city is None or ev.city.geoname_id != city.geoname_id):
            continue
        wkt = f"POINT({format_decimal(ev.point.longitude)} {format_decimal(ev.point.latitude)})"
        out.append(WktPoint(wkt=wkt, point=ev.point))
    return out


def uc1_wkt_triples(
    dataset: IntegratedDataset,
    city: GazetteerRef | None,
    start: CivilDate,
    end: CivilDate,
) -> list[Triple]:
    """The uc1 selection as wktLiteral triples on the aggregate nodes."""
    if start > end:
        raise ValueError("start must not be after end")
    triples = []
    for agg, ev in dataset.primary_events():
        if not start <= ev.date <= end:
            continue
        if city is not None and (ev.city is None or ev.city.geoname_id != city.geoname_id):
            continue
        wkt = f"POINT({format_decimal(ev.point.longitude)} {format_decimal(ev.point.latitude)})"
        triples.append(
            Triple(
                Term.iri(agg.iri),
                Term.iri(GEOSPARQL_NS + "asWKT"),
                Term.literal(wkt, datatype=WKT_DATATYPE),
            )
        )
    return triples


def points_feature_collection(points: Sequence[WktPoint]) -> dict:
    """GeoJSON FeatureCollection for a list of report points."""
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [p.point.longitude, p.point.latitude],
                },
                "properties": {"wkt": p.wkt},
            }
            for p in points
        ],
    }


def _literal_fields(ev: Event) -> list[str]:
    values = []
    if ev.description is not None:
        values.append(ev.description)
    values.extend(ev.comments)
    values.extend(ev.city_labels.values())
    if ev.province is not None and ev.province.preferred_name:
        values.append(ev.province.preferred_name)
    if ev.postal_code is not None:
        values.append(ev.postal_code)
    return values


def uc2_monthly_keyword_series(
    dataset: IntegratedDataset, keyword: str, months: Sequence[str] = DEFAULT_MONTHS
) -> list[MonthBucket]:
    """Distinct aggregates per month whose primary mentions the keyword.

    The keyword is matched case-insensitively as a substring of any literal
    field of the primary event (description, comments, labels, region,
    postal code). Months with no matches report 0, so the output length
    always equals the requested month list length.
    """
    if not months:
        raise ValueError("months must be non-empty")
    for m in months:
        if not _MONTH_RE.match(m):
            raise ValueError(f"not a YYYY-MM month: {m!r}")
    needle = keyword.lower()
    counts: dict[str, int] = {}
    for _, ev in dataset.primary_events():
        if any(needle in text.lower() for text in _literal_fields(ev)):
            counts[ev.date.month_key()] = counts.get(ev.date.month_key(), 0) + 1
    return [MonthBucket(m, counts.get(m, 0)) for m in months]


def monthly_event_counts(
    dataset: IntegratedDataset, months: Sequence[str] = DEFAULT_MONTHS
) -> list[MonthBucket]:
    """Total aggregates per month (the attack series used by uc5)."""
    counts: dict[str, int] = {}
    for _, ev in dataset.primary_events():
        counts[ev.date.month_key()] = counts.get(ev.date.month_key(), 0) + 1
    return [MonthBucket(m, counts.get(m, 0)) for m in months]


def uc3_multilingual_city_report(
    dataset: IntegratedDataset, langs: Sequence[str], top_n: int
) -> list[CityNamesRow]:
    """Most-hit cities with one label per requested language.

    An event contributes only when its city labels cover every requested
    language; rows group by the name tuple, sort by count descending
    (ties: name order) and truncate to top_n.
    """
    if not langs:
        raise ValueError("langs must be non-empty")
    counts: dict[tuple[str, ...], int] = {}
    for _, ev in dataset.primary_events():
        if all(lang in ev.city_labels for lang in langs):
            key = tuple(ev.city_labels[lang] for lang in langs)
            counts[key] = counts.get(key, 0) + 1
    rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [
        CityNamesRow(names=dict(zip(langs, names)), occurrences=n)
        for names, n in rows[:top_n]
    ]


def uc4_top_regions(
    dataset: IntegratedDataset, start: CivilDate, end: CivilDate, n: int
) -> list[RegionRank]:
    """Top regions by event count within [start, end); the end is exclusive."""
    if not start < end:
        raise ValueError("start must be before end")
    counts: dict[str, int] = {}
    for _, ev in dataset.primary_events():
        if ev.province is None or not ev.province.preferred_name:
            continue
        if start <= ev.date < end:
            region = ev.province.preferred_name
            counts[region] = counts.get(region, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [RegionRank(region, occurrences) for region, occurrences in ranked[:n]]


def uc4_monthly_timeline(
    dataset: IntegratedDataset, months: Sequence[str], n: int
) -> list[tuple[str, list[RegionRank]]]:
    """uc4 applied month by month (each month is a [start, next-month) window)."""
    out = []
    for month in months:
        start, end = _month_window(month)
        out.append((month, uc4_top_regions(dataset, start, end, n)))
    return out


def read_deaths_csv(fp: IO[str]) -> dict[str, int]:
    """Read the external `month,deaths` CSV used by uc5."""
    reader = csv.reader(fp)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["month", "deaths"]:
        raise ReportFormatError("deaths CSV must start with header 'month,deaths'")
    out = {}
    for i, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2 or not _MONTH_RE.match(row[0].strip()):
            raise ReportFormatError(f"deaths CSV line {i}: expected 'YYYY-MM,integer'")
        try:
            out[row[0].strip()] = int(row[1])
        except ValueError as exc:
            raise ReportFormatError(f"deaths CSV line {i}: bad death count {row[1]!r}") from exc
    return out


def uc5_ratio_series(attacks: Sequence[MonthBucket], deaths_by_month: Mapping[str, int]) -> list[RatioRow]:
    """Join the attack series with external death counts on month.

    Months present in the external data but absent from the attack series
    are dropped with a warning; a zero-attack month reports no ratio. This
    is a proof-of-concept join over unvalidated external data; the CSV
    writer marks it as such.
    """
    attack_months = {b.month_year for b in attacks}
    for month in sorted(set(deaths_by_month) - attack_months):
        logger.warning("deaths month %s absent from attack series; dropped", month)
    rows = []
    for bucket in attacks:
        if bucket.month_year not in deaths_by_month:
            continue
        deaths = deaths_by_month[bucket.month_year]
        ratio = deaths / bucket.count if bucket.count > 0 else None
        rows.append(RatioRow(bucket.month_year, bucket.count, deaths, ratio))
    return rows


def load_shelters(fp: IO[str]) -> list[ShelterRecord]:
    """Read shelter records from a `name,lat,lon` CSV with a header row."""
    reader = csv.reader(fp)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["name", "lat", "lon"]:
        raise ReportFormatError("shelter CSV must start with header 'name,lat,lon'")
    shelters = []
    for i, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ReportFormatError(f"shelter CSV line {i}: expected 3 columns")
        try:
            point = validate_point(float(row[1]), float(row[2]))
        except (ValueError, ResilinkError) as exc:
            raise ReportFormatError(f"shelter CSV line {i}: {exc}") from exc
        shelters.append(ShelterRecord(point=point, name=row[0].strip() or None))
    return shelters


def uc6_shelter_gap(
    dataset: IntegratedDataset,
    shelters: Sequence[ShelterRecord],
    radius_km: float = 1.0,
    grid_deg: float = 0.005,
) -> tuple[dict, list[GridCell]]:
    """Uncovered events (no shelter within radius_km) plus a density grid.

    Returns the uncovered events as a GeoJSON FeatureCollection and the
    grid as cells of grid_deg x grid_deg degrees counting uncovered events;
    the cell coordinates are the cell's south-west corner.
    """
    if radius_km <= 0:
        raise ValueError("radius_km must be positive")
    uncovered = []
    for _, ev in dataset.primary_events():
        if not shelters:
            uncovered.append(ev)
            continue
        nearest = min(haversine_km(ev.point, s.point) for s in shelters)
        if nearest > radius_km:
            uncovered.append(ev)

    features = []
    for ev in uncovered:
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [ev.point.longitude, ev.point.latitude],
                },
                "properties": {
                    "event": event_iri(ev.dataset, ev.id),
                    "date": ev.date.isoformat(),
                },
            }
        )
    collection = {"type": "FeatureCollection", "features": features}

    cells: dict[tuple[int, int], int] = {}
    for ev in uncovered:
        key = (math.floor(ev.point.latitude / grid_deg), math.floor(ev.point.longitude / grid_deg))
        cells[key] = cells.get(key, 0) + 1
    grid = [
        GridCell(cell_lat=ki * grid_deg, cell_lon=kj * grid_deg, count=n)
        for (ki, kj), n in sorted(cells.items())
    ]
    return collection, grid


# ---------------------------------------------------------------------------
# CSV writers for the report files

def write_month_csv(buckets: Sequence[MonthBucket], fp: IO[str]) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(("month", "count"))
    for b in buckets:
        w.writerow((b.month_year, b.count))


def write_city_names_csv(rows: Sequence[CityNamesRow], langs: Sequence[str], fp: IO[str]) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow((*langs, "occurrences"))
    for row in rows:
        w.writerow((*(row.names[lang] for lang in langs), row.occurrences))


def write_region_csv(rows: Sequence[RegionRank], fp: IO[str]) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(("region", "occurrences"))
    for r in rows:
        w.writerow((r.region, r.occurrences))


def write_region_timeline_csv(
    timeline: Sequence[tuple[str, list[RegionRank]]], fp: IO[str]
) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(("month", "region", "occurrences"))
    for month, rows in timeline:
        for r in rows:
            w.writerow((month, r.region, r.occurrences))


def write_ratio_csv(rows: Sequence[RatioRow], fp: IO[str]) -> None:
    fp.write("# proof-of-concept: joins unvalidated external data; not for operational decisions\n")
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(("month", "attacks", "deaths", "ratio"))
    for r in rows:
        ratio = "" if r.ratio is None else f"{r.ratio:.6f}"
        w.writerow((r.month_year, r.attacks, r.deaths, ratio))


def write_grid_csv(cells: Sequence[GridCell], fp: IO[str]) -> None:
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(("cell_lat", "cell_lon", "count"))
    for c in cells:
        w.writerow((format_decimal(c.cell_lat), format_decimal(c.cell_lon), c.count))
