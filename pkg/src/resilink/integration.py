"""Cross-dataset duplicate detection and aggregate-event minting.

Candidate pairs share a city and a date across the two datasets; each pair
is then classified by three ordered rules (shared social-media link,
"area" reports with a wider radius, facility keywords with a tight
radius). Within one dataset, distinct records are assumed to describe
distinct events, so matching is cross-dataset only and one-to-one.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from enum import Enum
from typing import IO, Iterable, Sequence
from urllib.parse import urlsplit, urlunsplit

from .gazetteer import haversine_km
from .ingest import clean_location_string
from .model import AggregateEvent, Event, EventKey, Dataset
from .rdf import aggregate_iri, event_iri

DEFAULT_KEYWORDS = (
    "theater",
    "church",
    "school",
    "hospital",
    "building",
    "house",
    "flat",
    "station",
)


@dataclass(frozen=True)
class MatchConfig:
    """Thresholds and vocabulary for pair classification.

    Similarities are strict lower bounds and distances strict upper bounds.
    The keyword list is an extension point; the defaults cover the facility
    vocabulary used by the damage reports.
    """

    sim_link: float = 0.55
    sim_area: float = 0.75
    sim_keyword: float = 0.55
    dist_link_km: float = 2.0
    dist_area_km: float = 2.0
    dist_keyword_km: float = 1.0
    keywords: tuple[str, ...] = DEFAULT_KEYWORDS
    area_token: str = "area"

    def __post_init__(self):
        for name in ("sim_link", "sim_area", "sim_keyword"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be within [0, 1]: {value}")
        for name in ("dist_link_km", "dist_area_km", "dist_keyword_km"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "keywords", tuple(k.lower() for k in self.keywords))
        object.__setattr__(self, "area_token", self.area_token.lower())

    @classmethod
    def from_dict(cls, d: dict) -> MatchConfig:
        kwargs = dict(d)
        if "keywords" in kwargs:
            kwargs["keywords"] = tuple(kwargs["keywords"])
        return cls(**kwargs)


class Verdict(str, Enum):
    IDENTICAL = "Identical"
    NEAR_DISTINCT = "NearDistinct"
    UNCLASSIFIED = "Unclassified"


class MatchRule(str, Enum):
    SHARED_LINK = "SharedLink"
    AREA = "Area"
    KEYWORD = "Keyword"
    NONE = "None"


@dataclass(frozen=True)
class MatchPair:
    """One classified candidate pair; a is the first dataset's event id."""

    a: str
    b: str
    distance_km: float
    similarity: float
    verdict: Verdict
    rule: MatchRule
    city_basis: str = "geoname_id"  # how city equality was established: geoname_id | name

    def __post_init__(self):
        if self.verdict is Verdict.IDENTICAL and self.rule is MatchRule.NONE:
            raise ValueError("an Identical pair must carry a rule")


@dataclass(frozen=True)
class IntegrationCounts:
    a: int
    b: int
    identical: int
    near_distinct: int
    integrated: int


@dataclass(frozen=True)
class IntegrationResult:
    pairs: tuple[MatchPair, ...]
    aggregates: tuple[AggregateEvent, ...]
    counts: IntegrationCounts


# ---------------------------------------------------------------------------
# String similarity (Ratcliff/Obershelp)

def _find_longest_block(
    a: str, b2j: dict[str, list[int]], alo: int, ahi: int, blo: int, bhi: int
) -> tuple[int, int, int]:
    """Longest matching block within the window; earliest in a, then in b."""
    besti, bestj, bestsize = alo, blo, 0
    j2len: dict[int, int] = {}
    for i in range(alo, ahi):
        newj2len: dict[int, int] = {}
        for j in b2j.get(a[i], ()):
            if j < blo:
                continue
            if j >= bhi:
                break
            k = j2len.get(j - 1, 0) + 1
            newj2len[j] = k
            if k > bestsize:
                besti, bestj, bestsize = i - k + 1, j - k + 1, k
        j2len = newj2len
    return besti, bestj, bestsize


def _matched_total(a: str, b2j: dict[str, list[int]], alo: int, ahi: int, blo: int, bhi: int) -> int:
    i, j, k = _find_longest_block(a, b2j, alo, ahi, blo, bhi)
    if k == 0:
        return 0
    return (
        k
        + _matched_total(a, b2j, alo, i, blo, j)
        + _matched_total(a, b2j, i + k, ahi, j + k, bhi)
    )


def similarity(a: str, b: str) -> float:
    """Ratcliff/Obershelp ratio 2*M/(len(a)+len(b)) after lowercasing.

    M is the total length of matched blocks found by recursively taking the
    longest matching block and recursing into the left and right remainders
    (no junk or popularity heuristics). Two empty strings rate 1.0.
    """
    a, b = a.lower(), b.lower()
    if not a and not b:
        return 1.0
    b2j: dict[str, list[int]] = {}
    for j, ch in enumerate(b):
        b2j.setdefault(ch, []).append(j)
    matched = _matched_total(a, b2j, 0, len(a), 0, len(b))
    return 2.0 * matched / (len(a) + len(b))


# ---------------------------------------------------------------------------
# Candidate generation and classification

def normalize_url(u: str) -> str:
    """Lowercase scheme and authority, strip fragment and trailing slashes."""
    parts = urlsplit(u)
    return urlunsplit(
        (parts.scheme.lower(), parts.netloc.lower(), parts.path.rstrip("/"), parts.query, "")
    )


def shares_link(a: Event, b: Event) -> bool:
    """True iff the two events cite at least one common (normalized) URL."""
    if not a.source_urls or not b.source_urls:
        return False
    return bool(
        {normalize_url(u) for u in a.source_urls} & {normalize_url(u) for u in b.source_urls}
    )


def _matching_city_name(ev: Event) -> str | None:
    if ev.city is not None and ev.city.preferred_name:
        return ev.city.preferred_name
    return ev.city_name


def _city_equality(a: Event, b: Event) -> str | None:
    """None when the cities differ; otherwise which basis matched."""
    if a.city is not None and b.city is not None:
        return "geoname_id" if a.city.geoname_id == b.city.geoname_id else None
    na, nb = _matching_city_name(a), _matching_city_name(b)
    if na is None or nb is None:
        return None
    if clean_location_string(na).lower() == clean_location_string(nb).lower():
        return "name"
    return None


def candidate_pairs(a_events: Sequence[Event], b_events: Sequence[Event]) -> list[tuple[Event, Event]]:
    """Cross-dataset pairs with equal dates and equal cities.

    City equality compares geoname ids when both sides are resolved and
    falls back to cleaned, lowercased names otherwise; events with neither
    are never paired. Within-dataset pairs are never formed.
    """
    by_date: dict = {}
    for b in b_events:
        by_date.setdefault(b.date, []).append(b)
    pairs = []
    for a in a_events:
        for b in by_date.get(a.date, ()):
            if _city_equality(a, b) is not None:
                pairs.append((a, b))
    return pairs


def classify_pair(a: Event, b: Event, cfg: MatchConfig = MatchConfig()) -> MatchPair:
    """Apply the three ordered rules to one candidate pair.

    The first rule that yields Identical wins; a NearDistinct verdict from
    an earlier rule survives only if no later rule upgrades the pair. Pairs
    no rule covers stay Unclassified and are kept for manual examination.
    """
    d = haversine_km(a.point, b.point)
    s = similarity(a.description or "", b.description or "")
    desc_a = (a.description or "").lower()
    desc_b = (b.description or "").lower()

    verdict, rule = Verdict.UNCLASSIFIED, MatchRule.NONE
    if shares_link(a, b) and s > cfg.sim_link and d < cfg.dist_link_km:
        verdict, rule = Verdict.IDENTICAL, MatchRule.SHARED_LINK
    else:
        near: MatchRule | None = None
        if cfg.area_token in desc_a or cfg.area_token in desc_b:
            if s > cfg.sim_area and d < cfg.dist_area_km:
                verdict, rule = Verdict.IDENTICAL, MatchRule.AREA
            else:
                near = MatchRule.AREA
        if verdict is not Verdict.IDENTICAL and any(
            kw in desc_a or kw in desc_b for kw in cfg.keywords
        ):
            if s > cfg.sim_keyword and d < cfg.dist_keyword_km:
                verdict, rule = Verdict.IDENTICAL, MatchRule.KEYWORD
            elif near is None:
                near = MatchRule.KEYWORD
        if verdict is not Verdict.IDENTICAL and near is not None:
            verdict, rule = Verdict.NEAR_DISTINCT, near

    basis = _city_equality(a, b)
    return MatchPair(
        a=a.id,
        b=b.id,
        distance_km=d,
        similarity=s,
        verdict=verdict,
        rule=rule,
        city_basis=basis or "geoname_id",
    )


def _richness(ev: Event) -> int:
    count = sum(
        1 for v in (ev.description, ev.country, ev.city, ev.province, ev.postal_code) if v
    )
    return count + len(ev.source_urls) + len(ev.comments) + len(ev.city_labels)


def choose_primary(a: Event, b: Event) -> EventKey:
    """The member with more populated optional items; ties go to EoR."""
    ra, rb = _richness(a), _richness(b)
    if ra > rb:
        return a.key
    if rb > ra:
        return b.key
    return a.key if a.dataset is Dataset.EOR else b.key


def integrate(
    a_events: Sequence[Event], b_events: Sequence[Event], cfg: MatchConfig = MatchConfig()
) -> IntegrationResult:
    """Run the full matching pass and mint aggregate events.

    One-to-one matching: when an event appears in several Identical pairs,
    the highest-similarity pair survives (ties: smaller distance, then
    lexicographic ids) and the others are demoted to Unclassified. Every
    source event ends up in exactly one aggregate (a pair aggregate for a
    surviving match, a singleton otherwise), so the integrated event count
    is |A| + |B| - |S|.
    """
    for events in (a_events, b_events):
        seen: set[EventKey] = set()
        for ev in events:
            if ev.key in seen:
                raise ValueError(f"duplicate event id within dataset: {ev.key}")
            seen.add(ev.key)

    lookup_a = {ev.id: ev for ev in a_events}
    lookup_b = {ev.id: ev for ev in b_events}
    pairs = [classify_pair(a, b, cfg) for a, b in candidate_pairs(a_events, b_events)]

    survivors: list[MatchPair] = []
    demoted: set[tuple[str, str]] = set()
    used_a: set[str] = set()
    used_b: set[str] = set()
    identical = [p for p in pairs if p.verdict is Verdict.IDENTICAL]
    for p in sorted(identical, key=lambda p: (-p.similarity, p.distance_km, p.a, p.b)):
        if p.a in used_a or p.b in used_b:
            demoted.add((p.a, p.b))
        else:
            used_a.add(p.a)
            used_b.add(p.b)
            survivors.append(p)

    final_pairs = tuple(
        replace(p, verdict=Verdict.UNCLASSIFIED) if (p.a, p.b) in demoted else p for p in pairs
    )

    aggregates: list[AggregateEvent] = []
    surviving_keys = {(p.a, p.b) for p in survivors}
    for p in pairs:
        if p.verdict is Verdict.IDENTICAL and (p.a, p.b) in surviving_keys:
            a, b = lookup_a[p.a], lookup_b[p.b]
            member_iris = [event_iri(*a.key), event_iri(*b.key)]
            aggregates.append(
                AggregateEvent(
                    iri=aggregate_iri(member_iris),
                    members=(a.key, b.key),
                    primary=choose_primary(a, b),
                )
            )
    for events, used in ((a_events, used_a), (b_events, used_b)):
        for ev in events:
            if ev.id in used:
                continue
            aggregates.append(
                AggregateEvent(
                    iri=aggregate_iri([event_iri(*ev.key)]),
                    members=(ev.key,),
                    primary=ev.key,
                )
            )

    counts = IntegrationCounts(
        a=len(a_events),
        b=len(b_events),
        identical=len(survivors),
        near_distinct=sum(1 for p in final_pairs if p.verdict is Verdict.NEAR_DISTINCT),
        integrated=len(aggregates),
    )
    assert counts.integrated == counts.a + counts.b - counts.identical
    return IntegrationResult(pairs=final_pairs, aggregates=tuple(aggregates), counts=counts)


PAIR_REPORT_HEADER = ("a_id", "b_id", "verdict", "rule", "distance_km", "similarity")


def write_pair_report(pairs: Iterable[MatchPair], fp: IO[str]) -> None:
    """CSV report of every classified pair, one row per pair."""
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(PAIR_REPORT_HEADER)
    for p in pairs:
        writer.writerow(
            (p.a, p.b, p.verdict.value, p.rule.value, f"{p.distance_km:.6f}", f"{p.similarity:.6f}")
        )
