"""RDF statement model, the event-to-triple mapping, and serialization.

The triple mapping (canonical event field -> predicate, object kind,
datatype/language, cardinality) is documented in docs/rdf-mapping.md; the
constants below are the single source of truth for the namespaces it uses.

Serialization is byte-deterministic: triples are de-duplicated and sorted
by the N-Triples rendering of subject, predicate, object before writing,
so identical triple sets always produce identical files.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Sequence
from urllib.parse import quote, unquote, urlsplit

from .model import (
    AggregateEvent,
    Dataset,
    Event,
    EventKey,
    GazetteerRef,
    ResilinkError,
    parse_civil_date,
    validate_point,
)

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"
SDO_NS = "https://schema.org/"
DCT_NS = "http://purl.org/dc/terms/"
SEM_NS = "http://semanticweb.cs.vu.nl/2009/11/sem/"
GEOSPARQL_NS = "http://www.opengis.net/ont/geosparql#"
ONTOLOGY_NS = "https://linked4resilience.eu/ontology/"
EVENT_NS = "https://linked4resilience.eu/event/"

PREFIXES = {
    "dct": DCT_NS,
    "geo": GEOSPARQL_NS,
    "l4r": ONTOLOGY_NS,
    "rdf": RDF_NS,
    "rdfs": RDFS_NS,
    "sdo": SDO_NS,
    "sem": SEM_NS,
    "xsd": XSD_NS,
}

WKT_DATATYPE = GEOSPARQL_NS + "wktLiteral"


class NTriplesSyntaxError(ResilinkError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class SinkError(ResilinkError):
    """Writing serialized output failed."""


class TermKind(Enum):
    IRI = "iri"
    LITERAL = "literal"


@dataclass(frozen=True)
class Term:
    """An RDF term: an absolute IRI, or a literal with optional tag/datatype."""

    kind: TermKind
    value: str
    language: str | None = None
    datatype: str | None = None

    def __post_init__(self):
        if self.kind is TermKind.IRI:
            if self.language or self.datatype:
                raise ValueError("only literals may carry a language or datatype")
            if not urlsplit(self.value).scheme:
                raise ValueError(f"IRI must be absolute: {self.value!r}")
        elif self.language and self.datatype:
            raise ValueError("language and datatype are mutually exclusive")

    @classmethod
    def iri(cls, value: str) -> Term:
        return cls(TermKind.IRI, value)

    @classmethod
    def literal(cls, value: str, language: str | None = None, datatype: str | None = None) -> Term:
        return cls(TermKind.LITERAL, value, language, datatype)


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if self.subject.kind is not TermKind.IRI or self.predicate.kind is not TermKind.IRI:
            raise ValueError("subject and predicate must be IRIs")


def event_iri(dataset: Dataset, event_id: str) -> str:
    """Deterministic event IRI; the local id is percent-encoded."""
    if not event_id:
        raise ValueError("event id must be non-empty")
    return f"{EVENT_NS}{dataset.value}/{quote(event_id, safe='')}"


_EVENT_IRI_RE = re.compile(
    re.escape(EVENT_NS) + r"(eor|ch)/([^/]+)$"
)


def parse_event_iri(iri: str) -> EventKey:
    m = _EVENT_IRI_RE.match(iri)
    if m is None:
        raise ValueError(f"not an event IRI: {iri!r}")
    return (Dataset(m.group(1)), unquote(m.group(2)))


def aggregate_iri(member_iris: Sequence[str]) -> str:
    """Aggregate IRI minted from the hex digest of the sorted member IRIs."""
    digest = hashlib.sha256("\n".join(sorted(member_iris)).encode("utf-8")).hexdigest()
    return f"{EVENT_NS}aggregate/{digest}"


def format_decimal(x: float) -> str:
    """Decimal lexical form with at most 7 fraction digits, zeros trimmed."""
    if x == 0.0:
        x = 0.0  # normalizes -0.0
    text = f"{x:.7f}".rstrip("0").rstrip(".")
    return text if text else "0"


def _geoname_iri(ref: GazetteerRef) -> Term:
    return Term.iri(ref.iri)


def emit_event_triples(ev: Event) -> list[Triple]:
    """Map one event to its triples.

    Always emitted: the type, the typed date, and the location/geo node
    carrying both coordinates. Everything else is conditional on the field
    being present. Location and geo nodes are IRIs derived from the event
    IRI so output is deterministic and joinable.
    """
    subject = Term.iri(event_iri(ev.dataset, ev.id))
    loc = Term.iri(subject.value + "/location")
    geo = Term.iri(subject.value + "/geo")
    xsd_date = XSD_NS + "date"
    xsd_decimal = XSD_NS + "decimal"

    triples = [
        Triple(subject, Term.iri(RDF_NS + "type"), Term.iri(SEM_NS + "Event")),
        Triple(subject, Term.iri(DCT_NS + "date"), Term.literal(ev.date.isoformat(), datatype=xsd_date)),
        Triple(subject, Term.iri(SDO_NS + "location"), loc),
        Triple(loc, Term.iri(SDO_NS + "geo"), geo),
        Triple(geo, Term.iri(RDF_NS + "type"), Term.iri(SDO_NS + "GeoCoordinates")),
        Triple(geo, Term.iri(SDO_NS + "latitude"),
               Term.literal(format_decimal(ev.point.latitude), datatype=xsd_decimal)),
        Triple(geo, Term.iri(SDO_NS + "longitude"),
               Term.literal(format_decimal(ev.point.longitude), datatype=xsd_decimal)),
    ]
    if ev.description is not None:
        triples.append(Triple(subject, Term.iri(DCT_NS + "description"), Term.literal(ev.description)))
    for url in ev.source_urls:
        triples.append(Triple(subject, Term.iri(SDO_NS + "url"), Term.iri(url)))
    for comment in ev.comments:
        triples.append(Triple(subject, Term.iri(RDFS_NS + "comment"), Term.literal(comment)))
    for lang in sorted(ev.city_labels):
        triples.append(
            Triple(subject, Term.iri(ONTOLOGY_NS + "cityName"),
                   Term.literal(ev.city_labels[lang], language=lang))
        )
    if ev.province is not None and ev.province.preferred_name:
        triples.append(
            Triple(subject, Term.iri(ONTOLOGY_NS + "addressRegion"),
                   Term.literal(ev.province.preferred_name))
        )
    for predicate, ref in (
        ("cityGeoNames", ev.city),
        ("provinceGeoNames", ev.province),
        ("countryGeoNames", ev.country),
    ):
        if ref is not None:
            triples.append(Triple(subject, Term.iri(ONTOLOGY_NS + predicate), _geoname_iri(ref)))
    if ev.postal_code is not None:
        triples.append(
            Triple(subject, Term.iri(ONTOLOGY_NS + "postalCode"), Term.literal(ev.postal_code))
        )
    return triples


def emit_aggregate_triples(agg: AggregateEvent) -> list[Triple]:
    """Type the aggregate and link it to its primary source and members."""
    subject = Term.iri(agg.iri)
    triples = [
        Triple(subject, Term.iri(RDF_NS + "type"), Term.iri(SEM_NS + "Event")),
        Triple(subject, Term.iri(ONTOLOGY_NS + "hasPrimarySource"),
               Term.iri(event_iri(*agg.primary))),
    ]
    for member in agg.members:
        triples.append(
            Triple(subject, Term.iri(ONTOLOGY_NS + "hasMember"), Term.iri(event_iri(*member)))
        )
    return triples


# ---------------------------------------------------------------------------
# Serialization

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _escape_literal(value: str) -> str:
    out = []
    for ch in value:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return "".join(out)


def _nt_term(t: Term) -> str:
    if t.kind is TermKind.IRI:
        return f"<{t.value}>"
    lit = f'"{_escape_literal(t.value)}"'
    if t.language:
        return f"{lit}@{t.language}"
    if t.datatype:
        return f"{lit}^^<{t.datatype}>"
    return lit


def _sorted_unique(triples: Iterable[Triple]) -> list[tuple[str, str, str]]:
    rendered = {(_nt_term(t.subject), _nt_term(t.predicate), _nt_term(t.object)) for t in triples}
    return sorted(rendered)


def _prefixed(iri: str) -> str | None:
    for prefix, ns in PREFIXES.items():
        if iri.startswith(ns):
            local = iri[len(ns):]
            if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_-]*", local):
                return f"{prefix}:{local}"
    return None


def _turtle_term(rendered: str) -> str:
    if rendered.startswith("<") and rendered.endswith(">"):
        short = _prefixed(rendered[1:-1])
        return short if short else rendered
    if "^^<" in rendered and rendered.endswith(">"):
        lit, _, dt = rendered.rpartition("^^")
        short = _prefixed(dt[1:-1])
        return f"{lit}^^{short}" if short else rendered
    return rendered


class RdfFormat(str, Enum):
    NTRIPLES = "ntriples"
    TURTLE = "turtle"


def serialize(triples: Iterable[Triple], fmt: RdfFormat, sink: IO[bytes]) -> None:
    """Write the triple set to a binary sink, deterministically.

    N-Triples: one statement per line, UTF-8, literals escaped per the
    grammar. Turtle: a single prefix block followed by subject-grouped
    statements using prefixed names where possible.
    """
    rows = _sorted_unique(triples)
    lines: list[str] = []
    if fmt is RdfFormat.NTRIPLES:
        lines = [f"{s} {p} {o} ." for s, p, o in rows]
    elif fmt is RdfFormat.TURTLE:
        for prefix in sorted(PREFIXES):
            lines.append(f"@prefix {prefix}: <{PREFIXES[prefix]}> .")
        current: str | None = None
        body: list[str] = []
        for s, p, o in rows:
            pred = "a" if p == f"<{RDF_NS}type>" else _turtle_term(p)
            obj = _turtle_term(o)
            if s != current:
                if current is not None:
                    body[-1] = body[-1][:-2] + " ."
                body.append("")
                body.append(s)
                current = s
            body.append(f"    {pred} {obj} ;")
        if current is not None:
            body[-1] = body[-1][:-2] + " ."
        lines.extend(body)
    else:
        raise ValueError(f"unsupported format: {fmt!r}")
    data = "\n".join(lines)
    if data:
        data += "\n"
    try:
        sink.write(data.encode("utf-8"))
    except OSError as exc:
        raise SinkError(str(exc)) from exc


def serialize_bytes(triples: Iterable[Triple], fmt: RdfFormat = RdfFormat.NTRIPLES) -> bytes:
    import io

    buf = io.BytesIO()
    serialize(triples, fmt, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# N-Triples parsing (inverse of the serializer; also the round-trip oracle)

_IRIREF_RE = re.compile(r"<([^<>\"{}|^`\\\x00-\x20]*)>")
_LANGTAG_RE = re.compile(r"@([a-zA-Z]+(?:-[a-zA-Z0-9]+)*)")
_UNESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


def _unescape_literal(raw: str, line: int) -> str:
    out = []
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= len(raw):
            raise NTriplesSyntaxError(line, "dangling escape")
        esc = raw[i + 1]
        if esc in _UNESCAPES:
            out.append(_UNESCAPES[esc])
            i += 2
        elif esc in ("u", "U"):
            width = 4 if esc == "u" else 8
            hex_digits = raw[i + 2 : i + 2 + width]
            try:
                out.append(chr(int(hex_digits, 16)))
            except ValueError as exc:
                raise NTriplesSyntaxError(line, f"bad \\{esc} escape: {hex_digits!r}") from exc
            i += 2 + width
        else:
            raise NTriplesSyntaxError(line, f"unknown escape \\{esc}")
    return "".join(out)


def _read_term(text: str, pos: int, line: int) -> tuple[Term, int]:
    if pos >= len(text):
        raise NTriplesSyntaxError(line, "unexpected end of statement")
    if text[pos] == "<":
        m = _IRIREF_RE.match(text, pos)
        if m is None:
            raise NTriplesSyntaxError(line, "malformed IRI")
        return Term.iri(m.group(1)), m.end()
    if text[pos] == '"':
        i = pos + 1
        while i < len(text):
            if text[i] == "\\":
                i += 2
                continue
            if text[i] == '"':
                break
            i += 1
        else:
            raise NTriplesSyntaxError(line, "unterminated literal")
        value = _unescape_literal(text[pos + 1 : i], line)
        i += 1
        if text.startswith("@", i):
            m = _LANGTAG_RE.match(text, i)
            if m is None:
                raise NTriplesSyntaxError(line, "malformed language tag")
            return Term.literal(value, language=m.group(1)), m.end()
        if text.startswith("^^", i):
            m = _IRIREF_RE.match(text, i + 2)
            if m is None:
                raise NTriplesSyntaxError(line, "malformed datatype IRI")
            return Term.literal(value, datatype=m.group(1)), m.end()
        return Term.literal(value), i
    if text.startswith("_:", pos):
        raise NTriplesSyntaxError(line, "blank nodes are not supported")
    raise NTriplesSyntaxError(line, f"unexpected character {text[pos]!r}")


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos] in " \t":
        pos += 1
    return pos


def parse_ntriples(data: bytes | str) -> list[Triple]:
    """Parse N-Triples text into triples; errors carry the 1-based line.

    Statements are delimited by LF/CRLF only; unicode line separators such
    as U+0085 may appear raw inside literals per the grammar, so the
    generic splitlines() set must not be used here.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    triples = []
    for lineno, raw_line in enumerate(data.split("\n"), start=1):
        raw_line = raw_line.rstrip("\r")
        text = raw_line.strip()
        if not text or text.startswith("#"):
            continue
        pos = 0
        subject, pos = _read_term(text, pos, lineno)
        pos = _skip_ws(text, pos)
        predicate, pos = _read_term(text, pos, lineno)
        pos = _skip_ws(text, pos)
        obj, pos = _read_term(text, pos, lineno)
        pos = _skip_ws(text, pos)
        if pos >= len(text) or text[pos] != ".":
            raise NTriplesSyntaxError(lineno, "statement must end with '.'")
        if text[pos + 1 :].strip():
            raise NTriplesSyntaxError(lineno, "trailing content after '.'")
        try:
            triples.append(Triple(subject, predicate, obj))
        except ValueError as exc:
            raise NTriplesSyntaxError(lineno, str(exc)) from exc
    return triples


# ---------------------------------------------------------------------------
# Loading events and aggregates back out of a triple set

def _subject_map(triples: Iterable[Triple]) -> dict[str, dict[str, list[Term]]]:
    by_subject: dict[str, dict[str, list[Term]]] = {}
    for t in triples:
        by_subject.setdefault(t.subject.value, {}).setdefault(t.predicate.value, []).append(t.object)
    return by_subject


def _one(objs: list[Term] | None) -> Term | None:
    return objs[0] if objs else None


def events_from_triples(
    triples: Iterable[Triple],
) -> tuple[dict[EventKey, Event], list[AggregateEvent]]:
    """Rebuild events and aggregates from an emitted triple set.

    The inverse of emit_event_triples/emit_aggregate_triples up to field
    ordering: comment and URL order is not preserved by RDF's set
    semantics, so both come back sorted. GazetteerRefs are rebuilt from the
    linking IRIs; the province's preferred name is recovered from the
    addressRegion literal.
    """
    by_subject = _subject_map(triples)
    events: dict[EventKey, Event] = {}
    aggregates: list[AggregateEvent] = []

    for subject, preds in sorted(by_subject.items()):
        type_objs = preds.get(RDF_NS + "type", [])
        is_event_node = any(o.value == SEM_NS + "Event" for o in type_objs)
        if not is_event_node:
            continue
        if subject.startswith(EVENT_NS + "aggregate/"):
            primary_term = _one(preds.get(ONTOLOGY_NS + "hasPrimarySource"))
            if primary_term is None:
                raise ValueError(f"aggregate node without hasPrimarySource: {subject}")
            members = tuple(
                sorted(parse_event_iri(o.value) for o in preds.get(ONTOLOGY_NS + "hasMember", []))
            )
            aggregates.append(
                AggregateEvent(iri=subject, members=members, primary=parse_event_iri(primary_term.value))
            )
            continue

        try:
            dataset, local_id = parse_event_iri(subject)
        except ValueError:
            continue
        date_term = _one(preds.get(DCT_NS + "date"))
        loc_term = _one(preds.get(SDO_NS + "location"))
        if date_term is None or loc_term is None:
            raise ValueError(f"event node missing date or location: {subject}")
        geo_term = _one(by_subject.get(loc_term.value, {}).get(SDO_NS + "geo"))
        geo_preds = by_subject.get(geo_term.value, {}) if geo_term else {}
        lat = _one(geo_preds.get(SDO_NS + "latitude"))
        lon = _one(geo_preds.get(SDO_NS + "longitude"))
        if lat is None or lon is None:
            raise ValueError(f"event node missing coordinates: {subject}")

        def _ref_from(predicate: str, preferred: str = "") -> GazetteerRef | None:
            term = _one(preds.get(ONTOLOGY_NS + predicate))
            return GazetteerRef.from_iri(term.value, preferred) if term else None

        region = _one(preds.get(ONTOLOGY_NS + "addressRegion"))
        desc = _one(preds.get(DCT_NS + "description"))
        postal = _one(preds.get(ONTOLOGY_NS + "postalCode"))
        labels = {
            o.language: o.value
            for o in preds.get(ONTOLOGY_NS + "cityName", [])
            if o.language
        }
        ev = Event(
            id=local_id,
            dataset=dataset,
            date=parse_civil_date(date_term.value),
            point=validate_point(float(lat.value), float(lon.value)),
            description=desc.value if desc else None,
            country=_ref_from("countryGeoNames"),
            city=_ref_from("cityGeoNames"),
            province=_ref_from("provinceGeoNames", region.value if region else ""),
            postal_code=postal.value if postal else None,
            source_urls=tuple(sorted(o.value for o in preds.get(SDO_NS + "url", []))),
            comments=tuple(sorted(o.value for o in preds.get(RDFS_NS + "comment", []))),
            city_labels=labels,
        )
        events[ev.key] = ev
    return events, aggregates
