from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resilink.model import AggregateEvent, CivilDate, Dataset, Event, GazetteerRef, GeoPoint
from resilink.rdf import (
    DCT_NS,
    ONTOLOGY_NS,
    RDF_NS,
    SEM_NS,
    NTriplesSyntaxError,
    RdfFormat,
    Term,
    Triple,
    aggregate_iri,
    emit_aggregate_triples,
    emit_event_triples,
    event_iri,
    events_from_triples,
    format_decimal,
    parse_event_iri,
    parse_ntriples,
    serialize_bytes,
)


class TestTermModel:
    def test_language_and_datatype_exclusive(self):
        with pytest.raises(ValueError):
            Term.literal("x", language="en", datatype="http://x/dt")

    def test_iri_cannot_carry_language(self):
        from resilink.rdf import TermKind

        with pytest.raises(ValueError):
            Term(TermKind.IRI, "http://x", language="en")

    def test_relative_iri_rejected(self):
        with pytest.raises(ValueError):
            Term.iri("relative/path")

    def test_literal_subject_rejected(self):
        lit = Term.literal("x")
        iri = Term.iri("http://x/p")
        with pytest.raises(ValueError):
            Triple(lit, iri, iri)


class TestEventIri:
    def test_eor(self):
        assert event_iri(Dataset.EOR, "123") == "https://linked4resilience.eu/event/eor/123"

    def test_percent_encoding(self):
        assert event_iri(Dataset.CH, "a b") == "https://linked4resilience.eu/event/ch/a%20b"

    def test_deterministic(self):
        assert event_iri(Dataset.CH, "x/y") == event_iri(Dataset.CH, "x/y")

    def test_round_trip(self):
        iri = event_iri(Dataset.CH, "a b/c")
        assert parse_event_iri(iri) == (Dataset.CH, "a b/c")

    def test_sub_nodes_are_not_event_iris(self):
        with pytest.raises(ValueError):
            parse_event_iri(event_iri(Dataset.EOR, "1") + "/geo")


class TestFormatDecimal:
    @pytest.mark.parametrize(
        "value,expected",
        [
            (49.2128, "49.2128"),
            (36.0, "36"),
            (-0.0, "0"),
            (0.12345678, "0.1234568"),
            (-12.5, "-12.5"),
        ],
    )
    def test_cases(self, value, expected):
        assert format_decimal(value) == expected


def _event(**kwargs) -> Event:
    base = dict(
        id="123",
        dataset=Dataset.EOR,
        date=CivilDate(2022, 3, 7),
        point=GeoPoint(49.2128, 37.2573),
    )
    base.update(kwargs)
    return Event(**base)


class TestEmitEventTriples:
    def test_minimal_event_exact_triples(self):
        triples = emit_event_triples(_event())
        assert len(triples) == 7
        preds = sorted(t.predicate.value for t in triples)
        assert preds == sorted(
            [
                RDF_NS + "type",
                DCT_NS + "date",
                "https://schema.org/location",
                "https://schema.org/geo",
                RDF_NS + "type",
                "https://schema.org/latitude",
                "https://schema.org/longitude",
            ]
        )

    def test_izum_running_example(self):
        ev = _event(
            description="Hospital destroyed by explosion",
            postal_code="64305",
            province=GazetteerRef(706483, "Kharkiv"),
        )
        triples = emit_event_triples(ev)
        rendered = {(t.predicate.value, t.object.value, t.object.datatype, t.object.language) for t in triples}
        assert (DCT_NS + "date", "2022-03-07", "http://www.w3.org/2001/XMLSchema#date", None) in rendered
        assert (ONTOLOGY_NS + "postalCode", "64305", None, None) in rendered
        assert (ONTOLOGY_NS + "addressRegion", "Kharkiv", None, None) in rendered
        assert (ONTOLOGY_NS + "provinceGeoNames", "http://sws.geonames.org/706483/", None, None) in rendered

    def test_language_tagged_labels(self):
        ev = _event(city_labels={"uk": "Ізюм", "en": "Izyum"})
        labels = [
            (t.object.language, t.object.value)
            for t in emit_event_triples(ev)
            if t.predicate.value == ONTOLOGY_NS + "cityName"
        ]
        assert sorted(labels) == [("en", "Izyum"), ("uk", "Ізюм")]

    def test_exactly_one_type_and_date(self):
        ev = _event(
            description="d",
            source_urls=("https://a/1", "https://b/2"),
            comments=("c1", "c2"),
            city=GazetteerRef(689558, "Izyum"),
        )
        subject = event_iri(ev.dataset, ev.id)
        triples = emit_event_triples(ev)
        types = [t for t in triples if t.subject.value == subject and t.predicate.value == RDF_NS + "type"]
        dates = [t for t in triples if t.predicate.value == DCT_NS + "date"]
        assert len(types) == 1 and types[0].object.value == SEM_NS + "Event"
        assert len(dates) == 1

    def test_no_literal_carries_tag_and_datatype(self):
        ev = _event(description="d", city_labels={"en": "x"}, postal_code="1")
        for t in emit_event_triples(ev):
            assert not (t.object.language and t.object.datatype)


class TestEmitAggregateTriples:
    def test_pair_aggregate(self):
        members = ((Dataset.EOR, "1"), (Dataset.CH, "2"))
        agg = AggregateEvent(
            iri=aggregate_iri([event_iri(*m) for m in members]),
            members=members,
            primary=(Dataset.EOR, "1"),
        )
        triples = emit_aggregate_triples(agg)
        assert len(triples) == 4  # type + hasPrimarySource + 2 hasMember
        by_pred = {}
        for t in triples:
            by_pred.setdefault(t.predicate.value, []).append(t.object.value)
        assert by_pred[ONTOLOGY_NS + "hasPrimarySource"] == [event_iri(Dataset.EOR, "1")]
        assert sorted(by_pred[ONTOLOGY_NS + "hasMember"]) == sorted(
            [event_iri(Dataset.EOR, "1"), event_iri(Dataset.CH, "2")]
        )

    def test_singleton_aggregate(self):
        key = (Dataset.CH, "9")
        agg = AggregateEvent(iri=aggregate_iri([event_iri(*key)]), members=(key,), primary=key)
        assert len(emit_aggregate_triples(agg)) == 3

    def test_primary_must_be_member(self):
        with pytest.raises(ValueError):
            AggregateEvent(
                iri="https://x/agg",
                members=((Dataset.EOR, "1"),),
                primary=(Dataset.CH, "2"),
            )

    def test_same_dataset_pair_rejected(self):
        with pytest.raises(ValueError):
            AggregateEvent(
                iri="https://x/agg",
                members=((Dataset.EOR, "1"), (Dataset.EOR, "2")),
                primary=(Dataset.EOR, "1"),
            )

    def test_aggregate_iri_order_independent(self):
        iris = [event_iri(Dataset.EOR, "1"), event_iri(Dataset.CH, "2")]
        assert aggregate_iri(iris) == aggregate_iri(list(reversed(iris)))


_iri_strategy = st.builds(
    lambda host, path: f"https://{host}/{path}",
    st.text(alphabet="abcdefgh", min_size=1, max_size=8),
    st.text(alphabet="abcdefgh0123456789", min_size=0, max_size=12),
)
_literal_strategy = st.builds(
    Term.literal,
    st.text(max_size=40),
    st.one_of(st.none(), st.sampled_from(["en", "uk", "nl", "fr"])),
)
_term_strategy = st.one_of(st.builds(Term.iri, _iri_strategy), _literal_strategy)
_triple_strategy = st.builds(
    Triple,
    st.builds(Term.iri, _iri_strategy),
    st.builds(Term.iri, _iri_strategy),
    _term_strategy,
)


class TestSerialization:
    def test_newline_escaped(self):
        t = Triple(Term.iri("https://x/s"), Term.iri("https://x/p"), Term.literal("a\nb"))
        assert b'"a\\nb"' in serialize_bytes([t])

    def test_empty_input(self):
        assert serialize_bytes([]) == b""
        turtle = serialize_bytes([], RdfFormat.TURTLE).decode()
        assert turtle.strip().startswith("@prefix")
        assert all(line.startswith("@prefix") for line in turtle.strip().splitlines())

    def test_seven_triple_round_trip(self):
        triples = emit_event_triples(_event())
        assert set(parse_ntriples(serialize_bytes(triples))) == set(triples)

    def test_deterministic_bytes(self):
        triples = emit_event_triples(_event(description="x", comments=("c",)))
        assert serialize_bytes(triples) == serialize_bytes(list(reversed(triples)))

    def test_duplicates_collapse(self):
        t = emit_event_triples(_event())
        assert serialize_bytes(t + t) == serialize_bytes(t)

    def test_turtle_uses_prefixes_and_groups_subjects(self):
        text = serialize_bytes(emit_event_triples(_event()), RdfFormat.TURTLE).decode()
        assert "@prefix sem:" in text
        assert " a sem:Event" in text
        assert 'dct:date "2022-03-07"^^xsd:date' in text

    def test_sink_error_wraps_io_failure(self):
        from resilink.rdf import SinkError, serialize

        class FailingSink:
            def write(self, data):
                raise OSError(28, "No space left on device")

        with pytest.raises(SinkError):
            serialize(emit_event_triples(_event()), RdfFormat.NTRIPLES, FailingSink())

    @settings(max_examples=200, deadline=None)
    @given(st.lists(_triple_strategy, max_size=12))
    def test_round_trip_property(self, triples):
        assert set(parse_ntriples(serialize_bytes(triples))) == set(triples)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(_triple_strategy, max_size=12))
    def test_serialize_parse_serialize_fixed_point(self, triples):
        first = serialize_bytes(triples)
        assert serialize_bytes(parse_ntriples(first)) == first


class TestParseNtriples:
    def test_missing_terminator(self):
        with pytest.raises(NTriplesSyntaxError) as exc:
            parse_ntriples(b"<https://x/s> <https://x/p> <https://x/o>\n")
        assert exc.value.line == 1

    def test_empty_input(self):
        assert parse_ntriples(b"") == []

    def test_comments_and_blank_lines_skipped(self):
        data = b"# comment\n\n<https://x/s> <https://x/p> \"v\" .\n"
        assert len(parse_ntriples(data)) == 1

    def test_error_line_number(self):
        good = b'<https://x/s> <https://x/p> "v" .\n'
        with pytest.raises(NTriplesSyntaxError) as exc:
            parse_ntriples(good + b"garbage\n")
        assert exc.value.line == 2

    def test_blank_node_rejected(self):
        with pytest.raises(NTriplesSyntaxError):
            parse_ntriples(b"_:b <https://x/p> <https://x/o> .\n")

    def test_escape_decoding(self):
        data = b'<https://x/s> <https://x/p> "tab\\there\\nline \\"q\\" \\\\done" .\n'
        (t,) = parse_ntriples(data)
        assert t.object.value == 'tab\there\nline "q" \\done'


class TestEventsFromTriples:
    def test_full_round_trip(self):
        ev = _event(
            description="Hospital destroyed by explosion",
            city=GazetteerRef(689558, ""),
            province=GazetteerRef(706483, "Kharkiv"),
            country=GazetteerRef(690791, ""),
            postal_code="64305",
            source_urls=("https://a/1", "https://b/2"),
            comments=("violence_level: significant",),
            city_labels={"en": "Izyum", "uk": "Ізюм"},
        )
        key = (Dataset.EOR, "123")
        agg = AggregateEvent(iri=aggregate_iri([event_iri(*key)]), members=(key,), primary=key)
        triples = emit_event_triples(ev) + emit_aggregate_triples(agg)
        events, aggregates = events_from_triples(triples)
        assert events[key] == ev
        assert aggregates == [agg]

    def test_survives_serialization(self):
        ev = _event(description="x", comments=("a", "b"))
        triples = parse_ntriples(serialize_bytes(emit_event_triples(ev)))
        events, _ = events_from_triples(triples)
        assert events[(Dataset.EOR, "123")].comments == ("a", "b")
