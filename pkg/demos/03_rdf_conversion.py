"""Emit one event as RDF and show both serializations plus the round trip."""

from resilink import (
    CivilDate,
    Dataset,
    Event,
    GazetteerRef,
    GeoPoint,
    RdfFormat,
    emit_event_triples,
    parse_ntriples,
    serialize_bytes,
)

event = Event(
    id="123",
    dataset=Dataset.CH,
    date=CivilDate(2022, 3, 7),
    point=GeoPoint(49.2128, 37.2573),
    description="Hospital destroyed by explosion",
    city=GazetteerRef(689558, "Izyum"),
    province=GazetteerRef(706483, "Kharkiv"),
    postal_code="64305",
    source_urls=("https://twitter.com/KyivIndependent/status/1501218105342763020",),
    comments=("violence_level: significant",),
    city_labels={"en": "Izyum", "uk": "Ізюм", "nl": "Izjoem", "fr": "Izioum"},
)

triples = emit_event_triples(event)
print(f"{len(triples)} triples\n")
print("--- Turtle ---")
print(serialize_bytes(triples, RdfFormat.TURTLE).decode())
print("--- N-Triples (first 5 statements) ---")
nt = serialize_bytes(triples, RdfFormat.NTRIPLES)
print("\n".join(nt.decode().splitlines()[:5]))

reparsed = parse_ntriples(nt)
print("\nround trip preserves the triple set:", set(reparsed) == set(triples))
print("second serialization is byte-identical:", serialize_bytes(reparsed) == nt)
