"""Resolve place names and coordinates against the offline gazetteer.

Walks the running example: a report located "Izum, Kharkiv region" with
coordinates near Izyum gets a city id, its province via the admin
hierarchy, the missing postal code, and multilingual city labels.
"""

from pathlib import Path

from resilink import (
    CivilDate,
    Dataset,
    Event,
    GeoPoint,
    OverrideTable,
    alternate_names_for,
    enrich_event,
    haversine_km,
    load_gazetteer,
    lookup_city_by_name,
    postal_code_for,
    reverse_geocode,
)

GAZ = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "gazetteer"

index = load_gazetteer(GAZ / "places.tsv", GAZ / "alt_names.tsv", GAZ / "postal.tsv")
overrides = OverrideTable({"Harkiv": 706482})

izum_point = GeoPoint(49.2128, 37.2573)

print("name lookup:     ", lookup_city_by_name(index, "Izum"))
print("reverse geocode: ", reverse_geocode(index, izum_point, max_km=30.0))
print("postal code:     ", postal_code_for(index, izum_point, max_km=15.0))
print("labels:          ", alternate_names_for(index, 689558, {"en", "uk", "nl", "fr"}))
print("override:        ", lookup_city_by_name(index, "Harkiv"), "-> via table:",
      overrides.mapping.get("Harkiv"))

event = Event(
    id="demo",
    dataset=Dataset.CH,
    date=CivilDate(2022, 3, 7),
    point=izum_point,
    description="Hospital destroyed by explosion",
    city_name="Izum",
    province_name="Kharkiv",
)
enriched = enrich_event(index, overrides, event)
print("\nafter enrichment:")
print("  city    ", enriched.city)
print("  province", enriched.province, "->", enriched.province.iri)
print("  postal  ", enriched.postal_code)
print("  labels  ", dict(enriched.city_labels))

kharkiv = GeoPoint(49.9935, 36.2304)
print(f"\nIzyum to Kharkiv: {haversine_km(izum_point, kharkiv):.1f} km")
