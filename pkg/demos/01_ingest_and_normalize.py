"""Parse the two bundled sample datasets and normalize them into events.

Shows the adapter-config mapping, the location-string cleanup, and the
tolerant normalization contract (bad records are collected, not fatal).
Run from anywhere: python demos/01_ingest_and_normalize.py
"""

import json
from pathlib import Path

from resilink import (
    AdapterConfig,
    Dataset,
    SourceFormat,
    clean_location_string,
    events_to_json,
    normalize_records,
    parse_dataset,
    split_location_parts,
)

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "pipeline"

config = json.loads((FIXTURES / "config.json").read_text())
eor_cfg = AdapterConfig.from_dict(config["adapters"]["eor"])
ch_cfg = AdapterConfig.from_dict(config["adapters"]["ch"])

# Source location strings arrive with inconsistent formatting.
for messy in ("\r\nZhytomyr", "  Merefa,   Kharkiv ", "Izum, Kharkiv region"):
    cleaned = clean_location_string(messy)
    print(f"{messy!r:32} -> {cleaned!r} -> parts {split_location_parts(cleaned)}")

records = parse_dataset(
    (FIXTURES / "eor.json").read_bytes(), Dataset.EOR, SourceFormat.JSON, eor_cfg
)
events, rejected = normalize_records(records, eor_cfg)
print(f"\nEoR: {len(records)} records -> {len(events)} events, {len(rejected)} rejected")

records = parse_dataset(
    (FIXTURES / "ch.csv").read_bytes(), Dataset.CH, SourceFormat.CSV, ch_cfg
)
ch_events, rejected = normalize_records(records, ch_cfg)
print(f"CH:  {len(records)} records -> {len(ch_events)} events, {len(rejected)} rejected")

sample = ch_events[3]
print("\nA CH event (source file has no stable ids, so the id is a content hash):")
print(events_to_json([sample]))
