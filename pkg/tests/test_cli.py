from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from resilink.cli import run_subcommand
from resilink.model import Dataset, events_from_json
from resilink.rdf import parse_ntriples
from tests.httpmock import ScriptedHandler, start_server, stop_server

PIPE = Path(__file__).parent / "fixtures" / "pipeline"


def _run(*argv) -> int:
    return run_subcommand([str(a) for a in argv])


@pytest.fixture()
def workdir(tmp_path) -> Path:
    return tmp_path


class TestUsageErrors:
    def test_unknown_subcommand(self, capsys):
        assert _run("frobnicate") == 2

    def test_no_arguments(self):
        assert _run() == 2

    def test_missing_required_flag(self):
        assert _run("ingest", "--dataset", "eor") == 2

    def test_linkcheck_refuses_offline(self, workdir):
        code = _run(
            "--offline", "linkcheck",
            "--input", PIPE / "eor.json",
            "--out-csv", workdir / "x.csv",
        )
        assert code == 2

    def test_report_missing_output(self, workdir):
        assert _run("report", "uc2", "--input", workdir / "missing.nt") == 2


class TestDataErrors:
    def test_missing_input_file(self, workdir):
        code = _run(
            "ingest", "--dataset", "eor", "--format", "json",
            "--input", workdir / "nope.json",
            "--config", PIPE / "config.json",
            "--out", workdir / "out.json",
        )
        assert code == 1

    def test_malformed_source(self, workdir):
        bad = workdir / "bad.json"
        bad.write_text("[{]")
        code = _run(
            "ingest", "--dataset", "eor", "--format", "json",
            "--input", bad,
            "--config", PIPE / "config.json",
            "--out", workdir / "out.json",
        )
        assert code == 1

    def test_config_with_dangling_path(self, workdir):
        cfg = json.loads((PIPE / "config.json").read_text())
        cfg["overrides"] = "does-not-exist.json"
        bad = workdir / "config.json"
        bad.write_text(json.dumps(cfg))
        code = _run(
            "ingest", "--dataset", "eor", "--format", "json",
            "--input", PIPE / "eor.json",
            "--config", bad,
            "--out", workdir / "out.json",
        )
        assert code == 1


class TestStageCommands:
    def test_ingest_writes_canonical_json(self, workdir):
        out = workdir / "eor.events.json"
        code = _run(
            "ingest", "--dataset", "eor", "--format", "json",
            "--input", PIPE / "eor.json",
            "--config", PIPE / "config.json",
            "--out", out,
        )
        assert code == 0
        events = events_from_json(out.read_bytes())
        assert len(events) == 50
        assert all(e.dataset is Dataset.EOR for e in events)

    def test_ingest_reruns_byte_identical(self, workdir):
        out = workdir / "a.json"
        args = (
            "ingest", "--dataset", "ch", "--format", "csv",
            "--input", PIPE / "ch.csv",
            "--config", PIPE / "config.json",
            "--out", out,
        )
        assert _run(*args) == 0
        first = out.read_bytes()
        assert _run(*args) == 0
        assert out.read_bytes() == first

    def test_full_pipeline_and_reports(self, workdir):
        outdir = workdir / "out"
        code = _run(
            "pipeline",
            "--config", PIPE / "config.json",
            "--eor-input", PIPE / "eor.json", "--eor-format", "json",
            "--ch-input", PIPE / "ch.csv", "--ch-format", "csv",
            "--outdir", outdir,
        )
        assert code == 0

        counts = json.loads((outdir / "counts.json").read_text())
        assert counts == {"a": 50, "b": 20, "identical": 5, "near_distinct": 2, "integrated": 65}

        with (outdir / "pairs.csv").open() as fp:
            rows = list(csv.DictReader(fp))
        assert sum(1 for r in rows if r["verdict"] == "Identical") == 5
        assert sum(1 for r in rows if r["verdict"] == "NearDistinct") == 2

        integrated = outdir / "integrated.nt"
        triples = parse_ntriples(integrated.read_bytes())
        assert triples

        # uc2 over the integrated file
        uc2 = workdir / "uc2.csv"
        assert _run("report", "uc2", "--input", integrated, "--keyword", "school", "--out", uc2) == 0
        with uc2.open() as fp:
            buckets = list(csv.DictReader(fp))
        assert len(buckets) == 15
        march = next(b for b in buckets if b["month"] == "2022-03")
        assert int(march["count"]) >= 1

        # uc1 with inclusive window and city filter
        uc1_nt, uc1_geo = workdir / "uc1.nt", workdir / "uc1.geojson"
        assert _run(
            "report", "uc1", "--input", integrated,
            "--start", "2022-10-01", "--end", "2023-02-28",
            "--city-geoname-id", "706448",
            "--out-nt", uc1_nt, "--out-geojson", uc1_geo,
        ) == 0
        geo = json.loads(uc1_geo.read_text())
        assert geo["type"] == "FeatureCollection"
        assert parse_ntriples(uc1_nt.read_bytes())

        # uc3 multilingual top-5
        uc3 = workdir / "uc3.csv"
        assert _run("report", "uc3", "--input", integrated, "--langs", "en,uk,nl,fr",
                    "--top", "5", "--out", uc3) == 0
        with uc3.open() as fp:
            rows = list(csv.reader(fp))
        assert rows[0] == ["en", "uk", "nl", "fr", "occurrences"]
        assert 1 <= len(rows) - 1 <= 5

        # uc4 monthly timeline
        uc4 = workdir / "uc4.csv"
        assert _run("report", "uc4", "--input", integrated,
                    "--months", "2022-03,2022-04", "--top", "3", "--out", uc4) == 0
        with uc4.open() as fp:
            rows = list(csv.DictReader(fp))
        assert all(r["month"] in ("2022-03", "2022-04") for r in rows)

        # uc5 against an external deaths file
        deaths = workdir / "deaths.csv"
        deaths.write_text("month,deaths\n2022-03,4\n2022-04,2\n")
        uc5 = workdir / "uc5.csv"
        assert _run("report", "uc5", "--input", integrated, "--deaths", deaths,
                    "--months", "2022-03,2022-04", "--out", uc5) == 0
        text = uc5.read_text()
        assert text.startswith("#")

        # uc6 shelter gap
        shelters = workdir / "shelters.csv"
        shelters.write_text("name,lat,lon\ncentral,49.9935,36.2304\n")
        uc6_geo, uc6_csv = workdir / "uc6.geojson", workdir / "uc6.csv"
        assert _run("report", "uc6", "--input", integrated, "--shelters", shelters,
                    "--out-geojson", uc6_geo, "--out", uc6_csv) == 0
        collection = json.loads(uc6_geo.read_text())
        with uc6_csv.open() as fp:
            cells = list(csv.DictReader(fp))
        assert sum(int(c["count"]) for c in cells) == len(collection["features"])

    def test_convert_turtle(self, workdir):
        events_file = workdir / "ev.json"
        assert _run(
            "ingest", "--dataset", "eor", "--format", "json",
            "--input", PIPE / "eor.json",
            "--config", PIPE / "config.json",
            "--out", events_file,
        ) == 0
        out = workdir / "events.ttl"
        assert _run("convert", "--input", events_file, "--out", out,
                    "--rdf-format", "turtle") == 0
        assert out.read_text().startswith("@prefix")

    def test_enrich_online_fallback(self, workdir, gaz_index):
        from tests.httpmock import GeoNamesHandler

        server = start_server(GeoNamesHandler, index=gaz_index)
        try:
            gazdir = PIPE.parent / "gazetteer"
            cfg = {
                "adapters": json.loads((PIPE / "config.json").read_text())["adapters"],
                "gazetteer": {
                    "places": str(gazdir / "places.tsv"),
                    "alternate_names": str(gazdir / "alt_names.tsv"),
                    "postal_codes": str(gazdir / "postal.tsv"),
                },
                "online": {
                    "base_url": f"http://127.0.0.1:{server.server_address[1]}",
                    "username": "demo",
                    "rate_per_sec": 1000,
                },
            }
            cfg_path = workdir / "config.json"
            cfg_path.write_text(json.dumps(cfg))

            # far from every offline entry: the offline pass resolves nothing
            events_file = workdir / "far.json"
            events_file.write_text(json.dumps([
                {"id": "far-1", "dataset": "eor", "date": "2022-03-07",
                 "lat": 44.0, "lon": 33.0}
            ]))

            out_offline = workdir / "offline.json"
            assert _run("--offline", "enrich", "--input", events_file,
                        "--config", cfg_path, "--out", out_offline) == 0
            (ev,) = events_from_json(out_offline.read_bytes())
            assert ev.city is None and ev.postal_code is None

            out_online = workdir / "online.json"
            assert _run("enrich", "--input", events_file,
                        "--config", cfg_path, "--out", out_online) == 0
            (ev,) = events_from_json(out_online.read_bytes())
            assert ev.city is not None
            assert ev.postal_code is not None
        finally:
            stop_server(server)

    def test_linkcheck_against_mock(self, workdir):
        server = start_server(ScriptedHandler)
        try:
            events_file = workdir / "ev.json"
            assert _run(
                "ingest", "--dataset", "eor", "--format", "json",
                "--input", PIPE / "eor.json",
                "--config", PIPE / "config.json",
                "--out", events_file,
            ) == 0
            out_csv, out_json = workdir / "links.csv", workdir / "links.json"
            code = _run(
                "linkcheck", "--input", events_file,
                "--config", PIPE / "config.json",
                "--base-override", f"http://127.0.0.1:{server.server_address[1]}",
                "--concurrency", "8",
                "--out-csv", out_csv, "--out-json", out_json,
            )
            assert code == 0
            summary = json.loads(out_json.read_text())
            assert "eor" in summary
            assert summary["eor"]["total_urls"] == 50
        finally:
            stop_server(server)
