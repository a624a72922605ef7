"""Command-line pipeline orchestration.

Subcommands mirror the pipeline stages: ingest, enrich, convert,
integrate, report uc1..uc6, linkcheck, plus a pipeline meta-command that
chains ingest -> enrich -> integrate. Stages communicate only through the
documented file formats and all outputs are written atomically, so any
stage can be re-run in isolation. Exit codes: 0 success, 1 data error,
2 usage error.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import analytics, gazetteer, ingest, integration, linkcheck, rdf
from .geonames_api import GeoNamesClient
from .model import (
    Dataset,
    GazetteerRef,
    ResilinkError,
    events_from_json,
    events_to_json,
    parse_civil_date,
)

log = logging.getLogger("resilink")

USERNAME_ENV = "GEONAMES_USERNAME"


class ConfigError(ResilinkError):
    pass


@dataclass
class OnlineSettings:
    base_url: str
    username: str | None = None
    rate_per_sec: float = 1.0


@dataclass
class PipelineConfig:
    """Everything the stages need, loaded from one JSON document."""

    adapters: dict[Dataset, ingest.AdapterConfig] = field(default_factory=dict)
    gazetteer_places: Path | None = None
    gazetteer_alt_names: Path | None = None
    gazetteer_postal: Path | None = None
    overrides_path: Path | None = None
    match: integration.MatchConfig = field(default_factory=integration.MatchConfig)
    enrichment: gazetteer.EnrichmentConfig = field(default_factory=gazetteer.EnrichmentConfig)
    months: tuple[str, ...] = analytics.DEFAULT_MONTHS
    uc6_radius_km: float = 1.0
    grid_deg: float = 0.005
    online: OnlineSettings | None = None
    linkcheck_timeout_s: float = 10.0
    linkcheck_concurrency: int = 8
    linkcheck_politeness_s: float = 0.2

    @classmethod
    def load(cls, path: str | Path) -> PipelineConfig:
        base = Path(path).parent
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

        adapters = {}
        for name, mapping in raw.get("adapters", {}).items():
            try:
                adapters[Dataset(name)] = ingest.AdapterConfig.from_dict(mapping)
            except ValueError as exc:
                raise ConfigError(f"adapter {name!r}: {exc}") from exc

        gaz = raw.get("gazetteer", {})
        cfg = cls(
            adapters=adapters,
            gazetteer_places=_resolve_path(gaz.get("places"), base, "gazetteer.places"),
            gazetteer_alt_names=_resolve_path(
                gaz.get("alternate_names"), base, "gazetteer.alternate_names"
            ),
            gazetteer_postal=_resolve_path(
                gaz.get("postal_codes"), base, "gazetteer.postal_codes"
            ),
            overrides_path=_resolve_path(raw.get("overrides"), base, "overrides"),
        )
        if "match" in raw:
            try:
                cfg.match = integration.MatchConfig.from_dict(raw["match"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"match config: {exc}") from exc
        enrich_raw = raw.get("enrichment", {})
        try:
            cfg.enrichment = gazetteer.EnrichmentConfig(
                languages=tuple(enrich_raw.get("languages", ("en", "uk", "nl", "fr"))),
                reverse_max_km=float(enrich_raw.get("reverse_max_km", 30.0)),
                postal_max_km=float(enrich_raw.get("postal_max_km", 15.0)),
            )
        except ValueError as exc:
            raise ConfigError(f"enrichment config: {exc}") from exc
        analytics_raw = raw.get("analytics", {})
        cfg.months = tuple(analytics_raw.get("months", analytics.DEFAULT_MONTHS))
        cfg.uc6_radius_km = float(analytics_raw.get("uc6_radius_km", 1.0))
        cfg.grid_deg = float(analytics_raw.get("grid_deg", 0.005))
        online_raw = raw.get("online")
        if online_raw:
            cfg.online = OnlineSettings(
                base_url=online_raw["base_url"],
                username=online_raw.get("username"),
                rate_per_sec=float(online_raw.get("rate_per_sec", 1.0)),
            )
        lc = raw.get("linkcheck", {})
        cfg.linkcheck_timeout_s = float(lc.get("timeout_s", 10.0))
        cfg.linkcheck_concurrency = int(lc.get("concurrency", 8))
        cfg.linkcheck_politeness_s = float(lc.get("politeness_s", 0.2))
        return cfg

    def load_index(self) -> gazetteer.GazetteerIndex:
        for name, p in (
            ("places", self.gazetteer_places),
            ("alternate_names", self.gazetteer_alt_names),
            ("postal_codes", self.gazetteer_postal),
        ):
            if p is None:
                raise ConfigError(f"config is missing gazetteer.{name}")
        return gazetteer.load_gazetteer(
            self.gazetteer_places, self.gazetteer_alt_names, self.gazetteer_postal
        )

    def load_overrides(self) -> gazetteer.OverrideTable:
        if self.overrides_path is None:
            return gazetteer.EMPTY_OVERRIDES
        return gazetteer.OverrideTable.from_json(self.overrides_path.read_text(encoding="utf-8"))


def _resolve_path(value, base: Path, label: str) -> Path | None:
    """Resolve a config path relative to the config file and require it to exist."""
    if value is None:
        return None
    p = Path(value)
    if not p.is_absolute():
        p = base / p
    if not p.exists():
        raise ConfigError(f"config path for {label} does not exist: {p}")
    return p


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fp:
            fp.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write_bytes(path, text.encode("utf-8"))


def _read_events(path: str) -> list:
    return events_from_json(Path(path).read_bytes())


def _write_events(path: str, events) -> None:
    _atomic_write_text(Path(path), events_to_json(events) + "\n")


def _rdf_format(name: str) -> rdf.RdfFormat:
    return rdf.RdfFormat.TURTLE if name == "turtle" else rdf.RdfFormat.NTRIPLES


# ---------------------------------------------------------------------------
# Stage implementations

def _cmd_ingest(args, cfg: PipelineConfig) -> int:
    dataset = Dataset(args.dataset)
    if dataset not in cfg.adapters:
        raise ConfigError(f"config has no adapter for dataset {dataset.value!r}")
    data = Path(args.input).read_bytes()
    records = ingest.parse_dataset(
        data, dataset, ingest.SourceFormat(args.format), cfg.adapters[dataset]
    )
    events, rejected = ingest.normalize_records(records, cfg.adapters[dataset])
    for err in rejected:
        log.warning("rejected %s", err)
    log.info("ingest %s: %d events, %d rejected", dataset.value, len(events), len(rejected))
    _write_events(args.out, events)
    return 0


def _online_fill(events, cfg: PipelineConfig):
    """Second enrichment pass through the online service for leftovers."""
    settings = cfg.online
    username = settings.username or os.environ.get(USERNAME_ENV)
    if not username:
        raise ConfigError(
            f"online enrichment needs an account name (config online.username or ${USERNAME_ENV})"
        )
    client = GeoNamesClient(
        base_url=settings.base_url, username=username, rate_per_sec=settings.rate_per_sec
    )
    out = []
    for ev in events:
        if ev.city is None:
            entry = client.find_nearby_place(ev.point.latitude, ev.point.longitude)
            if entry is not None and entry.feature_class == "P":
                ev = replace(ev, city=GazetteerRef(entry.geoname_id, entry.name), city_name=None)
        if ev.postal_code is None:
            postal = client.find_nearby_postal(ev.point.latitude, ev.point.longitude)
            if postal is not None:
                ev = replace(ev, postal_code=postal.postal_code)
        out.append(ev)
    return out


def _cmd_enrich(args, cfg: PipelineConfig) -> int:
    events = _read_events(args.input)
    index = cfg.load_index()
    overrides = cfg.load_overrides()
    enriched, stats = gazetteer.enrich_events(index, overrides, events, cfg.enrichment)
    if cfg.online is not None and not args.offline:
        enriched = _online_fill(enriched, cfg)
    log.info(
        "enrich: %d events; resolved %s; unresolved %s",
        stats.total, stats.resolved, stats.unresolved,
    )
    _write_events(args.out, enriched)
    return 0


def _cmd_convert(args, cfg: PipelineConfig) -> int:
    events = _read_events(args.input)
    triples = []
    for ev in events:
        triples.extend(rdf.emit_event_triples(ev))
    _atomic_write_bytes(Path(args.out), rdf.serialize_bytes(triples, _rdf_format(args.rdf_format)))
    return 0


def _cmd_integrate(args, cfg: PipelineConfig) -> int:
    a_events = _read_events(args.eor)
    b_events = _read_events(args.ch)
    result = integration.integrate(a_events, b_events, cfg.match)
    c = result.counts
    log.info(
        "integrate: |A|=%d |B|=%d identical=%d near-distinct=%d integrated=%d",
        c.a, c.b, c.identical, c.near_distinct, c.integrated,
    )
    triples = []
    for ev in a_events + b_events:
        triples.extend(rdf.emit_event_triples(ev))
    for agg in result.aggregates:
        triples.extend(rdf.emit_aggregate_triples(agg))
    _atomic_write_bytes(Path(args.out), rdf.serialize_bytes(triples, _rdf_format(args.rdf_format)))
    if args.pairs:
        buf = io.StringIO()
        integration.write_pair_report(result.pairs, buf)
        _atomic_write_text(Path(args.pairs), buf.getvalue())
    if args.counts:
        counts_doc = {
            "a": c.a, "b": c.b, "identical": c.identical,
            "near_distinct": c.near_distinct, "integrated": c.integrated,
        }
        _atomic_write_text(Path(args.counts), json.dumps(counts_doc, indent=2) + "\n")
    return 0


def _load_dataset(path: str) -> analytics.IntegratedDataset:
    triples = rdf.parse_ntriples(Path(path).read_bytes())
    return analytics.IntegratedDataset.from_triples(triples)


def _cmd_report(args, cfg: PipelineConfig) -> int:
    ds = _load_dataset(args.input)
    uc = args.use_case
    if uc == "uc1":
        city = GazetteerRef(args.city_geoname_id) if args.city_geoname_id else None
        start, end = parse_civil_date(args.start), parse_civil_date(args.end)
        points = analytics.uc1_event_points(ds, city, start, end)
        if args.out_nt:
            triples = analytics.uc1_wkt_triples(ds, city, start, end)
            _atomic_write_bytes(Path(args.out_nt), rdf.serialize_bytes(triples))
        if args.out_geojson:
            doc = analytics.points_feature_collection(points)
            _atomic_write_text(Path(args.out_geojson), json.dumps(doc, indent=2) + "\n")
    elif uc == "uc2":
        months = args.months.split(",") if args.months else list(cfg.months)
        buckets = analytics.uc2_monthly_keyword_series(ds, args.keyword, months)
        buf = io.StringIO()
        analytics.write_month_csv(buckets, buf)
        _atomic_write_text(Path(args.out), buf.getvalue())
    elif uc == "uc3":
        langs = args.langs.split(",")
        rows = analytics.uc3_multilingual_city_report(ds, langs, args.top)
        buf = io.StringIO()
        analytics.write_city_names_csv(rows, langs, buf)
        _atomic_write_text(Path(args.out), buf.getvalue())
    elif uc == "uc4":
        buf = io.StringIO()
        if args.months:
            timeline = analytics.uc4_monthly_timeline(ds, args.months.split(","), args.top)
            analytics.write_region_timeline_csv(timeline, buf)
        else:
            start, end = parse_civil_date(args.start), parse_civil_date(args.end)
            rows = analytics.uc4_top_regions(ds, start, end, args.top)
            analytics.write_region_csv(rows, buf)
        _atomic_write_text(Path(args.out), buf.getvalue())
    elif uc == "uc5":
        months = args.months.split(",") if args.months else list(cfg.months)
        attacks = analytics.monthly_event_counts(ds, months)
        with open(args.deaths, encoding="utf-8") as fp:
            deaths = analytics.read_deaths_csv(fp)
        rows = analytics.uc5_ratio_series(attacks, deaths)
        buf = io.StringIO()
        analytics.write_ratio_csv(rows, buf)
        _atomic_write_text(Path(args.out), buf.getvalue())
    elif uc == "uc6":
        with open(args.shelters, encoding="utf-8") as fp:
            shelters = analytics.load_shelters(fp)
        collection, grid = analytics.uc6_shelter_gap(
            ds, shelters, radius_km=args.radius_km or cfg.uc6_radius_km, grid_deg=cfg.grid_deg
        )
        if args.out_geojson:
            _atomic_write_text(Path(args.out_geojson), json.dumps(collection, indent=2) + "\n")
        if args.out:
            buf = io.StringIO()
            analytics.write_grid_csv(grid, buf)
            _atomic_write_text(Path(args.out), buf.getvalue())
    else:  # unreachable through argparse
        raise ConfigError(f"unknown use case {uc!r}")
    return 0


def _cmd_linkcheck(args, cfg: PipelineConfig) -> int:
    events = []
    for path in args.input:
        events.extend(_read_events(path))
    checker = linkcheck.LinkChecker(
        timeout_s=args.timeout if args.timeout is not None else cfg.linkcheck_timeout_s,
        politeness_s=cfg.linkcheck_politeness_s,
        base_override=args.base_override,
    )
    report = linkcheck.link_report(
        events,
        concurrency=args.concurrency or cfg.linkcheck_concurrency,
        checker=checker,
    )
    if args.out_csv:
        buf = io.StringIO()
        linkcheck.write_link_csv(report, buf)
        _atomic_write_text(Path(args.out_csv), buf.getvalue())
    if args.out_json:
        _atomic_write_text(
            Path(args.out_json), json.dumps(linkcheck.summary_dict(report), indent=2) + "\n"
        )
    return 0


def _cmd_pipeline(args, cfg: PipelineConfig) -> int:
    outdir = Path(args.outdir)
    stage = argparse.Namespace

    for dataset, path, fmt in (
        (Dataset.EOR, args.eor_input, args.eor_format),
        (Dataset.CH, args.ch_input, args.ch_format),
    ):
        ns = stage(dataset=dataset.value, format=fmt, input=path,
                   out=str(outdir / f"{dataset.value}.events.json"))
        _cmd_ingest(ns, cfg)
        ns = stage(input=str(outdir / f"{dataset.value}.events.json"),
                   out=str(outdir / f"{dataset.value}.enriched.json"),
                   offline=args.offline)
        _cmd_enrich(ns, cfg)

    ns = stage(
        eor=str(outdir / "eor.enriched.json"),
        ch=str(outdir / "ch.enriched.json"),
        out=str(outdir / "integrated.nt"),
        pairs=str(outdir / "pairs.csv"),
        counts=str(outdir / "counts.json"),
        rdf_format="ntriples",
    )
    return _cmd_integrate(ns, cfg)


# ---------------------------------------------------------------------------
# Argument grammar

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resilink",
        description="Damage-event linked-data pipeline: ingest, enrich, convert, integrate, report.",
    )
    parser.add_argument("--offline", action="store_true",
                        help="forbid all network use (linkcheck refuses to run)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a source file into canonical event JSON")
    p.add_argument("--dataset", required=True, choices=[d.value for d in Dataset])
    p.add_argument("--format", required=True, choices=[f.value for f in ingest.SourceFormat])
    p.add_argument("--input", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("enrich", help="resolve places, postal codes and labels")
    p.add_argument("--input", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("convert", help="emit event triples as N-Triples or Turtle")
    p.add_argument("--input", required=True)
    p.add_argument("--config", required=False)
    p.add_argument("--out", required=True)
    p.add_argument("--rdf-format", default="ntriples", choices=["ntriples", "turtle"])

    p = sub.add_parser("integrate", help="detect cross-dataset duplicates and mint aggregates")
    p.add_argument("--eor", required=True, help="enriched EoR event JSON")
    p.add_argument("--ch", required=True, help="enriched CH event JSON")
    p.add_argument("--config", required=False)
    p.add_argument("--out", required=True, help="integrated dataset (.nt/.ttl)")
    p.add_argument("--pairs", help="pair report CSV")
    p.add_argument("--counts", help="counts summary JSON")
    p.add_argument("--rdf-format", default="ntriples", choices=["ntriples", "turtle"])

    p = sub.add_parser("report", help="run one use-case report over an integrated dataset")
    p.add_argument("use_case", choices=["uc1", "uc2", "uc3", "uc4", "uc5", "uc6"])
    p.add_argument("--input", required=True, help="integrated dataset .nt")
    p.add_argument("--config", required=False)
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--months", help="comma-separated YYYY-MM list")
    p.add_argument("--keyword")
    p.add_argument("--langs", default="en,uk,nl,fr")
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--city-geoname-id", type=int)
    p.add_argument("--deaths", help="external month,deaths CSV (uc5)")
    p.add_argument("--shelters", help="shelter name,lat,lon CSV (uc6)")
    p.add_argument("--radius-km", type=float)
    p.add_argument("--out")
    p.add_argument("--out-nt")
    p.add_argument("--out-geojson")

    p = sub.add_parser("linkcheck", help="validate source URLs against the live web or a mock")
    p.add_argument("--input", required=True, action="append",
                   help="canonical event JSON (repeatable)")
    p.add_argument("--config", required=False)
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.add_argument("--concurrency", type=int)
    p.add_argument("--timeout", type=float)
    p.add_argument("--base-override", help="redirect all traffic to this base URL (testing)")

    p = sub.add_parser("pipeline", help="ingest + enrich + integrate in one run")
    p.add_argument("--config", required=True)
    p.add_argument("--eor-input", required=True)
    p.add_argument("--eor-format", default="json", choices=["json", "csv"])
    p.add_argument("--ch-input", required=True)
    p.add_argument("--ch-format", default="json", choices=["json", "csv"])
    p.add_argument("--outdir", required=True)

    return parser


_REQUIRED_REPORT_ARGS = {
    "uc1": ("start", "end"),
    "uc2": ("keyword", "out"),
    "uc3": ("out",),
    "uc4": ("out",),
    "uc5": ("deaths", "out"),
    "uc6": ("shelters",),
}


def run_subcommand(argv: list[str]) -> int:
    """Execute exactly one pipeline stage; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    if args.command == "linkcheck" and args.offline:
        print("resilink: linkcheck refuses to run with --offline", file=sys.stderr)
        return 2

    if args.command == "report":
        missing = [
            f"--{name.replace('_', '-')}"
            for name in _REQUIRED_REPORT_ARGS[args.use_case]
            if getattr(args, name) in (None, "")
        ]
        if args.use_case == "uc1" and not args.out_nt and not args.out_geojson:
            missing.append("--out-nt or --out-geojson")
        if args.use_case == "uc4" and not args.months and not (args.start and args.end):
            missing.append("--months or --start/--end")
        if args.use_case == "uc6" and not args.out and not args.out_geojson:
            missing.append("--out or --out-geojson")
        if missing:
            print(
                f"resilink report {args.use_case}: missing {', '.join(missing)}",
                file=sys.stderr,
            )
            return 2

    try:
        cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
        handler = {
            "ingest": _cmd_ingest,
            "enrich": _cmd_enrich,
            "convert": _cmd_convert,
            "integrate": _cmd_integrate,
            "report": _cmd_report,
            "linkcheck": _cmd_linkcheck,
            "pipeline": _cmd_pipeline,
        }[args.command]
        return handler(args, cfg)
    except (ResilinkError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"resilink: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_subcommand(sys.argv[1:]))


if __name__ == "__main__":
    main()
