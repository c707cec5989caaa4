"""Command-line front end: ``hs <command> [flags]``.

Exit codes: 0 success, 1 validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from . import __version__
from .classify import audit_sample, load_lexicon, precision_estimate, read_verdicts, write_audit_plan
from .correlate import AT_LEAST_K, EXACTLY_K, CorrelationConfig, bucket_rows, bucket_table_csv
from .geo import GeoConfig
from .ingest import (
    format_timestamp,
    load_station_registry,
    parse_posts,
    parse_readings,
    serialize_errors,
    serialize_posts,
    serialize_readings,
    serialize_stations,
)
from .model import Category, Pollutant, ValidationError
from .pipeline import classified_by_station, classify_posts, correlate, train_model
from .sentinel import DEFAULT_K, DEFAULT_THRESHOLDS, advisories_jsonl, assess_readings, detect_alerts, emit_advisories, exceedances
from .store import (
    POSTS_FILE,
    READINGS_FILE,
    STATIONS_FILE,
    RunManifest,
    default_store,
    load_store,
    read_classified,
    write_classified,
)

log = logging.getLogger("humansensor")


class UsageError(Exception):
    pass


def _config(args: argparse.Namespace) -> dict:
    return {k: (str(v) if isinstance(v, (Path, Category, Pollutant)) else v) for k, v in sorted(vars(args).items()) if k != "func"}


def _geo(args) -> GeoConfig:
    return GeoConfig(radius_m=args.radius_m, mode=args.assign_mode)


def _corr(args) -> CorrelationConfig:
    if args.window_hours <= 0:
        raise UsageError("--window-hours must be positive")
    return CorrelationConfig(window_s=round(args.window_hours * 3600), bucket_mode=args.bucket_mode)


# -- commands ----------------------------------------------------------------


def cmd_ingest(args) -> int:
    out = Path(args.out or default_store())
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest("ingest", _config(args))
    for p in (args.posts, args.readings, args.stations):
        if p is not None:
            man.add_input(p)
    with man.stage("parse_posts"):
        posts, post_errors = parse_posts(args.posts, args.posts_format)
    with man.stage("parse_readings"):
        readings, reading_errors = parse_readings(args.readings)
    with man.stage("stations"):
        stations = load_station_registry(args.stations)
    (out / POSTS_FILE).write_bytes(serialize_posts(posts))
    (out / READINGS_FILE).write_bytes(serialize_readings(readings))
    (out / STATIONS_FILE).write_bytes(serialize_stations(stations))
    (out / "post_errors.csv").write_bytes(serialize_errors(post_errors))
    (out / "reading_errors.csv").write_bytes(serialize_errors(reading_errors))
    man.row_counts.update(
        posts=len(posts),
        post_errors=len(post_errors),
        readings=len(readings),
        reading_errors=len(reading_errors),
        stations=len(stations),
    )
    man.write(out)
    print(f"ingested {len(posts)} posts ({len(post_errors)} rejected), {len(readings)} readings "
          f"({len(reading_errors)} rejected), {len(stations)} stations -> {out}")
    return 0


def cmd_train(args) -> int:
    corpus = []
    with open(args.corpus, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                label = rec.get("category")
                cat = None if label in (None, "", "none", "None") else Category.parse(label)
                corpus.append((rec["text"], cat))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValidationError(f"{args.corpus} line {lineno}: {exc}") from exc
    man = RunManifest("train", _config(args))
    man.add_input(args.corpus)
    with man.stage("train"):
        bundle = train_model(corpus, args.method, alpha=args.alpha, lam=args.lam, epochs=args.epochs, seed=args.seed)
    out = Path(args.out)
    out.write_text(json.dumps(bundle, sort_keys=True) + "\n", encoding="utf-8")
    man.row_counts["documents"] = len(corpus)
    man.write(out)
    print(f"trained {args.method} model on {len(corpus)} documents -> {out}")
    return 0


def cmd_classify(args) -> int:
    if args.method == "lexicon" and args.model:
        raise UsageError("--model cannot be combined with --method lexicon")
    if args.method != "lexicon" and args.lexicon:
        raise UsageError("--lexicon only applies to --method lexicon")
    if args.method != "lexicon" and not args.model:
        raise UsageError(f"--method {args.method} requires --model (see `hs train`)")
    store_dir = Path(args.store or default_store())
    man = RunManifest("classify", _config(args))
    man.add_input(store_dir)
    with man.stage("load"):
        store = load_store(store_dir)
    lexicon = model = None
    if args.method == "lexicon":
        lexicon = load_lexicon(args.lexicon)
        if args.lexicon:
            man.add_input(args.lexicon)
    else:
        man.add_input(args.model)
        model = json.loads(Path(args.model).read_text(encoding="utf-8"))
    with man.stage("classify"):
        classified = classify_posts(store.posts, args.method, lexicon=lexicon, model=model)
    out = Path(args.out)
    write_classified(out, classified)
    man.row_counts.update(posts=len(store.posts), classified=len(classified))
    man.write(out)
    print(f"{len(classified)} of {len(store.posts)} posts classified as pollution-related ({args.method}) -> {out}")
    return 0


def _correlate_job(payload):
    store, classified, geo, cfg, k_max, cats, pols, sids = payload
    return correlate(store.posts, store.readings, store.stations, classified, geo, cfg, k_max, cats, pols, sids)


def cmd_correlate(args) -> int:
    if args.k_max < 1:
        raise UsageError("--k-max must be >= 1")
    store_dir = Path(args.store or default_store())
    man = RunManifest("correlate", _config(args))
    man.add_input(store_dir)
    man.add_input(args.classified)
    with man.stage("load"):
        store = load_store(store_dir)
        classified = read_classified(args.classified)
    known = {s.id for s in store.stations}
    if args.station and args.station not in known:
        raise ValidationError(f"unknown station {args.station!r}")
    cats = [args.category] if args.category else None
    pols = [args.pollutant] if args.pollutant else None
    station_ids = [args.station] if args.station else sorted(known)
    geo, cfg = _geo(args), _corr(args)
    with man.stage("correlate"):
        if args.jobs > 1 and len(station_ids) > 1:
            payloads = [(store, classified, geo, cfg, args.k_max, cats, pols, [sid]) for sid in station_ids]
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                parts = list(pool.map(_correlate_job, payloads))
            result = parts[0]
            for part in parts[1:]:
                result.pairs.update(part.pairs)
                result.buckets.update(part.buckets)
        else:
            result = correlate(store.posts, store.readings, store.stations, classified, geo, cfg, args.k_max, cats, pols, station_ids)

    keys = sorted(result.buckets, key=lambda k: (k[0], k[1].value, k[2].rank))
    rows = []
    for key in keys:
        rows.extend(bucket_rows(key[0], key[1].value, key[2], result.buckets[key]))
    out = Path(args.out)
    out.write_text(bucket_table_csv(rows), encoding="utf-8")
    man.row_counts.update(classified=len(classified), triples=len(keys), bucket_rows=len(rows))

    if args.pairs_out:
        with open(args.pairs_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["station", "pollutant", "category", "ts", "value", "count"])
            n = 0
            for key in keys:
                for p in result.pairs[key]:
                    writer.writerow([key[0], key[1].value, key[2].value, format_timestamp(p.reading.timestamp),
                                     repr(p.reading.value), p.counts[key[2]]])
                    n += 1
        man.row_counts["pairs"] = n

    if not args.no_figures:
        from .plotting import save_bucket_figure

        with man.stage("figures"):
            for sid, pol, cat in keys:
                limit = DEFAULT_THRESHOLDS.get(pol)
                unit = next((r.unit for r in store.readings if r.station_id == sid and r.pollutant is pol), "")
                fig_path = out.with_name(f"{out.stem}_{sid}_{pol.value}_{cat.value}.{args.figure_format}")
                save_bucket_figure(
                    fig_path,
                    result.buckets[(sid, pol, cat)],
                    title=f"{sid}: {cat.value.lower()} posts vs {pol.value}",
                    ylabel=f"{pol.value} ({unit})" if unit else pol.value,
                    limit=limit.expressed_in(unit) if limit and unit else None,
                    limit_label=f"{limit.period_s // 3600} h limit" if limit else "limit",
                    xlabel=f"{'minimum' if cfg.bucket_mode == AT_LEAST_K else 'exact'} number of posts in the next {args.window_hours:g} h",
                )
        man.row_counts["figures"] = len(keys)
    man.write(out)
    print(f"{len(rows)} bucket rows for {len(keys)} station/pollutant/category triples -> {out}")
    return 0


def cmd_alert(args) -> int:
    category = args.category
    k = args.k if args.k is not None else DEFAULT_K[category]
    if k < 1:
        raise UsageError("--k must be >= 1")
    store_dir = Path(args.store or default_store())
    man = RunManifest("alert", {**_config(args), "k_effective": k})
    man.add_input(store_dir)
    man.add_input(args.classified)
    with man.stage("load"):
        store = load_store(store_dir)
        classified = read_classified(args.classified)
    cfg = _corr(args)
    with man.stage("alert"):
        by_station = classified_by_station(store.posts, store.stations, classified, _geo(args))
        readings = store.readings
        if args.pollutant:
            readings = [r for r in readings if r.pollutant is args.pollutant]
        alerts = detect_alerts(by_station, readings, k, category, cfg)
        exceeded = exceedances(assess_readings(readings))
        records = emit_advisories(alerts, exceeded)
    out = Path(args.out)
    out.write_text(advisories_jsonl(records), encoding="utf-8")
    sev = {s: sum(1 for r in records if r.severity == s) for s in ("alarm", "watch", "info")}
    man.row_counts.update(alerts=len(alerts), exceedances=len(exceeded), advisories=len(records), **sev)
    man.write(out)
    print(f"{len(records)} advisories ({sev['alarm']} alarm, {sev['watch']} watch, {sev['info']} info) -> {out}")
    return 0


def cmd_synth(args) -> int:
    from .synth import SynthConfig, synth_generate, write_dataset

    data = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    if args.seed is not None:
        data["seed"] = args.seed
    try:
        cfg = SynthConfig.from_dict(data)
    except TypeError as exc:
        raise ValidationError(f"bad synth config: {exc}") from exc
    man = RunManifest("synth", {**_config(args), "synth": cfg.to_dict()})
    if args.config:
        man.add_input(args.config)
    with man.stage("generate"):
        ds = synth_generate(cfg, lexicon=load_lexicon(args.lexicon) if args.lexicon else None)
    out = Path(args.out)
    with man.stage("write"):
        write_dataset(ds, out)
    man.row_counts.update(posts=len(ds.posts), readings=len(ds.readings), stations=len(ds.stations))
    man.write(out)
    print(f"synthesised {len(ds.posts)} posts and {len(ds.readings)} readings (seed {cfg.seed}) -> {out}")
    return 0


def cmd_audit(args) -> int:
    if args.verdicts and args.classified:
        raise UsageError("give either --classified (to sample) or --verdicts (to score), not both")
    if not args.verdicts and not args.classified:
        raise UsageError("one of --classified or --verdicts is required")
    man = RunManifest("audit", _config(args))
    out = Path(args.out)
    if args.verdicts:
        for v in args.verdicts:
            man.add_input(v)
        verdicts = read_verdicts(args.verdicts)
        precision = precision_estimate(verdicts)
        report = {"verdicts": len(verdicts), "correct": sum(verdicts), "precision": precision}
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        man.row_counts["verdicts"] = len(verdicts)
        man.write(out)
        print(f"precision {precision:.4f} ({report['correct']}/{len(verdicts)})")
        return 0
    man.add_input(args.classified)
    classified = read_classified(args.classified)
    texts = None
    if args.store or default_store().is_dir():
        store_dir = Path(args.store or default_store())
        if (store_dir / POSTS_FILE).is_file():
            posts, _ = parse_posts(store_dir / POSTS_FILE)
            texts = {p.id: p.text for p in posts}
    try:
        plan = audit_sample(classified, n=args.n, subsets=args.subsets, seed=args.seed)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    paths = write_audit_plan(plan, out, texts)
    man.row_counts.update(classified=len(classified), sampled=args.n, files=len(paths))
    man.write(out)
    print(f"wrote {len(paths)} audit files of {args.n // args.subsets} posts -> {out}")
    return 0


# -- parser ------------------------------------------------------------------


def _add_geo(p):
    p.add_argument("--radius-m", type=float, default=5000.0, help="station radius in metres (default 5000)")
    p.add_argument("--assign-mode", choices=("all", "nearest"), default="all",
                   help="assign a post to every station in range, or only the nearest")


def _add_window(p):
    p.add_argument("--window-hours", type=float, default=2.0, help="forward window T in hours (default 2)")
    p.add_argument("--bucket-mode", choices=(AT_LEAST_K, EXACTLY_K), default=AT_LEAST_K)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate posts/readings/stations into a canonical store")
    p.add_argument("--posts", required=True)
    p.add_argument("--posts-format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--readings", required=True)
    p.add_argument("--stations", help="station registry CSV (default: built-in registry)")
    p.add_argument("--out", help="store directory (default $HS_DATA_DIR or ./hs_data)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train an nb or svm model from a labelled JSONL corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--method", choices=("nb", "svm"), required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--lam", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="tag stored posts with sentinel categories")
    p.add_argument("--store")
    p.add_argument("--method", choices=("lexicon", "nb", "svm"), default="lexicon")
    p.add_argument("--lexicon", help="category,term CSV (default: built-in dictionary)")
    p.add_argument("--model", help="model JSON from `hs train`")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("correlate", help="bucket table (and box plots) of readings vs post counts")
    p.add_argument("--store")
    p.add_argument("--classified", required=True)
    p.add_argument("--category", type=Category.parse)
    p.add_argument("--pollutant", type=Pollutant.parse)
    p.add_argument("--station")
    p.add_argument("--k-max", type=int, default=10)
    _add_window(p)
    _add_geo(p)
    p.add_argument("--pairs-out", help="also write per-reading window counts to this CSV")
    p.add_argument("--no-figures", action="store_true", help="skip rendering box-plot images")
    p.add_argument("--figure-format", choices=("png", "svg", "pdf"), default="png")
    p.add_argument("--jobs", type=int, default=1, help="worker processes across stations")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("alert", help="post-volume alerts and the advisory feed")
    p.add_argument("--store")
    p.add_argument("--classified", required=True)
    p.add_argument("--category", type=Category.parse, default="Weather")
    p.add_argument("--k", type=int, help="minimum posts per window (default 10 weather, 5 otherwise)")
    p.add_argument("--pollutant", type=Pollutant.parse)
    _add_window(p)
    _add_geo(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_alert)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset with ground truth")
    p.add_argument("--config", help="JSON SynthConfig overrides")
    p.add_argument("--lexicon")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("audit", help="draw an annotation plan, or score returned verdicts")
    p.add_argument("--classified")
    p.add_argument("--store", help="store to pull post texts from")
    p.add_argument("--verdicts", nargs="+")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--subsets", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hs {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"hs {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
