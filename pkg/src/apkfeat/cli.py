"""Command-line entry point: scan, extract, dict, bench.

Results go to stdout, diagnostics to stderr. Scan exit codes: 0 benign,
1 any malicious class, 2 error. A dictionary can also be supplied through
the APKFEAT_DICT environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import bench as bench_mod
from .axml import decode_axml, extract_manifest_properties
from .container import extract_raw_payload, open_apk
from .dex import extract_api_calls_multi
from .dictionary import (
    FeatureEntry,
    build_dictionary,
    load_api_universe,
    load_behavior_delta,
    load_dictionary,
    prune_api_calls,
    read_dictionary_header,
    save_dictionary,
    update_with_behaviors,
)
from .errors import ApkfeatError, DimensionMismatch
from .models import load_any_model, load_quantized_model, read_model_header
from .pipeline import ScanResult, scan_apk
from .vectorize import vector_to_text, vectorize

ENV_DICT = "APKFEAT_DICT"

EXIT_BENIGN = 0
EXIT_MALICIOUS = 1
EXIT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apkfeat")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="classify one or more APKs")
    scan.add_argument("apks", nargs="+", metavar="APK")
    scan.add_argument("--model", required=True)
    scan.add_argument("--dict", dest="dictionary", default=None)
    scan.add_argument("--quantized", action="store_true",
                      help="require an int8 model file")
    scan.add_argument("--json", action="store_true", help="one JSON object per APK")
    scan.add_argument("--jobs", type=int, default=1, metavar="N",
                      help="scan multiple APKs in parallel")

    extract = sub.add_parser("extract", help="dump features or the feature vector")
    extract.add_argument("apk")
    extract.add_argument("--dict", dest="dictionary", default=None,
                         help="emit the feature vector against this dictionary")
    extract.add_argument("--format", choices=("text", "json"), default="text")

    dct = sub.add_parser("dict", help="dictionary file operations")
    dct_sub = dct.add_subparsers(dest="dict_command", required=True)

    show = dct_sub.add_parser("show", help="print entry counts")
    show.add_argument("dictionary")

    build = dct_sub.add_parser("build", help="prune a raw corpus into a dictionary")
    build.add_argument("--api-calls", required=True,
                       help="file with one canonical API call per line")
    build.add_argument("--manifest", default=None,
                       help="file with one <kind>\\t<name> manifest property per line")
    build.add_argument("--out", required=True)
    build.add_argument("--version", default="1")

    update = dct_sub.add_parser("update", help="apply a behavior delta")
    update.add_argument("dictionary")
    update.add_argument("--delta", required=True, help="behavior delta JSON")
    update.add_argument("--universe", required=True,
                        help="corpus API universe for package expansion")
    update.add_argument("--out", required=True)

    bench = sub.add_parser("bench", help="phase-timed scan of an APK directory")
    bench.add_argument("directory")
    bench.add_argument("--model", required=True)
    bench.add_argument("--dict", dest="dictionary", default=None)
    bench.add_argument("--report", required=True, help="output CSV path")
    bench.add_argument("--quantized", action="store_true")
    bench.add_argument("--buckets", default=None,
                       help="comma-separated size buckets in MB")
    bench.add_argument("--no-warmup", action="store_true")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "scan": _cmd_scan,
        "extract": _cmd_extract,
        "dict": _cmd_dict,
        "bench": _cmd_bench,
    }[args.command]
    try:
        return handler(args)
    except (ApkfeatError, OSError) as exc:
        _error(exc)
        return EXIT_ERROR


def entrypoint() -> None:
    sys.exit(main())


def _error(exc: Exception) -> None:
    print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)


def _resolve_dict_path(args) -> str:
    path = args.dictionary or os.environ.get(ENV_DICT)
    if not path:
        raise ApkfeatError(f"no dictionary given (use --dict or ${ENV_DICT})")
    return path


def _load_model(path: str, require_quantized: bool):
    if require_quantized:
        return load_quantized_model(path)
    return load_any_model(path)


def _cmd_scan(args) -> int:
    dict_path = _resolve_dict_path(args)

    # Fail fast on a model/dictionary mismatch: two header lines, no parsing.
    spec, _quant = read_model_header(args.model)
    _version, napi, nman = read_dictionary_header(dict_path)
    if spec.input_dim != napi + nman:
        raise DimensionMismatch(
            f"model expects {spec.input_dim} features, dictionary has {napi + nman}"
        )

    model = _load_model(args.model, args.quantized)
    dictionary = load_dictionary(dict_path)

    def scan_one(apk: str):
        try:
            return scan_apk(apk, model, dictionary)
        except (ApkfeatError, OSError) as exc:
            return exc

    if args.jobs > 1 and len(args.apks) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(scan_one, args.apks))
    else:
        results = [scan_one(apk) for apk in args.apks]

    any_error = False
    any_malicious = False
    for apk, result in zip(args.apks, results):
        if isinstance(result, Exception):
            any_error = True
            _error(result)
            if args.json:
                print(json.dumps(
                    {"apk": apk, "error": {"type": type(result).__name__,
                                           "message": str(result)}},
                    sort_keys=True,
                ))
            continue
        any_malicious = any_malicious or result.is_malicious
        print(_format_result(result, as_json=args.json))

    if any_error:
        return EXIT_ERROR
    return EXIT_MALICIOUS if any_malicious else EXIT_BENIGN


def _format_result(r: ScanResult, *, as_json: bool) -> str:
    if as_json:
        return json.dumps(
            {
                "apk": r.apk,
                "architecture": r.architecture,
                "confidence": r.confidence,
                "dict_version": r.dict_version,
                "label": r.label,
                "quantized": r.quantized,
                "size_bytes": r.size_bytes,
                "timings": {
                    "extract_s": r.timings.extract_s,
                    "predict_ms": r.timings.predict_ms,
                    "total_s": r.timings.total_s,
                    "unzip_s": r.timings.unzip_s,
                },
                "verdict": r.verdict,
            },
            sort_keys=True,
        )
    t = r.timings
    return (
        f"{r.apk}: {r.verdict} confidence={r.confidence:.4f} "
        f"arch={r.architecture} dict=v{r.dict_version} "
        f"unzip={t.unzip_s:.3f}s extract={t.extract_s:.3f}s "
        f"predict={t.predict_ms:.3f}ms total={t.total_s:.3f}s"
    )


def _cmd_extract(args) -> int:
    archive = open_apk(args.apk)
    payload = extract_raw_payload(archive)
    calls = extract_api_calls_multi(payload)
    manifest = extract_manifest_properties(decode_axml(payload.manifest_bytes))

    if args.dictionary:
        dictionary = load_dictionary(args.dictionary)
        vector = vectorize(calls, manifest, dictionary)
        if args.format == "json":
            print(json.dumps(
                {
                    "bits": "".join("1" if b else "0" for b in vector.bits),
                    "dict_version": vector.dict_version,
                    "dim": vector.dimension,
                },
                sort_keys=True,
            ))
        else:
            sys.stdout.write(vector_to_text(vector))
        return 0

    if args.format == "json":
        print(json.dumps(
            {
                "api_calls": sorted(c.canonical for c in calls),
                "hardware_features": sorted(manifest.hardware_features),
                "intent_actions": sorted(manifest.intent_actions),
                "package": manifest.package_name,
                "permissions": sorted(manifest.permissions),
            },
            sort_keys=True,
        ))
    else:
        for call in sorted(c.canonical for c in calls):
            print(f"api_call\t{call}")
        for name in sorted(manifest.permissions):
            print(f"permission\t{name}")
        for name in sorted(manifest.intent_actions):
            print(f"intent_action\t{name}")
        for name in sorted(manifest.hardware_features):
            print(f"hardware_feature\t{name}")
    return 0


def _cmd_dict(args) -> int:
    if args.dict_command == "show":
        d = load_dictionary(args.dictionary)
        counts = d.kind_counts()
        print(f"api={d.api_count} manifest={d.manifest_count}")
        print(f"version={d.version} total={len(d)}")
        print(
            f"permission={counts['permission']} "
            f"intent_action={counts['intent_action']} "
            f"hardware_feature={counts['hardware_feature']}"
        )
        return 0

    if args.dict_command == "build":
        raw_calls = load_api_universe(args.api_calls)
        kept = prune_api_calls(raw_calls)
        entries = [FeatureEntry(c.canonical, "api_call", "corpus") for c in kept]
        if args.manifest:
            with open(args.manifest, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.rstrip("\n")
                    if not line or line.startswith("#"):
                        continue
                    kind, _, name = line.partition("\t")
                    if not name:
                        raise ApkfeatError(
                            f"{args.manifest}:{lineno}: expected <kind>\\t<name>"
                        )
                    entries.append(FeatureEntry(name, kind, "documentation"))
        d = build_dictionary(entries, version=args.version)
        save_dictionary(d, args.out)
        print(f"wrote {args.out}: api={d.api_count} manifest={d.manifest_count}")
        return 0

    # update
    d = load_dictionary(args.dictionary)
    delta = load_behavior_delta(args.delta)
    universe = load_api_universe(args.universe)
    updated = update_with_behaviors(d, delta, universe)
    save_dictionary(updated, args.out)
    print(
        f"wrote {args.out}: version={updated.version} "
        f"api={updated.api_count} manifest={updated.manifest_count} "
        f"(+{len(updated) - len(d)} entries)"
    )
    return 0


def _cmd_bench(args) -> int:
    dict_path = _resolve_dict_path(args)
    model = _load_model(args.model, args.quantized)
    dictionary = load_dictionary(dict_path)
    buckets = (
        tuple(int(b) for b in args.buckets.split(","))
        if args.buckets
        else bench_mod.DEFAULT_BUCKETS_MB
    )
    report = bench_mod.bench_corpus(
        args.directory, model, dictionary, buckets, warmup=not args.no_warmup
    )
    bench_mod.write_report_csv(report, args.report)

    for bucket, phases in sorted(report.aggregates().items()):
        u, e = phases["unzip_s"], phases["extract_s"]
        p, t = phases["predict_ms"], phases["total_s"]
        print(
            f"bucket={bucket}MB unzip_med={u.median:.3f}s extract_med={e.median:.3f}s "
            f"predict_med={p.median:.3f}ms total_med={t.median:.3f}s"
        )
    errors = report.error_rows()
    print(f"rows={len(report.rows)} errors={len(errors)} report={args.report}")
    for row in errors:
        print(f"error: {row.apk}: {row.error}", file=sys.stderr)
    return 0
