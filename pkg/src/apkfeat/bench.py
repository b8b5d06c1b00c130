"""Phase-timed benchmark harness over a directory of APKs.

Each file runs through the full scan pipeline on a monotonic clock; rows are
bucketed by nearest configured size and aggregated per phase. Per-file
failures become error rows, never abort the run. The harness itself is
single-threaded so the timings do not contend.

CSV schema (one row per input, LF, floats in repr form):

    apk,size_bytes,bucket_mb,unzip_s,extract_s,predict_ms,total_s,label,confidence,error
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path

from .dictionary import FeatureDictionary
from .errors import ApkfeatError
from .models import Model, QuantizedModel
from .pipeline import scan_apk
from .synth import MB

DEFAULT_BUCKETS_MB = (5, 10, 20, 30, 40, 50)
PHASES = ("unzip_s", "extract_s", "predict_ms", "total_s")

CSV_HEADER = (
    "apk",
    "size_bytes",
    "bucket_mb",
    "unzip_s",
    "extract_s",
    "predict_ms",
    "total_s",
    "label",
    "confidence",
    "error",
)


@dataclass(frozen=True)
class BenchRow:
    apk: str
    size_bytes: int
    bucket_mb: int
    unzip_s: float | None
    extract_s: float | None
    predict_ms: float | None
    total_s: float | None
    label: str | None
    confidence: float | None
    error: str | None


@dataclass(frozen=True)
class PhaseStats:
    mean: float
    median: float
    p95: float


@dataclass(frozen=True)
class TimingReport:
    rows: tuple[BenchRow, ...]
    buckets: tuple[int, ...]

    def aggregates(self) -> dict[int, dict[str, PhaseStats]]:
        """bucket_mb -> phase -> mean/median/p95 over non-error rows."""
        out: dict[int, dict[str, PhaseStats]] = {}
        for bucket in self.buckets:
            values = [r for r in self.rows if r.bucket_mb == bucket and r.error is None]
            if not values:
                continue
            out[bucket] = {
                phase: _stats([getattr(r, phase) for r in values]) for phase in PHASES
            }
        return out

    def error_rows(self) -> list[BenchRow]:
        return [r for r in self.rows if r.error is not None]


def _stats(values: list[float]) -> PhaseStats:
    ordered = sorted(values)
    rank = max(0, -(-95 * len(ordered) // 100) - 1)  # nearest-rank p95
    return PhaseStats(
        mean=statistics.fmean(ordered),
        median=statistics.median(ordered),
        p95=ordered[rank],
    )


def nearest_bucket(size_bytes: int, buckets) -> int:
    size_mb = size_bytes / MB
    return min(buckets, key=lambda b: abs(b - size_mb))


def bench_corpus(
    directory,
    model: Model | QuantizedModel,
    dictionary: FeatureDictionary,
    buckets=DEFAULT_BUCKETS_MB,
    *,
    warmup: bool = True,
) -> TimingReport:
    """Scan every *.apk under directory and time each phase."""
    files = sorted(Path(directory).glob("*.apk"))
    buckets = tuple(buckets)

    if warmup and files:
        # Cold caches and lazy imports skew the first measurement; burn one run.
        try:
            scan_apk(files[0], model, dictionary)
        except ApkfeatError:
            pass

    rows: list[BenchRow] = []
    for path in files:
        size = path.stat().st_size
        bucket = nearest_bucket(size, buckets)
        try:
            result = scan_apk(path, model, dictionary)
        except ApkfeatError as exc:
            rows.append(
                BenchRow(
                    apk=str(path),
                    size_bytes=size,
                    bucket_mb=bucket,
                    unzip_s=None,
                    extract_s=None,
                    predict_ms=None,
                    total_s=None,
                    label=None,
                    confidence=None,
                    error=f"{type(exc).__name__}: {exc}",
                )
            )
            continue
        t = result.timings
        rows.append(
            BenchRow(
                apk=str(path),
                size_bytes=size,
                bucket_mb=bucket,
                unzip_s=t.unzip_s,
                extract_s=t.extract_s,
                predict_ms=t.predict_ms,
                total_s=t.total_s,
                label=result.verdict,
                confidence=result.confidence,
                error=None,
            )
        )
    return TimingReport(rows=tuple(rows), buckets=buckets)


def write_report_csv(report: TimingReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in report.rows:
            writer.writerow(
                [
                    r.apk,
                    r.size_bytes,
                    r.bucket_mb,
                    *(("" if getattr(r, p) is None else repr(getattr(r, p))) for p in PHASES),
                    r.label or "",
                    "" if r.confidence is None else repr(r.confidence),
                    r.error or "",
                ]
            )


def read_report_csv(path, buckets=DEFAULT_BUCKETS_MB) -> TimingReport:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ApkfeatError(f"unexpected report header: {header}")
        for rec in reader:
            apk, size_bytes, bucket_mb, u, e, p, t, label, conf, error = rec
            rows.append(
                BenchRow(
                    apk=apk,
                    size_bytes=int(size_bytes),
                    bucket_mb=int(bucket_mb),
                    unzip_s=float(u) if u else None,
                    extract_s=float(e) if e else None,
                    predict_ms=float(p) if p else None,
                    total_s=float(t) if t else None,
                    label=label or None,
                    confidence=float(conf) if conf else None,
                    error=error or None,
                )
            )
    return TimingReport(rows=tuple(rows), buckets=tuple(buckets))
