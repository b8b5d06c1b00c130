"""End-to-end scan of one APK with per-phase wall-clock timing.

Phases mirror the measurement decomposition the benchmark reports use:
unzip (container open + raw payload inflation), extract (dex and manifest
parsing down to the feature vector), predict (model forward pass). The total
is timed independently around the whole scan.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .axml import decode_axml, extract_manifest_properties
from .container import extract_raw_payload, open_apk
from .dex import ApiCall, DexError, extract_api_calls, parse_dex, verify_checksum
from .dictionary import FeatureDictionary
from .errors import BadChecksum, DimensionMismatch
from .inference import predict
from .models import Model, QuantizedModel
from .quantize import predict_quantized
from .vectorize import vectorize


@dataclass(frozen=True)
class PhaseTimings:
    unzip_s: float
    extract_s: float
    predict_ms: float
    total_s: float


@dataclass(frozen=True)
class ScanResult:
    apk: str
    size_bytes: int
    verdict: str
    confidence: float
    label: int
    timings: PhaseTimings
    dict_version: str
    architecture: str
    quantized: bool

    @property
    def is_malicious(self) -> bool:
        return self.verdict != "benign"


def scan_apk(
    path,
    model: Model | QuantizedModel,
    dictionary: FeatureDictionary,
    *,
    verify_checksums: bool = True,
) -> ScanResult:
    """Run the full unzip / extract / predict pipeline on one APK."""
    quantized = isinstance(model, QuantizedModel)
    if model.spec.input_dim != len(dictionary):
        raise DimensionMismatch(
            f"model expects {model.spec.input_dim} features, "
            f"dictionary v{dictionary.version} has {len(dictionary)}"
        )

    t_start = time.perf_counter()

    t0 = time.perf_counter()
    archive = open_apk(path)
    payload = extract_raw_payload(archive)
    unzip_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    calls: set[ApiCall] = set()
    for entry_name, body in payload.dex_payloads:
        try:
            dex = parse_dex(body)
            if verify_checksums and not verify_checksum(body, dex.header):
                raise BadChecksum("stored Adler-32 does not match the body")
            calls |= extract_api_calls(dex)
        except DexError as exc:
            raise type(exc)(f"{entry_name}: {exc}") from exc
    manifest = extract_manifest_properties(decode_axml(payload.manifest_bytes))
    vector = vectorize(calls, manifest, dictionary)
    extract_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    if quantized:
        prediction = predict_quantized(model, vector)
    else:
        prediction = predict(model, vector)
    predict_ms = (time.perf_counter() - t0) * 1000.0

    total_s = time.perf_counter() - t_start
    return ScanResult(
        apk=str(path),
        size_bytes=len(archive.data),
        verdict=model.spec.class_names[prediction.label],
        confidence=prediction.confidence,
        label=prediction.label,
        timings=PhaseTimings(unzip_s, extract_s, predict_ms, total_s),
        dict_version=dictionary.version,
        architecture=model.spec.architecture,
        quantized=quantized,
    )
