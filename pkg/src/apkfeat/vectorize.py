"""Fixed-length binary feature vectors and their text interchange format.

Vector text format, the corpus interchange with the trainer:

    apkfeat-vec dict=<version> dim=<n> label=<int|none>
    <n characters from {0,1}>
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .axml import ManifestInfo
from .dex import ApiCall
from .dictionary import FeatureDictionary
from .errors import DimensionMismatch, VectorFormatError

_HEADER_RE = re.compile(r"^apkfeat-vec dict=(\S+) dim=(\d+) label=(none|-?\d+)$")


@dataclass(eq=False)
class FeatureVector:
    dict_version: str
    bits: np.ndarray  # 1-D uint8 of {0,1}

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 1:
            raise DimensionMismatch("bits must be one-dimensional")
        if self.bits.size and self.bits.max() > 1:
            raise VectorFormatError("bits must be 0 or 1")

    @property
    def dimension(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FeatureVector)
            and self.dict_version == other.dict_version
            and np.array_equal(self.bits, other.bits)
        )


def vectorize(
    apis: set[ApiCall],
    manifest: ManifestInfo,
    dictionary: FeatureDictionary,
) -> FeatureVector:
    """Presence test of the app's features against the dictionary.

    Features absent from the dictionary are silently ignored; real apps
    carry far more calls than the pruned universe keeps.
    """
    bits = np.zeros(len(dictionary), dtype=np.uint8)
    for call in apis:
        idx = dictionary.index_of(call.canonical)
        if idx is not None:
            bits[idx] = 1
    for name in manifest.permissions | manifest.intent_actions | manifest.hardware_features:
        idx = dictionary.index_of(name)
        if idx is not None:
            bits[idx] = 1
    return FeatureVector(dict_version=dictionary.version, bits=bits)


def vector_to_text(vector: FeatureVector, label: int | None = None) -> str:
    header = (
        f"apkfeat-vec dict={vector.dict_version} dim={vector.dimension} "
        f"label={'none' if label is None else label}"
    )
    body = "".join("1" if b else "0" for b in vector.bits)
    return f"{header}\n{body}\n"


def text_to_vector(text: str) -> tuple[FeatureVector, int | None]:
    lines = text.split("\n")
    if len(lines) < 2:
        raise VectorFormatError("vector file needs a header and a body line")
    m = _HEADER_RE.match(lines[0])
    if not m:
        raise VectorFormatError(f"bad header line: {lines[0]!r}")
    version, dim, label_s = m.group(1), int(m.group(2)), m.group(3)
    body = lines[1]
    if any(line for line in lines[2:]):
        raise VectorFormatError("unexpected content after the body line")
    if len(body) != dim:
        raise DimensionMismatch(f"header declares dim={dim}, body has {len(body)} bits")
    if body.strip("01"):
        raise VectorFormatError("body contains characters other than 0/1")
    bits = np.frombuffer(body.encode("ascii"), dtype=np.uint8) - ord("0")
    label = None if label_s == "none" else int(label_s)
    return FeatureVector(dict_version=version, bits=bits), label
