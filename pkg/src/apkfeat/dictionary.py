"""The ordered feature universe: API calls plus manifest properties.

A dictionary assigns every feature a stable vector index. Entries are grouped
API calls first, manifest properties second, each group in strict ascending
lexicographic order of the canonical string, so the index layout is fully
reconstructible from the entry set alone. That ordering is load-bearing:
model weight files are only meaningful against the dictionary they were
trained with.

File format (UTF-8, LF):

    apkfeat-dict v<version> api=<n> manifest=<m>
    <kind>\\t<canonical>\\t<origin>
    ...
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .dex import ApiCall
from .errors import DuplicateFeature, FormatError, OrderError

API_KIND = "api_call"
MANIFEST_KINDS = ("permission", "intent_action", "hardware_feature")
KINDS = (API_KIND,) + MANIFEST_KINDS
ORIGINS = ("documentation", "corpus", "behavior_report", "package_expansion")

_HEADER_RE = re.compile(r"^apkfeat-dict v(\S+) api=(\d+) manifest=(\d+)$")
_API_SHAPE_RE = re.compile(r"^L[^\s;]+;->[^\s]+$")
_MANIFEST_SHAPE_RE = re.compile(r"^[A-Za-z_][\w.\-]*$")


@dataclass(frozen=True)
class FeatureEntry:
    canonical: str
    kind: str
    origin: str


@dataclass(frozen=True)
class FeatureDictionary:
    version: str
    entries: tuple[FeatureEntry, ...]
    index: dict[str, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        _validate_entries(self.entries)
        object.__setattr__(
            self, "index", {e.canonical: i for i, e in enumerate(self.entries)}
        )

    def __len__(self) -> int:
        return len(self.entries)

    def index_of(self, canonical: str) -> int | None:
        return self.index.get(canonical)

    @property
    def api_count(self) -> int:
        return sum(1 for e in self.entries if e.kind == API_KIND)

    @property
    def manifest_count(self) -> int:
        return len(self.entries) - self.api_count

    def kind_counts(self) -> dict[str, int]:
        counts = {kind: 0 for kind in KINDS}
        for e in self.entries:
            counts[e.kind] += 1
        return counts


@dataclass(frozen=True)
class BehaviorDelta:
    """Features distilled from malware behavior reports, plus the package
    prefixes whose whole API surface gets pulled in."""

    new_api_calls: frozenset[str]
    new_packages: frozenset[str]          # e.g. "android/net/Uri", no "->"
    new_manifest: frozenset[tuple[str, str]]  # (kind, name)

    def __post_init__(self):
        for prefix in self.new_packages:
            if "->" in prefix:
                raise ValueError(f"package prefix contains '->': {prefix!r}")
        for kind, _name in self.new_manifest:
            if kind not in MANIFEST_KINDS:
                raise ValueError(f"unknown manifest kind {kind!r}")


@dataclass(frozen=True)
class PruneConfig:
    """The three reduction rules applied to a raw API-call corpus.

    The deny and platform lists are reconstructions (the original lists were
    never published in full); both are plain prefix sets and fully
    configurable.
    """

    obfuscated_max_len: int = 2
    deny_prefixes: tuple[str, ...] = (
        "android/view/",
        "android/widget/",
        "android/graphics/",
        "android/animation/",
        "android/transition/",
        "android/opengl/",
    )
    platform_prefixes: tuple[str, ...] = (
        "android/",
        "java/",
        "javax/",
        "dalvik/",
        "org/json/",
        "org/xml/",
        "org/w3c/dom/",
        "org/apache/http/",
        "com/android/",
        "com/google/android/",
    )

    def is_obfuscated(self, class_descriptor: str) -> bool:
        """True when every package segment and the class name are too short."""
        body = class_descriptor[1:-1]  # strip L ... ;
        segments = body.split("/")
        return all(len(s) <= self.obfuscated_max_len for s in segments)

    def keeps(self, call: ApiCall) -> bool:
        body = call.class_descriptor[1:-1]
        if self.is_obfuscated(call.class_descriptor):
            return False
        if any(body.startswith(p) for p in self.deny_prefixes):
            return False
        return any(body.startswith(p) for p in self.platform_prefixes)


def _group_rank(kind: str) -> int:
    return 0 if kind == API_KIND else 1


def _validate_entries(entries: tuple[FeatureEntry, ...]) -> None:
    seen: set[str] = set()
    for i, e in enumerate(entries):
        if e.kind not in KINDS:
            raise FormatError(f"entry {i}: unknown kind {e.kind!r}")
        if e.origin not in ORIGINS:
            raise FormatError(f"entry {i}: unknown origin {e.origin!r}")
        shape = _API_SHAPE_RE if e.kind == API_KIND else _MANIFEST_SHAPE_RE
        if not shape.match(e.canonical):
            raise FormatError(f"entry {i}: malformed canonical {e.canonical!r}")
        if e.canonical in seen:
            raise DuplicateFeature(f"duplicate canonical {e.canonical!r}")
        seen.add(e.canonical)
    for prev, cur in zip(entries, entries[1:]):
        if _group_rank(cur.kind) < _group_rank(prev.kind):
            raise OrderError(
                f"manifest entry {prev.canonical!r} precedes API entry {cur.canonical!r}"
            )
        if _group_rank(cur.kind) == _group_rank(prev.kind) and cur.canonical <= prev.canonical:
            raise OrderError(
                f"{cur.canonical!r} not in ascending order after {prev.canonical!r}"
            )


def build_dictionary(entries, version: str) -> FeatureDictionary:
    """Sort entries into the canonical layout and wrap them up."""
    ordered = tuple(sorted(entries, key=lambda e: (_group_rank(e.kind), e.canonical)))
    return FeatureDictionary(version=version, entries=ordered)


def load_dictionary(path: str | Path) -> FeatureDictionary:
    return loads_dictionary(Path(path).read_text(encoding="utf-8"))


def loads_dictionary(text: str) -> FeatureDictionary:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("empty dictionary file")
    m = _HEADER_RE.match(lines[0])
    if not m:
        raise FormatError(f"bad header line: {lines[0]!r}")
    version, napi, nman = m.group(1), int(m.group(2)), int(m.group(3))

    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"line {lineno}: expected 3 tab-separated fields")
        kind, canonical, origin = parts
        entries.append(FeatureEntry(canonical=canonical, kind=kind, origin=origin))

    d = FeatureDictionary(version=version, entries=tuple(entries))
    if d.api_count != napi or d.manifest_count != nman:
        raise FormatError(
            f"header declares api={napi} manifest={nman}, "
            f"body has api={d.api_count} manifest={d.manifest_count}"
        )
    return d


def dumps_dictionary(d: FeatureDictionary) -> str:
    lines = [f"apkfeat-dict v{d.version} api={d.api_count} manifest={d.manifest_count}"]
    lines.extend(f"{e.kind}\t{e.canonical}\t{e.origin}" for e in d.entries)
    return "\n".join(lines) + "\n"


def save_dictionary(d: FeatureDictionary, path: str | Path) -> None:
    Path(path).write_text(dumps_dictionary(d), encoding="utf-8", newline="\n")


def prune_api_calls(raw: set[ApiCall], rules: PruneConfig | None = None) -> set[ApiCall]:
    """Drop obfuscated, behavior-irrelevant, and non-platform calls."""
    rules = rules or PruneConfig()
    return {call for call in raw if rules.keeps(call)}


def update_with_behaviors(
    d: FeatureDictionary,
    delta: BehaviorDelta,
    corpus_api_universe: set[ApiCall],
) -> FeatureDictionary:
    """Merge a behavior delta, expanding package prefixes over the corpus.

    Returns a new dictionary with a bumped version; re-adding an existing
    feature is a no-op, so applying the same delta twice is idempotent.
    """
    present = set(d.index)
    merged = list(d.entries)

    for canonical in sorted(delta.new_api_calls):
        if canonical not in present:
            merged.append(FeatureEntry(canonical, API_KIND, "behavior_report"))
            present.add(canonical)

    prefixes = tuple(f"L{p}" for p in delta.new_packages)
    if prefixes:
        for call in sorted(corpus_api_universe):
            if not call.class_descriptor.startswith(prefixes):
                continue
            if call.canonical not in present:
                merged.append(FeatureEntry(call.canonical, API_KIND, "package_expansion"))
                present.add(call.canonical)

    for kind, name in sorted(delta.new_manifest):
        if name not in present:
            merged.append(FeatureEntry(name, kind, "behavior_report"))
            present.add(name)

    return build_dictionary(merged, version=bump_version(d.version))


def bump_version(version: str) -> str:
    if version.isdigit():
        return str(int(version) + 1)
    return f"{version}.1"


def read_dictionary_header(path: str | Path) -> tuple[str, int, int]:
    """Cheap (version, api_count, manifest_count) read of the first line."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
    m = _HEADER_RE.match(first)
    if not m:
        raise FormatError(f"bad header line: {first!r}")
    return m.group(1), int(m.group(2)), int(m.group(3))


def load_behavior_delta(path: str | Path) -> BehaviorDelta:
    """Read a behavior delta from its JSON form."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad delta file: {exc}") from exc
    try:
        return BehaviorDelta(
            new_api_calls=frozenset(doc.get("new_api_calls", ())),
            new_packages=frozenset(doc.get("new_packages", ())),
            new_manifest=frozenset((k, n) for k, n in doc.get("new_manifest", ())),
        )
    except (TypeError, ValueError) as exc:
        raise FormatError(f"bad delta file: {exc}") from exc


def save_behavior_delta(delta: BehaviorDelta, path: str | Path) -> None:
    doc = {
        "new_api_calls": sorted(delta.new_api_calls),
        "new_packages": sorted(delta.new_packages),
        "new_manifest": sorted(list(pair) for pair in delta.new_manifest),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_api_universe(path: str | Path) -> set[ApiCall]:
    """Read a corpus API universe: one canonical call per line, # comments."""
    calls: set[ApiCall] = set()
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            calls.add(ApiCall.from_canonical(line))
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from exc
    return calls


def save_api_universe(calls: set[ApiCall], path: str | Path) -> None:
    text = "\n".join(sorted(c.canonical for c in calls)) + "\n"
    Path(path).write_text(text, encoding="utf-8", newline="\n")
