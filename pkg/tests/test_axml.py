from __future__ import annotations

import random
import xml.etree.ElementTree as ET

import pytest

from apkfeat.axml import decode_axml, extract_manifest_properties
from apkfeat.errors import (
    AxmlError,
    BadChunkSignature,
    NotAManifest,
    TruncatedChunk,
    UnbalancedElements,
)

from tests.axmlbuild import ANDROID_NS, El, build_axml, to_xml_text


def oracle_properties(xml_text: str):
    """Extract the three property families from plain XML with the stdlib parser."""
    root = ET.fromstring(xml_text)

    def local(tag: str) -> str:
        return tag.rsplit("}", 1)[-1]

    def name_attr(el) -> str | None:
        for key, value in el.attrib.items():
            if local(key) == "name":
                return value
        return None

    permissions, actions, features = set(), set(), set()
    for el in root.iter():
        tag = local(el.tag)
        if tag in ("uses-permission", "uses-permission-sdk-23"):
            if name_attr(el):
                permissions.add(name_attr(el))
        elif tag == "uses-feature":
            if name_attr(el):
                features.add(name_attr(el))
        elif tag == "intent-filter":
            for inner in el.iter():
                if local(inner.tag) == "action" and name_attr(inner):
                    actions.add(name_attr(inner))
    return permissions, actions, features


def random_manifest(rng: random.Random) -> El:
    perms = [f"android.permission.P{i}" for i in range(rng.randrange(0, 6))]
    actions = [f"android.intent.action.A{i}" for i in range(rng.randrange(0, 4))]
    feats = [f"android.hardware.f{i}" for i in range(rng.randrange(0, 3))]
    root = El("manifest", [(None, "package", f"com.fixture.x{rng.randrange(99)}")])
    for p in perms:
        root.children.append(El("uses-permission", [(ANDROID_NS, "name", p)]))
    # One permission duplicated on purpose when any exist: sets must collapse.
    if perms:
        root.children.append(El("uses-permission", [(ANDROID_NS, "name", perms[0])]))
    app = El("application")
    activity = El("activity", [(ANDROID_NS, "name", ".Main")])
    fil = El("intent-filter")
    for a in actions:
        fil.children.append(El("action", [(ANDROID_NS, "name", a)]))
        fil.children.append(El("category", [(ANDROID_NS, "name", "android.intent.category.DEFAULT")]))
    activity.children.append(fil)
    app.children.append(activity)
    root.children.append(app)
    for f in feats:
        root.children.append(El("uses-feature", [(ANDROID_NS, "name", f)]))
    return root


def test_single_element_manifest():
    tree = decode_axml(build_axml(El("manifest", [(None, "package", "a")])))
    assert tree.root.name == "manifest"
    assert tree.root.attr("package") == "a"
    assert tree.root.children == []


def test_plain_text_xml_is_rejected():
    with pytest.raises(BadChunkSignature):
        decode_axml(b'<?xml version="1.0"?><manifest/>')


def test_unopened_end_element():
    blob = bytearray(build_axml(El("manifest", [], [El("a")])))
    # Rewrite the inner start-element chunk type to cdata so its end is orphaned.
    import struct

    pos = 8
    starts = []
    while pos < len(blob):
        ctype, hsize, size = struct.unpack_from("<HHI", blob, pos)
        if ctype == 0x0102:
            starts.append(pos)
        pos += size
    struct.pack_into("<H", blob, starts[1], 0x0104)
    with pytest.raises(UnbalancedElements):
        decode_axml(bytes(blob))


def test_unclosed_root_detected():
    import struct

    blob = bytearray(build_axml(El("manifest")))
    pos = 8
    while pos < len(blob):
        ctype, hsize, size = struct.unpack_from("<HHI", blob, pos)
        if ctype == 0x0103:
            struct.pack_into("<H", blob, pos, 0x0104)
        pos += size
    with pytest.raises(UnbalancedElements):
        decode_axml(bytes(blob))


@pytest.mark.parametrize("utf8", [False, True])
def test_decode_matches_plain_text_oracle(utf8):
    rng = random.Random(17 if utf8 else 71)
    for _ in range(50):
        spec = random_manifest(rng)
        decoded = extract_manifest_properties(decode_axml(build_axml(spec, utf8=utf8)))
        perms, actions, feats = oracle_properties(to_xml_text(spec))
        assert decoded.permissions == perms
        assert decoded.intent_actions == actions
        assert decoded.hardware_features == feats


def test_resource_map_chunk_is_skipped():
    blob = build_axml(
        El("manifest", [(None, "package", "p")]),
        resource_map_ids=[0x01010003, 0x0101021B],
    )
    assert decode_axml(blob).root.attr("package") == "p"


def test_typed_attribute_values():
    root = El(
        "manifest",
        [
            (None, "package", "p"),
            (ANDROID_NS, "exported", True),
            (ANDROID_NS, "versionCode", 42),
            (ANDROID_NS, "flags", ("hex", 0x7F)),
        ],
    )
    decoded = decode_axml(build_axml(root)).root
    assert decoded.attr("exported") == "true"
    assert decoded.attr("versionCode") == "42"
    assert decoded.attr("flags") == "0x0000007f"


def test_properties_require_manifest_root():
    tree = decode_axml(build_axml(El("application")))
    with pytest.raises(NotAManifest):
        extract_manifest_properties(tree)


def test_duplicate_permission_collapses():
    root = El("manifest", [(None, "package", "p")])
    for _ in range(2):
        root.children.append(
            El("uses-permission", [(ANDROID_NS, "name", "android.permission.INTERNET")])
        )
    info = extract_manifest_properties(decode_axml(build_axml(root)))
    assert info.permissions == {"android.permission.INTERNET"}


def test_empty_manifest_has_empty_sets():
    info = extract_manifest_properties(
        decode_axml(build_axml(El("manifest", [(None, "package", "p")])))
    )
    assert info.permissions == frozenset()
    assert info.intent_actions == frozenset()
    assert info.hardware_features == frozenset()
    assert info.package_name == "p"


def test_action_outside_intent_filter_ignored():
    root = El("manifest", [(None, "package", "p")])
    root.children.append(El("action", [(ANDROID_NS, "name", "android.intent.action.STRAY")]))
    info = extract_manifest_properties(decode_axml(build_axml(root)))
    assert info.intent_actions == frozenset()


def test_nested_action_found_at_depth():
    fil = El("intent-filter", [], [El("data", [], [El("action", [(ANDROID_NS, "name", "deep.ACTION")])])])
    root = El("manifest", [(None, "package", "p")], [El("application", [], [fil])])
    info = extract_manifest_properties(decode_axml(build_axml(root)))
    assert info.intent_actions == {"deep.ACTION"}


def test_truncation_fuzz_raises_only_axml_errors():
    blob = build_axml(random_manifest(random.Random(5)))
    rng = random.Random(6)
    for _ in range(500):
        cut = rng.randrange(0, len(blob))
        try:
            decode_axml(blob[:cut])
        except AxmlError:
            pass
    # Any non-AxmlError exception (IndexError, struct.error, ...) fails the test.


def test_declared_size_beyond_data_is_truncated():
    blob = build_axml(El("manifest"))
    with pytest.raises(TruncatedChunk):
        decode_axml(blob[:-4])


def test_zero_sized_chunk_cannot_loop_forever():
    import struct

    blob = bytearray(build_axml(El("manifest")))
    # Force an inner chunk size of zero; the decoder must error, not spin.
    struct.pack_into("<I", blob, 8 + 4, 0)
    with pytest.raises(AxmlError):
        decode_axml(bytes(blob))
