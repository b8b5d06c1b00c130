#!/usr/bin/env python3
"""Regenerate the bundled dictionary data under src/apkfeat/data/.

The shipped feature lists are synthetic: deterministic, realistic-looking
names sized to the reference dictionary's published totals (1,509 API +
613 manifest in the pruned base; a 46-call / 12-property behavior delta whose
package expansion brings in 781 API calls total; 2,290 + 625 after update).
Swap in your own lists for real scanning — the formats are plain text.

Run from the repo root:  python3 tools/make_dictionary_data.py
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from apkfeat.dex import ApiCall
from apkfeat.dictionary import (
    BehaviorDelta,
    FeatureEntry,
    build_dictionary,
    save_api_universe,
    save_behavior_delta,
    save_dictionary,
    update_with_behaviors,
)

SEED = 20240801

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "apkfeat" / "data"

BASE_API = 1509
BASE_PERMISSIONS = 324
BASE_INTENTS = 213
BASE_FEATURES = 76
DELTA_API = 46
DELTA_MANIFEST = [("permission", 6), ("intent_action", 4), ("hardware_feature", 2)]
EXPANDED_API_TOTAL = 781          # delta calls plus package expansion
DECOY_UNIVERSE = 200              # universe calls that must never be added

BASE_PACKAGES = [
    "android/app", "android/content", "android/content/pm", "android/net",
    "android/net/wifi", "android/os", "android/telephony", "android/location",
    "android/provider", "android/database", "android/database/sqlite",
    "android/util", "android/text", "android/webkit", "android/media",
    "android/accounts", "android/hardware/camera2", "java/lang", "java/io",
    "java/net", "java/util", "java/util/zip", "java/lang/reflect",
    "java/security", "javax/crypto", "dalvik/system", "org/json",
    "org/apache/http/client", "com/android/internal/telephony",
    "com/google/android/gms/common",
]

# Disjoint namespaces reserved for the behavior delta and its expansion.
DELTA_PACKAGES = [
    "android/telecom", "android/nfc", "android/media/session",
    "android/bluetooth/le", "android/hardware/fingerprint", "android/net/sip",
    "android/security/keystore", "android/companion",
]

DECOY_PACKAGES = ["com/thirdparty/ads", "com/example/vendor", "io/fabric/sdk"]

CLASS_FIRST = [
    "Account", "Activity", "Alarm", "Audio", "Binder", "Bundle", "Cache",
    "Call", "Camera", "Cipher", "Clipboard", "Connection", "Contact",
    "Content", "Cursor", "Device", "Display", "Download", "File", "Handler",
    "Http", "Input", "Intent", "Key", "Location", "Media", "Message",
    "Network", "Notification", "Package", "Phone", "Power", "Process",
    "Query", "Resource", "Sensor", "Service", "Session", "Socket", "Storage",
    "Stream", "Sync", "System", "Task", "Telephony", "Uri", "User", "Wallet",
    "Wifi", "Window",
]
CLASS_SECOND = [
    "Manager", "Service", "Client", "Provider", "Monitor", "Controller",
    "Helper", "Session", "Request", "Info", "State", "Record", "Channel",
    "Factory", "Adapter", "Loader", "Builder", "Store", "Tracker", "Registry",
]
METHOD_VERB = [
    "get", "set", "open", "close", "read", "write", "query", "insert",
    "delete", "update", "send", "receive", "start", "stop", "bind", "unbind",
    "register", "unregister", "request", "release", "create", "destroy",
    "connect", "disconnect", "load", "parse", "encode", "decode", "enable",
    "disable", "fetch", "sync", "dispatch", "acquire", "validate", "resolve",
]
METHOD_NOUN = [
    "Account", "Address", "Buffer", "Config", "Connection", "Contact",
    "Content", "Cursor", "Data", "Device", "File", "Handle", "Id", "Info",
    "Intent", "Key", "List", "Location", "Lock", "Message", "Network",
    "Number", "Permission", "Preference", "Record", "Service", "Session",
    "State", "Stream", "Table", "Task", "Token", "Uri", "User", "Value",
]

PERMISSION_VERB = [
    "READ", "WRITE", "ACCESS", "MANAGE", "USE", "BIND", "CONTROL", "REQUEST",
    "MODIFY", "RECEIVE", "BROADCAST", "CAPTURE",
]
PERMISSION_NOUN = [
    "ACCOUNTS", "ALARMS", "APP_BADGE", "AUDIO", "BATTERY_STATS", "BLUETOOTH",
    "BOOT_STATE", "CALENDAR", "CALL_LOG", "CAMERA", "CLIPBOARD", "CONTACTS",
    "DEVICE_ADMIN", "DIAGNOSTICS", "DOWNLOADS", "EXTERNAL_STORAGE",
    "FINE_LOCATION", "INPUT_STATE", "KEYGUARD", "MEDIA_SESSION", "NETWORK_STATE",
    "NFC_STATE", "NOTIFICATIONS", "PACKAGE_STATS", "PHONE_STATE", "PROFILE",
    "SENSORS", "SETTINGS", "SMS", "SUBSCRIPTIONS", "SYNC_STATE", "TASKS",
    "USER_DICTIONARY", "VOICEMAIL", "VPN_STATE", "WALLPAPER", "WIFI_STATE",
    "WINDOW_STATE",
]
ACTION_FIRST = [
    "AIRPLANE_MODE", "APP_ERROR", "BATTERY", "BOOT", "CALL", "CAMERA_BUTTON",
    "CONFIGURATION", "CONNECTIVITY", "DATE", "DEVICE_STORAGE", "DOCK",
    "DOWNLOAD", "DREAMING", "HEADSET", "INPUT_METHOD", "LOCALE", "MEDIA",
    "NETWORK", "PACKAGE", "PHONE_STATE", "POWER", "PROVIDER", "SCREEN",
    "SHUTDOWN", "SIM", "SMS", "SYNC", "TIME", "TIMEZONE", "UID", "USER",
    "WALLPAPER", "WIFI",
]
ACTION_SECOND = [
    "ADDED", "CHANGED", "COMPLETED", "CONNECTED", "DISCONNECTED", "FINISHED",
    "LOW", "OFF", "OK", "ON", "REMOVED", "REPLACED", "RESTARTED", "STARTED",
    "SUSPENDED", "UPDATED",
]
FEATURE_WORDS = [
    "audio.low_latency", "audio.output", "audio.pro", "bluetooth",
    "bluetooth_le", "camera", "camera.any", "camera.autofocus",
    "camera.external", "camera.flash", "camera.front", "consumerir",
    "ethernet", "faketouch", "fingerprint", "gamepad", "infrared",
    "location", "location.gps", "location.network", "microphone", "nfc",
    "nfc.hce", "opengles.aep", "ram.low", "ram.normal", "screen.landscape",
    "screen.portrait", "sensor.accelerometer", "sensor.ambient_temperature",
    "sensor.barometer", "sensor.compass", "sensor.gyroscope",
    "sensor.heartrate", "sensor.hifi_sensors", "sensor.light",
    "sensor.proximity", "sensor.relative_humidity", "sensor.stepcounter",
    "sensor.stepdetector", "sip", "sip.voip", "telephony", "telephony.cdma",
    "telephony.gsm", "touchscreen", "touchscreen.multitouch",
    "touchscreen.multitouch.distinct", "touchscreen.multitouch.jazzhand",
    "usb.accessory", "usb.host", "vr.headtracking", "vr.high_performance",
    "vulkan.level", "vulkan.version", "wifi", "wifi.aware", "wifi.direct",
    "wifi.passpoint", "wifi.rtt", "audio.midi", "camera.level.full",
    "camera.ar", "biometrics.face", "biometrics.iris", "fm_radio",
    "strongbox_keystore", "security.model.compatible", "device_admin",
    "managed_users", "leanback", "live_tv", "live_wallpaper", "home_screen",
    "input_methods", "backup", "print", "webview", "picture_in_picture",
    "activities_on_secondary_displays",
]


def gen_calls(rng: random.Random, packages, count: int, taken: set[str]) -> list[ApiCall]:
    calls = []
    attempts = 0
    while len(calls) < count:
        attempts += 1
        pkg = rng.choice(packages)
        cls = rng.choice(CLASS_FIRST) + rng.choice(CLASS_SECOND)
        method = rng.choice(METHOD_VERB) + rng.choice(METHOD_NOUN)
        if attempts > 20 * count:
            method = f"{method}{attempts}"
        canonical = f"L{pkg}/{cls};->{method}"
        if canonical in taken:
            continue
        taken.add(canonical)
        calls.append(ApiCall(f"L{pkg}/{cls};", method))
    return calls


def gen_names(rng: random.Random, prefix, firsts, seconds, count: int, taken: set[str]) -> list[str]:
    names = []
    attempts = 0
    while len(names) < count:
        attempts += 1
        name = f"{prefix}{rng.choice(firsts)}_{rng.choice(seconds)}"
        if attempts > 20 * count:
            name = f"{name}_{attempts}"
        if name in taken:
            continue
        taken.add(name)
        names.append(name)
    return names


def main() -> None:
    rng = random.Random(SEED)
    taken: set[str] = set()

    base_calls = gen_calls(rng, BASE_PACKAGES, BASE_API, taken)
    permissions = gen_names(
        rng, "android.permission.", PERMISSION_VERB, PERMISSION_NOUN, BASE_PERMISSIONS, taken
    )
    actions = gen_names(
        rng, "android.intent.action.", ACTION_FIRST, ACTION_SECOND, BASE_INTENTS, taken
    )
    features = [f"android.hardware.{w}" for w in FEATURE_WORDS[:BASE_FEATURES]]
    if len(features) != BASE_FEATURES:
        raise AssertionError("not enough hardware feature words")

    entries = [FeatureEntry(c.canonical, "api_call", "corpus") for c in base_calls]
    entries += [FeatureEntry(p, "permission", "documentation") for p in permissions]
    entries += [FeatureEntry(a, "intent_action", "documentation") for a in actions]
    entries += [FeatureEntry(f, "hardware_feature", "documentation") for f in features]
    base = build_dictionary(entries, version="1")
    assert base.api_count == BASE_API and base.manifest_count == 613

    expansion_calls = gen_calls(rng, DELTA_PACKAGES, EXPANDED_API_TOTAL, taken)
    new_calls = rng.sample(expansion_calls, DELTA_API)
    new_manifest = []
    for kind, count in DELTA_MANIFEST:
        if kind == "permission":
            new_manifest += [
                ("permission", n)
                for n in gen_names(rng, "android.permission.", PERMISSION_VERB,
                                   PERMISSION_NOUN, count, taken)
            ]
        elif kind == "intent_action":
            new_manifest += [
                ("intent_action", n)
                for n in gen_names(rng, "android.intent.action.", ACTION_FIRST,
                                   ACTION_SECOND, count, taken)
            ]
        else:
            new_manifest += [
                ("hardware_feature", f"android.hardware.{w}")
                for w in FEATURE_WORDS[BASE_FEATURES : BASE_FEATURES + count]
            ]
    delta = BehaviorDelta(
        new_api_calls=frozenset(c.canonical for c in new_calls),
        new_packages=frozenset(DELTA_PACKAGES),
        new_manifest=frozenset(new_manifest),
    )

    decoys = gen_calls(rng, DECOY_PACKAGES, DECOY_UNIVERSE, taken)
    universe = set(base_calls) | set(expansion_calls) | set(decoys)

    updated = update_with_behaviors(base, delta, universe)
    assert updated.api_count == 2290, updated.api_count
    assert updated.manifest_count == 625, updated.manifest_count
    assert updated.version == "2"

    DATA_DIR.mkdir(parents=True, exist_ok=True)
    save_dictionary(base, DATA_DIR / "dictionary-v1-base.txt")
    save_dictionary(updated, DATA_DIR / "dictionary-v2.txt")
    save_behavior_delta(delta, DATA_DIR / "behavior-delta.json")
    save_api_universe(universe, DATA_DIR / "api-universe.txt")
    print(f"base: api={base.api_count} manifest={base.manifest_count}")
    print(f"updated: api={updated.api_count} manifest={updated.manifest_count}")
    print(f"universe: {len(universe)} calls, delta: {len(delta.new_api_calls)} new calls")


if __name__ == "__main__":
    main()
