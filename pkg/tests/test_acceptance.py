"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with -s (or read captured output) to see the per-criterion lines. Every
tolerance and runtime budget is pinned here; nothing is deferred.
"""

from __future__ import annotations

import random
import string
import time
import zlib
from contextlib import contextmanager

import numpy as np

import apkfeat
from apkfeat.axml import decode_axml, extract_manifest_properties
from apkfeat.bench import bench_corpus
from apkfeat.cli import main as cli_main
from apkfeat.dex import ApiCall, extract_api_calls, parse_dex, verify_checksum
from apkfeat.dictionary import (
    load_api_universe,
    load_behavior_delta,
    load_dictionary,
    update_with_behaviors,
)
from apkfeat.errors import AxmlError
from apkfeat.inference import forward_gru, forward_logits, predict_batch
from apkfeat.models import CnnParams, Model, ModelSpec, save_model
from apkfeat.quantize import max_reconstruction_error, model_size_report, quantize
from apkfeat.synth import synth_apk
from apkfeat.vectorize import vectorize

from tests.axmlbuild import build_axml, to_xml_text
from tests.conftest import BENIGN_CALLS, FIXTURES, MALICIOUS_CALLS, make_random_model, tensors_as_lists
from tests.dexbuild import build_dex_fixture
from tests.oracles import adler32_ref, ref_logits
from tests.test_axml import oracle_properties, random_manifest

DATA = apkfeat.resources.files("apkfeat").joinpath("data")


@contextmanager
def criterion(name: str, budget_s: float | None = None):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    elapsed = time.perf_counter() - t0
    if budget_s is not None and elapsed > budget_s:
        print(f"ACCEPTANCE {name}: FAIL (runtime {elapsed:.1f}s exceeds {budget_s:.0f}s)")
        raise AssertionError(f"{name} runtime {elapsed:.1f}s exceeds budget {budget_s:.0f}s")
    print(f"ACCEPTANCE {name}: PASS ({elapsed:.1f}s)")


# -- 1. DEX oracle suite --------------------------------------------------------

def test_acceptance_dex_oracle_suite():
    with criterion("dex-oracle-suite", budget_s=5.0):
        rng = random.Random(777)
        alphabet = string.ascii_letters + string.digits

        def word(lo=1, hi=12):
            return "".join(rng.choices(alphabet, k=rng.randrange(lo, hi)))

        for trial in range(100):
            descriptors = sorted({
                f"L{word()}/{word()};" for _ in range(rng.randrange(1, 10))
            })
            names = sorted({word() for _ in range(rng.randrange(1, 12))})
            strings = sorted(set(descriptors) | set(names))
            sidx = {s: i for i, s in enumerate(strings)}
            types = sorted(sidx[d] for d in descriptors)
            methods = [
                (rng.randrange(len(types)), 0, sidx[rng.choice(names)])
                for _ in range(rng.randrange(1, 25))
            ]
            blob = build_dex_fixture(strings, types, methods)

            dex = parse_dex(blob)
            assert list(dex.strings) == strings, f"trial {trial}: strings"
            assert list(dex.type_descriptors) == [strings[i] for i in types]
            assert [
                (m.class_type_index, m.proto_index, m.name_string_index)
                for m in dex.method_refs
            ] == methods
            assert verify_checksum(blob, dex.header), f"trial {trial}: checksum"

            planted = {
                ApiCall(strings[types[cls]], strings[name]) for cls, _, name in methods
            }
            assert extract_api_calls(dex) == planted, f"trial {trial}: api calls"

        for _ in range(1000):
            data = rng.randbytes(rng.randrange(0, 400))
            assert (zlib.adler32(data) & 0xFFFFFFFF) == adler32_ref(data)


# -- 2. AXML oracle suite -------------------------------------------------------

def test_acceptance_axml_oracle_suite():
    with criterion("axml-oracle-suite", budget_s=30.0):
        rng = random.Random(888)
        for trial in range(50):
            spec = random_manifest(rng)
            blob = build_axml(spec, utf8=bool(trial % 2))
            decoded = extract_manifest_properties(decode_axml(blob))
            perms, actions, feats = oracle_properties(to_xml_text(spec))
            assert decoded.permissions == perms, f"trial {trial}"
            assert decoded.intent_actions == actions, f"trial {trial}"
            assert decoded.hardware_features == feats, f"trial {trial}"

        fuzz_blob = build_axml(random_manifest(random.Random(999)))
        for _ in range(10_000):
            cut = rng.randrange(0, len(fuzz_blob))
            try:
                decode_axml(fuzz_blob[:cut])
            except AxmlError:
                pass
            # Any other exception type propagates and fails the criterion.


# -- 3. dictionary arithmetic ---------------------------------------------------

def test_acceptance_dictionary_arithmetic():
    with criterion("dictionary-arithmetic"):
        shipped = load_dictionary(apkfeat.default_dictionary_path())
        assert shipped.api_count == 2290
        assert shipped.manifest_count == 625
        assert len(shipped) == 2915

        base = load_dictionary(str(DATA.joinpath("dictionary-v1-base.txt")))
        assert base.api_count == 1509 and base.manifest_count == 613
        delta = load_behavior_delta(str(DATA.joinpath("behavior-delta.json")))
        universe = load_api_universe(str(DATA.joinpath("api-universe.txt")))

        updated = update_with_behaviors(base, delta, universe)
        assert updated.api_count == 2290 and updated.manifest_count == 625
        assert updated.api_count - base.api_count == 781
        assert updated.entries == shipped.entries


# -- 4. inference reference equivalence -------------------------------------------

def test_acceptance_inference_reference_equivalence():
    with criterion("inference-reference-equivalence", budget_s=120.0):
        rng = np.random.default_rng(31337)
        recurrent = ("gru", "lstm", "stacked_gru", "stacked_lstm", "bi_gru", "bi_lstm")
        for arch in recurrent:
            worst = 0.0
            for _ in range(500):
                n = int(rng.integers(2, 16))
                h = int(rng.integers(1, 7))
                c = int(rng.integers(2, 5))
                model = make_random_model(ModelSpec(arch, n, c, hidden_units=h), rng)
                x = rng.integers(0, 2, n).astype(np.float32)
                got = forward_logits(model, x)
                want = ref_logits(
                    arch, tensors_as_lists(model), [float(v) for v in x], hidden_units=h
                )
                worst = max(worst, float(np.max(np.abs(got - np.array(want)))))
            assert worst < 1e-5, f"{arch}: max |diff| = {worst}"

        worst = 0.0
        for _ in range(500):
            rows = 3
            width = int(rng.integers(3, 10))
            n = rows * width - 1
            params = CnnParams(
                filters=int(rng.integers(1, 8)), kernel=3,
                dense1=int(rng.integers(2, 8)), rows=rows,
            )
            model = make_random_model(ModelSpec("cnn", n, 2, cnn=params), rng)
            x = rng.integers(0, 2, n).astype(np.float32)
            got = forward_logits(model, x)
            want = ref_logits(
                "cnn", tensors_as_lists(model), [float(v) for v in x],
                cnn=dict(filters=params.filters, kernel=3, dense1=params.dense1,
                         rows=3, width=width),
            )
            worst = max(worst, float(np.max(np.abs(got - np.array(want)))))
        assert worst < 1e-5, f"cnn: max |diff| = {worst}"

        # Single-timestep GRU: the reset gate (and all U matrices) cannot
        # influence the output from a zero initial state.
        for trial in range(100):
            spec = ModelSpec("gru", 12, 2, hidden_units=4)
            model = make_random_model(spec, rng)
            x = rng.integers(0, 2, 12).astype(np.float32)
            baseline = forward_gru(model, x)
            perturbed = Model(spec, dict(model.tensors))
            for name in ("W_r", "U_r", "b_r"):
                perturbed.tensors[name] = rng.normal(
                    0, 100, model.tensors[name].shape
                ).astype(np.float32)
            assert np.array_equal(forward_gru(perturbed, x), baseline), f"trial {trial}"


# -- 5. quantization contract -----------------------------------------------------

def test_acceptance_quantization_contract():
    with criterion("quantization-contract", budget_s=120.0):
        rng = np.random.default_rng(41)
        spec = ModelSpec("gru", 2915, 2, hidden_units=128)
        model = make_random_model(spec, rng, scale=0.25)
        qmodel = quantize(model)

        # Exhaustive per-weight reconstruction bound, every quantized tensor.
        for name, qt in qmodel.qweights.items():
            original = model.tensors[name].astype(np.float64)
            recon = (qt.values.astype(np.float64) - qt.zero_point) * qt.scale
            worst = float(np.max(np.abs(original - recon)))
            assert worst <= qt.scale / 2, f"{name}: {worst} > scale/2"
        assert max_reconstruction_error(model, qmodel) <= max(
            qt.scale for qt in qmodel.qweights.values()
        ) / 2

        batch = (rng.random((10_000, 2915)) < 0.5).astype(np.float32)
        labels_float, _ = predict_batch(model, batch)
        labels_quant, _ = predict_batch(qmodel.dequantized(), batch)
        agreement = float(np.mean(labels_float == labels_quant))
        assert agreement >= 0.99, f"label agreement {agreement:.4f} < 0.99"

        report = model_size_report(model, qmodel)
        assert report.ratio >= 3.9, f"size ratio {report.ratio:.3f} < 3.9"


# -- 6. end-to-end pipeline timing shape ------------------------------------------

def test_acceptance_pipeline_timing_shape(tmp_path):
    with criterion("pipeline-timing-shape", budget_s=120.0):
        dictionary = load_dictionary(apkfeat.default_dictionary_path())
        api_pool = [e.canonical for e in dictionary.entries if e.kind == "api_call"]
        rng = np.random.default_rng(51)
        model = make_random_model(
            ModelSpec("gru", len(dictionary), 2, hidden_units=128), rng, scale=0.1
        )

        sizes = (5, 10, 20, 30, 40, 50)
        samples_per_bucket = 3
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        for i, size in enumerate(sizes):
            for j in range(samples_per_bucket):
                # Method-table size and embedded data both scale with file
                # size, as in real apps, so each phase has a real gradient.
                synth_apk(
                    corpus / f"app{size:02d}_{j}.apk", size,
                    min(40 * size, len(api_pool)),
                    ["android.permission.INTERNET"],
                    seed=6000 + 10 * i + j, api_pool=api_pool,
                    extra_api=400 * size, dex_fill_fraction=0.7,
                )

        report = bench_corpus(corpus, model, dictionary, buckets=sizes)
        assert len(report.rows) == len(sizes) * samples_per_bucket
        assert not report.error_rows()
        aggregates = report.aggregates()
        assert sorted(aggregates) == list(sizes)

        unzip_medians = [aggregates[s]["unzip_s"].median for s in sizes]
        extract_medians = [aggregates[s]["extract_s"].median for s in sizes]
        assert all(
            b >= a for a, b in zip(unzip_medians, unzip_medians[1:])
        ), f"unzip medians not monotone: {unzip_medians}"
        assert all(
            b >= a for a, b in zip(extract_medians, extract_medians[1:])
        ), f"extract medians not monotone: {extract_medians}"

        fifty = next(r for r in report.rows if r.bucket_mb == 50)
        assert fifty.total_s < 1.0, f"50 MB scan took {fifty.total_s:.3f}s"


# -- 7. CLI exit-code contract -----------------------------------------------------

def test_acceptance_cli_contract(tmp_path):
    with criterion("cli-exit-codes"):
        toy_dict = str(FIXTURES / "toy.dict")
        toy_model = str(FIXTURES / "toy_gru.model")
        cases = []  # (argv, expected_exit)

        for i in range(5):
            planted = synth_apk(
                tmp_path / f"benign{i}.apk", 0.05, 3 + i,
                ["android.permission.INTERNET"], seed=100 + i, api_pool=BENIGN_CALLS,
            )
            cases.append((planted.path, 0))
        for i in range(5):
            planted = synth_apk(
                tmp_path / f"mal{i}.apk", 0.05, 3 + (i % 4),
                [("intent_action", "android.intent.action.MAIN")],
                seed=200 + i, api_pool=MALICIOUS_CALLS,
            )
            cases.append((planted.path, 1))

        corrupt = []
        garbage = tmp_path / "garbage.apk"
        garbage.write_bytes(b"\x00" * 512)
        corrupt.append(garbage)
        import zipfile

        no_manifest = tmp_path / "nomanifest.apk"
        with zipfile.ZipFile(no_manifest, "w") as zf:
            zf.writestr("classes.dex", b"d")
        corrupt.append(no_manifest)
        no_dex = tmp_path / "nodex.apk"
        with zipfile.ZipFile(no_dex, "w") as zf:
            zf.writestr("AndroidManifest.xml", b"m")
        corrupt.append(no_dex)
        truncated = tmp_path / "truncated.apk"
        truncated.write_bytes((tmp_path / "benign0.apk").read_bytes()[:1000])
        corrupt.append(truncated)
        flipped = tmp_path / "flipped.apk"
        blob = bytearray((tmp_path / "benign1.apk").read_bytes())
        from apkfeat.container import open_apk

        dex_entry = open_apk(tmp_path / "benign1.apk").entry("classes.dex")
        flip_at = dex_entry.local_header_offset + 30 + len("classes.dex") + 50
        blob[flip_at] ^= 0xFF  # inside the deflated dex stream
        flipped.write_bytes(bytes(blob))
        corrupt.append(flipped)
        for path in corrupt:
            cases.append((str(path), 2))

        mismatched = []
        rng = np.random.default_rng(7)
        for i, dim in enumerate((7, 19, 21, 128, 2915)):
            bad = make_random_model(ModelSpec("gru", dim, 2, hidden_units=2), rng)
            path = tmp_path / f"wrong{i}.model"
            save_model(bad, path)
            mismatched.append(str(path))

        assert len(cases) == 15 and len(mismatched) == 5
        for apk_path, expected in cases:
            code = cli_main(["scan", apk_path, "--model", toy_model, "--dict", toy_dict])
            assert code == expected, f"{apk_path}: exit {code}, expected {expected}"
        benign = str(tmp_path / "benign0.apk")
        for model_path in mismatched:
            code = cli_main(["scan", benign, "--model", model_path, "--dict", toy_dict])
            assert code == 2, f"{model_path}: exit {code}, expected 2"
