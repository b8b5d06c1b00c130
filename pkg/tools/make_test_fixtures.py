#!/usr/bin/env python3
"""Regenerate the hand-constructed weight/dictionary fixtures under tests/fixtures/.

The toy GRU is built analytically: with a zero initial state the update gate
sits at 0.5 (all-zero z weights) and the candidate row sums benign-cluster
bits positively and malicious-cluster bits negatively, so the classifier
separates the two planted clusters with a wide margin. No training involved.

Run from the repo root:  python3 tools/make_test_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from apkfeat.dictionary import FeatureEntry, build_dictionary, save_dictionary
from apkfeat.models import Model, ModelSpec, save_model, save_quantized_model, tensor_schema
from apkfeat.quantize import quantize

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

MALICIOUS_CALLS = [f"Levil/mal/Bad{i};->pwn{i}" for i in range(8)]
BENIGN_CALLS = [f"Lgood/app/Safe{i};->run{i}" for i in range(8)]
MANIFEST = [
    ("hardware_feature", "android.hardware.camera"),
    ("intent_action", "android.intent.action.MAIN"),
    ("permission", "android.permission.CAMERA"),
    ("permission", "android.permission.INTERNET"),
]


def main() -> None:
    entries = [FeatureEntry(c, "api_call", "corpus") for c in MALICIOUS_CALLS + BENIGN_CALLS]
    entries += [FeatureEntry(name, kind, "documentation") for kind, name in MANIFEST]
    toy_dict = build_dictionary(entries, version="toy1")
    assert len(toy_dict) == 20

    spec = ModelSpec("gru", 20, 2, hidden_units=2, labels=("benign", "malware"))
    tensors = {
        name: np.zeros((ts.rows, ts.cols), dtype=np.float32)
        for name, ts in tensor_schema(spec).items()
    }
    for canonical in BENIGN_CALLS:
        tensors["W_h"][0, toy_dict.index_of(canonical)] = 1.0
    for canonical in MALICIOUS_CALLS:
        tensors["W_h"][0, toy_dict.index_of(canonical)] = -1.0
    tensors["classifier_W"][0, 0] = 10.0
    tensors["classifier_W"][1, 0] = -10.0
    model = Model(spec, tensors)

    FIXTURES.mkdir(parents=True, exist_ok=True)
    save_dictionary(toy_dict, FIXTURES / "toy.dict")
    save_model(model, FIXTURES / "toy_gru.model")
    save_quantized_model(quantize(model), FIXTURES / "toy_gru_quant.model")
    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
