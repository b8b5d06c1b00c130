from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from apkfeat.dictionary import load_dictionary
from apkfeat.models import Model, ModelSpec, load_model, load_quantized_model, tensor_schema

FIXTURES = Path(__file__).parent / "fixtures"

# Canonical feature lists planted in the committed toy dictionary.
MALICIOUS_CALLS = [f"Levil/mal/Bad{i};->pwn{i}" for i in range(8)]
BENIGN_CALLS = [f"Lgood/app/Safe{i};->run{i}" for i in range(8)]


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def toy_dict():
    return load_dictionary(FIXTURES / "toy.dict")


@pytest.fixture(scope="session")
def toy_model():
    return load_model(FIXTURES / "toy_gru.model")


@pytest.fixture(scope="session")
def toy_quant_model():
    return load_quantized_model(FIXTURES / "toy_gru_quant.model")


def make_random_model(spec: ModelSpec, rng: np.random.Generator, scale: float = 0.5) -> Model:
    tensors = {
        name: rng.normal(0.0, scale, (ts.rows, ts.cols)).astype(np.float32)
        for name, ts in tensor_schema(spec).items()
    }
    return Model(spec=spec, tensors=tensors)


def tensors_as_lists(model: Model) -> dict[str, list]:
    return {name: t.tolist() for name, t in model.tensors.items()}
