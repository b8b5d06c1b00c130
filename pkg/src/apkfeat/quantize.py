"""Post-training int8 weight quantization with a float forward path.

Weight matrices are quantized per-tensor and symmetrically: zero_point = 0,
scale = max|w| / 127, values rounded to nearest, so every weight
reconstructs within scale/2. Biases stay float32; they are negligible in
size and keeping them exact costs nothing. Activations and accumulation stay
float32 — the contract here is that quantized classifications agree with the
float model, not integer-kernel speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .inference import Prediction, predict
from .models import (
    Model,
    QuantTensor,
    QuantizedModel,
    dump_model_bytes,
    dump_quantized_bytes,
    tensor_schema,
    validate_model,
)


def quantize_tensor(weights: np.ndarray) -> QuantTensor:
    """Symmetric int8 quantization of one tensor.

    An all-zero tensor takes scale 1 by convention (any positive scale
    reconstructs it exactly).
    """
    max_abs = float(np.max(np.abs(weights))) if weights.size else 0.0
    scale = float(np.float32(max_abs / 127.0)) if max_abs > 0.0 else 1.0
    q = np.clip(np.rint(weights.astype(np.float64) / scale), -127, 127)
    return QuantTensor(values=q.astype(np.int8), scale=scale, zero_point=0)


def quantize(model: Model) -> QuantizedModel:
    """Quantize every weight matrix; biases are copied through as float32."""
    validate_model(model)
    schema = tensor_schema(model.spec)
    qweights = {}
    biases = {}
    for name, ts in schema.items():
        tensor = model.tensors[name]
        if ts.kind == "weight":
            qweights[name] = quantize_tensor(tensor)
        else:
            biases[name] = np.array(tensor, dtype=np.float32, copy=True)
    return QuantizedModel(spec=model.spec, qweights=qweights, biases=biases)


def predict_quantized(qmodel: QuantizedModel, x) -> Prediction:
    """Dequantize-and-forward; same Prediction contract as the float path."""
    return predict(qmodel.dequantized(), x)


@dataclass(frozen=True)
class SizeReport:
    float_bytes: int
    quant_bytes: int

    @property
    def ratio(self) -> float:
        return self.float_bytes / self.quant_bytes


def model_size_report(model: Model, qmodel: QuantizedModel) -> SizeReport:
    """Serialized sizes of both flavors, as written to disk."""
    return SizeReport(
        float_bytes=len(dump_model_bytes(model)),
        quant_bytes=len(dump_quantized_bytes(qmodel)),
    )


def max_reconstruction_error(model: Model, qmodel: QuantizedModel) -> float:
    """Largest |w - scale*(q - zp)| over all quantized tensors, in float64."""
    worst = 0.0
    for name, qt in qmodel.qweights.items():
        original = model.tensors[name].astype(np.float64)
        reconstructed = (qt.values.astype(np.float64) - qt.zero_point) * qt.scale
        worst = max(worst, float(np.max(np.abs(original - reconstructed))))
    return worst
