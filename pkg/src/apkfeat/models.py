"""Model descriptors and the neutral weight file format.

A model file is a text header, a sequence of named tensors, and a CRC-32
trailer over the raw tensor bytes:

    apkfeat-model v1 arch=gru input=2915 hidden=128 classes=2 [labels=a,b] [quant=int8]
    tensor W_z 128 2915
    <rows*cols little-endian float32 bytes>
    ...
    crc32 <decimal>

Quantized weight tensors carry `scale=<f> zero_point=<i>` on the tensor line
and store int8 bytes; bias tensors stay float32 in both flavors. The tensor
shape table per architecture lives in tensor_schema() and is the single
convention both the trainer and this loader must agree on: every matrix is
rows=output by cols=input, biases are 1 x width.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path

import numpy as np

from .errors import (
    ChecksumMismatch,
    ModelFormatError,
    NonFiniteWeight,
    ShapeMismatch,
    UnknownArchitecture,
)

FORMAT_VERSION = "v1"
RECURRENT_ARCHITECTURES = ("gru", "lstm", "stacked_gru", "stacked_lstm", "bi_gru", "bi_lstm")
ARCHITECTURES = RECURRENT_ARCHITECTURES + ("cnn",)

GRU_GATES = ("z", "r", "h")
LSTM_GATES = ("i", "f", "g", "o")

_LABEL_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")
_NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")


@dataclass(frozen=True)
class CnnParams:
    """Convolution head geometry; pad is fixed at one trailing zero.

    The padded input is laid out row-major as `rows` channels. With
    width=None the row width is (input_dim + 1) / rows, which must divide
    evenly; an explicit smaller width truncates the padded vector to
    rows*width elements (legacy comparison mode).
    """

    filters: int = 64
    kernel: int = 3
    dense1: int = 16
    rows: int = 3
    width: int | None = None

    def row_width(self, input_dim: int) -> int:
        padded = input_dim + 1
        if self.width is not None:
            return self.width
        return padded // self.rows

    def conv_positions(self, input_dim: int) -> int:
        return self.row_width(input_dim) - self.kernel + 1


@dataclass(frozen=True)
class ModelSpec:
    architecture: str
    input_dim: int
    num_classes: int
    hidden_units: int | None = None
    cnn: CnnParams | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise UnknownArchitecture(f"unknown architecture {self.architecture!r}")
        if self.input_dim <= 0:
            raise ShapeMismatch("input_dim must be positive")
        if self.num_classes < 2:
            raise ShapeMismatch("num_classes must be at least 2")
        if self.architecture == "cnn":
            cnn = self.cnn or CnnParams()
            object.__setattr__(self, "cnn", cnn)
            if min(cnn.filters, cnn.kernel, cnn.dense1, cnn.rows) <= 0:
                raise ShapeMismatch("cnn parameters must be positive")
            padded = self.input_dim + 1
            if cnn.width is None:
                if padded % cnn.rows:
                    raise ShapeMismatch(
                        f"padded input {padded} not divisible by {cnn.rows} rows"
                    )
            elif cnn.width * cnn.rows > padded:
                raise ShapeMismatch("explicit width exceeds the padded input")
            if cnn.row_width(self.input_dim) < cnn.kernel:
                raise ShapeMismatch("row width smaller than the kernel")
        else:
            if not self.hidden_units or self.hidden_units <= 0:
                raise ShapeMismatch("hidden_units must be positive")
        if self.labels is not None:
            if len(self.labels) != self.num_classes:
                raise ShapeMismatch(
                    f"{len(self.labels)} labels for {self.num_classes} classes"
                )
            for label in self.labels:
                if not _LABEL_RE.match(label):
                    raise ModelFormatError(f"bad class label {label!r}")

    @property
    def class_names(self) -> tuple[str, ...]:
        if self.labels is not None:
            return self.labels
        if self.num_classes == 2:
            return ("benign", "malware")
        return tuple(f"class_{i}" for i in range(self.num_classes))


@dataclass(frozen=True)
class TensorSpec:
    rows: int
    cols: int
    kind: str  # "weight" | "bias"


def _cell_schema(prefix: str, gates, input_dim: int, hidden: int) -> dict[str, TensorSpec]:
    schema: dict[str, TensorSpec] = {}
    for g in gates:
        schema[f"{prefix}W_{g}"] = TensorSpec(hidden, input_dim, "weight")
        schema[f"{prefix}U_{g}"] = TensorSpec(hidden, hidden, "weight")
        schema[f"{prefix}b_{g}"] = TensorSpec(1, hidden, "bias")
    return schema


def tensor_schema(spec: ModelSpec) -> dict[str, TensorSpec]:
    """Name -> (rows, cols, kind) for every tensor the architecture needs."""
    arch = spec.architecture
    n, c = spec.input_dim, spec.num_classes
    schema: dict[str, TensorSpec] = {}

    if arch == "cnn":
        p = spec.cnn
        schema["conv_W"] = TensorSpec(p.filters, p.rows * p.kernel, "weight")
        schema["conv_b"] = TensorSpec(1, p.filters, "bias")
        schema["dense1_W"] = TensorSpec(p.dense1, p.filters, "weight")
        schema["dense1_b"] = TensorSpec(1, p.dense1, "bias")
        schema["dense2_W"] = TensorSpec(c, p.dense1, "weight")
        schema["dense2_b"] = TensorSpec(1, c, "bias")
        return schema

    h = spec.hidden_units
    gates = GRU_GATES if "gru" in arch else LSTM_GATES
    if arch in ("gru", "lstm"):
        schema.update(_cell_schema("", gates, n, h))
        classifier_in = h
    elif arch in ("stacked_gru", "stacked_lstm"):
        schema.update(_cell_schema("l1_", gates, n, h))
        schema.update(_cell_schema("l2_", gates, h, h))
        classifier_in = h
    else:  # bi_gru / bi_lstm
        schema.update(_cell_schema("fw_", gates, n, h))
        schema.update(_cell_schema("bw_", gates, n, h))
        classifier_in = 2 * h
    schema["classifier_W"] = TensorSpec(c, classifier_in, "weight")
    schema["classifier_b"] = TensorSpec(1, c, "bias")
    return schema


@dataclass
class Model:
    spec: ModelSpec
    tensors: dict[str, np.ndarray]  # float32, shapes per tensor_schema


@dataclass(frozen=True)
class QuantTensor:
    values: np.ndarray  # int8
    scale: float
    zero_point: int


@dataclass
class QuantizedModel:
    spec: ModelSpec
    qweights: dict[str, QuantTensor]
    biases: dict[str, np.ndarray]  # float32, untouched by quantization

    def dequantized(self) -> Model:
        """Float view of the model; cached, weights-only dequantization."""
        cached = getattr(self, "_dequantized", None)
        if cached is None:
            tensors = {
                name: (qt.values.astype(np.float32) - np.float32(qt.zero_point))
                * np.float32(qt.scale)
                for name, qt in self.qweights.items()
            }
            tensors.update({name: b.copy() for name, b in self.biases.items()})
            cached = Model(spec=self.spec, tensors=tensors)
            self._dequantized = cached
        return cached


def validate_model(model: Model) -> None:
    """Shape- and finiteness-check every tensor against the schema."""
    schema = tensor_schema(model.spec)
    missing = set(schema) - set(model.tensors)
    extra = set(model.tensors) - set(schema)
    if missing or extra:
        raise ShapeMismatch(
            f"tensor set mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}"
        )
    for name, ts in schema.items():
        t = model.tensors[name]
        if t.shape != (ts.rows, ts.cols):
            raise ShapeMismatch(
                f"tensor {name}: shape {t.shape}, expected ({ts.rows}, {ts.cols})"
            )
        if not np.isfinite(t).all():
            raise NonFiniteWeight(f"tensor {name} contains NaN or Inf")


# -- serialization -------------------------------------------------------------


def _header_line(spec: ModelSpec, quant: bool) -> str:
    parts = [
        f"apkfeat-model {FORMAT_VERSION}",
        f"arch={spec.architecture}",
        f"input={spec.input_dim}",
    ]
    if spec.architecture == "cnn":
        p = spec.cnn
        parts += [
            f"classes={spec.num_classes}",
            f"filters={p.filters}",
            f"kernel={p.kernel}",
            f"dense1={p.dense1}",
            f"rows={p.rows}",
            f"width={p.row_width(spec.input_dim)}",
        ]
    else:
        parts += [f"hidden={spec.hidden_units}", f"classes={spec.num_classes}"]
    if spec.labels is not None:
        parts.append("labels=" + ",".join(spec.labels))
    if quant:
        parts.append("quant=int8")
    return " ".join(parts)


def dump_model_bytes(model: Model) -> bytes:
    validate_model(model)
    out = BytesIO()
    out.write((_header_line(model.spec, quant=False) + "\n").encode("ascii"))
    crc = 0
    for name, ts in tensor_schema(model.spec).items():
        t = np.ascontiguousarray(model.tensors[name], dtype="<f4")
        out.write(f"tensor {name} {ts.rows} {ts.cols}\n".encode("ascii"))
        raw = t.tobytes()
        crc = zlib.crc32(raw, crc)
        out.write(raw)
    out.write(f"crc32 {crc & 0xFFFFFFFF}\n".encode("ascii"))
    return out.getvalue()


def dump_quantized_bytes(qmodel: QuantizedModel) -> bytes:
    out = BytesIO()
    out.write((_header_line(qmodel.spec, quant=True) + "\n").encode("ascii"))
    crc = 0
    for name, ts in tensor_schema(qmodel.spec).items():
        if ts.kind == "weight":
            qt = qmodel.qweights[name]
            line = (
                f"tensor {name} {ts.rows} {ts.cols} "
                f"scale={float(qt.scale)!r} zero_point={qt.zero_point}\n"
            )
            raw = np.ascontiguousarray(qt.values, dtype=np.int8).tobytes()
        else:
            line = f"tensor {name} {ts.rows} {ts.cols}\n"
            raw = np.ascontiguousarray(qmodel.biases[name], dtype="<f4").tobytes()
        out.write(line.encode("ascii"))
        crc = zlib.crc32(raw, crc)
        out.write(raw)
    out.write(f"crc32 {crc & 0xFFFFFFFF}\n".encode("ascii"))
    return out.getvalue()


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_bytes(dump_model_bytes(model))


def save_quantized_model(qmodel: QuantizedModel, path: str | Path) -> None:
    Path(path).write_bytes(dump_quantized_bytes(qmodel))


def _parse_header(line: str) -> tuple[ModelSpec, bool]:
    fields = line.split(" ")
    if len(fields) < 2 or fields[0] != "apkfeat-model" or fields[1] != FORMAT_VERSION:
        raise ModelFormatError(f"bad model header: {line!r}")
    kv: dict[str, str] = {}
    for token in fields[2:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise ModelFormatError(f"bad header token {token!r}")
        kv[key] = value
    try:
        arch = kv["arch"]
        input_dim = int(kv["input"])
        classes = int(kv["classes"])
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"bad model header: {exc}") from exc
    if arch not in ARCHITECTURES:
        raise UnknownArchitecture(f"unknown architecture {arch!r}")

    labels = tuple(kv["labels"].split(",")) if "labels" in kv else None
    quant = kv.get("quant", "") == "int8"
    if "quant" in kv and not quant:
        raise ModelFormatError(f"unsupported quantization {kv['quant']!r}")

    try:
        if arch == "cnn":
            cnn = CnnParams(
                filters=int(kv.get("filters", 64)),
                kernel=int(kv.get("kernel", 3)),
                dense1=int(kv.get("dense1", 16)),
                rows=int(kv.get("rows", 3)),
                width=int(kv["width"]) if "width" in kv else None,
            )
            spec = ModelSpec(arch, input_dim, classes, cnn=cnn, labels=labels)
        else:
            spec = ModelSpec(
                arch, input_dim, classes, hidden_units=int(kv["hidden"]), labels=labels
            )
    except KeyError as exc:
        raise ModelFormatError(f"header missing {exc}") from exc
    except ValueError as exc:
        raise ModelFormatError(f"bad model header: {exc}") from exc
    return spec, quant


_TENSOR_LINE_RE = re.compile(
    r"^tensor ([A-Za-z0-9_]+) (\d+) (\d+)"
    r"(?: scale=([^ ]+) zero_point=(-?\d+))?$"
)


def _read_line(buf: bytes, pos: int) -> tuple[str, int]:
    end = buf.find(b"\n", pos)
    if end == -1:
        raise ModelFormatError("unterminated line in model file")
    try:
        return buf[pos:end].decode("ascii"), end + 1
    except UnicodeDecodeError as exc:
        raise ModelFormatError(f"non-ASCII header data: {exc}") from exc


def _load_any(data: bytes):
    line, pos = _read_line(data, 0)
    spec, quant = _parse_header(line)
    schema = tensor_schema(spec)

    floats: dict[str, np.ndarray] = {}
    qweights: dict[str, QuantTensor] = {}
    crc = 0
    declared_crc = None
    while pos < len(data):
        line, pos = _read_line(data, pos)
        if line.startswith("crc32 "):
            try:
                declared_crc = int(line[6:])
            except ValueError as exc:
                raise ModelFormatError(f"bad crc line: {line!r}") from exc
            break
        m = _TENSOR_LINE_RE.match(line)
        if not m:
            raise ModelFormatError(f"bad tensor line: {line!r}")
        name, rows, cols = m.group(1), int(m.group(2)), int(m.group(3))
        if name not in schema:
            raise ShapeMismatch(f"unexpected tensor {name!r} for {spec.architecture}")
        if name in floats or name in qweights:
            raise ModelFormatError(f"tensor {name!r} appears twice")
        ts = schema[name]
        if (rows, cols) != (ts.rows, ts.cols):
            raise ShapeMismatch(
                f"tensor {name}: file says {rows}x{cols}, schema needs {ts.rows}x{ts.cols}"
            )
        is_quant_tensor = m.group(4) is not None
        if is_quant_tensor and not (quant and ts.kind == "weight"):
            raise ModelFormatError(f"unexpected quantized tensor {name!r}")
        if quant and ts.kind == "weight" and not is_quant_tensor:
            raise ModelFormatError(f"tensor {name!r} missing scale/zero_point")

        nbytes = rows * cols * (1 if is_quant_tensor else 4)
        if pos + nbytes > len(data):
            raise ShapeMismatch(f"tensor {name!r} data truncated")
        raw = data[pos : pos + nbytes]
        pos += nbytes
        crc = zlib.crc32(raw, crc)
        if is_quant_tensor:
            try:
                scale = float(m.group(4))
            except ValueError as exc:
                raise ModelFormatError(f"bad scale on {name!r}") from exc
            zero_point = int(m.group(5))
            if scale <= 0 or not np.isfinite(scale):
                raise ModelFormatError(f"tensor {name!r}: scale must be positive")
            if not -128 <= zero_point <= 127:
                raise ModelFormatError(f"tensor {name!r}: zero_point out of int8 range")
            values = np.frombuffer(raw, dtype=np.int8).reshape(rows, cols)
            qweights[name] = QuantTensor(values=values, scale=scale, zero_point=zero_point)
        else:
            t = np.frombuffer(raw, dtype="<f4").reshape(rows, cols)
            if not np.isfinite(t).all():
                raise NonFiniteWeight(f"tensor {name!r} contains NaN or Inf")
            floats[name] = t

    if declared_crc is None:
        raise ChecksumMismatch("model file has no crc32 trailer")
    if declared_crc != (crc & 0xFFFFFFFF):
        raise ChecksumMismatch(
            f"payload crc32 {crc & 0xFFFFFFFF} != declared {declared_crc}"
        )

    loaded = set(floats) | set(qweights)
    missing = set(schema) - loaded
    if missing:
        raise ShapeMismatch(f"missing tensors: {sorted(missing)}")

    if quant:
        biases = {n: floats[n] for n, ts in schema.items() if ts.kind == "bias"}
        return QuantizedModel(spec=spec, qweights=qweights, biases=biases)
    model = Model(spec=spec, tensors=floats)
    validate_model(model)
    return model


def load_model(path: str | Path) -> Model:
    """Load a float model; rejects quantized files."""
    loaded = _load_any(Path(path).read_bytes())
    if not isinstance(loaded, Model):
        raise ModelFormatError(f"{path}: quantized model, use load_quantized_model")
    return loaded


def load_quantized_model(path: str | Path) -> QuantizedModel:
    loaded = _load_any(Path(path).read_bytes())
    if not isinstance(loaded, QuantizedModel):
        raise ModelFormatError(f"{path}: float model, use load_model")
    return loaded


def load_any_model(path: str | Path):
    """Load either flavor, dispatching on the header's quant field."""
    return _load_any(Path(path).read_bytes())


def read_model_header(path: str | Path) -> tuple[ModelSpec, bool]:
    """Cheap (spec, quantized) read of the first line only."""
    with open(path, "rb") as fh:
        first = fh.readline()
    if not first.endswith(b"\n"):
        raise ModelFormatError("model file shorter than its header line")
    try:
        return _parse_header(first[:-1].decode("ascii"))
    except UnicodeDecodeError as exc:
        raise ModelFormatError(f"non-ASCII model header: {exc}") from exc
