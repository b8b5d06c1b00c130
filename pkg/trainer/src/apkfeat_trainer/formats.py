"""Trainer-side readers/writers for the two interchange formats.

This package talks to the detection runtime only through files, so it keeps
its own implementation of both formats rather than importing the runtime's.

Vector file:
    apkfeat-vec dict=<version> dim=<n> label=<int|none>
    <n chars of 0/1>

Model file:
    apkfeat-model v1 arch=<a> input=<n> hidden=<h> classes=<c> [labels=..] [..cnn keys]
    tensor <name> <rows> <cols>
    <rows*cols float32 little-endian bytes>
    ...
    crc32 <decimal over all raw tensor bytes>

Tensor shapes are rows=output x cols=input; biases are 1 x width. The gate
tensor sets per architecture are listed in model_schema().
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """Malformed vector or model file."""


_VEC_HEADER = re.compile(r"^apkfeat-vec dict=(\S+) dim=(\d+) label=(none|-?\d+)$")
_GRU = ("z", "r", "h")
_LSTM = ("i", "f", "g", "o")


@dataclass(frozen=True)
class LabeledVector:
    dict_version: str
    bits: np.ndarray
    label: int | None


def read_vector_file(path: str | Path) -> LabeledVector:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if len(lines) < 2:
        raise FormatError(f"{path}: too short")
    m = _VEC_HEADER.match(lines[0])
    if not m:
        raise FormatError(f"{path}: bad header {lines[0]!r}")
    version, dim, label_s = m.group(1), int(m.group(2)), m.group(3)
    body = lines[1]
    if len(body) != dim or body.strip("01"):
        raise FormatError(f"{path}: body does not match dim={dim}")
    bits = np.frombuffer(body.encode("ascii"), dtype=np.uint8) - ord("0")
    return LabeledVector(
        dict_version=version,
        bits=bits,
        label=None if label_s == "none" else int(label_s),
    )


def write_vector_file(path: str | Path, dict_version: str, bits, label: int | None) -> None:
    body = "".join("1" if int(b) else "0" for b in bits)
    text = (
        f"apkfeat-vec dict={dict_version} dim={len(body)} "
        f"label={'none' if label is None else label}\n{body}\n"
    )
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _cell(prefix: str, gates, n_in: int, hidden: int) -> list[tuple[str, int, int]]:
    out = []
    for g in gates:
        out.append((f"{prefix}W_{g}", hidden, n_in))
        out.append((f"{prefix}U_{g}", hidden, hidden))
        out.append((f"{prefix}b_{g}", 1, hidden))
    return out


def model_schema(
    arch: str,
    input_dim: int,
    num_classes: int,
    hidden: int | None,
    cnn: dict | None = None,
) -> list[tuple[str, int, int]]:
    """Ordered (name, rows, cols) list for one architecture."""
    if arch == "cnn":
        p = cnn
        return [
            ("conv_W", p["filters"], p["rows"] * p["kernel"]),
            ("conv_b", 1, p["filters"]),
            ("dense1_W", p["dense1"], p["filters"]),
            ("dense1_b", 1, p["dense1"]),
            ("dense2_W", num_classes, p["dense1"]),
            ("dense2_b", 1, num_classes),
        ]
    gates = _GRU if "gru" in arch else _LSTM
    if arch in ("gru", "lstm"):
        schema = _cell("", gates, input_dim, hidden)
        cls_in = hidden
    elif arch in ("stacked_gru", "stacked_lstm"):
        schema = _cell("l1_", gates, input_dim, hidden) + _cell("l2_", gates, hidden, hidden)
        cls_in = hidden
    elif arch in ("bi_gru", "bi_lstm"):
        schema = _cell("fw_", gates, input_dim, hidden) + _cell("bw_", gates, input_dim, hidden)
        cls_in = 2 * hidden
    else:
        raise FormatError(f"unknown architecture {arch!r}")
    schema.append(("classifier_W", num_classes, cls_in))
    schema.append(("classifier_b", 1, num_classes))
    return schema


def write_model_file(
    path: str | Path,
    arch: str,
    input_dim: int,
    num_classes: int,
    tensors: dict[str, np.ndarray],
    *,
    hidden: int | None = None,
    cnn: dict | None = None,
    labels: tuple[str, ...] | None = None,
) -> None:
    parts = [f"apkfeat-model v1 arch={arch} input={input_dim}"]
    if arch == "cnn":
        parts.append(f"classes={num_classes}")
        parts += [f"{k}={cnn[k]}" for k in ("filters", "kernel", "dense1", "rows", "width")]
    else:
        parts += [f"hidden={hidden}", f"classes={num_classes}"]
    if labels:
        parts.append("labels=" + ",".join(labels))

    out = bytearray((" ".join(parts) + "\n").encode("ascii"))
    crc = 0
    for name, rows, cols in model_schema(arch, input_dim, num_classes, hidden, cnn):
        t = np.ascontiguousarray(tensors[name], dtype="<f4").reshape(rows, cols)
        if not np.isfinite(t).all():
            raise FormatError(f"tensor {name} is not finite")
        out += f"tensor {name} {rows} {cols}\n".encode("ascii")
        raw = t.tobytes()
        crc = zlib.crc32(raw, crc)
        out += raw
    out += f"crc32 {crc & 0xFFFFFFFF}\n".encode("ascii")
    Path(path).write_bytes(bytes(out))


def read_model_file(path: str | Path):
    """-> (header dict, tensors dict). Float models only."""
    data = Path(path).read_bytes()
    eol = data.find(b"\n")
    if eol == -1:
        raise FormatError(f"{path}: missing header")
    fields = data[:eol].decode("ascii").split(" ")
    if fields[:2] != ["apkfeat-model", "v1"]:
        raise FormatError(f"{path}: bad header")
    kv = dict(tok.split("=", 1) for tok in fields[2:])
    if kv.get("quant"):
        raise FormatError(f"{path}: quantized file; the trainer reads float models")
    header = {
        "arch": kv["arch"],
        "input": int(kv["input"]),
        "classes": int(kv["classes"]),
        "hidden": int(kv["hidden"]) if "hidden" in kv else None,
        "labels": tuple(kv["labels"].split(",")) if "labels" in kv else None,
        "cnn": (
            {k: int(kv[k]) for k in ("filters", "kernel", "dense1", "rows", "width")}
            if kv["arch"] == "cnn"
            else None
        ),
    }

    tensors: dict[str, np.ndarray] = {}
    pos = eol + 1
    crc = 0
    declared = None
    while pos < len(data):
        eol = data.find(b"\n", pos)
        line = data[pos:eol].decode("ascii")
        pos = eol + 1
        if line.startswith("crc32 "):
            declared = int(line[6:])
            break
        m = re.match(r"^tensor (\w+) (\d+) (\d+)$", line)
        if not m:
            raise FormatError(f"{path}: bad tensor line {line!r}")
        name, rows, cols = m.group(1), int(m.group(2)), int(m.group(3))
        nbytes = rows * cols * 4
        raw = data[pos : pos + nbytes]
        if len(raw) != nbytes:
            raise FormatError(f"{path}: tensor {name} truncated")
        crc = zlib.crc32(raw, crc)
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(rows, cols)
        pos += nbytes
    if declared is None or declared != (crc & 0xFFFFFFFF):
        raise FormatError(f"{path}: bad or missing crc trailer")

    expected = {
        name
        for name, _, _ in model_schema(
            header["arch"], header["input"], header["classes"], header["hidden"], header["cnn"]
        )
    }
    if set(tensors) != expected:
        raise FormatError(f"{path}: tensor set mismatch")
    return header, tensors
