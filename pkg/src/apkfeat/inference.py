"""Forward passes for the seven architectures plus softmax classification.

Every recurrent network runs exactly one timestep from a zero initial state
(the input reshape fixes sequence length 1), which makes each forward pass a
shallow feedforward computation. Cell conventions, fixed here and mirrored by
the weight-format shape table:

    GRU   z = sig(W_z x + U_z h0 + b_z)      LSTM  i,f,o = sig(...), g = tanh(...)
          r = sig(W_r x + U_r h0 + b_r)            c = f*c0 + i*g
          ht = tanh(W_h x + U_h (r*h0) + b_h)      h = o * tanh(c)
          h = (1-z)*h0 + z*ht

Dropout exists only at training time; inference is the identity. Predictions
are deterministic and models are immutable, so one loaded model may serve
concurrent predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .models import GRU_GATES, LSTM_GATES, Model, ModelSpec

_F32 = np.float32


@dataclass(frozen=True)
class Prediction:
    probabilities: np.ndarray  # float64, sums to 1 within 1e-6
    label: int                 # argmax; ties break to the lowest index
    confidence: float          # max probability


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax (max-subtraction), computed in float64."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _as_input(spec: ModelSpec, x) -> np.ndarray:
    bits = getattr(x, "bits", x)
    arr = np.asarray(bits, dtype=_F32)
    if arr.ndim != 1 or arr.shape[0] != spec.input_dim:
        raise DimensionMismatch(
            f"input of length {arr.shape}, model expects {spec.input_dim}"
        )
    return arr


def _gru_step(t: dict, prefix: str, x: np.ndarray, h0: np.ndarray) -> np.ndarray:
    w = lambda n: t[prefix + n]  # noqa: E731
    z = _sigmoid(w("W_z") @ x + w("U_z") @ h0 + w("b_z")[0])
    r = _sigmoid(w("W_r") @ x + w("U_r") @ h0 + w("b_r")[0])
    ht = np.tanh(w("W_h") @ x + w("U_h") @ (r * h0) + w("b_h")[0])
    return (1.0 - z) * h0 + z * ht


def _lstm_step(t: dict, prefix: str, x: np.ndarray, h0: np.ndarray, c0: np.ndarray):
    w = lambda n: t[prefix + n]  # noqa: E731
    i = _sigmoid(w("W_i") @ x + w("U_i") @ h0 + w("b_i")[0])
    f = _sigmoid(w("W_f") @ x + w("U_f") @ h0 + w("b_f")[0])
    g = np.tanh(w("W_g") @ x + w("U_g") @ h0 + w("b_g")[0])
    o = _sigmoid(w("W_o") @ x + w("U_o") @ h0 + w("b_o")[0])
    c = f * c0 + i * g
    return o * np.tanh(c)


def _zeros(spec: ModelSpec) -> np.ndarray:
    return np.zeros(spec.hidden_units, dtype=_F32)


def forward_gru(model: Model, x) -> np.ndarray:
    xv = _as_input(model.spec, x)
    return _gru_step(model.tensors, "", xv, _zeros(model.spec))


def forward_lstm(model: Model, x) -> np.ndarray:
    xv = _as_input(model.spec, x)
    z = _zeros(model.spec)
    return _lstm_step(model.tensors, "", xv, z, z)


def forward_stacked(model: Model, x) -> np.ndarray:
    """Layer 1 output becomes the single-timestep input of layer 2."""
    xv = _as_input(model.spec, x)
    z = _zeros(model.spec)
    if model.spec.architecture == "stacked_gru":
        h1 = _gru_step(model.tensors, "l1_", xv, z)
        return _gru_step(model.tensors, "l2_", h1, z)
    h1 = _lstm_step(model.tensors, "l1_", xv, z, z)
    return _lstm_step(model.tensors, "l2_", h1, z, z)


def forward_bidirectional(model: Model, x) -> np.ndarray:
    """concat(forward, backward); with length-1 input both cells see the same vector."""
    xv = _as_input(model.spec, x)
    z = _zeros(model.spec)
    if model.spec.architecture == "bi_gru":
        fw = _gru_step(model.tensors, "fw_", xv, z)
        bw = _gru_step(model.tensors, "bw_", xv, z)
    else:
        fw = _lstm_step(model.tensors, "fw_", xv, z, z)
        bw = _lstm_step(model.tensors, "bw_", xv, z, z)
    return np.concatenate([fw, bw])


def forward_cnn(model: Model, x) -> np.ndarray:
    """Pad, reshape to rows, convolve, max-pool, two dense layers -> logits."""
    spec = model.spec
    p = spec.cnn
    xv = _as_input(spec, x)
    t = model.tensors

    padded = np.concatenate([xv, np.zeros(1, dtype=_F32)])
    width = p.row_width(spec.input_dim)
    m = padded[: p.rows * width].reshape(p.rows, width)

    kernel3 = t["conv_W"].reshape(p.filters, p.rows, p.kernel)
    positions = width - p.kernel + 1
    windows = np.empty((p.rows, p.kernel, positions), dtype=_F32)
    for k in range(p.kernel):
        windows[:, k, :] = m[:, k : k + positions]
    conv = np.einsum("frk,rkp->fp", kernel3, windows) + t["conv_b"][0][:, None]
    conv = np.maximum(conv, 0.0)

    pooled = conv.max(axis=1)
    d1 = np.maximum(t["dense1_W"] @ pooled + t["dense1_b"][0], 0.0)
    return t["dense2_W"] @ d1 + t["dense2_b"][0]


_FORWARDS = {
    "gru": forward_gru,
    "lstm": forward_lstm,
    "stacked_gru": forward_stacked,
    "stacked_lstm": forward_stacked,
    "bi_gru": forward_bidirectional,
    "bi_lstm": forward_bidirectional,
}


def forward_logits(model: Model, x) -> np.ndarray:
    """Pre-softmax logits for any architecture."""
    if model.spec.architecture == "cnn":
        return forward_cnn(model, x)
    hidden = _FORWARDS[model.spec.architecture](model, x)
    return model.tensors["classifier_W"] @ hidden + model.tensors["classifier_b"][0]


def predict(model: Model, x) -> Prediction:
    """Class probabilities for one feature vector."""
    probabilities = softmax(forward_logits(model, x))
    label = int(np.argmax(probabilities))  # argmax returns the lowest tied index
    return Prediction(
        probabilities=probabilities,
        label=label,
        confidence=float(probabilities[label]),
    )


# -- batched path --------------------------------------------------------------
#
# With a zero initial state the update gate alone drives the GRU output and
# the forget gate drops out of the LSTM, so the batched closed forms below
# are exact, not approximations.


def _gru_batch(t: dict, prefix: str, x: np.ndarray) -> np.ndarray:
    w = lambda n: t[prefix + n]  # noqa: E731
    z = _sigmoid(x @ w("W_z").T + w("b_z")[0])
    ht = np.tanh(x @ w("W_h").T + w("b_h")[0])
    return z * ht


def _lstm_batch(t: dict, prefix: str, x: np.ndarray) -> np.ndarray:
    w = lambda n: t[prefix + n]  # noqa: E731
    i = _sigmoid(x @ w("W_i").T + w("b_i")[0])
    g = np.tanh(x @ w("W_g").T + w("b_g")[0])
    o = _sigmoid(x @ w("W_o").T + w("b_o")[0])
    return o * np.tanh(i * g)


def forward_logits_batch(model: Model, inputs: np.ndarray) -> np.ndarray:
    """Logits for a (batch, input_dim) matrix of feature vectors."""
    spec = model.spec
    x = np.ascontiguousarray(inputs, dtype=_F32)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise DimensionMismatch(
            f"batch of shape {x.shape}, model expects (*, {spec.input_dim})"
        )
    t = model.tensors
    arch = spec.architecture

    if arch == "cnn":
        p = spec.cnn
        width = p.row_width(spec.input_dim)
        padded = np.concatenate([x, np.zeros((x.shape[0], 1), dtype=_F32)], axis=1)
        m = padded[:, : p.rows * width].reshape(-1, p.rows, width)
        kernel3 = t["conv_W"].reshape(p.filters, p.rows, p.kernel)
        positions = width - p.kernel + 1
        windows = np.empty((x.shape[0], p.rows, p.kernel, positions), dtype=_F32)
        for k in range(p.kernel):
            windows[:, :, k, :] = m[:, :, k : k + positions]
        conv = np.einsum("frk,brkp->bfp", kernel3, windows) + t["conv_b"][0][None, :, None]
        pooled = np.maximum(conv, 0.0).max(axis=2)
        d1 = np.maximum(pooled @ t["dense1_W"].T + t["dense1_b"][0], 0.0)
        return d1 @ t["dense2_W"].T + t["dense2_b"][0]

    if arch == "gru":
        hidden = _gru_batch(t, "", x)
    elif arch == "lstm":
        hidden = _lstm_batch(t, "", x)
    elif arch == "stacked_gru":
        hidden = _gru_batch(t, "l2_", _gru_batch(t, "l1_", x))
    elif arch == "stacked_lstm":
        hidden = _lstm_batch(t, "l2_", _lstm_batch(t, "l1_", x))
    elif arch == "bi_gru":
        hidden = np.concatenate([_gru_batch(t, "fw_", x), _gru_batch(t, "bw_", x)], axis=1)
    else:
        hidden = np.concatenate([_lstm_batch(t, "fw_", x), _lstm_batch(t, "bw_", x)], axis=1)
    return hidden @ t["classifier_W"].T + t["classifier_b"][0]


def predict_batch(model: Model, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(labels, probabilities) for a batch; same semantics as predict()."""
    probs = softmax(forward_logits_batch(model, inputs))
    return np.argmax(probs, axis=1), probs
