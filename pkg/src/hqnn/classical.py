"""Dense and recurrent layers (RNN, LSTM, BiLSTM, GRU) with exact
reverse-mode gradients, sized for desk-scale training.

Formulations:

* RNN: h_t = tanh(W_x x_t + W_h h_{t-1} + b), h_0 = 0.
* LSTM: input/forget/output gates with sigmoid, candidate with tanh,
  c_t = f*c_{t-1} + i*g, h_t = o*tanh(c_t), h_0 = c_0 = 0. Gate pre-
  activations are packed in [input, forget, candidate, output] order.
* GRU: update z and reset r with sigmoid, candidate
  n = tanh(W_nx x + W_nh (r*h_{t-1}) + b_n), h_t = (1-z)*n + z*h_{t-1}.
* BiLSTM: forward and reversed LSTM passes, final hidden states
  concatenated.

Shapes: windows are (lookback, features) for one sample or
(batch, lookback, features); batched calls return batched hidden states.
Forward passes record a tape; backward(tape, upstream) replays it exactly.
Matrices initialize uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)] from the
supplied generator, biases start at zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ParameterError, ShapeError, TapeError

__all__ = [
    "DenseLayer", "RecurrentCell", "Tape",
    "dense_forward", "rnn_forward", "lstm_forward", "gru_forward",
    "bilstm_forward", "backward",
]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_ACTIVATIONS = {
    "identity": (lambda x: x, lambda y: np.ones_like(y)),
    "tanh": (np.tanh, lambda y: 1.0 - y ** 2),
    "sigmoid": (_sigmoid, lambda y: y * (1.0 - y)),
    "relu": (lambda x: np.maximum(x, 0.0), lambda y: (y > 0).astype(float)),
}


def _init_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(cols)
    return rng.uniform(-bound, bound, size=(rows, cols))


@dataclass
class DenseLayer:
    """Affine map with an elementwise activation."""

    weights: np.ndarray      # (out, in)
    bias: np.ndarray         # (out,)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError("dense weights/bias shapes inconsistent")

    @classmethod
    def initialize(cls, in_size: int, out_size: int, rng: np.random.Generator,
                   activation: str = "identity") -> "DenseLayer":
        return cls(_init_matrix(rng, out_size, in_size), np.zeros(out_size),
                   activation)


@dataclass
class RecurrentCell:
    """Parameter container for one recurrent layer of the given kind."""

    kind: str                      # "RNN" | "LSTM" | "GRU"
    input_size: int
    hidden_size: int
    params: dict[str, np.ndarray]

    EXPECTED = {
        "RNN": ("W_x", "W_h", "b"),
        "LSTM": ("W_x", "W_h", "b"),
        "GRU": ("W_gx", "W_gh", "b_g", "W_nx", "W_nh", "b_n"),
    }

    def __post_init__(self):
        if self.kind not in self.EXPECTED:
            raise ParameterError(f"unknown cell kind {self.kind!r}")
        if tuple(self.params) != self.EXPECTED[self.kind]:
            raise ShapeError(f"{self.kind} cell expects parameters "
                             f"{self.EXPECTED[self.kind]}")
        d, h = self.input_size, self.hidden_size
        shapes = self._shapes(self.kind, d, h)
        for name, arr in self.params.items():
            if arr.shape != shapes[name]:
                raise ShapeError(f"{self.kind} parameter {name} has shape "
                                 f"{arr.shape}, expected {shapes[name]}")

    @staticmethod
    def _shapes(kind: str, d: int, h: int) -> dict[str, tuple]:
        if kind == "RNN":
            return {"W_x": (h, d), "W_h": (h, h), "b": (h,)}
        if kind == "LSTM":
            return {"W_x": (4 * h, d), "W_h": (4 * h, h), "b": (4 * h,)}
        return {"W_gx": (2 * h, d), "W_gh": (2 * h, h), "b_g": (2 * h,),
                "W_nx": (h, d), "W_nh": (h, h), "b_n": (h,)}

    @classmethod
    def initialize(cls, kind: str, input_size: int, hidden_size: int,
                   rng: np.random.Generator) -> "RecurrentCell":
        shapes = cls._shapes(kind, input_size, hidden_size)
        params = {}
        for name in cls.EXPECTED[kind]:
            shape = shapes[name]
            if len(shape) == 1:
                params[name] = np.zeros(shape)
            else:
                params[name] = _init_matrix(rng, *shape)
        return cls(kind, input_size, hidden_size, params)


@dataclass
class Tape:
    """Forward intermediates for one exact reverse pass."""

    kind: str
    cell: object
    stash: dict
    squeeze: bool
    param_ids: dict[str, int] = field(default_factory=dict)

    def check(self, cell) -> None:
        if cell is not self.cell:
            raise TapeError("tape does not belong to this layer")
        current = _param_ids(cell)
        if current != self.param_ids:
            raise TapeError("tape is stale: parameters changed since forward")


def _param_ids(cell) -> dict[str, int]:
    if isinstance(cell, DenseLayer):
        return {"weights": id(cell.weights), "bias": id(cell.bias)}
    if isinstance(cell, RecurrentCell):
        return {k: id(v) for k, v in cell.params.items()}
    if isinstance(cell, tuple):           # BiLSTM pair
        out = {}
        for tag, c in zip(("fwd", "bwd"), cell):
            out.update({f"{tag}.{k}": v for k, v in _param_ids(c).items()})
        return out
    raise TapeError(f"unsupported layer object {type(cell).__name__}")


def _as_batch(window) -> tuple[np.ndarray, bool]:
    w = np.asarray(window, dtype=np.float64)
    if w.ndim == 2:
        return w[None, :, :], True
    if w.ndim == 3:
        return w, False
    raise ShapeError(f"window must be 2-d or 3-d, got {w.ndim}-d")


def _as_batch_vec(x) -> tuple[np.ndarray, bool]:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 1:
        return v[None, :], True
    if v.ndim == 2:
        return v, False
    raise ShapeError(f"input must be 1-d or 2-d, got {v.ndim}-d")


def dense_forward(layer: DenseLayer, x) -> tuple[np.ndarray, Tape]:
    xb, squeeze = _as_batch_vec(x)
    if xb.shape[1] != layer.weights.shape[1]:
        raise ShapeError(f"dense expects {layer.weights.shape[1]} inputs, "
                         f"got {xb.shape[1]}")
    act, _ = _ACTIVATIONS[layer.activation]
    y = act(xb @ layer.weights.T + layer.bias)
    tape = Tape("dense", layer, {"x": xb, "y": y}, squeeze, _param_ids(layer))
    return (y[0] if squeeze else y), tape


def _dense_backward(tape: Tape, dy: np.ndarray):
    layer: DenseLayer = tape.cell
    _, dact = _ACTIVATIONS[layer.activation]
    x, y = tape.stash["x"], tape.stash["y"]
    da = dy * dact(y)
    grads = {"weights": da.T @ x, "bias": da.sum(axis=0)}
    return grads, da @ layer.weights


def rnn_forward(cell: RecurrentCell, window) -> tuple[np.ndarray, Tape]:
    if cell.kind != "RNN":
        raise ShapeError(f"rnn_forward needs an RNN cell, got {cell.kind}")
    xb, squeeze = _as_batch(window)
    b, t_len, d = xb.shape
    if d != cell.input_size or t_len < 1:
        raise ShapeError(f"window shape {xb.shape[1:]} inconsistent with "
                         f"input size {cell.input_size}")
    p = cell.params
    h = np.zeros((b, cell.hidden_size))
    hs = [h]
    for t in range(t_len):
        h = np.tanh(xb[:, t] @ p["W_x"].T + h @ p["W_h"].T + p["b"])
        hs.append(h)
    tape = Tape("RNN", cell, {"x": xb, "hs": hs}, squeeze, _param_ids(cell))
    return (h[0] if squeeze else h), tape


def _rnn_backward(tape: Tape, dh_last: np.ndarray):
    cell: RecurrentCell = tape.cell
    p = cell.params
    xb, hs = tape.stash["x"], tape.stash["hs"]
    t_len = xb.shape[1]
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    dx = np.zeros_like(xb)
    dh = dh_last
    for t in range(t_len - 1, -1, -1):
        da = dh * (1.0 - hs[t + 1] ** 2)
        grads["W_x"] += da.T @ xb[:, t]
        grads["W_h"] += da.T @ hs[t]
        grads["b"] += da.sum(axis=0)
        dx[:, t] = da @ p["W_x"]
        dh = da @ p["W_h"]
    return grads, dx


def lstm_forward(cell: RecurrentCell, window) -> tuple[np.ndarray, Tape]:
    if cell.kind != "LSTM":
        raise ShapeError(f"lstm_forward needs an LSTM cell, got {cell.kind}")
    xb, squeeze = _as_batch(window)
    b, t_len, d = xb.shape
    if d != cell.input_size or t_len < 1:
        raise ShapeError(f"window shape {xb.shape[1:]} inconsistent with "
                         f"input size {cell.input_size}")
    p = cell.params
    hsz = cell.hidden_size
    h = np.zeros((b, hsz))
    c = np.zeros((b, hsz))
    hs, cs, gates = [h], [c], []
    for t in range(t_len):
        z = xb[:, t] @ p["W_x"].T + h @ p["W_h"].T + p["b"]
        i = _sigmoid(z[:, :hsz])
        f = _sigmoid(z[:, hsz:2 * hsz])
        g = np.tanh(z[:, 2 * hsz:3 * hsz])
        o = _sigmoid(z[:, 3 * hsz:])
        c = f * c + i * g
        h = o * np.tanh(c)
        hs.append(h)
        cs.append(c)
        gates.append((i, f, g, o))
    tape = Tape("LSTM", cell, {"x": xb, "hs": hs, "cs": cs, "gates": gates},
                squeeze, _param_ids(cell))
    return (h[0] if squeeze else h), tape


def _lstm_backward(tape: Tape, dh_last: np.ndarray):
    cell: RecurrentCell = tape.cell
    p = cell.params
    xb, hs, cs, gates = (tape.stash[k] for k in ("x", "hs", "cs", "gates"))
    t_len = xb.shape[1]
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    dx = np.zeros_like(xb)
    dh = dh_last
    dc = np.zeros_like(dh_last)
    for t in range(t_len - 1, -1, -1):
        i, f, g, o = gates[t]
        tc = np.tanh(cs[t + 1])
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc ** 2)
        di, df, dg = dc * g, dc * cs[t], dc * i
        dz = np.concatenate([di * i * (1 - i), df * f * (1 - f),
                             dg * (1.0 - g ** 2), do * o * (1 - o)], axis=1)
        grads["W_x"] += dz.T @ xb[:, t]
        grads["W_h"] += dz.T @ hs[t]
        grads["b"] += dz.sum(axis=0)
        dx[:, t] = dz @ p["W_x"]
        dh = dz @ p["W_h"]
        dc = dc * f
    return grads, dx


def gru_forward(cell: RecurrentCell, window) -> tuple[np.ndarray, Tape]:
    if cell.kind != "GRU":
        raise ShapeError(f"gru_forward needs a GRU cell, got {cell.kind}")
    xb, squeeze = _as_batch(window)
    b, t_len, d = xb.shape
    if d != cell.input_size or t_len < 1:
        raise ShapeError(f"window shape {xb.shape[1:]} inconsistent with "
                         f"input size {cell.input_size}")
    p = cell.params
    hsz = cell.hidden_size
    h = np.zeros((b, hsz))
    hs, gates = [h], []
    for t in range(t_len):
        zr = _sigmoid(xb[:, t] @ p["W_gx"].T + h @ p["W_gh"].T + p["b_g"])
        z, r = zr[:, :hsz], zr[:, hsz:]
        rh = r * h
        n = np.tanh(xb[:, t] @ p["W_nx"].T + rh @ p["W_nh"].T + p["b_n"])
        h = (1.0 - z) * n + z * h
        hs.append(h)
        gates.append((z, r, n, rh))
    tape = Tape("GRU", cell, {"x": xb, "hs": hs, "gates": gates}, squeeze,
                _param_ids(cell))
    return (h[0] if squeeze else h), tape


def _gru_backward(tape: Tape, dh_last: np.ndarray):
    cell: RecurrentCell = tape.cell
    p = cell.params
    xb, hs, gates = (tape.stash[k] for k in ("x", "hs", "gates"))
    t_len = xb.shape[1]
    grads = {k: np.zeros_like(v) for k, v in p.items()}
    dx = np.zeros_like(xb)
    dh = dh_last
    for t in range(t_len - 1, -1, -1):
        z, r, n, rh = gates[t]
        h_prev = hs[t]
        dz = dh * (h_prev - n)
        dn = dh * (1.0 - z)
        dh_prev = dh * z
        dan = dn * (1.0 - n ** 2)
        grads["W_nx"] += dan.T @ xb[:, t]
        grads["W_nh"] += dan.T @ rh
        grads["b_n"] += dan.sum(axis=0)
        drh = dan @ p["W_nh"]
        dr = drh * h_prev
        dh_prev = dh_prev + drh * r
        dg = np.concatenate([dz * z * (1 - z), dr * r * (1 - r)], axis=1)
        grads["W_gx"] += dg.T @ xb[:, t]
        grads["W_gh"] += dg.T @ h_prev
        grads["b_g"] += dg.sum(axis=0)
        dx[:, t] = dan @ p["W_nx"] + dg @ p["W_gx"]
        dh = dh_prev + dg @ p["W_gh"]
    return grads, dx


def bilstm_forward(forward_cell: RecurrentCell, backward_cell: RecurrentCell,
                   window) -> tuple[np.ndarray, Tape]:
    """Concatenated final hidden states of a forward and a reversed pass."""
    if forward_cell.kind != "LSTM" or backward_cell.kind != "LSTM":
        raise ShapeError("bilstm_forward needs two LSTM cells")
    if forward_cell.hidden_size != backward_cell.hidden_size:
        raise ShapeError("bilstm cells must share a hidden size")
    xb, squeeze = _as_batch(window)
    h_fwd, tape_fwd = lstm_forward(forward_cell, xb)
    h_bwd, tape_bwd = lstm_forward(backward_cell, xb[:, ::-1, :])
    h = np.concatenate([h_fwd, h_bwd], axis=1)
    tape = Tape("BiLSTM", (forward_cell, backward_cell),
                {"fwd": tape_fwd, "bwd": tape_bwd, "hidden": forward_cell.hidden_size},
                squeeze, _param_ids((forward_cell, backward_cell)))
    return (h[0] if squeeze else h), tape


def _bilstm_backward(tape: Tape, dh_last: np.ndarray):
    hsz = tape.stash["hidden"]
    g_fwd, dx_fwd = _lstm_backward(tape.stash["fwd"], dh_last[:, :hsz])
    g_bwd, dx_rev = _lstm_backward(tape.stash["bwd"], dh_last[:, hsz:])
    grads = {f"fwd.{k}": v for k, v in g_fwd.items()}
    grads.update({f"bwd.{k}": v for k, v in g_bwd.items()})
    return grads, dx_fwd + dx_rev[:, ::-1, :]


_BACKWARD = {
    "dense": _dense_backward,
    "RNN": _rnn_backward,
    "LSTM": _lstm_backward,
    "GRU": _gru_backward,
    "BiLSTM": _bilstm_backward,
}


def backward(tape: Tape, upstream) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Exact gradients of the recorded forward pass.

    upstream is the cotangent of the forward output (matching its shape).
    Returns (parameter gradients, input gradients); for single-sample tapes
    the input gradient is squeezed back to the input's shape.
    """
    tape.check(tape.cell)
    up = np.asarray(upstream, dtype=np.float64)
    if tape.squeeze:
        up = up[None, ...]
    expected = _expected_upstream(tape)
    if up.shape != expected:
        raise TapeError(f"upstream shape {up.shape} does not match forward "
                        f"output {expected}")
    grads, dx = _BACKWARD[tape.kind](tape, up)
    if tape.squeeze:
        dx = dx[0]
    return grads, dx


def _expected_upstream(tape: Tape) -> tuple:
    if tape.kind == "dense":
        return tape.stash["y"].shape
    if tape.kind == "BiLSTM":
        b = tape.stash["fwd"].stash["x"].shape[0]
        return (b, 2 * tape.stash["hidden"])
    b = tape.stash["x"].shape[0]
    return (b, tape.cell.hidden_size)
