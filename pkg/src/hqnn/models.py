"""The seven regressor architectures behind one forward/backward interface.

Quantum kinds (the feature count always equals the qubit count):

* CustomQNN: data re-uploading. Each lookback timestep contributes an
  encoding block followed by one trainable ansatz block, so a register of k
  qubits consumes the whole (lookback x k) window without any classical
  projection. All Z expectations feed a linear readout.
* HybridQNN1: LSTM over the window, a sigmoid squash layer mapping the final
  hidden state into [0,1]^n, angle encoding, a shallow trainable circuit
  (one block by default), Z expectations, linear readout.
* HybridQNN2: two parallel branches. The window mean-pooled per feature is
  encoded and run through the trainable ansatz (two blocks by default) to
  give the quantum feature vector; an LSTM plus dense layer gives the
  classical feature vector. A fusion layer combines them,
  tanh(W_quantum . x_qnn + W_classical . x_dl), followed by a linear
  prediction layer. Zeroing one fusion matrix provably disconnects that
  branch's internals from the output.

Classical kinds (LSTM, RNN, BiLSTM, GRU): recurrent pass, linear readout.

Forward accepts one window (lookback x features) or a batch
(batch x lookback x features); gradients combine reverse-mode
backpropagation for the classical parts with parameter-shift rules for the
circuits, chained through the encoding map. Predictions are unclamped reals
targeting the scaled close.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import classical as cl
from . import quantum as q
from .exceptions import ParameterError, ShapeError, TapeError

__all__ = [
    "CLASSICAL_KINDS", "QUANTUM_KINDS", "MODEL_KINDS",
    "RegressorSpec", "ParameterBundle", "ModelTape",
    "build_model", "init_params", "forward", "backward", "count_parameters",
]

QUANTUM_KINDS = ("CustomQNN", "HybridQNN1", "HybridQNN2")
CLASSICAL_KINDS = ("LSTM", "RNN", "BiLSTM", "GRU")
MODEL_KINDS = QUANTUM_KINDS + CLASSICAL_KINDS


@dataclass(frozen=True)
class RegressorSpec:
    """Architecture and sizing for one regressor."""

    kind: str
    n_qubits: int = 3
    k_features: int = 3
    lookback: int = 2
    hidden_size: int = 16
    ansatz_layers: int | None = None      # None picks the per-kind default
    fusion_dim: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ParameterError(f"unknown model kind {self.kind!r}; "
                                 f"expected one of {MODEL_KINDS}")
        for name in ("k_features", "lookback", "hidden_size", "fusion_dim"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive")
        if self.kind in QUANTUM_KINDS:
            if self.n_qubits != self.k_features:
                raise ParameterError(
                    f"{self.kind} requires n_qubits == k_features, got "
                    f"{self.n_qubits} != {self.k_features}")
            if not 1 <= self.n_qubits <= q.MAX_QUBITS:
                raise ParameterError(
                    f"n_qubits must be in [1, {q.MAX_QUBITS}]")
        if self.ansatz_layers is not None and self.ansatz_layers < 1:
            raise ParameterError("ansatz_layers must be positive")

    @property
    def effective_layers(self) -> int:
        """Trainable blocks per circuit: per re-upload step for CustomQNN,
        shallow default for HybridQNN1, deeper default for HybridQNN2."""
        if self.ansatz_layers is not None:
            return self.ansatz_layers
        return {"CustomQNN": 1, "HybridQNN1": 1, "HybridQNN2": 2}.get(self.kind, 1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_qubits": self.n_qubits,
                "k_features": self.k_features, "lookback": self.lookback,
                "hidden_size": self.hidden_size,
                "ansatz_layers": self.ansatz_layers,
                "fusion_dim": self.fusion_dim, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressorSpec":
        return cls(**d)


class ParameterBundle:
    """Ordered named arrays holding every trainable scalar exactly once."""

    def __init__(self, arrays: dict[str, np.ndarray]):
        self.arrays = {k: np.asarray(v, dtype=np.float64)
                       for k, v in arrays.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self.arrays

    @property
    def names(self) -> list[str]:
        return list(self.arrays)

    @property
    def total_count(self) -> int:
        return sum(a.size for a in self.arrays.values())

    def flatten(self) -> np.ndarray:
        if not self.arrays:
            return np.zeros(0)
        return np.concatenate([a.ravel() for a in self.arrays.values()])

    def with_flat(self, flat: np.ndarray) -> "ParameterBundle":
        """Rebuild a bundle with this one's layout from a flat vector."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.total_count:
            raise ShapeError(f"flat vector has {flat.size} entries, bundle "
                             f"holds {self.total_count}")
        out, offset = {}, 0
        for name, arr in self.arrays.items():
            out[name] = flat[offset:offset + arr.size].reshape(arr.shape).copy()
            offset += arr.size
        return ParameterBundle(out)

    def copy(self) -> "ParameterBundle":
        return ParameterBundle({k: v.copy() for k, v in self.arrays.items()})

    def zeros_like(self) -> "ParameterBundle":
        return ParameterBundle({k: np.zeros_like(v)
                                for k, v in self.arrays.items()})

    def to_dict(self) -> dict:
        return {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                for k, v in self.arrays.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ParameterBundle":
        return cls({k: np.asarray(e["data"], dtype=np.float64)
                    .reshape(e["shape"]) for k, e in d.items()})


@dataclass
class ModelTape:
    """Everything backward needs from one forward pass."""

    spec: RegressorSpec
    params: ParameterBundle
    squeeze: bool
    stash: dict = field(default_factory=dict)


def _check_window(spec: RegressorSpec, window) -> tuple[np.ndarray, bool]:
    w = np.asarray(window, dtype=np.float64)
    squeeze = w.ndim == 2
    if squeeze:
        w = w[None, :, :]
    if w.ndim != 3 or w.shape[1] != spec.lookback or w.shape[2] != spec.k_features:
        raise ShapeError(
            f"window shape {np.shape(window)} inconsistent with lookback "
            f"{spec.lookback} x {spec.k_features} features")
    return w, squeeze


def _repeat_for_slots(values: np.ndarray) -> np.ndarray:
    """Duplicate each encoding value for its RY/RZ gate pair."""
    return np.repeat(values, 2, axis=-1)


def _readout(params: ParameterBundle, features: np.ndarray) -> np.ndarray:
    return features @ params["readout.weights"] + params["readout.bias"][0]


def _readout_backward(params: ParameterBundle, features: np.ndarray,
                      up: np.ndarray) -> tuple[dict, np.ndarray]:
    grads = {"readout.weights": features.T @ up,
             "readout.bias": np.array([up.sum()])}
    return grads, np.outer(up, params["readout.weights"])


class _ModelBase:
    def __init__(self, spec: RegressorSpec):
        self.spec = spec

    def _check_tape(self, tape: ModelTape, params_hint=None):
        if tape.spec != self.spec:
            raise TapeError("tape was recorded by a different model spec")

    def init_params(self) -> ParameterBundle:
        raise NotImplementedError

    def forward(self, params: ParameterBundle, window):
        raise NotImplementedError

    def backward(self, tape: ModelTape, upstream) -> ParameterBundle:
        raise NotImplementedError

    def count_parameters(self) -> int:
        return self.init_params().total_count

    def _finish(self, pred: np.ndarray, squeeze: bool):
        return (float(pred[0]) if squeeze else pred)

    def _upstream(self, tape: ModelTape, upstream) -> np.ndarray:
        up = np.asarray(upstream, dtype=np.float64)
        if tape.squeeze:
            up = up.reshape(1)
        expected = tape.stash["batch"]
        if up.shape != (expected,):
            raise TapeError(f"upstream shape {up.shape} does not match the "
                            f"forward batch of {expected}")
        return up


def _recurrent_cells(spec: RegressorSpec, params: ParameterBundle,
                     prefix: str, kind: str) -> cl.RecurrentCell:
    names = cl.RecurrentCell.EXPECTED[kind]
    return cl.RecurrentCell(kind, spec.k_features, spec.hidden_size,
                            {n: params[f"{prefix}.{n}"] for n in names})


def _init_recurrent(spec: RegressorSpec, prefix: str, kind: str,
                    rng: np.random.Generator) -> dict[str, np.ndarray]:
    cell = cl.RecurrentCell.initialize(kind, spec.k_features,
                                       spec.hidden_size, rng)
    return {f"{prefix}.{n}": a for n, a in cell.params.items()}


class _CustomQnn(_ModelBase):
    def __init__(self, spec: RegressorSpec):
        super().__init__(spec)
        n, k = spec.n_qubits, spec.k_features
        gates: list[q.Gate] = []
        var_slot = 0
        for t in range(spec.lookback):
            gates.extend(q.encode(np.full(k, 0.5), start_slot=2 * k * t))
            block = q.ansatz_gates(n, spec.effective_layers, start_slot=var_slot)
            gates.extend(block)
            var_slot += 2 * n * spec.effective_layers
        self.circuit = q.make_program(n, gates)
        self.obs = q.Observable.all_z(n)

    def init_params(self) -> ParameterBundle:
        rng = np.random.default_rng(self.spec.seed)
        return ParameterBundle({
            "variational": rng.uniform(-0.1, 0.1,
                                       self.circuit.variational_slots),
            "readout.weights": cl._init_matrix(
                rng, 1, self.spec.n_qubits)[0],
            "readout.bias": np.zeros(1),
        })

    def forward(self, params: ParameterBundle, window):
        w, squeeze = _check_window(self.spec, window)
        enc = _repeat_for_slots(w.reshape(w.shape[0], -1))
        z = q.run_batch(self.circuit, enc, params["variational"], self.obs)
        pred = _readout(params, z)
        tape = ModelTape(self.spec, params, squeeze,
                         {"batch": w.shape[0], "enc": enc, "z": z})
        return self._finish(pred, squeeze), tape

    def backward(self, tape: ModelTape, upstream) -> ParameterBundle:
        self._check_tape(tape)
        up = self._upstream(tape, upstream)
        grads, dz = _readout_backward(tape.params, tape.stash["z"], up)
        grad_var, _ = q.parameter_shift_grad_batch(
            self.circuit, tape.stash["enc"], tape.params["variational"],
            self.obs, dz, need_encoding=False)
        out = {"variational": grad_var}
        out.update(grads)
        return ParameterBundle({n: out[n] for n in tape.params.names})


class _HybridQnn1(_ModelBase):
    def __init__(self, spec: RegressorSpec):
        super().__init__(spec)
        n = spec.n_qubits
        gates = q.encode(np.full(n, 0.5)) + q.ansatz_gates(
            n, spec.effective_layers)
        self.circuit = q.make_program(n, gates)
        self.obs = q.Observable.all_z(n)

    def init_params(self) -> ParameterBundle:
        spec = self.spec
        rng = np.random.default_rng(spec.seed)
        arrays = _init_recurrent(spec, "lstm", "LSTM", rng)
        arrays["squash.weights"] = cl._init_matrix(rng, spec.n_qubits,
                                                   spec.hidden_size)
        arrays["squash.bias"] = np.zeros(spec.n_qubits)
        arrays["variational"] = rng.uniform(
            -0.1, 0.1, self.circuit.variational_slots)
        arrays["readout.weights"] = cl._init_matrix(rng, 1, spec.n_qubits)[0]
        arrays["readout.bias"] = np.zeros(1)
        return ParameterBundle(arrays)

    def forward(self, params: ParameterBundle, window):
        w, squeeze = _check_window(self.spec, window)
        cell = _recurrent_cells(self.spec, params, "lstm", "LSTM")
        h, lstm_tape = cl.lstm_forward(cell, w)
        squash = cl.DenseLayer(params["squash.weights"],
                               params["squash.bias"], "sigmoid")
        s, squash_tape = cl.dense_forward(squash, h)
        z = q.run_batch(self.circuit, _repeat_for_slots(s),
                        params["variational"], self.obs)
        pred = _readout(params, z)
        tape = ModelTape(self.spec, params, squeeze,
                         {"batch": w.shape[0], "s": s, "z": z,
                          "lstm_tape": lstm_tape, "squash_tape": squash_tape})
        return self._finish(pred, squeeze), tape

    def backward(self, tape: ModelTape, upstream) -> ParameterBundle:
        self._check_tape(tape)
        up = self._upstream(tape, upstream)
        out, dz = _readout_backward(tape.params, tape.stash["z"], up)
        grad_var, grad_enc = q.parameter_shift_grad_batch(
            self.circuit, _repeat_for_slots(tape.stash["s"]),
            tape.params["variational"], self.obs, dz, need_encoding=True)
        out["variational"] = grad_var
        ds = grad_enc[:, 0::2] + grad_enc[:, 1::2]
        sq_grads, dh = cl.backward(tape.stash["squash_tape"], ds)
        out["squash.weights"] = sq_grads["weights"]
        out["squash.bias"] = sq_grads["bias"]
        lstm_grads, _ = cl.backward(tape.stash["lstm_tape"], dh)
        out.update({f"lstm.{k}": v for k, v in lstm_grads.items()})
        return ParameterBundle({n: out[n] for n in tape.params.names})


class _HybridQnn2(_ModelBase):
    def __init__(self, spec: RegressorSpec):
        super().__init__(spec)
        n = spec.n_qubits
        gates = q.encode(np.full(n, 0.5)) + q.ansatz_gates(
            n, spec.effective_layers)
        self.circuit = q.make_program(n, gates)
        self.obs = q.Observable.all_z(n)

    def init_params(self) -> ParameterBundle:
        spec = self.spec
        rng = np.random.default_rng(spec.seed)
        arrays = _init_recurrent(spec, "lstm", "LSTM", rng)
        arrays["dl.weights"] = cl._init_matrix(rng, spec.n_qubits,
                                               spec.hidden_size)
        arrays["dl.bias"] = np.zeros(spec.n_qubits)
        arrays["variational"] = rng.uniform(
            -0.1, 0.1, self.circuit.variational_slots)
        arrays["fusion.W_quantum"] = cl._init_matrix(rng, spec.fusion_dim,
                                                     spec.n_qubits)
        arrays["fusion.W_classical"] = cl._init_matrix(rng, spec.fusion_dim,
                                                       spec.n_qubits)
        arrays["readout.weights"] = cl._init_matrix(rng, 1, spec.fusion_dim)[0]
        arrays["readout.bias"] = np.zeros(1)
        return ParameterBundle(arrays)

    def forward(self, params: ParameterBundle, window):
        w, squeeze = _check_window(self.spec, window)
        pooled = w.mean(axis=1)
        x_qnn = q.run_batch(self.circuit, _repeat_for_slots(pooled),
                            params["variational"], self.obs)
        cell = _recurrent_cells(self.spec, params, "lstm", "LSTM")
        h, lstm_tape = cl.lstm_forward(cell, w)
        dl = cl.DenseLayer(params["dl.weights"], params["dl.bias"], "identity")
        x_dl, dl_tape = cl.dense_forward(dl, h)
        pre = (x_qnn @ params["fusion.W_quantum"].T
               + x_dl @ params["fusion.W_classical"].T)
        x_hybrid = np.tanh(pre)
        pred = _readout(params, x_hybrid)
        tape = ModelTape(self.spec, params, squeeze,
                         {"batch": w.shape[0], "pooled": pooled,
                          "x_qnn": x_qnn, "x_dl": x_dl, "x_hybrid": x_hybrid,
                          "lstm_tape": lstm_tape, "dl_tape": dl_tape})
        return self._finish(pred, squeeze), tape

    def backward(self, tape: ModelTape, upstream) -> ParameterBundle:
        self._check_tape(tape)
        up = self._upstream(tape, upstream)
        params = tape.params
        out, dxh = _readout_backward(params, tape.stash["x_hybrid"], up)
        dpre = dxh * (1.0 - tape.stash["x_hybrid"] ** 2)
        out["fusion.W_quantum"] = dpre.T @ tape.stash["x_qnn"]
        out["fusion.W_classical"] = dpre.T @ tape.stash["x_dl"]
        dx_qnn = dpre @ params["fusion.W_quantum"]
        dx_dl = dpre @ params["fusion.W_classical"]
        grad_var, _ = q.parameter_shift_grad_batch(
            self.circuit, _repeat_for_slots(tape.stash["pooled"]),
            params["variational"], self.obs, dx_qnn, need_encoding=False)
        out["variational"] = grad_var
        dl_grads, dh = cl.backward(tape.stash["dl_tape"], dx_dl)
        out["dl.weights"] = dl_grads["weights"]
        out["dl.bias"] = dl_grads["bias"]
        lstm_grads, _ = cl.backward(tape.stash["lstm_tape"], dh)
        out.update({f"lstm.{k}": v for k, v in lstm_grads.items()})
        return ParameterBundle({n: out[n] for n in params.names})


class _Recurrent(_ModelBase):
    """LSTM, RNN, GRU, or BiLSTM followed by a linear readout."""

    def __init__(self, spec: RegressorSpec):
        super().__init__(spec)
        self.prefixes = ("fwd", "bwd") if spec.kind == "BiLSTM" else (spec.kind.lower(),)
        self.cell_kind = "LSTM" if spec.kind == "BiLSTM" else spec.kind
        self.out_size = (2 * spec.hidden_size if spec.kind == "BiLSTM"
                         else spec.hidden_size)

    def init_params(self) -> ParameterBundle:
        spec = self.spec
        rng = np.random.default_rng(spec.seed)
        arrays = {}
        for prefix in self.prefixes:
            arrays.update(_init_recurrent(spec, prefix, self.cell_kind, rng))
        arrays["readout.weights"] = cl._init_matrix(rng, 1, self.out_size)[0]
        arrays["readout.bias"] = np.zeros(1)
        return ParameterBundle(arrays)

    def forward(self, params: ParameterBundle, window):
        w, squeeze = _check_window(self.spec, window)
        if self.spec.kind == "BiLSTM":
            fwd = _recurrent_cells(self.spec, params, "fwd", "LSTM")
            bwd = _recurrent_cells(self.spec, params, "bwd", "LSTM")
            h, cell_tape = cl.bilstm_forward(fwd, bwd, w)
        else:
            cell = _recurrent_cells(self.spec, params, self.prefixes[0],
                                    self.cell_kind)
            runner = {"LSTM": cl.lstm_forward, "RNN": cl.rnn_forward,
                      "GRU": cl.gru_forward}[self.cell_kind]
            h, cell_tape = runner(cell, w)
        pred = _readout(params, h)
        tape = ModelTape(self.spec, params, squeeze,
                         {"batch": w.shape[0], "h": h, "cell_tape": cell_tape})
        return self._finish(pred, squeeze), tape

    def backward(self, tape: ModelTape, upstream) -> ParameterBundle:
        self._check_tape(tape)
        up = self._upstream(tape, upstream)
        out, dh = _readout_backward(tape.params, tape.stash["h"], up)
        cell_grads, _ = cl.backward(tape.stash["cell_tape"], dh)
        if self.spec.kind == "BiLSTM":
            out.update(cell_grads)           # already fwd./bwd. prefixed
        else:
            out.update({f"{self.prefixes[0]}.{k}": v
                        for k, v in cell_grads.items()})
        return ParameterBundle({n: out[n] for n in tape.params.names})


def build_model(spec: RegressorSpec) -> _ModelBase:
    if spec.kind == "CustomQNN":
        return _CustomQnn(spec)
    if spec.kind == "HybridQNN1":
        return _HybridQnn1(spec)
    if spec.kind == "HybridQNN2":
        return _HybridQnn2(spec)
    return _Recurrent(spec)


def init_params(spec: RegressorSpec) -> ParameterBundle:
    return build_model(spec).init_params()


def forward(spec: RegressorSpec, params: ParameterBundle, window):
    return build_model(spec).forward(params, window)


def backward(spec: RegressorSpec, tape: ModelTape, upstream) -> ParameterBundle:
    return build_model(spec).backward(tape, upstream)


def count_parameters(spec: RegressorSpec) -> int:
    return build_model(spec).count_parameters()
