"""Exact statevector simulation of the parameterized circuits.

Conventions, fixed so every oracle is unambiguous:

* Big-endian bit order: qubit 0 is the most significant bit of the basis
  index, i.e. basis state x spans |b_0 b_1 ... b_{n-1}> with
  x = sum_q b_q * 2^(n-1-q).
* RY(t) = [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]],
  RZ(p) = diag(exp(-ip/2), exp(+ip/2)).
* CNOT flips the target where the control is 1; CZ applies a -1 phase where
  both qubits are 1.
* Feature encoding maps a scalar v in [0, 1] to RY(arcsin(v')) followed by
  RZ(arccos(v')) with v' = clip(v, 1e-6, 1 - 1e-6); the clip keeps the
  arcsin/arccos derivatives finite at the interval ends.
* Expectations are exact (no shot sampling), so circuit evaluation is a pure
  deterministic function of its inputs.

Parameter slots: a gate either carries a literal angle ("fixed"), reads a
trainable angle from the variational vector, or derives its angle from an
encoding value via arcsin/arccos. Each (slot kind, index) pair is referenced
by exactly one gate, which keeps parameter-shift bookkeeping one-to-one.

All simulation kernels operate on a batch of statevectors with shape
(batch, 2^n); the single-state API wraps a batch of one. Gradients use the
parameter-shift rule d<O>/dt = (<O>_{t+pi/2} - <O>_{t-pi/2}) / 2, exact for
RY/RZ generators, with encoding slots chained through the arcsin/arccos
derivatives +-1/sqrt(1-v^2) evaluated at the clipped value.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (ArityError, CapacityError, DomainError,
                         ParameterError)

__all__ = [
    "MAX_QUBITS", "CLAMP_EPS", "Gate", "CircuitProgram", "Observable",
    "StateVector", "zero_state", "apply_gate", "encode", "build_ansatz",
    "ansatz_gates", "make_program", "expectation", "run", "run_batch",
    "parameter_shift_grad", "parameter_shift_grad_batch",
    "rotation_generator", "cnot_generator", "cz_generator",
]

MAX_QUBITS = 12
CLAMP_EPS = 1e-6

ROTATIONS = ("RY", "RZ")
ENTANGLERS = ("CNOT", "CZ")


@dataclass(frozen=True)
class Gate:
    """One circuit operation.

    Rotations (RY, RZ) act on ``target`` and need an angle: either a literal
    ``angle`` (fixed), or a ``slot``/``index`` pair bound at run time. Gates
    built by :func:`encode` carry both; the build-time angle documents the
    values they were constructed from, and binding supersedes it.
    Entanglers (CNOT, CZ) carry ``control`` and ``target`` and no angle.
    """

    kind: str
    target: int
    control: int | None = None
    angle: float | None = None
    slot: str | None = None        # "encoding" | "variational" | None
    index: int | None = None

    def __post_init__(self):
        if self.kind in ROTATIONS:
            if self.control is not None:
                raise ParameterError(f"{self.kind} takes no control qubit")
            if self.angle is None and self.slot is None:
                raise ParameterError(f"{self.kind} needs an angle or a slot")
            if self.slot is not None and self.index is None:
                raise ParameterError("slotted gate needs a slot index")
        elif self.kind in ENTANGLERS:
            if self.control is None or self.control == self.target:
                raise ParameterError(
                    f"{self.kind} needs a control distinct from its target")
            if self.angle is not None or self.slot is not None:
                raise ParameterError(f"{self.kind} takes no angle")
        else:
            raise ParameterError(f"unknown gate kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "target": self.target}
        if self.control is not None:
            d["control"] = self.control
        if self.angle is not None:
            d["angle"] = self.angle
        if self.slot is not None:
            d["slot"] = self.slot
            d["index"] = self.index
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Gate":
        return cls(kind=d["kind"], target=d["target"],
                   control=d.get("control"), angle=d.get("angle"),
                   slot=d.get("slot"), index=d.get("index"))


@dataclass(frozen=True)
class CircuitProgram:
    """Ordered gate list with counted encoding/variational slots."""

    n_qubits: int
    gates: tuple[Gate, ...]
    encoding_slots: int
    variational_slots: int

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CapacityError(
                f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        seen = {"encoding": set(), "variational": set()}
        for g in self.gates:
            for q in (g.target, g.control):
                if q is not None and not 0 <= q < self.n_qubits:
                    raise IndexError(f"qubit {q} out of range for "
                                     f"{self.n_qubits}-qubit program")
            if g.slot is not None:
                if g.index in seen[g.slot]:
                    raise ParameterError(
                        f"{g.slot} slot {g.index} referenced twice")
                seen[g.slot].add(g.index)
        for name, count in (("encoding", self.encoding_slots),
                            ("variational", self.variational_slots)):
            if seen[name] != set(range(count)):
                raise ParameterError(
                    f"{name} slots must cover 0..{count - 1} exactly")

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits,
                "encoding_slots": self.encoding_slots,
                "variational_slots": self.variational_slots,
                "gates": [g.to_dict() for g in self.gates]}

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitProgram":
        return cls(n_qubits=d["n_qubits"],
                   gates=tuple(Gate.from_dict(g) for g in d["gates"]),
                   encoding_slots=d["encoding_slots"],
                   variational_slots=d["variational_slots"])

    @classmethod
    def from_json(cls, text: str) -> "CircuitProgram":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class Observable:
    """Sum-free list of single-qubit Pauli-Z terms, one expectation each."""

    terms: tuple[tuple[int, str], ...]

    def __post_init__(self):
        terms = tuple((int(q), axis) for q, axis in self.terms)
        object.__setattr__(self, "terms", terms)
        for q, axis in terms:
            if axis != "Z":
                raise ParameterError(f"unsupported Pauli axis {axis!r}")

    @classmethod
    def all_z(cls, n_qubits: int) -> "Observable":
        return cls(tuple((q, "Z") for q in range(n_qubits)))

    def __len__(self) -> int:
        return len(self.terms)


class StateVector:
    """Amplitudes of an n-qubit register; mutated in place by apply_gate."""

    __slots__ = ("n_qubits", "amplitudes")

    def __init__(self, n_qubits: int, amplitudes: np.ndarray):
        self.n_qubits = n_qubits
        self.amplitudes = amplitudes

    def norm_squared(self) -> float:
        a = self.amplitudes
        return float(np.sum(a.real ** 2 + a.imag ** 2))

    def probabilities(self) -> np.ndarray:
        a = self.amplitudes
        return a.real ** 2 + a.imag ** 2


def zero_state(n: int) -> StateVector:
    """All-qubits-ground register |0...0>."""
    if not 1 <= n <= MAX_QUBITS:
        raise CapacityError(f"n must be in [1, {MAX_QUBITS}], got {n}")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n, amps)


# Batched kernels. amps has shape (batch, 2^n); rotations accept a scalar
# angle or one angle per batch row. All mutate amps in place.

def _apply_rotation(amps: np.ndarray, n: int, q: int, kind: str, theta) -> None:
    a = amps.reshape(amps.shape[0], 1 << q, 2, -1)
    half = np.multiply(theta, 0.5)
    c, s = np.cos(half), np.sin(half)
    if np.ndim(theta) == 1:
        c = c[:, None, None]
        s = s[:, None, None]
    if kind == "RY":
        a0 = a[:, :, 0, :].copy()
        a1 = a[:, :, 1, :]
        a[:, :, 0, :] = c * a0 - s * a1
        a[:, :, 1, :] = s * a0 + c * a1
    else:  # RZ
        a[:, :, 0, :] *= c - 1j * s
        a[:, :, 1, :] *= c + 1j * s


def _apply_entangler(amps: np.ndarray, n: int, control: int, target: int,
                     kind: str) -> None:
    a = amps.reshape((amps.shape[0],) + (2,) * n)
    if kind == "CNOT":
        i10 = [slice(None)] * (n + 1)
        i11 = [slice(None)] * (n + 1)
        i10[1 + control], i10[1 + target] = 1, 0
        i11[1 + control], i11[1 + target] = 1, 1
        tmp = a[tuple(i10)].copy()
        a[tuple(i10)] = a[tuple(i11)]
        a[tuple(i11)] = tmp
    else:  # CZ
        i11 = [slice(None)] * (n + 1)
        i11[1 + control], i11[1 + target] = 1, 1
        a[tuple(i11)] *= -1.0


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Apply one gate in place and return the state."""
    n = state.n_qubits
    for q in (gate.target, gate.control):
        if q is not None and not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n}-qubit state")
    batch = state.amplitudes.reshape(1, -1)
    if gate.kind in ROTATIONS:
        if gate.angle is None:
            raise ParameterError("cannot apply a slotted gate without "
                                 "a resolved angle; bind values via run()")
        _apply_rotation(batch, n, gate.target, gate.kind, gate.angle)
    else:
        _apply_entangler(batch, n, gate.control, gate.target, gate.kind)
    return state


def _clamp(values: np.ndarray) -> np.ndarray:
    return np.clip(values, CLAMP_EPS, 1.0 - CLAMP_EPS)


def _check_unit_interval(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if np.any((v < 0.0) | (v > 1.0)) or not np.all(np.isfinite(v)):
        bad = v[~(np.isfinite(v) & (v >= 0.0) & (v <= 1.0))][0]
        raise DomainError(f"encoding value {bad} outside [0, 1]")
    return v


def encode(features, start_slot: int = 0) -> list[Gate]:
    """Angle-encode scaled features, one qubit per feature.

    Feature i becomes RY(arcsin(v)) then RZ(arccos(v)) on qubit i with v the
    clipped value; the pair occupies encoding slots start_slot + 2i and
    start_slot + 2i + 1 so gradients stay per-gate.
    """
    v = _check_unit_interval(features)
    if v.ndim != 1:
        raise ParameterError("encode expects a flat feature vector")
    if len(v) > MAX_QUBITS:
        raise CapacityError(f"at most {MAX_QUBITS} features per register")
    clamped = _clamp(v)
    gates = []
    for i, x in enumerate(clamped):
        gates.append(Gate("RY", target=i, angle=float(np.arcsin(x)),
                          slot="encoding", index=start_slot + 2 * i))
        gates.append(Gate("RZ", target=i, angle=float(np.arccos(x)),
                          slot="encoding", index=start_slot + 2 * i + 1))
    return gates


def ansatz_gates(n_qubits: int, layers: int, start_slot: int = 0) -> list[Gate]:
    """Gate list for ``layers`` trainable blocks.

    Each block applies RY then RZ on every qubit (fresh variational slots in
    qubit order) followed by a CNOT ring and a CZ ring over undirected edges
    {i, (i+1) mod n}, deduplicated so two qubits get a single CNOT and CZ.
    Single-qubit programs skip the rings.
    """
    if layers < 1:
        raise ParameterError("layers must be positive")
    gates = []
    slot = start_slot
    ring = []
    seen_edges = set()
    for i in range(n_qubits):
        edge = frozenset((i, (i + 1) % n_qubits))
        if len(edge) == 2 and edge not in seen_edges:
            seen_edges.add(edge)
            ring.append((i, (i + 1) % n_qubits))
    for _ in range(layers):
        for q in range(n_qubits):
            gates.append(Gate("RY", target=q, slot="variational", index=slot))
            gates.append(Gate("RZ", target=q, slot="variational", index=slot + 1))
            slot += 2
        for c, t in ring:
            gates.append(Gate("CNOT", target=t, control=c))
        for c, t in ring:
            gates.append(Gate("CZ", target=t, control=c))
    return gates


def build_ansatz(n_qubits: int, layers: int) -> CircuitProgram:
    """Standalone trainable circuit with 2 * n_qubits * layers slots."""
    gates = ansatz_gates(n_qubits, layers)
    return CircuitProgram(n_qubits, tuple(gates), encoding_slots=0,
                          variational_slots=2 * n_qubits * layers)


def make_program(n_qubits: int, gates) -> CircuitProgram:
    """Wrap composed gate lists, counting their slots."""
    gates = tuple(gates)
    enc = sum(1 for g in gates if g.slot == "encoding")
    var = sum(1 for g in gates if g.slot == "variational")
    return CircuitProgram(n_qubits, gates, encoding_slots=enc,
                          variational_slots=var)


def expectation(state: StateVector, obs: Observable) -> np.ndarray:
    """<Z_q> per observable term, each in [-1, 1]."""
    return _z_expectations(state.amplitudes.reshape(1, -1),
                           state.n_qubits, obs)[0]


def _z_expectations(amps: np.ndarray, n: int, obs: Observable) -> np.ndarray:
    probs = amps.real ** 2 + amps.imag ** 2
    out = np.empty((amps.shape[0], len(obs)))
    for j, (q, _) in enumerate(obs.terms):
        if not 0 <= q < n:
            raise IndexError(f"observable qubit {q} out of range")
        p = probs.reshape(amps.shape[0], 1 << q, 2, -1)
        marg = p.sum(axis=(1, 3))
        out[:, j] = marg[:, 0] - marg[:, 1]
    return out


def _resolve_angles(circuit: CircuitProgram, enc: np.ndarray,
                    var: np.ndarray) -> list:
    """Per-gate angles; encoding entries are per-batch-row arrays."""
    clamped = _clamp(enc)
    angles = []
    for g in circuit.gates:
        if g.kind not in ROTATIONS:
            angles.append(None)
        elif g.slot == "variational":
            angles.append(float(var[g.index]))
        elif g.slot == "encoding":
            v = clamped[:, g.index]
            angles.append(np.arcsin(v) if g.kind == "RY" else np.arccos(v))
        else:
            angles.append(g.angle)
    return angles


def _simulate(circuit: CircuitProgram, angles: list,
              batch: int) -> np.ndarray:
    amps = np.zeros((batch, 1 << circuit.n_qubits), dtype=np.complex128)
    amps[:, 0] = 1.0
    n = circuit.n_qubits
    for g, ang in zip(circuit.gates, angles):
        if g.kind in ROTATIONS:
            _apply_rotation(amps, n, g.target, g.kind, ang)
        else:
            _apply_entangler(amps, n, g.control, g.target, g.kind)
    return amps


def _check_arity(circuit: CircuitProgram, enc: np.ndarray, var: np.ndarray):
    if enc.shape[-1] != circuit.encoding_slots:
        raise ArityError(f"expected {circuit.encoding_slots} encoding values, "
                         f"got {enc.shape[-1]}")
    if len(var) != circuit.variational_slots:
        raise ArityError(f"expected {circuit.variational_slots} variational "
                         f"values, got {len(var)}")


def run_batch(circuit: CircuitProgram, encoding_values: np.ndarray,
              variational_values: np.ndarray, obs: Observable) -> np.ndarray:
    """Expectations for a batch of encoding rows sharing one variational
    vector. Returns (batch, n_terms)."""
    enc = _check_unit_interval(np.atleast_2d(encoding_values))
    var = np.asarray(variational_values, dtype=np.float64)
    _check_arity(circuit, enc, var)
    angles = _resolve_angles(circuit, enc, var)
    amps = _simulate(circuit, angles, enc.shape[0])
    return _z_expectations(amps, circuit.n_qubits, obs)


def run(circuit: CircuitProgram, encoding_values, variational_values,
        obs: Observable) -> np.ndarray:
    """Deterministic expectation vector for one encoding row."""
    enc = np.asarray(encoding_values, dtype=np.float64).reshape(1, -1)
    return run_batch(circuit, enc, variational_values, obs)[0]


def _slot_positions(circuit: CircuitProgram, slot: str) -> dict[int, int]:
    return {g.index: pos for pos, g in enumerate(circuit.gates)
            if g.slot == slot}


def parameter_shift_grad_batch(circuit: CircuitProgram,
                               encoding_values: np.ndarray,
                               variational_values: np.ndarray,
                               obs: Observable,
                               upstream: np.ndarray,
                               need_encoding: bool = True
                               ) -> tuple[np.ndarray, np.ndarray]:
    """Parameter-shift gradients contracted with an upstream cotangent.

    upstream has shape (batch, n_terms). Returns (grad_variational,) summed
    over the batch with shape (n_slots,), and per-row encoding-value
    gradients with shape (batch, n_enc) (zeros when need_encoding is False,
    saving two simulations per encoding slot).
    """
    enc = _check_unit_interval(np.atleast_2d(encoding_values))
    var = np.asarray(variational_values, dtype=np.float64)
    _check_arity(circuit, enc, var)
    up = np.asarray(upstream, dtype=np.float64).reshape(enc.shape[0], len(obs))
    base = _resolve_angles(circuit, enc, var)
    batch = enc.shape[0]
    n = circuit.n_qubits

    def shifted_diff(pos: int) -> np.ndarray:
        plus = list(base)
        minus = list(base)
        plus[pos] = base[pos] + np.pi / 2
        minus[pos] = base[pos] - np.pi / 2
        e_plus = _z_expectations(_simulate(circuit, plus, batch), n, obs)
        e_minus = _z_expectations(_simulate(circuit, minus, batch), n, obs)
        return 0.5 * (e_plus - e_minus)

    grad_var = np.zeros(circuit.variational_slots)
    for idx, pos in _slot_positions(circuit, "variational").items():
        grad_var[idx] = float(np.sum(up * shifted_diff(pos)))

    grad_enc = np.zeros((batch, circuit.encoding_slots))
    if need_encoding and circuit.encoding_slots:
        clamped = _clamp(enc)
        for idx, pos in _slot_positions(circuit, "encoding").items():
            d_angle = np.sum(up * shifted_diff(pos), axis=1)
            v = clamped[:, idx]
            chain = 1.0 / np.sqrt(1.0 - v ** 2)
            if circuit.gates[pos].kind == "RZ":
                chain = -chain
            grad_enc[:, idx] = d_angle * chain
    return grad_var, grad_enc


def parameter_shift_grad(circuit: CircuitProgram, encoding_values,
                         variational_values, obs: Observable,
                         upstream) -> tuple[np.ndarray, np.ndarray]:
    """Single-row wrapper around parameter_shift_grad_batch."""
    enc = np.asarray(encoding_values, dtype=np.float64).reshape(1, -1)
    up = np.asarray(upstream, dtype=np.float64).reshape(1, -1)
    grad_var, grad_enc = parameter_shift_grad_batch(
        circuit, enc, variational_values, obs, up)
    return grad_var, grad_enc[0]


# Gate generators: Hermitian matrices G with gate = exp(-i * angle * G).
# They document the algebra behind the gate set; the simulator applies the
# gates directly. Matrices are in control (x) target kron order.

_PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def rotation_generator(kind: str) -> np.ndarray:
    """G with R(angle) = exp(-i * angle * G): Y/2 for RY, Z/2 for RZ."""
    if kind not in ROTATIONS:
        raise ParameterError(f"no rotation generator for {kind!r}")
    return _PAULI["Y" if kind == "RY" else "Z"] / 2.0


def cnot_generator() -> np.ndarray:
    """G = (1 - Z_c)(1 - X_t)/2 with exp(-i*pi/2*G) = CNOT exactly."""
    proj = _PAULI["I"] - _PAULI["Z"]
    flip = _PAULI["I"] - _PAULI["X"]
    return 0.5 * np.kron(proj, flip)


def cz_generator() -> np.ndarray:
    """G = (1 - Z_c)(1 - Z_t)/4 with exp(-i*pi*G) = CZ exactly."""
    proj = _PAULI["I"] - _PAULI["Z"]
    return 0.25 * np.kron(proj, proj)
