"""Statevector simulator for QCNN filter circuits.

Exact, double-precision simulation of few-qubit circuits plus adjoint
differentiation of Pauli-Z expectation values.

Conventions:
- Wire 0 is the most significant bit of the basis-state index.
- A StateVector may carry a leading batch axis so that one call evaluates
  every window of a batch of images. Gate values are either shared by the
  whole batch (shape ``(arity,)``) or given per batch item (``(B, arity)``).
- RX uses the standard unitary with ``-i sin(θ/2)`` off-diagonals.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

if TYPE_CHECKING:
    from templates import CircuitTemplate


# ============ CONSTANTS ============

MAX_QUBITS = 8
MAX_ORACLE_QUBITS = 5
FD_STEP = 1e-4

_LETTERS = "abcdefghijklmnopqrstuvwxy"

logger = logging.getLogger(__name__)


# ============ EXCEPTIONS ============

class CircuitError(Exception):
    """Base exception for malformed circuits and simulator misuse."""
    pass


class WireError(CircuitError):
    """Raised when a gate addresses a wire outside the register."""
    pass


class ArityError(CircuitError):
    """Raised when a gate receives the wrong number of parameter values."""
    pass


# ============ GATE TYPES ============

class GateKind(str, Enum):
    """Supported gate kinds."""
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    H = "H"
    CRX = "CRX"
    CRZ = "CRZ"
    CROT = "CROT"
    CPHASE = "CPHASE"

    @property
    def arity(self) -> int:
        return _ARITY[self]

    @property
    def n_wires(self) -> int:
        return 2 if self in _TWO_QUBIT else 1


class SlotKind(str, Enum):
    """Which parameter vector a gate's slots index into."""
    TRAINABLE = "trainable"
    ENCODING = "encoding"
    FIXED = "fixed"


_ARITY = {
    GateKind.RX: 1,
    GateKind.RY: 1,
    GateKind.RZ: 1,
    GateKind.H: 0,
    GateKind.CRX: 1,
    GateKind.CRZ: 1,
    GateKind.CROT: 3,
    GateKind.CPHASE: 1,
}

_TWO_QUBIT = {GateKind.CRX, GateKind.CRZ, GateKind.CROT, GateKind.CPHASE}


@dataclass(frozen=True)
class GateOp:
    """One gate of a circuit: kind, wires ([control, target] for 2-qubit
    gates) and the slots its angles are read from."""

    kind: GateKind
    wires: tuple[int, ...]
    param_slots: tuple[int, ...] = ()
    slot_kind: SlotKind = SlotKind.FIXED

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        object.__setattr__(self, "param_slots", tuple(int(s) for s in self.param_slots))
        object.__setattr__(self, "slot_kind", SlotKind(self.slot_kind))

        if len(self.wires) != kind.n_wires:
            raise WireError(f"{kind.value} acts on {kind.n_wires} wire(s), got {self.wires}")
        if len(set(self.wires)) != len(self.wires):
            raise WireError(f"{kind.value} wires must be distinct, got {self.wires}")
        if any(w < 0 for w in self.wires):
            raise WireError(f"Negative wire index in {self.wires}")
        if len(self.param_slots) != kind.arity:
            raise ArityError(
                f"{kind.value} takes {kind.arity} parameter(s), got slots {self.param_slots}"
            )


@dataclass(frozen=True)
class StateVector:
    """Amplitudes of an n-qubit register, optionally batched.

    ``amplitudes`` has shape ``(2**n,)`` or ``(B, 2**n)``.
    """

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CircuitError(f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}")
        amps = np.array(self.amplitudes, dtype=np.complex128, copy=True)
        if amps.ndim not in (1, 2) or amps.shape[-1] != 2 ** self.n_qubits:
            raise CircuitError(
                f"Expected amplitudes of length {2 ** self.n_qubits}, got shape {amps.shape}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int, batch: Optional[int] = None) -> "StateVector":
        """|0...0⟩, or a batch of B copies of it."""
        shape = (2 ** n_qubits,) if batch is None else (batch, 2 ** n_qubits)
        amps = np.zeros(shape, dtype=np.complex128)
        amps[..., 0] = 1.0
        return cls(n_qubits, amps)

    @property
    def batched(self) -> bool:
        return self.amplitudes.ndim == 2

    @property
    def norm(self) -> np.ndarray | float:
        norms = np.linalg.norm(self.amplitudes, axis=-1)
        return norms if self.batched else float(norms)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to ``(B, 2, ..., 2)`` (B = 1 when unbatched)."""
        return self.amplitudes.reshape((-1,) + (2,) * self.n_qubits)


# ============ GATE MATRICES ============

def _as_values(kind: GateKind, values) -> np.ndarray:
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim == 0:
        vals = vals.reshape(1)
    if vals.shape[-1] != kind.arity:
        raise ArityError(f"{kind.value} takes {kind.arity} value(s), got shape {vals.shape}")
    return vals


def _block(a00, a01, a10, a11) -> np.ndarray:
    a00, a01, a10, a11 = np.broadcast_arrays(a00, a01, a10, a11)
    out = np.empty(a00.shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = a00
    out[..., 0, 1] = a01
    out[..., 1, 0] = a10
    out[..., 1, 1] = a11
    return out


def _controlled(block: np.ndarray, top_left: complex) -> np.ndarray:
    out = np.zeros(block.shape[:-2] + (4, 4), dtype=np.complex128)
    out[..., 0, 0] = top_left
    out[..., 1, 1] = top_left
    out[..., 2:, 2:] = block
    return out


def _rx(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return _block(c, -1j * s, -1j * s, c)


def _ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return _block(c, -s, s, c)


def _rz(t):
    zero = np.zeros_like(t)
    return _block(np.exp(-0.5j * t), zero, zero, np.exp(0.5j * t))


def _rot(phi, theta, omega):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return _block(
        np.exp(-0.5j * (phi + omega)) * c,
        -np.exp(0.5j * (phi - omega)) * s,
        np.exp(-0.5j * (phi - omega)) * s,
        np.exp(0.5j * (phi + omega)) * c,
    )


def _phase(t):
    one, zero = np.ones_like(t), np.zeros_like(t)
    return _block(one, zero, zero, np.exp(1j * t))


_HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)


def gate_matrix(kind: GateKind, values=()) -> np.ndarray:
    """Unitary of a gate as ``(2**k, 2**k)`` or ``(B, 2**k, 2**k)``.

    Two-qubit matrices are in the |control, target⟩ basis.
    """
    kind = GateKind(kind)
    vals = _as_values(kind, values)

    if kind is GateKind.H:
        return _HADAMARD.copy()
    if kind is GateKind.RX:
        return _rx(vals[..., 0])
    if kind is GateKind.RY:
        return _ry(vals[..., 0])
    if kind is GateKind.RZ:
        return _rz(vals[..., 0])
    if kind is GateKind.CRX:
        return _controlled(_rx(vals[..., 0]), 1.0)
    if kind is GateKind.CRZ:
        return _controlled(_rz(vals[..., 0]), 1.0)
    if kind is GateKind.CROT:
        return _controlled(_rot(vals[..., 0], vals[..., 1], vals[..., 2]), 1.0)
    if kind is GateKind.CPHASE:
        return _controlled(_phase(vals[..., 0]), 1.0)
    raise CircuitError(f"Unknown gate kind: {kind}")


def gate_derivatives(kind: GateKind, values=()) -> list[np.ndarray]:
    """dU/dθ_k for every parameter of the gate, same shape as gate_matrix."""
    kind = GateKind(kind)
    vals = _as_values(kind, values)

    if kind is GateKind.H:
        return []

    if kind in (GateKind.RX, GateKind.CRX):
        t = vals[..., 0]
        c, s = np.cos(t / 2), np.sin(t / 2)
        blocks = [_block(-s / 2, -0.5j * c, -0.5j * c, -s / 2)]
    elif kind is GateKind.RY:
        t = vals[..., 0]
        c, s = np.cos(t / 2), np.sin(t / 2)
        blocks = [_block(-s / 2, -c / 2, c / 2, -s / 2)]
    elif kind in (GateKind.RZ, GateKind.CRZ):
        t = vals[..., 0]
        zero = np.zeros_like(t)
        blocks = [_block(-0.5j * np.exp(-0.5j * t), zero, zero, 0.5j * np.exp(0.5j * t))]
    elif kind is GateKind.CPHASE:
        t = vals[..., 0]
        zero = np.zeros_like(t)
        blocks = [_block(zero, zero, zero, 1j * np.exp(1j * t))]
    elif kind is GateKind.CROT:
        phi, theta, omega = vals[..., 0], vals[..., 1], vals[..., 2]
        u = _rot(phi, theta, omega)
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        d_phi = u * np.array([[-0.5j, 0.5j], [-0.5j, 0.5j]])
        d_omega = u * np.array([[-0.5j, -0.5j], [0.5j, 0.5j]])
        d_theta = _block(
            -np.exp(-0.5j * (phi + omega)) * s / 2,
            -np.exp(0.5j * (phi - omega)) * c / 2,
            np.exp(-0.5j * (phi - omega)) * c / 2,
            -np.exp(0.5j * (phi + omega)) * s / 2,
        )
        blocks = [d_phi, d_theta, d_omega]
    else:
        raise CircuitError(f"Unknown gate kind: {kind}")

    if kind.n_wires == 2:
        return [_controlled(b, 0.0) for b in blocks]
    return blocks


def dagger(matrix: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(matrix, -1, -2))


# ============ STATE EVOLUTION ============

def _apply_tensor(psi: np.ndarray, matrix: np.ndarray, wires: Sequence[int]) -> np.ndarray:
    """Contract a (possibly batched) k-qubit matrix into psi of shape (B, 2, ..., 2)."""
    n = psi.ndim - 1
    k = len(wires)
    state = _LETTERS[:n]
    new = _LETTERS[n:n + k]
    ins = "".join(state[w] for w in wires)
    out = list(state)
    for w, letter in zip(wires, new):
        out[w] = letter
    out = "".join(out)

    op = matrix.reshape(matrix.shape[:-2] + (2,) * (2 * k))
    if matrix.ndim == 2:
        subscripts = f"{new}{ins},z{state}->z{out}"
    else:
        if matrix.shape[0] != psi.shape[0]:
            raise CircuitError(
                f"Batch mismatch: gate values for {matrix.shape[0]} items, state has {psi.shape[0]}"
            )
        subscripts = f"z{new}{ins},z{state}->z{out}"
    return np.einsum(subscripts, op, psi)


def _check_wires(gate: GateOp, n_qubits: int) -> None:
    if any(w >= n_qubits for w in gate.wires):
        raise WireError(f"{gate.kind.value} on wires {gate.wires} exceeds {n_qubits} qubits")


def apply_gate(state: StateVector, gate: GateOp, values=()) -> StateVector:
    """Apply one gate with the given angles (radians) and return a new state."""
    _check_wires(gate, state.n_qubits)
    vals = _as_values(gate.kind, values)
    matrix = gate_matrix(gate.kind, vals)
    psi = _apply_tensor(state.tensor(), matrix, gate.wires)
    amps = psi.reshape(psi.shape[0], -1)
    if not state.batched:
        amps = amps[0]
    return StateVector(state.n_qubits, amps)


def _z_signs(n_qubits: int, wire: int) -> np.ndarray:
    shape = [1] * (n_qubits + 1)
    shape[wire + 1] = 2
    return np.array([1.0, -1.0]).reshape(shape)


def expectation_z(state: StateVector, wire: int) -> np.ndarray | float:
    """⟨Z⟩ on one wire; a float for unbatched states, ``(B,)`` otherwise."""
    if not 0 <= wire < state.n_qubits:
        raise WireError(f"Readout wire {wire} outside {state.n_qubits} qubits")
    probs = np.abs(state.tensor()) ** 2
    axes = tuple(range(1, state.n_qubits + 1))
    values = np.sum(probs * _z_signs(state.n_qubits, wire), axis=axes)
    return values if state.batched else float(values[0])


# ============ TEMPLATE EXECUTION ============

def _bind(template: "CircuitTemplate", trainable, encodings):
    """Validate slot vectors and return (trainable, encodings(B, n), fixed, batched)."""
    tr = np.asarray(trainable, dtype=np.float64).reshape(-1)
    if tr.shape[0] != template.n_trainable:
        raise CircuitError(
            f"{template.name} expects {template.n_trainable} trainable values, got {tr.shape[0]}"
        )
    enc = np.asarray(encodings, dtype=np.float64)
    batched = enc.ndim == 2
    if enc.ndim == 1:
        enc = enc[None, :]
    if enc.ndim != 2 or enc.shape[-1] != template.n_encoding:
        raise CircuitError(
            f"{template.name} expects {template.n_encoding} encoding values, got shape "
            f"{np.shape(encodings)}"
        )
    fixed = np.asarray(template.fixed, dtype=np.float64)
    return tr, enc, fixed, batched


def _gate_values(gate: GateOp, tr: np.ndarray, enc: np.ndarray, fixed: np.ndarray) -> np.ndarray:
    slots = list(gate.param_slots)
    if gate.slot_kind is SlotKind.TRAINABLE:
        return tr[slots]
    if gate.slot_kind is SlotKind.ENCODING:
        return enc[:, slots]
    return fixed[slots]


def _forward(template: "CircuitTemplate", tr, enc, fixed, overrides=None):
    """Evolve |0...0⟩ through the template; returns (psi, per-gate matrices, per-gate values)."""
    batch = enc.shape[0]
    psi = np.zeros((batch,) + (2,) * template.n_qubits, dtype=np.complex128)
    psi.reshape(batch, -1)[:, 0] = 1.0
    matrices, values = [], []
    for i, gate in enumerate(template.gates):
        vals = _gate_values(gate, tr, enc, fixed)
        if overrides and i in overrides:
            vals = overrides[i]
        mat = gate_matrix(gate.kind, vals)
        psi = _apply_tensor(psi, mat, gate.wires)
        matrices.append(mat)
        values.append(vals)
    return psi, matrices, values


def run_circuit(template: "CircuitTemplate", trainable, encodings) -> StateVector:
    """Run the template from |0...0⟩ with slot values substituted.

    ``encodings`` may be ``(n_encoding,)`` or a batch ``(B, n_encoding)``.
    """
    tr, enc, fixed, batched = _bind(template, trainable, encodings)
    psi, _, _ = _forward(template, tr, enc, fixed)
    amps = psi.reshape(psi.shape[0], -1)
    return StateVector(template.n_qubits, amps if batched else amps[0])


def readout(template: "CircuitTemplate", trainable, encodings) -> np.ndarray | float:
    """⟨Z⟩ on the template's readout wire."""
    return expectation_z(run_circuit(template, trainable, encodings), template.readout_wire)


# ============ DIFFERENTIATION ============

def adjoint_jacobian(
    template: "CircuitTemplate",
    trainable,
    encodings,
    wire: Optional[int] = None,
    weights=None,
) -> np.ndarray:
    """Exact d⟨Z⟩/dθ for every trainable slot by one forward and one backward sweep.

    Returns ``(B, n_trainable)`` for batched encodings, ``(n_trainable,)``
    otherwise. With ``weights`` (one per batch item) the weighted sum over the
    batch is returned instead.
    """
    if wire is None:
        wire = template.readout_wire
    if not 0 <= wire < template.n_qubits:
        raise WireError(f"Readout wire {wire} outside {template.n_qubits} qubits")

    tr, enc, fixed, batched = _bind(template, trainable, encodings)
    psi, matrices, values = _forward(template, tr, enc, fixed)
    lam = psi * _z_signs(template.n_qubits, wire)
    axes = tuple(range(1, template.n_qubits + 1))
    jac = np.zeros((enc.shape[0], template.n_trainable))

    for i in range(len(template.gates) - 1, -1, -1):
        gate = template.gates[i]
        inverse = dagger(matrices[i])
        psi = _apply_tensor(psi, inverse, gate.wires)
        if gate.slot_kind is SlotKind.TRAINABLE:
            for slot, d_matrix in zip(gate.param_slots, gate_derivatives(gate.kind, values[i])):
                mu = _apply_tensor(psi, d_matrix, gate.wires)
                jac[:, slot] += 2.0 * np.real(np.sum(np.conj(lam) * mu, axis=axes))
        lam = _apply_tensor(lam, inverse, gate.wires)

    if weights is not None:
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != jac.shape[0]:
            raise CircuitError(f"Expected {jac.shape[0]} weights, got {w.shape[0]}")
        return w @ jac
    return jac if batched else jac[0]


def gradient(template: "CircuitTemplate", trainable, encodings, wire: Optional[int] = None) -> np.ndarray:
    """∂⟨Z⟩/∂θ for one set of encodings (adjoint method)."""
    return adjoint_jacobian(template, trainable, encodings, wire)


def finite_difference_gradient(
    template: "CircuitTemplate",
    trainable,
    encodings,
    wire: Optional[int] = None,
    h: float = FD_STEP,
) -> np.ndarray:
    """Central finite differences of ⟨Z⟩; test oracle only."""
    if wire is None:
        wire = template.readout_wire
    tr = np.asarray(trainable, dtype=np.float64).reshape(-1).copy()
    grads = []
    for k in range(tr.shape[0]):
        plus, minus = tr.copy(), tr.copy()
        plus[k] += h
        minus[k] -= h
        f_plus = expectation_z(run_circuit(template, plus, encodings), wire)
        f_minus = expectation_z(run_circuit(template, minus, encodings), wire)
        grads.append((np.asarray(f_plus) - np.asarray(f_minus)) / (2 * h))
    return np.stack(grads, axis=-1) if grads else np.zeros((0,))


_FOUR_TERM = ((math.sqrt(2) + 1) / (4 * math.sqrt(2)), (math.sqrt(2) - 1) / (4 * math.sqrt(2)))


def shift_rule_gradient(
    template: "CircuitTemplate",
    trainable,
    encodings,
    wire: Optional[int] = None,
) -> np.ndarray:
    """Parameter-shift gradient; test oracle only.

    Two-term rule for RX/RY/RZ/CPHASE, four-term rule for the controlled
    rotations (each CROT angle is a controlled rotation of its own).
    """
    if wire is None:
        wire = template.readout_wire
    tr, enc, fixed, batched = _bind(template, trainable, encodings)
    base = [_gate_values(g, tr, enc, fixed) for g in template.gates]
    grad = np.zeros((enc.shape[0], template.n_trainable))

    def shifted(i: int, k: int, delta: float) -> np.ndarray:
        vals = np.array(base[i], dtype=np.float64, copy=True)
        vals[..., k] += delta
        psi, _, _ = _forward(template, tr, enc, fixed, overrides={i: vals})
        state = StateVector(template.n_qubits, psi.reshape(psi.shape[0], -1))
        return expectation_z(state, wire)

    for i, gate in enumerate(template.gates):
        if gate.slot_kind is not SlotKind.TRAINABLE:
            continue
        for k, slot in enumerate(gate.param_slots):
            if gate.kind in (GateKind.CRX, GateKind.CRZ, GateKind.CROT):
                c_plus, c_minus = _FOUR_TERM
                grad[:, slot] += c_plus * (shifted(i, k, math.pi / 2) - shifted(i, k, -math.pi / 2))
                grad[:, slot] -= c_minus * (
                    shifted(i, k, 3 * math.pi / 2) - shifted(i, k, -3 * math.pi / 2)
                )
            else:
                grad[:, slot] += 0.5 * (shifted(i, k, math.pi / 2) - shifted(i, k, -math.pi / 2))
    return grad if batched else grad[0]


# ============ TEST ORACLES ============

BoundGate = tuple[GateOp, np.ndarray]


def run_gates(bound_gates: Sequence[BoundGate], n_qubits: int) -> StateVector:
    """Chain apply_gate over (gate, values) pairs from |0...0⟩."""
    state = StateVector.zero(n_qubits)
    for gate, values in bound_gates:
        state = apply_gate(state, gate, values)
    return state


def _embed(ops: dict[int, np.ndarray], n_qubits: int) -> np.ndarray:
    full = np.ones((1, 1), dtype=np.complex128)
    for w in range(n_qubits):
        full = np.kron(full, ops.get(w, np.eye(2, dtype=np.complex128)))
    return full


def dense_unitary_oracle(bound_gates: Sequence[BoundGate], n_qubits: int) -> np.ndarray:
    """Full circuit unitary by explicit tensor products; test oracle only.

    Controlled gates are expanded as |0⟩⟨0|_c ⊗ I + |1⟩⟨1|_c ⊗ U_t, which is
    independent of the einsum path used by apply_gate.
    """
    if n_qubits > MAX_ORACLE_QUBITS:
        raise CircuitError(f"Dense oracle limited to {MAX_ORACLE_QUBITS} qubits, got {n_qubits}")
    p0 = np.diag([1.0, 0.0]).astype(np.complex128)
    p1 = np.diag([0.0, 1.0]).astype(np.complex128)

    total = np.eye(2 ** n_qubits, dtype=np.complex128)
    for gate, values in bound_gates:
        _check_wires(gate, n_qubits)
        matrix = gate_matrix(gate.kind, values)
        if gate.kind.n_wires == 1:
            full = _embed({gate.wires[0]: matrix}, n_qubits)
        else:
            control, target = gate.wires
            full = _embed({control: p0}, n_qubits) + _embed({control: p1, target: matrix[2:, 2:]}, n_qubits)
        total = full @ total
    return total


def random_circuit(rng: np.random.Generator, n_qubits: int, depth: int) -> list[BoundGate]:
    """Random gate list with angles uniform in [0, 2π)."""
    kinds = list(GateKind)
    if n_qubits < 2:
        kinds = [k for k in kinds if k.n_wires == 1]
    gates = []
    for _ in range(depth):
        kind = kinds[int(rng.integers(len(kinds)))]
        wires = tuple(int(w) for w in rng.choice(n_qubits, size=kind.n_wires, replace=False))
        gate = GateOp(kind, wires, tuple(range(kind.arity)), SlotKind.FIXED)
        gates.append((gate, rng.uniform(0.0, 2 * math.pi, size=kind.arity)))
    return gates
