"""Quantum filter templates for the QCNN layer.

Filter bodies come from templates.yaml; this module adds angle encoding, the
ancilla fan-in and the channel-overwrite rounds, and validates the result.

Layouts:
- single / ancilla family (U1, U2): 5 qubits, H(anc), RX encode on wires 1-4,
  filter, CPHASE(π) data -> ancilla, H(anc); readout wire 0.
- single / plain family (C13, C14, C18, C19): 4 qubits, RX encode on wires
  0-3, filter; readout wire 0.
- channel_overwrite (both families): 5 qubits, H(anc), then three rounds of
  {RX encode channel c, filter with channel-private parameters, CPHASE fan-in},
  H(anc); readout wire 0.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Optional, Union

import yaml

from qsim import CircuitError, GateKind, GateOp, SlotKind


# ============ CONSTANTS ============

REGISTRY_FILE = Path(__file__).with_name("templates.yaml")
SCHEMA_VERSION = 1
WINDOW_PIXELS = 4
N_CHANNELS = 3
ANCILLA = 0

logger = logging.getLogger(__name__)


# ============ EXCEPTIONS ============

class TemplateError(Exception):
    """Base exception for template registry and construction errors."""
    pass


class UnknownTemplateError(TemplateError):
    """Raised when a filter name is not in the registry."""
    pass


# ============ TYPES ============

class FilterKind(str, Enum):
    U1_CRX = "U1_CRX"
    U1_CROT = "U1_CROT"
    U2_CRX = "U2_CRX"
    U2_CROT = "U2_CROT"
    C13 = "C13"
    C14 = "C14"
    C18 = "C18"
    C19 = "C19"

    @property
    def label(self) -> str:
        """Column header form, e.g. U1CRX."""
        return self.value.replace("_", "")


class ChannelMode(str, Enum):
    SINGLE = "single"
    CHANNEL_OVERWRITE = "channel_overwrite"


@dataclass(frozen=True)
class TemplateKind:
    filter_kind: FilterKind
    channel_mode: ChannelMode = ChannelMode.SINGLE

    def __str__(self) -> str:
        return f"{self.filter_kind.value}/{self.channel_mode.value}"


@dataclass(frozen=True)
class CircuitTemplate:
    """Declarative circuit: ordered gates reading from three slot vectors
    (trainable, encoding, fixed) and one readout wire."""

    name: str
    n_qubits: int
    gates: tuple[GateOp, ...]
    n_trainable: int
    n_encoding: int
    readout_wire: int
    fixed: tuple[float, ...] = ()
    kind: Optional[TemplateKind] = None

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "fixed", tuple(float(v) for v in self.fixed))
        if not 0 <= self.readout_wire < self.n_qubits:
            raise TemplateError(f"{self.name}: readout wire {self.readout_wire} outside register")

        used = {kind: set() for kind in SlotKind}
        for gate in self.gates:
            if any(w >= self.n_qubits for w in gate.wires):
                raise TemplateError(f"{self.name}: {gate.kind.value} on {gate.wires} exceeds register")
            used[gate.slot_kind].update(gate.param_slots)

        sizes = {
            SlotKind.TRAINABLE: self.n_trainable,
            SlotKind.ENCODING: self.n_encoding,
            SlotKind.FIXED: len(self.fixed),
        }
        for kind, size in sizes.items():
            if any(not 0 <= s < size for s in used[kind]):
                raise TemplateError(f"{self.name}: {kind.value} slot outside [0, {size})")
        for kind in (SlotKind.TRAINABLE, SlotKind.ENCODING):
            missing = set(range(sizes[kind])) - used[kind]
            if missing:
                raise TemplateError(f"{self.name}: {kind.value} slots never used: {sorted(missing)}")

    @property
    def data_wires(self) -> tuple[int, ...]:
        offset = 1 if self.n_qubits == WINDOW_PIXELS + 1 else 0
        return tuple(range(offset, offset + WINDOW_PIXELS))


# ============ REGISTRY ============

@lru_cache(maxsize=None)
def _load_registry(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise TemplateError(f"Could not read template registry {path}: {e}")

    if not isinstance(data, dict) or data.get("schema_version") != SCHEMA_VERSION:
        raise TemplateError(f"{path}: expected schema_version {SCHEMA_VERSION}")
    filters = data.get("filters") or {}
    for kind in FilterKind:
        entry = filters.get(kind.value)
        if entry is None:
            raise TemplateError(f"{path}: filter {kind.value} missing")
        if entry.get("family") not in ("ancilla", "plain"):
            raise TemplateError(f"{path}: {kind.value} has unknown family {entry.get('family')!r}")
        for gate in entry.get("gates", []):
            try:
                gate_kind = GateKind(gate["gate"])
            except (KeyError, ValueError) as e:
                raise TemplateError(f"{path}: {kind.value} has bad gate entry {gate}: {e}")
            if gate_kind is GateKind.H or any(not 0 <= w < WINDOW_PIXELS for w in gate["wires"]):
                raise TemplateError(f"{path}: {kind.value} gate {gate} is not a data-wire rotation")
    logger.debug(f"Loaded {len(filters)} filters from {path}")
    return data


def load_registry(path: Optional[Path] = None) -> dict:
    """Parsed and validated templates.yaml."""
    return _load_registry(Path(path) if path else REGISTRY_FILE)


def parse_filter_kind(name: Union[str, FilterKind]) -> FilterKind:
    """Resolve 'U1_CRX', 'U1CRX', 'u1crx', 'C14' ... to a FilterKind."""
    if isinstance(name, FilterKind):
        return name
    key = str(name).strip().upper().replace("-", "").replace("_", "")
    for kind in FilterKind:
        if kind.label == key:
            return kind
    raise UnknownTemplateError(
        f"Unknown template {name!r}; expected one of {', '.join(k.value for k in FilterKind)}"
    )


def parse_channel_mode(mode: Union[str, ChannelMode]) -> ChannelMode:
    try:
        return ChannelMode(mode)
    except ValueError:
        raise TemplateError(f"Unknown channel mode {mode!r}")


def list_templates() -> list[TemplateKind]:
    """All 8 filters in both channel modes."""
    return [TemplateKind(kind, mode) for mode in ChannelMode for kind in FilterKind]


# ============ CONSTRUCTION ============

class _Builder:
    """Accumulates gates while handing out slot indices."""

    def __init__(self):
        self.gates: list[GateOp] = []
        self.n_trainable = 0
        self.n_encoding = 0
        self.fixed: list[float] = []

    def trainable(self, kind: GateKind, wires: tuple[int, ...]) -> None:
        slots = tuple(range(self.n_trainable, self.n_trainable + kind.arity))
        self.n_trainable += kind.arity
        self.gates.append(GateOp(kind, wires, slots, SlotKind.TRAINABLE))

    def encoding(self, kind: GateKind, wire: int, slot: int) -> None:
        self.n_encoding = max(self.n_encoding, slot + 1)
        self.gates.append(GateOp(kind, (wire,), (slot,), SlotKind.ENCODING))

    def fixed_gate(self, kind: GateKind, wires: tuple[int, ...], value: Optional[float] = None) -> None:
        slots: tuple[int, ...] = ()
        if value is not None:
            if value not in self.fixed:
                self.fixed.append(value)
            slots = (self.fixed.index(value),)
        self.gates.append(GateOp(kind, wires, slots, SlotKind.FIXED))


def _encode(b: _Builder, gate: GateKind, data_wires: tuple[int, ...], channel: int) -> None:
    for pixel, wire in enumerate(data_wires):
        b.encoding(gate, wire, channel * WINDOW_PIXELS + pixel)


def _filter(b: _Builder, entry: dict, data_wires: tuple[int, ...]) -> None:
    for gate in entry["gates"]:
        wires = tuple(data_wires[w] for w in gate["wires"])
        b.trainable(GateKind(gate["gate"]), wires)


def _fanin(b: _Builder, data_wires: tuple[int, ...], phase: float, trainable_cphase: bool) -> None:
    for wire in data_wires:
        if trainable_cphase:
            b.trainable(GateKind.CPHASE, (wire, ANCILLA))
        else:
            b.fixed_gate(GateKind.CPHASE, (wire, ANCILLA), phase)


@lru_cache(maxsize=None)
def _build(kind: FilterKind, mode: ChannelMode, trainable_cphase: bool) -> CircuitTemplate:
    registry = load_registry()
    entry = registry["filters"][kind.value]
    encode_gate = GateKind(registry.get("encoding_gate", "RX"))
    phase = float(registry.get("fanin_phase"))
    b = _Builder()

    if mode is ChannelMode.SINGLE and entry["family"] == "plain":
        data = tuple(range(WINDOW_PIXELS))
        _encode(b, encode_gate, data, 0)
        _filter(b, entry, data)
        n_qubits = WINDOW_PIXELS
    else:
        data = tuple(range(1, WINDOW_PIXELS + 1))
        rounds = 1 if mode is ChannelMode.SINGLE else N_CHANNELS
        b.fixed_gate(GateKind.H, (ANCILLA,))
        for channel in range(rounds):
            _encode(b, encode_gate, data, channel)
            _filter(b, entry, data)
            _fanin(b, data, phase, trainable_cphase)
        b.fixed_gate(GateKind.H, (ANCILLA,))
        n_qubits = WINDOW_PIXELS + 1

    suffix = "" if mode is ChannelMode.SINGLE else "_CO"
    try:
        return CircuitTemplate(
            name=f"{kind.value}{suffix}",
            n_qubits=n_qubits,
            gates=tuple(b.gates),
            n_trainable=b.n_trainable,
            n_encoding=b.n_encoding,
            readout_wire=ANCILLA,
            fixed=tuple(b.fixed),
            kind=TemplateKind(kind, mode),
        )
    except CircuitError as e:
        raise TemplateError(f"Malformed template {kind.value}: {e}")


def build_template(
    kind: Union[str, FilterKind, TemplateKind],
    channel_mode: Union[str, ChannelMode] = ChannelMode.SINGLE,
    trainable_cphase: bool = False,
) -> CircuitTemplate:
    """
    Build a filter circuit.

    Args:
        kind: Filter name, FilterKind, or a TemplateKind (whose mode wins)
        channel_mode: single (one channel) or channel_overwrite (three)
        trainable_cphase: Make the ancilla fan-in phases trainable

    Returns:
        Immutable CircuitTemplate

    Raises:
        UnknownTemplateError: If the filter name is not registered
    """
    if isinstance(kind, TemplateKind):
        kind, channel_mode = kind.filter_kind, kind.channel_mode
    return _build(parse_filter_kind(kind), parse_channel_mode(channel_mode), bool(trainable_cphase))


# ============ SERIALIZATION ============

def template_to_dict(template: CircuitTemplate) -> dict:
    gates = []
    for gate in template.gates:
        entry = {"gate": gate.kind.value, "wires": list(gate.wires)}
        if gate.param_slots:
            entry[gate.slot_kind.value] = list(gate.param_slots)
        gates.append(entry)
    return {
        "name": template.name,
        "qubits": template.n_qubits,
        "readout_wire": template.readout_wire,
        "trainable": template.n_trainable,
        "encoding": template.n_encoding,
        "fixed": list(template.fixed),
        "gates": gates,
    }


def dump_template(template: CircuitTemplate) -> str:
    """Human-readable YAML rendering of one template."""
    return yaml.safe_dump(template_to_dict(template), sort_keys=False, default_flow_style=None)


def dump_registry(trainable_cphase: bool = False) -> str:
    """YAML rendering of all 16 built templates."""
    docs = [
        template_to_dict(build_template(t, trainable_cphase=trainable_cphase))
        for t in list_templates()
    ]
    return yaml.safe_dump_all(docs, sort_keys=False, default_flow_style=None)
