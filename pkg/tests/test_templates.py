"""Tests for the templates.py filter registry."""
import math

import numpy as np
import pytest
import yaml

import templates
import qsim
from qsim import GateKind, SlotKind
from templates import ChannelMode, FilterKind, build_template, list_templates, parse_filter_kind


EXPECTED_TRAINABLE = {
    FilterKind.U1_CRX: 3,
    FilterKind.U1_CROT: 9,
    FilterKind.U2_CRX: 4,
    FilterKind.U2_CROT: 12,
    FilterKind.C13: 16,
    FilterKind.C14: 16,
    FilterKind.C18: 12,
    FilterKind.C19: 12,
}


class TestRegistry:
    """Tests for loading templates.yaml."""

    def test_lists_sixteen_templates(self):
        """Eight filters in two channel modes."""
        kinds = list_templates()
        assert len(kinds) == 16
        assert len({str(k) for k in kinds}) == 16

    def test_registry_has_every_filter(self):
        """Every FilterKind has an entry."""
        registry = templates.load_registry()
        assert set(registry["filters"]) == {k.value for k in FilterKind}

    def test_rejects_wrong_schema(self, tmp_path):
        """A registry without schema_version 1 is refused."""
        path = tmp_path / "bad.yaml"
        path.write_text("schema_version: 2\nfilters: {}\n")
        with pytest.raises(templates.TemplateError):
            templates.load_registry(path)

    def test_rejects_missing_filter(self, tmp_path):
        """Each filter must be present."""
        path = tmp_path / "partial.yaml"
        path.write_text("schema_version: 1\nfilters:\n  U1_CRX: {family: ancilla, gates: []}\n")
        with pytest.raises(templates.TemplateError):
            templates.load_registry(path)


class TestParsing:
    """Tests for name parsing."""

    @pytest.mark.parametrize("name", ["U1_CRX", "U1CRX", "u1crx", "u1-crx"])
    def test_filter_aliases(self, name):
        """Underscores, dashes and case are ignored."""
        assert parse_filter_kind(name) is FilterKind.U1_CRX

    def test_unknown_filter(self):
        """Unknown names raise UnknownTemplateError."""
        with pytest.raises(templates.UnknownTemplateError):
            build_template("C99")

    def test_unknown_mode(self):
        """Unknown channel modes raise TemplateError."""
        with pytest.raises(templates.TemplateError):
            build_template("C14", "stacked")


class TestSingleChannel:
    """Tests for single-channel layouts."""

    @pytest.mark.parametrize("kind", list(FilterKind))
    def test_counts(self, kind):
        """Trainable and encoding counts per filter."""
        t = build_template(kind)
        assert t.n_trainable == EXPECTED_TRAINABLE[kind]
        assert t.n_encoding == 4
        assert t.readout_wire == 0

    @pytest.mark.parametrize("kind", [FilterKind.U1_CRX, FilterKind.U1_CROT, FilterKind.U2_CRX, FilterKind.U2_CROT])
    def test_ancilla_family_layout(self, kind):
        """U1/U2 use an ancilla on wire 0 wrapped in Hadamards."""
        t = build_template(kind)
        assert t.n_qubits == 5
        assert t.data_wires == (1, 2, 3, 4)
        assert t.gates[0].kind is GateKind.H and t.gates[0].wires == (0,)
        assert t.gates[-1].kind is GateKind.H and t.gates[-1].wires == (0,)
        fanin = [g for g in t.gates if g.kind is GateKind.CPHASE]
        assert [g.wires for g in fanin] == [(1, 0), (2, 0), (3, 0), (4, 0)]
        assert t.fixed == (math.pi,)

    @pytest.mark.parametrize("kind", [FilterKind.C13, FilterKind.C14, FilterKind.C18, FilterKind.C19])
    def test_plain_family_layout(self, kind):
        """C-filters use four qubits and no ancilla."""
        t = build_template(kind)
        assert t.n_qubits == 4
        assert t.data_wires == (0, 1, 2, 3)
        assert not any(g.kind in (GateKind.H, GateKind.CPHASE) for g in t.gates)

    def test_encoding_comes_first(self):
        """Pixels p0..p3 are RX-encoded onto the data wires in order."""
        t = build_template("C14")
        encoders = [g for g in t.gates if g.slot_kind is SlotKind.ENCODING]
        assert [g.kind for g in encoders] == [GateKind.RX] * 4
        assert [(g.wires, g.param_slots) for g in encoders] == [((w,), (w,)) for w in range(4)]
        assert all(g.slot_kind is SlotKind.ENCODING for g in t.gates[:4])

    def test_u2_closes_the_ring(self):
        """U2 adds a last-to-first controlled rotation to U1."""
        u1 = [g.wires for g in build_template("U1_CRX").gates if g.kind is GateKind.CRX]
        u2 = [g.wires for g in build_template("U2_CRX").gates if g.kind is GateKind.CRX]
        assert u2[:3] == u1
        assert u2[3] == (4, 1)

    def test_cached_build_is_shared(self):
        """Built templates are immutable and reused."""
        assert build_template("C18") is build_template("c18")


class TestPixelWires:
    """Each encoded pixel drives its own data wire."""

    @staticmethod
    def _marginals(state):
        probs = np.abs(state.tensor()[0]) ** 2
        n = state.n_qubits
        return np.array([probs.sum(axis=tuple(a for a in range(n) if a != w))[1] for w in range(n)])

    @pytest.mark.parametrize("kind", list_templates(), ids=str)
    def test_one_pixel_moves_one_data_wire(self, kind):
        """With zero weights, pixel k only flips data wire k (after the ancilla offset)."""
        t = build_template(kind)
        for slot in range(t.n_encoding):
            encodings = np.zeros(t.n_encoding)
            encodings[slot] = 1.0
            marginals = self._marginals(qsim.run_circuit(t, np.zeros(t.n_trainable), encodings))
            target = t.data_wires[slot % 4]
            assert marginals[target] == pytest.approx(math.sin(0.5) ** 2, abs=1e-12)
            others = [w for w in t.data_wires if w != target]
            np.testing.assert_allclose(marginals[others], 0.0, atol=1e-12)

    @pytest.mark.parametrize("kind", [FilterKind.U1_CRX, FilterKind.U2_CROT])
    def test_ancilla_records_the_data_wire(self, kind):
        """The H-wrapped CPHASE fan-in copies a data wire's |1⟩ weight onto the ancilla."""
        t = build_template(kind)
        encodings = np.array([0.0, 1.0, 0.0, 0.0])
        marginals = self._marginals(qsim.run_circuit(t, np.zeros(t.n_trainable), encodings))
        assert t.data_wires[1] == 2
        assert marginals[0] == pytest.approx(math.sin(0.5) ** 2, abs=1e-12)


class TestChannelOverwrite:
    """Tests for the three-channel layout."""

    @pytest.mark.parametrize("kind", list(FilterKind))
    def test_counts(self, kind):
        """Three rounds with channel-private trainable parameters."""
        t = build_template(kind, ChannelMode.CHANNEL_OVERWRITE)
        assert t.n_qubits == 5
        assert t.n_encoding == 12
        assert t.n_trainable == 3 * EXPECTED_TRAINABLE[kind]
        assert t.name.endswith("_CO")

    def test_rounds_encode_each_channel(self):
        """Round c encodes slots 4c..4c+3 before its filter block."""
        t = build_template("U1_CRX", ChannelMode.CHANNEL_OVERWRITE)
        encoders = [g for g in t.gates if g.slot_kind is SlotKind.ENCODING]
        assert [g.param_slots[0] for g in encoders] == list(range(12))
        assert [g.wires[0] for g in encoders] == [1, 2, 3, 4] * 3
        assert sum(g.kind is GateKind.CPHASE for g in t.gates) == 12

    def test_trainable_cphase(self):
        """Fan-in phases become trainable slots."""
        t = build_template("U1_CRX", ChannelMode.CHANNEL_OVERWRITE, trainable_cphase=True)
        assert t.n_trainable == 3 * (3 + 4)
        assert t.fixed == ()


class TestSerialization:
    """Tests for YAML dumps."""

    def test_dump_template(self):
        """dump_template renders name, counts and gates."""
        data = yaml.safe_load(templates.dump_template(build_template("C19")))
        assert data["name"] == "C19"
        assert data["qubits"] == 4
        assert data["trainable"] == 12
        assert len(data["gates"]) == 4 + 12

    def test_dump_registry(self):
        """dump_registry renders all sixteen templates."""
        docs = list(yaml.safe_load_all(templates.dump_registry()))
        assert len(docs) == 16
