import json

import numpy as np
import pytest

from schemnet import pipeline, synth
from schemnet.config import Config
from schemnet.detect import ComponentType, FlagKind
from schemnet.netlist import netlists_equivalent, parse_netlist
from schemnet.pipeline import (
    STAGES,
    OverrideError,
    convert_bytes,
    convert_image,
    parse_override,
    parse_overrides,
    stage_doc,
)
from schemnet.raster import GrayImage


@pytest.fixture(scope="module")
def golden():
    return synth.generate_schematic(5)


@pytest.fixture(scope="module")
def base(golden):
    return convert_image(golden.image)


def cut_wire_image(golden, base):
    """Golden image with a 9 px gap carved into one wire run."""
    data = golden.image.data.copy()
    boxes = [c.bbox for c in base.components]
    ys, xs = np.nonzero(data < 128)
    for y, x in zip(ys, xs):
        if any(b.x - 4 <= x < b.x2 + 4 and b.y - 4 <= y < b.y2 + 4
               for b in boxes):
            continue
        data[max(0, y - 4) : y + 5, max(0, x - 4) : x + 5] = 255
        return GrayImage(data)
    raise AssertionError("no wire pixel found")


class TestClosedLoop:
    def test_recovers_golden_netlist(self, golden, base):
        assert base.status() == "complete"
        assert netlists_equivalent(base.netlist,
                                   parse_netlist(golden.netlist_text)).equivalent

    def test_deterministic(self, golden, base):
        again = convert_image(golden.image)
        assert again.netlist_text == base.netlist_text
        assert json.dumps(again.flags_doc()) == json.dumps(base.flags_doc())

    def test_convert_bytes_pgm(self, golden, base):
        h, w = golden.image.data.shape
        payload = f"P5\n{w} {h}\n255\n".encode() + golden.image.data.tobytes()
        res = convert_bytes(payload)
        assert res.netlist_text == base.netlist_text

    def test_stage_docs(self, golden, base):
        for stage in STAGES:
            doc = stage_doc(base, stage)
            assert doc is not None
        assert stage_doc(base, "binary").startswith(b"P5")
        dets = stage_doc(base, "detections")
        assert len(dets["components"]) == len(base.components)
        with pytest.raises(ValueError):
            stage_doc(base, "phases")

    def test_config_threaded_through(self, golden):
        cfg = Config(connectivity=4)
        res = convert_image(golden.image, cfg=cfg)
        assert res.flags_doc()["config"]["connectivity"] == 4


class TestDualDetector:
    def test_agreeing_routes_score_one(self, golden, base):
        res = convert_image(golden.image, detections_doc=golden.detections)
        assert res.concordance is not None
        assert res.concordance.score == 1.0
        assert res.flags == []
        assert res.netlist_text == base.netlist_text

    def test_disagreement_flags_both_types(self, golden):
        doc = json.loads(json.dumps(golden.detections))
        victim = next(c for c in doc["components"]
                      if c["type"] not in ("ground", "resistor"))
        victim["type"] = "resistor"
        res = convert_image(golden.image, detections_doc=doc)
        kinds = [f.kind for f in res.flags]
        assert kinds.count(FlagKind.type_count_mismatch) >= 2
        assert res.concordance.score < 1.0
        assert res.status() == "flagged"

    def test_set_type_heals_disagreement(self, golden, base):
        doc = json.loads(json.dumps(golden.detections))
        victim = next(c for c in doc["components"]
                      if c["type"] not in ("ground", "resistor"))
        true_type = victim["type"]
        victim["type"] = "resistor"
        probe = convert_image(golden.image, detections_doc=doc)
        assert probe.status() == "flagged"
        cid = doc["components"].index(victim)
        ov = parse_override({"action": "set_type", "component": cid,
                             "payload": {"type": true_type}})
        healed = convert_image(golden.image, detections_doc=doc, overrides=[ov])
        assert healed.status() == "complete"
        assert netlists_equivalent(healed.netlist, base.netlist).equivalent


class TestOverrides:
    def test_set_value_changes_card(self, golden, base):
        cid = min(base.assignments)
        ov = parse_override({"action": "set_value", "component": cid,
                             "payload": {"value": "8.2k" if base.assignments[
                                 cid].designator.startswith("R") else "33"}})
        res = convert_image(golden.image, overrides=[ov])
        assert res.netlist_text != base.netlist_text
        assert res.assignments[cid].value_text in ("8.2k", "33")

    def test_set_designator(self, golden, base):
        cid = min(base.assignments)
        prefix = base.assignments[cid].designator[0]
        ov = parse_override({"action": "set_designator", "component": cid,
                             "payload": {"designator": prefix + "77"}})
        res = convert_image(golden.image, overrides=[ov])
        assert res.assignments[cid].designator == prefix + "77"
        assert prefix + "77" in res.netlist_text

    def test_unknown_component_rejected(self, golden):
        ov = parse_override({"action": "set_designator", "component": 999,
                             "payload": {"designator": "R1"}})
        with pytest.raises(OverrideError):
            convert_image(golden.image, overrides=[ov])


class TestDanglingGate:
    def test_cut_wire_withholds_netlist(self, golden, base):
        res = convert_image(cut_wire_image(golden, base))
        kinds = [f.kind for f in res.flags]
        assert FlagKind.dangling_terminal in kinds
        assert res.netlist is None
        assert any("withheld" in w for w in res.warnings)

    def test_force_emits_anyway(self, golden, base):
        res = convert_image(cut_wire_image(golden, base), force=True)
        assert res.netlist is not None
        assert res.status() == "flagged"  # flags remain on record

    def test_accept_resolves_flag(self, golden, base):
        img = cut_wire_image(golden, base)
        probe = convert_image(img)
        accepts = parse_overrides(
            [{"action": "accept", "flag": i}
             for i, f in enumerate(probe.flags) if f.resolution is None])
        res = convert_image(img, overrides=accepts)
        assert res.status() == "complete"
        assert res.netlist is not None

    def test_bind_terminal_restores_connection(self, golden, base):
        img = cut_wire_image(golden, base)
        probe = convert_image(img)
        broken = [f for f in probe.flags
                  if f.kind is FlagKind.dangling_terminal
                  and isinstance(f.subject, int)]
        fixes = []
        for f in broken:
            cid = f.subject
            golden_bind = dict(base.nodemap.bindings[cid])
            have = {r for r, _ in probe.nodemap.bindings.get(cid, [])}
            for role, node in golden_bind.items():
                if role not in have:
                    fixes.append(parse_override(
                        {"action": "bind_terminal", "component": cid,
                         "payload": {"role": role, "node": node}}))
        assert fixes
        res = convert_image(img, overrides=fixes)
        dangling = [f for f in res.flags
                    if f.kind is FlagKind.dangling_terminal
                    and f.resolution is None and isinstance(f.subject, int)]
        assert dangling == []


class TestParseOverride:
    def test_unknown_action(self):
        with pytest.raises(OverrideError):
            parse_override({"action": "recolor"})

    def test_ground_retype_rejected(self):
        with pytest.raises(OverrideError):
            parse_override({"action": "set_type", "component": 1,
                            "payload": {"type": "ground"}})

    def test_bad_value(self):
        with pytest.raises(OverrideError):
            parse_override({"action": "set_value", "component": 1,
                            "payload": {"value": "10x"}})

    def test_accept_requires_flag_id(self):
        with pytest.raises(OverrideError):
            parse_override({"action": "accept", "component": 1})

    def test_round_trip_json(self):
        doc = {"action": "set_type", "component": 3,
               "payload": {"type": "diode"}}
        assert parse_override(parse_override(doc).to_json()).to_json() == \
            parse_override(doc).to_json()
