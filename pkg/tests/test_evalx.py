import numpy as np
import pytest

from schemnet.detect import BBox, Component, ComponentType
from schemnet.evalx import (
    EvalReport,
    aggregate,
    detection_metrics,
    f1_score,
    match_detections,
    netlist_scores,
    report_text,
)
from schemnet.netlist import parse_netlist

from oracles import brute_force_match_count


def comp(i, ctype, x, y, w=40, h=40):
    return Component(id=i, ctype=ctype, bbox=BBox(x, y, w, h))


class TestMatchDetections:
    def test_identical_lists(self):
        gold = [comp(0, ComponentType.resistor, 0, 0),
                comp(1, ComponentType.diode, 100, 0)]
        m = match_detections(gold, gold, 0.5)
        assert [(p, g) for p, g, _ in m.pairs] == [(0, 0), (1, 1)]
        assert all(iou == 1.0 for _, _, iou in m.pairs)
        assert m.unmatched_pred == [] and m.unmatched_gold == []

    def test_type_must_match(self):
        gold = [comp(0, ComponentType.capacitor, 0, 0)]
        pred = [comp(0, ComponentType.resistor, 0, 0)]
        m = match_detections(pred, gold, 0.5)
        assert m.pairs == []
        assert m.unmatched_pred == [0] and m.unmatched_gold == [0]

    def test_higher_iou_wins(self):
        gold = [comp(0, ComponentType.resistor, 0, 0)]
        pred = [comp(0, ComponentType.resistor, 10, 0),   # shifted
                comp(1, ComponentType.resistor, 2, 0)]    # closer
        m = match_detections(pred, gold, 0.3)
        assert [(p, g) for p, g, _ in m.pairs] == [(1, 0)]
        assert m.unmatched_pred == [0]

    def test_threshold_excludes(self):
        gold = [comp(0, ComponentType.resistor, 0, 0)]
        pred = [comp(0, ComponentType.resistor, 30, 0)]
        m = match_detections(pred, gold, 0.5)
        assert m.pairs == []

    def test_one_to_one(self):
        gold = [comp(0, ComponentType.resistor, 0, 0),
                comp(1, ComponentType.resistor, 8, 0)]
        pred = [comp(0, ComponentType.resistor, 4, 0)]
        m = match_detections(pred, gold, 0.3)
        assert len(m.pairs) == 1 and len(m.unmatched_gold) == 1

    def test_greedy_matches_brute_force_optimum(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            gold = [comp(i, ComponentType.resistor,
                         int(rng.integers(0, 120)), int(rng.integers(0, 120)))
                    for i in range(int(rng.integers(1, 6)))]
            pred = [comp(i, ComponentType.resistor,
                         int(rng.integers(0, 120)), int(rng.integers(0, 120)))
                    for i in range(int(rng.integers(1, 6)))]
            m = match_detections(pred, gold, 0.5)
            assert len(m.pairs) == brute_force_match_count(pred, gold, 0.5)

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            match_detections([], [], 0.0)


class TestDetectionMetrics:
    def _of_counts(self, tp, fp, fn):
        pairs = [(i, i, 1.0) for i in range(tp)]
        from schemnet.evalx import DetectionMatch
        return DetectionMatch(pairs=pairs,
                              unmatched_pred=list(range(fp)),
                              unmatched_gold=list(range(fn)))

    def test_definition(self):
        p, r, f1 = detection_metrics([self._of_counts(94, 6, 1)])
        assert p == pytest.approx(0.94)
        assert r == pytest.approx(94 / 95)

    def test_f1_formula(self):
        assert f1_score(0.94, 0.99) == pytest.approx(2 * 0.94 * 0.99 / 1.93)
        assert abs(f1_score(0.94, 0.99) - 0.9643) < 1e-4

    def test_perfect(self):
        assert detection_metrics([self._of_counts(10, 0, 0)]) == (1.0, 1.0, 1.0)

    def test_pooled_across_corpus(self):
        p, r, _ = detection_metrics(
            [self._of_counts(1, 1, 0), self._of_counts(3, 0, 1)])
        assert p == pytest.approx(4 / 5) and r == pytest.approx(4 / 5)

    def test_empty_corpus_error(self):
        with pytest.raises(ValueError):
            detection_metrics([self._of_counts(0, 3, 0)])

    def test_zero_f1_when_nothing_matches(self):
        _, _, f1 = detection_metrics([self._of_counts(0, 1, 1)])
        assert f1 == 0.0


GOLD = ("* t\n"
        "C1 N2 0 1u\n"
        "R1 N1 N2 10k\n"
        "V1 N1 0 5\n"
        ".end\n")


class TestNetlistScores:
    def test_perfect(self):
        g = parse_netlist(GOLD)
        assert netlist_scores(g, g) == (1.0, 1.0, 1.0)

    def test_missing_card_fraction(self):
        g = parse_netlist(GOLD)
        partial = parse_netlist("* t\nC1 N2 0 1u\nR1 N1 N2 10k\n.end\n")
        text, structure, overall = netlist_scores(partial, g)
        assert structure == pytest.approx(2 / 3)
        assert overall == pytest.approx(2 / 3)

    def test_one_of_ten_missing(self):
        cards = "".join(f"R{i} N{i} 0 1k\n" for i in range(1, 11))
        g = parse_netlist("* t\n" + cards + ".end\n")
        cards9 = "".join(f"R{i} N{i} 0 1k\n" for i in range(1, 10))
        p = parse_netlist("* t\n" + cards9 + ".end\n")
        _, structure, _ = netlist_scores(p, g)
        assert structure == pytest.approx(0.9)

    def test_value_defaulted_structure_full(self):
        g = parse_netlist(GOLD)
        wrong_value = parse_netlist(GOLD.replace("10k", "1k"))
        text, structure, overall = netlist_scores(wrong_value, g)
        assert structure == 1.0
        assert overall < 1.0
        assert text < 1.0

    def test_withheld_netlist_scores_zero(self):
        g = parse_netlist(GOLD)
        assert netlist_scores(None, g) == (0.0, 0.0, 0.0)

    def test_renamed_nodes_still_perfect(self):
        g = parse_netlist(GOLD)
        renamed = parse_netlist(GOLD.replace("N1", "A").replace("N2", "B"))
        assert netlist_scores(renamed, g) == (1.0, 1.0, 1.0)

    def test_golden_texts_drive_text_accuracy(self):
        g = parse_netlist(GOLD)
        text, _, _ = netlist_scores(g, g, golden_texts=["C1", "R1", "V1", "1u",
                                                        "10k", "5", "extra"])
        assert text == pytest.approx(6 / 7)


class TestAggregate:
    def _rows(self):
        return [
            {"name": "a", "text_accuracy": 1.0, "structure_accuracy": 1.0,
             "overall_accuracy": 1.0},
            {"name": "b", "text_accuracy": 0.5, "structure_accuracy": 0.8,
             "overall_accuracy": 0.6},
        ]

    def _matches(self):
        from schemnet.evalx import DetectionMatch
        return [DetectionMatch(pairs=[(0, 0, 1.0)], unmatched_pred=[],
                               unmatched_gold=[])]

    def test_unweighted_mean(self):
        rep = aggregate(self._matches(), self._rows())
        assert rep.structure_accuracy == pytest.approx(0.9)
        assert rep.overall_accuracy == pytest.approx(0.8)

    def test_order_invariant(self):
        a = aggregate(self._matches(), self._rows())
        b = aggregate(self._matches(), list(reversed(self._rows())))
        assert a.structure_accuracy == b.structure_accuracy
        assert a.overall_accuracy == b.overall_accuracy

    def test_report_bounds_enforced(self):
        with pytest.raises(ValueError):
            EvalReport(precision=1.2, recall=1.0, f1=1.0, text_accuracy=1.0,
                       structure_accuracy=1.0, overall_accuracy=1.0)

    def test_rounded_input_f1_reported(self):
        rep = aggregate(self._matches(), self._rows())
        doc = rep.to_json()
        assert "f1_rounded_inputs" in doc["detection"]
        assert "definitions" in doc

    def test_report_text_renders(self):
        rep = aggregate(self._matches(), self._rows())
        out = report_text(rep)
        assert "structure" in out and "a" in out and "0.9000" in out
