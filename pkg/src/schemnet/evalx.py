"""Evaluation harness: detection precision/recall/F1 with IoU matching, plus
per-schematic netlist accuracy scores against golden data."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .detect import Component
from .netlist import (
    Netlist,
    format_value,
    max_common_cards,
    netlists_equivalent,
)

# printed in every report so readers know exactly what the numbers mean
METRIC_DEFINITIONS = """\
metric definitions:
  precision/recall/F1  TP, FP, FN pooled corpus-wide; a predicted box is a
                       true positive when it is greedily matched (IoU
                       descending) to an unmatched golden box of the same
                       type with IoU >= threshold.
  text_accuracy        exact label-string matches (designators and values,
                       as multisets) / golden label count.
  structure_accuracy   1 when the netlists are structurally equivalent
                       ignoring values, else the largest golden card subset
                       reproduced under the best node mapping / golden cards.
  overall_accuracy     1 when fully equivalent including values with all
                       designators matching, else the fraction of golden
                       cards reproduced with correct type, nodes, and value.
  corpus accuracy scores are unweighted means of per-schematic scores; an
  alternative binary reading (schematic counts fully correct or not) is
  reported alongside as *_binary."""


@dataclass
class DetectionMatch:
    pairs: list[tuple[int, int, float]]  # (predicted id, golden id, IoU)
    unmatched_pred: list[int]
    unmatched_gold: list[int]


def match_detections(
    pred: list[Component], gold: list[Component], iou_threshold: float = 0.5
) -> DetectionMatch:
    """Greedy one-to-one matching by IoU descending, ties by (gold id,
    pred id); a pair requires equal component types and IoU >= threshold."""
    if not 0 < iou_threshold <= 1:
        raise ValueError("iou_threshold must be in (0, 1]")
    cands = []
    for g in gold:
        for p in pred:
            if p.ctype is not g.ctype:
                continue
            iou = p.bbox.iou(g.bbox)
            if iou >= iou_threshold:
                cands.append((-iou, g.id, p.id, iou))
    cands.sort()
    taken_p: set[int] = set()
    taken_g: set[int] = set()
    pairs = []
    for _, gid, pid, iou in cands:
        if pid in taken_p or gid in taken_g:
            continue
        taken_p.add(pid)
        taken_g.add(gid)
        pairs.append((pid, gid, iou))
    return DetectionMatch(
        pairs=pairs,
        unmatched_pred=sorted(p.id for p in pred if p.id not in taken_p),
        unmatched_gold=sorted(g.id for g in gold if g.id not in taken_g),
    )


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def detection_metrics(matches: list[DetectionMatch]) -> tuple[float, float, float]:
    """Pool TP/FP/FN over the corpus and return (precision, recall, f1)."""
    tp = sum(len(m.pairs) for m in matches)
    fp = sum(len(m.unmatched_pred) for m in matches)
    fn = sum(len(m.unmatched_gold) for m in matches)
    if tp + fn == 0:
        raise ValueError("corpus has no golden components")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn)
    return precision, recall, f1_score(precision, recall)


# ---------------------------------------------------------------------------
# netlist scoring

def _label_strings(net: Netlist) -> Counter:
    labels: Counter = Counter()
    for card in net.cards:
        labels[card.designator] += 1
        if card.model is not None:
            labels[card.model] += 1
        elif card.value is not None:
            labels[format_value(card.value)] += 1
    return labels


def netlist_scores(
    generated: Optional[Netlist],
    golden: Netlist,
    golden_texts: Optional[list[str]] = None,
) -> tuple[float, float, float]:
    """Per-schematic (text_accuracy, structure_accuracy, overall_accuracy).

    `golden_texts` are the label strings on the schematic; when omitted they
    are reconstructed from the golden cards. A withheld netlist (emission
    blocked by unresolved flags) scores zero across the board.
    """
    if golden_texts is None:
        golden_labels = _label_strings(golden)
    else:
        golden_labels = Counter(golden_texts)
    n_cards = len(golden.cards)
    if generated is None or n_cards == 0:
        return 0.0, 0.0, 0.0

    got_labels = _label_strings(generated)
    n_labels = sum(golden_labels.values())
    matched = sum((golden_labels & got_labels).values())
    text_acc = matched / n_labels if n_labels else 1.0

    if netlists_equivalent(golden, generated, ignore_values=True).equivalent:
        structure = 1.0
    else:
        structure = max_common_cards(golden, generated, ignore_values=True) / n_cards

    eq = netlists_equivalent(golden, generated, ignore_values=False)
    desigs_match = sorted(c.designator for c in golden.cards) == sorted(
        c.designator for c in generated.cards
    )
    if eq.equivalent and desigs_match:
        overall = 1.0
    else:
        overall = max_common_cards(golden, generated, ignore_values=False) / n_cards
    return text_acc, structure, overall


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    text_accuracy: float
    structure_accuracy: float
    overall_accuracy: float
    per_schematic: list[dict] = field(default_factory=list)

    def __post_init__(self):
        for name in ("precision", "recall", "f1", "text_accuracy",
                     "structure_accuracy", "overall_accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} out of [0, 1]: {v}")

    def to_json(self) -> dict:
        rows = self.per_schematic
        def binary(key):
            return (sum(1 for r in rows if r[key] == 1.0) / len(rows)) if rows else 0.0
        return {
            "definitions": METRIC_DEFINITIONS,
            "detection": {
                "precision": self.precision,
                "recall": self.recall,
                "f1_pooled": self.f1,
                "f1_rounded_inputs": f1_score(round(self.precision, 2),
                                              round(self.recall, 2)),
            },
            "netlist": {
                "text_accuracy": self.text_accuracy,
                "structure_accuracy": self.structure_accuracy,
                "overall_accuracy": self.overall_accuracy,
                "structure_binary": binary("structure_accuracy"),
                "overall_binary": binary("overall_accuracy"),
            },
            "per_schematic": rows,
        }


def aggregate(matches: list[DetectionMatch], rows: list[dict]) -> EvalReport:
    """Build a corpus report: pooled detection metrics, mean accuracy scores."""
    precision, recall, f1 = detection_metrics(matches)
    if not rows:
        raise ValueError("no schematics scored")
    def mean(key):
        return sum(r[key] for r in rows) / len(rows)
    return EvalReport(
        precision=precision,
        recall=recall,
        f1=f1,
        text_accuracy=mean("text_accuracy"),
        structure_accuracy=mean("structure_accuracy"),
        overall_accuracy=mean("overall_accuracy"),
        per_schematic=rows,
    )


def report_text(report: EvalReport) -> str:
    doc = report.to_json()
    det = doc["detection"]
    nl = doc["netlist"]
    lines = [METRIC_DEFINITIONS, ""]
    lines.append(f"{'schematic':<16}{'text':>8}{'structure':>11}{'overall':>9}")
    for row in report.per_schematic:
        lines.append(
            f"{row['name']:<16}{row['text_accuracy']:>8.4f}"
            f"{row['structure_accuracy']:>11.4f}{row['overall_accuracy']:>9.4f}"
        )
    lines.append("")
    lines.append(
        f"detection: precision {det['precision']:.4f}  recall {det['recall']:.4f}"
        f"  f1 {det['f1_pooled']:.4f} (from rounded P/R: "
        f"{det['f1_rounded_inputs']:.4f})"
    )
    lines.append(
        f"netlist:   text {nl['text_accuracy']:.4f}  structure "
        f"{nl['structure_accuracy']:.4f}  overall {nl['overall_accuracy']:.4f}"
        f"  (binary: structure {nl['structure_binary']:.4f}, overall "
        f"{nl['overall_binary']:.4f})"
    )
    return "\n".join(lines) + "\n"
