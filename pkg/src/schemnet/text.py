"""Text extraction and binding: bitmap-glyph recognition (or ingested OCR),
spatial proximity binding of labels to components, and the designator/value
grammar."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import font
from .detect import Component, ComponentType, Flag, FlagKind, IngestError, _require
from .geometry import BBox
from .netlist import ValueSyntaxError, parse_value
from .raster import BinaryImage, label_components

DESIGNATOR_PREFIXES = "RCLDVIQM"


@dataclass(frozen=True)
class TextBox:
    id: int
    string: str
    bbox: BBox
    confidence: float = 1.0


@dataclass(frozen=True)
class ParsedDesignator:
    prefix: str
    index: int


class DesignatorSyntaxError(ValueError):
    pass


_DESIGNATOR_RE = re.compile(r"^([A-Za-z])([0-9]+)$")


def parse_designator(s: str) -> ParsedDesignator:
    """`R12` -> (R, 12). Only the prefixes R C L D V I Q M are designators."""
    m = _DESIGNATOR_RE.match(s.strip())
    if not m or m.group(1).upper() not in DESIGNATOR_PREFIXES:
        raise DesignatorSyntaxError(f"{s!r} is not a reference designator")
    return ParsedDesignator(prefix=m.group(1).upper(), index=int(m.group(2)))


def is_designator(s: str) -> bool:
    try:
        parse_designator(s)
        return True
    except DesignatorSyntaxError:
        return False


@dataclass
class LabelBinding:
    component_id: int
    designator_text: Optional[int] = None  # TextBox ids
    value_text: Optional[int] = None
    parsed: Optional[ParsedDesignator] = None
    designator_string: Optional[str] = None
    value_string: Optional[str] = None


# ---------------------------------------------------------------------------
# built-in glyph recognizer

def recognize_glyphs(
    img: BinaryImage,
    mask: list[BBox],
    scales: tuple[int, ...] = (2, 4),
) -> list[TextBox]:
    """Exact-match recognition of the built-in 5x7 bitmap font.

    Ink inside `mask` boxes (the detected symbols) is ignored. Matched glyphs
    whose cells sit within one glyph width of each other merge left-to-right
    into one TextBox. Confidence is 1.0 by construction (exact matches only).
    """
    work = img.bits.copy()
    h, w = work.shape
    for box in mask:
        b = box.expand(1)
        work[max(0, b.y) : min(h, b.y2), max(0, b.x) : min(w, b.x2)] = False
    lm = label_components(BinaryImage(work), 8)
    tight_table = _tight_glyphs()
    matches = []  # (scale, cell_x, cell_y, char)
    for region in lm.region_stats:
        rb = region.bbox
        crop = lm.labels[rb.y : rb.y2, rb.x : rb.x2] == (
            lm.labels[region.seed[0], region.seed[1]]
        )
        for s in scales:
            if rb.w > font.GLYPH_W * s or rb.h > font.GLYPH_H * s:
                continue
            key = (rb.w, rb.h)
            for ch, (tmask, offx, offy) in tight_table.get(s, {}).items():
                if tmask.shape != (rb.h, rb.w):
                    continue
                if np.array_equal(crop, tmask):
                    matches.append((s, rb.x - offx * s, rb.y - offy * s, ch))
                    break
            else:
                continue
            break
    # group into lines: same scale, overlapping cell rows, left-to-right
    boxes: list[TextBox] = []
    matches.sort(key=lambda m: (m[0], m[2], m[1]))
    used = [False] * len(matches)
    out = []
    for i, (s, cx, cy, ch) in enumerate(matches):
        if used[i]:
            continue
        used[i] = True
        line = [(cx, cy, ch)]
        cur_x = cx
        while True:
            nxt = None
            for j, (s2, cx2, cy2, ch2) in enumerate(matches):
                if used[j] or s2 != s or abs(cy2 - cy) > s:
                    continue
                gap = cx2 - (cur_x + font.GLYPH_W * s)
                if 0 <= gap <= font.GLYPH_W * s:
                    if nxt is None or cx2 < matches[nxt][1]:
                        nxt = j
            if nxt is None:
                break
            used[nxt] = True
            _, cx2, cy2, ch2 = matches[nxt]
            line.append((cx2, cy2, ch2))
            cur_x = cx2
        line.sort(key=lambda t: t[0])
        string = "".join(ch for _, _, ch in line)
        x0 = line[0][0]
        x1 = line[-1][0] + font.GLYPH_W * s
        y0 = min(cy for _, cy, _ in line)
        out.append((y0, x0, string, BBox(x0, y0, x1 - x0, font.GLYPH_H * s)))
    out.sort(key=lambda t: (t[0], t[1]))
    for k, (_, _, string, bbox) in enumerate(out):
        boxes.append(TextBox(id=k, string=string, bbox=bbox, confidence=1.0))
    return boxes


_TIGHT_CACHE: dict[int, dict[str, tuple[np.ndarray, int, int]]] = {}


def _tight_glyphs():
    if not _TIGHT_CACHE:
        for s in (1, 2, 3, 4, 6, 8):
            table = {}
            for ch, g in font.GLYPHS.items():
                t, offx, offy = font.tight(g)
                table[ch] = (font.upscale(t, s), offx, offy)
            _TIGHT_CACHE[s] = table
    return _TIGHT_CACHE


# ---------------------------------------------------------------------------
# OCR ingestion

def ingest_ocr(doc: dict | str | bytes) -> list[TextBox]:
    """Parse an OCR interchange document; boxes sorted by (y, x), empty
    strings dropped."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise IngestError(f"$: invalid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "$", "document must be an object")
    texts = doc.get("texts")
    _require(isinstance(texts, list), "$.texts", "missing or not a list")
    parsed = []
    for i, entry in enumerate(texts):
        path = f"$.texts[{i}]"
        _require(isinstance(entry, dict), path, "must be an object")
        string = entry.get("string")
        _require(isinstance(string, str), f"{path}.string", "must be a string")
        if not string.strip():
            continue
        raw = entry.get("bbox")
        _require(
            isinstance(raw, list) and len(raw) == 4
            and all(isinstance(v, (int, float)) for v in raw),
            f"{path}.bbox", "must be [x, y, w, h]",
        )
        conf = entry.get("confidence", 1.0)
        _require(isinstance(conf, (int, float)) and 0 <= conf <= 1,
                 f"{path}.confidence", "must be in [0, 1]")
        x, y, w, h = (int(round(v)) for v in raw)
        _require(w >= 1 and h >= 1, f"{path}.bbox", "w and h must be >= 1")
        parsed.append((y, x, string.strip(), BBox(x, y, w, h), float(conf)))
    parsed.sort(key=lambda t: (t[0], t[1]))
    return [
        TextBox(id=k, string=p[2], bbox=p[3], confidence=p[4])
        for k, p in enumerate(parsed)
    ]


def texts_to_doc(texts: list[TextBox]) -> dict:
    return {
        "texts": [
            {"string": t.string, "bbox": t.bbox.as_list(), "confidence": t.confidence}
            for t in texts
        ]
    }


# ---------------------------------------------------------------------------
# proximity binding

def _is_value_candidate(s: str) -> bool:
    if s.upper() in ("DDEF", "QNPN", "QPNP", "MNMOS", "MPMOS"):
        return True
    try:
        parse_value(s, unit_words=True)
        return True
    except ValueSyntaxError:
        return False


def bind_text(
    comps: list[Component],
    texts: list[TextBox],
    max_bind_distance: Optional[float] = None,
) -> tuple[list[LabelBinding], list[Flag]]:
    """Greedy globally-nearest assignment of text boxes to components.

    Distance is text-center to component-bbox perimeter. A text parsing as a
    designator fills the designator slot, anything else the value slot; a
    second designator candidate raises prefix_conflict, leftovers
    unbound_text. Ties break by (text id, component id).
    """
    flags: list[Flag] = []
    bindable = [c for c in comps if c.ctype is not ComponentType.ground]
    bindings = {c.id: LabelBinding(component_id=c.id) for c in bindable}
    pairs = []
    for t in texts:
        cx, cy = t.bbox.center
        for c in bindable:
            d = c.bbox.distance_to_point(cx, cy)
            limit = (
                max_bind_distance
                if max_bind_distance is not None
                else 1.5 * max(c.bbox.w, c.bbox.h)
            )
            if d <= limit:
                pairs.append((d, t.id, c.id, t))
    pairs.sort(key=lambda p: (p[0], p[1], p[2]))
    bound_texts: set[int] = set()
    for d, tid, cid, t in pairs:
        if tid in bound_texts:
            continue
        b = bindings[cid]
        if is_designator(t.string):
            if b.designator_text is None:
                b.designator_text = tid
                b.designator_string = t.string
                b.parsed = parse_designator(t.string)
                bound_texts.add(tid)
            elif b.designator_string != t.string:
                flags.append(Flag(
                    kind=FlagKind.prefix_conflict, subject=cid,
                    detail=f"component {cid} attracts two designator labels "
                           f"({b.designator_string!r} and {t.string!r}); "
                           f"{t.string!r} left unbound",
                ))
        else:
            if b.value_text is None:
                b.value_text = tid
                b.value_string = t.string
                bound_texts.add(tid)
    for t in texts:
        if t.id not in bound_texts:
            flags.append(Flag(
                kind=FlagKind.unbound_text, subject=t.id,
                detail=f"text {t.string!r} at {t.bbox.as_list()} bound to no component",
            ))
    return [bindings[c.id] for c in bindable], flags
