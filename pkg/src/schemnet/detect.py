"""Component detection: annotation ingestion, template-matching backend, and
the two-detector concordance check that raises review flags."""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

import cv2
import numpy as np

from .geometry import BBox
from .raster import BinaryImage


class ComponentType(str, enum.Enum):
    resistor = "resistor"
    capacitor = "capacitor"
    inductor = "inductor"
    diode = "diode"
    voltage_source = "voltage_source"
    current_source = "current_source"
    npn = "npn"
    pnp = "pnp"
    nmos = "nmos"
    pmos = "pmos"
    ground = "ground"  # connectivity-only: never emits a netlist card


# canonical terminal roles per type, in card node order
TERMINAL_ROLES: dict[ComponentType, tuple[str, ...]] = {
    ComponentType.resistor: ("t1", "t2"),
    ComponentType.capacitor: ("t1", "t2"),
    ComponentType.inductor: ("t1", "t2"),
    ComponentType.diode: ("t1", "t2"),
    ComponentType.voltage_source: ("t1", "t2"),
    ComponentType.current_source: ("t1", "t2"),
    ComponentType.npn: ("collector", "base", "emitter"),
    ComponentType.pnp: ("collector", "base", "emitter"),
    ComponentType.nmos: ("drain", "gate", "source"),
    ComponentType.pmos: ("drain", "gate", "source"),
    ComponentType.ground: ("gnd",),
}

NETLIST_TYPES = tuple(t for t in ComponentType if t is not ComponentType.ground)


class FlagKind(str, enum.Enum):
    type_count_mismatch = "type_count_mismatch"
    terminal_count_mismatch = "terminal_count_mismatch"
    unbound_text = "unbound_text"
    prefix_conflict = "prefix_conflict"
    dangling_terminal = "dangling_terminal"
    missing_value = "missing_value"


@dataclass
class Flag:
    kind: FlagKind
    subject: int | str  # component id, net id, or text id depending on kind
    detail: str
    resolution: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "subject": self.subject,
            "detail": self.detail,
            "resolution": self.resolution,
        }


@dataclass(frozen=True)
class Terminal:
    role: str
    xy: tuple[int, int]


@dataclass(frozen=True)
class Component:
    id: int
    ctype: ComponentType
    bbox: BBox
    confidence: float = 1.0
    terminals: tuple[Terminal, ...] = ()

    def expected_terminals(self) -> tuple[str, ...]:
        return TERMINAL_ROLES[self.ctype]


class IngestError(ValueError):
    pass


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise IngestError(f"{path}: {message}")


def ingest_detections(doc: dict | str | bytes, img_dims: tuple[int, int]) -> list[Component]:
    """Parse a detection interchange document into a canonical component list.

    Components come back sorted by (y, x, original index) with dense ids.
    BBoxes at most 2 px outside the image are clamped with that clamp applied
    silently; anything further out is rejected.
    """
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise IngestError(f"$: invalid JSON: {exc}") from exc
    width, height = img_dims
    _require(isinstance(doc, dict), "$", "document must be an object")
    comps_raw = doc.get("components")
    _require(isinstance(comps_raw, list), "$.components", "missing or not a list")
    parsed = []
    for i, entry in enumerate(comps_raw):
        path = f"$.components[{i}]"
        _require(isinstance(entry, dict), path, "must be an object")
        tname = entry.get("type")
        try:
            ctype = ComponentType(tname)
        except ValueError:
            raise IngestError(f"{path}.type: unknown component type {tname!r}") from None
        raw_bbox = entry.get("bbox")
        _require(
            isinstance(raw_bbox, list) and len(raw_bbox) == 4
            and all(isinstance(v, (int, float)) for v in raw_bbox),
            f"{path}.bbox", "must be [x, y, w, h]",
        )
        x, y, w, h = (int(round(v)) for v in raw_bbox)
        _require(w >= 1 and h >= 1, f"{path}.bbox", "w and h must be >= 1")
        _require(
            x >= -2 and y >= -2 and x + w <= width + 2 and y + h <= height + 2,
            f"{path}.bbox", "more than 2 px outside the image",
        )
        try:
            bbox = BBox(x, y, w, h).clamp(width, height)
        except ValueError:
            raise IngestError(f"{path}.bbox: fully outside the image") from None
        conf = entry.get("confidence", 1.0)
        _require(
            isinstance(conf, (int, float)) and 0.0 <= conf <= 1.0,
            f"{path}.confidence", "must be in [0, 1]",
        )
        terminals = []
        for j, traw in enumerate(entry.get("terminals") or []):
            tpath = f"{path}.terminals[{j}]"
            _require(isinstance(traw, dict), tpath, "must be an object")
            role = traw.get("role")
            _require(role in TERMINAL_ROLES[ctype], f"{tpath}.role",
                     f"invalid role {role!r} for {ctype.value}")
            xy = traw.get("xy")
            _require(
                isinstance(xy, list) and len(xy) == 2
                and all(isinstance(v, (int, float)) for v in xy),
                f"{tpath}.xy", "must be [x, y]",
            )
            terminals.append(Terminal(role, (int(round(xy[0])), int(round(xy[1])))))
        parsed.append((bbox.y, bbox.x, i, ctype, bbox, float(conf), tuple(terminals)))
    parsed.sort(key=lambda t: (t[0], t[1], t[2]))
    return [
        Component(id=k, ctype=p[3], bbox=p[4], confidence=p[5], terminals=p[6])
        for k, p in enumerate(parsed)
    ]


def components_to_doc(comps: list[Component], img_dims: tuple[int, int]) -> dict:
    """Inverse of ingest_detections (canonical serialization)."""
    return {
        "image": {"width": img_dims[0], "height": img_dims[1]},
        "components": [
            {
                "type": c.ctype.value,
                "bbox": c.bbox.as_list(),
                "confidence": c.confidence,
                "terminals": [{"role": t.role, "xy": list(t.xy)} for t in c.terminals],
            }
            for c in comps
        ],
    }


# ---------------------------------------------------------------------------
# template backend

def _max_pool(bits: np.ndarray, p: int) -> np.ndarray:
    h, w = bits.shape
    ph, pw = -(-h // p), -(-w // p)
    padded = np.zeros((ph * p, pw * p), dtype=bool)
    padded[:h, :w] = bits
    return padded.reshape(ph, p, pw, p).any(axis=(1, 3))


def detect_template(
    img: BinaryImage,
    library,
    scales: tuple[int, ...] = (1,),
    min_score: float = 0.97,
) -> list[Component]:
    """Exact-mask correlation against the symbol library.

    A pose is detected where at least `min_score` of its ink pixels are
    foreground; overlapping candidates are suppressed by (score, ink count,
    y, x). Confidence is the ink-match fraction.
    """
    bits = img.bits
    h, w = bits.shape
    candidates = []  # (-score, -ink, y, x, ctype, pose, scale)
    pooled_cache: dict[int, np.ndarray] = {}
    for s in scales:
        p = 4 * s
        if p not in pooled_cache:
            pooled_cache[p] = _max_pool(bits, p).astype(np.float32)
        pooled = pooled_cache[p]
        for ctype, poses in library.poses.items():
            for pose in poses:
                tmpl = pose.scaled_mask(s)
                th, tw = tmpl.shape
                if th > h or tw > w:
                    continue
                ink = int(tmpl.sum())
                pt = _max_pool(tmpl, p).astype(np.float32)
                if pt.shape[0] > pooled.shape[0] or pt.shape[1] > pooled.shape[1]:
                    continue
                corr = cv2.matchTemplate(pooled, pt, cv2.TM_CCORR)
                # the pooling grid can split a symbol's ink across cells the
                # template left empty, so the coarse gate stays permissive
                need = 0.85 * float(pt.sum())
                hits = (corr >= need).astype(np.uint8)
                if not hits.any():
                    continue
                # refine each connected blob of coarse hits with one exact
                # correlation over its (small) full-resolution window
                n_blobs, _, stats, _ = cv2.connectedComponentsWithStats(hits)
                tmpl_f = tmpl.astype(np.float32)
                for b in range(1, n_blobs):
                    bx0, by0, bw, bh = (int(stats[b, k]) for k in range(4))
                    y0 = max(0, by0 * p - p)
                    x0 = max(0, bx0 * p - p)
                    y1 = min(h, (by0 + bh) * p + p + th)
                    x1 = min(w, (bx0 + bw) * p + p + tw)
                    win = bits[y0:y1, x0:x1]
                    if win.shape[0] < th or win.shape[1] < tw:
                        continue
                    ex = cv2.matchTemplate(win.astype(np.float32), tmpl_f,
                                           cv2.TM_CCORR)
                    eys, exs = np.nonzero(ex >= min_score * ink)
                    for ey, ex_ in zip(eys.tolist(), exs.tolist()):
                        # float32 correlation can overshoot 1.0 by ~1e-7;
                        # clamp so NMS ties break on ink count, not fp noise
                        score = min(1.0, float(ex[ey, ex_]) / ink)
                        candidates.append(
                            (-score, -ink, y0 + ey, x0 + ex_,
                             len(candidates), ctype, pose, s)
                        )
    candidates.sort(key=lambda c: c[:5])
    accepted: list[tuple[BBox, tuple]] = []
    for neg_score, neg_ink, y0, x0, _, ctype, pose, s in candidates:
        th, tw = pose.mask.shape[0] * s, pose.mask.shape[1] * s
        bbox = BBox(x0, y0, tw, th)
        if any(bbox.intersects(b) for b, _ in accepted):
            continue
        accepted.append((bbox, (ctype, pose, s, -neg_score)))
    accepted.sort(key=lambda a: (a[0].y, a[0].x))
    comps = []
    for k, (bbox, (ctype, pose, s, score)) in enumerate(accepted):
        terms = tuple(
            Terminal(role, (bbox.x + tx * s + (s - 1) // 2, bbox.y + ty * s + (s - 1) // 2))
            for role, (tx, ty) in pose.terminals
        )
        comps.append(Component(id=k, ctype=ctype, bbox=bbox, confidence=score, terminals=terms))
    return comps


# ---------------------------------------------------------------------------
# concordance

@dataclass
class ConcordanceReport:
    score: float
    per_type: list[tuple[ComponentType, int, int]]
    flags: list[Flag] = field(default_factory=list)


def verify_concordance(
    a: list[Component] | Counter, b: list[Component] | Counter
) -> ConcordanceReport:
    """Multiset Jaccard over component type counts; one flag per differing type.

    Score is sum(min)/sum(max) over all types present in either list, and 1.0
    when both lists are empty.
    """
    ca = a if isinstance(a, Counter) else Counter(c.ctype for c in a)
    cb = b if isinstance(b, Counter) else Counter(c.ctype for c in b)
    types = sorted(set(ca) | set(cb), key=lambda t: t.value)
    num = sum(min(ca[t], cb[t]) for t in types)
    den = sum(max(ca[t], cb[t]) for t in types)
    score = num / den if den else 1.0
    per_type = [(t, ca[t], cb[t]) for t in types]
    flags = [
        Flag(
            kind=FlagKind.type_count_mismatch,
            subject=t.value,
            detail=f"detector A found {ca[t]} x {t.value}, detector B found {cb[t]}",
        )
        for t in types
        if ca[t] != cb[t]
    ]
    return ConcordanceReport(score=score, per_type=per_type, flags=flags)
