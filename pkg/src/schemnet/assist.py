"""Advisory HTTP assist service client plus a deterministic in-process mock.

The assist service can cross-check component counts (detect_verify) and
suggest designators/values (designator_assign). It is never authoritative:
suggestions are applied only to components already carrying a missing_value
or prefix_conflict flag, and any failure degrades to a warning."""

from __future__ import annotations

import base64
import json
import os
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import cv2

from . import netlist, text
from .detect import Component, ComponentType, Flag, FlagKind, verify_concordance
from .raster import GrayImage

MAX_PAYLOAD = 8 * 1024 * 1024
KINDS = ("detect_verify", "designator_assign")


class AssistError(RuntimeError):
    pass


def image_png_b64(img: GrayImage) -> str:
    ok, buf = cv2.imencode(".png", img.data)
    if not ok:
        raise AssistError("PNG encoding failed")
    return base64.b64encode(buf.tobytes()).decode("ascii")


def build_request(kind: str, img: GrayImage, context: dict) -> dict:
    if kind not in KINDS:
        raise AssistError(f"unknown assist kind {kind!r}")
    req = {"kind": kind, "image": image_png_b64(img), "context": context}
    if len(json.dumps(req)) > MAX_PAYLOAD:
        raise AssistError("assist payload exceeds 8 MiB")
    return req


@dataclass
class AssistClient:
    url: str
    api_key: Optional[str] = None
    timeout: float = 30.0

    def request(self, req: dict) -> dict:
        import requests

        key = self.api_key or os.environ.get("ASSIST_API_KEY", "")
        headers = {"Authorization": f"Bearer {key}"}
        last: Exception | None = None
        for _ in range(2):  # one retry
            try:
                resp = requests.post(
                    self.url.rstrip("/") + "/v1/assist",
                    json=req, headers=headers, timeout=self.timeout,
                )
                if resp.status_code // 100 != 2:
                    last = AssistError(f"assist returned {resp.status_code}")
                    continue
                return resp.json()
            except Exception as exc:  # noqa: BLE001 - any transport failure
                last = exc
        raise AssistError(f"assist request failed: {last}")


class MockAssist:
    """In-process stand-in with the same `request` contract, answering from a
    fixed golden detections/texts pair. Fully deterministic, no network."""

    def __init__(self, detections_doc: dict, texts_doc: dict | None = None,
                 suggestions: list[dict] | None = None):
        self.detections_doc = detections_doc
        self.texts_doc = texts_doc or {"texts": []}
        self.suggestions = suggestions
        self.requests: list[dict] = []

    def request(self, req: dict) -> dict:
        self.requests.append(req)
        kind = req.get("kind")
        if kind == "detect_verify":
            counts = Counter(
                c["type"] for c in self.detections_doc["components"]
            )
            return {"kind": kind, "counts": dict(sorted(counts.items()))}
        if kind == "designator_assign":
            if self.suggestions is not None:
                return {"kind": kind, "suggestions": self.suggestions,
                        "rationale": "fixed suggestions"}
            strings = [t["string"] for t in self.texts_doc["texts"]]
            desigs = [s for s in strings if text.is_designator(s)]
            values = [s for s in strings if not text.is_designator(s)]
            suggestions = [
                {"component": i, "designator": d,
                 "value": values[i] if i < len(values) else None}
                for i, d in enumerate(desigs)
            ]
            return {
                "kind": kind,
                "suggestions": suggestions,
                "rationale": "echoed from golden labels",
            }
        return {"error": f"unknown kind {kind!r}"}


# ---------------------------------------------------------------------------
# response validation and application

def _parse_counts(doc: dict) -> Counter:
    counts = doc.get("counts")
    if not isinstance(counts, dict):
        raise AssistError("detect_verify response lacks counts")
    out: Counter = Counter()
    for key, n in counts.items():
        try:
            ctype = ComponentType(key)
        except ValueError:
            raise AssistError(f"unknown component type {key!r}") from None
        if not isinstance(n, int) or n < 0:
            raise AssistError(f"bad count for {key!r}")
        out[ctype] = n
    return out


def apply_assist(
    client,
    img: GrayImage,
    comps: list[Component],
    nodemap,
    assignments: dict,
    assign_flags: list[Flag],
    warnings: list[str],
) -> list[Flag]:
    """Run both assist calls; returns concordance flags from detect_verify.

    Designator/value suggestions are applied only to components whose
    assignment carries an unresolved missing_value or prefix_conflict flag;
    everything else is logged and ignored. Any failure appends a single
    assist_unavailable warning and changes nothing.
    """
    extra: list[Flag] = []
    try:
        from .detect import components_to_doc

        h, w = img.data.shape
        ctx = components_to_doc([c for c in comps], (w, h))
        resp = client.request(build_request("detect_verify", img, ctx))
        counts = _parse_counts(resp)
        report = verify_concordance(comps, counts)
        extra += report.flags

        ctx2 = {
            "assignments": [
                {"component": cid, "designator": a.designator}
                for cid, a in sorted(assignments.items())
            ],
            "nets": len(nodemap.nets),
        }
        resp2 = client.request(build_request("designator_assign", img, ctx2))
        suggestions = resp2.get("suggestions")
        if not isinstance(suggestions, list):
            raise AssistError("designator_assign response lacks suggestions")
        flagged = {
            f.subject: f
            for f in assign_flags
            if f.kind in (FlagKind.missing_value, FlagKind.prefix_conflict)
            and f.resolution is None
        }
        for sug in suggestions:
            cid = sug.get("component") if isinstance(sug, dict) else None
            if not isinstance(cid, int) or cid not in assignments:
                warnings.append(f"assist suggestion dropped: unknown component {cid!r}")
                continue
            if cid not in flagged:
                warnings.append(
                    f"assist suggestion for unflagged component {cid} ignored"
                )
                continue
            a = assignments[cid]
            flag = flagged[cid]
            applied = []
            desig = sug.get("designator")
            if flag.kind is FlagKind.prefix_conflict and isinstance(desig, str) \
                    and text.is_designator(desig):
                a.designator = desig
                applied.append(f"designator={desig}")
            val = sug.get("value")
            if flag.kind is FlagKind.missing_value and isinstance(val, str):
                comp = next(c for c in comps if c.id == cid)
                try:
                    if comp.ctype in netlist.DEFAULT_MODEL:
                        a.model = val.upper()
                    else:
                        a.value = netlist.parse_value(val, unit_words=True)
                    a.value_text = val
                    applied.append(f"value={val}")
                except netlist.ValueSyntaxError:
                    warnings.append(
                        f"assist suggestion dropped: bad value {val!r} for {cid}"
                    )
            if applied:
                flag.resolution = "assist: " + ", ".join(applied)
    except AssistError as exc:
        warnings.append(f"assist_unavailable: {exc}")
    return extra
