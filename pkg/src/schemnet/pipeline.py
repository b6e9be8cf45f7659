"""End-to-end conversion: grayscale schematic image in, SPICE netlist plus
review flags out, with optional externally supplied detections/OCR, review
overrides, and an advisory assist service."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

from . import connect, detect, netlist, raster, symbols, text
from .config import Config
from .detect import Component, ComponentType, Flag, FlagKind, Terminal, TERMINAL_ROLES
from .raster import BinaryImage, GrayImage


class OverrideError(ValueError):
    pass


_ACTIONS = ("set_type", "set_designator", "set_value", "bind_terminal", "accept")


@dataclass(frozen=True)
class Override:
    action: str
    component: Optional[int] = None  # subject for set_* / bind_terminal
    flag: Optional[int] = None       # subject for accept
    payload: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        doc: dict = {"action": self.action, "payload": dict(self.payload)}
        if self.component is not None:
            doc["component"] = self.component
        if self.flag is not None:
            doc["flag"] = self.flag
        return doc


def parse_override(doc: dict) -> Override:
    if not isinstance(doc, dict):
        raise OverrideError("override must be an object")
    action = doc.get("action")
    if action not in _ACTIONS:
        raise OverrideError(f"unknown action {action!r}")
    payload = doc.get("payload", {})
    if not isinstance(payload, dict):
        raise OverrideError("payload must be an object")
    comp = doc.get("component")
    flag = doc.get("flag")
    if action == "accept":
        if not isinstance(flag, int):
            raise OverrideError("accept requires an integer flag id")
        return Override(action=action, flag=flag, payload=payload)
    if not isinstance(comp, int):
        raise OverrideError(f"{action} requires an integer component id")
    if action == "set_type":
        tname = payload.get("type")
        try:
            ComponentType(tname)
        except ValueError:
            raise OverrideError(f"unknown component type {tname!r}") from None
        if ComponentType(tname) is ComponentType.ground:
            raise OverrideError("cannot override a component to ground")
    elif action == "set_designator":
        desig = payload.get("designator")
        if not (isinstance(desig, str) and text.is_designator(desig)):
            raise OverrideError(f"invalid designator {desig!r}")
    elif action == "set_value":
        val = payload.get("value")
        if not isinstance(val, str):
            raise OverrideError("set_value requires a string value")
        try:
            netlist.parse_value(val, unit_words=True)
        except netlist.ValueSyntaxError as exc:
            raise OverrideError(str(exc)) from None
    elif action == "bind_terminal":
        role = payload.get("role")
        node = payload.get("node")
        if not isinstance(role, str) or not role:
            raise OverrideError("bind_terminal requires a role")
        if not isinstance(node, str) or not node:
            raise OverrideError("bind_terminal requires a node name")
    return Override(action=action, component=comp, payload=payload)


def parse_overrides(docs: list) -> list[Override]:
    if not isinstance(docs, list):
        raise OverrideError("overrides must be a list")
    return [parse_override(d) for d in docs]


@dataclass
class ConvertResult:
    config: Config
    img_dims: tuple[int, int]
    binary: BinaryImage
    components: list[Component]
    texts: list
    nodemap: connect.NodeMap
    bindings: list
    assignments: dict
    flags: list[Flag]
    netlist: Optional[netlist.Netlist]
    netlist_text: Optional[str]
    concordance: Optional[detect.ConcordanceReport] = None
    warnings: list[str] = field(default_factory=list)

    def unresolved_flags(self) -> list[Flag]:
        return [f for f in self.flags if f.resolution is None]

    def status(self) -> str:
        return "complete" if not self.unresolved_flags() else "flagged"

    def flags_doc(self) -> dict:
        return {
            "flags": [dict(f.to_json(), id=i) for i, f in enumerate(self.flags)],
            "warnings": list(self.warnings),
            "config": self.config.as_dict(),
        }


def _retype(comp: Component, ctype: ComponentType) -> Component:
    roles = TERMINAL_ROLES[ctype]
    terms = tuple(
        Terminal(role, t.xy) for role, t in zip(roles, comp.terminals)
    )
    return replace(comp, ctype=ctype, terminals=terms)


def convert_image(
    img: GrayImage,
    cfg: Config | None = None,
    detections_doc: dict | str | bytes | None = None,
    ocr_doc: dict | str | bytes | None = None,
    overrides: list[Override] = (),
    force: bool = False,
    library: symbols.SymbolLibrary | None = None,
    assist_client=None,
) -> ConvertResult:
    """Run the full pipeline deterministically over one image.

    When a detection document is supplied it is authoritative; the built-in
    template detector still runs and disagreements in per-type counts become
    review flags (two independent detectors, cross-checked). Overrides patch
    the corresponding stage artifact before dependent stages run; `accept`
    resolves a flag by id without changing any artifact.
    """
    cfg = cfg or Config()
    lib = library or symbols.default_library()
    warnings: list[str] = []
    h, w = img.data.shape
    dims = (w, h)

    binary = raster.binarize(img)

    template_comps = detect.detect_template(binary, lib, scales=(1, 2))
    concordance = None
    if detections_doc is not None:
        comps = detect.ingest_detections(detections_doc, dims)
        concordance = detect.verify_concordance(template_comps, comps)
    else:
        comps = template_comps

    for ov in overrides:
        if ov.action != "set_type":
            continue
        if not any(c.id == ov.component for c in comps):
            raise OverrideError(f"unknown component id {ov.component}")
        comps = [
            _retype(c, ComponentType(ov.payload["type"])) if c.id == ov.component else c
            for c in comps
        ]
    if overrides and detections_doc is not None:
        # recheck agreement against the post-override list
        concordance = detect.verify_concordance(template_comps, comps)

    if ocr_doc is not None:
        texts = text.ingest_ocr(ocr_doc)
    else:
        texts = text.recognize_glyphs(binary, [c.bbox for c in comps])

    masked = connect.mask_components(binary, comps, dilation=cfg.dilation)
    closed = raster.close_gaps(masked, cfg.gap_radius)
    labels = raster.label_components(closed, connectivity=cfg.connectivity)
    nets, net_flags = connect.extract_nets(
        labels, comps, min_area=cfg.min_area, band=cfg.band
    )
    nets = connect.merge_equipotential(nets, comps)
    nodemap, map_flags = connect.map_terminals(nets, comps)

    for ov in overrides:
        if ov.action != "bind_terminal":
            continue
        comp = next((c for c in comps if c.id == ov.component), None)
        if comp is None:
            raise OverrideError(f"unknown component id {ov.component}")
        role = ov.payload["role"]
        if role not in TERMINAL_ROLES[comp.ctype]:
            raise OverrideError(f"role {role!r} invalid for {comp.ctype.value}")
        bound = [(r, n) for r, n in nodemap.bindings.get(comp.id, []) if r != role]
        bound.append((role, ov.payload["node"]))
        nodemap.bindings[comp.id] = sorted(bound)
        for f in net_flags + map_flags:
            if (f.kind is FlagKind.dangling_terminal and f.subject == comp.id
                    and role in f.detail and f.resolution is None):
                f.resolution = f"bound to {ov.payload['node']} by override"

    max_bind = cfg.max_bind_distance if cfg.max_bind_distance > 0 else None
    bindings, bind_flags = text.bind_text(comps, texts, max_bind_distance=max_bind)
    assignments, assign_flags = netlist.assign_designators(comps, bindings)

    assist_flags: list[Flag] = []
    if assist_client is not None:
        from . import assist

        assist_flags = assist.apply_assist(
            assist_client, img, comps, nodemap, assignments,
            assign_flags, warnings,
        )

    for ov in overrides:
        if ov.action not in ("set_designator", "set_value"):
            continue
        if ov.component not in assignments:
            raise OverrideError(f"component {ov.component} takes no assignment")
        a = assignments[ov.component]
        if ov.action == "set_designator":
            a.designator = ov.payload["designator"]
            cleared = FlagKind.prefix_conflict
        else:
            comp = next(c for c in comps if c.id == ov.component)
            vtext = ov.payload["value"]
            if comp.ctype in netlist.DEFAULT_MODEL:
                a.model = vtext.upper()
            else:
                a.value = netlist.parse_value(vtext, unit_words=True)
            a.value_text = vtext
            cleared = FlagKind.missing_value
        for f in assign_flags:
            if f.kind is cleared and f.subject == ov.component and f.resolution is None:
                f.resolution = f"{ov.action} override"

    flags: list[Flag] = []
    if concordance is not None:
        flags += concordance.flags
    flags += assist_flags
    flags += net_flags + map_flags + bind_flags + assign_flags

    for ov in overrides:
        if ov.action != "accept":
            continue
        if not (0 <= ov.flag < len(flags)):
            raise OverrideError(f"unknown flag id {ov.flag}")
        if flags[ov.flag].resolution is None:
            flags[ov.flag].resolution = "accepted"

    unresolved = [f for f in flags if f.resolution is None]
    net = txt = None
    try:
        net, txt = netlist.emit_netlist(
            nodemap, comps, assignments, unresolved, force=force
        )
    except netlist.EmissionError as exc:
        warnings.append(f"netlist withheld: {exc}")

    return ConvertResult(
        config=cfg,
        img_dims=dims,
        binary=binary,
        components=comps,
        texts=texts,
        nodemap=nodemap,
        bindings=bindings,
        assignments=assignments,
        flags=flags,
        netlist=net,
        netlist_text=txt,
        concordance=concordance,
        warnings=warnings,
    )


def convert_bytes(payload: bytes, **kwargs) -> ConvertResult:
    return convert_image(raster.load_image(payload), **kwargs)


# ---------------------------------------------------------------------------
# stage dumps

def stage_doc(result: ConvertResult, stage: str):
    """Serializable artifact for --dump-stage; bytes for images, dict for JSON."""
    if stage == "binary":
        return raster.write_pgm(result.binary)
    if stage == "detections":
        return detect.components_to_doc(result.components, result.img_dims)
    if stage == "texts":
        return text.texts_to_doc(result.texts)
    if stage == "nets":
        return connect.nets_debug_doc(result.nodemap)
    if stage == "netlist":
        cards = [] if result.netlist is None else [
            c.line() for c in result.netlist.cards
        ]
        return {"text": result.netlist_text, "cards": cards}
    raise ValueError(f"unknown stage {stage!r}; "
                     "expected binary|detections|texts|nets|netlist")


STAGES = ("binary", "detections", "texts", "nets", "netlist")
