"""Connectivity inference: mask symbols out of the wiring image, label what
remains, filter artifact regions, merge ground-equipotential regions, and map
component terminals to named nodes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detect import Component, ComponentType, Flag, FlagKind, TERMINAL_ROLES, Terminal
from .geometry import BBox
from .raster import BinaryImage, LabelMap


@dataclass
class Touchpoint:
    component_id: int
    role: str
    xy: tuple[int, int]


@dataclass
class WireNet:
    net_id: int
    region_labels: frozenset[int]
    pixel_bbox: BBox
    touchpoints: list[Touchpoint]
    anchor: tuple[int, int]  # lexicographically smallest (y, x) pixel
    area: int = 0
    is_ground: bool = False


@dataclass
class NodeMap:
    nets: list[WireNet]
    names: dict[int, str]
    bindings: dict[int, list[tuple[str, str]]]  # component id -> [(role, node name)]


def mask_components(img: BinaryImage, comps: list[Component], dilation: int = 2) -> BinaryImage:
    """Clear every component bbox expanded by `dilation` px per side."""
    if dilation < 0:
        raise ValueError("dilation must be >= 0")
    bits = img.bits.copy()
    h, w = bits.shape
    for comp in comps:
        b = comp.bbox.expand(dilation)
        bits[max(0, b.y) : min(h, b.y2), max(0, b.x) : min(w, b.x2)] = False
    return BinaryImage(bits)


def _synth_terminals(comp: Component, contacts: list[tuple[int, int]]) -> list[Terminal]:
    """Fabricate terminal anchors from wire contact points, in clockwise
    perimeter order from the top-left bbox corner, roles in canonical order."""
    b = comp.bbox
    cx, cy = b.center

    def perimeter_pos(p):
        x, y = p
        ang = math.atan2(x - cx, -(y - cy))  # clockwise from 12 o'clock
        # rotate so the top-left corner comes first
        corner = math.atan2(b.x - cx, -(b.y - cy))
        return (ang - corner) % (2 * math.pi)

    ordered = sorted(set(contacts), key=lambda p: (perimeter_pos(p), p[1], p[0]))
    roles = TERMINAL_ROLES[comp.ctype]
    return [Terminal(role, xy) for role, xy in zip(roles, ordered)]


def extract_nets(
    labels: LabelMap,
    comps: list[Component],
    min_area: int = 15,
    band: int = 3,
) -> tuple[list[WireNet], list[Flag]]:
    """Turn labeled wiring regions into candidate nets.

    A region's touchpoints are its pixels inside the band-dilated perimeter
    ring of a component bbox, attributed to the nearest terminal anchor (or a
    synthesized terminal when the detector supplied none). Regions below
    min_area are dropped silently; regions touching fewer than two components
    are dropped unless they touch a ground symbol, and a dropped region with
    exactly one touchpoint raises dangling_terminal.
    """
    flags: list[Flag] = []
    h, w = labels.height, labels.width
    lab = labels.labels
    # collect region pixels near each component
    contact_by_region: dict[int, dict[int, list[tuple[int, int]]]] = {}
    for comp in comps:
        ring = comp.bbox.expand(band)
        y0, y1 = max(0, ring.y), min(h, ring.y2)
        x0, x1 = max(0, ring.x), min(w, ring.x2)
        window = lab[y0:y1, x0:x1]
        ys, xs = np.nonzero(window)
        for yy, xx in zip(ys.tolist(), xs.tolist()):
            region = int(window[yy, xx])
            contact_by_region.setdefault(region, {}).setdefault(comp.id, []).append(
                (x0 + xx, y0 + yy)
            )
    comp_by_id = {c.id: c for c in comps}
    nets: list[WireNet] = []
    for region_idx, stats in enumerate(labels.region_stats, start=1):
        contacts = contact_by_region.get(region_idx, {})
        touchpoints: list[Touchpoint] = []
        touches_ground = False
        for cid in sorted(contacts):
            comp = comp_by_id[cid]
            pts = contacts[cid]
            if comp.ctype is ComponentType.ground:
                touches_ground = True
            terms = list(comp.terminals)
            if not terms:
                terms = _synth_terminals(comp, pts)
                if len(pts) > 0 and len(terms) < len(TERMINAL_ROLES[comp.ctype]):
                    pass  # counted at map_terminals time
            # nearest region pixel per terminal; keep terminals that actually touch
            per_term: dict[str, tuple[float, tuple[int, int]]] = {}
            for px, py in pts:
                best_role, best_d = None, None
                for t in terms:
                    d = (px - t.xy[0]) ** 2 + (py - t.xy[1]) ** 2
                    if best_d is None or d < best_d:
                        best_d, best_role = d, t.role
                if best_role is None:
                    continue
                prev = per_term.get(best_role)
                cand = (best_d, (px, py))
                if prev is None or cand < prev:
                    per_term[best_role] = cand
            for role in sorted(per_term):
                touchpoints.append(Touchpoint(cid, role, per_term[role][1]))
        if stats.area < min_area:
            continue
        distinct = {tp.component_id for tp in touchpoints}
        if len(distinct) < 2 and not touches_ground:
            if len(touchpoints) == 1:
                tp = touchpoints[0]
                flags.append(Flag(
                    kind=FlagKind.dangling_terminal, subject=tp.component_id,
                    detail=f"wire region {region_idx} (area {stats.area}) touches only "
                           f"component {tp.component_id} terminal {tp.role}",
                ))
            continue
        nets.append(WireNet(
            net_id=len(nets),
            region_labels=frozenset({region_idx}),
            pixel_bbox=stats.bbox,
            touchpoints=touchpoints,
            anchor=stats.seed,
            area=stats.area,
            is_ground=False,
        ))
    return nets, flags


def merge_equipotential(nets: list[WireNet], comps: list[Component]) -> list[WireNet]:
    """Merge every net touching a ground symbol into one ground net; ground
    touchpoints disappear from the merged result. Net ids are reassigned in
    ascending anchor order. Idempotent."""
    ground_ids = {c.id for c in comps if c.ctype is ComponentType.ground}
    grounded, rest = [], []
    for net in nets:
        if net.is_ground or any(tp.component_id in ground_ids for tp in net.touchpoints):
            grounded.append(net)
        else:
            rest.append(net)
    merged: list[WireNet] = []
    if grounded:
        regions = frozenset().union(*(n.region_labels for n in grounded))
        touchpoints = [
            tp for n in grounded for tp in n.touchpoints
            if tp.component_id not in ground_ids
        ]
        anchor = min(n.anchor for n in grounded)
        xs = [n.pixel_bbox for n in grounded]
        x0 = min(b.x for b in xs)
        y0 = min(b.y for b in xs)
        x1 = max(b.x2 for b in xs)
        y1 = max(b.y2 for b in xs)
        merged.append(WireNet(
            net_id=-1,
            region_labels=regions,
            pixel_bbox=BBox(x0, y0, x1 - x0, y1 - y0),
            touchpoints=touchpoints,
            anchor=anchor,
            area=sum(n.area for n in grounded),
            is_ground=True,
        ))
    merged.extend(rest)
    merged.sort(key=lambda n: n.anchor)
    return [
        WireNet(
            net_id=i, region_labels=n.region_labels, pixel_bbox=n.pixel_bbox,
            touchpoints=n.touchpoints, anchor=n.anchor, area=n.area,
            is_ground=n.is_ground,
        )
        for i, n in enumerate(merged)
    ]


def map_terminals(nets: list[WireNet], comps: list[Component]) -> tuple[NodeMap, list[Flag]]:
    """Name the nets ("0" for ground, then "N1".. in anchor order) and bind
    every expected terminal of every non-ground component to the net whose
    touchpoint claims it. Unclaimed terminals raise dangling_terminal."""
    flags: list[Flag] = []
    names: dict[int, str] = {}
    counter = 1
    for net in nets:  # nets already in anchor order
        if net.is_ground:
            names[net.net_id] = "0"
    for net in nets:
        if not net.is_ground:
            names[net.net_id] = f"N{counter}"
            counter += 1
    bindings: dict[int, list[tuple[str, str]]] = {}
    claim: dict[tuple[int, str], tuple[float, int]] = {}
    comp_by_id = {c.id: c for c in comps}
    for net in nets:
        for tp in net.touchpoints:
            comp = comp_by_id.get(tp.component_id)
            if comp is None or comp.ctype is ComponentType.ground:
                continue
            anchor_xy = next((t.xy for t in comp.terminals if t.role == tp.role), tp.xy)
            d = (tp.xy[0] - anchor_xy[0]) ** 2 + (tp.xy[1] - anchor_xy[1]) ** 2
            key = (tp.component_id, tp.role)
            if key not in claim or (d, net.net_id) < claim[key]:
                claim[key] = (d, net.net_id)
    for comp in comps:
        if comp.ctype is ComponentType.ground:
            continue
        roles = TERMINAL_ROLES[comp.ctype]
        if comp.terminals and len(comp.terminals) != len(roles):
            flags.append(Flag(
                kind=FlagKind.terminal_count_mismatch, subject=comp.id,
                detail=f"{comp.ctype.value} has {len(comp.terminals)} terminals, "
                       f"expected {len(roles)}",
            ))
        blist: list[tuple[str, str]] = []
        for role in roles:
            hit = claim.get((comp.id, role))
            if hit is None:
                flags.append(Flag(
                    kind=FlagKind.dangling_terminal, subject=comp.id,
                    detail=f"terminal {role} of component {comp.id} "
                           f"({comp.ctype.value}) touches no net",
                ))
                continue
            blist.append((role, names[hit[1]]))
        bindings[comp.id] = blist
    return NodeMap(nets=nets, names=names, bindings=bindings), flags


def nets_debug_doc(nodemap: NodeMap) -> dict:
    return {
        "nets": [
            {
                "net_id": n.net_id,
                "name": nodemap.names[n.net_id],
                "area": n.area,
                "bbox": n.pixel_bbox.as_list(),
                "is_ground": n.is_ground,
                "touchpoints": [
                    {"component": tp.component_id, "role": tp.role, "xy": list(tp.xy)}
                    for tp in n.touchpoints
                ],
            }
            for n in nodemap.nets
        ]
    }
